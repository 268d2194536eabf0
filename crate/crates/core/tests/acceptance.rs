//! End-to-end acceptance checks on the shipped scenarios. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::path::Path;
use std::time::Instant;

use ion_cat::dynamics::{evolve, steady_state, Sector, SteadyOptions, Trajectory};
use ion_cat::io::Scenario;
use ion_cat::model::{build_hamiltonian, dark_state_residual, ModelSpec, Variant};
use ion_cat::observables::{fidelity_pure, partial_trace_internal, wigner_joint, wigner_origin};
use ion_cat::reduction::{compare_with_full, reduce_with_dim, reduced_fock};
use ion_cat::{Cx, DensityMatrix, Level, Parity};

const W0: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);

fn scenario(name: &str) -> Scenario<f64> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.toml"));
    Scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn run(label: &str, sc: &Scenario<f64>) -> Trajectory<f64> {
    let clock = Instant::now();
    let rho0 = sc.initial_state.build(&sc.model.space().unwrap()).unwrap().to_density();
    let mut cfg = sc.evolution.clone();
    cfg.store_times = vec![sc.evolution.t_final];
    let traj = evolve(&rho0, &sc.model, &cfg).unwrap_or_else(|e| panic!("{label}: {e}"));
    eprintln!(
        "  run {label}: {} steps, {} rejected, {:.1} s",
        traj.stats.accepted,
        traj.stats.rejected,
        clock.elapsed().as_secs_f64()
    );
    traj
}

fn vib_final(t: &Trajectory<f64>) -> DensityMatrix<f64> {
    partial_trace_internal(&t.final_state)
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("criterion {n} {}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn with<F: FnOnce(&mut ModelSpec<f64>)>(sc: &Scenario<f64>, f: F) -> Scenario<f64> {
    let mut s = sc.clone();
    f(&mut s.model);
    s
}

fn main() {
    let mut rep = Report { failed: 0 };
    let even_sc = scenario("fig1a_even_cat");
    let odd_sc = scenario("fig1b_odd_cat");

    let even = run("even", &even_sc);
    let f65 = even.fidelity_at(6.5).unwrap();
    rep.line(1, (f65 - 0.977).abs() <= 0.010, format!("even-cat fidelity at t = 6.5 is {f65:.5} (0.977 ± 0.010)"));

    let odd = run("odd", &odd_sc);
    let f35 = odd.fidelity_at(3.5).unwrap();
    rep.line(2, (f35 - 0.986).abs() <= 0.010, format!("odd-cat fidelity at t = 3.5 is {f35:.5} (0.986 ± 0.010)"));

    let ideal = run("even-ideal", &with(&even_sc, |m| m.variant = Variant::Ideal));
    let (fh, fi) = (even.fidelity_at(7.0).unwrap(), ideal.fidelity_at(7.0).unwrap());
    rep.line(
        3,
        (fh - fi).abs() <= 0.005,
        format!("fidelity at t = 7: higher-order {fh:.5}, ideal {fi:.5}, difference {:.2e} (≤ 0.005)", (fh - fi).abs()),
    );

    let (ve, vo) = (vib_final(&even), vib_final(&odd));
    let (we, wo) = (wigner_origin(&ve), wigner_origin(&vo));
    // diagonal cut: interference term ∝ cos(16y), so y = 0 and y = π/16 have opposite signs
    let y = std::f64::consts::PI / 16.0;
    let diag = |r: &DensityMatrix<f64>, y: f64| wigner_joint(r, Cx::new(0.0, y), Cx::new(0.0, y)).unwrap();
    let (de, dodd) = (diag(&ve, y), diag(&vo, y));
    let ok4 = (we - W0).abs() <= 0.05 && (wo + W0).abs() <= 0.05 && de < 0.0 && dodd > 0.0;
    rep.line(
        4,
        ok4,
        format!("W(0,0) even {we:.4}, odd {wo:.4} (±{W0:.4} ± 0.05); W(iπ/16, iπ/16) even {de:.4}, odd {dodd:.4}"),
    );

    let two = ModelSpec { variant: Variant::Ideal, mode_dims: vec![30, 30], ..even_sc.model.clone() };
    let three = ModelSpec {
        mode_count: 3,
        eta: vec![0.15, 0.1, 0.12],
        gamma_vib: vec![],
        mode_dims: vec![30; 3],
        ..two.clone()
    };
    let mut worst: f64 = 0.0;
    for p in [Parity::Even, Parity::Odd] {
        worst = worst.max(dark_state_residual(&two, p).unwrap());
        worst = worst.max(dark_state_residual(&three, p).unwrap());
    }
    rep.line(5, worst <= 1e-4, format!("largest dark-state residual at dim 30, two and three modes: {worst:.2e} (≤ 1e-4)"));

    let mut dp: f64 = 0.0;
    for (label, sc) in [("even-undamped", &even_sc), ("odd-undamped", &odd_sc)] {
        let t = run(label, &with(sc, |m| {
            m.gamma_vib = vec![];
            m.dephasing_rate = 0.0;
        }));
        let p0 = t.parity[0];
        dp = dp.max(t.parity.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max));
    }
    rep.line(6, dp <= 1e-6, format!("max parity drift without damping or dephasing: {dp:.2e} (≤ 1e-6)"));

    let osc = scenario("oracle_even_cat");
    let clock = Instant::now();
    let red = reduce_with_dim(&osc.model, 44).unwrap();
    let oracle = compare_with_full(&osc.model, &reduced_fock(&red, Level::G, 0).unwrap(), &osc.evolution).unwrap();
    eprintln!("  oracle comparison: {:.1} s", clock.elapsed().as_secs_f64());
    let red40 = reduce_with_dim(&osc.model, 40).unwrap();
    let ss = steady_state(&red40.hamiltonian, &red40.jumps, &SteadyOptions::new(Sector::Even)).unwrap();
    let target = red40.cat(Parity::Even).unwrap().with_internal(&red40.space, Level::G).unwrap();
    let fss = fidelity_pure(&ss, &target).unwrap();
    rep.line(
        7,
        oracle.max_deviation <= 1e-3 && fss >= 0.999,
        format!(
            "reduced vs full max deviation {:.2e} (≤ 1e-3); reduced steady-state fidelity {fss:.6} at c_dim 40 (≥ 0.999)",
            oracle.max_deviation
        ),
    );

    let deph = run("even-dephased", &with(&even_sc, |m| m.dephasing_rate = 5.0));
    let fd = deph.fidelity_at(7.0).unwrap();
    rep.line(
        8,
        (fd - fh).abs() <= 1e-3,
        format!("fidelity at t = 7 with dephasing 5: {fd:.5} vs {fh:.5}, change {:.2e} (≤ 1e-3)", (fd - fh).abs()),
    );

    let base = ModelSpec { mode_dims: vec![22, 22], ..even_sc.model.clone() };
    let h = |v: Variant| build_hamiltonian(&ModelSpec { variant: v, ..base.clone() }).unwrap();
    let d0 = h(Variant::Series { j_max: 0 }).max_abs_diff(&h(Variant::Ideal)).unwrap();
    let d1 = h(Variant::Series { j_max: 1 }).max_abs_diff(&h(Variant::HigherOrder)).unwrap();
    rep.line(
        9,
        d0 <= 1e-12 && d1 <= 1e-12,
        format!("series j_max = 0 vs ideal {d0:.2e}, j_max = 1 vs higher-order {d1:.2e} (≤ 1e-12)"),
    );

    println!("{} of 9 criteria passed", 9 - rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}
