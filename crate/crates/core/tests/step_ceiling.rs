//! The shipped scenarios cap the adaptive step at 0.02 rather than the
//! library default of 0.002. Both must give the same trajectory.

use std::path::Path;

use ion_cat::dynamics::evolve;
use ion_cat::io::Scenario;

#[test]
fn coarse_and_fine_step_ceilings_agree() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/fig1a_even_cat.toml");
    let mut sc = Scenario::<f64>::load(&p).unwrap();
    assert_eq!(sc.evolution.dt_max, 0.02);
    sc.model.mode_dims = vec![16, 16];
    let rho0 = sc.initial_state.build(&sc.model.space().unwrap()).unwrap().to_density();
    let mut cfg = sc.evolution.clone();
    cfg.t_final = 1.0;
    let coarse = evolve(&rho0, &sc.model, &cfg).unwrap();
    cfg.dt_max = 0.002;
    let fine = evolve(&rho0, &sc.model, &cfg).unwrap();
    assert_eq!(coarse.times, fine.times);
    let (fc, ff) = (coarse.fidelity.unwrap(), fine.fidelity.unwrap());
    let worst = fc.iter().zip(&ff).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    let dpe = coarse.pop_e.iter().zip(&fine.pop_e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dpe < 1e-6, "{dpe}");
    assert!(fine.stats.accepted > 5 * coarse.stats.accepted);
}
