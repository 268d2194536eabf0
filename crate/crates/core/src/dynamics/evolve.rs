use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::generator::Generator;
use crate::dense;
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, jump_operators, JumpOperator, ModelSpec};
use crate::operator_core::{
    cat_state, total_parity, DensityMatrix, HilbertSpace, OperatorMatrix, Parity, StateVector,
};
use crate::scalar::{creal, Cx, Real};

/// Trace drift beyond which a run is declared numerically failed instead of
/// silently renormalized.
const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Eigenvalues of ρ below minus this value fail the positivity check.
const POSITIVITY_TOL: f64 = 1e-6;

fn d_dt_max<T: Real>() -> T {
    T::lit(0.002)
}
fn d_rel_tol<T: Real>() -> T {
    T::lit(1e-7)
}
fn d_abs_tol<T: Real>() -> T {
    T::lit(1e-9)
}
fn d_sample<T: Real>() -> T {
    T::lit(0.05)
}
fn d_steady<T: Real>() -> T {
    T::lit(1e-6)
}
fn d_positivity<T: Real>() -> Option<T> {
    Some(T::lit(0.5))
}
fn d_true() -> bool {
    true
}

/// Integration controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct EvolutionConfig<T> {
    pub t_final: T,
    #[serde(default = "d_dt_max")]
    pub dt_max: T,
    #[serde(default = "d_rel_tol")]
    pub rel_tol: T,
    #[serde(default = "d_abs_tol")]
    pub abs_tol: T,
    /// Spacing of recorded observables.
    #[serde(default = "d_sample")]
    pub sample_interval: T,
    /// Stop once the trace-norm bound of dρ/dt falls below this value.
    #[serde(default = "d_steady")]
    pub steady_tol: T,
    #[serde(default = "d_true")]
    pub stop_at_steady: bool,
    /// Classical RK4 with this step instead of adaptive Dormand–Prince.
    #[serde(default)]
    pub fixed_step: Option<T>,
    /// Interval between Cholesky positivity checks; `None` checks only the
    /// final state.
    #[serde(default = "d_positivity")]
    pub positivity_interval: Option<T>,
    /// Times at which full density matrices are kept.
    #[serde(default)]
    pub store_times: Vec<T>,
    #[serde(default)]
    pub store_every_sample: bool,
}

impl<T: Real> EvolutionConfig<T> {
    pub fn new(t_final: T) -> Self {
        Self {
            t_final,
            dt_max: d_dt_max(),
            rel_tol: d_rel_tol(),
            abs_tol: d_abs_tol(),
            sample_interval: d_sample(),
            steady_tol: d_steady(),
            stop_at_steady: true,
            fixed_step: None,
            positivity_interval: d_positivity(),
            store_times: Vec::new(),
            store_every_sample: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        if !(self.t_final >= T::zero()) {
            return Err(Error::param("t_final", "must be non-negative"));
        }
        pos("dt_max", self.dt_max)?;
        pos("rel_tol", self.rel_tol)?;
        pos("abs_tol", self.abs_tol)?;
        pos("sample_interval", self.sample_interval)?;
        pos("steady_tol", self.steady_tol)?;
        if let Some(h) = self.fixed_step {
            pos("fixed_step", h)?;
        }
        if let Some(p) = self.positivity_interval {
            pos("positivity_interval", p)?;
        }
        for &t in &self.store_times {
            if !(t >= T::zero() && t <= self.t_final) {
                return Err(Error::param("store_times", format!("{t} outside [0, t_final]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    /// Largest |Tr ρ − 1| seen before renormalization.
    pub max_trace_drift: f64,
}

/// Sampled observables plus selected density matrices.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub space: HilbertSpace,
    pub times: Vec<T>,
    /// Overlap with the target cat; `None` when no target was given.
    pub fidelity: Option<Vec<T>>,
    /// Expectation of the total phonon parity.
    pub parity: Vec<T>,
    pub pop_e: Vec<T>,
    /// Purity of the vibrational reduced state.
    pub purity: Vec<T>,
    /// Trace-norm bound of dρ/dt.
    pub rhs_norm: Vec<T>,
    pub snapshots: Vec<(T, DensityMatrix<T>)>,
    pub final_state: DensityMatrix<T>,
    /// Time at which the steady-state criterion stopped the run.
    pub steady_at: Option<T>,
    pub stats: IntegrationStats,
}

impl<T: Real> Trajectory<T> {
    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: T) -> usize {
        let mut best = 0;
        for (k, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    pub fn fidelity_at(&self, t: T) -> Option<T> {
        self.fidelity.as_ref().map(|f| f[self.nearest(t)])
    }

    /// Stored density matrix closest to `t`.
    pub fn snapshot_at(&self, t: T) -> Option<&DensityMatrix<T>> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap())
            .map(|(_, r)| r)
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("trajectory has at least one sample")
    }
}

/// Per-sample observables evaluated on the flat row-major ρ.
struct Probe<T> {
    n: usize,
    vib: usize,
    levels: usize,
    parity_sign: Vec<T>,
    target: Option<Vec<Cx<T>>>,
}

impl<T: Real> Probe<T> {
    fn new(space: &HilbertSpace, target: Option<&StateVector<T>>) -> Result<Self> {
        let vib_space = space.vibrational_part();
        let target = match target {
            Some(t) if t.space() != &vib_space => {
                return Err(Error::DimensionMismatch {
                    expected: vib_space.total_dim(),
                    found: t.space().total_dim(),
                })
            }
            Some(t) => Some(t.amplitudes().to_vec()),
            None => None,
        };
        let n = space.total_dim();
        Ok(Self {
            n,
            vib: space.vib_dim(),
            levels: space.internal_levels(),
            parity_sign: (0..n)
                .map(|i| if space.is_even(i) { T::one() } else { -T::one() })
                .collect(),
            target,
        })
    }

    /// (fidelity, parity, pop_e, vibrational purity)
    fn measure(&self, rho: &[Cx<T>]) -> (Option<T>, T, T, T) {
        let (n, v) = (self.n, self.vib);
        let parity = (0..n).map(|i| self.parity_sign[i] * rho[i * n + i].re).sum();
        let pop_e = if self.levels > 1 {
            (v..2 * v).map(|i| rho[i * n + i].re).sum()
        } else {
            T::zero()
        };
        let mut purity = T::zero();
        let mut fid = Cx::zero();
        for a in 0..v {
            for b in 0..v {
                let mut r = Cx::zero();
                for s in 0..self.levels {
                    r += rho[(s * v + a) * n + s * v + b];
                }
                purity += r.norm_sqr();
                if let Some(psi) = &self.target {
                    fid += psi[a].conj() * r * psi[b];
                }
            }
        }
        (self.target.as_ref().map(|_| fid.re), parity, pop_e, purity)
    }
}

/// Evolves `rho0` under the model, tracking the fidelity to the cat of
/// amplitude `√(ε/λ)/m` whose parity matches the initial state (even when the
/// initial parity is indefinite).
pub fn evolve<T: Real>(
    rho0: &DensityMatrix<T>,
    spec: &ModelSpec<T>,
    cfg: &EvolutionConfig<T>,
) -> Result<Trajectory<T>> {
    spec.validate()?;
    let h = build_hamiltonian(spec)?;
    let jumps = jump_operators(spec)?;
    let target = default_target(rho0, spec)?;
    evolve_with(rho0, &h, &jumps, cfg, target.as_ref())
}

fn default_target<T: Real>(rho0: &DensityMatrix<T>, spec: &ModelSpec<T>) -> Result<Option<StateVector<T>>> {
    if spec.epsilon <= T::zero() {
        return Ok(None);
    }
    let p = rho0.expect(&total_parity(rho0.space()))?.re;
    let parity = if (p + T::one()).abs() < T::lit(1e-9) {
        Parity::Odd
    } else {
        Parity::Even
    };
    let alpha = creal(spec.cat_amplitude()?);
    Ok(Some(cat_state(&rho0.space().vibrational_part(), alpha, parity)?))
}

struct Workspace<T> {
    gen: Generator<T>,
    scratch: Vec<Cx<T>>,
    evals: usize,
}

impl<T: Real> Workspace<T> {
    fn f(&mut self, y: &[Cx<T>], out: &mut [Cx<T>]) {
        self.evals += 1;
        self.gen.apply(y, out, &mut self.scratch);
    }
}

// Dormand–Prince 5(4) tableau.
const A: [&[f64]; 6] = [
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Max-norm of the embedded error estimate relative to the mixed tolerance;
/// infinite when the trial step produced non-finite values.
fn error_norm<T: Real>(y: &[Cx<T>], y5: &[Cx<T>], k: &[Vec<Cx<T>>], h: T, cfg: &EvolutionConfig<T>) -> T {
    let e: Vec<T> = E.iter().map(|&c| T::lit(c) * h).collect();
    let (k0, k2, k3, k4, k5, k6) = (&k[0], &k[2], &k[3], &k[4], &k[5], &k[6]);
    let mut worst = T::zero();
    for i in 0..y.len() {
        let d = k0[i] * e[0] + k2[i] * e[2] + k3[i] * e[3] + k4[i] * e[4] + k5[i] * e[5] + k6[i] * e[6];
        let mag = y[i].norm_sqr().max(y5[i].norm_sqr()).sqrt();
        let sc = cfg.abs_tol + cfg.rel_tol * mag;
        let r = d.norm_sqr() / (sc * sc);
        // NaN must not compare as acceptable
        if !(r <= worst) {
            worst = if r.is_nan() { T::infinity() } else { r };
        }
    }
    worst.sqrt()
}

/// `out = y + h Σ c_i k_i` in a single pass, skipping zero coefficients.
fn combine<T: Real>(out: &mut [Cx<T>], y: &[Cx<T>], h: T, coef: &[f64], ks: &[Vec<Cx<T>>]) {
    let terms: Vec<(T, &[Cx<T>])> = coef
        .iter()
        .zip(ks)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, k)| (h * T::lit(*c), k.as_slice()))
        .collect();
    match terms.as_slice() {
        [(a, ka)] => {
            for i in 0..out.len() {
                out[i] = y[i] + ka[i] * *a;
            }
        }
        [(a, ka), (b, kb)] => {
            for i in 0..out.len() {
                out[i] = y[i] + ka[i] * *a + kb[i] * *b;
            }
        }
        [(a, ka), (b, kb), (c, kc)] => {
            for i in 0..out.len() {
                out[i] = y[i] + ka[i] * *a + kb[i] * *b + kc[i] * *c;
            }
        }
        _ => {
            for i in 0..out.len() {
                let mut acc = y[i];
                for (c, k) in &terms {
                    acc += k[i] * *c;
                }
                out[i] = acc;
            }
        }
    }
}

enum Stepper<T> {
    Adaptive {
        k: Vec<Vec<Cx<T>>>,
        fresh: bool,
        h: T,
    },
    Fixed {
        k: Vec<Vec<Cx<T>>>,
        h: T,
    },
}

impl<T: Real> Stepper<T> {
    /// Advances `y` from `t` to exactly `t_end`.
    fn advance(
        &mut self,
        ws: &mut Workspace<T>,
        y: &mut Vec<Cx<T>>,
        tmp: &mut Vec<Cx<T>>,
        t: &mut T,
        t_end: T,
        cfg: &EvolutionConfig<T>,
        stats: &mut IntegrationStats,
    ) -> Result<()> {
        let tiny = T::epsilon() * T::lit(64.0) * t_end.abs().max(T::one());
        match self {
            Stepper::Adaptive { k, fresh, h } => {
                while t_end - *t > tiny {
                    if !*fresh {
                        let (k0, _) = k.split_first_mut().unwrap();
                        ws.f(y, k0);
                        *fresh = true;
                    }
                    let remaining = t_end - *t;
                    let mut step = h.min(cfg.dt_max);
                    let last = step >= remaining;
                    if last {
                        step = remaining;
                    }
                    for s in 0..6 {
                        combine(tmp, y, step, A[s], &k[..=s]);
                        ws.f(tmp, &mut k[s + 1]);
                    }
                    // tmp holds the 5th-order solution; k[6] = f(tmp)
                    let err = error_norm(y, tmp, k, step, cfg);
                    if err <= T::one() {
                        std::mem::swap(y, tmp);
                        k.swap(0, 6);
                        *t = if last { t_end } else { *t + step };
                        stats.accepted += 1;
                        let sf = step.to_f64_lossy();
                        if stats.accepted == 1 || sf < stats.min_dt {
                            stats.min_dt = sf;
                        }
                        stats.max_dt = stats.max_dt.max(sf);
                        let grow = if err == T::zero() {
                            T::lit(5.0)
                        } else {
                            (T::lit(0.9) * err.powf(T::lit(-0.2))).min(T::lit(5.0))
                        };
                        // a shortened final step says nothing about the next one
                        if !last || step >= *h {
                            *h = (step * grow).min(cfg.dt_max);
                        }
                    } else {
                        stats.rejected += 1;
                        let shrink = if err.is_finite() {
                            (T::lit(0.9) * err.powf(T::lit(-0.25))).max(T::lit(0.2))
                        } else {
                            T::lit(0.2)
                        };
                        *h = step * shrink;
                        if *h < T::lit(1e-12) * t.abs().max(T::one()) {
                            return Err(Error::StepUnderflow {
                                t: t.to_f64_lossy(),
                                dt: h.to_f64_lossy(),
                            });
                        }
                    }
                }
            }
            Stepper::Fixed { k, h } => {
                while t_end - *t > tiny {
                    let remaining = t_end - *t;
                    let last = *h >= remaining - tiny;
                    let step = if last { remaining } else { *h };
                    // classical RK4; k[4] accumulates the increment
                    let half = step / T::lit(2.0);
                    ws.f(y, &mut k[0]);
                    combine(tmp, y, half, &[1.0], &k[..1]);
                    ws.f(tmp, &mut k[1]);
                    combine(tmp, y, half, &[0.0, 1.0], &k[..2]);
                    ws.f(tmp, &mut k[2]);
                    combine(tmp, y, step, &[0.0, 0.0, 1.0], &k[..3]);
                    ws.f(tmp, &mut k[3]);
                    let sixth = step / T::lit(6.0);
                    for i in 0..y.len() {
                        let inc = k[0][i] + (k[1][i] + k[2][i]) * T::lit(2.0) + k[3][i];
                        y[i] += inc * sixth;
                    }
                    *t = if last { t_end } else { *t + step };
                    stats.accepted += 1;
                    let sf = step.to_f64_lossy();
                    if stats.accepted == 1 || sf < stats.min_dt {
                        stats.min_dt = sf;
                    }
                    stats.max_dt = stats.max_dt.max(sf);
                }
            }
        }
        Ok(())
    }

    /// dρ/dt at the current state, reusing the FSAL stage when available.
    fn current_rate<'a>(&'a mut self, ws: &mut Workspace<T>, y: &[Cx<T>]) -> &'a [Cx<T>] {
        match self {
            Stepper::Adaptive { k, fresh, .. } => {
                if !*fresh {
                    ws.f(y, &mut k[0]);
                    *fresh = true;
                }
                &k[0]
            }
            Stepper::Fixed { k, .. } => {
                ws.f(y, &mut k[4]);
                &k[4]
            }
        }
    }

    fn invalidate(&mut self) {
        if let Stepper::Adaptive { fresh, .. } = self {
            *fresh = false;
        }
    }
}

/// Evolves `rho0` under an explicit Hamiltonian and jump list. `target` is a
/// vibrational ket whose overlap with the reduced state is recorded.
pub fn evolve_with<T: Real>(
    rho0: &DensityMatrix<T>,
    h: &OperatorMatrix<T>,
    jumps: &[JumpOperator<T>],
    cfg: &EvolutionConfig<T>,
    target: Option<&StateVector<T>>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let space = rho0.space().clone();
    if h.space() != &space {
        return Err(Error::DimensionMismatch {
            expected: space.total_dim(),
            found: h.dim(),
        });
    }
    let n = space.total_dim();
    let probe = Probe::new(&space, target)?;
    let gen = block_generator(h, jumps, rho0)?;
    let len = gen.state_len();
    let mut ws = Workspace {
        scratch: vec![Cx::zero(); gen.scratch_len()],
        gen,
        evals: 0,
    };
    let mut y: Vec<Cx<T>> = ws.gen.pack(rho0.matrix());
    let mut tmp = vec![Cx::zero(); len];
    let mut stepper = match cfg.fixed_step {
        Some(h) => Stepper::Fixed {
            k: vec![vec![Cx::zero(); len]; 5],
            h,
        },
        None => Stepper::Adaptive {
            k: vec![vec![Cx::zero(); len]; 7],
            fresh: false,
            h: cfg.dt_max.min(T::lit(1e-3)),
        },
    };

    // Sample grid, merged with requested storage times.
    let mut events: Vec<(T, bool)> = Vec::new();
    let mut k = 0usize;
    loop {
        let t = cfg.sample_interval * T::from_usize(k).unwrap();
        if t > cfg.t_final * (T::one() + T::lit(1e-12)) {
            break;
        }
        events.push((t.min(cfg.t_final), true));
        k += 1;
    }
    if events.last().map_or(true, |e| (e.0 - cfg.t_final).abs() > T::lit(1e-12) * cfg.t_final.max(T::one())) {
        events.push((cfg.t_final, true));
    }
    for &s in &cfg.store_times {
        if !events.iter().any(|e| (e.0 - s).abs() <= T::lit(1e-12) * cfg.t_final.max(T::one())) {
            events.push((s, false));
        }
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut traj = Trajectory {
        space: space.clone(),
        times: Vec::new(),
        fidelity: target.map(|_| Vec::new()),
        parity: Vec::new(),
        pop_e: Vec::new(),
        purity: Vec::new(),
        rhs_norm: Vec::new(),
        snapshots: Vec::new(),
        final_state: rho0.clone(),
        steady_at: None,
        stats: IntegrationStats::default(),
    };
    let mut stats = IntegrationStats::default();
    let mut t = T::zero();
    let mut last_positivity = T::zero();

    for (ei, &(te, sample)) in events.iter().enumerate() {
        stepper.advance(&mut ws, &mut y, &mut tmp, &mut t, te, cfg, &mut stats)?;
        t = te;

        let tr = ws.gen.trace(&y).re;
        let drift = (tr - T::one()).abs();
        if !drift.is_finite() || drift > T::lit(TRACE_DRIFT_LIMIT) {
            return Err(Error::TraceDrift {
                t: t.to_f64_lossy(),
                trace: tr.to_f64_lossy(),
            });
        }
        stats.max_trace_drift = stats.max_trace_drift.max(drift.to_f64_lossy());
        if drift > T::zero() {
            y.iter_mut().for_each(|z| *z = *z / tr);
            stepper.invalidate();
        }

        let is_last = ei + 1 == events.len();
        let due = cfg
            .positivity_interval
            .map_or(false, |p| t - last_positivity >= p * (T::one() - T::lit(1e-9)));
        if due || is_last {
            last_positivity = t;
            check_positive(&ws.gen, &y, t)?;
        }

        let keep = cfg.store_every_sample
            || cfg
                .store_times
                .iter()
                .any(|&s| (s - t).abs() <= T::lit(1e-12) * cfg.t_final.max(T::one()));
        if keep {
            traj.snapshots.push((t, DensityMatrix::from_raw(&space, ws.gen.unpack(&y))?));
        }

        if sample {
            let rate = {
                let r = stepper.current_rate(&mut ws, &y);
                ws.gen.trace_norm_bound(r)
            };
            let full: Vec<Cx<T>> = ws.gen.unpack(&y).into_iter().collect();
            let (f, p, e, pu) = probe.measure(&full);
            traj.times.push(t);
            if let (Some(v), Some(f)) = (traj.fidelity.as_mut(), f) {
                v.push(f);
            }
            traj.parity.push(p);
            traj.pop_e.push(e);
            traj.purity.push(pu);
            traj.rhs_norm.push(rate);
            if cfg.stop_at_steady && t > T::zero() && rate < cfg.steady_tol {
                traj.steady_at = Some(t);
                if !is_last {
                    check_positive(&ws.gen, &y, t)?;
                }
                break;
            }
        }
    }

    stats.rhs_evals = ws.evals;
    traj.stats = stats;
    traj.final_state = DensityMatrix::from_raw(&space, ws.gen.unpack(&y))?;
    let _ = n;
    Ok(traj)
}

/// Uses the phonon-parity block structure when the generator and the initial
/// state respect it, and the full operator space otherwise.
fn block_generator<T: Real>(
    h: &OperatorMatrix<T>,
    jumps: &[JumpOperator<T>],
    rho0: &DensityMatrix<T>,
) -> Result<Generator<T>> {
    let s = h.space();
    let n = s.total_dim();
    let parts: Vec<Vec<usize>> = vec![
        (0..n).filter(|&i| s.is_even(i)).collect(),
        (0..n).filter(|&i| !s.is_even(i)).collect(),
    ];
    match Generator::with_blocks(h, jumps, &parts, Some(rho0.matrix())) {
        Ok(g) => Ok(g),
        Err(Error::SectorLeak(_)) => Generator::new(h, jumps),
        Err(e) => Err(e),
    }
}

fn check_positive<T: Real>(gen: &Generator<T>, y: &[Cx<T>], t: T) -> Result<()> {
    for b in gen.unpack_blocks(y) {
        if !dense::is_positive_above(&b, T::lit(POSITIVITY_TOL)) {
            return Err(Error::Positivity {
                t: t.to_f64_lossy(),
                tol: POSITIVITY_TOL,
            });
        }
    }
    Ok(())
}
