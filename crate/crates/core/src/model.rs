//! Effective sideband Hamiltonians of the driven ion, the laser settings that
//! realize them, and the dissipation channels.

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_core::{
    internal_op, lowering, number, HilbertSpace, InternalOp, OperatorMatrix,
};
use crate::scalar::{creal, cunit, Cx, Real};
use crate::sparse::CsrMatrix;

/// Which form of the interaction-picture Hamiltonian to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Lamb-Dicke limit: `[−λ(Σ a_m)² + ε] e^{−iφ₀} S⁺ + H.c.`
    #[default]
    Ideal,
    /// Ideal form plus the leading `η²·n̂` corrections (two modes only).
    HigherOrder,
    /// Nonlinear Jaynes–Cummings expansion with `j + l ≤ j_max` (two modes only).
    Series { j_max: usize },
}

fn default_lambda<T: Real>() -> T {
    T::one()
}

/// Physical parameters of a scenario. Rates are in units of `lambda_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ModelSpec<T> {
    pub mode_count: usize,
    /// Lamb-Dicke parameter per mode.
    pub eta: Vec<T>,
    #[serde(default = "default_lambda")]
    pub lambda_rate: T,
    /// Carrier strength ε.
    pub epsilon: T,
    /// Electronic decay rate Γ.
    #[serde(rename = "Gamma")]
    pub gamma: T,
    /// Vibrational damping per mode; empty means undamped.
    #[serde(default)]
    pub gamma_vib: Vec<T>,
    #[serde(default)]
    pub dephasing_rate: T,
    #[serde(default)]
    pub phi0: T,
    #[serde(default)]
    pub variant: Variant,
    pub mode_dims: Vec<usize>,
}

impl<T: Real> ModelSpec<T> {
    /// Two-mode parameters of the even/odd cat runs: η = (0.15, 0.1),
    /// ε = 16λ, Γ = 100λ, γ_a = γ_b = 0.0005λ, with the higher-order
    /// Hamiltonian.
    pub fn two_mode_reference(dim: usize) -> Self {
        Self {
            mode_count: 2,
            eta: vec![T::lit(0.15), T::lit(0.1)],
            lambda_rate: T::one(),
            epsilon: T::lit(16.0),
            gamma: T::lit(100.0),
            gamma_vib: vec![T::lit(0.0005); 2],
            dephasing_rate: T::zero(),
            phi0: T::zero(),
            variant: Variant::HigherOrder,
            mode_dims: vec![dim; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mode_count == 2 || self.mode_count == 3) {
            return Err(Error::param("mode_count", "must be 2 or 3"));
        }
        if self.eta.len() != self.mode_count {
            return Err(Error::param("eta", format!("expected {} values", self.mode_count)));
        }
        if let Some(e) = self.eta.iter().find(|&&e| !(e > T::zero() && e < T::one())) {
            return Err(Error::param("eta", format!("{e} is outside (0, 1)")));
        }
        if !(self.lambda_rate > T::zero()) {
            return Err(Error::param("lambda_rate", "must be positive"));
        }
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("Gamma", self.gamma),
            ("dephasing_rate", self.dephasing_rate),
        ] {
            if !(v >= T::zero()) {
                return Err(Error::param(name, format!("{v} is negative")));
            }
        }
        if !(self.gamma_vib.is_empty() || self.gamma_vib.len() == self.mode_count) {
            return Err(Error::param("gamma_vib", format!("expected {} values", self.mode_count)));
        }
        if let Some(g) = self.gamma_vib.iter().find(|&&g| !(g >= T::zero())) {
            return Err(Error::param("gamma_vib", format!("{g} is negative")));
        }
        if !self.phi0.is_finite() {
            return Err(Error::param("phi0", "must be finite"));
        }
        if self.mode_dims.len() != self.mode_count {
            return Err(Error::param("mode_dims", format!("expected {} values", self.mode_count)));
        }
        if let Some(d) = self.mode_dims.iter().find(|&&d| d < 2) {
            return Err(Error::param("mode_dims", format!("dimension {d} < 2")));
        }
        if self.mode_count == 3 && self.variant != Variant::Ideal {
            return Err(Error::Unsupported(
                "only the ideal Hamiltonian is available for three modes".into(),
            ));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(&self.mode_dims)
    }

    /// Per-mode coherent amplitude of the dark cat, `√(ε/λ) / m`.
    pub fn cat_amplitude(&self) -> Result<T> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::param("epsilon", "cat generation needs ε > 0"));
        }
        Ok((self.epsilon / self.lambda_rate).sqrt() / T::from_usize(self.mode_count).unwrap())
    }

    pub fn vib_rate(&self, mode: usize) -> T {
        self.gamma_vib.get(mode).copied().unwrap_or_else(T::zero)
    }

    pub fn has_vibrational_damping(&self) -> bool {
        self.gamma_vib.iter().any(|&g| g > T::zero())
    }
}

/// Rabi frequencies `rabi[n] = Ω_n` and phases `phases[n] = φ_n`. Index 0 is
/// the carrier beam; 1..=m drive the two-phonon sidebands of each mode and
/// the remaining entries the cross sidebands (xy, then yz, xz for three modes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LaserSettings<T> {
    pub rabi: Vec<T>,
    pub phases: Vec<T>,
}

fn check_eta<T: Real>(spec: &ModelSpec<T>) -> Result<()> {
    if let Some(m) = spec.eta.iter().position(|&e| e == T::zero()) {
        return Err(Error::param(format!("eta[{m}]"), "zero Lamb-Dicke parameter cannot be matched"));
    }
    Ok(())
}

fn single_factor<T: Real>(eta: T) -> T {
    eta * eta * (-eta * eta / T::lit(2.0)).exp()
}

fn pair_factor<T: Real>(e1: T, e2: T) -> T {
    e1 * e2 * (-(e1 * e1 + e2 * e2) / T::lit(4.0)).exp()
}

/// Mode pairs driven by the cross-sideband beams, in beam order.
pub fn cross_pairs(mode_count: usize) -> Vec<(usize, usize)> {
    match mode_count {
        2 => vec![(0, 1)],
        3 => vec![(0, 1), (1, 2), (0, 2)],
        _ => Vec::new(),
    }
}

/// Laser amplitudes and phases that turn the Lamb-Dicke Hamiltonian into
/// `[−λ(a+b)² + ε] e^{−iφ₀} S⁺ + H.c.` for two modes.
pub fn match_lasers<T: Real>(spec: &ModelSpec<T>) -> Result<LaserSettings<T>> {
    if spec.mode_count != 2 {
        return Err(Error::Unsupported("match_lasers expects a two-mode spec".into()));
    }
    check_eta(spec)?;
    Ok(matched(spec))
}

/// Three-mode counterpart of [`match_lasers`], normalized so that the square
/// and cross terms assemble into `−λ(a+b+c)²`.
pub fn match_lasers_3<T: Real>(spec: &ModelSpec<T>) -> Result<LaserSettings<T>> {
    if spec.mode_count != 3 {
        return Err(Error::Unsupported("match_lasers_3 expects a three-mode spec".into()));
    }
    check_eta(spec)?;
    Ok(matched(spec))
}

fn matched<T: Real>(spec: &ModelSpec<T>) -> LaserSettings<T> {
    let lam = spec.lambda_rate;
    let two = T::lit(2.0);
    let eta = &spec.eta;
    let carrier = spec.epsilon / (-(eta[0] * eta[0] + eta[1] * eta[1]) / T::lit(4.0)).exp();
    let mut rabi = vec![carrier];
    rabi.extend(eta.iter().map(|&e| two * lam / single_factor(e)));
    // −(η_iη_j/2)·pair·Ω = −2λ
    rabi.extend(
        cross_pairs(spec.mode_count)
            .into_iter()
            .map(|(i, j)| T::lit(4.0) * lam / pair_factor(eta[i], eta[j])),
    );
    let phases = vec![spec.phi0; rabi.len()];
    LaserSettings { rabi, phases }
}

impl<T: Real> LaserSettings<T> {
    /// Absolute residuals of the matching conditions, recomputed from the
    /// amplitudes: each sideband product against `2λ` (square terms) or `4λ`
    /// (cross terms, i.e. `(η_iη_j/2)·… = 2λ`), the carrier against ε, and
    /// every phase against φ₀.
    pub fn residuals(&self, spec: &ModelSpec<T>) -> Vec<(String, T)> {
        let m = spec.mode_count;
        let lam = spec.lambda_rate;
        let eta = &spec.eta;
        let mut out = Vec::new();
        let dw = (-(eta[0] * eta[0] + eta[1] * eta[1]) / T::lit(4.0)).exp();
        out.push(("carrier".to_string(), (dw * self.rabi[0] - spec.epsilon).abs()));
        for k in 0..m {
            let e = eta[k];
            let lhs = e * e * (-e * e / T::lit(2.0)).exp() * self.rabi[1 + k];
            out.push((format!("square[{k}]"), (lhs - T::lit(2.0) * lam).abs()));
        }
        for (p, (i, j)) in cross_pairs(m).into_iter().enumerate() {
            let lhs = eta[i] * eta[j] / T::lit(2.0)
                * (-(eta[i] * eta[i] + eta[j] * eta[j]) / T::lit(4.0)).exp()
                * self.rabi[1 + m + p];
            out.push((format!("cross[{i}{j}]"), (lhs - T::lit(2.0) * lam).abs()));
        }
        for (n, &ph) in self.phases.iter().enumerate() {
            out.push((format!("phase[{n}]"), (ph - spec.phi0).abs()));
        }
        out
    }
}

/// Operator helpers on the vibrational factor only.
struct VibOps<T> {
    space: HilbertSpace,
    dims: Vec<usize>,
    _p: std::marker::PhantomData<T>,
}

impl<T: Real> VibOps<T> {
    fn new(dims: &[usize]) -> Result<Self> {
        Ok(Self {
            space: HilbertSpace::vibrational(dims)?,
            dims: dims.to_vec(),
            _p: Default::default(),
        })
    }

    fn embed(&self, factors: &[Option<CsrMatrix<T>>]) -> CsrMatrix<T> {
        let refs: Vec<Option<&CsrMatrix<T>>> = factors.iter().map(|f| f.as_ref()).collect();
        OperatorMatrix::tensor_product(&self.space, None, &refs)
            .expect("factor shapes follow the mode dims")
            .csr()
            .clone()
    }

    /// `a_m^{†p} a_m^{q}` as a single-mode matrix.
    fn ladder_word(&self, mode: usize, p: usize, q: usize) -> CsrMatrix<T> {
        let d = self.dims[mode];
        let a = lowering::<T>(d);
        let ad = a.adjoint();
        let mut out = CsrMatrix::identity(d);
        for _ in 0..p {
            out = out.matmul(&ad);
        }
        for _ in 0..q {
            out = out.matmul(&a);
        }
        out
    }

    /// Product of per-mode ladder words `Π_m a_m^{†p_m} a_m^{q_m}`.
    fn word(&self, powers: &[(usize, usize, usize)]) -> CsrMatrix<T> {
        let mut factors: Vec<Option<CsrMatrix<T>>> = vec![None; self.dims.len()];
        for &(mode, p, q) in powers {
            factors[mode] = Some(self.ladder_word(mode, p, q));
        }
        self.embed(&factors)
    }

    fn number(&self, mode: usize) -> CsrMatrix<T> {
        let mut factors: Vec<Option<CsrMatrix<T>>> = vec![None; self.dims.len()];
        factors[mode] = Some(number(self.dims[mode]));
        self.embed(&factors)
    }

    fn identity(&self) -> CsrMatrix<T> {
        CsrMatrix::identity(self.space.total_dim())
    }

    /// `(Σ_m a_m)`.
    fn mode_sum(&self) -> CsrMatrix<T> {
        (0..self.dims.len())
            .map(|m| self.word(&[(m, 0, 1)]))
            .fold(CsrMatrix::zeros(self.space.total_dim(), self.space.total_dim()), |acc, x| acc.add(&x))
    }
}

/// `A ⊗ S⁺ + A† ⊗ S⁻` on the full ion space, where `A` acts on the modes.
pub fn couple_to_internal<T: Real>(space: &HilbertSpace, drive: &CsrMatrix<T>) -> Result<OperatorMatrix<T>> {
    let raise = CsrMatrix::from_triplets(2, 2, vec![(1, 0, Cx::one())]);
    let up = raise.kron(drive);
    OperatorMatrix::from_csr(space, up.add(&up.adjoint()))
}

/// Vibrational drive `A` of the ideal Hamiltonian, `[−λ(Σ a_m)² + ε] e^{−iφ₀}`.
pub fn ideal_drive<T: Real>(spec: &ModelSpec<T>) -> Result<CsrMatrix<T>> {
    let v = VibOps::<T>::new(&spec.mode_dims)?;
    let s = v.mode_sum();
    let sq = s.matmul(&s).scale(creal(-spec.lambda_rate));
    let drive = sq.add(&v.identity().scale(creal(spec.epsilon)));
    Ok(drive.scale(Cx::from_polar(T::one(), -spec.phi0)))
}

/// `‖[λ(Σ a_m)² − ε]|ψ⟩‖` for the cat of amplitude `√(ε/λ)/m` and the given
/// parity. Zero up to the Fock truncation tail when the cat is dark.
pub fn dark_state_residual<T: Real>(spec: &ModelSpec<T>, parity: crate::operator_core::Parity) -> Result<T> {
    spec.validate()?;
    let vib = spec.space()?.vibrational_part();
    let psi = crate::operator_core::cat_state(&vib, creal(spec.cat_amplitude()?), parity)?;
    let drive = ideal_drive(&ModelSpec { phi0: T::zero(), ..spec.clone() })?;
    let out = drive.mul_vec(psi.amplitudes());
    Ok(out.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt())
}

fn higher_order_drive<T: Real>(spec: &ModelSpec<T>) -> Result<CsrMatrix<T>> {
    if spec.mode_count != 2 {
        return Err(Error::Unsupported("higher-order Hamiltonian is two-mode only".into()));
    }
    let v = VibOps::<T>::new(&spec.mode_dims)?;
    let lam = spec.lambda_rate;
    let (ex2, ey2) = (spec.eta[0] * spec.eta[0], spec.eta[1] * spec.eta[1]);
    let id = v.identity();
    let (na, nb) = (v.number(0), v.number(1));
    let lin = |ca: T, cb: T| id.add(&na.scale(creal(-ca))).add(&nb.scale(creal(-cb)));

    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let a2 = lin(ex2 / three, T::zero()).matmul(&v.word(&[(0, 0, 2)]));
    let b2 = lin(T::zero(), ey2 / three).matmul(&v.word(&[(1, 0, 2)]));
    let ab = lin(ex2 / four, ey2 / four).matmul(&v.word(&[(0, 0, 1), (1, 0, 1)]));
    let carrier = lin(ex2 / two, ey2 / two);

    let drive = a2
        .scale(creal(-lam))
        .add(&b2.scale(creal(-lam)))
        .add(&ab.scale(creal(-two * lam)))
        .add(&carrier.scale(creal(spec.epsilon)));
    Ok(drive.scale(Cx::from_polar(T::one(), -spec.phi0)))
}

/// Lamb-Dicke Hamiltonian for arbitrary laser settings (two or three modes),
/// keeping only the lowest-order term of each beam.
pub fn lamb_dicke_hamiltonian<T: Real>(spec: &ModelSpec<T>, lasers: &LaserSettings<T>) -> Result<OperatorMatrix<T>> {
    let m = spec.mode_count;
    let beams = 1 + m + cross_pairs(m).len();
    if lasers.rabi.len() != beams || lasers.phases.len() != beams {
        return Err(Error::DimensionMismatch {
            expected: beams,
            found: lasers.rabi.len(),
        });
    }
    let v = VibOps::<T>::new(&spec.mode_dims)?;
    let eta = &spec.eta;
    let half = T::lit(0.5);
    let beam = |n: usize| Cx::from_polar(lasers.rabi[n], -lasers.phases[n]);

    let dw = (-(eta[0] * eta[0] + eta[1] * eta[1]) / T::lit(4.0)).exp();
    let mut drive = v.identity().scale(beam(0) * dw);
    for k in 0..m {
        let c = -half * single_factor(eta[k]);
        drive = drive.add(&v.word(&[(k, 0, 2)]).scale(beam(1 + k) * c));
    }
    for (p, (i, j)) in cross_pairs(m).into_iter().enumerate() {
        let c = -half * pair_factor(eta[i], eta[j]);
        drive = drive.add(&v.word(&[(i, 0, 1), (j, 0, 1)]).scale(beam(1 + m + p) * c));
    }
    couple_to_internal(&spec.space()?, &drive)
}

fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_usize(k).unwrap())
}

/// Nonlinear Jaynes–Cummings expansion of the two-mode interaction, summing
/// the single-mode sidebands up to `j ≤ j_max` and the cross and carrier
/// double sums up to `j + l ≤ j_max`.
pub fn series_hamiltonian<T: Real>(
    spec: &ModelSpec<T>,
    lasers: &LaserSettings<T>,
    j_max: usize,
) -> Result<OperatorMatrix<T>> {
    if spec.mode_count != 2 {
        return Err(Error::Unsupported("the series expansion is two-mode only".into()));
    }
    if lasers.rabi.len() != 4 || lasers.phases.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: lasers.rabi.len(),
        });
    }
    let v = VibOps::<T>::new(&spec.mode_dims)?;
    let (ex, ey) = (spec.eta[0], spec.eta[1]);
    let i = cunit::<T>();
    let rt2 = T::lit(2.0).sqrt();
    let beam = |n: usize| Cx::from_polar(lasers.rabi[n], -lasers.phases[n]);
    let dw_x = (-ex * ex / T::lit(2.0)).exp();
    let dw_y = (-ey * ey / T::lit(2.0)).exp();
    let dw_xy = (-(ex * ex + ey * ey) / T::lit(4.0)).exp();
    let dim = v.space.total_dim();
    let mut drive = CsrMatrix::zeros(dim, dim);

    for j in 0..=j_max {
        let norm = factorial::<T>(j) * factorial::<T>(j + 2);
        let cx_ = (i * ex).powu((2 * j + 2) as u32) * (dw_x / norm);
        let cy_ = (i * ey).powu((2 * j + 2) as u32) * (dw_y / norm);
        drive = drive
            .add(&v.word(&[(0, j, j + 2)]).scale(cx_ * beam(1)))
            .add(&v.word(&[(1, j, j + 2)]).scale(cy_ * beam(2)));
    }
    for j in 0..=j_max {
        for l in 0..=(j_max - j) {
            let fx = (i * ex / rt2).powu((2 * j + 1) as u32) / (factorial::<T>(j) * factorial::<T>(j + 1));
            let fy = (i * ey / rt2).powu((2 * l + 1) as u32) / (factorial::<T>(l) * factorial::<T>(l + 1));
            drive = drive.add(&v.word(&[(0, j, j + 1), (1, l, l + 1)]).scale(fx * fy * dw_xy * beam(3)));

            let gx = (i * ex / rt2).powu((2 * j) as u32) / (factorial::<T>(j) * factorial::<T>(j));
            let gy = (-i * ey / rt2).powu((2 * l) as u32) / (factorial::<T>(l) * factorial::<T>(l));
            drive = drive.add(&v.word(&[(0, j, j), (1, l, l)]).scale(gx * gy * dw_xy * beam(0)));
        }
    }
    couple_to_internal(&spec.space()?, &drive)
}

/// Builds the interaction-picture Hamiltonian for the spec's variant.
pub fn build_hamiltonian<T: Real>(spec: &ModelSpec<T>) -> Result<OperatorMatrix<T>> {
    spec.validate()?;
    let space = spec.space()?;
    match spec.variant {
        Variant::Ideal => couple_to_internal(&space, &ideal_drive(spec)?),
        Variant::HigherOrder => couple_to_internal(&space, &higher_order_drive(spec)?),
        Variant::Series { j_max } => series_hamiltonian(spec, &match_lasers(spec)?, j_max),
    }
}

/// Lindblad channel `(rate/2)(2LρL† − L†Lρ − ρL†L)`.
#[derive(Clone, Debug)]
pub struct JumpOperator<T> {
    pub label: String,
    pub op: OperatorMatrix<T>,
    pub rate: T,
}

/// Electronic decay always; vibrational damping and electronic dephasing when
/// their rates are positive.
pub fn jump_operators<T: Real>(spec: &ModelSpec<T>) -> Result<Vec<JumpOperator<T>>> {
    let space = spec.space()?;
    let mut out = vec![JumpOperator {
        label: "S-".into(),
        op: internal_op(&space, InternalOp::Lower)?,
        rate: spec.gamma,
    }];
    const NAMES: [&str; 3] = ["a", "b", "c"];
    for m in 0..spec.mode_count {
        let g = spec.vib_rate(m);
        if g > T::zero() {
            out.push(JumpOperator {
                label: NAMES.get(m).copied().unwrap_or("mode").into(),
                op: crate::operator_core::annihilation(&space, m)?,
                rate: g,
            });
        }
    }
    if spec.dephasing_rate > T::zero() {
        out.push(JumpOperator {
            label: "Sz".into(),
            op: internal_op(&space, InternalOp::Inversion)?,
            rate: spec.dephasing_rate,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_core::{total_parity, HilbertSpace, Parity};

    fn ideal(dim: usize) -> ModelSpec<f64> {
        ModelSpec {
            variant: Variant::Ideal,
            ..ModelSpec::two_mode_reference(dim)
        }
    }

    fn three(dim: usize, eta: [f64; 3]) -> ModelSpec<f64> {
        ModelSpec {
            mode_count: 3,
            eta: eta.to_vec(),
            gamma_vib: vec![],
            mode_dims: vec![dim; 3],
            variant: Variant::Ideal,
            ..ModelSpec::two_mode_reference(dim)
        }
    }

    #[test]
    fn matched_rabi_frequencies() {
        let spec = ideal(6);
        let l = match_lasers(&spec).unwrap();
        // 2 e^{η²/2} / η² at η = 0.15, computed independently
        let want = 2.0 * (0.15f64 * 0.15 / 2.0).exp() / (0.15 * 0.15);
        assert!((l.rabi[1] - want).abs() < 1e-12 * want);
        assert!((l.rabi[1] - 89.894_535_042).abs() < 1e-8);
        let sym = ModelSpec { eta: vec![0.1, 0.1], ..ideal(6) };
        let ls = match_lasers(&sym).unwrap();
        assert_eq!(ls.rabi[1], ls.rabi[2]);
        for (name, r) in l.residuals(&spec) {
            assert!(r <= 1e-12 * 100.0, "{name}: {r}");
        }
        let bad = ModelSpec { eta: vec![0.0, 0.1], ..ideal(6) };
        assert!(match_lasers(&bad).is_err());
        assert!(match_lasers(&three(4, [0.1; 3])).is_err());
    }

    #[test]
    fn ideal_matrix_elements() {
        let spec = ideal(6);
        let h = build_hamiltonian(&spec).unwrap();
        let s = spec.space().unwrap();
        let e00 = s.index(1, &[0, 0]);
        assert!((h.get(e00, s.index(0, &[0, 0])) - Cx::new(16.0, 0.0)).norm() < 1e-14);
        assert!((h.get(e00, s.index(0, &[2, 0])) - Cx::new(-2f64.sqrt(), 0.0)).norm() < 1e-14);
        assert!((h.get(e00, s.index(0, &[1, 1])) - Cx::new(-2.0, 0.0)).norm() < 1e-14);
        assert!(h.hermiticity_error() <= 1e-14);
    }

    #[test]
    fn matched_lasers_reproduce_ideal_form() {
        let spec = ideal(7);
        let lasers = match_lasers(&spec).unwrap();
        let ld = lamb_dicke_hamiltonian(&spec, &lasers).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        assert!(ld.max_abs_diff(&h).unwrap() < 1e-12);
    }

    #[test]
    fn ideal_commutes_with_parity() {
        let spec = ideal(8);
        let h = build_hamiltonian(&spec).unwrap();
        let p = total_parity(&spec.space().unwrap());
        assert!(h.commutator(&p).unwrap().max_abs() <= 1e-12);
        let ho = build_hamiltonian(&ModelSpec::two_mode_reference(8)).unwrap();
        assert!(ho.commutator(&p).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn series_reduces_to_lamb_dicke_and_higher_order() {
        let spec = ideal(8);
        let lasers = match_lasers(&spec).unwrap();
        let s0 = series_hamiltonian(&spec, &lasers, 0).unwrap();
        assert!(s0.max_abs_diff(&build_hamiltonian(&spec).unwrap()).unwrap() < 1e-12);
        let s1 = series_hamiltonian(&spec, &lasers, 1).unwrap();
        let ho = build_hamiltonian(&ModelSpec { variant: Variant::HigherOrder, ..spec.clone() }).unwrap();
        assert!(s1.max_abs_diff(&ho).unwrap() < 1e-12);
        assert!(s1.hermiticity_error() <= 1e-14);
    }

    #[test]
    fn series_converges_in_j_max() {
        let spec = ideal(12);
        let lasers = match_lasers(&spec).unwrap();
        let hs: Vec<_> = (0..5).map(|j| series_hamiltonian(&spec, &lasers, j).unwrap()).collect();
        let diffs: Vec<f64> = hs.windows(2).map(|w| w[0].max_abs_diff(&w[1]).unwrap()).collect();
        for w in diffs.windows(2) {
            assert!(w[1] < w[0], "{diffs:?}");
        }
    }

    #[test]
    fn higher_order_correction_scales_as_eta_squared() {
        let diff = |eta: f64| {
            let base = ModelSpec { eta: vec![eta, eta], ..ideal(8) };
            let ho = ModelSpec { variant: Variant::HigherOrder, ..base.clone() };
            build_hamiltonian(&ho)
                .unwrap()
                .max_abs_diff(&build_hamiltonian(&base).unwrap())
                .unwrap()
        };
        let d: Vec<f64> = [0.05, 0.1, 0.15].iter().map(|&e| diff(e)).collect();
        let r1 = d[1] / d[0] / 4.0;
        let r2 = d[2] / d[0] / 9.0;
        assert!((1.0 / 1.5..=1.5).contains(&r1) && (1.0 / 1.5..=1.5).contains(&r2), "{d:?}");
    }

    #[test]
    fn three_mode_matching_yields_symmetric_square() {
        let sym = three(4, [0.12; 3]);
        let l = match_lasers_3(&sym).unwrap();
        assert_eq!(l.rabi[1], l.rabi[2]);
        assert_eq!(l.rabi[2], l.rabi[3]);
        assert_eq!(l.rabi[4], l.rabi[5]);
        assert_eq!(l.rabi[5], l.rabi[6]);

        let spec = three(5, [0.15, 0.1, 0.12]);
        let l = match_lasers_3(&spec).unwrap();
        let ld = lamb_dicke_hamiltonian(&spec, &l).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        assert!(ld.max_abs_diff(&h).unwrap() < 1e-12);
        let s = spec.space().unwrap();
        let e = s.index(1, &[0, 0, 0]);
        let sq: Vec<_> = [[2, 0, 0], [0, 2, 0], [0, 0, 2]].iter().map(|o| ld.get(e, s.index(0, o))).collect();
        let cr: Vec<_> = [[1, 1, 0], [0, 1, 1], [1, 0, 1]].iter().map(|o| ld.get(e, s.index(0, o))).collect();
        for z in &sq {
            assert!((z - Cx::new(-2f64.sqrt(), 0.0)).norm() < 1e-12);
        }
        for z in &cr {
            assert!((z - Cx::new(-2.0, 0.0)).norm() < 1e-12);
        }
        for (_, r) in l.residuals(&spec) {
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn three_mode_ideal_is_shifted_square_of_mode_sum() {
        let spec = three(4, [0.15, 0.1, 0.12]);
        let s = spec.space().unwrap();
        let sum = (0..3)
            .map(|m| crate::operator_core::annihilation::<f64>(&s, m).unwrap())
            .reduce(|a, b| &a + &b)
            .unwrap();
        let sp = internal_op::<f64>(&s, InternalOp::Raise).unwrap();
        let id = OperatorMatrix::identity(&s);
        let drive = &(&sum * &sum).scale_re(-1.0) + &id.scale_re(16.0);
        let up = &sp * &drive;
        let direct = &up + &up.adjoint();
        assert!(build_hamiltonian(&spec).unwrap().max_abs_diff(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn cats_are_dark_at_dim_30() {
        for parity in [Parity::Even, Parity::Odd] {
            let r2 = dark_state_residual(&ideal(30), parity).unwrap();
            assert!(r2 <= 1e-4, "{r2}");
            let r3 = dark_state_residual(&three(30, [0.1, 0.1, 0.1]), parity).unwrap();
            assert!(r3 <= 1e-4, "{r3}");
        }
        // a product coherent state of the wrong amplitude is far from dark
        let off = ModelSpec { lambda_rate: 2.0, ..ideal(30) };
        let v = ideal_drive(&off).unwrap();
        let psi = crate::operator_core::cat_state(&off.space().unwrap().vibrational_part(), creal(2.0), Parity::Even).unwrap();
        let r = v.mul_vec(psi.amplitudes()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(r > 1.0, "{r}");
    }

    #[test]
    fn jump_operator_lists() {
        let spec = ModelSpec { gamma_vib: vec![], ..ideal(4) };
        assert_eq!(jump_operators(&spec).unwrap().len(), 1);
        let j = jump_operators(&ModelSpec::<f64>::two_mode_reference(4)).unwrap();
        let rates: Vec<f64> = j.iter().map(|x| x.rate).collect();
        assert_eq!(rates, vec![100.0, 0.0005, 0.0005]);
        let d = jump_operators(&ModelSpec { dephasing_rate: 5.0, ..ModelSpec::two_mode_reference(4) }).unwrap();
        assert_eq!(d.len(), 4);
        let s = HilbertSpace::new(&[4, 4]).unwrap();
        assert_eq!(j[0].op, internal_op(&s, InternalOp::Lower).unwrap());
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut s = ideal(4);
        s.gamma = -1.0;
        assert!(s.validate().is_err());
        let mut s = ideal(4);
        s.eta = vec![1.2, 0.1];
        assert!(s.validate().is_err());
        let s = ModelSpec { variant: Variant::Series { j_max: 1 }, ..three(4, [0.1; 3]) };
        assert!(build_hamiltonian(&s).is_err());
    }
}
