//! Scenario files: strict TOML with line-anchored errors.
//!
//! ```toml
//! name = "fig1a_even_cat"
//!
//! [model]
//! mode_count = 2
//! eta = [0.15, 0.1]
//! epsilon = 16.0
//! Gamma = 100.0
//! gamma_vib = [0.0005, 0.0005]
//! variant = "higher_order"
//! mode_dims = [22, 22]
//!
//! [initial_state]
//! kind = "vacuum"
//!
//! [evolution]
//! t_final = 7.0
//! dt_max = 0.02
//!
//! [outputs]
//! trajectory = true
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{EvolutionConfig, Sector};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operator_core::{cat_state, check_truncation, HilbertSpace, Level, Parity, StateVector};
use crate::scalar::{creal, Cx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Vacuum,
    /// `(|1,0,…⟩ + |0,1,…⟩ + …)/√m`
    SymmetricOnePhonon,
    Fock,
    Coherent,
    Cat,
}

/// Initial ket. Only the fields belonging to `kind` may be present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct InitialState<T> {
    pub kind: InitialKind,
    #[serde(default)]
    pub level: Level,
    /// Phonon numbers per mode (`fock`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupations: Option<Vec<usize>>,
    /// `[re, im]` per mode (`coherent`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[T; 2]>>,
    /// `[re, im]`, shared by all modes (`cat`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[T; 2]>,
    /// `"+"` or `"-"` (`cat`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<Parity>,
}

impl<T: Real> InitialState<T> {
    pub fn vacuum() -> Self {
        Self::default()
    }

    fn check(&self, space: &HilbertSpace) -> Result<()> {
        let m = space.mode_count();
        let dims = space.mode_dims();
        let stray = |field: &str| Error::param(field, format!("not used by kind {:?}", self.kind));
        let need = |field: &str| Error::param(field, format!("required by kind {:?}", self.kind));
        let cx = |v: [T; 2]| Cx::new(v[0], v[1]);
        if self.kind != InitialKind::Fock && self.occupations.is_some() {
            return Err(stray("occupations"));
        }
        if self.kind != InitialKind::Coherent && self.amplitudes.is_some() {
            return Err(stray("amplitudes"));
        }
        if self.kind != InitialKind::Cat && self.alpha.is_some() {
            return Err(stray("alpha"));
        }
        if self.kind != InitialKind::Cat && self.sign.is_some() {
            return Err(stray("sign"));
        }
        match self.kind {
            InitialKind::Vacuum => {}
            InitialKind::SymmetricOnePhonon => {
                if dims.iter().any(|&d| d < 2) {
                    return Err(Error::param("kind", "one phonon needs mode_dims ≥ 2"));
                }
            }
            InitialKind::Fock => {
                let occ = self.occupations.as_ref().ok_or_else(|| need("occupations"))?;
                if occ.len() != m {
                    return Err(Error::param("occupations", format!("expected {m} values")));
                }
                if let Some((k, (&n, &d))) = occ.iter().zip(dims).enumerate().find(|(_, (&n, &d))| n >= d) {
                    return Err(Error::param("occupations", format!("mode {k}: {n} phonons need dim > {n}, have {d}")));
                }
            }
            InitialKind::Coherent => {
                let amps = self.amplitudes.as_ref().ok_or_else(|| need("amplitudes"))?;
                if amps.len() != m {
                    return Err(Error::param("amplitudes", format!("expected {m} values")));
                }
                for (k, &a) in amps.iter().enumerate() {
                    check_truncation(k, dims[k], cx(a)).map_err(|e| Error::param("amplitudes", e.to_string()))?;
                }
            }
            InitialKind::Cat => {
                let a = self.alpha.ok_or_else(|| need("alpha"))?;
                self.sign.ok_or_else(|| need("sign"))?;
                for (k, &d) in dims.iter().enumerate() {
                    check_truncation(k, d, cx(a)).map_err(|e| Error::param("alpha", e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// Builds the ket on `space` (internal level ⊗ modes).
    pub fn build(&self, space: &HilbertSpace) -> Result<StateVector<T>> {
        self.check(space)?;
        let vib = space.vibrational_part();
        let m = space.mode_count();
        let ket = match self.kind {
            InitialKind::Vacuum => StateVector::vacuum(&vib),
            InitialKind::SymmetricOnePhonon => {
                let mut amps = vec![Cx::new(T::zero(), T::zero()); vib.total_dim()];
                let w = creal(T::one() / T::from_usize(m).unwrap().sqrt());
                for k in 0..m {
                    let mut occ = vec![0; m];
                    occ[k] = 1;
                    amps[vib.index(0, &occ)] = w;
                }
                StateVector::from_amplitudes(&vib, amps)?
            }
            InitialKind::Fock => StateVector::fock(&vib, Level::G, self.occupations.as_ref().unwrap())?,
            InitialKind::Coherent => {
                let amps: Vec<Cx<T>> = self.amplitudes.as_ref().unwrap().iter().map(|a| Cx::new(a[0], a[1])).collect();
                crate::operator_core::coherent_state(&vib, &amps, Level::G)?
            }
            InitialKind::Cat => {
                let a = self.alpha.unwrap();
                cat_state(&vib, Cx::new(a[0], a[1]), self.sign.unwrap())?
            }
        };
        ket.with_internal(space, self.level)
    }
}

fn d_true() -> bool {
    true
}
fn d_window<T: Real>() -> [T; 2] {
    [T::lit(-1.5), T::lit(1.5)]
}
fn d_points() -> usize {
    61
}

/// Plane cut `W(i·y1, i·y2)` of the state stored at `t_snapshot`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct WignerOutput<T> {
    pub t_snapshot: T,
    #[serde(default = "d_window")]
    pub window: [T; 2],
    #[serde(default = "d_points")]
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct Outputs<T> {
    #[serde(default = "d_true")]
    pub trajectory: bool,
    /// Dump of the final density matrix.
    #[serde(default)]
    pub final_state: bool,
    #[serde(default)]
    pub laser_settings: bool,
    #[serde(default)]
    pub oracle_report: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerOutput<T>>,
}

impl<T> Default for Outputs<T> {
    fn default() -> Self {
        Self {
            trajectory: true,
            final_state: false,
            laser_settings: false,
            oracle_report: false,
            wigner: None,
        }
    }
}

/// Settings of the direct steady-state solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySettings {
    /// Defaults to the parity sector of the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<Sector>,
    /// Solve the single symmetric-mode model instead of the full one.
    #[serde(default)]
    pub reduced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct Scenario<T> {
    pub name: String,
    pub model: ModelSpec<T>,
    #[serde(default)]
    pub initial_state: InitialState<T>,
    pub evolution: EvolutionConfig<T>,
    #[serde(default)]
    pub outputs: Outputs<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySettings>,
}

impl<T: Real> Scenario<T> {
    /// Checks every invariant; errors name the offending field and the
    /// section it lives in.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, Error)> {
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(("", Error::param("name", "use letters, digits, '_' or '-'")));
        }
        self.model.validate().map_err(|e| ("model", e))?;
        self.evolution.validate().map_err(|e| ("evolution", e))?;
        let space = self.model.space().map_err(|e| ("model", e))?;
        self.initial_state.check(&space).map_err(|e| ("initial_state", e))?;
        if let Some(w) = &self.outputs.wigner {
            let sec = "outputs.wigner";
            if !(w.t_snapshot >= T::zero() && w.t_snapshot <= self.evolution.t_final) {
                return Err((sec, Error::param("t_snapshot", "must lie in [0, t_final]")));
            }
            if !(w.window[0] < w.window[1]) {
                return Err((sec, Error::param("window", "need lo < hi")));
            }
            if w.n_points < 2 {
                return Err((sec, Error::param("n_points", "need at least 2")));
            }
            let edge = Cx::new(T::zero(), w.window[0].abs().max(w.window[1].abs()));
            for (k, &d) in self.model.mode_dims.iter().enumerate() {
                check_truncation(k, d, edge).map_err(|e| (sec, Error::param("window", e.to_string())))?;
            }
        }
        if let Some(s) = &self.steady {
            if s.c_dim.is_some() && !s.reduced {
                return Err(("steady", Error::param("c_dim", "only used with reduced = true")));
            }
        }
        Ok(())
    }

    /// Deterministic TOML rendering; parsing it gives back `self`.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml(src: &str) -> Result<Self> {
        let sc: Self = toml::from_str(src).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(src, s.start)).unwrap_or(0),
            message: e.message().trim().to_string(),
        })?;
        if let Err((section, err)) = sc.validate() {
            let field = match &err {
                Error::InvalidParameter { field, .. } => field.split('[').next().unwrap_or("").to_string(),
                Error::Unsupported(_) => "variant".into(),
                _ => String::new(),
            };
            let line = locate(src, section, &field);
            let prefix = if section.is_empty() { String::new() } else { format!("[{section}] ") };
            return Err(Error::Config {
                line,
                message: format!("{prefix}{err}"),
            });
        }
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_toml(&src)
    }
}

fn line_of(src: &str, byte: usize) -> usize {
    src[..byte.min(src.len())].matches('\n').count() + 1
}

/// Line of `field = …` inside `[section]` (top level when `section` is
/// empty), else the section header, else 0. A dotted section that only
/// appears as an inline table resolves to the line of its key.
fn locate(src: &str, section: &str, field: &str) -> usize {
    let line = locate_in(src, section, field);
    match section.rsplit_once('.') {
        Some((parent, key)) if line == 0 => locate(src, parent, key),
        _ => line,
    }
}

fn locate_in(src: &str, section: &str, field: &str) -> usize {
    let mut current = String::new();
    let mut header = 0;
    for (k, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == section {
                header = k + 1;
            }
            continue;
        }
        if current != section || field.is_empty() {
            continue;
        }
        let key = line.split('=').next().unwrap_or("").trim().trim_matches('"');
        if line.contains('=') && key == field {
            return k + 1;
        }
    }
    header
}
