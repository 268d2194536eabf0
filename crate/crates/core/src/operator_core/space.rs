use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Electronic level of the ion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    G,
    E,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
        }
    }
}

/// Tensor-product layout: an optional two-level internal factor followed by
/// one truncated Fock factor per vibrational mode.
///
/// Basis ordering is internal-major: `index = s·Π dims + n_0·Π dims[1..] + …`.
/// A space with `internal_levels == 1` carries only the vibrational modes and
/// is what partial traces over the electronic degree of freedom return.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    internal_levels: usize,
    mode_dims: Vec<usize>,
}

impl HilbertSpace {
    /// Ion space: internal two-level system ⊗ modes.
    pub fn new(mode_dims: &[usize]) -> Result<Self> {
        Self::with_internal(2, mode_dims)
    }

    /// Vibrational modes only.
    pub fn vibrational(mode_dims: &[usize]) -> Result<Self> {
        Self::with_internal(1, mode_dims)
    }

    pub fn with_internal(internal_levels: usize, mode_dims: &[usize]) -> Result<Self> {
        if !(internal_levels == 1 || internal_levels == 2) {
            return Err(Error::param("internal_levels", "must be 1 or 2"));
        }
        if let Some((m, &d)) = mode_dims.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(Error::param(format!("mode_dims[{m}]"), format!("dimension {d} < 2")));
        }
        Ok(Self {
            internal_levels,
            mode_dims: mode_dims.to_vec(),
        })
    }

    pub fn internal_levels(&self) -> usize {
        self.internal_levels
    }

    pub fn has_internal(&self) -> bool {
        self.internal_levels == 2
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn mode_count(&self) -> usize {
        self.mode_dims.len()
    }

    /// Product of the vibrational dimensions.
    pub fn vib_dim(&self) -> usize {
        self.mode_dims.iter().product()
    }

    pub fn total_dim(&self) -> usize {
        self.internal_levels * self.vib_dim()
    }

    /// The same modes without the internal factor.
    pub fn vibrational_part(&self) -> HilbertSpace {
        HilbertSpace {
            internal_levels: 1,
            mode_dims: self.mode_dims.clone(),
        }
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.mode_count() {
            return Err(Error::ModeIndex {
                index: mode,
                modes: self.mode_count(),
            });
        }
        Ok(())
    }

    /// Flat index of `|level⟩ ⊗ |n_0, n_1, …⟩`.
    pub fn index(&self, level: usize, occupations: &[usize]) -> usize {
        debug_assert_eq!(occupations.len(), self.mode_count());
        let vib = occupations
            .iter()
            .zip(&self.mode_dims)
            .fold(0, |acc, (&n, &d)| {
                debug_assert!(n < d);
                acc * d + n
            });
        level * self.vib_dim() + vib
    }

    /// Inverse of [`HilbertSpace::index`].
    pub fn decompose(&self, index: usize) -> (usize, Vec<usize>) {
        let vib_dim = self.vib_dim();
        let level = index / vib_dim;
        let mut rest = index % vib_dim;
        let mut occ = vec![0; self.mode_count()];
        for (m, &d) in self.mode_dims.iter().enumerate().rev() {
            occ[m] = rest % d;
            rest /= d;
        }
        (level, occ)
    }

    /// Total phonon number of a basis index.
    pub fn phonons(&self, index: usize) -> usize {
        self.decompose(index).1.iter().sum()
    }

    /// True when the basis state at `index` has even total phonon number.
    pub fn is_even(&self, index: usize) -> bool {
        self.phonons(index) % 2 == 0
    }
}
