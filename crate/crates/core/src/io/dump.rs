//! Portable text dumps of kets and density matrices.
//!
//! ```json
//! {"kind": "density_matrix", "mode_dims": [2, 2], "internal_levels": 2,
//!  "basis_ordering": "internal-major", "entries": [[0, 0, 1.0, 0.0]]}
//! ```
//!
//! Entries are `(row, col, re, im)` in row-major order; zeros are omitted.
//! A ket is stored as a single column.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_core::{DensityMatrix, HilbertSpace, StateVector};
use crate::scalar::{Cx, Real};

pub const BASIS_ORDERING: &str = "internal-major";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpKind {
    DensityMatrix,
    StateVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDump {
    pub kind: DumpKind,
    pub mode_dims: Vec<usize>,
    pub internal_levels: usize,
    pub basis_ordering: String,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl StateDump {
    pub fn from_density<T: Real>(rho: &DensityMatrix<T>) -> Self {
        let entries = rho
            .matrix()
            .indexed_iter()
            .filter(|(_, z)| z.re != T::zero() || z.im != T::zero())
            .map(|((r, c), z)| (r, c, z.re.to_f64_lossy(), z.im.to_f64_lossy()))
            .collect();
        Self::new(DumpKind::DensityMatrix, rho.space(), entries)
    }

    pub fn from_state<T: Real>(psi: &StateVector<T>) -> Self {
        let entries = psi
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != T::zero() || z.im != T::zero())
            .map(|(r, z)| (r, 0, z.re.to_f64_lossy(), z.im.to_f64_lossy()))
            .collect();
        Self::new(DumpKind::StateVector, psi.space(), entries)
    }

    fn new(kind: DumpKind, space: &HilbertSpace, entries: Vec<(usize, usize, f64, f64)>) -> Self {
        Self {
            kind,
            mode_dims: space.mode_dims().to_vec(),
            internal_levels: space.internal_levels(),
            basis_ordering: BASIS_ORDERING.into(),
            entries,
        }
    }

    pub fn space(&self) -> Result<HilbertSpace> {
        if self.basis_ordering != BASIS_ORDERING {
            return Err(Error::Dump(format!("unsupported basis ordering `{}`", self.basis_ordering)));
        }
        HilbertSpace::with_internal(self.internal_levels, &self.mode_dims).map_err(|e| Error::Dump(e.to_string()))
    }

    fn dense<T: Real>(&self, cols: usize) -> Result<(HilbertSpace, Array2<Cx<T>>)> {
        let space = self.space()?;
        let n = space.total_dim();
        let mut m = Array2::zeros((n, cols));
        for &(r, c, re, im) in &self.entries {
            if r >= n || c >= cols {
                return Err(Error::Dump(format!("entry ({r}, {c}) outside a {n}×{cols} matrix")));
            }
            m[[r, c]] = Cx::new(T::lit(re), T::lit(im));
        }
        Ok((space, m))
    }

    /// Density matrix; a ket dump is turned into its projector.
    pub fn to_density<T: Real>(&self) -> Result<DensityMatrix<T>> {
        match self.kind {
            DumpKind::DensityMatrix => {
                let (space, m) = self.dense(self.space()?.total_dim())?;
                DensityMatrix::new(&space, m).map_err(|e| Error::Dump(e.to_string()))
            }
            DumpKind::StateVector => Ok(self.to_state()?.to_density()),
        }
    }

    pub fn to_state<T: Real>(&self) -> Result<StateVector<T>> {
        if self.kind != DumpKind::StateVector {
            return Err(Error::Dump("expected a state_vector dump".into()));
        }
        let (space, m) = self.dense::<T>(1)?;
        StateVector::from_amplitudes(&space, m.column(0).to_vec()).map_err(|e| Error::Dump(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dump serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Dump(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_core::{cat_state, Level, Parity};

    #[test]
    fn density_round_trip_is_exact() {
        let s = HilbertSpace::new(&[5, 4]).unwrap();
        let cat = cat_state::<f64>(&s.vibrational_part(), Cx::new(0.7, 0.3), Parity::Odd)
            .unwrap()
            .with_internal(&s, Level::E)
            .unwrap();
        let rho = cat.to_density().mix(&DensityMatrix::mixed(&s), 0.3).unwrap();
        let d = StateDump::from_density(&rho);
        assert_eq!(d.basis_ordering, "internal-major");
        assert_eq!(d.mode_dims, vec![5, 4]);
        let back: DensityMatrix<f64> = StateDump::from_json(&d.to_json()).unwrap().to_density().unwrap();
        assert_eq!(back.matrix(), rho.matrix());
    }

    #[test]
    fn ket_round_trip_and_projector() {
        let s = HilbertSpace::new(&[3, 3]).unwrap();
        let psi = StateVector::<f64>::fock(&s, Level::E, &[2, 1]).unwrap();
        let d = StateDump::from_state(&psi);
        assert_eq!(d.entries, vec![(s.index(1, &[2, 1]), 0, 1.0, 0.0)]);
        assert_eq!(d.to_state::<f64>().unwrap(), psi);
        assert_eq!(d.to_density::<f64>().unwrap().level_population(Level::E), 1.0);
    }

    #[test]
    fn malformed_dumps_are_rejected() {
        let mut d = StateDump::from_state(&StateVector::<f64>::vacuum(&HilbertSpace::new(&[2, 2]).unwrap()));
        d.basis_ordering = "mode-major".into();
        assert!(matches!(d.to_state::<f64>(), Err(Error::Dump(_))));
        d.basis_ordering = BASIS_ORDERING.into();
        d.entries.push((99, 0, 1.0, 0.0));
        assert!(matches!(d.to_state::<f64>(), Err(Error::Dump(_))));
        assert!(StateDump::from_json(r#"{"kind":"state_vector","extra":1}"#).is_err());
    }
}
