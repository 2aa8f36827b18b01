//! Truncated tensor-product spaces and the operator container.
//!
//! The Hilbert space is a product of `N` bosonic modes, each hard-truncated
//! to `mode_dims[k]` Fock levels, tensored with a finite matrix factor of
//! dimension `spin_dim`. Basis ordering: mode 0 is the slowest index, the
//! spin factor the fastest, so a basis state `(n_0, …, n_{N-1}, s)` sits at
//! `((n_0 d_1 + n_1) d_2 + …) · M + s`.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Descriptor of a truncated multimode Fock ⊗ spin space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSpec {
    mode_dims: Vec<usize>,
    spin_dim: usize,
}

impl SpaceSpec {
    pub fn new(mode_dims: Vec<usize>, spin_dim: usize) -> Result<Self> {
        if mode_dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArg(
                "every mode dimension must be at least 2".into(),
            ));
        }
        if spin_dim < 1 {
            return Err(Error::InvalidArg("spin dimension must be at least 1".into()));
        }
        Ok(SpaceSpec {
            mode_dims,
            spin_dim,
        })
    }

    pub fn single_mode(dim: usize) -> Result<Self> {
        SpaceSpec::new(vec![dim], 1)
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn total_dim(&self) -> usize {
        self.mode_dims.iter().product::<usize>() * self.spin_dim
    }

    /// Flat index of a basis state.
    pub fn index_of(&self, occupations: &[usize], spin: usize) -> Result<usize> {
        if occupations.len() != self.n_modes() {
            return Err(Error::Dimension(format!(
                "expected {} occupation numbers, got {}",
                self.n_modes(),
                occupations.len()
            )));
        }
        let mut idx = 0usize;
        for (k, (&n, &d)) in occupations.iter().zip(&self.mode_dims).enumerate() {
            if n >= d {
                return Err(Error::InvalidArg(format!(
                    "occupation {n} exceeds truncation {d} on mode {k}"
                )));
            }
            idx = idx * d + n;
        }
        if spin >= self.spin_dim {
            return Err(Error::InvalidArg(format!(
                "spin index {spin} exceeds spin dimension {}",
                self.spin_dim
            )));
        }
        Ok(idx * self.spin_dim + spin)
    }

    /// Occupation numbers and spin index of a flat basis index.
    pub fn occupations(&self, index: usize) -> (Vec<usize>, usize) {
        let spin = index % self.spin_dim;
        let mut rest = index / self.spin_dim;
        let mut occ = vec![0usize; self.n_modes()];
        for k in (0..self.n_modes()).rev() {
            occ[k] = rest % self.mode_dims[k];
            rest /= self.mode_dims[k];
        }
        (occ, spin)
    }

    /// Indices whose every mode occupation satisfies `n_k < d_k - buffer`.
    ///
    /// The spin index is unrestricted. This is the interior block used to
    /// quarantine truncation-edge artifacts in operator inequalities.
    pub fn interior_indices(&self, buffer: usize) -> Result<Vec<usize>> {
        if self.mode_dims.iter().any(|&d| buffer >= d) {
            return Err(Error::InvalidArg(format!(
                "interior buffer {buffer} is not smaller than every mode dimension"
            )));
        }
        let total = self.total_dim();
        let mut out = Vec::new();
        for idx in 0..total {
            let (occ, _) = self.occupations(idx);
            if occ
                .iter()
                .zip(&self.mode_dims)
                .all(|(&n, &d)| n < d - buffer)
            {
                out.push(idx);
            }
        }
        Ok(out)
    }

    /// Complement of [`Self::interior_indices`]: some mode occupation is
    /// within `buffer` of its cutoff.
    pub fn boundary_indices(&self, buffer: usize) -> Result<Vec<usize>> {
        let interior = self.interior_indices(buffer)?;
        let mut mask = vec![true; self.total_dim()];
        for i in interior {
            mask[i] = false;
        }
        Ok(mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| if b { Some(i) } else { None })
            .collect())
    }
}

/// Dense complex matrix bound to a [`SpaceSpec`].
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    space: SpaceSpec,
    entries: Array2<C64>,
    hermitian_hint: bool,
}

impl OperatorMatrix {
    pub fn new(space: SpaceSpec, entries: Array2<C64>) -> Result<Self> {
        let d = space.total_dim();
        if entries.dim() != (d, d) {
            return Err(Error::Dimension(format!(
                "matrix shape {:?} does not match total dimension {d}",
                entries.dim()
            )));
        }
        Ok(OperatorMatrix {
            space,
            entries,
            hermitian_hint: false,
        })
    }

    /// Like [`Self::new`] but validates and records hermiticity.
    pub fn hermitian(space: SpaceSpec, entries: Array2<C64>) -> Result<Self> {
        let mut op = OperatorMatrix::new(space, entries)?;
        let scale = 1.0 + linalg::max_abs(&op.entries);
        let defect = linalg::hermiticity_defect(&op.entries);
        if defect > 1e-12 * scale {
            return Err(Error::NotHermitian(format!(
                "hermiticity defect {defect:.3e} exceeds 1e-12 * {scale:.3e}"
            )));
        }
        op.hermitian_hint = true;
        Ok(op)
    }

    pub fn zeros(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        OperatorMatrix {
            space,
            entries: Array2::zeros((d, d)),
            hermitian_hint: true,
        }
    }

    pub fn identity(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        OperatorMatrix {
            space,
            entries: Array2::from_diag_elem(d, C64::new(1.0, 0.0)),
            hermitian_hint: true,
        }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    /// Compression to the given basis indices (rows and columns).
    pub fn compress(&self, indices: &[usize]) -> Array2<C64> {
        compress(&self.entries, indices)
    }
}

/// Compression of a square matrix to a subset of rows and columns.
pub fn compress(a: &Array2<C64>, indices: &[usize]) -> Array2<C64> {
    let m = indices.len();
    let mut out = Array2::zeros((m, m));
    for (r, &i) in indices.iter().enumerate() {
        for (c, &j) in indices.iter().enumerate() {
            out[[r, c]] = a[[i, j]];
        }
    }
    out
}

/// Row compression only: keeps all columns.
pub fn compress_rows(a: &Array2<C64>, rows: &[usize]) -> Array2<C64> {
    let mut out = Array2::zeros((rows.len(), a.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&a.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_dim_is_product() {
        let s = SpaceSpec::new(vec![3, 4], 2).unwrap();
        assert_eq!(s.total_dim(), 24);
        assert_eq!(s.n_modes(), 2);
    }

    #[test]
    fn index_roundtrip() {
        let s = SpaceSpec::new(vec![3, 4], 2).unwrap();
        for idx in 0..s.total_dim() {
            let (occ, spin) = s.occupations(idx);
            assert_eq!(s.index_of(&occ, spin).unwrap(), idx);
        }
        // spin is fastest, last mode next
        assert_eq!(s.index_of(&[0, 0], 1).unwrap(), 1);
        assert_eq!(s.index_of(&[0, 1], 0).unwrap(), 2);
        assert_eq!(s.index_of(&[1, 0], 0).unwrap(), 8);
    }

    #[test]
    fn interior_excludes_edge_states() {
        let s = SpaceSpec::new(vec![4], 1).unwrap();
        assert_eq!(s.interior_indices(0).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(s.interior_indices(1).unwrap(), vec![0, 1, 2]);
        assert_eq!(s.interior_indices(2).unwrap(), vec![0, 1]);
        assert_eq!(s.boundary_indices(2).unwrap(), vec![2, 3]);

        let two = SpaceSpec::new(vec![3, 3], 2).unwrap();
        let interior = two.interior_indices(1).unwrap();
        for &i in &interior {
            let (occ, _) = two.occupations(i);
            assert!(occ.iter().all(|&n| n < 2));
        }
        assert_eq!(interior.len(), 2 * 2 * 2);
    }

    #[test]
    fn buffer_must_fit() {
        let s = SpaceSpec::new(vec![3], 1).unwrap();
        assert!(s.interior_indices(3).is_err());
    }

    #[test]
    fn hermitian_constructor_validates() {
        let s = SpaceSpec::single_mode(2).unwrap();
        let mut a: Array2<C64> = Array2::zeros((2, 2));
        a[[0, 1]] = C64::new(0.0, 1.0);
        assert!(OperatorMatrix::hermitian(s.clone(), a.clone()).is_err());
        a[[1, 0]] = C64::new(0.0, -1.0);
        assert!(OperatorMatrix::hermitian(s, a).is_ok());
    }
}
