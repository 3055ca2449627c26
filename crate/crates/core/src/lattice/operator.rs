use nalgebra::DMatrix;

use super::{DisorderField, Lattice};
use crate::error::{LabError, Result};

/// `H = -Δ + V` on `ℓ²(Λ)` in compressed sparse row form.
///
/// Each row stores the diagonal `2d + ω_n` and `-1` for each of the `2d`
/// torus neighbours, columns ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl OperatorMatrix {
    /// Order of the matrix, `|Λ|`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "vector length");
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Exact symmetry check: every stored entry equals its transpose bit for bit.
    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| self.get(j, i).to_bits() == v.to_bits()))
    }

    /// Dense copy, refused above `volume_cap`.
    pub fn to_dense(&self, volume_cap: usize) -> Result<DMatrix<f64>> {
        if self.dim > volume_cap {
            return Err(LabError::VolumeCap { volume: self.dim, cap: volume_cap });
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

pub fn assemble_hamiltonian(lattice: &Lattice, field: &DisorderField) -> Result<OperatorMatrix> {
    let n = lattice.volume();
    if field.len() != n {
        return Err(LabError::Mismatch(format!(
            "field has {} sites but the box has {n}",
            field.len()
        )));
    }
    let degree = 2 * lattice.dim();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * (degree + 1));
    let mut vals = Vec::with_capacity(n * (degree + 1));
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(degree + 1);
    for i in 0..n {
        entries.clear();
        entries.push((i, degree as f64 + field.values[i]));
        entries.extend(lattice.index.neighbors(i).iter().map(|&j| (j, -1.0)));
        entries.sort_unstable_by_key(|&(j, _)| j);
        for &(j, v) in &entries {
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(OperatorMatrix { dim: n, row_ptr, cols, vals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_box, sample_disorder, DistributionSpec, DEFAULT_VOLUME_CAP};

    #[test]
    fn free_ring_matrix() {
        let lat = build_box(1, 4, None, DEFAULT_VOLUME_CAP).unwrap();
        let h = assemble_hamiltonian(&lat, &DisorderField::from_values(vec![0.0; 4])).unwrap();
        let dense = h.to_dense(DEFAULT_VOLUME_CAP).unwrap();
        #[rustfmt::skip]
        let expect = DMatrix::from_row_slice(4, 4, &[
             2.0, -1.0,  0.0, -1.0,
            -1.0,  2.0, -1.0,  0.0,
             0.0, -1.0,  2.0, -1.0,
            -1.0,  0.0, -1.0,  2.0,
        ]);
        assert_eq!(dense, expect);
        assert!(h.matvec(&[1.0; 4]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn structure_of_random_operator() {
        let lat = build_box(2, 8, None, DEFAULT_VOLUME_CAP).unwrap();
        let dist = DistributionSpec::uniform(0.0, 3.0).unwrap();
        let field = sample_disorder(&dist, &lat, 5, 0);
        let h = assemble_hamiltonian(&lat, &field).unwrap();
        assert!(h.is_symmetric());
        assert_eq!(h.nnz(), 64 * 5);
        let expected_trace: f64 = field.values.iter().map(|w| 4.0 + w).sum();
        assert!((h.trace() - expected_trace).abs() < 1e-12);
        for (s, w) in h.row_sums().iter().zip(&field.values) {
            assert!((s - w).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_field_rejected() {
        let lat = build_box(1, 8, None, DEFAULT_VOLUME_CAP).unwrap();
        let err = assemble_hamiltonian(&lat, &DisorderField::from_values(vec![0.0; 6])).unwrap_err();
        assert!(matches!(err, LabError::Mismatch(_)));
    }
}
