//! Singular values by one-sided (Hestenes) Jacobi rotations.
//!
//! Each rotation zeroes one off-diagonal entry of the Gram matrix `A^T A`
//! while acting on the columns of `A` directly, so the iteration is the
//! Jacobi eigen-decomposition of the Gram matrix without ever squaring `A`.
//! On convergence the column norms are the singular values.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Relative off-diagonal size at which a column pair counts as orthogonal.
pub const JACOBI_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 60;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("matrix rows have different lengths"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|c| (0..self.rows).map(|r| self.get(r, c)).collect()).collect()
    }

    fn row_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// Entropy of `sigma^2 / sum(sigma^2)` over `ln(min(rows, cols))`.
    pub normalized_spectral_entropy: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn singular_spectrum(matrix: &Matrix) -> Result<SpectrumReport> {
    if matrix.rows == 0 || matrix.cols == 0 {
        return Err(invalid("spectrum of an empty matrix"));
    }
    if matrix.data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let total = matrix.frobenius_sq();
    if total == 0.0 {
        return Err(invalid("spectrum of a zero matrix"));
    }
    // rotate the shorter dimension's vectors
    let mut vecs = if matrix.cols <= matrix.rows { matrix.columns() } else { matrix.row_vectors() };
    let k = vecs.len();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let a = dot(&vecs[i], &vecs[i]);
                let b = dot(&vecs[j], &vecs[j]);
                let g = dot(&vecs[i], &vecs[j]);
                if a == 0.0 || b == 0.0 || g.abs() <= JACOBI_TOL * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = vecs.split_at_mut(j);
                for (x, y) in left[i].iter_mut().zip(right[0].iter_mut()) {
                    let (xi, yj) = (*x, *y);
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!("Jacobi did not converge within {MAX_SWEEPS} sweeps")));
    }

    let mut singular_values: Vec<f64> = vecs.iter().map(|v| dot(v, v).sqrt()).collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));

    let energy: f64 = singular_values.iter().map(|s| s * s).sum();
    let entropy: f64 = singular_values.iter().map(|s| s * s / energy).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum();
    let bound = (k as f64).ln();
    let normalized_spectral_entropy = if bound > 0.0 { (entropy / bound).clamp(0.0, 1.0) } else { 0.0 };
    Ok(SpectrumReport { singular_values, normalized_spectral_entropy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, Purpose::Test, 0);
        let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        Matrix::from_rows(&data).unwrap()
    }

    #[test]
    fn exact_cases() {
        let id = singular_spectrum(&Matrix::diagonal(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(id.singular_values, vec![1.0, 1.0, 1.0]);
        assert!((id.normalized_spectral_entropy - 1.0).abs() < 1e-12);

        let d = singular_spectrum(&Matrix::diagonal(&[2.0, 3.0, 1.0])).unwrap();
        assert_eq!(d.singular_values, vec![3.0, 2.0, 1.0]);

        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 0.7, -1.1];
        let rank1 =
            Matrix::from_rows(&u.iter().map(|a| v.iter().map(|b| a * b).collect()).collect::<Vec<_>>()).unwrap();
        let r = singular_spectrum(&rank1).unwrap();
        assert_eq!(r.singular_values.iter().filter(|&&s| s > 1e-9).count(), 1);
        assert_eq!(r.normalized_spectral_entropy, 0.0);
    }

    #[test]
    fn energy_is_preserved_and_values_descend() {
        for (rows, cols, seed) in [(50, 50, 1), (30, 7, 2), (5, 40, 3), (1, 6, 4)] {
            let m = random(rows, cols, seed);
            let s = singular_spectrum(&m).unwrap();
            let energy: f64 = s.singular_values.iter().map(|x| x * x).sum();
            assert!((energy - m.frobenius_sq()).abs() <= 1e-6 * m.frobenius_sq());
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(s.singular_values.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn matches_two_by_two_closed_form() {
        // singular values of [[a, b], [0, d]] from the Gram eigenvalues
        let (a, b, d) = (3.0, 1.5, 0.5f64);
        let m = Matrix::from_rows(&[vec![a, b], vec![0.0, d]]).unwrap();
        let tr = a * a + b * b + d * d;
        let det = (a * d).powi(2);
        let disc = (tr * tr / 4.0 - det).sqrt();
        let expected = [(tr / 2.0 + disc).sqrt(), (tr / 2.0 - disc).sqrt()];
        let s = singular_spectrum(&m).unwrap();
        for (x, e) in s.singular_values.iter().zip(expected) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(singular_spectrum(&Matrix::zeros(3, 3)).is_err());
        assert!(singular_spectrum(&Matrix::zeros(0, 0)).is_err());
    }
}
