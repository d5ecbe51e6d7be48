use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{param, Error, Result};

/// A zero-meaned signal set with the Cholesky factor of its regularized
/// auto-covariance, reusable across many correlations.
#[derive(Debug, Clone)]
pub struct Prepared {
    rows: Vec<Vec<f64>>,
    chol_l: DMatrix<f64>,
}

impl Prepared {
    pub fn new(x: &[Vec<f64>]) -> Result<Self> {
        let n = x.first().map_or(0, Vec::len);
        if x.is_empty() || n == 0 || x.iter().any(|r| r.len() != n) {
            return Err(param("signal set must be a non-empty rectangular matrix"));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation("signal set contains non-finite values".into()));
        }
        let rows: Vec<Vec<f64>> = x
            .iter()
            .map(|r| {
                let m = r.iter().sum::<f64>() / n as f64;
                r.iter().map(|v| v - m).collect()
            })
            .collect();
        let d = rows.len();
        let mut c = cross(&rows, &rows, n);
        let trace = c.trace();
        if !(trace > 0.0) {
            return Err(Error::Degenerate("signal set has no variance after mean removal".into()));
        }
        let ridge = 1e-10 * trace / d as f64;
        for i in 0..d {
            c[(i, i)] += ridge;
        }
        let chol = c
            .cholesky()
            .ok_or_else(|| Error::Degenerate("auto-covariance is not positive definite".into()))?;
        Ok(Self { rows, chol_l: chol.l() })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn n_samples(&self) -> usize {
        self.rows[0].len()
    }

    /// Largest canonical correlation with `other`.
    pub fn corr(&self, other: &Prepared) -> Result<f64> {
        let n = self.n_samples();
        if other.n_samples() != n {
            return Err(param(format!("sample counts differ: {n} vs {}", other.n_samples())));
        }
        if n <= self.dim() + other.dim() {
            return Err(param(format!(
                "{n} samples are too few for {} + {} signals",
                self.dim(),
                other.dim()
            )));
        }
        let cxy = cross(&self.rows, &other.rows, n);
        // Lx⁻¹ Cxy Ly⁻ᵀ
        let a = self
            .chol_l
            .solve_lower_triangular(&cxy)
            .ok_or_else(|| Error::Degenerate("singular whitening factor".into()))?;
        let w = other
            .chol_l
            .solve_lower_triangular(&a.transpose())
            .ok_or_else(|| Error::Degenerate("singular whitening factor".into()))?;
        // top singular value via the smaller Gram matrix
        let g = if w.nrows() <= w.ncols() { &w * w.transpose() } else { w.transpose() * &w };
        let top = SymmetricEigen::new(g).eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
        Ok(top.max(0.0).sqrt().min(1.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn cross(a: &[Vec<f64>], b: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| dot(&a[i], &b[j]) / n as f64)
}

/// Largest canonical correlation between the row spaces of `x` and `y`
/// (each rows × samples), in `[0, 1]`.
///
/// Rows are zero-meaned; each auto-covariance gets a ridge of
/// `1e-10·trace/dim` before Cholesky whitening.
pub fn cca_max_corr(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    let n = x.first().map_or(0, Vec::len);
    if y.first().map_or(0, Vec::len) != n {
        return Err(param("X and Y must have the same number of samples"));
    }
    if n <= x.len() + y.len() {
        return Err(param(format!("{n} samples are too few for {} + {} signals", x.len(), y.len())));
    }
    Prepared::new(x)?.corr(&Prepared::new(y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(rng: &mut ChaCha8Rng, r: usize, n: usize) -> Vec<Vec<f64>> {
        (0..r).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect()
    }

    #[test]
    fn identical_sets_correlate_fully() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = noise(&mut rng, 4, 300);
        assert!((cca_max_corr(&x, &x).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = noise(&mut rng, 5, 400);
        let mut y = noise(&mut rng, 3, 400);
        for (i, v) in y[0].iter_mut().enumerate() {
            *v += 0.3 * x[1][i];
        }
        let a = cca_max_corr(&x, &y).unwrap();
        assert!((a - cca_max_corr(&y, &x).unwrap()).abs() < 1e-9);
        let xs: Vec<Vec<f64>> =
            x.iter().enumerate().map(|(c, r)| r.iter().map(|v| (c as f64 + 0.5) * 3.0 * v - 7.0).collect()).collect();
        assert!((a - cca_max_corr(&xs, &y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let x = vec![vec![0.0, 1.0, 2.0]; 2];
        assert!(matches!(cca_max_corr(&x, &x), Err(Error::Parameter(_))));
    }
}
