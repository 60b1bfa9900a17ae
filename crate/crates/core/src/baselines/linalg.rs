use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::SamplerRng;

/// n × (K + 1) design with a leading intercept column.
pub(crate) fn design_with_intercept(ds: &Dataset) -> DMatrix<f64> {
    let (n, k) = (ds.n(), ds.k());
    DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { ds.value(i, j - 1) })
}

/// Cross-products of a dataset (with intercept column).
#[derive(Debug, Clone)]
pub(crate) struct SuffStats {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub n: f64,
}

impl SuffStats {
    pub fn new(ds: &Dataset) -> Self {
        let x = design_with_intercept(ds);
        let y = DVector::from_column_slice(ds.y());
        SuffStats {
            xtx: x.transpose() * &x,
            xty: x.transpose() * &y,
            yty: y.dot(&y),
            n: ds.n() as f64,
        }
    }

    /// self + w · other
    pub fn weighted_sum(&self, other: &SuffStats, w: f64) -> Self {
        SuffStats {
            xtx: &self.xtx + &other.xtx * w,
            xty: &self.xty + &other.xty * w,
            yty: self.yty + w * other.yty,
            n: self.n + w * other.n,
        }
    }

    pub fn scaled(&self, w: f64) -> Self {
        SuffStats {
            xtx: &self.xtx * w,
            xty: &self.xty * w,
            yty: self.yty * w,
            n: self.n * w,
        }
    }

    pub fn rss(&self, theta: &DVector<f64>) -> f64 {
        (self.yty - 2.0 * theta.dot(&self.xty) + (theta.transpose() * &self.xtx * theta)[(0, 0)]).max(0.0)
    }
}

pub(crate) fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::Divergence(format!("{what} is not positive definite")))
}

/// Draw from N(P⁻¹ h, scale² P⁻¹) given the Cholesky factor of P.
pub(crate) fn gaussian_from_precision(
    chol: &Cholesky<f64, Dyn>,
    h: &DVector<f64>,
    scale: f64,
    rng: &mut SamplerRng,
) -> DVector<f64> {
    let mean = chol.solve(h);
    let z = DVector::from_fn(h.len(), |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    let lt = chol.l().transpose();
    let noise = lt
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    mean + noise
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gaussian_draw_moments() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let h = DVector::from_vec(vec![1.0, -1.0]);
        let chol = cholesky(p.clone(), "p").unwrap();
        let mut rng = SamplerRng::seed_from_u64(1);
        let n = 40_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| gaussian_from_precision(&chol, &h, 1.0, &mut rng)).collect();
        let mean = draws.iter().fold(DVector::zeros(2), |a, d| a + d) / n as f64;
        let expect = p.clone().try_inverse().unwrap() * &h;
        assert!((mean - &expect).norm() < 0.01);
        let cov = draws
            .iter()
            .fold(DMatrix::zeros(2, 2), |a, d| a + (d - &expect) * (d - &expect).transpose())
            / n as f64;
        let inv = p.try_inverse().unwrap();
        assert!((cov - inv).abs().max() < 0.01);
    }
}
