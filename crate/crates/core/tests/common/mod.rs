#![allow(dead_code)]

use apsp::data::{Column, ColumnKind, Dataset, Role};
use apsp::mcmc::SamplerRng;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn dataset(role: Role, rows: &[Vec<f64>], y: Vec<f64>) -> Dataset {
    let k = rows[0].len();
    let cols = (1..=k).map(|j| Column::new(format!("x{j}"), ColumnKind::Continuous)).collect();
    Dataset::from_rows("d", role, "y", cols, rows, y).unwrap()
}

/// y = intercept + X β + sd·ε with standard normal covariates.
pub fn gaussian(seed: u64, n: usize, intercept: f64, beta: &[f64], sd: f64, role: Role) -> Dataset {
    let mut rng = SamplerRng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| beta.iter().map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| intercept + r.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>() + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    dataset(role, &rows, y)
}

/// Design matrix with a leading column of ones.
pub fn design(ds: &Dataset) -> DMatrix<f64> {
    DMatrix::from_fn(ds.n(), ds.k() + 1, |i, j| if j == 0 { 1.0 } else { ds.value(i, j - 1) })
}

pub fn ols(ds: &Dataset) -> Vec<f64> {
    let x = design(ds);
    let y = DVector::from_column_slice(ds.y());
    let xtx = x.transpose() * &x;
    let b = xtx.cholesky().unwrap().solve(&(x.transpose() * y));
    b.iter().skip(1).copied().collect()
}

/// Least squares of two studies with separate intercepts and shared slopes.
pub fn pooled_separate_intercepts(a: &Dataset, b: &Dataset) -> Vec<f64> {
    let k = a.k();
    let n = a.n() + b.n();
    let mut x = DMatrix::zeros(n, k + 2);
    let mut y = DVector::zeros(n);
    for (offset, ds, col) in [(0, a, 0), (a.n(), b, 1)] {
        for i in 0..ds.n() {
            x[(offset + i, col)] = 1.0;
            for j in 0..k {
                x[(offset + i, 2 + j)] = ds.value(i, j);
            }
            y[offset + i] = ds.y()[i];
        }
    }
    let xtx = x.transpose() * &x;
    let beta = xtx.cholesky().unwrap().solve(&(x.transpose() * y));
    beta.iter().skip(2).copied().collect()
}

fn centered(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy = y.iter().map(|v| (v - my).powi(2)).sum();
    (sxx, sxy, syy)
}

fn trapezoid(xs: &[f64], fs: &[f64]) -> f64 {
    xs.windows(2).zip(fs.windows(2)).map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1])).sum()
}

/// Inclusion probability of a single covariate under a flat intercept,
/// β | γ ~ N(0, v_γ), γ ~ Bernoulli(1/2) and precision ~ Gamma(a, b),
/// by a two-dimensional trapezoid over (log precision, β).
pub fn ssp_pip_grid(x: &[f64], y: &[f64], v_slab: f64, v_spike: f64, a: f64, b: f64) -> f64 {
    let n = x.len() as f64;
    let (sxx, sxy, syy) = centered(x, y);
    let log_phi: Vec<f64> = (0..=1600).map(|i| -12.0 + 24.0 * i as f64 / 1600.0).collect();
    let evidence = |v: f64| -> Vec<f64> {
        log_phi
            .iter()
            .map(|&lp| {
                let phi = lp.exp();
                // β grid centered on the conditional posterior
                let prec = phi * sxx + 1.0 / v;
                let centre = phi * sxy / prec;
                let half = 12.0 / prec.sqrt();
                let bs: Vec<f64> = (0..=600).map(|i| centre - half + 2.0 * half * i as f64 / 600.0).collect();
                let fs: Vec<f64> = bs
                    .iter()
                    .map(|&beta| {
                        let rss = syy - 2.0 * beta * sxy + beta * beta * sxx;
                        (n - 1.0) / 2.0 * phi.ln() - 0.5 * phi * rss - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
                            - beta * beta / (2.0 * v)
                            + a * lp
                            - b * phi
                    })
                    .collect();
                let shift = fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let inner = trapezoid(&bs, &fs.iter().map(|f| (f - shift).exp()).collect::<Vec<_>>());
                inner.ln() + shift
            })
            .collect()
    };
    let l1 = evidence(v_slab);
    let l0 = evidence(v_spike);
    let shift = l1.iter().chain(&l0).cloned().fold(f64::NEG_INFINITY, f64::max);
    let z1 = trapezoid(&log_phi, &l1.iter().map(|l| (l - shift).exp()).collect::<Vec<_>>());
    let z0 = trapezoid(&log_phi, &l0.iter().map(|l| (l - shift).exp()).collect::<Vec<_>>());
    z1 / (z1 + z0)
}

/// Posterior mean of β for a single covariate under the horseshoe with a flat
/// intercept and p(σ²) ∝ 1/σ², integrating over u = λτ on a log grid.
pub fn horseshoe_mean_grid(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sxx, sxy, syy) = centered(x, y);
    let pi2 = std::f64::consts::PI.powi(2);
    let (mut num, mut den) = (0.0, 0.0);
    let steps = 200_000;
    let (lo, hi) = (-25.0f64, 25.0f64);
    let h = (hi - lo) / steps as f64;
    for i in 0..steps {
        let lu = lo + (i as f64 + 0.5) * h;
        let u = lu.exp();
        let density = if (u - 1.0).abs() < 1e-9 { 2.0 / pi2 } else { 4.0 / pi2 * lu / (u * u - 1.0) };
        let p = sxx + 1.0 / (u * u);
        let r = syy - sxy * sxy / p;
        let w = density * u * (u * u * p).powf(-0.5) * r.powf(-(n - 1.0) / 2.0);
        num += w * sxy / p;
        den += w;
    }
    num / den
}

/// Shared-slope regression of two studies with separate intercepts and
/// separate noise variances (feasible generalized least squares).
pub fn pooled_separate_variances(a: &Dataset, b: &Dataset) -> Vec<f64> {
    let k = a.k();
    let n = a.n() + b.n();
    let mut x = DMatrix::zeros(n, k + 2);
    let mut y = DVector::zeros(n);
    for (offset, ds, col) in [(0, a, 0), (a.n(), b, 1)] {
        for i in 0..ds.n() {
            x[(offset + i, col)] = 1.0;
            for j in 0..k {
                x[(offset + i, 2 + j)] = ds.value(i, j);
            }
            y[offset + i] = ds.y()[i];
        }
    }
    let mut w = DVector::from_element(n, 1.0);
    let mut beta = DVector::zeros(k + 2);
    for _ in 0..50 {
        let xw = DMatrix::from_fn(n, k + 2, |i, j| x[(i, j)] * w[i]);
        beta = (xw.transpose() * &x).cholesky().unwrap().solve(&(xw.transpose() * &y));
        let resid = &y - &x * &beta;
        for (offset, len) in [(0, a.n()), (a.n(), b.n())] {
            let rss: f64 = (offset..offset + len).map(|i| resid[i] * resid[i]).sum();
            let var = rss / len as f64;
            for i in offset..offset + len {
                w[i] = 1.0 / var;
            }
        }
    }
    beta.iter().skip(2).copied().collect()
}

/// log ∫ L(θ, σ²)^w π(θ, σ²) for y = Xθ + ε under θ | σ² ~ N(0, σ² V0),
/// σ² ~ IG(a, b), with the likelihood raised to the power w.
pub fn nig_log_evidence(ds: &Dataset, w: f64, v0: &[f64], a: f64, b: f64) -> f64 {
    let x = design(ds);
    let y = DVector::from_column_slice(ds.y());
    let prec0 = DMatrix::from_diagonal(&DVector::from_iterator(v0.len(), v0.iter().map(|v| 1.0 / v)));
    let lambda = &prec0 + (x.transpose() * &x) * w;
    let chol = lambda.clone().cholesky().unwrap();
    let mean = chol.solve(&(x.transpose() * &y * w));
    let a_n = a + w * ds.n() as f64 / 2.0;
    let b_n = b + 0.5 * (w * y.dot(&y) - mean.dot(&(&lambda * &mean)));
    let logdet_lambda: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let logdet_prec0: f64 = v0.iter().map(|v| -v.ln()).sum();
    -w * ds.n() as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln() + 0.5 * logdet_prec0 - 0.5 * logdet_lambda
        + a * b.ln()
        - a_n * b_n.ln()
        + statrs::function::gamma::ln_gamma(a_n)
        - statrs::function::gamma::ln_gamma(a)
}

/// Stacks two datasets with per-row likelihood weights folded into a
/// single evidence computation: log ∫ L_a · L_b^w π.
pub fn nig_log_evidence_pair(a: &Dataset, b: &Dataset, w: f64, v0: &[f64], pa: f64, pb: f64) -> f64 {
    let xa = design(a);
    let xb = design(b);
    let ya = DVector::from_column_slice(a.y());
    let yb = DVector::from_column_slice(b.y());
    let prec0 = DMatrix::from_diagonal(&DVector::from_iterator(v0.len(), v0.iter().map(|v| 1.0 / v)));
    let lambda = &prec0 + xa.transpose() * &xa + (xb.transpose() * &xb) * w;
    let chol = lambda.clone().cholesky().unwrap();
    let mean = chol.solve(&(xa.transpose() * &ya + xb.transpose() * &yb * w));
    let n_eff = a.n() as f64 + w * b.n() as f64;
    let a_n = pa + n_eff / 2.0;
    let b_n = pb + 0.5 * (ya.dot(&ya) + w * yb.dot(&yb) - mean.dot(&(&lambda * &mean)));
    let logdet_lambda: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let logdet_prec0: f64 = v0.iter().map(|v| -v.ln()).sum();
    -n_eff / 2.0 * (2.0 * std::f64::consts::PI).ln() + 0.5 * logdet_prec0 - 0.5 * logdet_lambda + pa * pb.ln()
        - a_n * b_n.ln()
        + statrs::function::gamma::ln_gamma(a_n)
        - statrs::function::gamma::ln_gamma(pa)
}

/// Posterior mean of the discount under the normalized power prior with a
/// uniform prior on a₀, by midpoint quadrature.
pub fn npp_a0_mean(int: &Dataset, ext: &Dataset, v0: &[f64], a: f64, b: f64) -> f64 {
    let m = 4000;
    let logs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let a0 = (i as f64 + 0.5) / m as f64;
            (a0, nig_log_evidence_pair(int, ext, a0, v0, a, b) - nig_log_evidence(ext, a0, v0, a, b))
        })
        .collect();
    let top = logs.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let (num, den) = logs
        .iter()
        .fold((0.0, 0.0), |(n, d), (a0, l)| (n + a0 * (l - top).exp(), d + (l - top).exp()));
    num / den
}

/// Posterior means and variances of β under independent N(0, v_slab) priors,
/// a flat intercept and noise precision ~ Gamma(a, b): β is Gaussian given
/// the precision, which is integrated on a log grid.
pub fn semi_conjugate_moments(ds: &Dataset, v_slab: f64, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ds.n();
    let k = ds.k();
    let xbar: Vec<f64> = (0..k).map(|j| ds.column(j).iter().sum::<f64>() / n as f64).collect();
    let ybar = ds.y().iter().sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, k, |i, j| ds.value(i, j) - xbar[j]);
    let y = DVector::from_iterator(n, ds.y().iter().map(|v| v - ybar));
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let yty = y.dot(&y);
    let grid: Vec<f64> = (0..=4000).map(|i| -10.0 + 20.0 * i as f64 / 4000.0).collect();
    let mut pieces = Vec::with_capacity(grid.len());
    for &lp in &grid {
        let phi = lp.exp();
        let p = &xtx * phi + DMatrix::identity(k, k) / v_slab;
        let chol = p.clone().cholesky().unwrap();
        let h = &xty * phi;
        let m = chol.solve(&h);
        let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let logw = (n as f64 - 1.0) / 2.0 * lp - 0.5 * logdet - 0.5 * phi * yty + 0.5 * h.dot(&m) + a * lp - b * phi;
        pieces.push((logw, m, chol.inverse().diagonal()));
    }
    let top = pieces.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m1 = vec![0.0; k];
    let mut m2 = vec![0.0; k];
    for (logw, m, v) in &pieces {
        let w = (logw - top).exp();
        z += w;
        for j in 0..k {
            m1[j] += w * m[j];
            m2[j] += w * (v[j] + m[j] * m[j]);
        }
    }
    let mean: Vec<f64> = m1.iter().map(|v| v / z).collect();
    let var = (0..k).map(|j| m2[j] / z - mean[j] * mean[j]).collect();
    (mean, var)
}
