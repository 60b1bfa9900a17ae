//! Samplers against independent numerical or closed-form references.

mod common;

use apsp::baselines::{
    fit_commensurate, fit_horseshoe, fit_map, fit_modified_power_prior, A0Prior, Commensurability, CommensurateSettings,
    MapSettings, NigPrior,
};
use apsp::data::Role;
use apsp::mcmc::ChainSpec;
use apsp::ssp::{fit_ssp, SspPriorSpec};
use common::{
    dataset, gaussian, horseshoe_mean_grid, npp_a0_mean, ols, pooled_separate_variances, semi_conjugate_moments, ssp_pip_grid,
};

fn long_chain(seed: u64) -> ChainSpec {
    ChainSpec { n_iter: 60_000, n_burn: 5_000, thin: 1, seed, mh_step: 1.0 }
}

fn single(x: &[f64], y: &[f64]) -> apsp::data::Dataset {
    let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
    dataset(Role::Internal, &rows, y.to_vec())
}

#[test]
fn ssp_pip_matches_grid_on_small_designs() {
    let prior = SspPriorSpec::default();
    let cases: [(&[f64], &[f64]); 4] = [
        (&[-1.3, -0.6, 0.0, 0.4, 0.9, 1.5], &[0.2, -0.9, 0.5, 0.1, 1.1, 0.4]),
        (&[-1.0, -0.5, 0.2, 0.3, 1.1, 1.4, -0.2], &[-1.2, -0.1, 0.3, 0.9, 1.0, 1.9, -0.4]),
        (&[0.3, -1.1, 0.8, -0.4, 1.6, -0.9, 0.1, 0.6], &[0.1, 0.4, -0.3, 0.2, 0.5, -0.6, 0.0, 0.3]),
        (&[-2.0, -1.0, 0.0, 1.0, 2.0, 0.5], &[-3.9, -2.2, 0.1, 1.8, 4.1, 1.2]),
    ];
    for (i, (x, y)) in cases.iter().enumerate() {
        let oracle = ssp_pip_grid(x, y, prior.v_slab, prior.v_spike, prior.a_sigma, prior.b_sigma);
        let fit = fit_ssp(&single(x, y), &prior, &long_chain(10 + i as u64)).unwrap();
        let pip = fit.pips()[0];
        assert!((pip - oracle).abs() <= 0.03, "case {i}: sampler {pip:.4} vs grid {oracle:.4}");
    }
}

#[test]
fn spike_free_sampler_matches_quadrature_over_precision() {
    let prior = SspPriorSpec { v_spike: 100.0, ..SspPriorSpec::default() };
    for (seed, n) in [(101, 25), (7, 12)] {
        let ds = gaussian(seed, n, 0.5, &[1.0, -0.5, 0.25], 1.0, Role::Internal);
        let (mean, var) = semi_conjugate_moments(&ds, prior.v_slab, prior.a_sigma, prior.b_sigma);
        let chain = ChainSpec { n_iter: 60_000, n_burn: 2_000, thin: 1, seed, mh_step: 1.0 };
        let fit = fit_ssp(&ds, &prior, &chain).unwrap();
        for (j, c) in fit.coefficients.iter().enumerate() {
            assert!((c.mean - mean[j]).abs() <= 0.02, "n {n} mean {}: {} vs {}", j, c.mean, mean[j]);
            assert!((c.variance / var[j] - 1.0).abs() <= 0.04, "n {n} var {}: {} vs {}", j, c.variance, var[j]);
        }
    }
}

#[test]
fn equal_spike_and_slab_gives_prior_inclusion() {
    let prior = SspPriorSpec { v_spike: 100.0, ..SspPriorSpec::default() };
    let ds = gaussian(3, 25, 0.5, &[1.0, 0.0, -0.5], 1.0, Role::Internal);
    let fit = fit_ssp(&ds, &prior, &ChainSpec { n_iter: 20_000, n_burn: 2_000, ..ChainSpec::default() }).unwrap();
    let expected = prior.a_pi / (prior.a_pi + prior.b_pi);
    for p in fit.pips() {
        assert!((p - expected).abs() <= 0.05, "{p}");
    }
}

#[test]
fn horseshoe_mean_matches_grid() {
    let x = [-1.3, -0.6, 0.0, 0.4, 0.9, 1.5];
    let y = [-1.1, -0.9, 0.5, 0.1, 1.6, 0.9];
    let oracle = horseshoe_mean_grid(&x, &y);
    let chain = ChainSpec { n_iter: 200_000, n_burn: 10_000, thin: 1, seed: 5, mh_step: 1.0 };
    let fit = fit_horseshoe(&single(&x, &y), &chain).unwrap();
    let mean = fit.coefficients[0].mean;
    assert!((mean - oracle).abs() <= 0.03, "sampler {mean:.4} vs grid {oracle:.4}");
}

fn joint_pair(seed: u64) -> (apsp::data::Dataset, apsp::data::Dataset) {
    let ext = gaussian(seed, 200, 0.3, &[1.0, -0.5, 0.0], 1.0, Role::External);
    let int = gaussian(seed + 1, 60, -0.2, &[1.2, -0.3, 0.4], 1.0, Role::Internal);
    (ext, int)
}

fn close(got: &[f64], want: &[f64], tol: f64, what: &str) {
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= tol, "{what}: {got:?} vs {want:?}");
    }
}

#[test]
fn commensurate_limits() {
    let (ext, int) = joint_pair(20);
    let chain = ChainSpec { n_iter: 8000, n_burn: 1000, ..ChainSpec::default() };
    let loose = CommensurateSettings { nu: Commensurability::Fixed(1e-8), ..Default::default() };
    let fit = fit_commensurate(&int, &ext, &loose, &chain).unwrap();
    close(&fit.means(), &ols(&int), 0.02, "nu -> 0 gives the internal regression");
    let tight = CommensurateSettings { nu: Commensurability::Fixed(1e8), ..Default::default() };
    let fit = fit_commensurate(&int, &ext, &tight, &chain).unwrap();
    close(&fit.means(), &pooled_separate_variances(&int, &ext), 0.03, "nu -> inf pools the slopes");
}

#[test]
fn map_limits() {
    let (ext, int) = joint_pair(30);
    let chain = ChainSpec { n_iter: 8000, n_burn: 1000, ..ChainSpec::default() };
    let narrow = MapSettings { sigma_psi: 1e-4, ..Default::default() };
    let fit = fit_map(&int, &ext, &narrow, &chain).unwrap();
    close(&fit.means(), &pooled_separate_variances(&int, &ext), 0.03, "small heterogeneity pools");
    let wide = MapSettings { sigma_psi: 100.0, ..Default::default() };
    let fit = fit_map(&int, &ext, &wide, &chain).unwrap();
    close(&fit.means(), &ols(&int), 0.05, "large heterogeneity separates");
}

#[test]
fn mpp_discount_tracks_agreement() {
    let chain = ChainSpec { n_iter: 8000, n_burn: 1000, ..ChainSpec::default() };
    let int = gaussian(40, 40, 0.0, &[1.0, -0.5], 1.0, Role::Internal);
    let agree = gaussian(41, 100, 0.0, &[1.0, -0.5], 1.0, Role::External);
    let conflict = gaussian(42, 100, 0.0, &[-1.0, 0.5], 1.0, Role::External);
    let nig = NigPrior::default();
    let a = fit_modified_power_prior(&int, &agree, A0Prior::default(), &nig, &chain).unwrap();
    let c = fit_modified_power_prior(&int, &conflict, A0Prior::default(), &nig, &chain).unwrap();
    let v0 = [nig.v_intercept, nig.v_beta, nig.v_beta];
    let oracle_a = npp_a0_mean(&int, &agree, &v0, nig.a, nig.b);
    let oracle_c = npp_a0_mean(&int, &conflict, &v0, nig.a, nig.b);
    assert!((a.a0_mean - oracle_a).abs() <= 0.03, "agreeing: sampler {} vs quadrature {oracle_a}", a.a0_mean);
    assert!((c.a0_mean - oracle_c).abs() <= 0.03, "conflicting: sampler {} vs quadrature {oracle_c}", c.a0_mean);
    assert!(a.a0_mean > c.a0_mean + 0.2);
    assert!(a.a0_draws.iter().chain(&c.a0_draws).all(|v| (0.0..=1.0).contains(v)));
}
