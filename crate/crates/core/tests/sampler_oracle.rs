//! Distribution-level oracle checks of the interference sampler against the
//! analytic density: a χ² goodness-of-fit test on the θ marginal, and a
//! Monte Carlo outer-product comparison for a two-photon Fock density
//! matrix.

use fprfi_core::pipeline::{Candidate, Experiment, Mode};
use fprfi_core::quad::{integrate_region, QuadOrders};
use fprfi_core::source::{
    fock_density, sample_source, IntensityClass, Region, SigmaWeighting, SourceParams, StateLabel,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

/// θ-marginal of the sampler vs the quadrature of f(I, θ) over each bin,
/// as a χ² test at the 1e-3 significance level.
#[test]
fn theta_marginal_matches_density_chi_squared() {
    let sigma = 0.8;
    let params = SourceParams::full_support(sigma).unwrap();
    let n_samples = 10_000_000usize;
    let bins = 40usize;

    let mut expected = vec![0.0f64; bins];
    for (k, e) in expected.iter_mut().enumerate() {
        let t0 = k as f64 / bins as f64 * PI;
        let t1 = (k + 1) as f64 / bins as f64 * PI;
        let mut acc = [0.0];
        integrate_region(
            sigma,
            (t0, t1),
            (0.0, 2.0 * sigma),
            QuadOrders {
                x_order: 48,
                y_order: 32,
                phi_order: 12,
            },
            |_, _, out| out[0] = 1.0,
            &mut acc,
        );
        *e = acc[0];
    }
    let total: f64 = expected.iter().sum();
    // thin-slice quadrature carries a small systematic bias per bin; the
    // renormalization below removes it and it is far below sampling noise
    assert!(
        (total - 1.0).abs() < 1e-4,
        "marginal bins must cover the support (sum {total})"
    );
    // renormalize away the residual quadrature bias, far below sampling noise
    for e in &mut expected {
        *e /= total;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(314_159);
    let mut counts = vec![0u64; bins];
    for _ in 0..n_samples {
        let p = sample_source(&mut rng, &params);
        let k = ((p.theta / PI * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let mut chi2 = 0.0;
    for k in 0..bins {
        let e = expected[k] * n_samples as f64;
        let d = counts[k] as f64 - e;
        chi2 += d * d / e;
    }
    // chi-square 0.999 quantile at 39 degrees of freedom
    let critical = 72.054_662_951_987_8;
    assert!(
        chi2 < critical,
        "theta marginal chi2 = {chi2:.2} exceeds the 1e-3 critical value {critical:.2}"
    );
}

/// The two-photon Fock density matrix of the D-state signal region matches
/// the Monte Carlo average of |2⟩⟨2| outer products entrywise.
#[test]
fn two_photon_state_matches_outer_product_average() {
    let exp = Experiment::default();
    let cand = Candidate {
        dtheta_z: 0.3,
        dtheta_xy: 0.2,
        dphi_xy: 0.2,
        sigma: 0.5,
    };
    let geom = fprfi_core::source_geometry(&cand, &exp, Mode::Asymptotic).unwrap();
    let region = Region {
        state: StateLabel::D,
        class: IntensityClass::Signal,
    };
    let quad = fock_density(
        &geom.family,
        region,
        2,
        &geom.params,
        SigmaWeighting::PoissonWeighted,
        exp.orders,
    )
    .unwrap();

    let n_samples = 10_000_000usize;
    let mut rng = ChaCha20Rng::seed_from_u64(271_828);
    let mut acc = [[Complex64::new(0.0, 0.0); 3]; 3];
    let mut weight = 0.0f64;
    for _ in 0..n_samples {
        let p = sample_source(&mut rng, &geom.params);
        if !geom.family.contains(region, &p) {
            continue;
        }
        // amplitudes of |2>_{a†(θ,φ)} in the H-first basis (index = V photons)
        let c = (p.theta / 2.0).cos();
        let s = (p.theta / 2.0).sin();
        let e = Complex64::from_polar(1.0, p.phi);
        let psi = [
            Complex64::new(c * c, 0.0),
            (2.0f64).sqrt() * c * s * e,
            s * s * e * e,
        ];
        let w = fprfi_core::source::poisson_weight(p.intensity, 2);
        weight += w;
        for (i, row) in acc.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell += w * psi[i] * psi[j].conj();
            }
        }
    }
    assert!(weight > 0.0);
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let mc = acc[i][j] / weight;
            worst = worst.max((mc - quad.get(i, j)).norm());
        }
    }
    assert!(worst < 1e-3, "worst entry deviation {worst:.2e}");
}
