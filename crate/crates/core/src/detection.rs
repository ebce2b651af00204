//! Channel and detector model: click branching into Bob's rotated bases,
//! n-photon yields, closed-form gains and error rates, and their
//! interval-averaged versions over post-selection regions.

use crate::quad::{integrate_region, QuadOrders};
use crate::source::{
    phi_nodes, poisson_weight, Basis, BlochIntensityPoint, IntensityClass, IntervalFamily,
    SourceParams, StateLabel,
};

/// Fiber channel with a reference-frame rotation of the X/Y bases.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelParams {
    pub alpha_db_per_km: f64,
    pub length_km: f64,
    /// Rotation angle β between Alice's and Bob's X/Y bases (Z is aligned).
    pub misalignment_beta: f64,
}

impl ChannelParams {
    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * self.length_km / 10.0)
    }
}

/// Threshold-detector parameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectorParams {
    /// Detection efficiency.
    pub eta_d: f64,
    /// Dark count probability per gate.
    pub pd: f64,
    /// Intrinsic optical error rate.
    pub ed: f64,
}

impl DetectorParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "eta_d must lie in (0,1]; got {}",
                self.eta_d
            )));
        }
        if !(self.pd >= 0.0 && self.pd < 1.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "pd must lie in [0,1); got {}",
                self.pd
            )));
        }
        if !(self.ed >= 0.0 && self.ed <= 0.5) {
            return Err(crate::Error::InvalidParameter(format!(
                "ed must lie in [0,0.5]; got {}",
                self.ed
            )));
        }
        Ok(())
    }

    /// Copy with the channel transmittance folded into the efficiency, for
    /// source-photon-number yields (binomial thinning keeps the yield's
    /// closed form with η_d → η_c η_d).
    pub fn with_channel(&self, channel: &ChannelParams) -> DetectorParams {
        DetectorParams {
            eta_d: self.eta_d * channel.transmittance(),
            ..*self
        }
    }
}

/// Click branching probabilities |f(x)|², |f(y)|² for the two detectors of a
/// basis; x is the "plus" detector (H, D′, or R′).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisAmplitudes {
    pub basis: Basis,
    pub fx2: f64,
    pub fy2: f64,
}

/// Branching of the state (θ, φ) into Bob's `basis` rotated by β.
pub fn branching(theta: f64, phi: f64, beta_misalign: f64, basis: Basis) -> BasisAmplitudes {
    let fx2 = match basis {
        Basis::Z => (1.0 + theta.cos()) / 2.0,
        Basis::X => (1.0 + theta.sin() * (phi - beta_misalign).cos()) / 2.0,
        Basis::Y => (1.0 + theta.sin() * (phi - beta_misalign).sin()) / 2.0,
    };
    BasisAmplitudes {
        basis,
        fx2,
        fy2: 1.0 - fx2,
    }
}

/// Probability that an n-photon state at the detectors makes detector x
/// (resp. y) respond.
pub fn n_photon_yields(n: usize, amps: &BasisAmplitudes, det: &DetectorParams) -> (f64, f64) {
    let one = 1.0 - det.pd;
    let miss = (1.0 - det.eta_d).powi(n as i32);
    let yx = one * (1.0 - det.eta_d * amps.fy2).powi(n as i32) - one * one * miss;
    let yy = one * (1.0 - det.eta_d * amps.fx2).powi(n as i32) - one * one * miss;
    (yx, yy)
}

/// Closed-form gains for a coherent pulse of intensity I after the channel:
/// returns (Q_matched, Q_other) relative to the detector matching `sent`.
fn gains_for(
    intensity: f64,
    theta: f64,
    phi: f64,
    sent: StateLabel,
    bob: Basis,
    channel: &ChannelParams,
    det: &DetectorParams,
) -> (f64, f64) {
    let amps = branching(theta, phi, channel.misalignment_beta, bob);
    let (mut fx2, mut fy2) = (amps.fx2, amps.fy2);
    if sent.sign() < 0.0 {
        std::mem::swap(&mut fx2, &mut fy2);
    }
    let mu = intensity * channel.transmittance() * det.eta_d;
    let one = 1.0 - det.pd;
    let qx = one * (-mu * fy2).exp() - one * one * (-mu).exp();
    let qy = one * (-mu * fx2).exp() - one * one * (-mu).exp();
    (qx, qy)
}

/// Overall gain Q and error rate E for one emitted point, with Bob measuring
/// in `bob` and errors counted against the detector matching `sent`.
///
/// Q = 0 exactly only when Pd = 0 and I = 0; the error rate is then 1/2 by
/// convention.
pub fn gain_and_error(
    point: &BlochIntensityPoint,
    sent: StateLabel,
    bob: Basis,
    channel: &ChannelParams,
    det: &DetectorParams,
) -> (f64, f64) {
    let (qx, qy) = gains_for(
        point.intensity,
        point.theta,
        point.phi,
        sent,
        bob,
        channel,
        det,
    );
    let q = qx + qy;
    if q <= 0.0 {
        return (0.0, 0.5);
    }
    let e = (det.ed * qx + (1.0 - det.ed) * qy) / q;
    (q, e)
}

/// Interval averages over one state's region for one Bob basis.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetectionMoments {
    /// ⟨Q⟩: conditional gain.
    pub q: f64,
    /// ⟨EQ⟩: conditional error-click rate (product moment).
    pub eq: f64,
    /// ⟨E⟩ = ⟨EQ⟩/⟨Q⟩ (response-weighted).
    pub e_weighted: f64,
    /// Direct density average of E (the unweighted alternative).
    pub e_literal: f64,
    /// Poisson-weighted true single-photon yield ⟨Y¹⟩ (infinite-decoy value).
    pub y1: f64,
    /// Poisson-weighted true single-photon error-yield ⟨e¹Y¹⟩.
    pub w1: f64,
}

/// Unnormalized integrals of the detection quantities over a state region;
/// divide by the region probability to obtain conditional moments.
///
/// Returns (∫Q f, ∫EQ f, ∫E f, ∫Y¹ P(I,1) f, ∫e¹Y¹ P(I,1) f, ∫P(I,1) f), all
/// including the φ fraction.
#[allow(clippy::too_many_arguments)]
pub fn raw_detection_integrals(
    family: &IntervalFamily,
    params: &SourceParams,
    state: StateLabel,
    class: IntensityClass,
    bob: Basis,
    channel: &ChannelParams,
    det: &DetectorParams,
    orders: QuadOrders,
) -> [f64; 6] {
    let window = family.phi_window(state);
    // per-node trig of the rotated azimuth: (cos(phi-beta), sin(phi-beta), weight)
    let nodes: Vec<(f64, f64, f64)> = phi_nodes(window, orders)
        .into_iter()
        .map(|(phi, w)| {
            let a = phi - channel.misalignment_beta;
            (a.cos(), a.sin(), w)
        })
        .collect();
    let eta1 = channel.transmittance() * det.eta_d;
    let one = 1.0 - det.pd;
    let swap = state.sign() < 0.0;
    let y_miss = one * one * (1.0 - eta1);
    let mut acc = [0.0; 6];
    integrate_region(
        params.sigma,
        family.theta_window(state),
        family.intensity_bin(class),
        orders,
        |intensity, theta, out| {
            out.fill(0.0);
            let p1 = poisson_weight(intensity, 1);
            let mu = intensity * eta1;
            let miss_all = one * one * (-mu).exp();
            let (sin_t, cos_t) = theta.sin_cos();
            for &(cphi, sphi, w) in &nodes {
                let mut fx2 = match bob {
                    Basis::Z => (1.0 + cos_t) / 2.0,
                    Basis::X => (1.0 + sin_t * cphi) / 2.0,
                    Basis::Y => (1.0 + sin_t * sphi) / 2.0,
                };
                if swap {
                    fx2 = 1.0 - fx2;
                }
                let fy2 = 1.0 - fx2;
                let qx = one * (-mu * fy2).exp() - miss_all;
                let qy = one * (-mu * fx2).exp() - miss_all;
                let q = qx + qy;
                let eq = det.ed * qx + (1.0 - det.ed) * qy;
                out[0] += w * q;
                out[1] += w * eq;
                out[2] += w * if q > 0.0 { eq / q } else { 0.5 };
                let y1x = one * (1.0 - eta1 * fy2) - y_miss;
                let y1y = one * (1.0 - eta1 * fx2) - y_miss;
                out[3] += w * p1 * (y1x + y1y);
                out[4] += w * p1 * (det.ed * y1x + (1.0 - det.ed) * y1y);
            }
            out[5] = p1;
        },
        &mut acc,
    );
    // the Z-region single phi node already carries weight 1; X/Y nodes carry
    // the window fraction. out[5] must carry the phi fraction explicitly.
    acc[5] *= window.fraction();
    acc
}

/// Conditional detection moments over one state's region.
#[allow(clippy::too_many_arguments)]
pub fn interval_moments(
    family: &IntervalFamily,
    params: &SourceParams,
    state: StateLabel,
    class: IntensityClass,
    bob: Basis,
    channel: &ChannelParams,
    det: &DetectorParams,
    orders: QuadOrders,
) -> crate::Result<DetectionMoments> {
    let raw = raw_detection_integrals(family, params, state, class, bob, channel, det, orders);
    let p =
        crate::source::interval_probability(family, family.region(state, class), params, orders);
    if p <= 0.0 {
        return Err(crate::Error::EmptyRegion);
    }
    let q = raw[0] / p;
    let eq = raw[1] / p;
    Ok(DetectionMoments {
        q,
        eq,
        e_weighted: if q > 0.0 { eq / q } else { 0.5 },
        e_literal: raw[2] / p,
        y1: if raw[5] > 0.0 { raw[3] / raw[5] } else { 0.0 },
        w1: if raw[5] > 0.0 { raw[4] / raw[5] } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::Region;
    use std::f64::consts::PI;

    const DET: DetectorParams = DetectorParams {
        eta_d: 0.65,
        pd: 1e-6,
        ed: 0.015,
    };

    fn channel(l: f64, beta: f64) -> ChannelParams {
        ChannelParams {
            alpha_db_per_km: 0.2,
            length_km: l,
            misalignment_beta: beta,
        }
    }

    #[test]
    fn branching_matches_closed_forms() {
        let a = branching(0.0, 0.3, 0.0, Basis::Z);
        assert!((a.fx2 - 1.0).abs() < 1e-15 && a.fy2.abs() < 1e-15);

        let a = branching(PI / 2.0, 0.7, 0.7, Basis::X);
        assert!((a.fx2 - 1.0).abs() < 1e-12);

        let a = branching(PI / 2.0, 0.0, PI / 4.0, Basis::X);
        let expect = (1.0 + (2.0f64).sqrt() / 2.0) / 2.0;
        assert!((a.fx2 - expect).abs() < 1e-15);
        assert!((a.fx2 + a.fy2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_yield_is_dark_count_only() {
        let amps = branching(0.4, 0.0, 0.0, Basis::Z);
        let (yx, yy) = n_photon_yields(0, &amps, &DET);
        let expect = DET.pd * (1.0 - DET.pd);
        assert!((yx - expect).abs() < 1e-12);
        assert!((yy - expect).abs() < 1e-12);
    }

    #[test]
    fn single_photon_on_matched_detector() {
        let det = DetectorParams {
            eta_d: 0.65,
            pd: 0.0,
            ed: 0.0,
        };
        let amps = BasisAmplitudes {
            basis: Basis::Z,
            fx2: 1.0,
            fy2: 0.0,
        };
        let (yx, yy) = n_photon_yields(1, &amps, &det);
        assert!((yx - det.eta_d).abs() < 1e-15);
        assert!(yy.abs() < 1e-15);
    }

    #[test]
    fn yields_match_binomial_splitting_oracle() {
        // brute-force sum over |m>_x |n-m>_y splittings: the yield is the
        // exclusive event "x responds, y stays silent" (double clicks are
        // not counted by either detector's yield)
        let det = DetectorParams {
            eta_d: 0.65,
            pd: 1e-6,
            ed: 0.0,
        };
        let amps = BasisAmplitudes {
            basis: Basis::X,
            fx2: 0.5,
            fy2: 0.5,
        };
        let n = 3;
        let mut oracle = 0.0;
        for m in 0..=n {
            let comb = [1.0, 3.0, 3.0, 1.0][m];
            let p_split = comb * amps.fx2.powi(m as i32) * amps.fy2.powi((n - m) as i32);
            let x_clicks = 1.0 - (1.0 - det.eta_d).powi(m as i32) * (1.0 - det.pd);
            let y_silent = (1.0 - det.eta_d).powi((n - m) as i32) * (1.0 - det.pd);
            oracle += p_split * x_clicks * y_silent;
        }
        let (yx, yy) = n_photon_yields(n, &amps, &det);
        assert!((yx - oracle).abs() < 1e-14, "{yx} vs {oracle}");
        // symmetric split: both detectors see the same yield
        assert!((yy - oracle).abs() < 1e-14);
    }

    #[test]
    fn gain_error_vacuum_and_aligned() {
        let ch = channel(0.0, 0.0);
        let p0 = BlochIntensityPoint {
            intensity: 0.0,
            theta: 0.3,
            phi: 0.1,
            psi: 0.0,
        };
        let (q, e) = gain_and_error(&p0, StateLabel::H, Basis::Z, &ch, &DET);
        assert!((q - 2.0 * DET.pd * (1.0 - DET.pd)).abs() < 1e-15);
        assert!((e - 0.5).abs() < 1e-12);

        // Pd = 0, theta = 0, I eta_c eta_d = 1 -> Qx = 1 - e^{-1}, E = ed
        let det = DetectorParams {
            eta_d: 0.5,
            pd: 0.0,
            ed: 0.015,
        };
        let ch0 = channel(0.0, 0.0);
        let p = BlochIntensityPoint {
            intensity: 2.0,
            theta: 0.0,
            phi: 0.0,
            psi: 0.0,
        };
        let (q, e) = gain_and_error(&p, StateLabel::H, Basis::Z, &ch0, &det);
        assert!((q - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((e - det.ed).abs() < 1e-12);
    }

    #[test]
    fn closed_form_gain_equals_poisson_series() {
        // criterion-2 identity at one point; the acceptance suite sweeps a grid
        let ch = channel(37.0, 0.3);
        let det = DET;
        let point = BlochIntensityPoint {
            intensity: 1.7,
            theta: 1.1,
            phi: 2.2,
            psi: 0.0,
        };
        let amps = branching(point.theta, point.phi, ch.misalignment_beta, Basis::X);
        let mu = point.intensity * ch.transmittance();
        let mut qx_series = 0.0;
        let mut qy_series = 0.0;
        for n in 0..=60 {
            let w = poisson_weight(mu, n);
            let (yx, yy) = n_photon_yields(n, &amps, &det);
            qx_series += w * yx;
            qy_series += w * yy;
        }
        let (qx, qy) = gains_for(
            point.intensity,
            point.theta,
            point.phi,
            StateLabel::D,
            Basis::X,
            &ch,
            &det,
        );
        assert!((qx - qx_series).abs() < 1e-10, "{qx} vs {qx_series}");
        assert!((qy - qy_series).abs() < 1e-10);
    }

    #[test]
    fn error_rate_half_when_ed_half() {
        let det = DetectorParams {
            eta_d: 0.65,
            pd: 1e-6,
            ed: 0.5,
        };
        let ch = channel(42.0, 0.2);
        for (theta, phi) in [(0.1, 0.3), (1.2, 4.0), (2.9, 5.5)] {
            let p = BlochIntensityPoint {
                intensity: 0.8,
                theta,
                phi,
                psi: 0.0,
            };
            let (_, e) = gain_and_error(&p, StateLabel::D, Basis::X, &ch, &det);
            assert!((e - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn z_moments_are_beta_independent() {
        let params = SourceParams::full_support(1.0).unwrap();
        let family = IntervalFamily::new(0.3, 0.14, 0.14, (0.1, 0.2, 2.0), &params).unwrap();
        let m0 = interval_moments(
            &family,
            &params,
            StateLabel::H,
            IntensityClass::Signal,
            Basis::Z,
            &channel(50.0, 0.0),
            &DET,
            QuadOrders::default(),
        )
        .unwrap();
        let m1 = interval_moments(
            &family,
            &params,
            StateLabel::H,
            IntensityClass::Signal,
            Basis::Z,
            &channel(50.0, PI / 4.0),
            &DET,
            QuadOrders::default(),
        )
        .unwrap();
        assert!((m0.q - m1.q).abs() < 1e-15);
        assert!((m0.eq - m1.eq).abs() < 1e-15);
    }

    #[test]
    fn delta_interval_limit_recovers_pointwise_gain() {
        let params = SourceParams::full_support(1.0).unwrap();
        // shrink around theta ~ 0, I in a narrow band
        let family = IntervalFamily::new(5e-3, 0.14, 0.14, (0.50, 0.505, 2.0), &params).unwrap();
        let ch = channel(25.0, 0.0);
        let m = interval_moments(
            &family,
            &params,
            StateLabel::H,
            IntensityClass::Decoy,
            Basis::Z,
            &ch,
            &DET,
            QuadOrders::default(),
        )
        .unwrap();
        let p = BlochIntensityPoint {
            intensity: 0.5025,
            theta: 0.0,
            phi: 0.0,
            psi: 0.0,
        };
        let (q, _) = gain_and_error(&p, StateLabel::H, Basis::Z, &ch, &DET);
        assert!((m.q - q).abs() < 1e-4 * q, "{} vs {}", m.q, q);
    }

    #[test]
    fn x_moments_rotationally_covariant_in_beta() {
        // <E> for the X basis with misalignment beta equals <E> at beta = 0
        // with the phi anchor shifted by beta.
        let params = SourceParams::full_support(1.0).unwrap();
        let family = IntervalFamily::new(0.3, 0.2, 0.2, (0.1, 0.2, 2.0), &params).unwrap();
        let beta = 0.37;
        let rotated = interval_moments(
            &family,
            &params,
            StateLabel::D,
            IntensityClass::Signal,
            Basis::X,
            &channel(30.0, beta),
            &DET,
            QuadOrders::default(),
        )
        .unwrap();
        // shift the anchor by beta: integrate D's window around phi = beta directly
        let raw = {
            use crate::source::PhiWindow;
            let window = PhiWindow::Window {
                anchor: beta,
                half_width: family.dphi_xy,
            };
            let nodes = phi_nodes(window, QuadOrders::default());
            let ch0 = channel(30.0, 0.0);
            let eta1 = ch0.transmittance() * DET.eta_d;
            let one = 1.0 - DET.pd;
            let mut acc = [0.0; 2];
            integrate_region(
                params.sigma,
                family.theta_window(StateLabel::D),
                family.intensity_bin(IntensityClass::Signal),
                QuadOrders::default(),
                |intensity, theta, out| {
                    out.fill(0.0);
                    for &(phi, w) in &nodes {
                        let amps = branching(theta, phi, 0.0, Basis::X);
                        let mu = intensity * eta1;
                        let qx = one * (-mu * amps.fy2).exp() - one * one * (-mu).exp();
                        let qy = one * (-mu * amps.fx2).exp() - one * one * (-mu).exp();
                        out[0] += w * (qx + qy);
                        out[1] += w * (DET.ed * qx + (1.0 - DET.ed) * qy);
                    }
                },
                &mut acc,
            );
            acc
        };
        let p = crate::source::interval_probability(
            &family,
            Region {
                state: StateLabel::D,
                class: IntensityClass::Signal,
            },
            &params,
            QuadOrders::default(),
        );
        let e_shifted = (raw[1] / p) / (raw[0] / p);
        assert!((rotated.e_weighted - e_shifted).abs() < 1e-12);
    }
}
