//! Reference-frame-independent security quantities and key rates: the C
//! statistic, Eve's single-photon information IE₁, finite key length, the
//! asymptotic rate, and the actively modulated decoy-BB84 baseline.

use crate::detection::{branching, ChannelParams, DetectorParams};
use crate::source::Basis;
use serde::{Deserialize, Serialize};

/// Binary Shannon entropy in bits; 0 outside (0, 1).
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Protocol-level constants shared by the finite and asymptotic pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Total pulses emitted by the source (finite mode).
    pub n_pulses: f64,
    /// Bob's basis probabilities.
    pub p_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    /// Failure probability of each Kato invocation.
    pub eps_kato: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    /// Accuracy of the smooth min-entropy estimation.
    pub delta: f64,
    /// Error-correction inefficiency.
    pub f_e: f64,
    /// Photon-number truncation of the decoy LPs.
    pub n_cut: usize,
    /// Source pulse frequency in Hz (for the per-second rate).
    pub source_hz: f64,
}

impl ProtocolParams {
    pub fn p_bob(&self, basis: Basis) -> f64 {
        match basis {
            Basis::Z => self.p_z,
            Basis::X => self.p_x,
            Basis::Y => self.p_y,
        }
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            n_pulses: 1e12,
            p_z: 0.5,
            p_x: 0.25,
            p_y: 0.25,
            eps_kato: 1e-20,
            eps_cor: 1e-20,
            eps_pa: 1e-20,
            delta: 1e-20,
            f_e: 1.16,
            n_cut: 8,
            source_hz: 1e9,
        }
    }
}

/// How the lower bound of one pairing's contribution to C is read off the
/// single-photon error interval.
///
/// `IntervalMin` takes the minimum of (1−2e)² over [e^L, e^U], which
/// under-estimates C as a secure bound must. `PrintedCases` follows the
/// printed case labels, which pick the maximum instead.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CLowerRule {
    IntervalMin,
    PrintedCases,
}

/// Lower bound of C from the four X/Y pairing error intervals
/// (XX, XY, YX, YY order is immaterial).
pub fn rfi_c_lower(e_bounds: &[(f64, f64); 4], rule: CLowerRule) -> f64 {
    e_bounds
        .iter()
        .map(|&(lo, hi)| {
            let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
            match rule {
                CLowerRule::IntervalMin => {
                    if hi <= 0.5 {
                        (1.0 - 2.0 * hi).powi(2)
                    } else if lo >= 0.5 {
                        (1.0 - 2.0 * lo).powi(2)
                    } else {
                        0.0
                    }
                }
                CLowerRule::PrintedCases => {
                    if lo >= 0.5 {
                        (1.0 - 2.0 * hi).powi(2)
                    } else if hi <= 0.5 {
                        (1.0 - 2.0 * lo).powi(2)
                    } else {
                        0.0
                    }
                }
            }
        })
        .sum()
}

/// RFI security parameters derived from C and the single-photon Z error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub c_lower: f64,
    /// (lower, upper) single-photon ZZ error bounds.
    pub e_zz_1: (f64, f64),
    pub u_param: f64,
    pub v_param: f64,
    /// Eve's information per single-photon detection, in bits.
    pub ie1: f64,
}

/// Eve's single-photon information for a C lower bound and a ZZ error upper
/// bound. u and v are clamped into [0, 1]; v is 0 by convention at e = 0
/// (its weight vanishes there).
pub fn ie1(c_lower: f64, e_zz1_upper: f64) -> SecurityParams {
    let c = c_lower.clamp(0.0, 2.0);
    let e = e_zz1_upper.clamp(0.0, 1.0);
    let u = if e < 1.0 {
        ((c / 2.0).sqrt() / (1.0 - e)).min(1.0)
    } else {
        1.0
    };
    let v = if e == 0.0 {
        0.0
    } else {
        ((c / 2.0 - (1.0 - e).powi(2) * u * u).max(0.0).sqrt() / e).min(1.0)
    };
    let bits = (1.0 - e) * binary_entropy((1.0 + u) / 2.0) + e * binary_entropy((1.0 + v) / 2.0);
    SecurityParams {
        c_lower: c,
        e_zz_1: (0.0, e),
        u_param: u,
        v_param: v,
        ie1: bits,
    }
}

/// e¹ interval from error-count and total-count bounds:
/// e^U = m^U/M^L (1 when M^L = 0), e^L = m^L/M^U, clamped into [0, 1].
pub fn single_photon_error_bounds(m_bounds: (f64, f64), big_m_bounds: (f64, f64)) -> (f64, f64) {
    let (m_lo, m_hi) = m_bounds;
    let (bm_lo, bm_hi) = big_m_bounds;
    let upper = if bm_lo > 0.0 {
        (m_hi / bm_lo).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let lower = if bm_hi > 0.0 {
        (m_lo / bm_hi).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (lower.min(upper), upper)
}

/// Count-level quantities entering the finite key length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountEstimates {
    /// Lower bound of the single-photon ZZ response count.
    pub m1_zz_lower: f64,
    /// Upper bound of the total ZZ response count.
    pub m_zz_upper: f64,
    /// Upper bound of the ZZ error rate.
    pub e_zz_upper: f64,
    /// Error-correction leakage f_e · M^U · h(E^U), in bits.
    pub lambda_ec: f64,
}

/// Finite secure key length l = ⌊M₁^L (1 − IE₁) − λ_EC − log₂(1/(2·ε_cor·ε_PA²·δ))⌋,
/// floored at zero.
pub fn finite_key_length(
    counts: &CountEstimates,
    sec: &SecurityParams,
    protocol: &ProtocolParams,
) -> u64 {
    let log_term =
        (1.0 / (2.0 * protocol.eps_cor * protocol.eps_pa.powi(2) * protocol.delta)).log2();
    let l = counts.m1_zz_lower * (1.0 - sec.ie1) - counts.lambda_ec - log_term;
    if l <= 0.0 {
        0
    } else {
        l.floor() as u64
    }
}

/// Moments of the signal-bin Z region entering the asymptotic rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMoments {
    /// ⟨P⟩ of the Z signal region (both states).
    pub p_region: f64,
    /// Conditional single-photon weight ⟨P(I,1)⟩/⟨P⟩.
    pub p1_conditional: f64,
    /// Exact single-photon yield ⟨Y¹_Z⟩.
    pub y1: f64,
    /// Gain ⟨Q_Z⟩ and error ⟨E_Z⟩.
    pub q: f64,
    pub e: f64,
}

/// Asymptotic (infinite-key, infinite-decoy) rate per pulse, floored at 0.
pub fn asymptotic_rate(
    moments: &AsymptoticMoments,
    sec: &SecurityParams,
    protocol: &ProtocolParams,
) -> f64 {
    let r = moments.p_region
        * protocol.p_z
        * (moments.p1_conditional * moments.y1 * (1.0 - sec.ie1)
            - protocol.f_e * moments.q * binary_entropy(moments.e));
    r.max(0.0)
}

/// Asymptotic decoy-BB84 rate with perfect state preparation at the given
/// intensity: R = q·(Q₁(1 − h(e₁)) − f_e·Q·h(E)) under the same channel and
/// detector model. This is the comparison baseline only; `q` is the basis
/// sifting factor.
pub fn active_baseline_rate(
    channel: &ChannelParams,
    det: &DetectorParams,
    intensity: f64,
    f_e: f64,
    sift_q: f64,
) -> f64 {
    let eta = channel.transmittance() * det.eta_d;
    let one = 1.0 - det.pd;
    // perfect |H> into the Z basis: branching (1, 0)
    let amps = branching(0.0, 0.0, 0.0, Basis::Z);
    let mu = intensity * channel.transmittance() * det.eta_d;
    let qx = one * (-mu * amps.fy2).exp() - one * one * (-mu).exp();
    let qy = one * (-mu * amps.fx2).exp() - one * one * (-mu).exp();
    let q = qx + qy;
    let e = if q > 0.0 {
        (det.ed * qx + (1.0 - det.ed) * qy) / q
    } else {
        0.5
    };
    let y1x = one - one * one * (1.0 - eta);
    let y1y = one * (1.0 - eta) - one * one * (1.0 - eta);
    let y1 = y1x + y1y;
    let e1 = if y1 > 0.0 {
        (det.ed * y1x + (1.0 - det.ed) * y1y) / y1
    } else {
        0.5
    };
    let q1 = intensity * (-intensity).exp() * y1;
    (sift_q * (q1 * (1.0 - binary_entropy(e1)) - f_e * q * binary_entropy(e))).max(0.0)
}

/// Intensity-optimized active baseline (golden-section search on (0, 1.5]).
pub fn active_baseline_best(
    channel: &ChannelParams,
    det: &DetectorParams,
    f_e: f64,
    sift_q: f64,
) -> (f64, f64) {
    let rate = |mu: f64| active_baseline_rate(channel, det, mu, f_e, sift_q);
    let (mut a, mut b) = (1e-4, 1.5);
    let inv_phi = 0.618_033_988_749_895;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (rate(c), rate(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rate(d);
        }
    }
    let mu = 0.5 * (a + b);
    (rate(mu), mu)
}

/// Everything the pipeline reports for one (candidate, distance) evaluation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    /// Key bits per pulse: the asymptotic R, or l/N in finite mode.
    pub r_per_pulse: f64,
    /// Finite key length (0 in asymptotic mode, where it has no meaning).
    pub key_length_l: u64,
    /// Secure key transmission rate n·⟨P⟩_{S_Z^s}·P_Z·R in bits per second.
    pub r_s: f64,
    pub security: SecurityParams,
    pub counts: CountEstimates,
    /// ⟨P⟩ of the Z signal region.
    pub p_z_signal: f64,
    /// ⟨Q_Z⟩ and ⟨E_Z⟩ of the signal bin.
    pub q_zz: f64,
    pub e_zz: f64,
    /// Per-pairing single-photon error intervals (ZZ, XX, XY, YX, YY).
    pub e1_intervals: Vec<(f64, f64)>,
    /// Set when any LP came back infeasible (result is then zero-rate).
    pub lp_infeasible: bool,
    /// Set when a Kato count transform hit its degenerate regime.
    pub kato_degenerate: bool,
}
