//! Three-intensity decoy-state linear programs bounding the single-photon
//! yield ⟨Y¹⟩ and error-yield ⟨e¹Y¹⟩ of the signal bin, with trace-distance
//! constraints coupling the photon-number yields of different intensity
//! bins.

use crate::hermitian::hermitian_eigenvalues;
use crate::simplex::{LinearProgram, LpOutcome};
use crate::source::{Basis, FockDensityMatrix};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Convention for the trace-distance bound D(ρ, σ).
///
/// `SumAbs` is Σ|λ_i| of the difference (twice the textbook trace distance);
/// `HalfSumAbs` is the textbook ½Σ|λ_i| for sensitivity studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceDistanceConvention {
    SumAbs,
    HalfSumAbs,
}

/// Distance of two equal-photon-number density matrices under `convention`.
pub fn trace_distance(
    rho: &FockDensityMatrix,
    sigma: &FockDensityMatrix,
    convention: TraceDistanceConvention,
) -> Result<f64> {
    if rho.n != sigma.n {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let dim = rho.dim();
    let diff: Vec<_> = rho
        .elems
        .iter()
        .zip(&sigma.elems)
        .map(|(a, b)| a - b)
        .collect();
    let sum: f64 = hermitian_eigenvalues(&diff, dim)
        .iter()
        .map(|l| l.abs())
        .sum();
    Ok(match convention {
        TraceDistanceConvention::SumAbs => sum,
        TraceDistanceConvention::HalfSumAbs => 0.5 * sum,
    })
}

/// The intensity-bin pairs (vac,d), (vac,s), (d,s) indexing the distance rows.
pub const BIN_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Inputs of one decoy LP family: everything is indexed by intensity bin
/// (0 = vac, 1 = decoy, 2 = signal).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecoyScenario {
    pub basis_alice: Basis,
    pub basis_bob: Basis,
    pub n_cut: usize,
    /// Conditional Poisson weights ⟨P(I,n)⟩_j / ⟨P⟩_j for n = 0..=n_cut.
    pub poisson: [Vec<f64>; 3],
    /// Kato-bracketed mean gain per bin.
    pub gain_lo: [f64; 3],
    pub gain_hi: [f64; 3],
    /// Kato-bracketed mean error-gain per bin.
    pub err_gain_lo: [f64; 3],
    pub err_gain_hi: [f64; 3],
    /// Trace distances of the per-basis n-photon states, indexed by
    /// [BIN_PAIRS index][n]; used by the yield LP for n ≥ 2.
    pub dist_yield: [Vec<f64>; 3],
    /// Trace distances of the per-state n-photon states; used by the error
    /// LP for n ≥ 1.
    pub dist_error: [Vec<f64>; 3],
}

impl DecoyScenario {
    pub fn validate(&self) -> Result<()> {
        for j in 0..3 {
            if self.poisson[j].len() != self.n_cut + 1 {
                return Err(Error::InvalidParameter(format!(
                    "poisson[{j}] must have n_cut+1 entries"
                )));
            }
            let total: f64 = self.poisson[j].iter().sum();
            if !(0.0..=1.0 + 1e-9).contains(&total) {
                return Err(Error::InvalidParameter(format!(
                    "poisson weights of bin {j} sum to {total}"
                )));
            }
        }
        Ok(())
    }

    /// Serialize for regression fixtures.
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let s: DecoyScenario = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("scenario parse: {e}")))?;
        s.validate()?;
        Ok(s)
    }
}

/// Result of one LP family solved in both directions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpBounds {
    pub lower: f64,
    pub upper: f64,
    pub status: LpStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

impl LpBounds {
    fn infeasible() -> Self {
        LpBounds {
            lower: 0.0,
            upper: 1.0,
            status: LpStatus::Infeasible,
        }
    }
}

/// Variable layout shared by both LPs: a prefix of bin-shared photon numbers
/// (n < split), then one variable per (n, bin) for n ≥ split.
struct Layout {
    split: usize,
    n_cut: usize,
}

impl Layout {
    fn n_vars(&self) -> usize {
        self.split + 3 * (self.n_cut + 1 - self.split)
    }

    fn idx(&self, n: usize, bin: usize) -> usize {
        if n < self.split {
            n
        } else {
            self.split + (n - self.split) * 3 + bin
        }
    }
}

fn build_lp(
    scenario: &DecoyScenario,
    layout: &Layout,
    lo: &[f64; 3],
    hi: &[f64; 3],
    dist: &[Vec<f64>; 3],
) -> LinearProgram {
    let n_cut = scenario.n_cut;
    let mut lp = LinearProgram::new(layout.n_vars());
    for j in 0..3 {
        let mut row = vec![0.0; layout.n_vars()];
        let mut p_total = 0.0;
        for n in 0..=n_cut {
            // sub-roundoff Poisson weights contribute nothing but destabilize
            // the pivoting; their yield terms are bounded by the weight itself
            let w = scenario.poisson[j][n];
            let w = if w < 1e-13 { 0.0 } else { w };
            row[layout.idx(n, j)] += w;
            p_total += w;
        }
        // sum_n P_n Y_n <= gain_hi
        lp.add_row(row.clone(), hi[j]);
        // sum_n P_n Y_n >= gain_lo - (1 - sum_n P_n)
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        lp.add_row(neg, -(lo[j] - (1.0 - p_total)));
    }
    for (pair_idx, (bi, bj)) in BIN_PAIRS.iter().enumerate() {
        for n in layout.split..=n_cut {
            let d = dist[pair_idx][n];
            let mut row = vec![0.0; layout.n_vars()];
            row[layout.idx(n, *bi)] = 1.0;
            row[layout.idx(n, *bj)] = -1.0;
            lp.add_row(row.clone(), d);
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            lp.add_row(neg, d);
        }
    }
    lp.add_upper_bounds(1.0);
    lp
}

fn solve_both(lp: &mut LinearProgram, target: usize) -> LpBounds {
    lp.objective = vec![0.0; lp.n_vars];
    lp.objective[target] = 1.0;
    let lower = match lp.solve_min() {
        LpOutcome::Optimal { objective, .. } => objective,
        _ => return LpBounds::infeasible(),
    };
    let upper = match lp.solve_max() {
        LpOutcome::Optimal { objective, .. } => objective,
        _ => return LpBounds::infeasible(),
    };
    LpBounds {
        lower: lower.clamp(0.0, 1.0) + 0.0,
        upper: upper.clamp(0.0, 1.0) + 0.0,
        status: LpStatus::Optimal,
    }
}

/// Bounds on the signal-bin single-photon yield ⟨Y¹⟩.
///
/// Yields are shared across bins for n = 0, 1 and coupled by trace-distance
/// rows for n ≥ 2; the mean gain of each bin is sandwiched between its
/// truncated Poisson mixture and the mixture plus the truncation tail.
pub fn yield_lp(scenario: &DecoyScenario) -> Result<LpBounds> {
    scenario.validate()?;
    let layout = Layout {
        split: 2,
        n_cut: scenario.n_cut,
    };
    let mut lp = build_lp(
        scenario,
        &layout,
        &scenario.gain_lo,
        &scenario.gain_hi,
        &scenario.dist_yield,
    );
    Ok(solve_both(&mut lp, layout.idx(1, 0)))
}

/// Bounds on the signal-bin single-photon error-yield ⟨e¹Y¹⟩.
///
/// Only the vacuum term is shared across bins; n ≥ 1 terms are coupled by
/// the per-state trace distances.
pub fn error_yield_lp(scenario: &DecoyScenario) -> Result<LpBounds> {
    scenario.validate()?;
    let layout = Layout {
        split: 1,
        n_cut: scenario.n_cut,
    };
    let mut lp = build_lp(
        scenario,
        &layout,
        &scenario.err_gain_lo,
        &scenario.err_gain_hi,
        &scenario.dist_error,
    );
    Ok(solve_both(&mut lp, layout.idx(1, 2)))
}
