//! TOML run configuration with a strict schema: unknown keys are rejected
//! and every default matches the simulation parameters of the study
//! (η_d = 0.65, α = 0.2 dB/km, Pd = 1e-6, e_d = 1.5%, P_Z = 1/2,
//! P_X = P_Y = 1/4, ε's = 1e-20, n_cut = 8, GHz source).

use anyhow::{bail, Context};
use fprfi_core::decoy::TraceDistanceConvention;
use fprfi_core::keyrate::{CLowerRule, ProtocolParams};
use fprfi_core::pipeline::{Conventions, DensityConvention, ErrorAverage, Experiment, Mode};
use fprfi_core::quad::QuadOrders;
use fprfi_core::source::SigmaWeighting;
use fprfi_core::DetectorParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// "asymptotic" or "finite".
    pub mode: String,
    /// Total pulses emitted by the source (finite mode).
    pub n_pulses: f64,
    /// Reference-frame misalignment of the X/Y bases, radians.
    pub beta_misalign: f64,
    /// Source pulse frequency, Hz.
    pub source_hz: f64,
    pub seed: u64,
    pub workers: usize,
    pub distance: DistanceGrid,
    pub detector: DetectorConfig,
    pub channel: ChannelConfig,
    pub protocol: ProtocolConfig,
    pub optimizer: OptimizerConfig,
    pub conventions: ConventionConfig,
    pub quadrature: QuadOrders,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: "asymptotic".into(),
            n_pulses: 1e12,
            beta_misalign: 0.0,
            source_hz: 1e9,
            seed: 1,
            workers: 0,
            distance: DistanceGrid::default(),
            detector: DetectorConfig::default(),
            channel: ChannelConfig::default(),
            protocol: ProtocolConfig::default(),
            optimizer: OptimizerConfig::default(),
            conventions: ConventionConfig::default(),
            quadrature: QuadOrders::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceGrid {
    pub start_km: f64,
    pub stop_km: f64,
    pub step_km: f64,
}

impl Default for DistanceGrid {
    fn default() -> Self {
        DistanceGrid {
            start_km: 0.0,
            stop_km: 230.0,
            step_km: 10.0,
        }
    }
}

impl DistanceGrid {
    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut d = self.start_km;
        let mut k = 0u64;
        while d <= self.stop_km + 1e-9 {
            out.push(d);
            k += 1;
            d = self.start_km + k as f64 * self.step_km;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub eta_d: f64,
    pub pd: f64,
    pub ed: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            eta_d: 0.65,
            pd: 1e-6,
            ed: 0.015,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub alpha_db_per_km: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            alpha_db_per_km: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub p_z: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub eps_kato: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub delta: f64,
    pub f_e: f64,
    pub n_cut: usize,
    /// (I_v, I_d, I_s) as fractions of i_max = 2Σ.
    pub edge_ratios: (f64, f64, f64),
    /// Sifting factor of the active baseline curve.
    pub active_sift_q: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            p_z: 0.5,
            p_x: 0.25,
            p_y: 0.25,
            eps_kato: 1e-20,
            eps_cor: 1e-20,
            eps_pa: 1e-20,
            delta: 1e-20,
            f_e: 1.16,
            n_cut: 8,
            edge_ratios: (0.05, 0.1, 1.0),
            active_sift_q: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub seed_evals: usize,
    pub refine_evals: usize,
    pub warm_start: bool,
    /// Box upper bound of Σ.
    pub sigma_max: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed_evals: 200,
            refine_evals: 300,
            warm_start: true,
            sigma_max: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConventionConfig {
    /// "normalized" | "literal"
    pub density: ConventionChoice,
    /// "poisson-weighted" | "unweighted"
    pub sigma_weighting: ConventionChoice,
    /// "sum-abs" | "half-sum-abs"
    pub trace_distance: ConventionChoice,
    /// "interval-min" | "printed-cases"
    pub c_lower_rule: ConventionChoice,
    /// "response-weighted" | "direct-average"
    pub error_average: ConventionChoice,
}

impl Default for ConventionConfig {
    fn default() -> Self {
        ConventionConfig {
            density: ConventionChoice::Default,
            sigma_weighting: ConventionChoice::Default,
            trace_distance: ConventionChoice::Default,
            c_lower_rule: ConventionChoice::Default,
            error_average: ConventionChoice::Default,
        }
    }
}

/// Every convention switch is either the artifact default or the literal
/// printed alternate; the TOML strings are explicit per switch.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionChoice {
    Default,
    Normalized,
    Literal,
    PoissonWeighted,
    Unweighted,
    SumAbs,
    HalfSumAbs,
    IntervalMin,
    PrintedCases,
    ResponseWeighted,
    DirectAverage,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).context("config schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.mode != "asymptotic" && self.mode != "finite" {
            bail!("mode must be 'asymptotic' or 'finite', got {:?}", self.mode);
        }
        if self.n_pulses.is_nan() || self.n_pulses < 1.0 {
            bail!("n_pulses must be >= 1");
        }
        if self.distance.step_km <= 0.0 || self.distance.stop_km < self.distance.start_km {
            bail!("distance grid must have positive step and stop >= start");
        }
        let d = DetectorParams {
            eta_d: self.detector.eta_d,
            pd: self.detector.pd,
            ed: self.detector.ed,
        };
        d.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        let p = &self.protocol;
        if (p.p_z + p.p_x + p.p_y - 1.0).abs() > 1e-9 {
            bail!("basis probabilities must sum to 1");
        }
        for (name, eps) in [
            ("eps_kato", p.eps_kato),
            ("eps_cor", p.eps_cor),
            ("eps_pa", p.eps_pa),
            ("delta", p.delta),
        ] {
            if !(eps > 0.0 && eps < 1.0) {
                bail!("{name} must lie in (0,1)");
            }
        }
        let (rv, rd, rs) = p.edge_ratios;
        if !(0.0 < rv && rv < rd && rd < rs && rs <= 1.0) {
            bail!("edge_ratios must satisfy 0 < r_v < r_d < r_s <= 1");
        }
        if p.n_cut < 2 || p.n_cut > 20 {
            bail!("n_cut must lie in [2, 20]");
        }
        self.conventions.resolve()?;
        Ok(())
    }

    pub fn mode_enum(&self) -> Mode {
        if self.mode == "finite" {
            Mode::Finite
        } else {
            Mode::Asymptotic
        }
    }

    pub fn experiment(&self) -> anyhow::Result<Experiment> {
        Ok(Experiment {
            protocol: ProtocolParams {
                n_pulses: self.n_pulses,
                p_z: self.protocol.p_z,
                p_x: self.protocol.p_x,
                p_y: self.protocol.p_y,
                eps_kato: self.protocol.eps_kato,
                eps_cor: self.protocol.eps_cor,
                eps_pa: self.protocol.eps_pa,
                delta: self.protocol.delta,
                f_e: self.protocol.f_e,
                n_cut: self.protocol.n_cut,
                source_hz: self.source_hz,
            },
            detector: DetectorParams {
                eta_d: self.detector.eta_d,
                pd: self.detector.pd,
                ed: self.detector.ed,
            },
            alpha_db_per_km: self.channel.alpha_db_per_km,
            beta_misalign: self.beta_misalign,
            edge_ratios: self.protocol.edge_ratios,
            conventions: self.conventions.resolve()?,
            orders: self.quadrature,
        })
    }
}

impl ConventionConfig {
    pub fn resolve(&self) -> anyhow::Result<Conventions> {
        use ConventionChoice as C;
        let density = match self.density {
            C::Default | C::Normalized => DensityConvention::Normalized,
            C::Literal => DensityConvention::Literal,
            other => bail!("conventions.density: unexpected value {other:?}"),
        };
        let sigma_weighting = match self.sigma_weighting {
            C::Default | C::PoissonWeighted => SigmaWeighting::PoissonWeighted,
            C::Literal | C::Unweighted => SigmaWeighting::Unweighted,
            other => bail!("conventions.sigma_weighting: unexpected value {other:?}"),
        };
        let trace_distance = match self.trace_distance {
            C::Default | C::SumAbs => TraceDistanceConvention::SumAbs,
            C::HalfSumAbs => TraceDistanceConvention::HalfSumAbs,
            other => bail!("conventions.trace_distance: unexpected value {other:?}"),
        };
        let c_lower_rule = match self.c_lower_rule {
            C::Default | C::IntervalMin => CLowerRule::IntervalMin,
            C::Literal | C::PrintedCases => CLowerRule::PrintedCases,
            other => bail!("conventions.c_lower_rule: unexpected value {other:?}"),
        };
        let error_average = match self.error_average {
            C::Default | C::ResponseWeighted => ErrorAverage::ResponseWeighted,
            C::Literal | C::DirectAverage => ErrorAverage::DirectAverage,
            other => bail!("conventions.error_average: unexpected value {other:?}"),
        };
        Ok(Conventions {
            density,
            sigma_weighting,
            trace_distance,
            c_lower_rule,
            error_average,
        })
    }
}
