//! Sweep, point, and oracle command implementations.

use crate::config::RunConfig;
use anyhow::Context;
use fprfi_core::keyrate::active_baseline_best;
use fprfi_core::optimize::{
    optimize_distance, Checkpoint, CheckpointEntry, GeometryCache, OptimizationProblem,
};
use fprfi_core::pipeline::{evaluate_candidate, Candidate};
use fprfi_core::quad::QuadOrders;
use fprfi_core::source::{
    interval_probability, region_probability_and_moments, sample_source, IntensityClass,
    IntervalFamily, Region, SourceParams, StateLabel,
};
use fprfi_core::KeyRateResult;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Distances are processed in fixed-size blocks so results do not depend on
/// the worker count: each block runs its own warm-start chain.
const SWEEP_BLOCK: usize = 8;

pub struct SweepRow {
    pub distance_km: f64,
    pub result: KeyRateResult,
    pub candidate: Candidate,
    pub r_active: f64,
}

pub fn config_hash(config: &RunConfig) -> String {
    let text = toml::to_string_pretty(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}

pub fn run_sweep(
    config: &RunConfig,
    out_path: &Path,
    checkpoint_path: Option<&PathBuf>,
) -> anyhow::Result<()> {
    let experiment = config.experiment()?;
    let mode = config.mode_enum();
    let mut problem = OptimizationProblem::new(experiment, mode);
    problem.seed = config.seed;
    problem.seed_evals = config.optimizer.seed_evals;
    problem.refine_evals = config.optimizer.refine_evals;
    problem.upper[3] = config.optimizer.sigma_max;

    let checkpoint = match checkpoint_path {
        Some(p) if p.exists() => {
            Checkpoint::from_text(&std::fs::read_to_string(p)?).unwrap_or_default()
        }
        _ => Checkpoint::default(),
    };

    let distances = config.distance.points();
    let blocks: Vec<&[f64]> = distances.chunks(SWEEP_BLOCK).collect();
    let workers = if config.workers == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        config.workers
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;

    let warm_start = config.optimizer.warm_start;
    let n_pulses = config.n_pulses;
    let beta = config.beta_misalign;
    let rows: Vec<Vec<SweepRow>> = pool.install(|| {
        use rayon::prelude::*;
        blocks
            .par_iter()
            .map(|block| {
                let mut cache = GeometryCache::default();
                let mut warm: Vec<Candidate> = Vec::new();
                let mut out = Vec::new();
                for &d in block.iter() {
                    let mut seeds = if warm_start {
                        checkpoint.warm_candidates(d, n_pulses, beta)
                    } else {
                        Vec::new()
                    };
                    seeds.extend(warm.iter().copied());
                    let (cand, result) = optimize_distance(&problem, &mut cache, d, &seeds);
                    if warm_start {
                        warm = vec![cand];
                    }
                    let (r_active, _) = active_baseline_best(
                        &problem.experiment.channel(d),
                        &problem.experiment.detector,
                        problem.experiment.protocol.f_e,
                        config.protocol.active_sift_q,
                    );
                    out.push(SweepRow {
                        distance_km: d,
                        result,
                        candidate: cand,
                        r_active,
                    });
                }
                out
            })
            .collect()
    });
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();

    // monotonicity post-check: optimizer noise shows up as rate increases
    for w in rows.windows(2) {
        if w[1].result.r_s > w[0].result.r_s * (1.0 + 1e-6) + 1e-12 {
            eprintln!(
                "warning: R_s not monotone at {} km -> {} km ({:.6e} -> {:.6e})",
                w[0].distance_km, w[1].distance_km, w[0].result.r_s, w[1].result.r_s
            );
        }
    }

    let table = render_table(config, &rows);
    std::fs::write(out_path, table).with_context(|| format!("writing {}", out_path.display()))?;
    write_manifest(config, out_path)?;

    if let Some(p) = checkpoint_path {
        let mut cp = checkpoint;
        for row in &rows {
            cp.entries.retain(|e| {
                !(e.distance_km == row.distance_km
                    && e.n_pulses == n_pulses
                    && e.beta_misalign == beta)
            });
            cp.entries.push(CheckpointEntry {
                distance_km: row.distance_km,
                n_pulses,
                beta_misalign: beta,
                candidate: row.candidate,
                r_s: row.result.r_s,
            });
        }
        std::fs::write(p, cp.to_text())?;
    }
    Ok(())
}

pub fn render_table(config: &RunConfig, rows: &[SweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# fully passive RFI QKD sweep");
    let _ = writeln!(
        s,
        "# mode: {}  beta_misalign[rad]: {}  n_pulses: {:e}  source_hz: {:e}  seed: {}",
        config.mode, config.beta_misalign, config.n_pulses, config.source_hz, config.seed
    );
    let _ = writeln!(s, "# config-sha256: {}", config_hash(config));
    let _ = writeln!(
        s,
        "# columns: distance_km\tr_per_pulse[bit/pulse]\tkey_length_l[bit]\tr_s[bit/s]\t\
         r_s_active[bit/s]\tdtheta_z[rad]\tdtheta_xy[rad]\tdphi_xy[rad]\tsigma\t\
         p_z_signal\tc_lower\tie1[bit]\te1_zz_upper\te_zz\tq_zz\tlambda_ec[bit]\tflags"
    );
    for row in rows {
        let r = &row.result;
        let flags = match (r.lp_infeasible, r.kato_degenerate) {
            (false, false) => "ok",
            (true, false) => "lp-infeasible",
            (false, true) => "kato-degenerate",
            (true, true) => "lp-infeasible,kato-degenerate",
        };
        let _ = writeln!(
            s,
            "{}\t{:.10e}\t{}\t{:.10e}\t{:.10e}\t{:.8}\t{:.8}\t{:.8}\t{:.8}\t{:.8e}\t{:.8}\t{:.8}\t{:.8}\t{:.8}\t{:.6e}\t{:.6e}\t{}",
            row.distance_km,
            r.r_per_pulse,
            r.key_length_l,
            r.r_s,
            config.source_hz * row.r_active,
            row.candidate.dtheta_z,
            row.candidate.dtheta_xy,
            row.candidate.dphi_xy,
            row.candidate.sigma,
            r.p_z_signal,
            r.security.c_lower,
            r.security.ie1,
            r.security.e_zz_1.1,
            r.e_zz,
            r.q_zz,
            r.counts.lambda_ec,
            flags
        );
    }
    s
}

fn write_manifest(config: &RunConfig, out_path: &Path) -> anyhow::Result<()> {
    let manifest = serde_json::json!({
        "tool": "fprfi",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_hash(config),
        "config": config,
        "output": out_path.file_name().and_then(|s| s.to_str()),
    });
    let path = out_path.with_extension("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn run_point(
    config: &RunConfig,
    distance_km: f64,
    candidate: Option<Candidate>,
) -> anyhow::Result<String> {
    let experiment = config.experiment()?;
    let mode = config.mode_enum();
    let (cand, details) = match candidate {
        Some(c) => {
            let d = evaluate_candidate(&c, &experiment, distance_km, mode)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            (c, d)
        }
        None => {
            let mut problem = OptimizationProblem::new(experiment, mode);
            problem.seed = config.seed;
            problem.seed_evals = config.optimizer.seed_evals;
            problem.refine_evals = config.optimizer.refine_evals;
            problem.upper[3] = config.optimizer.sigma_max;
            let mut cache = GeometryCache::default();
            let (c, _) = optimize_distance(&problem, &mut cache, distance_km, &[]);
            let d = evaluate_candidate(&c, &experiment, distance_km, mode)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            (c, d)
        }
    };
    let report = serde_json::json!({
        "distance_km": distance_km,
        "mode": config.mode,
        "candidate": cand,
        "result": details.result,
        "pairings": details.pairings,
        "scenarios": details.scenarios,
    });
    Ok(serde_json::to_string_pretty(&report)?)
}

/// Monte Carlo validation of the quadrature pipeline: region probabilities,
/// photon moments, and detection moments against the interference sampler.
pub fn run_oracle(config: &RunConfig, samples: usize) -> anyhow::Result<(String, bool)> {
    config.experiment()?; // validate the full configuration up front
    let cand = Candidate {
        dtheta_z: 0.3,
        dtheta_xy: 0.14,
        dphi_xy: 0.14,
        sigma: 0.5,
    };
    let params = SourceParams::full_support(cand.sigma).map_err(|e| anyhow::anyhow!("{e}"))?;
    let im = params.i_max;
    let family = IntervalFamily::new(
        cand.dtheta_z,
        cand.dtheta_xy,
        cand.dphi_xy,
        (0.05 * im, 0.1 * im, im),
        &params,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut report = String::new();
    let mut all_ok = true;

    let regions: Vec<Region> = StateLabel::ALL
        .iter()
        .flat_map(|&s| {
            IntensityClass::ALL
                .iter()
                .map(move |&c| Region { state: s, class: c })
        })
        .collect();
    let mut hits = vec![0u64; regions.len()];
    let mut p1_sums = vec![0.0f64; regions.len()];
    for _ in 0..samples {
        let pt = sample_source(&mut rng, &params);
        for (k, reg) in regions.iter().enumerate() {
            if family.contains(*reg, &pt) {
                hits[k] += 1;
                p1_sums[k] += pt.intensity * (-pt.intensity).exp();
            }
        }
    }
    let orders = QuadOrders::default();
    for (k, reg) in regions.iter().enumerate() {
        let p_quad = interval_probability(&family, *reg, &params, orders);
        let freq = hits[k] as f64 / samples as f64;
        let se = (p_quad * (1.0 - p_quad) / samples as f64).sqrt().max(1e-15);
        let z = (freq - p_quad) / se;
        let ok = z.abs() < 4.0;
        all_ok &= ok;
        let (_, moments) = region_probability_and_moments(&family, *reg, 1, &params, orders);
        let p1_quad = moments[1];
        let p1_mc = p1_sums[k] / samples as f64;
        let _ = writeln!(
            report,
            "{:?}/{:?}: P quad {:.6e} mc {:.6e} (z = {:+.2}) | P1 quad {:.6e} mc {:.6e} -> {}",
            reg.state,
            reg.class,
            p_quad,
            freq,
            z,
            p1_quad,
            p1_mc,
            if ok { "ok" } else { "MISMATCH" }
        );
    }
    let _ = writeln!(
        report,
        "sampler-vs-quadrature: {} over {} regions at {} samples",
        if all_ok { "PASS" } else { "FAIL" },
        regions.len(),
        samples
    );
    Ok((report, all_ok))
}
