//! Command implementations behind the `gpaco` binary. Every command is
//! deterministic: identical inputs produce byte-identical outputs, and each
//! file-producing command writes its manifest before anything else.
//!
//! Exit codes: 0 success, 1 usage/validation, 2 verification failure,
//! 3 numerical failure.

pub mod error;
pub mod manifest;

use std::path::{Path, PathBuf};

use gpaco_core::theory::{
    curve_argmin, eq8_curve, l_extra_argmin, l_extra_curve, optimal_paco_distribution,
    optimal_supcon_distribution,
};
use gpaco_core::loss::LossVariant;
use gpaco_trainer::{
    classifier_grad_norm_probe, linear_probe, make_longtailed_gaussians, run_train, EpochRecord,
    ProbeConfig, RunConfig, SavedState, SyntheticData, TrainerError,
};
use serde::Serialize;

pub use error::{CliError, Result};
use manifest::{content_hash, RunManifest};

/// Default output root: $GPACO_OUT_ROOT when set, else ./runs.
pub fn output_root() -> PathBuf {
    std::env::var_os("GPACO_OUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, body)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Closed-form vs oracle verification of both converged-optimum statements.
pub fn cmd_verify_theory(alpha: f64, k_list: &[usize], tol: f64) -> Result<()> {
    if k_list.is_empty() {
        return Err(CliError::Usage("at least one K value is required".into()));
    }
    if tol <= 0.0 || tol.is_nan() {
        return Err(CliError::Usage(format!("tol = {tol} must be positive")));
    }

    // The oracles converge well below the pass threshold so the comparison
    // measures the closed form, not the stopping rule. 1e-9 is the tightest
    // stationarity the solver's probability floor supports at these sizes.
    let solver_tol = (tol * 1e-3).max(1e-9);

    println!("theory verification: alpha = {alpha}, tol = {tol:e}");
    println!(
        "{:>4} {:>5} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>10}",
        "K", "M", "sc oracle", "sc closed", "ctr oracle", "ctr closed", "pair oracle", "pair closed", "max err"
    );

    let mut max_err: f64 = 0.0;
    for &k in k_list {
        let m = 4 * k;
        let sup = optimal_supcon_distribution(k, m, solver_tol)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if !sup.converged {
            return Err(CliError::Verification(format!(
                "supervised oracle did not converge for K = {k} within {} iterations (tol {solver_tol:e})",
                sup.iterations
            )));
        }
        let paco = optimal_paco_distribution(alpha, k, m, solver_tol)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if !paco.converged {
            return Err(CliError::Verification(format!(
                "parametric oracle did not converge for K = {k} within {} iterations (tol {solver_tol:e})",
                paco.iterations
            )));
        }

        let sc_closed = 1.0 / k as f64;
        let denom = 1.0 + alpha * k as f64;
        let (ctr_closed, pair_closed) = (1.0 / denom, alpha / denom);

        let mut err: f64 = 0.0;
        for (i, &p) in sup.probabilities.iter().enumerate() {
            let expect = if i < k { sc_closed } else { 0.0 };
            err = err.max((p - expect).abs());
        }
        for (i, &p) in paco.probabilities.iter().enumerate() {
            let expect = if i == 0 {
                ctr_closed
            } else if i <= k {
                pair_closed
            } else {
                0.0
            };
            err = err.max((p - expect).abs());
        }

        println!(
            "{:>4} {:>5} {:>13.6} {:>13.6} {:>13.6} {:>13.6} {:>13.6} {:>13.6} {:>10.2e}",
            k,
            m,
            sup.probabilities[0],
            sc_closed,
            paco.probabilities[0],
            ctr_closed,
            paco.probabilities[1],
            pair_closed,
            err
        );
        max_err = max_err.max(err);
    }

    println!("max abs error: {max_err:e}");
    if max_err < tol {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "max abs error {max_err:e} is not below tol {tol:e}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    LExtra,
    Eq8,
}

impl std::str::FromStr for CurveKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "l_extra" => Ok(CurveKind::LExtra),
            "eq8" => Ok(CurveKind::Eq8),
            other => Err(format!("unknown curve '{other}', expected l_extra or eq8")),
        }
    }
}

/// Sample one of the analysis curves to CSV, with the manifest written first.
pub fn cmd_curve(
    which: CurveKind,
    alpha: f64,
    k_star: f64,
    points: usize,
    out: &Path,
) -> Result<()> {
    let curve = match which {
        CurveKind::LExtra => l_extra_curve(alpha, k_star, points),
        CurveKind::Eq8 => eq8_curve(alpha, k_star, points),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let name = match which {
        CurveKind::LExtra => "l_extra",
        CurveKind::Eq8 => "eq8",
    };
    let config = serde_json::json!({
        "which": name,
        "alpha": alpha,
        "k_star": k_star,
        "points": points,
    });
    let manifest = RunManifest {
        command: "curve".into(),
        config: config.clone(),
        seed: None,
        input_hash: content_hash("curve", &config, &[])?,
        outputs: vec![out.to_path_buf()],
    };
    manifest.write(&manifest_path_for(out))?;

    let mut body = String::from("p,value\n");
    for (p, v) in &curve {
        body.push_str(&format!("{p},{v}\n"));
    }
    write_file(out, body.as_bytes())?;

    if which == CurveKind::LExtra {
        let (p_min, v_min) = curve_argmin(&curve).expect("nonempty curve");
        println!(
            "grid argmin p = {p_min} (value {v_min}); analytic minimizer 1/(1+alpha K*) = {}",
            l_extra_argmin(alpha, k_star)
        );
    }
    println!("wrote {} rows to {}", curve.len(), out.display());
    Ok(())
}

fn manifest_path_for(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

#[derive(Serialize)]
struct TrainSummary {
    variant: String,
    epochs: usize,
    final_loss: f64,
    acc_all: f64,
    acc_many: f64,
    acc_medium: f64,
    acc_few: f64,
    /// Metrics of the second-stage linear classifier, for the
    /// representation-only variants.
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<ProbeSummary>,
    /// The parametric loss divides by the total positive weight 1 + alpha|P|.
    scaled_by_weight_sum: bool,
}

#[derive(Serialize)]
struct ProbeSummary {
    acc_all: f64,
    acc_many: f64,
    acc_medium: f64,
    acc_few: f64,
}

fn metrics_csv(records: &[EpochRecord]) -> String {
    let mut body = String::from("epoch,loss,acc_all,acc_many,acc_medium,acc_few\n");
    for r in records {
        body.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.epoch,
            r.loss,
            r.metrics.acc_all,
            r.metrics.acc_many,
            r.metrics.acc_medium,
            r.metrics.acc_few
        ));
    }
    body
}

fn map_train_err(e: TrainerError) -> CliError {
    match e {
        TrainerError::NumericalFailure { step } => {
            CliError::Numerical(format!("non-finite loss at step {step}"))
        }
        other => CliError::Usage(other.to_string()),
    }
}

/// Train per the JSON config and emit metrics.csv, summary.json, state.json,
/// and data.json under the output directory.
pub fn cmd_train(config_path: &Path, out_dir: &Path) -> Result<()> {
    let raw = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", config_path.display())))?;
    let run: RunConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Usage(format!("config schema violation: {e}")))?;
    run.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out_dir.display())))?;

    let config_value =
        serde_json::to_value(&run).map_err(|e| CliError::Internal(e.to_string()))?;
    let outputs: Vec<PathBuf> = ["metrics.csv", "summary.json", "state.json", "data.json"]
        .iter()
        .map(|f| out_dir.join(f))
        .collect();
    let manifest = RunManifest {
        command: "train".into(),
        config: config_value.clone(),
        seed: Some(run.train.seed),
        input_hash: content_hash("train", &config_value, &[config_path])?,
        outputs: outputs.clone(),
    };
    manifest.write(&out_dir.join("manifest.json"))?;

    let data = make_longtailed_gaussians(&run.dataset).map_err(map_train_err)?;
    let (state, records) = run_train(&run, &data).map_err(map_train_err)?;
    let mut snapshot = state.snapshot();
    let last = records.last().expect("at least one epoch");

    // Representation-only variants get their second-stage classifier here, so
    // the stored state carries the classifier that evaluation actually uses.
    let two_stage = matches!(
        run.train.loss.variant,
        LossVariant::Supcon | LossVariant::InfoNce
    );
    let probe = if two_stage {
        let probe_cfg = ProbeConfig {
            seed: run.train.seed,
            ..ProbeConfig::default()
        };
        let (m, centers) =
            linear_probe(&snapshot, &data.train, &data.test, &probe_cfg).map_err(map_train_err)?;
        snapshot.centers = centers;
        Some(m)
    } else {
        None
    };

    let (final_metrics, probe_summary) = match &probe {
        Some(m) => (
            m.clone(),
            Some(ProbeSummary {
                acc_all: m.acc_all,
                acc_many: m.acc_many,
                acc_medium: m.acc_medium,
                acc_few: m.acc_few,
            }),
        ),
        None => (last.metrics.clone(), None),
    };

    let summary = TrainSummary {
        variant: run.train.loss.variant.name().into(),
        epochs: run.train.epochs,
        final_loss: last.loss,
        acc_all: final_metrics.acc_all,
        acc_many: final_metrics.acc_many,
        acc_medium: final_metrics.acc_medium,
        acc_few: final_metrics.acc_few,
        probe: probe_summary,
        scaled_by_weight_sum: true,
    };

    write_file(&outputs[0], metrics_csv(&records).as_bytes())?;
    write_file(
        &outputs[1],
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Internal(e.to_string()))?
            .as_bytes(),
    )?;
    write_file(
        &outputs[2],
        serde_json::to_string(&snapshot)
            .map_err(|e| CliError::Internal(e.to_string()))?
            .as_bytes(),
    )?;
    write_file(
        &outputs[3],
        serde_json::to_string(&data)
            .map_err(|e| CliError::Internal(e.to_string()))?
            .as_bytes(),
    )?;

    println!(
        "trained {} for {} epochs: acc_all {:.4} (many {:.4} / medium {:.4} / few {:.4})",
        summary.variant,
        summary.epochs,
        summary.acc_all,
        summary.acc_many,
        summary.acc_medium,
        summary.acc_few
    );
    println!("outputs in {}", out_dir.display());
    Ok(())
}

/// Per-class classifier gradient norms of a stored state over a stored
/// dataset's training split.
pub fn cmd_grad_norms(state_path: &Path, data_path: &Path, out: &Path) -> Result<()> {
    let state_raw = std::fs::read_to_string(state_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", state_path.display())))?;
    let state: SavedState = serde_json::from_str(&state_raw)
        .map_err(|e| CliError::Usage(format!("state schema violation: {e}")))?;
    let data_raw = std::fs::read_to_string(data_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", data_path.display())))?;
    let data: SyntheticData = serde_json::from_str(&data_raw)
        .map_err(|e| CliError::Usage(format!("data schema violation: {e}")))?;

    let config = serde_json::json!({
        "state": state_path.display().to_string(),
        "data": data_path.display().to_string(),
    });
    let manifest = RunManifest {
        command: "grad-norms".into(),
        config: config.clone(),
        seed: None,
        input_hash: content_hash("grad-norms", &config, &[state_path, data_path])?,
        outputs: vec![out.to_path_buf()],
    };
    manifest.write(&manifest_path_for(out))?;

    let rows = classifier_grad_norm_probe(&state, &data.train).map_err(map_train_err)?;
    let mut body = String::from("class_rank,count,grad_norm\n");
    for (rank, r) in rows.iter().enumerate() {
        body.push_str(&format!("{rank},{},{}\n", r.count, r.norm));
    }
    write_file(out, body.as_bytes())?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}
