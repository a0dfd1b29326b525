//! Directory layouts for trained models and planted instances.

use std::path::Path;

use ssnmf_core::synth::{Noise, PlantedInstance};
use ssnmf_core::{frob_sq, FitReport, Loss, LossPair, Mask, NonnegMatrix, SsnmfConfig, SsnmfModel};

use crate::format::{create_dir, read_nonneg, write_matrix, write_text, FormatError, Meta};

pub const META_FILE: &str = "meta";
pub const REPORT_FILE: &str = "report.txt";
pub const TRACE_FILE: &str = "trace.csv";

/// Writes `A.csv`, `B.csv`, `S.csv` and `meta` into `dir`, creating it.
pub fn save_model(dir: &Path, model: &SsnmfModel, report: &FitReport) -> Result<(), FormatError> {
    create_dir(dir)?;
    write_matrix(&dir.join("A.csv"), &model.a)?;
    write_matrix(&dir.join("B.csv"), &model.b)?;
    write_matrix(&dir.join("S.csv"), &model.s)?;
    let c = &model.config;
    let mut meta = Meta::new();
    meta.push("loss", model.loss)
        .push("rank", c.rank)
        .push("lam", c.lambda)
        .push("iters_run", report.iters_run)
        .push("stop_reason", report.stop_reason)
        .push("seed", c.seed)
        .push("tol", c.tol)
        .push("eps", c.eps)
        .push("max_iters", c.max_iters);
    meta.write(&dir.join(META_FILE))
}

pub fn load_model(dir: &Path) -> Result<SsnmfModel, FormatError> {
    let path = dir.join(META_FILE);
    let meta = Meta::read(&path)?;
    let config = SsnmfConfig {
        rank: meta.value("rank", &path)?,
        lambda: meta.value("lam", &path)?,
        max_iters: meta.value("max_iters", &path)?,
        tol: meta.value("tol", &path)?,
        eps: meta.value("eps", &path)?,
        seed: meta.value("seed", &path)?,
    };
    let loss: LossPair = meta.value("loss", &path)?;
    config.validate().map_err(|source| FormatError::Invalid { path: path.clone(), source })?;
    let model = SsnmfModel {
        a: read_nonneg(&dir.join("A.csv"))?,
        b: read_nonneg(&dir.join("B.csv"))?,
        s: read_nonneg(&dir.join("S.csv"))?,
        config,
        loss,
    };
    let r = config.rank;
    for (name, shape_ok) in [
        ("A.csv", model.a.cols() == r),
        ("B.csv", model.b.cols() == r),
        ("S.csv", model.s.rows() == r && model.s.cols() >= 1),
    ] {
        if !shape_ok {
            return Err(FormatError::Invalid {
                path: dir.join(name),
                source: ssnmf_core::Error::InvalidParameter {
                    name: "rank",
                    reason: "factor shape disagrees with meta",
                },
            });
        }
    }
    Ok(model)
}

fn term(loss: Loss, target: &NonnegMatrix, model: &NonnegMatrix, mask: &Mask) -> ssnmf_core::Result<f64> {
    match loss {
        Loss::Frobenius => frob_sq(target, model, mask),
        Loss::Divergence => ssnmf_core::loss::i_div(target, model, mask),
    }
}

/// Reconstruction and (unweighted) supervision errors of a trained model;
/// the latter is `None` when `λ = 0`.
pub fn error_terms(
    model: &SsnmfModel,
    x: &NonnegMatrix,
    w: &Mask,
    y: &NonnegMatrix,
    l: &Mask,
) -> ssnmf_core::Result<(f64, Option<f64>)> {
    let recon = term(model.loss.recon(), x, &model.reconstruction(), w)?;
    let sup = if model.config.lambda > 0.0 { Some(term(model.loss.sup(), y, &model.label_scores(), l)?) } else { None };
    Ok((recon, sup))
}

/// Summary lines followed by the objective trace, one `iter,objective` pair
/// per line.
pub fn format_report(report: &FitReport, recon: f64, sup: Option<f64>) -> (String, String) {
    let mut meta = Meta::new();
    meta.push("iters_run", report.iters_run)
        .push("stop_reason", report.stop_reason)
        .push("final_objective", report.final_objective())
        .push("reconstruction_error", recon)
        .push("supervision_error", sup.map_or_else(|| "disabled".to_string(), |v| v.to_string()));
    let trace = report.objective_trace.iter().enumerate().map(|(i, v)| format!("{},{v}\n", i + 1)).collect();
    (meta.to_string(), trace)
}

pub fn write_report(dir: &Path, report: &FitReport, recon: f64, sup: Option<f64>) -> Result<(), FormatError> {
    let (summary, trace) = format_report(report, recon, sup);
    write_text(&dir.join(REPORT_FILE), &summary)?;
    write_text(&dir.join(TRACE_FILE), &trace)
}

fn noise_meta(meta: &mut Meta, key: &str, noise: Noise) {
    match noise {
        Noise::Gaussian { sigma } => meta.push(key, "gaussian").push(&format!("{key}_sigma"), sigma),
        Noise::Poisson => meta.push(key, "poisson"),
    };
}

/// Writes `Astar.csv`, `Bstar.csv`, `Sstar.csv`, `X.csv`, `Y.csv` and `meta`.
pub fn save_planted(dir: &Path, inst: &PlantedInstance) -> Result<(), FormatError> {
    create_dir(dir)?;
    write_matrix(&dir.join("Astar.csv"), &inst.a)?;
    write_matrix(&dir.join("Bstar.csv"), &inst.b)?;
    write_matrix(&dir.join("Sstar.csv"), &inst.s)?;
    write_matrix(&dir.join("X.csv"), &inst.x)?;
    write_matrix(&dir.join("Y.csv"), &inst.y)?;
    let mut meta = Meta::new();
    meta.push("noise", inst.noise);
    noise_meta(&mut meta, "data_noise", inst.noise.data);
    noise_meta(&mut meta, "label_noise", inst.noise.labels);
    meta.push("rank", inst.noise.rank).push("seed", inst.seed);
    meta.write(&dir.join(META_FILE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ssnmf_core::synth::{generate, NoiseModel};
    use ssnmf_core::{fit, Observations};

    #[test]
    fn model_round_trip() {
        let inst = generate(&NoiseModel::from_code("pp", 0.1, 0.1, 2).unwrap(), 6, 3, 5, 1).unwrap();
        let (w, l) = (Mask::ones(6, 5), Mask::ones(3, 5));
        let obs = Observations::new(&inst.x, &w, &inst.y, &l).unwrap();
        let cfg = SsnmfConfig { rank: 2, max_iters: 7, tol: 1e-9, ..SsnmfConfig::default() };
        let (model, report) = fit(&obs, LossPair::DF, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &model, &report).unwrap();
        assert_eq!(load_model(dir.path()).unwrap(), model);
        let meta = Meta::read(&dir.path().join(META_FILE)).unwrap();
        assert_eq!(meta.get("stop_reason"), Some("max_iters"));
        assert_eq!(meta.get("iters_run"), Some("7"));
    }

    #[test]
    fn report_marks_disabled_supervision() {
        let report =
            FitReport { objective_trace: vec![3.0, 2.5], stop_reason: ssnmf_core::StopReason::MaxIters, iters_run: 2 };
        let (summary, trace) = format_report(&report, 2.5, None);
        assert!(summary.contains("supervision_error=disabled\n"));
        assert!(summary.contains("final_objective=2.5\n"));
        assert_eq!(trace, "1,3\n2,2.5\n");
    }

    #[test]
    fn planted_export_layout() {
        let inst = generate(&NoiseModel::from_code("gp", 0.05, 0.1, 3).unwrap(), 4, 2, 5, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_planted(dir.path(), &inst).unwrap();
        for f in ["Astar.csv", "Bstar.csv", "Sstar.csv", "X.csv", "Y.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert_eq!(read_nonneg(&dir.path().join("X.csv")).unwrap(), inst.x);
        let meta = Meta::read(&dir.path().join(META_FILE)).unwrap();
        assert_eq!(meta.get("noise"), Some("gp"));
        assert_eq!(meta.get("data_noise_sigma"), Some("0.05"));
        assert_eq!(meta.get("rank"), Some("3"));
        assert_eq!(meta.get("seed"), Some("9"));
    }
}
