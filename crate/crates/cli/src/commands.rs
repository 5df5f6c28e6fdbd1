//! The three subcommands: `verify` (invariant suites + reports), `extend`
//! (compute and sample a truncated extension), and `norms` (norm reports
//! plus the extension norm-ratio table).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use mixext::analysis::{
    besov_norm_prime, nikolskii_norm_prime, Domain, LpGrid, NormGrid, SmoothnessParams,
};
use mixext::extension::extend;
use mixext::index::{MultiIndex, Rect};
use mixext::oracle::Oracle;

use crate::catalog;
use crate::config::ExperimentConfig;
use crate::report::VerifyReport;
use crate::suites;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Run every suite; returns the exit code (0 = all pass).
pub fn cmd_verify(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    fs::create_dir_all(out_dir)?;
    let (report, ratios) = suites::run_all(cfg);
    write_json(&out_dir.join("verify_report.json"), &report)?;
    write_json(&out_dir.join("ratio_report.json"), &ratios)?;
    print_verify_summary(&report);
    Ok(if report.pass { 0 } else { 1 })
}

fn print_verify_summary(report: &VerifyReport) {
    for suite in &report.suites {
        println!(
            "suite {:<12} {}",
            suite.name,
            if suite.pass { "pass" } else { "FAIL" }
        );
        for check in &suite.checks {
            if !check.pass {
                println!(
                    "  FAIL {} (observed {:?}, bound {:?}) {}",
                    check.name,
                    check.observed,
                    check.bound,
                    check.note.as_deref().unwrap_or("")
                );
            }
        }
    }
    println!("verify: {}", if report.pass { "pass" } else { "FAIL" });
}

/// Compute the truncated extension of a catalog function, sample it (and the
/// requested derivatives) on a uniform grid, and write CSV + JSON.
pub fn cmd_extend(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    fs::create_dir_all(out_dir)?;
    let d = cfg.d;
    let f = catalog::find(d, &cfg.catalog)
        .with_context(|| format!("catalog function `{}` for d = {d}", cfg.catalog))?;
    let m = cfg.spline_order()?;
    let ext = extend(
        f.oracle.clone(),
        &cfg.alpha,
        cfg.p,
        cfg.theta,
        &m,
        cfg.truncation,
    )?;

    // JSON serialization of the full result.
    write_json(&out_dir.join("extension.json"), &ext.schema())?;

    // Sampling box: configured or the compiled support, clipped to Q^{d,m}.
    let support = ext.support();
    let qbox = mixext::extension::support_box(&m);
    let sample_box = match &cfg.sample_box {
        None => support.clone(),
        Some((lo, hi)) => {
            if lo.len() != d || hi.len() != d {
                bail!("sample_box dimension mismatch");
            }
            let requested = Rect::new(
                lo.clone(),
                lo.iter().zip(hi).map(|(a, b)| b - a).collect(),
            )
            .map_err(|e| anyhow::anyhow!("bad sample box: {e}"))?;
            match requested.intersect(&qbox) {
                Some(clipped) => {
                    if clipped != requested {
                        eprintln!("warning: sample box clipped to the support box Q^(d,m)");
                    }
                    clipped
                }
                None => {
                    // No overlap with the support: the extension vanishes on
                    // the whole requested box, so sample it as-is.
                    eprintln!(
                        "warning: sample box lies outside the support box Q^(d,m);                          all sampled values are zero"
                    );
                    requested
                }
            }
        }
    };

    let lambdas: Vec<MultiIndex> = cfg.lambdas.iter().map(|l| MultiIndex::of(l)).collect();
    let deriv_grids = lambdas
        .iter()
        .map(|lam| ext.derivative(lam).map(|g| (lam.clone(), g)))
        .collect::<Result<Vec<_>, _>>()?;

    // CSV: x1..xd, value, level_0..level_K, d_lambda columns, restr_err.
    let mut csv = String::new();
    for j in 0..d {
        let _ = write!(csv, "x{},", j + 1);
    }
    let _ = write!(csv, "value");
    for k in 0..=ext.truncation {
        let _ = write!(csv, ",level_{k}");
    }
    for (lam, _) in &deriv_grids {
        let _ = write!(
            csv,
            ",d_{}",
            lam.entries()
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("_")
        );
    }
    let _ = writeln!(csv, ",restr_err");

    let n = cfg.sample_points.max(2);
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = (0..d)
            .map(|j| {
                sample_box.corner()[j]
                    + sample_box.edge()[j] * idx[j] as f64 / (n - 1) as f64
            })
            .collect();
        for v in &x {
            let _ = write!(csv, "{v},");
        }
        let value = ext.eval(&x);
        let _ = write!(csv, "{value}");
        for grid in &ext.by_max_level {
            let _ = write!(csv, ",{}", grid.eval(&x));
        }
        for (_, grid) in &deriv_grids {
            let _ = write!(csv, ",{}", grid.eval(&x));
        }
        if x.iter().all(|&v| (0.0..=1.0).contains(&v)) {
            let _ = writeln!(csv, ",{}", (f.oracle.eval(&x) - value).abs());
        } else {
            let _ = writeln!(csv, ",");
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                let path = out_dir.join("extension.csv");
                fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!(
                    "extend: wrote extension.json and extension.csv for `{}` (K = {})",
                    cfg.catalog, cfg.truncation
                );
                return Ok(0);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[derive(Serialize)]
struct DerivativeSeminormEntry {
    lambda: Vec<i64>,
    report: mixext::analysis::NormReport,
}

#[derive(Serialize)]
struct NormsOutput {
    schema: u32,
    kind: String,
    function: String,
    alpha: Vec<f64>,
    p: f64,
    theta: String,
    besov: mixext::analysis::NormReport,
    nikolskii: mixext::analysis::NormReport,
    /// Whole-space seminorm reports of 𝒟^λ(extension) per configured λ.
    extension_seminorms: Vec<DerivativeSeminormEntry>,
    ratio_table: crate::report::ExtensionRatioReport,
}

/// Norm reports for one catalog function plus the extension norm-ratio table.
pub fn cmd_norms(cfg: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    fs::create_dir_all(out_dir)?;
    let d = cfg.d;
    let f = catalog::find(d, &cfg.catalog)
        .with_context(|| format!("catalog function `{}` for d = {d}", cfg.catalog))?;
    let params = SmoothnessParams::new(cfg.alpha.clone(), cfg.p, cfg.theta)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let grid = NormGrid {
        k_max: cfg.k_max,
        xi_order: cfg.xi_order,
        lp: LpGrid::uniform(d, cfg.lp_panels, cfg.lp_order),
        shifts_per_axis: cfg.shift_grid,
    };
    let dom = Domain::cube(d);
    let besov = besov_norm_prime(f.oracle.as_ref(), &params, &dom, &grid)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let nikolskii = nikolskii_norm_prime(f.oracle.as_ref(), &params, &dom, &grid)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let (_, ratio_table) = suites::ratio_experiment(cfg);
    let mut extension_seminorms = Vec::new();
    if !cfg.lambdas.is_empty() {
        let m = cfg.spline_order()?;
        let ext = extend(
            f.oracle.clone(),
            &cfg.alpha,
            cfg.p,
            cfg.theta,
            &m,
            cfg.truncation,
        )?;
        for lam in &cfg.lambdas {
            let lambda = MultiIndex::of(lam);
            let deriv = ext.derivative(&lambda)?;
            let report = mixext::analysis::derivative_seminorm_report(
                &deriv,
                &deriv.domain(),
                &params,
                &lambda,
                &grid,
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            extension_seminorms.push(DerivativeSeminormEntry {
                lambda: lam.clone(),
                report,
            });
        }
    }
    let out = NormsOutput {
        schema: 1,
        kind: "norms".into(),
        function: f.name.clone(),
        alpha: cfg.alpha.clone(),
        p: cfg.p,
        theta: match cfg.theta {
            mixext::analysis::Theta::Finite(t) => format!("{t}"),
            mixext::analysis::Theta::Infinity => "inf".into(),
        },
        besov,
        nikolskii,
        extension_seminorms,
        ratio_table,
    };
    write_json(&out_dir.join("norms.json"), &out)?;
    println!("norms: wrote norms.json for `{}`", cfg.catalog);
    Ok(0)
}
