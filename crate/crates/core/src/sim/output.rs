//! CSV and JSON result files.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::config::SimConfig;
use super::pipeline::EntityKind;
use super::stats::AggregateStats;
use super::{DropFailure, RunReport};
use crate::VERSION;

pub const CDF_HEADER: &str = "sinr_db,cdf";
pub const SCATTER_HEADER: &str = "scheme,omega,total_power_w,mean_throughput_mbps";

pub fn cdf_file_name(class: EntityKind) -> String {
    format!("sinr_cdf_{}.csv", class.as_str())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn cdf_csv(stats: &AggregateStats, class: EntityKind) -> String {
    let mut s = format!("{CDF_HEADER}\n");
    for (x, f) in stats.class(class).cdf() {
        writeln!(s, "{x:.6},{f:.6}").unwrap();
    }
    s
}

fn scatter_row(report: &RunReport) -> String {
    let c = &report.config;
    let omega = (c.power_control == crate::powerctl::PcScheme::Um).then_some(c.omega);
    format!(
        "{},{},{},{}\n",
        c.power_control.as_str(),
        opt(omega),
        opt(report.stats.mean_total_power_w),
        opt(report.stats.mean_throughput_mbps())
    )
}

pub fn scatter_csv(reports: &[RunReport]) -> String {
    let mut s = format!("{SCATTER_HEADER}\n");
    for r in reports {
        s.push_str(&scatter_row(r));
    }
    s
}

#[derive(Debug, Serialize)]
struct ClassSummary {
    samples: usize,
    median_sinr_db: Option<f64>,
    p10_sinr_db: Option<f64>,
    p_sinr_below_0db: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    scheme: &'static str,
    omega: f64,
    mode_selection: &'static str,
    drops_completed: usize,
    drops_failed: usize,
    failure_rate: f64,
    records: usize,
    /// Over D2D candidates.
    p_sinr_below_0db: Option<f64>,
    mean_throughput_mbps: Option<f64>,
    throughput_se_mbps: Option<f64>,
    mean_total_power_w: Option<f64>,
    total_power_se_w: Option<f64>,
    cellular_ue: ClassSummary,
    d2d: ClassSummary,
    failures: Vec<DropFailure>,
}

fn metrics(report: &RunReport) -> Metrics {
    let s = &report.stats;
    let class = |k| {
        let c = s.class(k);
        ClassSummary {
            samples: c.sinr_db.len(),
            median_sinr_db: c.median_db(),
            p10_sinr_db: c.p10_db(),
            p_sinr_below_0db: c.frac_below_0db(),
        }
    };
    Metrics {
        scheme: report.config.power_control.as_str(),
        omega: report.config.omega,
        mode_selection: report.config.mode_selection.as_str(),
        drops_completed: s.drops,
        drops_failed: s.failed_drops,
        failure_rate: s.failure_rate(),
        records: s.records,
        p_sinr_below_0db: s.p_sinr_below_0db(),
        mean_throughput_mbps: s.mean_throughput_mbps(),
        throughput_se_mbps: s.throughput_se_bps.map(|b| b / 1e6),
        mean_total_power_w: s.mean_total_power_w,
        total_power_se_w: s.total_power_se_w,
        cellular_ue: class(EntityKind::CellularUe),
        d2d: class(EntityKind::D2dCandidate),
        failures: report.failures.clone(),
    }
}

/// The config as JSON without the output directory, so that the same run
/// written to two places produces the same bytes.
fn config_echo(config: &SimConfig) -> Value {
    let mut v = serde_json::to_value(config).expect("config serializes");
    if let Value::Object(m) = &mut v {
        m.remove("output_dir");
    }
    v
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'a str,
    seed: u64,
    metrics: Metrics,
    config: Value,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    version: &'a str,
    seed: u64,
    points: Vec<Metrics>,
    config: Value,
}

fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    std::fs::write(dir.join(name), contents)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes the two SINR CDFs, a one-point scatter file and `summary.json`.
pub fn emit_outputs(report: &RunReport, out_dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for class in EntityKind::ALL {
        write(out_dir, &cdf_file_name(class), &cdf_csv(&report.stats, class))?;
    }
    write(out_dir, "scatter_power_rate.csv", &scatter_csv(std::slice::from_ref(report)))?;
    let summary = Summary {
        version: VERSION,
        seed: report.config.seed,
        metrics: metrics(report),
        config: config_echo(&report.config),
    };
    write(out_dir, "summary.json", &to_json(&summary))
}

/// Directory name of one sweep point, e.g. `um_omega_0.1` or `fix`.
pub fn point_dir_name(config: &SimConfig) -> String {
    match config.power_control {
        crate::powerctl::PcScheme::Um => format!("um_omega_{}", config.omega),
        other => other.as_str().to_string(),
    }
}

/// Writes every point into its own subdirectory, plus a combined scatter
/// file and summary at the top.
pub fn emit_sweep(base: &SimConfig, reports: &[RunReport], out_dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    for r in reports {
        emit_outputs(r, &out_dir.join(point_dir_name(&r.config)))?;
    }
    write(out_dir, "scatter_power_rate.csv", &scatter_csv(reports))?;
    let summary = SweepSummary {
        version: VERSION,
        seed: base.seed,
        points: reports.iter().map(metrics).collect(),
        config: config_echo(base),
    };
    write(out_dir, "summary.json", &to_json(&summary))
}
