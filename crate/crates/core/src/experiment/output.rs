//! Machine-readable experiment outputs: distances.csv, rates.csv and the
//! run manifest.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::runner::ExperimentReport;

/// Scientific notation with 12 significant digits; the fixed format behind
/// byte-identical reruns.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Render distances.csv.
pub fn distances_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("experiment,epsilon,h,wasserstein\n");
    for row in &report.distances {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            report.config.experiment,
            opt_float(row.epsilon),
            format_float(row.h),
            format_float(row.wasserstein),
        );
    }
    out
}

/// Render rates.csv.
pub fn rates_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("experiment,epsilon,slope,intercept,final_smoothed_lr\n");
    for rate in &report.rates {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            report.config.experiment,
            opt_float(rate.epsilon),
            format_float(rate.report.slope),
            format_float(rate.report.intercept),
            opt_float(rate.report.final_smoothed_lr()),
        );
    }
    out
}

/// Render the run manifest: enough to reproduce and audit a run.
pub fn manifest_text(report: &ExperimentReport) -> String {
    let canonical = report.config.canonical_string();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let hash = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in hash {
        let _ = write!(hex, "{byte:02x}");
    }
    format!(
        "experiment={}\nconfig_sha256={}\nrng=ChaCha8 (rand_chacha 0.3, per-trajectory streams)\n\
         library={} {}\nseed={}\n",
        report.config.experiment,
        hex,
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        report.config.seed,
    )
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write distances.csv, rates.csv and run_manifest.txt into `dir`.
pub fn emit_csv(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_file(dir, "distances.csv", &distances_csv(report))?;
    write_file(dir, "rates.csv", &rates_csv(report))?;
    write_file(dir, "run_manifest.txt", &manifest_text(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{DistanceRow, EpsilonReport, ExperimentConfig, ExperimentKind};
    use crate::rates::RateReport;

    fn empty_report() -> ExperimentReport {
        ExperimentReport {
            config: ExperimentConfig::default_for(ExperimentKind::Prior1d),
            distances: vec![],
            rates: vec![],
        }
    }

    #[test]
    fn float_format_has_12_significant_digits() {
        assert_eq!(format_float(0.25), "2.50000000000e-1");
        assert_eq!(format_float(1.0), "1.00000000000e0");
        assert_eq!(format_float(-3.5e-5), "-3.50000000000e-5");
    }

    #[test]
    fn empty_report_renders_header_only() {
        let r = empty_report();
        assert_eq!(distances_csv(&r), "experiment,epsilon,h,wasserstein\n");
        assert_eq!(
            rates_csv(&r),
            "experiment,epsilon,slope,intercept,final_smoothed_lr\n"
        );
    }

    #[test]
    fn rows_roundtrip_through_parsing() {
        let mut r = empty_report();
        r.distances.push(DistanceRow {
            epsilon: Some(1e-4),
            h: 0.125,
            wasserstein: 3.275886104e-5,
        });
        let text = distances_csv(&r);
        let line = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], "prior-1d");
        assert_eq!(fields[1].parse::<f64>().unwrap(), 1e-4);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.125);
        assert_eq!(fields[3].parse::<f64>().unwrap(), 3.275886104e-5);
    }

    #[test]
    fn empty_epsilon_column_for_prior_experiments() {
        let mut r = empty_report();
        r.rates.push(EpsilonReport {
            epsilon: None,
            report: RateReport {
                h_values: vec![0.25, 0.125],
                distances: vec![1.0, 0.25],
                slope: 2.0,
                intercept: 0.0,
                lr_sequence: None,
                smoothed_lr: None,
            },
        });
        let text = rates_csv(&r);
        let line = text.lines().nth(1).unwrap();
        assert!(line.starts_with("prior-1d,,"));
        assert!(line.ends_with(',')); // empty final_smoothed_lr
    }

    #[test]
    fn emitted_files_are_byte_identical_across_runs() {
        let mut r = empty_report();
        r.distances.push(DistanceRow {
            epsilon: None,
            h: 0.2,
            wasserstein: 0.5,
        });
        let dir1 = std::env::temp_dir().join("statfem-emit-test-1");
        let dir2 = std::env::temp_dir().join("statfem-emit-test-2");
        emit_csv(&r, &dir1).unwrap();
        emit_csv(&r, &dir2).unwrap();
        for name in ["distances.csv", "rates.csv", "run_manifest.txt"] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
    }
}
