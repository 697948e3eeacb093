//! CSV and JSON renderings of experiment results.

use serde_json::json;

use super::{DecoderKind, Estimate, ExperimentConfig, MetricsReport, ThresholdFit};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "distance",
    "rounds",
    "p_phys",
    "decoder",
    "m_iter",
    "t_bp",
    "shots",
    "seed",
    "metric",
    "value",
    "ci_low",
    "ci_high",
    "nondeterministic",
];

const UNDEFINED: &str = "undefined";

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Leading configuration columns of a row.
fn config_columns(c: &ExperimentConfig, shots: u64) -> Vec<String> {
    vec![
        c.distance.to_string(),
        c.rounds.to_string(),
        c.p_phys.to_string(),
        c.decoder.to_string(),
        if c.decoder.uses_bp() { c.m_iter.to_string() } else { String::new() },
        if c.decoder == DecoderKind::BpMwpm { c.t_bp.to_string() } else { String::new() },
        shots.to_string(),
        c.seed.to_string(),
    ]
}

/// `(metric, value, ci_low, ci_high, nondeterministic)` rows of a report.
pub(crate) fn metric_rows(r: &MetricsReport) -> Vec<(&'static str, String, String, String, bool)> {
    let plain = |name, v: String| (name, v, String::new(), String::new(), false);
    let est = |name, e: &Estimate| {
        (name, e.value.to_string(), e.ci_low.to_string(), e.ci_high.to_string(), false)
    };
    let mut rows = vec![
        est("logical_error_rate", &r.logical_error_rate),
        plain("logical_errors", r.logical_errors.to_string()),
        plain("decode_failures", r.decode_failures.to_string()),
        plain("nonzero_shots", r.nonzero_shots.to_string()),
        plain("second_stage_invocations", r.second_stage_invocations.to_string()),
    ];
    if r.config.decoder.uses_bp() {
        rows.push(match &r.convergence_probability {
            Some(e) => est("convergence_probability", e),
            None => plain("convergence_probability", UNDEFINED.into()),
        });
    }
    if r.config.decoder == DecoderKind::BpMwpm {
        rows.push(plain(
            "syndrome_reduction_ratio",
            r.syndrome_reduction_ratio.map_or(UNDEFINED.into(), |v| v.to_string()),
        ));
    }
    rows.push(plain("mean_original_weight", r.mean_original_weight.to_string()));
    rows.push(plain("mean_reduced_weight", r.mean_reduced_weight.to_string()));
    rows.push(plain("bandwidth_bits", r.bandwidth_bits.to_string()));
    rows.push(plain("outcome_digest", r.outcome_digest.clone()));
    if let Some(t) = &r.timing {
        rows.push((
            "second_stage_seconds_per_shot",
            t.second_stage_seconds_per_shot.to_string(),
            String::new(),
            String::new(),
            true,
        ));
        if let Some(bp) = t.bp_seconds_per_shot {
            rows.push(("bp_seconds_per_shot", bp.to_string(), String::new(), String::new(), true));
        }
    }
    rows
}

/// One row per (report, metric). With `include_header` false the rows can be
/// appended to an existing file.
pub fn reports_csv(reports: &[MetricsReport], include_header: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if include_header {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for r in reports {
        let cols = config_columns(&r.config, r.shots);
        for (metric, value, lo, hi, nondet) in metric_rows(r) {
            let mut rec = cols.clone();
            rec.extend([
                metric.to_string(),
                value,
                lo,
                hi,
                (nondet as u8).to_string(),
            ]);
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Rows marking configurations that produced no report. The message goes in
/// the value column under metric `error`.
pub fn errors_csv(errors: &[(ExperimentConfig, String)], include_header: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if include_header {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for (cfg, message) in errors {
        let mut rec = config_columns(cfg, cfg.shots);
        rec.extend(["error".into(), message.clone(), String::new(), String::new(), "0".into()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Threshold rows in the results schema: the distance, rounds, p, shots and
/// seed columns are blank, and a failed fit becomes an `error` row.
pub fn thresholds_csv(
    template: &ExperimentConfig,
    fits: &[(DecoderKind, Result<ThresholdFit>)],
    include_header: bool,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if include_header {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for (k, fit) in fits {
        let cfg = ExperimentConfig {
            decoder: *k,
            ..template.clone()
        };
        let mut cols = config_columns(&cfg, 0);
        for i in [0, 1, 2, 6, 7] {
            cols[i].clear();
        }
        let rows = match fit {
            Ok(f) => vec![
                ("threshold", f.p_th.to_string(), f.ci_low.to_string(), f.ci_high.to_string()),
                ("threshold_nu", f.nu.to_string(), String::new(), String::new()),
                ("threshold_crossing", f.crossing.to_string(), String::new(), String::new()),
                ("threshold_window", String::new(), f.window.0.to_string(), f.window.1.to_string()),
            ],
            Err(e) => vec![("error", e.to_string(), String::new(), String::new())],
        };
        for (metric, value, lo, hi) in rows {
            let mut rec = cols.clone();
            rec.extend([metric.to_string(), value, lo, hi, "0".into()]);
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// Syndrome weight histograms, one row per (report, stage, weight).
pub fn histograms_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CSV_HEADER[..8].to_vec();
    header.extend(["stage", "weight", "count"]);
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let cols = config_columns(&r.config, r.shots);
        for (stage, h) in [("before", &r.histogram_before), ("after", &r.histogram_after)] {
            for (weight, count) in h.iter().enumerate() {
                let mut rec = cols.clone();
                rec.extend([stage.to_string(), weight.to_string(), count.to_string()]);
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    finish_csv(w)
}

/// Reports, failed configurations and threshold fits as pretty-printed JSON.
pub fn reports_json(
    reports: &[MetricsReport],
    errors: &[(ExperimentConfig, String)],
    fits: &[(DecoderKind, Result<ThresholdFit>)],
) -> Result<String> {
    let fits: Vec<_> = fits
        .iter()
        .map(|(k, f)| match f {
            Ok(fit) => json!({ "decoder": k, "fit": fit }),
            Err(e) => json!({ "decoder": k, "error": e.to_string() }),
        })
        .collect();
    let errors: Vec<_> = errors
        .iter()
        .map(|(cfg, message)| json!({ "config": cfg, "error": message }))
        .collect();
    let doc = json!({ "reports": reports, "errors": errors, "thresholds": fits });
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::super::{run_experiment, ExperimentConfig};
    use super::*;

    #[test]
    fn csv_schema_and_determinism() {
        let cfg = ExperimentConfig {
            shots: 300,
            timing_batch: 100,
            ..ExperimentConfig::new(3, 0.01, DecoderKind::BpMwpm)
        };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let text = reports_csv(std::slice::from_ref(&a), true).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        for line in lines {
            assert_eq!(line.split(',').count(), 13, "{line}");
        }
        assert!(text.contains(",second_stage_seconds_per_shot,"));
        let strip = |r: &MetricsReport| reports_csv(&[r.without_timing()], true).unwrap();
        assert_eq!(strip(&a), strip(&b));
        let hist = histograms_csv(std::slice::from_ref(&a)).unwrap();
        let total: u64 = hist
            .lines()
            .skip(1)
            .filter(|l| l.contains(",before,"))
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 300);
        let json = reports_json(&[a], &[], &[]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["reports"][0]["config"]["decoder"], "bp+mwpm");
    }
}
