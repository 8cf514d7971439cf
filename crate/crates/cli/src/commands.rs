//! `index` and `campaign` commands, independent of argument parsing.

use std::path::Path;
use std::time::Instant;

use fredholm_core::fredholm::{index, EngineOptions, FredholmError, IndexResult, Strategy};
use serde_json::json;

use crate::campaign::{run_campaign, CampaignKind};
use crate::description::OperatorDescription;
use crate::report::{CampaignSummary, DiagnosticsReport, Report, Residuals};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_NOT_FREDHOLM: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Auto,
    Atkinson,
    Direct,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::Auto => "auto",
            StrategyName::Atkinson => "atkinson",
            StrategyName::Direct => "direct",
        }
    }
}

impl std::str::FromStr for StrategyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(StrategyName::Auto),
            "atkinson" => Ok(StrategyName::Atkinson),
            "direct" => Ok(StrategyName::Direct),
            _ => Err(format!("unknown strategy `{s}`")),
        }
    }
}

fn base_report(kind: &str, inputs: serde_json::Value, seed: Option<u64>) -> Report {
    Report {
        kind: kind.to_string(),
        inputs,
        seed,
        status: String::new(),
        error: None,
        k_class: None,
        oracle_class: None,
        oracle_agrees: None,
        residuals: None,
        diagnostics: None,
        summary: None,
        records: Vec::new(),
        wall_time_s: 0.0,
    }
}

fn fill_result(report: &mut Report, res: &IndexResult) {
    let cert = &res.certificate;
    report.k_class = Some(res.k_class.0.clone());
    report.oracle_class = res.oracle_class.as_ref().map(|k| k.0.clone());
    report.oracle_agrees = res.oracle_class.as_ref().map(|k| *k == res.k_class);
    report.residuals = Some(Residuals {
        left: cert.res_left,
        right: cert.res_right,
        b_norm_upper: cert.b_norm_upper,
    });
    let d = &res.diagnostics;
    report.diagnostics = Some(DiagnosticsReport {
        strategy: d.strategy.clone(),
        a_norm_upper: d.a_norm_upper,
        a_norm_lower: d.a_norm_lower,
        trunc: d.trunc,
        seed_residual: d.seed_residual,
        seed_span: d.seed_span,
        p_support: d.p_support,
        q_support: d.q_support,
    });
}

/// Runs the index engine on a description file.
pub fn cmd_index(path: &Path, strategy: StrategyName, opts: &EngineOptions) -> (i32, Report) {
    let start = Instant::now();
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let kind = if strategy == StrategyName::Direct {
        "verify"
    } else {
        "index"
    };
    let mut inputs = json!({
        "file": file,
        "strategy": strategy.as_str(),
        "tol": opts.tol,
        "trunc": opts.trunc,
    });
    let mut report = base_report(kind, inputs.clone(), None);
    let finish = |mut report: Report, code: i32, status: &str| {
        report.status = status.to_string();
        report.wall_time_s = start.elapsed().as_secs_f64();
        (code, report)
    };

    let parsed = OperatorDescription::read(path).and_then(|desc| {
        let a = desc.element()?;
        let direct = desc.direct_candidate()?;
        Ok((desc, a, direct))
    });
    let (desc, a, direct) = match parsed {
        Ok(x) => x,
        Err(e) => {
            report.error = Some(e.to_string());
            return finish(report, EXIT_USAGE, "parse_error");
        }
    };
    inputs["description"] = serde_json::to_value(&desc).expect("descriptions serialize");
    report.inputs = inputs;
    let strat = match strategy {
        StrategyName::Auto => Strategy::Auto { modular_inverse: None },
        StrategyName::Atkinson => Strategy::Atkinson { modular_inverse: None },
        StrategyName::Direct => match direct {
            Some(c) => Strategy::Direct { p: c.p, q: c.q, b: c.b },
            None => {
                report.error = Some("direct strategy needs a `direct` candidate in the description".into());
                return finish(report, EXIT_USAGE, "parse_error");
            }
        },
    };
    match index(&a, &strat, opts) {
        Ok(res) => {
            fill_result(&mut report, &res);
            finish(report, EXIT_OK, "ok")
        }
        Err(e @ FredholmError::NotFredholm(_)) => {
            report.error = Some(e.to_string());
            finish(report, EXIT_NOT_FREDHOLM, "not_fredholm")
        }
        Err(e) => {
            report.error = Some(e.to_string());
            finish(report, EXIT_FAILED, "failed")
        }
    }
}

/// Runs a property campaign; `trials == 0` is a usage error.
pub fn cmd_campaign(kind: CampaignKind, trials: usize, seed: u64, opts: &EngineOptions) -> (i32, Report) {
    let start = Instant::now();
    let inputs = json!({
        "campaign": kind.name(),
        "trials": trials,
        "tol": opts.tol,
        "trunc": opts.trunc,
    });
    let mut report = base_report("campaign", inputs, Some(seed));
    if trials == 0 {
        report.status = "usage_error".into();
        report.error = Some("trials must be at least 1".into());
        report.wall_time_s = start.elapsed().as_secs_f64();
        return (EXIT_USAGE, report);
    }
    let outcome = run_campaign(kind, trials, seed, opts);
    report.summary = Some(CampaignSummary {
        campaign: kind.name().to_string(),
        trials,
        passed: outcome.passed,
        failed: outcome.failed,
    });
    report.records = outcome.records;
    let code = if outcome.failed == 0 { EXIT_OK } else { EXIT_FAILED };
    report.status = if code == EXIT_OK { "pass" } else { "fail" }.into();
    report.wall_time_s = start.elapsed().as_secs_f64();
    (code, report)
}

fn format_class(k: &[i64]) -> String {
    let parts: Vec<String> = k.iter().map(i64::to_string).collect();
    format!("[{}]", parts.join(", "))
}

/// One-line human summary printed by the binary.
pub fn summary_line(report: &Report) -> String {
    if let Some(s) = &report.summary {
        return format!("{}: {}/{} passed", s.campaign, s.passed, s.trials);
    }
    match (&report.k_class, &report.error) {
        (Some(k), _) => {
            let oracle = report
                .oracle_class
                .as_ref()
                .map_or("n/a".to_string(), |o| format_class(o));
            let agree = match report.oracle_agrees {
                Some(true) => "agrees",
                Some(false) => "DISAGREES",
                None => "unavailable",
            };
            format!("k_class {} oracle {} ({agree})", format_class(k), oracle)
        }
        (None, Some(e)) => format!("{}: {e}", report.status),
        (None, None) => report.status.clone(),
    }
}
