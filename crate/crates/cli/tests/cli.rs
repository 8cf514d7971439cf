use std::path::{Path, PathBuf};
use std::process::Command;

use fredholm_cli::campaign::{run_campaign, CampaignKind};
use fredholm_cli::commands::{cmd_campaign, cmd_index, StrategyName, EXIT_NOT_FREDHOLM, EXIT_OK, EXIT_USAGE};
use fredholm_cli::description::{DirectInput, OperatorDescription};
use fredholm_cli::gen;
use fredholm_cli::report::{strip_wall_time, Report};
use fredholm_core::algebra::{Projection, ToeplitzElement};
use fredholm_core::fredholm::EngineOptions;
use fredholm_core::laurent::BaseRing;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fredholm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fredholm"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn run_with_report(args: &[&str], report: &Path) -> (i32, Value) {
    let mut full: Vec<&str> = args.to_vec();
    let path = report.to_str().unwrap();
    full.extend(["--report", path]);
    let (code, _) = run(&full);
    let text = std::fs::read_to_string(report).unwrap();
    (code, serde_json::from_str(&text).unwrap())
}

fn max_entry_gap(a: &ToeplitzElement, b: &ToeplitzElement) -> f64 {
    let m = 4 + a.support().max(b.support()) + a.symbol().span() + b.symbol().span();
    (&a.truncate(m) - &b.truncate(m)).max_abs()
}

#[test]
fn shift_has_index_minus_one() {
    let report = scratch("shift.json");
    let (code, json) = run_with_report(&["index", fixture("shift.json").to_str().unwrap()], &report);
    assert_eq!(code, 0);
    assert_eq!(json["k_class"], serde_json::json!([-1]));
    assert_eq!(json["oracle_class"], serde_json::json!([-1]));
    assert_eq!(json["oracle_agrees"], Value::Bool(true));
}

#[test]
fn exit_codes() {
    let (code, out) = run(&["index", fixture("on_circle.json").to_str().unwrap()]);
    assert_eq!(code, 2, "{out}");
    assert!(out.contains("not Fredholm"));
    assert_eq!(run(&["index", fixture("malformed.json").to_str().unwrap()]).0, 3);
    assert_eq!(run(&["index", fixture("missing.json").to_str().unwrap()]).0, 3);
    assert_eq!(run(&["campaign", "stability", "--trials", "0"]).0, 3);
    assert_eq!(run(&["campaign", "no-such-kind"]).0, 3);
    assert_eq!(
        run(&["index", fixture("shift.json").to_str().unwrap(), "--tol", "-1"]).0,
        3
    );
    // direct without a candidate is a usage problem
    assert_eq!(
        run(&["index", fixture("shift.json").to_str().unwrap(), "--strategy", "direct"]).0,
        3
    );
}

#[test]
fn command_layer_exit_codes() {
    let opts = EngineOptions::default();
    assert_eq!(cmd_index(&fixture("shift.json"), StrategyName::Auto, &opts).0, EXIT_OK);
    assert_eq!(
        cmd_index(&fixture("on_circle.json"), StrategyName::Auto, &opts).0,
        EXIT_NOT_FREDHOLM
    );
    assert_eq!(
        cmd_index(&fixture("malformed.json"), StrategyName::Atkinson, &opts).0,
        EXIT_USAGE
    );
    let (code, report) = cmd_campaign(CampaignKind::Transport, 0, 1, &opts);
    assert_eq!(code, EXIT_USAGE);
    assert_eq!(report.status, "usage_error");
}

#[test]
fn direct_strategy_verifies_candidate() {
    let ring = BaseRing::scalar();
    let a = ToeplitzElement::shift(ring.clone(), 1);
    let mut desc = OperatorDescription::from_element(&a, Some("shift with candidate".into()));
    desc.direct = Some(DirectInput::from_parts(
        &Projection::zero(ring.clone()),
        &Projection::unit(ring.clone(), 1),
        &ToeplitzElement::shift(ring, -1),
    ));
    let input = scratch("direct.json");
    std::fs::write(&input, desc.to_json()).unwrap();
    let report = scratch("direct.out.json");
    let (code, json) = run_with_report(&["index", input.to_str().unwrap(), "--strategy", "direct"], &report);
    assert_eq!(code, 0);
    assert_eq!(json["kind"], "verify");
    assert_eq!(json["k_class"], serde_json::json!([-1]));
    assert_eq!(json["diagnostics"]["strategy"], "direct");
}

#[test]
fn fixtures_round_trip() {
    for name in ["shift.json", "block_diag.json", "two_roots.json", "on_circle.json"] {
        let desc = OperatorDescription::read(&fixture(name)).unwrap();
        let again = OperatorDescription::parse(&desc.to_json()).unwrap();
        assert_eq!(
            max_entry_gap(&desc.element().unwrap(), &again.element().unwrap()),
            0.0,
            "{name}"
        );
    }
}

#[test]
fn random_elements_round_trip() {
    for trial in 0..200 {
        let mut rng = gen::trial_rng(11, trial);
        let a = if trial % 2 == 0 {
            gen::scalar_element(&mut rng)
        } else {
            let ring = gen::block_ring(&mut rng, 2 + trial % 2);
            gen::block_element(&mut rng, &ring, 4)
        };
        let text = OperatorDescription::from_element(&a, None).to_json();
        let back = OperatorDescription::parse(&text).unwrap().element().unwrap();
        assert!(max_entry_gap(&a, &back) <= 1e-15, "trial {trial}");
    }
}

#[test]
fn goldens_match() {
    let cases = [
        ("shift.json", "auto", "shift.expected.json"),
        ("block_diag.json", "auto", "block_diag.expected.json"),
        ("two_roots.json", "atkinson", "two_roots.expected.json"),
    ];
    for (input, strategy, expected) in cases {
        let out = scratch(expected);
        let (code, _) = run(&[
            "index",
            fixture(input).to_str().unwrap(),
            "--strategy",
            strategy,
            "--report",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let got = std::fs::read_to_string(&out).unwrap();
        let want = std::fs::read_to_string(fixture(expected)).unwrap();
        assert_eq!(strip_wall_time(&got), strip_wall_time(&want), "{input}");
    }
}

#[test]
fn campaign_reports_are_deterministic() {
    for kind in ["index-theorem", "unitary-bound", "transport"] {
        let first = scratch(&format!("{kind}-1.json"));
        let second = scratch(&format!("{kind}-2.json"));
        for path in [&first, &second] {
            let (code, _) = run(&[
                "campaign",
                kind,
                "--trials",
                "6",
                "--seed",
                "7",
                "--report",
                path.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "{kind}");
        }
        let a = std::fs::read_to_string(&first).unwrap();
        let b = std::fs::read_to_string(&second).unwrap();
        assert_eq!(strip_wall_time(&a), strip_wall_time(&b), "{kind}");
        let report: Report = serde_json::from_str(&a).unwrap();
        assert_eq!(report.summary.unwrap().passed, 6);
    }
}

#[test]
fn trials_do_not_depend_on_order() {
    let opts = EngineOptions::default();
    let all = run_campaign(CampaignKind::Stability, 5, 3, &opts);
    let single = fredholm_cli::campaign::run_trial(CampaignKind::Stability, 4, 3, &opts);
    assert_eq!(all.records[4], single);
}

#[test]
fn report_field_order_is_stable() {
    let (_, report) = cmd_index(&fixture("shift.json"), StrategyName::Auto, &EngineOptions::default());
    let text = report.to_json();
    let keys: Vec<usize> = [
        "\"kind\"",
        "\"inputs\"",
        "\"seed\"",
        "\"status\"",
        "\"k_class\"",
        "\"wall_time_s\"",
    ]
    .iter()
    .map(|k| text.find(k).unwrap())
    .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn schemas_cover_emitted_fields() {
    let desc = schema("operator_description.schema.json");
    let report = schema("report.schema.json");
    let ring = BaseRing::new(vec![2, 1]).unwrap();
    let a = gen::block_element(&mut gen::trial_rng(5, 0), &ring, 2);
    let mut d = OperatorDescription::from_element(&a, Some("x".into()));
    d.direct = Some(DirectInput::from_parts(
        &Projection::zero(ring.clone()),
        &Projection::unit(ring, 1),
        &a,
    ));
    let emitted: Value = serde_json::from_str(&d.to_json()).unwrap();
    for key in emitted.as_object().unwrap().keys() {
        assert!(desc["properties"].get(key).is_some(), "{key}");
    }
    let (_, r) = cmd_campaign(CampaignKind::Stability, 1, 0, &EngineOptions::default());
    let (_, i) = cmd_index(
        &fixture("two_roots.json"),
        StrategyName::Auto,
        &EngineOptions::default(),
    );
    for rep in [r, i] {
        let emitted: Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in emitted.as_object().unwrap().keys() {
            assert!(report["properties"].get(key).is_some(), "{key}");
        }
        for key in report["required"].as_array().unwrap() {
            assert!(emitted.get(key.as_str().unwrap()).is_some(), "{key}");
        }
    }
}
