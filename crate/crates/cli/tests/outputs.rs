use eoslab::csv::{emit_csv, read_csv, render_csv, Cell, CsvRecord, SummaryRow};
use eoslab::{run_preset, CliError, ExperimentConfig, Preset};
use eoslab_core::landscape::{LandscapeSpec, MlpSpec};
use eoslab_core::probe::CouplingRecord;
use proptest::prelude::*;

#[test]
fn every_preset_config_round_trips_through_text() {
    for p in Preset::ALL {
        let cfg = p.default_config();
        let back = ExperimentConfig::from_text(&cfg.to_text(), None).unwrap();
        assert_eq!(back, cfg, "{}", p.name());
    }
}

#[test]
fn mlp_landscape_round_trips_through_text() {
    let mut cfg = Preset::GdBaseline.default_config();
    cfg.landscape = LandscapeSpec::Mlp(MlpSpec::default());
    cfg.eta = 0.125;
    let back = ExperimentConfig::from_text(&cfg.to_text(), None).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn config_errors_name_the_line() {
    let err = ExperimentConfig::from_text("preset = fig-sde\nsteps = many\n", None).unwrap_err();
    assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
    let err = ExperimentConfig::from_text("preset = fig-sde\nnot a pair\n", None).unwrap_err();
    assert!(matches!(err, CliError::Config { line: 2, .. }), "{err}");
    assert!(ExperimentConfig::from_text("steps = 10\n", None).is_err());
}

#[test]
fn partial_config_keeps_preset_defaults() {
    let cfg = ExperimentConfig::from_text("steps = 77\n", Some(Preset::FigSde)).unwrap();
    let mut expected = Preset::FigSde.default_config();
    expected.steps = 77;
    assert_eq!(cfg, expected);
}

#[test]
fn empty_record_list_writes_header_only() {
    let text = render_csv::<SummaryRow>(&[], "scan-summary").unwrap();
    assert_eq!(text, "key,value,stderr\n");
}

#[test]
fn single_coupling_record_gives_two_lines_of_six_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coupling.csv");
    let rec = CouplingRecord {
        t: 3,
        norm_v: 0.5,
        norm_vhat: 0.25,
        deviation: 1e-9,
        loss_residual: -2.0,
        sharp_residual: 0.125,
        x_hat: 0.1,
        y_hat: 0.2,
    };
    emit_csv(&[rec], "coupling", &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    let (header, rows) = read_csv(&path).unwrap();
    assert_eq!(header, ["t", "norm_v", "norm_vhat", "deviation", "loss_residual", "sharp_residual"]);
    assert_eq!(rows[0].len(), 6);
    assert_eq!(rows[0][0], "3");
}

struct Misnamed;

impl CsvRecord for Misnamed {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("key", Cell::Text("a".into())),
            ("valu", Cell::Float(1.0)),
            ("stderr", Cell::Float(0.0)),
        ]
    }
}

#[test]
fn schema_mismatch_names_the_column() {
    let err = render_csv(&[Misnamed], "scan-summary").unwrap_err().to_string();
    assert!(err.contains("valu"), "{err}");
    assert!(render_csv::<SummaryRow>(&[], "no-such-schema").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn floats_survive_csv_bit_exactly(value in any::<f64>().prop_filter("finite", |v| v.is_finite()), stderr in 0.0f64..1e300) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        emit_csv(&[SummaryRow::new("k", value, stderr)], "scan-summary", &path).unwrap();
        let (_, rows) = read_csv(&path).unwrap();
        prop_assert_eq!(rows[0][1].parse::<f64>().unwrap().to_bits(), value.to_bits());
        prop_assert_eq!(rows[0][2].parse::<f64>().unwrap().to_bits(), stderr.to_bits());
    }
}

fn small_fig_sde(out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = Preset::FigSde.default_config();
    cfg.runs = 20;
    cfg.steps = 400;
    cfg.sigma_list = vec![0.0, 10.0];
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = run_preset(&small_fig_sde(a.path())).unwrap();
    let (mb, _) = run_preset(&small_fig_sde(b.path())).unwrap();
    assert!(!ma.outputs.is_empty());
    assert_eq!(ma.outputs, mb.outputs);
    for (name, _) in &ma.outputs {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert!(a.path().join(eoslab::manifest::MANIFEST_FILE).exists());
}

#[test]
fn different_seeds_differ() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = run_preset(&small_fig_sde(a.path())).unwrap();
    let mut cfg = small_fig_sde(b.path());
    cfg.seed = 1;
    let (mb, _) = run_preset(&cfg).unwrap();
    assert_ne!(ma.checksum("summary.csv"), mb.checksum("summary.csv"));
}
