//! Run, sweep and plot working together on real simulations.

use std::path::Path;

use chemotaxis_core::Verdict;
use chemotaxis_harness::experiment::{self, SERIES_FILE};
use chemotaxis_harness::plot::{self, PlotKind};
use chemotaxis_harness::sweep::{self, SWEEP_FILE};
use chemotaxis_harness::{parse_config, parse_sweep};

const BUMP: &str = r#"
[grid]
cells = [24, 24]
lengths = [1.0, 1.0]

[params]
chi = 1.0
mu = 1.0
m = 1.5

[solver]
t_end = 30.0
dt_max = 0.1

[initial]
kind = "gaussian-bump"
amplitude = 10.0
width = 0.1
"#;

fn as_sweep(run: &str, out: &str, axes: &str) -> String {
    let base = run.replace("\n[", "\n[base.");
    format!("[base]\noutput_dir = \"{out}\"\n{base}\n[axes]\n{axes}\n")
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn aggregation_sweep_over_m_is_bounded_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_sweep(&as_sweep(BUMP, "agg", "m = [2.0, 1.2, 1.5]"), "s.toml").unwrap();
    let res = sweep::run_sweep(&spec, 2, dir.path()).unwrap();
    let ms: Vec<f64> = res.rows.iter().map(|r| r.m).collect();
    assert_eq!(ms, [1.2, 1.5, 2.0]);
    for r in &res.rows {
        assert_eq!(r.verdict, Verdict::Bounded.to_string(), "{r:?}");
        assert!(r.margin > 0.0);
        assert_eq!(r.status, "completed");
    }
    assert!(res.summary.monotonicity_findings.is_empty());

    let svg = plot::emit_plots(&res.output_dir.join(SWEEP_FILE), PlotKind::Sweep, None).unwrap();
    assert!(std::fs::read_to_string(svg).unwrap().contains("μ/χ"));
}

#[test]
fn single_point_sweep_matches_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let run_text = format!("output_dir = \"single\"\nseed = 9\n{}", BUMP.replace("t_end = 30.0", "t_end = 3.0"));
    let cfg = parse_config(&run_text, "r.toml").unwrap();
    let rep = experiment::run_experiment(&cfg, dir.path()).unwrap();

    let sweep_text = as_sweep(&BUMP.replace("t_end = 30.0", "t_end = 3.0"), "sw", "seeds = [9]");
    let res = sweep::run_sweep(&parse_sweep(&sweep_text, "s.toml").unwrap(), 1, dir.path()).unwrap();
    assert_eq!(res.rows.len(), 1);
    let row = &res.rows[0];
    let o = &rep.simulation.outcome;
    assert_eq!(row.verdict, o.verdict.to_string());
    assert_eq!(row.peak_sup_u.to_bits(), o.peak_sup_u.to_bits());
    assert_eq!(row.entropy_peak.to_bits(), o.entropy_peak.to_bits());
    assert_eq!(row.threshold_m, rep.manifest.threshold_m);
    assert_eq!(
        read(&rep.output_dir.join(SERIES_FILE)),
        read(&res.output_dir.join("points/p0000").join(SERIES_FILE))
    );
}

#[test]
fn rerun_with_the_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = BUMP
        .replace("kind = \"gaussian-bump\"\namplitude = 10.0\nwidth = 0.1", "kind = \"random-perturbation\"\namplitude = 0.8")
        .replace("t_end = 30.0", "t_end = 2.0");
    let first = parse_config(&format!("output_dir = \"a\"\nseed = 5\n{text}"), "a.toml").unwrap();
    let second = parse_config(&format!("output_dir = \"b\"\nseed = 5\n{text}"), "b.toml").unwrap();
    let other = parse_config(&format!("output_dir = \"c\"\nseed = 6\n{text}"), "c.toml").unwrap();
    let a = experiment::run_experiment(&first, dir.path()).unwrap();
    let b = experiment::run_experiment(&second, dir.path()).unwrap();
    let c = experiment::run_experiment(&other, dir.path()).unwrap();
    let series = |r: &experiment::ExperimentReport| read(&r.output_dir.join(SERIES_FILE));
    assert_eq!(series(&a), series(&b));
    assert_ne!(series(&a), series(&c));
}

#[test]
fn homogeneous_series_plots_with_nonincreasing_sup_v() {
    let dir = tempfile::tempdir().unwrap();
    let text = BUMP
        .replace("kind = \"gaussian-bump\"\namplitude = 10.0\nwidth = 0.1", "kind = \"uniform\"\nu = 0.5\nv = 2.0")
        .replace("t_end = 30.0", "t_end = 5.0");
    let cfg = parse_config(&format!("output_dir = \"h\"\n{text}"), "h.toml").unwrap();
    let rep = experiment::run_experiment(&cfg, dir.path()).unwrap();
    let csv = rep.output_dir.join(SERIES_FILE);
    let table = plot::read_series(&csv).unwrap();
    let sup_v = table.column("sup_v").unwrap();
    assert!(sup_v.windows(2).all(|w| w[1] <= w[0]));
    assert!(sup_v.last().unwrap() < &(0.5 * sup_v[0]));
    let svg = plot::emit_plots(&csv, PlotKind::Series, None).unwrap();
    assert!(svg.exists());
}

#[test]
fn shipped_configurations_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["bump_2d.toml", "random_1d.toml"] {
        chemotaxis_harness::load_config(&root.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let spec = chemotaxis_harness::load_sweep(&root.join("threshold_sweep.toml")).unwrap();
    assert_eq!(spec.size(), 8);
}
