//! SVG plots of series and sweep CSV files.
//!
//! Both readers validate the header before drawing and report the offending column on a
//! mismatch. Series plots refuse data whose `sup_v` increases, since that can only come from a
//! broken run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chemotaxis_core::Verdict;
use plotters::coord::Shift;
use plotters::prelude::*;

use crate::error::{HarnessError, Result};
use crate::output::SERIES_FIXED_COLUMNS;
use crate::sweep::{SweepRow, SWEEP_COLUMNS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Series,
    Sweep,
}

impl PlotKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "series" => Ok(PlotKind::Series),
            "sweep" => Ok(PlotKind::Sweep),
            other => Err(HarnessError::Invalid(format!(
                "unknown plot kind `{other}` (expected series or sweep)"
            ))),
        }
    }
}

/// A validated series CSV: header plus numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

fn schema(path: &Path, column: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema {
        path: path.display().to_string(),
        column: column.into(),
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn headers(path: &Path, reader: &mut csv::Reader<std::fs::File>) -> Result<Vec<String>> {
    let h = reader.headers().map_err(|e| HarnessError::csv(path, e))?;
    if h.is_empty() {
        return Err(schema(path, "", "missing header"));
    }
    Ok(h.iter().map(str::to_string).collect())
}

fn is_suffix_column(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| rest.parse::<f64>().is_ok_and(f64::is_finite))
}

pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let mut reader = open(path)?;
    let columns = headers(path, &mut reader)?;
    for (k, expected) in SERIES_FIXED_COLUMNS.iter().enumerate() {
        match columns.get(k) {
            Some(c) if c == expected => {}
            Some(c) => {
                return Err(schema(path, c.as_str(), format!("expected `{expected}` at position {}", k + 1)))
            }
            None => return Err(schema(path, *expected, "column missing")),
        }
    }
    let mut seen_beta = false;
    for c in &columns[SERIES_FIXED_COLUMNS.len()..] {
        if is_suffix_column(c, "u_p") && !seen_beta {
            continue;
        }
        if is_suffix_column(c, "gradv_b") {
            seen_beta = true;
            continue;
        }
        return Err(schema(path, c.as_str(), "not a series column"));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let mut row = Vec::with_capacity(columns.len());
        for (name, field) in columns.iter().zip(rec.iter()) {
            let x: f64 = field.parse().map_err(|_| {
                schema(path, name.as_str(), format!("row {}: `{field}` is not a number", line + 1))
            })?;
            row.push(x);
        }
        rows.push(row);
    }
    Ok(SeriesTable { columns, rows })
}

/// Fails, naming the first offending time, if `sup_v` ever increases (up to rounding).
pub fn check_sup_v_nonincreasing(table: &SeriesTable) -> Result<()> {
    let t = table.column("t").unwrap_or_default();
    let s = table.column("sup_v").unwrap_or_default();
    for i in 1..s.len() {
        if s[i] > s[i - 1] * (1.0 + 1e-12) {
            return Err(HarnessError::Invalid(format!(
                "`sup_v` increases from {} to {} at t = {}",
                s[i - 1],
                s[i],
                t[i]
            )));
        }
    }
    Ok(())
}

fn draw_err<E: std::fmt::Debug>(out: &Path) -> impl Fn(E) -> HarnessError + '_ {
    move |e| HarnessError::io(out, std::io::Error::other(format!("{e:?}")))
}

fn range(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = values
        .iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    if lo > hi {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

const SERIES_PANELS: [&str; 6] = ["mass", "sup_u", "sup_v", "entropy", "dirichlet", "sup_grad_v"];

fn series_panel(
    area: &DrawingArea<SVGBackend<'_>, Shift>,
    t: &[f64],
    y: &[f64],
    name: &str,
    out: &Path,
) -> Result<()> {
    let (x0, x1) = range(t);
    let (y0, y1) = range(y);
    let mut chart = ChartBuilder::on(area)
        .caption(name, ("sans-serif", 16))
        .margin(8)
        .x_label_area_size(28)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(draw_err(out))?;
    chart
        .configure_mesh()
        .x_desc("t")
        .draw()
        .map_err(draw_err(out))?;
    if !t.is_empty() {
        chart
            .draw_series(LineSeries::new(t.iter().copied().zip(y.iter().copied()), &BLUE))
            .map_err(draw_err(out))?;
    }
    Ok(())
}

/// Six panels (mass, sup u, sup v, entropy, Dirichlet energy, sup |∇v|) against time.
pub fn plot_series(table: &SeriesTable, out: &Path) -> Result<()> {
    check_sup_v_nonincreasing(table)?;
    let root = SVGBackend::new(out, (1200, 720)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err(out))?;
    let t = table.column("t").unwrap_or_default();
    for (area, name) in root.split_evenly((2, 3)).iter().zip(SERIES_PANELS) {
        let y = table.column(name).unwrap_or_default();
        series_panel(area, &t, &y, name, out)?;
    }
    root.present().map_err(draw_err(out))
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = open(path)?;
    let columns = headers(path, &mut reader)?;
    for (k, expected) in SWEEP_COLUMNS.iter().enumerate() {
        match columns.get(k) {
            Some(c) if c == expected => {}
            Some(c) => {
                return Err(schema(path, c.as_str(), format!("expected `{expected}` at position {}", k + 1)))
            }
            None => return Err(schema(path, *expected, "column missing")),
        }
    }
    if let Some(extra) = columns.get(SWEEP_COLUMNS.len()) {
        return Err(schema(path, extra.as_str(), "not a sweep column"));
    }
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize| {
            schema(
                path,
                SWEEP_COLUMNS[k],
                format!("row {}: `{}` is not valid", line + 1, field(k)),
            )
        };
        let num = |k: usize| field(k).parse::<f64>().map_err(|_| bad(k));
        let int = |k: usize| field(k).parse::<u64>().map_err(|_| bad(k));
        let verdict = field(9).to_string();
        if ![Verdict::Bounded, Verdict::Growing, Verdict::Inconclusive]
            .iter()
            .any(|v| v.as_str() == verdict)
        {
            return Err(bad(9));
        }
        rows.push(SweepRow {
            m: num(0)?,
            mu: num(1)?,
            chi: num(2)?,
            sup_v0: num(3)?,
            lambda0: num(4)?,
            resolution: int(5)? as usize,
            seed: int(6)?,
            threshold_m: num(7)?,
            margin: num(8)?,
            verdict,
            peak_sup_u: num(10)?,
            entropy_peak: num(11)?,
            status: field(12).to_string(),
        });
    }
    Ok(rows)
}

/// Half the smallest gap between distinct sorted values (a tenth of the value for a single one).
fn half_width(values: &[f64]) -> f64 {
    let gap = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        0.5 * gap
    } else {
        0.1 * values.first().map_or(1.0, |v| v.abs().max(1e-3))
    }
}

fn distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

const MIXED: RGBColor = RGBColor(240, 160, 40);

fn verdict_colour(verdict: &str, status: &str) -> RGBColor {
    if status.starts_with("error") {
        return BLACK;
    }
    match verdict {
        "Bounded" => RGBColor(60, 160, 80),
        "Growing" => RGBColor(200, 50, 50),
        _ => RGBColor(170, 170, 170),
    }
}

/// One cell per `(μ/χ, m)` point coloured by verdict (orange where replicates disagree), with
/// the threshold curve of every `(sup v₀, λ₀)` combination overlaid. Points with `χ = 0` have
/// no finite ratio and are left out.
pub fn plot_sweep(rows: &[SweepRow], out: &Path) -> Result<()> {
    let plotted: Vec<&SweepRow> = rows.iter().filter(|r| (r.mu / r.chi).is_finite()).collect();
    let xs = distinct(plotted.iter().map(|r| r.mu / r.chi).collect());
    let ys = distinct(plotted.iter().map(|r| r.m).collect());
    let (hx, hy) = (half_width(&xs), half_width(&ys));
    let thresholds: Vec<f64> = plotted.iter().map(|r| r.threshold_m).collect();
    let x_range = if xs.is_empty() { (0.0, 1.0) } else { (xs[0] - hx, xs[xs.len() - 1] + hx) };
    let (mut y0, mut y1) = if ys.is_empty() { (0.0, 2.0) } else { (ys[0] - hy, ys[ys.len() - 1] + hy) };
    let (t0, t1) = range(&thresholds);
    if !thresholds.is_empty() {
        y0 = y0.min(t0);
        y1 = y1.max(t1);
    }

    let root = SVGBackend::new(out, (900, 700)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err(out))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("verdict over (μ/χ, m)", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x_range.0..x_range.1, y0..y1)
        .map_err(draw_err(out))?;
    chart
        .configure_mesh()
        .x_desc("μ/χ")
        .y_desc("m")
        .draw()
        .map_err(draw_err(out))?;

    let mut cells: BTreeMap<(u64, u64), Vec<&SweepRow>> = BTreeMap::new();
    for r in &plotted {
        cells
            .entry(((r.mu / r.chi).to_bits(), r.m.to_bits()))
            .or_default()
            .push(r);
    }
    let rects = cells.values().map(|group| {
        let r = group[0];
        let x = r.mu / r.chi;
        let c0 = verdict_colour(&r.verdict, &r.status);
        let colour = if group.iter().all(|g| verdict_colour(&g.verdict, &g.status) == c0) {
            c0
        } else {
            MIXED
        };
        Rectangle::new(
            [(x - 0.95 * hx, r.m - 0.95 * hy), (x + 0.95 * hx, r.m + 0.95 * hy)],
            colour.filled(),
        )
    });
    chart.draw_series(rects).map_err(draw_err(out))?;

    let mut curves: BTreeMap<(u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &plotted {
        curves
            .entry((r.sup_v0.to_bits(), r.lambda0.to_bits()))
            .or_default()
            .push((r.mu / r.chi, r.threshold_m));
    }
    for (key, mut pts) in curves {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        let (s, l) = (f64::from_bits(key.0), f64::from_bits(key.1));
        chart
            .draw_series(LineSeries::new(pts, BLACK.stroke_width(2)))
            .map_err(draw_err(out))?
            .label(format!("threshold m (sup v₀ = {s}, λ₀ = {l})"))
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK.stroke_width(2)));
    }
    if !plotted.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(draw_err(out))?;
    }
    root.present().map_err(draw_err(out))
}

/// Validates `csv` and renders it to `out` (default: the CSV path with an `.svg` extension).
pub fn emit_plots(csv: &Path, kind: PlotKind, out: Option<&Path>) -> Result<PathBuf> {
    let out = out.map_or_else(|| csv.with_extension("svg"), Path::to_path_buf);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    match kind {
        PlotKind::Series => plot_series(&read_series(csv)?, &out)?,
        PlotKind::Sweep => plot_sweep(&read_sweep(csv)?, &out)?,
    }
    Ok(out)
}
