//! Static SVG plots of sweep results: one file per (experiment, metric),
//! mean across repetitions per method with a ±1 standard-deviation band,
//! sample budget on a logarithmic x, metric on a logarithmic y.
//!
//! Nonpositive values cannot sit on a log axis; they are clamped to a
//! configurable floor and flagged with a dagger in a footnote rather
//! than silently dropped. Failed cells (NaN) are excluded from the
//! statistics. Rendering is fully deterministic: grouping uses ordered
//! maps and the palette is fixed.

use super::csv_io::ExperimentRecord;
use crate::error::HarnessError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Rendering knobs.
#[derive(Clone, Copy, Debug)]
pub struct PlotOptions {
    /// Log-axis floor: values at or below zero are drawn here and
    /// footnoted.
    pub floor: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions { floor: 1e-8 }
    }
}

const WIDTH: f64 = 780.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 86.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 54.0;
const MARGIN_BOTTOM: f64 = 64.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Columns a record can contribute to a plot.
#[derive(Clone, Copy)]
enum Metric {
    ExcessRisk,
    Accuracy,
    BetaErr,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::ExcessRisk => "excess_risk",
            Metric::Accuracy => "accuracy",
            Metric::BetaErr => "beta_err",
        }
    }

    fn extract(self, r: &ExperimentRecord) -> Option<f64> {
        let v = match self {
            Metric::ExcessRisk => Some(r.excess_risk),
            Metric::Accuracy => r.accuracy,
            Metric::BetaErr => r.beta_err,
        }?;
        v.is_finite().then_some(v)
    }
}

/// A (mean, std) summary at one budget.
struct PointStat {
    n: u64,
    mean: f64,
    std: f64,
}

/// Render one SVG per (experiment, metric) with data into `out_dir` and
/// return the written paths, sorted. Metrics that no record populates
/// (e.g. accuracy outside strategic scenarios) produce no file.
pub fn write_plots(
    records: &[ExperimentRecord],
    out_dir: &Path,
    opts: &PlotOptions,
) -> Result<Vec<PathBuf>, HarnessError> {
    if !(opts.floor > 0.0 && opts.floor.is_finite()) {
        return Err(HarnessError::InvalidPlan(format!(
            "plot floor must be positive and finite, got {}",
            opts.floor
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut by_experiment: BTreeMap<&str, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_experiment.entry(&r.experiment).or_default().push(r);
    }
    let mut written = Vec::new();
    for (experiment, rows) in &by_experiment {
        for metric in [Metric::ExcessRisk, Metric::Accuracy, Metric::BetaErr] {
            // method -> n -> finite values across reps
            let mut series: BTreeMap<&str, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
            for r in rows {
                if let Some(v) = metric.extract(r) {
                    series
                        .entry(&r.method)
                        .or_default()
                        .entry(r.n)
                        .or_default()
                        .push(v);
                }
            }
            series.retain(|_, pts| !pts.is_empty());
            if series.is_empty() {
                continue;
            }
            let svg = render_svg(experiment, metric, &series, opts);
            let file = out_dir.join(format!(
                "{}_{}.svg",
                sanitize_file_stem(experiment),
                metric.name()
            ));
            std::fs::write(&file, svg).map_err(|source| HarnessError::Io {
                path: file.display().to_string(),
                source,
            })?;
            written.push(file);
        }
    }
    written.sort();
    Ok(written)
}

fn sanitize_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn render_svg(
    experiment: &str,
    metric: Metric,
    series: &BTreeMap<&str, BTreeMap<u64, Vec<f64>>>,
    opts: &PlotOptions,
) -> String {
    let floor = opts.floor;
    let clamp = |v: f64| if v > floor { v } else { floor };

    // Summaries, and the data extents after clamping.
    let mut stats: BTreeMap<&str, Vec<PointStat>> = BTreeMap::new();
    let mut clamped_any = false;
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_lo, mut n_hi) = (u64::MAX, 0u64);
    for (method, by_n) in series {
        let mut pts = Vec::new();
        for (&n, values) in by_n {
            let (mean, std) = mean_std(values);
            if mean <= floor || mean - std <= floor {
                clamped_any = true;
            }
            y_lo = y_lo.min(clamp(mean - std)).min(clamp(mean));
            y_hi = y_hi.max(clamp(mean + std)).max(clamp(mean));
            n_lo = n_lo.min(n);
            n_hi = n_hi.max(n);
            pts.push(PointStat { n, mean, std });
        }
        stats.insert(method, pts);
    }
    // Pad the log range so bands never touch the frame; widen degenerate
    // ranges by a decade each way.
    let (mut ly_lo, mut ly_hi) = (y_lo.log10(), y_hi.log10());
    if (ly_hi - ly_lo).abs() < 1e-12 {
        ly_lo -= 1.0;
        ly_hi += 1.0;
    } else {
        let pad = 0.06 * (ly_hi - ly_lo);
        ly_lo -= pad;
        ly_hi += pad;
    }
    let (lx_lo, lx_hi) = if n_lo == n_hi {
        ((n_lo as f64).log10() - 0.5, (n_hi as f64).log10() + 0.5)
    } else {
        ((n_lo as f64).log10(), (n_hi as f64).log10())
    };

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |n: u64| MARGIN_LEFT + ((n as f64).log10() - lx_lo) / (lx_hi - lx_lo) * plot_w;
    let y_of =
        |v: f64| MARGIN_TOP + plot_h - (clamp(v).log10() - ly_lo) / (ly_hi - ly_lo) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"30\" font-size=\"17\" text-anchor=\"middle\">{} — {}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        experiment,
        metric.name()
    );

    // Frame.
    let _ = write!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n"
    );

    // Y decade grid and labels.
    let dec_lo = ly_lo.ceil() as i64;
    let dec_hi = ly_hi.floor() as i64;
    let dec_step = (((dec_hi - dec_lo) / 10) + 1).max(1);
    let mut dec = dec_lo;
    while dec <= dec_hi {
        let y = y_of(10f64.powi(dec as i32));
        let _ = write!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT + plot_w
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">1e{}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            dec
        );
        dec += dec_step;
    }

    // X ticks at each budget present.
    let mut budgets: Vec<u64> = series
        .values()
        .flat_map(|by_n| by_n.keys().copied())
        .collect();
    budgets.sort_unstable();
    budgets.dedup();
    for &n in &budgets {
        let x = x_of(n);
        let _ = write!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#333\" stroke-width=\"1\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        );
        let _ = write!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{n}</text>\n",
            MARGIN_TOP + plot_h + 20.0
        );
    }

    // Axis titles.
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">samples n (log scale)</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 18.0
    );
    let _ = write!(
        svg,
        "<text x=\"20\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.2})\">{} (log scale)</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        metric.name()
    );

    // Series: band, then line, then markers.
    for (idx, (method, pts)) in stats.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if pts.len() > 1 {
            let mut band = String::from("<polygon points=\"");
            for p in pts.iter() {
                let _ = write!(band, "{:.2},{:.2} ", x_of(p.n), y_of(p.mean + p.std));
            }
            for p in pts.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", x_of(p.n), y_of(p.mean - p.std));
            }
            let _ = write!(svg, "{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n", band.trim_end());
            let mut line = String::from("<polyline points=\"");
            for p in pts.iter() {
                let _ = write!(line, "{:.2},{:.2} ", x_of(p.n), y_of(p.mean));
            }
            let _ = write!(
                svg,
                "{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                line.trim_end()
            );
        }
        for p in pts.iter() {
            let _ = write!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>\n",
                x_of(p.n),
                y_of(p.mean)
            );
            if p.mean <= opts.floor {
                let _ = write!(
                    svg,
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"{color}\" \
                     text-anchor=\"middle\">†</text>\n",
                    x_of(p.n),
                    y_of(p.mean) - 7.0
                );
            }
        }
        // Legend entry.
        let ly = MARGIN_TOP + 14.0 + idx as f64 * 20.0;
        let lx = MARGIN_LEFT + plot_w + 14.0;
        let _ = write!(
            svg,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{method}</text>\n",
            lx + 28.0,
            ly + 4.0
        );
    }

    // Footnotes.
    let mut footnote = String::from("band: mean ±1 std over repetitions; failed cells excluded");
    if clamped_any {
        let _ = write!(footnote, "; † values ≤ 0 drawn at the {floor:.0e} floor");
    }
    let _ = write!(
        svg,
        "<text x=\"{MARGIN_LEFT}\" y=\"{:.2}\" font-size=\"11\" fill=\"#555\">{footnote}</text>\n",
        HEIGHT - 4.0
    );
    svg.push_str("</svg>\n");
    svg
}
