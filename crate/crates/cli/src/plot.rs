//! Minimal SVG plots written next to the CSV outputs.

use std::path::Path;

use plotters::prelude::*;
use tailsched::sim::Heatmap;

use crate::CliError;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(140, 86, 75),
];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (x0, x1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Cells shaded by count on a log scale; axes are bin indices.
pub fn heatmap_chart(path: &Path, title: &str, h: &Heatmap) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let nt = h.counts.len();
    let nl = h.counts.first().map_or(0, Vec::len);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0..nt, 0..nl)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("completion-time bin")
        .y_desc("output-length bin (log)")
        .draw()
        .map_err(plot_err)?;
    let peak = h.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    chart
        .draw_series(h.counts.iter().enumerate().flat_map(|(ti, row)| {
            row.iter().enumerate().map(move |(li, &c)| {
                let shade = if c == 0 { 0.0 } else { (1.0 + c as f64).ln() / (1.0 + peak).ln() };
                let v = (255.0 * (1.0 - shade)) as u8;
                Rectangle::new([(ti, li), (ti + 1, li + 1)], RGBColor(v, v, 255).filled())
            })
        }))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}
