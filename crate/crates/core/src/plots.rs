//! gnuplot scripts regenerating the error, transient and feedforward panels
//! from the trajectory CSVs.

use std::fmt::Write as _;

use crate::io::TrajectoryLayout;

/// One curve source: a trajectory CSV (relative to the script) and its legend.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub file: String,
    pub title: String,
}

fn column(layout: &TrajectoryLayout, name: &str) -> usize {
    layout
        .header()
        .iter()
        .position(|c| c == name)
        .map_or(1, |i| i + 1)
}

fn preamble(config_hash: &str, output: &str, title: &str) -> String {
    format!(
        "# config_hash = {config_hash}\n\
         set datafile separator ','\n\
         set terminal pngcairo size 1000,700\n\
         set output '{output}'\n\
         set title '{title}'\n\
         set grid\n\
         set key outside right\n"
    )
}

fn plot_line(series: &[PlotSeries], x: usize, y: usize) -> String {
    let parts: Vec<String> = series
        .iter()
        .map(|s| format!("'{}' every ::1 using {x}:{y} with lines title '{}'", s.file, s.title))
        .collect();
    format!("plot {}\n", parts.join(", \\\n     "))
}

/// Steady-state tracking error with a zoomed lower panel.
pub fn error_panels(
    series: &[PlotSeries],
    layout: &TrajectoryLayout,
    t_start: f64,
    t_end: f64,
    config_hash: &str,
) -> String {
    let (t, y) = (column(layout, "t"), column(layout, "y"));
    let mut s = preamble(config_hash, "errors.png", "steady-state tracking error");
    s.push_str("set multiplot layout 2,1\n");
    let _ = writeln!(s, "set xrange [{t_start}:{t_end}]\nset xlabel 't [s]'\nset ylabel 'y'");
    s.push_str(&plot_line(series, t, y));
    let zoom_end = (t_start + (t_end - t_start) / 6.0).min(t_end);
    let _ = writeln!(s, "set title 'zoom'\nset xrange [{t_start}:{zoom_end}]\nset autoscale y");
    s.push_str(&plot_line(series, t, y));
    s.push_str("unset multiplot\n");
    s
}

/// Tracking error over the initial transient.
pub fn transient_panel(series: &[PlotSeries], layout: &TrajectoryLayout, t_end: f64, config_hash: &str) -> String {
    let (t, y) = (column(layout, "t"), column(layout, "y"));
    let mut s = preamble(config_hash, "transient.png", "transient tracking error");
    let _ = writeln!(s, "set xrange [0:{t_end}]\nset xlabel 't [s]'\nset ylabel 'y'");
    s.push_str(&plot_line(series, t, y));
    s
}

/// Ideal feedforward `u*` against the learned mean along the trajectory.
pub fn feedforward_panel(
    series: &[PlotSeries],
    layout: &TrajectoryLayout,
    t_start: f64,
    t_end: f64,
    config_hash: &str,
) -> String {
    let (t, u_star, mu) = (column(layout, "t"), column(layout, "u_star"), column(layout, "mu"));
    let mut s = preamble(config_hash, "feedforward.png", "feedforward: ideal and learned");
    let _ = writeln!(s, "set xrange [{t_start}:{t_end}]\nset xlabel 't [s]'\nset ylabel 'input'");
    let mut parts = Vec::new();
    if let Some(first) = series.first() {
        parts.push(format!("'{}' every ::1 using {t}:{u_star} with lines lw 2 title 'u*'", first.file));
    }
    for ser in series {
        parts.push(format!(
            "'{}' every ::1 using {t}:{mu} with lines title 'mu {}'",
            ser.file, ser.title
        ));
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}
