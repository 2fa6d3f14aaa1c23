use std::fmt::Write;

use super::{CategoryScore, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RoundingMode {
    /// Ties go to the even digit (60.05 -> 60.0).
    #[default]
    HalfEven,
    /// Ties go away from zero (60.05 -> 60.1).
    HalfUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    /// Scores multiplied by 100.
    #[default]
    Percent,
    /// Scores as stored, in `[0, 1]`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub precision: usize,
    pub scale: Scale,
    pub rounding: RoundingMode,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            precision: 1,
            scale: Scale::Percent,
            rounding: RoundingMode::HalfEven,
        }
    }
}

// Products like 0.6005 * 1000 land a hair off the tie, so ties are detected
// within this distance.
const TIE_EPS: f64 = 1e-9;

fn round_to(value: f64, precision: usize, mode: RoundingMode) -> f64 {
    let factor = 10f64.powi(precision as i32);
    let scaled = value * factor;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let rounded = if (frac - 0.5).abs() < TIE_EPS {
        match mode {
            RoundingMode::HalfUp => floor + 1.0,
            RoundingMode::HalfEven if floor.rem_euclid(2.0) == 0.0 => floor,
            RoundingMode::HalfEven => floor + 1.0,
        }
    } else {
        scaled.round()
    };
    // avoid printing "-0.0"
    (rounded / factor) + 0.0
}

/// One rendered score cell.
pub fn format_cell(value: f64, options: &ReportOptions) -> String {
    let v = match options.scale {
        Scale::Percent => value * 100.0,
        Scale::Unit => value,
    };
    let r = round_to(v, options.precision, options.rounding);
    format!("{:.*}", options.precision, r)
}

/// Plain-text table with J, F and J&F per category. Categories without
/// expressions show `-`.
pub fn render_report(report: &EvalReport, options: &ReportOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", report.mode.describe());
    let _ = writeln!(out, "tolerance: {}", report.tolerance_ratio);
    let _ = writeln!(
        out,
        "{:<14} {:>7} {:>7} {:>7} {:>8}",
        "category", "J", "F", "J&F", "exprs"
    );
    let rows: [(&str, &CategoryScore); 3] = [
        ("Referring", &report.referring),
        ("Actor-Target", &report.actor_target),
        ("Overall", &report.overall),
    ];
    for (name, s) in rows {
        let cell = |v: f64| {
            if s.expression_count == 0 {
                "-".to_string()
            } else {
                format_cell(v, options)
            }
        };
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>7} {:>7} {:>8}",
            name,
            cell(s.j),
            cell(s.f),
            cell(s.jf),
            s.expression_count
        );
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
