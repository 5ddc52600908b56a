//! Report rows and their CSV form.

use std::fmt::Write as _;

use serde::Serialize;

/// How a row decides pass/fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tolerance {
    /// `|value - reference| <= tol`
    Absolute(f64),
    /// `|value - reference| <= tol * |reference|`
    Relative(f64),
    /// The confidence interval `[lo, hi]` of the value contains the reference.
    Interval(f64, f64),
    /// `value < reference`
    Below,
    /// `value >= reference`
    AtLeast,
    /// `value == reference`
    Exact,
}

impl Tolerance {
    pub fn passes(&self, value: f64, reference: f64) -> bool {
        match *self {
            Self::Absolute(t) => (value - reference).abs() <= t,
            Self::Relative(t) => (value - reference).abs() <= t * reference.abs(),
            Self::Interval(lo, hi) => lo <= reference && reference <= hi,
            Self::Below => value < reference,
            Self::AtLeast => value >= reference,
            Self::Exact => value == reference,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Absolute(_) => "absolute",
            Self::Relative(_) => "relative",
            Self::Interval(..) => "ci",
            Self::Below => "below",
            Self::AtLeast => "at_least",
            Self::Exact => "exact",
        }
    }

    fn describe(&self) -> String {
        match *self {
            Self::Absolute(t) | Self::Relative(t) => fmt(t),
            Self::Interval(lo, hi) => format!("[{};{}]", fmt(lo), fmt(hi)),
            _ => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    /// Where the reference comes from: `analytic`, `oracle`, `symmetry`,
    /// `identity`, `bound`, `coefficients` (the tabulated graph
    /// coefficients) or `trend` (the previous row of a sweep).
    pub provenance: &'static str,
    pub tolerance: Tolerance,
    pub pass: bool,
    /// Wall-clock seconds of the experiment; not written to `report.csv`.
    pub runtime: f64,
}

impl ReportRow {
    pub fn new(experiment: &str, quantity: impl Into<String>, value: f64, reference: f64, provenance: &'static str, tolerance: Tolerance) -> Self {
        Self {
            experiment: experiment.into(),
            quantity: quantity.into(),
            value,
            reference,
            provenance,
            tolerance,
            pass: tolerance.passes(value, reference),
            runtime: 0.0,
        }
    }

    /// A failed row recording a module error.
    pub fn error(experiment: &str, message: &str) -> Self {
        let mut r = Self::new(experiment, format!("error: {}", message.replace([',', '\n'], ";")), f64::NAN, f64::NAN, "exact", Tolerance::Exact);
        r.pass = false;
        r
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.9e}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Time spent building shared graphs and tables.
    pub setup_seconds: f64,
}

impl Report {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ReportRow>) {
        self.rows.extend(rows);
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Rows of one experiment.
    pub fn experiment<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.experiment == id)
    }

    /// Sets the runtime of every row of `experiment` that has none yet.
    pub fn stamp(&mut self, experiment: &str, seconds: f64) {
        for r in self.rows.iter_mut().filter(|r| r.experiment == experiment) {
            r.runtime = seconds;
        }
    }

    /// Everything except runtimes, so that reruns compare byte for byte.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,quantity,value,reference,provenance,tolerance_kind,tolerance,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.experiment,
                r.quantity,
                fmt(r.value),
                fmt(r.reference),
                r.provenance,
                r.tolerance.kind(),
                r.tolerance.describe(),
                r.pass
            );
        }
        out
    }

    /// One line per experiment: `experiment,seconds`.
    pub fn timings_csv(&self) -> String {
        let mut out = format!("experiment,seconds\nsetup,{:.3}\n", self.setup_seconds);
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.experiment.as_str()) {
                seen.push(&r.experiment);
                let _ = writeln!(out, "{},{:.3}", r.experiment, r.runtime);
            }
        }
        out
    }
}
