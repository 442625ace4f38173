//! Text formats for kernels, trajectories and scenarios, plus CSV rows.
//!
//! Kernel file: a line with `d`, then `d` lines of `d` whitespace-separated
//! numbers. Trajectory file: one 1-based state per line with an optional
//! 0/1 label in a second column. Blank lines and `#` comments are skipped.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Ar1Row, BoundRow, CoverageRow, GapRow, LabelModel, MseRow, Scenario};
use crate::markov::{build_benchmark_kernel, interpolate_kernels, validate_kernel, Trajectory, TransitionMatrix};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse {tok:?}")))
}

pub fn parse_kernel(text: &str) -> Result<TransitionMatrix> {
    let mut lines = content_lines(text);
    let (line, head) = lines.next().ok_or(Error::EmptyMatrix)?;
    let d: usize = parse_num(head, line)?;
    if d == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rows = Vec::with_capacity(d);
    for (line, l) in lines {
        let row = l.split_whitespace().map(|t| parse_num::<f64>(t, line)).collect::<Result<Vec<_>>>()?;
        if row.len() != d {
            return Err(Error::Parse(format!("line {line}: expected {d} entries, found {}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != d {
        return Err(Error::Parse(format!("expected {d} rows, found {}", rows.len())));
    }
    validate_kernel(&rows)
}

pub fn read_kernel(path: &Path) -> Result<TransitionMatrix> {
    parse_kernel(&read(path)?)
}

pub fn format_kernel(p: &TransitionMatrix) -> String {
    let mut out = format!("{}\n", p.d());
    for row in p.rows() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Parses 1-based states; returned trajectories are 0-based.
pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut states = Vec::new();
    let mut labels = Vec::new();
    let mut labeled: Option<bool> = None;
    for (line, l) in content_lines(text) {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let has_label = match toks.len() {
            1 => false,
            2 => true,
            k => return Err(Error::Parse(format!("line {line}: expected 1 or 2 columns, found {k}"))),
        };
        if *labeled.get_or_insert(has_label) != has_label {
            return Err(Error::Parse(format!("line {line}: label column present on some lines only")));
        }
        let s: usize = parse_num(toks[0], line)?;
        if s == 0 {
            return Err(Error::Parse(format!("line {line}: states are 1-based")));
        }
        states.push(s - 1);
        if has_label {
            labels.push(parse_num::<u8>(toks[1], line)?);
        }
    }
    if states.is_empty() {
        return Err(Error::ZeroLength);
    }
    Trajectory::new(states, labeled.unwrap_or(false).then_some(labels))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(&read(path)?)
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.states.len() * 4);
    for (i, s) in traj.states.iter().enumerate() {
        match &traj.labels {
            Some(l) => out.push_str(&format!("{} {}\n", s + 1, l[i])),
            None => out.push_str(&format!("{}\n", s + 1)),
        }
    }
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Scenario file. Either `kernel` is given, or the benchmark family
/// `R_t` is built from `p`, `q` and `t`. Label probabilities default to
/// the linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub d: usize,
    #[serde(default)]
    pub kernel: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub label_probs: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub t: Option<f64>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&read(path)?)
    }

    pub fn kernel(&self) -> Result<TransitionMatrix> {
        let k = match &self.kernel {
            Some(rows) => validate_kernel(rows)?,
            None => {
                let (p, q) = build_benchmark_kernel(self.d, self.p.unwrap_or(0.01), self.q.unwrap_or(0.001))?;
                interpolate_kernels(&p, &q, self.t.unwrap_or(1.0))?
            }
        };
        if k.d() != self.d {
            return Err(Error::DimensionMismatch { left: k.d(), right: self.d });
        }
        Ok(k)
    }

    pub fn labels(&self) -> Result<LabelModel> {
        match &self.label_probs {
            Some(p) => LabelModel::new(p.clone()),
            None => LabelModel::linear(self.d),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.kernel()?, self.labels()?)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Renders rows with a header line; output bytes depend only on the rows.
pub fn to_csv<R: CsvRow>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(R::header()).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r.fields()).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

impl CsvRow for GapRow {
    fn header() -> &'static [&'static str] {
        &["t", "n", "seed", "gamma_true", "gamma_hat", "argmax_k"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            self.n.to_string(),
            self.seed.to_string(),
            fmt_f64(self.gamma_true),
            fmt_f64(self.gamma_hat),
            self.argmax_k.to_string(),
        ]
    }
}

impl CsvRow for BoundRow {
    fn header() -> &'static [&'static str] {
        &[
            "t",
            "n",
            "seed",
            "bound_theory",
            "bound_empirical",
            "risk_true",
            "risk_emp",
            "valid_theory",
            "valid_empirical",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            self.n.to_string(),
            self.seed.to_string(),
            fmt_f64(self.bound_theory),
            fmt_f64(self.bound_empirical),
            fmt_f64(self.risk_true),
            fmt_f64(self.risk_emp),
            self.valid_theory.to_string(),
            self.valid_empirical.to_string(),
        ]
    }
}

impl CsvRow for MseRow {
    fn header() -> &'static [&'static str] {
        &["t", "n", "replications", "mse"]
    }

    fn fields(&self) -> Vec<String> {
        vec![fmt_f64(self.t), self.n.to_string(), self.replications.to_string(), fmt_f64(self.mse)]
    }
}

impl CsvRow for CoverageRow {
    fn header() -> &'static [&'static str] {
        &["t", "n", "formula", "delta", "replications", "coverage", "wilson_lo", "wilson_hi"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.t),
            self.n.to_string(),
            self.formula.clone(),
            fmt_f64(self.delta),
            self.replications.to_string(),
            fmt_f64(self.coverage),
            fmt_f64(self.wilson_lo),
            fmt_f64(self.wilson_hi),
        ]
    }
}

impl CsvRow for Ar1Row {
    fn header() -> &'static [&'static str] {
        &["a", "n", "seed", "gamma_true", "gamma_hat", "eps_radius", "within"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f64(self.a),
            self.n.to_string(),
            self.seed.to_string(),
            fmt_f64(self.gamma_true),
            fmt_f64(self.gamma_hat),
            fmt_f64(self.eps_radius),
            self.within.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_round_trip() {
        let k = parse_kernel("2\n0.9 0.1\n# comment\n0.2 0.8\n").unwrap();
        assert_eq!(k.get(0, 1), 0.1);
        assert_eq!(parse_kernel(&format_kernel(&k)).unwrap(), k);
    }

    #[test]
    fn kernel_errors() {
        assert!(matches!(parse_kernel("2\n1.0 0.1\n0.5 0.5\n"), Err(Error::RowSumViolation { .. })));
        assert!(matches!(parse_kernel("2\n1.0\n0.5 0.5\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_kernel(""), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn trajectory_formats() {
        let t = parse_trajectory("1\n2\n1\n").unwrap();
        assert_eq!(t.states, vec![0, 1, 0]);
        assert!(t.labels.is_none());
        let l = parse_trajectory("1 0\n2 1\n").unwrap();
        assert_eq!(l.labels, Some(vec![0, 1]));
        assert_eq!(parse_trajectory(&format_trajectory(&l)).unwrap(), l);
        assert!(parse_trajectory("0\n").is_err());
        assert!(parse_trajectory("1 0\n2\n").is_err());
        assert!(parse_trajectory("1 2\n").is_err());
    }

    #[test]
    fn scenario_file_defaults() {
        let s = ScenarioFile::from_json(r#"{"d": 4, "t": 0.0}"#).unwrap();
        let sc = s.scenario().unwrap();
        assert_eq!(sc.d(), 4);
        let k = ScenarioFile::from_json(r#"{"d": 2, "kernel": [[0.5, 0.5], [0.5, 0.5]], "label_probs": [0.2, 0.8]}"#)
            .unwrap();
        assert_eq!(k.scenario().unwrap().labels.probs(), &[0.2, 0.8]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = vec![MseRow { t: 0.5, n: 10, replications: 3, mse: 0.25 }];
        let bytes = to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "t,n,replications,mse\n5.0000000000000000e-1,10,3,2.5000000000000000e-1\n");
    }
}
