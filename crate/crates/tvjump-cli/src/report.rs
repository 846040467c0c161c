//! Report serialization: jump CSVs and `key = value` run summaries.
//!
//! Every floating-point value is rounded to nine significant digits before
//! printing, and printing uses the shortest decimal that parses back to the
//! rounded value, so written reports re-parse bit-identically.

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Rounds to nine significant decimal digits.
///
/// The result is the f64 nearest to the 9-digit decimal, so rounding is
/// idempotent and `fmt9` emits exactly that decimal.
pub fn sig9(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("scientific round-trip")
}

/// Shortest decimal spelling of the 9-significant-digit rounding of `v`.
pub fn fmt9(v: f64) -> String {
    format!("{}", sig9(v))
}

/// One detected edge: location, best direction, score, the four one-sided
/// averages, and the quadratic-form inequality verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRow {
    pub x: f64,
    pub y: f64,
    pub nu_x: f64,
    pub nu_y: f64,
    pub j: f64,
    pub u_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn channel_columns(stem: &str, channels: usize, out: &mut Vec<String>) {
    if channels == 1 {
        out.push(stem.to_string());
    } else {
        for c in 0..channels {
            out.push(format!("{stem}_{c}"));
        }
    }
}

/// The pinned CSV header for `channels`-channel jump reports.
pub fn jump_csv_header(channels: usize) -> String {
    let mut cols = vec![
        "x".to_string(),
        "y".to_string(),
        "nu_x".to_string(),
        "nu_y".to_string(),
        "j".to_string(),
    ];
    channel_columns("u_minus", channels, &mut cols);
    channel_columns("u_plus", channels, &mut cols);
    channel_columns("f_minus", channels, &mut cols);
    channel_columns("f_plus", channels, &mut cols);
    cols.push("lhs".to_string());
    cols.push("rhs".to_string());
    cols.push("pass".to_string());
    cols.join(",")
}

/// Renders rows under the pinned header; all floats at nine significant
/// digits.
pub fn render_jump_csv(rows: &[JumpRow], channels: usize) -> String {
    let mut s = jump_csv_header(channels);
    s.push('\n');
    for row in rows {
        let mut fields = vec![
            fmt9(row.x),
            fmt9(row.y),
            fmt9(row.nu_x),
            fmt9(row.nu_y),
            fmt9(row.j),
        ];
        for group in [&row.u_minus, &row.u_plus, &row.f_minus, &row.f_plus] {
            debug_assert_eq!(group.len(), channels);
            fields.extend(group.iter().map(|&v| fmt9(v)));
        }
        fields.push(fmt9(row.lhs));
        fields.push(fmt9(row.rhs));
        fields.push(row.pass.to_string());
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn write_jump_csv(path: &Path, rows: &[JumpRow], channels: usize) -> Result<()> {
    std::fs::write(path, render_jump_csv(rows, channels))
        .with_context(|| format!("writing {}", path.display()))
}

/// Parses a jump CSV, returning the channel count and the rows.
pub fn read_jump_csv(path: &Path) -> Result<(usize, Vec<JumpRow>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty CSV")?;
    let cols: Vec<&str> = header.split(',').collect();
    // The fixed prefix has 5 columns and the suffix 3; the middle holds the
    // four channel groups.
    if cols.len() < 12 || (cols.len() - 8) % 4 != 0 {
        bail!("unrecognized jump CSV header {header:?}");
    }
    let channels = (cols.len() - 8) / 4;
    if header != jump_csv_header(channels) {
        bail!("unrecognized jump CSV header {header:?}");
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            bail!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                cols.len(),
                fields.len()
            );
        }
        let mut it = fields.iter();
        let mut next_f64 = || -> Result<f64> {
            let raw = it.next().expect("field count checked");
            raw.parse()
                .with_context(|| format!("line {}: bad number {raw:?}", lineno + 2))
        };
        let x = next_f64()?;
        let y = next_f64()?;
        let nu_x = next_f64()?;
        let nu_y = next_f64()?;
        let j = next_f64()?;
        let mut groups: [Vec<f64>; 4] = Default::default();
        for group in &mut groups {
            for _ in 0..channels {
                group.push(next_f64()?);
            }
        }
        let lhs = next_f64()?;
        let rhs = next_f64()?;
        let [u_minus, u_plus, f_minus, f_plus] = groups;
        let pass = match *it.next().expect("field count checked") {
            "true" => true,
            "false" => false,
            other => bail!("line {}: bad verdict {other:?}", lineno + 2),
        };
        rows.push(JumpRow {
            x,
            y,
            nu_x,
            nu_y,
            j,
            u_minus,
            u_plus,
            f_minus,
            f_plus,
            lhs,
            rhs,
            pass,
        });
    }
    Ok((channels, rows))
}

/// A `key = value` run summary with nine-digit float formatting.
#[derive(Debug, Default)]
pub struct KvReport {
    body: String,
}

impl KvReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.body, "{key} = {value}");
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt9(value));
    }

    pub fn render(&self) -> &str {
        &self.body
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.body).with_context(|| format!("writing {}", path.display()))
    }
}
