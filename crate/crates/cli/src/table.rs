//! Tab-separated curve tables.

use std::fmt::Write as _;
use std::path::Path;

use tradeoff_core::frontier::FrontierCurve;
use tradeoff_core::Portfolio;

use crate::CliError;

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// `mu, risk, x0, x1, …` over `m` risky assets.
    pub fn portfolio_header(m: usize) -> Vec<String> {
        let mut h = vec!["mu".to_string(), "risk".into(), "x0".into()];
        h.extend((1..=m).map(|j| format!("x{j}")));
        h
    }

    pub fn portfolio_row(mu: f64, risk: f64, x: &Portfolio) -> Vec<f64> {
        let mut row = vec![mu, risk, x.x0];
        row.extend(x.x_hat.iter().copied());
        row
    }

    pub fn from_curve(curve: &FrontierCurve, m: usize) -> Self {
        Table {
            header: Self::portfolio_header(m),
            rows: curve.points.iter().map(|p| Self::portfolio_row(p.mu, p.risk, &p.portfolio)).collect(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push('#');
        out.push_str(&self.header.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_g(v)).collect();
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes a curve as TSV: a `#` header then one row per point in `μ` order.
pub fn emit_table(curve: &FrontierCurve, path: &Path) -> Result<(), CliError> {
    let m = curve.points.first().map_or(0, |p| p.portfolio.dim());
    write_file(path, &Table::from_curve(curve, m).render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(0.1), "0.1");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g(2.0 / 3.0 * 1e5), "66666.6666667");
        assert_eq!(fmt_g(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_g(0.0985572437), "0.0985572437");
        assert_eq!(fmt_g(-0.0), "0");
        assert_eq!(fmt_g(f64::INFINITY), "inf");
    }

    #[test]
    fn header_only_for_empty_table() {
        let t = Table { header: Table::portfolio_header(2), rows: vec![] };
        assert_eq!(t.render(), "#mu\trisk\tx0\tx1\tx2\n");
    }
}
