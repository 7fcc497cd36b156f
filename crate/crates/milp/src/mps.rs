//! Fixed-width MPS export.
//!
//! Column and row names are replaced by 8-character codes (`C0000001`,
//! `R0000001`) so every field fits the fixed layout; the original names are
//! listed in comment lines at the top of the file.

use std::fmt::Write as _;
use std::io;

use crate::problem::{Problem, RowSense, Sense};

/// Formats a number into at most 12 characters, the fixed-MPS field width,
/// keeping whichever fixed or exponent form loses the least precision.
pub fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    let mut best: Option<(f64, String)> = None;
    let mut consider = |s: String| {
        if s.len() > 12 {
            return;
        }
        let err = s.parse::<f64>().map_or(f64::INFINITY, |p| (p - v).abs());
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, s));
        }
    };
    for precision in 0..=11 {
        consider(format!("{v:.precision$}"));
        consider(format!("{v:.precision$e}"));
    }
    best.map_or_else(|| format!("{v:.0e}"), |(_, s)| s)
}

pub fn column_code(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn row_code(i: usize) -> String {
    format!("R{:07}", i + 1)
}

pub fn to_mps_string(problem: &Problem) -> String {
    let mut out = String::new();
    let name: String = problem
        .name
        .chars()
        .filter(|c| !c.is_whitespace())
        .take(8)
        .collect();
    let sense = match problem.sense {
        Sense::Maximize => "MAX",
        Sense::Minimize => "MIN",
    };
    let _ = writeln!(
        out,
        "* OBJSENSE {}IMIZE: objective coefficients are stated for {}imization",
        sense,
        sense.to_lowercase()
    );
    for (j, c) in problem.columns.iter().enumerate() {
        let _ = writeln!(out, "* {} {}", column_code(j), c.name);
    }
    for (i, r) in problem.rows.iter().enumerate() {
        let _ = writeln!(out, "* {} {}", row_code(i), r.name);
    }
    let _ = writeln!(out, "NAME          {name}");
    let _ = writeln!(out, "OBJSENSE");
    let _ = writeln!(out, "    {sense}");
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  OBJ");
    for (i, r) in problem.rows.iter().enumerate() {
        let t = match r.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(out, " {t}  {}", row_code(i));
    }

    // Column-major entries.
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.num_columns()];
    for (i, r) in problem.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            by_col[j].push((i, a));
        }
    }

    let _ = writeln!(out, "COLUMNS");
    let mut in_int = false;
    let mut marker = 0;
    for (j, c) in problem.columns.iter().enumerate() {
        if c.integer != in_int {
            let tag = if c.integer { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    M{marker:07}  'MARKER'                 {tag}");
            marker += 1;
            in_int = c.integer;
        }
        let mut entries: Vec<(String, f64)> = Vec::new();
        if c.objective != 0.0 {
            entries.push(("OBJ".to_string(), c.objective));
        }
        entries.extend(by_col[j].iter().map(|&(i, a)| (row_code(i), a)));
        if entries.is_empty() {
            // Keep the column declared.
            entries.push(("OBJ".to_string(), 0.0));
        }
        for pair in entries.chunks(2) {
            let mut line = format!(
                "    {:<8}  {:<8}  {:>12}",
                column_code(j),
                pair[0].0,
                format_number(pair[0].1)
            );
            if let Some(second) = pair.get(1) {
                let _ = write!(line, "   {:<8}  {:>12}", second.0, format_number(second.1));
            }
            let _ = writeln!(out, "{line}");
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker:07}  'MARKER'                 'INTEND'");
    }

    let _ = writeln!(out, "RHS");
    let rhs: Vec<(usize, f64)> = problem
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.rhs != 0.0)
        .map(|(i, r)| (i, r.rhs))
        .collect();
    for pair in rhs.chunks(2) {
        let mut line = format!(
            "    {:<8}  {:<8}  {:>12}",
            "RHS",
            row_code(pair[0].0),
            format_number(pair[0].1)
        );
        if let Some(&(i, v)) = pair.get(1) {
            let _ = write!(line, "   {:<8}  {:>12}", row_code(i), format_number(v));
        }
        let _ = writeln!(out, "{line}");
    }

    let _ = writeln!(out, "BOUNDS");
    for (j, c) in problem.columns.iter().enumerate() {
        let code = column_code(j);
        if c.integer && c.lower == 0.0 && c.upper == 1.0 {
            let _ = writeln!(out, " BV BND       {code}");
        } else if c.lower == c.upper {
            let _ = writeln!(out, " FX BND       {:<8}  {:>12}", code, format_number(c.lower));
        } else {
            if c.lower != 0.0 {
                let _ = writeln!(out, " LO BND       {:<8}  {:>12}", code, format_number(c.lower));
            }
            let _ = writeln!(out, " UP BND       {:<8}  {:>12}", code, format_number(c.upper));
        }
    }
    let _ = writeln!(out, "ENDATA");
    out
}

pub fn write_mps<W: io::Write>(problem: &Problem, mut w: W) -> io::Result<()> {
    w.write_all(to_mps_string(problem).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_fit_field() {
        for v in [0.1234567890123, 1.0 / 3.0, 1.723e-6, 41_250_000.0, -2.5e-12, 200000.0] {
            let s = format_number(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-6 * v.abs().max(1e-300), "{v} -> {s}");
        }
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(172.3), "172.3");
    }

    #[test]
    fn columns_line_layout() {
        let mut p = Problem::new("tiny", Sense::Maximize);
        let x = p.add_column("x", 0.0, 10.0, false, 1.0);
        p.add_row("cap", vec![(x, 1.0)], RowSense::Le, 3.0);
        let text = to_mps_string(&p);
        let line = text
            .lines()
            .find(|l| l.starts_with("    C0000001  OBJ"))
            .unwrap();
        // Field 3 starts at column 15, field 4 ends at column 36.
        assert_eq!(&line[14..22], "OBJ     ");
        assert_eq!(line[24..36].trim(), "1");
        assert!(text.contains("OBJSENSE\n    MAX\n"));
    }
}
