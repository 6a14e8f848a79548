//! Text formats for sparse matrices and TASEP state tables.
//!
//! Coordinate format: a header line `# dim <rows> <cols>`, then one
//! `row col value` triple per line, indices 0-based. Blank lines and further
//! `#` comments are ignored.

use std::io::Write;

use crate::error::{Error, Result};
use crate::generators::SparseGenerator;
use crate::matrix::Matrix;

/// Largest `rows * cols` accepted when densifying a parsed matrix.
pub const MAX_DENSE_ENTRIES: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl CoordinateMatrix {
    pub fn to_dense(&self) -> Result<Matrix<f64>> {
        if self.rows.checked_mul(self.cols).map_or(true, |c| c > MAX_DENSE_ENTRIES) {
            return Err(Error::invalid(format!(
                "{}x{} matrix is too large to densify",
                self.rows, self.cols
            )));
        }
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        Ok(m)
    }
}

pub fn write_coordinates(mut w: impl Write, rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<()> {
    writeln!(w, "# dim {rows} {cols}")?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}

pub fn parse_coordinates(text: &str) -> Result<CoordinateMatrix> {
    let mut dims: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.first() == Some(&"dim") {
                if dims.is_some() {
                    return Err(err("duplicate dim header".into()));
                }
                if parts.len() != 3 {
                    return Err(err("dim header needs rows and cols".into()));
                }
                let r = parts[1]
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad row count '{}'", parts[1])))?;
                let c = parts[2]
                    .parse::<usize>()
                    .map_err(|_| err(format!("bad column count '{}'", parts[2])))?;
                dims = Some((r, c));
            }
            continue;
        }
        let (rows, cols) = dims.ok_or_else(|| err("entry before '# dim' header".into()))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(err(format!("expected 'row col value', found {} fields", parts.len())));
        }
        let i = parts[0]
            .parse::<usize>()
            .map_err(|_| err(format!("bad row index '{}'", parts[0])))?;
        let j = parts[1]
            .parse::<usize>()
            .map_err(|_| err(format!("bad column index '{}'", parts[1])))?;
        let v = parts[2]
            .parse::<f64>()
            .map_err(|_| err(format!("bad value '{}'", parts[2])))?;
        if i >= rows || j >= cols {
            return Err(err(format!("entry ({i}, {j}) outside {rows}x{cols}")));
        }
        if !v.is_finite() {
            return Err(err(format!("value {v} is not finite")));
        }
        if !seen.insert((i, j)) {
            return Err(err(format!("duplicate entry ({i}, {j})")));
        }
        entries.push((i, j, v));
    }
    let (rows, cols) = dims.ok_or(Error::Parse {
        line: 0,
        msg: "missing '# dim' header".into(),
    })?;
    Ok(CoordinateMatrix { rows, cols, entries })
}

/// `index,positions` with positions separated by `;`.
pub fn write_tasep_states(mut w: impl Write, g: &SparseGenerator) -> Result<()> {
    writeln!(w, "index,positions")?;
    for (k, s) in g.states.iter().enumerate() {
        let pos: Vec<String> = s.positions().iter().map(|p| p.to_string()).collect();
        writeln!(w, "{k},{}", pos.join(";"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::build_a0;

    #[test]
    fn round_trip() {
        let a0 = build_a0(3).unwrap().to_f64();
        let entries = a0.to_coordinates();
        let mut out = Vec::new();
        write_coordinates(&mut out, 4, 4, &entries).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# dim 4 4\n0 0 -3\n"));
        let m = parse_coordinates(&text).unwrap();
        assert_eq!(m.entries, entries);
        assert_eq!(m.to_dense().unwrap(), a0.to_dense());
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "0 0 1\n",
            "# dim 2 2\n2 0 1\n",
            "# dim 2 2\n0 0 nan\n",
            "# dim 2 2\n0 0 1\n0 0 2\n",
            "# dim 2\n",
            "# dim 2 2\n0 1\n",
            "# dim 2 2\n# dim 2 2\n",
            "",
        ] {
            assert!(parse_coordinates(bad).is_err(), "{bad:?}");
        }
        let huge = parse_coordinates("# dim 100000000 100000000\n").unwrap();
        assert!(huge.to_dense().is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let m = parse_coordinates("# generated\n\n# dim 1 2\n# note\n0 1 2.5\n").unwrap();
        assert_eq!(m.to_dense().unwrap().to_rows(), vec![vec![0.0, 2.5]]);
    }

    #[test]
    fn tasep_table() {
        let g = crate::generators::build_tasep_generator(2, 2, 100).unwrap();
        let mut out = Vec::new();
        write_tasep_states(&mut out, &g).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("index,positions\n0,-1;-2\n"));
        assert_eq!(text.lines().count(), g.dim + 1);
    }
}
