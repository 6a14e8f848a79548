//! Marching-squares extraction of ε-level curves from a grid.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudospectra::grid::PseudospectrumGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    /// ε, not its logarithm.
    pub level: f64,
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

/// A crossing point lives on a grid edge: `(i, j, false)` joins node
/// `(i, j)` to `(i, j + 1)`, `(i, j, true)` joins it to `(i + 1, j)`.
type EdgeKey = (usize, usize, bool);

fn crossing(g: &PseudospectrumGrid, key: EdgeKey, level: f64) -> (f64, f64) {
    let (i, j, vertical) = key;
    let (i2, j2) = if vertical { (i + 1, j) } else { (i, j + 1) };
    let (v0, v1) = (g.values[i][j], g.values[i2][j2]);
    let s = ((level - v0) / (v1 - v0)).clamp(0.0, 1.0);
    let (x0, y0) = (g.re(j), g.im(i));
    let (x1, y1) = (g.re(j2), g.im(i2));
    (x0 + s * (x1 - x0), y0 + s * (y1 - y0))
}

/// Polylines bounding `{z : s_min(zI - A) <= ε}` for each ε in `levels`.
/// Levels must be positive and sorted in descending order.
pub fn contour_levels(g: &PseudospectrumGrid, levels: &[f64]) -> Result<Vec<Polyline>> {
    g.validate()?;
    if let Some(e) = levels.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::invalid(format!("contour level {e} must be positive and finite")));
    }
    if levels.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("contour levels must be sorted in descending order"));
    }
    let mut out = Vec::new();
    for &eps in levels {
        out.extend(single_level(g, eps));
    }
    Ok(out)
}

fn single_level(g: &PseudospectrumGrid, eps: f64) -> Vec<Polyline> {
    let level = eps.log10();
    let inside = |i: usize, j: usize| g.values[i][j] <= level;
    let mut links: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
    let mut connect = |a: EdgeKey, b: EdgeKey| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..g.n_im - 1 {
        for j in 0..g.n_re - 1 {
            // corners counter-clockwise from (i, j); edges between them
            let c = [inside(i, j), inside(i, j + 1), inside(i + 1, j + 1), inside(i + 1, j)];
            let e = [(i, j, false), (i, j + 1, true), (i + 1, j, false), (i, j, true)];
            let code = c.iter().enumerate().fold(0u8, |acc, (k, &b)| acc | ((b as u8) << k));
            match code {
                0 | 15 => {}
                5 | 10 => {
                    let centre =
                        (g.values[i][j] + g.values[i][j + 1] + g.values[i + 1][j + 1] + g.values[i + 1][j]) / 4.0;
                    let centre_in = centre <= level;
                    // join the outside corners' edges when the centre is inside
                    if (code == 5) == centre_in {
                        connect(e[0], e[1]);
                        connect(e[2], e[3]);
                    } else {
                        connect(e[3], e[0]);
                        connect(e[1], e[2]);
                    }
                }
                _ => {
                    let cut: Vec<EdgeKey> = (0..4).filter(|&k| c[k] != c[(k + 1) % 4]).map(|k| e[k]).collect();
                    connect(cut[0], cut[1]);
                }
            }
        }
    }
    let mut used: BTreeMap<EdgeKey, bool> = links.keys().map(|&k| (k, false)).collect();
    let mut lines = Vec::new();
    let trace = |start: EdgeKey, used: &mut BTreeMap<EdgeKey, bool>| -> Polyline {
        let mut keys = vec![start];
        used.insert(start, true);
        let mut current = start;
        loop {
            let next = links[&current].iter().copied().find(|k| !used[k]);
            match next {
                Some(k) => {
                    used.insert(k, true);
                    keys.push(k);
                    current = k;
                }
                None => break,
            }
        }
        let closed = keys.len() > 2 && links[&current].contains(&start);
        let mut points: Vec<(f64, f64)> = keys.iter().map(|&k| crossing(g, k, level)).collect();
        if closed {
            points.push(points[0]);
        }
        Polyline {
            level: eps,
            points,
            closed,
        }
    };
    // open chains start at boundary edges (one neighbour)
    let ends: Vec<EdgeKey> = links.iter().filter(|(_, v)| v.len() == 1).map(|(k, _)| *k).collect();
    for k in ends {
        if !used[&k] {
            lines.push(trace(k, &mut used));
        }
    }
    let keys: Vec<EdgeKey> = links.keys().copied().collect();
    for k in keys {
        if !used[&k] {
            lines.push(trace(k, &mut used));
        }
    }
    lines
}

/// CSV rows `level,polyline_id,re,im`.
pub fn write_contour_csv(mut w: impl Write, lines: &[Polyline]) -> Result<()> {
    writeln!(w, "level,polyline_id,re,im")?;
    for (id, line) in lines.iter().enumerate() {
        for &(x, y) in &line.points {
            writeln!(w, "{},{id},{x},{y}", line.level)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, f: impl Fn(f64, f64) -> f64) -> PseudospectrumGrid {
        let mut g = PseudospectrumGrid {
            re_range: (-1.0, 1.0),
            im_range: (-1.0, 1.0),
            n_re: n,
            n_im: n,
            values: vec![vec![0.0; n]; n],
            matrix_label: "test".into(),
        };
        for i in 0..n {
            for j in 0..n {
                g.values[i][j] = f(g.re(j), g.im(i));
            }
        }
        g
    }

    #[test]
    fn constant_grid_has_no_contours() {
        let g = field(5, |_, _| -1.0);
        assert!(contour_levels(&g, &[1.0, 1e-3]).unwrap().is_empty());
    }

    #[test]
    fn basin_gives_one_loop_per_level() {
        let g = field(41, |x, y| (x * x + y * y + 1e-3).log10());
        let lines = contour_levels(&g, &[0.5, 0.1]).unwrap();
        assert_eq!(lines.len(), 2);
        for l in &lines {
            assert!(l.closed);
            assert_eq!(l.points.first(), l.points.last());
            for &(x, y) in &l.points {
                let r = (x * x + y * y).sqrt();
                assert!((r - (l.level - 1e-3).sqrt()).abs() < 0.03, "r={r}");
            }
        }
    }

    #[test]
    fn open_curve_hits_the_boundary() {
        let g = field(11, |x, _| x);
        let lines = contour_levels(&g, &[1.0]).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(!lines[0].closed);
        assert_eq!(lines[0].points.len(), 11);
        assert!(lines[0].points.iter().all(|p| p.0.abs() < 1e-12));
    }

    #[test]
    fn saddle_cells_resolve() {
        let g = field(3, |x, y| {
            if x * y > 0.0 {
                -1.0
            } else if x * y < 0.0 {
                1.0
            } else {
                0.1
            }
        });
        let lines = contour_levels(&g, &[1.0]).unwrap();
        assert!(!lines.is_empty());
    }

    #[test]
    fn level_validation() {
        let g = field(3, |x, _| x);
        assert!(contour_levels(&g, &[0.1, 1.0]).is_err());
        assert!(contour_levels(&g, &[-1.0]).is_err());
    }

    #[test]
    fn csv_rows() {
        let line = Polyline {
            level: 0.1,
            points: vec![(0.0, 1.0), (0.5, 1.5)],
            closed: false,
        };
        let mut out = Vec::new();
        write_contour_csv(&mut out, &[line]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "level,polyline_id,re,im\n0.1,0,0,1\n0.1,0,0.5,1.5\n"
        );
    }
}
