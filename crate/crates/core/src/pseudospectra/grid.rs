use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pseudospectra::smin::{SminEngine, SminOptions};

/// Stored in place of `log10 s_min` when `s_min < 1e-300`.
pub const UNDERFLOW_SENTINEL: f64 = -300.0;

/// `log10 s_min(zI - A)` sampled on a uniform rectangular grid.
/// `values[i][j]` belongs to `z = re(j) + i im(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudospectrumGrid {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
    pub values: Vec<Vec<f64>>,
    pub matrix_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub smin: SminOptions,
    /// Size of the worker pool; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Retry nodes where the iterative method stalls with the dense SVD.
    pub svd_fallback: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            smin: SminOptions::default(),
            threads: None,
            svd_fallback: true,
        }
    }
}

fn axis(range: (f64, f64), n: usize, k: usize) -> f64 {
    if k + 1 == n {
        return range.1;
    }
    range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64
}

pub fn to_log10(s: f64) -> f64 {
    if s.is_finite() && s >= 1e-300 {
        s.log10()
    } else if s.is_infinite() && s > 0.0 {
        f64::MAX.log10()
    } else {
        UNDERFLOW_SENTINEL
    }
}

fn check_box(re_range: (f64, f64), im_range: (f64, f64), n_re: usize, n_im: usize) -> Result<()> {
    if n_re < 2 || n_im < 2 {
        return Err(Error::invalid(format!(
            "grid resolution must be at least 2x2, got {n_re}x{n_im}"
        )));
    }
    for (name, (lo, hi)) in [("real", re_range), ("imaginary", im_range)] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!(
                "{name} range [{lo}, {hi}] is empty or not finite"
            )));
        }
    }
    Ok(())
}

impl PseudospectrumGrid {
    pub fn re(&self, j: usize) -> f64 {
        axis(self.re_range, self.n_re, j)
    }

    pub fn im(&self, i: usize) -> f64 {
        axis(self.im_range, self.n_im, i)
    }

    pub fn z(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re(j), self.im(i))
    }

    /// Nodes with `s_min <= eps`, row-major.
    pub fn node_set(&self, eps: f64) -> Vec<bool> {
        let level = eps.log10();
        self.values.iter().flatten().map(|&v| v <= level).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid nodes that are strict local minima over their 8-neighbourhood.
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_im {
            for j in 0..self.n_re {
                let v = self.values[i][j];
                let mut is_min = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= self.n_im as i64 || jj >= self.n_re as i64 {
                            continue;
                        }
                        if self.values[ii as usize][jj as usize] <= v {
                            is_min = false;
                        }
                    }
                }
                if is_min {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        check_box(self.re_range, self.im_range, self.n_re, self.n_im)?;
        if self.values.len() != self.n_im || self.values.iter().any(|r| r.len() != self.n_re) {
            return Err(Error::Invariant(format!(
                "grid shape does not match {}x{}",
                self.n_im, self.n_re
            )));
        }
        if let Some(v) = self
            .values
            .iter()
            .flatten()
            .find(|v| !v.is_finite() || **v < UNDERFLOW_SENTINEL)
        {
            return Err(Error::Invariant(format!(
                "grid value {v} is neither finite nor the sentinel"
            )));
        }
        Ok(())
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# {} {} {}", self.re_range.0, self.re_range.1, self.n_re)?;
        writeln!(w, "# {} {} {}", self.im_range.0, self.im_range.1, self.n_im)?;
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn from_csv(r: impl BufRead, label: &str) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut header = |name: &str| -> Result<((f64, f64), usize)> {
            let (k, line) = lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing {name} header"),
            })?;
            let line = line?;
            let body = line.strip_prefix('#').ok_or_else(|| Error::Parse {
                line: k + 1,
                msg: format!("expected '# min max n' {name} header"),
            })?;
            let parts: Vec<&str> = body.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: format!("{name} header needs 3 fields"),
                });
            }
            let num = |s: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: k + 1,
                    msg: format!("bad number '{s}'"),
                })
            };
            let n = parts[2].parse::<usize>().map_err(|_| Error::Parse {
                line: k + 1,
                msg: format!("bad resolution '{}'", parts[2]),
            })?;
            Ok(((num(parts[0])?, num(parts[1])?), n))
        };
        let (re_range, n_re) = header("real")?;
        let (im_range, n_im) = header("imaginary")?;
        check_box(re_range, im_range, n_re, n_im).map_err(|e| Error::Parse {
            line: 2,
            msg: e.to_string(),
        })?;
        let mut values = Vec::with_capacity(n_im.min(1 << 16));
        for (k, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: k + 1,
                        msg: format!("bad value '{s}'"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != n_re {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: format!("expected {n_re} values, found {}", row.len()),
                });
            }
            values.push(row);
        }
        if values.len() != n_im {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {n_im} rows, found {}", values.len()),
            });
        }
        let g = Self {
            re_range,
            im_range,
            n_re,
            n_im,
            values,
            matrix_label: label.to_string(),
        };
        g.validate().map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(g)
    }
}

/// `log10 s_min(zI - A)` on a uniform grid with default options.
pub fn grid(
    a: &Matrix<f64>,
    re_range: (f64, f64),
    im_range: (f64, f64),
    n_re: usize,
    n_im: usize,
    label: &str,
) -> Result<PseudospectrumGrid> {
    grid_with(a, re_range, im_range, n_re, n_im, label, &GridOptions::default())
}

pub fn grid_with(
    a: &Matrix<f64>,
    re_range: (f64, f64),
    im_range: (f64, f64),
    n_re: usize,
    n_im: usize,
    label: &str,
    opts: &GridOptions,
) -> Result<PseudospectrumGrid> {
    check_box(re_range, im_range, n_re, n_im)?;
    let engine = SminEngine::new(a, opts.smin)?;
    let row = |i: usize, ws: &mut crate::pseudospectra::smin::Workspace| -> Vec<f64> {
        let y = axis(im_range, n_im, i);
        (0..n_re)
            .map(|j| {
                let z = Complex64::new(axis(re_range, n_re, j), y);
                let s = match engine.smin(z, ws) {
                    Ok(s) => s,
                    Err(Error::NoConvergence { .. }) if opts.svd_fallback => engine.smin_svd(z),
                    Err(_) => 0.0,
                };
                to_log10(s)
            })
            .collect()
    };
    let compute = || -> Vec<Vec<f64>> {
        (0..n_im)
            .into_par_iter()
            .map_init(|| engine.workspace(), |ws, i| row(i, ws))
            .collect()
    };
    let values = crate::parallel::with_threads(opts.threads, compute)?;
    Ok(PseudospectrumGrid {
        re_range,
        im_range,
        n_re,
        n_im,
        values,
        matrix_label: label.to_string(),
    })
}
