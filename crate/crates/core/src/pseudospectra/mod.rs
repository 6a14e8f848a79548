//! Pseudospectra: `s_min(zI - A)` landscapes, level curves and
//! eigenvalue-sensitivity reports.

mod contour;
mod eig;
mod grid;
mod smin;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use contour::{contour_levels, write_contour_csv, Polyline};
pub use eig::{a0_report, a1_null_vector, a1_report, eig_sensitivity_report, EigSensitivityReport};
pub use grid::{grid, grid_with, to_log10, GridOptions, PseudospectrumGrid, UNDERFLOW_SENTINEL};
pub use smin::{smin, SminEngine, SminMethod, SminOptions, Workspace};

use crate::error::{Error, Result};
use crate::generators::{build_a0, build_a1, build_tasep_generator, DEFAULT_STATE_CAP};
use crate::matrix::Matrix;

/// Figure-style grid set-ups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `A0` at N = 100.
    Almond,
    /// `A1` at N = 100.
    Track,
    /// TASEP generator with K = 3 particles, D = 15.
    Seedpod,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "almond" => Ok(Self::Almond),
            "track" => Ok(Self::Track),
            "seedpod" => Ok(Self::Seedpod),
            _ => Err(Error::invalid(format!(
                "unknown preset '{s}' (expected almond, track or seedpod)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetSetup {
    pub matrix: Matrix<f64>,
    pub label: String,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
}

pub const PRESET_N: usize = 100;
pub const PRESET_TASEP: (usize, usize) = (3, 15);

impl Preset {
    pub fn setup(self) -> Result<PresetSetup> {
        let n = PRESET_N as f64;
        Ok(match self {
            Self::Almond => PresetSetup {
                matrix: build_a0(PRESET_N)?.to_f64().to_dense(),
                label: format!("A0 N={PRESET_N}"),
                re_range: (-2.2 * n, 0.2 * n),
                im_range: (-0.6 * n, 0.6 * n),
            },
            Self::Track => PresetSetup {
                matrix: build_a1(PRESET_N)?.to_f64().to_dense(),
                label: format!("A1 N={PRESET_N}"),
                re_range: (-1.2 * n, 1.2 * n),
                im_range: (-0.7 * n, 0.7 * n),
            },
            Self::Seedpod => {
                let (k, d) = PRESET_TASEP;
                PresetSetup {
                    matrix: build_tasep_generator(k, d, DEFAULT_STATE_CAP)?.to_dense(),
                    label: format!("TASEP K={k} D={d}"),
                    re_range: (-8.0, 2.0),
                    im_range: (-4.0, 4.0),
                }
            }
        })
    }
}
