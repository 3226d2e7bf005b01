use crate::error::{Error, Result};
use crate::model::TypeDistribution;
use crate::scalar::Scalar;

pub const DEFAULT_RESOLUTION: usize = 400;

/// One slice `[lo, hi)` of the aversion support with its probability mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell<S> {
    pub lo: S,
    pub hi: S,
    pub mid: S,
    pub mass: S,
}

/// Equal-width discretization of the aversion support `[0, T]`. Every claim
/// about a type is evaluated at its cell midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct TGrid<S> {
    cells: Vec<Cell<S>>,
    t_max: S,
}

impl<S: Scalar> TGrid<S> {
    pub fn midpoint(dist: &TypeDistribution<S>, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::Parameter("grid resolution must be positive".into()));
        }
        let t_max = dist.t_max();
        let m = S::from_int(resolution as i64);
        let two = S::from_int(2);
        let mut cells = Vec::with_capacity(resolution);
        for k in 0..resolution {
            let lo = t_max * S::from_int(k as i64) / m;
            let hi = t_max * S::from_int(k as i64 + 1) / m;
            let mass = dist.cdf(hi) - dist.cdf(lo);
            if mass <= S::zero() {
                return Err(Error::Parameter(format!("cell {k} of the type grid has no mass")));
            }
            cells.push(Cell { lo, hi, mid: (lo + hi) / two, mass });
        }
        Ok(Self { cells, t_max })
    }

    pub fn resolution(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Cell<S>] {
        &self.cells
    }

    pub fn mid(&self, cell: usize) -> S {
        self.cells[cell].mid
    }

    pub fn mass(&self, cell: usize) -> S {
        self.cells[cell].mass
    }

    pub fn t_max(&self) -> S {
        self.t_max
    }

    /// Cell containing `t`; values outside the support land in the edge cells.
    pub fn locate(&self, t: f64) -> usize {
        let m = self.cells.len();
        let x = t / self.t_max.to_f64_lossy() * m as f64;
        if x.is_nan() || x < 0.0 {
            0
        } else {
            (x as usize).min(m - 1)
        }
    }

    /// Cell whose midpoint is closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let c = self.locate(t);
        let d = |k: usize| (self.cells[k].mid.to_f64_lossy() - t).abs();
        [c.saturating_sub(1), c, (c + 1).min(self.cells.len() - 1)]
            .into_iter()
            .min_by(|a, b| d(*a).total_cmp(&d(*b)))
            .unwrap_or(c)
    }
}
