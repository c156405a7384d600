//! Coordinate-wise repair of candidates that leave the search box.
//!
//! Only infeasible coordinates are touched. Mirror and toroidal corrections
//! are written as periodic folds so violations larger than one box width are
//! still mapped inside.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// COTN draws a one-sided normal with this fraction of the box width as scale.
pub const COTN_SCALE: f64 = 1.0 / 3.0;
pub const COTN_MAX_DRAWS: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundCorrection {
    #[default]
    None,
    /// Uniform resample inside the box.
    Ur,
    /// Mirror about the violated bound.
    Mcs,
    /// Complete one-tailed normal, centered on the violated bound.
    Cotn,
    /// Saturation to the nearest bound.
    Scs,
    /// Toroidal wrap-around.
    Tcs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchBox {
    lb: DVector<f64>,
    ub: DVector<f64>,
}

impl SearchBox {
    pub fn new(lb: DVector<f64>, ub: DVector<f64>) -> Result<Self> {
        if lb.len() != ub.len() || lb.is_empty() {
            return Err(Error::InvalidArgument("box bounds must be non-empty and equal length".into()));
        }
        for (l, u) in lb.iter().zip(ub.iter()) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidArgument(format!("invalid box interval [{l}, {u}]")));
            }
        }
        Ok(SearchBox { lb, ub })
    }

    pub fn uniform(d: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(DVector::from_element(d, lower), DVector::from_element(d, upper))
    }

    pub fn dim(&self) -> usize {
        self.lb.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lb
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.ub
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.ub - &self.lb
    }

    /// Euclidean length of the box diagonal.
    pub fn diagonal(&self) -> f64 {
        self.widths().norm()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lb.iter().zip(self.ub.iter()))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lb.iter().zip(self.ub.iter()).map(|(l, u)| l + (u - l) * rng.random::<f64>()),
        )
    }
}

fn mirror_fold(x: f64, lb: f64, ub: f64) -> f64 {
    let w = ub - lb;
    let mut r = (x - lb).rem_euclid(2.0 * w);
    if r > w {
        r = 2.0 * w - r;
    }
    (lb + r).clamp(lb, ub)
}

fn toroidal_wrap(x: f64, lb: f64, ub: f64) -> f64 {
    let w = ub - lb;
    (lb + (x - lb).rem_euclid(w)).clamp(lb, ub)
}

fn one_tailed_normal<R: Rng + ?Sized>(bound: f64, inward: f64, lb: f64, ub: f64, rng: &mut R) -> f64 {
    let scale = (ub - lb) * COTN_SCALE;
    let mut v = bound;
    for _ in 0..COTN_MAX_DRAWS {
        let n: f64 = rng.sample(StandardNormal);
        v = bound + inward * n.abs() * scale;
        if v >= lb && v <= ub {
            return v;
        }
    }
    v.clamp(lb, ub)
}

/// Applies `strategy` to every infeasible coordinate of `x`.
pub fn correct<R: Rng + ?Sized>(
    x: &DVector<f64>,
    bounds: &SearchBox,
    strategy: BoundCorrection,
    rng: &mut R,
) -> DVector<f64> {
    let mut out = x.clone();
    if strategy == BoundCorrection::None {
        return out;
    }
    for i in 0..out.len() {
        let (l, u) = (bounds.lb[i], bounds.ub[i]);
        let v = out[i];
        if v >= l && v <= u {
            continue;
        }
        out[i] = match strategy {
            BoundCorrection::None => v,
            BoundCorrection::Ur => l + (u - l) * rng.random::<f64>(),
            BoundCorrection::Mcs => mirror_fold(v, l, u),
            BoundCorrection::Cotn => {
                if v > u {
                    one_tailed_normal(u, -1.0, l, u, rng)
                } else {
                    one_tailed_normal(l, 1.0, l, u, rng)
                }
            }
            BoundCorrection::Scs => v.clamp(l, u),
            BoundCorrection::Tcs => toroidal_wrap(v, l, u),
        };
    }
    out
}
