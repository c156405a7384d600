//! A BBOB-style suite of twelve seeded test functions on `[-5, 5]^d`.
//!
//! Each instance is a shifted (and for the non-separable functions, rotated)
//! copy of a plain raw function: `f(x) = raw(R (x - x_opt)) + f_opt`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::boundary::SearchBox;
use crate::cma::Objective;
use crate::error::{Error, Result};
use crate::rng::{mix_seed, stream};

pub const LOWER: f64 = -5.0;
pub const UPPER: f64 = 5.0;
pub const MAX_DIMENSION: usize = 40;
const ELLIPSOID_CONDITIONING: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionId {
    Sphere,
    SepEllipsoid,
    SepRastrigin,
    LinearSlope,
    AttractiveSector,
    Rosenbrock,
    RotEllipsoid,
    BentCigar,
    SharpRidge,
    DifferentPowers,
    RotRastrigin,
    Schaffers10,
}

impl FunctionId {
    pub const ALL: [FunctionId; 12] = [
        FunctionId::Sphere,
        FunctionId::SepEllipsoid,
        FunctionId::SepRastrigin,
        FunctionId::LinearSlope,
        FunctionId::AttractiveSector,
        FunctionId::Rosenbrock,
        FunctionId::RotEllipsoid,
        FunctionId::BentCigar,
        FunctionId::SharpRidge,
        FunctionId::DifferentPowers,
        FunctionId::RotRastrigin,
        FunctionId::Schaffers10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sphere",
            FunctionId::SepEllipsoid => "sep_ellipsoid",
            FunctionId::SepRastrigin => "sep_rastrigin",
            FunctionId::LinearSlope => "linear_slope",
            FunctionId::AttractiveSector => "attractive_sector",
            FunctionId::Rosenbrock => "rosenbrock",
            FunctionId::RotEllipsoid => "rot_ellipsoid",
            FunctionId::BentCigar => "bent_cigar",
            FunctionId::SharpRidge => "sharp_ridge",
            FunctionId::DifferentPowers => "different_powers",
            FunctionId::RotRastrigin => "rot_rastrigin",
            FunctionId::Schaffers10 => "schaffers10",
        }
    }

    pub fn is_rotated(self) -> bool {
        matches!(
            self,
            FunctionId::AttractiveSector
                | FunctionId::RotEllipsoid
                | FunctionId::BentCigar
                | FunctionId::SharpRidge
                | FunctionId::DifferentPowers
                | FunctionId::RotRastrigin
                | FunctionId::Schaffers10
        )
    }

    fn index(self) -> u64 {
        FunctionId::ALL.iter().position(|&f| f == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFunction(s.to_owned()))
    }
}

fn ellipsoid(z: &[f64]) -> f64 {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| ELLIPSOID_CONDITIONING.powf(i as f64 / (d - 1) as f64) * v * v)
        .sum()
}

fn rastrigin(z: &[f64]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    10.0 * z.len() as f64 + z.iter().map(|v| v * v - 10.0 * (tau * v).cos()).sum::<f64>()
}

/// Raw function value at transformed coordinates `z`. `x_opt` is consulted by
/// the functions whose shape depends on the optimum's orthant.
pub fn raw(fid: FunctionId, z: &[f64], x_opt: &[f64]) -> f64 {
    let d = z.len();
    match fid {
        FunctionId::Sphere => z.iter().map(|v| v * v).sum(),
        FunctionId::SepEllipsoid | FunctionId::RotEllipsoid => ellipsoid(z),
        FunctionId::SepRastrigin | FunctionId::RotRastrigin => rastrigin(z),
        FunctionId::LinearSlope => z
            .iter()
            .zip(x_opt)
            .enumerate()
            .map(|(i, (zi, xo))| {
                let s = xo.signum() * 10f64.powf(i as f64 / (d - 1) as f64);
                5.0 * s.abs() - s * zi
            })
            .sum(),
        FunctionId::AttractiveSector => z
            .iter()
            .zip(x_opt)
            .map(|(zi, xo)| {
                let s = if zi * xo > 0.0 { 100.0 } else { 1.0 };
                (s * zi).powi(2)
            })
            .sum::<f64>()
            .powf(0.9),
        FunctionId::Rosenbrock => z
            .windows(2)
            .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
            .sum(),
        FunctionId::BentCigar => z[0] * z[0] + 1e6 * z[1..].iter().map(|v| v * v).sum::<f64>(),
        FunctionId::SharpRidge => {
            z[0] * z[0] + 100.0 * z[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
        }
        FunctionId::DifferentPowers => z
            .iter()
            .enumerate()
            .map(|(i, v)| v.abs().powf(2.0 + 4.0 * i as f64 / (d - 1) as f64))
            .sum::<f64>()
            .sqrt(),
        FunctionId::Schaffers10 => {
            let mean = z
                .windows(2)
                .map(|w| {
                    let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
                    s.sqrt() + s.sqrt() * (50.0 * s.powf(0.2)).sin().powi(2)
                })
                .sum::<f64>()
                / (d - 1) as f64;
            mean * mean
        }
    }
}

/// Orthogonal factor of a seeded Gaussian matrix.
fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = DMatrix::<f64>::zeros(d, d);
    for j in 0..d {
        let mut v = g.column(j).into_owned();
        for _ in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&v);
                v.axpy(-proj, &q.column(k).into_owned(), 1.0);
            }
        }
        let n = v.norm();
        q.set_column(j, &(v / n));
    }
    q
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub fid: FunctionId,
    pub d: usize,
    pub iid: u64,
    pub x_opt: DVector<f64>,
    pub f_opt: f64,
    /// Identity for separable functions.
    pub rotation: DMatrix<f64>,
    pub bounds: SearchBox,
    evals: u64,
}

impl ProblemInstance {
    pub fn new(fid: FunctionId, d: usize, iid: u64) -> Result<Self> {
        if !(2..=MAX_DIMENSION).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "benchmark dimension must be in 2..={MAX_DIMENSION}, got {d}"
            )));
        }
        let mut rng = stream(mix_seed(iid, fid.index()), 0);
        let x_opt = if fid == FunctionId::LinearSlope {
            DVector::from_fn(d, |_, _| if rng.random::<bool>() { UPPER } else { LOWER })
        } else {
            DVector::from_fn(d, |_, _| rng.random_range(-4.0..=4.0))
        };
        let f_opt = (rng.random_range(-100.0..=100.0f64) * 100.0).round() / 100.0;
        let rotation = if fid.is_rotated() {
            random_rotation(d, &mut rng)
        } else {
            DMatrix::identity(d, d)
        };
        Ok(ProblemInstance {
            fid,
            d,
            iid,
            x_opt,
            f_opt,
            rotation,
            bounds: SearchBox::uniform(d, LOWER, UPPER)?,
            evals: 0,
        })
    }

    pub fn from_name(name: &str, d: usize, iid: u64) -> Result<Self> {
        Self::new(name.parse()?, d, iid)
    }

    /// The coordinates handed to the raw function.
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        match self.fid {
            FunctionId::LinearSlope => x
                .iter()
                .zip(self.x_opt.iter())
                .map(|(xi, xo)| if xo * xi < UPPER * UPPER { *xi } else { *xo })
                .collect(),
            FunctionId::Rosenbrock => {
                let scale = 1f64.max((self.d as f64).sqrt() / 8.0);
                (x - &self.x_opt).iter().map(|v| scale * v + 1.0).collect()
            }
            _ if self.fid.is_rotated() => (&self.rotation * (x - &self.x_opt)).iter().copied().collect(),
            _ => (x - &self.x_opt).iter().copied().collect(),
        }
    }

    /// Function value without touching the evaluation counter.
    pub fn value(&self, x: &[f64]) -> f64 {
        raw(self.fid, &self.transform(x), self.x_opt.as_slice()) + self.f_opt
    }

    pub fn evaluations(&self) -> u64 {
        self.evals
    }
}

impl Objective for ProblemInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn evaluate(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        self.value(x)
    }

    fn search_box(&self) -> SearchBox {
        self.bounds.clone()
    }

    fn optimum(&self) -> Option<f64> {
        Some(self.f_opt)
    }
}
