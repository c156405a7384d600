//! Base samples for candidate generation: Gaussian or quasi-random streams,
//! optionally orthogonalized and mirrored.

pub mod halton;
pub mod normal;
pub mod sobol;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{BaseSampler, Mirrored};
use crate::error::{Error, Result};
use crate::rng::RunRng;

pub use normal::inverse_normal_cdf;

/// Residual norm below which a Gram–Schmidt direction counts as degenerate.
pub const DEGENERATE_RESIDUAL: f64 = 1e-12;
/// Resampling attempts for a degenerate direction before giving up.
pub const MAX_RESAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuasiSequence {
    Sobol,
    Halton,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerSpec {
    pub base: BaseSampler,
    pub mirrored: Mirrored,
    pub orthogonal: bool,
    pub dimension: usize,
}

impl SamplerSpec {
    pub fn new(
        base: BaseSampler,
        mirrored: Mirrored,
        orthogonal: bool,
        dimension: usize,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("sampler dimension must be at least 1".into()));
        }
        let limit = match base {
            BaseSampler::Gaussian => usize::MAX,
            BaseSampler::Sobol => sobol::MAX_DIMENSION,
            BaseSampler::Halton => halton::MAX_DIMENSION,
        };
        if dimension > limit {
            return Err(Error::InvalidArgument(format!(
                "{base:?} sampling supports at most {limit} dimensions, got {dimension}"
            )));
        }
        Ok(SamplerSpec { base, mirrored, orthogonal, dimension })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaseSample {
    pub z: DVector<f64>,
    pub pair_id: Option<usize>,
}

pub fn next_gaussian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Point `index` of the chosen low-discrepancy sequence in the unit cube.
/// Index 0 is the origin of both sequences and is rejected.
pub fn unit_point(seq: QuasiSequence, index: u64, d: usize) -> Result<Vec<f64>> {
    if index == 0 {
        return Err(Error::InvalidArgument("quasi-random streams start at index 1".into()));
    }
    match seq {
        QuasiSequence::Halton if d <= halton::MAX_DIMENSION => Ok(halton::point(index, d)),
        QuasiSequence::Sobol if d <= sobol::MAX_DIMENSION => Ok(sobol::Sobol::new(d).point(index)),
        _ => Err(Error::InvalidArgument(format!("{seq:?} does not support {d} dimensions"))),
    }
}

/// Quasi-random point mapped coordinate-wise through the normal quantile function.
pub fn next_quasirandom(seq: QuasiSequence, index: u64, d: usize) -> Result<DVector<f64>> {
    let u = unit_point(seq, index, d)?;
    Ok(DVector::from_iterator(d, u.into_iter().map(inverse_normal_cdf)))
}

pub fn mirror_pair(z: DVector<f64>, pair_id: usize) -> (BaseSample, BaseSample) {
    let neg = -&z;
    (
        BaseSample { z, pair_id: Some(pair_id) },
        BaseSample { z: neg, pair_id: Some(pair_id) },
    )
}

/// Gram–Schmidt on the first `min(k, d)` vectors, restoring each vector's
/// original length afterwards. Vectors beyond `d` pass through unchanged.
/// Degenerate directions are redrawn from `rng`.
pub fn orthonormalize<R: Rng + ?Sized>(
    batch: Vec<DVector<f64>>,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let Some(d) = batch.first().map(|v| v.len()) else {
        return Ok(batch);
    };
    if batch.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidArgument("orthonormalize: vectors of unequal length".into()));
    }
    let k = batch.len().min(d);
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(batch.len());
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut rest = batch.into_iter();
    for _ in 0..k {
        let mut v = rest.next().expect("k <= batch length");
        let mut attempts = 0;
        loop {
            let norm = v.norm();
            let mut u = v.clone();
            // Two passes of modified Gram-Schmidt keep the loss of orthogonality at rounding level.
            for _ in 0..2 {
                for q in &basis {
                    let proj = q.dot(&u);
                    u.axpy(-proj, q, 1.0);
                }
            }
            let residual = u.norm();
            if norm.is_finite() && residual >= DEGENERATE_RESIDUAL * norm.max(1.0) && norm > 0.0 {
                u /= residual;
                out.push(&u * norm);
                basis.push(u);
                break;
            }
            attempts += 1;
            if attempts > MAX_RESAMPLES {
                return Err(Error::Numerical(
                    "orthogonal sampling: could not draw a linearly independent direction".into(),
                ));
            }
            v = next_gaussian(rng, d);
        }
    }
    out.extend(rest);
    Ok(out)
}

/// Stateful base-sample stream for one run.
#[derive(Clone, Debug)]
pub struct Sampler {
    spec: SamplerSpec,
    rng: RunRng,
    quasi_index: u64,
    sobol: Option<sobol::Sobol>,
}

impl Sampler {
    pub fn new(spec: SamplerSpec, rng: RunRng) -> Self {
        let sobol = (spec.base == BaseSampler::Sobol).then(|| sobol::Sobol::new(spec.dimension));
        Sampler { spec, rng, quasi_index: 1, sobol }
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    pub fn rng_mut(&mut self) -> &mut RunRng {
        &mut self.rng
    }

    pub fn next_base(&mut self) -> DVector<f64> {
        let d = self.spec.dimension;
        match self.spec.base {
            BaseSampler::Gaussian => next_gaussian(&mut self.rng, d),
            BaseSampler::Halton => {
                let idx = self.quasi_index;
                self.quasi_index += 1;
                DVector::from_iterator(d, halton::point(idx, d).into_iter().map(inverse_normal_cdf))
            }
            BaseSampler::Sobol => {
                let idx = self.quasi_index;
                self.quasi_index += 1;
                let p = self.sobol.as_ref().expect("sobol generator").point(idx);
                DVector::from_iterator(d, p.into_iter().map(inverse_normal_cdf))
            }
        }
    }

    /// `lambda` base samples. With mirroring only `ceil(lambda / 2)` draws are
    /// taken; each is followed by its negation, and pair ids count from 0.
    pub fn sample(&mut self, lambda: usize) -> Result<Vec<BaseSample>> {
        let mirrored = self.spec.mirrored != Mirrored::Off;
        let draws = if mirrored { lambda.div_ceil(2) } else { lambda };
        let mut zs: Vec<DVector<f64>> = (0..draws).map(|_| self.next_base()).collect();
        if self.spec.orthogonal {
            zs = orthonormalize(zs, &mut self.rng)?;
        }
        if !mirrored {
            return Ok(zs.into_iter().map(|z| BaseSample { z, pair_id: None }).collect());
        }
        let mut out = Vec::with_capacity(lambda);
        for (id, z) in zs.into_iter().enumerate() {
            let (a, b) = mirror_pair(z, id);
            out.push(a);
            if out.len() < lambda {
                out.push(b);
            }
        }
        Ok(out)
    }
}
