//! Deterministic synthetic objects and probes for simulations and tests.

use ndarray::Array2;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ComplexImage;

/// Built-in synthetic object families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    /// All-ones image.
    Constant,
    /// Amplitude ramp along the columns with a phase ramp along the rows;
    /// nonvanishing everywhere.
    Ramp,
    /// Per-pixel random amplitude in [0.5, 1.5) with uniform random phase;
    /// nonvanishing everywhere.
    RandomComplex,
    /// Two independent smooth random fields as real and imaginary parts
    /// (band-limited Fourier synthesis), a stand-in for natural test images.
    CibLike,
}

impl ObjectKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "ramp" => Ok(Self::Ramp),
            "random_complex" => Ok(Self::RandomComplex),
            "cib_like" => Ok(Self::CibLike),
            other => Err(Error::Parse(format!("unknown object kind {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Ramp => "ramp",
            Self::RandomComplex => "random_complex",
            Self::CibLike => "cib_like",
        }
    }
}

/// Smooth random field on an `n x n` grid: a few low-frequency cosine modes
/// with seeded random amplitudes and phases, rescaled to roughly [lo, hi].
fn smooth_field(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Array2<f64> {
    let cutoff = (n / 8).max(2);
    let mut field = Array2::<f64>::zeros((n, n));
    for k1 in 0..=cutoff {
        for k2 in 0..=cutoff {
            let amp = rng.random_range(-1.0..1.0) / (1.0 + (k1 * k1 + k2 * k2) as f64);
            let ph1 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            let ph2 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            for r in 0..n {
                for c in 0..n {
                    let x = 2.0 * std::f64::consts::PI * (k1 * c) as f64 / n as f64 + ph1;
                    let y = 2.0 * std::f64::consts::PI * (k2 * r) as f64 / n as f64 + ph2;
                    field[(r, c)] += amp * x.cos() * y.cos();
                }
            }
        }
    }
    let min = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    field.mapv(|v| lo + (v - min) / span * (hi - lo))
}

/// Deterministic synthetic object of side `n`.
pub fn object(kind: ObjectKind, n: usize, seed: u64) -> Result<ComplexImage> {
    if n == 0 {
        return Err(Error::InvalidParameter("object size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        ObjectKind::Constant => ComplexImage::filled(n, n, Complex64::new(1.0, 0.0)),
        ObjectKind::Ramp => {
            let denom = (n.max(2) - 1) as f64;
            ComplexImage::from_fn(n, n, |r, c| {
                let amp = 0.5 + c as f64 / denom;
                let phase = std::f64::consts::PI * r as f64 / denom;
                Complex64::from_polar(amp, phase)
            })
        }
        ObjectKind::RandomComplex => ComplexImage::from_fn(n, n, |_, _| {
            let amp = rng.random_range(0.5..1.5);
            let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            Complex64::from_polar(amp, phase)
        }),
        ObjectKind::CibLike => {
            let re = smooth_field(n, &mut rng, -1.0, 1.0);
            let im = smooth_field(n, &mut rng, -1.0, 1.0);
            ComplexImage::from_fn(n, n, |r, c| Complex64::new(re[(r, c)], im[(r, c)]))
        }
    })
}

/// Randomly phased unit-modulus probe: `mu(y) = exp(i phi(y))` with
/// i.i.d. uniform phases on `[0, 2*pi)`.
pub fn random_phase_probe(m: usize, seed: u64) -> ComplexImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexImage::from_fn(m, m, |_, _| {
        Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * std::f64::consts::PI))
    })
}

/// Random `tau x tau` phase block with entries uniform on `[-pi, pi)`.
pub fn random_phase_block(tau: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((tau, tau), |_| {
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    })
}
