//! Exit waves and oversampled Fourier magnitude data: the measurement model,
//! with an independent direct-summation oracle for the transform path.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dft::{pad_to, Dft2};
use crate::error::{Error, Result};
use crate::grid::{restrict, GridGeometry};
use crate::image::{ComplexImage, Shift};
use crate::scan::ScanPattern;

/// Per-shift nonnegative magnitude arrays at a fixed oversampling factor.
#[derive(Clone, Debug)]
pub struct DiffractionSet {
    pub os: usize,
    pub m: usize,
    pub pattern: ScanPattern,
    /// One `(os*m) x (os*m)` magnitude array per shift, in pattern order.
    pub frames: Vec<Array2<f64>>,
}

impl DiffractionSet {
    pub fn frame_side(&self) -> usize {
        self.os * self.m
    }

    pub fn norm_l2(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Exit wave for shift `t`: the unshifted probe times the object restricted
/// to the `t`-shifted window.
pub fn exit_wave(
    f: &ComplexImage,
    mu00: &ComplexImage,
    geom: &GridGeometry,
    t: Shift,
) -> Result<ComplexImage> {
    if mu00.rows() != geom.m || mu00.cols() != geom.m {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0} probe", geom.m),
            actual: format!("{}x{}", mu00.rows(), mu00.cols()),
        });
    }
    mu00.hadamard(&restrict(f, geom, t)?)
}

/// Magnitudes of the zero-padded unnormalized 2D DFT of `psi`. With `M = os *
/// rows(psi)` the output is `M x M` and satisfies the Parseval identity
/// `sum |B|^2 = M^2 sum |psi|^2`.
pub fn dft_magnitude(psi: &ComplexImage, os: usize) -> Result<Array2<f64>> {
    if os < 1 {
        return Err(Error::InvalidParameter("oversampling must be >= 1".into()));
    }
    let size = os * psi.rows().max(psi.cols());
    let dft = Dft2::new(size);
    Ok(dft_magnitude_with(psi, &dft))
}

pub(crate) fn dft_magnitude_with(psi: &ComplexImage, dft: &Dft2) -> Array2<f64> {
    let mut padded = pad_to(psi.array(), dft.size());
    dft.forward(&mut padded);
    padded.mapv(|z| z.norm())
}

/// Direct `O(M^4)` summation oracle with the same contract as
/// [`dft_magnitude`]. Exists solely to validate the fast path and stays
/// independent of it.
pub fn dft_magnitude_oracle(psi: &ComplexImage, os: usize) -> Result<Array2<f64>> {
    if os < 1 {
        return Err(Error::InvalidParameter("oversampling must be >= 1".into()));
    }
    let size = os * psi.rows().max(psi.cols());
    let mut out = Array2::zeros((size, size));
    for kr in 0..size {
        for kc in 0..size {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..psi.rows() {
                for c in 0..psi.cols() {
                    let phase = -2.0 * std::f64::consts::PI
                        * ((kr * r) as f64 + (kc * c) as f64)
                        / size as f64;
                    acc += psi.get(r, c) * Complex64::from_polar(1.0, phase);
                }
            }
            out[(kr, kc)] = acc.norm();
        }
    }
    Ok(out)
}

/// Full ptychographic measurement: one magnitude frame per shift of the
/// pattern. Deterministic; exterior pixels under dark/bright boundaries are
/// materialized by the boundary rule before the transform.
pub fn measure(
    f: &ComplexImage,
    mu00: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    os: usize,
) -> Result<DiffractionSet> {
    if os < 1 {
        return Err(Error::InvalidParameter("oversampling must be >= 1".into()));
    }
    let dft = Dft2::new(os * geom.m);
    let mut frames = Vec::with_capacity(pattern.len());
    for &t in pattern.shifts() {
        let psi = exit_wave(f, mu00, geom, t)?;
        frames.push(dft_magnitude_with(&psi, &dft));
    }
    Ok(DiffractionSet {
        os,
        m: geom.m,
        pattern: pattern.clone(),
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_image(rows: usize, cols: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut psi = ComplexImage::zeros(2, 2);
        psi.set(0, 0, Complex64::new(1.0, 0.0));
        let mag = dft_magnitude(&psi, 2).unwrap();
        assert_eq!(mag.dim(), (4, 4));
        assert!(mag.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_input_zero_output() {
        let psi = ComplexImage::zeros(3, 3);
        let mag = dft_magnitude(&psi, 2).unwrap();
        assert!(mag.iter().all(|v| *v == 0.0));
        assert!(dft_magnitude(&psi, 0).is_err());
    }

    #[test]
    fn ones_block_matches_oracle() {
        // 2x2 ones, os=2: |Dirichlet kernel| magnitudes via direct summation.
        let psi = ComplexImage::filled(2, 2, Complex64::new(1.0, 0.0));
        let fast = dft_magnitude(&psi, 2).unwrap();
        let slow = dft_magnitude_oracle(&psi, 2).unwrap();
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        // Spot value: B(0,0) = 4, and the axis Dirichlet |1 + e^{-i pi k/2}|.
        assert!((fast[(0, 0)] - 4.0).abs() < 1e-12);
        let d1 = (1.0 + Complex64::from_polar(1.0, -std::f64::consts::PI / 2.0)).norm() * 2.0;
        assert!((fast[(0, 1)] - d1).abs() < 1e-12);
    }

    #[test]
    fn parseval_identity() {
        for seed in 0..5 {
            let psi = random_image(5, 5, seed);
            for os in [1usize, 2, 3] {
                let mag = dft_magnitude(&psi, os).unwrap();
                let lhs: f64 = mag.iter().map(|v| v * v).sum();
                let m2 = ((os * 5) * (os * 5)) as f64;
                let rhs: f64 = m2 * psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }

    #[test]
    fn global_phase_and_translation_invariance() {
        let psi = random_image(4, 4, 3);
        let base = dft_magnitude(&psi, 2).unwrap();
        let rotated = psi.scaled(Complex64::from_polar(1.0, 0.37));
        let rot = dft_magnitude(&rotated, 2).unwrap();
        for (a, b) in base.iter().zip(rot.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        // Cyclic translation of the zero-padded field leaves magnitudes fixed.
        let size = 8;
        let padded = pad_to(psi.array(), size);
        let shifted = Array2::from_shape_fn((size, size), |(r, c)| {
            padded[((r + 3) % size, (c + 5) % size)]
        });
        let dft = Dft2::new(size);
        let mut a = padded.clone();
        dft.forward(&mut a);
        let mut b = shifted;
        dft.forward(&mut b);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x.norm() - y.norm()).abs() <= 1e-12 * x.norm().max(1.0));
        }
    }

    #[test]
    fn fast_path_matches_oracle_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let rows = rng.random_range(1..=8);
            let cols = rows;
            let psi = random_image(rows, cols, 1000 + trial);
            for os in [1usize, 2] {
                let fast = dft_magnitude(&psi, os).unwrap();
                let slow = dft_magnitude_oracle(&psi, os).unwrap();
                let denom = slow.iter().cloned().fold(0.0f64, f64::max).max(1e-30);
                for (a, b) in fast.iter().zip(slow.iter()) {
                    assert!((a - b).abs() <= 1e-12 * denom);
                }
            }
        }
    }

    #[test]
    fn exit_wave_cases() {
        let geom = GridGeometry::periodic(4, 2).unwrap();
        let mu = random_image(2, 2, 4);
        let ones = ComplexImage::filled(4, 4, Complex64::new(1.0, 0.0));
        // f == 1 -> psi == probe, any shift.
        for t in [(0i64, 0i64), (3, 1), (2, 2)] {
            assert_eq!(exit_wave(&ones, &mu, &geom, t).unwrap(), mu);
        }
        // probe == 1, t = 0 -> top-left corner of f.
        let f = random_image(4, 4, 5);
        let unit = ComplexImage::filled(2, 2, Complex64::new(1.0, 0.0));
        let psi = exit_wave(&f, &unit, &geom, (0, 0)).unwrap();
        assert_eq!(psi.get(1, 1), f.get(1, 1));

        // Hand-computed 4-entry case: f(r,c) = c + 2r, probe = i (imaginary
        // unit), t = (1,1) covers rows {1,2} x cols {1,2}.
        let f = ComplexImage::from_fn(4, 4, |r, c| Complex64::new((c + 2 * r) as f64, 0.0));
        let mu_i = ComplexImage::filled(2, 2, Complex64::new(0.0, 1.0));
        let psi = exit_wave(&f, &mu_i, &geom, (1, 1)).unwrap();
        assert_eq!(psi.get(0, 0), Complex64::new(0.0, 3.0)); // f(1,1)=3
        assert_eq!(psi.get(0, 1), Complex64::new(0.0, 4.0)); // f(1,2)=4
        assert_eq!(psi.get(1, 0), Complex64::new(0.0, 5.0)); // f(2,1)=5
        assert_eq!(psi.get(1, 1), Complex64::new(0.0, 6.0)); // f(2,2)=6

        let bad = ComplexImage::zeros(3, 3);
        assert!(exit_wave(&f, &bad, &geom, (0, 0)).is_err());
    }

    #[test]
    fn measure_shapes_and_single_shift() {
        let geom = GridGeometry::periodic(8, 4).unwrap();
        let f = ComplexImage::filled(8, 8, Complex64::new(1.0, 0.0));
        let mu = random_image(4, 4, 6);
        let pat = ScanPattern::raster(8, 2).unwrap();
        let data = measure(&f, &mu, &geom, &pat, 2).unwrap();
        assert_eq!(data.frames.len(), 16);
        assert!(data.frames.iter().all(|fr| fr.dim() == (8, 8)));

        let single = ScanPattern::raster(8, 8).unwrap();
        let geom1 = GridGeometry::periodic(8, 8).unwrap();
        let mu8 = random_image(8, 8, 7);
        let data = measure(&f, &mu8, &geom1, &single, 2).unwrap();
        let direct = dft_magnitude(&mu8, 2).unwrap();
        for (a, b) in data.frames[0].iter().zip(direct.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
