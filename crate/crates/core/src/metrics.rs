//! Ambiguity-discounted error metrics and data residuals.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{measure, DiffractionSet};
use crate::grid::GridGeometry;
use crate::image::ComplexImage;
use crate::scan::ScanPattern;

/// Result of the relative-error minimization over a complex scale and an
/// integer linear phase ramp.
#[derive(Clone, Copy, Debug)]
pub struct REResult {
    pub value: f64,
    pub best_alpha: Complex64,
    /// Integer ramp slope `(r1, r2)` (col, row axes) at the minimum.
    pub best_r: (i64, i64),
    /// Search window: slopes ranged over `[-window, window]^2`.
    pub window: i64,
}

/// Core minimization: `min over alpha, r of ||truth - alpha E_r est|| / ||truth||`
/// with `E_r(x) = exp(-2 pi i (col*r1 + row*r2) / period)` and integer
/// `r in [-window, window]^2`. Ties break lexicographically in `(r1, r2)`.
/// With `refine` set, each axis slope is then refined continuously around the
/// best integer (for non-periodic boundaries where slopes need not be
/// integers).
pub fn relative_error_with_period(
    truth: &ComplexImage,
    est: &ComplexImage,
    window: i64,
    period: usize,
    refine: bool,
) -> Result<REResult> {
    if truth.rows() != est.rows() || truth.cols() != est.cols() {
        return Err(Error::SizeMismatch {
            expected: format!("{}x{}", truth.rows(), truth.cols()),
            actual: format!("{}x{}", est.rows(), est.cols()),
        });
    }
    let truth_norm_sq: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    if truth_norm_sq == 0.0 {
        return Err(Error::ZeroValue("truth image is identically zero".into()));
    }
    if window < 0 {
        return Err(Error::InvalidParameter("window must be >= 0".into()));
    }
    let est_norm_sq: f64 = est.iter().map(|z| z.norm_sqr()).sum();
    let two_pi = 2.0 * std::f64::consts::PI;

    // For fixed slope the optimal alpha is the least-squares phasor
    // <E est, truth> / ||est||^2, and the misfit has the closed form
    // ||truth||^2 - |<E est, truth>|^2 / ||est||^2.
    let correlation = |r1: f64, r2: f64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for row in 0..truth.rows() {
            for col in 0..truth.cols() {
                let phase = -two_pi * (col as f64 * r1 + row as f64 * r2) / period as f64;
                acc += (est.get(row, col) * Complex64::from_polar(1.0, phase)).conj()
                    * truth.get(row, col);
            }
        }
        acc
    };
    let value_of = |corr: Complex64| -> f64 {
        if est_norm_sq == 0.0 {
            return 1.0;
        }
        let misfit_sq = (truth_norm_sq - corr.norm_sqr() / est_norm_sq).max(0.0);
        (misfit_sq / truth_norm_sq).sqrt()
    };

    let mut best = REResult {
        value: f64::INFINITY,
        best_alpha: Complex64::new(0.0, 0.0),
        best_r: (0, 0),
        window,
    };
    for r1 in -window..=window {
        for r2 in -window..=window {
            let corr = correlation(r1 as f64, r2 as f64);
            let value = value_of(corr);
            if value < best.value {
                best.value = value;
                best.best_r = (r1, r2);
            }
        }
    }
    let mut best_r_real = (best.best_r.0 as f64, best.best_r.1 as f64);
    if refine {
        let mut r = best_r_real;
        for _ in 0..3 {
            for axis in 0..2 {
                let (mut lo, mut hi) = if axis == 0 {
                    (r.0 - 1.0, r.0 + 1.0)
                } else {
                    (r.1 - 1.0, r.1 + 1.0)
                };
                for _ in 0..50 {
                    let third = (hi - lo) / 3.0;
                    let (c1, c2) = (lo + third, hi - third);
                    let eval = |x: f64| {
                        let (r1, r2) = if axis == 0 { (x, r.1) } else { (r.0, x) };
                        value_of(correlation(r1, r2))
                    };
                    if eval(c1) < eval(c2) {
                        hi = c2;
                    } else {
                        lo = c1;
                    }
                }
                let x = 0.5 * (lo + hi);
                if axis == 0 {
                    r.0 = x;
                } else {
                    r.1 = x;
                }
            }
        }
        let value = value_of(correlation(r.0, r.1));
        if value < best.value {
            best.value = value;
            best.best_r = (r.0.round() as i64, r.1.round() as i64);
            best_r_real = r;
        }
    }

    // The closed-form misfit cancels catastrophically near zero, so evaluate
    // the residual directly at the minimizer.
    let corr = correlation(best_r_real.0, best_r_real.1);
    if est_norm_sq > 0.0 {
        best.best_alpha = corr / est_norm_sq;
    }
    let mut misfit_sq = 0.0;
    for row in 0..truth.rows() {
        for col in 0..truth.cols() {
            let phase = -two_pi * (col as f64 * best_r_real.0 + row as f64 * best_r_real.1)
                / period as f64;
            let modulated = est.get(row, col) * Complex64::from_polar(1.0, phase);
            misfit_sq += (truth.get(row, col) - best.best_alpha * modulated).norm_sqr();
        }
    }
    best.value = (misfit_sq / truth_norm_sq).sqrt();
    Ok(best)
}

/// Relative error between an object estimate and the truth, minimized over a
/// complex scale and integer phase-ramp slopes in `[-window, window]^2` with
/// ramp period equal to the object side.
pub fn relative_error(truth: &ComplexImage, est: &ComplexImage, window: i64) -> Result<REResult> {
    relative_error_with_period(truth, est, window, truth.rows(), false)
}

/// Probe analogue of [`relative_error`]. The ramp period is the **object**
/// side length `object_n` (probe ramps are restrictions of object-domain
/// ramps), so for a matched ambiguity pair the fitted probe slope is the
/// negative of the fitted object slope.
pub fn probe_relative_error(
    truth: &ComplexImage,
    est: &ComplexImage,
    window: i64,
    object_n: usize,
) -> Result<REResult> {
    relative_error_with_period(truth, est, window, object_n, false)
}

/// Euclidean norm of the magnitude mismatch between the measured data of
/// `(f_est, mu_est)` and `b`, normalized by `||b||`.
pub fn data_residual(
    b: &DiffractionSet,
    f_est: &ComplexImage,
    mu_est: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    os: usize,
) -> Result<f64> {
    let model = measure(f_est, mu_est, geom, pattern, os)?;
    if model.frames.len() != b.frames.len() {
        return Err(Error::SizeMismatch {
            expected: format!("{} frames", b.frames.len()),
            actual: format!("{}", model.frames.len()),
        });
    }
    let mut mismatch_sq = 0.0;
    for (fm, fb) in model.frames.iter().zip(b.frames.iter()) {
        if fm.dim() != fb.dim() {
            return Err(Error::SizeMismatch {
                expected: format!("{:?}", fb.dim()),
                actual: format!("{:?}", fm.dim()),
            });
        }
        for (x, y) in fm.iter().zip(fb.iter()) {
            mismatch_sq += (x - y) * (x - y);
        }
    }
    let bnorm = b.norm_l2();
    Ok(if bnorm == 0.0 {
        mismatch_sq.sqrt()
    } else {
        mismatch_sq.sqrt() / bnorm
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::{affine_phase_pair, pathology_pair, scaling_pair};
    use crate::synth;
    use num_complex::Complex64;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn identity_is_zero() {
        let f = synth::object(synth::ObjectKind::RandomComplex, 12, 1).unwrap();
        let re = relative_error(&f, &f, 3).unwrap();
        assert!(re.value < 1e-14);
        assert!((re.best_alpha - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(re.best_r, (0, 0));
    }

    #[test]
    fn discounts_affine_phase_and_scaling() {
        let n = 12;
        let f = synth::object(synth::ObjectKind::RandomComplex, n, 2).unwrap();
        let mu = synth::random_phase_probe(6, 3);
        let w = [TWO_PI * 2.0 / n as f64, -TWO_PI / n as f64];
        let (g, nu) = affine_phase_pair(&f, &mu, 0.4, 0.9, w);
        let re = relative_error(&f, &g, 4).unwrap();
        assert!(re.value < 1e-12, "value = {:e}", re.value);
        assert_eq!(re.best_r, (2, -1));

        let (g, _) = scaling_pair(&f, &mu, 3.5).unwrap();
        let re = relative_error(&f, &g, 2).unwrap();
        assert!(re.value < 1e-12);
        assert!((re.best_alpha.re - 1.0 / 3.5).abs() < 1e-12);

        // Probe slope mirrors the object slope.
        let (gobj, nuprobe) = affine_phase_pair(&f, &mu, 0.1, 0.2, w);
        let reo = relative_error(&f, &gobj, 4).unwrap();
        let rep = probe_relative_error(&mu, &nuprobe, 4, n).unwrap();
        assert!(rep.value < 1e-12, "probe value = {:e}", rep.value);
        assert_eq!(reo.best_r.0, -rep.best_r.0);
        assert_eq!(reo.best_r.1, -rep.best_r.1);
        let _ = nu;
    }

    #[test]
    fn pathology_not_discounted() {
        let n = 12;
        let f = synth::object(synth::ObjectKind::RandomComplex, n, 4).unwrap();
        let mu = synth::random_phase_probe(6, 5);
        let pat = ScanPattern::raster(n, 3).unwrap();
        let psi = synth::random_phase_block(3, 6);
        let (g, _) = pathology_pair(&f, &mu, &pat, &psi, 0.0, [0.0, 0.0]).unwrap();
        let re = relative_error(&f, &g, 4).unwrap();
        assert!(re.value > 1e-2, "value = {:e}", re.value);
    }

    #[test]
    fn never_worse_than_unaligned() {
        for seed in 0..5 {
            let f = synth::object(synth::ObjectKind::RandomComplex, 8, seed).unwrap();
            let g = synth::object(synth::ObjectKind::RandomComplex, 8, seed + 100).unwrap();
            let re = relative_error(&f, &g, 3).unwrap();
            let mut diff_sq = 0.0;
            for (a, b) in f.iter().zip(g.iter()) {
                diff_sq += (a - b).norm_sqr();
            }
            let unaligned = (diff_sq.sqrt()) / f.norm_l2();
            assert!(re.value <= unaligned + 1e-12);
        }
    }

    #[test]
    fn zero_truth_rejected() {
        let z = ComplexImage::zeros(4, 4);
        let f = synth::object(synth::ObjectKind::Constant, 4, 0).unwrap();
        assert!(relative_error(&z, &f, 1).is_err());
    }

    #[test]
    fn refine_recovers_non_integer_slope() {
        let n = 16;
        let f = synth::object(synth::ObjectKind::RandomComplex, n, 9).unwrap();
        let mu = synth::random_phase_probe(4, 9);
        // Slope of 0.5 lattice units: off the integer grid.
        let w = [TWO_PI * 0.5 / n as f64, 0.0];
        let (g, _) = affine_phase_pair(&f, &mu, 0.0, 0.0, w);
        let coarse = relative_error(&f, &g, 2).unwrap();
        let fine = relative_error_with_period(&f, &g, 2, n, true).unwrap();
        assert!(fine.value < 1e-6, "refined value = {:e}", fine.value);
        assert!(fine.value < coarse.value);
    }

    #[test]
    fn data_residual_cases() {
        let n = 12;
        let geom = GridGeometry::periodic(n, 6).unwrap();
        let pat = ScanPattern::raster(n, 3).unwrap();
        let f = synth::object(synth::ObjectKind::RandomComplex, n, 10).unwrap();
        let mu = synth::random_phase_probe(6, 11);
        let b = measure(&f, &mu, &geom, &pat, 2).unwrap();
        assert!(data_residual(&b, &f, &mu, &geom, &pat, 2).unwrap() < 1e-14);

        let psi = synth::random_phase_block(3, 12);
        let (g, nu) = pathology_pair(&f, &mu, &pat, &psi, 0.1, [TWO_PI / 4.0, 0.0]).unwrap();
        assert!(data_residual(&b, &g, &nu, &geom, &pat, 2).unwrap() < 1e-10);

        let random = synth::object(synth::ObjectKind::RandomComplex, n, 99).unwrap();
        assert!(data_residual(&b, &random, &mu, &geom, &pat, 2).unwrap() > 0.1);
    }
}
