//! Closed-form constructors for every ambiguity class of blind raster-scan
//! ptychography, plus extractors that detect them in candidate solution
//! pairs.
//!
//! All constructors return `(g, nu00)` pairs that reproduce the measurement
//! data of `(f, mu00)` exactly. The block-scale constructions multiply the
//! probe block `(k, l)` by `exp(-i r.(k,l)) * exp(+i psi)` and the object
//! block by `exp(i theta00) * exp(+i r.(k,l)) * exp(-i psi)`, which reduces
//! per pixel to
//!
//! ```text
//! nu00(y) = mu00(y) * exp(-i r.(floor(y/tau))) * exp(+i psi(y mod tau))
//! g(x)    = f(x)    * exp(i theta00) * exp(+i r.(floor(x/tau))) * exp(-i psi(x mod tau))
//! ```
//!
//! (`y` over the probe domain, `x` over the object domain, both as
//! `(col, row)` lattice vectors). The same pixel formula realizes the
//! under-shifted and over-shifted cases; only the preconditions differ.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{exit_wave, measure};
use crate::grid::GridGeometry;
use crate::image::ComplexImage;
use crate::scan::{ScanKind, ScanPattern};

/// Default tolerance for the per-window phase spread in
/// [`extract_block_phases`].
pub const TOL_PHASE: f64 = 1e-8;

/// Guard below which exit-wave pixels are excluded from phase extraction,
/// relative to the per-window maximum.
const PIXEL_GUARD: f64 = 1e-12;

#[inline]
fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

#[inline]
fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * std::f64::consts::PI);
    if y > std::f64::consts::PI {
        y -= 2.0 * std::f64::consts::PI;
    }
    y
}

/// Parameter bundle for the ambiguity constructors: scaling `c`, affine
/// phase `(a, b, w)`, block-phase offset/slope `(theta00, r)`, and the
/// `tau x tau` pathology phase block `psi` (entries are real phases).
#[derive(Clone, Debug)]
pub struct AmbiguityParams {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub w: [f64; 2],
    pub theta00: f64,
    pub r: [f64; 2],
    pub psi: Option<Array2<f64>>,
}

impl Default for AmbiguityParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            a: 0.0,
            b: 0.0,
            w: [0.0, 0.0],
            theta00: 0.0,
            r: [0.0, 0.0],
            psi: None,
        }
    }
}

/// `g = c f`, `nu = c^-1 mu`, `c > 0`.
pub fn scaling_pair(
    f: &ComplexImage,
    mu00: &ComplexImage,
    c: f64,
) -> Result<(ComplexImage, ComplexImage)> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling factor must be positive and finite, got {c}"
        )));
    }
    Ok((
        f.scaled(Complex64::new(c, 0.0)),
        mu00.scaled(Complex64::new(1.0 / c, 0.0)),
    ))
}

/// Affine phase pair: `nu(y) = mu(y) exp(-i a - i w.y)` on the probe domain,
/// `g(x) = f(x) exp(i b + i w.x)` on the object domain. Under the periodic
/// boundary the pair reproduces the data exactly when `w` lies on the
/// `2*pi/n` lattice.
pub fn affine_phase_pair(
    f: &ComplexImage,
    mu00: &ComplexImage,
    a: f64,
    b: f64,
    w: [f64; 2],
) -> (ComplexImage, ComplexImage) {
    let g = ComplexImage::from_fn(f.rows(), f.cols(), |row, col| {
        f.get(row, col) * cis(b + w[0] * col as f64 + w[1] * row as f64)
    });
    let nu = ComplexImage::from_fn(mu00.rows(), mu00.cols(), |row, col| {
        mu00.get(row, col) * cis(-a - w[0] * col as f64 - w[1] * row as f64)
    });
    (g, nu)
}

fn check_slope_on_lattice(r: [f64; 2], q: usize) -> Result<()> {
    let step = 2.0 * std::f64::consts::PI / q as f64;
    for (i, ri) in r.iter().enumerate() {
        let units = ri / step;
        if (units - units.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "slope r[{i}]={ri} is not an integer multiple of 2*pi/q (q={q})"
            )));
        }
    }
    Ok(())
}

fn check_raster(pattern: &ScanPattern) -> Result<()> {
    if pattern.kind() != ScanKind::Raster {
        return Err(Error::InvalidParameter(
            "block-scale constructors require an unperturbed raster pattern".into(),
        ));
    }
    Ok(())
}

/// Shared pixel-level construction behind the progression/pathology pairs.
fn block_phase_pair(
    f: &ComplexImage,
    mu00: &ComplexImage,
    pattern: &ScanPattern,
    psi: Option<&Array2<f64>>,
    theta00: f64,
    r: [f64; 2],
) -> Result<(ComplexImage, ComplexImage)> {
    let tau = pattern.tau();
    let n = pattern.n();
    if f.rows() != n || f.cols() != n {
        return Err(Error::SizeMismatch {
            expected: format!("{n}x{n} object"),
            actual: format!("{}x{}", f.rows(), f.cols()),
        });
    }
    if let Some(p) = psi {
        if p.dim() != (tau, tau) {
            return Err(Error::SizeMismatch {
                expected: format!("{tau}x{tau} phase block"),
                actual: format!("{}x{}", p.dim().0, p.dim().1),
            });
        }
    }
    check_slope_on_lattice(r, pattern.q())?;
    let psi_at = |row: usize, col: usize| -> f64 {
        psi.map_or(0.0, |p| p[(row % tau, col % tau)])
    };
    let g = ComplexImage::from_fn(f.rows(), f.cols(), |row, col| {
        let (k, l) = (col / tau, row / tau);
        f.get(row, col)
            * cis(theta00 + r[0] * k as f64 + r[1] * l as f64 - psi_at(row, col))
    });
    let nu = ComplexImage::from_fn(mu00.rows(), mu00.cols(), |row, col| {
        let (k, l) = (col / tau, row / tau);
        mu00.get(row, col) * cis(-(r[0] * k as f64 + r[1] * l as f64) + psi_at(row, col))
    });
    Ok((g, nu))
}

/// Arithmetically progressing block-phase pair (the pathology with a trivial
/// phase block): probe block `(k,l)` times `exp(-i r.(k,l))`, object block
/// times `exp(i theta00 + i r.(k,l))`. Requires an under-shifted raster
/// (`p = m/tau >= 2` integer) and `r` on the `2*pi/q` lattice.
pub fn progression_pair(
    f: &ComplexImage,
    mu00: &ComplexImage,
    pattern: &ScanPattern,
    theta00: f64,
    r: [f64; 2],
) -> Result<(ComplexImage, ComplexImage)> {
    check_raster(pattern)?;
    let (tau, m) = (pattern.tau(), mu00.rows());
    if m % tau != 0 || m / tau < 2 {
        return Err(Error::InvalidParameter(format!(
            "progression pair needs tau <= m/2 with p = m/tau integer (m={m}, tau={tau})"
        )));
    }
    block_phase_pair(f, mu00, pattern, None, theta00, r)
}

/// Under-shifted raster pathology: additionally multiplies every `tau x tau`
/// probe block by `exp(+i psi)` and every object block by `exp(-i psi)`,
/// producing a `tau`-periodic, data-equivalent artifact.
pub fn pathology_pair(
    f: &ComplexImage,
    mu00: &ComplexImage,
    pattern: &ScanPattern,
    psi: &Array2<f64>,
    theta00: f64,
    r: [f64; 2],
) -> Result<(ComplexImage, ComplexImage)> {
    check_raster(pattern)?;
    let (tau, m) = (pattern.tau(), mu00.rows());
    if 2 * tau > m {
        return Err(Error::InvalidParameter(format!(
            "tau={tau} > m/2: use pathology_pair_overshift for the over-shifted case (m={m})"
        )));
    }
    if m % tau != 0 {
        return Err(Error::InvalidParameter(format!(
            "pathology pair needs p = m/tau integer (m={m}, tau={tau})"
        )));
    }
    block_phase_pair(f, mu00, pattern, Some(psi), theta00, r)
}

/// Over-shifted raster pathology (`m/2 < tau < m`): the phase block acts on
/// the unequal 3x3 partition, with the third row/column of blocks inheriting
/// the corner phases together with the `exp(-i r)` transfer factors.
pub fn pathology_pair_overshift(
    f: &ComplexImage,
    mu00: &ComplexImage,
    pattern: &ScanPattern,
    psi: &Array2<f64>,
    theta00: f64,
    r: [f64; 2],
) -> Result<(ComplexImage, ComplexImage)> {
    check_raster(pattern)?;
    let (tau, m) = (pattern.tau(), mu00.rows());
    if !(2 * tau > m && tau < m) {
        return Err(Error::InvalidParameter(format!(
            "over-shift pathology needs m/2 < tau < m (m={m}, tau={tau})"
        )));
    }
    block_phase_pair(f, mu00, pattern, Some(psi), theta00, r)
}

/// Per-shift block phases of a candidate pair, with the affine fit attached
/// by [`fit_affine_profile`].
#[derive(Clone, Debug)]
pub struct BlockPhaseProfile {
    q: usize,
    /// Circular-mean phase per shift, in pattern order, each in `(-pi, pi]`.
    theta: Vec<f64>,
    /// Largest per-window circular spread observed during extraction.
    pub max_spread: f64,
    pub fit: Option<AffineFit>,
}

impl BlockPhaseProfile {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn theta(&self, k: usize, l: usize) -> f64 {
        self.theta[k * self.q + l]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    /// Second difference of block phases along the first axis, wrapped to
    /// `(-pi, pi]`: `2 theta_{k+1,l} - theta_{k+2,l} - theta_{k,l}`.
    pub fn second_difference_axis1(&self, k: usize, l: usize) -> f64 {
        wrap_angle(2.0 * self.theta(k + 1, l) - self.theta(k + 2, l) - self.theta(k, l))
    }

    /// Second difference along the second axis, wrapped to `(-pi, pi]`.
    pub fn second_difference_axis2(&self, k: usize, l: usize) -> f64 {
        wrap_angle(2.0 * self.theta(k, l + 1) - self.theta(k, l + 2) - self.theta(k, l))
    }
}

/// Affine model fitted to a block-phase profile.
#[derive(Clone, Copy, Debug)]
pub struct AffineFit {
    pub theta00: f64,
    pub r: [f64; 2],
    /// Max absolute circular deviation from the fitted model (radians).
    pub residual: f64,
}

/// Extracts the per-shift constant phase relating `nu^t . g^t` to
/// `mu^t . f^t`. Pixels where the reference exit wave is below
/// `1e-12 * max` are excluded; a circular spread beyond `tol` signals that
/// the pair is not of the locally-unique form and is reported as an error.
pub fn extract_block_phases_with_tol(
    f: &ComplexImage,
    mu00: &ComplexImage,
    g: &ComplexImage,
    nu00: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    tol: f64,
) -> Result<BlockPhaseProfile> {
    let q = pattern.q();
    let mut theta = Vec::with_capacity(q * q);
    let mut max_spread = 0.0f64;
    for (k, l) in pattern.indices() {
        let t = pattern.shift(k, l);
        let wf = exit_wave(f, mu00, geom, t)?;
        let wg = exit_wave(g, nu00, geom, t)?;
        let wmax = wf.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        if wmax == 0.0 {
            return Err(Error::ZeroValue(format!(
                "exit wave vanishes identically at shift ({k},{l})"
            )));
        }
        let mut phasors = Vec::new();
        for (zf, zg) in wf.iter().zip(wg.iter()) {
            if zf.norm() < PIXEL_GUARD * wmax {
                continue;
            }
            let ratio = zg / zf;
            if ratio.norm() > 0.0 {
                phasors.push(ratio / ratio.norm());
            }
        }
        if phasors.is_empty() {
            return Err(Error::ZeroValue(format!(
                "no usable pixels at shift ({k},{l})"
            )));
        }
        let mean: Complex64 = phasors.iter().sum::<Complex64>() / phasors.len() as f64;
        let center = mean.arg();
        let spread = phasors
            .iter()
            .map(|p| (p * cis(-center)).arg().abs())
            .fold(0.0f64, f64::max);
        if spread > tol {
            return Err(Error::BlockPhaseViolation { spread, tol });
        }
        max_spread = max_spread.max(spread);
        theta.push(center);
    }
    Ok(BlockPhaseProfile {
        q,
        theta,
        max_spread,
        fit: None,
    })
}

/// [`extract_block_phases_with_tol`] at the default tolerance [`TOL_PHASE`].
pub fn extract_block_phases(
    f: &ComplexImage,
    mu00: &ComplexImage,
    g: &ComplexImage,
    nu00: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
) -> Result<BlockPhaseProfile> {
    extract_block_phases_with_tol(f, mu00, g, nu00, geom, pattern, TOL_PHASE)
}

fn affine_residual(
    profile: &BlockPhaseProfile,
    model_phase: impl Fn(usize, usize) -> f64,
) -> (f64, f64) {
    let q = profile.q();
    let mut mean = Complex64::new(0.0, 0.0);
    for k in 0..q {
        for l in 0..q {
            mean += cis(profile.theta(k, l) - model_phase(k, l));
        }
    }
    let theta00 = mean.arg();
    let mut residual = 0.0f64;
    for k in 0..q {
        for l in 0..q {
            let dev = wrap_angle(profile.theta(k, l) - model_phase(k, l) - theta00).abs();
            residual = residual.max(dev);
        }
    }
    (theta00, residual)
}

/// Fits the affine block-phase model. For rasters the slope is searched over
/// integer multiples of `2*pi/q` against `theta_kl = theta00 + r.(k,l)`; for
/// perturbed scans over integer multiples of `2*pi/n` against
/// `theta_kl = theta00 + t_kl.r` (the periodic boundary forces integer
/// slopes). With `refine` set, the slope is then refined continuously around
/// the best lattice point, for use with non-periodic boundaries.
pub fn fit_affine_profile_refined(
    profile: &BlockPhaseProfile,
    pattern: &ScanPattern,
    refine: bool,
) -> Result<AffineFit> {
    let q = pattern.q();
    if q < 2 {
        return Err(Error::DegenerateGeometry(
            "affine fit needs at least a 2x2 lattice of block phases".into(),
        ));
    }
    if profile.q() != q {
        return Err(Error::SizeMismatch {
            expected: format!("profile on a {q}x{q} lattice"),
            actual: format!("{0}x{0}", profile.q()),
        });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let raster = pattern.kind() == ScanKind::Raster;
    let (period, step) = if raster {
        (q, two_pi / q as f64)
    } else {
        (pattern.n(), two_pi / pattern.n() as f64)
    };
    let model = |r: [f64; 2]| {
        move |k: usize, l: usize| {
            if raster {
                r[0] * k as f64 + r[1] * l as f64
            } else {
                let t = pattern.shift(k, l);
                r[0] * t.0 as f64 + r[1] * t.1 as f64
            }
        }
    };
    let canon = |v: usize| -> f64 {
        // symmetric representative of the slope index
        if v > period / 2 {
            v as f64 - period as f64
        } else {
            v as f64
        }
    };
    let mut best: Option<AffineFit> = None;
    for v1 in 0..period {
        for v2 in 0..period {
            let r = [canon(v1) * step, canon(v2) * step];
            let (theta00, residual) = affine_residual(profile, model(r));
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                best = Some(AffineFit { theta00, r, residual });
            }
        }
    }
    let mut fit = best.expect("non-empty candidate lattice");
    if refine {
        for _ in 0..3 {
            for axis in 0..2 {
                let mut lo = fit.r[axis] - step;
                let mut hi = fit.r[axis] + step;
                for _ in 0..40 {
                    let third = (hi - lo) / 3.0;
                    let (r1, r2) = (lo + third, hi - third);
                    let eval = |ra: f64| {
                        let mut r = fit.r;
                        r[axis] = ra;
                        affine_residual(profile, model(r)).1
                    };
                    if eval(r1) < eval(r2) {
                        hi = r2;
                    } else {
                        lo = r1;
                    }
                }
                let mut r = fit.r;
                r[axis] = 0.5 * (lo + hi);
                let (theta00, residual) = affine_residual(profile, model(r));
                if residual < fit.residual {
                    fit = AffineFit { theta00, r, residual };
                }
            }
        }
    }
    Ok(fit)
}

/// [`fit_affine_profile_refined`] without continuous refinement.
pub fn fit_affine_profile(profile: &BlockPhaseProfile, pattern: &ScanPattern) -> Result<AffineFit> {
    fit_affine_profile_refined(profile, pattern, false)
}

/// Max relative deviation between the magnitude data of `(g, nu00)` and of
/// `(f, mu00)`, normalized by the global data maximum.
pub fn verify_same_data(
    f: &ComplexImage,
    mu00: &ComplexImage,
    g: &ComplexImage,
    nu00: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    os: usize,
) -> Result<f64> {
    let bf = measure(f, mu00, geom, pattern, os)?;
    let bg = measure(g, nu00, geom, pattern, os)?;
    let bmax = bf
        .frames
        .iter()
        .flat_map(|fr| fr.iter())
        .cloned()
        .fold(0.0f64, f64::max);
    let denom = bmax + 1e-300;
    let mut dev = 0.0f64;
    for (ff, fg) in bf.frames.iter().zip(bg.frames.iter()) {
        for (a, b) in ff.iter().zip(fg.iter()) {
            dev = dev.max((a - b).abs() / denom);
        }
    }
    Ok(dev)
}

/// `h(x) = ln g(x) - ln f(x)` with the imaginary part wrapped to `(-pi, pi]`.
pub fn log_ratio_field(f: &ComplexImage, g: &ComplexImage) -> Result<ComplexImage> {
    if f.rows() != g.rows() || f.cols() != g.cols() {
        return Err(Error::SizeMismatch {
            expected: format!("{}x{}", f.rows(), f.cols()),
            actual: format!("{}x{}", g.rows(), g.cols()),
        });
    }
    if f.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::ZeroValue("f vanishes somewhere".into()));
    }
    if g.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::ZeroValue("g vanishes somewhere".into()));
    }
    Ok(ComplexImage::from_fn(f.rows(), f.cols(), |r, c| {
        let ratio = g.get(r, c) / f.get(r, c);
        Complex64::new(ratio.norm().ln(), ratio.arg())
    }))
}

/// Affine fit of a log-ratio field: constant real part (the log scaling
/// factor) and a linear ramp in the imaginary part.
#[derive(Clone, Copy, Debug)]
pub struct RampFit {
    /// Fitted `h(0)`: log scaling in the real part, phase offset in the
    /// imaginary part.
    pub intercept: Complex64,
    /// Phase slope `(r1, r2)` in radians per pixel along (col, row).
    pub slope: [f64; 2],
    /// Max deviation: real-part non-constancy or circular deviation of the
    /// imaginary part, whichever is larger.
    pub residual: f64,
}

/// Fits `h(x) = h(0) + i x.r (mod 2 pi i)` to a log-ratio field. The slope is
/// estimated from circular means of the forward phase differences, then
/// compared against its nearest `2*pi/n` lattice point and the better of the
/// two is kept.
pub fn ramp_fit(h: &ComplexImage) -> Result<RampFit> {
    let (rows, cols) = (h.rows(), h.cols());
    if rows < 2 || cols < 2 {
        return Err(Error::DegenerateGeometry(
            "ramp fit needs at least a 2x2 field".into(),
        ));
    }
    let mut d1 = Complex64::new(0.0, 0.0);
    let mut d2 = Complex64::new(0.0, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                d1 += cis(h.get(r, c + 1).im - h.get(r, c).im);
            }
            if r + 1 < rows {
                d2 += cis(h.get(r + 1, c).im - h.get(r, c).im);
            }
        }
    }
    let raw = [d1.arg(), d2.arg()];
    let two_pi = 2.0 * std::f64::consts::PI;
    let snapped = [
        (raw[0] * cols as f64 / two_pi).round() * two_pi / cols as f64,
        (raw[1] * rows as f64 / two_pi).round() * two_pi / rows as f64,
    ];
    let evaluate = |slope: [f64; 2]| -> RampFit {
        let re_mean = h.iter().map(|z| z.re).sum::<f64>() / (rows * cols) as f64;
        let mut phasor = Complex64::new(0.0, 0.0);
        for r in 0..rows {
            for c in 0..cols {
                phasor += cis(h.get(r, c).im - slope[0] * c as f64 - slope[1] * r as f64);
            }
        }
        let im0 = phasor.arg();
        let mut residual = 0.0f64;
        for r in 0..rows {
            for c in 0..cols {
                let z = h.get(r, c);
                residual = residual.max((z.re - re_mean).abs());
                residual = residual.max(
                    wrap_angle(z.im - slope[0] * c as f64 - slope[1] * r as f64 - im0).abs(),
                );
            }
        }
        RampFit {
            intercept: Complex64::new(re_mean, im0),
            slope,
            residual,
        }
    };
    let a = evaluate(raw);
    let b = evaluate(snapped);
    Ok(if b.residual <= a.residual { b } else { a })
}
