//! Blind reconstruction by alternating minimization with Douglas-Rachford
//! inner loops.
//!
//! Each epoch alternates two linear measurement operators: the object-side
//! map `A g = { DFT(mu .* g^t) }` at fixed probe estimate, and the probe-side
//! map `B nu = { DFT(nu .* f^t) }` at fixed object estimate. Both have
//! diagonal normal operators (distinct window pixels hit disjoint object
//! pixels per shift), so the pseudoinverse is an illumination-weight
//! division and `P = A A^+` is an exact orthogonal projection onto the
//! range.

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;

use crate::dft::Dft2;
use crate::error::{Error, Result};
use crate::forward::DiffractionSet;
use crate::grid::GridGeometry;
use crate::image::{ComplexImage, Shift};
use crate::metrics::{probe_relative_error, relative_error};
use crate::scan::ScanPattern;

/// One Fourier-domain block per shift.
pub type FieldStack = Vec<Array2<Complex64>>;

/// Relative weight level below which a pixel counts as never illuminated.
pub const DEFAULT_PINV_GUARD: f64 = 1e-8;

/// Margin keeping the aligned random probe phases away from +-pi/2.
pub const DEFAULT_ALIGN_MARGIN: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct ReconConfig {
    pub max_epochs: usize,
    pub inner_iters: usize,
    pub os: usize,
    /// Stop once the normalized data residual drops below this.
    pub tol_data: f64,
    /// Clamp exterior pixels to the boundary value after each object update
    /// (dark/bright boundaries only).
    pub enforce_boundary: bool,
    pub pinv_guard: f64,
    pub seed: u64,
    /// Stop when the relative residual change stays below
    /// `stagnation_rtol` for this many consecutive epochs.
    pub stagnation_window: usize,
    pub stagnation_rtol: f64,
    /// Slope window for the error metrics; defaults to `q` when unset.
    pub re_window: Option<i64>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            inner_iters: 30,
            os: 2,
            tol_data: 1e-10,
            enforce_boundary: true,
            pinv_guard: DEFAULT_PINV_GUARD,
            seed: 0,
            stagnation_window: 5,
            stagnation_rtol: 1e-10,
            re_window: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data_residual: f64,
    pub re_object: Option<f64>,
    pub re_probe: Option<f64>,
    pub wall_ms: f64,
}

/// First/last inner-loop objective values and descent-step counts per epoch.
#[derive(Clone, Copy, Debug)]
pub struct InnerSummary {
    pub epoch: usize,
    pub object_first: f64,
    pub object_last: f64,
    pub probe_first: f64,
    pub probe_last: f64,
    pub object_down_steps: usize,
    pub object_total_steps: usize,
    pub probe_down_steps: usize,
    pub probe_total_steps: usize,
}

#[derive(Clone, Debug)]
pub struct ReconState {
    pub f_est: ComplexImage,
    pub mu_est: ComplexImage,
    /// Terminal object-side Fourier iterates, one block per shift.
    pub u: FieldStack,
    /// Terminal probe-side Fourier iterates.
    pub v: FieldStack,
    pub history: Vec<EpochRecord>,
    pub inner: Vec<InnerSummary>,
    pub converged: bool,
}

/// How the object estimate grid relates to window coordinates. Periodic
/// geometries wrap on the `n x n` torus; `Clip` drops exterior pixels (used
/// by the object-domain operator surface); `Extended` embeds the object in
/// the bounding box of all windows so exterior pixels are real variables.
#[derive(Clone, Copy, Debug)]
struct Canvas {
    origin_row: i64,
    origin_col: i64,
    rows: usize,
    cols: usize,
    n: usize,
    mode: CanvasMode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum CanvasMode {
    Wrap,
    Clip,
    Extended,
}

impl Canvas {
    fn object_only(geom: &GridGeometry) -> Self {
        Self {
            origin_row: 0,
            origin_col: 0,
            rows: geom.n,
            cols: geom.n,
            n: geom.n,
            mode: if geom.boundary.is_periodic() {
                CanvasMode::Wrap
            } else {
                CanvasMode::Clip
            },
        }
    }

    fn for_recon(geom: &GridGeometry, pattern: &ScanPattern) -> Self {
        if geom.boundary.is_periodic() {
            return Self::object_only(geom);
        }
        let m = geom.m as i64;
        let n = geom.n as i64;
        let mut row_min = 0i64;
        let mut row_max = n;
        let mut col_min = 0i64;
        let mut col_max = n;
        for &t in pattern.shifts() {
            row_min = row_min.min(t.1);
            row_max = row_max.max(t.1 + m);
            col_min = col_min.min(t.0);
            col_max = col_max.max(t.0 + m);
        }
        Self {
            origin_row: row_min,
            origin_col: col_min,
            rows: (row_max - row_min) as usize,
            cols: (col_max - col_min) as usize,
            n: geom.n,
            mode: CanvasMode::Extended,
        }
    }

    /// Canvas storage index of absolute object coordinates, or None when the
    /// pixel is outside the canvas (Clip mode only).
    #[inline]
    fn index(&self, row: i64, col: i64) -> Option<(usize, usize)> {
        match self.mode {
            CanvasMode::Wrap => {
                let n = self.n as i64;
                Some((row.rem_euclid(n) as usize, col.rem_euclid(n) as usize))
            }
            CanvasMode::Clip => {
                if (0..self.rows as i64).contains(&row) && (0..self.cols as i64).contains(&col) {
                    Some((row as usize, col as usize))
                } else {
                    None
                }
            }
            CanvasMode::Extended => {
                Some(((row - self.origin_row) as usize, (col - self.origin_col) as usize))
            }
        }
    }

    /// Whether a canvas storage index lies in the object domain `[0, n)^2`.
    #[inline]
    fn is_interior(&self, r: usize, c: usize) -> bool {
        let row = r as i64 + self.origin_row;
        let col = c as i64 + self.origin_col;
        (0..self.n as i64).contains(&row) && (0..self.n as i64).contains(&col)
    }

    fn crop_object(&self, canvas: &Array2<Complex64>) -> ComplexImage {
        ComplexImage::from_fn(self.n, self.n, |r, c| {
            let idx = (
                (r as i64 - self.origin_row) as usize,
                (c as i64 - self.origin_col) as usize,
            );
            canvas[idx]
        })
    }
}

fn sgn(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / n
    }
}

/// Objective `L(y) = 0.5 || |y| - b ||^2`.
fn objective(y: &FieldStack, b: &[Array2<f64>]) -> f64 {
    let mut acc = 0.0;
    for (yf, bf) in y.iter().zip(b.iter()) {
        for (z, m) in yf.iter().zip(bf.iter()) {
            let d = z.norm() - m;
            acc += d * d;
        }
    }
    0.5 * acc
}

/// A measurement-side operator exposing its range projection and
/// pseudoinverse pullback.
pub trait MeasSideOp {
    /// `P u = A A^+ u`, the orthogonal projection onto the operator range.
    fn project(&self, u: &FieldStack) -> FieldStack;
    /// `A^+ u`, producing the estimate-side array.
    fn pullback(&self, u: &FieldStack) -> Array2<Complex64>;
}

/// Object-side operator `A g = { DFT(mu .* g^t) }` at fixed probe.
///
/// With boundary enforcement the exterior pixels are not variables: the map
/// becomes affine, `u = A g_interior + offset`, with `offset` the data-space
/// image of the fixed boundary values, and the range projection acts on the
/// affine subspace.
pub struct ObjectSideOp<'a> {
    mu: &'a ComplexImage,
    shifts: &'a [Shift],
    canvas: Canvas,
    m: usize,
    size: usize,
    dft: Dft2,
    weights: Array2<f64>,
    wmax: f64,
    guard: f64,
    fill: Complex64,
    /// Present when the boundary is enforced: exterior pixels are excluded
    /// from the unknowns and contribute this fixed field instead.
    offset: Option<FieldStack>,
}

impl<'a> ObjectSideOp<'a> {
    fn build(
        mu: &'a ComplexImage,
        shifts: &'a [Shift],
        canvas: Canvas,
        os: usize,
        guard: f64,
        fill: Complex64,
    ) -> Self {
        Self::build_inner(mu, shifts, canvas, os, guard, fill, false)
    }

    /// Variant holding exterior pixels at the boundary value `fill` during
    /// the update (used when the boundary condition is enforced).
    fn build_enforced(
        mu: &'a ComplexImage,
        shifts: &'a [Shift],
        canvas: Canvas,
        os: usize,
        guard: f64,
        fill: Complex64,
    ) -> Self {
        Self::build_inner(mu, shifts, canvas, os, guard, fill, true)
    }

    fn build_inner(
        mu: &'a ComplexImage,
        shifts: &'a [Shift],
        canvas: Canvas,
        os: usize,
        guard: f64,
        fill: Complex64,
        enforced: bool,
    ) -> Self {
        let m = mu.rows();
        let mut weights = Array2::zeros((canvas.rows, canvas.cols));
        for &t in shifts {
            for lr in 0..m {
                for lc in 0..m {
                    if let Some(idx) = canvas.index(t.1 + lr as i64, t.0 + lc as i64) {
                        if !enforced || canvas.is_interior(idx.0, idx.1) {
                            weights[idx] += mu.get(lr, lc).norm_sqr();
                        }
                    }
                }
            }
        }
        let wmax = weights.iter().cloned().fold(0.0f64, f64::max);
        let mut op = Self {
            mu,
            shifts,
            canvas,
            m,
            size: os * m,
            dft: Dft2::new(os * m),
            weights,
            wmax,
            guard,
            fill,
            offset: None,
        };
        if enforced {
            // Data-space contribution of the fixed exterior values.
            let exterior = Array2::from_shape_fn((canvas.rows, canvas.cols), |(r, c)| {
                if canvas.is_interior(r, c) {
                    Complex64::new(0.0, 0.0)
                } else {
                    fill
                }
            });
            op.offset = Some(op.apply_linear(&exterior, false));
        }
        op
    }

    /// Per-pixel illumination weight `W = sum_t |mu^t|^2` on the canvas.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    fn apply_linear(&self, g: &Array2<Complex64>, interior_only: bool) -> FieldStack {
        let mut out = Vec::with_capacity(self.shifts.len());
        for &t in self.shifts {
            let mut frame = Array2::zeros((self.size, self.size));
            for lr in 0..self.m {
                for lc in 0..self.m {
                    let gv = self
                        .canvas
                        .index(t.1 + lr as i64, t.0 + lc as i64)
                        .filter(|&idx| !interior_only || self.canvas.is_interior(idx.0, idx.1))
                        .map_or(Complex64::new(0.0, 0.0), |idx| g[idx]);
                    frame[(lr, lc)] = self.mu.get(lr, lc) * gv;
                }
            }
            self.dft.forward(&mut frame);
            out.push(frame);
        }
        out
    }

    /// Forward map. In enforced mode exterior pixels of `g` are ignored and
    /// the fixed boundary contribution is added instead.
    pub fn apply(&self, g: &Array2<Complex64>) -> FieldStack {
        match &self.offset {
            None => self.apply_linear(g, false),
            Some(offset) => {
                let mut out = self.apply_linear(g, true);
                for (frame, off) in out.iter_mut().zip(offset.iter()) {
                    *frame += off;
                }
                out
            }
        }
    }

    /// Adjoint of the linear part (no weight division).
    fn adjoint(&self, u: &FieldStack) -> Array2<Complex64> {
        let enforced = self.offset.is_some();
        let mut acc = Array2::zeros((self.canvas.rows, self.canvas.cols));
        for (&t, frame) in self.shifts.iter().zip(u.iter()) {
            let mut buf = frame.clone();
            self.dft.adjoint(&mut buf);
            for lr in 0..self.m {
                for lc in 0..self.m {
                    if let Some(idx) = self.canvas.index(t.1 + lr as i64, t.0 + lc as i64) {
                        if !enforced || self.canvas.is_interior(idx.0, idx.1) {
                            acc[idx] += self.mu.get(lr, lc).conj() * buf[(lr, lc)];
                        }
                    }
                }
            }
        }
        acc
    }

    fn pinv_with_fill(&self, u: &FieldStack, fill: Complex64) -> Array2<Complex64> {
        let shifted: Option<FieldStack> = self.offset.as_ref().map(|offset| {
            u.iter()
                .zip(offset.iter())
                .map(|(uf, of)| uf - of)
                .collect()
        });
        let mut acc = self.adjoint(shifted.as_ref().unwrap_or(u));
        let scale = (self.size * self.size) as f64;
        let cutoff = self.guard * self.wmax;
        for ((r, c), a) in acc.indexed_iter_mut() {
            let w = self.weights[(r, c)];
            if w <= cutoff {
                *a = fill;
            } else {
                *a /= scale * w;
            }
        }
        if self.offset.is_some() {
            // Exterior pixels are pinned to the boundary value.
            for ((r, c), a) in acc.indexed_iter_mut() {
                if !self.canvas.is_interior(r, c) {
                    *a = self.fill;
                }
            }
        }
        acc
    }

    /// `A^+ u` with never-illuminated pixels set to the boundary fill value.
    pub fn pinv(&self, u: &FieldStack) -> Result<Array2<Complex64>> {
        if self.wmax == 0.0 {
            return Err(Error::ZeroWeights);
        }
        Ok(self.pinv_with_fill(u, self.fill))
    }
}

impl MeasSideOp for ObjectSideOp<'_> {
    fn project(&self, u: &FieldStack) -> FieldStack {
        match &self.offset {
            // Zero fill keeps P linear; guarded pixels contribute nothing.
            None => self.apply_linear(&self.pinv_with_fill(u, Complex64::new(0.0, 0.0)), false),
            // Affine range: offset + P_linear(u - offset).
            Some(offset) => {
                let est = self.pinv_with_fill(u, Complex64::new(0.0, 0.0));
                let mut out = self.apply_linear(&est, true);
                for (frame, off) in out.iter_mut().zip(offset.iter()) {
                    *frame += off;
                }
                out
            }
        }
    }

    fn pullback(&self, u: &FieldStack) -> Array2<Complex64> {
        self.pinv_with_fill(u, self.fill)
    }
}

/// Probe-side operator `B nu = { DFT(nu .* f^t) }` at fixed object.
pub struct ProbeSideOp {
    frames: Vec<Array2<Complex64>>,
    m: usize,
    size: usize,
    dft: Dft2,
    weights: Array2<f64>,
    wmax: f64,
    guard: f64,
}

impl ProbeSideOp {
    fn build(frames: Vec<Array2<Complex64>>, m: usize, os: usize, guard: f64) -> Self {
        let mut weights = Array2::zeros((m, m));
        for frame in &frames {
            for (w, z) in weights.iter_mut().zip(frame.iter()) {
                *w += z.norm_sqr();
            }
        }
        let wmax = weights.iter().cloned().fold(0.0f64, f64::max);
        Self {
            frames,
            m,
            size: os * m,
            dft: Dft2::new(os * m),
            weights,
            wmax,
            guard,
        }
    }

    /// Gathers the object parts seen by each shift from the canvas.
    fn from_canvas(
        g: &Array2<Complex64>,
        canvas: &Canvas,
        shifts: &[Shift],
        m: usize,
        os: usize,
        guard: f64,
    ) -> Self {
        let frames = shifts
            .iter()
            .map(|&t| {
                Array2::from_shape_fn((m, m), |(lr, lc)| {
                    canvas
                        .index(t.1 + lr as i64, t.0 + lc as i64)
                        .map_or(Complex64::new(0.0, 0.0), |idx| g[idx])
                })
            })
            .collect();
        Self::build(frames, m, os, guard)
    }

    pub fn apply(&self, nu: &Array2<Complex64>) -> FieldStack {
        self.frames
            .iter()
            .map(|ft| {
                let mut frame = Array2::zeros((self.size, self.size));
                for lr in 0..self.m {
                    for lc in 0..self.m {
                        frame[(lr, lc)] = ft[(lr, lc)] * nu[(lr, lc)];
                    }
                }
                self.dft.forward(&mut frame);
                frame
            })
            .collect()
    }

    fn pinv_inner(&self, u: &FieldStack) -> Array2<Complex64> {
        let mut acc: Array2<Complex64> = Array2::zeros((self.m, self.m));
        for (ft, frame) in self.frames.iter().zip(u.iter()) {
            let mut buf = frame.clone();
            self.dft.adjoint(&mut buf);
            for lr in 0..self.m {
                for lc in 0..self.m {
                    acc[(lr, lc)] += ft[(lr, lc)].conj() * buf[(lr, lc)];
                }
            }
        }
        let scale = (self.size * self.size) as f64;
        let cutoff = self.guard * self.wmax;
        for (a, &w) in acc.iter_mut().zip(self.weights.iter()) {
            if w <= cutoff {
                *a = Complex64::new(0.0, 0.0);
            } else {
                *a /= scale * w;
            }
        }
        acc
    }

    pub fn pinv(&self, u: &FieldStack) -> Result<Array2<Complex64>> {
        if self.wmax == 0.0 {
            return Err(Error::ZeroWeights);
        }
        Ok(self.pinv_inner(u))
    }
}

impl MeasSideOp for ProbeSideOp {
    fn project(&self, u: &FieldStack) -> FieldStack {
        self.apply(&self.pinv_inner(u))
    }

    fn pullback(&self, u: &FieldStack) -> Array2<Complex64> {
        self.pinv_inner(u)
    }
}

/// Outcome of one Douglas-Rachford inner loop.
pub struct DrOutcome {
    pub u: FieldStack,
    /// `A^+` of the terminal iterate.
    pub estimate: Array2<Complex64>,
    /// Objective `L(P u)` before each update plus after the last one
    /// (`iters + 1` entries).
    pub objective: Vec<f64>,
}

/// Douglas-Rachford fixed-point loop
/// `u <- u/2 + b .* sgn(2 P u - u) / 2` with `sgn(0) := 1`.
pub fn dr_inner(
    b: &[Array2<f64>],
    op: &dyn MeasSideOp,
    u_init: FieldStack,
    iters: usize,
) -> DrOutcome {
    let mut u = u_init;
    let mut objective_trace = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let p = op.project(&u);
        objective_trace.push(objective(&p, b));
        for ((uf, pf), bf) in u.iter_mut().zip(p.iter()).zip(b.iter()) {
            for ((uz, pz), bm) in uf.iter_mut().zip(pf.iter()).zip(bf.iter()) {
                let reflected = 2.0 * pz - *uz;
                *uz = 0.5 * *uz + 0.5 * bm * sgn(reflected);
            }
        }
    }
    let p = op.project(&u);
    objective_trace.push(objective(&p, b));
    let estimate = op.pullback(&u);
    DrOutcome {
        u,
        estimate,
        objective: objective_trace,
    }
}

/// Data magnitudes carrying the phases of a model field: `b .* sgn(model)`.
/// Used to seed the first inner loop of each side from the current estimate;
/// seeding from zero-phase data instead costs the alternation a long
/// stagnation before the geometric phase sets in.
fn magnitude_projected(model: &FieldStack, b: &[Array2<f64>]) -> FieldStack {
    model
        .iter()
        .zip(b.iter())
        .map(|(mf, bf)| {
            Array2::from_shape_fn(mf.dim(), |idx| bf[idx] * sgn(mf[idx]))
        })
        .collect()
}

/// Object-side forward map on the plain object domain: per shift, the
/// oversampled DFT (with phase) of `mu_est .* g^t`. Linear in `g`; under
/// dark/bright boundaries exterior pixels contribute zero (boundary values
/// enter through the measurement and the boundary enforcement, not through
/// this linear map).
pub fn apply_a(
    mu_est: &ComplexImage,
    g: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    os: usize,
) -> Result<FieldStack> {
    check_shapes(mu_est, geom, Some(g))?;
    let canvas = Canvas::object_only(geom);
    let op = ObjectSideOp::build(
        mu_est,
        pattern.shifts(),
        canvas,
        os,
        DEFAULT_PINV_GUARD,
        geom.boundary.exterior_value(),
    );
    Ok(op.apply(g.array()))
}

/// Pseudoinverse of [`apply_a`]: adjoint, then pixel-wise division by the
/// illumination weight `W = sum_t |mu^t|^2`, with never-illuminated pixels
/// set to zero (dark/periodic) or the bright constant.
pub fn apply_a_pinv(
    mu_est: &ComplexImage,
    u: &FieldStack,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    os: usize,
) -> Result<ComplexImage> {
    check_shapes(mu_est, geom, None)?;
    if u.len() != pattern.len() {
        return Err(Error::SizeMismatch {
            expected: format!("{} field blocks", pattern.len()),
            actual: format!("{}", u.len()),
        });
    }
    let canvas = Canvas::object_only(geom);
    let op = ObjectSideOp::build(
        mu_est,
        pattern.shifts(),
        canvas,
        os,
        DEFAULT_PINV_GUARD,
        geom.boundary.exterior_value(),
    );
    let est = op.pinv(u)?;
    Ok(ComplexImage::from_array(est))
}

/// Illumination weight field of the object-side operator on `[0, n)^2`.
pub fn object_weights(
    mu_est: &ComplexImage,
    geom: &GridGeometry,
    pattern: &ScanPattern,
) -> Result<Array2<f64>> {
    check_shapes(mu_est, geom, None)?;
    let canvas = Canvas::object_only(geom);
    let op = ObjectSideOp::build(
        mu_est,
        pattern.shifts(),
        canvas,
        2,
        DEFAULT_PINV_GUARD,
        geom.boundary.exterior_value(),
    );
    Ok(op.weights().clone())
}

fn check_shapes(mu: &ComplexImage, geom: &GridGeometry, g: Option<&ComplexImage>) -> Result<()> {
    if mu.rows() != geom.m || mu.cols() != geom.m {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0} probe", geom.m),
            actual: format!("{}x{}", mu.rows(), mu.cols()),
        });
    }
    if let Some(g) = g {
        if g.rows() != geom.n || g.cols() != geom.n {
            return Err(Error::SizeMismatch {
                expected: format!("{0}x{0} object", geom.n),
                actual: format!("{}x{}", g.rows(), g.cols()),
            });
        }
    }
    Ok(())
}

/// Probe initialization mode.
#[derive(Clone, Copy, Debug)]
pub enum ProbeInit {
    /// Per-pixel random phase aligned with the true probe:
    /// `mu_init = mu_truth .* exp(i phi)` with `phi` uniform on
    /// `(-pi/2 + margin, pi/2 - margin)`, so `Re[conj(mu_init) mu_truth] > 0`
    /// by construction.
    AlignedRandom { seed: u64, margin: f64 },
    /// Pass the given probe through unchanged.
    Given,
}

/// Builds the initial probe guess from the true probe. Zero truth pixels
/// (alignment undefined) receive a unit-modulus random phase.
pub fn init_probe(mu_truth: &ComplexImage, mode: ProbeInit) -> ComplexImage {
    use rand::prelude::*;
    match mode {
        ProbeInit::Given => mu_truth.clone(),
        ProbeInit::AlignedRandom { seed, margin } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let half = (std::f64::consts::FRAC_PI_2 - margin).max(0.0);
            let mut zeros = 0usize;
            let out = ComplexImage::from_fn(mu_truth.rows(), mu_truth.cols(), |r, c| {
                let z = mu_truth.get(r, c);
                if z.norm() == 0.0 {
                    zeros += 1;
                    let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                    Complex64::from_polar(1.0, phase)
                } else if half > 0.0 {
                    z * Complex64::from_polar(1.0, rng.random_range(-half..half))
                } else {
                    z
                }
            });
            if zeros > 0 {
                eprintln!(
                    "init_probe: {zeros} zero-valued truth pixels received unconstrained phases"
                );
            }
            out
        }
    }
}

/// Blind alternating-minimization reconstruction. Returns per-epoch history
/// (data residual and, when the truths are supplied, relative errors).
pub fn am_reconstruct(
    b: &DiffractionSet,
    geom: &GridGeometry,
    pattern: &ScanPattern,
    mu_init: &ComplexImage,
    f_truth: Option<&ComplexImage>,
    mu_truth: Option<&ComplexImage>,
    cfg: &ReconConfig,
) -> Result<ReconState> {
    if cfg.inner_iters < 1 {
        return Err(Error::InvalidParameter("inner_iters must be >= 1".into()));
    }
    if !(cfg.pinv_guard > 0.0) {
        return Err(Error::InvalidParameter("pinv_guard must be positive".into()));
    }
    check_shapes(mu_init, geom, None)?;
    if b.frames.len() != pattern.len() {
        return Err(Error::SizeMismatch {
            expected: format!("{} frames", pattern.len()),
            actual: format!("{}", b.frames.len()),
        });
    }
    let side = b.os * geom.m;
    if b.frames.iter().any(|fr| fr.dim() != (side, side)) {
        return Err(Error::SizeMismatch {
            expected: format!("{side}x{side} frames"),
            actual: "mixed frame shapes".into(),
        });
    }
    if mu_init.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::ZeroWeights);
    }
    let os = b.os;
    let canvas = Canvas::for_recon(geom, pattern);
    let ext_value = geom.boundary.exterior_value();
    let re_window = cfg.re_window.unwrap_or(pattern.q() as i64);

    // Object estimate: all-ones on the object domain, boundary value outside.
    let mut g_canvas = Array2::from_shape_fn((canvas.rows, canvas.cols), |(r, c)| {
        if canvas.is_interior(r, c) {
            Complex64::new(1.0, 0.0)
        } else {
            ext_value
        }
    });
    let mut mu = mu_init.clone();
    let bnorm = b.norm_l2().max(1e-300);

    let mut u: Option<FieldStack> = None;
    let mut v: Option<FieldStack> = None;
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut inner = Vec::new();
    let mut converged = false;
    let mut stagnant = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let t0 = Instant::now();

        // Object update at fixed probe. With enforcement the exterior pixels
        // are held at the boundary value inside the inner loop (affine range
        // projection); otherwise they are free unknowns.
        let enforce = cfg.enforce_boundary && !geom.boundary.is_periodic();
        let op_a = if enforce {
            ObjectSideOp::build_enforced(
                &mu,
                pattern.shifts(),
                canvas,
                os,
                cfg.pinv_guard,
                ext_value,
            )
        } else {
            ObjectSideOp::build(
                &mu,
                pattern.shifts(),
                canvas,
                os,
                cfg.pinv_guard,
                ext_value,
            )
        };
        if op_a.wmax == 0.0 {
            return Err(Error::ZeroWeights);
        }
        let u0 = match u.take() {
            Some(prev) => prev,
            None => magnitude_projected(&op_a.apply(&g_canvas), &b.frames),
        };
        let out_a = dr_inner(&b.frames, &op_a, u0, cfg.inner_iters);
        g_canvas = out_a.estimate;
        u = Some(out_a.u);

        // Probe update at fixed object.
        let op_b = ProbeSideOp::from_canvas(
            &g_canvas,
            &canvas,
            pattern.shifts(),
            geom.m,
            os,
            cfg.pinv_guard,
        );
        if op_b.wmax == 0.0 {
            return Err(Error::ZeroWeights);
        }
        let v0 = match v.take() {
            Some(prev) => prev,
            None => magnitude_projected(&op_b.apply(mu.array()), &b.frames),
        };
        let out_b = dr_inner(&b.frames, &op_b, v0, cfg.inner_iters);
        let mu_next = out_b.estimate;
        v = Some(out_b.u);
        mu = ComplexImage::from_array(mu_next);

        // Termination quantity: || |B_k mu_{k+1}| - b || / ||b||.
        let model = op_b.apply(mu.array());
        let mut mismatch = 0.0;
        for (mf, bf) in model.iter().zip(b.frames.iter()) {
            for (z, m) in mf.iter().zip(bf.iter()) {
                let d = z.norm() - m;
                mismatch += d * d;
            }
        }
        let residual = mismatch.sqrt() / bnorm;

        let f_est = canvas.crop_object(&g_canvas);
        let re_object = f_truth
            .map(|ft| relative_error(ft, &f_est, re_window).map(|r| r.value))
            .transpose()?;
        let re_probe = mu_truth
            .map(|mt| probe_relative_error(mt, &mu, re_window, geom.n).map(|r| r.value))
            .transpose()?;

        let steps_down = |trace: &[f64]| {
            trace
                .windows(2)
                .filter(|w| w[1] <= w[0] + 1e-15 * w[0].abs().max(1.0))
                .count()
        };
        inner.push(InnerSummary {
            epoch,
            object_first: out_a.objective[0],
            object_last: *out_a.objective.last().unwrap(),
            probe_first: out_b.objective[0],
            probe_last: *out_b.objective.last().unwrap(),
            object_down_steps: steps_down(&out_a.objective),
            object_total_steps: out_a.objective.len() - 1,
            probe_down_steps: steps_down(&out_b.objective),
            probe_total_steps: out_b.objective.len() - 1,
        });
        history.push(EpochRecord {
            epoch,
            data_residual: residual,
            re_object,
            re_probe,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });

        if residual < cfg.tol_data {
            converged = true;
            break;
        }
        if history.len() >= 2 {
            let prev = history[history.len() - 2].data_residual;
            let change = (prev - residual).abs() / prev.max(1e-300);
            if change < cfg.stagnation_rtol {
                stagnant += 1;
                if stagnant >= cfg.stagnation_window {
                    break;
                }
            } else {
                stagnant = 0;
            }
        }
    }

    Ok(ReconState {
        f_est: canvas.crop_object(&g_canvas),
        mu_est: mu,
        u: u.unwrap_or_default(),
        v: v.unwrap_or_default(),
        history,
        inner,
        converged,
    })
}
