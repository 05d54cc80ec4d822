//! Square 2D discrete Fourier transforms used by the measurement model and
//! the reconstruction operators.
//!
//! Conventions: `forward` is the unnormalized DFT
//! `B(k) = sum_x psi(x) exp(-2*pi*i k.x / M)`; `adjoint` is its exact adjoint
//! `sum_k u(k) exp(+2*pi*i k.x / M)` (also unnormalized), so
//! `adjoint(forward(psi)) = M^2 * psi`.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub struct Dft2 {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Dft2 {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            fwd: planner.plan_fft(size, FftDirection::Forward),
            inv: planner.plan_fft(size, FftDirection::Inverse),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn transform(&self, a: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let m = self.size;
        debug_assert_eq!(a.dim(), (m, m));
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for mut row in a.rows_mut() {
            let slice = row.as_slice_mut().expect("contiguous row");
            plan.process_with_scratch(slice, &mut scratch);
        }
        let mut col = vec![Complex64::default(); m];
        for c in 0..m {
            for r in 0..m {
                col[r] = a[(r, c)];
            }
            plan.process_with_scratch(&mut col, &mut scratch);
            for r in 0..m {
                a[(r, c)] = col[r];
            }
        }
    }

    /// In-place unnormalized forward DFT.
    pub fn forward(&self, a: &mut Array2<Complex64>) {
        self.transform(a, &self.fwd);
    }

    /// In-place adjoint of [`Dft2::forward`] (unnormalized inverse kernel).
    pub fn adjoint(&self, a: &mut Array2<Complex64>) {
        self.transform(a, &self.inv);
    }
}

/// Zero-pads `src` (top-left aligned) into a `size x size` array.
pub fn pad_to(src: &Array2<Complex64>, size: usize) -> Array2<Complex64> {
    let mut out = Array2::zeros((size, size));
    for ((r, c), v) in src.indexed_iter() {
        out[(r, c)] = *v;
    }
    out
}

/// Top-left `rows x cols` corner of `src`.
pub fn crop(src: &Array2<Complex64>, rows: usize, cols: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |(r, c)| src[(r, c)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjoint_of_forward_is_scaled_identity() {
        let m = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a0 = Array2::from_shape_fn((m, m), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let dft = Dft2::new(m);
        let mut a = a0.clone();
        dft.forward(&mut a);
        dft.adjoint(&mut a);
        let scale = (m * m) as f64;
        for (x, y) in a.iter().zip(a0.iter()) {
            assert!((x - y * scale).norm() < 1e-10);
        }
    }

    #[test]
    fn adjoint_pairing() {
        // <F a, b> == <a, F* b> for the unnormalized pair.
        let m = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rnd = |_: ()| {
            Array2::from_shape_fn((m, m), |_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let a = rnd(());
        let b = rnd(());
        let dft = Dft2::new(m);
        let mut fa = a.clone();
        dft.forward(&mut fa);
        let mut fsb = b.clone();
        dft.adjoint(&mut fsb);
        let lhs: Complex64 = fa.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let rhs: Complex64 = a.iter().zip(fsb.iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((lhs - rhs).norm() < 1e-10);
    }
}
