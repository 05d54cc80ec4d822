use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Integer lattice shift `(t1, t2)`: `t1` displaces the column axis, `t2` the
/// row axis (see the crate-level coordinate convention).
pub type Shift = (i64, i64);

/// Rectangular array of complex amplitudes (object, probe, exit waves,
/// estimates, log-ratio fields).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexImage {
    data: Array2<Complex64>,
}

impl ComplexImage {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: Array2::zeros((rows, cols)),
        }
    }

    pub fn filled(rows: usize, cols: usize, v: Complex64) -> Self {
        Self {
            data: Array2::from_elem((rows, cols), v),
        }
    }

    /// Builds an image from a generator called as `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            data: Array2::from_shape_fn((rows, cols), |(r, c)| f(r, c)),
        }
    }

    pub fn from_array(data: Array2<Complex64>) -> Self {
        Self { data }
    }

    /// Builds from row-major values, checking length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::SizeMismatch {
                expected: format!("{} values ({rows}x{cols})", rows * cols),
                actual: format!("{}", values.len()),
            });
        }
        if !values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "image contains non-finite values".into(),
            ));
        }
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self { data })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[(row, col)] = v;
    }

    pub fn array(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn array_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &Complex64> {
        self.data.iter()
    }

    pub fn map(&self, f: impl FnMut(Complex64) -> Complex64) -> Self {
        Self {
            data: self.data.mapv(f),
        }
    }

    /// Element-wise product with another image of the same shape.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::SizeMismatch {
                expected: format!("{}x{}", self.rows(), self.cols()),
                actual: format!("{}x{}", other.rows(), other.cols()),
            });
        }
        Ok(Self {
            data: &self.data * &other.data,
        })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            data: self.data.mapv(|z| z * c),
        }
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        let v = vec![Complex64::new(1.0, 0.0); 5];
        assert!(ComplexImage::from_vec(2, 3, v).is_err());
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        let v = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(f64::NAN, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        assert!(ComplexImage::from_vec(2, 2, v).is_err());
    }

    #[test]
    fn hadamard_and_norm() {
        let a = ComplexImage::from_fn(2, 2, |r, c| Complex64::new((r + c) as f64, 0.0));
        let b = ComplexImage::filled(2, 2, Complex64::new(2.0, 0.0));
        let p = a.hadamard(&b).unwrap();
        assert_eq!(p.get(1, 1), Complex64::new(4.0, 0.0));
        assert!((ComplexImage::filled(1, 2, Complex64::new(3.0, 4.0)).norm_l2()
            - (50.0f64).sqrt())
        .abs()
            < 1e-12);
    }
}
