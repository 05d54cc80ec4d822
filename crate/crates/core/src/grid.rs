//! Index geometry of the `n x n` object domain and `m x m` probe domain:
//! shifted windows, wraparound, and the two block-partition schemes.
//!
//! All operations here are pure functions on immutable inputs. Shifts may be
//! arbitrary integers; scan constructors (see [`crate::scan`]) are the only
//! place where pattern structure is enforced.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, Shift};

/// Behaviour of the object domain where a shifted window leaves `[0, n)^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    /// Windows wrap around modulo `n`.
    Periodic,
    /// Exterior pixels take the value zero.
    Dark,
    /// Exterior pixels take a fixed nonzero complex value.
    Bright(Complex64),
}

impl Boundary {
    /// Value materialized into exterior pixels (zero under periodic, where it
    /// is never used).
    pub fn exterior_value(&self) -> Complex64 {
        match self {
            Boundary::Bright(v) => *v,
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

/// Object side length `n`, probe side length `m`, and the boundary regime.
#[derive(Clone, Copy, Debug)]
pub struct GridGeometry {
    pub n: usize,
    pub m: usize,
    pub boundary: Boundary,
}

impl GridGeometry {
    pub fn new(n: usize, m: usize, boundary: Boundary) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "probe size m={m} must satisfy 0 < m <= n={n}"
            )));
        }
        if let Boundary::Bright(v) = boundary {
            if v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidParameter(
                    "bright boundary value must be finite and nonzero".into(),
                ));
            }
        }
        Ok(Self { n, m, boundary })
    }

    pub fn periodic(n: usize, m: usize) -> Result<Self> {
        Self::new(n, m, Boundary::Periodic)
    }
}

/// One pixel of a shifted window: its object-domain coordinates and whether
/// it falls inside `[0, n)^2`. Under the periodic boundary coordinates are
/// already reduced mod `n` and `interior` is always true.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowPixel {
    pub row: i64,
    pub col: i64,
    pub interior: bool,
}

/// The `t`-shifted `m x m` window as an ordered (row-major in local
/// coordinates) list of object-domain pixels.
pub fn shifted_window(geom: &GridGeometry, t: Shift) -> Vec<WindowPixel> {
    let n = geom.n as i64;
    let mut out = Vec::with_capacity(geom.m * geom.m);
    for lr in 0..geom.m as i64 {
        for lc in 0..geom.m as i64 {
            let row = t.1 + lr;
            let col = t.0 + lc;
            match geom.boundary {
                Boundary::Periodic => out.push(WindowPixel {
                    row: row.rem_euclid(n),
                    col: col.rem_euclid(n),
                    interior: true,
                }),
                _ => out.push(WindowPixel {
                    row,
                    col,
                    interior: (0..n).contains(&row) && (0..n).contains(&col),
                }),
            }
        }
    }
    out
}

/// Restricts an `n x n` image to the `t`-shifted window. Exterior pixels are
/// materialized with the boundary value, so the result is always `m x m`.
pub fn restrict(x: &ComplexImage, geom: &GridGeometry, t: Shift) -> Result<ComplexImage> {
    if x.rows() != geom.n || x.cols() != geom.n {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0}", geom.n),
            actual: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    let n = geom.n as i64;
    let ext = geom.boundary.exterior_value();
    let mut out = ComplexImage::zeros(geom.m, geom.m);
    for lr in 0..geom.m {
        for lc in 0..geom.m {
            let row = t.1 + lr as i64;
            let col = t.0 + lc as i64;
            let v = match geom.boundary {
                Boundary::Periodic => {
                    x.get(row.rem_euclid(n) as usize, col.rem_euclid(n) as usize)
                }
                _ => {
                    if (0..n).contains(&row) && (0..n).contains(&col) {
                        x.get(row as usize, col as usize)
                    } else {
                        ext
                    }
                }
            };
            out.set(lr, lc, v);
        }
    }
    Ok(out)
}

/// Square block partition of an `m x m` array. Under-shift partitions use
/// `p x p` equal blocks of side `m/p`; over-shift partitions use the 3x3
/// unequal layout with per-axis segment lengths `(m-tau, 2*tau-m, m-tau)`.
#[derive(Clone, Debug)]
pub struct BlockPartition {
    m: usize,
    /// Per-axis segments as `(start, len)` in block-index order.
    segments: Vec<(usize, usize)>,
}

impl BlockPartition {
    pub fn under_shift(m: usize, p: usize) -> Result<Self> {
        if p == 0 || m % p != 0 {
            return Err(Error::InvalidParameter(format!(
                "under-shift partition needs p | m (got m={m}, p={p})"
            )));
        }
        let s = m / p;
        Ok(Self {
            m,
            segments: (0..p).map(|i| (i * s, s)).collect(),
        })
    }

    pub fn over_shift(m: usize, tau: usize) -> Result<Self> {
        if !(2 * tau > m && tau < m) {
            return Err(Error::InvalidParameter(format!(
                "over-shift partition needs m/2 < tau < m (got m={m}, tau={tau})"
            )));
        }
        let corner = m - tau;
        let center = 2 * tau - m;
        Ok(Self {
            m,
            segments: vec![(0, corner), (corner, center), (tau, corner)],
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks_per_axis(&self) -> usize {
        self.segments.len()
    }

    /// `(start, len)` of block index `i` along either axis.
    pub fn segment(&self, i: usize) -> (usize, usize) {
        self.segments[i]
    }
}

/// Splits `x` into the partition's blocks, keyed by `(i, j)` where `i` indexes
/// the column axis and `j` the row axis.
pub fn partition(
    x: &ComplexImage,
    part: &BlockPartition,
) -> Result<BTreeMap<(usize, usize), ComplexImage>> {
    if x.rows() != part.m || x.cols() != part.m {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0}", part.m),
            actual: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    let b = part.blocks_per_axis();
    let mut out = BTreeMap::new();
    for i in 0..b {
        let (c0, cw) = part.segment(i);
        for j in 0..b {
            let (r0, rh) = part.segment(j);
            let block = ComplexImage::from_fn(rh, cw, |r, c| x.get(r0 + r, c0 + c));
            out.insert((i, j), block);
        }
    }
    Ok(out)
}

/// Inverse of [`partition`]; reproduces the original array bit-for-bit.
pub fn reassemble(
    blocks: &BTreeMap<(usize, usize), ComplexImage>,
    part: &BlockPartition,
) -> Result<ComplexImage> {
    let b = part.blocks_per_axis();
    let mut out = ComplexImage::zeros(part.m, part.m);
    for i in 0..b {
        let (c0, cw) = part.segment(i);
        for j in 0..b {
            let (r0, rh) = part.segment(j);
            let block = blocks.get(&(i, j)).ok_or_else(|| {
                Error::InvalidParameter(format!("missing block ({i},{j})"))
            })?;
            if block.rows() != rh || block.cols() != cw {
                return Err(Error::SizeMismatch {
                    expected: format!("{rh}x{cw}"),
                    actual: format!("{}x{}", block.rows(), block.cols()),
                });
            }
            for r in 0..rh {
                for c in 0..cw {
                    out.set(r0 + r, c0 + c, block.get(r, c));
                }
            }
        }
    }
    Ok(out)
}
