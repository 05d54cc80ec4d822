//! Blind-ptychography toolkit: forward simulation of windowed Fourier
//! magnitude data on raster and perturbed-raster scans, closed-form
//! constructors for every ambiguity class of the raster scan, scan-pattern
//! audits against the uniqueness conditions, and blind reconstruction by
//! alternating minimization with Douglas-Rachford inner loops.
//!
//! # Coordinate convention
//!
//! Images are stored row-major and indexed `(row, col)`. Lattice quantities
//! (shifts, window offsets, phase-ramp slopes) are 2-vectors `(a1, a2)` where
//! the first component moves along the **column** axis and the second along
//! the **row** axis. A shift `t = (t1, t2)` therefore places the probe window
//! over columns `[t1, t1+m)` and rows `[t2, t2+m)`. Scan indices `(k, l)` map
//! to `t_kl = tau*(k, l) + delta`, with `k` on the first (column) axis.

pub mod ambiguity;
pub mod dft;
pub mod error;
pub mod forward;
pub mod grid;
pub mod image;
pub mod io;
pub mod metrics;
pub mod recon;
pub mod scan;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Boundary, GridGeometry};
pub use image::{ComplexImage, Shift};
pub use scan::ScanPattern;
