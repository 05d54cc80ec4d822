//! Raster and perturbed-raster scan patterns and their audit against the
//! uniqueness conditions for perturbed scans.
//!
//! A pattern stores shifts `t_kl` for lattice indices `(k, l)` in the order
//! `index = k * q + l`. Separable perturbations obey
//! `t_kl = tau*(k, l) + (delta1[k], delta2[l])` with `delta1[0] = delta2[0] = 0`;
//! full-grid perturbations use per-site tables `delta1[k][l]`, `delta2[k][l]`.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Shift;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanKind {
    Raster,
    PerturbedSeparable,
    PerturbedFull,
}

impl ScanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanKind::Raster => "raster",
            ScanKind::PerturbedSeparable => "perturbed_separable",
            ScanKind::PerturbedFull => "perturbed_full",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScanPattern {
    tau: usize,
    q: usize,
    kind: ScanKind,
    /// Separable perturbation tables (length q); zeros for raster.
    delta1: Vec<i64>,
    delta2: Vec<i64>,
    /// Full-grid tables (length q*q, index k*q+l); empty unless PerturbedFull.
    delta1_full: Vec<i64>,
    delta2_full: Vec<i64>,
    shifts: Vec<Shift>,
}

impl ScanPattern {
    /// Plain raster scan of step `tau`; requires `tau | n`.
    pub fn raster(n: usize, tau: usize) -> Result<Self> {
        if tau == 0 || n % tau != 0 {
            return Err(Error::InvalidParameter(format!(
                "raster step tau={tau} must divide n={n}"
            )));
        }
        let q = n / tau;
        Self::perturbed_separable(n, tau, &vec![0; q], &vec![0; q]).map(|mut p| {
            p.kind = ScanKind::Raster;
            p
        })
    }

    /// Separable perturbed raster: `t_kl = tau*(k,l) + (delta1[k], delta2[l])`.
    pub fn perturbed_separable(n: usize, tau: usize, delta1: &[i64], delta2: &[i64]) -> Result<Self> {
        if tau == 0 || n % tau != 0 {
            return Err(Error::InvalidParameter(format!(
                "step tau={tau} must divide n={n}"
            )));
        }
        let q = n / tau;
        if delta1.len() != q || delta2.len() != q {
            return Err(Error::SizeMismatch {
                expected: format!("delta tables of length q={q}"),
                actual: format!("{} and {}", delta1.len(), delta2.len()),
            });
        }
        if delta1[0] != 0 || delta2[0] != 0 {
            return Err(Error::InvalidParameter(
                "first perturbation must be zero (delta1[0] = delta2[0] = 0)".into(),
            ));
        }
        let mut shifts = Vec::with_capacity(q * q);
        for k in 0..q {
            for l in 0..q {
                shifts.push((
                    (tau * k) as i64 + delta1[k],
                    (tau * l) as i64 + delta2[l],
                ));
            }
        }
        Ok(Self {
            tau,
            q,
            kind: ScanKind::PerturbedSeparable,
            delta1: delta1.to_vec(),
            delta2: delta2.to_vec(),
            delta1_full: Vec::new(),
            delta2_full: Vec::new(),
            shifts,
        })
    }

    /// Full-grid perturbed raster: `t_kl = tau*(k,l) + (delta1[kl], delta2[kl])`
    /// with tables in row-major `(k, l)` order.
    pub fn perturbed_full(n: usize, tau: usize, delta1: &[i64], delta2: &[i64]) -> Result<Self> {
        if tau == 0 || n % tau != 0 {
            return Err(Error::InvalidParameter(format!(
                "step tau={tau} must divide n={n}"
            )));
        }
        let q = n / tau;
        if delta1.len() != q * q || delta2.len() != q * q {
            return Err(Error::SizeMismatch {
                expected: format!("delta tables of length q*q={}", q * q),
                actual: format!("{} and {}", delta1.len(), delta2.len()),
            });
        }
        let mut shifts = Vec::with_capacity(q * q);
        for k in 0..q {
            for l in 0..q {
                let idx = k * q + l;
                shifts.push((
                    (tau * k) as i64 + delta1[idx],
                    (tau * l) as i64 + delta2[idx],
                ));
            }
        }
        Ok(Self {
            tau,
            q,
            kind: ScanKind::PerturbedFull,
            delta1: Vec::new(),
            delta2: Vec::new(),
            delta1_full: delta1.to_vec(),
            delta2_full: delta2.to_vec(),
            shifts,
        })
    }

    /// Separable pattern with i.i.d. uniform perturbations on `[-bound, bound]`
    /// (first entries re-normalized to zero). Deterministic given the seed.
    pub fn uniform_separable(n: usize, tau: usize, bound: i64, seed: u64) -> Result<Self> {
        if bound < 0 {
            return Err(Error::InvalidParameter("bound must be >= 0".into()));
        }
        let q = n
            .checked_div(tau)
            .ok_or_else(|| Error::InvalidParameter("tau must be positive".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<i64> {
            let mut v: Vec<i64> = (0..q).map(|_| rng.random_range(-bound..=bound)).collect();
            if !v.is_empty() {
                v[0] = 0;
            }
            v
        };
        let d1 = draw(&mut rng);
        let d2 = draw(&mut rng);
        Self::perturbed_separable(n, tau, &d1, &d2)
    }

    /// Full-grid pattern with i.i.d. uniform perturbations on `[-bound, bound]`.
    pub fn uniform_full(n: usize, tau: usize, bound: i64, seed: u64) -> Result<Self> {
        if bound < 0 {
            return Err(Error::InvalidParameter("bound must be >= 0".into()));
        }
        let q = n
            .checked_div(tau)
            .ok_or_else(|| Error::InvalidParameter("tau must be positive".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d1: Vec<i64> = (0..q * q).map(|_| rng.random_range(-bound..=bound)).collect();
        let d2: Vec<i64> = (0..q * q).map(|_| rng.random_range(-bound..=bound)).collect();
        Self::perturbed_full(n, tau, &d1, &d2)
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.tau * self.q
    }

    pub fn kind(&self) -> ScanKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    #[inline]
    pub fn shift(&self, k: usize, l: usize) -> Shift {
        self.shifts[k * self.q + l]
    }

    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    /// `(k, l)` lattice indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let q = self.q;
        (0..q).flat_map(move |k| (0..q).map(move |l| (k, l)))
    }

    /// Separable perturbation tables, when the pattern has them.
    pub fn delta_tables(&self) -> Option<(&[i64], &[i64])> {
        match self.kind {
            ScanKind::Raster | ScanKind::PerturbedSeparable => Some((&self.delta1, &self.delta2)),
            ScanKind::PerturbedFull => None,
        }
    }

    /// Full-grid perturbation tables (row-major `(k, l)` order), when present.
    pub fn delta_tables_full(&self) -> Option<(&[i64], &[i64])> {
        match self.kind {
            ScanKind::PerturbedFull => Some((&self.delta1_full, &self.delta2_full)),
            _ => None,
        }
    }

    /// Plain-text form: header `tau q kind`, then one `k l t1 t2` line per shift.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.tau, self.q, self.kind.as_str());
        for (k, l) in self.indices() {
            let t = self.shift(k, l);
            let _ = writeln!(s, "{} {} {} {}", k, l, t.0, t.1);
        }
        s
    }

    /// Parses the plain-text form, re-deriving the perturbation tables from
    /// the shifts and checking they are consistent with the declared kind.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty pattern file".into()))?;
        let mut hp = header.split_whitespace();
        let tau: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad tau in pattern header".into()))?;
        let q: usize = hp
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad q in pattern header".into()))?;
        let kind = match hp.next() {
            Some("raster") => ScanKind::Raster,
            Some("perturbed_separable") => ScanKind::PerturbedSeparable,
            Some("perturbed_full") => ScanKind::PerturbedFull,
            other => {
                return Err(Error::Parse(format!(
                    "bad scan kind in pattern header: {other:?}"
                )))
            }
        };
        let mut shifts = vec![None; q * q];
        for line in lines {
            let mut it = line.split_whitespace();
            let vals: Vec<i64> = it
                .by_ref()
                .map(|s| s.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("bad shift line {line:?}: {e}")))?;
            if vals.len() != 4 {
                return Err(Error::Parse(format!("bad shift line {line:?}")));
            }
            let (k, l) = (vals[0] as usize, vals[1] as usize);
            if k >= q || l >= q {
                return Err(Error::Parse(format!("shift index ({k},{l}) out of range")));
            }
            shifts[k * q + l] = Some((vals[2], vals[3]));
        }
        let shifts: Vec<Shift> = shifts
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("missing shift entries".into()))?;
        let n = tau * q;
        match kind {
            ScanKind::Raster | ScanKind::PerturbedSeparable => {
                let d1: Vec<i64> = (0..q).map(|k| shifts[k * q] .0 - (tau * k) as i64).collect();
                let d2: Vec<i64> = (0..q).map(|l| shifts[l].1 - (tau * l) as i64).collect();
                let pat = Self::perturbed_separable(n, tau, &d1, &d2)?;
                if pat.shifts != shifts {
                    return Err(Error::Parse(
                        "shift table is not separable as declared".into(),
                    ));
                }
                if kind == ScanKind::Raster && (d1.iter().any(|&d| d != 0) || d2.iter().any(|&d| d != 0)) {
                    return Err(Error::Parse("raster pattern has nonzero perturbations".into()));
                }
                Ok(Self { kind, ..pat })
            }
            ScanKind::PerturbedFull => {
                let mut d1 = vec![0i64; q * q];
                let mut d2 = vec![0i64; q * q];
                for k in 0..q {
                    for l in 0..q {
                        let t = shifts[k * q + l];
                        d1[k * q + l] = t.0 - (tau * k) as i64;
                        d2[k * q + l] = t.1 - (tau * l) as i64;
                    }
                }
                Self::perturbed_full(n, tau, &d1, &d2)
            }
        }
    }
}

/// Second differences `a_k = 2*delta[k+1] - delta[k] - delta[k+2]` over the
/// consecutive (non-wrapping) triplets `k = 0 .. q-3`.
pub fn second_differences(delta: &[i64]) -> Result<Vec<i64>> {
    if delta.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "second differences need q >= 3 (got {})",
            delta.len()
        )));
    }
    Ok((0..delta.len() - 2)
        .map(|k| 2 * delta[k + 1] - delta[k] - delta[k + 2])
        .collect())
}

/// Per-condition verdicts for a scan pattern against the perturbed-scan
/// uniqueness conditions, plus co-primality of the qualifying second
/// differences and the overlap statistic.
#[derive(Clone, Debug)]
pub struct UniquenessReport {
    pub a1: Vec<i64>,
    pub a2: Vec<i64>,
    pub passes_small1: Vec<bool>,
    pub passes_cover2: Vec<bool>,
    pub passes_small2: Vec<bool>,
    /// Triplet indices passing all three conditions (the maximal qualifying subset).
    pub qualifying: Vec<usize>,
    pub gcd1: u64,
    pub gcd2: u64,
    pub coprime_ok: bool,
    pub overlap_ratio: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// gcd over a set of magnitudes; empty or all-zero sets give 0 so that the
/// unperturbed raster always fails the co-primality test.
fn gcd_over(values: impl Iterator<Item = u64>) -> u64 {
    values.fold(0u64, gcd)
}

/// Audits a raster or separable perturbed pattern against the smallness,
/// coverage, and co-primality conditions. Full-grid patterns receive overlap
/// statistics only. No-overlap setups (`m <= tau`) report failing verdicts
/// rather than an error.
pub fn audit(pattern: &ScanPattern, m: usize) -> UniquenessReport {
    let tau = pattern.tau() as i64;
    let q = pattern.q();
    let m_i = m as i64;
    let overlap_ratio = 1.0 - pattern.tau() as f64 / m as f64;

    let mut report = UniquenessReport {
        a1: Vec::new(),
        a2: Vec::new(),
        passes_small1: Vec::new(),
        passes_cover2: Vec::new(),
        passes_small2: Vec::new(),
        qualifying: Vec::new(),
        gcd1: 0,
        gcd2: 0,
        coprime_ok: false,
        overlap_ratio,
    };

    let Some((d1, d2)) = pattern.delta_tables() else {
        return report; // full-grid: overlap statistics only
    };
    if q < 3 {
        return report;
    }

    let a1 = second_differences(d1).expect("q >= 3");
    let a2 = second_differences(d2).expect("q >= 3");

    // Largest forward difference per axis, including the cyclic pair
    // (q-1 -> 0): with the periodic wrap the translate after the last shift
    // is the first one again, so a gap there breaks coverage just as an
    // interior gap does.
    let max_step = |d: &[i64]| -> i64 {
        (0..q)
            .map(|k| d[(k + 1) % q] - d[k])
            .max()
            .expect("q >= 3")
    };
    let (step1, step2) = (max_step(d1), max_step(d2));

    for j in 0..=q - 3 {
        let small1 = tau >= (a1[j].abs() + d1[j + 1] - d1[j]).max(a2[j].abs() + d2[j + 1] - d2[j]);
        let cover2 = 2 * tau <= m_i - (d1[j + 2] - d1[j]).max(d2[j + 2] - d2[j]);
        let small2 =
            m_i - tau >= 1 + (a1[j].abs() + step1).max(a2[j].abs() + step2);
        report.passes_small1.push(small1);
        report.passes_cover2.push(cover2);
        report.passes_small2.push(small2);
        if small1 && cover2 && small2 {
            report.qualifying.push(j);
        }
    }
    report.a1 = a1;
    report.a2 = a2;
    report.gcd1 = gcd_over(report.qualifying.iter().map(|&j| report.a1[j].unsigned_abs()));
    report.gcd2 = gcd_over(report.qualifying.iter().map(|&j| report.a2[j].unsigned_abs()));
    report.coprime_ok = report.gcd1 == 1 && report.gcd2 == 1;
    report
}

type PointSet = HashSet<(i64, i64)>;

fn window_set(t: Shift, m: usize) -> PointSet {
    let mut s = PointSet::with_capacity(m * m);
    for u in 0..m as i64 {
        for v in 0..m as i64 {
            s.insert((t.0 + u, t.1 + v));
        }
    }
    s
}

fn translate(s: &PointSet, by: (i64, i64)) -> PointSet {
    s.iter().map(|p| (p.0 + by.0, p.1 + by.1)).collect()
}

fn intersect(a: &PointSet, b: &PointSet) -> PointSet {
    a.iter().filter(|p| b.contains(p)).copied().collect()
}

/// Brute-force coverage check: explicitly constructs the domain of validity
/// `D` for the second-difference relation at triplet `(k, l)` on the given
/// axis, translates it by every shift in the pattern, reduces mod `n`, and
/// reports whether the union covers the whole object domain. This is an
/// independent set-arithmetic check of the closed-form audit conditions.
pub fn coverage_union(
    pattern: &ScanPattern,
    m: usize,
    k: usize,
    l: usize,
    axis: u8,
) -> Result<bool> {
    if pattern.kind() == ScanKind::PerturbedFull {
        return Err(Error::InvalidParameter(
            "coverage check applies to raster and separable patterns only".into(),
        ));
    }
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidParameter(format!("axis must be 1 or 2, got {axis}")));
    }
    let q = pattern.q();
    let (j0, j1, j2) = if axis == 1 {
        if k + 2 >= q || l >= q {
            return Err(Error::InvalidParameter(format!(
                "triplet ({k},{l}) out of range for q={q}"
            )));
        }
        ((k, l), (k + 1, l), (k + 2, l))
    } else {
        if l + 2 >= q || k >= q {
            return Err(Error::InvalidParameter(format!(
                "triplet ({k},{l}) out of range for q={q}"
            )));
        }
        ((k, l), (k, l + 1), (k, l + 2))
    };
    let t0 = pattern.shift(j0.0, j0.1);
    let t1 = pattern.shift(j1.0, j1.1);
    let t2 = pattern.shift(j2.0, j2.1);

    let w = window_set(t0, m);
    // D = {W ∩ (W - 2t1 + t2 + t0) ∩ (W - t1 + t0)} ∪ {W ∩ (W + t2 - t1)}
    let neg_a = (t2.0 + t0.0 - 2 * t1.0, t2.1 + t0.1 - 2 * t1.1);
    let back = (t0.0 - t1.0, t0.1 - t1.1);
    let fwd = (t2.0 - t1.0, t2.1 - t1.1);
    let d_first = intersect(&intersect(&w, &translate(&w, neg_a)), &translate(&w, back));
    let d_second = intersect(&w, &translate(&w, fwd));
    let mut d: PointSet = d_first;
    d.extend(d_second);
    // S = D ∩ W ∩ (W - a)  where (a per axis) = -neg_a
    let s = intersect(&intersect(&d, &w), &translate(&w, neg_a));

    let n = pattern.n() as i64;
    let mut covered = vec![false; (n * n) as usize];
    for &t in pattern.shifts() {
        for p in &s {
            let x = (p.0 + t.0).rem_euclid(n);
            let y = (p.1 + t.1).rem_euclid(n);
            covered[(y * n + x) as usize] = true;
        }
    }
    Ok(covered.iter().all(|&c| c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_shifts() {
        let p = ScanPattern::raster(8, 2).unwrap();
        assert_eq!(p.len(), 16);
        assert_eq!(p.shift(0, 0), (0, 0));
        assert_eq!(p.shift(0, 1), (0, 2));
        assert_eq!(p.shift(3, 3), (6, 6));
        let single = ScanPattern::raster(8, 8).unwrap();
        assert_eq!(single.shifts(), &[(0, 0)]);
        assert!(ScanPattern::raster(8, 3).is_err());
    }

    #[test]
    fn separable_matches_simple_perturbation() {
        // delta1 = delta2 = (0,0,-1,0): t_20 = (3, 0) for tau = 2.
        let d = [0, 0, -1, 0];
        let p = ScanPattern::perturbed_separable(8, 2, &d, &d).unwrap();
        assert_eq!(p.shift(2, 0), (3, 0));
        assert_eq!(p.shift(0, 2), (0, 3));
        let zero = ScanPattern::perturbed_separable(8, 2, &[0; 4], &[0; 4]).unwrap();
        assert_eq!(zero.shifts(), ScanPattern::raster(8, 2).unwrap().shifts());
        assert!(ScanPattern::perturbed_separable(8, 2, &[1, 0, 0, 0], &[0; 4]).is_err());
    }

    #[test]
    fn full_tables() {
        let q = 4;
        let zeros = vec![0i64; q * q];
        let p = ScanPattern::perturbed_full(8, 2, &zeros, &zeros).unwrap();
        assert_eq!(p.shifts(), ScanPattern::raster(8, 2).unwrap().shifts());
        let p = ScanPattern::uniform_full(8, 2, 4, 42).unwrap();
        assert_eq!(p.len(), 16);
        assert!(ScanPattern::perturbed_full(8, 2, &zeros[..3], &zeros).is_err());
    }

    #[test]
    fn second_difference_values() {
        assert_eq!(second_differences(&[0, 0, -1, 0]).unwrap(), vec![1, -2]);
        assert_eq!(second_differences(&[0, 0, 0, 0]).unwrap(), vec![0, 0]);
        assert_eq!(second_differences(&[0, 1, 2, 3]).unwrap(), vec![0, 0]);
        assert!(second_differences(&[0, 1]).is_err());
    }

    #[test]
    fn second_differences_of_affine_sequence_vanish() {
        for (b, c) in [(2i64, 3i64), (-1, 0), (5, -4)] {
            let d: Vec<i64> = (0..7).map(|k| b * k + c).collect();
            assert!(second_differences(&d).unwrap().iter().all(|&a| a == 0));
        }
    }

    #[test]
    fn audit_pure_raster_fails_coprime() {
        let p = ScanPattern::raster(8, 2).unwrap();
        let rep = audit(&p, 4);
        assert!(rep.a1.iter().all(|&a| a == 0));
        assert_eq!(rep.gcd1, 0);
        assert!(!rep.coprime_ok);
        assert!((rep.overlap_ratio - 0.5).abs() < 1e-15);
        // Conditions themselves hold for the under-shifted raster.
        assert!(rep.passes_small1.iter().all(|&b| b));
        assert!(rep.passes_cover2.iter().all(|&b| b));
        assert!(rep.passes_small2.iter().all(|&b| b));
    }

    #[test]
    fn audit_simple_perturbation_passes() {
        // tau=2, q=4, delta=(0,0,-1,0), m=6: j=0 satisfies
        //   small1:  tau >= |a_0| + d1 - d0 = 1
        //   cover2:  2 tau <= m - (d2 - d0) = m + 1
        //   small2:  m - tau >= 1 + |a_0| + max step = 3
        // and j=1 just as well (2 >= 1, 4 <= 6, 4 >= 4), so the qualifying
        // gcds are gcd(1, 2) = 1 on both axes.
        let d = [0, 0, -1, 0];
        let p = ScanPattern::perturbed_separable(8, 2, &d, &d).unwrap();
        let rep = audit(&p, 6);
        assert_eq!(rep.a1, vec![1, -2]);
        assert_eq!(rep.qualifying, vec![0, 1]);
        assert_eq!(rep.gcd1, 1);
        assert_eq!(rep.gcd2, 1);
        assert!(rep.coprime_ok);

        // Shrinking the probe to m=5 drops j=1 (3 < 4) but j=0 still carries
        // the certificate.
        let rep = audit(&p, 5);
        assert_eq!(rep.qualifying, vec![0]);
        assert!(rep.coprime_ok);
    }

    #[test]
    fn audit_no_overlap_fails_without_error() {
        let p = ScanPattern::raster(8, 4).unwrap();
        let rep = audit(&p, 4);
        assert!((rep.overlap_ratio).abs() < 1e-15);
        assert!(rep.qualifying.is_empty());
        assert!(!rep.coprime_ok);
    }

    #[test]
    fn audit_full_pattern_only_overlap() {
        let p = ScanPattern::uniform_full(8, 2, 3, 9).unwrap();
        let rep = audit(&p, 4);
        assert!(rep.a1.is_empty());
        assert!(!rep.coprime_ok);
        assert!((rep.overlap_ratio - 0.5).abs() < 1e-15);
    }

    #[test]
    fn audit_oversized_perturbation_flagged() {
        // delta beyond the probe size: constructed fine, fails the audit.
        let d1 = [0, 9, 0, 0];
        let p = ScanPattern::perturbed_separable(8, 2, &d1, &[0; 4]).unwrap();
        let rep = audit(&p, 4);
        assert!(rep.qualifying.is_empty());
        assert!(!rep.coprime_ok);
    }

    #[test]
    fn audit_invariant_under_axis_constant() {
        // Adding a constant to one axis table and re-normalizing delta[0] to 0
        // leaves every condition quantity unchanged.
        let d1 = [0, 2, -1, 1];
        let d2 = [0, -1, 0, 2];
        let p = ScanPattern::perturbed_separable(12, 3, &d1, &d2).unwrap();
        let rep = audit(&p, 7);
        let shifted: Vec<i64> = d1.iter().map(|&d| d + 5 - 5).collect();
        let p2 = ScanPattern::perturbed_separable(12, 3, &shifted, &d2).unwrap();
        let rep2 = audit(&p2, 7);
        assert_eq!(rep.qualifying, rep2.qualifying);
        assert_eq!(rep.coprime_ok, rep2.coprime_ok);
        assert_eq!(rep.a1, rep2.a1);
    }

    #[test]
    fn coverage_raster_within_bound() {
        // Raster with tau <= (m-2) ∧ floor((m+1)/2): covered.
        let p = ScanPattern::raster(12, 2).unwrap();
        assert!(coverage_union(&p, 6, 0, 0, 1).unwrap());
        assert!(coverage_union(&p, 6, 0, 0, 2).unwrap());
    }

    #[test]
    fn coverage_no_overlap_false() {
        let p = ScanPattern::raster(12, 4).unwrap();
        assert!(!coverage_union(&p, 4, 0, 0, 1).unwrap());
    }

    #[test]
    fn coverage_perturbed_example() {
        let d = [0, 0, -1, 0];
        let p = ScanPattern::perturbed_separable(12, 3, &d, &d).unwrap();
        assert!(coverage_union(&p, 6, 0, 0, 1).unwrap());
    }

    #[test]
    fn coverage_rejects_bad_arguments() {
        let p = ScanPattern::raster(12, 3).unwrap();
        assert!(coverage_union(&p, 6, 3, 0, 1).is_err());
        assert!(coverage_union(&p, 6, 0, 0, 3).is_err());
        let full = ScanPattern::uniform_full(12, 3, 2, 1).unwrap();
        assert!(coverage_union(&full, 6, 0, 0, 1).is_err());
    }

    #[test]
    fn audit_conditions_imply_coverage_random() {
        // Sufficiency of the closed-form conditions: whenever a triplet
        // qualifies, the brute-force union covers the object domain.
        let mut checked = 0;
        for seed in 0..60u64 {
            for m in [5usize, 6, 7, 8] {
                let p = ScanPattern::uniform_separable(12, 3, 2, seed).unwrap();
                let rep = audit(&p, m);
                for &j in &rep.qualifying {
                    for l in 0..p.q() {
                        assert!(
                            coverage_union(&p, m, j, l, 1).unwrap(),
                            "axis 1 gap: seed={seed} m={m} j={j} l={l}"
                        );
                        assert!(
                            coverage_union(&p, m, l, j, 2).unwrap(),
                            "axis 2 gap: seed={seed} m={m} j={j} l={l}"
                        );
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 50, "too few qualifying triplets exercised: {checked}");
    }

    #[test]
    fn text_roundtrip() {
        let d = [0, 0, -1, 0];
        let p = ScanPattern::perturbed_separable(8, 2, &d, &d).unwrap();
        let text = p.to_text();
        assert!(text.starts_with("2 4 perturbed_separable"));
        let back = ScanPattern::from_text(&text).unwrap();
        assert_eq!(back.shifts(), p.shifts());
        assert_eq!(back.kind(), ScanKind::PerturbedSeparable);

        let full = ScanPattern::uniform_full(8, 2, 3, 5).unwrap();
        let back = ScanPattern::from_text(&full.to_text()).unwrap();
        assert_eq!(back.shifts(), full.shifts());

        assert!(ScanPattern::from_text("garbage header\n").is_err());
        assert!(ScanPattern::from_text("").is_err());
    }
}
