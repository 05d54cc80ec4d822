//! Prints the convergence history for a configurable desk-scale run.
//! Usage: convergence_probe [n] [m] [tau] [bound] [epochs] [seed] [mode]
//! with mode one of: perturbed (default), raster, bright, dark.

use num_complex::Complex64;
use ptycho_core::forward::measure;
use ptycho_core::metrics::data_residual;
use ptycho_core::recon::{am_reconstruct, init_probe, ProbeInit, ReconConfig};
use ptycho_core::scan::audit;
use ptycho_core::synth;
use ptycho_core::{Boundary, GridGeometry, ScanPattern};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |i: usize, d: usize| -> usize {
        args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d)
    };
    let n = get(1, 64);
    let m = get(2, 16);
    let tau = get(3, 8);
    let bound = get(4, 2) as i64;
    let epochs = get(5, 200);
    let seed = get(6, 1000) as u64;
    let mode = args.get(7).map(String::as_str).unwrap_or("perturbed");

    let boundary = match mode {
        "bright" => Boundary::Bright(Complex64::new(100.0, 0.0)),
        "dark" => Boundary::Dark,
        _ => Boundary::Periodic,
    };
    let geom = GridGeometry::new(n, m, boundary).unwrap();
    let pattern = if mode == "raster" {
        ScanPattern::raster(n, tau).unwrap()
    } else {
        ScanPattern::uniform_separable(n, tau, bound, seed).unwrap()
    };
    let rep = audit(&pattern, m);
    println!(
        "pattern: q={} coprime_ok={} gcd=({},{}) overlap={:.2} a1={:?}",
        pattern.q(),
        rep.coprime_ok,
        rep.gcd1,
        rep.gcd2,
        rep.overlap_ratio,
        rep.a1
    );
    let f = synth::object(synth::ObjectKind::CibLike, n, seed + 1).unwrap();
    let mu = synth::random_phase_probe(m, seed + 2);
    let b = measure(&f, &mu, &geom, &pattern, 2).unwrap();
    let mu1 = init_probe(&mu, ProbeInit::AlignedRandom { seed: seed + 3, margin: 0.05 });
    println!(
        "truth-pair residual check: {:.3e}",
        data_residual(&b, &f, &mu, &geom, &pattern, 2).unwrap()
    );
    let cfg = ReconConfig {
        max_epochs: epochs,
        inner_iters: 30,
        tol_data: 1e-12,
        ..Default::default()
    };
    let state = am_reconstruct(&b, &geom, &pattern, &mu1, Some(&f), Some(&mu), &cfg).unwrap();
    for rec in state
        .history
        .iter()
        .filter(|r| r.epoch <= 10 || r.epoch % 10 == 0)
    {
        println!(
            "epoch {:4}  residual {:.3e}  RE_obj {:.3e}  RE_probe {:.3e}  ({:.0} ms)",
            rec.epoch,
            rec.data_residual,
            rec.re_object.unwrap_or(f64::NAN),
            rec.re_probe.unwrap_or(f64::NAN),
            rec.wall_ms
        );
    }
}
