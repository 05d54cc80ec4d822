//! Command implementations behind the `ptycho` binary. Each returns the
//! process exit code: 0 success, 1 numeric failure, 2 usage/IO error is
//! produced by the caller from returned errors.

use std::path::Path;

use ndarray::Array2;

use ptycho_core::ambiguity::{
    affine_phase_pair, pathology_pair, pathology_pair_overshift, progression_pair, scaling_pair,
    verify_same_data, AmbiguityParams,
};
use ptycho_core::forward::measure;
use ptycho_core::io;
use ptycho_core::metrics::{probe_relative_error, relative_error};
use ptycho_core::recon::{am_reconstruct, init_probe, ProbeInit, ReconConfig};
use ptycho_core::scan::{audit, UniquenessReport};
use ptycho_core::synth;
use ptycho_core::{ComplexImage, Error, Result, ScanPattern};

use crate::config::{ExperimentConfig, SourceSpec};

const DATA_EQUIVALENCE_TOL: f64 = 1e-10;

fn load_object(cfg: &ExperimentConfig) -> Result<ComplexImage> {
    let f = match &cfg.object {
        SourceSpec::Synthetic { kind, seed } => {
            synth::object(synth::ObjectKind::parse(kind)?, cfg.n, *seed)?
        }
        SourceSpec::File(path) => io::read_ptyc(path)?,
    };
    if f.rows() != cfg.n || f.cols() != cfg.n {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0} object", cfg.n),
            actual: format!("{}x{}", f.rows(), f.cols()),
        });
    }
    Ok(f)
}

fn load_probe(cfg: &ExperimentConfig) -> Result<ComplexImage> {
    let mu = match &cfg.probe {
        SourceSpec::Synthetic { seed, .. } => synth::random_phase_probe(cfg.m, *seed),
        SourceSpec::File(path) => io::read_ptyc(path)?,
    };
    if mu.rows() != cfg.m || mu.cols() != cfg.m {
        return Err(Error::SizeMismatch {
            expected: format!("{0}x{0} probe", cfg.m),
            actual: format!("{}x{}", mu.rows(), mu.cols()),
        });
    }
    Ok(mu)
}

/// Simulates the measurement: writes truth PTYC files, the pattern table,
/// and the PTYD data set. Deterministic given the config seeds.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<i32> {
    let geom = cfg.geometry()?;
    let pattern = cfg.build_pattern()?;
    let f = load_object(cfg)?;
    let mu = load_probe(cfg)?;
    let data = measure(&f, &mu, &geom, &pattern, cfg.os)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    io::write_ptyc(&cfg.out_dir.join("object.ptyc"), &f)?;
    io::write_ptyc(&cfg.out_dir.join("probe.ptyc"), &mu)?;
    io::write_pattern(&cfg.out_dir.join("pattern.txt"), &pattern)?;
    io::write_ptyd(&cfg.out_dir.join("data.ptyd"), &data)?;
    println!("out_dir={}", cfg.out_dir.display());
    println!("frames={}", data.frames.len());
    println!("frame_side={}", data.frame_side());
    Ok(0)
}

fn print_report(pattern: &ScanPattern, m: usize, rep: &UniquenessReport) {
    let joined = |v: &[i64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let joined_b = |v: &[bool]| {
        v.iter()
            .map(|x| if *x { "1" } else { "0" }.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    println!("tau={}", pattern.tau());
    println!("q={}", pattern.q());
    println!("kind={}", pattern.kind().as_str());
    println!("m={m}");
    println!("overlap_ratio={:.6}", rep.overlap_ratio);
    println!("a1={}", joined(&rep.a1));
    println!("a2={}", joined(&rep.a2));
    println!("passes_small1={}", joined_b(&rep.passes_small1));
    println!("passes_cover2={}", joined_b(&rep.passes_cover2));
    println!("passes_small2={}", joined_b(&rep.passes_small2));
    println!(
        "qualifying={}",
        rep.qualifying
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    println!("gcd1={}", rep.gcd1);
    println!("gcd2={}", rep.gcd2);
    println!("coprime_ok={}", rep.coprime_ok);
}

/// Audits a scan-pattern file against the uniqueness conditions.
pub fn cmd_audit_file(pattern_path: &Path, m: usize) -> Result<i32> {
    let pattern = io::read_pattern(pattern_path)?;
    let rep = audit(&pattern, m);
    print_report(&pattern, m, &rep);
    Ok(0)
}

/// Audits the pattern described by a config.
pub fn cmd_audit_config(cfg: &ExperimentConfig) -> Result<i32> {
    let pattern = cfg.build_pattern()?;
    let rep = audit(&pattern, cfg.m);
    print_report(&pattern, cfg.m, &rep);
    Ok(0)
}

/// Builds the configured ambiguity pair, writes it, and verifies data
/// equivalence against the truth pair.
pub fn cmd_ambiguity(cfg: &ExperimentConfig) -> Result<i32> {
    let geom = cfg.geometry()?;
    let pattern = cfg.build_pattern()?;
    let f = load_object(cfg)?;
    let mu = load_probe(cfg)?;
    let spec = &cfg.ambiguity;
    let two_pi = 2.0 * std::f64::consts::PI;
    let psi = |tau: usize| -> Result<Array2<f64>> {
        if spec.psi == "zero" {
            Ok(Array2::zeros((tau, tau)))
        } else if spec.psi == "random" {
            Ok(synth::random_phase_block(tau, spec.psi_seed))
        } else if let Some(v) = spec.psi.strip_prefix("constant:") {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("bad ambiguity.psi {:?}", spec.psi)))?;
            Ok(Array2::from_elem((tau, tau), v))
        } else {
            Err(Error::Parse(format!("bad ambiguity.psi {:?}", spec.psi)))
        }
    };
    // Resolve lattice units to radians.
    let params = AmbiguityParams {
        c: spec.c,
        a: spec.a,
        b: spec.b,
        w: [
            spec.w_units.0 as f64 * two_pi / cfg.n as f64,
            spec.w_units.1 as f64 * two_pi / cfg.n as f64,
        ],
        theta00: spec.theta00,
        r: [
            spec.r_units.0 as f64 * two_pi / pattern.q() as f64,
            spec.r_units.1 as f64 * two_pi / pattern.q() as f64,
        ],
        psi: if spec.class == "pathology" {
            Some(psi(pattern.tau())?)
        } else {
            None
        },
    };
    let (g, nu) = match spec.class.as_str() {
        "scaling" => scaling_pair(&f, &mu, params.c)?,
        "affine" => affine_phase_pair(&f, &mu, params.a, params.b, params.w),
        "progression" => progression_pair(&f, &mu, &pattern, params.theta00, params.r)?,
        "pathology" => {
            let block = params.psi.as_ref().expect("psi resolved above");
            // Dispatch on the shift regime.
            if 2 * pattern.tau() <= cfg.m {
                pathology_pair(&f, &mu, &pattern, block, params.theta00, params.r)?
            } else {
                pathology_pair_overshift(&f, &mu, &pattern, block, params.theta00, params.r)?
            }
        }
        other => return Err(Error::Parse(format!("unknown ambiguity class {other:?}"))),
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    io::write_ptyc(&cfg.out_dir.join("g.ptyc"), &g)?;
    io::write_ptyc(&cfg.out_dir.join("nu.ptyc"), &nu)?;
    let max_dev = verify_same_data(&f, &mu, &g, &nu, &geom, &pattern, cfg.os)?;
    println!("class={}", spec.class);
    println!("max_dev={max_dev:.6e}");
    println!("data_equivalent={}", max_dev < DATA_EQUIVALENCE_TOL);
    Ok(0)
}

/// Runs the blind reconstruction against the simulated data and writes the
/// estimates plus the per-epoch convergence CSV.
pub fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<i32> {
    let geom = cfg.geometry()?;
    let pattern = cfg.build_pattern()?;
    let data = io::read_ptyd(&cfg.out_dir.join("data.ptyd"), &pattern)?;
    if data.os != cfg.os || data.m != cfg.m {
        return Err(Error::Parse(format!(
            "data file has os={} m={}, config says os={} m={}",
            data.os, data.m, cfg.os, cfg.m
        )));
    }
    let truth_f_path = cfg.out_dir.join("object.ptyc");
    let truth_mu_path = cfg.out_dir.join("probe.ptyc");
    let f_truth = truth_f_path.exists().then(|| io::read_ptyc(&truth_f_path)).transpose()?;
    let mu_truth = truth_mu_path
        .exists()
        .then(|| io::read_ptyc(&truth_mu_path))
        .transpose()?;

    let mu_init = match &mu_truth {
        Some(mu) => init_probe(
            mu,
            ProbeInit::AlignedRandom {
                seed: cfg.recon.seed,
                margin: cfg.recon.init_margin,
            },
        ),
        None => {
            return Err(Error::Parse(
                "reconstruction needs probe.ptyc in the output directory for the aligned initial guess".into(),
            ))
        }
    };

    let rcfg = ReconConfig {
        max_epochs: cfg.recon.max_epochs,
        inner_iters: cfg.recon.inner_iters,
        os: cfg.os,
        tol_data: cfg.recon.tol_data,
        enforce_boundary: cfg.recon.enforce_boundary,
        pinv_guard: cfg.recon.pinv_guard,
        seed: cfg.recon.seed,
        re_window: cfg.recon.re_window,
        ..Default::default()
    };
    let state = am_reconstruct(
        &data,
        &geom,
        &pattern,
        &mu_init,
        f_truth.as_ref(),
        mu_truth.as_ref(),
        &rcfg,
    )?;

    io::write_ptyc(&cfg.out_dir.join("f_est.ptyc"), &state.f_est)?;
    io::write_ptyc(&cfg.out_dir.join("mu_est.ptyc"), &state.mu_est)?;
    io::write_convergence_csv(&cfg.out_dir.join("convergence.csv"), &state.history)?;

    let last = state.history.last().ok_or_else(|| {
        Error::InvalidParameter("reconstruction produced no epochs (max_epochs = 0?)".into())
    })?;
    println!("epochs={}", last.epoch);
    println!("data_residual={:.6e}", last.data_residual);
    println!("converged={}", state.converged);
    if let Some(re) = last.re_object {
        println!("re_object={re:.6e}");
    }
    if let Some(re) = last.re_probe {
        println!("re_probe={re:.6e}");
    }
    let window = cfg.recon.re_window.unwrap_or(pattern.q() as i64);
    if let Some(ft) = &f_truth {
        let re = relative_error(ft, &state.f_est, window)?;
        println!("slope_r1={}", re.best_r.0);
        println!("slope_r2={}", re.best_r.1);
    }
    if let Some(mt) = &mu_truth {
        let re = probe_relative_error(mt, &state.mu_est, window, cfg.n)?;
        println!("probe_slope_r1={}", re.best_r.0);
        println!("probe_slope_r2={}", re.best_r.1);
    }
    if cfg.recon.require_tol && !state.converged {
        eprintln!(
            "did not reach tol_data={:.3e} within {} epochs",
            cfg.recon.tol_data, cfg.recon.max_epochs
        );
        return Ok(1);
    }
    Ok(0)
}

/// Writes the effective scan pattern of a config without simulating.
pub fn cmd_pattern(cfg: &ExperimentConfig, path: &Path) -> Result<i32> {
    let pattern = cfg.build_pattern()?;
    io::write_pattern(path, &pattern)?;
    println!("pattern={}", path.display());
    Ok(0)
}
