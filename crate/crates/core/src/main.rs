use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rhomatch::config::ExperimentConfig;
use rhomatch::error::{Error, Result};
use rhomatch::field::DensityField;
use rhomatch::pipeline::{emit_report, run_pipeline, ConvergenceReport};
use rhomatch::realloc::l2_match;
use rhomatch::sign::{assemble, extract_sign, pick_sign_epsilon, subsequence_select};
use rhomatch::smoothing::{theta_eps, Mollifier};
use rhomatch::tol::REALLOC_DEFAULT_TOL;
use rhomatch::trace::{NullTracer, Tracer, TsvTracer};
use rhomatch::wff;

/// Build wavefunction sequences with prescribed single-particle densities.
#[derive(Parser)]
#[command(name = "rhomatch", version, about)]
struct Cli {
    /// Stream per-stage diagnostics as tab-separated lines on stdout.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a config file.
    Run { config: PathBuf },
    /// Reallocate marginal mass of a wavefunction onto a target density.
    Reallocate {
        /// Input wavefunction (.wff, configuration-space, real).
        phi: PathBuf,
        /// Target density (.wff, single-particle).
        rho_n: PathBuf,
        /// Stopping tolerance for the excess residual.
        #[arg(long, default_value_t = REALLOC_DEFAULT_TOL)]
        tol: f64,
        /// Output path for the matched wavefunction.
        #[arg(long, default_value = "reallocated.wff")]
        out: PathBuf,
    },
    /// Apply the marginal-preserving smoothing operator.
    Smooth {
        /// Input wavefunction (.wff).
        u: PathBuf,
        /// Gaussian width parameter (variance).
        #[arg(long)]
        eps: f64,
        /// Output path for the smoothed wavefunction.
        #[arg(long, default_value = "smoothed.wff")]
        out: PathBuf,
    },
    /// Recover signed wavefunctions: pair smoothed signs of psi with the
    /// given wavefunction sequence and lift them to phases.
    Lift {
        /// Reference wavefunction psi (.wff, real).
        psi: PathBuf,
        /// Wavefunction sequence phi_1.wff phi_2.wff ...
        #[arg(required = true)]
        phi_n: Vec<PathBuf>,
        /// Directory for the lifted psi_k.wff outputs.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Summarize a run directory and check its report invariants.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut tsv;
    let mut null = NullTracer;
    let tracer: &mut dyn Tracer = if cli.trace {
        tsv = TsvTracer::new(std::io::stdout());
        &mut tsv
    } else {
        &mut null
    };
    match dispatch(cli.command, tracer) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command, tracer: &mut dyn Tracer) -> Result<()> {
    match command {
        Command::Run { config } => cmd_run(&config, tracer),
        Command::Reallocate {
            phi,
            rho_n,
            tol,
            out,
        } => cmd_reallocate(&phi, &rho_n, tol, &out, tracer),
        Command::Smooth { u, eps, out } => cmd_smooth(&u, eps, &out, tracer),
        Command::Lift {
            psi,
            phi_n,
            out_dir,
        } => cmd_lift(&psi, &phi_n, &out_dir, tracer),
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn cmd_run(config: &Path, tracer: &mut dyn Tracer) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config)?;
    let out = run_pipeline(&cfg, tracer)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let report_path = cfg.output_dir.join("report.csv");
    emit_report(&out.report, &report_path)?;
    if cfg.save_fields {
        wff::write_config(&cfg.output_dir.join("psi.wff"), &out.psi)?;
        wff::write_scalar(&cfg.output_dir.join("rho.wff"), &out.rho)?;
        for (i, (target, psi_n)) in out.rho_seq.iter().zip(&out.psi_seq).enumerate() {
            wff::write_scalar(&cfg.output_dir.join(format!("rho_{}.wff", i + 1)), target)?;
            wff::write_config(&cfg.output_dir.join(format!("psi_{}.wff", i + 1)), psi_n)?;
        }
    }
    print!("{}", out.report.to_csv());
    eprintln!("report written to {}", report_path.display());
    Ok(())
}

fn cmd_reallocate(
    phi_path: &Path,
    rho_path: &Path,
    tol: f64,
    out: &Path,
    tracer: &mut dyn Tracer,
) -> Result<()> {
    let phi = wff::read_config(phi_path)?;
    let target = DensityField::new(wff::read_scalar(rho_path, phi.grid())?)?;
    let result = l2_match(&phi, &target, tol, tracer)?;
    wff::write_config(out, &result.phi_out)?;
    println!(
        "iterations={} residual={:.3e} deficit_mass={:.3e} mass_defect={:.3e} marginal_error={:.3e}",
        result.iterations, result.residual, result.q_n, result.mass_defect, result.marginal_error
    );
    Ok(())
}

fn cmd_smooth(u_path: &Path, eps: f64, out: &Path, tracer: &mut dyn Tracer) -> Result<()> {
    let u = wff::read_config(u_path)?;
    let moll = Mollifier::gaussian(eps, u.grid())?;
    let result = theta_eps(&u, &moll)?;
    tracer.smoothing(eps, result.marginal_error, result.u_eps.h1_distance(&u)?);
    wff::write_config(out, &result.u_eps)?;
    println!(
        "eps={eps} marginal_error={:.3e} leakage={:.3e} dual_gap={:.3e}",
        result.marginal_error, result.leakage, result.dual_gap
    );
    Ok(())
}

fn cmd_lift(
    psi_path: &Path,
    phi_paths: &[PathBuf],
    out_dir: &Path,
    tracer: &mut dyn Tracer,
) -> Result<()> {
    if phi_paths.len() < 2 {
        return Err(Error::InvalidArgument(
            "lifting needs at least two wavefunctions in the sequence".into(),
        ));
    }
    let psi = wff::read_config(psi_path)?;
    let lambda = psi.abs();
    let e = extract_sign(&psi)?;
    let mut phis = Vec::with_capacity(phi_paths.len());
    for p in phi_paths {
        let f = wff::read_config(p)?;
        if f.grid() != psi.grid() {
            return Err(Error::InvalidArgument(format!(
                "{} lives on a different grid than psi",
                p.display()
            )));
        }
        phis.push(f);
    }
    let n_levels = phis.len();
    let mut signs = Vec::with_capacity(n_levels);
    for level in 1..=n_levels {
        signs.push(pick_sign_epsilon(&e, level, n_levels, &lambda)?);
    }
    let lips: Vec<f64> = signs.iter().map(|s| s.lip).collect();
    let mut a_seq = Vec::with_capacity(n_levels);
    for f in &phis {
        a_seq.push(f.l2_distance(&lambda)?);
    }
    let selection = subsequence_select(&lips, &a_seq)?;
    let chosen: Vec<_> = selection
        .levels
        .iter()
        .map(|&level| signs[level - 1].e_n.clone())
        .collect();
    let states = assemble(&chosen, &phis, &psi)?;
    std::fs::create_dir_all(out_dir)?;
    for (k, state) in states.iter().enumerate() {
        let level = selection.levels[k];
        tracer.sign(level, lips[level - 1], a_seq[k], state.l2_err, state.h1_err);
        let path = out_dir.join(format!("psi_{}.wff", k + 1));
        wff::write_config(&path, &state.psi_n)?;
        println!(
            "k={} level={} lip={:.3e} a={:.3e} l2_err={:.3e} h1_err={:.3e} -> {}",
            k + 1,
            level,
            lips[level - 1],
            a_seq[k],
            state.l2_err,
            state.h1_err,
            path.display()
        );
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let path = dir.join("report.csv");
    let text = std::fs::read_to_string(&path)?;
    let report = ConvergenceReport::from_csv(&text)?;
    let mut ok = true;
    for row in &report.rows {
        let marginal_ok = row.marginal_l1_err <= 1e-9;
        let bounds_ok = row.k_estimate_slack >= -1e-10 && row.final_bound_slack >= -1e-10;
        ok &= marginal_ok && bounds_ok;
        println!(
            "n={} sqrt_h1={:.3e} psi_h1_err={:.3e} marginal={:.3e} eps={:.3e} [{}]",
            row.n,
            row.sqrt_h1_dist,
            row.psi_h1_err,
            row.marginal_l1_err,
            row.epsilon,
            if marginal_ok && bounds_ok { "ok" } else { "VIOLATED" }
        );
    }
    if ok {
        println!("all report invariants hold ({} rows)", report.rows.len());
        Ok(())
    } else {
        Err(Error::Consistency("report invariants violated".into()))
    }
}
