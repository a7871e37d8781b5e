//! Scenario-driven front end: load a scenario file, run trajectories,
//! second-order onset reports, separability certificates or state
//! optimizations, and emit deterministic CSV/JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use negtrans_core::dynamics::{evolve_exact, trajectory, Cut, TripartiteScenario};
use negtrans_core::error::Error;
use negtrans_core::negativity::negativity;
use negtrans_core::optimize::{
    extremize, Direction, ExtremizeOptions, SpectrumConstrainedFamily,
};
use negtrans_core::perturb::{
    amplitude_variance_ga, negativity_fd2, susceptibility, transmissibility, vulnerability,
    PerturbationReport,
};
use negtrans_core::qmat::BipartiteShape;
use negtrans_core::separability::{product_decomposition, verify_certificate};
use negtrans_core::states::DensityMatrix;
use negtrans_core::Result;

use negtrans::output::{optimize_trace_csv, trajectory_csv, write_text};
use negtrans::scenario::{matrix_to_spec, ScenarioFile};

const AFTER_HELP: &str = "\
Trajectory CSV columns:
  t          time
  neg_AB     negativity between the system and the bath
  neg_AtB    negativity between the ancilla and the bath
  neg_AtA    negativity between the ancilla and the system
  neg_At_AB  negativity between the ancilla and the system+bath (constant)
  neg_B_AtA  negativity between the bath and the ancilla+system
  purity_A   Tr[rho_A(t)^2]
  purity_B   Tr[rho_B(t)^2]
  purity_AB  Tr[rho_AB(t)^2]
Floats are printed with 12 significant digits; lines end with LF.

Exit codes: 0 success, 2 validation error, 3 regime error (a formula does not
apply to the scenario). Errors are reported as JSON on stderr.";

#[derive(Parser)]
#[command(name = "negtrans", version, about = "Entanglement transfer at interaction onset", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FunctionalArg {
    /// Negativity susceptibility (system-bath onset coefficient)
    S,
    /// Negativity transmissibility (ancilla-bath onset coefficient)
    T,
    /// Negativity vulnerability (ancilla-system onset coefficient)
    V,
    /// Amplitude-based variance of the first interaction block
    Ga,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Min,
    Max,
}

#[derive(Subcommand)]
enum Command {
    /// Sample every cut's negativity and the reduced purities over the grid
    Trajectory {
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV path (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        zero_tol: Option<f64>,
    },
    /// Second-order onset reports for all three two-party cuts (JSON)
    Perturb {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        zero_tol: Option<f64>,
    },
    /// Constructive separability certificate for the ancilla-bath cut (JSON)
    Certify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        zero_tol: Option<f64>,
    },
    /// Extremize an onset functional over system states with the spectrum held fixed
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV path for the best-value trace
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        functional: FunctionalArg,
        #[arg(long, value_enum, default_value = "min")]
        direction: DirectionArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long)]
        zero_tol: Option<f64>,
    },
    /// Run a shipped scenario by figure id and write its trajectory CSV
    Reproduce {
        /// One of: mixed_qutrit, pure_qutrit, mixed_qubit, delocal
        figure: String,
        /// Output CSV path (default <figure>.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &std::path::Path, zero_tol: Option<f64>) -> Result<(ScenarioFile, TripartiteScenario)> {
    let mut file = ScenarioFile::load(path)?;
    if zero_tol.is_some() {
        file.zero_tol = zero_tol;
    }
    let sc = file.to_scenario()?;
    Ok((file, sc))
}

fn grid_override(
    file: &ScenarioFile,
    t_start: Option<f64>,
    t_stop: Option<f64>,
    points: Option<usize>,
) -> Vec<f64> {
    let start = t_start.unwrap_or(file.time_grid.start);
    let stop = t_stop.unwrap_or(file.time_grid.stop);
    let n = points.unwrap_or(file.time_grid.points).max(1);
    negtrans_core::dynamics::linspace(start, stop, n)
}

fn report_json(report: Result<PerturbationReport>, fd: f64, label: &str) -> serde_json::Value {
    match report {
        Ok(r) => {
            let two_n2 = 2.0 * r.n2;
            let denom = fd.abs().max(two_n2.abs());
            let relative_gap = if denom > 1e-9 {
                json!((two_n2 - fd).abs() / denom)
            } else {
                // both vanish; agreement is absolute
                json!(null)
            };
            json!({
                "bipartition": label,
                "n0": r.n0,
                "n1": r.n1,
                "n2": r.n2,
                "regime": "applicable",
                "fd_second_derivative": fd,
                "relative_gap": relative_gap,
            })
        }
        Err(Error::Regime(msg)) => json!({
            "bipartition": label,
            "n0": 0.0,
            "n1": null,
            "n2": null,
            "regime": format!("not applicable: {msg}"),
            "fd_second_derivative": fd,
            "relative_gap": null,
        }),
        Err(e) => json!({
            "bipartition": label,
            "n0": null,
            "n1": null,
            "n2": null,
            "regime": format!("error: {e}"),
            "fd_second_derivative": fd,
            "relative_gap": null,
        }),
    }
}

fn run_perturb(sc: &TripartiteScenario, out: Option<&PathBuf>) -> Result<()> {
    let t0 = 1e-2;
    let fd_ab = negativity_fd2(sc, Cut::Ab, t0)?;
    let fd_atb = negativity_fd2(sc, Cut::AtB, t0)?;
    let fd_ata = negativity_fd2(sc, Cut::AtA, t0)?;
    let body = json!([
        report_json(susceptibility(sc), fd_ab, "A;B"),
        report_json(transmissibility(sc), fd_atb, "At;B"),
        report_json(vulnerability(sc), fd_ata, "At;A"),
    ]);
    let text = serde_json::to_string_pretty(&body).expect("json encode") + "\n";
    write_text(out.map(|p| p.as_path()), &text)
}

fn run_certify(sc: &TripartiteScenario, grid: &[f64], out: Option<&PathBuf>) -> Result<()> {
    let shape = BipartiteShape::new(sc.dim_a(), sc.dim_b());
    let mut times = Vec::new();
    let mut residuals = Vec::new();
    let mut negs = Vec::new();
    let mut last = None;
    for &t in grid {
        let decomp = product_decomposition(sc, t)?;
        let exact = evolve_exact(sc, t)?;
        let resid = verify_certificate(&decomp, exact.rho_atb.mat())?;
        let n = negativity(&exact.rho_atb, shape)?.value;
        times.push(t);
        residuals.push(resid);
        negs.push(n);
        last = Some(decomp);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let max_neg = negs.iter().cloned().fold(0.0, f64::max);
    let final_decomp = last.map(|d| {
        json!({
            "weights": d.weights,
            "left_states": d.left_states.iter().map(|s| matrix_to_spec(s.mat())).collect::<Vec<_>>(),
            "right_states": d.right_states.iter().map(|s| matrix_to_spec(s.mat())).collect::<Vec<_>>(),
        })
    });
    let body = json!({
        "times": times,
        "residuals": residuals,
        "neg_at_b": negs,
        "max_residual": max_residual,
        "max_neg_at_b": max_neg,
        "certified": max_residual <= 1e-9,
        "final_decomposition": final_decomp,
    });
    let text = serde_json::to_string_pretty(&body).expect("json encode") + "\n";
    write_text(out.map(|p| p.as_path()), &text)
}

fn run_optimize(
    file: &ScenarioFile,
    sc: &TripartiteScenario,
    functional: FunctionalArg,
    direction: DirectionArg,
    seed: Option<u64>,
    budget: usize,
    out: Option<&PathBuf>,
) -> Result<()> {
    let rho_a = sc.rho_a();
    let eig = rho_a.eig()?;
    let mut spectrum: Vec<f64> = eig.eigenvalues.to_vec();
    spectrum.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let family = SpectrumConstrainedFamily::new(spectrum)?;
    let opts = ExtremizeOptions {
        budget,
        seed: seed.unwrap_or(file.seed),
        restarts: 5,
        initial: None,
    };
    let dir = match direction {
        DirectionArg::Min => Direction::Minimize,
        DirectionArg::Max => Direction::Maximize,
    };
    let ham = sc.ham().clone();
    let rho_b = sc.rho_b().clone();
    let zero_tol = sc.zero_tol();
    let rebuild = move |rho: &DensityMatrix| -> Result<TripartiteScenario> {
        TripartiteScenario::new(rho.clone(), rho_b.clone(), ham.clone(), Some(zero_tol))
    };
    let outcome = match functional {
        FunctionalArg::S => extremize(
            |rho| susceptibility(&rebuild(rho)?).map(|r| r.n2),
            &family,
            dir,
            &opts,
        )?,
        FunctionalArg::T => extremize(
            |rho| transmissibility(&rebuild(rho)?).map(|r| r.n2),
            &family,
            dir,
            &opts,
        )?,
        FunctionalArg::V => extremize(
            |rho| vulnerability(&rebuild(rho)?).map(|r| r.n2),
            &family,
            dir,
            &opts,
        )?,
        FunctionalArg::Ga => {
            if sc.ham().interaction().is_empty() {
                return Err(Error::Domain(
                    "the amplitude-variance objective needs at least one interaction term"
                        .into(),
                ));
            }
            let a_op = sc.ham().interaction()[0].0.clone();
            extremize(
                move |rho| amplitude_variance_ga(&a_op, rho),
                &family,
                dir,
                &opts,
            )?
        }
    };
    if let Some(p) = out {
        write_text(Some(p.as_path()), &optimize_trace_csv(&outcome.trace))?;
    }
    let best_rho = family.rho(&outcome.best_theta)?;
    let summary = json!({
        "functional": format!("{functional:?}").to_lowercase(),
        "direction": match direction { DirectionArg::Min => "min", DirectionArg::Max => "max" },
        "best_value": outcome.best_value,
        "evaluations": outcome.evaluations,
        "best_theta": outcome.best_theta,
        "best_rho_a": matrix_to_spec(best_rho.mat()),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json encode"));
    Ok(())
}

const FIGURES: &[(&str, &str)] = &[
    ("mixed_qutrit", include_str!("../scenarios/qutrit_mixed.json")),
    ("pure_qutrit", include_str!("../scenarios/qutrit_pure_B.json")),
    ("mixed_qubit", include_str!("../scenarios/qubit_swap.json")),
    ("delocal", include_str!("../scenarios/qubit_product_free.json")),
];

fn run_reproduce(figure: &str, out: Option<&PathBuf>) -> Result<()> {
    let text = FIGURES
        .iter()
        .find(|(name, _)| *name == figure)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            Error::Domain(format!(
                "unknown figure id {figure:?}; known ids: {}",
                FIGURES
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
    let file = ScenarioFile::parse(text)?;
    let sc = file.to_scenario()?;
    let tr = trajectory(&sc, &file.grid())?;
    let default = PathBuf::from(format!("{figure}.csv"));
    let path = out.cloned().unwrap_or(default);
    write_text(Some(path.as_path()), &trajectory_csv(&tr))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Trajectory {
            scenario,
            out,
            t_start,
            t_stop,
            points,
            zero_tol,
        } => {
            let (file, sc) = load(&scenario, zero_tol)?;
            let grid = grid_override(&file, t_start, t_stop, points);
            let tr = trajectory(&sc, &grid)?;
            write_text(out.as_deref(), &trajectory_csv(&tr))
        }
        Command::Perturb {
            scenario,
            out,
            zero_tol,
        } => {
            let (_, sc) = load(&scenario, zero_tol)?;
            run_perturb(&sc, out.as_ref())
        }
        Command::Certify {
            scenario,
            out,
            t_start,
            t_stop,
            points,
            zero_tol,
        } => {
            let (file, sc) = load(&scenario, zero_tol)?;
            let grid = grid_override(&file, t_start, t_stop, points);
            run_certify(&sc, &grid, out.as_ref())
        }
        Command::Optimize {
            scenario,
            out,
            functional,
            direction,
            seed,
            budget,
            zero_tol,
        } => {
            let (file, sc) = load(&scenario, zero_tol)?;
            run_optimize(&file, &sc, functional, direction, seed, budget, out.as_ref())
        }
        Command::Reproduce { figure, out } => run_reproduce(&figure, out.as_ref()),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Shape(_) => "shape",
        Error::NotHermitian { .. } => "not_hermitian",
        Error::InvalidDensity(_) => "invalid_density",
        Error::Domain(_) => "domain",
        Error::SpectrumGap { .. } => "spectrum_gap",
        Error::Regime(_) => "regime",
        Error::NoCertificate(_) => "no_certificate",
        Error::Eigensolver(_) => "eigensolver",
        Error::Probe { .. } => "probe",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({"error": {"kind": error_kind(&e), "message": e.to_string()}});
            eprintln!("{body}");
            match e {
                Error::Regime(_) | Error::NoCertificate(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
