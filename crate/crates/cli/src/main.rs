//! `pmc`: construct, verify and inspect parallel-mean-curvature surface data.
//!
//! Exit status: 0 pass, 1 residual failure, 2 guard or domain failure,
//! 3 configuration or schema failure. `PMC_THREADS` caps the worker pool.

use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmc_core::coeffs::{eval_t, Branch, CoeffId, CoeffOptions, Reconciliation, T9Mode};
use pmc_core::config::RunConfig;
use pmc_core::construct::{construct_with_profile, generic_profile};
use pmc_core::family::{default_window, family_surface, AlphaMode, FamilyParams, FamilySurfaceInput};
use pmc_core::grid::{GridDomain, HarmonicInput};
use pmc_core::io::{self, Meta, ProfileSummary};
use pmc_core::jets::EvalPoint;
use pmc_core::profile::{Normalization, ProfileOptions, ProfileSolution};
use pmc_core::verify::{verify_suite, VerifyOptions};
use pmc_core::{Error, ExitCode, ModelParams, C64};

mod complex;

use complex::parse_complex;

#[derive(Parser)]
#[command(
    name = "pmc",
    version,
    about = "Parallel mean curvature surfaces in complex space forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the harmonic-function construction from a JSON config.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Residual suite on one surface, or on a surface and its refinement.
    Verify {
        /// Directory with fields.csv and meta.json at spacing h.
        coarse: PathBuf,
        /// Same surface at spacing h/2.
        fine: Option<PathBuf>,
        #[command(flatten)]
        opts: VerifyArgs,
    },
    /// Residual suite on a single directory.
    Residuals {
        dir: PathBuf,
        #[command(flatten)]
        opts: VerifyArgs,
    },
    /// The explicit family with b = 1, rho = -3.
    Family {
        #[arg(long, allow_hyphen_values = true)]
        c1: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        c2: f64,
        /// Angle window swept by the surface; defaults to a pole-free part of
        /// the valid interval.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        window: Option<Vec<f64>>,
        #[arg(long, num_args = 4, allow_hyphen_values = true, value_names = ["X0", "X1", "Y0", "Y1"])]
        domain: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = ModeArg::Potential)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1e-13)]
        quad_tol: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the profile a(alpha), F and K.
    Profile {
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        alpha0: f64,
        /// Initial value, written RE+IMi.
        #[arg(long, allow_hyphen_values = true)]
        a0: String,
        #[arg(long)]
        alpha_min: f64,
        #[arg(long)]
        alpha_max: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long = "K0", allow_hyphen_values = true, default_value_t = 0.0)]
        k0: f64,
        #[arg(long = "Kprime0", default_value_t = 1.0)]
        kprime0: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a coefficient t_i and its partial derivatives.
    Tcoef {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=13))]
        i: u8,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        /// Written RE+IMi.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long, value_enum, default_value_t = T9Arg::AsPrinted)]
        t9_mode: T9Arg,
        #[arg(long, value_enum, default_value_t = BranchArg::Plus)]
        branch: BranchArg,
        #[arg(long, value_enum, default_value_t = ReconArg::Assume)]
        reconciliation: ReconArg,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Thresholds and coefficient options; defaults to the config echoed in
    /// meta.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    t9_mode: Option<T9Arg>,
    #[arg(long, value_enum)]
    reconciliation: Option<ReconArg>,
    /// Boundary rows excluded from the statistics.
    #[arg(long)]
    margin: Option<usize>,
    /// Directory for report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Potential,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum T9Arg {
    AsPrinted,
    Alternate,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Plus,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReconArg {
    Assume,
    Reject,
}

impl From<T9Arg> for T9Mode {
    fn from(v: T9Arg) -> Self {
        match v {
            T9Arg::AsPrinted => T9Mode::AsPrinted,
            T9Arg::Alternate => T9Mode::Alternate,
        }
    }
}

impl From<ReconArg> for Reconciliation {
    fn from(v: ReconArg) -> Self {
        match v {
            ReconArg::Assume => Reconciliation::Assume,
            ReconArg::Reject => Reconciliation::Reject,
        }
    }
}

/// Failure before any typed error exists: bad flag values.
struct UsageError(String);

enum Failure {
    Usage(UsageError),
    Run(Error),
}

macro_rules! run {
    ($e:expr) => {
        $e.map_err(|e| Failure::Run(Error::from(e)))?
    };
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(UsageError(msg.into()))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Config.code() } else { 0 };
            let _ = e.print();
            process::exit(code as i32);
        }
    };
    if let Some(n) = std::env::var("PMC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(UsageError(msg))) => {
            report_error("usage", &msg, ExitCode::Config);
            ExitCode::Config
        }
        Err(Failure::Run(e)) => {
            let code = e.exit_code();
            report_error(e.kind(), &e.to_string(), code);
            code
        }
    };
    process::exit(code.code() as i32);
}

fn report_error(kind: &str, message: &str, code: ExitCode) {
    let v = serde_json::json!({
        "error": { "kind": kind, "message": message, "exit_code": code.code() }
    });
    eprintln!("{v}");
}

fn dispatch(cmd: Command) -> Result<ExitCode, Failure> {
    match cmd {
        Command::Construct { config, out, common } => cmd_construct(&config, &out, &common),
        Command::Verify { coarse, fine, opts } => cmd_verify(&coarse, fine.as_deref(), &opts),
        Command::Residuals { dir, opts } => cmd_verify(&dir, None, &opts),
        Command::Family {
            c1,
            c2,
            window,
            domain,
            mode,
            quad_tol,
            out,
            common,
        } => cmd_family(c1, c2, window, domain, mode, quad_tol, &out, &common),
        Command::Profile {
            rho,
            b,
            alpha0,
            a0,
            alpha_min,
            alpha_max,
            tol,
            k0,
            kprime0,
            points,
            out,
            quiet,
        } => {
            let a0 = parse_complex(&a0).map_err(usage)?;
            let params = ModelParams::new(rho, b);
            run!(params.validate_nonflat());
            if tol.is_nan() || tol <= 0.0 {
                return Err(usage(format!("--tol must be positive, got {tol}")));
            }
            let opts = ProfileOptions::with_tol(tol);
            let mut p = run!(ProfileSolution::solve(
                params,
                alpha0,
                a0,
                (alpha_min, alpha_max),
                &opts
            ));
            run!(p.build_potential(Normalization { k0, kprime0 }));
            run!(io::write_profile_csv(&p, points, &out));
            if !quiet {
                let s = ProfileSummary::of(&p);
                println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            }
            Ok(ExitCode::Pass)
        }
        Command::Tcoef {
            i,
            alpha,
            a,
            rho,
            b,
            order,
            t9_mode,
            branch,
            reconciliation,
        } => {
            let a = parse_complex(&a).map_err(usage)?;
            let params = ModelParams::new(rho, b);
            run!(params.validate());
            let opts = CoeffOptions {
                t9_mode: t9_mode.into(),
                reconciliation: reconciliation.into(),
                max_order: pmc_core::jets::MAX_ORDER,
                ..Default::default()
            };
            let branch = match branch {
                BranchArg::Plus => Branch::Plus,
                BranchArg::Minus => Branch::Minus,
            };
            let id = run!(CoeffId::new(i)).with_branch(branch);
            let point = EvalPoint::conjugate_pair(alpha, a, params);
            let jet = run!(eval_t(id, &point, order, &opts));
            println!("t{i} at alpha = {}, a = {}", io::fmt_f64(alpha), fmt_c(a));
            for (m, _) in jet.iter() {
                let label = if m == [0, 0, 0] {
                    "value".to_string()
                } else {
                    derivative_label(m)
                };
                println!("{label:<28} {}", fmt_c(jet.derivative(m)));
            }
            Ok(ExitCode::Pass)
        }
    }
}

fn fmt_c(z: C64) -> String {
    format!("{} {}", io::fmt_f64(z.re), io::fmt_f64(z.im))
}

fn derivative_label(m: [usize; 3]) -> String {
    let names = ["alpha", "a", "abar"];
    let parts: Vec<String> = m
        .iter()
        .zip(names)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, n)| if k == 1 { format!("d{n}") } else { format!("d{n}^{k}") })
        .collect();
    format!("d^{}/{}", m.iter().sum::<usize>(), parts.join(" "))
}

fn apply_grid(grid: GridDomain, flag: &Option<Vec<usize>>) -> GridDomain {
    match flag.as_deref() {
        Some([nx, ny]) => grid.with_resolution(*nx, *ny),
        _ => grid,
    }
}

fn cmd_construct(config: &Path, out: &Path, common: &Common) -> Result<ExitCode, Failure> {
    let mut cfg = run!(RunConfig::load(config));
    cfg.grid = apply_grid(cfg.grid, &common.grid);
    run!(cfg.validate());
    let mut input = run!(cfg.generic_input());
    let profile = run!(generic_profile(&input));
    if cfg.harmonic.rescale {
        run!(input.fit_harmonic(&profile));
    }
    let fields = run!(construct_with_profile(&input, &profile));
    let meta = Meta::new(&fields, Some(cfg), Some(ProfileSummary::of(&profile)));
    run!(io::write_surface(out, &fields, &meta));
    if !common.quiet {
        println!(
            "wrote {}x{} surface to {} (masked nodes: {}, path discrepancy {:.3e})",
            fields.grid.nx,
            fields.grid.ny,
            out.display(),
            fields.masked_count(),
            fields.path_discrepancy
        );
    }
    Ok(ExitCode::Pass)
}

#[allow(clippy::too_many_arguments)]
fn cmd_family(
    c1: f64,
    c2: f64,
    window: Option<Vec<f64>>,
    domain: Option<Vec<f64>>,
    mode: ModeArg,
    quad_tol: f64,
    out: &Path,
    common: &Common,
) -> Result<ExitCode, Failure> {
    let params = run!(FamilyParams::new(c1, c2));
    let window = match window.as_deref() {
        Some(&[lo, hi]) => (lo, hi),
        _ => run!(default_window(c1)),
    };
    let (x0, x1, y0, y1) = match domain.as_deref() {
        Some(&[x0, x1, y0, y1]) => (x0, x1, y0, y1),
        _ => (0.0, 1.0, 0.0, 1.0),
    };
    let (nx, ny) = match common.grid.as_deref() {
        Some(&[nx, ny]) => (nx, ny),
        _ => (161, 161),
    };
    let grid = run!(GridDomain::new(x0, x1, y0, y1, nx, ny));
    if quad_tol.is_nan() || quad_tol <= 0.0 {
        return Err(usage(format!("--quad-tol must be positive, got {quad_tol}")));
    }
    let mut input = FamilySurfaceInput {
        params,
        harmonic: HarmonicInput::re_z(),
        grid,
        mode: match mode {
            ModeArg::Potential => AlphaMode::Potential,
            ModeArg::Literal => AlphaMode::Literal,
        },
        window,
        quad_tol,
        sing_guard: ProfileOptions::default().sing_guard,
    };
    let profile = run!(input.potential_profile());
    input.harmonic = run!(input.fit_harmonic(Some(&profile)));
    let fields = run!(family_surface(&input));
    let meta = Meta::new(&fields, None, Some(ProfileSummary::of(&profile)));
    run!(io::write_surface(out, &fields, &meta));
    if !common.quiet {
        println!(
            "wrote {}x{} family surface (c1 = {c1}, c2 = {c2}, window [{}, {}]) to {}",
            nx,
            ny,
            window.0,
            window.1,
            out.display()
        );
    }
    Ok(ExitCode::Pass)
}

fn verify_options(args: &VerifyArgs, meta: &Meta) -> Result<VerifyOptions, Failure> {
    let mut opts = match (&args.config, &meta.config) {
        (Some(path), _) => run!(RunConfig::load(path)).verify_options(),
        (None, Some(cfg)) => cfg.verify_options(),
        (None, None) => VerifyOptions::default(),
    };
    if let Some(m) = args.t9_mode {
        opts.coeffs.t9_mode = m.into();
    }
    if let Some(r) = args.reconciliation {
        opts.coeffs.reconciliation = r.into();
    }
    if let Some(m) = args.margin {
        opts.margin = m;
    }
    Ok(opts)
}

fn cmd_verify(coarse: &Path, fine: Option<&Path>, args: &VerifyArgs) -> Result<ExitCode, Failure> {
    let (c, meta) = run!(io::read_surface(coarse));
    let f = match fine {
        Some(dir) => Some(run!(io::read_surface(dir)).0),
        None => None,
    };
    let opts = verify_options(args, &meta)?;
    let report = run!(verify_suite(&c, f.as_ref(), &opts));
    if let Some(dir) = &args.out {
        run!(std::fs::create_dir_all(dir).map_err(|source| io::IoError::Fs {
            path: dir.clone(),
            source
        }));
        run!(io::write_json(&dir.join("report.json"), &report));
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else if !args.quiet {
        print!("{}", report.table());
    }
    Ok(if report.passed {
        ExitCode::Pass
    } else {
        ExitCode::ResidualFailure
    })
}
