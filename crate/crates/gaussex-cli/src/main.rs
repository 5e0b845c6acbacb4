//! Command-line front end: constant estimation, tail estimation, comparison
//! runs, expansion checks, formula evaluation, and path sampling.
//!
//! Exit codes: 0 success, 2 usage/domain/parse error, 3 model error, 4
//! numeric or I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gaussex::asymptotics::{chi_formula, perf_table_formula, AsymptoticFormula};
use gaussex::chi::ChiSpec;
use gaussex::config::{load_config, store_record};
use gaussex::constants::{
    generalized_piterbarg_estimate, hw_estimate, known_value, pickands_estimate,
    piterbarg_estimate, ConstantEstimate, ConstantKind,
};
use gaussex::error::Error;
use gaussex::kernels::CovarianceKernel;
use gaussex::perf_table::{check_expansion, Expansion, PerfTableSpec};
use gaussex::sampling::{configure_threads, sample_paths};
use gaussex::tail::{estimate_tail, ratio_table, FieldModel, RatioRow};

#[derive(Parser)]
#[command(name = "gaussex", version, about = "Gaussian field extreme-value toolkit")]
struct Cli {
    /// RNG seed; all commands are deterministic given the seed.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker thread cap; falls back to the GAUSSEX_THREADS variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Artifact format for tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimation of a limit constant.
    Constant {
        #[command(subcommand)]
        kind: ConstantCmd,
    },
    /// Tail probability estimation driven by a config file.
    Tail {
        #[arg(long)]
        config: PathBuf,
    },
    /// Empirical-vs-asymptotic ratio table with CSV and SVG output.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Numerical validation of the local variance/correlation expansions.
    ExpansionCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        /// Simplex weights, comma separated (length n + 1).
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        /// Probe radii, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        probes: usize,
    },
    /// Closed-form tail formula with its factor breakdown.
    Formula {
        #[command(subcommand)]
        which: FormulaCmd,
    },
    /// Draws Gaussian paths on an interval grid.
    Sample {
        #[arg(long, value_enum, default_value_t = KernelKind::Fbm)]
        kernel: KernelKind,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, default_value_t = 0.1)]
        mesh: f64,
        #[arg(long, default_value_t = 10)]
        reps: u64,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Fbm,
    SubFbm,
}

#[derive(Subcommand)]
enum ConstantCmd {
    /// Pickands constant of fractional Brownian motion.
    Pickands {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 20.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.02)]
        mesh: f64,
        #[arg(long, default_value_t = 20_000)]
        reps: u64,
        /// Use the doubled-window difference estimator.
        #[arg(long)]
        extrapolated: bool,
    },
    /// Piterbarg constant of fractional Brownian motion with drift b.
    Piterbarg {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 8.0)]
        s: f64,
        #[arg(long, default_value_t = 0.02)]
        mesh: f64,
        #[arg(long, default_value_t = 20_000)]
        reps: u64,
    },
    /// Generalized Piterbarg constant for a self-similar kernel.
    GeneralizedPiterbarg {
        #[arg(long, value_enum)]
        kernel: KernelKind,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 8.0)]
        s: f64,
        #[arg(long, default_value_t = 0.02)]
        mesh: f64,
        #[arg(long, default_value_t = 20_000)]
        reps: u64,
    },
    /// Corner constant of the simplex field at alpha = 1.
    Hw {
        #[arg(long)]
        n: usize,
        /// Simplex weights, comma separated (length n + 1).
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        #[arg(long, default_value_t = 6.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.1)]
        mesh: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
    },
}

#[derive(Subcommand)]
enum FormulaCmd {
    /// Simplex field tail formula.
    PerfTable {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        /// Injected corner-constant value for alpha = 1 with interior zeros.
        #[arg(long)]
        hw_const: Option<f64>,
        /// Injected Pickands value for alpha < 1.
        #[arg(long)]
        pickands_const: Option<f64>,
    },
    /// Chi field tail formula.
    Chi {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// Injected generalized Piterbarg value with drift b/a.
        #[arg(long)]
        p_const: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Domain(_) | Error::Parse(_) => 2,
        Error::Model(_) => 3,
        Error::NotPositiveDefinite { .. } | Error::Io(_) => 4,
    }
}

fn run(cli: &Cli) -> gaussex::Result<()> {
    let threads = cli.threads.or_else(|| {
        std::env::var("GAUSSEX_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        configure_threads(n)?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Constant { kind } => cmd_constant(cli, kind),
        Command::Tail { config } => cmd_tail(cli, config),
        Command::Compare { config } => cmd_compare(cli, config),
        Command::ExpansionCheck {
            n,
            alpha,
            a,
            deltas,
            probes,
        } => cmd_expansion_check(cli, *n, *alpha, a, deltas, *probes),
        Command::Formula { which } => cmd_formula(which),
        Command::Sample {
            kernel,
            alpha,
            lo,
            hi,
            mesh,
            reps,
        } => cmd_sample(cli, *kernel, *alpha, *lo, *hi, *mesh, *reps),
    }
}

fn build_kernel(kind: KernelKind, alpha: f64) -> gaussex::Result<CovarianceKernel> {
    match kind {
        KernelKind::Fbm => CovarianceKernel::fbm(alpha),
        KernelKind::SubFbm => CovarianceKernel::sub_fbm(alpha),
    }
}

fn write_estimate(cli: &Cli, name: &str, est: &ConstantEstimate) -> gaussex::Result<PathBuf> {
    let path = match cli.format {
        Format::Json => {
            let p = cli.out_dir.join(format!("{name}.json"));
            let body = serde_json::to_string_pretty(est)
                .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
            std::fs::write(&p, body)?;
            p
        }
        Format::Csv => {
            let p = cli.out_dir.join(format!("{name}.csv"));
            let body = format!(
                "kind,value,stderr,lambda,mesh,n_reps,extrapolated,trunc_sensitivity\n\
                 {:?},{},{},{},{},{},{},{}\n",
                est.kind,
                est.value,
                est.stderr,
                est.lambda,
                est.mesh,
                est.n_reps,
                est.extrapolated,
                est.trunc_sensitivity
            );
            std::fs::write(&p, body)?;
            p
        }
    };
    Ok(path)
}

fn cmd_constant(cli: &Cli, kind: &ConstantCmd) -> gaussex::Result<()> {
    let (name, est, known) = match kind {
        ConstantCmd::Pickands {
            alpha,
            lambda,
            mesh,
            reps,
            extrapolated,
        } => {
            let est = pickands_estimate(*alpha, *lambda, *mesh, *reps, cli.seed, *extrapolated)?;
            let known = known_value(ConstantKind::Pickands, *alpha, None);
            ("pickands", est, known)
        }
        ConstantCmd::Piterbarg {
            alpha,
            b,
            s,
            mesh,
            reps,
        } => {
            let est = piterbarg_estimate(*alpha, *b, *s, *mesh, *reps, cli.seed)?;
            let known = known_value(ConstantKind::Piterbarg, *alpha, Some(*b));
            ("piterbarg", est, known)
        }
        ConstantCmd::GeneralizedPiterbarg {
            kernel,
            alpha,
            b,
            s,
            mesh,
            reps,
        } => {
            let k = build_kernel(*kernel, *alpha)?;
            let est = generalized_piterbarg_estimate(&k, *alpha, *b, *s, *mesh, *reps, cli.seed)?;
            ("generalized_piterbarg", est, None)
        }
        ConstantCmd::Hw {
            n,
            a,
            lambda,
            mesh,
            reps,
        } => {
            let spec = PerfTableSpec::new(*n, 1.0, a.clone())?;
            let est = hw_estimate(&spec, *lambda, *mesh, *reps, cli.seed)?;
            let known = if spec.m() == *n + 1 { Some(1.0) } else { None };
            ("hw", est, known)
        }
    };
    println!(
        "{name}: value {:.6} stderr {:.6} (lambda {}, mesh {}, reps {})",
        est.value, est.stderr, est.lambda, est.mesh, est.n_reps
    );
    if let Some(k) = known {
        println!("known value {k:.6}, |value - known| = {:.6}", (est.value - k).abs());
    }
    let path = write_estimate(cli, name, &est)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_tail(cli: &Cli, config_path: &Path) -> gaussex::Result<()> {
    let config = load_config(config_path)?;
    let model = config.build_model()?;
    let grid = config.build_grid()?;
    let mut lines = String::from("u,p_hat,ci_lo,ci_hi\n");
    let mut json_rows = Vec::new();
    for &u in &config.run.u_levels {
        let est = estimate_tail(&model, &grid, u, config.run.n_reps, config.run.seed)?;
        println!(
            "u = {u}: p_hat {:.6e} [{:.6e}, {:.6e}]",
            est.p_hat, est.ci_lo, est.ci_hi
        );
        lines.push_str(&format!(
            "{},{},{},{}\n",
            est.u, est.p_hat, est.ci_lo, est.ci_hi
        ));
        json_rows.push(est);
    }
    let path = match cli.format {
        Format::Csv => {
            let p = cli.out_dir.join("tail.csv");
            std::fs::write(&p, lines)?;
            p
        }
        Format::Json => {
            let p = cli.out_dir.join("tail.json");
            let body = serde_json::to_string_pretty(&json_rows)
                .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
            std::fs::write(&p, body)?;
            p
        }
    };
    println!("wrote {}", path.display());
    Ok(())
}

/// Derives the asymptotic formula for a configured model, injecting known
/// constants where the regime requires them.
fn formula_for_model(model: &FieldModel, seed: u64) -> gaussex::Result<AsymptoticFormula> {
    match model {
        FieldModel::PerfTable(spec) => perf_table_formula(spec, None, None),
        FieldModel::Chi(spec) => {
            let drift = spec.b / spec.a;
            let p_est = match known_value(ConstantKind::Piterbarg, spec.alpha, Some(drift)) {
                Some(v) => ConstantEstimate {
                    kind: ConstantKind::GeneralizedPiterbarg,
                    value: v,
                    stderr: 0.0,
                    lambda: f64::INFINITY,
                    mesh: 0.0,
                    n_reps: 0,
                    extrapolated: false,
                    drift: Some(drift),
                    norm_power: 1,
                    trunc_sensitivity: 0.0,
                },
                None => {
                    let s = (8.0 / drift).powf(1.0 / spec.alpha).max(1.0);
                    generalized_piterbarg_estimate(
                        &spec.y_kernel,
                        spec.alpha,
                        drift,
                        s,
                        0.02,
                        20_000,
                        seed,
                    )?
                }
            };
            chi_formula(spec, &p_est)
        }
        FieldModel::Kernel { .. } => Err(Error::Usage(
            "compare needs a perf_table or chi model; plain kernels have no \
             closed-form asymptotics"
                .into(),
        )),
    }
}

fn cmd_compare(cli: &Cli, config_path: &Path) -> gaussex::Result<()> {
    let config = load_config(config_path)?;
    let model = config.build_model()?;
    let grid = config.build_grid()?;
    let formula = formula_for_model(&model, config.run.seed)?;
    let mut record = ratio_table(
        &model,
        &formula,
        &config.run.u_levels,
        &grid,
        config.run.n_reps,
        config.run.seed,
    )?;
    record.config_hash = config.hash();
    for row in &record.rows {
        println!(
            "u = {}: p_hat {:.6e} asymptotic {:.6e} ratio {:.4}{}",
            row.u,
            row.p_hat,
            row.asymptotic,
            row.ratio,
            if row.mismatch_warning { "  [mismatch warning]" } else { "" }
        );
    }
    let base = cli
        .out_dir
        .join(config.run.output.as_deref().unwrap_or("compare"));
    if let Some(parent) = base.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut written = store_record(&record, &base)?;
    let svg_path = base.with_extension("svg");
    std::fs::write(&svg_path, ratio_svg(&record.rows))?;
    written.push(svg_path);
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Hand-written SVG: ratio points with CI whiskers over u, plus a reference
/// line at ratio 1.
fn ratio_svg(rows: &[RatioRow]) -> String {
    let (w, h, ml, mb, mt, mr) = (640.0, 420.0, 70.0, 50.0, 20.0, 20.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let u_min = rows.iter().map(|r| r.u).fold(f64::INFINITY, f64::min);
    let u_max = rows.iter().map(|r| r.u).fold(f64::NEG_INFINITY, f64::max);
    let u_span = (u_max - u_min).max(1e-9);
    let mut y_min = 1.0_f64;
    let mut y_max = 1.0_f64;
    for r in rows {
        y_min = y_min.min(r.ci_lo / r.asymptotic);
        y_max = y_max.max(r.ci_hi / r.asymptotic);
    }
    let pad = 0.1 * (y_max - y_min).max(0.2);
    y_min -= pad;
    y_max += pad;
    let x = |u: f64| ml + pw * (u - u_min) / u_span;
    let y = |v: f64| mt + ph * (1.0 - (v - y_min) / (y_max - y_min));
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{ml}\" y1=\"{}\" x2=\"{ml}\" y2=\"{mt}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        h - mb,
        w - mr,
        h - mb
    );
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"gray\" \
         stroke-dasharray=\"6,4\"/>\n\
         <text x=\"{2}\" y=\"{3}\" font-size=\"12\">ratio = 1</text>\n",
        y(1.0),
        w - mr,
        w - mr - 60.0,
        y(1.0) - 5.0
    ));
    for r in rows {
        let cx = x(r.u);
        svg.push_str(&format!(
            "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"steelblue\" \
             stroke-width=\"1.5\"/>\n\
             <circle cx=\"{cx}\" cy=\"{}\" r=\"4\" fill=\"steelblue\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">u = {}</text>\n",
            y(r.ci_lo / r.asymptotic),
            y(r.ci_hi / r.asymptotic),
            y(r.ratio),
            cx,
            h - mb + 18.0,
            r.u
        ));
    }
    svg.push_str(&format!(
        "<text x=\"15\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 15 {})\">\
         empirical / asymptotic</text>\n</svg>\n",
        (mt + ph / 2.0),
        (mt + ph / 2.0)
    ));
    svg
}

fn cmd_expansion_check(
    cli: &Cli,
    n: usize,
    alpha: f64,
    a: &[f64],
    deltas: &[f64],
    probes: usize,
) -> gaussex::Result<()> {
    let spec = PerfTableSpec::new(n, alpha, a.to_vec())?;
    let mut csv = String::from("expansion,delta,max_rel_err,probes\n");
    for expansion in Expansion::applicable(&spec) {
        for &delta in deltas {
            let report = check_expansion(&spec, expansion, delta, probes, cli.seed)?;
            println!(
                "{expansion:?} at delta {delta}: max relative error {:.6e} over {} probes",
                report.max_rel_err, report.probes
            );
            csv.push_str(&format!(
                "{expansion:?},{delta},{},{}\n",
                report.max_rel_err, report.probes
            ));
        }
    }
    let p = cli.out_dir.join("expansion_check.csv");
    std::fs::write(&p, csv)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn cmd_formula(which: &FormulaCmd) -> gaussex::Result<()> {
    let formula = match which {
        FormulaCmd::PerfTable {
            n,
            alpha,
            a,
            hw_const,
            pickands_const,
        } => {
            let spec = PerfTableSpec::new(*n, *alpha, a.clone())?;
            let inject = |kind: ConstantKind, value: f64| ConstantEstimate {
                kind,
                value,
                stderr: 0.0,
                lambda: f64::INFINITY,
                mesh: 0.0,
                n_reps: 0,
                extrapolated: false,
                drift: None,
                norm_power: 1,
                trunc_sensitivity: 0.0,
            };
            let hw = hw_const.map(|v| inject(ConstantKind::HW, v));
            let pick = pickands_const.map(|v| inject(ConstantKind::Pickands, v));
            perf_table_formula(&spec, hw.as_ref(), pick.as_ref())?
        }
        FormulaCmd::Chi {
            n,
            alpha,
            a,
            b,
            p_const,
        } => {
            let spec = ChiSpec::with_fbm(*n, *alpha, *a, *b)?;
            let p_est = ConstantEstimate {
                kind: ConstantKind::GeneralizedPiterbarg,
                value: *p_const,
                stderr: 0.0,
                lambda: f64::INFINITY,
                mesh: 0.0,
                n_reps: 0,
                extrapolated: false,
                drift: Some(b / a),
                norm_power: 1,
                trunc_sensitivity: 0.0,
            };
            chi_formula(&spec, &p_est)?
        }
    };
    println!("{}", formula.description);
    println!(
        "C = {:.6}, exponent = {}, sigma_star = {:.6}",
        formula.constant_c, formula.u_exponent, formula.sigma_star
    );
    for (name, value) in &formula.factors {
        println!("  {name} = {value:.6}");
    }
    Ok(())
}

fn cmd_sample(
    cli: &Cli,
    kernel: KernelKind,
    alpha: f64,
    lo: f64,
    hi: f64,
    mesh: f64,
    reps: u64,
) -> gaussex::Result<()> {
    let k = build_kernel(kernel, alpha)?;
    let grid = gaussex::grid::GridSpec::interval(lo, hi, mesh)?;
    let batch = sample_paths(&k, &grid, reps, cli.seed)?;
    let path = match cli.format {
        Format::Csv => {
            let p = cli.out_dir.join("paths.csv");
            let mut body = grid
                .points
                .iter()
                .map(|pt| format!("{}", pt[0]))
                .collect::<Vec<_>>()
                .join(",");
            body.push('\n');
            for row in &batch.values {
                body.push_str(
                    &row.iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(","),
                );
                body.push('\n');
            }
            std::fs::write(&p, body)?;
            p
        }
        Format::Json => {
            let p = cli.out_dir.join("paths.json");
            let body = serde_json::to_string_pretty(&batch.values)
                .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
            std::fs::write(&p, body)?;
            p
        }
    };
    println!(
        "sampled {} paths on {} points; wrote {}",
        batch.values.len(),
        grid.len(),
        path.display()
    );
    Ok(())
}
