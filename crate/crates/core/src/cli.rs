//! Command-line front-end.
//!
//! Subcommands map one-to-one onto the library: `fit` ingests delimited
//! matrices and writes a fit archive, `summary`, `predict`, `bf` and
//! `plot-data` consume archives, and `simulate` produces benchmark data.
//! Exit codes are a stable contract for scripting: 0 success, 1 usage
//! error, 2 data or validation error, 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::dataset::{matrix_digest, Dataset, Family};
use crate::error::{Error, Result};
use crate::fit::{bayes_factor, fit, FitOptions};
use crate::grid::{default_logodds, parse_grid_spec, HyperGrid, HyperSetting, LogOddsGrid};
use crate::io::{
    load_fit, load_groups, load_matrix, load_vector, plot_data, render_summary, save_fit,
    simulate, write_simulated, write_text, SimulateSpec,
};
use crate::math::format_scientific;
use crate::predict::{predict_linear, predict_logistic};

#[derive(Debug, Parser)]
#[command(
    name = "varsel",
    version,
    about = "Bayesian variable selection for linear and logistic regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model over a hyperparameter grid and write a fit archive.
    Fit(FitArgs),
    /// Print the text report for a fit archive.
    Summary(SummaryArgs),
    /// Predict outcomes for new samples from a fit archive.
    Predict(PredictArgs),
    /// Bayes factor comparing two fits of the same dataset.
    Bf(BfArgs),
    /// Export per-variable results for plotting.
    PlotData(PlotDataArgs),
    /// Generate a synthetic dataset with known causal variables.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Variables, one column per candidate variable.
    #[arg(long, value_name = "PATH")]
    x: PathBuf,
    /// Outcome, a single column.
    #[arg(long, value_name = "PATH")]
    y: PathBuf,
    /// Additional covariates included in every model (the intercept is
    /// always included and must not appear here).
    #[arg(long, value_name = "PATH")]
    z: Option<PathBuf>,
    #[arg(long, default_value = "gaussian", value_parser = parse_family)]
    family: Family,
    /// Prior log-odds grid as LO:HI:STEP (base 10, shared by all variables).
    #[arg(
        long,
        value_name = "LO:HI:STEP",
        conflicts_with = "logodds_file",
        allow_hyphen_values = true
    )]
    logodds: Option<String>,
    /// Per-variable prior log-odds, a variables-by-grid-points matrix.
    #[arg(long, value_name = "PATH")]
    logodds_file: Option<PathBuf>,
    /// Fixed residual variance per grid point (one value broadcasts);
    /// omit to estimate it.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    sigma: Option<Vec<f64>>,
    /// Fixed prior effect scale per grid point (one value broadcasts);
    /// omit to estimate it.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    sa: Option<Vec<f64>>,
    /// Pseudo-observations shrinking the estimated prior effect scale
    /// toward sa0.
    #[arg(long, default_value_t = 10.0)]
    n0: f64,
    #[arg(long, default_value_t = 1.0)]
    sa0: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 10000)]
    maxiter: usize,
    /// Posterior draws for the model-level variance-explained estimate.
    #[arg(long, default_value_t = 1000)]
    nr: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip the second stage that restarts every grid point from the best
    /// first-stage fit.
    #[arg(long)]
    no_init_stage: bool,
    /// Where to write the fit archive.
    #[arg(long, default_value = "fit.vsel", value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummaryArgs {
    archive: PathBuf,
    /// How many top variables to list.
    #[arg(long, default_value_t = 5)]
    nv: usize,
}

#[derive(Debug, Args)]
struct PredictArgs {
    archive: PathBuf,
    #[arg(long, value_name = "PATH")]
    x: PathBuf,
    #[arg(long, value_name = "PATH")]
    z: Option<PathBuf>,
    /// Write predictions here instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BfArgs {
    null_archive: PathBuf,
    alt_archive: PathBuf,
}

#[derive(Debug, Args)]
struct PlotDataArgs {
    archive: PathBuf,
    /// Two-column file assigning variables to group labels.
    #[arg(long, value_name = "PATH")]
    groups: Option<PathBuf>,
    /// Variable names to mark in the highlight column.
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    vars: Vec<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    n_causal: usize,
    /// Target proportion of variance explained, in (0, 1).
    #[arg(long)]
    pve: f64,
    #[arg(long, default_value = "gaussian", value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Pairwise correlation within consecutive column blocks.
    #[arg(long, default_value_t = 0.0)]
    corr: f64,
    #[arg(long, default_value_t = 10)]
    block_size: usize,
    /// Output files are <PREFIX>.x.csv, <PREFIX>.y.csv, <PREFIX>.truth.csv.
    #[arg(long, value_name = "PREFIX")]
    out_prefix: PathBuf,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

fn parse_logodds_spec(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!(
            "log-odds grid must be LO:HI:STEP, got '{spec}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                Error::Usage(format!("'{t}' in the log-odds grid is not a number"))
            })
        })
        .collect::<Result<_>>()?;
    parse_grid_spec(nums[0], nums[1], nums[2])
}

fn setting_from(values: &Option<Vec<f64>>, n_s: usize, name: &str) -> Result<HyperSetting> {
    match values {
        None => Ok(HyperSetting::Estimate),
        Some(v) if v.len() == 1 => Ok(HyperSetting::Fixed(vec![v[0]; n_s])),
        Some(v) if v.len() == n_s => Ok(HyperSetting::Fixed(v.clone())),
        Some(v) => Err(Error::Usage(format!(
            "{name} has {} values but the grid has {n_s} points; give one value or one per point",
            v.len()
        ))),
    }
}

/// Honors VARSEL_THREADS before any parallel work starts. Unset or 0 keeps
/// the default pool (all available cores).
fn configure_threads() -> Result<()> {
    match std::env::var("VARSEL_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let k: usize = raw.trim().parse().map_err(|_| {
                Error::Usage(format!("VARSEL_THREADS must be a nonnegative integer, got '{raw}'"))
            })?;
            if k > 0 {
                // A failure here means a pool already exists, which is fine.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            Ok(())
        }
    }
}

/// Parses and executes a full command line, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(cli.command) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<String> {
    match cmd {
        Command::Fit(a) => cmd_fit(&a),
        Command::Summary(a) => {
            let model = load_fit(&a.archive)?;
            Ok(render_summary(&model, a.nv))
        }
        Command::Predict(a) => cmd_predict(&a),
        Command::Bf(a) => {
            let null = load_fit(&a.null_archive)?;
            let alt = load_fit(&a.alt_archive)?;
            let bf = bayes_factor(&null, &alt)?;
            Ok(format!("{}\n", format_scientific(bf, 3)))
        }
        Command::PlotData(a) => {
            let model = load_fit(&a.archive)?;
            let groups = a.groups.as_deref().map(load_groups).transpose()?;
            let text = plot_data(&model, groups.as_ref(), &a.vars)?;
            emit(&a.out, text)
        }
        Command::Simulate(a) => {
            let spec = SimulateSpec {
                n: a.n,
                p: a.p,
                n_causal: a.n_causal,
                pve: a.pve,
                family: a.family,
                seed: a.seed,
                corr: a.corr,
                block_size: a.block_size,
            };
            let sim = simulate(&spec)?;
            let (x, y, truth) = write_simulated(&a.out_prefix, &sim)?;
            Ok(format!(
                "wrote {}\nwrote {}\nwrote {}\n",
                x.display(),
                y.display(),
                truth.display()
            ))
        }
    }
}

fn emit(out: &Option<PathBuf>, text: String) -> Result<String> {
    match out {
        Some(path) => {
            write_text(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn cmd_fit(a: &FitArgs) -> Result<String> {
    let x_table = load_matrix(&a.x)?;
    let y = load_vector(&a.y)?;
    let z = match &a.z {
        Some(path) => Some(load_matrix(path)?.data),
        None => None,
    };
    let ds = Dataset::new(x_table.data, z, y, a.family)?;

    let logodds = match (&a.logodds, &a.logodds_file) {
        (Some(spec), None) => LogOddsGrid::Shared(parse_logodds_spec(spec)?),
        (None, Some(path)) => LogOddsGrid::PerVariable(load_matrix(path)?.data),
        (None, None) => LogOddsGrid::Shared(default_logodds(ds.p())),
        (Some(_), Some(_)) => unreachable!("the argument parser rejects this combination"),
    };
    let n_s = match &logodds {
        LogOddsGrid::Shared(v) => v.len(),
        LogOddsGrid::PerVariable(m) => m.ncols(),
    };
    let grid = HyperGrid {
        sigma: setting_from(&a.sigma, n_s, "sigma")?,
        sa: setting_from(&a.sa, n_s, "sa")?,
        logodds,
    };
    let opts = FitOptions {
        tol: a.tol,
        maxiter: a.maxiter,
        initialize_params: !a.no_init_stage,
        n0: a.n0,
        sa0: a.sa0,
        nr: a.nr,
        seed: a.seed,
        ..FitOptions::default()
    };
    let mut model = fit(&ds, &grid, &opts)?;
    model.names = x_table.names;
    save_fit(&a.out, &model)?;
    Ok(render_summary(&model, 5))
}

fn cmd_predict(a: &PredictArgs) -> Result<String> {
    let model = load_fit(&a.archive)?;
    let x_table = load_matrix(&a.x)?;
    if matrix_digest(&x_table.data) == model.x_digest {
        eprintln!("note: these inputs are the data the model was trained on");
    }
    let z: Option<DMatrix<f64>> = match &a.z {
        Some(path) => Some(load_matrix(path)?.data),
        None => None,
    };
    let text = match model.family {
        Family::Gaussian => {
            let yhat = predict_linear(&model, &x_table.data, z.as_ref())?;
            let mut out = String::from("prediction\n");
            for v in yhat {
                out.push_str(&v.to_string());
                out.push('\n');
            }
            out
        }
        Family::Binomial => {
            let pred = predict_logistic(&model, &x_table.data, z.as_ref())?;
            let mut out = String::from("prob,label\n");
            for (pr, lab) in pred.prob.iter().zip(&pred.label) {
                out.push_str(&format!("{pr},{lab}\n"));
            }
            out
        }
    };
    emit(&a.out, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(args)
    }

    #[test]
    fn fit_flags_have_documented_defaults() {
        let cli = parse(&["varsel", "fit", "--x", "x.csv", "--y", "y.csv"]).unwrap();
        let Command::Fit(a) = cli.command else {
            panic!("expected fit")
        };
        assert_eq!(a.family, Family::Gaussian);
        assert_eq!(a.tol, 1e-4);
        assert_eq!(a.maxiter, 10000);
        assert_eq!(a.n0, 10.0);
        assert_eq!(a.sa0, 1.0);
        assert_eq!(a.nr, 1000);
        assert_eq!(a.seed, 1);
        assert!(!a.no_init_stage);
        assert_eq!(a.out, PathBuf::from("fit.vsel"));
    }

    #[test]
    fn logodds_values_may_start_with_a_hyphen() {
        let cli = parse(&[
            "varsel", "fit", "--x", "x", "--y", "y", "--logodds", "-6:-3:0.25",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else {
            panic!("expected fit")
        };
        assert_eq!(a.logodds.as_deref(), Some("-6:-3:0.25"));
    }

    #[test]
    fn logodds_sources_conflict() {
        let err = parse(&[
            "varsel",
            "fit",
            "--x",
            "x.csv",
            "--y",
            "y.csv",
            "--logodds",
            "-3:-1:1",
            "--logodds-file",
            "lo.csv",
        ])
        .unwrap_err();
        assert!(err.use_stderr());
    }

    #[test]
    fn missing_required_inputs_fail_parsing() {
        assert!(parse(&["varsel", "fit", "--x", "x.csv"]).is_err());
        assert!(parse(&["varsel", "nonsense"]).is_err());
        assert!(parse(&["varsel", "fit", "--x", "x", "--y", "y", "--family", "poisson"]).is_err());
    }

    #[test]
    fn grid_spec_strings_round_trip() {
        assert_eq!(parse_logodds_spec("-6:-3:0.25").unwrap().len(), 13);
        assert_eq!(parse_logodds_spec("-5:-3:0.25").unwrap().len(), 9);
        assert!(matches!(
            parse_logodds_spec("-6:-3"),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            parse_logodds_spec("a:b:c"),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            parse_logodds_spec("-3:-6:0.25"),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn scalar_hyperparameters_broadcast_to_the_grid() {
        let s = setting_from(&Some(vec![0.05]), 9, "sa").unwrap();
        assert_eq!(s, HyperSetting::Fixed(vec![0.05; 9]));
        let s = setting_from(&Some(vec![1.0, 2.0, 3.0]), 3, "sa").unwrap();
        assert_eq!(s, HyperSetting::Fixed(vec![1.0, 2.0, 3.0]));
        assert!(setting_from(&Some(vec![1.0, 2.0]), 3, "sa").is_err());
        assert_eq!(setting_from(&None, 4, "sa").unwrap(), HyperSetting::Estimate);
    }

    #[test]
    fn list_flags_split_on_commas() {
        let cli = parse(&[
            "varsel", "fit", "--x", "x", "--y", "y", "--sigma", "0.5,1.0,2.0",
        ])
        .unwrap();
        let Command::Fit(a) = cli.command else {
            panic!("expected fit")
        };
        assert_eq!(a.sigma, Some(vec![0.5, 1.0, 2.0]));

        let cli = parse(&["varsel", "plot-data", "f.vsel", "--vars", "a,b,c"]).unwrap();
        let Command::PlotData(a) = cli.command else {
            panic!("expected plot-data")
        };
        assert_eq!(a.vars, vec!["a", "b", "c"]);
    }

    #[test]
    fn help_and_version_succeed() {
        let err = Cli::try_parse_from(["varsel", "--help"]).unwrap_err();
        assert!(!err.use_stderr());
        let err = Cli::try_parse_from(["varsel", "--version"]).unwrap_err();
        assert!(!err.use_stderr());
    }
}
