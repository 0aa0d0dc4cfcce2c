//! Command-line front end. Every subcommand is a thin adapter over the
//! library: it parses files and flags, calls one library entry point, and
//! prints the result. Exit codes: 0 success, 1 numeric/convergence
//! failure, 2 usage or input error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use ginimix::{
    bias, bias_corrected_gini, em_fit, mixture::parse_data, population_gini_gm,
    population_gini_via_ratio, run_simulation, sample_gini, write_table, Error, FitConfig,
    MixtureParams, Result, SimConfig,
};

#[derive(Parser)]
#[command(
    name = "ginimix",
    version,
    about = "Gini coefficients for gamma mixture populations: exact values, estimator bias, bias-corrected estimation, EM fitting, and Monte Carlo simulation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Route {
    /// Hypergeometric-series representation.
    Gm,
    /// Ratio-law route through incomplete beta functions.
    Ratio,
}

#[derive(Subcommand)]
enum Cmd {
    /// Population Gini coefficient of a gamma mixture.
    Gini {
        /// Parameter file: {"weights": [...], "shapes": [...], "rate": r}
        #[arg(long)]
        params: PathBuf,
        /// Computational route (the two agree to ~1e-9).
        #[arg(long, value_enum, default_value_t = Route::Gm)]
        route: Route,
    },
    /// Exact expectation and bias of the sample Gini estimator at size n.
    Expect {
        #[arg(long)]
        params: PathBuf,
        /// Sample size (>= 2).
        #[arg(long)]
        n: usize,
    },
    /// Sample Gini and bias-corrected Gini for a data file.
    Estimate {
        /// Data file: one positive decimal per line.
        #[arg(long)]
        data: PathBuf,
        /// Mixture parameters for the bias correction; fitted if absent.
        #[arg(long, conflicts_with = "fit")]
        params: Option<PathBuf>,
        /// Fit this many components for the correction (default 2).
        #[arg(long)]
        fit: Option<usize>,
        /// Seed for the EM restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte Carlo simulation grid and write a CSV table.
    Simulate {
        /// SimConfig JSON file.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a gamma mixture by maximum likelihood (EM).
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Number of components.
        #[arg(long)]
        fit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.cmd) {
        eprintln!("ginimix: {e}");
        let code = match e {
            Error::Convergence(_) => 1,
            Error::Domain(_) | Error::Io(_) => 2,
        };
        std::process::exit(code);
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gini { params, route } => {
            let p = load_params(&params)?;
            let g = match route {
                Route::Gm => population_gini_gm(&p)?,
                Route::Ratio => population_gini_via_ratio(&p)?,
            };
            println!("{}", fmt_sig(g.value()));
        }
        Cmd::Expect { params, n } => {
            let p = load_params(&params)?;
            let report = bias(&p, n)?;
            let out = serde_json::json!({
                "g_population": report.g_population.value(),
                "e_ghat": report.e_ghat,
                "bias": report.bias,
                "n": report.n,
            });
            println!("{out}");
        }
        Cmd::Estimate {
            data,
            params,
            fit,
            seed,
        } => {
            let xs = load_data(&data)?;
            let fitted = match params {
                Some(path) => load_params(&path)?,
                None => {
                    let cfg = FitConfig {
                        m: fit.unwrap_or(2),
                        seed,
                        ..FitConfig::default()
                    };
                    em_fit(&xs, &cfg)?.params
                }
            };
            let ghat = sample_gini(&xs)?;
            let gbc = bias_corrected_gini(&xs, &fitted)?;
            let out = serde_json::json!({
                "ghat": ghat.value(),
                "ghat_bc": gbc.value(),
            });
            println!("{out}");
        }
        Cmd::Simulate { config, out } => {
            let cfg = SimConfig::from_json_str(&read_file(&config)?)?;
            let table = run_simulation(&cfg)?;
            write_table(&table, &out)?;
            println!(
                "wrote {} ({} rows, {} replications per cell)",
                out.display(),
                table.rows.len(),
                cfg.n_sim
            );
        }
        Cmd::Fit { data, fit, seed } => {
            let xs = load_data(&data)?;
            let cfg = FitConfig {
                m: fit,
                seed,
                ..FitConfig::default()
            };
            let result = em_fit(&xs, &cfg)?;
            let out = serde_json::to_string(&result)
                .map_err(|e| Error::Io(format!("serializing fit result: {e}")))?;
            println!("{out}");
        }
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("reading {}: {e}", path.display())))
}

fn load_params(path: &Path) -> Result<MixtureParams> {
    MixtureParams::from_json_str(&read_file(path)?)
}

fn load_data(path: &Path) -> Result<Vec<f64>> {
    parse_data(&read_file(path)?)
}

/// Formats with 12 significant digits, plain decimal for moderate
/// exponents, trimming trailing zeros.
fn fmt_sig(v: f64) -> String {
    const SIG: usize = 12;
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..SIG as i32).contains(&exp) {
        let decimals = (SIG as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let s = format!("{:.*e}", SIG - 1, v);
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{e}", trim_zeros(mantissa.to_string())),
            None => s,
        }
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}
