use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tlrmt_core::factor::{acf, decompose_with, residual_spectrum, standardize, DecomposeOptions};
use tlrmt_core::garch::{fit_gjr, forecast_variance, PARAM_NAMES};
use tlrmt_core::output::{fmt_num, write_columns, write_json, write_table};
use tlrmt_core::panel::{
    ingest_csv, to_magnitudes, to_returns_with, IngestConfig, MaskedPanel, ReturnOptions,
    ReturnPanel,
};
use tlrmt_core::simulate::{generate, noise_panel, GfmScenario};
use tlrmt_core::spectrum::{default_lags, fit_power_law, lambda_curve, CurveOptions, SpectrumSource};
use tlrmt_core::stats::{mean, std_dev};
use tlrmt_core::xcorr::Estimator;

mod config;

use config::{parse_lags, parse_range, RunConfig};

/// Time-lag random-matrix analysis of multivariate return panels.
#[derive(Parser, Debug)]
#[command(name = "tlrmt", version, about)]
struct Cli {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed for `simulate` and `noise-baseline`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read a price CSV and cache its log returns and magnitudes.
    Ingest(IngestArgs),
    /// Largest-singular-value curves of returns and magnitudes, plus a power-law fit.
    Spectrum(SpectrumArgs),
    /// PCA global factor, variance shares, factor ACF and residual panel.
    Factor(FactorArgs),
    /// GJR-GARCH(1,1) fit of a single series with a variance forecast.
    Garch(GarchArgs),
    /// Generate a synthetic panel from a global-factor scenario file.
    Simulate(SimulateArgs),
    /// Mean and spread of the lambda_L curve over i.i.d. Gaussian panels.
    NoiseBaseline(NoiseArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Price CSV: first column timestamps, one column per series, empty cells missing.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Keep exact-zero returns as ordinary observations.
    #[arg(long)]
    no_zero_mask: bool,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Return cache written by `ingest` or `simulate`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Lag grid: `a:b`, `a:b:step` or a comma list.
    #[arg(long)]
    lags: Option<String>,
    /// plain, overlap-corrected or overlap-corrected-unit-diagonal.
    #[arg(long)]
    estimator: Option<Estimator>,
    /// Power-law fit range `lo:hi` on the magnitude curve.
    #[arg(long)]
    fit_range: Option<String>,
}

#[derive(Args, Debug)]
struct FactorArgs {
    /// Return cache written by `ingest` or `simulate`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// |correlation| below which a series is reported as uncorrelated with the factor.
    #[arg(long)]
    screen_threshold: Option<f64>,
    /// Build the correlation matrix with the overlap-corrected estimator.
    #[arg(long)]
    overlap_corrected: bool,
    /// Largest lag of the factor autocorrelation report.
    #[arg(long, default_value_t = 100)]
    acf_lags: usize,
    /// Also write lambda_L curves of the residual panel over the lag grid.
    #[arg(long)]
    residual_spectrum: bool,
    /// Lag grid for the residual spectrum.
    #[arg(long)]
    lags: Option<String>,
    #[arg(long)]
    estimator: Option<Estimator>,
}

#[derive(Args, Debug)]
struct GarchArgs {
    /// CSV with a timestamp column and at least one value column, e.g. `factor.csv`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column to fit; defaults to the first value column.
    #[arg(long)]
    column: Option<String>,
    /// Forecast horizon in steps.
    #[arg(long, default_value_t = 250)]
    horizon: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario file (.toml or .json).
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long, default_value_t = 48)]
    n: usize,
    #[arg(long, default_value_t = 2744)]
    t: usize,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long)]
    lags: Option<String>,
    #[arg(long)]
    estimator: Option<Estimator>,
}

const DEFAULT_SIGNIFICANCE: f64 = 0.05;

struct Run {
    cfg: RunConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Run {
    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self
            .out
            .clone()
            .or_else(|| self.cfg.out.clone())
            .context("no output directory: pass --out or set `out` in the config")?;
        fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(dir)
    }

    fn input(&self, arg: &Option<PathBuf>) -> Result<PathBuf> {
        let path = arg
            .clone()
            .or_else(|| self.cfg.input.clone())
            .context("no input file: pass --input or set `input` in the config")?;
        if !path.is_file() {
            bail!("input file {} does not exist", path.display());
        }
        Ok(path)
    }

    fn lags(&self, arg: &Option<String>) -> Result<Vec<usize>> {
        match (arg, &self.cfg.lags) {
            (Some(s), _) => parse_lags(s),
            (None, Some(spec)) => spec.resolve(),
            (None, None) => Ok(default_lags()),
        }
    }

    fn estimator(&self, arg: Option<Estimator>) -> Estimator {
        arg.or(self.cfg.estimator).unwrap_or_default()
    }

    fn seed(&self) -> Option<u64> {
        self.seed.or(self.cfg.seed)
    }

    fn significance(&self) -> f64 {
        self.cfg.significance.unwrap_or(DEFAULT_SIGNIFICANCE)
    }
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn read_returns(path: &Path) -> Result<ReturnPanel> {
    let panel = MaskedPanel::read_csv(path)
        .with_context(|| format!("reading return panel {}", path.display()))?;
    Ok(ReturnPanel::from_panel(panel))
}

fn cmd_ingest(run: &Run, args: &IngestArgs) -> Result<()> {
    let input = run.input(&args.input)?;
    if !args.delimiter.is_ascii() {
        bail!("delimiter must be a single ASCII character");
    }
    let config = IngestConfig {
        delimiter: args.delimiter as u8,
    };
    let prices = ingest_csv(&input, &config).with_context(|| format!("ingesting {}", input.display()))?;
    let returns = to_returns_with(
        &prices,
        ReturnOptions {
            mask_zero_returns: !args.no_zero_mask,
        },
    );
    let magnitudes = to_magnitudes(&returns)?;
    let out = run.out_dir()?;
    let path = out.join("returns.csv");
    returns.write_csv(&path)?;
    wrote(&path);
    let path = out.join("magnitudes.csv");
    magnitudes.write_csv(&path)?;
    wrote(&path);
    Ok(())
}

fn cmd_spectrum(run: &Run, args: &SpectrumArgs) -> Result<()> {
    let input = run.input(&args.input)?;
    let returns = read_returns(&input)?;
    let lags = run.lags(&args.lags)?;
    let options = CurveOptions {
        estimator: run.estimator(args.estimator),
        keep_full_spectra: false,
    };
    let [lo, hi] = match (&args.fit_range, run.cfg.fit_range) {
        (Some(s), _) => parse_range(s)?,
        (None, Some(r)) => r,
        (None, None) => [lags.iter().copied().filter(|l| *l > 0).min().unwrap_or(1), *lags.iter().max().unwrap()],
    };

    let ret = lambda_curve(&returns, &lags, SpectrumSource::Returns, options)?;
    let mag = lambda_curve(&to_magnitudes(&returns)?, &lags, SpectrumSource::Magnitudes, options)?;
    let fit = fit_power_law(&mag, (lo, hi)).context("fitting the magnitude curve")?;

    let out = run.out_dir()?;
    let path = out.join("curve_returns.csv");
    ret.write_csv(&path)?;
    wrote(&path);
    let path = out.join("curve_magnitudes.csv");
    mag.write_csv(&path)?;
    wrote(&path);
    let path = out.join("fit_magnitudes.json");
    fit.write_json(&path)?;
    wrote(&path);
    println!(
        "magnitude decay exponent {} (r^2 {}) over lags {lo}..{hi}",
        fmt_num(fit.exponent),
        fmt_num(fit.r_squared)
    );
    Ok(())
}

fn cmd_factor(run: &Run, args: &FactorArgs) -> Result<()> {
    let input = run.input(&args.input)?;
    let returns = read_returns(&input)?;
    let threshold = args
        .screen_threshold
        .or(run.cfg.screen_threshold)
        .unwrap_or(tlrmt_core::factor::DEFAULT_SCREEN_THRESHOLD);
    let z = standardize(&returns)?;
    let d = decompose_with(
        &z,
        DecomposeOptions {
            overlap_corrected: args.overlap_corrected,
        },
    )?;
    let t = d.global_factor.len();
    let max_lag = args.acf_lags.min((t / 4).saturating_sub(1)).max(1);
    let acf_m = acf(&d.global_factor, max_lag)?;
    let squared: Vec<f64> = d.global_factor.iter().map(|m| m * m).collect();
    let acf_m2 = acf(&squared, max_lag)?;

    let residual_curves = if args.residual_spectrum {
        let lags = run.lags(&args.lags)?;
        let options = CurveOptions {
            estimator: run.estimator(args.estimator),
            keep_full_spectra: false,
        };
        Some(residual_spectrum(&d, &lags, options)?)
    } else {
        None
    };

    let out = run.out_dir()?;
    let path = out.join("decomposition.json");
    d.write_json(&path, threshold)?;
    wrote(&path);
    let path = out.join("factor.csv");
    d.write_factor_csv(&path)?;
    wrote(&path);
    let path = out.join("residuals.csv");
    d.residuals.write_csv(&path)?;
    wrote(&path);
    let path = out.join("acf_factor.csv");
    acf_m.write_csv(&path)?;
    wrote(&path);
    let path = out.join("acf_factor_squared.csv");
    acf_m2.write_csv(&path)?;
    wrote(&path);
    if let Some(curves) = residual_curves {
        let path = out.join("residual_curve_returns.csv");
        curves.returns.write_csv(&path)?;
        wrote(&path);
        let path = out.join("residual_curve_magnitudes.csv");
        curves.magnitudes.write_csv(&path)?;
        wrote(&path);
    }

    let level = run.significance();
    println!(
        "{} significant eigenvalue(s) above lambda_+ = {}",
        d.n_significant,
        fmt_num(d.lambda_plus)
    );
    for (name, report) in [("M", &acf_m), ("M^2", &acf_m2)] {
        let verdict = if report.ljung_box_p < level { "significant" } else { "not significant" };
        println!(
            "Ljung-Box({}) on {name}: Q = {}, p = {} ({verdict} at {level})",
            report.ljung_box_depth,
            fmt_num(report.ljung_box_stat),
            fmt_num(report.ljung_box_p)
        );
    }
    Ok(())
}

fn read_series(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let panel =
        MaskedPanel::read_csv(path).with_context(|| format!("reading series {}", path.display()))?;
    let i = match column {
        Some(c) => panel
            .names()
            .iter()
            .position(|n| n == c)
            .with_context(|| format!("column {c:?} not found in {}", path.display()))?,
        None => 0,
    };
    if panel.unmasked_count(i) != panel.len() {
        bail!("series {:?} has missing values", panel.names()[i]);
    }
    Ok(panel.row(i))
}

fn cmd_garch(run: &Run, args: &GarchArgs) -> Result<()> {
    let input = run.input(&args.input)?;
    if args.horizon == 0 {
        bail!("forecast horizon must be at least 1");
    }
    let raw = read_series(&input, args.column.as_deref())?;
    let m = mean(&raw);
    let series: Vec<f64> = raw.iter().map(|x| x - m).collect();
    let fit = fit_gjr(&series)?;
    let forecast = forecast_variance(&fit, args.horizon)?;

    let out = run.out_dir()?;
    let path = out.join("garch_fit.json");
    fit.write_json(&path)?;
    wrote(&path);
    let path = out.join("cond_variance.csv");
    fit.write_variance_csv(&path)?;
    wrote(&path);
    let path = out.join("forecast.csv");
    let rows: Vec<Vec<String>> = forecast
        .iter()
        .enumerate()
        .map(|(h, v)| vec![(h + 1).to_string(), fmt_num(*v), fmt_num(v.sqrt())])
        .collect();
    write_table(
        &path,
        &["h".into(), "variance".into(), "volatility".into()],
        &rows,
    )?;
    wrote(&path);

    let level = run.significance();
    for (k, name) in PARAM_NAMES.iter().enumerate() {
        let mark = if fit.p_values[k] < level { "*" } else { "" };
        println!(
            "{name} = {} (se {}, p {}){mark}",
            fmt_num(fit.params.as_array()[k]),
            fmt_num(fit.std_errors[k]),
            fmt_num(fit.p_values[k])
        );
    }
    Ok(())
}

fn cmd_simulate(run: &Run, args: &SimulateArgs) -> Result<()> {
    let mut scenario = GfmScenario::from_path(&args.scenario)
        .with_context(|| format!("reading scenario {}", args.scenario.display()))?;
    if let Some(seed) = run.seed() {
        scenario.seed = seed;
    }
    let sample = generate(&scenario)?;
    let magnitudes = to_magnitudes(&sample.returns)?;

    let out = run.out_dir()?;
    let path = out.join("prices.csv");
    sample.prices.write_csv(&path)?;
    wrote(&path);
    let path = out.join("returns.csv");
    sample.returns.write_csv(&path)?;
    wrote(&path);
    let path = out.join("magnitudes.csv");
    magnitudes.write_csv(&path)?;
    wrote(&path);
    let path = out.join("true_factor.csv");
    let sd: Vec<f64> = sample.factor_variance.iter().map(|v| v.sqrt()).collect();
    let rows: Vec<Vec<String>> = sample
        .returns
        .timestamps()
        .iter()
        .zip(&sample.factor)
        .zip(&sample.factor_variance)
        .zip(&sd)
        .map(|(((ts, m), v), s)| vec![ts.clone(), fmt_num(*m), fmt_num(*v), fmt_num(*s)])
        .collect();
    write_table(
        &path,
        &["date".into(), "M".into(), "variance".into(), "volatility".into()],
        &rows,
    )?;
    wrote(&path);
    let path = out.join("scenario.json");
    write_json(&path, &scenario)?;
    wrote(&path);
    Ok(())
}

fn cmd_noise_baseline(run: &Run, args: &NoiseArgs) -> Result<()> {
    if args.replicates < 2 {
        bail!("need at least 2 replicates for a spread estimate");
    }
    let lags = run.lags(&args.lags)?;
    let options = CurveOptions {
        estimator: run.estimator(args.estimator),
        keep_full_spectra: false,
    };
    let base = run.seed().unwrap_or(0);
    let mut curves = Vec::with_capacity(args.replicates);
    for r in 0..args.replicates as u64 {
        let panel = noise_panel(args.n, args.t, base.wrapping_add(r))?;
        curves.push(lambda_curve(&panel, &lags, SpectrumSource::Returns, options)?.lambda_l);
    }
    let (mut means, mut sds) = (Vec::new(), Vec::new());
    for k in 0..lags.len() {
        let column: Vec<f64> = curves.iter().map(|c| c[k]).collect();
        means.push(mean(&column));
        sds.push(std_dev(&column));
    }
    let out = run.out_dir()?;
    let path = out.join("noise_baseline.csv");
    write_columns(&path, "lag", &lags, &["mean", "std"], &[&means, &sds])?;
    wrote(&path);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let run = Run {
        cfg,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&run, a),
        Command::Spectrum(a) => cmd_spectrum(&run, a),
        Command::Factor(a) => cmd_factor(&run, a),
        Command::Garch(a) => cmd_garch(&run, a),
        Command::Simulate(a) => cmd_simulate(&run, a),
        Command::NoiseBaseline(a) => cmd_noise_baseline(&run, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
