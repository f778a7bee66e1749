//! `eulerprod`: one binary, subcommand style. Every run writes its
//! outputs (CSV/JSON) under --out, appends a manifest line, and is fully
//! reproducible from that manifest.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 numerical
//! failure, 4 pinned-check failure in `report`.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use eulerprod::ballot::{
    ballot_mc, check_prop_linear, BallotQuery, LinearBound, LinearSweepPoint,
};
use eulerprod::config::{validate_config, ModelConfig, SamplingMode};
use eulerprod::covariance::{
    band_toeplitz_set, read_cov_cache, toeplitz_from_cache, write_cov_cache, ToeplitzCovariance,
};
use eulerprod::experiments::{
    count_exceedances, estimate_left_tail, estimate_right_tail, first_hitting_histogram,
    moment_markov_curve, pair_correlation, Simulator,
};
use eulerprod::predict::{
    bump_psi, critical_beta, predicted_left_tail, predicted_right_tail, slope_mu,
    threshold_log_max, BarrierKind, BarrierSpec,
};
use eulerprod::primes::{
    build_bands, mertens_residuals, read_band_cache, write_band_cache, BandTable,
};
use eulerprod::sampler::FieldSample;
use eulerprod::suite;
use eulerprod::Error;

#[derive(Parser)]
#[command(name = "eulerprod", version, about = "Random Euler-product model simulator")]
struct Cli {
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory for CSV/JSON artifacts and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Cache directory (overrides the EULERPROD_CACHE_DIR env var).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Plain-text key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    t: Option<u32>,

    #[arg(long)]
    alpha: Option<f64>,

    /// exact-prime or surrogate.
    #[arg(long)]
    mode: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Number of Monte Carlo samples.
    #[arg(long)]
    n: Option<usize>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelConfig, Error> {
        let base = match &self.config {
            Some(path) => Some(validate_config(path)?),
            None => None,
        };
        let t = self.t.or(base.as_ref().map(|c| c.t)).unwrap_or(3);
        let alpha = self.alpha.or(base.as_ref().map(|c| c.alpha)).unwrap_or(0.5);
        let mode = match &self.mode {
            Some(m) => m.parse()?,
            None => base.as_ref().map(|c| c.mode).unwrap_or(SamplingMode::ExactPrime),
        };
        let seed = self.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(42);
        let n = self.n.or(base.as_ref().map(|c| c.n_samples)).unwrap_or(10_000);
        Ok(ModelConfig::new(t, alpha, mode)?.with_seed(seed).with_samples(n))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sieve the prime bands (or synthesize surrogate bands) and write
    /// the band cache.
    Sieve {
        #[command(flatten)]
        model: ModelArgs,
        /// Validate an existing cache instead of rebuilding.
        #[arg(long)]
        validate: bool,
        /// Also report Mertens residuals at these x values.
        #[arg(long, value_delimiter = ',')]
        mertens: Vec<f64>,
    },
    /// Build or inspect the covariance cache; optionally dump lags CSV.
    Cov {
        #[command(flatten)]
        model: ModelArgs,
        /// Dump per-lag values as CSV (columns lag_index, delta_h, value).
        #[arg(long)]
        csv: bool,
        /// Band to dump (default: the full range 1..=t summed).
        #[arg(long)]
        band: Option<u32>,
    },
    /// Draw field samples; optionally dump S_t(h) per sample as CSV.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the raw field CSV (sample_id, h_index, value) for the
        /// first 256 samples.
        #[arg(long)]
        dump: bool,
    },
    /// Print a closed-form predicted quantity as JSON.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        /// One of: slope, threshold, right-tail, left-tail, beta-c, psi,
        /// barrier-upper, barrier-lower, barrier-good-event.
        #[arg(long)]
        what: String,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long)]
        k: Option<u32>,
    },
    /// Run ballot-oracle sweeps from a description file.
    Ballot {
        /// Sweep file: `kind = upper-a2|lower-a1`, then one point per
        /// line as `j=8 a=0.2 b0=2 x=1.8 delta=1`.
        #[arg(long)]
        sweep: PathBuf,
        /// Also run the Monte Carlo oracle with this many walks per point.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Right/left tail of the grid maximum (sign of the y grid decides).
    Tail {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        y_grid: Vec<f64>,
        /// Pinned |fitted - predicted| slope tolerance for the summary
        /// pass flag (right tail only).
        #[arg(long, default_value_t = 0.35)]
        slope_tol: f64,
    },
    /// Critical moments and the good event.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        /// Moment order (default: the critical beta for t, alpha).
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0, 4.0, 8.0])]
        a_list: Vec<f64>,
    },
    /// Exceedance counts and the Paley-Zygmund bound.
    Counts {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
    },
    /// First-hitting histogram of the upper barrier.
    Hitting {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
    },
    /// Pair correlation of exceedance events by branching time.
    Paircorr {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Run a verification suite; exits 4 if any pinned check fails.
    Report {
        /// `desk` (full, pinned) or `smoke` (fast pipeline check).
        #[arg(long, default_value = "desk")]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    schema: &'static str,
    subcommand: &'a str,
    version: &'static str,
    timestamp_unix: u64,
    config: Option<&'a ModelConfig>,
    outputs: Vec<String>,
    payload: T,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    schema: &'static str,
    subcommand: &'a str,
    argv: Vec<String>,
    version: &'static str,
    started_unix: u64,
    elapsed_secs: f64,
    config: Option<&'a ModelConfig>,
    cache_checksums: Vec<(String, String)>,
    outputs: Vec<String>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Io {
    out_dir: PathBuf,
    cache_dir: PathBuf,
    started: Instant,
    started_unix: u64,
    outputs: Vec<String>,
    cache_checksums: Vec<(String, String)>,
}

impl Io {
    fn new(cli: &Cli) -> Result<Self, Error> {
        let cache_dir = cli
            .cache_dir
            .clone()
            .or_else(|| std::env::var_os("EULERPROD_CACHE_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("cache"));
        std::fs::create_dir_all(&cli.out)?;
        std::fs::create_dir_all(&cache_dir)?;
        Ok(Io {
            out_dir: cli.out.clone(),
            cache_dir,
            started: Instant::now(),
            started_unix: now_unix(),
            outputs: Vec::new(),
            cache_checksums: Vec::new(),
        })
    }

    fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), Error> {
        let path = self.out_dir.join(name);
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(&path, text)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn write_summary<T: Serialize>(
        &mut self,
        subcommand: &str,
        config: Option<&ModelConfig>,
        payload: &T,
    ) -> Result<(), Error> {
        let path = self.out_dir.join(format!("{subcommand}-summary.json"));
        let summary = Summary {
            schema: "eulerprod-summary-v1",
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix: now_unix(),
            config,
            outputs: self.outputs.clone(),
            payload,
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Cache(format!("summary serialization: {e}")))?;
        std::fs::write(&path, text)?;
        self.outputs.push(path.display().to_string());
        println!("{}", path.display());
        Ok(())
    }

    fn finish(&self, subcommand: &str, config: Option<&ModelConfig>) -> Result<(), Error> {
        let entry = ManifestEntry {
            schema: "eulerprod-manifest-v1",
            subcommand,
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION"),
            started_unix: self.started_unix,
            elapsed_secs: self.started.elapsed().as_secs_f64(),
            config,
            cache_checksums: self.cache_checksums.clone(),
            outputs: self.outputs.clone(),
        };
        let line = serde_json::to_string(&entry)
            .map_err(|e| Error::Cache(format!("manifest serialization: {e}")))?;
        let path = self.out_dir.join("manifest.jsonl");
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{line}")?;
        Ok(())
    }

    fn band_cache_path(&self, config: &ModelConfig) -> PathBuf {
        self.cache_dir.join(format!("bands-t{}-{}.bin", config.t, config.mode))
    }

    fn cov_cache_path(&self, config: &ModelConfig) -> PathBuf {
        let a = format!("{:.4}", config.alpha).replace('.', "_");
        self.cache_dir.join(format!("cov-t{}-a{}-{}.bin", config.t, a, config.mode))
    }

    /// Load the band table from cache when present and valid, otherwise
    /// build it and populate the cache.
    fn load_or_build_bands(&mut self, config: &ModelConfig) -> Result<BandTable, Error> {
        let path = self.band_cache_path(config);
        if path.exists() {
            if let Ok(table) = read_band_cache(&path) {
                if table.t == config.t && table.mode == config.mode {
                    self.cache_checksums
                        .push((path.display().to_string(), format!("{:016x}", table.checksum())));
                    return Ok(table);
                }
            }
        }
        let table = build_bands(config)?;
        write_band_cache(&path, &table)?;
        self.cache_checksums
            .push((path.display().to_string(), format!("{:016x}", table.checksum())));
        Ok(table)
    }

    fn load_or_build_covs(
        &mut self,
        config: &ModelConfig,
        bands: &BandTable,
    ) -> Result<Vec<ToeplitzCovariance>, Error> {
        let path = self.cov_cache_path(config);
        if path.exists() {
            if let Ok(cache) = read_cov_cache(&path) {
                if cache.t == config.t
                    && cache.alpha == config.alpha
                    && cache.n == config.grid_len()
                    && cache.sieve_checksum == bands.checksum()
                {
                    self.cache_checksums
                        .push((path.display().to_string(), "valid".to_string()));
                    return toeplitz_from_cache(&cache);
                }
            }
        }
        let covs = band_toeplitz_set(bands, config)?;
        write_cov_cache(&path, config, bands.checksum(), &covs)?;
        self.cache_checksums.push((path.display().to_string(), "rebuilt".to_string()));
        Ok(covs)
    }

    fn simulator(&mut self, config: &ModelConfig) -> Result<Simulator, Error> {
        let bands = self.load_or_build_bands(config)?;
        match config.mode {
            SamplingMode::ExactPrime => {
                let covs = self.load_or_build_covs(config, &bands)?;
                Ok(Simulator::from_toeplitz(config, Arc::new(covs)))
            }
            SamplingMode::Surrogate => Simulator::from_table(config, &bands),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: thread pool: {e}");
            std::process::exit(2);
        }
    }
    match run(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let mut io = Io::new(cli)?;
    match &cli.command {
        Command::Sieve { model, validate, mertens } => {
            let config = model.resolve()?;
            if *validate {
                let path = io.band_cache_path(&config);
                let table = read_band_cache(&path)?;
                println!(
                    "cache {} valid: t={} mode={} checksum {:016x}",
                    path.display(),
                    table.t,
                    table.mode,
                    table.checksum()
                );
                io.finish("sieve", Some(&config))?;
                return Ok(0);
            }
            let table = io.load_or_build_bands(&config)?;
            #[derive(Serialize)]
            struct BandInfo {
                index: u32,
                nodes: usize,
                variance: f64,
            }
            #[derive(Serialize)]
            struct SievePayload {
                sieve_limit: u64,
                checksum: String,
                bands: Vec<BandInfo>,
                total_variance: f64,
                mertens_residuals: Vec<(f64, f64)>,
            }
            let residuals = if mertens.is_empty() {
                Vec::new()
            } else {
                mertens_residuals(mertens)?
                    .into_iter()
                    .zip(mertens.iter().cloned())
                    .map(|(r, x)| (x, r))
                    .collect()
            };
            let payload = SievePayload {
                sieve_limit: table.sieve_limit,
                checksum: format!("{:016x}", table.checksum()),
                bands: table
                    .bands
                    .iter()
                    .map(|b| BandInfo { index: b.index, nodes: b.len(), variance: b.variance })
                    .collect(),
                total_variance: table.total_variance(),
                mertens_residuals: residuals,
            };
            io.write_summary("sieve", Some(&config), &payload)?;
            io.finish("sieve", Some(&config))?;
            Ok(0)
        }

        Command::Cov { model, csv, band } => {
            let config = model.resolve()?;
            let bands = io.load_or_build_bands(&config)?;
            let covs = io.load_or_build_covs(&config, &bands)?;
            if *csv {
                let rows: Vec<String> = match band {
                    Some(m) => {
                        let c = covs.iter().find(|c| c.k == *m).ok_or_else(|| {
                            Error::Config(format!("no band {m} in covariance set"))
                        })?;
                        c.values
                            .iter()
                            .enumerate()
                            .map(|(i, v)| format!("{i},{},{v}", i as f64 * c.spacing))
                            .collect()
                    }
                    None => (0..config.grid_len())
                        .map(|i| {
                            let v: f64 = covs.iter().map(|c| c.values[i]).sum();
                            format!("{i},{},{v}", i as f64 * config.spacing())
                        })
                        .collect(),
                };
                io.write_csv("cov-lags.csv", "lag_index,delta_h,value", &rows)?;
            }
            #[derive(Serialize)]
            struct CovPayload {
                n: usize,
                spacing: f64,
                variances: Vec<f64>,
                jitters: Vec<f64>,
            }
            let payload = CovPayload {
                n: config.grid_len(),
                spacing: config.spacing(),
                variances: covs.iter().map(|c| c.values[0]).collect(),
                jitters: covs.iter().map(|c| c.jitter).collect(),
            };
            io.write_summary("cov", Some(&config), &payload)?;
            io.finish("cov", Some(&config))?;
            Ok(0)
        }

        Command::Sample { model, dump } => {
            let config = model.resolve()?;
            let sim = io.simulator(&config)?;
            let n = config.n_samples;
            if *dump {
                let fields = sim.engine.map_fields(&config, n.min(256), &|i, s: &FieldSample| {
                    (i, s.total())
                })?;
                let mut rows = Vec::new();
                for (i, total) in &fields {
                    for (g, v) in total.iter().enumerate() {
                        rows.push(format!("{i},{g},{v}"));
                    }
                }
                io.write_csv("samples.csv", "sample_id,h_index,value", &rows)?;
            }
            let maxima = sim.engine.map_total_max(&config, n)?;
            let mut sorted = maxima.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            #[derive(Serialize)]
            struct SamplePayload {
                n: usize,
                grid_len: usize,
                engine: String,
                max_quantiles: Vec<(f64, f64)>,
            }
            let payload = SamplePayload {
                n,
                grid_len: config.grid_len(),
                engine: sim.engine.label().to_string(),
                max_quantiles: [0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
                    .iter()
                    .map(|&q| (q, eulerprod::stats::quantile_sorted(&sorted, q)))
                    .collect(),
            };
            io.write_summary("sample", Some(&config), &payload)?;
            io.finish("sample", Some(&config))?;
            Ok(0)
        }

        Command::Predict { model, what, y, k } => {
            let config = model.resolve()?;
            let (t, alpha) = (config.t, config.alpha);
            let value = match what.as_str() {
                "slope" => slope_mu(t, alpha)?,
                "threshold" => threshold_log_max(t, alpha, *y)?,
                "right-tail" => predicted_right_tail(t, alpha, *y)?,
                "left-tail" => predicted_left_tail(t, alpha, *y)?,
                "beta-c" => critical_beta(t, alpha)?,
                "psi" => bump_psi(
                    k.ok_or_else(|| Error::Config("psi needs --k".into()))?,
                    t,
                )?,
                "barrier-upper" | "barrier-lower" | "barrier-good-event" => {
                    let kind = match what.as_str() {
                        "barrier-upper" => BarrierKind::Upper,
                        "barrier-lower" => BarrierKind::Lower,
                        _ => BarrierKind::GoodEvent,
                    };
                    let spec = BarrierSpec::new(kind, t, alpha, *y)?;
                    spec.value(k.ok_or_else(|| Error::Config("barrier needs --k".into()))?)?
                }
                other => {
                    return Err(Error::Config(format!("unknown --what '{other}'")));
                }
            };
            #[derive(Serialize)]
            struct PredictPayload<'a> {
                what: &'a str,
                y: f64,
                k: Option<u32>,
                value: f64,
            }
            let payload = PredictPayload { what, y: *y, k: *k, value };
            println!(
                "{}",
                serde_json::to_string(&payload)
                    .map_err(|e| Error::Cache(format!("json: {e}")))?
            );
            io.write_summary("predict", Some(&config), &payload)?;
            io.finish("predict", Some(&config))?;
            Ok(0)
        }

        Command::Ballot { sweep, mc, seed } => {
            let (kind, points) = parse_sweep_file(sweep)?;
            let report = check_prop_linear(&points, kind)?;
            let mut rows = Vec::new();
            for (p, row) in points.iter().zip(&report.rows) {
                let (mc_est, mc_se) = match (mc, &row.skipped) {
                    (Some(nmc), None) => {
                        let q = BallotQuery::linear(p.j, p.a, p.b0, p.x, p.delta)?;
                        let (est, se) = ballot_mc(&q, *nmc, *seed)?;
                        (est, se)
                    }
                    _ => (f64::NAN, f64::NAN),
                };
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    p.j,
                    p.a,
                    p.b0,
                    p.x,
                    p.delta,
                    row.dp,
                    mc_est,
                    mc_se,
                    row.envelope,
                    row.ratio
                ));
            }
            io.write_csv("ballot-sweep.csv", "j,a,b0,x,delta,dp,mc,mc_stderr,envelope,ratio", &rows)?;
            io.write_summary("ballot", None, &report)?;
            io.finish("ballot", None)?;
            Ok(0)
        }

        Command::Tail { model, y_grid, slope_tol } => {
            let config = model.resolve()?;
            let sim = io.simulator(&config)?;
            let n = config.n_samples;
            let right = y_grid.iter().all(|&y| y >= 0.0);
            let report = if right {
                estimate_right_tail(&sim, y_grid, n)?
            } else {
                estimate_left_tail(&sim, y_grid, n)?
            };
            io.write_csv(
                "tail.csv",
                eulerprod::experiments::TailReport::csv_header(),
                &report.csv_rows(),
            )?;
            #[derive(Serialize)]
            struct TailPayload {
                report: eulerprod::experiments::TailReport,
                slope_within_tol: Option<bool>,
                slope_tol: f64,
            }
            let slope_within_tol = report
                .fitted_slope
                .map(|s| (s - report.predicted_slope).abs() <= *slope_tol);
            let payload = TailPayload { report, slope_within_tol, slope_tol: *slope_tol };
            io.write_summary("tail", Some(&config), &payload)?;
            io.finish("tail", Some(&config))?;
            Ok(0)
        }

        Command::Moments { model, beta, a_list } => {
            let config = model.resolve()?;
            let sim = io.simulator(&config)?;
            let beta = match beta {
                Some(b) => *b,
                None => critical_beta(config.t, config.alpha)?,
            };
            let report = moment_markov_curve(&sim, beta, a_list, config.n_samples)?;
            io.write_csv(
                "moments.csv",
                eulerprod::experiments::MomentReport::csv_header(),
                &report.csv_rows(),
            )?;
            io.write_summary("moments", Some(&config), &report)?;
            io.finish("moments", Some(&config))?;
            Ok(0)
        }

        Command::Counts { model, delta, y } => {
            let config = model.resolve()?;
            let sim = io.simulator(&config)?;
            // For y < 0 the barrier drops the y offset (the W variant).
            let offset = if *y >= 0.0 { *y } else { 0.0 };
            let barrier = BarrierSpec::new(BarrierKind::Lower, config.t, config.alpha, offset)?;
            let report = count_exceedances(&sim, *delta, *y, &barrier, config.n_samples)?;
            io.write_csv(
                "counts.csv",
                eulerprod::experiments::CountReport::csv_header(),
                &report.csv_rows(),
            )?;
            #[derive(Serialize)]
            struct CountsPayload {
                delta: f64,
                y: f64,
                is_w_variant: bool,
                mean_z: f64,
                mean_z2: f64,
                pz_lower: f64,
                pz_stderr: f64,
                p_ge_1: f64,
                p_ge_1_stderr: f64,
                pz_within_slack: bool,
            }
            let payload = CountsPayload {
                delta: report.delta,
                y: report.y,
                is_w_variant: report.is_w_variant,
                mean_z: report.mean_z,
                mean_z2: report.mean_z2,
                pz_lower: report.pz_lower,
                pz_stderr: report.pz_stderr,
                p_ge_1: report.p_ge_1,
                p_ge_1_stderr: report.p_ge_1_stderr,
                pz_within_slack: report.pz_lower <= report.p_ge_1 + 3.0 * report.pz_slack(),
            };
            io.write_summary("counts", Some(&config), &payload)?;
            io.finish("counts", Some(&config))?;
            Ok(0)
        }

        Command::Hitting { model, y } => {
            let config = model.resolve()?;
            let sim = io.simulator(&config)?;
            let barrier = BarrierSpec::new(BarrierKind::Upper, config.t, config.alpha, *y)?;
            let report = first_hitting_histogram(&sim, &barrier, config.n_samples)?;
            io.write_csv(
                "hitting.csv",
                eulerprod::experiments::HittingReport::csv_header(),
                &report.csv_rows(),
            )?;
            #[derive(Serialize)]
            struct HitPayload {
                report: eulerprod::experiments::HittingReport,
                partition_exact: bool,
                late_mass_fraction: f64,
            }
            let payload = HitPayload {
                partition_exact: report.counts.iter().sum::<u64>() == report.crossed,
                late_mass_fraction: report.late_mass_fraction(),
                report,
            };
            io.write_summary("hitting", Some(&config), &payload)?;
            io.finish("hitting", Some(&config))?;
            Ok(0)
        }

        Command::Paircorr { model, y, delta } => {
            let config = model.resolve()?;
            let sim = io.simulator(&config)?;
            let barrier = BarrierSpec::new(BarrierKind::Lower, config.t, config.alpha, *y)?;
            let report = pair_correlation(&sim, *y, *delta, &barrier, config.n_samples)?;
            io.write_csv(
                "paircorr.csv",
                eulerprod::experiments::PairCorrReport::csv_header(),
                &report.csv_rows(),
            )?;
            io.write_summary("paircorr", Some(&config), &report)?;
            io.finish("paircorr", Some(&config))?;
            Ok(0)
        }

        Command::Report { suite: which, seed } => {
            let report = match which.as_str() {
                "desk" => suite::desk(*seed)?,
                "smoke" => suite::smoke(*seed)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown suite '{other}' (expected desk or smoke)"
                    )));
                }
            };
            for line in report.lines() {
                println!("{line}");
            }
            io.write_summary("report", None, &report)?;
            io.finish("report", None)?;
            Ok(if report.all_passed() { 0 } else { 4 })
        }
    }
}

/// Sweep description file: a `kind = ...` line then one point per line,
/// space-separated `key=value` pairs (j, a, b0, x, delta).
fn parse_sweep_file(path: &Path) -> Result<(LinearBound, Vec<LinearSweepPoint>), Error> {
    let text = std::fs::read_to_string(path)?;
    let mut kind = None;
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ctx = |what: String| Error::Config(format!("{}:{}: {what}", path.display(), lineno + 1));
        if let Some(rest) = line.strip_prefix("kind") {
            let value = rest.trim_start().strip_prefix('=').unwrap_or("").trim();
            kind = Some(match value {
                "upper-a2" => LinearBound::UpperA2,
                "lower-a1" => LinearBound::LowerA1,
                other => return Err(ctx(format!("unknown kind '{other}'"))),
            });
            continue;
        }
        let mut j = None;
        let mut a = None;
        let mut b0 = None;
        let mut x = None;
        let mut delta = Some(1.0);
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| ctx(format!("expected key=value, got '{field}'")))?;
            match key {
                "j" => j = Some(value.parse().map_err(|_| ctx("bad j".into()))?),
                "a" => a = Some(value.parse().map_err(|_| ctx("bad a".into()))?),
                "b0" => b0 = Some(value.parse().map_err(|_| ctx("bad b0".into()))?),
                "x" => x = Some(value.parse().map_err(|_| ctx("bad x".into()))?),
                "delta" => delta = Some(value.parse().map_err(|_| ctx("bad delta".into()))?),
                other => return Err(ctx(format!("unknown key '{other}'"))),
            }
        }
        points.push(LinearSweepPoint {
            j: j.ok_or_else(|| ctx("missing j".into()))?,
            a: a.ok_or_else(|| ctx("missing a".into()))?,
            b0: b0.ok_or_else(|| ctx("missing b0".into()))?,
            x: x.ok_or_else(|| ctx("missing x".into()))?,
            delta: delta.unwrap(),
        });
    }
    let kind = kind.ok_or_else(|| {
        Error::Config(format!("{}: missing 'kind = upper-a2|lower-a1' line", path.display()))
    })?;
    if points.is_empty() {
        return Err(Error::Config(format!("{}: no sweep points", path.display())));
    }
    Ok((kind, points))
}
