//! Pipeline orchestration behind the `ingest`, `fit`, `simulate` and
//! `analyze` subcommands.
//!
//! Every stage reads only files produced by earlier stages and a resolved
//! [`RunConfig`], so stages are restartable and a rerun with identical inputs,
//! config and seed rewrites byte-identical outputs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{
    expected_flow_distribution, flow_cloud, fr_bin_points, fr_points, fr_report, strength_fit,
    volume_distribution, FrFilters, HistogramSource,
};
use crate::ensemble::EnsembleParams;
use crate::error::{Error, Result};
use crate::ingest::{build_snapshot, parse_flows, parse_gdp, FlowRecord, GdpRecord};
use crate::io;
use crate::sampler::{chain_diagnostics, metropolis_run, sample_direct, ChainConfig};
use crate::stats::ks_two_sample;

/// Default cut on the expected weight share for the change binning.
pub const DEFAULT_MIN_EXPECTED_SHARE: f64 = 1e-4;
/// Default cut on cell occupancy for the change binning.
pub const DEFAULT_MIN_BIN_COUNT: usize = 1000;
/// Default censoring threshold in millions of USD (the reporting floor of
/// 1000 USD).
pub const DEFAULT_CENSOR_THRESHOLD: f64 = 0.001;
/// Significance level of the per-pair sampler-agreement test.
pub const KS_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Direct,
    Metropolis,
    Both,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Direct => write!(f, "direct"),
            Method::Metropolis => write!(f, "metropolis"),
            Method::Both => write!(f, "both"),
        }
    }
}

/// The declarative run configuration file (TOML). Every field is optional;
/// command-line flags override whatever is present.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub flows: Option<PathBuf>,
    pub gdp: Option<PathBuf>,
    /// Inclusive range `a..b` or comma list.
    pub years: Option<String>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub method: Option<Method>,
    pub censor_threshold: Option<f64>,
    pub hist_bins: Option<usize>,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub filters: FilterSection,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub sweeps: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub step_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub min_expected_share: Option<f64>,
    pub min_bin_count: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&content).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub flows: Option<PathBuf>,
    pub gdp: Option<PathBuf>,
    pub years: Option<String>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub method: Option<Method>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub flows: Option<PathBuf>,
    pub gdp: Option<PathBuf>,
    pub years: Vec<i32>,
    pub output: PathBuf,
    pub seed: u64,
    pub samples: usize,
    pub method: Method,
    pub chain: ChainConfig,
    pub filters: FrFilters,
    pub censor_threshold: f64,
    pub hist_bins: usize,
}

/// Parse `a..b` (inclusive) or a comma-separated list into sorted years.
pub fn parse_years(spec: &str) -> Result<Vec<i32>> {
    let spec = spec.trim();
    let bad = |what: &str| Error::Config(format!("cannot parse years `{spec}`: {what}"));
    let mut years = BTreeSet::new();
    if let Some((a, b)) = spec.split_once("..") {
        let lo: i32 = a.trim().parse().map_err(|_| bad("bad range start"))?;
        let hi: i32 = b.trim().parse().map_err(|_| bad("bad range end"))?;
        if lo > hi {
            return Err(bad("range start exceeds end"));
        }
        years.extend(lo..=hi);
    } else {
        for part in spec.split(',') {
            years.insert(part.trim().parse().map_err(|_| bad("bad year"))?);
        }
    }
    if years.is_empty() {
        return Err(bad("empty"));
    }
    Ok(years.into_iter().collect())
}

impl RunConfig {
    /// Merge defaults, config file and command-line overrides.
    pub fn resolve(file: Option<ConfigFile>, over: Overrides) -> Result<Self> {
        let file = file.unwrap_or_default();
        let years_spec = over
            .years
            .or(file.years)
            .ok_or_else(|| Error::Config("no years given (use --years or the config file)".into()))?;
        let years = parse_years(&years_spec)?;
        let seed = over.seed.or(file.seed).unwrap_or(0);
        let samples = over.samples.or(file.samples).unwrap_or(1);
        if samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        let defaults = ChainConfig::default();
        let chain = ChainConfig {
            sweeps: file.chain.sweeps.unwrap_or(defaults.sweeps),
            burn_in: file.chain.burn_in.unwrap_or(defaults.burn_in),
            thin: file.chain.thin.unwrap_or(defaults.thin),
            step_scale: file.chain.step_scale.unwrap_or(defaults.step_scale),
            seed,
        };
        let filters = FrFilters {
            min_expected_share: Some(
                file.filters
                    .min_expected_share
                    .unwrap_or(DEFAULT_MIN_EXPECTED_SHARE),
            ),
            min_count: Some(file.filters.min_bin_count.unwrap_or(DEFAULT_MIN_BIN_COUNT)),
        };
        Ok(Self {
            flows: over.flows.or(file.flows),
            gdp: over.gdp.or(file.gdp),
            years,
            output: over.output.or(file.output).unwrap_or_else(|| "out".into()),
            seed,
            samples,
            method: over.method.or(file.method).unwrap_or(Method::Direct),
            chain,
            filters,
            censor_threshold: file.censor_threshold.unwrap_or(DEFAULT_CENSOR_THRESHOLD),
            hist_bins: file.hist_bins.unwrap_or(20),
        })
    }

    fn input_path<'a>(&'a self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        let path = path
            .as_ref()
            .ok_or_else(|| Error::Config(format!("no {what} path given")))?;
        if !path.exists() {
            return Err(Error::MissingFile(path.clone()));
        }
        Ok(path)
    }
}

fn load_inputs(cfg: &RunConfig) -> Result<(Vec<FlowRecord>, Vec<GdpRecord>)> {
    let flows_path = cfg.input_path(&cfg.flows, "flows")?;
    let gdp_path = cfg.input_path(&cfg.gdp, "gdp")?;
    let flows = parse_flows(fs::File::open(flows_path)?)?;
    let gdps = parse_gdp(fs::File::open(gdp_path)?)?;
    Ok((flows, gdps))
}

/// Build and export one snapshot pair per requested year.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let (flows, gdps) = load_inputs(cfg)?;
    fs::create_dir_all(&cfg.output)?;
    let mut built = 0usize;
    for &year in &cfg.years {
        let has_rows =
            flows.iter().any(|f| f.year == year) || gdps.iter().any(|g| g.year == year);
        if !has_rows {
            eprintln!("warning: year {year}: no input rows, skipped");
            continue;
        }
        let (snapshot, report) = match build_snapshot(year, &flows, &gdps) {
            Ok(ok) => ok,
            Err(Error::NoUsableCountries { year }) => {
                eprintln!("warning: year {year}: no usable countries, skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        io::write_snapshot(&cfg.output, &snapshot, &[("year", year.to_string())])?;
        println!(
            "ingest year={year} n={} x_total={} t_total={} links={} dropped_countries={} dropped_flows={}",
            snapshot.node_count(),
            snapshot.gdp_total(),
            snapshot.trade_total(),
            snapshot.link_count(),
            report.dropped_countries.len(),
            report.dropped_flows,
        );
        built += 1;
    }
    if built == 0 {
        return Err(Error::EmptyInput("no requested year produced a snapshot".into()));
    }
    Ok(())
}

/// Fit the per-node fields for each year and export the params files.
pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    for &year in &cfg.years {
        let snapshot = io::read_snapshot(&cfg.output, year)?;
        let params = EnsembleParams::fit(&snapshot)?;
        io::write_params(&cfg.output, &params, snapshot.gdp(), &[("year", year.to_string())])?;
        // The fit must satisfy sum(1/theta) = sqrt(T); echo the residual.
        let inv_sum: f64 = params.theta().iter().map(|t| 1.0 / t).sum();
        let sqrt_t = params.trade_total().sqrt();
        let residual = ((inv_sum - sqrt_t) / sqrt_t).abs();
        println!("fit year={year} n={} residual={residual:e}", params.node_count());
    }
    Ok(())
}

fn chain_meta(cfg: &RunConfig) -> Vec<(&'static str, String)> {
    vec![
        ("sweeps", cfg.chain.sweeps.to_string()),
        ("burn_in", cfg.chain.burn_in.to_string()),
        ("thin", cfg.chain.thin.to_string()),
        ("step_scale", cfg.chain.step_scale.to_string()),
    ]
}

/// Sample the fitted ensemble and export realizations plus chain diagnostics.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    cfg.chain.validate()?;
    for &year in &cfg.years {
        let params = io::read_params(&cfg.output, year)?;
        let year_meta = [("year", year.to_string())];

        let direct_wanted = matches!(cfg.method, Method::Direct | Method::Both);
        let metropolis_wanted = matches!(cfg.method, Method::Metropolis | Method::Both);

        if direct_wanted {
            for k in 0..cfg.samples as u64 {
                let graph = sample_direct(&params, cfg.seed + k);
                io::write_sample(&cfg.output, &graph, &year_meta)?;
            }
            println!(
                "simulate year={year} method=direct samples={} seed={}",
                cfg.samples, cfg.seed
            );
        }

        if metropolis_wanted {
            // Offset the seeds so direct and Metropolis sample files never
            // collide when both methods run.
            let seed0 = if direct_wanted {
                cfg.seed + cfg.samples as u64
            } else {
                cfg.seed
            };
            let mut first_chain = None;
            for k in 0..cfg.samples as u64 {
                let chain_cfg = ChainConfig {
                    seed: seed0 + k,
                    ..cfg.chain
                };
                let chain = metropolis_run(&params, &chain_cfg)?;
                let last = chain
                    .samples
                    .last()
                    .cloned()
                    .ok_or_else(|| Error::EmptyInput("chain retained no samples".into()))?;
                let mut meta = chain_meta(cfg);
                meta.push(("year", year.to_string()));
                io::write_sample(&cfg.output, &last, &meta)?;
                if first_chain.is_none() {
                    first_chain = Some(chain);
                }
            }
            let chain = first_chain.expect("at least one chain ran");
            let diag = chain_diagnostics(&chain, &params)?;
            let mut meta = chain_meta(cfg);
            meta.push(("year", year.to_string()));
            meta.push(("seed", seed0.to_string()));
            meta.push(("equilibrium_mean", diag.equilibrium_mean.to_string()));
            io::write_chain_trace(&cfg.output, year, &diag.h_trace, &meta)?;
            println!(
                "simulate year={year} method=metropolis samples={} seed={seed0} acceptance={:.3}",
                cfg.samples,
                chain.acceptance_rate()
            );

            if direct_wanted {
                // Per-pair agreement between the two samplers on this year's
                // fitted ensemble.
                let n = params.node_count();
                let retained = chain.samples.len();
                let direct: Vec<_> = (0..retained as u64)
                    .map(|s| sample_direct(&params, cfg.seed + 1_000_003 + s))
                    .collect();
                let mut passed = 0usize;
                let mut pairs = 0usize;
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let a: Vec<f64> =
                            chain.samples.iter().map(|g| g.weight(i, j)).collect();
                        let b: Vec<f64> = direct.iter().map(|g| g.weight(i, j)).collect();
                        if ks_two_sample(&a, &b, KS_ALPHA).pass {
                            passed += 1;
                        }
                        pairs += 1;
                    }
                }
                println!(
                    "ks year={year} passed={passed}/{pairs} alpha={KS_ALPHA} retained={retained}"
                );
            }
        }
    }
    Ok(())
}

fn sample_files_for_year(dir: &Path, year: i32) -> Result<Vec<PathBuf>> {
    let prefix = format!("sample-{year}-");
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if name.starts_with(&prefix) && name.ends_with(".csv") {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Run every validation analysis over the ingested years.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<()> {
    for &year in &cfg.years {
        let snapshot = io::read_snapshot(&cfg.output, year)?;
        let params = io::read_params(&cfg.output, year)?;
        let year_meta = [("year", year.to_string())];

        let fit = strength_fit(&snapshot)?;
        io::write_strength_fit(&cfg.output, &fit, &year_meta)?;

        let cloud = flow_cloud(&snapshot, &params, cfg.censor_threshold)?;
        let cloud_meta = [
            ("year", year.to_string()),
            ("censor_threshold", cfg.censor_threshold.to_string()),
        ];
        io::write_cloud(&cfg.output, year, &cloud, &cloud_meta)?;

        let hist_meta = [
            ("year", year.to_string()),
            ("bins", cfg.hist_bins.to_string()),
        ];
        let t_total = snapshot.trade_total();
        let real_values: Vec<f64> = snapshot.weights().map(|(_, _, w)| w / t_total).collect();
        let real = volume_distribution(&real_values, cfg.hist_bins, HistogramSource::Real)?;
        io::write_histogram(&cfg.output, year, &real, &hist_meta)?;

        let sample_files = sample_files_for_year(&cfg.output, year)?;
        if sample_files.is_empty() {
            return Err(Error::MissingFile(io::sample_path(&cfg.output, year, cfg.seed)));
        }
        let mut simulated_values = Vec::new();
        for file in &sample_files {
            for (_, _, w) in io::read_sample(file)? {
                if w > 0.0 {
                    simulated_values.push(w / t_total);
                }
            }
        }
        let simulated =
            volume_distribution(&simulated_values, cfg.hist_bins, HistogramSource::Simulated)?;
        io::write_histogram(&cfg.output, year, &simulated, &hist_meta)?;

        let expected = expected_flow_distribution(&params, cfg.hist_bins)?;
        io::write_histogram(&cfg.output, year, &expected, &hist_meta)?;

        println!(
            "analyze year={year} links={} cloud_rows={} samples={}",
            snapshot.link_count(),
            cloud.rows.len(),
            sample_files.len()
        );
    }

    // Fluctuation-response tables for each consecutive pair of requested years.
    for pair in cfg.years.windows(2) {
        let (t, t1) = (pair[0], pair[1]);
        if t1 != t + 1 {
            continue;
        }
        let snap_t = io::read_snapshot(&cfg.output, t)?;
        let snap_t1 = io::read_snapshot(&cfg.output, t1)?;
        let params_t = io::read_params(&cfg.output, t)?;
        let set = fr_points(&snap_t, &snap_t1, &params_t)?;
        io::write_fr_points(&cfg.output, t, t1, &set, &[])?;

        let bins = fr_bin_points(&set.points, &cfg.filters);
        let meta = [
            (
                "min_expected_share",
                cfg.filters
                    .min_expected_share
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "none".into()),
            ),
            (
                "min_bin_count",
                cfg.filters
                    .min_count
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "none".into()),
            ),
        ];
        io::write_fr_bins(&cfg.output, t, t1, &bins, &meta)?;
        if !bins.is_empty() {
            let report = fr_report(&bins)?;
            io::write_fr_aggregates(&cfg.output, t, t1, &report.aggregates, &meta)?;
        }
        println!(
            "analyze fr {t}->{t1} points={} cells={}",
            set.points.len(),
            bins.len()
        );
    }
    Ok(())
}
