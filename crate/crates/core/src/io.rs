//! CSV file formats for the pipeline stages.
//!
//! Every output starts with `#`-prefixed comment lines recording the effective
//! settings that produced it, followed by a header row. Floats are written in
//! Rust's shortest round-trip form, so rereading a file reproduces the exact
//! bit pattern and reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    FlowCloud, FrAggregate, FrBin, FrPointSet, HistogramSource, StrengthFit, VolumeHistogram,
};
use crate::ensemble::EnsembleParams;
use crate::error::{Error, Result};
use crate::ingest::Snapshot;
use crate::sampler::SampledGraph;

/// Key/value pairs echoed into a file's comment header.
pub type Meta<'a> = &'a [(&'a str, String)];

fn render(kind: &str, meta: Meta, header: &str, rows: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tradenet {kind}");
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "{header}");
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    out
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Comment metadata of a pipeline file: the `# key=value` lines.
fn parse_meta(content: &str) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    for line in content.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    meta
}

fn csv_reader(content: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes())
}

pub fn snapshot_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("snapshot-{year}.csv"))
}

pub fn countries_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("countries-{year}.csv"))
}

pub fn params_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("params-{year}.csv"))
}

pub fn sample_path(dir: &Path, year: i32, seed: u64) -> PathBuf {
    dir.join(format!("sample-{year}-{seed}.csv"))
}

pub fn chain_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("chain-{year}.csv"))
}

pub fn strength_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("strength-{year}.csv"))
}

pub fn cloud_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("cloud-{year}.csv"))
}

pub fn cloud_bins_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("cloud-bins-{year}.csv"))
}

pub fn hist_path(dir: &Path, year: i32, source: HistogramSource) -> PathBuf {
    dir.join(format!("hist-{year}-{source}.csv"))
}

pub fn fr_points_path(dir: &Path, t: i32, t1: i32) -> PathBuf {
    dir.join(format!("fr-points-{t}-{t1}.csv"))
}

pub fn fr_bins_path(dir: &Path, t: i32, t1: i32) -> PathBuf {
    dir.join(format!("fr-{t}-{t1}.csv"))
}

pub fn fr_agg_path(dir: &Path, t: i32, t1: i32) -> PathBuf {
    dir.join(format!("fr-agg-{t}-{t1}.csv"))
}

/// Write `snapshot-<year>.csv` (rows `i,j,w_ij`) and its country sidecar
/// `countries-<year>.csv` (rows `country,x_i`).
pub fn write_snapshot(dir: &Path, snapshot: &Snapshot, meta: Meta) -> Result<()> {
    let year = snapshot.year();
    let rows: Vec<String> = snapshot
        .weights()
        .map(|(i, j, w)| format!("{i},{j},{w}"))
        .collect();
    write_file(
        &snapshot_path(dir, year),
        &render("snapshot", meta, "i,j,w_ij", &rows),
    )?;
    let sidecar: Vec<String> = snapshot
        .countries()
        .iter()
        .zip(snapshot.gdp())
        .map(|(c, x)| format!("{c},{x}"))
        .collect();
    write_file(
        &countries_path(dir, year),
        &render("countries", meta, "country,x_i", &sidecar),
    )
}

pub fn read_snapshot(dir: &Path, year: i32) -> Result<Snapshot> {
    let sidecar = read_to_string(&countries_path(dir, year))?;
    let mut countries = Vec::new();
    let mut x = Vec::new();
    for rec in csv_reader(&sidecar).records() {
        let rec = rec?;
        countries.push(rec[0].to_string());
        x.push(rec[1].parse::<f64>().map_err(|_| Error::Row {
            row: countries.len(),
            msg: format!("bad x_i `{}`", &rec[1]),
        })?);
    }
    let body = read_to_string(&snapshot_path(dir, year))?;
    let mut w = BTreeMap::new();
    for (k, rec) in csv_reader(&body).records().enumerate() {
        let rec = rec?;
        let parse_err = |msg: String| Error::Row { row: k + 1, msg };
        let i: u32 = rec[0]
            .parse()
            .map_err(|_| parse_err(format!("bad index `{}`", &rec[0])))?;
        let j: u32 = rec[1]
            .parse()
            .map_err(|_| parse_err(format!("bad index `{}`", &rec[1])))?;
        let wij: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(format!("bad weight `{}`", &rec[2])))?;
        w.insert((i, j), wij);
    }
    Snapshot::new(year, countries, x, w)
}

/// Write `params-<year>.csv` (rows `country,x_i,xi_i,theta_i`). The totals
/// ride along as comment metadata so the params can be rebuilt exactly.
pub fn write_params(dir: &Path, params: &EnsembleParams, gdp: &[f64], meta: Meta) -> Result<()> {
    let mut all_meta: Vec<(&str, String)> = vec![
        ("t_total", format!("{}", params.trade_total())),
        ("x_total", format!("{}", params.gdp_total())),
    ];
    all_meta.extend(meta.iter().cloned());
    let x_total = params.gdp_total();
    let rows: Vec<String> = params
        .countries()
        .iter()
        .zip(gdp)
        .zip(params.theta())
        .map(|((c, &x), &theta)| format!("{c},{x},{},{theta}", x / x_total))
        .collect();
    write_file(
        &params_path(dir, params.year()),
        &render("params", &all_meta, "country,x_i,xi_i,theta_i", &rows),
    )
}

pub fn read_params(dir: &Path, year: i32) -> Result<EnsembleParams> {
    let content = read_to_string(&params_path(dir, year))?;
    let meta = parse_meta(&content);
    let get_total = |key: &str| -> Result<f64> {
        meta.get(key)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("params file lacks `{key}` metadata")))
    };
    let t_total = get_total("t_total")?;
    let x_total = get_total("x_total")?;
    let mut countries = Vec::new();
    let mut theta = Vec::new();
    for rec in csv_reader(&content).records() {
        let rec = rec?;
        countries.push(rec[0].to_string());
        theta.push(rec[3].parse::<f64>().map_err(|_| Error::Row {
            row: countries.len(),
            msg: format!("bad theta `{}`", &rec[3]),
        })?);
    }
    EnsembleParams::from_parts(year, countries, theta, t_total, x_total)
}

/// Write `sample-<year>-<seed>.csv` (rows `i,j,w_ij`, all directed pairs).
pub fn write_sample(dir: &Path, graph: &SampledGraph, meta: Meta) -> Result<PathBuf> {
    let mut all_meta: Vec<(&str, String)> = vec![
        ("seed", format!("{}", graph.seed)),
        ("method", format!("{}", graph.method)),
    ];
    all_meta.extend(meta.iter().cloned());
    let rows: Vec<String> = graph
        .iter_weights()
        .map(|(i, j, w)| format!("{i},{j},{w}"))
        .collect();
    let path = sample_path(dir, graph.year(), graph.seed);
    write_file(&path, &render("sample", &all_meta, "i,j,w_ij", &rows))?;
    Ok(path)
}

/// Read back the weights of a sample file as (i, j, w) triples.
pub fn read_sample(path: &Path) -> Result<Vec<(u32, u32, f64)>> {
    let content = read_to_string(path)?;
    let mut out = Vec::new();
    for (k, rec) in csv_reader(&content).records().enumerate() {
        let rec = rec?;
        let parse_err = |msg: String| Error::Row { row: k + 1, msg };
        out.push((
            rec[0]
                .parse()
                .map_err(|_| parse_err(format!("bad index `{}`", &rec[0])))?,
            rec[1]
                .parse()
                .map_err(|_| parse_err(format!("bad index `{}`", &rec[1])))?,
            rec[2]
                .parse()
                .map_err(|_| parse_err(format!("bad weight `{}`", &rec[2])))?,
        ));
    }
    Ok(out)
}

/// Write `chain-<year>.csv` (rows `sweep,H`).
pub fn write_chain_trace(dir: &Path, year: i32, h_trace: &[f64], meta: Meta) -> Result<()> {
    let rows: Vec<String> = h_trace
        .iter()
        .enumerate()
        .map(|(sweep, h)| format!("{sweep},{h}"))
        .collect();
    write_file(
        &chain_path(dir, year),
        &render("chain", meta, "sweep,H", &rows),
    )
}

pub fn write_strength_fit(dir: &Path, fit: &StrengthFit, meta: Meta) -> Result<()> {
    let rows = vec![
        format!(
            "out,{},{},{}",
            fit.a_fit_out, fit.a_theory, fit.loglog_slope_out
        ),
        format!("in,{},{},{}", fit.a_fit_in, fit.a_theory, fit.loglog_slope_in),
    ];
    write_file(
        &strength_path(dir, fit.year),
        &render(
            "strength",
            meta,
            "direction,a_fit,a_theory,loglog_slope",
            &rows,
        ),
    )
}

pub fn write_cloud(dir: &Path, year: i32, cloud: &FlowCloud, meta: Meta) -> Result<()> {
    let rows: Vec<String> = cloud
        .rows
        .iter()
        .map(|r| format!("{},{},{}", r.gdp_product, r.observed, r.expected))
        .collect();
    write_file(
        &cloud_path(dir, year),
        &render("cloud", meta, "gdp_product,observed_w,expected_w", &rows),
    )?;
    let bin_rows: Vec<String> = cloud
        .bins
        .iter()
        .map(|b| {
            format!(
                "{},{},{},{},{}",
                b.lo, b.hi, b.count, b.mean_observed, b.mean_expected
            )
        })
        .collect();
    write_file(
        &cloud_bins_path(dir, year),
        &render(
            "cloud-bins",
            meta,
            "bin_lo,bin_hi,count,mean_observed_w,mean_expected_w",
            &bin_rows,
        ),
    )
}

pub fn write_histogram(dir: &Path, year: i32, hist: &VolumeHistogram, meta: Meta) -> Result<()> {
    let rows: Vec<String> = (0..hist.n_bins())
        .map(|k| format!("{},{},{}", hist.edges[k], hist.edges[k + 1], hist.densities[k]))
        .collect();
    write_file(
        &hist_path(dir, year, hist.source),
        &render("hist", meta, "bin_lo,bin_hi,density", &rows),
    )
}

pub fn write_fr_points(dir: &Path, t: i32, t1: i32, set: &FrPointSet, meta: Meta) -> Result<()> {
    let rows: Vec<String> = set
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{}",
                set.countries[p.i], set.countries[p.j], p.eta_ij, p.rel_dv, p.rel_dxi_sum
            )
        })
        .collect();
    write_file(
        &fr_points_path(dir, t, t1),
        &render(
            "fr-points",
            meta,
            "exporter,importer,eta_ij,rel_dv,rel_dxi_sum",
            &rows,
        ),
    )
}

pub fn write_fr_bins(dir: &Path, t: i32, t1: i32, bins: &[FrBin], meta: Meta) -> Result<()> {
    let rows: Vec<String> = bins
        .iter()
        .map(|b| {
            format!(
                "{},{},{},{},{}",
                b.m, b.n, b.count, b.geo_mean_dxi, b.geo_mean_dv
            )
        })
        .collect();
    write_file(
        &fr_bins_path(dir, t, t1),
        &render("fr", meta, "m,n,count,geo_mean_dxi,geo_mean_dv", &rows),
    )
}

pub fn write_fr_aggregates(
    dir: &Path,
    t: i32,
    t1: i32,
    aggregates: &[FrAggregate],
    meta: Meta,
) -> Result<()> {
    let rows: Vec<String> = aggregates
        .iter()
        .map(|a| format!("{},{},{},{}", a.n, a.cells, a.mean_dxi, a.mean_dv))
        .collect();
    write_file(
        &fr_agg_path(dir, t, t1),
        &render("fr-agg", meta, "n,cells,mean_dxi,mean_dv", &rows),
    )
}
