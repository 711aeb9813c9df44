//! Empirical validations of the ensemble: strength-vs-GDP fits, bilateral
//! flow clouds, trade-volume distributions and the fluctuation-response
//! binning of year-over-year changes.

use std::collections::BTreeMap;

use crate::ensemble::EnsembleParams;
use crate::error::{Error, Result};
use crate::ingest::Snapshot;
use crate::stats::{linear_fit, slope_through_origin};

/// Number of logarithmic bins used for the flow-cloud inset means.
pub const CLOUD_BINS: usize = 20;

/// Proportionality fits of node strength against GDP for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthFit {
    pub year: i32,
    /// Slope implied by the ensemble: A = T/X.
    pub a_theory: f64,
    /// Least-squares slope through the origin of s_out on x.
    pub a_fit_out: f64,
    /// Least-squares slope through the origin of s_in on x.
    pub a_fit_in: f64,
    /// OLS slope of ln s_out on ln x.
    pub loglog_slope_out: f64,
    /// OLS slope of ln s_in on ln x.
    pub loglog_slope_in: f64,
}

/// Fit total exports and imports against GDP, through the origin and in
/// log-log coordinates. Countries with zero strength are excluded from the
/// respective fit; each direction needs at least three of them.
pub fn strength_fit(snapshot: &Snapshot) -> Result<StrengthFit> {
    let fit_one = |strengths: &[f64], what: &str| -> Result<(f64, f64)> {
        let mut xs = Vec::new();
        let mut ss = Vec::new();
        for (&x, &s) in snapshot.gdp().iter().zip(strengths) {
            if s > 0.0 {
                xs.push(x);
                ss.push(s);
            }
        }
        if xs.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "fewer than 3 countries with positive {what}-strength"
            )));
        }
        let a_fit = slope_through_origin(&xs, &ss);
        let ln_x: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
        let ln_s: Vec<f64> = ss.iter().map(|v| v.ln()).collect();
        let (slope, _) = linear_fit(&ln_x, &ln_s);
        Ok((a_fit, slope))
    };

    let (a_fit_out, loglog_slope_out) = fit_one(&snapshot.out_strengths(), "out")?;
    let (a_fit_in, loglog_slope_in) = fit_one(&snapshot.in_strengths(), "in")?;
    Ok(StrengthFit {
        year: snapshot.year(),
        a_theory: snapshot.trade_total() / snapshot.gdp_total(),
        a_fit_out,
        a_fit_in,
        loglog_slope_out,
        loglog_slope_in,
    })
}

/// One observed link in the flow cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudRow {
    pub i: usize,
    pub j: usize,
    /// Product of the endpoint GDPs, (millions USD)^2.
    pub gdp_product: f64,
    pub observed: f64,
    pub expected: f64,
}

/// Mean observed and expected weight over one logarithmic bin of the GDP
/// product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_observed: f64,
    pub mean_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowCloud {
    pub rows: Vec<CloudRow>,
    pub bins: Vec<CloudBin>,
}

/// Observed weight against GDP product for every pair above the censoring
/// threshold, with log-binned means for the inset comparison against the
/// gravity line.
pub fn flow_cloud(
    snapshot: &Snapshot,
    params: &EnsembleParams,
    censor_threshold: f64,
) -> Result<FlowCloud> {
    if params.node_count() != snapshot.node_count() {
        return Err(Error::DimensionMismatch {
            expected: snapshot.node_count(),
            got: params.node_count(),
        });
    }
    let mut rows = Vec::new();
    for (i, j, w) in snapshot.weights() {
        if w > censor_threshold {
            rows.push(CloudRow {
                i,
                j,
                gdp_product: snapshot.gdp()[i] * snapshot.gdp()[j],
                observed: w,
                expected: params.expected_weight(i, j)?,
            });
        }
    }
    let bins = bin_cloud(&rows, CLOUD_BINS);
    Ok(FlowCloud { rows, bins })
}

fn bin_cloud(rows: &[CloudRow], n_bins: usize) -> Vec<CloudBin> {
    if rows.is_empty() {
        return Vec::new();
    }
    let lo = rows
        .iter()
        .map(|r| r.gdp_product)
        .fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|r| r.gdp_product)
        .fold(f64::NEG_INFINITY, f64::max);
    let (ln_lo, ln_hi) = widened_log_range(lo, hi);
    let width = (ln_hi - ln_lo) / n_bins as f64;

    let mut count = vec![0usize; n_bins];
    let mut sum_obs = vec![0.0f64; n_bins];
    let mut sum_exp = vec![0.0f64; n_bins];
    for r in rows {
        let k = bin_index(r.gdp_product.ln(), ln_lo, width, n_bins);
        count[k] += 1;
        sum_obs[k] += r.observed;
        sum_exp[k] += r.expected;
    }
    (0..n_bins)
        .filter(|&k| count[k] > 0)
        .map(|k| CloudBin {
            lo: (ln_lo + k as f64 * width).exp(),
            hi: (ln_lo + (k + 1) as f64 * width).exp(),
            count: count[k],
            mean_observed: sum_obs[k] / count[k] as f64,
            mean_expected: sum_exp[k] / count[k] as f64,
        })
        .collect()
}

// Widen the range a hair so max lands inside the last bin and a degenerate
// min == max still spans something.
fn widened_log_range(lo: f64, hi: f64) -> (f64, f64) {
    let ln_lo = (lo * (1.0 - 1e-9)).ln();
    let ln_hi = (hi * (1.0 + 1e-9)).ln();
    (ln_lo, ln_hi)
}

fn bin_index(ln_v: f64, ln_lo: f64, width: f64, n_bins: usize) -> usize {
    (((ln_v - ln_lo) / width) as usize).min(n_bins - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramSource {
    Real,
    Simulated,
    Expected,
}

impl std::fmt::Display for HistogramSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HistogramSource::Real => write!(f, "real"),
            HistogramSource::Simulated => write!(f, "simulated"),
            HistogramSource::Expected => write!(f, "expected"),
        }
    }
}

/// Logarithmically binned, density-normalized histogram of positive volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHistogram {
    /// n_bins + 1 ascending edges.
    pub edges: Vec<f64>,
    /// Densities over linear width: Σ density_k (edge_{k+1} - edge_k) = 1.
    pub densities: Vec<f64>,
    pub source: HistogramSource,
}

impl VolumeHistogram {
    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    /// Probability mass inside bin k.
    pub fn mass(&self, k: usize) -> f64 {
        self.densities[k] * (self.edges[k + 1] - self.edges[k])
    }
}

/// Histogram positive values over logarithmic bins, normalized to unit mass.
pub fn volume_distribution(
    values: &[f64],
    n_bins: usize,
    source: HistogramSource,
) -> Result<VolumeHistogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no volumes to bin".into()));
    }
    if n_bins < 5 {
        return Err(Error::InvalidArgument(format!(
            "need at least 5 bins, got {n_bins}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "volumes must be positive reals, got {v}"
            )));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (ln_lo, ln_hi) = widened_log_range(lo, hi);
    let width = (ln_hi - ln_lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &v in values {
        counts[bin_index(v.ln(), ln_lo, width, n_bins)] += 1;
    }
    let edges: Vec<f64> = (0..=n_bins)
        .map(|k| (ln_lo + k as f64 * width).exp())
        .collect();
    let total = values.len() as f64;
    let densities = (0..n_bins)
        .map(|k| counts[k] as f64 / (total * (edges[k + 1] - edges[k])))
        .collect();
    Ok(VolumeHistogram {
        edges,
        densities,
        source,
    })
}

/// Distribution of the expected weight shares <v_ij> = xi_i xi_j over all
/// directed pairs.
pub fn expected_flow_distribution(
    params: &EnsembleParams,
    n_bins: usize,
) -> Result<VolumeHistogram> {
    let n = params.node_count();
    let mut values = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                values.push(params.expected_share(i, j)?);
            }
        }
    }
    volume_distribution(&values, n_bins, HistogramSource::Expected)
}

/// Year-over-year change of one directed link, in relative variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrPoint {
    /// Indices into the shared country list of the point set.
    pub i: usize,
    pub j: usize,
    /// Conjugate field at year t, from the fitted params.
    pub eta_ij: f64,
    /// v(t+1)/v(t) - 1.
    pub rel_dv: f64,
    /// dxi_i/xi_i + dxi_j/xi_j across the two years.
    pub rel_dxi_sum: f64,
}

/// Fluctuation-response points for one consecutive year pair, together with
/// the country list their indices refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct FrPointSet {
    /// Countries present in both years, sorted by code.
    pub countries: Vec<String>,
    pub points: Vec<FrPoint>,
}

/// Build one point per directed pair with positive shares in both years.
///
/// GDP shares and trade totals are recomputed on the country set common to
/// both snapshots so the relative changes stay well-defined when countries
/// enter or leave the data. The conjugate field comes from the year-t fit.
pub fn fr_points(
    snapshot_t: &Snapshot,
    snapshot_t1: &Snapshot,
    params_t: &EnsembleParams,
) -> Result<FrPointSet> {
    let mut common: Vec<(usize, usize)> = Vec::new();
    let mut countries = Vec::new();
    for (idx_t, country) in snapshot_t.countries().iter().enumerate() {
        if let Some(idx_t1) = snapshot_t1.index_of(country) {
            common.push((idx_t, idx_t1));
            countries.push(country.clone());
        }
    }
    if common.is_empty() {
        return Err(Error::EmptyInput(
            "the two snapshots share no countries".into(),
        ));
    }

    let theta_index: BTreeMap<&str, usize> = params_t
        .countries()
        .iter()
        .enumerate()
        .map(|(k, c)| (c.as_str(), k))
        .collect();
    let theta_of = |country: &str| -> Result<f64> {
        theta_index
            .get(country)
            .map(|&k| params_t.theta()[k])
            .ok_or_else(|| Error::InvalidArgument(format!("country `{country}` missing from params")))
    };

    // Shares over the intersection.
    let x_t: f64 = common.iter().map(|&(a, _)| snapshot_t.gdp()[a]).sum();
    let x_t1: f64 = common.iter().map(|&(_, b)| snapshot_t1.gdp()[b]).sum();
    let mut t_t = 0.0;
    let mut t_t1 = 0.0;
    for &(a_i, b_i) in &common {
        for &(a_j, b_j) in &common {
            t_t += snapshot_t.weight(a_i, a_j);
            t_t1 += snapshot_t1.weight(b_i, b_j);
        }
    }
    if !(t_t > 0.0) || !(t_t1 > 0.0) {
        return Err(Error::EmptyInput(
            "no trade on the shared country set".into(),
        ));
    }

    let mut points = Vec::new();
    for (i, &(a_i, b_i)) in common.iter().enumerate() {
        let dxi_i = (snapshot_t1.gdp()[b_i] / x_t1) / (snapshot_t.gdp()[a_i] / x_t) - 1.0;
        let theta_i = theta_of(&countries[i])?;
        for (j, &(a_j, b_j)) in common.iter().enumerate() {
            if i == j {
                continue;
            }
            let w_t = snapshot_t.weight(a_i, a_j);
            let w_t1 = snapshot_t1.weight(b_i, b_j);
            if !(w_t > 0.0) || !(w_t1 > 0.0) {
                continue;
            }
            let v_t = w_t / t_t;
            let v_t1 = w_t1 / t_t1;
            let dxi_j = (snapshot_t1.gdp()[b_j] / x_t1) / (snapshot_t.gdp()[a_j] / x_t) - 1.0;
            points.push(FrPoint {
                i,
                j,
                eta_ij: params_t.trade_total() * theta_i * theta_of(&countries[j])?,
                rel_dv: v_t1 / v_t - 1.0,
                rel_dxi_sum: dxi_i + dxi_j,
            });
        }
    }
    Ok(FrPointSet { countries, points })
}

/// Cell filters for the fluctuation-response binning. Both cuts are strict
/// (`>`), matching the reported selection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrFilters {
    /// Keep only points whose expected share <v_ij> = 1/eta exceeds this.
    pub min_expected_share: Option<f64>,
    /// Keep only cells with more members than this.
    pub min_count: Option<usize>,
}

/// One (m, n) cell of the change binning: m indexes ln eta, n indexes the
/// percentage GDP-change sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrBin {
    pub m: i64,
    pub n: i64,
    pub count: usize,
    /// Geometric average of the volume ratios, shifted back: exp(mean ln(1+rel_dv)) - 1.
    pub geo_mean_dv: f64,
    /// Same construction for the GDP-change factor 1 + rel_dxi_sum.
    pub geo_mean_dxi: f64,
    /// Arithmetic mean of the members' expected shares 1/eta.
    pub mean_expected_share: f64,
}

#[derive(Debug, Clone, Default)]
struct CellAcc {
    count: usize,
    sum_ln_dv: f64,
    sum_ln_dxi: f64,
    sum_share: f64,
}

/// Streaming accumulator over (m, n) cells so large point sets never need to
/// be materialized at once.
#[derive(Debug, Clone)]
pub struct FrBinAccumulator {
    cells: BTreeMap<(i64, i64), CellAcc>,
    filters: FrFilters,
}

impl FrBinAccumulator {
    pub fn new(filters: FrFilters) -> Self {
        Self {
            cells: BTreeMap::new(),
            filters,
        }
    }

    /// Assign one point to its cell. Points failing the expected-share cut,
    /// and points whose GDP factor 1 + rel_dxi_sum is not positive (their
    /// logarithm is undefined), are skipped.
    pub fn add(&mut self, p: &FrPoint) {
        if let Some(min_share) = self.filters.min_expected_share {
            if 1.0 / p.eta_ij <= min_share {
                return;
            }
        }
        let dv_factor = 1.0 + p.rel_dv;
        let dxi_factor = 1.0 + p.rel_dxi_sum;
        if !(dv_factor > 0.0) || !(dxi_factor > 0.0) {
            return;
        }
        let m = p.eta_ij.ln().floor() as i64 + 1;
        let n = (100.0 * p.rel_dxi_sum).floor() as i64 + 1;
        let cell = self.cells.entry((m, n)).or_default();
        cell.count += 1;
        cell.sum_ln_dv += dv_factor.ln();
        cell.sum_ln_dxi += dxi_factor.ln();
        cell.sum_share += 1.0 / p.eta_ij;
    }

    pub fn add_points(&mut self, points: &[FrPoint]) {
        for p in points {
            self.add(p);
        }
    }

    /// Apply the count filter and produce the cells sorted by (m, n).
    pub fn finish(self) -> Vec<FrBin> {
        let min_count = self.filters.min_count.unwrap_or(0);
        self.cells
            .into_iter()
            .filter(|(_, acc)| acc.count > min_count)
            .map(|((m, n), acc)| {
                let c = acc.count as f64;
                FrBin {
                    m,
                    n,
                    count: acc.count,
                    geo_mean_dv: (acc.sum_ln_dv / c).exp() - 1.0,
                    geo_mean_dxi: (acc.sum_ln_dxi / c).exp() - 1.0,
                    mean_expected_share: acc.sum_share / c,
                }
            })
            .collect()
    }
}

/// Group points into (m, n) cells with geometric averaging in ratio space.
pub fn fr_bin_points(points: &[FrPoint], filters: &FrFilters) -> Vec<FrBin> {
    let mut acc = FrBinAccumulator::new(*filters);
    acc.add_points(points);
    acc.finish()
}

/// One horizontal-axis aggregate: cells sharing n averaged across m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrAggregate {
    pub n: i64,
    pub cells: usize,
    pub mean_dxi: f64,
    pub mean_dv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrReport {
    pub cells: Vec<FrBin>,
    pub aggregates: Vec<FrAggregate>,
}

/// Per-cell rows plus, for each n, the arithmetic average of the cell values
/// across m.
pub fn fr_report(bins: &[FrBin]) -> Result<FrReport> {
    if bins.is_empty() {
        return Err(Error::EmptyInput("no cells to report".into()));
    }
    let mut by_n: BTreeMap<i64, (usize, f64, f64)> = BTreeMap::new();
    for b in bins {
        let e = by_n.entry(b.n).or_insert((0, 0.0, 0.0));
        e.0 += 1;
        e.1 += b.geo_mean_dxi;
        e.2 += b.geo_mean_dv;
    }
    let aggregates = by_n
        .into_iter()
        .map(|(n, (cells, sum_dxi, sum_dv))| FrAggregate {
            n,
            cells,
            mean_dxi: sum_dxi / cells as f64,
            mean_dv: sum_dv / cells as f64,
        })
        .collect();
    Ok(FrReport {
        cells: bins.to_vec(),
        aggregates,
    })
}
