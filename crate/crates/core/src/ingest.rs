//! Parsing of bilateral-flow and GDP inputs and construction of immutable
//! yearly trade snapshots.
//!
//! All monetary values are normalized to millions of USD at parse time so the
//! rest of the crate never mixes units. A snapshot stores the directed weight
//! matrix sparsely: absent pairs mean zero trade (reporting floors censor the
//! data well above zero anyway).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use crate::error::{Error, Result};

pub const FLOWS_HEADER: &str = "year,exporter,importer,export_musd,import_musd";
pub const GDP_HEADER: &str = "year,country,gdp_pc_usd,population";

/// One bilateral flow row. `reported_export` is the exporter's report of the
/// flow exporter→importer; `reported_import` is the importer's report of the
/// same flow, when present. Millions of USD.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub year: i32,
    pub exporter: String,
    pub importer: String,
    pub reported_export: f64,
    pub reported_import: Option<f64>,
}

/// One national account row: GDP per capita (USD) and population.
#[derive(Debug, Clone, PartialEq)]
pub struct GdpRecord {
    pub year: i32,
    pub country: String,
    pub gdp_per_capita: f64,
    pub population: f64,
}

impl GdpRecord {
    /// Total GDP in millions of USD.
    pub fn total_gdp(&self) -> f64 {
        self.gdp_per_capita * self.population / 1e6
    }
}

fn check_header(got: &csv::StringRecord, expected: &str) -> Result<()> {
    let got_joined = got.iter().collect::<Vec<_>>().join(",");
    if got_joined.trim() != expected {
        return Err(Error::Header {
            expected: expected.to_string(),
            got: got_joined,
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, row: usize) -> Result<T> {
    field.trim().parse::<T>().map_err(|_| Error::Row {
        row,
        msg: format!("cannot parse {name} from `{field}`"),
    })
}

/// Parse the canonical flows CSV (`year,exporter,importer,export_musd,import_musd`).
///
/// Every malformed row is an error carrying its 1-based line number; self-flows
/// and negative volumes are rejected the same way.
pub fn parse_flows<R: Read>(reader: R) -> Result<Vec<FlowRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(rdr.headers()?, FLOWS_HEADER)?;

    let mut records = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = idx + 2; // header is line 1
        if rec.len() != 5 {
            return Err(Error::Row {
                row,
                msg: format!("expected 5 fields, got {}", rec.len()),
            });
        }
        let year: i32 = parse_field(&rec[0], "year", row)?;
        let exporter = rec[1].to_string();
        let importer = rec[2].to_string();
        if exporter.is_empty() || importer.is_empty() {
            return Err(Error::Row {
                row,
                msg: "empty country code".to_string(),
            });
        }
        if exporter == importer {
            return Err(Error::Row {
                row,
                msg: format!("self-flow for `{exporter}`"),
            });
        }
        let reported_export: f64 = parse_field(&rec[3], "export_musd", row)?;
        let reported_import = if rec[4].is_empty() {
            None
        } else {
            Some(parse_field::<f64>(&rec[4], "import_musd", row)?)
        };
        if reported_export < 0.0 || reported_import.is_some_and(|v| v < 0.0) {
            return Err(Error::Row {
                row,
                msg: "negative trade volume".to_string(),
            });
        }
        if !reported_export.is_finite() || reported_import.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Row {
                row,
                msg: "non-finite trade volume".to_string(),
            });
        }
        records.push(FlowRecord {
            year,
            exporter,
            importer,
            reported_export,
            reported_import,
        });
    }
    Ok(records)
}

/// Parse the canonical GDP CSV (`year,country,gdp_pc_usd,population`).
///
/// Rejects nonpositive GDP per capita or population and duplicate
/// (year, country) keys.
pub fn parse_gdp<R: Read>(reader: R) -> Result<Vec<GdpRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(rdr.headers()?, GDP_HEADER)?;

    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = idx + 2;
        if rec.len() != 4 {
            return Err(Error::Row {
                row,
                msg: format!("expected 4 fields, got {}", rec.len()),
            });
        }
        let year: i32 = parse_field(&rec[0], "year", row)?;
        let country = rec[1].to_string();
        if country.is_empty() {
            return Err(Error::Row {
                row,
                msg: "empty country code".to_string(),
            });
        }
        let gdp_per_capita: f64 = parse_field(&rec[2], "gdp_pc_usd", row)?;
        let population: f64 = parse_field(&rec[3], "population", row)?;
        if !(gdp_per_capita > 0.0) || !(population > 0.0) {
            return Err(Error::Row {
                row,
                msg: format!("nonpositive gdp_pc_usd or population for `{country}`"),
            });
        }
        if !gdp_per_capita.is_finite() || !population.is_finite() {
            return Err(Error::Row {
                row,
                msg: "non-finite value".to_string(),
            });
        }
        if !seen.insert((year, country.clone())) {
            return Err(Error::DuplicateKey {
                row,
                key: format!("{year},{country}"),
            });
        }
        records.push(GdpRecord {
            year,
            country,
            gdp_per_capita,
            population,
        });
    }
    Ok(records)
}

/// One year of the weighted directed trade network together with the GDP
/// vector and the global totals. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    year: i32,
    countries: Vec<String>,
    x: Vec<f64>,
    w: BTreeMap<(u32, u32), f64>,
    x_total: f64,
    t_total: f64,
}

impl Snapshot {
    /// Build a snapshot from already-resolved parts. `w` holds the nonzero
    /// directed weights keyed by (row, col) index into `countries`.
    pub fn new(
        year: i32,
        countries: Vec<String>,
        x: Vec<f64>,
        w: BTreeMap<(u32, u32), f64>,
    ) -> Result<Self> {
        if countries.is_empty() {
            return Err(Error::NoUsableCountries { year });
        }
        if countries.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: countries.len(),
                got: x.len(),
            });
        }
        let n = countries.len() as u32;
        for (country, &xi) in countries.iter().zip(&x) {
            if !(xi > 0.0) || !xi.is_finite() {
                return Err(Error::NonpositiveGdp {
                    country: country.clone(),
                });
            }
        }
        for (&(i, j), &wij) in &w {
            if i == j {
                return Err(Error::SelfPair { node: i as usize });
            }
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n as usize,
                    got: i.max(j) as usize + 1,
                });
            }
            if !(wij >= 0.0) || !wij.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weight ({i},{j}) = {wij} is not a nonnegative real"
                )));
            }
        }
        let x_total = x.iter().sum();
        let t_total = w.values().sum();
        Ok(Self {
            year,
            countries,
            x,
            w,
            x_total,
            t_total,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn node_count(&self) -> usize {
        self.countries.len()
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn index_of(&self, country: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == country)
    }

    /// Total GDP vector, millions of USD.
    pub fn gdp(&self) -> &[f64] {
        &self.x
    }

    /// Sum of all GDPs (X).
    pub fn gdp_total(&self) -> f64 {
        self.x_total
    }

    /// Sum of all directed weights (T).
    pub fn trade_total(&self) -> f64 {
        self.t_total
    }

    /// Directed weight w(i→j); absent pairs are zero.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w
            .get(&(i as u32, j as u32))
            .copied()
            .unwrap_or(0.0)
    }

    /// Iterator over the stored (nonzero) weights.
    pub fn weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.w.iter().map(|(&(i, j), &w)| (i as usize, j as usize, w))
    }

    pub fn link_count(&self) -> usize {
        self.w.len()
    }

    /// Total export per country: s_out(i) = Σ_j w(i→j).
    pub fn out_strengths(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.countries.len()];
        for (&(i, _), &w) in &self.w {
            s[i as usize] += w;
        }
        s
    }

    /// Total import per country: s_in(i) = Σ_j w(j→i).
    pub fn in_strengths(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.countries.len()];
        for (&(_, j), &w) in &self.w {
            s[j as usize] += w;
        }
        s
    }

    /// Normalized view: GDP shares, strength shares and weight shares.
    pub fn relative_view(&self) -> Result<RelativeView> {
        if !(self.t_total > 0.0) {
            return Err(Error::DegenerateSnapshot { year: self.year });
        }
        let xi = self.x.iter().map(|&x| x / self.x_total).collect();
        let sigma_out = self
            .out_strengths()
            .iter()
            .map(|&s| s / self.t_total)
            .collect();
        let sigma_in = self
            .in_strengths()
            .iter()
            .map(|&s| s / self.t_total)
            .collect();
        let v = self
            .w
            .iter()
            .map(|(&k, &w)| (k, w / self.t_total))
            .collect();
        Ok(RelativeView {
            xi,
            sigma_out,
            sigma_in,
            v,
        })
    }
}

/// The snapshot expressed in relative quantities: every vector sums to one.
#[derive(Debug, Clone)]
pub struct RelativeView {
    /// GDP shares ξ_i = x_i / X.
    pub xi: Vec<f64>,
    /// Export shares σ_out(i) = s_out(i) / T.
    pub sigma_out: Vec<f64>,
    /// Import shares σ_in(i) = s_in(i) / T.
    pub sigma_in: Vec<f64>,
    /// Weight shares v(i→j) = w(i→j) / T, sparse.
    pub v: BTreeMap<(u32, u32), f64>,
}

/// What `build_snapshot` had to discard to produce a consistent snapshot.
#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    /// Countries that appear in the flow data but have no GDP record; their
    /// flows were dropped with them.
    pub dropped_countries: Vec<String>,
    /// Number of flow rows dropped because an endpoint lacked GDP data.
    pub dropped_flows: usize,
}

/// Resolve one year's records into a snapshot.
///
/// The directed weight is the arithmetic average of the two reports when both
/// are present, otherwise the single report as-is. Countries with a GDP record
/// but no trade are kept; countries with trade but no GDP record are dropped
/// and listed in the report.
pub fn build_snapshot(
    year: i32,
    flows: &[FlowRecord],
    gdps: &[GdpRecord],
) -> Result<(Snapshot, BuildReport)> {
    let mut x_by_country: BTreeMap<&str, f64> = BTreeMap::new();
    for g in gdps.iter().filter(|g| g.year == year) {
        if x_by_country.insert(&g.country, g.total_gdp()).is_some() {
            return Err(Error::DuplicateKey {
                row: 0,
                key: format!("{year},{}", g.country),
            });
        }
    }
    if x_by_country.is_empty() {
        return Err(Error::NoUsableCountries { year });
    }

    // BTreeMap iteration gives the countries sorted by code.
    let countries: Vec<String> = x_by_country.keys().map(|c| c.to_string()).collect();
    let x: Vec<f64> = x_by_country.values().copied().collect();
    let index: BTreeMap<&str, u32> = countries
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();

    let mut w = BTreeMap::new();
    let mut report = BuildReport::default();
    let mut dropped = BTreeSet::new();
    for f in flows.iter().filter(|f| f.year == year) {
        let (i, j) = match (index.get(f.exporter.as_str()), index.get(f.importer.as_str())) {
            (Some(&i), Some(&j)) => (i, j),
            (i, j) => {
                if i.is_none() {
                    dropped.insert(f.exporter.clone());
                }
                if j.is_none() {
                    dropped.insert(f.importer.clone());
                }
                report.dropped_flows += 1;
                continue;
            }
        };
        let weight = match f.reported_import {
            Some(imp) => (f.reported_export + imp) / 2.0,
            None => f.reported_export,
        };
        if w.insert((i, j), weight).is_some() {
            return Err(Error::DuplicateKey {
                row: 0,
                key: format!("{year},{},{}", f.exporter, f.importer),
            });
        }
    }
    // Zero-weight rows carry no link.
    w.retain(|_, weight| *weight > 0.0);
    report.dropped_countries = dropped.into_iter().collect();

    let snapshot = Snapshot::new(year, countries, x, w)?;
    Ok((snapshot, report))
}
