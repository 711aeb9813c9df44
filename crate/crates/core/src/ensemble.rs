//! Closed-form mathematics of the factorized maximum-entropy ensemble of
//! weighted directed networks.
//!
//! Each directed pair (i,j) carries an independent exponential weight with
//! rate theta_ij = theta_i * theta_j, and the per-node fields follow from GDP
//! alone:
//!
//!   theta_i = (1/sqrt(T)) * X / x_i
//!
//! which makes the expected weight the stochastic gravity form
//! <w_ij> = (T/X^2) * x_i * x_j and, in relative variables,
//! <v_ij> = xi_i * xi_j = 1/eta_ij with eta_ij = T * theta_ij.

use crate::error::{Error, Result};
use crate::ingest::Snapshot;

/// Fitted per-node field parameters for one year. theta has units of inverse
/// weight (millions of USD)^-1/2 in the crate's unit convention.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    year: i32,
    countries: Vec<String>,
    theta: Vec<f64>,
    t_total: f64,
    x_total: f64,
}

/// The pairwise field in absolute (theta_ij) and relative (eta_ij) variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairField {
    pub i: usize,
    pub j: usize,
    pub theta_ij: f64,
    pub eta_ij: f64,
}

impl EnsembleParams {
    /// Fit the per-node fields to a snapshot. Requires positive total trade
    /// and positive GDP everywhere.
    pub fn fit(snapshot: &Snapshot) -> Result<Self> {
        let t_total = snapshot.trade_total();
        let x_total = snapshot.gdp_total();
        if !(t_total > 0.0) {
            return Err(Error::DegenerateSnapshot {
                year: snapshot.year(),
            });
        }
        let sqrt_t = t_total.sqrt();
        let theta = snapshot
            .countries()
            .iter()
            .zip(snapshot.gdp())
            .map(|(country, &x)| {
                if x > 0.0 {
                    Ok(x_total / x / sqrt_t)
                } else {
                    Err(Error::NonpositiveGdp {
                        country: country.clone(),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            year: snapshot.year(),
            countries: snapshot.countries().to_vec(),
            theta,
            t_total,
            x_total,
        })
    }

    /// Rebuild params from stored parts (file round-trips, bindings).
    pub fn from_parts(
        year: i32,
        countries: Vec<String>,
        theta: Vec<f64>,
        t_total: f64,
        x_total: f64,
    ) -> Result<Self> {
        if countries.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: countries.len(),
                got: theta.len(),
            });
        }
        if countries.is_empty() {
            return Err(Error::EmptyInput("no countries".into()));
        }
        if !(t_total > 0.0) || !(x_total > 0.0) {
            return Err(Error::InvalidArgument(
                "totals must be positive".into(),
            ));
        }
        for (country, &th) in countries.iter().zip(&theta) {
            if !(th > 0.0) || !th.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "theta for `{country}` must be a positive real, got {th}"
                )));
            }
        }
        Ok(Self {
            year,
            countries,
            theta,
            t_total,
            x_total,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn node_count(&self) -> usize {
        self.theta.len()
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn trade_total(&self) -> f64 {
        self.t_total
    }

    pub fn gdp_total(&self) -> f64 {
        self.x_total
    }

    /// GDP share implied by the fit: xi_i = 1 / (theta_i * sqrt(T)).
    pub fn gdp_share(&self, i: usize) -> f64 {
        1.0 / (self.theta[i] * self.t_total.sqrt())
    }

    /// Pairwise field for a directed pair; the diagonal carries no link.
    pub fn pair_field(&self, i: usize, j: usize) -> Result<PairField> {
        self.check_pair(i, j)?;
        let theta_ij = self.theta[i] * self.theta[j];
        Ok(PairField {
            i,
            j,
            theta_ij,
            eta_ij: self.t_total * theta_ij,
        })
    }

    /// Expected weight of the directed link: <w_ij> = 1/(theta_i theta_j),
    /// equivalently (T/X^2) x_i x_j.
    pub fn expected_weight(&self, i: usize, j: usize) -> Result<f64> {
        self.check_pair(i, j)?;
        Ok(1.0 / (self.theta[i] * self.theta[j]))
    }

    /// Expected relative weight: <v_ij> = <w_ij>/T = xi_i xi_j.
    pub fn expected_share(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.expected_weight(i, j)? / self.t_total)
    }

    /// Expected out- and in-strength vectors. The pairwise field is symmetric,
    /// so the two vectors are equal: <s_i> = sum_{j != i} 1/(theta_i theta_j).
    ///
    /// Because the sum excludes j = i, <s_i> = (T/X) x_i (1 - xi_i): the
    /// proportionality to GDP holds up to a relative deviation of order xi_i.
    pub fn expected_strengths(&self) -> (Vec<f64>, Vec<f64>) {
        let inv_sum: f64 = self.theta.iter().map(|&t| 1.0 / t).sum();
        let out: Vec<f64> = self
            .theta
            .iter()
            .map(|&ti| (inv_sum - 1.0 / ti) / ti)
            .collect();
        let inn = out.clone();
        (out, inn)
    }

    /// Log of the partition function: ln Z = -Σ_{i≠j} ln theta_ij.
    ///
    /// Computed in the log domain; the product form overflows f64 for even
    /// modest networks.
    pub fn log_partition(&self) -> f64 {
        let n = self.theta.len() as f64;
        let log_sum: f64 = self.theta.iter().map(|&t| t.ln()).sum();
        // Each theta_i appears in 2(N-1) ordered pairs.
        -2.0 * (n - 1.0) * log_sum
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let n = self.theta.len();
        if i >= n || j >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: i.max(j) + 1,
            });
        }
        if i == j {
            return Err(Error::SelfPair { node: i });
        }
        Ok(())
    }
}

/// Anything that exposes directed edge weights on a fixed node set.
pub trait EdgeWeights {
    fn node_count(&self) -> usize;
    fn for_each_weight<F: FnMut(usize, usize, f64)>(&self, visit: F);
}

impl EdgeWeights for Snapshot {
    fn node_count(&self) -> usize {
        Snapshot::node_count(self)
    }

    fn for_each_weight<F: FnMut(usize, usize, f64)>(&self, mut visit: F) {
        for (i, j, w) in self.weights() {
            visit(i, j, w);
        }
    }
}

/// Network energy in absolute variables: H = Σ_{i≠j} theta_ij w_ij.
pub fn hamiltonian<G: EdgeWeights>(params: &EnsembleParams, graph: &G) -> Result<f64> {
    if graph.node_count() != params.node_count() {
        return Err(Error::DimensionMismatch {
            expected: params.node_count(),
            got: graph.node_count(),
        });
    }
    let theta = params.theta();
    let mut h = 0.0;
    graph.for_each_weight(|i, j, w| {
        h += theta[i] * theta[j] * w;
    });
    Ok(h)
}

/// Network energy in relative variables: H = Σ_{i≠j} eta_ij v_ij, where the
/// graph holds weight shares v = w/T. Agrees with `hamiltonian` on the
/// corresponding absolute graph.
pub fn hamiltonian_relative<G: EdgeWeights>(params: &EnsembleParams, shares: &G) -> Result<f64> {
    if shares.node_count() != params.node_count() {
        return Err(Error::DimensionMismatch {
            expected: params.node_count(),
            got: shares.node_count(),
        });
    }
    let theta = params.theta();
    let t_total = params.trade_total();
    let mut h = 0.0;
    shares.for_each_weight(|i, j, v| {
        h += t_total * theta[i] * theta[j] * v;
    });
    Ok(h)
}

/// Density of the per-link weight law: p(w) = theta_ij * exp(-theta_ij * w).
pub fn link_weight_density(theta_ij: f64, w: f64) -> Result<f64> {
    if !(theta_ij > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta_ij must be positive, got {theta_ij}"
        )));
    }
    if w < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "weight must be nonnegative, got {w}"
        )));
    }
    Ok(theta_ij * (-theta_ij * w).exp())
}

/// Both sides of the fluctuation-response identity for one link in relative
/// variables: (variance of v, susceptibility -d<v>/d eta). For the exponential
/// link law both equal 1/eta^2, so the returned pair is equal in closed form.
pub fn fr_identity_check(eta: f64) -> (f64, f64) {
    let variance = 1.0 / (eta * eta);
    let susceptibility = 1.0 / (eta * eta);
    (variance, susceptibility)
}

/// First-order prediction of the relative change in the normalized weight of
/// a link from the relative GDP-share changes of its endpoints:
/// d<v>/<v> = d xi_i/xi_i + d xi_j/xi_j.
pub fn fr_predict(rel_dxi_i: f64, rel_dxi_j: f64) -> f64 {
    rel_dxi_i + rel_dxi_j
}
