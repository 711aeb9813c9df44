//! Ensemble realizations: an exact direct sampler and a Metropolis chain.
//!
//! The target distribution factorizes over directed pairs, so each pair gets
//! its own deterministic random stream derived from (seed, i, j). Results are
//! reproducible for a fixed seed regardless of evaluation order, and the pairs
//! could be updated in parallel without changing any output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::ensemble::{EdgeWeights, EnsembleParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Direct,
    Metropolis,
}

impl std::fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleMethod::Direct => write!(f, "direct"),
            SampleMethod::Metropolis => write!(f, "metropolis"),
        }
    }
}

/// One realization of all directed weights. Dense row-major storage with an
/// exactly zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGraph {
    year: i32,
    n: usize,
    weights: Vec<f64>,
    pub seed: u64,
    pub method: SampleMethod,
}

impl SampledGraph {
    fn zeros(year: i32, n: usize, seed: u64, method: SampleMethod) -> Self {
        Self {
            year,
            n,
            weights: vec![0.0; n * n],
            seed,
            method,
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// All off-diagonal weights in row-major order.
    pub fn iter_weights(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| j != i)
                .map(move |j| (i, j, self.weights[i * self.n + j]))
        })
    }
}

impl EdgeWeights for SampledGraph {
    fn node_count(&self) -> usize {
        self.n
    }

    fn for_each_weight<F: FnMut(usize, usize, f64)>(&self, mut visit: F) {
        for (i, j, w) in self.iter_weights() {
            visit(i, j, w);
        }
    }
}

/// Metropolis chain parameters. One sweep proposes one update per directed
/// pair; samples are retained every `thin` sweeps after `burn_in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Proposal half-width as a multiple of the local mean 1/theta_ij.
    pub step_scale: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sweeps: 5000,
            burn_in: 1000,
            thin: 10,
            step_scale: 1.0,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 {
            return Err(Error::InvalidChainConfig("sweeps must be positive".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(Error::InvalidChainConfig(format!(
                "burn_in ({}) must be smaller than sweeps ({})",
                self.burn_in, self.sweeps
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidChainConfig("thin must be at least 1".into()));
        }
        if !(self.step_scale > 0.0) || !self.step_scale.is_finite() {
            return Err(Error::InvalidChainConfig(format!(
                "step_scale must be positive, got {}",
                self.step_scale
            )));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.sweeps - self.burn_in).div_ceil(self.thin)
    }
}

/// Starting state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainInit {
    /// Every weight at its ensemble mean 1/theta_ij (the default).
    Mean,
    /// Every weight at zero; useful for relaxation diagnostics.
    Zero,
}

/// A finished Metropolis run: retained samples plus the per-sweep energy
/// trace and acceptance counters.
#[derive(Debug, Clone)]
pub struct Chain {
    pub samples: Vec<SampledGraph>,
    pub h_trace: Vec<f64>,
    pub accepted: u64,
    pub proposed: u64,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed as f64
    }
}

/// Derived convergence summary for a chain.
#[derive(Debug, Clone)]
pub struct ChainDiagnostics {
    /// Energy after each sweep.
    pub h_trace: Vec<f64>,
    /// Running mean of the trace.
    pub running_mean: Vec<f64>,
    /// Exact equilibrium mean: each directed pair contributes
    /// theta_ij * <w_ij> = 1, so <H> = N(N-1).
    pub equilibrium_mean: f64,
}

// Fixed per-pair stream: ChaCha keyed directly on (seed, i, j) plus a domain
// tag, so streams are independent across pairs and across nearby seeds.
fn pair_rng(seed: u64, i: usize, j: usize) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(i as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(j as u64).to_le_bytes());
    key[24..].copy_from_slice(&0x7761_6972_7470_6e65u64.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

fn draw_exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    // u in (0,1]; inverse CDF keeps ln finite.
    let u = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

/// Draw one exact realization: every directed weight is an independent
/// exponential with rate theta_ij. Bit-reproducible for a fixed seed.
pub fn sample_direct(params: &EnsembleParams, seed: u64) -> SampledGraph {
    let n = params.node_count();
    let theta = params.theta();
    let mut graph = SampledGraph::zeros(params.year(), n, seed, SampleMethod::Direct);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut rng = pair_rng(seed, i, j);
            graph.weights[i * n + j] = draw_exponential(&mut rng, theta[i] * theta[j]);
        }
    }
    graph
}

/// Acceptance probability of moving a link of rate `theta_ij` from `w` to
/// `w_new` under a symmetric proposal: min(1, exp(-theta_ij (w_new - w))),
/// and zero for negative proposals.
pub fn acceptance_probability(theta_ij: f64, w: f64, w_new: f64) -> f64 {
    if w_new < 0.0 {
        return 0.0;
    }
    (-(theta_ij * (w_new - w))).exp().min(1.0)
}

/// Run a Metropolis chain starting from the ensemble mean.
pub fn metropolis_run(params: &EnsembleParams, cfg: &ChainConfig) -> Result<Chain> {
    metropolis_run_from(params, cfg, ChainInit::Mean)
}

/// Run a Metropolis chain from a chosen initial state.
///
/// Proposals are additive uniform with per-pair half-width
/// step_scale / theta_ij; negative proposals are rejected outright, which
/// keeps the kernel symmetric and nonnegative weights invariant.
pub fn metropolis_run_from(
    params: &EnsembleParams,
    cfg: &ChainConfig,
    init: ChainInit,
) -> Result<Chain> {
    cfg.validate()?;
    let n = params.node_count();
    let theta = params.theta();
    let retained = cfg.retained();
    let mut samples: Vec<SampledGraph> = (0..retained)
        .map(|_| SampledGraph::zeros(params.year(), n, cfg.seed, SampleMethod::Metropolis))
        .collect();
    let mut h_trace = vec![0.0f64; cfg.sweeps];
    let mut accepted = 0u64;
    let mut proposed = 0u64;

    // Pairs are independent chains; run each one across all sweeps.
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let rate = theta[i] * theta[j];
            let delta = cfg.step_scale / rate;
            let mut rng = pair_rng(cfg.seed, i, j);
            let mut w = match init {
                ChainInit::Mean => 1.0 / rate,
                ChainInit::Zero => 0.0,
            };
            for (sweep, h) in h_trace.iter_mut().enumerate() {
                let w_new = w + delta * (2.0 * rng.random::<f64>() - 1.0);
                proposed += 1;
                if w_new >= 0.0 {
                    let dh = rate * (w_new - w);
                    if dh <= 0.0 || rng.random::<f64>() < (-dh).exp() {
                        w = w_new;
                        accepted += 1;
                    }
                }
                *h += rate * w;
                if sweep >= cfg.burn_in && (sweep - cfg.burn_in).is_multiple_of(cfg.thin) {
                    let k = (sweep - cfg.burn_in) / cfg.thin;
                    samples[k].weights[i * n + j] = w;
                }
            }
        }
    }

    Ok(Chain {
        samples,
        h_trace,
        accepted,
        proposed,
    })
}

/// Summarize a chain's energy trace against the exact equilibrium mean.
pub fn chain_diagnostics(chain: &Chain, params: &EnsembleParams) -> Result<ChainDiagnostics> {
    if chain.h_trace.is_empty() {
        return Err(Error::EmptyInput("chain has no sweeps".into()));
    }
    if let Some(sample) = chain.samples.first() {
        if sample.node_count() != params.node_count() {
            return Err(Error::DimensionMismatch {
                expected: params.node_count(),
                got: sample.node_count(),
            });
        }
    }
    let mut running_mean = Vec::with_capacity(chain.h_trace.len());
    let mut acc = 0.0;
    for (k, &h) in chain.h_trace.iter().enumerate() {
        acc += h;
        running_mean.push(acc / (k + 1) as f64);
    }
    let n = params.node_count() as f64;
    Ok(ChainDiagnostics {
        h_trace: chain.h_trace.clone(),
        running_mean,
        equilibrium_mean: n * (n - 1.0),
    })
}
