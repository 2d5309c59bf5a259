//! Repeating a single-shot measurement: sequential Bayesian updating,
//! per-record estimates and errors, exact enumeration over outcome strings,
//! and seeded Monte-Carlo trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assessment::prior_estimate;
use crate::error::{Error, Result};
use crate::estimation::{minimum_error, operator_moments};
use crate::models::{
    ensure_same_grid, posterior_from_likelihood, ParameterizedState, Pom, PriorDensity,
};

/// Default bound on `outcomes^shots` for exact enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

/// Posterior after a sequence of outcomes.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    pub density: PriorDensity,
    pub history: Vec<String>,
    pub shot_count: usize,
}

impl PosteriorState {
    pub fn from_prior(prior: &PriorDensity) -> Self {
        PosteriorState {
            density: prior.clone(),
            history: Vec::new(),
            shot_count: 0,
        }
    }
}

/// Multiplies the posterior by the likelihood of `outcome` and renormalizes.
pub fn update(
    ps: &PosteriorState,
    state: &ParameterizedState,
    pom: &Pom,
    outcome: &str,
) -> Result<PosteriorState> {
    let density = crate::models::posterior(&ps.density, state, pom, outcome)?;
    let mut history = ps.history.clone();
    history.push(outcome.to_string());
    Ok(PosteriorState {
        density,
        history,
        shot_count: ps.shot_count + 1,
    })
}

/// Posterior geometric mean `θ_u exp(∫ p(θ|x⃗) log(θ/θ_u) dθ)`.
pub fn sequential_estimate(ps: &PosteriorState, theta_u: f64) -> f64 {
    prior_estimate(&ps.density, theta_u)
}

/// `∫ p(θ|x⃗) log²(θ̃/θ) dθ` for a reported estimate `θ̃`.
pub fn experimental_error(ps: &PosteriorState, estimate: f64) -> Result<f64> {
    if !(estimate.is_finite() && estimate > 0.0) {
        return Err(Error::validation("estimate must be positive and finite"));
    }
    let le = estimate.ln();
    Ok(ps.density.expectation(|t| {
        let d = le - t.ln();
        d * d
    }))
}

/// One simulated measurement record.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// Grid node actually used to generate the data.
    pub true_theta: f64,
    pub outcomes: Vec<String>,
    /// Posterior geometric mean after each shot.
    pub estimates: Vec<f64>,
    /// Posterior expected `log²(θ̃/θ)` after each shot.
    pub experimental_errors: Vec<f64>,
    pub seed: u64,
    /// Index of the RNG stream (trajectory index within a batch).
    pub stream: u64,
}

impl Trajectory {
    pub fn shot_count(&self) -> usize {
        self.outcomes.len()
    }

    /// `log²(θ̃_final/θ*)`.
    pub fn final_log_deviation_sq(&self) -> f64 {
        let e = *self
            .estimates
            .last()
            .expect("trajectories have at least one shot");
        (e / self.true_theta).ln().powi(2)
    }

    /// CSV with header `shot,outcome,estimate,experimental_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("shot,outcome,estimate,experimental_error\n");
        for (k, ((o, e), err)) in self
            .outcomes
            .iter()
            .zip(&self.estimates)
            .zip(&self.experimental_errors)
            .enumerate()
        {
            out.push_str(&format!("{},{},{:?},{:?}\n", k + 1, csv_field(o), e, err));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// How the true parameter of each trajectory is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruthSampling {
    /// Fixed value, snapped to the nearest grid node.
    Fixed(f64),
    /// A grid node drawn with probability `w_j p(θ_j)`.
    FromPrior,
}

/// Generator for trajectory `stream` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Simulator<'a> {
    prior: &'a PriorDensity,
    pom: &'a Pom,
    lik: Vec<Vec<f64>>,
}

impl<'a> Simulator<'a> {
    fn new(prior: &'a PriorDensity, state: &ParameterizedState, pom: &'a Pom) -> Result<Self> {
        ensure_same_grid(prior.grid(), state.grid())?;
        let lik = pom.likelihoods(state)?;
        Ok(Simulator { prior, pom, lik })
    }

    fn run(
        &self,
        truth: TruthSampling,
        shots: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Trajectory> {
        let mut rng = trajectory_rng(seed, stream);
        let grid = self.prior.grid();
        let node = match truth {
            TruthSampling::Fixed(t) => grid.nearest_node(t),
            TruthSampling::FromPrior => sample_index(&self.prior.masses(), rng.random::<f64>()),
        };
        let theta_star = grid.nodes()[node];
        let probs: Vec<f64> = self.lik.iter().map(|row| row[node]).collect();

        let mut density = self.prior.clone();
        let mut outcomes = Vec::with_capacity(shots);
        let mut estimates = Vec::with_capacity(shots);
        let mut errors = Vec::with_capacity(shots);
        for _ in 0..shots {
            let x = sample_index(&probs, rng.random::<f64>());
            let label = &self.pom.labels()[x];
            density = posterior_from_likelihood(&density, &self.lik[x], label)?;
            let ps = PosteriorState {
                density,
                history: Vec::new(),
                shot_count: 0,
            };
            let est = sequential_estimate(&ps, 1.0);
            errors.push(experimental_error(&ps, est)?);
            estimates.push(est);
            outcomes.push(label.clone());
            density = ps.density;
        }
        Ok(Trajectory {
            true_theta: theta_star,
            outcomes,
            estimates,
            experimental_errors: errors,
            seed,
            stream,
        })
    }
}

/// Index `k` with `Σ_{i<k} w_i ≤ u·W < Σ_{i≤k} w_i`; skips zero-weight entries.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last_positive = k;
        acc += w;
        if target < acc {
            return k;
        }
    }
    last_positive
}

/// Simulates `shots` repetitions of `pom` at a fixed true parameter.
pub fn simulate(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    true_theta: f64,
    shots: usize,
    seed: u64,
) -> Result<Trajectory> {
    check_simulation(prior, true_theta, shots)?;
    Simulator::new(prior, state, pom)?.run(TruthSampling::Fixed(true_theta), shots, seed, 0)
}

fn check_simulation(prior: &PriorDensity, true_theta: f64, shots: usize) -> Result<()> {
    if shots == 0 {
        return Err(Error::validation("shots must be at least 1"));
    }
    if !prior.grid().contains(true_theta) {
        let (a, b) = prior.grid().support();
        return Err(Error::validation(format!(
            "true theta {true_theta} lies outside the grid support [{a}, {b}]"
        )));
    }
    Ok(())
}

/// Independent trajectories; trajectory `i` uses stream `i` of `seed`.
/// Output order is the trajectory index regardless of scheduling.
pub fn simulate_batch(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    truth: TruthSampling,
    shots: usize,
    trajectories: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    match truth {
        TruthSampling::Fixed(t) => check_simulation(prior, t, shots)?,
        TruthSampling::FromPrior => check_simulation(prior, prior.grid().nodes()[0], shots)?,
    }
    let sim = Simulator::new(prior, state, pom)?;
    (0..trajectories as u64)
        .into_par_iter()
        .map(|i| sim.run(truth, shots, seed, i))
        .collect()
}

/// Mean and spread of final-shot quantities across a batch.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub trajectories: usize,
    pub shots: usize,
    pub seed: u64,
    pub mean_final_experimental_error: f64,
    pub std_final_experimental_error: f64,
    /// Mean of `log²(θ̃_final/θ*)`.
    pub mean_final_log_deviation_sq: f64,
    pub std_final_log_deviation_sq: f64,
    /// Standard error of `mean_final_log_deviation_sq`.
    pub stderr_final_log_deviation_sq: f64,
}

pub fn summarize(trajs: &[Trajectory], seed: u64) -> BatchSummary {
    let n = trajs.len();
    let (m1, s1) = mean_std(
        trajs
            .iter()
            .map(|t| *t.experimental_errors.last().unwrap_or(&f64::NAN)),
    );
    let (m2, s2) = mean_std(trajs.iter().map(Trajectory::final_log_deviation_sq));
    BatchSummary {
        trajectories: n,
        shots: trajs.first().map_or(0, Trajectory::shot_count),
        seed,
        mean_final_experimental_error: m1,
        std_final_experimental_error: s1,
        mean_final_log_deviation_sq: m2,
        std_final_log_deviation_sq: s2,
        stderr_final_log_deviation_sq: if n > 0 {
            s2 / (n as f64).sqrt()
        } else {
            f64::NAN
        },
    }
}

fn mean_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Exact mean logarithmic error of `shots` repetitions followed by the
/// posterior geometric-mean estimator, together with the matching
/// information gain `K = Σ_s p(s) log²(θ̃(s)/θ̃_p)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MultishotExact {
    pub shots: usize,
    pub epsilon_mle: f64,
    pub k: f64,
}

pub fn exact_multishot_error(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    shots: usize,
) -> Result<f64> {
    Ok(exact_multishot(prior, state, pom, shots, DEFAULT_ENUMERATION_CAP)?.epsilon_mle)
}

/// Enumerates every outcome string of length `shots`; rejects runs with more
/// than `cap` strings.
pub fn exact_multishot(
    prior: &PriorDensity,
    state: &ParameterizedState,
    pom: &Pom,
    shots: usize,
    cap: usize,
) -> Result<MultishotExact> {
    if shots == 0 {
        return Err(Error::validation("shots must be at least 1"));
    }
    let k = pom.len();
    let strings = (k as u128).checked_pow(shots as u32).unwrap_or(u128::MAX);
    if strings > cap as u128 {
        return Err(Error::validation(format!(
            "{k}^{shots} outcome strings exceed the enumeration cap {cap}; use simulate instead"
        )));
    }
    ensure_same_grid(prior.grid(), state.grid())?;
    let lik = pom.likelihoods(state)?;
    let center = prior.log_moment(1, 1.0);
    let logs: Vec<f64> = prior
        .grid()
        .nodes()
        .iter()
        .map(|t| t.ln() - center)
        .collect();
    let start = prior.masses();
    let mut acc = (0.0, 0.0);
    enumerate(&lik, &logs, &start, shots, &mut acc);
    Ok(MultishotExact {
        shots,
        epsilon_mle: acc.0,
        k: acc.1,
    })
}

// Depth-first over outcome strings; `weights` holds p(θ_j) w_j Π p(s_i|θ_j).
fn enumerate(
    lik: &[Vec<f64>],
    logs: &[f64],
    weights: &[f64],
    remaining: usize,
    acc: &mut (f64, f64),
) {
    if remaining == 0 {
        let ps: f64 = weights.iter().sum();
        if ps <= 0.0 {
            return;
        }
        let mean = weights.iter().zip(logs).map(|(w, u)| w * u).sum::<f64>() / ps;
        let err: f64 = weights
            .iter()
            .zip(logs)
            .map(|(w, u)| w * (mean - u).powi(2))
            .sum();
        acc.0 += err;
        acc.1 += ps * mean * mean;
        return;
    }
    for row in lik {
        let next: Vec<f64> = weights.iter().zip(row).map(|(w, l)| w * l).collect();
        if next.iter().all(|w| *w == 0.0) {
            continue;
        }
        enumerate(lik, logs, &next, remaining - 1, acc);
    }
}

/// Minimum error for `copies` independent copies of the state, i.e. the
/// single-shot minimum of the family `ρ(θ)^{⊗copies}`. No measurement on the
/// copies, repeated or collective, does better.
pub fn n_copy_minimum(
    prior: &PriorDensity,
    state: &ParameterizedState,
    copies: usize,
    theta_u: f64,
) -> Result<f64> {
    if copies == 0 {
        return Err(Error::validation("copies must be at least 1"));
    }
    let dim = (state.dim() as u128)
        .checked_pow(copies as u32)
        .unwrap_or(u128::MAX);
    if dim > MAX_COPY_DIMENSION as u128 {
        return Err(Error::validation(format!(
            "{copies} copies of a {}-dimensional state exceed dimension {MAX_COPY_DIMENSION}",
            state.dim()
        )));
    }
    let states = state
        .states()
        .iter()
        .map(|rho| (1..copies).fold(rho.clone(), |acc, _| acc.kron(rho)))
        .collect();
    let joint = ParameterizedState::new(state.grid().clone(), states)?;
    let m = operator_moments(prior, &joint, theta_u)?;
    Ok(minimum_error(&m)?.epsilon_min)
}

/// Largest joint dimension accepted by [`n_copy_minimum`].
pub const MAX_COPY_DIMENSION: usize = 256;
