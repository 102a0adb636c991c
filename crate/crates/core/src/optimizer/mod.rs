//! Coarse-to-fine placement optimizer: scoring, sampling, resampling,
//! semantic-centre refinement and final selection.

mod run;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngExt;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{mean, Vec2};
use crate::gridmap::FreeSet;
use crate::scalar::Real;

pub use run::{optimize, IterationTrace, OptimizeOutput, RankAttachments};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("no feasible region: {accepted} of {wanted} samples accepted after {attempts} draws")]
    NoFeasibleRegion { accepted: usize, wanted: usize, attempts: usize },
    #[error("oracle: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Weighting between geometric and semantic terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum AlphaMode {
    Schedule,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PlannerConfig<T: Real> {
    pub n: usize,
    pub n_sample: usize,
    pub iterations: usize,
    pub r_max: T,
    pub r_star: T,
    pub sigma_sample: T,
    pub sigma_g: T,
    pub sigma_s_base: T,
    pub sigma_s_decay: T,
    pub alpha_max: T,
    pub gamma: T,
    pub delta: T,
    pub top_k: usize,
    /// Candidates requested from the oracle in the last iteration.
    pub final_k: usize,
    pub alpha: AlphaMode,
}

pub const SIGMA_S_FLOOR: f64 = 1e-4;
pub const ATTEMPTS_PER_SAMPLE: usize = 100;

impl<T: Real> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            n: 1000,
            n_sample: 20,
            iterations: 4,
            r_max: T::lit(1.2),
            r_star: T::lit(0.7),
            sigma_sample: T::lit(1.0),
            sigma_g: T::lit(0.1),
            sigma_s_base: T::lit(0.2),
            sigma_s_decay: T::lit(0.8),
            alpha_max: T::lit(0.6),
            gamma: T::lit(2.0),
            delta: T::lit(0.05),
            top_k: 3,
            final_k: 5,
            alpha: AlphaMode::Schedule,
        }
    }
}

impl<T: Real> PlannerConfig<T> {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let pos = [self.r_max, self.r_star, self.sigma_sample, self.sigma_g, self.sigma_s_base, self.sigma_s_decay, self.gamma, self.delta];
        if !pos.iter().all(|v| *v > T::zero()) {
            return Err(OptimizeError::Config("all lengths and rates must be positive".into()));
        }
        if self.n < self.n_sample || self.n_sample == 0 || self.iterations == 0 || self.top_k == 0 {
            return Err(OptimizeError::Config("need N ≥ N_sample ≥ 1, T ≥ 1, K ≥ 1".into()));
        }
        if self.top_k > self.n_sample || self.final_k > self.n_sample || self.final_k < 3 {
            return Err(OptimizeError::Config("K and the final count must fit in N_sample; final count ≥ 3".into()));
        }
        if !(self.alpha_max >= T::zero() && self.alpha_max <= T::one()) {
            return Err(OptimizeError::Config("alpha_max must lie in [0, 1]".into()));
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(OptimizeError::Config("fixed alpha must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn alpha_at(&self, t: usize) -> T {
        match self.alpha {
            AlphaMode::Schedule => alpha_schedule(T::from_usize_lossy(t), T::from_usize_lossy(self.iterations), self.alpha_max, self.gamma),
            AlphaMode::Fixed(a) => T::lit(a),
        }
    }

    /// σ_s after `refinements` completed refinement steps.
    pub fn sigma_s_after(&self, refinements: usize) -> T {
        let s = self.sigma_s_base * self.sigma_s_decay.powi(refinements as i32);
        s.max(T::lit(SIGMA_S_FLOOR))
    }

    pub fn cast<U: Real>(&self) -> PlannerConfig<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        PlannerConfig {
            n: self.n,
            n_sample: self.n_sample,
            iterations: self.iterations,
            r_max: c(self.r_max),
            r_star: c(self.r_star),
            sigma_sample: c(self.sigma_sample),
            sigma_g: c(self.sigma_g),
            sigma_s_base: c(self.sigma_s_base),
            sigma_s_decay: c(self.sigma_s_decay),
            alpha_max: c(self.alpha_max),
            gamma: c(self.gamma),
            delta: c(self.delta),
            top_k: self.top_k,
            final_k: self.final_k,
            alpha: self.alpha,
        }
    }
}

/// `α_max / (1 + exp(−γ (t − T/2)))`.
pub fn alpha_schedule<T: Real>(t: T, horizon: T, alpha_max: T, gamma: T) -> T {
    alpha_max / (T::one() + (-gamma * (t - horizon / T::lit(2.0))).exp())
}

/// Standard normal CDF through `erfc`, which keeps relative accuracy in
/// both tails.
pub fn normal_cdf<T: Real>(x: T, mu: T, sigma: T) -> T {
    let z = (x - mu).to_f64_lossy() / (sigma.to_f64_lossy() * std::f64::consts::SQRT_2);
    T::lit(0.5 * libm::erfc(-z))
}

/// Gaussian probability mass on `[d − δ, d + δ]`.
pub fn window_mass<T: Real>(d: T, mu: T, sigma: T, delta: T) -> T {
    if delta == T::zero() {
        return T::zero();
    }
    let s = sigma.to_f64_lossy() * std::f64::consts::SQRT_2;
    let a = (d - delta - mu).to_f64_lossy() / s;
    let b = (d + delta - mu).to_f64_lossy() / s;
    // subtract on the side where both tails are small
    let m = if a >= 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        0.5 * (libm::erf(b) - libm::erf(a))
    };
    T::lit(m.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct OptimizerState<T: Real> {
    /// Iterations completed.
    pub t: usize,
    pub mu: Option<Vec2<T>>,
    pub sigma_s: T,
    pub refinements: usize,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: &PlannerConfig<T>) -> Self {
        Self { t: 0, mu: None, sigma_s: config.sigma_s_after(0), refinements: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score<T: Real> {
    pub w_geo: T,
    pub w_sem: T,
    pub w: T,
}

/// `w = w_geo^α · w_sem^(1−α)`.
pub fn score_candidate<T: Real>(x: Vec2<T>, g: Vec2<T>, mu: Option<Vec2<T>>, sigma_s: T, alpha: T, config: &PlannerConfig<T>) -> Score<T> {
    let w_geo = window_mass(x.dist(g), config.r_star, config.sigma_g, config.delta);
    let w_sem = match mu {
        Some(m) => window_mass(x.dist(m), T::zero(), sigma_s, config.delta),
        None => T::one(),
    };
    Score { w_geo, w_sem, w: combine(w_geo, w_sem, alpha) }
}

/// `a^α · b^(1−α)` with `0^0 = 1`.
pub fn combine<T: Real>(w_geo: T, w_sem: T, alpha: T) -> T {
    let pw = |base: T, e: T| if e == T::zero() { T::one() } else { base.powf(e) };
    pw(w_geo, alpha) * pw(w_sem, T::one() - alpha)
}

/// `p_i = w_i / Σw`; uniform when every weight is zero. The flag reports
/// the fallback.
pub fn normalize<T: Real>(w: &[T]) -> (Vec<T>, bool) {
    let total: T = w.iter().copied().sum();
    if total > T::zero() && total.is_finite() {
        (w.iter().map(|v| *v / total).collect(), false)
    } else {
        let u = T::one() / T::from_usize_lossy(w.len().max(1));
        (vec![u; w.len()], true)
    }
}

/// Exactly `config.n` points from `N(g, σ_sample² I)` inside the truncation
/// disc and the free set.
pub fn draw_candidates<T: Real, R: rand::Rng + ?Sized>(g: Vec2<T>, free: &FreeSet<T>, config: &PlannerConfig<T>, rng: &mut R) -> Result<Vec<Vec2<T>>, OptimizeError> {
    let budget = ATTEMPTS_PER_SAMPLE * config.n;
    let mut out = Vec::with_capacity(config.n);
    let mut attempts = 0;
    while out.len() < config.n {
        if attempts == budget {
            return Err(OptimizeError::NoFeasibleRegion { accepted: out.len(), wanted: config.n, attempts });
        }
        attempts += 1;
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let x = g + Vec2::new(T::lit(dx), T::lit(dy)) * config.sigma_sample;
        if x.dist(g) <= config.r_max && free.contains(x) {
            out.push(x);
        }
    }
    Ok(out)
}

/// `n_sample` i.i.d. indices drawn with probabilities `p`.
pub fn resample_weighted<T: Real, R: rand::Rng + ?Sized>(p: &[T], n_sample: usize, rng: &mut R) -> Vec<usize> {
    let w: Vec<f64> = p.iter().map(|v| v.to_f64_lossy()).collect();
    match WeightedIndex::new(&w) {
        Ok(dist) => (0..n_sample).map(|_| dist.sample(rng)).collect(),
        Err(_) => (0..n_sample).map(|_| rng.random_range(0..p.len())).collect(),
    }
}

/// Move μ to the mean of the oracle's picks and decay σ_s.
pub fn refine_step<T: Real>(ranked: &[Vec2<T>], state: &OptimizerState<T>, config: &PlannerConfig<T>) -> OptimizerState<T> {
    let refinements = state.refinements + 1;
    OptimizerState { t: state.t + 1, mu: mean(ranked), sigma_s: config.sigma_s_after(refinements), refinements }
}

/// Mean of the three of five points closest to the five-point mean.
/// `ranked` is best first; among equal distances the worse-ranked point
/// is dropped.
pub fn finalize<T: Real>(ranked: &[Vec2<T>]) -> Vec2<T> {
    assert!(ranked.len() >= 3, "finalize needs at least three points");
    let drop = ranked.len() - 3;
    let m = mean(ranked).expect("non-empty");
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|a, b| ranked[*b].dist(m).partial_cmp(&ranked[*a].dist(m)).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(a)));
    let keep: Vec<Vec2<T>> = order[drop..].iter().map(|i| ranked[*i]).collect();
    mean(&keep).expect("three points")
}
