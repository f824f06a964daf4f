//! Bernoulli diffusion kernels on binary vectors.
//!
//! Three per-bit corruption processes share one noise schedule:
//!
//! * bit-flip: each bit flips with probability `beta[t]`; prior is Bern(1/2).
//! * bit-one: each bit is set to one with probability `beta[t]`; prior is all ones.
//! * bit-zero: each bit is set to zero with probability `beta[t]`; prior is all zeros.
//!
//! Forward marginals and one-step posteriors are closed form. The products
//! over the schedule are cached at construction, both directly and in log
//! space, so every query is a constant-time lookup.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::EdgeVector;

/// Which of the three Bernoulli kernels drives the diffusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    BitFlip,
    BitOne,
    BitZero,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::BitFlip, KernelKind::BitOne, KernelKind::BitZero];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::BitFlip => "bit-flip",
            KernelKind::BitOne => "bit-one",
            KernelKind::BitZero => "bit-zero",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bit-flip" => Ok(KernelKind::BitFlip),
            "bit-one" => Ok(KernelKind::BitOne),
            "bit-zero" => Ok(KernelKind::BitZero),
            other => Err(invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// A probability produced by kernel algebra.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct BernoulliParam(f64);

impl BernoulliParam {
    const SLACK: f64 = 1e-9;

    /// Wraps `p`, clamping round-off into `[0, 1]`. Values further than
    /// `1e-9` outside the unit interval are rejected.
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p < -Self::SLACK || p > 1.0 + Self::SLACK {
            return Err(Error::NumericFailure(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self(p.clamp(0.0, 1.0)))
    }

    pub fn p(self) -> f64 {
        self.0
    }

    /// Draws a bit. `p == 0` never yields one and `p == 1` always does.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> bool {
        rng.gen::<f64>() < self.0
    }
}

/// Provenance of a schedule, carried through serialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `beta[t] = min(logistic(t/100 - 10), 1/2 - 1e-6)`.
    Logistic,
    Custom,
}

/// Fixed per-step corruption probabilities `beta[0..=T]` with `beta[0] = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ScheduleRecord", try_from = "ScheduleRecord")]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    beta: Vec<f64>,
    cum_half: Vec<f64>,
    cum_keep: Vec<f64>,
    // Prefix sums of ln(1 - 2 beta) and ln(1 - beta). The direct products
    // underflow for long schedules; these do not.
    log_flip: Vec<f64>,
    log_keep: Vec<f64>,
}

/// On-disk form of a schedule. Cumulative products are rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub kind: ScheduleKind,
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta: Vec<f64>,
}

impl From<NoiseSchedule> for ScheduleRecord {
    fn from(s: NoiseSchedule) -> Self {
        ScheduleRecord { kind: s.kind, steps: s.steps(), beta: s.beta[1..].to_vec() }
    }
}

impl TryFrom<ScheduleRecord> for NoiseSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRecord) -> Result<Self> {
        if r.beta.len() != r.steps {
            return Err(invalid(format!(
                "schedule declares T = {} but carries {} betas",
                r.steps,
                r.beta.len()
            )));
        }
        NoiseSchedule::build(r.kind, r.beta)
    }
}

/// The standard logistic function.
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `beta[t] = min(logistic(t/100 - 10), 1/2 - 1e-6)` for `t` in `1..=steps`.
pub fn default_schedule(steps: usize) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(invalid("schedule needs at least one step"));
    }
    let cap = 0.5 - 1e-6;
    let betas = (1..=steps).map(|t| logistic(t as f64 / 100.0 - 10.0).min(cap)).collect();
    NoiseSchedule::build(ScheduleKind::Logistic, betas)
}

impl NoiseSchedule {
    /// Builds a custom schedule from `beta[1..=T]`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        Self::build(ScheduleKind::Custom, betas)
    }

    fn build(kind: ScheduleKind, betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(invalid("schedule needs at least one step"));
        }
        for (i, &b) in betas.iter().enumerate() {
            if !(0.0..0.5 + 1e-12).contains(&b) {
                return Err(invalid(format!("beta[{}] = {b} outside [0, 1/2]", i + 1)));
            }
        }
        let steps = betas.len();
        let mut beta = Vec::with_capacity(steps + 1);
        beta.push(0.0);
        beta.extend(betas);

        let mut cum_half = vec![1.0; steps + 1];
        let mut cum_keep = vec![1.0; steps + 1];
        let mut log_flip = vec![0.0; steps + 1];
        let mut log_keep = vec![0.0; steps + 1];
        for t in 1..=steps {
            let b = beta[t];
            cum_half[t] = cum_half[t - 1] * (0.5 - b);
            cum_keep[t] = cum_keep[t - 1] * (1.0 - b);
            log_flip[t] = log_flip[t - 1] + (1.0 - 2.0 * b).max(0.0).ln();
            log_keep[t] = log_keep[t - 1] + (-b).ln_1p();
        }
        Ok(Self { kind, beta, cum_half, cum_keep, log_flip, log_keep })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    /// `prod_{i<=t} (1/2 - beta_i)`. Underflows to zero for long schedules;
    /// the kernel algebra uses the log-space form instead.
    pub fn cum_half(&self, t: usize) -> f64 {
        self.cum_half[t]
    }

    /// `prod_{i<=t} (1 - beta_i)`.
    pub fn cum_keep(&self, t: usize) -> f64 {
        self.cum_keep[t]
    }

    /// `2^(t-1) prod_{i<=t} (1/2 - beta_i)`, i.e. half the probability gap
    /// between keeping and flipping a bit over `t` bit-flip steps.
    pub fn flip_gap(&self, t: usize) -> f64 {
        0.5 * self.log_flip[t].exp()
    }

    /// `1 - prod_{i<=t} (1 - beta_i)`, computed without cancellation.
    fn hit_prob(&self, t: usize) -> f64 {
        -self.log_keep[t].exp_m1()
    }

    /// `1/2 - flip_gap(t)`, the probability that a bit ends up flipped.
    fn flipped_prob(&self, t: usize) -> f64 {
        -0.5 * self.log_flip[t].exp_m1()
    }

    fn keep_prob(&self, t: usize) -> f64 {
        self.log_keep[t].exp()
    }

    fn check_step(&self, t: usize, allow_zero: bool) -> Result<()> {
        if t > self.steps() || (!allow_zero && t == 0) {
            let lo = if allow_zero { 0 } else { 1 };
            return Err(invalid(format!("step {t} outside [{lo}, {}]", self.steps())));
        }
        Ok(())
    }
}

#[inline]
fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// `q(x_t = 1 | x_0)`.
pub fn forward_prob(kind: KernelKind, sched: &NoiseSchedule, x0: bool, t: usize) -> Result<BernoulliParam> {
    sched.check_step(t, true)?;
    if t == 0 {
        return BernoulliParam::new(bit(x0));
    }
    let x0 = bit(x0);
    let p = match kind {
        KernelKind::BitFlip => {
            let beta_bar = sched.flipped_prob(t);
            (1.0 - x0) * beta_bar + x0 * (1.0 - beta_bar)
        }
        KernelKind::BitOne => x0 + (1.0 - x0) * sched.hit_prob(t),
        KernelKind::BitZero => x0 * sched.keep_prob(t),
    };
    BernoulliParam::new(p)
}

/// `q(x_t = x | x_0)` as a plain probability mass.
pub fn forward_mass(kind: KernelKind, sched: &NoiseSchedule, x0: bool, x: bool, t: usize) -> Result<f64> {
    let p = forward_prob(kind, sched, x0, t)?.p();
    Ok(if x { p } else { 1.0 - p })
}

/// `q(x_t = 1 | x_{t-1} = x_prev)`.
pub fn step_prob(kind: KernelKind, sched: &NoiseSchedule, x_prev: bool, t: usize) -> Result<BernoulliParam> {
    sched.check_step(t, false)?;
    let b = sched.beta(t);
    let x = bit(x_prev);
    let p = match kind {
        KernelKind::BitFlip => x * (1.0 - b) + (1.0 - x) * b,
        KernelKind::BitOne => x + (1.0 - x) * b,
        KernelKind::BitZero => x * (1.0 - b),
    };
    BernoulliParam::new(p)
}

/// `q(x_{t-1} = 1 | x_t, x_0)`.
///
/// Fails with [`Error::InconsistentState`] when `x_t` cannot be reached from
/// `x_0` under `kind` (for example bit-one with `x_0 = 1`, `x_t = 0`).
pub fn posterior_prob(
    kind: KernelKind,
    sched: &NoiseSchedule,
    x0: bool,
    xt: bool,
    t: usize,
) -> Result<BernoulliParam> {
    sched.check_step(t, false)?;
    let b = sched.beta(t);
    let (x0f, xtf) = (bit(x0), bit(xt));
    // q(x_t | x_{t-1} = 1) for the flip and zero kernels.
    let lik_one = xtf + b - 2.0 * xtf * b;
    let (num, den) = match kind {
        KernelKind::BitFlip => {
            // 1/2 + (2 x_0 - 1) gap(t-1) and 1/2 + (1 - 2 xor) gap(t); the
            // minus branches go through expm1 to avoid cancellation.
            let prev_one = if x0 { 0.5 + sched.flip_gap(t - 1) } else { sched.flipped_prob(t - 1) };
            let den = if x0 == xt { 0.5 + sched.flip_gap(t) } else { sched.flipped_prob(t) };
            (lik_one * prev_one, den)
        }
        KernelKind::BitOne => {
            let num = xtf * (x0f + (1.0 - x0f) * sched.hit_prob(t - 1));
            let den = x0f * xtf
                + (1.0 - x0f) * xtf * sched.hit_prob(t)
                + (1.0 - x0f) * (1.0 - xtf) * sched.keep_prob(t);
            (num, den)
        }
        KernelKind::BitZero => {
            let num = lik_one * x0f * sched.keep_prob(t - 1);
            let den = (1.0 - x0f) * (1.0 - xtf)
                + x0f * (1.0 - xtf) * sched.hit_prob(t)
                + x0f * xtf * sched.keep_prob(t);
            (num, den)
        }
    };
    if den == 0.0 {
        return Err(Error::InconsistentState(format!(
            "{kind}: x_t = {} is unreachable from x_0 = {} at t = {t}",
            u8::from(xt),
            u8::from(x0)
        )));
    }
    BernoulliParam::new(num / den)
}

/// Draws `x_t ~ q(x_t | x_0)` independently per bit.
pub fn sample_forward<R: Rng + ?Sized>(
    kind: KernelKind,
    sched: &NoiseSchedule,
    x0: &EdgeVector,
    t: usize,
    rng: &mut R,
) -> Result<EdgeVector> {
    if t == 0 {
        sched.check_step(t, true)?;
        return Ok(x0.clone());
    }
    let p_zero = forward_prob(kind, sched, false, t)?;
    let p_one = forward_prob(kind, sched, true, t)?;
    Ok(x0.iter().map(|b| if b { p_one } else { p_zero }.sample(rng)).collect())
}

/// Draws `x_T` from the kernel's prior.
pub fn sample_prior<R: Rng + ?Sized>(kind: KernelKind, n_edges: usize, rng: &mut R) -> EdgeVector {
    match kind {
        KernelKind::BitFlip => (0..n_edges).map(|_| rng.gen::<bool>()).collect(),
        KernelKind::BitOne => EdgeVector::ones(n_edges),
        KernelKind::BitZero => EdgeVector::zeros(n_edges),
    }
}

/// The prior probability `pi(x_T = 1)`.
pub fn prior_prob(kind: KernelKind) -> f64 {
    match kind {
        KernelKind::BitFlip => 0.5,
        KernelKind::BitOne => 1.0,
        KernelKind::BitZero => 0.0,
    }
}
