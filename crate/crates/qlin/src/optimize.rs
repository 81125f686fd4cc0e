//! Derivative-free minimization: a deterministic Nelder-Mead simplex with
//! bound handling through coordinate transforms, and a seeded multi-start
//! driver whose result is reproducible bit for bit regardless of evaluation
//! concurrency.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QlinError, Result};

/// Objective value returned for unstable closed loops; the slope on the
/// maximum eigenvalue real part makes the penalty landscape decrease toward
/// stability.
pub const PENALTY_BASE: f64 = 1e6;

/// Value returned when a parameter point cannot even be assembled into a
/// model (outside every stability question).
pub const PENALTY_INVALID: f64 = 2e6;

/// How one optimizer coordinate maps to its physical parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Coordinate is the parameter, clamped to [lo, hi].
    Linear,
    /// Coordinate is log10 of a positive rate in [lo, hi].
    Log10,
    /// Coordinate is an angle; wrapped into [lo, hi) rather than clamped.
    Periodic,
    /// Coordinate is asinh of the parameter: sign-preserving log-like scale
    /// for gains spanning many decades.
    SymLog,
}

#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
}

impl ParamSpec {
    pub fn linear(name: &str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name: name.into(),
            lo,
            hi,
            scale: Scale::Linear,
        }
    }
    pub fn log10(name: &str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name: name.into(),
            lo,
            hi,
            scale: Scale::Log10,
        }
    }
    pub fn periodic(name: &str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name: name.into(),
            lo,
            hi,
            scale: Scale::Periodic,
        }
    }
    pub fn symlog(name: &str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name: name.into(),
            lo,
            hi,
            scale: Scale::SymLog,
        }
    }

    fn t_lo(&self) -> f64 {
        match self.scale {
            Scale::Linear | Scale::Periodic => self.lo,
            Scale::Log10 => self.lo.log10(),
            Scale::SymLog => self.lo.asinh(),
        }
    }

    fn t_hi(&self) -> f64 {
        match self.scale {
            Scale::Linear | Scale::Periodic => self.hi,
            Scale::Log10 => self.hi.log10(),
            Scale::SymLog => self.hi.asinh(),
        }
    }

    fn to_physical(&self, t: f64) -> f64 {
        let (lo, hi) = (self.t_lo(), self.t_hi());
        let tc = match self.scale {
            Scale::Periodic => {
                let w = hi - lo;
                let mut v = (t - lo) % w;
                if v < 0.0 {
                    v += w;
                }
                lo + v
            }
            _ => t.clamp(lo, hi),
        };
        match self.scale {
            Scale::Linear | Scale::Periodic => tc,
            Scale::Log10 => 10f64.powf(tc),
            Scale::SymLog => tc.sinh(),
        }
    }

    fn from_physical(&self, x: f64) -> f64 {
        match self.scale {
            Scale::Linear | Scale::Periodic => x,
            Scale::Log10 => x.log10(),
            Scale::SymLog => x.asinh(),
        }
    }
}

/// Ordered list of optimizer coordinates for one controller family.
#[derive(Debug, Clone, Default)]
pub struct ParamSpace {
    pub specs: Vec<ParamSpec>,
}

impl ParamSpace {
    pub fn dim(&self) -> usize {
        self.specs.len()
    }

    pub fn to_physical(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(&self.specs)
            .map(|(&ti, s)| s.to_physical(ti))
            .collect()
    }

    pub fn from_physical(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.specs)
            .map(|(&xi, s)| s.from_physical(xi))
            .collect()
    }

    pub fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.specs
            .iter()
            .map(|s| {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                s.t_lo() + u * (s.t_hi() - s.t_lo())
            })
            .collect()
    }

    fn initial_step(&self) -> Vec<f64> {
        self.specs
            .iter()
            .map(|s| 0.05 * (s.t_hi() - s.t_lo()).abs().max(1e-3))
            .collect()
    }
}

/// Options for the multi-start optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Absolute simplex objective-spread tolerance.
    pub tolerance: f64,
    /// Slope applied to the most unstable eigenvalue in the penalty branch.
    pub penalty_weight: f64,
    pub seed: u64,
    /// Box for rate-type parameters (decays, pump amplitudes), log-scaled.
    pub rate_lo: f64,
    pub rate_hi: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            restarts: 32,
            max_iters: 2000,
            tolerance: 1e-10,
            penalty_weight: 10.0,
            seed: 1,
            rate_lo: 1e-4,
            rate_hi: 1e3,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(QlinError::InvalidParameter(
                "optimizer needs at least one restart".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(QlinError::InvalidParameter(
                "optimizer tolerance must be positive".into(),
            ));
        }
        if !(self.rate_lo > 0.0 && self.rate_hi > self.rate_lo) {
            return Err(QlinError::InvalidParameter(
                "rate bounds must satisfy 0 < lo < hi".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Standard reflection / expansion / contraction / shrink simplex iteration.
/// Deterministic given the start point; terminates when the simplex objective
/// spread falls below `tolerance` or after `max_iters` iterations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    tolerance: f64,
    max_iters: usize,
) -> Result<NmOutcome> {
    let dim = x0.len();
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(QlinError::OptimizationFailure(
            "objective is not finite at the start point".into(),
        ));
    }
    if dim == 0 {
        return Ok(NmOutcome {
            x: vec![],
            value: f0,
            iterations: 0,
            converged: true,
        });
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    values.push(f0);
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += step[i];
        values.push(f(&p));
        simplex.push(p);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        if (values[worst] - values[best]).abs() < tolerance {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &i in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[i][d];
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(&ai, &bi)| ai + t * (bi - ai)).collect()
        };

        // reflect the worst point through the centroid
        let reflected = lerp(&centroid, &simplex[worst], -alpha);
        let f_r = f(&reflected);
        if f_r < values[second_worst] && f_r >= values[best] {
            simplex[worst] = reflected;
            values[worst] = f_r;
            continue;
        }
        if f_r < values[best] {
            let expanded = lerp(&centroid, &reflected, gamma);
            let f_e = f(&expanded);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
            continue;
        }
        let contracted = lerp(&centroid, &simplex[worst], rho);
        let f_c = f(&contracted);
        if f_c < values[worst] {
            simplex[worst] = contracted;
            values[worst] = f_c;
            continue;
        }
        let best_point = simplex[best].clone();
        for i in 0..=dim {
            if i == best {
                continue;
            }
            simplex[i] = lerp(&best_point, &simplex[i], sigma);
            values[i] = f(&simplex[i]);
        }
    }

    let (best, &value) = values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        .expect("simplex is nonempty");
    Ok(NmOutcome {
        x: simplex[best].clone(),
        value,
        iterations,
        converged,
    })
}

/// Record of one start of the multi-start optimizer.
#[derive(Debug, Clone)]
pub struct StartTrace {
    /// Start point in physical parameter units.
    pub start: Vec<f64>,
    pub final_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Multi-start result: best parameters in physical units and per-start traces.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub best_start: usize,
    pub traces: Vec<StartTrace>,
    /// True iff the best objective came out of the non-penalty branch.
    pub stable: bool,
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Run seeded Nelder-Mead instances and reduce by minimum objective, ties
/// broken by lowest start index. Start `i` depends only on (seed, i) and the
/// deterministic start list, so a longer run extends a shorter one (prefix
/// property) and the reduction is an ordered fold over the start index,
/// independent of evaluation concurrency.
pub fn multi_start<F>(
    space: &ParamSpace,
    objective: F,
    opts: &OptimizeOptions,
    deterministic_starts: &[Vec<f64>],
) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    opts.validate()?;
    let dim = space.dim();
    let eval_t = |t: &[f64]| -> f64 { objective(&space.to_physical(t)) };

    if dim == 0 {
        let value = objective(&[]);
        return Ok(OptimizationResult {
            best_params: vec![],
            best_value: value,
            best_start: 0,
            traces: vec![StartTrace {
                start: vec![],
                final_value: value,
                iterations: 0,
                converged: true,
            }],
            stable: value < PENALTY_BASE,
        });
    }

    let mut starts_t: Vec<Vec<f64>> = Vec::with_capacity(opts.restarts);
    for s in deterministic_starts.iter().take(opts.restarts) {
        starts_t.push(space.from_physical(s));
    }
    for i in starts_t.len()..opts.restarts {
        let mut rng = start_rng(opts.seed, i);
        starts_t.push(space.random_start(&mut rng));
    }

    let step = space.initial_step();
    let outcomes: Vec<Result<NmOutcome>> = starts_t
        .par_iter()
        .map(|t0| nelder_mead(&eval_t, t0, &step, opts.tolerance, opts.max_iters))
        .collect();

    let mut traces = Vec::with_capacity(outcomes.len());
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        traces.push(StartTrace {
            start: space.to_physical(&starts_t[i]),
            final_value: outcome.value,
            iterations: outcome.iterations,
            converged: outcome.converged,
        });
        if outcome.converged && outcome.value.is_finite() {
            let better = match &best {
                None => true,
                Some((_, bv, _)) => outcome.value < *bv,
            };
            if better {
                best = Some((i, outcome.value, outcome.x.clone()));
            }
        }
    }

    match best {
        Some((idx, value, x)) => Ok(OptimizationResult {
            best_params: space.to_physical(&x),
            best_value: value,
            best_start: idx,
            traces,
            stable: value < PENALTY_BASE,
        }),
        None => Err(QlinError::OptimizationFailure(format!(
            "no start converged within {} iterations ({} starts)",
            opts.max_iters,
            traces.len()
        ))),
    }
}
