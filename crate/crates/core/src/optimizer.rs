//! Maximization of the quantum CH-E value over the state and analyzer
//! angles, and the detection-efficiency threshold below which no violation
//! is possible.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::che_j;
use crate::quantum::QuantumModel;

/// Number of local searches per optimization.
pub const STARTS: usize = 32;
/// Optimized values at or below this count as "no violation".
pub const DEAD_BAND: f64 = 1e-9;
/// Improvement threshold of the final poll cycle for `converged`.
pub const POLL_TOL: f64 = 1e-10;
/// Optima closer than this are ties.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub eta: f64,
    pub best_j: f64,
    pub r_star: f64,
    /// `[alpha1, alpha2, beta1, beta2]`, reduced to `[0, pi)`.
    pub angles_star: [f64; 4],
    pub evaluations: u64,
    pub converged: bool,
}

impl OptimizationResult {
    /// The model at the reported optimum.
    pub fn model(&self, visibility: f64, p_dark: f64) -> QuantumModel {
        let [alpha1, alpha2, beta1, beta2] = self.angles_star;
        QuantumModel {
            r: self.r_star,
            alpha1,
            alpha2,
            beta1,
            beta2,
            eta_a: self.eta,
            eta_b: self.eta,
            visibility,
            p_dark,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Objective {
    eta: f64,
    fixed_r: Option<f64>,
    visibility: f64,
    p_dark: f64,
}

impl Objective {
    fn dim(&self) -> usize {
        if self.fixed_r.is_some() {
            4
        } else {
            5
        }
    }

    /// Splits a search point into `(r, angles)`.
    fn unpack(&self, x: &[f64]) -> (f64, [f64; 4]) {
        match self.fixed_r {
            Some(r) => (r, [x[0], x[1], x[2], x[3]]),
            None => (x[0].clamp(0.0, 1.0), [x[1], x[2], x[3], x[4]]),
        }
    }

    fn model(&self, r: f64, angles: [f64; 4]) -> QuantumModel {
        QuantumModel {
            r,
            alpha1: angles[0],
            alpha2: angles[1],
            beta1: angles[2],
            beta2: angles[3],
            eta_a: self.eta,
            eta_b: self.eta,
            visibility: self.visibility,
            p_dark: self.p_dark,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (r, angles) = self.unpack(x);
        che_j(&self.model(r, angles).cond_probs())
    }
}

/// Radical inverse of `i` in base `b`.
fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut x = 0.0;
    while i > 0 {
        f /= b as f64;
        x += f * (i % b) as f64;
        i /= b;
    }
    x
}

fn start_point(k: usize, dim: usize) -> Vec<f64> {
    const BASES: [usize; 5] = [2, 3, 5, 7, 11];
    let i = k + 1;
    (0..dim)
        .map(|d| {
            let u = halton(i, BASES[d]);
            if dim == 5 && d == 0 {
                u
            } else {
                PI * u
            }
        })
        .collect()
}

struct LocalResult {
    x: Vec<f64>,
    value: f64,
    evaluations: u64,
    converged: bool,
}

/// Nelder-Mead ascent followed by a compass-search polish.
fn local_search(obj: &Objective, x0: Vec<f64>) -> LocalResult {
    let dim = x0.len();
    let mut evals = 0u64;
    let mut f = |x: &[f64]| {
        evals += 1;
        -obj.value(x)
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let fx0 = f(&x0);
    simplex.push((x0.clone(), fx0));
    for d in 0..dim {
        let mut x = x0.clone();
        x[d] += if obj.fixed_r.is_none() && d == 0 { 0.1 } else { 0.25 };
        let fx = f(&x);
        simplex.push((x, fx));
    }

    for _ in 0..4000 {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal));
        let spread = simplex[dim].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < 1e-15 && size < 1e-9 {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (v, b) in x.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    *fx = f(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal));
    let (mut x, mut fx) = simplex.swap_remove(0);

    // Compass polish.
    let mut step = 1e-3;
    let mut last_cycle_gain = f64::INFINITY;
    let mut budget = 20_000u32;
    while step > 1e-12 && budget > 0 {
        let before = fx;
        for d in 0..dim {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] += sign * step;
                let fy = f(&y);
                budget = budget.saturating_sub(1);
                if fy < fx {
                    x = y;
                    fx = fy;
                    break;
                }
            }
        }
        last_cycle_gain = before - fx;
        if last_cycle_gain == 0.0 {
            step *= 0.5;
        }
    }
    LocalResult {
        x,
        value: -fx,
        evaluations: evals,
        converged: budget > 0 && last_cycle_gain < POLL_TOL,
    }
}

fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    // rem_euclid can return PI itself for tiny negative inputs.
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Order: larger J first; ties broken by smaller r, then angles.
fn better(a: &OptimizationResult, b: &OptimizationResult) -> bool {
    if (a.best_j - b.best_j).abs() > TIE_TOL {
        return a.best_j > b.best_j;
    }
    match a.r_star.partial_cmp(&b.r_star) {
        Some(Ordering::Less) => true,
        Some(Ordering::Greater) => false,
        _ => a
            .angles_star
            .partial_cmp(&b.angles_star)
            .is_some_and(|o| o == Ordering::Less),
    }
}

/// Multi-start maximization of the CH-E value at detection efficiency `eta`
/// (both sides). With `fixed_r` the state is not optimized.
pub fn optimize_j(eta: f64, fixed_r: Option<f64>, visibility: f64, p_dark: f64) -> Result<OptimizationResult> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::validation(format!("eta = {eta} must lie in (0, 1]")));
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::validation(format!(
            "visibility = {visibility} must lie in [0, 1]"
        )));
    }
    if !(0.0..1.0).contains(&p_dark) {
        return Err(Error::validation(format!("pDark = {p_dark} must lie in [0, 1)")));
    }
    if let Some(r) = fixed_r {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::validation(format!("fixed r = {r} must lie in [0, 1]")));
        }
    }
    let obj = Objective {
        eta,
        fixed_r,
        visibility,
        p_dark,
    };
    let dim = obj.dim();
    let results: Vec<OptimizationResult> = (0..STARTS)
        .into_par_iter()
        .map(|k| {
            let local = local_search(&obj, start_point(k, dim));
            let (r, angles) = obj.unpack(&local.x);
            let angles = angles.map(reduce_angle);
            let best_j = che_j(&obj.model(r, angles).cond_probs());
            debug_assert!((best_j - local.value).abs() < 1e-10);
            OptimizationResult {
                eta,
                best_j,
                r_star: r,
                angles_star: angles,
                evaluations: local.evaluations,
                converged: local.converged,
            }
        })
        .collect();
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let mut best = results[0];
    for r in &results[1..] {
        if better(r, &best) {
            best = *r;
        }
    }
    best.evaluations = evaluations;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalEfficiency {
    /// Midpoint of the final bracket.
    pub eta: f64,
    /// Largest efficiency found without violation.
    pub lo: f64,
    /// Smallest efficiency found with violation.
    pub hi: f64,
}

/// Bisection on `eta` for the onset of violation of the optimized CH-E
/// value, down to a bracket no wider than `tol`.
pub fn critical_efficiency(fixed_r: Option<f64>, visibility: f64, p_dark: f64, tol: f64) -> Result<CriticalEfficiency> {
    if !(tol > 0.0) {
        return Err(Error::validation(format!("tolerance {tol} must be positive")));
    }
    let violates = |eta: f64| -> Result<bool> { Ok(optimize_j(eta, fixed_r, visibility, p_dark)?.best_j > DEAD_BAND) };
    // Without detections the statistics are local, so eta = 0 never violates.
    let (mut lo, mut hi) = (0.0, 1.0);
    if !violates(hi)? {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if violates(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalEfficiency {
        eta: 0.5 * (lo + hi),
        lo,
        hi,
    })
}
