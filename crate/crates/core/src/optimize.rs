//! CH maximization over analyzer angles and the critical detection efficiency.
//!
//! The CH landscape is periodic in each angle with period `pi` and invariant
//! under reflecting all four angles. For ideal polarizers its maximum is also
//! degenerate along a one-parameter ridge (a common rotation when `f = 1`), so
//! reported maximizers are gauge-fixed to `theta2' = 0` when the ridge reaches
//! it, then reduced to the fundamental domain by [`canonicalize`].

use std::cmp::Ordering;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ch::{ch_value, AngleQuad, ChMode, EfficiencyModel, PolarizerPair};
use crate::error::{ModelError, Result};
use crate::state::EntangledState;

/// CH values at or below this are treated as "no violation".
pub const VIOLATION_TOL: f64 = 1e-12;

const LATTICE_SIDE: usize = 5;
const ANGLE_TOL: f64 = 1e-9;
const VALUE_TOL: f64 = 1e-15;
const GAUGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    /// Total number of local searches; half come from the best points of a
    /// 5^4 lattice, the rest are uniform random.
    pub starts: usize,
    pub seed: u64,
    /// Extra starting points polished in addition to the regular starts.
    pub warm_starts: Vec<AngleQuad>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            starts: 64,
            seed: 0x5eed,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChOptimum {
    pub quad: AngleQuad,
    pub value: f64,
}

impl ChOptimum {
    pub fn violates(&self) -> bool {
        self.value > VIOLATION_TOL
    }
}

/// Reduces a quad to `[0, pi)` and picks between it and its reflection the one
/// with `(theta2 - theta2') mod pi` in `[0, pi/2)`.
pub fn canonicalize(quad: &AngleQuad) -> AngleQuad {
    let direct = reduce(quad.to_array());
    let reflected = reduce(quad.to_array().map(|a| -a));
    let in_domain = |q: &[f64; 4]| wrap(q[1] - q[3]) < PI / 2.0 - ANGLE_TOL;
    let pick = match (in_domain(&direct), in_domain(&reflected)) {
        (true, false) => direct,
        (false, true) => reflected,
        _ => {
            if lex_cmp(&direct, &reflected) != Ordering::Greater {
                direct
            } else {
                reflected
            }
        }
    };
    AngleQuad::from_array(pick)
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI - ANGLE_TOL || r < ANGLE_TOL {
        0.0
    } else {
        r
    }
}

fn reduce(a: [f64; 4]) -> [f64; 4] {
    a.map(wrap)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Larger value wins; exact ties go to the lexicographically smaller point.
fn better(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> bool {
    match a.1.total_cmp(&b.1) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => lex_cmp(&a.0, &b.0) == Ordering::Less,
    }
}

/// Downhill simplex maximization of `f` from `x0`, restarted from the best
/// vertex until a restart no longer improves the value.
fn nelder_mead_max<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64) -> (Vec<f64>, f64) {
    let mut best = x0.to_vec();
    let mut best_val = f(&best);
    let mut step = step;
    for _ in 0..8 {
        let (x, v) = simplex_run(f, &best, step);
        let improved = v > best_val + VALUE_TOL;
        if v >= best_val {
            best = x;
            best_val = v;
        }
        if !improved {
            break;
        }
        step = (step * 0.5).max(1e-3);
    }
    (best, best_val)
}

fn simplex_run<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    // minimize the negated objective
    let g = |x: &[f64]| -f(x);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), g(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = g(&x);
        simplex.push((x, v));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..20_000 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if size < ANGLE_TOL && spread < VALUE_TOL {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(alpha);
        let fr = g(&xr);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = g(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(rho);
                let fc = g(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = g(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&x_best) {
                        *xi = bi + sigma * (*xi - bi);
                    }
                    *v = g(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, -v)
}

/// Multistart search over `dim` angles in `[0, pi)`; `embed` maps the search
/// coordinates to a full quad.
fn multistart<E>(
    objective: &(dyn Fn(&AngleQuad) -> f64 + Sync),
    dim: usize,
    embed: E,
    opts: &OptimizerOptions,
    extra: &[Vec<f64>],
) -> (Vec<f64>, f64)
where
    E: Fn(&[f64]) -> AngleQuad + Sync,
{
    let eval = |x: &[f64]| objective(&embed(x));
    let cell = PI / LATTICE_SIDE as f64;
    let mut lattice: Vec<(Vec<f64>, f64)> = (0..LATTICE_SIDE.pow(dim as u32))
        .map(|mut i| {
            let mut x = Vec::with_capacity(dim);
            for _ in 0..dim {
                x.push((i % LATTICE_SIDE) as f64 * cell);
                i /= LATTICE_SIDE;
            }
            let v = eval(&x);
            (x, v)
        })
        .collect();
    lattice.sort_by(|a, b| if better(a, b) { Ordering::Less } else if better(b, a) { Ordering::Greater } else { Ordering::Equal });
    let from_lattice = (opts.starts / 2).min(lattice.len());
    let mut starts: Vec<Vec<f64>> = lattice[..from_lattice]
        .iter()
        .map(|(x, _)| x.clone())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.starts.max(from_lattice) {
        starts.push((0..dim).map(|_| rng.random_range(0.0..PI)).collect());
    }
    starts.extend(extra.iter().cloned());

    let polished: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|x0| nelder_mead_max(&eval, x0, 0.3 * cell))
        .collect();
    let mut best = lattice[0].clone();
    for cand in polished.into_iter() {
        if better(&cand, &best) {
            best = cand;
        }
    }
    best
}

fn validate_inputs(pols: &PolarizerPair, eff: &EfficiencyModel) -> Result<()> {
    pols.validate()?;
    eff.validate()
}

/// Free 4-D maximum without gauge fixing or canonicalization.
fn raw_maximum(
    state: &EntangledState,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
    mode: ChMode,
    opts: &OptimizerOptions,
) -> (AngleQuad, f64) {
    let objective = |q: &AngleQuad| ch_value(mode, state, q, pols, eff).unwrap_or(f64::NEG_INFINITY);
    let extra: Vec<Vec<f64>> = opts.warm_starts.iter().map(|q| q.to_array().to_vec()).collect();
    let (x, v) = multistart(&objective, 4, |x| AngleQuad::new(x[0], x[1], x[2], x[3]), opts, &extra);
    (AngleQuad::new(x[0], x[1], x[2], x[3]), v)
}

/// Global CH maximizer, reported in canonical form.
pub fn maximize_ch(
    state: &EntangledState,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
    mode: ChMode,
    opts: &OptimizerOptions,
) -> Result<ChOptimum> {
    validate_inputs(pols, eff)?;
    let objective = |q: &AngleQuad| ch_value(mode, state, q, pols, eff).unwrap_or(f64::NEG_INFINITY);
    let (free, free_val) = raw_maximum(state, pols, eff, mode, opts);

    let gauge_opts = OptimizerOptions {
        seed: opts.seed.wrapping_add(1),
        warm_starts: Vec::new(),
        ..opts.clone()
    };
    let (g, g_val) = multistart(
        &objective,
        3,
        |x| AngleQuad::new(x[0], x[1], x[2], 0.0),
        &gauge_opts,
        &[],
    );
    let quad = if g_val >= free_val - GAUGE_TOL {
        AngleQuad::new(g[0], g[1], g[2], 0.0)
    } else {
        free
    };
    let quad = canonicalize(&quad);
    let value = ch_value(mode, state, &quad, pols, eff)?;
    Ok(ChOptimum { quad, value })
}

/// Smallest common detector efficiency at which the true-singles CH can be
/// made positive, found by bisection to within `resolution`.
pub fn critical_efficiency(
    state: &EntangledState,
    pols: &PolarizerPair,
    resolution: f64,
    opts: &OptimizerOptions,
) -> Result<f64> {
    if !(resolution > 0.0) {
        return Err(ModelError::InvalidArgument("resolution must be positive"));
    }
    pols.validate()?;
    let mut opts = opts.clone();
    let probe = |eta: f64, opts: &mut OptimizerOptions| -> bool {
        let eff = EfficiencyModel::symmetric(eta, 1.0);
        let (quad, value) = raw_maximum(state, pols, &eff, ChMode::TrueSingles, opts);
        if value > VIOLATION_TOL {
            // a violating quad keeps violating at higher efficiency
            opts.warm_starts = vec![quad];
            true
        } else {
            false
        }
    };
    if !probe(1.0, &mut opts) {
        return Err(ModelError::NoViolationAtUnitEfficiency);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut opts) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// CH sampled on a `density x density` grid over `(theta1, theta2)` in
/// `[0, pi)` with `theta1'` and `theta2'` held fixed. Row-major in `theta1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChLandscape {
    pub density: usize,
    pub theta1p: f64,
    pub theta2p: f64,
    pub values: Vec<f64>,
}

impl ChLandscape {
    pub fn angle(&self, index: usize) -> f64 {
        PI * index as f64 / self.density as f64
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.density + i2]
    }

    /// Grid indices and value of the largest sample.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        (k / self.density, k % self.density, v)
    }
}

pub fn ch_landscape(
    state: &EntangledState,
    pols: &PolarizerPair,
    eff: &EfficiencyModel,
    mode: ChMode,
    theta1p: f64,
    theta2p: f64,
    density: usize,
) -> Result<ChLandscape> {
    if density < 2 {
        return Err(ModelError::InvalidArgument("grid density must be at least 2"));
    }
    let mut values = Vec::with_capacity(density * density);
    for i in 0..density {
        for j in 0..density {
            let q = AngleQuad::new(
                PI * i as f64 / density as f64,
                PI * j as f64 / density as f64,
                theta1p,
                theta2p,
            );
            values.push(ch_value(mode, state, &q, pols, eff)?);
        }
    }
    Ok(ChLandscape {
        density,
        theta1p,
        theta2p,
        values,
    })
}
