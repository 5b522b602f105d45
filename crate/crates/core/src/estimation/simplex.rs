//! Nelder-Mead simplex search with box constraints handled by projecting
//! every proposed vertex onto the feasible box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Bounds {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub max_iterations: usize,
    /// Stop once the spread of objective values across the simplex falls below this
    /// and either every vertex lies within `x_tolerance` of the best one in each
    /// coordinate or the spread has stayed below it for 2(n+1) iterations.
    pub tolerance: f64,
    pub x_tolerance: f64,
    pub initial_step: Vec<f64>,
    pub bounds: Bounds,
}

impl SimplexConfig {
    pub fn new(initial_step: Vec<f64>, bounds: Bounds) -> Self {
        SimplexConfig {
            max_iterations: 1000,
            tolerance: 1e-10,
            x_tolerance: 1e-8,
            initial_step,
            bounds,
        }
    }

    fn validate(&self, init: &[f64]) -> Result<()> {
        let n = init.len();
        if n == 0 {
            return Err(Error::config("optimizer needs at least one parameter"));
        }
        if self.initial_step.len() != n || self.bounds.lower.len() != n || self.bounds.upper.len() != n {
            return Err(Error::config("optimizer step and bounds must match the parameter count"));
        }
        if self.initial_step.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::config("initial simplex steps must be positive"));
        }
        if !self.bounds.contains(init) {
            return Err(Error::config(format!("initial point {init:?} lies outside the bounds")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective spread across the final simplex.
    pub spread: f64,
    /// Per-coordinate extent of the final simplex.
    pub coordinate_spread: Vec<f64>,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

struct Search<'a, F> {
    f: F,
    bounds: &'a Bounds,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Search<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        debug_assert!(self.bounds.contains(x));
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn point(&self, centroid: &[f64], toward: &[f64], coef: f64) -> Vec<f64> {
        let mut x: Vec<f64> = centroid.iter().zip(toward).map(|(c, t)| c + coef * (t - c)).collect();
        self.bounds.project(&mut x);
        x
    }
}

/// Minimizes `f` starting from `init`. Deterministic for a given start and config.
pub fn nelder_mead_minimize<F>(f: F, init: &[f64], cfg: &SimplexConfig) -> Result<SimplexOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    cfg.validate(init)?;
    let n = init.len();
    let mut search = Search {
        f,
        bounds: &cfg.bounds,
        evaluations: 0,
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(init.to_vec());
    for i in 0..n {
        let mut v = init.to_vec();
        v[i] += cfg.initial_step[i];
        cfg.bounds.project(&mut v);
        if v[i] == init[i] {
            v[i] = init[i] - cfg.initial_step[i];
            cfg.bounds.project(&mut v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| search.eval(v)).collect();

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut flat_iterations = 0;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        // A flat simplex that stays flat has converged in objective even if a
        // coordinate the objective ignores keeps a large extent.
        flat_iterations = if spread < cfg.tolerance { flat_iterations + 1 } else { 0 };
        if spread < cfg.tolerance && (x_spread < cfg.x_tolerance || flat_iterations > 2 * (n + 1)) {
            converged = true;
            break;
        }
        if values[0].is_infinite() && values[0] == values[n] {
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = search.point(&centroid, &worst, -REFLECT);
        let f_r = search.eval(&reflected);

        if f_r < values[0] {
            let expanded = search.point(&centroid, &reflected, EXPAND);
            let f_e = search.eval(&expanded);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
        } else {
            let (candidate, accept_below) = if f_r < values[n] {
                (search.point(&centroid, &reflected, CONTRACT), f_r)
            } else {
                (search.point(&centroid, &worst, CONTRACT), values[n])
            };
            let f_c = search.eval(&candidate);
            if f_c <= accept_below {
                simplex[n] = candidate;
                values[n] = f_c;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    let shrunk = search.point(&best, &simplex[i], SHRINK);
                    values[i] = search.eval(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
        history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let coordinate_spread = (0..n)
        .map(|j| {
            let (lo, hi) = simplex
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[j]), hi.max(v[j])));
            hi - lo
        })
        .collect();
    Ok(SimplexOutcome {
        point: simplex[0].clone(),
        value: values[0],
        iterations,
        evaluations: search.evaluations,
        converged,
        spread: values[n] - values[0],
        coordinate_spread,
        history,
    })
}

/// Maximizes `f`; the returned `value` and `history` are in objective units.
pub fn nelder_mead_maximize<F>(mut f: F, init: &[f64], cfg: &SimplexConfig) -> Result<SimplexOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut out = nelder_mead_minimize(|x| -f(x), init, cfg)?;
    out.value = -out.value;
    for h in &mut out.history {
        *h = -*h;
    }
    Ok(out)
}
