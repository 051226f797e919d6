//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Fully deterministic: no randomness, and all reductions run in a fixed
//! order.

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Stop once the Euclidean gradient norm is at or below this.
    pub grad_tol: f64,
    pub history: usize,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 1000,
            grad_tol: 1e-6,
            history: 10,
            armijo: 1e-4,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// No step along the search direction decreased the objective; the
    /// iterate is at the limit of floating-point resolution.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns the objective and writes the gradient into
/// its second argument.
pub fn minimize<F>(x0: Vec<f64>, mut f: F, opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut trace = vec![value];

    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.history);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.history);
    let mut rho_hist: Vec<f64> = Vec::with_capacity(opts.history);
    let mut alpha = vec![0.0; opts.history];

    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    let termination = loop {
        let grad_norm = norm(&g);
        if grad_norm <= opts.grad_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }

        // Two-loop recursion: dir = -H g.
        dir.copy_from_slice(&g);
        for i in (0..s_hist.len()).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &dir);
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= alpha[i] * y;
            }
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for i in 0..s_hist.len() {
            let beta = rho_hist[i] * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += s * (alpha[i] - beta);
            }
        }
        dir.iter_mut().for_each(|d| *d = -*d);

        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Curvature information went stale; restart from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -grad_norm * grad_norm;
        }

        let mut step = if s_hist.is_empty() {
            (1.0 / grad_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..opts.max_line_search {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&dir) {
                *xn = xi + step * di;
            }
            let v = f(&x_new, &mut g_new);
            if v.is_finite() && v <= value + opts.armijo * step * slope {
                accepted = Some(v);
                break;
            }
            // Quadratic interpolation of the step, kept inside [0.1, 0.5] of
            // the current one.
            let denom = 2.0 * (v - value - slope * step);
            let trial = if v.is_finite() && denom > 0.0 {
                -slope * step * step / denom
            } else {
                0.1 * step
            };
            step = trial.clamp(0.1 * step, 0.5 * step);
        }
        let Some(v_new) = accepted else {
            break Termination::LineSearchStalled;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if s_hist.len() == opts.history {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }

        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = v_new;
        trace.push(value);
        iterations += 1;
    };

    LbfgsResult {
        grad_norm: norm(&g),
        x,
        value,
        iterations,
        termination,
        trace,
    }
}
