//! Least-squares fit of `c k^{q1} / n^{q2}` to excess-risk measurements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::kahan_sum;
use crate::table::{summarize, RiskRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    pub k: f64,
    pub n: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Stop once the relative loss change of an accepted step falls below this.
    pub rel_tol: f64,
    /// Hold `q1` at this value (needed when every row has the same `k`).
    pub q1_fixed: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            rel_tol: 1e-12,
            q1_fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub c: f64,
    pub q1: f64,
    pub q2: f64,
    /// `Σ (y - c k^{q1} / n^{q2})²` at the returned parameters.
    pub lse: f64,
    /// The same loss at the initial parameters.
    pub lse_init: f64,
    pub iterations: usize,
    pub rows: usize,
    pub q1_fixed: bool,
}

/// Model evaluated in centred log coordinates:
/// `ŷ = exp(b + q1 (ln k - mk) - q2 (ln n - mn))`.
struct Problem {
    lk: Vec<f64>,
    ln: Vec<f64>,
    y: Vec<f64>,
    mk: f64,
    mn: f64,
    /// `Σ y²`, so the optimised loss is scale-free.
    scale: f64,
}

impl Problem {
    fn predict(&self, th: &[f64; 3], i: usize) -> f64 {
        (th[0] + th[1] * (self.lk[i] - self.mk) - th[2] * (self.ln[i] - self.mn)).exp()
    }

    fn lse(&self, th: &[f64; 3]) -> f64 {
        kahan_sum((0..self.y.len()).map(|i| (self.y[i] - self.predict(th, i)).powi(2)))
    }

    fn loss_grad(&self, th: &[f64; 3], fix_q1: bool) -> (f64, [f64; 3]) {
        let mut g = [0.0; 3];
        let mut loss = 0.0;
        for i in 0..self.y.len() {
            let yh = self.predict(th, i);
            let r = yh - self.y[i];
            loss += r * r;
            let w = 2.0 * r * yh / self.scale;
            g[0] += w;
            g[1] += w * (self.lk[i] - self.mk);
            g[2] -= w * (self.ln[i] - self.mn);
        }
        if fix_q1 {
            g[1] = 0.0;
        }
        (loss / self.scale, g)
    }
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Gradient descent with backtracking (halve the step until the loss drops)
/// in `(log c, q1, q2)`, starting from `q1 = q2 = 0.5` (or the fixed `q1`).
/// Rows are put in a canonical order first, so permuting the input does not
/// change the result.
pub fn fit_power_law(rows: &[FitPoint], opts: &FitOptions) -> Result<FitResult> {
    if rows.len() < 3 {
        return Err(Error::Underdetermined(format!(
            "need at least 3 rows, got {}",
            rows.len()
        )));
    }
    if rows
        .iter()
        .any(|r| !(r.k > 0.0 && r.n > 0.0 && r.y.is_finite()))
    {
        return Err(Error::domain("k and n must be positive and y finite"));
    }
    if opts.q1_fixed.is_none() && distinct(rows.iter().map(|r| r.k)) < 2 {
        return Err(Error::Underdetermined(
            "need at least 2 distinct k (or a fixed q1)".into(),
        ));
    }
    if distinct(rows.iter().map(|r| r.n)) < 2 {
        return Err(Error::Underdetermined("need at least 2 distinct n".into()));
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        a.k.total_cmp(&b.k)
            .then(a.n.total_cmp(&b.n))
            .then(a.y.total_cmp(&b.y))
    });

    let lk: Vec<f64> = sorted.iter().map(|r| r.k.ln()).collect();
    let ln: Vec<f64> = sorted.iter().map(|r| r.n.ln()).collect();
    let y: Vec<f64> = sorted.iter().map(|r| r.y).collect();
    let m = y.len() as f64;
    let mk = lk.iter().sum::<f64>() / m;
    let mn = ln.iter().sum::<f64>() / m;
    let scale = y.iter().map(|v| v * v).sum::<f64>();
    let prob = Problem {
        lk,
        ln,
        y,
        mk,
        mn,
        scale: if scale > 0.0 { scale } else { 1.0 },
    };

    let q1_0 = opts.q1_fixed.unwrap_or(0.5);
    let q2_0 = 0.5;
    // non-positive y only enter the log-space initial guess through a floor
    let ymax = prob.y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = if ymax > 0.0 { ymax * 1e-6 } else { 1e-12 };
    let log_c0 = median(
        (0..prob.y.len())
            .map(|i| prob.y[i].max(floor).ln() - q1_0 * prob.lk[i] + q2_0 * prob.ln[i])
            .collect(),
    );
    let mut th = [log_c0 + q1_0 * mk - q2_0 * mn, q1_0, q2_0];
    let fix_q1 = opts.q1_fixed.is_some();

    let lse_init = prob.lse(&th);
    let (mut loss, mut grad) = prob.loss_grad(&th, fix_q1);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let gnorm_sq: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm_sq == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let cand = [
                th[0] - step * grad[0],
                th[1] - step * grad[1],
                th[2] - step * grad[2],
            ];
            let (l, g) = prob.loss_grad(&cand, fix_q1);
            if l < loss {
                accepted = Some((cand, l, g));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, l, g)) = accepted else { break };
        let rel = (loss - l) / loss.max(f64::MIN_POSITIVE);
        th = cand;
        loss = l;
        grad = g;
        step *= 2.0;
        if rel < opts.rel_tol {
            break;
        }
    }
    let lse = prob.lse(&th);
    Ok(FitResult {
        c: (th[0] - th[1] * mk + th[2] * mn).exp(),
        q1: th[1],
        q2: th[2],
        lse,
        lse_init,
        iterations,
        rows: rows.len(),
        q1_fixed: fix_q1,
    })
}

/// One fit point per `(k, n)` cell: the mean excess over repeats.
pub fn fit_points_from_rows(rows: &[RiskRow]) -> Vec<FitPoint> {
    summarize(rows)
        .into_iter()
        .map(|c| FitPoint {
            k: c.k as f64,
            n: c.n as f64,
            y: c.mean,
        })
        .collect()
}
