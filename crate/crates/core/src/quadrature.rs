//! Deterministic quadrature: nested midpoint tripling with Richardson
//! extrapolation on tensor grids, and composite Gauss-Legendre rules.

use crate::error::{Error, Result};

/// Default number of refinement levels for the midpoint schemes.
pub const DEFAULT_MAX_LEVELS: usize = 7;

/// Integral of `f` over `[a, b]` by nested midpoint tripling with a
/// Richardson table in powers of `h^2`. Stops when successive diagonal
/// entries agree to `rtol` (relative) or `1e-300` (absolute).
pub fn midpoint_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64, max_levels: usize) -> Result<f64> {
    let width = b - a;
    let mut n = 3usize;
    let mut sum: f64 = (0..n).map(|i| f(a + (i as f64 + 0.5) * width / n as f64)).sum();
    let mut table: Vec<Vec<f64>> = vec![vec![sum * width / n as f64]];
    for level in 1..=max_levels {
        // tripling keeps the old midpoints; add the two new points per old cell
        let h_new = width / (3 * n) as f64;
        let mut extra = 0.0;
        for i in 0..n {
            let left = a + i as f64 * 3.0 * h_new;
            extra += f(left + 0.5 * h_new) + f(left + 2.5 * h_new);
        }
        sum += extra;
        n *= 3;
        let mut row = vec![sum * width / n as f64];
        extrapolate(&mut row, &table[level - 1]);
        let new = row[level];
        let old = table[level - 1][level - 1];
        table.push(row);
        if converged(new, old, rtol) {
            return Ok(new);
        }
    }
    Err(Error::Integration(format!(
        "1D midpoint refinement on [{a}, {b}] did not reach rtol {rtol} in {max_levels} levels"
    )))
}

/// Integral over the box `[lower, upper]` of `f` by tensor midpoint grids
/// of `3^(level+1)` points per axis, extrapolated as in [`midpoint_1d`].
pub fn midpoint_box<F: Fn(&[f64]) -> f64>(
    f: F,
    lower: &[f64],
    upper: &[f64],
    rtol: f64,
    max_levels: usize,
) -> Result<f64> {
    let dim = lower.len();
    let volume: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
    let grid_sum = |n: usize| -> f64 {
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        let mut total = 0.0;
        loop {
            for d in 0..dim {
                x[d] = lower[d] + (idx[d] as f64 + 0.5) * (upper[d] - lower[d]) / n as f64;
            }
            total += f(&x);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    return total;
                }
            }
        }
    };
    let mut n = 3usize;
    let cells = |n: usize| (n as f64).powi(dim as i32);
    let mut table: Vec<Vec<f64>> = vec![vec![grid_sum(n) * volume / cells(n)]];
    for level in 1..=max_levels {
        n *= 3;
        let mut row = vec![grid_sum(n) * volume / cells(n)];
        extrapolate(&mut row, &table[level - 1]);
        let new = row[level];
        let old = table[level - 1][level - 1];
        table.push(row);
        if converged(new, old, rtol) {
            return Ok(new);
        }
    }
    Err(Error::Integration(format!("{dim}D midpoint refinement did not reach rtol {rtol} in {max_levels} levels")))
}

fn extrapolate(row: &mut Vec<f64>, prev: &[f64]) {
    let mut factor = 1.0;
    for j in 1..=prev.len() {
        factor *= 9.0;
        let v = row[j - 1] + (row[j - 1] - prev[j - 1]) / (factor - 1.0);
        row.push(v);
    }
}

fn converged(new: f64, old: f64, rtol: f64) -> bool {
    (new - old).abs() <= rtol * new.abs() || (new - old).abs() <= 1e-300
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Composite Gauss-Legendre with `order` nodes per panel, doubling the
/// number of panels (from 2) until successive estimates agree to `rtol`.
pub fn gauss_legendre_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, order: usize, rtol: f64, max_panels: usize) -> Result<f64> {
    let mut panels = 2;
    let mut prev = CompositeRule::new(a, b, panels, order).integrate(&f);
    while panels < max_panels {
        panels *= 2;
        let next = CompositeRule::new(a, b, panels, order).integrate(&f);
        if converged(next, prev, rtol) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Integration(format!("Gauss-Legendre on [{a}, {b}] did not reach rtol {rtol} with {max_panels} panels")))
}
