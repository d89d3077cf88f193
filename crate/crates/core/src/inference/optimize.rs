//! Derivative-free maximization over the unit box.

use alloc::vec;
use alloc::vec::Vec;

/// Best point found and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Grid points per dimension for the initial scan.
    pub grid: usize,
    /// Number of best grid points refined by Nelder–Mead.
    pub starts: usize,
    pub max_evals: usize,
    pub x_tol: f64,
    pub f_tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { grid: 11, starts: 3, max_evals: 3000, x_tol: 1e-9, f_tol: 1e-13 }
    }
}

fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Nelder–Mead from `start`, with every trial point projected onto the box.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut F, start: &[f64], step: f64, opts: &OptimizeOptions) -> Optimum {
    let d = start.len();
    // minimize −f
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(start.to_vec());
    for i in 0..d {
        let mut p = start.to_vec();
        p[i] = if p[i] + step <= 1.0 { p[i] + step } else { p[i] - step };
        clamp_unit(&mut p);
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let mut evals = d + 1;
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let size = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < opts.x_tol || (vals[d] - vals[0]).abs() <= opts.f_tol * (1.0 + vals[0].abs()) && size < 1e3 * opts.x_tol {
            break;
        }
        let mut centroid = vec![0.0; d];
        for p in &simplex[..d] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / d as f64;
            }
        }
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (c - w)).collect();
            clamp_unit(&mut p);
            p
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            };
            evals += 1;
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=d {
                    let p: Vec<f64> = best.iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    vals[i] = eval(&p);
                    simplex[i] = p;
                }
                evals += d;
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Optimum { x: simplex[best].clone(), value: -vals[best] }
}

/// Maximize `f` over `[0, 1]^d`: scan a regular grid, then refine the best
/// grid points and any `extra` starting points with Nelder–Mead.
pub fn maximize_unit_box<F: FnMut(&[f64]) -> f64>(mut f: F, d: usize, extra: &[Vec<f64>], opts: &OptimizeOptions) -> Optimum {
    let g = opts.grid.max(2);
    let total = g.pow(d as u32);
    let mut scanned: Vec<(f64, Vec<f64>)> = Vec::with_capacity(total);
    for idx in 0..total {
        let mut x = vec![0.0; d];
        let mut r = idx;
        for v in x.iter_mut() {
            *v = (r % g) as f64 / (g - 1) as f64;
            r /= g;
        }
        let v = f(&x);
        scanned.push((if v.is_nan() { f64::NEG_INFINITY } else { v }, x));
    }
    scanned.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = Optimum { x: scanned[0].1.clone(), value: scanned[0].0 };
    let step = 0.5 / (g - 1) as f64;
    let starts = scanned.iter().take(opts.starts).map(|s| s.1.clone()).chain(extra.iter().cloned());
    for s in starts {
        let o = nelder_mead(&mut f, &s, step, opts);
        if o.value > best.value {
            best = o;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_and_boundary_maxima() {
        let f = |x: &[f64]| -(x[0] - 0.3).powi(2) - 2.0 * (x[1] - 0.77).powi(2) + 0.3 * x[0] * x[1];
        let o = maximize_unit_box(f, 2, &[], &OptimizeOptions::default());
        // stationary point: 2x₀ − 0.3x₁ = 2a, −0.3x₀ + 4x₁ = 4b
        let (a, b) = (0.3f64, 0.77f64);
        let det = 8.0 - 0.09;
        let x0 = (8.0 * a + 1.2 * b) / det;
        let x1 = (8.0 * b + 0.6 * a) / det;
        assert!((o.x[0] - x0).abs() < 1e-6 && (o.x[1] - x1).abs() < 1e-6, "{:?} vs {x0} {x1}", o.x);
        let g = |x: &[f64]| x[0] + x[1] - x[2];
        let o = maximize_unit_box(g, 3, &[], &OptimizeOptions::default());
        assert!((o.value - 2.0).abs() < 1e-12);
    }
}
