//! Small numeric helpers shared across modules.
//!
//! The core is `no_std`, so transcendental functions go through `libm`.

use alloc::vec::Vec;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `ln Σ exp(x_i)` with the usual max shift. Returns `-inf` for an empty
/// slice or when every term is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(s)
}

/// `ln(mean(exp(x_i)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - ln(xs.len() as f64)
}

/// Mean and unbiased sample variance. Variance is `None` for fewer than two
/// values.
pub fn mean_var(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, Some(ss / (n - 1.0)))
}

/// Log of the standard error of the mean of `exp(x_i)`, computed after a
/// max shift so that weights spanning hundreds of orders of magnitude do not
/// overflow. `None` when fewer than two values are given.
pub fn log_se_of_mean_exp(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let scaled: Vec<f64> = xs.iter().map(|&x| exp(x - max)).collect();
    let (_, var) = mean_var(&scaled);
    let var = var?;
    let se = sqrt(var / xs.len() as f64);
    Some(max + ln(se))
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n × n`. Returns `None` when a pivot falls below
/// `tol` times the largest absolute entry.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize, tol: f64) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, &v| m.max(abs(v)));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = abs(a[col * n + col]);
        for row in col + 1..n {
            let v = abs(a[row * n + col]);
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= tol * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in col + 1..n {
            s -= a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_spread() {
        let v = [-1000.0, 0.0, -2000.0];
        assert!((log_sum_exp(&v) - 0.0).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = [ln(1.0), ln(2.0), ln(3.0)];
        assert!((log_sum_exp(&v) - ln(6.0)).abs() < 1e-12);
    }

    #[test]
    fn se_matches_direct_formula() {
        let w = [1.0f64, 2.0, 4.0, 8.0];
        let logs: Vec<f64> = w.iter().map(|x| ln(*x)).collect();
        let (_, var) = mean_var(&w);
        let se = sqrt(var.unwrap() / 4.0);
        assert!((exp(log_se_of_mean_exp(&logs).unwrap()) - se).abs() < 1e-12);
        assert!(log_se_of_mean_exp(&logs[..1]).is_none());
    }

    #[test]
    fn dense_solve() {
        let mut a = [2.0, 1.0, 1.0, 1.0, 3.0, 2.0, 1.0, 0.0, 0.0];
        let mut b = [4.0, 5.0, 6.0];
        solve_dense(&mut a, &mut b, 3, 1e-14).unwrap();
        assert!((b[0] - 6.0).abs() < 1e-12);
        assert!((b[1] - 15.0).abs() < 1e-12);
        assert!((b[2] + 23.0).abs() < 1e-12);
        let mut s = [1.0, 2.0, 2.0, 4.0];
        let mut r = [1.0, 2.0];
        assert!(solve_dense(&mut s, &mut r, 2, 1e-12).is_none());
    }
}
