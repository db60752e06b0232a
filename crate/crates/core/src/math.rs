//! Small numeric helpers shared by both sampling layers.

use rand::Rng;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// log(exp(a) + exp(b)) without leaving the log domain.
#[inline(always)]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// log Σ exp(x_i) over a slice, stable under large negative magnitudes.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

/// Log density of N(x; mean, var).
#[inline(always)]
pub fn gaussian_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var)
}

/// Draws an index proportional to exp(log_weights[i]).
///
/// All-infeasible inputs return None. The draw consumes exactly one f64 from
/// the RNG, which keeps sampler streams easy to reason about.
pub fn sample_log_weights<R: Rng>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let mut max = f64::NEG_INFINITY;
    for &w in log_weights {
        if w > max {
            max = w;
        }
    }
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let mut total = 0.0;
    for &w in log_weights {
        total += (w - max).exp();
    }
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            acc += p;
            last = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last
}

/// ln(k!) for k = 0..=n as a lookup table.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    for k in 1..=n {
        table[k] = table[k - 1] + (k as f64).ln();
    }
    table
}
