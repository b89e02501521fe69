//! Arithmetic on nonnegative reals carried as natural logs.
//!
//! Masses, densities, bounds, and race times all live in log space so that
//! products of thousands of likelihood factors neither overflow nor
//! underflow. `-inf` encodes zero, `+inf` encodes an infinite mass, and NaN
//! never leaves this module.

/// log 0.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// log(e^a + e^b), stable for any finite or infinite operands.
pub fn log_add(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan());
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    if a == f64::INFINITY || b == f64::INFINITY {
        return f64::INFINITY;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(e^a - e^b) for a >= b. Returns `LOG_ZERO` when the difference
/// underflows (a == b up to rounding).
pub fn log_sub(a: f64, b: f64) -> f64 {
    debug_assert!(!a.is_nan() && !b.is_nan());
    debug_assert!(a >= b, "log_sub needs a >= b, got {a} < {b}");
    if b == LOG_ZERO {
        return a;
    }
    if a <= b {
        return LOG_ZERO;
    }
    // 1 - e^(b-a) via expm1 keeps precision when the terms nearly cancel.
    a + (-(b - a).exp_m1()).ln()
}

/// log sum over a set of log-valued terms; the empty sum is log 0.
pub fn log_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(LOG_ZERO, f64::max);
    if m == LOG_ZERO {
        return LOG_ZERO;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
