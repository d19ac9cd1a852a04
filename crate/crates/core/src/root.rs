//! Bracketing helpers for monotone crossing problems.

use crate::error::{Error, Result};

/// Shrinks a bracket `[lo, hi]` with `done(lo) == false` and `done(hi) == true`
/// until `hi - lo <= rel_tol * hi`. Returns the upper end, where `done` holds.
pub fn bisect<F: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, rel_tol: f64, mut done: F) -> f64 {
    debug_assert!(lo < hi);
    // 2000 halvings is far more than enough to exhaust f64 resolution
    for _ in 0..2000 {
        if hi - lo <= rel_tol * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if done(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Doubles `start` until `done` holds. Returns the bracket `(last_failing, first_passing)`.
/// Fails once the probe exceeds `start * 2^max_doublings`.
pub fn double_until<F: FnMut(f64) -> bool>(
    start: f64,
    max_doublings: u32,
    mut done: F,
) -> Result<(f64, f64)> {
    let mut lo = start;
    let mut hi = start;
    for _ in 0..=max_doublings {
        if done(hi) {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Error::NoBracket(format!(
        "condition still false at {start} * 2^{max_doublings}"
    )))
}
