//! Bracketing root search for strictly increasing functions.

/// Outcome of [`bisect_increasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracket {
    /// Sign change inside the bracket; the midpoint of the final interval.
    Root(f64),
    /// `f > 0` on the whole bracket.
    AllPositive,
    /// `f < 0` on the whole bracket.
    AllNegative,
}

const MAX_HALVINGS: usize = 200;

/// Bisection for the root of a non-decreasing `f` on `[lo, hi]`, stopping
/// once the bracket is narrower than `tol`.
///
/// `f` may return `±∞` at the ends; only its sign is used.
pub fn bisect_increasing<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Bracket
where
    F: Fn(f64) -> f64,
{
    debug_assert!(lo <= hi, "empty bracket [{lo}, {hi}]");
    let f_lo = f(lo);
    if f_lo > 0.0 {
        return Bracket::AllPositive;
    }
    if f_lo == 0.0 {
        return Bracket::Root(lo);
    }
    let f_hi = f(hi);
    if f_hi < 0.0 {
        return Bracket::AllNegative;
    }
    if f_hi == 0.0 {
        return Bracket::Root(hi);
    }
    for _ in 0..MAX_HALVINGS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v > 0.0 {
            hi = mid;
        } else if v < 0.0 {
            lo = mid;
        } else {
            return Bracket::Root(mid);
        }
    }
    Bracket::Root(0.5 * (lo + hi))
}
