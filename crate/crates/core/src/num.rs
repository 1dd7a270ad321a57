//! Small integer helpers shared by the phase and block computations.

/// Smallest `r` with `r * r >= x`.
pub(crate) fn ceil_sqrt(x: u64) -> u64 {
    let r = x.isqrt();
    if r * r == x {
        r
    } else {
        r + 1
    }
}
