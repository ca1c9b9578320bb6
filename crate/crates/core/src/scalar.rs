//! Scalar monotone inclusions solved by safeguarded bracketing.

/// Root of a continuous strictly increasing function, bracketed outward
/// from `guess`.
pub fn solve_increasing(h: impl Fn(f64) -> f64, guess: f64) -> f64 {
    let h0 = h(guess);
    if h0 == 0.0 {
        return guess;
    }
    let mut step = guess.abs().max(1.0) * 1e-3;
    let (mut lo, mut hi) = (guess, guess);
    if h0 < 0.0 {
        loop {
            hi = guess + step;
            if h(hi) >= 0.0 || !hi.is_finite() {
                break;
            }
            lo = hi;
            step *= 2.0;
        }
    } else {
        loop {
            lo = guess - step;
            if h(lo) <= 0.0 || !lo.is_finite() {
                break;
            }
            hi = lo;
            step *= 2.0;
        }
    }
    bisect(&h, lo, hi)
}

/// Bracketed root of `h` on `[lo, hi]` with `h(lo) <= 0 <= h(hi)`, down to
/// adjacent floats. Illinois false-position steps, with a plain bisection
/// every third step so the bracket at least halves.
pub fn bisect(h: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = h(lo);
    let mut fhi = h(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    for it in 0..300 {
        if hi - lo <= (1e-15 * lo.abs().max(hi.abs())).max(1e-18) {
            break;
        }
        let half = 0.5 * (lo + hi);
        let mut mid = if it % 3 == 2 || !(flo < 0.0 && fhi > 0.0) {
            half
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        if !(mid > lo && mid < hi) {
            mid = half;
            if !(mid > lo && mid < hi) {
                break;
            }
        }
        let fm = h(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm > 0.0 {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `0 in h(u) + kappa * d|u|^beta (u) + N_[lo,hi](u)` for strictly
/// increasing continuous `h`, `kappa >= 0`, `beta >= 1` and `lo <= 0 <= hi`.
pub fn solve_inclusion(h: impl Fn(f64) -> f64, kappa: f64, beta: f64, lo: f64, hi: f64) -> f64 {
    let band = if beta == 1.0 { kappa } else { 0.0 };
    let h0 = h(0.0);
    if h0.abs() <= band || (lo == 0.0 && hi == 0.0) {
        return 0.0;
    }
    let psi = |u: f64| {
        if kappa == 0.0 || u == 0.0 {
            0.0
        } else if beta == 1.0 {
            kappa.copysign(u)
        } else {
            (kappa * beta * u.abs().powf(beta - 1.0)).copysign(u)
        }
    };
    let m = |u: f64| h(u) + psi(u);
    if h0 + band < 0.0 {
        // root on the positive side
        if hi <= 0.0 {
            return 0.0;
        }
        if m(hi) <= 0.0 {
            return hi;
        }
        bisect(&m, 0.0, hi)
    } else {
        if lo >= 0.0 {
            return 0.0;
        }
        if m(lo) >= 0.0 {
            return lo;
        }
        bisect(&m, lo, 0.0)
    }
}
