//! Small scalar routines shared across modules.

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `ln(sinh(x))` for `x > 0`, stable for large arguments.
pub fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol * max(|x|, scale)`, where
/// `scale` is the bracket's initial width (so brackets around zero still
/// terminate).
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let floor = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        let mid = 0.5 * (a + b);
        if (b - a) <= tol * mid.abs().max(floor) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection for a root of `f` on a bracket with `f(lo)·f(hi) ≤ 0`.
///
/// Returns the midpoint once `|f| < ftol` or the bracket collapses to
/// floating-point resolution.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, ftol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < ftol || mid <= lo || mid >= hi {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Full width at half maximum of a sampled profile, by linear interpolation
/// between the cells bracketing each half-maximum crossing.
///
/// `peak` is the index the width is measured around. Returns `None` when the
/// profile does not fall below half maximum on both sides, or when fewer than
/// three cells sit at or above half maximum.
pub fn fwhm(axis: &[f64], values: &[f64], peak: usize) -> Option<f64> {
    let half = 0.5 * values[peak];
    if !(half > 0.0) {
        return None;
    }
    let mut left = peak;
    while left > 0 && values[left - 1] >= half {
        left -= 1;
    }
    let mut right = peak;
    while right + 1 < values.len() && values[right + 1] >= half {
        right += 1;
    }
    if left == 0 || right + 1 == values.len() || right - left + 1 < 3 {
        return None;
    }
    let cross = |i_out: usize, i_in: usize| {
        let (v0, v1) = (values[i_out], values[i_in]);
        let t = (half - v0) / (v1 - v0);
        axis[i_out] + t * (axis[i_in] - axis[i_out])
    };
    Some(cross(right + 1, right) - cross(left - 1, left))
}
