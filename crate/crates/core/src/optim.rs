//! Golden-section search.

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const MAX_ITER: usize = 200;

/// Maximizes `f` over `[lo, hi]` by golden-section search, stopping once the
/// bracket is at most `tol` wide. The two endpoints are scored as well, so a
/// monotone objective returns its better end. Ties go to the smaller
/// argument.
pub(crate) fn golden_max<F>(lo: f64, hi: f64, tol: f64, mut f: F) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo <= hi);
    let f_lo = f(lo);
    if hi <= lo {
        return (lo, f_lo);
    }
    let f_hi = f(hi);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while b - a > tol && iter < MAX_ITER {
        iter += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = (lo, f_lo);
    for cand in [(c, fc), (d, fd), (hi, f_hi)] {
        if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
            best = cand;
        }
    }
    best
}

/// Minimizing counterpart of [`golden_max`].
pub(crate) fn golden_min<F>(lo: f64, hi: f64, tol: f64, mut f: F) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (x, v) = golden_max(lo, hi, tol, |t| -f(t));
    (x, -v)
}
