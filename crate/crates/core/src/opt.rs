//! Scalar minimization: coarse grid scan followed by golden-section
//! refinement in the best bracket.
//!
//! The criterion functions minimized here are smooth but not guaranteed
//! unimodal over the whole parameter interval, hence the pre-scan. Ties in
//! the scan are broken toward the smaller argument, and the refined point
//! only replaces the scan winner when it is strictly better, so a constant
//! function returns the interval's lower endpoint.

const INV_PHI: f64 = 0.618_033_988_749_894_8; // (sqrt(5) - 1) / 2

/// Minimize `f` on `[lo, hi]`: scan `coarse` equally spaced points,
/// golden-section to absolute tolerance `xtol` inside the winning bracket,
/// then a short parabolic polish. Returns `(argmin, min)`.
///
/// The polish exists because comparison-based search alone cannot place a
/// smooth minimum more accurately than the width of the region where the
/// function is flat at double precision, about `sqrt(eps |f*| / f'')`; a
/// local quadratic fit stays informative below that scale (and is exact
/// for quadratic criteria).
pub(crate) fn minimize_scan_golden(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    coarse: usize,
    xtol: f64,
) -> (f64, f64) {
    debug_assert!(coarse >= 2 && lo < hi);
    let step = (hi - lo) / (coarse - 1) as f64;
    let mut best_i = 0;
    let mut best_x = lo;
    let mut best_f = f(lo);
    for i in 1..coarse {
        let x = if i == coarse - 1 {
            hi
        } else {
            lo + i as f64 * step
        };
        let v = f(x);
        if v < best_f {
            best_i = i;
            best_x = x;
            best_f = v;
        }
    }

    let a = if best_i == 0 {
        lo
    } else {
        lo + (best_i - 1) as f64 * step
    };
    let b = if best_i + 1 >= coarse {
        hi
    } else {
        lo + (best_i + 1) as f64 * step
    };
    let (gx, gf) = golden_section(&f, a, b, xtol);
    let (mut x_min, mut f_min) = if gf < best_f {
        (gx, gf)
    } else {
        (best_x, best_f)
    };

    let mut d = 1e-4 * (hi - lo);
    for _ in 0..2 {
        if x_min - d <= lo || x_min + d >= hi {
            break;
        }
        let fm = f(x_min - d);
        let fp = f(x_min + d);
        let denom = (fm - f_min) + (fp - f_min);
        if denom.is_nan() || denom <= 0.0 {
            break;
        }
        let shift = (0.5 * d * (fm - fp) / denom).clamp(-d, d);
        let cand = x_min + shift;
        let fc = f(cand);
        if fc <= f_min {
            x_min = cand;
            f_min = fc;
        }
        d *= 1e-2;
    }
    (x_min, f_min)
}

/// Maximize `f` on `[lo, hi]` with the same scan-then-refine scheme.
pub(crate) fn maximize_scan_golden(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    coarse: usize,
    xtol: f64,
) -> (f64, f64) {
    let (x, neg) = minimize_scan_golden(|t| -f(t), lo, hi, coarse, xtol);
    (x, -neg)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > xtol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else if f2 < f1 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            // exact tie (the function is flat at this resolution): shrink
            // symmetrically so the iterate cannot drift across the flat
            // region
            a = x1;
            b = x2;
            x1 = b - INV_PHI * (b - a);
            x2 = a + INV_PHI * (b - a);
            f1 = f(x1);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
