//! Adaptive Simpson quadrature on finite intervals.

use crate::scalar::Real;

/// Integrates `f` over `[a, b]`, splitting into `panels` and refining each panel
/// adaptively until the local Richardson estimate is below `tol` (absolute, shared
/// across panels).
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T, panels: usize) -> T {
    let panels = panels.max(1);
    let width = (b - a) / T::of_usize(panels);
    let panel_tol = tol / T::of_usize(panels);
    (0..panels)
        .map(|k| {
            let lo = a + width * T::of_usize(k);
            let hi = if k + 1 == panels { b } else { lo + width };
            let mid = (lo + hi) * T::lit(0.5);
            let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
            let whole = simpson(lo, hi, flo, fmid, fhi);
            refine(f, lo, hi, flo, fmid, fhi, whole, panel_tol, 48)
        })
        .sum()
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let m = (a + b) * T::lit(0.5);
    let lm = (a + m) * T::lit(0.5);
    let rm = (m + b) * T::lit(0.5);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    let half = tol * T::lit(0.5);
    refine(f, a, m, fa, flm, fm, left, half, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, half, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_gaussian() {
        let v = adaptive_simpson(&|x: f64| x * x * x, 0.0, 2.0, 1e-12, 1);
        assert!((v - 4.0).abs() < 1e-12);
        let g = adaptive_simpson(
            &|x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -12.0,
            12.0,
            1e-13,
            16,
        );
        assert!((g - 1.0).abs() < 1e-11);
    }
}
