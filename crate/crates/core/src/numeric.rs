//! Scalar numerics used by the pool layer: bracketed root finding, adaptive
//! Simpson quadrature and central differences.

use crate::error::{Error, Result};

/// Relative tolerance on the root for [`find_root`].
pub const ROOT_REL_TOL: f64 = 1e-14;
/// Iteration cap for [`find_root`].
pub const ROOT_MAX_ITER: usize = 200;

/// Brent's method on `[lo, hi]`. `f(lo)` and `f(hi)` must differ in sign.
pub fn find_root<F>(f: F, lo: f64, hi: f64, rel_tol: f64, max_iter: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::NotBracketed { lo, hi });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs().max(f64::MIN_POSITIVE);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() && fa.is_finite() && fc.is_finite() {
            // inverse quadratic interpolation, falling back to secant
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
    })
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const MAX_DEPTH: u32 = 48;

    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
    }

    fn recurse<F: Fn(f64) -> Result<f64>>(f: &F, p: Panel, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let diff = left + right - p.whole;
        if diff.abs() <= 15.0 * tol {
            return Ok(left + right + diff / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureFailed { tolerance: tol });
        }
        let l = Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
        };
        let r = Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
        };
        Ok(recurse(f, l, 0.5 * tol, depth - 1)? + recurse(f, r, 0.5 * tol, depth - 1)?)
    }

    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(
        &f,
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole,
        },
        tol,
        MAX_DEPTH,
    )
}

/// Finite-difference step for an input of magnitude `scale`.
pub fn fd_step(scale: f64) -> f64 {
    (1e-6 * scale.abs()).max(1e-9)
}

/// First derivative of `f` at `at` with step `h`. Falls back to a second-order
/// forward stencil when `at - h` would leave the domain `[0, inf)`.
pub fn first_derivative<F>(f: F, at: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if at - h >= 0.0 {
        Ok((f(at + h)? - f(at - h)?) / (2.0 * h))
    } else {
        Ok((-3.0 * f(at)? + 4.0 * f(at + h)? - f(at + 2.0 * h)?) / (2.0 * h))
    }
}
