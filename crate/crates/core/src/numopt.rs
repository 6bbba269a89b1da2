//! Bounded minimization used for the α-updates and for the GMoM parameter fit.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Axis-aligned feasible region. Infinite bounds are permitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Box {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Box {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Box> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch {
                left: lower.len(),
                right: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidConfig(format!(
                "box bound {i}: lower {} must be below upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarOptions {
    /// Absolute gradient tolerance for stationarity.
    pub gtol: f64,
    /// Relative bracket width at which refinement stops.
    pub xtol: f64,
    pub max_evals: usize,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        ScalarOptions {
            gtol: 1e-6,
            xtol: 1e-12,
            max_evals: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub f: f64,
    pub evaluations: usize,
}

/// Minimizes f on [lo, hi] starting from `x0`, using `df` for bracketing and
/// refinement.
pub fn minimize_scalar_bounded(
    mut f: impl FnMut(f64) -> f64,
    mut df: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    x0: f64,
) -> Result<ScalarMinimum> {
    minimize_scalar_fdf(|x| (f(x), df(x)), lo, hi, x0, ScalarOptions::default())
}

struct Probe {
    x: f64,
    f: f64,
    g: f64,
}

/// Same as [`minimize_scalar_bounded`] with a fused value/derivative closure.
///
/// The search walks downhill from `x0` with doubling steps until the
/// derivative changes sign or the objective rises, then shrinks the bracket
/// with secant steps on the derivative safeguarded by bisection. When the
/// derivative is unusable it falls back to golden-section search on values.
/// The returned point is the best one evaluated, so `f* <= f(x0)`.
pub fn minimize_scalar_fdf(
    mut fdf: impl FnMut(f64) -> (f64, f64),
    lo: f64,
    hi: f64,
    x0: f64,
    opts: ScalarOptions,
) -> Result<ScalarMinimum> {
    if !(lo <= hi) {
        return Err(Error::InvalidConfig(format!("empty interval [{lo}, {hi}]")));
    }
    let x0 = x0.clamp(lo, hi);
    let mut evals = 0usize;
    let mut eval = |x: f64, evals: &mut usize| -> Probe {
        *evals += 1;
        let (f, g) = fdf(x);
        Probe { x, f, g }
    };

    let start = eval(x0, &mut evals);
    if !start.f.is_finite() {
        return Err(Error::NonFinite(format!("objective is {} at x0 = {x0}", start.f)));
    }
    let mut best = (start.x, start.f);
    let track = |p: &Probe, best: &mut (f64, f64)| {
        if p.f.is_finite() && p.f < best.1 {
            *best = (p.x, p.f);
        }
    };
    let done = |best: (f64, f64), evals: usize| ScalarMinimum {
        x: best.0,
        f: best.1,
        evaluations: evals,
    };

    if hi - lo <= 0.0 {
        return Ok(done(best, evals));
    }
    if !start.g.is_finite() {
        return Ok(done(golden_section(&mut eval, lo, hi, best, &mut evals, opts), evals));
    }
    if start.g.abs() <= opts.gtol {
        return Ok(done(best, evals));
    }
    let dir = -start.g.signum();
    if (dir < 0.0 && x0 <= lo) || (dir > 0.0 && x0 >= hi) {
        return Ok(done(best, evals));
    }

    // Expand downhill until the slope flips or the value rises.
    let mut step = 0.05 * x0.abs().max(1.0);
    let mut prev = start;
    let (mut near, mut far);
    loop {
        let x = (prev.x + dir * step).clamp(lo, hi);
        let p = eval(x, &mut evals);
        track(&p, &mut best);
        let rising = !p.f.is_finite() || p.f > prev.f;
        let flipped = p.g.is_finite() && p.g * dir >= 0.0;
        if rising || flipped || !p.g.is_finite() {
            near = prev;
            far = p;
            break;
        }
        if x == lo || x == hi {
            // still descending at the bound
            return Ok(done(best, evals));
        }
        if evals >= opts.max_evals {
            return Ok(done(best, evals));
        }
        // overshoot the secant estimate of the derivative root a little so
        // the next probe usually brackets it
        let taken = (p.x - prev.x).abs();
        let slope = (p.g - prev.g) / (p.x - prev.x);
        let guess = if slope.is_finite() && slope > 0.0 {
            1.5 * (p.g / slope).abs()
        } else {
            f64::INFINITY
        };
        step = guess.clamp(0.1 * taken, 2.0 * taken);
        prev = p;
    }

    // Ensure a derivative sign change between `near` (descending) and `far`.
    while !(far.g.is_finite() && far.g * dir >= 0.0 && far.f.is_finite()) {
        if evals >= opts.max_evals || (far.x - near.x).abs() <= opts.xtol * (1.0 + near.x.abs()) {
            return Ok(done(best, evals));
        }
        let m = eval(0.5 * (near.x + far.x), &mut evals);
        track(&m, &mut best);
        if !m.g.is_finite() || !m.f.is_finite() {
            let (a, b) = if near.x < far.x { (near.x, far.x) } else { (far.x, near.x) };
            return Ok(done(golden_section(&mut eval, a, b, best, &mut evals, opts), evals));
        }
        if m.g * dir >= 0.0 {
            far = m;
        } else if m.f <= near.f {
            near = m;
        } else {
            far = m;
        }
    }

    // Root of the derivative inside [near, far] by Brent's method.
    let (mut a, mut fa) = (near.x, near.g);
    let (mut b, mut fb) = (far.x, far.g);
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    while evals < opts.max_evals {
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
        let tol = 0.5 * opts.xtol * (1.0 + b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= opts.gtol {
            break;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
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
        let probe = eval(b, &mut evals);
        track(&probe, &mut best);
        if !probe.g.is_finite() || !probe.f.is_finite() {
            let (l, r) = if near.x < far.x { (near.x, far.x) } else { (far.x, near.x) };
            return Ok(done(golden_section(&mut eval, l, r, best, &mut evals, opts), evals));
        }
        fb = probe.g;
    }
    Ok(done(best, evals))
}

fn golden_section(
    eval: &mut impl FnMut(f64, &mut usize) -> Probe,
    mut a: f64,
    mut b: f64,
    mut best: (f64, f64),
    evals: &mut usize,
    opts: ScalarOptions,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let value = |p: &Probe| if p.f.is_finite() { p.f } else { f64::INFINITY };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = value(&eval(c, evals));
    let mut fd = value(&eval(d, evals));
    while (b - a).abs() > opts.xtol * (1.0 + a.abs().max(b.abs())) && *evals < opts.max_evals {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = value(&eval(c, evals));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = value(&eval(d, evals));
        }
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx < best.1 {
                best = (x, fx);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct BoxOptions {
    /// Infinity-norm tolerance on the projected gradient.
    pub gtol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions {
            gtol: 1e-5,
            max_iter: 500,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central-difference gradient with step max(1e-7, 1e-7·|x_i|), one-sided
/// at active bounds so every probe stays feasible.
pub fn numerical_gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], bounds: &Box) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = (1e-7 * x[i].abs()).max(1e-7);
        let up = (x[i] + h).min(bounds.upper[i]);
        let down = (x[i] - h).max(bounds.lower[i]);
        if up <= down {
            continue;
        }
        probe[i] = up;
        let fu = f(&probe);
        probe[i] = down;
        let fd = f(&probe);
        probe[i] = x[i];
        grad[i] = (fu - fd) / (up - down);
    }
    grad
}

/// Projected limited-memory quasi-Newton minimization over a box.
///
/// `grad` may be `None`, in which case [`numerical_gradient`] is used.
pub fn minimize_box(
    mut f: impl FnMut(&[f64]) -> f64,
    mut grad: Option<&mut dyn FnMut(&[f64]) -> Vec<f64>>,
    bounds: &Box,
    x0: &[f64],
    opts: BoxOptions,
) -> Result<BoxMinimum> {
    let n = bounds.dim();
    if x0.len() != n {
        return Err(Error::LengthMismatch {
            left: x0.len(),
            right: n,
        });
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFinite(format!("objective is {fx} at the starting point")));
    }
    let mut gradient = |x: &[f64], f: &mut dyn FnMut(&[f64]) -> f64| -> Vec<f64> {
        match grad.as_mut() {
            Some(g) => g(x),
            None => numerical_gradient(&mut |p: &[f64]| f(p), x, bounds),
        }
    };
    let mut g = gradient(&x, &mut f);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if projected_gradient_norm(&x, &g, bounds) <= opts.gtol {
            converged = true;
            break;
        }
        iterations += 1;

        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0)))
            .collect();
        let mut d = two_loop(&g, &history, &free);
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) || d.iter().any(|v| !v.is_finite()) {
            d = g.iter().zip(&free).map(|(gi, &fr)| if fr { -gi } else { 0.0 }).collect();
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            history.clear();
        }
        if !(slope < 0.0) {
            converged = true;
            break;
        }

        let mut t = if history.is_empty() {
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (1.0 / dmax).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            bounds.project(&mut trial);
            let decrease: f64 = trial.iter().zip(&x).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) && ft <= fx {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = gradient(&x_new, &mut f);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-12 * (ss * yy).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let stalled = ss == 0.0;
        x = x_new;
        fx = f_new;
        g = g_new;
        if stalled {
            break;
        }
    }
    debug_assert!(bounds.contains(&x));
    Ok(BoxMinimum {
        x,
        f: fx,
        iterations,
        converged,
    })
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Box) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (xi, gi))| ((xi - gi).clamp(bounds.lower[i], bounds.upper[i]) - xi).abs())
        .fold(0.0, f64::max)
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(free).map(|(v, &fr)| if fr { *v } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot_masked(s, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let sy = dot_masked(s, y, free);
        let yy = dot_masked(y, y, free);
        if sy > 0.0 && yy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot_masked(y, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] += s[i] * (a - b);
            }
        }
    }
    q.iter().map(|v| -v).collect()
}

fn dot_masked(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((x, y), _)| x * y)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_quadratic() {
        let r = minimize_scalar_bounded(|x| (x - 2.0).powi(2), |x| 2.0 * (x - 2.0), 0.0, 5.0, 0.0).unwrap();
        assert!((r.x - 2.0).abs() < 1e-9);
        assert!(r.f < 1e-16);
    }

    #[test]
    fn scalar_active_lower_bound() {
        for x0 in [1.0, 2.0, 3.0] {
            let r = minimize_scalar_bounded(|x| x, |_| 1.0, 1.0, 3.0, x0).unwrap();
            assert_eq!(r.x, 1.0);
        }
    }

    #[test]
    fn scalar_nonfinite_start() {
        let r = minimize_scalar_bounded(|_| f64::NAN, |_| 0.0, 0.0, 1.0, 0.5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn scalar_never_worse_than_start() {
        // multimodal objective, start in a shallow basin
        let f = |x: f64| (3.0 * x).sin() + 0.1 * x * x;
        let df = |x: f64| 3.0 * (3.0 * x).cos() + 0.2 * x;
        for x0 in [-4.0, -1.0, 0.0, 0.7, 2.5, 4.0] {
            let r = minimize_scalar_bounded(f, df, -5.0, 5.0, x0).unwrap();
            assert!(r.f <= f(x0));
            let stationary = df(r.x).abs() <= 1e-6;
            let at_bound = (r.x + 5.0).abs() < 1e-9 || (r.x - 5.0).abs() < 1e-9;
            assert!(stationary || at_bound, "x0 {x0} -> {} (df {})", r.x, df(r.x));
        }
    }

    #[test]
    fn scalar_golden_fallback_without_gradient() {
        let r = minimize_scalar_bounded(|x| (x - 0.3).abs(), |_| f64::NAN, -1.0, 1.0, 0.9).unwrap();
        assert!((r.x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn box_interior_quadratic() {
        let c = [0.5, -1.5, 3.0];
        let bounds = Box::new(vec![-10.0; 3], vec![10.0; 3]).unwrap();
        let r = minimize_box(
            |x| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum(),
            None,
            &bounds,
            &[0.0, 0.0, 0.0],
            BoxOptions::default(),
        )
        .unwrap();
        for (a, b) in r.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn box_linear_goes_to_lower_corner() {
        let bounds = Box::new(vec![0.0; 4], vec![5.0; 4]).unwrap();
        let r = minimize_box(|x| x.iter().sum(), None, &bounds, &[1.0, 2.0, 3.0, 4.0], BoxOptions::default())
            .unwrap();
        assert!(r.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn box_rosenbrock() {
        let bounds = Box::new(vec![-2.0; 2], vec![2.0; 2]).unwrap();
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let mut grad = |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        };
        let r = minimize_box(rosen, Some(&mut grad), &bounds, &[-1.2, 1.0], BoxOptions::default()).unwrap();
        assert!(r.f <= 1e-6, "f* = {}", r.f);
        assert!(bounds.contains(&r.x));
        // numerical gradient path
        let r = minimize_box(rosen, None, &bounds, &[-1.2, 1.0], BoxOptions::default()).unwrap();
        assert!(r.f <= 1e-6, "f* = {}", r.f);
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(Box::new(vec![1.0], vec![0.0]).is_err());
    }
}
