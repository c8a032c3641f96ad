//! Small first-order minimizers used by the transcription solver.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub(crate) struct InnerOptions {
    pub max_iterations: usize,
    /// Stop when the (projected) gradient sup-norm falls below this.
    pub gradient_tol: f64,
    /// Stop once the objective drops to this value.
    pub value_target: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct InnerResult {
    pub x: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Limited-memory BFGS with Armijo backtracking.
pub(crate) fn lbfgs(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x0: Vec<f64>,
    opts: InnerOptions,
) -> InnerResult {
    const MEMORY: usize = 12;
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut flat = 0;
    while iterations < opts.max_iterations && sup(&g) > opts.gradient_tol {
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let scale = 1.0 / sup(&g).max(1.0);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v / sup(&g).max(1.0)).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = f(&trial);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        // rounding noise in f: stop after a few flat steps
        flat = if (fx - fnew).abs() <= 1e-14 * fx.abs().max(1e-300) { flat + 1 } else { 0 };
        x = xn;
        fx = fnew;
        g = gn;
        if flat >= 5 {
            break;
        }
    }
    let gradient_norm = sup(&g);
    InnerResult { x, gradient_norm, iterations }
}

/// Spectral projected gradient with a nonmonotone line search.
pub(crate) fn spg(
    mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    project: impl Fn(&mut [f64]),
    mut x: Vec<f64>,
    opts: InnerOptions,
) -> InnerResult {
    const WINDOW: usize = 10;
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut recent: VecDeque<f64> = VecDeque::from([fx]);
    let mut lambda = 1.0 / sup(&g).max(1e-12);
    let pg_norm = |x: &[f64], g: &[f64]| {
        let mut p: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        project(&mut p);
        p.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let mut iterations = 0;
    let mut pg = pg_norm(&x, &g);
    let mut flat = 0;
    while iterations < opts.max_iterations && pg > opts.gradient_tol && fx > opts.value_target {
        iterations += 1;
        let mut target: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - lambda * b).collect();
        project(&mut target);
        let d: Vec<f64> = target.iter().zip(&x).map(|(a, b)| a - b).collect();
        let slope = dot(&g, &d);
        let fmax = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = f(&trial);
            if ft <= fmax + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        lambda = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-12, 1e12) } else { (lambda * 10.0).min(1e12) };
        flat = if (fx - fnew).abs() <= 1e-14 * fx.abs().max(1e-300) { flat + 1 } else { 0 };
        x = xn;
        fx = fnew;
        g = gn;
        if flat >= 10 {
            pg = pg_norm(&x, &g);
            break;
        }
        recent.push_back(fx);
        if recent.len() > WINDOW {
            recent.pop_front();
        }
        pg = pg_norm(&x, &g);
    }
    InnerResult { x, gradient_norm: pg, iterations }
}

/// Clamps each entry to `[-bound, bound]`, with bounds cycling over edges.
pub(crate) fn project_box(x: &mut [f64], bounds: &[f64]) {
    for chunk in x.chunks_mut(bounds.len()) {
        for (v, b) in chunk.iter_mut().zip(bounds) {
            *v = v.clamp(-b, *b);
        }
    }
}

/// Projects each step's entries onto `{ sum |w_e| <= 1 } ∩ box`.
pub(crate) fn project_l1_box(x: &mut [f64], bounds: &[f64]) {
    for chunk in x.chunks_mut(bounds.len()) {
        let shrunk = |tau: f64| -> f64 {
            chunk.iter().zip(bounds).map(|(v, b)| (v.abs() - tau).max(0.0).min(*b)).sum()
        };
        let tau = if shrunk(0.0) <= 1.0 {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, chunk.iter().map(|v| v.abs()).fold(0.0, f64::max));
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if shrunk(mid) > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        for (v, b) in chunk.iter_mut().zip(bounds) {
            *v = v.signum() * (v.abs() - tau).max(0.0).min(*b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        (f, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let r = lbfgs(rosenbrock, vec![-1.2, 1.0], InnerOptions { max_iterations: 500, gradient_tol: 1e-10, value_target: f64::NEG_INFINITY });
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8, "{:?}", r.x);
    }

    #[test]
    fn spg_respects_the_box() {
        let f = |x: &[f64]| ((x[0] - 3.0).powi(2) + (x[1] + 0.2).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 0.2)]);
        let r = spg(f, |x| project_box(x, &[1.0, 1.0]), vec![0.0, 0.0], InnerOptions { max_iterations: 200, gradient_tol: 1e-12, value_target: f64::NEG_INFINITY });
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] + 0.2).abs() < 1e-10);
    }

    #[test]
    fn l1_projection() {
        let mut x = vec![0.9, -0.6, 0.1, 0.2];
        project_l1_box(&mut x, &[1.0, 1.0]);
        assert!((x[0].abs() + x[1].abs() - 1.0).abs() < 1e-12);
        assert!((x[0] - 0.65).abs() < 1e-9 && (x[1] + 0.35).abs() < 1e-9);
        assert_eq!(&x[2..], &[0.1, 0.2]);
        let mut y = vec![0.8, 0.8];
        project_l1_box(&mut y, &[0.3, 1.0]);
        assert!((y[0] - 0.3).abs() < 1e-9 && (y[1] - 0.7).abs() < 1e-9);
    }
}
