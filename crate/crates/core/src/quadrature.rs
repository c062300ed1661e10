//! One-dimensional quadrature, interpolation and line search helpers.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on [a, b] with `panels` equal panels of
/// `order` points each.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * width * (xi + 1.0));
                weights.push(0.5 * width * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Geometric panels on [a, b] (a > 0): uniform in log r.
    pub fn geometric(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let log = Self::new(a.ln(), b.ln(), panels, order);
        let nodes: Vec<f64> = log.nodes.iter().map(|t| t.exp()).collect();
        let weights = log.weights.iter().zip(&nodes).map(|(w, r)| w * r).collect();
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Integral over [ta, tb] of a function sampled on the uniform grid
/// `t0 + i h`, using local cubic interpolation integrated exactly on each
/// cell (fourth order).
pub fn integrate_uniform_samples(t0: f64, h: f64, f: &[f64], ta: f64, tb: f64) -> f64 {
    let len = f.len();
    assert!(len >= 4, "need at least four samples");
    let t_end = t0 + h * (len - 1) as f64;
    let ta = ta.max(t0);
    let tb = tb.min(t_end);
    if tb <= ta {
        return 0.0;
    }
    let (gx, gw) = gauss_legendre(3);
    let first = (((ta - t0) / h).floor() as usize).min(len - 2);
    let last = (((tb - t0) / h).ceil() as usize).min(len - 1);
    let mut total = 0.0;
    for cell in first..last {
        let lo = (t0 + cell as f64 * h).max(ta);
        let hi = (t0 + (cell + 1) as f64 * h).min(tb);
        if hi <= lo {
            continue;
        }
        let start = cell.saturating_sub(1).min(len - 4);
        for (x, w) in gx.iter().zip(&gw) {
            let t = lo + 0.5 * (hi - lo) * (x + 1.0);
            let s = (t - t0) / h - start as f64;
            total += 0.5 * (hi - lo) * w * lagrange4(&f[start..start + 4], s);
        }
    }
    total
}

/// Cubic Lagrange interpolation through samples at local abscissae 0, 1, 2, 3.
pub fn lagrange4(y: &[f64], s: f64) -> f64 {
    let l0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
    let l1 = s * (s - 2.0) * (s - 3.0) / 2.0;
    let l2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
    let l3 = s * (s - 1.0) * (s - 2.0) / 6.0;
    y[0] * l0 + y[1] * l1 + y[2] * l2 + y[3] * l3
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximiser of a unimodal function on [a, b].
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
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
    let x = 0.5 * (a + b);
    let fx = f(x);
    (x, fx)
}

/// Golden-section search for the minimiser of a unimodal function on [a, b].
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, fx) = golden_max(|x| -f(x), a, b, tol);
    (x, -fx)
}
