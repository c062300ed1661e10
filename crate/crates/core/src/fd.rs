//! Finite-difference weights on uniform grids.
//!
//! Weights are generated with Fornberg's recursion so every stencil in the
//! crate (centred, one-sided, off-centred) comes from the same routine.

/// Weights `w[k][j]` such that `f^{(k)}(x0) ≈ Σ_j w[k][j] f(x_j)`, for
/// `k = 0..=max_order`.
pub fn fornberg(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// A stencil anchored at grid index `start` with weights already divided by
/// the appropriate power of the spacing.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn apply(&self, f: &[f64]) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * f[self.start + j])
            .sum()
    }
}

/// Fourth-order stencil for the `order`-th derivative at node `i` of a
/// uniform grid with `len` nodes and spacing `h`. Centred where possible,
/// shifted towards the interior near the edges.
pub fn stencil(i: usize, len: usize, h: f64, order: usize) -> Stencil {
    let centred = centred_width(order);
    let half = centred / 2;
    let (start, width) = if i >= half && i + half < len {
        (i - half, centred)
    } else {
        let width = (order + 4).min(len);
        let start = if i < half { 0 } else { len - width };
        (start, width)
    };
    let nodes: Vec<f64> = (0..width).map(|j| (start + j) as f64).collect();
    let w = fornberg(i as f64, &nodes, order);
    let scale = h.powi(order as i32);
    Stencil {
        start,
        weights: w[order].iter().map(|x| x / scale).collect(),
    }
}

fn centred_width(order: usize) -> usize {
    if order <= 2 {
        5
    } else {
        7
    }
}

/// Derivative of a uniformly sampled profile at every node (fourth order,
/// one-sided near the edges).
///
/// Weights of a derivative stencil sum to zero, so samples are taken relative
/// to f_i; constants then differentiate to exactly zero.
pub fn derivative(f: &[f64], h: f64, order: usize) -> Vec<f64> {
    (0..f.len())
        .map(|i| {
            let s = stencil(i, f.len(), h, order);
            if order == 0 {
                return s.apply(f);
            }
            s.weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * (f[s.start + j] - f[i]))
                .sum()
        })
        .collect()
}

/// Sixth-order centred first derivative where seven nodes fit, fourth
/// order elsewhere.
pub fn first_derivative_sixth(f: &[f64], h: f64) -> Vec<f64> {
    // antisymmetric pairs so that constants differentiate to exactly zero
    const W: [f64; 3] = [0.75, -3.0 / 20.0, 1.0 / 60.0];
    let len = f.len();
    (0..len)
        .map(|i| {
            if i >= 3 && i + 3 < len {
                W.iter()
                    .enumerate()
                    .map(|(k, w)| w * (f[i + k + 1] - f[i - k - 1]))
                    .sum::<f64>()
                    / h
            } else {
                let s = stencil(i, len, h, 1);
                s.weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * (f[s.start + j] - f[i]))
                    .sum()
            }
        })
        .collect()
}

/// True if a centred fourth-order stencil of the given derivative order fits
/// around `i`.
pub fn has_centered_margin(i: usize, len: usize, order: usize) -> bool {
    let half = centred_width(order) / 2;
    i >= half && i + half < len
}

/// Central difference of a scalar function of one variable, fourth order.
pub fn central_first<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}
