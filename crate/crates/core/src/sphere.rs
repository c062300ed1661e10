//! Quadrature on coordinate spheres S_r ⊂ ℝⁿ.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Area of the unit (n−1)-sphere in ℝⁿ.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Γ(n/2) for a positive integer n, by exact recursion.
fn gamma_half(n: usize) -> f64 {
    match n {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (n as f64 / 2.0 - 1.0) * gamma_half(n - 2),
    }
}

/// Nodes and weights for integrating over a coordinate sphere.
///
/// Weights are positive and sum to the area of the unit sphere; the
/// product-angle construction integrates low-degree spherical polynomials to
/// roundoff.
#[derive(Debug, Clone)]
pub struct SphereSample {
    pub n: usize,
    pub radius: f64,
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereSample {
    /// Product-angle Gauss grid with `resolution` polar nodes per angle and
    /// `2 * resolution` azimuthal nodes.
    pub fn product(n: usize, resolution: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("sphere dimension n = {n} < 2")));
        }
        if resolution < 2 {
            return Err(Error::InvalidParameter("resolution must be at least 2".into()));
        }
        let (directions, mut weights) = product_rule(n, resolution);
        let total: f64 = weights.iter().sum();
        let area = unit_sphere_area(n);
        for w in &mut weights {
            *w *= area / total;
        }
        Ok(Self {
            n,
            radius: 1.0,
            directions,
            weights,
        })
    }

    pub fn at_radius(&self, radius: f64) -> Self {
        Self { radius, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.directions[k].iter().map(|d| d * self.radius).collect()
    }

    /// ∫_{S_r} f dμ with the Euclidean area element.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let scale = self.radius.powi(self.n as i32 - 1);
        let mut x = vec![0.0; self.n];
        let mut total = 0.0;
        for (d, w) in self.directions.iter().zip(&self.weights) {
            for (xi, di) in x.iter_mut().zip(d) {
                *xi = di * self.radius;
            }
            total += w * f(&x);
        }
        total * scale
    }

    /// Average of f over S_r.
    pub fn average<F: FnMut(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.integrate(f) / (unit_sphere_area(self.n) * self.radius.powi(self.n as i32 - 1))
    }
}

fn product_rule(n: usize, q: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if n == 2 {
        let m = 2 * q;
        let dirs = (0..m)
            .map(|k| {
                let phi = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                vec![phi.cos(), phi.sin()]
            })
            .collect();
        return (dirs, vec![2.0 * PI / m as f64; m]);
    }
    let (sub_dirs, sub_w) = product_rule(n - 1, q);
    let power = n as i32 - 2;
    // (cos θ, weight) pairs carrying the sin^{n-2} θ measure
    // odd powers: Gauss–Legendre in cos θ against the polynomial weight
    // (1 − t²)^{(p−1)/2}; even powers: Gauss–Chebyshev (midpoints in θ)
    let polar: Vec<(f64, f64)> = if power % 2 == 1 {
        let j = (power - 1) / 2;
        let (x, w) = gauss_legendre(q + j as usize);
        x.iter()
            .zip(&w)
            .map(|(&t, &wt)| (t, wt * (1.0 - t * t).powi(j)))
            .collect()
    } else {
        (0..q)
            .map(|k| {
                let theta = PI * (k as f64 + 0.5) / q as f64;
                (theta.cos(), PI / q as f64 * theta.sin().powi(power))
            })
            .collect()
    };
    let mut dirs = Vec::with_capacity(polar.len() * sub_dirs.len());
    let mut weights = Vec::with_capacity(dirs.capacity());
    for &(c, wp) in &polar {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for (d, ws) in sub_dirs.iter().zip(&sub_w) {
            let mut v = Vec::with_capacity(n);
            v.push(c);
            v.extend(d.iter().map(|di| s * di));
            dirs.push(v);
            weights.push(wp * ws);
        }
    }
    (dirs, weights)
}

/// Quasi-uniform directions on S² from the Fibonacci lattice.
pub fn fibonacci_directions(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            vec![s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

/// Dense direction set used for sup-norm sampling: Fibonacci lattice in
/// three dimensions, product nodes otherwise.
pub fn dense_directions(n: usize, approx_count: usize) -> Vec<Vec<f64>> {
    if n == 3 {
        fibonacci_directions(approx_count)
    } else {
        let q = ((approx_count as f64 / 2.0).powf(1.0 / (n - 1) as f64).ceil() as usize).max(3);
        product_rule(n, q).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn weights_positive_and_normalised() {
        for n in 3..=5 {
            let s = SphereSample::product(n, 10).unwrap();
            assert!(s.weights.iter().all(|&w| w > 0.0));
            let total: f64 = s.weights.iter().sum();
            assert!((total / unit_sphere_area(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_two_polynomials_integrate_exactly() {
        for n in 3..=5 {
            let s = SphereSample::product(n, 12).unwrap();
            let area = unit_sphere_area(n);
            for i in 0..n {
                let q = s.integrate(|x| x[i] * x[i]);
                assert!((q - area / n as f64).abs() < 1e-10, "n={n} i={i}: {q}");
                let lin = s.integrate(|x| x[i]);
                assert!(lin.abs() < 1e-10);
                for j in 0..i {
                    assert!(s.integrate(|x| x[i] * x[j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn fibonacci_directions_are_unit() {
        for d in fibonacci_directions(100) {
            let r: f64 = d.iter().map(|x| x * x).sum();
            assert!((r - 1.0).abs() < 1e-14);
        }
    }
}
