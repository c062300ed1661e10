//! Smooth scalar fields on ℝⁿ with analytic first and second derivatives.

use nalgebra::DMatrix;

/// A scalar field with exact gradient and Hessian.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;

    fn laplacian(&self, x: &[f64]) -> f64 {
        self.hessian(x).trace()
    }
}

/// Pointwise product of two fields.
pub struct Product<'a> {
    pub left: &'a dyn ScalarField,
    pub right: &'a dyn ScalarField,
}

impl ScalarField for Product<'_> {
    fn dim(&self) -> usize {
        self.left.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.left.value(x) * self.right.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (a, b) = (self.left.value(x), self.right.value(x));
        let (ga, gb) = (self.left.gradient(x), self.right.gradient(x));
        ga.iter().zip(&gb).map(|(p, q)| p * b + a * q).collect()
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let (a, b) = (self.left.value(x), self.right.value(x));
        let ga = nalgebra::DVector::from_vec(self.left.gradient(x));
        let gb = nalgebra::DVector::from_vec(self.right.gradient(x));
        self.left.hessian(x) * b + self.right.hessian(x) * a + &ga * gb.transpose() + &gb * ga.transpose()
    }
}

/// Radial field f(|x|) given its profile and first two radial derivatives.
pub struct RadialField<F>
where
    F: Fn(f64) -> (f64, f64, f64) + Send + Sync,
{
    pub n: usize,
    pub profile: F,
}

impl<F> ScalarField for RadialField<F>
where
    F: Fn(f64) -> (f64, f64, f64) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.profile)(norm(x)).0
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        let (_, d1, _) = (self.profile)(r);
        x.iter().map(|xi| d1 * xi / r).collect()
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let r = norm(x);
        let (_, d1, d2) = (self.profile)(r);
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let xx = x[i] * x[j] / (r * r);
            let delta = if i == j { 1.0 } else { 0.0 };
            d2 * xx + d1 / r * (delta - xx)
        })
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
