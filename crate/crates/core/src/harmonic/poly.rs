//! Homogeneous harmonic polynomials in ℝⁿ up to degree four.

use nalgebra::DMatrix;

/// Polynomial stored as a list of monomials `coeff · Π x_i^{e_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    fn monomial(n: usize, coeff: f64, powers: &[(usize, u32)]) -> (f64, Vec<u32>) {
        let mut e = vec![0; n];
        for &(i, p) in powers {
            e[i] += p;
        }
        (coeff, e)
    }

    fn from_terms(n: usize, terms: Vec<(f64, Vec<u32>)>) -> Self {
        Self { n, terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product::<f64>())
            .sum()
    }

    fn partial(&self, i: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (c * e[i] as f64, e2)
            })
            .collect();
        Polynomial::from_terms(self.n, terms)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.partial(i).eval(x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let pi = self.partial(i);
            for j in i..self.n {
                let v = pi.partial(j).eval(x);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    /// Symbolic Laplacian, returned as a polynomial.
    pub fn laplacian(&self) -> Polynomial {
        let mut terms = Vec::new();
        for i in 0..self.n {
            terms.extend(self.partial(i).partial(i).terms);
        }
        Polynomial::from_terms(self.n, terms).simplified()
    }

    fn simplified(mut self) -> Self {
        self.terms.sort_by(|a, b| a.1.cmp(&b.1));
        let mut out: Vec<(f64, Vec<u32>)> = Vec::new();
        for (c, e) in self.terms {
            match out.last_mut() {
                Some((c0, e0)) if *e0 == e => *c0 += c,
                _ => out.push((c, e)),
            }
        }
        out.retain(|(c, _)| *c != 0.0);
        Polynomial::from_terms(self.n, out)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
    }
}

/// The fixed list of harmonic polynomials of degree `l` in ℝⁿ used to
/// index higher multipoles. Degree 1 and 2 lists are complete bases.
pub fn harmonic_basis(n: usize, l: u32) -> Vec<Polynomial> {
    let m = Polynomial::monomial;
    let mut out = Vec::new();
    match l {
        1 => {
            for i in 0..n {
                out.push(vec![m(n, 1.0, &[(i, 1)])]);
            }
        }
        2 => {
            for i in 0..n {
                for j in i + 1..n {
                    out.push(vec![m(n, 1.0, &[(i, 1), (j, 1)])]);
                }
            }
            for i in 1..n {
                out.push(vec![m(n, 1.0, &[(0, 2)]), m(n, -1.0, &[(i, 2)])]);
            }
        }
        3 => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        out.push(vec![m(n, 1.0, &[(i, 1), (j, 1), (k, 1)])]);
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out.push(vec![m(n, 1.0, &[(i, 3)]), m(n, -3.0, &[(i, 1), (j, 2)])]);
                    }
                }
            }
        }
        4 => {
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        for q in k + 1..n {
                            out.push(vec![m(n, 1.0, &[(i, 1), (j, 1), (k, 1), (q, 1)])]);
                        }
                    }
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    out.push(vec![m(n, 1.0, &[(i, 3), (j, 1)]), m(n, -1.0, &[(i, 1), (j, 3)])]);
                    out.push(vec![
                        m(n, 1.0, &[(i, 4)]),
                        m(n, -6.0, &[(i, 2), (j, 2)]),
                        m(n, 1.0, &[(j, 4)]),
                    ]);
                }
            }
        }
        _ => {}
    }
    out.into_iter().map(|t| Polynomial::from_terms(n, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_basis_polynomial_is_harmonic_and_homogeneous() {
        for n in 3..=5 {
            for l in 1..=4 {
                let basis = harmonic_basis(n, l);
                assert!(!basis.is_empty());
                for p in &basis {
                    assert!(p.laplacian().is_zero(), "n={n} l={l}: {p:?}");
                    assert_eq!(p.degree(), l);
                }
            }
        }
    }

    #[test]
    fn degree_two_basis_has_full_dimension() {
        for n in 3..=5 {
            assert_eq!(harmonic_basis(n, 2).len(), n * (n + 1) / 2 - 1);
        }
    }
}
