//! Truncated multivariate Taylor arithmetic ("jets") to total degree 4.
//!
//! A [`Jet`] over `m` variables holds the Taylor coefficients of a function
//! about a base point for every monomial of degree at most [`MAX_DEGREE`].
//! Evaluating a two-point function once on jets seeded at `(q, q)` yields
//! every mixed partial up to order 4 there, exact up to rounding.
//!
//! Generic model code is written against the [`Scalar`] trait, implemented
//! both for `f64` and for [`Jet`].

use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use itertools::Itertools;

pub const MAX_DEGREE: usize = 4;

/// Monomial bookkeeping shared by all jets over the same number of variables.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    /// Monomials as sorted variable lists, graded then lexicographic.
    monomials: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `(a, b, c)` with `monomial[a] * monomial[b] == monomial[c]`.
    products: Vec<(u32, u32, u32)>,
    /// `prod_i e_i!` for each monomial; coefficient times this is the derivative.
    factorials: Vec<f64>,
}

impl JetSpace {
    fn build(nvars: usize) -> Self {
        assert!(nvars > 0 && nvars < 256, "jet spaces support 1..=255 variables");
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        for deg in 0..=MAX_DEGREE {
            monomials.extend((0..nvars as u8).combinations_with_replacement(deg));
        }
        let lookup: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (c, mono) in monomials.iter().enumerate() {
            let d = mono.len();
            let mut seen: Vec<Vec<u8>> = Vec::new();
            for mask in 0u32..(1 << d) {
                let (a, b): (Vec<(usize, u8)>, Vec<(usize, u8)>) = mono
                    .iter()
                    .copied()
                    .enumerate()
                    .partition(|(k, _)| mask & (1 << k) != 0);
                let a: Vec<u8> = a.into_iter().map(|(_, v)| v).collect();
                if seen.contains(&a) {
                    continue;
                }
                let b: Vec<u8> = b.into_iter().map(|(_, v)| v).collect();
                products.push((lookup[&a] as u32, lookup[&b] as u32, c as u32));
                seen.push(a);
            }
        }

        let factorials = monomials
            .iter()
            .map(|m| {
                m.iter()
                    .dedup_with_count()
                    .map(|(count, _)| (1..=count).product::<usize>() as f64)
                    .product()
            })
            .collect();

        JetSpace {
            nvars,
            monomials,
            lookup,
            products,
            factorials,
        }
    }

    /// Shared space for `nvars` variables, built once per process.
    pub fn shared(nvars: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry(nvars)
            .or_insert_with(|| Arc::new(JetSpace::build(nvars)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Index of the monomial given by a (not necessarily sorted) variable list.
    pub fn index_of(&self, vars: &[u8]) -> Option<usize> {
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.lookup.get(&key).copied()
    }
}

/// Truncated Taylor polynomial to total degree 4.
#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// The independent variable `var` with base value `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Self {
        assert!(var < space.nvars, "variable index out of range");
        let mut j = Jet::constant(space, value);
        j.coeffs[1 + var] = 1.0;
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// The mixed partial derivative with respect to the listed variables
    /// (repetition allowed, order irrelevant), at the base point.
    pub fn derivative(&self, vars: &[u8]) -> Option<f64> {
        let k = self.space.index_of(vars)?;
        Some(self.coeffs[k] * self.space.factorials[k])
    }

    fn same_space(&self, other: &Jet) {
        debug_assert!(
            Arc::ptr_eq(&self.space, &other.space) || self.space.nvars == other.space.nvars,
            "jets from different spaces"
        );
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let mut out = vec![0.0; self.coeffs.len()];
        for &(a, b, c) in &self.space.products {
            out[c as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
        }
    }

    /// `f(self)` from the derivatives `f^(k)(a0)`, `k = 0..=4`, at the base value.
    pub fn compose(&self, derivs: [f64; MAX_DEGREE + 1]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        // Horner in the nilpotent part
        let inv_fact = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        let mut acc = Jet::constant(&self.space, derivs[MAX_DEGREE] * inv_fact[MAX_DEGREE]);
        for k in (0..MAX_DEGREE).rev() {
            acc = acc.mul_ref(&delta);
            acc.coeffs[0] += derivs[k] * inv_fact[k];
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;

    fn add(mut self, rhs: Jet) -> Jet {
        self.same_space(&rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;

    fn sub(mut self, rhs: Jet) -> Jet {
        self.same_space(&rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;

    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl Div for Jet {
    type Output = Jet;

    fn div(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;

    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;

    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;

    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;

    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;

    fn div(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c /= rhs);
        self
    }
}

/// Arithmetic needed by model expressions, over `f64` or [`Jet`].
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Base value (the constant Taylor coefficient for jets).
    fn value(&self) -> f64;
    fn constant_like(&self, c: f64) -> Self;
    fn recip(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, n: i32) -> Self;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(&self.space, c)
    }

    fn recip(&self) -> Self {
        let a = self.coeffs[0];
        let r = 1.0 / a;
        self.compose([r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4), 24.0 * r.powi(5)])
    }

    fn ln(&self) -> Self {
        let a = self.coeffs[0];
        let r = 1.0 / a;
        self.compose([a.ln(), r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4)])
    }

    fn exp(&self) -> Self {
        let e = self.coeffs[0].exp();
        self.compose([e; 5])
    }

    fn sqrt(&self) -> Self {
        let a = self.coeffs[0];
        let s = a.sqrt();
        self.compose([
            s,
            0.5 / s,
            -0.25 / (s * a),
            0.375 / (s * a * a),
            -0.9375 / (s * a * a * a),
        ])
    }

    fn sin(&self) -> Self {
        let (s, c) = self.coeffs[0].sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    fn cos(&self) -> Self {
        let (s, c) = self.coeffs[0].sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    fn powi(&self, n: i32) -> Self {
        let a = self.coeffs[0];
        let nf = n as f64;
        let mut d = [0.0; 5];
        let mut falling = 1.0;
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = if n >= 0 && (k as i32) > n {
                0.0
            } else {
                falling * a.powi(n - k as i32)
            };
            falling *= nf - k as f64;
        }
        self.compose(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_count() {
        // C(m + 4, 4)
        assert_eq!(JetSpace::shared(1).len(), 5);
        assert_eq!(JetSpace::shared(2).len(), 15);
        assert_eq!(JetSpace::shared(8).len(), 495);
    }

    #[test]
    fn univariate_series() {
        let sp = JetSpace::shared(1);
        let x = Jet::variable(&sp, 0, 0.0);
        let e = x.exp();
        for (k, f) in [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0].iter().enumerate() {
            assert_relative_eq!(e.coefficients()[k], *f, epsilon = 1e-15);
        }
        let l = (x.clone() + 1.0).ln();
        for (k, f) in [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25].iter().enumerate() {
            assert_relative_eq!(l.coefficients()[k], *f, epsilon = 1e-15);
        }
        let g = (x.constant_like(1.0) - x.clone()).recip();
        for k in 0..5 {
            assert_relative_eq!(g.coefficients()[k], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sqrt_and_powi_match_closed_forms() {
        let sp = JetSpace::shared(1);
        let x = Jet::variable(&sp, 0, 2.0);
        let s = x.sqrt();
        let sq = s.clone() * s;
        assert_relative_eq!(sq.derivative(&[]).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(sq.derivative(&[0]).unwrap(), 1.0, epsilon = 1e-14);
        for k in 2..=4u8 {
            assert!(sq.derivative(&vec![0; k as usize]).unwrap().abs() < 1e-13);
        }
        let c = x.powi(3);
        assert_relative_eq!(c.derivative(&[0, 0, 0]).unwrap(), 6.0, epsilon = 1e-14);
        assert_eq!(c.derivative(&[0, 0, 0, 0]).unwrap(), 0.0);
        let inv2 = x.powi(-2);
        // d^4/dx^4 x^-2 = 120 x^-6
        assert_relative_eq!(inv2.derivative(&[0, 0, 0, 0]).unwrap(), 120.0 / 64.0, epsilon = 1e-13);
    }

    #[test]
    fn mixed_partials_of_a_product() {
        // f = x^2 y^2 ; d^4 f / dx^2 dy^2 = 4
        let sp = JetSpace::shared(2);
        let x = Jet::variable(&sp, 0, 0.7);
        let y = Jet::variable(&sp, 1, -1.3);
        let f = x.square() * y.square();
        assert_relative_eq!(f.derivative(&[0, 1, 0, 1]).unwrap(), 4.0, epsilon = 1e-14);
        assert_relative_eq!(f.derivative(&[0, 1]).unwrap(), 4.0 * 0.7 * -1.3, epsilon = 1e-14);
        assert_relative_eq!(f.derivative(&[0, 0, 1]).unwrap(), 4.0 * -1.3, epsilon = 1e-14);
    }

    #[test]
    fn trig_identity() {
        let sp = JetSpace::shared(2);
        let x = Jet::variable(&sp, 0, 0.3);
        let y = Jet::variable(&sp, 1, 1.1);
        let z = x * y;
        let one = z.sin().square() + z.cos().square();
        assert_relative_eq!(one.value(), 1.0, epsilon = 1e-15);
        assert!(one.coefficients()[1..].iter().all(|c| c.abs() < 1e-13));
    }
}
