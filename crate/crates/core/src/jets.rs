//! Truncated multivariate derivative arithmetic (orders 0 to 3).
//!
//! A [`Jet`] carries the value of a function of `2n` variables (`n` base
//! coordinates followed by `n` fibre coordinates) together with its partial
//! derivatives up to a requested order. Third-order storage is restricted to
//! index triples with at least two fibre directions: the only third-order
//! consumers are first derivatives of fibre Hessians, so the stored block is
//! `third[a][i][j]` with `a` ranging over all `2n` variables and `i, j` over
//! the fibre block.

use crate::error::{Error, Result};

/// Guard for divisions and log/sqrt domains.
pub const EPS_DOM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    order: u8,
    n: usize,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    third: Vec<f64>,
}

impl Jet {
    pub fn constant(order: u8, n: usize, value: f64) -> Self {
        assert!(order <= 3, "jet order must be in 0..=3");
        let dim = 2 * n;
        Jet {
            order,
            n,
            value,
            grad: if order >= 1 { vec![0.0; dim] } else { Vec::new() },
            hess: if order >= 2 { vec![0.0; dim * dim] } else { Vec::new() },
            third: if order >= 3 { vec![0.0; dim * n * n] } else { Vec::new() },
        }
    }

    /// Seed jet for the coordinate variable with global index `var` (base
    /// variables are `0..n`, fibre variables `n..2n`).
    pub fn variable(order: u8, n: usize, var: usize, value: f64) -> Self {
        assert!(var < 2 * n);
        let mut j = Jet::constant(order, n, value);
        if order >= 1 {
            j.grad[var] = 1.0;
        }
        j
    }

    /// Order-1 jet from an explicit value and gradient (used when a derived
    /// quantity's derivatives are extracted from a higher-order jet).
    pub fn from_value_grad(n: usize, value: f64, grad: Vec<f64>) -> Self {
        assert_eq!(grad.len(), 2 * n);
        Jet { order: 1, n, value, grad, hess: Vec::new(), third: Vec::new() }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self, a: usize) -> f64 {
        if self.order >= 1 {
            self.grad[a]
        } else {
            panic!("order-{} jet has no gradient", self.order)
        }
    }

    pub fn hess(&self, a: usize, b: usize) -> f64 {
        self.hess[a * self.dim() + b]
    }

    /// Third derivative with respect to variable `a` (global index) and the
    /// fibre variables `i`, `j` (fibre-local indices, i.e. variables `n+i`,
    /// `n+j`).
    pub fn third_fibre(&self, a: usize, i: usize, j: usize) -> f64 {
        self.third[(a * self.n + i) * self.n + j]
    }

    fn third_mut(&mut self, a: usize, i: usize, j: usize) -> &mut f64 {
        let n = self.n;
        &mut self.third[(a * n + i) * n + j]
    }

    fn check_compat(&self, other: &Jet) -> Result<()> {
        if self.n != other.n || self.order != other.order {
            return Err(Error::DimensionMismatch(format!(
                "jet mismatch: (order {}, n {}) vs (order {}, n {})",
                self.order, self.n, other.order, other.n
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_compat(other)?;
        let mut r = self.clone();
        r.value += other.value;
        for (a, b) in r.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in r.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        for (a, b) in r.third.iter_mut().zip(&other.third) {
            *a += b;
        }
        Ok(r)
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.check_compat(other)?;
        let mut r = self.clone();
        r.value -= other.value;
        for (a, b) in r.grad.iter_mut().zip(&other.grad) {
            *a -= b;
        }
        for (a, b) in r.hess.iter_mut().zip(&other.hess) {
            *a -= b;
        }
        for (a, b) in r.third.iter_mut().zip(&other.third) {
            *a -= b;
        }
        Ok(r)
    }

    pub fn neg(&self) -> Jet {
        let mut r = self.clone();
        r.value = -r.value;
        for a in r.grad.iter_mut() {
            *a = -*a;
        }
        for a in r.hess.iter_mut() {
            *a = -*a;
        }
        for a in r.third.iter_mut() {
            *a = -*a;
        }
        r
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut r = self.clone();
        r.value *= c;
        for a in r.grad.iter_mut() {
            *a *= c;
        }
        for a in r.hess.iter_mut() {
            *a *= c;
        }
        for a in r.third.iter_mut() {
            *a *= c;
        }
        r
    }

    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_compat(other)?;
        let (f, g) = (self, other);
        let n = self.n;
        let dim = 2 * n;
        let mut r = Jet::constant(self.order, n, f.value * g.value);
        if self.order >= 1 {
            for a in 0..dim {
                r.grad[a] = f.grad[a] * g.value + f.value * g.grad[a];
            }
        }
        if self.order >= 2 {
            for a in 0..dim {
                for b in 0..dim {
                    r.hess[a * dim + b] = f.hess(a, b) * g.value
                        + f.grad[a] * g.grad[b]
                        + f.grad[b] * g.grad[a]
                        + f.value * g.hess(a, b);
                }
            }
        }
        if self.order >= 3 {
            for a in 0..dim {
                for i in 0..n {
                    let gi = n + i;
                    for j in 0..n {
                        let gj = n + j;
                        *r.third_mut(a, i, j) = f.third_fibre(a, i, j) * g.value
                            + f.hess(a, gi) * g.grad[gj]
                            + f.hess(a, gj) * g.grad[gi]
                            + f.hess(gi, gj) * g.grad[a]
                            + f.grad[a] * g.hess(gi, gj)
                            + f.grad[gi] * g.hess(a, gj)
                            + f.grad[gj] * g.hess(a, gi)
                            + f.value * g.third_fibre(a, i, j);
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.check_compat(other)?;
        if other.value.abs() < EPS_DOM {
            return Err(Error::DivisionByZero(other.value.abs()));
        }
        let v = other.value;
        let recip = other.compose([1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), -6.0 / (v * v * v * v)]);
        self.mul(&recip)
    }

    /// Chain-rule composition: given the derivatives `c = [f(v), f'(v),
    /// f''(v), f'''(v)]` of a 1-variable function at `v = self.value`,
    /// returns the jet of `f(self)`.
    pub fn compose(&self, c: [f64; 4]) -> Jet {
        let g = self;
        let n = self.n;
        let dim = 2 * n;
        let mut r = Jet::constant(self.order, n, c[0]);
        if self.order >= 1 {
            for a in 0..dim {
                r.grad[a] = c[1] * g.grad[a];
            }
        }
        if self.order >= 2 {
            for a in 0..dim {
                for b in 0..dim {
                    r.hess[a * dim + b] = c[2] * g.grad[a] * g.grad[b] + c[1] * g.hess(a, b);
                }
            }
        }
        if self.order >= 3 {
            for a in 0..dim {
                for i in 0..n {
                    let gi = n + i;
                    for j in 0..n {
                        let gj = n + j;
                        *r.third_mut(a, i, j) = c[3] * g.grad[a] * g.grad[gi] * g.grad[gj]
                            + c[2]
                                * (g.grad[a] * g.hess(gi, gj)
                                    + g.grad[gi] * g.hess(a, gj)
                                    + g.grad[gj] * g.hess(a, gi))
                            + c[1] * g.third_fibre(a, i, j);
                    }
                }
            }
        }
        r
    }

    pub fn sqrt(&self) -> Result<Jet> {
        if self.value < EPS_DOM {
            return Err(Error::Domain(format!(
                "sqrt of {:e} below domain guard {:e}",
                self.value, EPS_DOM
            )));
        }
        let s = self.value.sqrt();
        Ok(self.compose([s, 0.5 / s, -0.25 / (s * s * s), 0.375 / (s * s * s * s * s)]))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(&self) -> Result<Jet> {
        if self.value < EPS_DOM {
            return Err(Error::Domain(format!(
                "log of {:e} below domain guard {:e}",
                self.value, EPS_DOM
            )));
        }
        let v = self.value;
        Ok(self.compose([v.ln(), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)]))
    }

    /// `atan2(self, other)` with full chain-rule propagation. Branches on the
    /// dominant argument so the inner quotient stays well conditioned.
    pub fn atan2(&self, other: &Jet) -> Result<Jet> {
        self.check_compat(other)?;
        let (a, b) = (self, other);
        let val = a.value.atan2(b.value);
        if a.value == 0.0 && b.value == 0.0 {
            return Err(Error::Domain("atan2(0, 0)".into()));
        }
        let (t, sign) = if b.value.abs() >= a.value.abs() {
            (a.div(b)?, 1.0)
        } else {
            (b.div(a)?, -1.0)
        };
        let tv = t.value;
        let d = 1.0 + tv * tv;
        let base = t.compose([
            tv.atan(),
            1.0 / d,
            -2.0 * tv / (d * d),
            (6.0 * tv * tv - 2.0) / (d * d * d),
        ]);
        let mut r = base.scale(sign);
        // constant branch offset; derivatives unaffected
        r.value = val;
        Ok(r)
    }

    /// Integer power, valid for negative exponents away from zero.
    pub fn powi(&self, k: i32) -> Result<Jet> {
        if k < 0 && self.value.abs() < EPS_DOM {
            return Err(Error::DivisionByZero(self.value.abs()));
        }
        let v = self.value;
        let kf = k as f64;
        let p = |m: i32, coeff: f64| -> f64 {
            if coeff == 0.0 {
                0.0
            } else {
                coeff * v.powi(m)
            }
        };
        Ok(self.compose([
            v.powi(k),
            p(k - 1, kf),
            p(k - 2, kf * (kf - 1.0)),
            p(k - 3, kf * (kf - 1.0) * (kf - 2.0)),
        ]))
    }

    /// Max absolute asymmetry of the stored Hessian; diagnostic only.
    pub fn hess_asymmetry(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for a in 0..dim {
            for b in 0..a {
                worst = worst.max((self.hess(a, b) - self.hess(b, a)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seed2(order: u8, x: f64, y: f64) -> (Jet, Jet) {
        // n = 1: variables (x1, y1)
        (
            Jet::variable(order, 1, 0, x),
            Jet::variable(order, 1, 1, y),
        )
    }

    #[test]
    fn product_rule_order1() {
        // (value 2, grad (1,0)) * (value 3, grad (0,1)) -> value 6, grad (3,2)
        let (a, b) = seed2(1, 2.0, 3.0);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.value(), 6.0);
        assert_eq!(p.grad(0), 3.0);
        assert_eq!(p.grad(1), 2.0);
    }

    #[test]
    fn self_division_is_one() {
        let x = Jet::variable(2, 1, 0, 5.0);
        let q = x.div(&x).unwrap();
        assert_abs_diff_eq!(q.value(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.grad(0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(q.hess(0, 0), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mul_order2_polynomial() {
        // f(x,y) = x^2 y at (1,2): grad (4,1), hess ((4,2),(2,0))
        let (x, y) = seed2(2, 1.0, 2.0);
        let f = x.mul(&x).unwrap().mul(&y).unwrap();
        assert_abs_diff_eq!(f.value(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.grad(0), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.grad(1), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.hess(0, 0), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.hess(0, 1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.hess(1, 0), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.hess(1, 1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_of_norm() {
        // sqrt(u^2 + v^2) at (3,4) -> value 5, grad (3/5, 4/5) in fibre slots
        let u = Jet::variable(1, 2, 2, 3.0);
        let v = Jet::variable(1, 2, 3, 4.0);
        let s = u
            .mul(&u)
            .unwrap()
            .add(&v.mul(&v).unwrap())
            .unwrap()
            .sqrt()
            .unwrap();
        assert_abs_diff_eq!(s.value(), 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.grad(2), 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(s.grad(3), 0.8, epsilon = 1e-14);
    }

    #[test]
    fn sin_at_zero_order2() {
        let x = Jet::variable(2, 1, 0, 0.0);
        let s = x.sin();
        assert_eq!(s.value(), 0.0);
        assert_eq!(s.grad(0), 1.0);
        assert_eq!(s.hess(0, 0), 0.0);
    }

    #[test]
    fn sqrt_of_square_is_identity() {
        let x = Jet::variable(2, 1, 0, 2.0);
        let s = x.mul(&x).unwrap().sqrt().unwrap();
        assert_abs_diff_eq!(s.value(), x.value(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.grad(0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.hess(0, 0), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn atan2_gradient() {
        let u = Jet::variable(2, 1, 0, 1.0);
        let v = Jet::variable(2, 1, 1, 2.0);
        let a = u.atan2(&v).unwrap();
        assert_abs_diff_eq!(a.value(), 1.0f64.atan2(2.0), epsilon = 1e-15);
        // d atan2(a,b) = (b da - a db)/(a^2+b^2)
        assert_abs_diff_eq!(a.grad(0), 2.0 / 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.grad(1), -1.0 / 5.0, epsilon = 1e-14);
        // branch where the first argument dominates
        let u = Jet::variable(2, 1, 0, 2.0);
        let v = Jet::variable(2, 1, 1, -0.5);
        let a = u.atan2(&v).unwrap();
        assert_abs_diff_eq!(a.grad(0), -0.5 / 4.25, epsilon = 1e-14);
        assert_abs_diff_eq!(a.grad(1), -2.0 / 4.25, epsilon = 1e-14);
    }

    #[test]
    fn division_guard() {
        let x = Jet::variable(1, 1, 0, 1.0);
        let z = Jet::constant(1, 1, 1e-15);
        assert!(matches!(x.div(&z), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Jet::variable(1, 1, 0, 1.0);
        let b = Jet::variable(1, 2, 0, 1.0);
        assert!(matches!(a.add(&b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn third_order_norm_derivatives() {
        // lambda = sqrt(u^2+v^2+w^2), n = 3; check d^3 lambda / du^3 at (2,0,0):
        // analytic: lambda = |u| there, all pure-u derivatives beyond first vanish.
        let n = 3;
        let u = Jet::variable(3, n, 3, 2.0);
        let v = Jet::variable(3, n, 4, 0.0);
        let w = Jet::variable(3, n, 5, 0.0);
        let lam = u
            .mul(&u)
            .unwrap()
            .add(&v.mul(&v).unwrap())
            .unwrap()
            .add(&w.mul(&w).unwrap())
            .unwrap()
            .sqrt()
            .unwrap();
        assert_abs_diff_eq!(lam.third_fibre(3, 0, 0), 0.0, epsilon = 1e-13);
        // d^3 lambda / du dv dv = d/du ((lam^2 - v^2)/lam^3) at (2,0,0) = -1/lam^2 * dlam/du = -1/4
        assert_abs_diff_eq!(lam.third_fibre(3, 1, 1), -0.25, epsilon = 1e-13);
        // full symmetry in the fibre block
        assert_abs_diff_eq!(
            lam.third_fibre(4, 0, 1),
            lam.third_fibre(3, 1, 1),
            epsilon = 1e-13
        );
    }
}
