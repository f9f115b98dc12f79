//! Truncated multivariate Taylor jets.
//!
//! A [`Jet`] holds the value and every partial derivative up to a fixed total
//! order of a scalar quantity with respect to `nvars` variables. Entries are
//! stored as raw partial-derivative values (no factorials folded in), densely,
//! sorted by total degree and then lexicographically.
//!
//! Products use the Leibniz rule, univariate functions are applied through
//! their derivative sequence at the value slot, and multivariate composition
//! substitutes jets for the variables of another jet.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Maximum number of variables a jet can depend on.
pub const MAX_VARS: usize = 8;

pub type MultiIndex = [u8; MAX_VARS];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Index bookkeeping shared by every jet with the same `(nvars, order)`.
pub struct Layout {
    nvars: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// For every entry `alpha`: all `(beta, alpha - beta, binom(alpha, beta))`.
    products: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Layout(nvars={}, order={})", self.nvars, self.order)
    }
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * f64::from(n - i) / f64::from(i + 1);
    }
    r
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn enumerate_indices(nvars: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for degree in 0..=order {
        let mut current = [0u8; MAX_VARS];
        fill_degree(nvars, 0, degree, &mut current, &mut out);
    }
    out
}

// Lexicographic (descending in the first variable) enumeration of all
// multi-indices of exactly `remaining` total degree.
fn fill_degree(nvars: usize, pos: usize, remaining: usize, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if nvars == 0 {
        if remaining == 0 {
            out.push(*cur);
        }
        return;
    }
    if pos == nvars - 1 {
        cur[pos] = remaining as u8;
        out.push(*cur);
        cur[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k as u8;
        fill_degree(nvars, pos + 1, remaining - k, cur, out);
    }
    cur[pos] = 0;
}

impl Layout {
    fn build(nvars: usize, order: usize) -> Self {
        assert!(nvars <= MAX_VARS, "jets support at most {MAX_VARS} variables");
        let indices = enumerate_indices(nvars, order);
        let lookup: HashMap<MultiIndex, usize> = indices.iter().enumerate().map(|(i, a)| (*a, i)).collect();
        let products = indices
            .iter()
            .map(|alpha| {
                let mut terms = Vec::new();
                for (bi, beta) in indices.iter().enumerate() {
                    if (0..nvars).all(|v| beta[v] <= alpha[v]) {
                        let mut gamma = [0u8; MAX_VARS];
                        let mut coeff = 1.0;
                        for v in 0..nvars {
                            gamma[v] = alpha[v] - beta[v];
                            coeff *= binomial(alpha[v], beta[v]);
                        }
                        terms.push((bi as u32, lookup[&gamma] as u32, coeff));
                    }
                }
                terms
            })
            .collect();
        Layout { nvars, order, indices, lookup, products }
    }

    /// Shared layout for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(Layout::build(nvars, order)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

/// Value plus all partial derivatives up to `order` in `nvars` variables.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    d: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.layout.nvars)
            .field("order", &self.layout.order)
            .field("partials", &self.d)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.layout.nvars == other.layout.nvars && self.layout.order == other.layout.order && self.d == other.d
    }
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Self {
        let layout = Layout::get(nvars, order);
        let mut d = vec![0.0; layout.len()];
        d[0] = value;
        Jet { layout, d }
    }

    pub fn zero(nvars: usize, order: usize) -> Self {
        Self::constant(nvars, order, 0.0)
    }

    /// The coordinate function `x_var` at `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Self {
        assert!(var < nvars);
        let mut j = Self::constant(nvars, order, value);
        if order >= 1 {
            j.d[1 + var] = 1.0;
        }
        j
    }

    /// Independent variables `x_0..x_{n-1}` seeded at `point`.
    pub fn variables(point: &[f64], order: usize) -> Vec<Jet> {
        let n = point.len();
        point.iter().enumerate().map(|(i, &v)| Jet::variable(n, order, i, v)).collect()
    }

    /// Builds a jet from raw partials laid out in [`Layout::indices`] order.
    pub fn from_partials(nvars: usize, order: usize, partials: Vec<f64>) -> Self {
        let layout = Layout::get(nvars, order);
        assert_eq!(partials.len(), layout.len(), "partials length mismatch");
        Jet { layout, d: partials }
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    pub fn partials(&self) -> &[f64] {
        &self.d
    }

    /// Partial derivative for the multi-index given as per-variable counts.
    pub fn partial(&self, counts: &[u8]) -> f64 {
        let mut alpha = [0u8; MAX_VARS];
        alpha[..counts.len()].copy_from_slice(counts);
        match self.layout.position(&alpha) {
            Some(i) => self.d[i],
            None => panic!("multi-index {counts:?} beyond jet order {}", self.layout.order),
        }
    }

    /// First partial derivative with respect to `var` at the base point.
    pub fn d1(&self, var: usize) -> f64 {
        if self.layout.order == 0 {
            panic!("jet of order 0 has no first derivatives");
        }
        self.d[1 + var]
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.layout.order {
            return self.clone();
        }
        let layout = Layout::get(self.layout.nvars, order);
        let d = self.d[..layout.len()].to_vec();
        Jet { layout, d }
    }

    fn aligned<'a>(&'a self, other: &'a Jet) -> (std::borrow::Cow<'a, Jet>, std::borrow::Cow<'a, Jet>) {
        use std::borrow::Cow;
        assert_eq!(self.layout.nvars, other.layout.nvars, "jets over different variable counts");
        match self.layout.order.cmp(&other.layout.order) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(self), Cow::Borrowed(other)),
            std::cmp::Ordering::Less => (Cow::Borrowed(self), Cow::Owned(other.truncate(self.layout.order))),
            std::cmp::Ordering::Greater => (Cow::Owned(self.truncate(other.layout.order)), Cow::Borrowed(other)),
        }
    }

    /// Derivative with respect to `var`; the result has order one less.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.layout.order >= 1, "cannot differentiate an order-0 jet");
        assert!(var < self.layout.nvars);
        let layout = Layout::get(self.layout.nvars, self.layout.order - 1);
        let d = layout
            .indices
            .iter()
            .map(|alpha| {
                let mut shifted = *alpha;
                shifted[var] += 1;
                self.d[self.layout.lookup[&shifted]]
            })
            .collect();
        Jet { layout, d }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { layout: self.layout.clone(), d: self.d.iter().map(|x| x * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.d[0] += s;
        out
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let (a, b) = self.aligned(other);
        let layout = a.layout.clone();
        let d = layout
            .products
            .iter()
            .map(|terms| terms.iter().map(|&(i, j, c)| c * a.d[i as usize] * b.d[j as usize]).sum())
            .collect();
        Jet { layout, d }
    }

    /// Applies a univariate function given its derivatives `f^(n)(value)` for
    /// `n = 0..=order`.
    pub fn compose_univariate(&self, derivs: &[f64]) -> Jet {
        let k = self.layout.order;
        assert!(derivs.len() > k, "need derivatives up to order {k}");
        let mut delta = self.clone();
        delta.d[0] = 0.0;
        // Horner in the nilpotent increment
        let mut acc = Jet::constant(self.layout.nvars, k, derivs[k] / factorial(k));
        for n in (0..k).rev() {
            acc = acc.mul_jet(&delta).add_scalar(derivs[n] / factorial(n));
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v == 0.0 {
            return Err(JetError::Domain("division by zero".into()));
        }
        let k = self.layout.order;
        let mut derivs = Vec::with_capacity(k + 1);
        let mut c = 1.0 / v;
        for n in 0..=k {
            derivs.push(c);
            c *= -((n + 1) as f64) / v;
        }
        Ok(self.compose_univariate(&derivs))
    }

    pub fn div_jet(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul_jet(&other.recip()?))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<f64> = (0..=self.order()).map(|n| cycle[n % 4]).collect();
        self.compose_univariate(&derivs)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<f64> = (0..=self.order()).map(|n| cycle[n % 4]).collect();
        self.compose_univariate(&derivs)
    }

    pub fn tan(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v.cos().abs() < 1e-300 {
            return Err(JetError::Domain(format!("tan undefined at {v}")));
        }
        let t = v.tan();
        // d/dx P(tan x) = P'(tan x) (1 + tan^2 x); P_0(t) = t
        let mut poly = vec![0.0, 1.0];
        let mut derivs = Vec::with_capacity(self.order() + 1);
        for _ in 0..=self.order() {
            derivs.push(poly.iter().rev().fold(0.0, |acc, c| acc * t + c));
            let dp: Vec<f64> = poly.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
            let mut next = vec![0.0; dp.len() + 2];
            for (i, c) in dp.iter().enumerate() {
                next[i] += c;
                next[i + 2] += c;
            }
            poly = next;
        }
        Ok(self.compose_univariate(&derivs))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose_univariate(&vec![e; self.order() + 1])
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v <= 0.0 {
            return Err(JetError::Domain(format!("log of non-positive value {v}")));
        }
        let mut derivs = vec![v.ln()];
        let mut c = 1.0 / v;
        for n in 1..=self.order() {
            derivs.push(c);
            c *= -(n as f64) / v;
        }
        Ok(self.compose_univariate(&derivs))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v < 0.0 || (v == 0.0 && self.order() > 0) {
            return Err(JetError::Domain(format!("sqrt of {v}")));
        }
        Ok(self.powf_positive(0.5))
    }

    pub fn atan(&self) -> Jet {
        let v = self.value();
        let theta = v.atan();
        let c = theta.cos();
        let mut derivs = vec![theta];
        // atan^(n)(x) = (n-1)! cos^n(theta) sin(n (theta + pi/2))
        for n in 1..=self.order() {
            let nf = n as f64;
            derivs.push(factorial(n - 1) * c.powi(n as i32) * (nf * (theta + std::f64::consts::FRAC_PI_2)).sin());
        }
        self.compose_univariate(&derivs)
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, n: i64) -> Result<Jet, JetError> {
        if n < 0 {
            if self.value() == 0.0 {
                return Err(JetError::Domain("0 raised to a negative power".into()));
            }
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(self.nvars(), self.order(), 1.0);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        Ok(result)
    }

    fn powf_positive(&self, p: f64) -> Jet {
        let v = self.value();
        let mut derivs = Vec::with_capacity(self.order() + 1);
        let mut coeff = 1.0;
        for n in 0..=self.order() {
            derivs.push(if coeff == 0.0 { 0.0 } else { coeff * v.powf(p - n as f64) });
            coeff *= p - n as f64;
        }
        self.compose_univariate(&derivs)
    }

    /// Real power; non-integer exponents need a positive base.
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        if p.fract() == 0.0 && p.abs() < 1e9 {
            return self.powi(p as i64);
        }
        if self.value() <= 0.0 {
            return Err(JetError::Domain(format!("non-integer power {p} of non-positive base {}", self.value())));
        }
        Ok(self.powf_positive(p))
    }

    /// `self^exponent` for a jet exponent, via `exp(exponent * ln self)`.
    pub fn pow_jet(&self, exponent: &Jet) -> Result<Jet, JetError> {
        Ok(exponent.mul_jet(&self.ln()?).exp())
    }

    /// Substitutes `args[i]` for variable `i` of `self` (a jet taken at the
    /// values of `args`). The result lives over the variables of `args`.
    pub fn compose(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.nvars(), "composition arity mismatch");
        let monomials = Monomials::new(args, self.order());
        monomials.apply(self)
    }
}

/// Products `prod_a (args_a - args_a(0))^alpha_a / alpha!` for every multi-index
/// up to a given order. Shared across many compositions with the same inner map.
pub struct Monomials {
    layout: Arc<Layout>,
    terms: Vec<Jet>,
}

impl Monomials {
    pub fn new(args: &[Jet], order: usize) -> Self {
        assert!(!args.is_empty());
        let outer = Layout::get(args.len(), order);
        let inner_vars = args[0].nvars();
        let inner_order = args.iter().map(Jet::order).min().unwrap_or(0);
        let deltas: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut d = a.truncate(inner_order);
                d.d[0] = 0.0;
                d
            })
            .collect();
        let mut terms: Vec<Jet> = Vec::with_capacity(outer.len());
        for alpha in outer.indices.iter() {
            let degree: usize = alpha.iter().map(|&a| a as usize).sum();
            if degree == 0 {
                terms.push(Jet::constant(inner_vars, inner_order, 1.0));
                continue;
            }
            let var = (0..args.len()).find(|&v| alpha[v] > 0).expect("nonzero degree");
            let mut prev = *alpha;
            prev[var] -= 1;
            let base = &terms[outer.lookup[&prev]];
            // delta^alpha / alpha! = (delta^prev / prev!) * delta_var / alpha_var
            terms.push(base.mul_jet(&deltas[var]).scale(1.0 / f64::from(alpha[var])));
        }
        Monomials { layout: outer, terms }
    }

    pub fn apply(&self, outer: &Jet) -> Jet {
        let order = outer.order().min(self.layout.order);
        let mut acc: Option<Jet> = None;
        for (i, alpha) in self.layout.indices.iter().enumerate() {
            let degree: usize = alpha.iter().map(|&a| a as usize).sum();
            if degree > order {
                break;
            }
            let c = outer.d[outer.layout.lookup[alpha]];
            if c == 0.0 && i > 0 {
                continue;
            }
            let term = self.terms[i].scale(c);
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
        acc.expect("at least the constant term").truncate(order)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        Jet { layout: a.layout.clone(), d: a.d.iter().zip(&b.d).map(|(x, y)| x + y).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        Jet { layout: a.layout.clone(), d: a.d.iter().zip(&b.d).map(|(x, y)| x - y).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn layout_sizes_are_binomial() {
        assert_eq!(Layout::get(2, 2).len(), 6);
        assert_eq!(Layout::get(4, 4).len(), 70);
        assert_eq!(Layout::get(5, 3).len(), 56);
        assert_eq!(Layout::get(3, 0).len(), 1);
    }

    #[test]
    fn truncation_keeps_prefix() {
        let l4 = Layout::get(3, 4);
        let l2 = Layout::get(3, 2);
        assert_eq!(&l4.indices()[..l2.len()], l2.indices());
    }

    #[test]
    fn product_rule_second_order() {
        // f = x*y at (2,3): f_x = 3, f_y = 2, f_xy = 1
        let v = Jet::variables(&[2.0, 3.0], 2);
        let f = &v[0] * &v[1];
        assert_eq!(f.value(), 6.0);
        assert_eq!(f.partial(&[1, 0]), 3.0);
        assert_eq!(f.partial(&[0, 1]), 2.0);
        assert_eq!(f.partial(&[1, 1]), 1.0);
        assert_eq!(f.partial(&[2, 0]), 0.0);
    }

    #[test]
    fn powers_match_closed_form() {
        let x = Jet::variable(1, 4, 0, 1.5);
        let c = x.powi(3).unwrap();
        assert_abs_diff_eq!(c.partial(&[1]), 3.0 * 1.5 * 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.partial(&[3]), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.partial(&[4]), 0.0, epsilon = 1e-14);
        let r = x.powf(0.5).unwrap();
        assert_abs_diff_eq!(r.partial(&[2]), -0.25 * 1.5f64.powf(-1.5), epsilon = 1e-14);
    }

    #[test]
    fn atan_derivatives() {
        let x = Jet::variable(1, 3, 0, 0.7);
        let a = x.atan();
        let d1 = 1.0 / (1.0 + 0.49);
        let d2 = -2.0 * 0.7 / (1.0f64 + 0.49).powi(2);
        let d3 = (6.0 * 0.49 - 2.0) / (1.0f64 + 0.49).powi(3);
        assert_abs_diff_eq!(a.partial(&[1]), d1, epsilon = 1e-14);
        assert_abs_diff_eq!(a.partial(&[2]), d2, epsilon = 1e-14);
        assert_abs_diff_eq!(a.partial(&[3]), d3, epsilon = 1e-13);
    }

    #[test]
    fn domain_errors() {
        let x = Jet::variable(1, 2, 0, 0.0);
        assert!(x.recip().is_err());
        assert!(x.ln().is_err());
        assert!(x.sqrt().is_err());
        assert!(x.powi(-2).is_err());
        assert!(Jet::variable(1, 2, 0, -1.0).powf(0.5).is_err());
        assert!(Jet::constant(1, 0, 0.0).sqrt().is_ok());
    }

    #[test]
    fn derivative_shifts_entries() {
        let v = Jet::variables(&[0.3, -0.2], 3);
        let f = v[0].sin().mul_jet(&v[1].exp());
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 2);
        assert_abs_diff_eq!(fx.value(), 0.3f64.cos() * (-0.2f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(fx.partial(&[1, 1]), f.partial(&[2, 1]), epsilon = 1e-15);
    }

    #[test]
    fn composition_matches_direct_evaluation() {
        // outer g(a,b) = a^2 b + sin(b), taken at (a0,b0) = (x0^2, x0+y0)
        let inner = Jet::variables(&[0.4, 0.9], 3);
        let a = &inner[0] * &inner[0];
        let b = &inner[0] + &inner[1];
        let outer_vars = Jet::variables(&[a.value(), b.value()], 3);
        let g_outer = &(&(&outer_vars[0] * &outer_vars[0]) * &outer_vars[1]) + &outer_vars[1].sin();
        let composed = g_outer.compose(&[a.clone(), b.clone()]);
        let direct = &(&(&a * &a) * &b) + &b.sin();
        for (x, y) in composed.partials().iter().zip(direct.partials()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixed_orders_truncate() {
        let a = Jet::variable(2, 4, 0, 1.0);
        let b = Jet::variable(2, 2, 1, 2.0);
        let c = &a * &b;
        assert_eq!(c.order(), 2);
    }
}
