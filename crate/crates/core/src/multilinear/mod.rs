//! Multilinear symbols on the hyperplanes `xi_1 + ... + xi_k = 0` and the
//! functionals `Lambda_k(M; u)` they define.
//!
//! Slots alternate between `u` (odd, 1-based) and `conj(u)` (even). A
//! symbol is evaluated on physical frequencies; the engine feeds it lattice
//! tuples already known to sum to zero.

pub mod engine;
pub mod table;

use std::sync::Arc;

use num_complex::Complex64;

use crate::grid::Freq;

pub use engine::{
    derivative_identity_residual, eval_lambda2, eval_lambda4_direct, eval_lambda4_separable,
    eval_lambda6_substitution, lambda4_form, pairing4, Lambda6Mode, QuadKernel, SymbolKernel,
};
pub use table::{dump_symbol_csv, TabulatedSymbol};

/// Which tuples may carry a nonzero symbol value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportHint {
    Everywhere,
    /// Zero whenever every `|xi_j| <= N`.
    RequiresMaxAbove(f64),
}

/// Single-frequency factor of a product symbol.
pub type Factor = Arc<dyn Fn(Freq) -> Complex64 + Send + Sync>;

pub trait Symbol: Send + Sync {
    fn arity(&self) -> usize;

    /// Value at a tuple of `arity()` frequencies summing to zero.
    fn eval(&self, xi: &[Freq]) -> Complex64;

    fn support_hint(&self) -> SupportHint {
        SupportHint::Everywhere
    }

    /// Factors `f_j` with `M(xi) = prod_j f_j(xi_j)`, when the symbol has that form.
    fn factors(&self) -> Option<Vec<Factor>> {
        None
    }
}

impl<S: Symbol + ?Sized> Symbol for &S {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        (**self).eval(xi)
    }
    fn support_hint(&self) -> SupportHint {
        (**self).support_hint()
    }
    fn factors(&self) -> Option<Vec<Factor>> {
        (**self).factors()
    }
}

impl<S: Symbol + ?Sized> Symbol for Arc<S> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        (**self).eval(xi)
    }
    fn support_hint(&self) -> SupportHint {
        (**self).support_hint()
    }
    fn factors(&self) -> Option<Vec<Factor>> {
        (**self).factors()
    }
}

#[inline]
pub fn norm_sqr(xi: Freq) -> f64 {
    xi[0] * xi[0] + xi[1] * xi[1]
}

#[inline]
pub fn add(a: Freq, b: Freq) -> Freq {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn dot(a: Freq, b: Freq) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `-|xi_1|^2 + |xi_2|^2 - ... + |xi_k|^2`.
pub fn alpha_k(xi: &[Freq]) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(j, &x)| {
            if j % 2 == 0 {
                -norm_sqr(x)
            } else {
                norm_sqr(x)
            }
        })
        .sum()
}

/// A constant symbol of any arity.
#[derive(Clone, Copy, Debug)]
pub struct Constant {
    pub arity: usize,
    pub value: Complex64,
}

impl Symbol for Constant {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval(&self, _xi: &[Freq]) -> Complex64 {
        self.value
    }
    fn factors(&self) -> Option<Vec<Factor>> {
        let mut fs: Vec<Factor> = vec![Arc::new(|_| Complex64::new(1.0, 0.0)); self.arity];
        let v = self.value;
        fs[0] = Arc::new(move |_| v);
        Some(fs)
    }
}

/// A symbol given by a closure.
pub struct FnSymbol<F> {
    arity: usize,
    f: F,
    hint: SupportHint,
}

impl<F: Fn(&[Freq]) -> Complex64 + Send + Sync> FnSymbol<F> {
    pub fn new(arity: usize, f: F) -> Self {
        Self {
            arity,
            f,
            hint: SupportHint::Everywhere,
        }
    }

    pub fn with_hint(mut self, hint: SupportHint) -> Self {
        self.hint = hint;
        self
    }
}

impl<F: Fn(&[Freq]) -> Complex64 + Send + Sync> Symbol for FnSymbol<F> {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        (self.f)(xi)
    }
    fn support_hint(&self) -> SupportHint {
        self.hint
    }
}

/// A product symbol `prod_j f_j(xi_j)`.
#[derive(Clone)]
pub struct Product {
    factors: Vec<Factor>,
}

impl Product {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }
}

impl Symbol for Product {
    fn arity(&self) -> usize {
        self.factors.len()
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        self.factors.iter().zip(xi).map(|(f, &x)| f(x)).product()
    }
    fn factors(&self) -> Option<Vec<Factor>> {
        Some(self.factors.clone())
    }
}

/// `c * M`.
pub struct Scaled<S> {
    pub factor: Complex64,
    pub inner: S,
}

impl<S: Symbol> Symbol for Scaled<S> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        self.factor * self.inner.eval(xi)
    }
    fn support_hint(&self) -> SupportHint {
        self.inner.support_hint()
    }
    fn factors(&self) -> Option<Vec<Factor>> {
        let mut fs = self.inner.factors()?;
        let c = self.factor;
        let first = fs[0].clone();
        fs[0] = Arc::new(move |x| c * first(x));
        Some(fs)
    }
}

/// `i M alpha_k`, the linear part of the time derivative of `Lambda_k(M)`.
pub struct TimesIAlpha<S>(pub S);

impl<S: Symbol> Symbol for TimesIAlpha<S> {
    fn arity(&self) -> usize {
        self.0.arity()
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        Complex64::new(0.0, alpha_k(xi)) * self.0.eval(xi)
    }
    fn support_hint(&self) -> SupportHint {
        self.0.support_hint()
    }
}

/// The extension `X(M)(xi_1, ..., xi_{k+2}) = M(xi_1 + xi_2 + xi_3, xi_4, ..., xi_{k+2})`.
pub struct Extended<S>(pub S);

impl<S: Symbol> Symbol for Extended<S> {
    fn arity(&self) -> usize {
        self.0.arity() + 2
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        let mut merged = Vec::with_capacity(xi.len() - 2);
        merged.push(add(add(xi[0], xi[1]), xi[2]));
        merged.extend_from_slice(&xi[3..]);
        self.0.eval(&merged)
    }
}

/// Average of `M` over the group generated by permutations of the odd slots,
/// permutations of the even slots, and the conjugating swap
/// `M(xi_1, xi_2, ...) -> conj M(xi_2, xi_1, ..., xi_k, xi_{k-1})`.
pub struct Symmetrized<S> {
    inner: S,
    perms: Vec<Vec<usize>>,
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

impl<S: Symbol> Symmetrized<S> {
    pub fn new(inner: S) -> Self {
        let k = inner.arity();
        assert!(k % 2 == 0 && k >= 2, "symmetrization needs an even arity");
        let odd: Vec<usize> = (0..k).step_by(2).collect();
        let even: Vec<usize> = (1..k).step_by(2).collect();
        let mut perms = Vec::new();
        for po in permutations(&odd) {
            for pe in permutations(&even) {
                let mut perm = vec![0; k];
                for (slot, (&o, &e)) in po.iter().zip(&pe).enumerate() {
                    perm[2 * slot] = o;
                    perm[2 * slot + 1] = e;
                }
                perms.push(perm);
            }
        }
        Self { inner, perms }
    }

    /// `|G_k| = (k/2)!^2 * 2`.
    pub fn group_order(&self) -> usize {
        2 * self.perms.len()
    }
}

impl<S: Symbol> Symbol for Symmetrized<S> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn eval(&self, xi: &[Freq]) -> Complex64 {
        let k = xi.len();
        let mut buf = vec![[0.0; 2]; k];
        let mut swapped = vec![[0.0; 2]; k];
        let mut total = Complex64::new(0.0, 0.0);
        for perm in &self.perms {
            for (j, &p) in perm.iter().enumerate() {
                buf[j] = xi[p];
            }
            total += self.inner.eval(&buf);
            for pair in 0..k / 2 {
                swapped[2 * pair] = buf[2 * pair + 1];
                swapped[2 * pair + 1] = buf[2 * pair];
            }
            total += self.inner.eval(&swapped).conj();
        }
        total / self.group_order() as f64
    }

    fn support_hint(&self) -> SupportHint {
        // Max over slots is permutation invariant.
        self.inner.support_hint()
    }
}
