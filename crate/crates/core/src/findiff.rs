//! Mixed finite differences in the amplitudes ε₁,…,ε_m.
//!
//! D^m u = (1/(ε₁⋯ε_m)) Σ_{σ∈{0,1}^m} (−1)^{|σ|+m} u(σ₁ε₁,…,σ_mε_m).
//! Vertices are visited in the fixed order σ = 0,1,…,2^m−1 (bit j is σ_j) so the
//! result does not depend on how the evaluations were scheduled.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, SpaceTimeField};

/// Values the stencil can combine: anything exposing its components as a flat slice.
pub trait LinearValue: Sized {
    fn components(&self) -> &[f64];
    /// Same shape as `self`, new components.
    fn rebuild(&self, components: Vec<f64>) -> Self;
}

impl LinearValue for f64 {
    fn components(&self) -> &[f64] {
        std::slice::from_ref(self)
    }
    fn rebuild(&self, components: Vec<f64>) -> Self {
        components[0]
    }
}

impl LinearValue for Vec<f64> {
    fn components(&self) -> &[f64] {
        self
    }
    fn rebuild(&self, components: Vec<f64>) -> Self {
        components
    }
}

impl LinearValue for BoundarySignal {
    fn components(&self) -> &[f64] {
        self.values()
    }
    fn rebuild(&self, components: Vec<f64>) -> Self {
        BoundarySignal::from_raw(self.grid(), self.role(), components)
    }
}

impl LinearValue for SpaceTimeField {
    fn components(&self) -> &[f64] {
        self.values()
    }
    fn rebuild(&self, components: Vec<f64>) -> Self {
        SpaceTimeField::from_raw(self.grid(), self.role(), components)
    }
}

impl<T: LinearValue> LinearValue for Arc<T> {
    fn components(&self) -> &[f64] {
        self.as_ref().components()
    }
    fn rebuild(&self, components: Vec<f64>) -> Self {
        Arc::new(self.as_ref().rebuild(components))
    }
}

/// Amplitude box ε₁,…,ε_m.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeStencil {
    eps: Vec<f64>,
}

impl AmplitudeStencil {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() || eps.len() > 16 {
            return Err(Error::InvalidParameter(format!("stencil order must be in 1..=16, got {}", eps.len())));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter(format!("amplitudes must be positive and finite, got {e}")));
        }
        Ok(AmplitudeStencil { eps })
    }

    /// m equal amplitudes.
    pub fn uniform(m: usize, eps: f64) -> Result<Self> {
        Self::new(vec![eps; m])
    }

    pub fn m(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn vertex_count(&self) -> usize {
        1 << self.m()
    }

    /// σ as bits for vertex index k.
    pub fn sigma(&self, k: usize) -> Vec<u8> {
        (0..self.m()).map(|j| ((k >> j) & 1) as u8).collect()
    }

    /// Amplitudes (σ₁ε₁,…,σ_mε_m) of vertex k.
    pub fn amplitudes(&self, k: usize) -> Vec<f64> {
        self.eps.iter().enumerate().map(|(j, e)| if (k >> j) & 1 == 1 { *e } else { 0.0 }).collect()
    }

    /// (−1)^{|σ|+m}.
    pub fn sign(&self, k: usize) -> f64 {
        if (k.count_ones() as usize + self.m()) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn wrap(&self, k: usize, e: Error) -> Error {
        Error::EvaluatorFailure { sigma: self.sigma(k), source: Box::new(e) }
    }

    /// Signed, compensated combination of the vertex values (in σ order) over ε₁⋯ε_m.
    pub fn combine<V: LinearValue>(&self, values: &[V]) -> Result<V> {
        if values.len() != self.vertex_count() {
            return Err(Error::SizeMismatch { expected: self.vertex_count(), got: values.len() });
        }
        let n = values[0].components().len();
        let mut acc = vec![Neumaier::default(); n];
        for (k, v) in values.iter().enumerate() {
            let c = v.components();
            if c.len() != n {
                return Err(Error::ShapeMismatch(format!("vertex {k} has {} components, expected {n}", c.len())));
            }
            let s = self.sign(k);
            for (a, x) in acc.iter_mut().zip(c) {
                a.add(s * x);
            }
        }
        let scale: f64 = self.eps.iter().product();
        Ok(values[0].rebuild(acc.into_iter().map(|a| a.total() / scale).collect()))
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }
    fn total(self) -> f64 {
        self.sum + self.c
    }
}

/// Sequential mixed difference: exactly 2^m evaluator calls.
pub fn mixed_difference<V: LinearValue>(
    st: &AmplitudeStencil,
    mut eval: impl FnMut(&[f64]) -> Result<V>,
) -> Result<V> {
    let mut values = Vec::with_capacity(st.vertex_count());
    for k in 0..st.vertex_count() {
        values.push(eval(&st.amplitudes(k)).map_err(|e| st.wrap(k, e))?);
    }
    st.combine(&values)
}

/// Same result as `mixed_difference`, with the vertices evaluated concurrently.
pub fn mixed_difference_par<V: LinearValue + Send>(
    st: &AmplitudeStencil,
    eval: impl Fn(&[f64]) -> Result<V> + Sync,
) -> Result<V> {
    let values = (0..st.vertex_count())
        .into_par_iter()
        .map(|k| eval(&st.amplitudes(k)).map_err(|e| st.wrap(k, e)))
        .collect::<Result<Vec<V>>>()?;
    st.combine(&values)
}

/// Memo of evaluator results keyed by the exact amplitude tuple.
///
/// Keys carry no packet identity, so use one cache per packet set. Repeated stencils on
/// the same packets (schedules that revisit an ε, closure checks) then reuse forward solves.
pub struct VertexCache<V> {
    map: Mutex<HashMap<Vec<u64>, Arc<V>>>,
}

impl<V> Default for VertexCache<V> {
    fn default() -> Self {
        VertexCache { map: Mutex::new(HashMap::new()) }
    }
}

impl<V> VertexCache<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Returns the cached value or computes it. Concurrent misses on the same key may both
    /// compute; the first stored result wins, so readers always see one value per key.
    pub fn get_or_compute(&self, amplitudes: &[f64], f: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        let key: Vec<u64> = amplitudes.iter().map(|a| a.to_bits()).collect();
        if let Some(v) = self.map.lock().expect("cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(f()?);
        let mut map = self.map.lock().expect("cache poisoned");
        Ok(map.entry(key).or_insert(v).clone())
    }
}

// Double-double arithmetic for the exact combinatorial oracle.

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd { hi: p, lo: a.mul_add(b, -p) }
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let s = two_sum(s.hi, s.lo + t.hi);
        two_sum(s.hi, s.lo + t.lo)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        two_sum(p.hi, p.lo + (self.hi * o.lo + self.lo * o.hi))
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

/// I(x) = Σ_σ (−1)^{|σ|+m} (σ·x)^m by direct enumeration, in double-double precision.
/// Equals m!·x₁⋯x_m.
pub fn multinomial_identity(m: usize, x: &[f64]) -> Result<f64> {
    if x.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: x.len() });
    }
    if m == 0 || m > 16 {
        return Err(Error::InvalidParameter(format!("m must be in 1..=16, got {m}")));
    }
    let mut total = Dd::ZERO;
    for k in 0..1usize << m {
        let mut dot = Dd::ZERO;
        for (j, xj) in x.iter().enumerate() {
            if (k >> j) & 1 == 1 {
                dot = dot.add(Dd { hi: *xj, lo: 0.0 });
            }
        }
        let mut p = Dd { hi: 1.0, lo: 0.0 };
        for _ in 0..m {
            p = p.mul(dot);
        }
        if (k.count_ones() as usize + m) % 2 == 1 {
            p = p.neg();
        }
        total = total.add(p);
    }
    Ok(total.hi + total.lo)
}

pub fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bilinear_and_square() {
        let st = AmplitudeStencil::new(vec![0.3, 0.7]).unwrap();
        let r: f64 = mixed_difference(&st, |a| Ok(a[0] * a[1])).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let r: f64 = mixed_difference(&st, |a| Ok((a[0] + a[1]).powi(2))).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_table() {
        // Brute force over σ ∈ {0,1}³ of (σ·(1,2,3))³ with unit amplitudes.
        let st = AmplitudeStencil::uniform(3, 1.0).unwrap();
        let r: f64 = mixed_difference(&st, |a| Ok((a[0] + 2.0 * a[1] + 3.0 * a[2]).powi(3))).unwrap();
        let mut brute = 0.0;
        for k in 0..8usize {
            let s = [(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64];
            let sign = if (k.count_ones() + 3) % 2 == 0 { 1.0 } else { -1.0 };
            brute += sign * (s[0] + 2.0 * s[1] + 3.0 * s[2]).powi(3);
        }
        assert_eq!(r, 36.0);
        assert_eq!(brute, 36.0);
    }

    #[test]
    fn exactly_two_to_the_m_calls_and_failure_reports_sigma() {
        let st = AmplitudeStencil::uniform(4, 0.1).unwrap();
        let mut calls = 0;
        let _: f64 = mixed_difference(&st, |_| {
            calls += 1;
            Ok(0.0)
        })
        .unwrap();
        assert_eq!(calls, 16);
        let err = mixed_difference::<f64>(&st, |a| {
            if a[1] > 0.0 && a[3] > 0.0 {
                Err(Error::NonContraction("boom".into()))
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        match err {
            Error::EvaluatorFailure { sigma, .. } => assert_eq!(sigma, vec![0, 1, 0, 1]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let st = AmplitudeStencil::new(vec![0.01, 0.02, 0.015]).unwrap();
        let f = |a: &[f64]| Ok(vec![(a[0] + a[1] + a[2]).powi(3).sin(), (a[0] - a[2]).exp() * a[1]]);
        let s: Vec<f64> = mixed_difference(&st, f).unwrap();
        let p: Vec<f64> = mixed_difference_par(&st, f).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn multinomial_examples() {
        assert_eq!(multinomial_identity(2, &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(multinomial_identity(3, &[0.0, 2.0, 5.0]).unwrap(), 0.0);
        let x = [0.3, -1.7, 2.2, 0.9];
        let want = 24.0 * x.iter().product::<f64>();
        assert!((multinomial_identity(4, &x).unwrap() - want).abs() < 1e-14 * want.abs());
        assert!(matches!(multinomial_identity(3, &[1.0, 2.0]), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn cache_reuses_vertices() {
        let cache: VertexCache<f64> = VertexCache::new();
        let st = AmplitudeStencil::uniform(2, 0.5).unwrap();
        let mut calls = 0;
        for _ in 0..3 {
            let _: Arc<f64> = mixed_difference(&st, |a| {
                cache.get_or_compute(a, || {
                    calls += 1;
                    Ok(a[0] * a[1])
                })
            })
            .unwrap();
        }
        assert_eq!(calls, 4);
        assert_eq!(cache.len(), 4);
    }

    proptest! {
        #[test]
        fn multilinear_top_term_is_eps_independent(
            c in prop::collection::vec(-3.0f64..3.0, 3),
            eps in prop::collection::vec(1e-3f64..1.0, 3),
        ) {
            // Degree-3 polynomial: c₀a₁a₂a₃ plus lower-order and non-mixed terms that the
            // stencil annihilates.
            let st = AmplitudeStencil::new(eps).unwrap();
            let r: f64 = mixed_difference(&st, |a| {
                Ok(c[0] * a[0] * a[1] * a[2] + c[1] * a[0] * a[1] + c[2] * a[2].powi(3) + 1.0)
            }).unwrap();
            // Vertex values are O(10); round-off is amplified by 1/(ε₁ε₂ε₃).
            let tol = 1e-13 * 10.0 / st.eps().iter().product::<f64>();
            prop_assert!((r - c[0]).abs() <= tol, "{} vs {}", r, c[0]);
        }

        #[test]
        fn permutation_invariant(
            eps in prop::collection::vec(1e-2f64..1.0, 3),
            w in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let f = |a: &[f64], w: &[f64]| Ok((w[0] * a[0] + w[1] * a[1] + w[2] * a[2]).powi(3) + (a[0] * a[1] * a[2]).sin());
            let st = AmplitudeStencil::new(eps.clone()).unwrap();
            let r1: f64 = mixed_difference(&st, |a| f(a, &w)).unwrap();
            let perm = [2usize, 0, 1];
            let st2 = AmplitudeStencil::new(perm.iter().map(|&p| eps[p]).collect()).unwrap();
            let w2: Vec<f64> = perm.iter().map(|&p| w[p]).collect();
            let r2: f64 = mixed_difference(&st2, |a| f(a, &w2)).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-13 * 20.0 / st.eps().iter().product::<f64>());
        }

        #[test]
        fn multinomial_matches_product(m in 2usize..=5, x in prop::collection::vec(-2.0f64..2.0, 5)) {
            let x = &x[..m];
            let want = factorial(m) * x.iter().product::<f64>();
            let got = multinomial_identity(m, x).unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * want.abs() + 1e-300);
        }
    }
}
