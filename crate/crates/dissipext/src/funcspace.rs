//! Symbolic functions on (0,1) from a small closed dictionary.
//!
//! The dictionary covers complex powers of `x` and `1-x`, powers times an
//! exponential of a power, and one cumulative-integral shape,
//! `x^p * exp(-x^(1-a)) * int_0^x exp(2 t^(1-a)) dt`. Linear combinations of
//! these terms are closed under addition, complex scaling and
//! differentiation, and their endpoint behaviour is decidable by exponent
//! arithmetic. That is the whole point of the closed dictionary: boundary
//! limits and square-integrability are certified symbolically, never by
//! sampling.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{c64, C64};

/// Serialize a complex number as a two-element `[re, im]` array.
pub mod c2 {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

/// `Option<C64>` as an optional `[re, im]` array.
pub mod c2opt {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<C64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<C64>, D::Error> {
        Ok(<Option<[f64; 2]>>::deserialize(d)?.map(|[re, im]| C64::new(re, im)))
    }
}

/// `x^a` for real `x > 0` and complex `a`.
pub fn real_pow_c(x: f64, a: C64) -> C64 {
    if a.im == 0.0 {
        return C64::new(x.powf(a.re), 0.0);
    }
    let lx = x.ln();
    let r = (a.re * lx).exp();
    let th = a.im * lx;
    C64::new(r * th.cos(), r * th.sin())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuncError {
    #[error("no closed derivative rule for this term at order {order}")]
    UnsupportedOrder { order: u32 },
}

/// Tabulated antiderivative `I(x) = int_0^x exp(2 t^(1-alpha)) dt`.
///
/// Built once per term in the graded variable `x = t^m` so the integrand is
/// smooth; evaluation is cubic Hermite interpolation with the exact
/// derivative at the nodes.
#[derive(Debug)]
pub struct CumulTable {
    m: f64,
    values: Vec<f64>,
    slopes: Vec<f64>, // dI/dt at the nodes
}

const CUMUL_NODES: usize = 8192;

impl CumulTable {
    fn build(alpha: f64) -> Self {
        let p = 1.0 - alpha;
        let m = (4.0 / p).ceil().clamp(4.0, 64.0);
        // dI/dt for x = t^m
        let g = |t: f64| -> f64 {
            if t <= 0.0 {
                return 0.0;
            }
            (2.0 * t.powf(m * p)).exp() * m * t.powf(m - 1.0)
        };
        let n = CUMUL_NODES;
        let h = 1.0 / n as f64;
        // 7-point Gauss-Legendre on [-1,1]
        const GX: [f64; 7] = [
            -0.949107912342759,
            -0.741531185599394,
            -0.405845151377397,
            0.0,
            0.405845151377397,
            0.741531185599394,
            0.949107912342759,
        ];
        const GW: [f64; 7] = [
            0.129484966168870,
            0.279705391489277,
            0.381830050505119,
            0.417959183673469,
            0.381830050505119,
            0.279705391489277,
            0.129484966168870,
        ];
        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        values.push(0.0);
        slopes.push(g(0.0));
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            let mid = a + 0.5 * h;
            let mut piece = 0.0;
            for k in 0..7 {
                piece += GW[k] * g(mid + 0.5 * h * GX[k]);
            }
            acc += piece * 0.5 * h;
            values.push(acc);
            slopes.push(g(a + h));
        }
        CumulTable { m, values, slopes }
    }

    /// `I(x)` for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = x.powf(1.0 / self.m).min(1.0);
        let n = CUMUL_NODES;
        let ft = t * n as f64;
        let i = (ft as usize).min(n - 1);
        let h = 1.0 / n as f64;
        let u = ft - i as f64;
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * v0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * v1
            + (u3 - u2) * d1
    }
}

type CumulCache = Arc<OnceLock<CumulTable>>;

/// One dictionary shape. A term never carries its coefficient; see
/// [`FunctionExpr`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryTerm {
    /// `x^a`
    PowerLeft {
        #[serde(with = "c2")]
        a: C64,
    },
    /// `(1-x)^a`
    PowerRight {
        #[serde(with = "c2")]
        a: C64,
    },
    /// `x^power * exp(s * x^b)`, `b > 0`
    ExpPowerLeft {
        #[serde(with = "c2", default)]
        power: C64,
        #[serde(with = "c2")]
        s: C64,
        b: f64,
    },
    /// `x^power * exp(-x^(1-alpha)) * int_0^x exp(2 t^(1-alpha)) dt` with
    /// `alpha` in (0,1)
    CumulExp {
        alpha: f64,
        #[serde(with = "c2", default)]
        power: C64,
        #[serde(skip)]
        cache: CumulCache,
    },
}

impl PartialEq for DictionaryTerm {
    fn eq(&self, other: &Self) -> bool {
        self.merge_key() == other.merge_key()
    }
}

fn bits(x: f64) -> u64 {
    // normalize -0.0 so structural merging treats it as 0.0
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

fn cbits(z: C64) -> (u64, u64) {
    (bits(z.re), bits(z.im))
}

impl DictionaryTerm {
    pub fn power_left(a: C64) -> Self {
        DictionaryTerm::PowerLeft { a }
    }

    pub fn power_right(a: C64) -> Self {
        DictionaryTerm::PowerRight { a }
    }

    pub fn exp_power_left(power: C64, s: C64, b: f64) -> Self {
        assert!(b > 0.0, "exponent power must be positive");
        DictionaryTerm::ExpPowerLeft { power, s, b }
    }

    pub fn cumul_exp(alpha: f64, power: C64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
        DictionaryTerm::CumulExp {
            alpha,
            power,
            cache: Arc::new(OnceLock::new()),
        }
    }

    fn merge_key(&self) -> (u8, (u64, u64), (u64, u64), u64) {
        match self {
            DictionaryTerm::PowerLeft { a } => (0, cbits(*a), (0, 0), 0),
            DictionaryTerm::PowerRight { a } => (1, cbits(*a), (0, 0), 0),
            DictionaryTerm::ExpPowerLeft { power, s, b } => (2, cbits(*power), cbits(*s), bits(*b)),
            DictionaryTerm::CumulExp { alpha, power, .. } => {
                (3, cbits(*power), (0, 0), bits(*alpha))
            }
        }
    }

    fn table(&self) -> Option<&CumulTable> {
        match self {
            DictionaryTerm::CumulExp { alpha, cache, .. } => {
                Some(cache.get_or_init(|| CumulTable::build(*alpha)))
            }
            _ => None,
        }
    }

    /// Pointwise value at interior `x`.
    pub fn value(&self, x: f64) -> C64 {
        match self {
            DictionaryTerm::PowerLeft { a } => real_pow_c(x, *a),
            DictionaryTerm::PowerRight { a } => real_pow_c(1.0 - x, *a),
            DictionaryTerm::ExpPowerLeft { power, s, b } => {
                let e = (s * x.powf(*b)).exp();
                real_pow_c(x, *power) * e
            }
            DictionaryTerm::CumulExp { alpha, power, .. } => {
                let i = self.table().unwrap().eval(x);
                real_pow_c(x, *power) * (-x.powf(1.0 - alpha)).exp() * i
            }
        }
    }

    /// Leading exponent of the term at an endpoint: the term behaves like
    /// `c * d^e` in the boundary distance `d`.
    pub fn exponent_at(&self, end: Endpoint) -> C64 {
        match (self, end) {
            (DictionaryTerm::PowerLeft { a }, Endpoint::Zero) => *a,
            (DictionaryTerm::PowerLeft { .. }, Endpoint::One) => C64::default(),
            (DictionaryTerm::PowerRight { .. }, Endpoint::Zero) => C64::default(),
            (DictionaryTerm::PowerRight { a }, Endpoint::One) => *a,
            (DictionaryTerm::ExpPowerLeft { power, .. }, Endpoint::Zero) => *power,
            (DictionaryTerm::ExpPowerLeft { .. }, Endpoint::One) => C64::default(),
            // the inner integral vanishes linearly at 0
            (DictionaryTerm::CumulExp { power, .. }, Endpoint::Zero) => power + 1.0,
            (DictionaryTerm::CumulExp { .. }, Endpoint::One) => C64::default(),
        }
    }

    /// Limit value when the exponent at `end` is exactly zero.
    fn unit_value_at(&self, end: Endpoint) -> C64 {
        match (self, end) {
            (DictionaryTerm::PowerLeft { .. }, _) | (DictionaryTerm::PowerRight { .. }, _) => {
                c64(1.0, 0.0)
            }
            (DictionaryTerm::ExpPowerLeft { .. }, Endpoint::Zero) => c64(1.0, 0.0),
            (DictionaryTerm::ExpPowerLeft { s, .. }, Endpoint::One) => s.exp(),
            // exponent power+1 == 0 at the left end: x^{-1} I(x) -> I'(0) = 1
            (DictionaryTerm::CumulExp { .. }, Endpoint::Zero) => c64(1.0, 0.0),
            (DictionaryTerm::CumulExp { .. }, Endpoint::One) => {
                c64((-1.0f64).exp() * self.table().unwrap().eval(1.0), 0.0)
            }
        }
    }

    /// Exact derivative as a list of coefficient/term pairs.
    fn derivative_terms(&self) -> Vec<(C64, DictionaryTerm)> {
        let one = c64(1.0, 0.0);
        match self {
            DictionaryTerm::PowerLeft { a } => {
                if *a == C64::default() {
                    vec![]
                } else {
                    vec![(*a, DictionaryTerm::PowerLeft { a: a - one })]
                }
            }
            DictionaryTerm::PowerRight { a } => {
                if *a == C64::default() {
                    vec![]
                } else {
                    vec![(-a, DictionaryTerm::PowerRight { a: a - one })]
                }
            }
            DictionaryTerm::ExpPowerLeft { power, s, b } => {
                let mut out = Vec::new();
                if *power != C64::default() {
                    out.push((
                        *power,
                        DictionaryTerm::ExpPowerLeft {
                            power: power - one,
                            s: *s,
                            b: *b,
                        },
                    ));
                }
                out.push((
                    s * *b,
                    DictionaryTerm::ExpPowerLeft {
                        power: power + (*b - 1.0),
                        s: *s,
                        b: *b,
                    },
                ));
                out
            }
            DictionaryTerm::CumulExp { alpha, power, .. } => {
                let mut out = Vec::new();
                if *power != C64::default() {
                    out.push((*power, DictionaryTerm::cumul_exp(*alpha, power - one)));
                }
                out.push((
                    c64(-(1.0 - alpha), 0.0),
                    DictionaryTerm::cumul_exp(*alpha, power - alpha),
                ));
                out.push((
                    one,
                    DictionaryTerm::ExpPowerLeft {
                        power: *power,
                        s: one,
                        b: 1.0 - alpha,
                    },
                ));
                out
            }
        }
    }
}

/// Interval endpoint selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Zero,
    One,
}

impl Endpoint {
    pub fn coordinate(self) -> f64 {
        match self {
            Endpoint::Zero => 0.0,
            Endpoint::One => 1.0,
        }
    }
}

/// How an expression behaves when approaching an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// tends to 0
    Zero,
    /// finite nonzero limit
    FiniteLimit,
    /// no finite limit (blows up, or oscillates without decay)
    Divergent,
}

/// Result of the endpoint analysis of an expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointBehavior {
    pub endpoint: Endpoint,
    #[serde(with = "c2")]
    pub leading_exponent: C64,
    pub classification: Classification,
    /// the limit; 0 for `Zero`, absent for `Divergent`
    #[serde(with = "c2opt", default, skip_serializing_if = "Option::is_none")]
    pub value: Option<C64>,
}

/// A finite linear combination of dictionary terms.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct FunctionExpr {
    pub terms: Vec<ExprTerm>,
}

/// A coefficient attached to a dictionary term.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExprTerm {
    #[serde(with = "c2")]
    pub coef: C64,
    #[serde(flatten)]
    pub term: DictionaryTerm,
}

impl FunctionExpr {
    pub fn new(terms: Vec<(C64, DictionaryTerm)>) -> Self {
        let mut e = FunctionExpr {
            terms: terms
                .into_iter()
                .map(|(coef, term)| ExprTerm { coef, term })
                .collect(),
        };
        e.merge();
        e
    }

    /// `c * x^a`
    pub fn power_left(c: C64, a: C64) -> Self {
        Self::new(vec![(c, DictionaryTerm::power_left(a))])
    }

    /// `c * (1-x)^a`
    pub fn power_right(c: C64, a: C64) -> Self {
        Self::new(vec![(c, DictionaryTerm::power_right(a))])
    }

    /// the constant function `c`
    pub fn constant(c: C64) -> Self {
        Self::power_left(c, C64::default())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Collapse structurally identical terms and drop exact zeros.
    fn merge(&mut self) {
        self.terms
            .sort_by(|l, r| l.term.merge_key().cmp(&r.term.merge_key()));
        let mut merged: Vec<ExprTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.term == t.term => last.coef += t.coef,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != C64::default());
        self.terms = merged;
    }

    pub fn add(&self, other: &FunctionExpr) -> FunctionExpr {
        let terms: Vec<(C64, DictionaryTerm)> = self
            .terms
            .iter()
            .chain(other.terms.iter())
            .map(|t| (t.coef, t.term.clone()))
            .collect();
        FunctionExpr::new(terms)
    }

    pub fn scale(&self, c: C64) -> FunctionExpr {
        FunctionExpr::new(
            self.terms
                .iter()
                .map(|t| (c * t.coef, t.term.clone()))
                .collect(),
        )
    }

    /// Linear combination `sum_k coeffs[k] * exprs[k]`.
    pub fn combine(exprs: &[FunctionExpr], coeffs: &[C64]) -> FunctionExpr {
        assert_eq!(exprs.len(), coeffs.len());
        let mut acc = FunctionExpr::default();
        for (e, &c) in exprs.iter().zip(coeffs) {
            if c != C64::default() {
                acc = acc.add(&e.scale(c));
            }
        }
        acc
    }

    /// Pointwise evaluation at strictly interior `x`.
    pub fn evaluate(&self, x: f64) -> C64 {
        debug_assert!(x > 0.0 && x < 1.0, "evaluate requires interior x, got {x:e}");
        self.terms
            .iter()
            .fold(C64::default(), |acc, t| acc + t.coef * t.term.value(x))
    }

    /// Exact symbolic derivative of the given order.
    ///
    /// The dictionary is closed under differentiation, so this cannot fail
    /// for any term currently in it; the error type is kept for future
    /// shapes without a closed rule.
    pub fn derivative(&self, order: u32) -> Result<FunctionExpr, FuncError> {
        let mut cur = self.clone();
        for _ in 0..order {
            let mut next: Vec<(C64, DictionaryTerm)> = Vec::new();
            for t in &cur.terms {
                for (c, d) in t.term.derivative_terms() {
                    next.push((t.coef * c, d));
                }
            }
            cur = FunctionExpr::new(next);
        }
        Ok(cur)
    }

    /// Leading exponent of the expression at an endpoint (minimal real part
    /// over the merged terms). The zero expression reports +infinity.
    pub fn leading_exponent(&self, end: Endpoint) -> C64 {
        let mut best: Option<C64> = None;
        for t in &self.terms {
            let e = t.term.exponent_at(end);
            best = Some(match best {
                None => e,
                Some(b) if e.re < b.re => e,
                Some(b) => b,
            });
        }
        best.unwrap_or(c64(f64::INFINITY, 0.0))
    }

    /// Endpoint classification by exponent arithmetic.
    pub fn boundary_limit(&self, end: Endpoint) -> EndpointBehavior {
        let lead = self.leading_exponent(end);
        let (classification, value) = if self.terms.is_empty() || lead.re > 0.0 {
            (Classification::Zero, Some(C64::default()))
        } else if lead.re < 0.0 {
            (Classification::Divergent, None)
        } else {
            // minimal real part is zero: a finite limit exists only when
            // every borderline term is exactly constant-like (Im == 0)
            let oscillates = self
                .terms
                .iter()
                .map(|t| t.term.exponent_at(end))
                .any(|e| e.re == 0.0 && e.im != 0.0);
            if oscillates {
                (Classification::Divergent, None)
            } else {
                let v = self
                    .terms
                    .iter()
                    .filter(|t| t.term.exponent_at(end) == C64::default())
                    .fold(C64::default(), |acc, t| {
                        acc + t.coef * t.term.unit_value_at(end)
                    });
                if v == C64::default() {
                    (Classification::Zero, Some(C64::default()))
                } else {
                    (Classification::FiniteLimit, Some(v))
                }
            }
        };
        EndpointBehavior {
            endpoint: end,
            leading_exponent: lead,
            classification,
            value,
        }
    }

    /// Finite boundary value at an endpoint, if one exists.
    pub fn boundary_value(&self, end: Endpoint) -> Option<C64> {
        self.boundary_limit(end).value
    }

    /// Square integrability near an endpoint, by exponent arithmetic.
    pub fn is_l2_near(&self, end: Endpoint) -> bool {
        self.is_zero() || 2.0 * self.leading_exponent(end).re > -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn xpow(a: f64) -> FunctionExpr {
        FunctionExpr::power_left(c64(1.0, 0.0), c64(a, 0.0))
    }

    #[test]
    fn evaluate_square_root() {
        assert_abs_diff_eq!(xpow(0.5).evaluate(0.25).re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn evaluate_right_power_near_one() {
        let f = FunctionExpr::power_right(c64(1.0, 0.0), c64(0.25, 0.0));
        let v = f.evaluate(1.0 - 1e-4);
        assert_abs_diff_eq!(v.re, 1e-4f64.powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(v.re, 0.1, epsilon = 1e-9);
    }

    #[test]
    fn cumul_exp_matches_trapezoid_oracle() {
        // independent check of exp(-x^{1-a}) int_0^x exp(2 t^{1-a}) dt at
        // a=0.75, x=0.5: composite trapezoid on the graded substitution
        // t = u^4
        let alpha = 0.75;
        let x: f64 = 0.5;
        let hi = x.powf(0.25);
        let n = 1 << 20;
        let h = hi / n as f64;
        let g = |u: f64| (2.0 * u).exp() * 4.0 * u * u * u;
        let mut acc = 0.5 * (g(0.0) + g(hi));
        for i in 1..n {
            acc += g(i as f64 * h);
        }
        let oracle = acc * h * (-x.powf(0.25)).exp();

        let f = FunctionExpr::new(vec![(
            c64(1.0, 0.0),
            DictionaryTerm::cumul_exp(alpha, C64::default()),
        )]);
        let got = f.evaluate(x).re;
        assert_abs_diff_eq!(got / oracle, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn derivative_power_rule() {
        let gamma = 0.25;
        let f = xpow(1.0 + gamma);
        let d = f.derivative(1).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_abs_diff_eq!(d.terms[0].coef.re, 1.0 + gamma, epsilon = 1e-15);
        let x = 0.37;
        assert_abs_diff_eq!(
            d.evaluate(x).re,
            (1.0 + gamma) * x.powf(gamma),
            epsilon = 1e-13
        );
    }

    #[test]
    fn derivative_right_powers() {
        let g = 0.25;
        let f = FunctionExpr::new(vec![
            (c64(1.0, 0.0), DictionaryTerm::power_right(c64(g, 0.0))),
            (c64(-1.0, 0.0), DictionaryTerm::power_right(c64(1.0 - g, 0.0))),
        ]);
        let d = f.derivative(1).unwrap();
        let x: f64 = 0.6;
        let expect = -g * (1.0 - x).powf(g - 1.0) + (1.0 - g) * (1.0 - x).powf(-g);
        assert_abs_diff_eq!(d.evaluate(x).re, expect, epsilon = 1e-12);
    }

    #[test]
    fn cumul_exp_derivative_against_central_differences() {
        let alpha = 0.6;
        let f = FunctionExpr::new(vec![(
            c64(1.0, 0.0),
            DictionaryTerm::cumul_exp(alpha, C64::default()),
        )]);
        let d = f.derivative(1).unwrap();
        for &x in &[0.3, 0.5, 0.7] {
            let h = 1e-5;
            let fd = (f.evaluate(x + h).re - f.evaluate(x - h).re) / (2.0 * h);
            assert_abs_diff_eq!(d.evaluate(x).re, fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn boundary_negative_power_divergent() {
        let b = xpow(-0.25).boundary_limit(Endpoint::Zero);
        assert_eq!(b.classification, Classification::Divergent);
        assert!(b.value.is_none());
    }

    #[test]
    fn boundary_difference_of_right_powers_is_zero() {
        let g = 0.3;
        let f = FunctionExpr::new(vec![
            (c64(1.0, 0.0), DictionaryTerm::power_right(c64(g, 0.0))),
            (c64(-1.0, 0.0), DictionaryTerm::power_right(c64(1.0 - g, 0.0))),
        ]);
        let b = f.boundary_limit(Endpoint::One);
        assert_eq!(b.classification, Classification::Zero);
    }

    #[test]
    fn boundary_zero_decays_monotonically() {
        let g = 0.3;
        let f = FunctionExpr::new(vec![
            (c64(1.0, 0.0), DictionaryTerm::power_right(c64(g, 0.0))),
            (c64(-1.0, 0.0), DictionaryTerm::power_right(c64(1.0 - g, 0.0))),
        ]);
        let mut prev = f64::INFINITY;
        for &d in &[1e-3, 1e-5, 1e-7] {
            let m = f.evaluate(1.0 - d).norm();
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn linearity_of_evaluate() {
        let f = xpow(0.7);
        let g = FunctionExpr::power_right(c64(1.0, 0.0), c64(0.4, 0.0));
        let a = c64(1.3, -0.2);
        let b = c64(-0.5, 0.9);
        for &x in &[0.11, 0.43, 0.77, 0.95] {
            let lhs = f.scale(a).add(&g.scale(b)).evaluate(x);
            let rhs = a * f.evaluate(x) + b * g.evaluate(x);
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn derivative_consistency_second_order() {
        // central differences converge at observed order >= 2 on interior
        // points for every dictionary kind
        let exprs = vec![
            xpow(1.5),
            FunctionExpr::power_right(c64(1.0, 0.0), c64(0.8, 0.0)),
            FunctionExpr::new(vec![(
                c64(1.0, 0.0),
                DictionaryTerm::exp_power_left(C64::default(), c64(-1.0, 0.0), 0.25),
            )]),
            FunctionExpr::new(vec![(
                c64(1.0, 0.0),
                DictionaryTerm::cumul_exp(0.75, C64::default()),
            )]),
        ];
        for f in exprs {
            let d = f.derivative(1).unwrap();
            let x = 0.5;
            let err = |h: f64| {
                let fd = (f.evaluate(x + h) - f.evaluate(x - h)) / (2.0 * h);
                (fd - d.evaluate(x)).norm()
            };
            let (e1, e2) = (err(1e-3), err(1e-4));
            let order = (e1 / e2).log10();
            assert!(order > 1.8, "observed order {order} too low");
        }
    }

    #[test]
    fn merge_cancels_identical_terms() {
        let f = xpow(0.5).add(&xpow(0.5).scale(c64(-1.0, 0.0)));
        assert!(f.is_zero());
    }

    #[test]
    fn serialization_round_trip() {
        let f = FunctionExpr::new(vec![
            (c64(1.0, 2.0), DictionaryTerm::power_left(c64(0.5, -1.0))),
            (c64(-0.5, 0.0), DictionaryTerm::cumul_exp(0.75, c64(1.0, 0.0))),
            (
                c64(0.0, 1.0),
                DictionaryTerm::exp_power_left(C64::default(), c64(-1.0, 0.0), 0.25),
            ),
        ]);
        let s = serde_json::to_string(&f).unwrap();
        let back: FunctionExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let x = 0.42;
        assert!((back.evaluate(x) - f.evaluate(x)).norm() < 1e-14);
    }
}
