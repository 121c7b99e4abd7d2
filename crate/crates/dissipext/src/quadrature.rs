//! Numerical integration on (0,1) with algebraic endpoint singularities.
//!
//! Divergence is decided symbolically from the integrand's endpoint
//! exponents, never numerically: adaptive quadrature happily returns finite
//! junk on a divergent integrand, so an integral is only attempted once its
//! exponents certify absolute convergence. Endpoint singularities are then
//! removed by the power substitution `x = t^k` (`k` the smallest integer
//! making the transformed integrand C^1) before an adaptive Gauss-Kronrod
//! 7-15 rule is applied.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::funcspace::{Endpoint, FunctionExpr};
use crate::C64;

/// Tolerances for every integral; plumbed through all callers, no global
/// state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// maximal bisection depth per panel
    pub max_refinements: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_refinements: 60,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("integral certified divergent at x={endpoint}: leading exponent {exponent} <= -1")]
    DivergentIntegral { endpoint: f64, exponent: f64 },
    #[error("refinement limit reached: error estimate {error:.3e} exceeds tolerance {tol:.3e}")]
    ToleranceNotMet { error: f64, tol: f64 },
    #[error("basis is numerically degenerate (Gram matrix singular)")]
    DegenerateBasis,
}

/// One factor of a product integrand: a pointwise evaluator plus the
/// symbolic metadata (support, endpoint exponents, interior kinks) needed to
/// certify convergence and choose substitutions.
pub struct Factor {
    pub eval: Box<dyn Fn(f64) -> C64 + Send + Sync>,
    pub support: (f64, f64),
    /// leading exponent at x=0; meaningful when the support touches 0
    pub exp_zero: C64,
    /// leading exponent at x=1 (in powers of 1-x)
    pub exp_one: C64,
    pub knots: Vec<f64>,
}

impl Factor {
    /// Factor from a dictionary expression, optionally conjugated.
    pub fn from_expr(expr: FunctionExpr, conj: bool) -> Factor {
        let e0 = expr.leading_exponent(Endpoint::Zero);
        let e1 = expr.leading_exponent(Endpoint::One);
        let (exp_zero, exp_one) = if conj { (e0.conj(), e1.conj()) } else { (e0, e1) };
        Factor {
            eval: Box::new(move |x| {
                if x <= 0.0 || x >= 1.0 {
                    // panels shrink onto a boundary only where the certified
                    // integrand vanishes in measure
                    return C64::default();
                }
                let v = expr.evaluate(x);
                if conj {
                    v.conj()
                } else {
                    v
                }
            }),
            support: (0.0, 1.0),
            exp_zero,
            exp_one,
            knots: Vec::new(),
        }
    }

    /// Factor from the `order`-th derivative of an expression.
    pub fn from_expr_deriv(expr: &FunctionExpr, order: u32, conj: bool) -> Factor {
        let d = expr
            .derivative(order)
            .expect("dictionary is closed under differentiation");
        Factor::from_expr(d, conj)
    }
}

/// Integrand over a subinterval of [0,1] with endpoint exponent
/// certificates.
pub struct IntegrandSpec<'a> {
    pub eval: &'a dyn Fn(f64) -> C64,
    pub lo: f64,
    pub hi: f64,
    /// leading exponent at 0 (used when `lo == 0`)
    pub exp_zero: C64,
    /// leading exponent at 1, in powers of 1-x (used when `hi == 1`)
    pub exp_one: C64,
    pub breakpoints: Vec<f64>,
}

impl<'a> IntegrandSpec<'a> {
    /// Absolute convergence by exponent arithmetic.
    pub fn certify(&self) -> Result<(), QuadratureError> {
        if self.lo == 0.0 && self.exp_zero.re <= -1.0 {
            return Err(QuadratureError::DivergentIntegral {
                endpoint: 0.0,
                exponent: self.exp_zero.re,
            });
        }
        if self.hi == 1.0 && self.exp_one.re <= -1.0 {
            return Err(QuadratureError::DivergentIntegral {
                endpoint: 1.0,
                exponent: self.exp_one.re,
            });
        }
        Ok(())
    }
}

// Gauss-Kronrod 7-15 abscissae and weights on [-1,1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One Kronrod panel: returns (K15 value, |K15 - G7|).
fn gk15(f: &dyn Fn(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).norm())
}

struct Adapt<'a> {
    f: &'a dyn Fn(f64) -> C64,
    value: C64,
    err: f64,
    panels: usize,
}

impl<'a> Adapt<'a> {
    fn go(&mut self, a: f64, b: f64, tol: f64, depth: u32) {
        if !(b > a) {
            return;
        }
        let (v, e) = gk15(self.f, a, b);
        self.panels += 1;
        if e <= tol || depth == 0 || self.panels > 400_000 {
            self.value += v;
            self.err += e;
            return;
        }
        let m = 0.5 * (a + b);
        self.go(a, m, 0.5 * tol, depth - 1);
        self.go(m, b, 0.5 * tol, depth - 1);
    }
}

fn adaptive(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64, depth: u32) -> (C64, f64) {
    let mut st = Adapt {
        f,
        value: C64::default(),
        err: 0.0,
        panels: 0,
    };
    st.go(a, b, tol, depth);
    (st.value, st.err)
}

/// Smallest integer k such that the substitution x = t^k makes an integrand
/// with leading exponent `e` C^1 at the endpoint.
fn substitution_order(e: C64) -> u32 {
    if e == C64::default() || e.re >= 1.0 {
        return 1;
    }
    // transformed exponent is k(e+1)-1; ask for >= 1
    let k = (2.0 / (e.re + 1.0)).ceil();
    (k as u32).clamp(1, 64)
}

enum Piece {
    Plain(f64, f64),
    /// x = t^k over [0, c]
    SubstLeft(f64, u32),
    /// 1-x = u^k over [c, 1]
    SubstRight(f64, u32),
}

/// Integrate an integrand over its range.
///
/// The first and last pieces receive the endpoint power substitution when
/// the range touches 0 or 1; interior pieces between breakpoints are handled
/// directly.
pub fn integrate(spec: &IntegrandSpec, cfg: &QuadratureConfig) -> Result<C64, QuadratureError> {
    spec.certify()?;
    if spec.hi - spec.lo <= 0.0 {
        return Ok(C64::default());
    }

    let mut cuts: Vec<f64> = vec![spec.lo];
    for &b in &spec.breakpoints {
        if b > spec.lo + 1e-300 && b < spec.hi - 1e-300 {
            cuts.push(b);
        }
    }
    // a piece may receive at most one endpoint substitution, so single-piece
    // ranges covering both endpoints are split in the middle
    let mid = 0.5 * (spec.lo + spec.hi);
    if spec.lo == 0.0 && spec.hi == 1.0 {
        cuts.push(mid);
    }
    cuts.push(spec.hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut pieces: Vec<Piece> = Vec::new();
    let n = cuts.len();
    for i in 0..n - 1 {
        let (a, b) = (cuts[i], cuts[i + 1]);
        if i == 0 && a == 0.0 {
            let k = substitution_order(spec.exp_zero);
            if k > 1 {
                pieces.push(Piece::SubstLeft(b, k));
                continue;
            }
        }
        if i == n - 2 && b == 1.0 {
            let k = substitution_order(spec.exp_one);
            if k > 1 {
                pieces.push(Piece::SubstRight(a, k));
                continue;
            }
        }
        pieces.push(Piece::Plain(a, b));
    }

    let f = spec.eval;
    let run = |piece: &Piece, tol: f64, depth: u32| -> (C64, f64) {
        match piece {
            Piece::Plain(a, b) => adaptive(&f, *a, *b, tol, depth),
            Piece::SubstLeft(c, k) => {
                let kk = *k as f64;
                let ki = *k as i32;
                // t^k can underflow to 0 at tiny nodes; the Jacobian factor
                // vanishes there, so the contribution is 0
                let g = move |t: f64| {
                    let x = t.powi(ki);
                    if x <= 0.0 {
                        return C64::default();
                    }
                    f(x) * kk * t.powf(kk - 1.0)
                };
                adaptive(&g, 0.0, c.powf(1.0 / kk), tol, depth)
            }
            Piece::SubstRight(c, k) => {
                let kk = *k as f64;
                let ki = *k as i32;
                let g = move |u: f64| {
                    let x = 1.0 - u.powi(ki);
                    if x >= 1.0 || x <= 0.0 {
                        return C64::default();
                    }
                    f(x) * kk * u.powf(kk - 1.0)
                };
                adaptive(&g, 0.0, (1.0 - c).powf(1.0 / kk), tol, depth)
            }
        }
    };

    // coarse magnitude pass fixes the absolute target for the fine pass
    let mut coarse = 0.0;
    for p in &pieces {
        let (v, _) = run(p, f64::INFINITY, 0);
        coarse += v.norm();
    }
    let target = cfg.abs_tol.max(cfg.rel_tol * coarse);
    let per_piece = target / pieces.len() as f64;

    let mut total = C64::default();
    let mut err = 0.0;
    for p in &pieces {
        let (v, e) = run(p, per_piece, cfg.max_refinements);
        total += v;
        err += e;
    }
    if err > 10.0 * target.max(cfg.abs_tol) {
        return Err(QuadratureError::ToleranceNotMet {
            error: err,
            tol: target,
        });
    }
    Ok(total)
}

/// Integral of a product of factors over the intersection of their
/// supports. Endpoint exponents of the factors add; knots pool into
/// breakpoints.
pub fn integrate_product(
    factors: &[Factor],
    cfg: &QuadratureConfig,
) -> Result<C64, QuadratureError> {
    let lo = factors.iter().map(|f| f.support.0).fold(0.0, f64::max);
    let hi = factors.iter().map(|f| f.support.1).fold(1.0, f64::min);
    if lo >= hi {
        return Ok(C64::default());
    }
    let exp_zero = factors.iter().map(|f| f.exp_zero).sum();
    let exp_one = factors.iter().map(|f| f.exp_one).sum();
    let mut breakpoints: Vec<f64> = factors.iter().flat_map(|f| f.knots.clone()).collect();
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eval = |x: f64| -> C64 {
        factors
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, f| acc * (f.eval)(x))
    };
    integrate(
        &IntegrandSpec {
            eval: &eval,
            lo,
            hi,
            exp_zero,
            exp_one,
            breakpoints,
        },
        cfg,
    )
}

/// `int_0^1 conj(f) g dx` (antilinear in the first slot).
pub fn inner_product(
    f: &FunctionExpr,
    g: &FunctionExpr,
    cfg: &QuadratureConfig,
) -> Result<C64, QuadratureError> {
    if f.is_zero() || g.is_zero() {
        return Ok(C64::default());
    }
    integrate_product(
        &[
            Factor::from_expr(f.clone(), true),
            Factor::from_expr(g.clone(), false),
        ],
        cfg,
    )
}

/// `int_0^1 conj(f) g w dx`.
pub fn weighted_inner_product(
    f: &FunctionExpr,
    g: &FunctionExpr,
    w: &FunctionExpr,
    cfg: &QuadratureConfig,
) -> Result<C64, QuadratureError> {
    if f.is_zero() || g.is_zero() || w.is_zero() {
        return Ok(C64::default());
    }
    integrate_product(
        &[
            Factor::from_expr(f.clone(), true),
            Factor::from_expr(g.clone(), false),
            Factor::from_expr(w.clone(), false),
        ],
        cfg,
    )
}

/// Hermitian Gram matrix of a basis in the ambient L2 inner product.
pub fn gram(
    basis: &[FunctionExpr],
    cfg: &QuadratureConfig,
) -> Result<DMatrix<C64>, QuadratureError> {
    let n = basis.len();
    let mut g = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_product(&basis[i], &basis[j], cfg)?;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    for i in 0..n {
        g[(i, i)] = C64::new(g[(i, i)].re, 0.0);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::funcspace::DictionaryTerm;
    use approx::assert_abs_diff_eq;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn xpow(a: f64) -> FunctionExpr {
        FunctionExpr::power_left(c64(1.0, 0.0), c64(a, 0.0))
    }

    fn rpow(a: f64) -> FunctionExpr {
        FunctionExpr::power_right(c64(1.0, 0.0), c64(a, 0.0))
    }

    #[test]
    fn integrate_x() {
        let f = |x: f64| C64::new(x, 0.0);
        let spec = IntegrandSpec {
            eval: &f,
            lo: 0.0,
            hi: 1.0,
            exp_zero: c64(1.0, 0.0),
            exp_one: C64::default(),
            breakpoints: vec![],
        };
        let v = integrate(&spec, &cfg()).unwrap();
        assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn exponents_cancel_to_linear() {
        // (1-x)^g (1-x)^(1-g) = 1-x for any g
        for &g in &[0.1, 0.25, 0.49] {
            let v = inner_product(&rpow(g), &rpow(1.0 - g), &cfg()).unwrap();
            assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn closed_form_power_integral() {
        let g = 0.25;
        let v = inner_product(
            &FunctionExpr::constant(c64(1.0, 0.0)),
            &xpow(2.0 + 2.0 * g),
            &cfg(),
        )
        .unwrap();
        assert_abs_diff_eq!(v.re, 1.0 / 3.5, epsilon = 1e-11);
    }

    #[test]
    fn inner_product_x_x() {
        let v = inner_product(&xpow(1.0), &xpow(1.0), &cfg()).unwrap();
        assert_abs_diff_eq!(v.re, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_inner_product() {
        // <x^-g, x^-g> = 1/(1-2g) = 2 at g = 1/4
        let v = inner_product(&xpow(-0.25), &xpow(-0.25), &cfg()).unwrap();
        assert_abs_diff_eq!(v.re, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn weighted_inner_product_examples() {
        let g = 0.25;
        let w = xpow(-1.0).scale(c64(g, 0.0)); // g/x
        let v = weighted_inner_product(&xpow(1.0 + g), &xpow(1.0 + g), &w, &cfg()).unwrap();
        assert_abs_diff_eq!(v.re, g / (2.0 + 2.0 * g), epsilon = 1e-11);
        assert_abs_diff_eq!(v.re, 0.1, epsilon = 1e-11);

        let one = FunctionExpr::constant(c64(1.0, 0.0));
        let v = weighted_inner_product(&xpow(1.0), &xpow(1.0), &one, &cfg()).unwrap();
        assert_abs_diff_eq!(v.re, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_divergent_is_certified() {
        let g = 0.25;
        let w = xpow(-1.0).scale(c64(g, 0.0));
        let r = weighted_inner_product(&xpow(-g), &xpow(-g), &w, &cfg());
        assert!(matches!(r, Err(QuadratureError::DivergentIntegral { .. })));
    }

    #[test]
    fn conjugate_symmetry_and_sesquilinearity() {
        let pairs = [
            (xpow(0.3), rpow(0.7)),
            (
                FunctionExpr::new(vec![(
                    c64(1.0, 0.5),
                    DictionaryTerm::power_left(c64(0.5, 0.25)),
                )]),
                FunctionExpr::new(vec![(
                    c64(-0.3, 1.0),
                    DictionaryTerm::power_right(c64(0.2, -0.4)),
                )]),
            ),
            (
                FunctionExpr::new(vec![(
                    c64(2.0, 0.0),
                    DictionaryTerm::exp_power_left(C64::default(), c64(-1.0, 0.0), 0.5),
                )]),
                xpow(1.3),
            ),
        ];
        let c = cfg();
        for (f, g) in &pairs {
            let fg = inner_product(f, g, &c).unwrap();
            let gf = inner_product(g, f, &c).unwrap();
            assert!((fg - gf.conj()).norm() <= 1e-10 * fg.norm().max(1.0));
            let a = c64(0.7, -1.1);
            let fa = inner_product(&f.scale(a), g, &c).unwrap();
            assert!((fa - a.conj() * fg).norm() <= 1e-10 * fa.norm().max(1.0));
        }
    }

    #[test]
    fn gram_is_hermitian_positive_definite() {
        let basis = vec![xpow(0.25), xpow(1.25), rpow(0.4)];
        let g = gram(&basis, &cfg()).unwrap();
        let ga = g.adjoint();
        assert!((g.clone() - ga).norm() <= 1e-10 * g.norm());
        let eig = nalgebra::SymmetricEigen::new(g);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        for &l in eig.eigenvalues.iter() {
            assert!(l > 1e-10 * max, "Gram not positive definite: {l}");
        }
    }

    #[test]
    fn substitution_invariance_on_singular_power() {
        // x^{-0.4} integrated with the exponent certificate (substitution
        // engaged) and with a smooth certificate (brute adaptive refinement)
        let f = |x: f64| C64::new(x.powf(-0.4), 0.0);
        let with = integrate(
            &IntegrandSpec {
                eval: &f,
                lo: 0.0,
                hi: 1.0,
                exp_zero: c64(-0.4, 0.0),
                exp_one: C64::default(),
                breakpoints: vec![],
            },
            &cfg(),
        )
        .unwrap();
        let without = integrate(
            &IntegrandSpec {
                eval: &f,
                lo: 0.0,
                hi: 1.0,
                exp_zero: C64::default(),
                exp_one: C64::default(),
                breakpoints: vec![],
            },
            &cfg(),
        )
        .unwrap();
        let exact = 1.0 / 0.6;
        assert_abs_diff_eq!(with.re / exact, 1.0, epsilon = 1e-11);
        assert!((with.re - without.re).abs() <= 1e-9 * exact);
    }

    #[test]
    fn oscillatory_complex_exponent() {
        // int_0^1 x^a dx = 1/(a+1) for complex a with Re a > -1
        let a = c64(0.5, 2.0);
        let ev = |x: f64| crate::funcspace::real_pow_c(x, a);
        let v = integrate(
            &IntegrandSpec {
                eval: &ev,
                lo: 0.0,
                hi: 1.0,
                exp_zero: a,
                exp_one: C64::default(),
                breakpoints: vec![],
            },
            &cfg(),
        )
        .unwrap();
        let exact = (a + 1.0).inv();
        assert!((v - exact).norm() < 1e-10);
    }
}
