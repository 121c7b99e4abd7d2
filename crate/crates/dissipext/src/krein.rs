//! Imaginary-part models and their Krein-von Neumann square-root norms.
//!
//! Two models cover the catalog: multiplication by a nonnegative potential
//! `W` (essentially selfadjoint, so the Krein and Friedrichs extensions
//! coincide with the closure) and the negative second derivative on test
//! functions, whose Krein square-root norm has the closed form
//! `||f'||^2 - |f(1)-f(0)|^2` on H^1 while the Friedrichs form is `||f'||^2`
//! on H^1_0.
//!
//! The variational supremum `sup |<h,Vf>|^2 / <f,Vf>` over a finite bump
//! family is implemented as an independent oracle: it is a certified lower
//! bound of the true square-root norm, monotone in the family, and never the
//! production path (the closed forms are).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcspace::{Classification, Endpoint, FunctionExpr};
use crate::quadrature::{integrate_product, Factor, QuadratureConfig, QuadratureError};
use crate::C64;

/// The imaginary part `V = (A - A~)/(2i)` of a dual pair on the common core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImaginaryPartModel {
    /// maximal multiplication operator by a nonnegative function
    Multiplication { w: FunctionExpr },
    /// `f -> -f''` on compactly supported test functions
    NegSecondDerivative,
}

impl ImaginaryPartModel {
    pub fn multiplication(w: FunctionExpr) -> Self {
        ImaginaryPartModel::Multiplication { w }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KreinError {
    #[error("function is not in the domain of the Krein square root")]
    NotInDomain,
    #[error("the V-Gram of the test family vanishes")]
    DegenerateFamily,
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// A C^1 piecewise-cubic bump: rises from 0 to 1 and back, vanishing
/// together with its first derivative at the support endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub lo: f64,
    pub hi: f64,
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

fn smoothstep_d(u: f64) -> f64 {
    6.0 * u * (1.0 - u)
}

fn smoothstep_dd(u: f64) -> f64 {
    6.0 - 12.0 * u
}

impl Bump {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn local(&self, x: f64) -> Option<f64> {
        if x <= self.lo || x >= self.hi {
            return None;
        }
        Some((x - self.lo) / self.width())
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.local(x) {
            None => 0.0,
            Some(t) if t <= 0.5 => smoothstep(2.0 * t),
            Some(t) => smoothstep(2.0 - 2.0 * t),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        let w = self.width();
        match self.local(x) {
            None => 0.0,
            Some(t) if t <= 0.5 => 2.0 * smoothstep_d(2.0 * t) / w,
            Some(t) => -2.0 * smoothstep_d(2.0 - 2.0 * t) / w,
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        let w = self.width();
        match self.local(x) {
            None => 0.0,
            Some(t) if t <= 0.5 => 4.0 * smoothstep_dd(2.0 * t) / (w * w),
            Some(t) => 4.0 * smoothstep_dd(2.0 - 2.0 * t) / (w * w),
        }
    }

    /// Interior kinks of the piecewise-cubic pieces.
    pub fn knots(&self) -> Vec<f64> {
        vec![self.lo, 0.5 * (self.lo + self.hi), self.hi]
    }

    /// Quadrature factor for the bump or one of its derivatives.
    pub fn factor(&self, order: u32) -> Factor {
        let b = *self;
        let eval: Box<dyn Fn(f64) -> C64 + Send + Sync> = match order {
            0 => Box::new(move |x| C64::new(b.value(x), 0.0)),
            1 => Box::new(move |x| C64::new(b.d1(x), 0.0)),
            2 => Box::new(move |x| C64::new(b.d2(x), 0.0)),
            _ => panic!("bump derivatives beyond order 2 are not piecewise continuous"),
        };
        // vanishing order at the support edge: 2, 1, 0 for value, d1, d2
        let edge = C64::new((2 - order.min(2)) as f64, 0.0);
        Factor {
            eval,
            support: (self.lo, self.hi),
            exp_zero: edge,
            exp_one: edge,
            knots: self.knots(),
        }
    }
}

/// Finite family of bumps spanning a test subspace of the common core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFamily {
    pub bumps: Vec<Bump>,
}

impl TestFamily {
    /// Multiscale family on dyadic subintervals: the uniform levels 0..=3
    /// contribute all bumps on [j 2^-l, (j+1) 2^-l], after which pairs of
    /// endpoint-nested bumps of halving width ([1-2^-l, 1] and [0, 2^-l])
    /// are appended. The endpoint grading resolves weighted norms whose mass
    /// concentrates at a singular endpoint; the enumeration is a fixed
    /// nested sequence, so the variational supremum is monotone in n. Peaks
    /// sit at distinct dyadic points, keeping the family linearly
    /// independent.
    pub fn dyadic(n: usize) -> TestFamily {
        let mut bumps = Vec::with_capacity(n);
        'outer: for level in 0..64u32 {
            if level <= 3 {
                let parts = 1usize << level;
                let w = 1.0 / parts as f64;
                for j in 0..parts {
                    if bumps.len() == n {
                        break 'outer;
                    }
                    bumps.push(Bump {
                        lo: j as f64 * w,
                        hi: (j + 1) as f64 * w,
                    });
                }
            } else {
                let w = 0.5f64.powi(level as i32);
                if bumps.len() == n {
                    break 'outer;
                }
                bumps.push(Bump { lo: 1.0 - w, hi: 1.0 });
                if bumps.len() == n {
                    break 'outer;
                }
                bumps.push(Bump { lo: 0.0, hi: w });
            }
        }
        TestFamily { bumps }
    }

    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }
}

/// `<h, V b>` for an expression `h` and a bump `b`.
pub fn v_pairing(
    model: &ImaginaryPartModel,
    h: &FunctionExpr,
    b: &Bump,
    cfg: &QuadratureConfig,
) -> Result<C64, KreinError> {
    let v = match model {
        ImaginaryPartModel::Multiplication { w } => integrate_product(
            &[
                Factor::from_expr(h.clone(), true),
                Factor::from_expr(w.clone(), false),
                b.factor(0),
            ],
            cfg,
        )?,
        // <h, -b''> = int conj(h') b' (b and b' vanish at the support edges)
        ImaginaryPartModel::NegSecondDerivative => integrate_product(
            &[Factor::from_expr_deriv(h, 1, true), b.factor(1)],
            cfg,
        )?,
    };
    Ok(v)
}

/// `<b_i, V b_j>` for two bumps.
pub fn v_gram_entry(
    model: &ImaginaryPartModel,
    bi: &Bump,
    bj: &Bump,
    cfg: &QuadratureConfig,
) -> Result<C64, KreinError> {
    let v = match model {
        ImaginaryPartModel::Multiplication { w } => integrate_product(
            &[bi.factor(0), Factor::from_expr(w.clone(), false), bj.factor(0)],
            cfg,
        )?,
        ImaginaryPartModel::NegSecondDerivative => {
            integrate_product(&[bi.factor(1), bj.factor(1)], cfg)?
        }
    };
    Ok(v)
}

/// Membership `v` in `D(V_K^{1/2})`, decided by exponent arithmetic.
pub fn membership_vk_half(model: &ImaginaryPartModel, v: &FunctionExpr) -> bool {
    if v.is_zero() {
        return true;
    }
    // candidates must live in the ambient L2 space to begin with
    if !v.is_l2_near(Endpoint::Zero) || !v.is_l2_near(Endpoint::One) {
        return false;
    }
    match model {
        ImaginaryPartModel::Multiplication { w } => {
            let conv = |end: Endpoint| {
                2.0 * v.leading_exponent(end).re + w.leading_exponent(end).re > -1.0
            };
            conv(Endpoint::Zero) && conv(Endpoint::One)
        }
        ImaginaryPartModel::NegSecondDerivative => {
            // D(V_K^{1/2}) = H^1: the derivative must be square integrable
            let d = match v.derivative(1) {
                Ok(d) => d,
                Err(_) => return false,
            };
            d.is_l2_near(Endpoint::Zero) && d.is_l2_near(Endpoint::One)
        }
    }
}

/// `||V_K^{1/2} v||^2` via the model's closed form.
pub fn vk_halfnorm_sq(
    model: &ImaginaryPartModel,
    v: &FunctionExpr,
    cfg: &QuadratureConfig,
) -> Result<f64, KreinError> {
    if !membership_vk_half(model, v) {
        return Err(KreinError::NotInDomain);
    }
    if v.is_zero() {
        return Ok(0.0);
    }
    let val = match model {
        ImaginaryPartModel::Multiplication { w } => {
            crate::quadrature::weighted_inner_product(v, v, w, cfg)?.re
        }
        ImaginaryPartModel::NegSecondDerivative => {
            let d = v.derivative(1).map_err(|_| KreinError::NotInDomain)?;
            let grad = crate::quadrature::inner_product(&d, &d, cfg)?.re;
            let v0 = v.boundary_value(Endpoint::Zero).ok_or(KreinError::NotInDomain)?;
            let v1 = v.boundary_value(Endpoint::One).ok_or(KreinError::NotInDomain)?;
            grad - (v1 - v0).norm_sqr()
        }
    };
    Ok(val.max(0.0))
}

/// `||V_F^{1/2} v||^2`.
///
/// For the second-derivative model the Friedrichs form domain is H^1_0, so
/// both boundary values must vanish. For a multiplication model V is
/// essentially selfadjoint and the Friedrichs and Krein forms agree.
pub fn vf_halfnorm_sq(
    model: &ImaginaryPartModel,
    v: &FunctionExpr,
    cfg: &QuadratureConfig,
) -> Result<f64, KreinError> {
    match model {
        ImaginaryPartModel::Multiplication { .. } => vk_halfnorm_sq(model, v, cfg),
        ImaginaryPartModel::NegSecondDerivative => {
            if !membership_vk_half(model, v) {
                return Err(KreinError::NotInDomain);
            }
            if v.is_zero() {
                return Ok(0.0);
            }
            let vanish = |end: Endpoint| {
                v.boundary_limit(end).classification == Classification::Zero
            };
            if !vanish(Endpoint::Zero) || !vanish(Endpoint::One) {
                return Err(KreinError::NotInDomain);
            }
            let d = v.derivative(1).map_err(|_| KreinError::NotInDomain)?;
            Ok(crate::quadrature::inner_product(&d, &d, cfg)?.re.max(0.0))
        }
    }
}

/// The variational supremum `max |<v, Vf>|^2 / <f, Vf>` over the span of the
/// family: the largest value of a rank-one form against the V-Gram, i.e.
/// `w* K^+ w` on the positive eigenspace of K. Monotone nondecreasing in the
/// family and a lower bound of `||V_K^{1/2} v||^2`.
pub fn ando_nishio_sup(
    model: &ImaginaryPartModel,
    v: &FunctionExpr,
    family: &TestFamily,
    cfg: &QuadratureConfig,
) -> Result<f64, KreinError> {
    let n = family.len();
    if n == 0 {
        return Err(KreinError::DegenerateFamily);
    }
    let mut k = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let e = v_gram_entry(model, &family.bumps[i], &family.bumps[j], cfg)?;
            k[(i, j)] = e;
            k[(j, i)] = e.conj();
        }
    }
    let mut w = DVector::<C64>::zeros(n);
    for i in 0..n {
        w[i] = v_pairing(model, v, &family.bumps[i], cfg)?.conj();
    }
    let eig = nalgebra::SymmetricEigen::new(k);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if lmax <= 1e-14 {
        return Err(KreinError::DegenerateFamily);
    }
    // drop the numerically null directions: they correspond to Vf = 0
    let cut = 1e-12 * lmax;
    let mut sup = 0.0;
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut {
            let p = eig.eigenvectors.column(idx).dotc(&w);
            sup += p.norm_sqr() / l;
        }
    }
    Ok(sup)
}
