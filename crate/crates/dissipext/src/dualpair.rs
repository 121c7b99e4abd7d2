//! Dual-pair problem definitions and assembly of the boundary quadratic
//! form `q` together with the L2 Gram matrix on the complement basis.
//!
//! The boundary form comes in three flavours. First-order problems reduce to
//! boundary values, `q(u,v) = (conj(u(1))v(1) - conj(u(0))v(0))/2`. The
//! second-order catalog problem reduces to the right endpoint,
//! `q(v) = -Re(conj(v(1)) v'(1)) + |v(1)|^2`. The generic flavour evaluates
//! the polarized imaginary pairing of the full operator action minus the
//! Krein square-root cross term by quadrature; for multiplication-type
//! imaginary parts the potential contributions cancel there numerically,
//! which is itself a useful identity check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcspace::{c2, FuncError, FunctionExpr};
use crate::funcspace::Endpoint::{One, Zero};
use crate::krein::{membership_vk_half, Bump, ImaginaryPartModel, KreinError};
use crate::quadrature::{
    gram, integrate_product, weighted_inner_product, Factor, QuadratureConfig, QuadratureError,
};
use crate::{c64, C64};

/// How the boundary form `q` is realized on the complement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFormKind {
    FirstOrder,
    SecondOrderRightPoint,
    /// polarized imaginary pairing minus the Krein cross term, by quadrature
    GenericQuadrature,
}

/// Extra data for a dual pair without the common core property: the
/// computation runs on the restricted (common-core) pair, and these fields
/// describe the original pair's domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterPairData {
    /// membership in the outer maximal domain is the boundary condition
    /// v(0) = boundary_ratio * v(1)
    #[serde(with = "c2")]
    pub boundary_ratio: C64,
    /// coefficients, in the complement basis, of the direction the original
    /// minimal operator adds over the restricted one
    pub minimal_direction: Vec<ComplexCoeff>,
}

/// Serialization wrapper for plain complex coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexCoeff(#[serde(with = "c2")] pub C64);

/// Definition of a dual pair of ODE operators on (0,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPairProblem {
    /// derivative order n of the principal part
    pub order: u32,
    pub imag_part: ImaginaryPartModel,
    #[serde(rename = "basis")]
    pub complement_basis: Vec<FunctionExpr>,
    pub form_kind: BoundaryFormKind,
    /// dim [ran(A+i)]^perp, catalog metadata
    pub defect_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_basis: Option<Vec<FunctionExpr>>,
    /// symmetric real potential in the operator action, if any
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_potential: Option<FunctionExpr>,
    /// present only for pairs without the common core property
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<OuterPairData>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualPairError {
    #[error("vector is outside the Krein square-root domain")]
    NotInDomain,
    #[error("boundary value does not exist for this form kind")]
    BoundaryDivergent,
    #[error("complement basis is numerically degenerate")]
    DegenerateBasis,
    #[error("problem definition invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Func(#[from] FuncError),
}

impl From<KreinError> for DualPairError {
    fn from(e: KreinError) -> Self {
        match e {
            KreinError::NotInDomain => DualPairError::NotInDomain,
            KreinError::DegenerateFamily => DualPairError::Invalid("degenerate family".into()),
            KreinError::Quadrature(q) => DualPairError::Quadrature(q),
        }
    }
}

/// Hermitian form matrix and Gram matrix on the admissible complement
/// basis. `kept` records which basis indices survived the membership check;
/// `pruned` the excluded ones (they cannot enter any dissipative extension).
#[derive(Debug, Clone, PartialEq)]
pub struct FormPair {
    pub q: DMatrix<C64>,
    pub gram: DMatrix<C64>,
    pub kept: Vec<usize>,
    pub pruned: Vec<usize>,
}

impl FormPair {
    pub fn dim(&self) -> usize {
        self.kept.len()
    }
}

/// Either symbolic or bump-type operand for the operator pairings.
#[derive(Clone, Copy)]
pub enum Side<'a> {
    Expr(&'a FunctionExpr),
    Bump(&'a Bump),
}

impl<'a> Side<'a> {
    fn factor(&self, order: u32, conj: bool) -> Factor {
        match self {
            Side::Expr(e) => Factor::from_expr_deriv(e, order, conj),
            // bumps are real-valued, conjugation is a no-op
            Side::Bump(b) => b.factor(order),
        }
    }
}

impl DualPairProblem {
    /// Principal coefficient of `f^(n)` in the maximal operator action.
    pub fn principal(&self) -> C64 {
        match self.imag_part {
            // i^n f^(n) + i W f
            ImaginaryPartModel::Multiplication { .. } => c64(0.0, 1.0).powu(self.order),
            // -i f'' with the imaginary part carried by the derivative term
            ImaginaryPartModel::NegSecondDerivative => c64(0.0, -1.0),
        }
    }

    pub fn validate(&self) -> Result<(), DualPairError> {
        if self.order == 0 {
            return Err(DualPairError::Invalid("order must be at least 1".into()));
        }
        if matches!(self.imag_part, ImaginaryPartModel::NegSecondDerivative) && self.order != 2 {
            return Err(DualPairError::Invalid(
                "the second-derivative imaginary part requires order 2".into(),
            ));
        }
        if self.complement_basis.is_empty() {
            return Err(DualPairError::Invalid("empty complement basis".into()));
        }
        if self.form_kind == BoundaryFormKind::SecondOrderRightPoint && self.order != 2 {
            return Err(DualPairError::Invalid(
                "the right-point form applies to order 2".into(),
            ));
        }
        if let Some(outer) = &self.outer {
            if outer.minimal_direction.len() != self.complement_basis.len() {
                return Err(DualPairError::Invalid(
                    "outer minimal direction has wrong length".into(),
                ));
            }
        }
        Ok(())
    }

    /// `<a, L b>` where `L` is the maximal operator action.
    pub fn op_pairing(
        &self,
        a: Side,
        b: Side,
        cfg: &QuadratureConfig,
    ) -> Result<C64, DualPairError> {
        let mut acc = self.principal()
            * integrate_product(&[a.factor(0, true), b.factor(self.order, false)], cfg)?;
        if let ImaginaryPartModel::Multiplication { w } = &self.imag_part {
            if !w.is_zero() {
                acc += c64(0.0, 1.0)
                    * integrate_product(
                        &[a.factor(0, true), Factor::from_expr(w.clone(), false), b.factor(0, false)],
                        cfg,
                    )?;
            }
        }
        if let Some(u) = &self.real_potential {
            acc += integrate_product(
                &[a.factor(0, true), Factor::from_expr(u.clone(), false), b.factor(0, false)],
                cfg,
            )?;
        }
        Ok(acc)
    }

    /// `<L a, b>` with the maximal operator action applied in the first
    /// (antilinear) slot.
    pub fn op_pairing_left(
        &self,
        a: Side,
        b: Side,
        cfg: &QuadratureConfig,
    ) -> Result<C64, DualPairError> {
        let mut acc = self.principal().conj()
            * integrate_product(&[a.factor(self.order, true), b.factor(0, false)], cfg)?;
        if let ImaginaryPartModel::Multiplication { w } = &self.imag_part {
            if !w.is_zero() {
                // conj(i W a) b = -i W conj(a) b
                acc += c64(0.0, -1.0)
                    * integrate_product(
                        &[a.factor(0, true), Factor::from_expr(w.clone(), false), b.factor(0, false)],
                        cfg,
                    )?;
            }
        }
        if let Some(u) = &self.real_potential {
            acc += integrate_product(
                &[a.factor(0, true), Factor::from_expr(u.clone(), false), b.factor(0, false)],
                cfg,
            )?;
        }
        Ok(acc)
    }

    /// `<A~ a, b>` where `A~` is the minimal antidissipative action.
    pub fn adjoint_pairing(
        &self,
        a: Side,
        b: Side,
        cfg: &QuadratureConfig,
    ) -> Result<C64, DualPairError> {
        let principal_tilde = match self.imag_part {
            ImaginaryPartModel::Multiplication { .. } => self.principal(),
            ImaginaryPartModel::NegSecondDerivative => self.principal().conj(),
        };
        let mut acc = principal_tilde.conj()
            * integrate_product(&[a.factor(self.order, true), b.factor(0, false)], cfg)?;
        if let ImaginaryPartModel::Multiplication { w } = &self.imag_part {
            if !w.is_zero() {
                // conj(-i W a) b = +i W conj(a) b
                acc += c64(0.0, 1.0)
                    * integrate_product(
                        &[a.factor(0, true), Factor::from_expr(w.clone(), false), b.factor(0, false)],
                        cfg,
                    )?;
            }
        }
        if let Some(u) = &self.real_potential {
            acc += integrate_product(
                &[a.factor(0, true), Factor::from_expr(u.clone(), false), b.factor(0, false)],
                cfg,
            )?;
        }
        Ok(acc)
    }

    /// Krein square-root cross term `<V_K^{1/2} u, V_K^{1/2} v>`.
    fn krein_cross(
        &self,
        u: &FunctionExpr,
        v: &FunctionExpr,
        cfg: &QuadratureConfig,
    ) -> Result<C64, DualPairError> {
        match &self.imag_part {
            ImaginaryPartModel::Multiplication { w } => {
                Ok(weighted_inner_product(u, v, w, cfg)?)
            }
            ImaginaryPartModel::NegSecondDerivative => {
                let du = u.derivative(1)?;
                let dv = v.derivative(1)?;
                let grad = crate::quadrature::inner_product(&du, &dv, cfg)?;
                let ju = boundary_jump(u)?;
                let jv = boundary_jump(v)?;
                Ok(grad - ju.conj() * jv)
            }
        }
    }

    /// Sesquilinear boundary form `q(u, v)`; the diagonal is the boundary
    /// quadratic form.
    pub fn q_pair(
        &self,
        u: &FunctionExpr,
        v: &FunctionExpr,
        cfg: &QuadratureConfig,
    ) -> Result<C64, DualPairError> {
        match self.form_kind {
            BoundaryFormKind::FirstOrder => {
                let (u0, u1) = boundary_values(u)?;
                let (v0, v1) = boundary_values(v)?;
                Ok((u1.conj() * v1 - u0.conj() * v0) * 0.5)
            }
            BoundaryFormKind::SecondOrderRightPoint => {
                let u1 = u.boundary_value(One).ok_or(DualPairError::BoundaryDivergent)?;
                let v1 = v.boundary_value(One).ok_or(DualPairError::BoundaryDivergent)?;
                let du1 = u
                    .derivative(1)?
                    .boundary_value(One)
                    .ok_or(DualPairError::BoundaryDivergent)?;
                let dv1 = v
                    .derivative(1)?
                    .boundary_value(One)
                    .ok_or(DualPairError::BoundaryDivergent)?;
                Ok(-(u1.conj() * dv1 + du1.conj() * v1) * 0.5 + u1.conj() * v1)
            }
            BoundaryFormKind::GenericQuadrature => {
                let pairing = self.op_pairing(Side::Expr(u), Side::Expr(v), cfg)?
                    - self.op_pairing_left(Side::Expr(u), Side::Expr(v), cfg)?;
                let im_part = pairing / c64(0.0, 2.0);
                Ok(im_part - self.krein_cross(u, v, cfg)?)
            }
        }
    }

    /// Boundary quadratic form on a coefficient vector in the complement
    /// basis.
    pub fn q_value(&self, coeffs: &[C64], cfg: &QuadratureConfig) -> Result<f64, DualPairError> {
        let v = FunctionExpr::combine(&self.complement_basis, coeffs);
        if !membership_vk_half(&self.imag_part, &v) {
            return Err(DualPairError::NotInDomain);
        }
        Ok(self.q_pair(&v, &v, cfg)?.re)
    }

    /// Assemble the Hermitian form matrix and the Gram matrix on the
    /// admissible part of the complement basis. Basis elements failing the
    /// Krein membership are pruned and reported, not an error: they cannot
    /// enter any dissipative extension.
    pub fn assemble_forms(&self, cfg: &QuadratureConfig) -> Result<FormPair, DualPairError> {
        self.validate()?;
        let mut kept = Vec::new();
        let mut pruned = Vec::new();
        for (i, e) in self.complement_basis.iter().enumerate() {
            if membership_vk_half(&self.imag_part, e) {
                kept.push(i);
            } else {
                pruned.push(i);
            }
        }
        let exprs: Vec<FunctionExpr> = kept
            .iter()
            .map(|&i| self.complement_basis[i].clone())
            .collect();
        let n = exprs.len();
        let mut q = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.q_pair(&exprs[i], &exprs[j], cfg)?;
                q[(i, j)] = v;
                q[(j, i)] = v.conj();
            }
        }
        for i in 0..n {
            q[(i, i)] = c64(q[(i, i)].re, 0.0);
        }
        let g = gram(&exprs, cfg)?;
        if n > 0 {
            let eig = nalgebra::SymmetricEigen::new(g.clone());
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            let lmin = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
            if !(lmin > 1e-12 * lmax) {
                return Err(DualPairError::DegenerateBasis);
            }
        }
        Ok(FormPair {
            q,
            gram: g,
            kept,
            pruned,
        })
    }

    /// Residual of the adjoint-pairing identity `<f, A g> = <A~ f, g>` on
    /// common-core bumps, together with the scale of the two pairings.
    pub fn adjoint_pairing_check(
        &self,
        f: &Bump,
        g: &Bump,
        cfg: &QuadratureConfig,
    ) -> Result<(f64, f64), DualPairError> {
        let lhs = self.op_pairing(Side::Bump(f), Side::Bump(g), cfg)?;
        let rhs = self.adjoint_pairing(Side::Bump(f), Side::Bump(g), cfg)?;
        let scale = lhs.norm().max(rhs.norm()).max(1.0);
        Ok(((lhs - rhs).norm(), scale))
    }
}

/// Boundary values at both endpoints, required finite.
pub fn boundary_values(v: &FunctionExpr) -> Result<(C64, C64), DualPairError> {
    let v0 = v.boundary_value(Zero).ok_or(DualPairError::BoundaryDivergent)?;
    let v1 = v.boundary_value(One).ok_or(DualPairError::BoundaryDivergent)?;
    Ok((v0, v1))
}

fn boundary_jump(v: &FunctionExpr) -> Result<C64, DualPairError> {
    let (v0, v1) = boundary_values(v)?;
    Ok(v1 - v0)
}
