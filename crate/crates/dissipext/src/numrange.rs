//! Lower bounds for the imaginary part of the numerical range of
//! dissipative extensions.
//!
//! The identity `Im<f+v, A(f+v)> = ||V_K^{1/2}(f+v)||^2 + q(v)` turns every
//! numerical-range sample into a check of the assembled boundary form. For
//! the second-order catalog operator the sharp lower bound is the ground
//! eigenvalue of a Robin problem, `lambda = z^2` with `tan z / z` equal to
//! `|rho|^2 / Re(rho)`; a central-difference discretization with Richardson
//! extrapolation serves as the independent oracle. For multiplication-type
//! imaginary parts the bound is the essential infimum of the potential.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dualpair::{DualPairError, DualPairProblem, Side};
use crate::funcspace::Endpoint::{One, Zero};
use crate::funcspace::{c2opt, Classification, FunctionExpr};
use crate::krein::{membership_vk_half, Bump, ImaginaryPartModel, KreinError, TestFamily};
use crate::quadrature::{integrate_product, Factor, QuadratureConfig, QuadratureError};
use crate::{c64, C64};

/// Fixed seed for reproducible numerical-range sampling batches.
pub const DEFAULT_SAMPLING_SEED: u64 = 0x5EED_0001;

/// Robin boundary datum at the right endpoint: the extension parameter
/// `rho` induces `f'(1) = (Re rho / |rho|^2) f(1)`; `rho = None` stands for
/// the point at infinity (Neumann), `rho = 0` for a Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobinSpec {
    #[serde(with = "c2opt")]
    pub rho: Option<C64>,
}

impl RobinSpec {
    pub fn new(rho: C64) -> Self {
        RobinSpec { rho: Some(rho) }
    }

    pub fn infinity() -> Self {
        RobinSpec { rho: None }
    }

    /// The Robin coefficient `Re(rho)/|rho|^2`; `None` for the Dirichlet
    /// case `rho = 0`.
    pub fn kappa(&self) -> Option<f64> {
        match self.rho {
            None => Some(0.0),
            Some(r) if r == C64::default() => None,
            Some(r) => Some(r.re / r.norm_sqr()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumRangeError {
    #[error("no stability bound applies to this problem")]
    NotApplicable,
    #[error("subspace vector outside the Krein square-root domain")]
    NotInDomain,
    #[error(transparent)]
    DualPair(#[from] DualPairError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

impl From<KreinError> for NumRangeError {
    fn from(e: KreinError) -> Self {
        match e {
            KreinError::NotInDomain => NumRangeError::NotInDomain,
            KreinError::Quadrature(q) => NumRangeError::Quadrature(q),
            KreinError::DegenerateFamily => NumRangeError::NotApplicable,
        }
    }
}

/// Deterministic batch of numerical-range samples `<u, Au>/<u,u>`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSample {
    pub values: Vec<C64>,
    pub seed: u64,
}

impl RangeSample {
    pub fn min_imaginary(&self) -> f64 {
        self.values.iter().map(|v| v.im).fold(f64::INFINITY, f64::min)
    }
}

/// Residual of the extension identity on one core-plus-subspace element:
/// `|Im<f+v, A(f+v)> - ||V_K^{1/2}(f+v)||^2 - q(v)|` together with the scale
/// of the three contributions.
pub fn cernohorsky_residual(
    problem: &DualPairProblem,
    f: &Bump,
    coeffs: &[C64],
    cfg: &QuadratureConfig,
) -> Result<(f64, f64), NumRangeError> {
    let v = FunctionExpr::combine(&problem.complement_basis, coeffs);
    if !membership_vk_half(&problem.imag_part, &v) {
        return Err(NumRangeError::NotInDomain);
    }
    let fb = Side::Bump(f);
    let ve = Side::Expr(&v);
    let mut pairing = problem.op_pairing(fb, fb, cfg)?;
    if !v.is_zero() {
        pairing += problem.op_pairing(fb, ve, cfg)?
            + problem.op_pairing(ve, fb, cfg)?
            + problem.op_pairing(ve, ve, cfg)?;
    }
    let im = pairing.im;

    let norm = vk_halfnorm_sq_mixed(problem, f, &v, cfg)?;
    let q = if v.is_zero() {
        0.0
    } else {
        problem.q_pair(&v, &v, cfg)?.re
    };
    let residual = (im - norm - q).abs();
    let scale = im.abs().max(norm.abs()).max(q.abs()).max(1.0);
    Ok((residual, scale))
}

/// `||V_K^{1/2}(f + v)||^2` for a bump plus an expression.
fn vk_halfnorm_sq_mixed(
    problem: &DualPairProblem,
    f: &Bump,
    v: &FunctionExpr,
    cfg: &QuadratureConfig,
) -> Result<f64, NumRangeError> {
    match &problem.imag_part {
        ImaginaryPartModel::Multiplication { w } => {
            if w.is_zero() {
                return Ok(0.0);
            }
            let wf = Factor::from_expr(w.clone(), false);
            let mut acc =
                integrate_product(&[f.factor(0), wf, f.factor(0)], cfg)?.re;
            if !v.is_zero() {
                let cross = integrate_product(
                    &[
                        f.factor(0),
                        Factor::from_expr(w.clone(), false),
                        Factor::from_expr(v.clone(), false),
                    ],
                    cfg,
                )?;
                acc += 2.0 * cross.re;
                acc += crate::quadrature::weighted_inner_product(v, v, w, cfg)?.re;
            }
            Ok(acc)
        }
        ImaginaryPartModel::NegSecondDerivative => {
            // ||(f+v)'||^2 - |v(1) - v(0)|^2 (the bump vanishes at both ends)
            let mut acc = integrate_product(&[f.factor(1), f.factor(1)], cfg)?.re;
            if !v.is_zero() {
                let dv = v.derivative(1).map_err(DualPairError::from)?;
                let cross = integrate_product(
                    &[f.factor(1), Factor::from_expr(dv.clone(), false)],
                    cfg,
                )?;
                acc += 2.0 * cross.re;
                acc += crate::quadrature::inner_product(&dv, &dv, cfg)?.re;
                let v0 = v.boundary_value(Zero).ok_or(NumRangeError::NotInDomain)?;
                let v1 = v.boundary_value(One).ok_or(NumRangeError::NotInDomain)?;
                acc -= (v1 - v0).norm_sqr();
            }
            Ok(acc)
        }
    }
}

/// Smallest positive solution of `tan z = r z` by branchwise bisection over
/// `((k - 1/2) pi, (k + 1/2) pi)`.
fn smallest_tan_root(r: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let g = |z: f64| z.tan() - r * z;
    for k in 0..3u32 {
        let mut lo = (k as f64 - 0.5) * pi;
        let mut hi = (k as f64 + 0.5) * pi;
        if lo < 0.0 {
            lo = 0.0;
        }
        // step inside until the pole values are finite and usable
        let eps = 1e-12 * pi;
        let (mut a, mut b) = (lo + eps, hi - eps);
        // skip the spurious root z = 0 on the first branch
        if k == 0 {
            a = a.max(1e-7);
        }
        let (ga, gb) = (g(a), g(b));
        if !(ga.is_finite() && gb.is_finite()) || ga.signum() == gb.signum() {
            continue;
        }
        let (mut a, mut b, mut ga) = (a, b, ga);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let gm = g(m);
            if gm.signum() == ga.signum() {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
            if b - a < 1e-13 {
                break;
            }
        }
        return 0.5 * (a + b);
    }
    // real r always yields a root in the first three branches
    unreachable!("no bracket found for tan z = {r} z");
}

/// Ground eigenvalue `lambda_rho = z^2` of the Robin operator `-f''` with
/// `f(0) = 0`, `f'(1) = kappa f(1)`, from the transcendental equation
/// `tan z / z = |rho|^2 / Re(rho)`.
pub fn robin_lowest_eigenvalue(spec: &RobinSpec) -> f64 {
    let pi = std::f64::consts::PI;
    match spec.kappa() {
        // Dirichlet at the right endpoint
        None => pi * pi,
        // Neumann (rho = infinity) and the purely imaginary case both give
        // the tan singularity at z = pi/2
        Some(k) if k == 0.0 => pi * pi / 4.0,
        Some(k) => {
            let z = smallest_tan_root(1.0 / k);
            z * z
        }
    }
}

/// Count of eigenvalues of a symmetric tridiagonal matrix below `x`
/// (Sturm sequence on the shifted LDL^T pivots).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut p = diag[0] - x;
    if p < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let denom = if p == 0.0 { 1e-300 } else { p };
        p = (diag[i] - x) - off[i - 1] * off[i - 1] / denom;
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (k = 1, 2, ...) by Sturm bisection.
fn kth_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    // Gershgorin bounds
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i < n - 1 {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-11 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Ground eigenvalue of the mass-lumped central-difference discretization
/// of the Robin problem on `grid_n` intervals.
///
/// The stiffness row at the Robin node comes from the ghost-point rule; the
/// half-weight mass entry makes the pencil symmetric. Exactly on the
/// dissipativity circle the discrete problem has a structural eigenvalue 0
/// (the `z = 0` branch excluded by the transcendental equation), so
/// eigenvalues below a small threshold are skipped.
fn fd_lowest(spec: &RobinSpec, grid_n: usize) -> f64 {
    let n = grid_n;
    let h = 1.0 / n as f64;
    let kappa = spec.kappa();
    let (diag, off): (Vec<f64>, Vec<f64>) = match kappa {
        None => {
            // Dirichlet at both ends: unknowns f_1..f_{n-1}
            let m = n - 1;
            let d = vec![2.0 / (h * h); m];
            let e = vec![-1.0 / (h * h); m - 1];
            (d, e)
        }
        Some(kap) => {
            // unknowns f_1..f_n; stiffness S/h with Robin correction, mass
            // h diag(1,..,1,1/2); reduce with M^{-1/2}
            let m = n;
            let mut d = vec![2.0 / (h * h); m];
            let mut e = vec![-1.0 / (h * h); m - 1];
            d[m - 1] = (1.0 / h - kap) / (0.5 * h);
            // last off-diagonal of the mass-scaled pencil
            let s_off = -1.0 / h;
            e[m - 2] = s_off / (0.5 * h * h).sqrt();
            (d, e)
        }
    };
    let l1 = kth_eigenvalue(&diag, &off, 1);
    if l1 > 1e-8 {
        l1
    } else {
        kth_eigenvalue(&diag, &off, 2)
    }
}

/// Finite-difference oracle with Richardson extrapolation over `grid_n` and
/// `2 grid_n`.
pub fn fd_eigenvalue_oracle(spec: &RobinSpec, grid_n: usize) -> f64 {
    assert!(grid_n >= 64, "grid too coarse for the oracle");
    let coarse = fd_lowest(spec, grid_n);
    let fine = fd_lowest(spec, 2 * grid_n);
    (4.0 * fine - coarse) / 3.0
}

/// Essential infimum of a nonnegative dictionary potential: endpoint limits
/// plus a grid scan with geometric endpoint refinement.
fn essential_infimum(w: &FunctionExpr) -> f64 {
    if w.is_zero() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for end in [Zero, One] {
        let b = w.boundary_limit(end);
        match b.classification {
            Classification::Zero => best = best.min(0.0),
            Classification::FiniteLimit => best = best.min(b.value.unwrap().re),
            // nonnegative potentials diverge to +infinity; no candidate
            Classification::Divergent => {}
        }
    }
    let n = 10_000;
    for i in 1..n {
        let x = i as f64 / n as f64;
        best = best.min(w.evaluate(x).re);
    }
    for k in 1..=8 {
        let d = 10f64.powi(-k);
        best = best.min(w.evaluate(d).re);
        best = best.min(w.evaluate(1.0 - d).re);
    }
    best
}

/// Lower bound for the imaginary part of the numerical range of any
/// dissipative extension, when one applies: the essential infimum of the
/// potential for multiplication-type imaginary parts, or pi^2 for the
/// second-derivative model with an extension subspace inside H^1_0.
pub fn stability_bound(
    problem: &DualPairProblem,
    subspace: Option<&[Vec<C64>]>,
    _cfg: &QuadratureConfig,
) -> Result<f64, NumRangeError> {
    match &problem.imag_part {
        ImaginaryPartModel::Multiplication { w } => Ok(essential_infimum(w)),
        ImaginaryPartModel::NegSecondDerivative => {
            let cols = subspace.ok_or(NumRangeError::NotApplicable)?;
            let inside_h10 = cols.iter().all(|coeffs| {
                let v = FunctionExpr::combine(&problem.complement_basis, coeffs);
                v.boundary_limit(Zero).classification == Classification::Zero
                    && v.boundary_limit(One).classification == Classification::Zero
            });
            if inside_h10 {
                Ok(std::f64::consts::PI.powi(2))
            } else {
                Err(NumRangeError::NotApplicable)
            }
        }
    }
}

/// Sample the numerical range over deterministic complex mixtures
/// `u = a f + b v` of core bumps and extension directions.
pub fn sample_numerical_range(
    problem: &DualPairProblem,
    subspace: &[Vec<C64>],
    family: &TestFamily,
    mix: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<RangeSample, NumRangeError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let exprs: Vec<FunctionExpr> = subspace
        .iter()
        .map(|coeffs| FunctionExpr::combine(&problem.complement_basis, coeffs))
        .collect();
    for v in &exprs {
        if !membership_vk_half(&problem.imag_part, v) {
            return Err(NumRangeError::NotInDomain);
        }
    }
    for f in &family.bumps {
        let fb = Side::Bump(f);
        let pff = problem.op_pairing(fb, fb, cfg)?;
        let nff = integrate_product(&[f.factor(0), f.factor(0)], cfg)?;
        for v in &exprs {
            let ve = Side::Expr(v);
            let (pfv, pvf, pvv, nfv, nvv) = if v.is_zero() {
                Default::default()
            } else {
                (
                    problem.op_pairing(fb, ve, cfg)?,
                    problem.op_pairing(ve, fb, cfg)?,
                    problem.op_pairing(ve, ve, cfg)?,
                    integrate_product(
                        &[f.factor(0), Factor::from_expr(v.clone(), false)],
                        cfg,
                    )?,
                    crate::quadrature::inner_product(v, v, cfg)?,
                )
            };
            for _ in 0..mix {
                let a = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let b = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let num = a.conj() * a * pff
                    + a.conj() * b * pfv
                    + b.conj() * a * pvf
                    + b.conj() * b * pvv;
                let den = (a.conj() * a * nff
                    + a.conj() * b * nfv
                    + b.conj() * a * nfv.conj()
                    + b.conj() * b * nvv)
                    .re;
                if den > 1e-12 {
                    values.push(num / c64(den, 0.0));
                }
            }
        }
        if exprs.is_empty() {
            // core-only sampling
            for _ in 0..mix {
                let a = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let den = (a.conj() * a * nff).re;
                if den > 1e-12 {
                    values.push(a.conj() * a * pff / c64(den, 0.0));
                }
            }
        }
    }
    Ok(RangeSample { values, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dualpair::BoundaryFormKind;
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

    fn left_singular(g: f64) -> DualPairProblem {
        DualPairProblem {
            order: 1,
            imag_part: ImaginaryPartModel::multiplication(xpow(-1.0).scale(c64(g, 0.0))),
            complement_basis: vec![xpow(-g), xpow(1.0 + g)],
            form_kind: BoundaryFormKind::FirstOrder,
            defect_dim: 1,
            kernel_basis: Some(vec![xpow(-g)]),
            real_potential: None,
            outer: None,
        }
    }

    fn omega(g: f64) -> C64 {
        (c64(1.0, 0.0) + (c64(1.0, 4.0 * g)).sqrt()) * 0.5
    }

    fn second_order(g: f64) -> DualPairProblem {
        let om = omega(g);
        let omb2 = om.conj() + 2.0;
        let d = (omb2 - om).inv();
        let psi = FunctionExpr::new(vec![
            (omb2 * d, crate::funcspace::DictionaryTerm::power_left(om)),
            (-om * d, crate::funcspace::DictionaryTerm::power_left(omb2)),
        ]);
        let phi = FunctionExpr::new(vec![
            (-d, crate::funcspace::DictionaryTerm::power_left(om)),
            (d, crate::funcspace::DictionaryTerm::power_left(omb2)),
        ]);
        DualPairProblem {
            order: 2,
            imag_part: ImaginaryPartModel::NegSecondDerivative,
            complement_basis: vec![psi, phi],
            form_kind: BoundaryFormKind::SecondOrderRightPoint,
            defect_dim: 1,
            kernel_basis: Some(vec![FunctionExpr::power_left(c64(1.0, 0.0), om)]),
            real_potential: Some(xpow(-2.0).scale(c64(-g, 0.0))),
            outer: None,
        }
    }

    #[test]
    fn identity_residual_core_only() {
        // v = 0: Im<f, Af> = ||V_K^{1/2} f||^2 exactly
        let p = left_singular(0.25);
        let fam = TestFamily::dyadic(4);
        for f in &fam.bumps {
            let (r, s) = cernohorsky_residual(&p, f, &[C64::default(); 2], &cfg()).unwrap();
            assert!(r <= 1e-8 * s, "residual {r} at scale {s}");
        }
    }

    #[test]
    fn identity_residual_second_order_psi() {
        let p = second_order(2.0);
        let fam = TestFamily::dyadic(4);
        for f in &fam.bumps {
            let (r, s) =
                cernohorsky_residual(&p, f, &[c64(1.0, 0.0), C64::default()], &cfg()).unwrap();
            assert!(r <= 1e-7 * s, "residual {r} at scale {s}");
        }
    }

    #[test]
    fn identity_residual_left_singular() {
        let p = left_singular(0.25);
        let fam = TestFamily::dyadic(4);
        for f in &fam.bumps {
            let (r, s) =
                cernohorsky_residual(&p, f, &[C64::default(), c64(1.0, 0.0)], &cfg()).unwrap();
            assert!(r <= 1e-7 * s, "residual {r} at scale {s}");
        }
    }

    #[test]
    fn robin_special_points() {
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(
            robin_lowest_eigenvalue(&RobinSpec::new(c64(0.0, 1.0))),
            pi * pi / 4.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            robin_lowest_eigenvalue(&RobinSpec::infinity()),
            pi * pi / 4.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            robin_lowest_eigenvalue(&RobinSpec::new(C64::default())),
            pi * pi,
            epsilon = 1e-10
        );
    }

    #[test]
    fn robin_at_one_matches_tan_z_equals_z() {
        let l = robin_lowest_eigenvalue(&RobinSpec::new(c64(1.0, 0.0)));
        let z = l.sqrt();
        assert_abs_diff_eq!(z, 4.493409457909064, epsilon = 1e-6);
        assert_abs_diff_eq!(z.tan(), z, epsilon = 1e-5);
    }

    #[test]
    fn fd_oracle_matches_closed_points() {
        let pi = std::f64::consts::PI;
        let l = fd_eigenvalue_oracle(&RobinSpec::new(C64::default()), 1024);
        assert_abs_diff_eq!(l, pi * pi, epsilon = 1e-3);
        let l = fd_eigenvalue_oracle(&RobinSpec::new(c64(0.0, 1.0)), 1024);
        assert_abs_diff_eq!(l, pi * pi / 4.0, epsilon = 1e-3);
    }

    #[test]
    fn fd_oracle_negative_real_part_range() {
        let pi = std::f64::consts::PI;
        let l = fd_eigenvalue_oracle(&RobinSpec::new(c64(-1.0, 0.0)), 512);
        assert!(l > pi * pi / 4.0 && l <= pi * pi + 1e-6, "lambda = {l}");
    }

    #[test]
    fn oracle_agrees_with_transcendental_on_sweep() {
        let specs = [
            RobinSpec::new(c64(2.0, 0.0)),
            RobinSpec::new(c64(-1.0, 0.5)),
            RobinSpec::new(c64(0.3, -0.7)),
            RobinSpec::infinity(),
            RobinSpec::new(C64::default()),
        ];
        for spec in specs {
            let a = robin_lowest_eigenvalue(&spec);
            let b = fd_eigenvalue_oracle(&spec, 1024);
            assert!(
                (a - b).abs() <= 1e-4 * a.abs().max(1.0),
                "transcendental {a} vs oracle {b} at {spec:?}"
            );
        }
    }

    #[test]
    fn robin_monotone_in_kappa() {
        // larger Robin coefficient lowers the ground eigenvalue
        let mut prev = f64::INFINITY;
        for &kap in &[-2.0, -1.0, -0.5, 0.0, 0.3, 0.6, 0.9] {
            // rho real positive with kappa = 1/rho
            let spec = if kap == 0.0 {
                RobinSpec::infinity()
            } else {
                RobinSpec::new(c64(1.0 / kap, 0.0))
            };
            let l = robin_lowest_eigenvalue(&spec);
            assert!(l <= prev + 1e-12, "not monotone at kappa {kap}: {l} > {prev}");
            prev = l;
        }
    }

    #[test]
    fn stability_bound_examples() {
        let c = cfg();
        let g = 0.25;
        let p = left_singular(g);
        assert_abs_diff_eq!(stability_bound(&p, None, &c).unwrap(), g, epsilon = 1e-9);

        let mut p2 = p.clone();
        p2.imag_part = ImaginaryPartModel::multiplication(rpow(-1.0).scale(c64(g, 0.0)));
        assert_abs_diff_eq!(stability_bound(&p2, None, &c).unwrap(), g, epsilon = 1e-9);

        let a = 0.75;
        let mut p3 = p.clone();
        p3.imag_part = ImaginaryPartModel::multiplication(xpow(-a).scale(c64(1.0 - a, 0.0)));
        assert_abs_diff_eq!(stability_bound(&p3, None, &c).unwrap(), 1.0 - a, epsilon = 1e-9);
    }

    #[test]
    fn samples_respect_potential_bound() {
        let g = 0.25;
        let p = left_singular(g);
        let fam = TestFamily::dyadic(5);
        // the unique admissible direction x^{1+g}
        let sub = vec![vec![C64::default(), c64(1.0, 0.0)]];
        let s = sample_numerical_range(&p, &sub, &fam, 8, DEFAULT_SAMPLING_SEED, &cfg()).unwrap();
        assert!(s.values.len() >= 40);
        assert!(
            s.min_imaginary() >= g - 1e-6,
            "min Im {} below bound {g}",
            s.min_imaginary()
        );
    }

    #[test]
    fn samples_second_order_negative_rho() {
        let pi = std::f64::consts::PI;
        let p = second_order(2.0);
        let fam = TestFamily::dyadic(4);
        let rho = c64(-1.0, 0.0);
        let sub = vec![vec![rho, c64(1.0, 0.0)]];
        let s = sample_numerical_range(&p, &sub, &fam, 10, DEFAULT_SAMPLING_SEED, &cfg()).unwrap();
        let bound = pi * pi / 4.0;
        assert!(
            s.min_imaginary() >= bound - 1e-4,
            "min Im {} below pi^2/4",
            s.min_imaginary()
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = left_singular(0.25);
        let fam = TestFamily::dyadic(3);
        let sub = vec![vec![C64::default(), c64(1.0, 0.0)]];
        let a = sample_numerical_range(&p, &sub, &fam, 5, 42, &cfg()).unwrap();
        let b = sample_numerical_range(&p, &sub, &fam, 5, 42, &cfg()).unwrap();
        assert_eq!(a, b);
    }
}
