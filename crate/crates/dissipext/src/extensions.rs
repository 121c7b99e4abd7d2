//! Spectral splitting of the boundary form and the contraction
//! parametrization of all proper dissipative extensions.
//!
//! The Hermitian pencil `Q v = lambda G v` is solved against the ambient L2
//! geometry of the complement span (Cholesky reduction to a standard
//! Hermitian problem). Its positive, null and negative eigenspaces are the
//! arena for every extension decision: a subspace generates a dissipative
//! extension exactly when it is the graph of a contraction, scaled by the
//! square roots of the positive and negative form pieces, over a subspace of
//! the non-negative part.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dualpair::{boundary_values, DualPairError, DualPairProblem, FormPair};
use crate::funcspace::FunctionExpr;
use crate::krein::membership_vk_half;
use crate::quadrature::QuadratureConfig;
use crate::{c64, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtensionError {
    #[error("Gram matrix is numerically singular")]
    DegenerateGram,
    #[error("matrix has a singular value {sigma} exceeding 1")]
    NotAContraction { sigma: f64 },
    #[error("subspace meets the negative spectral subspace")]
    ContainsNegativeDirection,
    #[error("a null-form component carries a negative-subspace image")]
    ZeroSectorLeak,
    #[error("problem carries no kernel basis")]
    MissingKernelBasis,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    DualPair(#[from] DualPairError),
}

/// Relative rank cutoff used throughout the subspace algebra.
const RANK_TOL: f64 = 1e-10;

/// Generalized eigensystem of the pencil (Q, G) with the sign partition of
/// the spectrum. Eigenvectors are G-orthonormal columns in the admissible
/// complement coordinates, ordered by descending eigenvalue with a
/// deterministic phase (first significant component real positive).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSplit {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<C64>,
    pub plus: Vec<usize>,
    pub zero: Vec<usize>,
    pub minus: Vec<usize>,
    /// eigenvalues on the positive part (diagonal of M+)
    pub m_plus: Vec<f64>,
    /// negated eigenvalues on the negative part (diagonal of M-)
    pub m_minus: Vec<f64>,
    pub zero_tol: f64,
}

impl SpectralSplit {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Columns of the eigenvector matrix at the given indices.
    fn columns(&self, idx: &[usize]) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::<C64>::zeros(n, idx.len());
        for (k, &i) in idx.iter().enumerate() {
            m.set_column(k, &self.vectors.column(i));
        }
        m
    }

    /// Basis of W+ (+) W0 in admissible complement coordinates.
    pub fn nonnegative_subspace(&self) -> DMatrix<C64> {
        let mut idx = self.plus.clone();
        idx.extend_from_slice(&self.zero);
        self.columns(&idx)
    }
}

/// A dissipative extension datum: a subspace of W+ (+) W0 together with a
/// contraction from its W+ projection into W-.
///
/// `m_basis` columns hold coordinates over [plus..., zero...] (the split's
/// eigenvector order); `contraction` maps W+ coordinates to W- coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionDescriptor {
    pub m_basis: DMatrix<C64>,
    pub contraction: DMatrix<C64>,
}

/// The operator-ball datum equivalent to the contraction parametrization:
/// every K = center + left_radius * C * right_radius over contractions C
/// generates a dissipative extension subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBall {
    /// projection onto W+ (+) W0 in split coordinates
    pub center: DMatrix<C64>,
    /// 1/sqrt(M-) on the negative part
    pub left_radius: DMatrix<C64>,
    /// sqrt(M+) on the positive part
    pub right_radius: DMatrix<C64>,
}

/// Verdict of the dissipativity test, with a violating direction on
/// failure.
#[derive(Debug, Clone, PartialEq)]
pub enum DissipativeVerdict {
    Yes,
    No {
        certificate: DVector<C64>,
        reason: ViolationReason,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    /// the form is negative on the certificate direction
    NegativeForm,
    /// the certificate involves a complement direction outside the Krein
    /// square-root domain
    NotInDomain,
}

impl DissipativeVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, DissipativeVerdict::Yes)
    }
}

/// Solve the Hermitian pencil and partition the spectrum by sign.
///
/// `zero_tol` bounds the magnitude below which an eigenvalue joins the null
/// sector; `None` selects `1e-8 * max |lambda|`.
pub fn spectral_split(
    forms: &FormPair,
    zero_tol: Option<f64>,
) -> Result<SpectralSplit, ExtensionError> {
    let n = forms.dim();
    if n == 0 {
        return Ok(SpectralSplit {
            eigenvalues: vec![],
            vectors: DMatrix::zeros(0, 0),
            plus: vec![],
            zero: vec![],
            minus: vec![],
            m_plus: vec![],
            m_minus: vec![],
            zero_tol: zero_tol.unwrap_or(0.0),
        });
    }
    let chol = forms
        .gram
        .clone()
        .cholesky()
        .ok_or(ExtensionError::DegenerateGram)?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(ExtensionError::DegenerateGram)?;
    let mut b = &linv * &forms.q * linv.adjoint();
    // kill round-off asymmetry before the Hermitian solver
    let badj = b.adjoint();
    b = (&b + &badj) * c64(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
            .then_with(|| {
                // deterministic tie-break on the eigenvector entries
                let vi = eig.eigenvectors.column(i);
                let vj = eig.eigenvectors.column(j);
                for k in 0..n {
                    let c = (vi[k].re, vi[k].im)
                        .partial_cmp(&(vj[k].re, vj[k].im))
                        .unwrap();
                    if c != std::cmp::Ordering::Equal {
                        return c;
                    }
                }
                std::cmp::Ordering::Equal
            })
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DMatrix::<C64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[i]);
        let mut v = linv.adjoint() * eig.eigenvectors.column(i);
        // fix the phase: first significant component positive real
        let maxmod = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(lead) = v.iter().find(|z| z.norm() > 1e-12 * maxmod) {
            let phase = lead / lead.norm();
            v *= phase.conj();
        }
        vectors.set_column(col, &v);
    }

    let lmax = eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let tol = zero_tol.unwrap_or(1e-8 * lmax);
    let mut plus = Vec::new();
    let mut zero = Vec::new();
    let mut minus = Vec::new();
    for (i, &l) in eigenvalues.iter().enumerate() {
        if l.abs() <= tol {
            zero.push(i);
        } else if l > 0.0 {
            plus.push(i);
        } else {
            minus.push(i);
        }
    }
    let m_plus = plus.iter().map(|&i| eigenvalues[i]).collect();
    let m_minus = minus.iter().map(|&i| -eigenvalues[i]).collect();
    Ok(SpectralSplit {
        eigenvalues,
        vectors,
        plus,
        zero,
        minus,
        m_plus,
        m_minus,
        zero_tol: tol,
    })
}

/// The operator ball whose elements sweep out all dissipative extension
/// subspaces.
pub fn operator_ball(split: &SpectralSplit) -> OperatorBall {
    let n = split.dim();
    let mut center = DMatrix::<C64>::zeros(n, n);
    for &i in split.plus.iter().chain(split.zero.iter()) {
        center[(i, i)] = c64(1.0, 0.0);
    }
    let mut left = DMatrix::<C64>::zeros(split.minus.len(), split.minus.len());
    for (k, &m) in split.m_minus.iter().enumerate() {
        left[(k, k)] = c64(1.0 / m.sqrt(), 0.0);
    }
    let mut right = DMatrix::<C64>::zeros(split.plus.len(), split.plus.len());
    for (k, &m) in split.m_plus.iter().enumerate() {
        right[(k, k)] = c64(m.sqrt(), 0.0);
    }
    OperatorBall {
        center,
        left_radius: left,
        right_radius: right,
    }
}

fn largest_singular_value(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Subspace spanned by `{w + sqrt(M-)^-1 C sqrt(M+) w : w in M}`, returned
/// as columns in the admissible complement coordinates.
pub fn extension_from_contraction(
    split: &SpectralSplit,
    m_basis: &DMatrix<C64>,
    contraction: &DMatrix<C64>,
) -> Result<DMatrix<C64>, ExtensionError> {
    let (np, nz, nm) = (split.plus.len(), split.zero.len(), split.minus.len());
    if m_basis.nrows() != np + nz {
        return Err(ExtensionError::Invalid(format!(
            "subspace coordinates must have {} rows",
            np + nz
        )));
    }
    if contraction.nrows() != nm || contraction.ncols() != np {
        return Err(ExtensionError::Invalid(format!(
            "contraction must be {nm} x {np}"
        )));
    }
    let sigma = largest_singular_value(contraction);
    if sigma > 1.0 + 1e-10 {
        return Err(ExtensionError::NotAContraction { sigma });
    }
    let k = m_basis.ncols();
    let n = split.dim();
    let mut out = DMatrix::<C64>::zeros(n, k);
    for col in 0..k {
        // full eigencoordinate vector of w
        let mut a = DVector::<C64>::zeros(n);
        for (row, &i) in split.plus.iter().chain(split.zero.iter()).enumerate() {
            a[i] = m_basis[(row, col)];
        }
        // sqrt(M+) on the plus part
        let mut wp = DVector::<C64>::zeros(np);
        for (r, &i) in split.plus.iter().enumerate() {
            wp[r] = a[i] * split.m_plus[r].sqrt();
        }
        let img = contraction * wp;
        for (r, &i) in split.minus.iter().enumerate() {
            a[i] = img[r] / split.m_minus[r].sqrt();
        }
        out.set_column(col, &(&split.vectors * a));
    }
    Ok(out)
}

/// Recover the pair (subspace of W+ (+) W0, contraction) from a spanning
/// set of extension directions in admissible complement coordinates. The
/// round trip with [`extension_from_contraction`] is the identity on
/// subspaces.
pub fn contraction_from_subspace(
    split: &SpectralSplit,
    forms: &FormPair,
    subspace: &DMatrix<C64>,
) -> Result<ExtensionDescriptor, ExtensionError> {
    let n = split.dim();
    if subspace.nrows() != n {
        return Err(ExtensionError::Invalid(format!(
            "subspace must have {n} rows"
        )));
    }
    let k = subspace.ncols();
    let (np, nz, nm) = (split.plus.len(), split.zero.len(), split.minus.len());
    // eigencoordinates: a = V* G s
    let a = split.vectors.adjoint() * &forms.gram * subspace;
    let scale = a.norm().max(1.0);
    if rank(&a) < k {
        return Err(ExtensionError::Invalid(
            "subspace spanning columns are linearly dependent".into(),
        ));
    }
    let mut p = DMatrix::<C64>::zeros(np, k);
    let mut z = DMatrix::<C64>::zeros(nz, k);
    let mut m = DMatrix::<C64>::zeros(nm, k);
    for col in 0..k {
        for (r, &i) in split.plus.iter().enumerate() {
            p[(r, col)] = a[(i, col)];
        }
        for (r, &i) in split.zero.iter().enumerate() {
            z[(r, col)] = a[(i, col)];
        }
        for (r, &i) in split.minus.iter().enumerate() {
            m[(r, col)] = a[(i, col)];
        }
    }
    let mut pz = DMatrix::<C64>::zeros(np + nz, k);
    pz.view_mut((0, 0), (np, k)).copy_from(&p);
    pz.view_mut((np, 0), (nz, k)).copy_from(&z);

    // a coefficient direction annihilated by the non-negative projection but
    // not by the full embedding lies in W- itself
    for c in null_space(&pz, scale) {
        if (&m * &c).norm() > RANK_TOL * scale {
            return Err(ExtensionError::ContainsNegativeDirection);
        }
    }
    // null-form components must carry no negative image
    for c in null_space(&p, scale) {
        if (&m * &c).norm() > RANK_TOL * scale {
            return Err(ExtensionError::ZeroSectorLeak);
        }
    }

    // solve B pz = m, then C = sqrt(M-) B~ sqrt(M+)^-1 on the plus block
    let pz_pinv = pseudo_inverse(&pz);
    let b = &m * &pz_pinv;
    let residual = (&b * &pz - &m).norm();
    if residual > 1e-8 * scale {
        return Err(ExtensionError::ContainsNegativeDirection);
    }
    let p_pinv = pseudo_inverse(&p);
    let bp = &m * &p_pinv; // the plus-block factor of B
    let mut contraction = DMatrix::<C64>::zeros(nm, np);
    for r in 0..nm {
        for c in 0..np {
            contraction[(r, c)] =
                bp[(r, c)] * c64(split.m_minus[r].sqrt() / split.m_plus[c].sqrt(), 0.0);
        }
    }
    Ok(ExtensionDescriptor {
        m_basis: pz,
        contraction,
    })
}

fn rank(m: &DMatrix<C64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * smax.max(1e-300)).count()
}

/// Orthonormal basis of the (right) null space.
fn null_space(m: &DMatrix<C64>, scale: f64) -> Vec<DVector<C64>> {
    let k = m.ncols();
    if k == 0 {
        return vec![];
    }
    if m.nrows() == 0 {
        // everything is annihilated
        return (0..k)
            .map(|j| {
                let mut v = DVector::<C64>::zeros(k);
                v[j] = c64(1.0, 0.0);
                v
            })
            .collect();
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= RANK_TOL * scale {
            out.push(vt.row(i).adjoint());
        }
    }
    // rows of v_t beyond the singular value count also span the null space
    for i in svd.singular_values.len()..vt.nrows() {
        out.push(vt.row(i).adjoint());
    }
    out
}

fn pseudo_inverse(m: &DMatrix<C64>) -> DMatrix<C64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let sv = m.clone().svd(true, true);
    let smax = sv.singular_values.iter().cloned().fold(0.0, f64::max);
    sv.pseudo_inverse(RANK_TOL * smax.max(1e-300))
        .expect("pseudo-inverse with positive epsilon")
}

/// Spectral norm of the form matrix, the scale for PSD thresholds.
fn form_scale(q: &DMatrix<C64>) -> f64 {
    if q.nrows() == 0 {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(q.clone())
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max)
}

/// Decide dissipativity of the extension generated by a subspace given in
/// the full complement basis (pruned directions included). Answers are
/// total: inadmissible directions yield a `No` with a domain certificate.
pub fn is_dissipative(
    problem: &DualPairProblem,
    forms: &FormPair,
    subspace_full: &DMatrix<C64>,
) -> Result<DissipativeVerdict, ExtensionError> {
    let nfull = problem.complement_basis.len();
    if subspace_full.nrows() != nfull {
        return Err(ExtensionError::Invalid(format!(
            "subspace must have {nfull} rows (full complement basis)"
        )));
    }
    let k = subspace_full.ncols();
    if k == 0 {
        return Ok(DissipativeVerdict::Yes);
    }
    // any component on a pruned direction puts the vector outside the Krein
    // square-root domain
    for col in 0..k {
        let colv = subspace_full.column(col);
        let cscale = colv.norm().max(1e-300);
        for &i in &forms.pruned {
            if colv[i].norm() > 1e-12 * cscale {
                return Ok(DissipativeVerdict::No {
                    certificate: colv.into_owned(),
                    reason: ViolationReason::NotInDomain,
                });
            }
        }
    }
    let nk = forms.dim();
    let mut s = DMatrix::<C64>::zeros(nk, k);
    for col in 0..k {
        for (r, &i) in forms.kept.iter().enumerate() {
            s[(r, col)] = subspace_full[(i, col)];
        }
        // column scaling does not move form signs; normalize for
        // conditioning
        let nrm = s.column(col).norm();
        if nrm > 0.0 {
            for r in 0..nk {
                s[(r, col)] /= c64(nrm, 0.0);
            }
        }
    }
    let mut restricted = s.adjoint() * &forms.q * &s;
    let radj = restricted.adjoint();
    restricted = (&restricted + &radj) * c64(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(restricted);
    let scale = form_scale(&forms.q).max(1e-300);
    let mut lmin = f64::MAX;
    let mut argmin = 0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < lmin {
            lmin = l;
            argmin = i;
        }
    }
    if lmin >= -1e-9 * scale {
        Ok(DissipativeVerdict::Yes)
    } else {
        let bad = &s * eig.eigenvectors.column(argmin);
        let mut certificate = DVector::<C64>::zeros(nfull);
        for (r, &i) in forms.kept.iter().enumerate() {
            certificate[i] = bad[r];
        }
        Ok(DissipativeVerdict::No {
            certificate,
            reason: ViolationReason::NegativeForm,
        })
    }
}

/// Maximality requires the subspace to exhaust W+ (+) W0 and to add exactly
/// the defect dimension.
pub fn is_maximal_candidate(
    problem: &DualPairProblem,
    split: &SpectralSplit,
    descriptor: &ExtensionDescriptor,
) -> bool {
    let want = split.plus.len() + split.zero.len();
    let r = rank(&descriptor.m_basis);
    r == want && r == problem.defect_dim
}

/// The uniqueness test: every nonzero combination of the adjoint-kernel
/// basis must sit outside the Krein square-root domain. Per-element failure
/// plus pairwise distinct leading exponents certifies this on the closed
/// dictionary (distinct exponents cannot cancel a divergence).
pub fn unique_extension_check(problem: &DualPairProblem) -> Result<bool, ExtensionError> {
    let kernel = problem
        .kernel_basis
        .as_ref()
        .ok_or(ExtensionError::MissingKernelBasis)?;
    if kernel.is_empty() {
        return Err(ExtensionError::MissingKernelBasis);
    }
    for k in kernel {
        if membership_vk_half(&problem.imag_part, k) {
            return Ok(false);
        }
    }
    if kernel.len() > 1 {
        use crate::funcspace::Endpoint;
        for end in [Endpoint::Zero, Endpoint::One] {
            let mut leads: Vec<C64> = kernel.iter().map(|k| k.leading_exponent(end)).collect();
            leads.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
            for w in leads.windows(2) {
                if (w[0] - w[1]).norm() < 1e-12 {
                    // equal leading exponents could cancel; cannot certify
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// The four conditions deciding whether a subspace generates a proper
/// dissipative extension of a pair without the common core property:
/// membership in the restricted Krein domain, non-negativity of the form,
/// inclusion of the original minimal domain, and inclusion in the original
/// maximal domain.
pub fn noncore_conditions(
    problem: &DualPairProblem,
    forms: &FormPair,
    subspace_full: &DMatrix<C64>,
    cfg: &QuadratureConfig,
) -> Result<[bool; 4], ExtensionError> {
    let outer = problem
        .outer
        .as_ref()
        .ok_or_else(|| ExtensionError::Invalid("problem has no outer-pair data".into()))?;
    let _ = cfg;
    let k = subspace_full.ncols();
    let columns: Vec<FunctionExpr> = (0..k)
        .map(|col| {
            let coeffs: Vec<C64> = (0..subspace_full.nrows())
                .map(|r| subspace_full[(r, col)])
                .collect();
            FunctionExpr::combine(&problem.complement_basis, &coeffs)
        })
        .collect();

    // 1. V in D(V_K'^{1/2}) for the restricted pair
    let cond1 = columns
        .iter()
        .all(|v| membership_vk_half(&problem.imag_part, v));

    // 2. the boundary form is non-negative on the subspace
    let cond2 = cond1 && is_dissipative(problem, forms, subspace_full)?.is_yes();

    // 3. D(A) inside the extension domain: the direction the original
    // minimal operator adds must lie in the subspace span
    let d: DVector<C64> =
        DVector::from_iterator(outer.minimal_direction.len(), outer.minimal_direction.iter().map(|c| c.0));
    let cond3 = if k == 0 {
        d.norm() < 1e-12
    } else {
        let pinv = pseudo_inverse(subspace_full);
        let sol = &pinv * &d;
        (subspace_full * sol - &d).norm() <= 1e-9 * d.norm().max(1.0)
    };

    // 4. V inside the original maximal domain: boundary condition
    // v(0) = ratio * v(1) columnwise
    let mut cond4 = true;
    for v in &columns {
        match boundary_values(v) {
            Ok((v0, v1)) => {
                let scale = v0.norm().max(v1.norm()).max(1.0);
                if (v0 - outer.boundary_ratio * v1).norm() > 1e-9 * scale {
                    cond4 = false;
                }
            }
            Err(_) => cond4 = false,
        }
    }

    Ok([cond1, cond2, cond3, cond4])
}
