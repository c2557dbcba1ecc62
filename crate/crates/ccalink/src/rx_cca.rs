//! The pilot-free receiver: gather the two repetition views per layer and
//! sub-grid, solve the two-view canonical-correlation problem for the
//! combiner pair, resolve the residual phase against a known reference
//! symbol, and equalize every data RE with the combiner of its vicinity.
//!
//! Conventions. View covariances are R_ab = Y_a Y_bᴴ/N̄. The canonical
//! image of view i is written in the transmitted-symbol domain,
//! img_i[k] = q_iᴴ y_i[:,k] (the conjugate of Yᴴq entries), so the common
//! signal estimate g approximates γ·x_c/‖x_c‖ directly and the per-RE
//! combiner output qᴴy is the soft symbol. Combiners are scaled so each
//! image has unit norm; q₂ is derived from q₁ with a positive real scale,
//! which aligns the two image phases automatically.

use ndarray::{Array2, Array3};

use crate::grid::{re_coords, CcaPattern, GridDims, VicinityMap};
use crate::la::{self, CMatrix, CVector};
use crate::{C64, Error, Result};

/// The two views of one sub-grid and layer. Column k of both matrices
/// carries the same transmitted symbol x_c[k] (the copy order).
#[derive(Debug, Clone)]
pub struct ViewPair {
    pub y1: CMatrix,
    pub y2: CMatrix,
}

impl ViewPair {
    pub fn view_len(&self) -> usize {
        self.y1.ncols()
    }
}

/// Combiner pair, common-signal estimate, and the top canonical correlation.
#[derive(Debug, Clone)]
pub struct CcaSolution {
    pub q1: CVector,
    pub q2: CVector,
    /// Unit-norm estimate of x_c/‖x_c‖ up to a unit-modulus phase.
    pub g: CVector,
    /// Top canonical correlation in [0, 1].
    pub rho: f64,
    /// Set when the dominant eigenvector was not uniquely identified.
    pub ambiguous: bool,
}

/// Gather the received vectors of sub-grid `j` at the source positions
/// (view 1) and destination positions (view 2), columns in copy order.
pub fn build_views(
    rx: &Array3<C64>,
    dims: &GridDims,
    pattern: &CcaPattern,
    subgrid: usize,
) -> Result<ViewPair> {
    let sg = pattern
        .subgrids
        .get(subgrid)
        .ok_or_else(|| Error::IndexOutOfRange(format!("sub-grid {subgrid}")))?;
    let n_r = rx.shape()[2];
    let gather = |list: &[usize]| -> Result<CMatrix> {
        let mut m = CMatrix::zeros(n_r, list.len());
        for (k, &idx) in list.iter().enumerate() {
            let (sc, sym) = re_coords(idx, dims.n_rb);
            if sc >= rx.shape()[0] || sym >= rx.shape()[1] {
                return Err(Error::IndexOutOfRange(format!(
                    "RE {idx} outside the received grid"
                )));
            }
            for r in 0..n_r {
                m[(r, k)] = rx[(sc, sym, r)];
            }
        }
        Ok(m)
    };
    Ok(ViewPair {
        y1: gather(&sg.src)?,
        y2: gather(&sg.dst)?,
    })
}

/// Conjugated image q ᴴ Y, entry k = qᴴ y_k, as a column vector.
fn image(y: &CMatrix, q: &CVector) -> CVector {
    CVector::from_fn(y.ncols(), |k, _| q.dotc(&y.column(k).into_owned()))
}

/// Solve the two-view problem: q₁ is the dominant eigenvector of
/// (R₁₁+εI)⁻¹R₁₂(R₂₂+εI)⁻¹R₂₁, computed through Cholesky whitening as a
/// Hermitian eigenproblem; q₂ = (R₂₂+εI)⁻¹R₂₁q₁. `eps: None` applies the
/// scale-invariant automatic ridge.
pub fn cca_two_view(views: &ViewPair, eps: Option<f64>) -> Result<CcaSolution> {
    let (y1, y2) = (&views.y1, &views.y2);
    if y1.ncols() != y2.ncols() || y1.nrows() != y2.nrows() {
        return Err(Error::Dimension("views must have matching shapes".into()));
    }
    if y1.ncols() == 0 {
        return Err(Error::Dimension("empty views".into()));
    }
    let n_bar = y1.ncols() as f64;
    let chol1 = la::gram_cholesky(y1, eps, "view 1")?;
    let chol2 = la::gram_cholesky(y2, eps, "view 2")?;
    let r12 = (y1 * y2.adjoint()).scale(1.0 / n_bar);

    // K = L1⁻¹ R12 L2⁻ᴴ, so K Kᴴ is Hermitian-similar to the two-view matrix.
    let l1 = chol1.l();
    let l2 = chol2.l();
    let t = l1
        .solve_lower_triangular(&r12)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let k_adj = l2
        .solve_lower_triangular(&t.adjoint())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let k = k_adj.adjoint();
    let c = &k * k.adjoint();
    let eig = la::hermitian_dominant_eig(&c, 1e-7)?;

    // Un-whiten: q1 = L1⁻ᴴ w, then scale for a unit-norm image.
    let mut q1 = l1
        .adjoint()
        .solve_upper_triangular(&eig.pair.vector)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut img1 = image(y1, &q1);
    let n1 = img1.norm();
    if n1 == 0.0 {
        return Err(Error::Numerical("view 1 image vanished".into()));
    }
    q1 /= C64::new(n1, 0.0);
    img1 /= C64::new(n1, 0.0);

    let mut q2 = chol2.solve(&(r12.adjoint() * &q1));
    let mut img2 = image(y2, &q2);
    let n2 = img2.norm();
    if n2 == 0.0 {
        return Err(Error::Numerical("view 2 image vanished".into()));
    }
    q2 /= C64::new(n2, 0.0);
    img2 /= C64::new(n2, 0.0);

    let rho = img1.dotc(&img2).norm();
    if rho > 1.0 + 1e-9 {
        return Err(Error::Numerical(format!("correlation {rho} above one")));
    }
    let mut g = img1 + img2;
    let gn = g.norm();
    if gn == 0.0 {
        return Err(Error::Numerical("common-signal estimate vanished".into()));
    }
    g /= C64::new(gn, 0.0);
    Ok(CcaSolution {
        q1,
        q2,
        g,
        rho: rho.min(1.0),
        ambiguous: eig.ambiguous,
    })
}

/// Reference solution of the same problem in its projector-sum form: the
/// dominant eigenvector of P₁+P₂, where Pᵢ projects onto the span of the
/// plain-transposed view Yᵢᵀ. Algebraically equivalent to [`cca_two_view`]
/// for two views but cubic in the view length; kept as a cross-check, not
/// as the default path.
pub fn maxvar_projector_common(views: &ViewPair, eps: Option<f64>) -> Result<CVector> {
    let n_bar = views.y1.ncols() as f64;
    let mut m = CMatrix::zeros(views.y1.ncols(), views.y1.ncols());
    for (label, y) in [("view 1", &views.y1), ("view 2", &views.y2)] {
        let chol = la::gram_cholesky(y, eps, label)?;
        let solved = chol.solve(y); // S⁻¹ Y
        let p = (y.transpose() * solved.conjugate()).scale(1.0 / n_bar);
        m += p;
    }
    let eig = la::hermitian_dominant_eig(&m, 1e-7)?;
    Ok(eig.pair.vector)
}

/// Rotate the solution so the common-signal estimate agrees with a known
/// reference symbol at `ref_position`. The estimate g is multiplied by
/// conj(γ̂)/|γ̂|; the combiners pick up the conjugate rotation so their
/// per-RE outputs qᴴy rotate the same way as g.
pub fn resolve_phase(
    sol: &CcaSolution,
    ref_symbol: C64,
    ref_position: usize,
) -> Result<CcaSolution> {
    if ref_position >= sol.g.len() {
        return Err(Error::IndexOutOfRange(format!(
            "reference position {ref_position} in a block of {}",
            sol.g.len()
        )));
    }
    let gamma = sol.g[ref_position] * ref_symbol.conj();
    apply_phase(sol, gamma)
}

/// Phase resolution against the full known block (analysis mode).
pub fn resolve_phase_genie(sol: &CcaSolution, x_c: &[C64]) -> Result<CcaSolution> {
    if x_c.len() != sol.g.len() {
        return Err(Error::Dimension("reference block length mismatch".into()));
    }
    let gamma: C64 = sol
        .g
        .iter()
        .zip(x_c)
        .map(|(g, x)| g * x.conj())
        .sum();
    apply_phase(sol, gamma)
}

fn apply_phase(sol: &CcaSolution, gamma: C64) -> Result<CcaSolution> {
    let mag = gamma.norm();
    if mag < 1e-12 {
        return Err(Error::PhaseUnresolvable(mag));
    }
    let rot = gamma.conj() / C64::new(mag, 0.0);
    Ok(CcaSolution {
        q1: &sol.q1 * rot.conj(),
        q2: &sol.q2 * rot.conj(),
        g: &sol.g * rot,
        rho: sol.rho,
        ambiguous: sol.ambiguous,
    })
}

/// Per-layer equalizer output: soft symbols plus an erasure mask for
/// sub-grids whose phase could not be resolved.
#[derive(Debug, Clone)]
pub struct SoftGrid {
    pub soft: Array2<C64>,
    pub erased: Array2<bool>,
}

/// Apply the combiners of each sub-grid: vicinity REs use the combiner of
/// their view; each repeated symbol is estimated from both copies, with the
/// average written at its source position (and mirrored at the destination,
/// which the accounting excludes). `solutions[j] = None` erases sub-grid j.
pub fn equalize_layer(
    rx: &Array3<C64>,
    dims: &GridDims,
    pattern: &CcaPattern,
    vmap: &VicinityMap,
    solutions: &[Option<CcaSolution>],
) -> Result<SoftGrid> {
    let n_sc = rx.shape()[0];
    let n_sym = rx.shape()[1];
    let n_r = rx.shape()[2];
    if solutions.len() != pattern.subgrids.len() {
        return Err(Error::Dimension("one solution slot per sub-grid".into()));
    }
    let mut soft = Array2::from_elem((n_sc, n_sym), C64::new(0.0, 0.0));
    let mut erased = Array2::from_elem((n_sc, n_sym), false);
    let rx_at = |idx: usize| -> CVector {
        let (sc, sym) = re_coords(idx, dims.n_rb);
        CVector::from_fn(n_r, |r, _| rx[(sc, sym, r)])
    };
    for (j, sg) in pattern.subgrids.iter().enumerate() {
        match &solutions[j] {
            Some(sol) => {
                for &(idx, view) in &vmap.subgrids[j] {
                    let q = if view == 1 { &sol.q1 } else { &sol.q2 };
                    let (sc, sym) = re_coords(idx, dims.n_rb);
                    soft[(sc, sym)] = q.dotc(&rx_at(idx));
                }
                for (&s, &d) in sg.src.iter().zip(sg.dst.iter()) {
                    let est = (sol.q1.dotc(&rx_at(s)) + sol.q2.dotc(&rx_at(d))) * 0.5;
                    let (sm, sn) = re_coords(s, dims.n_rb);
                    let (dm, dn) = re_coords(d, dims.n_rb);
                    soft[(sm, sn)] = est;
                    soft[(dm, dn)] = est;
                }
            }
            None => {
                for &(idx, _) in &vmap.subgrids[j] {
                    let (sc, sym) = re_coords(idx, dims.n_rb);
                    erased[(sc, sym)] = true;
                }
                for &idx in sg.src.iter().chain(sg.dst.iter()) {
                    let (sc, sym) = re_coords(idx, dims.n_rb);
                    erased[(sc, sym)] = true;
                }
            }
        }
    }
    Ok(SoftGrid { soft, erased })
}
