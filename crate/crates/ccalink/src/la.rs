//! Complex linear-algebra kernel shared by precoding and the receivers:
//! Hermitian eigendecomposition, SVD, and regularized Gram solves.
//!
//! Eigen- and singular-vector phases are pinned deterministically (the
//! largest-magnitude entry is made real and positive, ties broken by the
//! lowest index) so downstream results are reproducible.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{C64, Error, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative asymmetry above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative eigengap below which the dominant eigenvector is flagged ambiguous.
pub const EIGENGAP_TOL: f64 = 1e-9;

/// Largest eigenpair of a Hermitian PSD matrix.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: CVector,
}

/// Result of [`hermitian_dominant_eig`]: the dominant pair plus a flag set
/// when the top two eigenvalues are too close to identify a unique direction.
#[derive(Debug, Clone)]
pub struct DominantEig {
    pub pair: EigPair,
    pub ambiguous: bool,
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖A − Aᴴ‖_F / ‖A‖_F (0 for the zero matrix).
fn relative_asymmetry(a: &CMatrix) -> f64 {
    let norm = frobenius(a);
    if norm == 0.0 {
        return 0.0;
    }
    let diff = a - a.adjoint();
    frobenius(&diff) / norm
}

/// Rotate `v` by a unit scalar so its largest-magnitude entry is real and
/// positive; ties are broken by the lowest index. No-op for the zero vector.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mag = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag + 1e-300 && m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    if best_mag == 0.0 {
        return;
    }
    let rot = v[best].conj() / C64::new(best_mag, 0.0);
    for z in v.iter_mut() {
        *z *= rot;
    }
}

/// Dominant eigenpair of a Hermitian PSD matrix.
///
/// The residual ‖Av − λv‖₂ is verified against `tol·‖A‖_F`; the returned
/// flag is set when the gap between the top two eigenvalues is below
/// `EIGENGAP_TOL·λ₁`.
pub fn hermitian_dominant_eig(a: &CMatrix, tol: f64) -> Result<DominantEig> {
    if a.nrows() != a.ncols() || a.is_empty() {
        return Err(Error::Dimension(format!(
            "expected nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if tol <= 0.0 {
        return Err(Error::Dimension("tol must be positive".into()));
    }
    let asym = relative_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let norm = frobenius(a);
    // Symmetrize once so rounding in the caller cannot leak through.
    let h = (a + a.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let top = order[0];
    let value = eig.eigenvalues[top].max(0.0);
    let mut vector: CVector = eig.eigenvectors.column(top).into_owned();
    let vnorm = vector.norm();
    if vnorm == 0.0 {
        return Err(Error::Numerical("zero eigenvector returned".into()));
    }
    vector /= C64::new(vnorm, 0.0);
    fix_phase(&mut vector);

    let residual = (a * &vector - vector.scale(value)).norm();
    if norm > 0.0 && residual > tol * norm {
        return Err(Error::Numerical(format!(
            "eigen residual {residual:.3e} exceeds {:.3e}",
            tol * norm
        )));
    }
    let ambiguous = if order.len() > 1 {
        let second = eig.eigenvalues[order[1]];
        (value - second).abs() < EIGENGAP_TOL * value.max(f64::MIN_POSITIVE)
    } else {
        false
    };
    Ok(DominantEig {
        pair: EigPair { value, vector },
        ambiguous,
    })
}

/// Thin SVD `A = U diag(σ) Vᴴ` with singular values sorted descending and
/// right singular vectors phase-fixed as in [`hermitian_dominant_eig`].
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    if a.is_empty() {
        return Err(Error::Dimension("svd of empty matrix".into()));
    }
    let dec = nalgebra::SVD::new(a.clone(), true, true);
    let u = dec
        .u
        .ok_or_else(|| Error::Numerical("svd returned no U".into()))?;
    let v_t = dec
        .v_t
        .ok_or_else(|| Error::Numerical("svd returned no V".into()))?;
    let mut v = v_t.adjoint();
    let mut u = u;
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .partial_cmp(&dec.singular_values[i])
            .expect("singular values are finite")
    });
    let mut sigma = Vec::with_capacity(k);
    let mut u_sorted = CMatrix::zeros(u.nrows(), k);
    let mut v_sorted = CMatrix::zeros(v.nrows(), k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(dec.singular_values[src]);
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v.column(src));
    }
    u = u_sorted;
    v = v_sorted;
    // Phase convention: rotate each right singular vector, applying the same
    // rotation to its left partner so U Σ Vᴴ is unchanged.
    for c in 0..k {
        let mut vc: CVector = v.column(c).into_owned();
        let before = vc.clone();
        fix_phase(&mut vc);
        let rot = dominant_rotation(&before, &vc);
        v.set_column(c, &vc);
        let uc: CVector = u.column(c).into_owned() * rot;
        u.set_column(c, &uc);
    }
    let norm = frobenius(a);
    let mut recon = CMatrix::zeros(a.nrows(), a.ncols());
    for c in 0..k {
        let uc = u.column(c);
        let vc = v.column(c);
        recon += (uc * vc.adjoint()).scale(sigma[c]);
    }
    let resid = frobenius(&(a - recon));
    if norm > 0.0 && resid > 1e-10 * norm {
        return Err(Error::Numerical(format!(
            "svd reconstruction residual {resid:.3e} exceeds {:.3e}",
            1e-10 * norm
        )));
    }
    Ok(Svd { u, sigma, v })
}

/// Unit scalar r with `after = before * r` (identity when `before` is zero).
fn dominant_rotation(before: &CVector, after: &CVector) -> C64 {
    for i in 0..before.len() {
        if before[i].norm() > 1e-300 {
            let r = after[i] / before[i];
            let m = r.norm();
            if m > 0.0 {
                return r / C64::new(m, 0.0);
            }
        }
    }
    C64::new(1.0, 0.0)
}

/// Ridge used when the caller asks for automatic regularization: a small
/// multiple of the mean eigenvalue of the normalized Gram matrix it
/// stabilizes, `trace(YYᴴ/N̄)/N_r`. Invariant to rescaling `Y`. The factor
/// sits far above f64 rounding so singular Grams factor stably, and far
/// below the 1e-6 recovery tolerance even for badly conditioned views.
pub const AUTO_RIDGE_FACTOR: f64 = 1e-12;

pub fn auto_ridge(y: &CMatrix) -> f64 {
    AUTO_RIDGE_FACTOR * frobenius(y).powi(2) / (y.nrows() * y.ncols()) as f64
}

/// Cholesky factorization of `Y Yᴴ/N̄ + εI` (`ε` defaults to [`auto_ridge`]).
///
/// `context` names the operand in the rank-deficiency error, e.g. "view 1".
pub fn gram_cholesky(y: &CMatrix, eps: Option<f64>, context: &str) -> Result<Cholesky<C64, Dyn>> {
    if y.ncols() == 0 || y.nrows() == 0 {
        return Err(Error::Dimension("empty view matrix".into()));
    }
    let eps = eps.unwrap_or_else(|| auto_ridge(y));
    if eps < 0.0 {
        return Err(Error::Dimension("ridge must be nonnegative".into()));
    }
    let n = y.ncols() as f64;
    let mut g = (y * y.adjoint()).scale(1.0 / n);
    for i in 0..g.nrows() {
        g[(i, i)] += C64::new(eps, 0.0);
    }
    Cholesky::new(g).ok_or_else(|| Error::RankDeficient {
        context: context.to_string(),
    })
}

/// Solves `(Y Yᴴ/N̄ + εI) X = B` through a Cholesky factorization; no
/// explicit inverse is formed. With `ε = 0` a singular system is reported
/// as a rank-deficiency error.
pub fn regularized_gram_solve(y: &CMatrix, eps: Option<f64>, b: &CMatrix) -> Result<CMatrix> {
    if b.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "rhs has {} rows, expected {}",
            b.nrows(),
            y.nrows()
        )));
    }
    let chol = gram_cholesky(y, eps, "regularized_gram_solve")?;
    Ok(chol.solve(b))
}
