//! Small dense linear algebra helpers over `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Eigenvalues in descending order.
///
/// With `symmetrize` the symmetric part `(M + Mᵀ)/2` is decomposed. Without
/// it, a matrix that is not symmetric is decomposed by real Schur form and
/// must have a real spectrum.
pub fn sym_eigvals(m: &DMatrix<f64>, symmetrize: bool) -> Result<Vec<f64>> {
    check_square(m)?;
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(1e-300);
    let mut vals: Vec<f64> = if symmetrize || asym <= 1e-12 * scale {
        let s = (m + m.transpose()) * 0.5;
        SymmetricEigen::new(s).eigenvalues.iter().copied().collect()
    } else {
        let complex = m.clone().complex_eigenvalues();
        let mut out = Vec::with_capacity(complex.len());
        for z in complex.iter() {
            if z.im.abs() > 1e-8 * scale {
                return Err(Error::Consistency(format!("matrix has a complex eigenvalue {z}")));
            }
            out.push(z.re);
        }
        out
    };
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Symmetric PSD square root (negative eigenvalues clipped to zero).
pub fn psd_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(s)?;
    let eig = SymmetricEigen::new((s + s.transpose()) * 0.5);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Eigenvalues (descending) of the product `A·S` for symmetric `A` and
/// symmetric PSD `S`, computed as the spectrum of `S^{1/2} A S^{1/2}`.
pub fn product_eigvals(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_square(a)?;
    if a.shape() != s.shape() {
        return Err(Error::Dimension("product eigenvalues need equally sized matrices".into()));
    }
    let root = psd_sqrt(s)?;
    sym_eigvals(&(&root * a * &root), true)
}

/// Matrix inverse via SVD. A (near-)singular matrix yields
/// [`Error::Singular`] carrying the right singular vector of the smallest
/// singular value.
pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("matrix to invert has non-finite entries".into()));
    }
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (imin, smin) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let smax = sv.max();
    if !(smin > 1e-12 * smax) {
        let vt = svd.v_t.as_ref().expect("requested V^T");
        let direction: Vec<f64> = vt.row(imin).iter().copied().collect();
        return Err(Error::Singular { direction });
    }
    svd.pseudo_inverse(0.0).map_err(|e| Error::Evaluation(e.to_string()))
}

/// Solves `M x = b` through [`inverse`].
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(inverse(m)? * b)
}
