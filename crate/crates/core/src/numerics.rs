//! Dense complex linear-algebra kernels shared by the beamforming modules:
//! Hermitian quadratic forms, Hermitian linear solves, explicit inverses for
//! small matrices and the rank-one inverse (matrix inversion lemma) update
//! used by the RLS recursions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for the Hermitian-symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Relative residual tolerance accepted by [`solve_hermitian`].
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e} > {tol:.3e})")]
    NotHermitian { asymmetry: f64, tol: f64 },
    #[error("matrix is singular to working precision (condition estimate {cond_estimate:.3e})")]
    Singular { cond_estimate: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub fn is_finite_vector(v: &CVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_matrix(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Relative departure from Hermitian symmetry, ‖R − R^H‖_F / ‖R‖_F.
pub fn hermitian_asymmetry(r: &CMatrix) -> f64 {
    let norm = r.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (r - r.adjoint()).norm() / norm
}

fn check_hermitian(r: &CMatrix) -> Result<(), NumericsError> {
    if !r.is_square() {
        return Err(NumericsError::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let asymmetry = hermitian_asymmetry(r);
    if asymmetry > HERMITIAN_TOL {
        return Err(NumericsError::NotHermitian {
            asymmetry,
            tol: HERMITIAN_TOL,
        });
    }
    Ok(())
}

/// Re-enforce exact Hermitian symmetry, R ← (R + R^H)/2.
///
/// Applied after every recursive update to suppress asymmetry drift in long
/// recursions.
pub fn symmetrize(r: &mut CMatrix) {
    let adj = r.adjoint();
    *r += adj;
    *r *= Complex64::new(0.5, 0.0);
}

/// w^H R w for Hermitian R, returned as a real scalar.
///
/// The imaginary residue is discarded after asserting it is below
/// `HERMITIAN_TOL` relative to the magnitude of the form.
pub fn hermitian_quadratic_form(w: &CVector, r: &CMatrix) -> Result<f64, NumericsError> {
    if r.nrows() != w.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "matrix is {}x{}, vector has length {}",
            r.nrows(),
            r.ncols(),
            w.len()
        )));
    }
    check_hermitian(r)?;
    let rw = r * w;
    let form = w.dotc(&rw);
    let scale = form.norm().max(1.0);
    if form.im.abs() > 1e-9 * scale {
        return Err(NumericsError::NotHermitian {
            asymmetry: form.im.abs() / scale,
            tol: 1e-9,
        });
    }
    Ok(form.re)
}

/// Solve R x = b for Hermitian, numerically nonsingular R.
pub fn solve_hermitian(r: &CMatrix, b: &CVector) -> Result<CVector, NumericsError> {
    if r.nrows() != b.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "matrix is {}x{}, rhs has length {}",
            r.nrows(),
            r.ncols(),
            b.len()
        )));
    }
    check_hermitian(r)?;
    let lu = r.clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| NumericsError::Singular {
            cond_estimate: f64::INFINITY,
        })?;
    if !is_finite_vector(&x) {
        return Err(NumericsError::Singular {
            cond_estimate: f64::INFINITY,
        });
    }
    let b_norm = b.norm();
    if b_norm > 0.0 {
        let residual = (r * &x - b).norm() / b_norm;
        if residual > SOLVE_RESIDUAL_TOL {
            // Cheap condition estimate from the solve itself.
            let cond_estimate = r.norm() * x.norm() / b_norm;
            return Err(NumericsError::Singular { cond_estimate });
        }
    }
    Ok(x)
}

/// Explicit inverse of a Hermitian matrix. Intended for small dimensions
/// (M ≤ 64) where direct factorization is acceptable.
pub fn invert_hermitian(r: &CMatrix) -> Result<CMatrix, NumericsError> {
    check_hermitian(r)?;
    let inv = r
        .clone()
        .try_inverse()
        .ok_or(NumericsError::Singular {
            cond_estimate: f64::INFINITY,
        })?;
    if !is_finite_matrix(&inv) {
        return Err(NumericsError::Singular {
            cond_estimate: f64::INFINITY,
        });
    }
    Ok(inv)
}

/// One matrix-inversion-lemma step: given P(i−1) = R̂(i−1)⁻¹ and a new
/// snapshot r, returns the gain k(i) and P(i) = (α·R̂(i−1) + r r^H)⁻¹ via
///
///   k = α⁻¹ P r / (1 + α⁻¹ r^H P r)
///   P ← α⁻¹ P − α⁻¹ k r^H P
///
/// The updated P is re-symmetrized before returning.
pub fn rank_one_inverse_update(
    p_prev: &CMatrix,
    r: &CVector,
    alpha: f64,
) -> Result<(CVector, CMatrix), NumericsError> {
    if p_prev.nrows() != r.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "P is {}x{}, snapshot has length {}",
            p_prev.nrows(),
            p_prev.ncols(),
            r.len()
        )));
    }
    let inv_alpha = Complex64::new(1.0 / alpha, 0.0);
    let pr = p_prev * r;
    let denom = Complex64::new(1.0, 0.0) + inv_alpha * r.dotc(&pr);
    let k = pr.map(|z| inv_alpha * z / denom);
    let rh_p = r.adjoint() * p_prev; // 1 x M
    let mut p = p_prev.map(|z| inv_alpha * z) - k.clone() * rh_p.map(|z| inv_alpha * z);
    symmetrize(&mut p);
    if !is_finite_vector(&k) || !is_finite_matrix(&p) {
        return Err(NumericsError::NonFinite("rank_one_inverse_update"));
    }
    Ok((k, p))
}

/// Identity matrix shorthand.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn random_vector(rng: &mut impl Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_hpd(rng: &mut impl Rng, n: usize) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        a.adjoint() * &a + identity(n) * c(0.1, 0.0)
    }

    #[test]
    fn quadratic_form_identity() {
        let w = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let r = identity(2);
        assert!((hermitian_quadratic_form(&w, &r).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_form_diagonal() {
        let s = 1.0 / 2.0_f64.sqrt();
        let w = CVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]);
        let r = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(4.0, 0.0)]));
        assert!((hermitian_quadratic_form(&w, &r).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..12);
            let r = random_hpd(&mut rng, n);
            let w = random_vector(&mut rng, n);
            let fast = hermitian_quadratic_form(&w, &r).unwrap();
            // naive triple-loop oracle
            let mut acc = C::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    acc += w[i].conj() * r[(i, j)] * w[j];
                }
            }
            assert!((fast - acc.re).abs() <= 1e-12 * acc.re.abs().max(1.0));
        }
    }

    #[test]
    fn quadratic_form_rejects_mismatch_and_asymmetry() {
        let w = CVector::from_vec(vec![c(1.0, 0.0)]);
        let r = identity(2);
        assert!(matches!(
            hermitian_quadratic_form(&w, &r),
            Err(NumericsError::DimensionMismatch(_))
        ));
        let mut bad = identity(2);
        bad[(0, 1)] = c(1.0, 0.0);
        let w2 = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            hermitian_quadratic_form(&w2, &bad),
            Err(NumericsError::NotHermitian { .. })
        ));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let x = solve_hermitian(&identity(2), &b).unwrap();
        assert!((&x - &b).norm() < 1e-14);

        let r = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(5.0, 0.0)]));
        let b = CVector::from_vec(vec![c(2.0, 0.0), c(5.0, 0.0)]);
        let x = solve_hermitian(&r, &b).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn solve_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(2..32);
            let r = random_hpd(&mut rng, n);
            let b = random_vector(&mut rng, n);
            let x = solve_hermitian(&r, &b).unwrap();
            assert!((&r * &x - &b).norm() <= SOLVE_RESIDUAL_TOL * b.norm());
        }
    }

    #[test]
    fn rank_one_update_zero_snapshot() {
        let p = identity(2);
        let r = CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0)]);
        let (k, p_new) = rank_one_inverse_update(&p, &r, 1.0).unwrap();
        assert!(k.norm() == 0.0);
        assert!((&p_new - &p).norm() < 1e-15);
    }

    #[test]
    fn rank_one_update_scalar() {
        let p = identity(1);
        let r = CVector::from_vec(vec![c(1.0, 0.0)]);
        let (k, p_new) = rank_one_inverse_update(&p, &r, 1.0).unwrap();
        assert!((k[0] - c(0.5, 0.0)).norm() < 1e-14);
        assert!((p_new[(0, 0)] - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rank_one_update_tracks_direct_inverse() {
        // 30 sequential updates compared against the direct inverse of the
        // alpha-weighted accumulated covariance.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let alpha = 0.97;
        let delta = 10.0;
        let mut p = identity(n) * c(delta, 0.0);
        let mut cov = identity(n) * c(1.0 / delta, 0.0);
        for _ in 0..30 {
            let r = random_vector(&mut rng, n);
            let (_, p_new) = rank_one_inverse_update(&p, &r, alpha).unwrap();
            p = p_new;
            cov = cov.map(|z| z * alpha) + &r * r.adjoint();
        }
        let prod = &p * &cov;
        assert!((prod - identity(n)).norm() <= 1e-6 * (n as f64).sqrt());
    }

    proptest! {
        #[test]
        fn quadratic_form_nonneg_for_psd(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..10);
            let r = random_hpd(&mut rng, n);
            let w = random_vector(&mut rng, n);
            let q = hermitian_quadratic_form(&w, &r).unwrap();
            prop_assert!(q >= 0.0);
        }
    }
}
