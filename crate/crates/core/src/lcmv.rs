//! Closed-form full-rank and reduced-rank LCMV beamformers (plain and
//! diagonally loaded) and the classical full-rank constrained SG / RLS
//! adaptive baselines.

use num_complex::Complex64;

use crate::numerics::{
    identity, is_finite_vector, rank_one_inverse_update, solve_hermitian, symmetrize, CMatrix,
    CVector, NumericsError,
};

/// Full-rank LCMV beamformer with its unity-gain constraint vector.
#[derive(Debug, Clone)]
pub struct FullRankBeamformer {
    pub w: CVector,
    pub constraint: CVector,
}

impl FullRankBeamformer {
    /// |w^H a_c − 1|
    pub fn constraint_error(&self) -> f64 {
        (self.w.dotc(&self.constraint) - Complex64::new(1.0, 0.0)).norm()
    }

    /// Feasible starting point w = a_c / ‖a_c‖².
    pub fn feasible_init(constraint: CVector) -> Self {
        let scale = Complex64::new(1.0 / constraint.norm_squared(), 0.0);
        let w = constraint.map(|z| scale * z);
        Self { w, constraint }
    }
}

/// Reduced-rank beamformer: effective weight is S_D w̄.
#[derive(Debug, Clone)]
pub struct ReducedRankBeamformer {
    pub w_bar: CVector,
    pub projection: CMatrix,
    pub constraint: CVector,
}

impl ReducedRankBeamformer {
    pub fn effective_weight(&self) -> CVector {
        &self.projection * &self.w_bar
    }

    pub fn constraint_error(&self) -> f64 {
        let reduced_constraint = self.projection.adjoint() * &self.constraint;
        (self.w_bar.dotc(&reduced_constraint) - Complex64::new(1.0, 0.0)).norm()
    }
}

/// w = R⁻¹a / (a^H R⁻¹ a).
pub fn optimal_lcmv(r: &CMatrix, a: &CVector) -> Result<FullRankBeamformer, NumericsError> {
    let r_inv_a = solve_hermitian(r, a)?;
    let denom = a.dotc(&r_inv_a);
    let w = r_inv_a.map(|z| z / denom);
    Ok(FullRankBeamformer {
        w,
        constraint: a.clone(),
    })
}

/// Diagonally loaded LCMV: w = (R + ε²I)⁻¹ a_p / (a_p^H (R + ε²I)⁻¹ a_p).
pub fn loaded_lcmv(
    r: &CMatrix,
    a_p: &CVector,
    epsilon2: f64,
) -> Result<FullRankBeamformer, NumericsError> {
    let loaded = r + identity(r.nrows()) * Complex64::new(epsilon2, 0.0);
    optimal_lcmv(&loaded, a_p)
}

/// Reduced-rank LCMV on the subspace spanned by S_D, with optional loading:
/// w̄ = (S_D^H R S_D + ε²I_D)⁻¹ S_D^H a / (a^H S_D (·)⁻¹ S_D^H a).
pub fn reduced_rank_lcmv(
    r: &CMatrix,
    s_d: &CMatrix,
    a: &CVector,
    epsilon2: f64,
) -> Result<ReducedRankBeamformer, NumericsError> {
    let d = s_d.ncols();
    let mut r_bar = s_d.adjoint() * r * s_d + identity(d) * Complex64::new(epsilon2, 0.0);
    symmetrize(&mut r_bar);
    let a_bar = s_d.adjoint() * a;
    let sol = solve_hermitian(&r_bar, &a_bar).map_err(|e| match e {
        NumericsError::Singular { cond_estimate } => NumericsError::Singular { cond_estimate },
        other => other,
    })?;
    let denom = a_bar.dotc(&sol);
    let w_bar = sol.map(|z| z / denom);
    Ok(ReducedRankBeamformer {
        w_bar,
        projection: s_d.clone(),
        constraint: a.clone(),
    })
}

/// One Frost projected-gradient step:
/// w ← Π[w − μ x*(i) r] + a_c/(a_c^H a_c), Π = I − a_c a_c^H/(a_c^H a_c).
pub fn lcmv_sg_step(state: &FullRankBeamformer, r: &CVector, mu: f64) -> FullRankBeamformer {
    let a_c = &state.constraint;
    let ac_norm2 = a_c.norm_squared();
    let x = state.w.dotc(r); // w^H r
    let grad_step = &state.w - r.map(|z| Complex64::new(mu, 0.0) * x.conj() * z);
    // Π v = v − a_c (a_c^H v) / ‖a_c‖²
    let coeff = a_c.dotc(&grad_step) / Complex64::new(ac_norm2, 0.0);
    let projected = &grad_step - a_c.map(|z| coeff * z);
    let w = projected + a_c.map(|z| z / Complex64::new(ac_norm2, 0.0));
    FullRankBeamformer {
        w,
        constraint: a_c.clone(),
    }
}

/// One constrained RLS step: update P by the inversion lemma, then
/// w = P a_c / (a_c^H P a_c).
pub fn lcmv_rls_step(
    state: &FullRankBeamformer,
    p_prev: &CMatrix,
    r: &CVector,
    alpha: f64,
) -> Result<(FullRankBeamformer, CMatrix), NumericsError> {
    let (_k, p) = rank_one_inverse_update(p_prev, r, alpha)?;
    let a_c = &state.constraint;
    let pa = &p * a_c;
    let denom = a_c.dotc(&pa);
    let w = pa.map(|z| z / denom);
    if !is_finite_vector(&w) {
        return Err(NumericsError::NonFinite("lcmv_rls_step"));
    }
    Ok((
        FullRankBeamformer {
            w,
            constraint: a_c.clone(),
        },
        p,
    ))
}
