//! Robust joint iterative optimization (RJIO): alternating adaptation of the
//! rank-reduction matrix S_D, the reduced-rank beamformer w̄ and the diagonal
//! loading ε, with SG and RLS recursions plus a fixed-point design oracle
//! built from the alternating closed forms.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{
    identity, invert_hermitian, is_finite_matrix, is_finite_vector, rank_one_inverse_update,
    solve_hermitian, symmetrize, CMatrix, CVector, NumericsError,
};

/// Step sizes, forgetting factor and initialization constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RjioHyperParams {
    pub rank: usize,
    pub mu_s: f64,
    pub mu_w: f64,
    pub mu_eps: f64,
    pub alpha: f64,
    pub delta: f64,
    pub delta_bar: f64,
    /// Initial diagonal loading ε(0).
    pub epsilon0: f64,
}

impl Default for RjioHyperParams {
    fn default() -> Self {
        Self {
            rank: 4,
            mu_s: 1e-3,
            mu_w: 1e-3,
            mu_eps: 1e-4,
            alpha: 0.998,
            delta: 100.0,
            delta_bar: 100.0,
            epsilon0: 0.01,
        }
    }
}

/// Coupled adaptive state {S_D, w̄, ε, P, P̄} evolved per snapshot.
#[derive(Debug, Clone)]
pub struct RjioState {
    pub s_d: CMatrix,
    pub w_bar: CVector,
    pub epsilon: f64,
    pub p: CMatrix,
    pub p_bar: CMatrix,
    pub a_p: CVector,
    pub divergences: u64,
}

impl RjioState {
    pub fn num_sensors(&self) -> usize {
        self.s_d.nrows()
    }

    pub fn rank(&self) -> usize {
        self.s_d.ncols()
    }

    /// Effective full-rank weight S_D w̄.
    pub fn effective_weight(&self) -> CVector {
        &self.s_d * &self.w_bar
    }

    /// |w̄^H S_D^H a_p − 1|
    pub fn constraint_error(&self) -> f64 {
        (self.effective_weight().dotc(&self.a_p) - Complex64::new(1.0, 0.0)).norm()
    }
}

/// §VI initialization: S_D(0) = [I_D; 0], w̄(0) = e_1, P(0) = δI_M,
/// P̄(0) = δ̄I_D.
pub fn rjio_init(
    num_sensors: usize,
    hp: &RjioHyperParams,
    a_p: CVector,
) -> Result<RjioState, NumericsError> {
    let d = hp.rank;
    if d == 0 || d > num_sensors {
        return Err(NumericsError::DimensionMismatch(format!(
            "rank {d} outside 1..={num_sensors}"
        )));
    }
    let s_d = CMatrix::from_fn(num_sensors, d, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut w_bar = DVector::from_element(d, Complex64::new(0.0, 0.0));
    w_bar[0] = Complex64::new(1.0, 0.0);
    Ok(RjioState {
        s_d,
        w_bar,
        epsilon: hp.epsilon0.max(0.0),
        p: identity(num_sensors) * Complex64::new(hp.delta, 0.0),
        p_bar: identity(d) * Complex64::new(hp.delta_bar, 0.0),
        a_p,
        divergences: 0,
    })
}

/// Beamformer output x̄(i) = w̄^H S_D^H r(i).
pub fn rjio_output(state: &RjioState, r: &CVector) -> Complex64 {
    let r_bar = state.s_d.adjoint() * r;
    state.w_bar.dotc(&r_bar)
}

/// Rescale w̄ so that w̄^H S_D^H a_p = 1 exactly.
fn renormalize(w_bar: &mut CVector, s_d: &CMatrix, a_p: &CVector) -> bool {
    let a_bar = s_d.adjoint() * a_p;
    let c = w_bar.dotc(&a_bar); // w̄^H S^H a_p
    if c.norm() < 1e-300 {
        return false;
    }
    let scale = (Complex64::new(1.0, 0.0) / c).conj();
    *w_bar = w_bar.map(|z| scale * z);
    true
}

/// One SG step: gradient recursions for S_D, w̄ and ε followed by an exact
/// constraint renormalization of w̄.
pub fn rjio_sg_step(state: &RjioState, r: &CVector, hp: &RjioHyperParams) -> RjioState {
    let x_bar = rjio_output(state, r);
    let eps = state.epsilon;
    let a_p = &state.a_p;
    let ap_norm2 = a_p.norm_squared();

    // S_D(i+1) = S_D − μ_s [ x̄* r w̄^H + ε S_D w̄ w̄^H
    //            − (a_p^H a_p)⁻¹ a_p w̄^H (x̄* a_p^H r + ε) ]
    let s_w = &state.s_d * &state.w_bar;
    let w_bar_h = state.w_bar.adjoint(); // 1 x D
    let grad_s = r.map(|z| x_bar.conj() * z) * &w_bar_h
        + s_w.map(|z| Complex64::new(eps, 0.0) * z) * &w_bar_h;
    let constraint_scalar =
        (x_bar.conj() * a_p.dotc(r) + Complex64::new(eps, 0.0)) / Complex64::new(ap_norm2, 0.0);
    let correction = a_p.map(|z| constraint_scalar * z) * &w_bar_h;
    let s_next = &state.s_d - (grad_s - correction).map(|z| Complex64::new(hp.mu_s, 0.0) * z);

    // w̄ gradient with the component along the reduced constraint direction
    // removed, then the step.
    let r_bar = state.s_d.adjoint() * r;
    let g_w = r_bar.map(|z| x_bar.conj() * z)
        + (state.s_d.adjoint() * &s_w).map(|z| Complex64::new(eps, 0.0) * z);
    let a_bar = state.s_d.adjoint() * a_p;
    let a_bar_norm2 = a_bar.norm_squared();
    let g_proj = if a_bar_norm2 > 0.0 {
        let coeff = a_bar.dotc(&g_w) / Complex64::new(a_bar_norm2, 0.0);
        &g_w - a_bar.map(|z| coeff * z)
    } else {
        g_w
    };
    let mut w_next = &state.w_bar - g_proj.map(|z| Complex64::new(hp.mu_w, 0.0) * z);

    // ε(i+1) = ε(i) − μ_ε · w̄^H S_D^H S_D w̄, clamped at 0
    let eps_next = (eps - hp.mu_eps * s_w.norm_squared()).max(0.0);

    if !renormalize(&mut w_next, &s_next, a_p)
        || !is_finite_matrix(&s_next)
        || !is_finite_vector(&w_next)
        || !eps_next.is_finite()
    {
        let mut rejected = state.clone();
        rejected.divergences += 1;
        return rejected;
    }

    RjioState {
        s_d: s_next,
        w_bar: w_next,
        epsilon: eps_next,
        p: state.p.clone(),
        p_bar: state.p_bar.clone(),
        a_p: state.a_p.clone(),
        divergences: state.divergences,
    }
}

/// One RLS step following the alternating scheme: P update (with ε² loading),
/// S_D refresh from P, reduced P̄ update, w̄ closed form, ε update.
pub fn rjio_rls_step(state: &RjioState, r: &CVector, hp: &RjioHyperParams) -> RjioState {
    let reject = |s: &RjioState| {
        let mut rejected = s.clone();
        rejected.divergences += 1;
        rejected
    };

    let eps2 = state.epsilon * state.epsilon;
    let a_p = &state.a_p;
    let m = state.num_sensors();
    let d = state.rank();

    // (1) full-dimension inverse-covariance recursion plus ε² loading
    let (_k, mut p) = match rank_one_inverse_update(&state.p, r, hp.alpha) {
        Ok(kp) => kp,
        Err(_) => return reject(state),
    };
    if eps2 > 0.0 {
        p += identity(m) * Complex64::new(eps2, 0.0);
    }
    symmetrize(&mut p);

    // (2) S_D(i) = P a_p a_p^H S_D(i−1) / (a_p^H P a_p)
    let pa = &p * a_p;
    let denom = a_p.dotc(&pa);
    if denom.norm() < 1e-300 {
        return reject(state);
    }
    let row = a_p.adjoint() * &state.s_d; // 1 x D
    let s_next = pa.map(|z| z / denom) * row;
    if !is_finite_matrix(&s_next) {
        return reject(state);
    }

    // (3) reduced-dimension recursion on r̄ = S_D^H r
    let r_bar = s_next.adjoint() * r;
    let (_k_bar, mut p_bar) = match rank_one_inverse_update(&state.p_bar, &r_bar, hp.alpha) {
        Ok(kp) => kp,
        Err(_) => return reject(state),
    };
    if eps2 > 0.0 {
        p_bar += identity(d) * Complex64::new(eps2, 0.0);
    }
    symmetrize(&mut p_bar);

    // (4) w̄ = P̄ S_D^H a_p / (a_p^H S_D P̄ S_D^H a_p)
    let a_bar = s_next.adjoint() * a_p;
    let pba = &p_bar * &a_bar;
    let denom_bar = a_bar.dotc(&pba);
    if denom_bar.norm() < 1e-300 {
        return reject(state);
    }
    let w_next = pba.map(|z| z / denom_bar);
    if !is_finite_vector(&w_next) {
        return reject(state);
    }

    // (5) ε(i+1) = ε(i) − μ_ε ‖S_D w̄‖², clamped at 0
    let eps_next = (state.epsilon - hp.mu_eps * (&s_next * &w_next).norm_squared()).max(0.0);
    if !eps_next.is_finite() {
        return reject(state);
    }

    RjioState {
        s_d: s_next,
        w_bar: w_next,
        epsilon: eps_next,
        p,
        p_bar,
        a_p: state.a_p.clone(),
        divergences: state.divergences,
    }
}

/// Outcome of the alternating closed-form iteration.
#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub s_d: CMatrix,
    pub w_bar: CVector,
    pub converged: bool,
    pub iterations: usize,
    /// Final w̄^H S_D^H R̂ S_D w̄.
    pub output_power: f64,
}

/// Alternate the two closed-form expressions (reduced-rank beamformer for a
/// fixed S_D, then S_D for a fixed w̄, with E[w̄ w̄^H] regularized as
/// w̄ w̄^H + ρI) until the output power stabilizes.
pub fn rjio_fixed_point(
    r_hat: &CMatrix,
    a_p: &CVector,
    rank: usize,
    epsilon2: f64,
    max_iters: usize,
    tol: f64,
) -> Result<FixedPointResult, NumericsError> {
    let m = r_hat.nrows();
    if rank == 0 || rank > m {
        return Err(NumericsError::DimensionMismatch(format!(
            "rank {rank} outside 1..={m}"
        )));
    }
    let hp = RjioHyperParams {
        rank,
        ..Default::default()
    };
    let init = rjio_init(m, &hp, a_p.clone())?;
    let mut s_d = init.s_d;
    let mut w_bar = init.w_bar;

    let loaded = r_hat + identity(m) * Complex64::new(epsilon2, 0.0);
    let loaded_inv_ap = solve_hermitian(&loaded, a_p)?;
    let ap_loaded = a_p.dotc(&loaded_inv_ap); // a_p^H (R+ε²I)⁻¹ a_p

    let mut prev_power = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iters {
        iterations = iter + 1;

        // beamformer half-step: w̄ = (S^H R S + ε² S^H S)⁻¹ ā / (ā^H (·)⁻¹ ā),
        // with a trace-scaled ridge so rank-deficient S stays solvable
        let g = s_d.adjoint() * &s_d;
        let mut reduced = s_d.adjoint() * r_hat * &s_d + g.map(|z| Complex64::new(epsilon2, 0.0) * z);
        symmetrize(&mut reduced);
        let trace: f64 = reduced.diagonal().iter().map(|z| z.re).sum();
        let ridge = 1e-12 * trace.max(1e-30);
        let reduced_reg = &reduced + identity(rank) * Complex64::new(ridge, 0.0);
        let a_bar = s_d.adjoint() * a_p;
        let sol = solve_hermitian(&reduced_reg, &a_bar)?;
        let denom = a_bar.dotc(&sol);
        if denom.norm() < 1e-300 {
            return Err(NumericsError::Singular {
                cond_estimate: f64::INFINITY,
            });
        }
        w_bar = sol.map(|z| z / denom);

        let power_half = {
            let sw = &s_d * &w_bar;
            sw.dotc(&(r_hat * &sw)).re
        };

        // rank-reduction half-step:
        // S = (R+ε²I)⁻¹ a_p w̄^H (w̄ w̄^H + ρI)⁻¹ / (w̄^H (·)⁻¹ w̄ · a_p^H (R+ε²I)⁻¹ a_p)
        let rho = 1e-8 * w_bar.norm_squared();
        let r_w = &w_bar * w_bar.adjoint() + identity(rank) * Complex64::new(rho, 0.0);
        let r_w_inv = invert_hermitian(&r_w)?;
        let wh_rw_inv = w_bar.adjoint() * &r_w_inv; // 1 x D
        let quad = (&wh_rw_inv * &w_bar)[(0, 0)];
        let scale = quad * ap_loaded;
        if scale.norm() < 1e-300 {
            return Err(NumericsError::Singular {
                cond_estimate: f64::INFINITY,
            });
        }
        s_d = loaded_inv_ap.map(|z| z / scale) * wh_rw_inv;

        let power = {
            let sw = &s_d * &w_bar;
            sw.dotc(&(r_hat * &sw)).re
        };
        let scale_ref = power.abs().max(power_half.abs()).max(1e-30);
        if (prev_power - power).abs() <= tol * scale_ref {
            converged = true;
            break;
        }
        prev_power = power;
    }

    renormalize(&mut w_bar, &s_d, a_p);
    let output_power = {
        let sw = &s_d * &w_bar;
        sw.dotc(&(r_hat * &sw)).re
    };
    Ok(FixedPointResult {
        s_d,
        w_bar,
        converged,
        iterations,
        output_power,
    })
}

// ---------------------------------------------------------------------------
// JSON state snapshots (complex numbers as [re, im] pairs)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RjioStateJson {
    num_sensors: usize,
    rank: usize,
    s_d: Vec<[f64; 2]>,
    w_bar: Vec<[f64; 2]>,
    epsilon: f64,
    p: Vec<[f64; 2]>,
    p_bar: Vec<[f64; 2]>,
    a_p: Vec<[f64; 2]>,
    divergences: u64,
}

fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    // row-major
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn vector_to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn matrix_from_pairs(rows: usize, cols: usize, data: &[[f64; 2]]) -> CMatrix {
    CMatrix::from_fn(rows, cols, |i, j| {
        let [re, im] = data[i * cols + j];
        Complex64::new(re, im)
    })
}

fn vector_from_pairs(data: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(data.len(), data.iter().map(|[re, im]| Complex64::new(*re, *im)))
}

impl RjioState {
    pub fn to_json(&self) -> serde_json::Value {
        let m = self.num_sensors();
        let d = self.rank();
        serde_json::to_value(RjioStateJson {
            num_sensors: m,
            rank: d,
            s_d: matrix_to_pairs(&self.s_d),
            w_bar: vector_to_pairs(&self.w_bar),
            epsilon: self.epsilon,
            p: matrix_to_pairs(&self.p),
            p_bar: matrix_to_pairs(&self.p_bar),
            a_p: vector_to_pairs(&self.a_p),
            divergences: self.divergences,
        })
        .expect("state serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let raw: RjioStateJson = serde_json::from_value(value.clone())?;
        Ok(RjioState {
            s_d: matrix_from_pairs(raw.num_sensors, raw.rank, &raw.s_d),
            w_bar: vector_from_pairs(&raw.w_bar),
            epsilon: raw.epsilon,
            p: matrix_from_pairs(raw.num_sensors, raw.num_sensors, &raw.p),
            p_bar: matrix_from_pairs(raw.rank, raw.rank, &raw.p_bar),
            a_p: vector_from_pairs(&raw.a_p),
            divergences: raw.divergences,
        })
    }
}
