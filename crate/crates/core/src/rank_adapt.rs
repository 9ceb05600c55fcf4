//! Automatic rank selection over [D_min, D_max] driven by the exponentially
//! weighted a posteriori least-squares cost of each leading-d truncation of a
//! single extended-rank RJIO state.

use num_complex::Complex64;

use crate::numerics::{CMatrix, CVector};
use crate::rjio::{rjio_output, RjioState};

/// Extended rank-D_max state plus windowed cost bookkeeping.
#[derive(Debug, Clone)]
pub struct RankAdaptState {
    pub inner: RjioState,
    pub d_min: usize,
    pub d_max: usize,
    /// Cost accumulators C_d for d in [d_min, d_max].
    pub costs: Vec<f64>,
    /// Forgetting factor of the cost recursion.
    pub alpha: f64,
    pub d_opt: usize,
}

pub const DEFAULT_D_MIN: usize = 3;
pub const DEFAULT_D_MAX: usize = 8;

impl RankAdaptState {
    pub fn new(inner: RjioState, d_min: usize, d_max: usize, alpha: f64) -> Self {
        assert!(d_min >= 1 && d_min <= d_max, "need 1 <= d_min <= d_max");
        assert_eq!(
            inner.rank(),
            d_max,
            "extended state must be maintained at rank d_max"
        );
        let costs = vec![0.0; d_max - d_min + 1];
        Self {
            inner,
            d_min,
            d_max,
            costs,
            alpha,
            d_opt: d_min,
        }
    }

    /// Leading-d truncation output w̄[..d]^H S_D[:, ..d]^H r.
    pub fn truncated_output(&self, d: usize, r: &CVector) -> Complex64 {
        let s_lead = self.inner.s_d.columns(0, d);
        let r_bar = s_lead.adjoint() * r;
        let w_lead = self.inner.w_bar.rows(0, d);
        w_lead.dotc(&r_bar)
    }

    /// Constraint response c_d = w̄[..d]^H S_D[:, ..d]^H a_p of the leading-d
    /// truncation. Only the full d_max state is renormalized to c = 1, so the
    /// truncations must be rescaled by their own response before their outputs
    /// are comparable across ranks.
    pub fn truncated_constraint(&self, d: usize) -> Complex64 {
        self.truncated_output(d, &self.inner.a_p)
    }

    /// Truncated output rescaled so the truncation meets the unit constraint:
    /// x̄_d / c_d. A degenerate response |c_d| ≈ 0 yields a huge value, which
    /// steers the rank selection away from that truncation.
    pub fn normalized_truncated_output(&self, d: usize, r: &CVector) -> Complex64 {
        let c = self.truncated_constraint(d);
        let x = self.truncated_output(d, r);
        if c.norm() < 1e-300 {
            return Complex64::new(f64::MAX.sqrt(), 0.0);
        }
        x / c
    }

    /// Effective weight of the currently selected truncation, rescaled to meet
    /// the unit constraint; used for scoring.
    pub fn effective_weight(&self) -> CVector {
        let d = self.d_opt;
        let s_lead: CMatrix = self.inner.s_d.columns(0, d).into_owned();
        let w_lead: CVector = self.inner.w_bar.rows(0, d).into_owned();
        let w = &s_lead * &w_lead;
        let c = self.truncated_constraint(d);
        if c.norm() < 1e-300 {
            return w;
        }
        let scale = (Complex64::new(1.0, 0.0) / c).conj();
        w.map(|z| z * scale)
    }
}

/// C_d ← α·C_d + |x̄_d(i)/c_d|² for every candidate rank, with x̄_d evaluated
/// on the state passed in (the filters of the previous snapshot) and rescaled
/// by the truncated constraint response c_d.
pub fn rank_cost_update(state: &RankAdaptState, r: &CVector) -> Vec<f64> {
    let mut costs = state.costs.clone();
    for (slot, d) in (state.d_min..=state.d_max).enumerate() {
        let x_d = state.normalized_truncated_output(d, r);
        costs[slot] = state.alpha * costs[slot] + x_d.norm_sqr();
    }
    costs
}

/// argmin_d C_d with ties broken toward smaller d.
pub fn select_rank(state: &RankAdaptState) -> usize {
    let mut best = state.d_min;
    let mut best_cost = state.costs[0];
    for (slot, d) in (state.d_min..=state.d_max).enumerate().skip(1) {
        if state.costs[slot] < best_cost {
            best_cost = state.costs[slot];
            best = d;
        }
    }
    best
}

/// One adaptive-rank step: refresh the costs with the pre-step filters, run
/// the inner SG/RLS stepper on the full extended state, then re-select the
/// rank.
pub fn adapt_step<F>(state: &RankAdaptState, stepper: F, r: &CVector) -> RankAdaptState
where
    F: FnOnce(&RjioState, &CVector) -> RjioState,
{
    let costs = rank_cost_update(state, r);
    let inner = stepper(&state.inner, r);
    let mut next = RankAdaptState {
        inner,
        d_min: state.d_min,
        d_max: state.d_max,
        costs,
        alpha: state.alpha,
        d_opt: state.d_opt,
    };
    next.d_opt = select_rank(&next);
    next
}

/// Convenience: constraint-rescaled output of the currently selected
/// truncation.
pub fn selected_output(state: &RankAdaptState, r: &CVector) -> Complex64 {
    if state.d_opt == state.d_max {
        rjio_output(&state.inner, r)
    } else {
        state.normalized_truncated_output(state.d_opt, r)
    }
}
