//! Scenario definitions, Monte Carlo execution, SINR scoring against true
//! covariances, complexity accounting and result emission.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{
    presumed_steering, steering_vector, stream, substream_rng, synthesize_snapshot,
    true_covariances, ArrayGeometry, MismatchModel, SourceSet, TrueCovariances,
};
use crate::lcmv::{lcmv_rls_step, lcmv_sg_step, loaded_lcmv, optimal_lcmv, FullRankBeamformer};
use crate::numerics::{hermitian_quadratic_form, identity, CMatrix, CVector, NumericsError};
use crate::rank_adapt::{adapt_step, RankAdaptState};
use crate::rjio::{rjio_init, rjio_rls_step, rjio_sg_step, RjioHyperParams, RjioState};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("algorithm {algorithm}: {excluded}/{total} trials diverged (threshold 5%)")]
    DivergenceThreshold {
        algorithm: String,
        excluded: usize,
        total: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// 10·log10(w^H R_s w / w^H R_I w).
pub fn sinr_db(w: &CVector, r_s: &CMatrix, r_i: &CMatrix) -> Result<f64, NumericsError> {
    let num = hermitian_quadratic_form(w, r_s)?;
    let den = hermitian_quadratic_form(w, r_i)?;
    if den <= 0.0 {
        return Err(NumericsError::NonFinite("sinr denominator"));
    }
    Ok(10.0 * (num / den).log10())
}

// ---------------------------------------------------------------------------
// Algorithm specifications
// ---------------------------------------------------------------------------

fn default_mu() -> f64 {
    1e-3
}
fn default_mu_eps() -> f64 {
    1e-4
}
fn default_alpha() -> f64 {
    0.998
}
fn default_delta() -> f64 {
    100.0
}
fn default_epsilon0() -> f64 {
    0.01
}
fn default_rank() -> usize {
    4
}
fn default_d_min() -> usize {
    crate::rank_adapt::DEFAULT_D_MIN
}
fn default_d_max() -> usize {
    crate::rank_adapt::DEFAULT_D_MAX
}
fn default_epsilon2() -> f64 {
    0.0
}

/// One algorithm to stream through a scenario.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    /// Clairvoyant LCMV: true covariance and true steering vector.
    Optimal,
    /// Clairvoyant covariance with the presumed (mismatched) steering vector.
    MismatchedLcmv,
    /// Diagonally loaded clairvoyant LCMV with the presumed steering vector.
    LoadedLcmv {
        #[serde(default = "default_epsilon2")]
        epsilon2: f64,
    },
    /// Frost projected-gradient LCMV on the presumed steering vector.
    LcmvSg {
        #[serde(default = "default_mu")]
        mu: f64,
    },
    /// Constrained RLS LCMV on the presumed steering vector.
    LcmvRls {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    RjioSg {
        #[serde(default = "default_rank")]
        rank: usize,
        #[serde(default = "default_mu")]
        mu_s: f64,
        #[serde(default = "default_mu")]
        mu_w: f64,
        #[serde(default = "default_mu_eps")]
        mu_eps: f64,
        #[serde(default = "default_epsilon0")]
        epsilon0: f64,
    },
    RjioRls {
        #[serde(default = "default_rank")]
        rank: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_delta")]
        delta_bar: f64,
        #[serde(default = "default_mu_eps")]
        mu_eps: f64,
        #[serde(default = "default_epsilon0")]
        epsilon0: f64,
    },
    RjioSgAuto {
        #[serde(default = "default_d_min")]
        d_min: usize,
        #[serde(default = "default_d_max")]
        d_max: usize,
        #[serde(default = "default_mu")]
        mu_s: f64,
        #[serde(default = "default_mu")]
        mu_w: f64,
        #[serde(default = "default_mu_eps")]
        mu_eps: f64,
        #[serde(default = "default_epsilon0")]
        epsilon0: f64,
        #[serde(default = "default_alpha")]
        cost_alpha: f64,
    },
    RjioRlsAuto {
        #[serde(default = "default_d_min")]
        d_min: usize,
        #[serde(default = "default_d_max")]
        d_max: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_delta")]
        delta_bar: f64,
        #[serde(default = "default_mu_eps")]
        mu_eps: f64,
        #[serde(default = "default_epsilon0")]
        epsilon0: f64,
        #[serde(default = "default_alpha")]
        cost_alpha: f64,
    },
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Optimal => "optimal".into(),
            AlgorithmSpec::MismatchedLcmv => "lcmv-mismatched".into(),
            AlgorithmSpec::LoadedLcmv { .. } => "lcmv-loaded".into(),
            AlgorithmSpec::LcmvSg { .. } => "lcmv-sg".into(),
            AlgorithmSpec::LcmvRls { .. } => "lcmv-rls".into(),
            AlgorithmSpec::RjioSg { rank, .. } => format!("rjio-sg-d{rank}"),
            AlgorithmSpec::RjioRls { rank, .. } => format!("rjio-rls-d{rank}"),
            AlgorithmSpec::RjioSgAuto { .. } => "rjio-sg-auto".into(),
            AlgorithmSpec::RjioRlsAuto { .. } => "rjio-rls-auto".into(),
        }
    }

    pub fn emits_rank(&self) -> bool {
        matches!(
            self,
            AlgorithmSpec::RjioSgAuto { .. } | AlgorithmSpec::RjioRlsAuto { .. }
        )
    }

    /// Replace the fixed rank on RJIO variants (used by the rank sweep).
    pub fn with_rank(&self, d: usize) -> AlgorithmSpec {
        let mut spec = self.clone();
        match &mut spec {
            AlgorithmSpec::RjioSg { rank, .. } | AlgorithmSpec::RjioRls { rank, .. } => *rank = d,
            _ => {}
        }
        spec
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub snapshot_index: usize,
    pub sources: SourceSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub geometry: ArrayGeometry,
    pub sources: SourceSet,
    pub mismatch: MismatchModel,
    pub num_snapshots: usize,
    pub num_trials: usize,
    #[serde(default)]
    pub change_events: Vec<ChangeEvent>,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub master_seed: u64,
    /// When set, interferer powers are redrawn per trial with their dB value
    /// normal around the SoI power, with this standard deviation in dB.
    #[serde(default)]
    pub lognormal_interferer_db: Option<f64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.num_snapshots == 0 || self.num_trials == 0 {
            return Err(HarnessError::Config(
                "num_snapshots and num_trials must be >= 1".into(),
            ));
        }
        self.sources
            .validate(&self.geometry)
            .map_err(HarnessError::Config)?;
        let mut last = 0usize;
        for ev in &self.change_events {
            if ev.snapshot_index < last {
                return Err(HarnessError::Config(
                    "change_events must be sorted by snapshot index".into(),
                ));
            }
            if ev.snapshot_index >= self.num_snapshots {
                return Err(HarnessError::Config(format!(
                    "change event at {} is beyond num_snapshots {}",
                    ev.snapshot_index, self.num_snapshots
                )));
            }
            ev.sources
                .validate(&self.geometry)
                .map_err(HarnessError::Config)?;
            last = ev.snapshot_index;
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("no algorithms configured".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> u64 {
        let text = serde_json::to_string(self).expect("scenario serializes");
        let mut h = DefaultHasher::new();
        text.hash(&mut h);
        h.finish()
    }
}

// ---------------------------------------------------------------------------
// Run options and outputs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgDomain {
    Db,
    Linear,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed_override: Option<u64>,
    pub trials_override: Option<usize>,
    pub trial_offset: usize,
    pub workers: Option<usize>,
    pub avg_domain: AvgDomain,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed_override: None,
            trials_override: None,
            trial_offset: 0,
            workers: None,
            avg_domain: AvgDomain::Db,
        }
    }
}

/// Per-snapshot mean SINR for one algorithm, averaged over trials.
#[derive(Debug, Clone, Serialize)]
pub struct SinrTrace {
    pub algorithm: String,
    pub mean_sinr_db: Vec<f64>,
    pub mean_selected_rank: Option<Vec<f64>>,
    pub trials_used: usize,
    pub trials_excluded: usize,
    pub divergent_steps: u64,
}

impl SinrTrace {
    /// Mean SINR over the last `frac` of snapshots.
    pub fn steady_state_db(&self, frac: f64) -> f64 {
        let n = self.mean_sinr_db.len();
        let k = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        self.mean_sinr_db[n - k..].iter().sum::<f64>() / k as f64
    }

    /// First snapshot index after which the trace stays within `band` dB of
    /// `target` for the rest of the horizon.
    pub fn settling_index(&self, target: f64, band: f64) -> Option<usize> {
        settling_index(&self.mean_sinr_db, target, band)
    }

    /// First snapshot index at or after `from` where the trace is within
    /// `band` dB of `target`.
    pub fn first_within(&self, from: usize, target: f64, band: f64) -> Option<usize> {
        first_within(&self.mean_sinr_db, from, target, band)
    }
}

/// First index after which every later value stays within `band` of `target`.
pub fn settling_index(trace: &[f64], target: f64, band: f64) -> Option<usize> {
    let mut idx = 0;
    for (i, &x) in trace.iter().enumerate() {
        if (x - target).abs() > band {
            idx = i + 1;
        }
    }
    (idx < trace.len()).then_some(idx)
}

/// First index at or after `from` where the value is within `band` of
/// `target`.
pub fn first_within(trace: &[f64], from: usize, target: f64, band: f64) -> Option<usize> {
    trace
        .iter()
        .enumerate()
        .skip(from)
        .find(|(_, &x)| (x - target).abs() <= band)
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub master_seed: u64,
    pub trials: usize,
    pub config_hash: String,
    pub divergent_trials: Vec<(String, usize)>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub traces: Vec<SinrTrace>,
    pub manifest: RunManifest,
}

impl RunOutput {
    /// Fails when more than 5% of trials had to be excluded for any
    /// algorithm.
    pub fn check_divergence_threshold(&self) -> Result<(), HarnessError> {
        for t in &self.traces {
            let total = t.trials_used + t.trials_excluded;
            if 20 * t.trials_excluded > total {
                return Err(HarnessError::DivergenceThreshold {
                    algorithm: t.algorithm.clone(),
                    excluded: t.trials_excluded,
                    total,
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Per-trial execution
// ---------------------------------------------------------------------------

enum AlgState {
    Static {
        w: CVector,
    },
    Sg {
        bf: FullRankBeamformer,
        mu: f64,
    },
    Rls {
        bf: FullRankBeamformer,
        p: CMatrix,
        alpha: f64,
    },
    RjioSg {
        st: RjioState,
        hp: RjioHyperParams,
    },
    RjioRls {
        st: RjioState,
        hp: RjioHyperParams,
    },
    AutoSg {
        st: RankAdaptState,
        hp: RjioHyperParams,
    },
    AutoRls {
        st: RankAdaptState,
        hp: RjioHyperParams,
    },
}

struct TrialResult {
    /// sinr per snapshot per algorithm; NaN marks divergence
    sinr_db: Vec<Vec<f64>>,
    ranks: Vec<Option<Vec<f64>>>,
    divergent: Vec<bool>,
    divergent_steps: Vec<u64>,
}

fn realize_sources(scenario: &Scenario, rng: &mut impl Rng) -> SourceSet {
    let mut sources = scenario.sources.clone();
    if let Some(std_db) = scenario.lognormal_interferer_db {
        let soi_db = 10.0 * sources.soi_power.log10();
        let dist = Normal::new(0.0, std_db).expect("valid stddev");
        for p in sources.interferer_powers.iter_mut() {
            let db = soi_db + dist.sample(rng);
            *p = 10f64.powf(db / 10.0);
        }
    }
    sources
}

fn static_weight(
    spec: &AlgorithmSpec,
    cov: &TrueCovariances,
    a_true: &CVector,
    a_p: &CVector,
) -> Result<CVector, NumericsError> {
    match spec {
        AlgorithmSpec::Optimal => Ok(optimal_lcmv(&cov.r, a_true)?.w),
        AlgorithmSpec::MismatchedLcmv => Ok(optimal_lcmv(&cov.r, a_p)?.w),
        AlgorithmSpec::LoadedLcmv { epsilon2 } => Ok(loaded_lcmv(&cov.r, a_p, *epsilon2)?.w),
        _ => unreachable!("static_weight called on adaptive spec"),
    }
}

fn init_state(
    spec: &AlgorithmSpec,
    m: usize,
    cov: &TrueCovariances,
    a_true: &CVector,
    a_p: &CVector,
) -> Result<AlgState, NumericsError> {
    Ok(match spec {
        AlgorithmSpec::Optimal | AlgorithmSpec::MismatchedLcmv | AlgorithmSpec::LoadedLcmv { .. } => {
            AlgState::Static {
                w: static_weight(spec, cov, a_true, a_p)?,
            }
        }
        AlgorithmSpec::LcmvSg { mu } => AlgState::Sg {
            bf: FullRankBeamformer::feasible_init(a_p.clone()),
            mu: *mu,
        },
        AlgorithmSpec::LcmvRls { alpha, delta } => AlgState::Rls {
            bf: FullRankBeamformer::feasible_init(a_p.clone()),
            p: identity(m) * Complex64::new(*delta, 0.0),
            alpha: *alpha,
        },
        AlgorithmSpec::RjioSg {
            rank,
            mu_s,
            mu_w,
            mu_eps,
            epsilon0,
        } => {
            let hp = RjioHyperParams {
                rank: *rank,
                mu_s: *mu_s,
                mu_w: *mu_w,
                mu_eps: *mu_eps,
                epsilon0: *epsilon0,
                ..Default::default()
            };
            AlgState::RjioSg {
                st: rjio_init(m, &hp, a_p.clone())?,
                hp,
            }
        }
        AlgorithmSpec::RjioRls {
            rank,
            alpha,
            delta,
            delta_bar,
            mu_eps,
            epsilon0,
        } => {
            let hp = RjioHyperParams {
                rank: *rank,
                alpha: *alpha,
                delta: *delta,
                delta_bar: *delta_bar,
                mu_eps: *mu_eps,
                epsilon0: *epsilon0,
                ..Default::default()
            };
            AlgState::RjioRls {
                st: rjio_init(m, &hp, a_p.clone())?,
                hp,
            }
        }
        AlgorithmSpec::RjioSgAuto {
            d_min,
            d_max,
            mu_s,
            mu_w,
            mu_eps,
            epsilon0,
            cost_alpha,
        } => {
            let hp = RjioHyperParams {
                rank: *d_max,
                mu_s: *mu_s,
                mu_w: *mu_w,
                mu_eps: *mu_eps,
                epsilon0: *epsilon0,
                ..Default::default()
            };
            AlgState::AutoSg {
                st: RankAdaptState::new(rjio_init(m, &hp, a_p.clone())?, *d_min, *d_max, *cost_alpha),
                hp,
            }
        }
        AlgorithmSpec::RjioRlsAuto {
            d_min,
            d_max,
            alpha,
            delta,
            delta_bar,
            mu_eps,
            epsilon0,
            cost_alpha,
        } => {
            let hp = RjioHyperParams {
                rank: *d_max,
                alpha: *alpha,
                delta: *delta,
                delta_bar: *delta_bar,
                mu_eps: *mu_eps,
                epsilon0: *epsilon0,
                ..Default::default()
            };
            AlgState::AutoRls {
                st: RankAdaptState::new(rjio_init(m, &hp, a_p.clone())?, *d_min, *d_max, *cost_alpha),
                hp,
            }
        }
    })
}

fn run_trial(scenario: &Scenario, master_seed: u64, trial: u64) -> TrialResult {
    let geom = &scenario.geometry;
    let m = geom.num_sensors;
    let n = scenario.num_snapshots;
    let n_alg = scenario.algorithms.len();

    let mut power_rng = substream_rng(master_seed, trial, stream::POWERS);
    let base_sources = realize_sources(scenario, &mut power_rng);

    let mut mismatch_rng = substream_rng(master_seed, trial, stream::MISMATCH);
    let a_true = steering_vector(geom, base_sources.soi_doa_deg);
    let a_p = presumed_steering(geom, base_sources.soi_doa_deg, &scenario.mismatch, &mut mismatch_rng);

    let mut snapshot_rng = substream_rng(master_seed, trial, stream::SNAPSHOTS);

    let mut sinr = vec![vec![f64::NAN; n]; n_alg];
    let mut ranks: Vec<Option<Vec<f64>>> = scenario
        .algorithms
        .iter()
        .map(|a| a.emits_rank().then(|| vec![f64::NAN; n]))
        .collect();
    let mut divergent = vec![false; n_alg];
    let mut divergent_steps = vec![0u64; n_alg];

    let mut cur_sources = base_sources.clone();
    let mut cov = true_covariances(geom, &cur_sources);

    let mut states: Vec<Option<AlgState>> = scenario
        .algorithms
        .iter()
        .map(|spec| init_state(spec, m, &cov, &a_true, &a_p).ok())
        .collect();
    for (idx, st) in states.iter().enumerate() {
        if st.is_none() {
            divergent[idx] = true;
        }
    }

    let mut events = scenario.change_events.iter().peekable();

    for i in 0..n {
        if let Some(ev) = events.peek() {
            if ev.snapshot_index == i {
                cur_sources = ev.sources.clone();
                cov = true_covariances(geom, &cur_sources);
                // static (clairvoyant) algorithms are recomputed for the new
                // segment; adaptive states persist
                for (idx, spec) in scenario.algorithms.iter().enumerate() {
                    if let Some(AlgState::Static { w }) = states[idx].as_mut() {
                        match static_weight(spec, &cov, &a_true, &a_p) {
                            Ok(new_w) => *w = new_w,
                            Err(_) => divergent[idx] = true,
                        }
                    }
                }
                events.next();
            }
        }

        let r = synthesize_snapshot(geom, &cur_sources, &mut snapshot_rng);

        for (idx, state) in states.iter_mut().enumerate() {
            if divergent[idx] {
                continue;
            }
            let Some(state) = state.as_mut() else {
                continue;
            };
            let w_eff: CVector = match state {
                AlgState::Static { w } => w.clone(),
                AlgState::Sg { bf, mu } => {
                    *bf = lcmv_sg_step(bf, &r, *mu);
                    bf.w.clone()
                }
                AlgState::Rls { bf, p, alpha } => match lcmv_rls_step(bf, p, &r, *alpha) {
                    Ok((next, p_next)) => {
                        *bf = next;
                        *p = p_next;
                        bf.w.clone()
                    }
                    Err(_) => {
                        divergent_steps[idx] += 1;
                        bf.w.clone()
                    }
                },
                AlgState::RjioSg { st, hp } => {
                    let before = st.divergences;
                    *st = rjio_sg_step(st, &r, hp);
                    divergent_steps[idx] += st.divergences - before;
                    st.effective_weight()
                }
                AlgState::RjioRls { st, hp } => {
                    let before = st.divergences;
                    *st = rjio_rls_step(st, &r, hp);
                    divergent_steps[idx] += st.divergences - before;
                    st.effective_weight()
                }
                AlgState::AutoSg { st, hp } => {
                    let before = st.inner.divergences;
                    *st = adapt_step(st, |inner, r| rjio_sg_step(inner, r, hp), &r);
                    divergent_steps[idx] += st.inner.divergences - before;
                    st.effective_weight()
                }
                AlgState::AutoRls { st, hp } => {
                    let before = st.inner.divergences;
                    *st = adapt_step(st, |inner, r| rjio_rls_step(inner, r, hp), &r);
                    divergent_steps[idx] += st.inner.divergences - before;
                    st.effective_weight()
                }
            };
            match sinr_db(&w_eff, &cov.r_s, &cov.r_i) {
                Ok(db) if db.is_finite() => sinr[idx][i] = db,
                _ => divergent[idx] = true,
            }
            if let (AlgState::AutoSg { st, .. } | AlgState::AutoRls { st, .. }, Some(rank_trace)) =
                (&*state, ranks[idx].as_mut())
            {
                rank_trace[i] = st.d_opt as f64;
            }
        }
    }

    TrialResult {
        sinr_db: sinr,
        ranks,
        divergent,
        divergent_steps,
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo runner
// ---------------------------------------------------------------------------

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    scenario.validate()?;
    let start = Instant::now();
    let master_seed = opts.seed_override.unwrap_or(scenario.master_seed);
    let trials = opts.trials_override.unwrap_or(scenario.num_trials);
    let offset = opts.trial_offset as u64;
    let n = scenario.num_snapshots;
    let n_alg = scenario.algorithms.len();

    let results: Vec<TrialResult> = with_pool(opts.workers, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| run_trial(scenario, master_seed, t + offset))
            .collect()
    });

    // reduce deterministically in trial order
    let mut traces = Vec::with_capacity(n_alg);
    for (idx, spec) in scenario.algorithms.iter().enumerate() {
        let included: Vec<&TrialResult> = results.iter().filter(|t| !t.divergent[idx]).collect();
        let used = included.len();
        let excluded = trials - used;
        let mut mean = vec![0.0f64; n];
        if used > 0 {
            for t in &included {
                for i in 0..n {
                    match opts.avg_domain {
                        AvgDomain::Db => mean[i] += t.sinr_db[idx][i],
                        AvgDomain::Linear => mean[i] += 10f64.powf(t.sinr_db[idx][i] / 10.0),
                    }
                }
            }
            for v in mean.iter_mut() {
                *v /= used as f64;
                if opts.avg_domain == AvgDomain::Linear {
                    *v = 10.0 * v.log10();
                }
            }
        } else {
            mean.fill(f64::NAN);
        }
        let mean_rank = if spec.emits_rank() && used > 0 {
            let mut acc = vec![0.0f64; n];
            for t in &included {
                if let Some(rt) = &t.ranks[idx] {
                    for i in 0..n {
                        acc[i] += rt[i];
                    }
                }
            }
            for v in acc.iter_mut() {
                *v /= used as f64;
            }
            Some(acc)
        } else {
            None
        };
        let divergent_steps = results.iter().map(|t| t.divergent_steps[idx]).sum();
        traces.push(SinrTrace {
            algorithm: spec.label(),
            mean_sinr_db: mean,
            mean_selected_rank: mean_rank,
            trials_used: used,
            trials_excluded: excluded,
            divergent_steps,
        });
    }

    let manifest = RunManifest {
        scenario: scenario.name.clone(),
        master_seed,
        trials,
        config_hash: format!("{:016x}", scenario.config_hash()),
        divergent_trials: traces
            .iter()
            .map(|t| (t.algorithm.clone(), t.trials_excluded))
            .collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { traces, manifest })
}

/// Run the scenario's RJIO algorithms once per candidate rank; returns
/// (rank, per-algorithm final mean SINR).
pub fn sweep_rank(
    scenario: &Scenario,
    ranks: &[usize],
    opts: &RunOptions,
) -> Result<Vec<(usize, Vec<(String, f64)>)>, HarnessError> {
    if ranks.is_empty() {
        return Err(HarnessError::Config("empty rank list".into()));
    }
    let mut rows = Vec::new();
    for &d in ranks {
        if d == 0 || d > scenario.geometry.num_sensors {
            return Err(HarnessError::Config(format!(
                "rank {d} outside array size {}",
                scenario.geometry.num_sensors
            )));
        }
        let mut s = scenario.clone();
        s.algorithms = s.algorithms.iter().map(|a| a.with_rank(d)).collect();
        let out = run_scenario(&s, opts)?;
        let finals = out
            .traces
            .iter()
            .map(|t| (t.algorithm.clone(), t.steady_state_db(0.1)))
            .collect();
        rows.push((d, finals));
    }
    Ok(rows)
}

/// A grid of candidate hyperparameter assignments per algorithm slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamGrid {
    pub candidates: Vec<Vec<AlgorithmSpec>>,
}

/// Exhaustive evaluation by mean SINR over the last 10% of snapshots.
/// Candidates with excluded trials are never selected when a fully
/// convergent candidate exists; ties break toward the first-listed.
pub fn grid_search(
    scenario: &Scenario,
    grid: &ParamGrid,
    opts: &RunOptions,
) -> Result<Vec<AlgorithmSpec>, HarnessError> {
    if grid.candidates.is_empty() || grid.candidates.iter().any(|c| c.is_empty()) {
        return Err(HarnessError::Config("empty parameter grid".into()));
    }
    let mut best = Vec::with_capacity(grid.candidates.len());
    for slot in &grid.candidates {
        let mut s = scenario.clone();
        s.algorithms = slot.clone();
        let out = run_scenario(&s, opts)?;
        let mut best_idx = 0usize;
        let mut best_key = (usize::MAX, f64::NEG_INFINITY);
        for (i, t) in out.traces.iter().enumerate() {
            let score = t.steady_state_db(0.1);
            if !score.is_finite() {
                continue;
            }
            // fewer excluded trials wins first, then higher SINR, then order
            let key = (t.trials_excluded, score);
            let better = key.0 < best_key.0 || (key.0 == best_key.0 && key.1 > best_key.1);
            if better {
                best_key = key;
                best_idx = i;
            }
        }
        best.push(slot[best_idx].clone());
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Complexity model (per-snapshot arithmetic counts)
// ---------------------------------------------------------------------------

/// Closed-form (additions, multiplications) counts per algorithm.
pub fn complexity_counts(algorithm: &str, m: usize, d: usize) -> Result<(u64, u64), HarnessError> {
    if m < 2 || d == 0 || d > m {
        return Err(HarnessError::Config(format!(
            "need M >= 2 and 1 <= D <= M, got M={m}, D={d}"
        )));
    }
    let m = m as u64;
    let d = d as u64;
    let counts = match algorithm {
        "lcmv-sg" => (3 * m + 1, 3 * m + 2),
        "lcmv-rls" => (3 * m * m - 2 * m + 3, 6 * m * m + 2 * m + 2),
        "rjio-sg" => (3 * d * m + 4 * m + 2 * d - 2, 5 * d * m + 2 * m + 5 * d + 2),
        "rjio-rls" => (
            3 * m * m - m + 3 + 3 * d * d + 3 - 7 * d,
            7 * m * m + 3 * m + 7 * d * d + 10 * d,
        ),
        "smi" => {
            let mf = m as f64;
            (
                (2.0 / 3.0 * mf.powi(3) + 3.0 * mf * mf).round() as u64,
                (2.0 / 3.0 * mf.powi(3) + 5.0 * mf * mf).round() as u64,
            )
        }
        other => {
            return Err(HarnessError::Config(format!(
                "unknown algorithm '{other}' (expected lcmv-sg, lcmv-rls, rjio-sg, rjio-rls, smi)"
            )))
        }
    };
    Ok(counts)
}

pub const COMPLEXITY_ALGORITHMS: [&str; 5] = ["lcmv-sg", "lcmv-rls", "rjio-sg", "rjio-rls", "smi"];

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

/// CSV with header `snapshot,algorithm,mean_sinr_db[,selected_rank]`.
pub fn write_csv<W: Write>(out: &mut W, traces: &[SinrTrace]) -> std::io::Result<()> {
    let any_rank = traces.iter().any(|t| t.mean_selected_rank.is_some());
    if any_rank {
        writeln!(out, "snapshot,algorithm,mean_sinr_db,selected_rank")?;
    } else {
        writeln!(out, "snapshot,algorithm,mean_sinr_db")?;
    }
    for t in traces {
        for (i, v) in t.mean_sinr_db.iter().enumerate() {
            if any_rank {
                match &t.mean_selected_rank {
                    Some(r) => writeln!(out, "{i},{},{v:.6},{:.3}", t.algorithm, r[i])?,
                    None => writeln!(out, "{i},{},{v:.6},", t.algorithm)?,
                }
            } else {
                writeln!(out, "{i},{},{v:.6}", t.algorithm)?;
            }
        }
    }
    Ok(())
}

/// CSV of a rank sweep: `rank,algorithm,final_mean_sinr_db`.
pub fn write_sweep_csv<W: Write>(
    out: &mut W,
    rows: &[(usize, Vec<(String, f64)>)],
) -> std::io::Result<()> {
    writeln!(out, "rank,algorithm,final_mean_sinr_db")?;
    for (d, finals) in rows {
        for (alg, v) in finals {
            writeln!(out, "{d},{alg},{v:.6}")?;
        }
    }
    Ok(())
}
