//! Uniform-linear-array geometry, steering vectors, steering-vector mismatch
//! models, snapshot synthesis and exact theoretical covariance matrices used
//! for SINR scoring.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::numerics::{identity, CMatrix, CVector};

/// Uniform linear array of `num_sensors` elements with inter-element spacing
/// `spacing_ratio` in wavelengths (half-wavelength by default).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_sensors: usize,
    #[serde(default = "default_spacing")]
    pub spacing_ratio: f64,
}

fn default_spacing() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn new(num_sensors: usize) -> Self {
        assert!(num_sensors >= 2, "ULA needs at least 2 sensors");
        Self {
            num_sensors,
            spacing_ratio: 0.5,
        }
    }
}

/// One narrowband SoI plus interferers in white noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceSet {
    pub soi_doa_deg: f64,
    pub soi_power: f64,
    pub interferer_doas_deg: Vec<f64>,
    pub interferer_powers: Vec<f64>,
    pub noise_power: f64,
}

impl SourceSet {
    pub fn validate(&self, geom: &ArrayGeometry) -> Result<(), String> {
        let k = 1 + self.interferer_doas_deg.len();
        if k >= geom.num_sensors {
            return Err(format!(
                "number of sources K={} must be < M={}",
                k, geom.num_sensors
            ));
        }
        if self.interferer_powers.len() != self.interferer_doas_deg.len() {
            return Err("interferer power/DoA lists differ in length".into());
        }
        if self.soi_power <= 0.0 && !self.interferer_powers.is_empty() {
            // soi_power == 0 only makes sense for degenerate test scenarios
        }
        if self.noise_power < 0.0 {
            return Err("noise power must be nonnegative".into());
        }
        Ok(())
    }
}

/// Steering mismatch model applied to the presumed SoI steering vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MismatchModel {
    None,
    CoherentScattering {
        #[serde(default = "default_paths")]
        num_paths: usize,
        #[serde(default = "default_stddev")]
        doa_stddev_deg: f64,
    },
}

fn default_paths() -> usize {
    4
}

fn default_stddev() -> f64 {
    2.0
}

/// Theoretical covariances of one source configuration, R = R_s + R_I.
#[derive(Debug, Clone)]
pub struct TrueCovariances {
    pub r: CMatrix,
    pub r_s: CMatrix,
    pub r_i: CMatrix,
}

/// ULA steering vector, entry m = exp(−2πj · m · (d_s/λ_c) · cos θ).
pub fn steering_vector(geom: &ArrayGeometry, theta_deg: f64) -> CVector {
    let cos_theta = theta_deg.to_radians().cos();
    let phase_step = -2.0 * std::f64::consts::PI * geom.spacing_ratio * cos_theta;
    DVector::from_fn(geom.num_sensors, |m, _| {
        Complex64::from_polar(1.0, phase_step * m as f64)
    })
}

/// Presumed SoI steering vector under the configured mismatch model.
///
/// Coherent scattering adds `num_paths` rays at Gaussian-perturbed angles
/// with uniform phases; the draw is made once per trial RNG, so the mismatch
/// is fixed over the snapshots of a trial.
pub fn presumed_steering(
    geom: &ArrayGeometry,
    soi_doa_deg: f64,
    mismatch: &MismatchModel,
    rng: &mut impl Rng,
) -> CVector {
    let nominal = steering_vector(geom, soi_doa_deg);
    match mismatch {
        MismatchModel::None => nominal,
        MismatchModel::CoherentScattering {
            num_paths,
            doa_stddev_deg,
        } => {
            let angle_dist = Normal::new(soi_doa_deg, *doa_stddev_deg)
                .expect("stddev must be finite and nonnegative");
            let mut presumed = nominal;
            for _ in 0..*num_paths {
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let theta_p = angle_dist.sample(rng);
                let ray = steering_vector(geom, theta_p);
                let gain = Complex64::from_polar(1.0, phi);
                presumed += ray.map(|z| gain * z);
            }
            presumed
        }
    }
}

/// One unit-variance circular complex Gaussian draw.
fn cn01(rng: &mut impl Rng) -> Complex64 {
    let half = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    Complex64::new(half.sample(rng), half.sample(rng))
}

/// Synthesize one snapshot r = A s + n with i.i.d. circular complex Gaussian
/// source symbols and sensor noise of covariance σ²I.
pub fn synthesize_snapshot(
    geom: &ArrayGeometry,
    sources: &SourceSet,
    rng: &mut impl Rng,
) -> CVector {
    let m = geom.num_sensors;
    let mut r = DVector::from_element(m, Complex64::new(0.0, 0.0));

    let all_sources = std::iter::once((sources.soi_doa_deg, sources.soi_power)).chain(
        sources
            .interferer_doas_deg
            .iter()
            .copied()
            .zip(sources.interferer_powers.iter().copied()),
    );
    for (doa, power) in all_sources {
        // always consume the symbol draw so RNG alignment does not depend on
        // which powers are zero
        let symbol = cn01(rng);
        if power <= 0.0 {
            continue;
        }
        let scaled = symbol * Complex64::new(power.sqrt(), 0.0);
        let a = steering_vector(geom, doa);
        r += a.map(|z| scaled * z);
    }

    if sources.noise_power > 0.0 {
        let sigma = sources.noise_power.sqrt();
        for i in 0..m {
            r[i] += cn01(rng) * Complex64::new(sigma, 0.0);
        }
    }
    r
}

/// Exact covariances: R_s = σ_d² a a^H, R_I = Σ p_l a_l a_l^H + σ² I.
pub fn true_covariances(geom: &ArrayGeometry, sources: &SourceSet) -> TrueCovariances {
    let m = geom.num_sensors;
    let a_soi = steering_vector(geom, sources.soi_doa_deg);
    let r_s = (&a_soi * a_soi.adjoint()).map(|z| z * sources.soi_power);

    let mut r_i = identity(m) * Complex64::new(sources.noise_power, 0.0);
    for (doa, power) in sources
        .interferer_doas_deg
        .iter()
        .zip(sources.interferer_powers.iter())
    {
        let a = steering_vector(geom, *doa);
        r_i += (&a * a.adjoint()).map(|z| z * *power);
    }
    let r = &r_s + &r_i;
    TrueCovariances { r, r_s, r_i }
}

/// RNG substream keyed by (master seed, trial index, stream tag), so trials
/// are reproducible and order-independent.
pub fn substream_rng(master_seed: u64, trial_index: u64, tag: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trial_index.to_le_bytes());
    seed[16..24].copy_from_slice(&tag.to_le_bytes());
    seed[24..32].copy_from_slice(&0x52_52_42_45_41_4du64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Stream tags for per-trial substreams.
pub mod stream {
    pub const MISMATCH: u64 = 1;
    pub const SNAPSHOTS: u64 = 2;
    pub const POWERS: u64 = 3;
}
