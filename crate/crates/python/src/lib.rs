//! Python bindings for the robust reduced-rank LCMV beamforming library.
//!
//! Complex vectors cross the boundary as lists of Python complex numbers and
//! matrices as row-major nested lists.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use rrbeam::array::{steering_vector as steering_impl, ArrayGeometry};
use rrbeam::harness::{
    complexity_counts as complexity_impl, run_scenario, sinr_db as sinr_impl, AvgDomain,
    RunOptions, Scenario,
};
use rrbeam::lcmv::{loaded_lcmv, optimal_lcmv};
use rrbeam::numerics::{CMatrix, CVector};
use rrbeam::rjio::{
    rjio_fixed_point, rjio_init, rjio_output, rjio_rls_step, rjio_sg_step, RjioHyperParams,
    RjioState,
};

fn to_cvector(v: Vec<Complex64>) -> PyResult<CVector> {
    if v.is_empty() {
        return Err(PyValueError::new_err("vector must be non-empty"));
    }
    Ok(CVector::from_vec(v))
}

fn to_cmatrix(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(PyValueError::new_err("matrix must be non-empty"));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("matrix rows must be non-empty and equal length"));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vec_out(v: &CVector) -> Vec<Complex64> {
    v.iter().copied().collect()
}

fn matrix_out(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// ULA steering vector for an M-element array.
#[pyfunction]
#[pyo3(signature = (num_sensors, theta_deg, spacing_ratio=0.5))]
fn steering_vector(num_sensors: usize, theta_deg: f64, spacing_ratio: f64) -> Vec<Complex64> {
    let geom = ArrayGeometry {
        num_sensors,
        spacing_ratio,
    };
    vec_out(&steering_impl(&geom, theta_deg))
}

/// Optimal LCMV weights w = R^-1 a / (a^H R^-1 a).
#[pyfunction]
fn lcmv_weights(r: Vec<Vec<Complex64>>, a: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let bf = optimal_lcmv(&to_cmatrix(r)?, &to_cvector(a)?).map_err(value_err)?;
    Ok(vec_out(&bf.w))
}

/// Diagonally loaded LCMV weights.
#[pyfunction]
fn loaded_lcmv_weights(
    r: Vec<Vec<Complex64>>,
    a_p: Vec<Complex64>,
    epsilon2: f64,
) -> PyResult<Vec<Complex64>> {
    let bf = loaded_lcmv(&to_cmatrix(r)?, &to_cvector(a_p)?, epsilon2).map_err(value_err)?;
    Ok(vec_out(&bf.w))
}

/// Output SINR in dB of a weight vector against true covariances.
#[pyfunction]
fn sinr_db(
    w: Vec<Complex64>,
    r_s: Vec<Vec<Complex64>>,
    r_i: Vec<Vec<Complex64>>,
) -> PyResult<f64> {
    sinr_impl(&to_cvector(w)?, &to_cmatrix(r_s)?, &to_cmatrix(r_i)?).map_err(value_err)
}

/// (additions, multiplications) per snapshot for one algorithm at (M, D).
#[pyfunction]
fn complexity_counts(algorithm: &str, m: usize, d: usize) -> PyResult<(u64, u64)> {
    complexity_impl(algorithm, m, d).map_err(value_err)
}

/// Alternating closed-form design; returns (S_D, w_bar, output_power, converged).
#[pyfunction]
#[pyo3(signature = (r, a_p, rank, epsilon2=0.0, max_iters=100, tol=1e-10))]
fn fixed_point_design(
    r: Vec<Vec<Complex64>>,
    a_p: Vec<Complex64>,
    rank: usize,
    epsilon2: f64,
    max_iters: usize,
    tol: f64,
) -> PyResult<(Vec<Vec<Complex64>>, Vec<Complex64>, f64, bool)> {
    let fp = rjio_fixed_point(&to_cmatrix(r)?, &to_cvector(a_p)?, rank, epsilon2, max_iters, tol)
        .map_err(value_err)?;
    Ok((
        matrix_out(&fp.s_d),
        vec_out(&fp.w_bar),
        fp.output_power,
        fp.converged,
    ))
}

/// Adaptive RJIO beamformer holding {S_D, w_bar, epsilon, P, P_bar}.
#[pyclass(name = "Rjio")]
struct PyRjio {
    state: RjioState,
    hp: RjioHyperParams,
}

#[pymethods]
impl PyRjio {
    #[new]
    #[pyo3(signature = (a_p, rank, mu_s=1e-3, mu_w=1e-3, mu_eps=1e-4, alpha=0.998, delta=100.0, delta_bar=100.0, epsilon0=0.01))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        a_p: Vec<Complex64>,
        rank: usize,
        mu_s: f64,
        mu_w: f64,
        mu_eps: f64,
        alpha: f64,
        delta: f64,
        delta_bar: f64,
        epsilon0: f64,
    ) -> PyResult<Self> {
        let a_p = to_cvector(a_p)?;
        let hp = RjioHyperParams {
            rank,
            mu_s,
            mu_w,
            mu_eps,
            alpha,
            delta,
            delta_bar,
            epsilon0,
        };
        let state = rjio_init(a_p.len(), &hp, a_p).map_err(value_err)?;
        Ok(Self { state, hp })
    }

    /// x̄ = w̄^H S_D^H r
    fn output(&self, r: Vec<Complex64>) -> PyResult<Complex64> {
        Ok(rjio_output(&self.state, &to_cvector(r)?))
    }

    fn sg_step(&mut self, r: Vec<Complex64>) -> PyResult<()> {
        self.state = rjio_sg_step(&self.state, &to_cvector(r)?, &self.hp);
        Ok(())
    }

    fn rls_step(&mut self, r: Vec<Complex64>) -> PyResult<()> {
        self.state = rjio_rls_step(&self.state, &to_cvector(r)?, &self.hp);
        Ok(())
    }

    /// Effective full-rank weight S_D w̄.
    fn effective_weight(&self) -> Vec<Complex64> {
        vec_out(&self.state.effective_weight())
    }

    fn constraint_error(&self) -> f64 {
        self.state.constraint_error()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.state.epsilon
    }

    #[getter]
    fn divergences(&self) -> u64 {
        self.state.divergences
    }

    /// JSON state snapshot (complex numbers as [re, im]).
    fn state_json(&self) -> String {
        self.state.to_json().to_string()
    }
}

/// Run a scenario from its JSON text; returns the traces as a JSON string
/// with per-snapshot mean SINR per algorithm.
#[pyfunction]
#[pyo3(signature = (scenario_json, trials=None, seed=None, workers=None, avg_domain="db"))]
fn run_scenario_json(
    scenario_json: &str,
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    avg_domain: &str,
) -> PyResult<String> {
    let scenario = Scenario::from_json(scenario_json).map_err(value_err)?;
    let avg_domain = match avg_domain {
        "db" => AvgDomain::Db,
        "linear" => AvgDomain::Linear,
        other => return Err(PyValueError::new_err(format!("bad avg domain '{other}'"))),
    };
    let opts = RunOptions {
        seed_override: seed,
        trials_override: trials,
        trial_offset: 0,
        workers,
        avg_domain,
    };
    let out = run_scenario(&scenario, &opts).map_err(value_err)?;
    serde_json::to_string(&out.traces).map_err(value_err)
}

/// Bundled scenario JSON by name.
#[pyfunction]
fn builtin_scenario(name: &str) -> PyResult<String> {
    rrbeam::scenarios::builtin(name)
        .map(|s| s.to_string())
        .ok_or_else(|| PyValueError::new_err(format!("unknown scenario '{name}'")))
}

#[pymodule]
fn rrbeam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(lcmv_weights, m)?)?;
    m.add_function(wrap_pyfunction!(loaded_lcmv_weights, m)?)?;
    m.add_function(wrap_pyfunction!(sinr_db, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_counts, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_design, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_json, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenario, m)?)?;
    m.add_class::<PyRjio>()?;
    Ok(())
}
