//! Python bindings for the `affattn` engine.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use affattn::roc::RocPoint;
use affattn::synth::{SceneObject, SceneSpec, Shape};
use affattn::{Condition, Connectivity, PixelXY, SpreadSchedule};

create_exception!(affattn, AffattnError, PyValueError);

fn to_py(err: affattn::Error) -> PyErr {
    match err {
        affattn::Error::Io { .. } => PyOSError::new_err(err.to_string()),
        other => AffattnError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> PyResult<T> {
    s.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

fn kind_from(s: &str) -> PyResult<affattn::FeatureKind> {
    match s {
        "key" => Ok(affattn::FeatureKind::Key),
        "query" => Ok(affattn::FeatureKind::Query),
        "value" => Ok(affattn::FeatureKind::Value),
        "conv" => Ok(affattn::FeatureKind::Conv),
        _ => Err(PyValueError::new_err(format!("unknown feature kind {s:?}"))),
    }
}

#[pyclass(name = "FeatureGrid", module = "affattn", skip_from_py_object)]
#[derive(Clone)]
pub struct PyFeatureGrid {
    inner: affattn::FeatureGrid,
}

#[pymethods]
impl PyFeatureGrid {
    /// Grid at native resolution: the image is `grid * patch_px` pixels.
    #[new]
    #[pyo3(signature = (image_id, grid_h, grid_w, patch_px, dim, data, kind = "key"))]
    fn new(
        image_id: &str,
        grid_h: usize,
        grid_w: usize,
        patch_px: usize,
        dim: usize,
        data: Vec<f32>,
        kind: &str,
    ) -> PyResult<Self> {
        let geometry = affattn::GridGeometry::unscaled(grid_h, grid_w, patch_px);
        let inner = affattn::FeatureGrid::new(image_id, geometry, dim, kind_from(kind)?, data).map_err(to_py)?;
        Ok(PyFeatureGrid { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyFeatureGrid {
            inner: affattn::read_feature_file(path).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        affattn::write_feature_file(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn image_id(&self) -> &str {
        &self.inner.image_id
    }

    #[getter]
    fn grid_h(&self) -> usize {
        self.inner.grid_h()
    }

    #[getter]
    fn grid_w(&self) -> usize {
        self.inner.grid_w()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.as_str()
    }

    #[getter]
    fn patch_px(&self) -> usize {
        self.inner.geometry.patch_px
    }

    /// Flat `(row, col, channel)` data.
    fn data(&self) -> Vec<f32> {
        self.inner.data.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "FeatureGrid({:?}, {}x{}, dim={}, kind={})",
            self.inner.image_id,
            self.inner.grid_h(),
            self.inner.grid_w(),
            self.inner.dim,
            self.inner.kind.as_str()
        )
    }
}

#[pyclass(name = "PatchLabelGrid", module = "affattn", skip_from_py_object)]
#[derive(Clone)]
pub struct PyPatchLabelGrid {
    inner: affattn::PatchLabelGrid,
}

#[pymethods]
impl PyPatchLabelGrid {
    #[new]
    fn new(rows: Vec<Vec<u16>>) -> PyResult<Self> {
        let grid_h = rows.len();
        let grid_w = rows.first().map_or(0, Vec::len);
        if grid_h == 0 || grid_w == 0 || rows.iter().any(|r| r.len() != grid_w) {
            return Err(PyValueError::new_err(
                "labels must be a non-empty rectangular list of rows",
            ));
        }
        let labels = rows.into_iter().flatten().collect();
        Ok(PyPatchLabelGrid {
            inner: affattn::PatchLabelGrid { grid_h, grid_w, labels },
        })
    }

    fn rows(&self) -> Vec<Vec<u16>> {
        self.inner
            .labels
            .chunks(self.inner.grid_w)
            .map(<[u16]>::to_vec)
            .collect()
    }

    fn area(&self, obj: u16) -> usize {
        self.inner.area(obj)
    }
}

#[pyclass(name = "AffinityMatrix", module = "affattn")]
pub struct PyAffinityMatrix {
    inner: affattn::AffinityMatrix,
}

#[pymethods]
impl PyAffinityMatrix {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn grid_h(&self) -> usize {
        self.inner.grid_h()
    }

    #[getter]
    fn grid_w(&self) -> usize {
        self.inner.grid_w()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.n || j >= self.inner.n {
            return Err(PyValueError::new_err(format!(
                "index ({i}, {j}) outside {} patches",
                self.inner.n
            )));
        }
        Ok(self.inner.get(i, j))
    }

    /// Affinity map of the patch at `(row, col)` as a list of grid rows.
    fn map(&self, row: usize, col: usize) -> PyResult<Vec<Vec<f64>>> {
        let m = affattn::affinity_map(&self.inner, affattn::PatchIndex::new(row, col)).map_err(to_py)?;
        Ok(m.values.chunks(m.grid_w).map(<[f64]>::to_vec).collect())
    }
}

#[pyclass(name = "SpreadConfig", module = "affattn", skip_from_py_object)]
#[derive(Clone)]
pub struct PySpreadConfig {
    #[pyo3(get, set)]
    tau: f64,
    #[pyo3(get, set)]
    tau_step: f64,
    #[pyo3(get, set)]
    schedule: String,
    #[pyo3(get, set)]
    max_steps: usize,
    #[pyo3(get, set)]
    connectivity: String,
}

impl PySpreadConfig {
    fn to_core(&self) -> PyResult<affattn::SpreadConfig> {
        let schedule = match self.schedule.as_str() {
            "multiplicative" => SpreadSchedule::Multiplicative,
            "additive" => SpreadSchedule::Additive,
            s => return Err(PyValueError::new_err(format!("unknown schedule {s:?}"))),
        };
        let connectivity = match self.connectivity.as_str() {
            "four" => Connectivity::Four,
            "eight" => Connectivity::Eight,
            s => return Err(PyValueError::new_err(format!("unknown connectivity {s:?}"))),
        };
        let cfg = affattn::SpreadConfig {
            tau: self.tau,
            tau_step: self.tau_step,
            schedule,
            max_steps: self.max_steps,
            connectivity,
        };
        cfg.validate().map_err(to_py)?;
        Ok(cfg)
    }
}

#[pymethods]
impl PySpreadConfig {
    #[new]
    #[pyo3(signature = (tau = 0.8, tau_step = 0.2, schedule = "multiplicative", max_steps = 20, connectivity = "four"))]
    fn new(tau: f64, tau_step: f64, schedule: &str, max_steps: usize, connectivity: &str) -> Self {
        PySpreadConfig {
            tau,
            tau_step,
            schedule: schedule.into(),
            max_steps,
            connectivity: connectivity.into(),
        }
    }

    fn threshold_at(&self, step: usize) -> PyResult<f64> {
        Ok(self.to_core()?.threshold_at(step))
    }

    fn __repr__(&self) -> String {
        format!(
            "SpreadConfig(tau={}, tau_step={}, schedule={:?}, max_steps={}, connectivity={:?})",
            self.tau, self.tau_step, self.schedule, self.max_steps, self.connectivity
        )
    }
}

#[pyclass(name = "Trial", module = "affattn", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTrial {
    inner: affattn::Trial,
}

#[pymethods]
impl PyTrial {
    #[new]
    #[pyo3(signature = (trial_id, image_id, condition, center_xy, periph_xy, center_obj, periph_obj, mean_rt_ms = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        trial_id: &str,
        image_id: &str,
        condition: &str,
        center_xy: (f64, f64),
        periph_xy: (f64, f64),
        center_obj: u16,
        periph_obj: u16,
        mean_rt_ms: Option<f64>,
    ) -> PyResult<Self> {
        let inner = affattn::Trial {
            trial_id: trial_id.into(),
            image_id: image_id.into(),
            condition: parse::<Condition>("condition", condition)?,
            center_xy: PixelXY::new(center_xy.0, center_xy.1),
            periph_xy: PixelXY::new(periph_xy.0, periph_xy.1),
            center_obj,
            periph_obj,
            mean_rt_ms,
        };
        Ok(PyTrial { inner })
    }

    #[getter]
    fn trial_id(&self) -> &str {
        &self.inner.trial_id
    }

    #[getter]
    fn image_id(&self) -> &str {
        &self.inner.image_id
    }

    #[getter]
    fn condition(&self) -> &'static str {
        self.inner.condition.as_str()
    }

    #[getter]
    fn center_xy(&self) -> (f64, f64) {
        (self.inner.center_xy.x, self.inner.center_xy.y)
    }

    #[getter]
    fn periph_xy(&self) -> (f64, f64) {
        (self.inner.periph_xy.x, self.inner.periph_xy.y)
    }

    #[getter]
    fn center_obj(&self) -> u16 {
        self.inner.center_obj
    }

    #[getter]
    fn periph_obj(&self) -> u16 {
        self.inner.periph_obj
    }

    #[getter]
    fn mean_rt_ms(&self) -> Option<f64> {
        self.inner.mean_rt_ms
    }

    fn __repr__(&self) -> String {
        format!(
            "Trial({:?}, {:?}, {})",
            self.inner.trial_id, self.inner.image_id, self.inner.condition
        )
    }
}

#[pyclass(name = "SpreadTrace", module = "affattn")]
pub struct PySpreadTrace {
    inner: affattn::SpreadTrace,
}

#[pymethods]
impl PySpreadTrace {
    #[getter]
    fn trial_id(&self) -> &str {
        &self.inner.trial_id
    }

    #[getter]
    fn prediction(&self) -> usize {
        self.inner.prediction
    }

    #[getter]
    fn reached_step(&self) -> Option<usize> {
        self.inner.reached_step
    }

    /// `(step, threshold, added patch indices)` per step.
    #[getter]
    fn steps(&self) -> Vec<(usize, f64, Vec<usize>)> {
        self.inner
            .steps
            .iter()
            .map(|s| (s.step, s.threshold, s.added.clone()))
            .collect()
    }

    fn segment_masks(&self) -> Vec<Vec<bool>> {
        self.inner.segment_masks()
    }
}

/// `(threshold, tpr, fpr)`.
type Point = (f64, f64, f64);

fn points(sweep: &[RocPoint]) -> Vec<Point> {
    sweep.iter().map(|p| (p.threshold, p.tpr, p.fpr)).collect()
}

#[pyfunction]
fn compute_affinity(grid: &PyFeatureGrid) -> PyResult<PyAffinityMatrix> {
    Ok(PyAffinityMatrix {
        inner: affattn::compute_affinity(&grid.inner).map_err(to_py)?,
    })
}

#[pyfunction]
#[pyo3(signature = (aff, trial, config = None))]
fn run_trial(aff: &PyAffinityMatrix, trial: &PyTrial, config: Option<&PySpreadConfig>) -> PyResult<PySpreadTrace> {
    let cfg = match config {
        Some(c) => c.to_core()?,
        None => affattn::SpreadConfig::default(),
    };
    let inner = affattn::run_trial(&aff.inner, &trial.inner, &cfg).map_err(to_py)?;
    Ok(PySpreadTrace { inner })
}

/// 21-point `(threshold, tpr, fpr)` sweep for one trial.
#[pyfunction]
fn trial_roc(aff: &PyAffinityMatrix, labels: &PyPatchLabelGrid, trial: &PyTrial) -> PyResult<Vec<Point>> {
    let sweep = affattn::trial_roc(&aff.inner, &labels.inner, &trial.inner).map_err(to_py)?;
    Ok(points(&sweep))
}

/// Averages sweeps and returns `(points, auc)`.
#[pyfunction]
fn aggregate_roc(sweeps: Vec<Vec<Point>>) -> PyResult<(Vec<Point>, f64)> {
    let sweeps: Vec<Vec<RocPoint>> = sweeps
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(threshold, tpr, fpr)| RocPoint { threshold, tpr, fpr })
                .collect()
        })
        .collect();
    let curve = affattn::aggregate_roc(&sweeps).map_err(to_py)?;
    Ok((points(&curve.points), curve.auc))
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    affattn::eval::spearman(&x, &y).map_err(to_py)
}

#[pyfunction]
fn load_manifest(path: &str) -> PyResult<Vec<PyTrial>> {
    let trials = affattn::load_manifest(path).map_err(to_py)?;
    Ok(trials.into_iter().map(|inner| PyTrial { inner }).collect())
}

/// Objects are `(id, "rect", top, left, height, width)` or
/// `(id, "ellipse", center_row, center_col, radius_rows, radius_cols)`.
#[pyfunction]
#[pyo3(signature = (image_id, grid_h, grid_w, objects, dim = 16, separability = 1.0, noise_sigma = 0.1, seed = 0, patch_px = 16))]
#[allow(clippy::too_many_arguments)]
fn gen_scene(
    image_id: &str,
    grid_h: usize,
    grid_w: usize,
    objects: Vec<(u16, String, f64, f64, f64, f64)>,
    dim: usize,
    separability: f64,
    noise_sigma: f64,
    seed: u64,
    patch_px: usize,
) -> PyResult<(PyPatchLabelGrid, PyFeatureGrid)> {
    let objects = objects
        .into_iter()
        .map(|(id, kind, a, b, c, d)| {
            let shape = match kind.as_str() {
                "rect" => Shape::Rect {
                    top: a as usize,
                    left: b as usize,
                    height: c as usize,
                    width: d as usize,
                },
                "ellipse" => Shape::Ellipse {
                    center_row: a,
                    center_col: b,
                    radius_rows: c,
                    radius_cols: d,
                },
                other => return Err(PyValueError::new_err(format!("unknown shape {other:?}"))),
            };
            Ok(SceneObject { id, shape })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let spec = SceneSpec {
        image_id: image_id.into(),
        grid_h,
        grid_w,
        patch_px,
        objects,
        dim,
        separability,
        noise_sigma,
        seed,
    };
    let (labels, features) = affattn::synth::gen_scene(&spec).map_err(to_py)?;
    Ok((PyPatchLabelGrid { inner: labels }, PyFeatureGrid { inner: features }))
}

#[pymodule]
#[pyo3(name = "affattn")]
fn affattn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AffattnError", m.py().get_type::<AffattnError>())?;
    m.add_class::<PyFeatureGrid>()?;
    m.add_class::<PyPatchLabelGrid>()?;
    m.add_class::<PyAffinityMatrix>()?;
    m.add_class::<PySpreadConfig>()?;
    m.add_class::<PyTrial>()?;
    m.add_class::<PySpreadTrace>()?;
    m.add_function(wrap_pyfunction!(compute_affinity, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(trial_roc, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_roc, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(load_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(gen_scene, m)?)?;
    Ok(())
}
