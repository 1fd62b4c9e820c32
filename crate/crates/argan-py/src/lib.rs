//! Python bindings: dataset generation, training, inference, evaluation,
//! and the self-check battery, mirroring the `argan` CLI surface.

use argan_core::config::ArganConfig;
use argan_core::data::{
    binarize_mask, gen_synthetic_sample, load_dataset, read_image, write_dataset, write_image,
    DatasetKind,
};
use argan_core::metrics::{self, Region};
use argan_core::train::{format_log, infer_image, train, TrainSession};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::{Path, PathBuf};

fn err_py(e: argan_core::ArganError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hyperparameters; constructed from keyword arguments, mirrors the
/// `key = value` config file.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ArganConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut text = String::new();
        if let Some(kw) = kwargs {
            for (key, value) in kw.iter() {
                let key: String = key.extract()?;
                let value = value.str()?.to_string();
                // Python bools stringify as True/False.
                let value = match value.as_str() {
                    "True" => "true".to_string(),
                    "False" => "false".to_string(),
                    other => other.to_string(),
                };
                text.push_str(&format!("{key} = {value}\n"));
            }
        }
        let inner = ArganConfig::from_text(&text).map_err(err_py)?;
        inner.validate().map_err(err_py)?;
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let inner = ArganConfig::from_file(Path::new(path)).map_err(err_py)?;
        inner.validate().map_err(err_py)?;
        Ok(PyConfig { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, self.inner.to_text())
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(n={}, image_size={}, depth={}, iterations={}, seed={})",
            self.inner.n,
            self.inner.image_size,
            self.inner.depth,
            self.inner.iterations,
            self.inner.seed
        )
    }
}

/// Write `count` synthetic triplets (seeds seed..seed+count-1) in the
/// A/B/C layout, or shadow images only under U/ when unlabeled.
#[pyfunction]
#[pyo3(signature = (out_dir, count, size, seed, unlabeled = false))]
fn gen_data(out_dir: &str, count: usize, size: usize, seed: u64, unlabeled: bool) -> PyResult<usize> {
    let samples: Vec<_> = (0..count as u64)
        .map(|i| gen_synthetic_sample(seed.wrapping_add(i), size))
        .collect::<Result<_, _>>()
        .map_err(err_py)?;
    let kind = if unlabeled {
        DatasetKind::Unlabeled
    } else {
        DatasetKind::Labeled
    };
    let root = PathBuf::from(out_dir);
    let subdirs: &[&str] = if unlabeled { &["U"] } else { &["A", "B", "C"] };
    for sub in subdirs {
        std::fs::create_dir_all(root.join(sub)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    }
    write_dataset(&root, &samples, kind).map_err(err_py)?;
    Ok(samples.len())
}

/// Train on a labeled dataset directory; writes the checkpoint and a CSV
/// log next to it, and returns the log text.
#[pyfunction]
#[pyo3(signature = (config, data_dir, ckpt_out, unlabeled_dir = None))]
fn run_training(
    py: Python<'_>,
    config: PyConfig,
    data_dir: &str,
    ckpt_out: &str,
    unlabeled_dir: Option<&str>,
) -> PyResult<String> {
    let labeled = load_dataset(Path::new(data_dir), DatasetKind::Labeled).map_err(err_py)?;
    let unlabeled = match unlabeled_dir {
        Some(dir) => Some(load_dataset(Path::new(dir), DatasetKind::Unlabeled).map_err(err_py)?),
        None => None,
    };
    let ckpt = PathBuf::from(ckpt_out);
    let log = py.detach(|| -> argan_core::Result<String> {
        let mut session = TrainSession::new(config.inner.clone())?;
        let rows = train(&mut session, &labeled, unlabeled.as_deref(), Some(&ckpt))?;
        Ok(format_log(&rows))
    });
    let log = log.map_err(err_py)?;
    let mut log_name = ckpt.file_name().unwrap_or_default().to_os_string();
    log_name.push(".log.csv");
    std::fs::write(ckpt.with_file_name(log_name), &log)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(log)
}

/// Run the N progressive steps on one image; writes prefix_A{i}.ppm and
/// prefix_O{i}.ppm and returns the written paths.
#[pyfunction]
fn infer(ckpt: &str, input: &str, out_prefix: &str) -> PyResult<Vec<String>> {
    let session = TrainSession::load(Path::new(ckpt)).map_err(err_py)?;
    let img = read_image(Path::new(input)).map_err(err_py)?;
    let (attentions, outputs) = infer_image(&session, &img).map_err(err_py)?;
    let mut written = Vec::new();
    for (i, a) in attentions.iter().enumerate() {
        let path = format!("{out_prefix}_A{}.ppm", i + 1);
        write_image(Path::new(&path), a).map_err(err_py)?;
        written.push(path);
    }
    for (i, o) in outputs.iter().enumerate() {
        let path = format!("{out_prefix}_O{}.ppm", i + 1);
        write_image(Path::new(&path), o).map_err(err_py)?;
        written.push(path);
    }
    Ok(written)
}

/// Mean balance error rate (percent) between prediction and ground-truth
/// matte files; predictions binarize at 0.5, ground truth at 0.1.
#[pyfunction]
fn evaluate_detect(pred: Vec<String>, gt: Vec<String>) -> PyResult<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(PyValueError::new_err("need equally many prediction and gt files"));
    }
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(&gt) {
        let pm = binarize_mask(&read_image(Path::new(p)).map_err(err_py)?, 0.5).map_err(err_py)?;
        let gm = binarize_mask(&read_image(Path::new(g)).map_err(err_py)?, 0.1).map_err(err_py)?;
        sum += metrics::ber(&pm, &gm).map_err(err_py)?;
    }
    Ok(sum / pred.len() as f64)
}

/// Mean LAB RMSE triple (shadow, non-shadow, all) over file triples.
#[pyfunction]
fn evaluate_remove(
    pred: Vec<String>,
    gt: Vec<String>,
    mask: Vec<String>,
) -> PyResult<(f64, f64, f64)> {
    if pred.len() != gt.len() || pred.len() != mask.len() || pred.is_empty() {
        return Err(PyValueError::new_err("need equally many pred, gt, and mask files"));
    }
    let (mut s, mut n, mut a) = (0.0, 0.0, 0.0);
    for ((p, g), m) in pred.iter().zip(&gt).zip(&mask) {
        let pi = read_image(Path::new(p)).map_err(err_py)?;
        let gi = read_image(Path::new(g)).map_err(err_py)?;
        let mi = binarize_mask(&read_image(Path::new(m)).map_err(err_py)?, 0.1).map_err(err_py)?;
        s += metrics::rmse_lab(&pi, &gi, Some(&mi), Region::Shadow).map_err(err_py)?;
        n += metrics::rmse_lab(&pi, &gi, Some(&mi), Region::NonShadow).map_err(err_py)?;
        a += metrics::rmse_lab(&pi, &gi, Some(&mi), Region::All).map_err(err_py)?;
    }
    let count = pred.len() as f64;
    Ok((s / count, n / count, a / count))
}

/// sRGB in [0,1] to CIELAB under D65.
#[pyfunction]
fn rgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    metrics::rgb_to_lab(r, g, b)
}

/// Run the oracle battery; returns (name, passed, detail) rows.
#[pyfunction]
fn selfcheck(py: Python<'_>) -> PyResult<Vec<(String, bool, String)>> {
    let outcomes = py
        .detach(argan_core::verify::run_selfcheck_default)
        .map_err(err_py)?;
    Ok(outcomes
        .into_iter()
        .map(|o| (o.name.to_string(), o.passed, o.detail))
        .collect())
}

#[pymodule]
fn argan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(gen_data, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_detect, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_remove, m)?)?;
    m.add_function(wrap_pyfunction!(rgb_to_lab, m)?)?;
    m.add_function(wrap_pyfunction!(selfcheck, m)?)?;
    Ok(())
}
