//! Python bindings for the `tmc` triangle-mesh thumbnail codec.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use tmc::codec::EncoderConfig;
use tmc::features::build_features;
use tmc::{bitstream, codec, metrics, GridVertex, RasterImage};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An RGB image, 8 bits per channel, row-major.
#[pyclass(name = "Image", module = "tmc_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: RasterImage,
}

#[pymethods]
impl PyImage {
    /// Build from interleaved RGB bytes of length `width * height * 3`.
    #[new]
    fn new(width: usize, height: usize, data: Vec<u8>) -> PyResult<Self> {
        RasterImage::from_raw(width, height, data)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            inner: RasterImage::filled(width, height, rgb),
        }
    }

    /// Read a PNG or binary PPM file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        tmc::read_image(path)
            .map(|inner| Self { inner })
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn write(&self, path: &str) -> PyResult<()> {
        tmc::write_image(&self.inner, path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<[u8; 3]> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(value_err(format!("pixel ({x}, {y}) out of range")));
        }
        Ok(self.inner.get(x, y))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.as_raw())
    }

    /// Center-crop to a square and resize to `size x size`.
    fn center_square(&self, size: usize) -> Self {
        Self {
            inner: self.inner.center_square(size),
        }
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Palette plus colored grid vertices.
#[pyclass(name = "CompressedMesh", module = "tmc_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: tmc::CompressedMesh,
}

#[pymethods]
impl PyMesh {
    /// `vertices` is a list of `(row, col, palette_index)`; order is free.
    #[new]
    fn new(grid_dim: u32, palette: Vec<[u8; 3]>, vertices: Vec<(u32, u32, u8)>) -> PyResult<Self> {
        let vertices = vertices
            .into_iter()
            .map(|(r, c, k)| (GridVertex::new(r, c), k))
            .collect();
        tmc::CompressedMesh::from_unsorted(grid_dim, palette, vertices)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn grid_dim(&self) -> u32 {
        self.inner.grid_dim()
    }

    #[getter]
    fn palette(&self) -> Vec<[u8; 3]> {
        self.inner.palette().to_vec()
    }

    #[getter]
    fn vertices(&self) -> Vec<(u32, u32, u8)> {
        self.inner.vertices().iter().map(|&(v, k)| (v.row, v.col, k)).collect()
    }

    /// Triangles as index triples into `vertices`.
    fn triangles(&self) -> PyResult<Vec<[u32; 3]>> {
        Ok(self.inner.triangulate().map_err(value_err)?.triangles().to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "CompressedMesh(grid_dim={}, palette={}, vertices={})",
            self.inner.grid_dim(),
            self.inner.palette().len(),
            self.inner.len()
        )
    }
}

/// Encode `image` under a byte budget. Returns `(mesh, mse_trace)`.
#[pyfunction]
#[pyo3(signature = (image, grid_dim=33, palette_size=32, byte_budget=200, proposals=20000, seed=0, size=256))]
fn encode(
    image: &PyImage,
    grid_dim: u32,
    palette_size: usize,
    byte_budget: usize,
    proposals: u64,
    seed: u64,
    size: usize,
) -> PyResult<(PyMesh, Vec<f64>)> {
    let config = EncoderConfig {
        grid_dim,
        palette_size,
        byte_budget,
        proposals,
        seed,
        size,
        ..Default::default()
    };
    let target = if image.inner.width() == size && image.inner.height() == size {
        image.inner.clone()
    } else {
        image.inner.center_square(size)
    };
    let out = codec::encode(&target, &config).map_err(value_err)?;
    let trace = out.trace.iter().map(|t| t.mse).collect();
    Ok((PyMesh { inner: out.mesh }, trace))
}

#[pyfunction]
#[pyo3(signature = (mesh, size=256))]
fn decode(mesh: &PyMesh, size: usize) -> PyResult<PyImage> {
    codec::decode(&mesh.inner, size)
        .map(|inner| PyImage { inner })
        .map_err(value_err)
}

#[pyfunction]
fn serialize<'py>(py: Python<'py>, mesh: &PyMesh) -> PyResult<Bound<'py, PyBytes>> {
    let bytes = bitstream::serialize(&mesh.inner).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

#[pyfunction]
fn deserialize(data: &[u8]) -> PyResult<PyMesh> {
    bitstream::deserialize(data)
        .map(|inner| PyMesh { inner })
        .map_err(value_err)
}

#[pyfunction]
fn psnr(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    metrics::psnr(&a.inner, &b.inner).map_err(value_err)
}

#[pyfunction]
fn ssim(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    metrics::ssim(&a.inner, &b.inner).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (image, radius=2.0, passes=1))]
fn gaussian_blur(image: &PyImage, radius: f64, passes: u32) -> PyResult<PyImage> {
    metrics::gaussian_blur(&image.inner, radius, passes)
        .map(|inner| PyImage { inner })
        .map_err(value_err)
}

/// The FTS1 feature stack as bytes (header plus little-endian f32 planes).
#[pyfunction]
#[pyo3(signature = (mesh, size=256))]
fn features<'py>(py: Python<'py>, mesh: &PyMesh, size: usize) -> PyResult<Bound<'py, PyBytes>> {
    let stack = build_features(&mesh.inner, size).map_err(value_err)?;
    Ok(PyBytes::new(py, &stack.to_bytes()))
}

#[pymodule]
fn tmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyMesh>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(serialize, m)?)?;
    m.add_function(wrap_pyfunction!(deserialize, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_blur, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    Ok(())
}
