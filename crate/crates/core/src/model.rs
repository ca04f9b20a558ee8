//! The forward model θ ↦ stress–strain curve at a pillar size, and a bounded
//! memo cache over it.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::curve::StressStrainCurve;
use crate::error::{Error, Result};
use crate::fem::{run_compression, LoadProgram, Mesh1D, MeshConfig, SolverOptions};
use crate::material::{SgpParams, N_CALIBRATED};
use crate::qoi::{strain_energy, DEFAULT_QOI_STRAIN};

/// Scalar model output evaluated at a parameter point and a pillar size.
pub trait QoiModel: Sync {
    fn evaluate(&self, x: &[f64], size: f64) -> Result<f64>;
}

/// Solver configuration turning calibrated parameters into curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgpModel {
    pub mesh: MeshConfig,
    pub program: LoadProgram,
    pub solver: SolverOptions,
    pub poisson: f64,
    /// Upper strain of the energy integral.
    pub qoi_strain: f64,
}

impl Default for SgpModel {
    fn default() -> Self {
        Self {
            mesh: MeshConfig::default(),
            program: LoadProgram::default(),
            solver: SolverOptions::default(),
            poisson: 0.3,
            qoi_strain: DEFAULT_QOI_STRAIN,
        }
    }
}

impl SgpModel {
    /// Completes a calibrated vector (ℓ_dis, ℓ_en, Y, h, r, E) with m = 0,
    /// q = 1 and the configured Poisson ratio.
    pub fn params(&self, theta: &[f64]) -> Result<SgpParams> {
        if theta.len() != N_CALIBRATED {
            return Err(Error::LengthMismatch(format!(
                "expected {N_CALIBRATED} parameters, got {}",
                theta.len()
            )));
        }
        let p = SgpParams::from_calibrated(theta, self.poisson);
        p.validate()?;
        Ok(p)
    }

    pub fn curve_for(&self, params: &SgpParams, size: f64) -> Result<StressStrainCurve> {
        let mesh = Mesh1D::from_config(size, &self.mesh)?;
        Ok(run_compression(params, &mesh, &self.program, &self.solver)?.0)
    }

    pub fn curve(&self, theta: &[f64], size: f64) -> Result<StressStrainCurve> {
        self.curve_for(&self.params(theta)?, size)
    }

    pub fn qoi(&self, theta: &[f64], size: f64) -> Result<f64> {
        strain_energy(&self.curve(theta, size)?, self.qoi_strain)
    }
}

impl QoiModel for SgpModel {
    fn evaluate(&self, x: &[f64], size: f64) -> Result<f64> {
        self.qoi(x, size)
    }
}

/// Cache key: each parameter rounded to 12 significant digits, plus the size.
fn cache_key(theta: &[f64], size: f64) -> String {
    let mut key = String::with_capacity(20 * (theta.len() + 1));
    for v in theta.iter().chain(std::iter::once(&size)) {
        key.push_str(&format!("{v:.11e};"));
    }
    key
}

struct CacheInner {
    map: HashMap<String, Arc<StressStrainCurve>>,
    order: VecDeque<String>,
}

/// Memoised [`SgpModel::curve`] with first-in-first-out eviction. Failed
/// solves are not cached.
pub struct CachedModel {
    pub model: SgpModel,
    capacity: usize,
    inner: Mutex<CacheInner>,
}

impl CachedModel {
    pub fn new(model: SgpModel, capacity: usize) -> Self {
        Self {
            model,
            capacity: capacity.max(1),
            inner: Mutex::new(CacheInner {
                map: HashMap::new(),
                order: VecDeque::new(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn curve(&self, theta: &[f64], size: f64) -> Result<Arc<StressStrainCurve>> {
        let key = cache_key(theta, size);
        if let Some(c) = self.inner.lock().expect("cache lock").map.get(&key) {
            return Ok(Arc::clone(c));
        }
        let curve = Arc::new(self.model.curve(theta, size)?);
        let mut inner = self.inner.lock().expect("cache lock");
        if !inner.map.contains_key(&key) {
            if inner.map.len() >= self.capacity {
                if let Some(old) = inner.order.pop_front() {
                    inner.map.remove(&old);
                }
            }
            inner.order.push_back(key.clone());
            inner.map.insert(key, Arc::clone(&curve));
        }
        Ok(curve)
    }
}
