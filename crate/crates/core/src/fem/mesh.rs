use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Rule with `n` points, exact for polynomials of degree 2n − 1.
    pub fn new(n: usize) -> Result<Self> {
        let (points, weights): (Vec<f64>, Vec<f64>) = match n {
            2 => {
                let a = 1.0 / 3f64.sqrt();
                (vec![-a, a], vec![1.0, 1.0])
            }
            3 => {
                let a = (3.0f64 / 5.0).sqrt();
                (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            4 => {
                let s = (6.0f64 / 5.0).sqrt();
                let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
                let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
                let wa = (18.0 + 30f64.sqrt()) / 36.0;
                let wb = (18.0 - 30f64.sqrt()) / 36.0;
                (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
            }
            5 => {
                let s = 2.0 * (10.0f64 / 7.0).sqrt();
                let a = (5.0 - s).sqrt() / 3.0;
                let b = (5.0 + s).sqrt() / 3.0;
                let w0 = 128.0 / 225.0;
                let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
                let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
                (vec![-b, -a, 0.0, a, b], vec![wb, wa, w0, wa, wb])
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "quadrature must use 2 to 5 points (degree >= 3), got {n}"
                )))
            }
        };
        Ok(Self { points, weights })
    }
}

/// Mesh settings as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshConfig {
    pub n_elements: usize,
    pub quadrature_points: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n_elements: 30,
            quadrature_points: 3,
        }
    }
}

/// Uniform 1D mesh of the pillar axis y ∈ [0, L].
#[derive(Debug, Clone)]
pub struct Mesh1D {
    length: f64,
    nodes: Vec<f64>,
    rule: GaussRule,
}

impl Mesh1D {
    pub fn uniform(length: f64, n_elements: usize) -> Result<Self> {
        Self::with_quadrature(length, n_elements, 3)
    }

    pub fn with_quadrature(length: f64, n_elements: usize, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidConfig(format!("mesh length must be > 0, got {length}")));
        }
        if n_elements < 2 {
            return Err(Error::InvalidConfig(format!(
                "mesh needs at least 2 elements, got {n_elements}"
            )));
        }
        let nodes = (0..=n_elements)
            .map(|i| length * i as f64 / n_elements as f64)
            .collect();
        Ok(Self {
            length,
            nodes,
            rule: GaussRule::new(points)?,
        })
    }

    pub fn from_config(length: f64, cfg: &MeshConfig) -> Result<Self> {
        Self::with_quadrature(length, cfg.n_elements, cfg.quadrature_points)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Vertex coordinates, strictly increasing from 0 to L.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Displacement dofs: vertices plus element midpoints.
    pub fn n_displacement_dofs(&self) -> usize {
        2 * self.n_elements() + 1
    }

    pub fn n_plastic_dofs(&self) -> usize {
        self.n_elements() + 1
    }

    pub fn n_dofs(&self) -> usize {
        self.n_displacement_dofs() + self.n_plastic_dofs()
    }
}
