//! Residual and tangent of the dual-mixed weak form
//!
//! ```text
//! ∫ T z' dy = 0
//! ∫ (R − T) w + S w' dy = 0
//! ```
//!
//! with quadratic displacement and linear plastic strain interpolation. The
//! global unknowns are interleaved per vertex (u, εᵖ) followed by the element
//! midpoint displacement, which keeps the tangent within a half bandwidth of 4.

use crate::fem::band::BandMatrix;
use crate::fem::mesh::Mesh1D;
use crate::material::{
    self, cauchy_stress, dissipative_microstresses, energetic_microstress_r,
    energetic_microstress_s, MaterialPointState, SgpParams,
};

/// Half bandwidth of the interleaved tangent.
pub const HALF_BANDWIDTH: usize = 4;

/// Nodal displacement (quadratic) and plastic strain (linear) fields.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedField {
    /// Ordered by coordinate: vertex, midpoint, vertex, ...
    pub u: Vec<f64>,
    /// One value per vertex.
    pub eps_p: Vec<f64>,
}

impl MixedField {
    pub fn zeros(mesh: &Mesh1D) -> Self {
        Self {
            u: vec![0.0; mesh.n_displacement_dofs()],
            eps_p: vec![0.0; mesh.n_plastic_dofs()],
        }
    }

    pub fn is_consistent_with(&self, mesh: &Mesh1D) -> bool {
        self.u.len() == mesh.n_displacement_dofs() && self.eps_p.len() == mesh.n_plastic_dofs()
    }

    /// Imposes u(0) = 0, u(L) = u†, εᵖ(0) = εᵖ(L) = 0.
    pub fn apply_bcs(&mut self, u_dagger: f64) {
        self.u[0] = 0.0;
        *self.u.last_mut().unwrap() = u_dagger;
        self.eps_p[0] = 0.0;
        *self.eps_p.last_mut().unwrap() = 0.0;
    }

    pub fn to_global(&self) -> Vec<f64> {
        let n_el = self.eps_p.len() - 1;
        let mut x = vec![0.0; 3 * n_el + 2];
        for i in 0..=n_el {
            x[3 * i] = self.u[2 * i];
            x[3 * i + 1] = self.eps_p[i];
        }
        for e in 0..n_el {
            x[3 * e + 2] = self.u[2 * e + 1];
        }
        x
    }

    pub fn from_global(x: &[f64]) -> Self {
        let n_el = (x.len() - 2) / 3;
        let mut u = vec![0.0; 2 * n_el + 1];
        let mut eps_p = vec![0.0; n_el + 1];
        for i in 0..=n_el {
            u[2 * i] = x[3 * i];
            eps_p[i] = x[3 * i + 1];
        }
        for e in 0..n_el {
            u[2 * e + 1] = x[3 * e + 2];
        }
        Self { u, eps_p }
    }
}

/// Global indices of the constrained unknowns: u(0), εᵖ(0), u(L), εᵖ(L).
pub fn constrained_dofs(n_elements: usize) -> [usize; 4] {
    [0, 1, 3 * n_elements, 3 * n_elements + 1]
}

#[inline]
fn element_u_dofs(e: usize) -> [usize; 3] {
    [3 * e, 3 * e + 2, 3 * e + 3]
}

#[inline]
fn element_ep_dofs(e: usize) -> [usize; 2] {
    [3 * e + 1, 3 * e + 4]
}

/// Problem data shared by residual and tangent evaluations.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub mesh: &'a Mesh1D,
    pub params: &'a SgpParams,
    pub dt: f64,
    pub u_dagger: f64,
    pub rate_floor: f64,
}

struct Shape {
    dn_u: [f64; 3],
    n_ep: [f64; 2],
    dn_ep: [f64; 2],
}

#[inline]
fn shape(xi: f64, h: f64) -> Shape {
    let j = 2.0 / h;
    Shape {
        dn_u: [(xi - 0.5) * j, -2.0 * xi * j, (xi + 0.5) * j],
        n_ep: [0.5 * (1.0 - xi), 0.5 * (1.0 + xi)],
        dn_ep: [-0.5 * j, 0.5 * j],
    }
}

/// Assembles the global residual and, when `tangent` is given, the consistent
/// tangent. Rows of constrained dofs hold the boundary-condition residual and
/// unit rows in the tangent.
#[allow(clippy::needless_range_loop)]
pub fn assemble(
    x: &[f64],
    x_prev: &[f64],
    ctx: &StepContext<'_>,
    residual: &mut [f64],
    mut tangent: Option<&mut BandMatrix>,
) {
    let mesh = ctx.mesh;
    let p = ctx.params;
    let n_el = mesh.n_elements();
    residual.fill(0.0);
    if let Some(k) = tangent.as_deref_mut() {
        k.clear();
    }

    let e_mod = p.elastic_modulus;
    let mu_len2 = p.shear_modulus() * p.l_en * p.l_en;
    let l2 = p.l_dis * p.l_dis;
    let rule = mesh.rule();

    for e in 0..n_el {
        let (ya, yb) = mesh.element_bounds(e);
        let h = yb - ya;
        let ud = element_u_dofs(e);
        let pd = element_ep_dofs(e);
        let u = [x[ud[0]], x[ud[1]], x[ud[2]]];
        let ep = [x[pd[0]], x[pd[1]]];
        let ep_old = [x_prev[pd[0]], x_prev[pd[1]]];

        let mut r_u = [0.0; 3];
        let mut r_p = [0.0; 2];
        let mut k_uu = [[0.0; 3]; 3];
        let mut k_up = [[0.0; 2]; 3];
        let mut k_pp = [[0.0; 2]; 2];

        for (&xi, &wq) in rule.points.iter().zip(&rule.weights) {
            let s = shape(xi, h);
            let w = wq * 0.5 * h;
            let state = MaterialPointState {
                eps_total: dot3(&s.dn_u, &u),
                eps_plastic: dot2(&s.n_ep, &ep),
                eps_plastic_grad: dot2(&s.dn_ep, &ep),
                eps_plastic_prev: dot2(&s.n_ep, &ep_old),
                eps_plastic_grad_prev: dot2(&s.dn_ep, &ep_old),
                dt: ctx.dt,
            };
            let t = cauchy_stress(&state, p);
            let (r_dis, s_dis) = dissipative_microstresses(&state, p, ctx.rate_floor);
            let r = energetic_microstress_r(&state, p) + r_dis;
            let sm = energetic_microstress_s(&state, p) + s_dis;

            for a in 0..3 {
                r_u[a] += w * t * s.dn_u[a];
            }
            for a in 0..2 {
                r_p[a] += w * ((r - t) * s.n_ep[a] + sm * s.dn_ep[a]);
            }

            if tangent.is_none() {
                continue;
            }

            // material tangents at the point
            let dr_en = p.h_iso * p.r_iso * (-p.r_iso * state.eps_plastic.abs()).exp();
            let rate = state.plastic_rate();
            let grate = state.plastic_grad_rate();
            let wdot = material::effective_flow_rate(rate, grate, p.l_dis, ctx.rate_floor);
            let f = material::flow_factor(wdot, p);
            let df = material::flow_factor_derivative(wdot, p) / wdot;
            let inv_dt = 1.0 / ctx.dt;
            // derivatives w.r.t. εᵖ and ∇εᵖ through the rates
            let drr = (f + df * rate * rate) * inv_dt;
            let drg = df * rate * l2 * grate * inv_dt;
            let dss = (l2 * f + df * l2 * l2 * grate * grate) * inv_dt;
            let d_r_dep = e_mod + dr_en + drr; // ∂(R − T)/∂εᵖ
            let d_r_dg = drg;
            let d_s_dep = drg;
            let d_s_dg = mu_len2 + dss;

            for a in 0..3 {
                for b in 0..3 {
                    k_uu[a][b] += w * e_mod * s.dn_u[a] * s.dn_u[b];
                }
                for b in 0..2 {
                    k_up[a][b] -= w * e_mod * s.dn_u[a] * s.n_ep[b];
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    k_pp[a][b] += w
                        * (s.n_ep[a] * (d_r_dep * s.n_ep[b] + d_r_dg * s.dn_ep[b])
                            + s.dn_ep[a] * (d_s_dep * s.n_ep[b] + d_s_dg * s.dn_ep[b]));
                }
            }
        }

        for a in 0..3 {
            residual[ud[a]] += r_u[a];
        }
        for a in 0..2 {
            residual[pd[a]] += r_p[a];
        }
        if let Some(k) = tangent.as_deref_mut() {
            for a in 0..3 {
                for b in 0..3 {
                    k.add(ud[a], ud[b], k_uu[a][b]);
                }
                for b in 0..2 {
                    k.add(ud[a], pd[b], k_up[a][b]);
                    k.add(pd[b], ud[a], k_up[a][b]);
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    k.add(pd[a], pd[b], k_pp[a][b]);
                }
            }
        }
    }

    let [u0, p0, ul, pl] = constrained_dofs(n_el);
    residual[u0] = x[u0];
    residual[p0] = x[p0];
    residual[ul] = x[ul] - ctx.u_dagger;
    residual[pl] = x[pl];
    if let Some(k) = tangent {
        for d in [u0, p0, ul, pl] {
            let lo = d.saturating_sub(HALF_BANDWIDTH);
            let hi = (d + HALF_BANDWIDTH).min(k.dim() - 1);
            for j in lo..=hi {
                k.set(d, j, 0.0);
            }
            k.set(d, d, 1.0);
        }
    }
}

/// Element-averaged Cauchy stress over element `e`.
pub fn element_average_stress(x: &[f64], mesh: &Mesh1D, params: &SgpParams, e: usize) -> f64 {
    let (ya, yb) = mesh.element_bounds(e);
    let h = yb - ya;
    let ud = element_u_dofs(e);
    let pd = element_ep_dofs(e);
    let u = [x[ud[0]], x[ud[1]], x[ud[2]]];
    let ep = [x[pd[0]], x[pd[1]]];
    let rule = mesh.rule();
    let mut acc = 0.0;
    for (&xi, &wq) in rule.points.iter().zip(&rule.weights) {
        let s = shape(xi, h);
        let eps = dot3(&s.dn_u, &u);
        let epp = dot2(&s.n_ep, &ep);
        acc += wq * 0.5 * params.elastic_modulus * (eps - epp);
    }
    acc
}

#[inline]
fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn dot2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
