//! Component models and the assembled hydraulic/thermal residuals.
//!
//! State layout: the hydraulic state is `y = [p (n); q (m)]`, the thermal
//! state is `z = [θ_n (n); θ_a (m); Q (n_ch)]`. Temperatures are differences
//! over ambient. The design vector is flattened as
//! `[d per street; α per consumer; β per bypass; q_b per producer]`.
//!
//! `|q|` in the heat retention, junction mixing and friction exponent is
//! replaced by `s = sqrt(q² + Q_EPS²)`, and `max(q,0)`, `min(q,0)` by
//! `(q ± s)/2`, so every residual is smooth in `q`.

use std::f64::consts::{LN_10, PI};

use serde::{Deserialize, Serialize};

use crate::network::{ArcKind, ArcRole, Network};
use crate::sparse::Triplets;

/// Flow regularization, m³/s.
pub const Q_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluidProperties {
    /// Density, kg/m³.
    pub rho: f64,
    /// Dynamic viscosity, Pa·s.
    pub mu: f64,
    /// Specific heat, J/(kg·K).
    pub cp: f64,
}

impl Default for FluidProperties {
    /// Water at 60 °C.
    fn default() -> Self {
        Self { rho: 983.2, mu: 4.67e-4, cp: 4185.0 }
    }
}

impl FluidProperties {
    pub fn rho_cp(&self) -> f64 {
        self.rho * self.cp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipeProperties {
    /// Absolute roughness, m.
    pub eps: f64,
    /// Casing-to-inner diameter ratio.
    pub r: f64,
    /// Burial depth, m.
    pub h: f64,
    /// Insulation conductivity, W/(m·K).
    pub lambda_i: f64,
    /// Ground conductivity, W/(m·K).
    pub lambda_g: f64,
    /// Laminar-turbulent transition Reynolds number.
    pub re_lt: f64,
}

impl Default for PipeProperties {
    fn default() -> Self {
        Self { eps: 4.5e-5, r: 2.0, h: 1.0, lambda_i: 0.025, lambda_g: 1.5, re_lt: 2720.0 }
    }
}

impl PipeProperties {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ("roughness", self.eps > 0.0),
            ("casing ratio r > 1", self.r > 1.0),
            ("burial depth", self.h > 0.0),
            ("insulation conductivity", self.lambda_i > 0.0),
            ("ground conductivity", self.lambda_g > 0.0),
            ("transition Reynolds number", self.re_lt > 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(format!("pipe property out of range: {name}"));
            }
        }
        Ok(())
    }

    /// Largest inner diameter for which the soil term stays positive.
    pub fn max_diameter(&self) -> f64 {
        4.0 * self.h / self.r
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhysicsError {
    #[error("infeasible radiator operating point at consumer {consumer}: inlet {theta_in:.3} K, outlet {theta_out:.3} K, house {theta_house:.3} K")]
    InfeasibleRadiator { consumer: usize, theta_in: f64, theta_out: f64, theta_house: f64 },
    #[error("domain error: {0}")]
    Domain(String),
}

/// Conductance and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conductance {
    pub g: f64,
    pub dg_dq: f64,
    pub dg_dd: f64,
}

/// Cheng conductance with the regularized flow magnitude.
pub fn conductance(q: f64, d: f64, l: f64, fluid: &FluidProperties, pipe: &PipeProperties) -> Conductance {
    let s = (q * q + Q_EPS * Q_EPS).sqrt();
    let (g, dlng_ds, dlng_dd) = cheng(s, d, l, fluid, pipe);
    Conductance { g, dg_dq: g * dlng_ds * q / s, dg_dd: g * dlng_dd }
}

/// Cheng conductance at flow magnitude `s > 0`; returns `(g, ∂ln g/∂s, ∂ln g/∂d)`.
pub fn cheng(s: f64, d: f64, l: f64, fluid: &FluidProperties, pipe: &PipeProperties) -> (f64, f64, f64) {
    let eps = pipe.eps;
    assert!(d > 2.0 * eps, "diameter {d} must exceed twice the roughness");
    let re = 4.0 * fluid.rho * s / (PI * fluid.mu * d);

    let r9 = (re / pipe.re_lt).powi(9);
    let fa = 1.0 / (1.0 + r9);
    let one_m_fa = r9 / (1.0 + r9);
    let u = re * eps / (160.0 * d);
    let u2 = u * u;
    let fb = 1.0 / (1.0 + u2);
    let one_m_fb = u2 / (1.0 + u2);
    let dd = d - 2.0 * eps;
    let v6 = (dd / (2.0 * eps)).powi(6);
    let fg = 1.0 / (1.0 + v6);
    let one_m_fg = v6 / (1.0 + v6);

    let ln_fl = (fluid.rho / (16.0 * d * PI * fluid.mu)).ln();
    let ln_fc = (d.powi(5) * PI * PI / (8.0 * fluid.rho * l)).ln();
    let f_ts = 1.8 * (re / 6.8).ln_1p() / LN_10;
    let ln_fts = f_ts.ln();
    let f_tr = 2.0 * (3.7 * d / eps).log10();
    let ln_ftr = f_tr.ln();
    let ln_s = s.ln();
    let ln_dd = dd.ln();

    let c_s = -one_m_fa * one_m_fg;
    let c_g = 2.0 * fg;
    let c_l = fa * one_m_fg;
    let c_ts = 2.0 * fb * one_m_fa * one_m_fg;
    let c_tr = 2.0 * one_m_fa * one_m_fb * one_m_fg;
    let lng = c_s * ln_s + c_g * ln_dd + c_l * ln_fl + c_ts * ln_fts + c_tr * ln_ftr + ln_fc;
    let g = lng.exp();

    // derivatives of the blending factors with respect to Re (d fixed)
    let fa_re = -9.0 * fa * one_m_fa / re;
    let fb_re = -2.0 * fb * one_m_fb / re;
    let fts_re = 1.8 / (LN_10 * (6.8 + re));
    let lng_re = fa_re * one_m_fg * ln_s
        + fa_re * one_m_fg * ln_fl
        + 2.0 * one_m_fg * (fb_re * one_m_fa - fb * fa_re) * ln_fts
        + c_ts * fts_re / f_ts
        + 2.0 * one_m_fg * (-fa_re * one_m_fb - one_m_fa * fb_re) * ln_ftr;

    let dlng_ds = c_s / s + lng_re * re / s;

    // explicit d-dependence at fixed Re
    let fb_d = 2.0 * u2 * fb * fb / d;
    let fg_d = -6.0 * fg * one_m_fg / dd;
    let explicit = one_m_fa * fg_d * ln_s + 2.0 * fg_d * ln_dd + c_g / dd - fa * fg_d * ln_fl - c_l / d
        + 2.0 * one_m_fa * (fb_d * one_m_fg - fb * fg_d) * ln_fts
        + 2.0 * one_m_fa * (-fb_d * one_m_fg - one_m_fb * fg_d) * ln_ftr
        + c_tr * 2.0 / (LN_10 * d * f_tr)
        + 5.0 / d;
    let dlng_dd = explicit - lng_re * re / d;

    (g, dlng_ds, dlng_dd)
}

/// Reynolds number at flow magnitude `s`.
pub fn reynolds(s: f64, d: f64, fluid: &FluidProperties) -> f64 {
    4.0 * fluid.rho * s / (PI * fluid.mu * d)
}

/// Thermal resistance per unit length of pipe plus soil, K·m/W.
pub fn thermal_resistance(d: f64, pipe: &PipeProperties) -> Result<f64, PhysicsError> {
    if !(d > 0.0) || 4.0 * pipe.h <= pipe.r * d {
        return Err(PhysicsError::Domain(format!("thermal resistance needs 0 < r·d < 4h (d = {d})")));
    }
    Ok((4.0 * pipe.h / (pipe.r * d)).ln() / (2.0 * PI * pipe.lambda_g) + pipe.r.ln() / (2.0 * PI * pipe.lambda_i))
}

/// `dR_t/dd`.
pub fn thermal_resistance_dd(d: f64, pipe: &PipeProperties) -> f64 {
    -1.0 / (2.0 * PI * pipe.lambda_g * d)
}

/// Fraction of the inlet temperature difference left at the pipe exit.
pub fn heat_retention(q: f64, l: f64, r_t: f64, fluid: &FluidProperties) -> f64 {
    if l == 0.0 {
        return 1.0;
    }
    if q == 0.0 {
        return 0.0;
    }
    (-l / (fluid.rho_cp() * q.abs() * r_t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiatorModel {
    /// Logarithmic mean temperature difference.
    #[default]
    Lmtd,
    /// Arithmetic mean of inlet and outlet minus house temperature.
    ArithmeticMean,
}

/// `u / artanh(u)` and its derivative, for `|u| < 1`.
fn lmtd_ratio(u: f64) -> (f64, f64) {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        (1.0 - u2 / 3.0 - 4.0 * u2 * u2 / 45.0, -2.0 * u / 3.0 - 16.0 * u2 * u / 45.0)
    } else {
        let at = u.atanh();
        (u / at, (at - u / (1.0 - u * u)) / (at * at))
    }
}

/// Mean temperature difference for inlet/outlet excesses `a`, `b` over the
/// house temperature. Returns `(M, ∂M/∂a, ∂M/∂b)`, or `None` outside the
/// model's domain.
pub fn mean_temperature_difference(a: f64, b: f64, model: RadiatorModel) -> Option<(f64, f64, f64)> {
    match model {
        RadiatorModel::Lmtd => {
            if !(a > 0.0 && b > 0.0) {
                return None;
            }
            let m = 0.5 * (a + b);
            let delta = 0.5 * (a - b);
            let u = delta / m;
            let (phi, dphi) = lmtd_ratio(u);
            let dm = phi - u * dphi;
            let ddelta = dphi;
            Some((m * phi, 0.5 * (dm + ddelta), 0.5 * (dm - ddelta)))
        }
        RadiatorModel::ArithmeticMean => {
            let m = 0.5 * (a + b);
            if !(m > 0.0) {
                return None;
            }
            Some((m, 0.5, 0.5))
        }
    }
}

/// Radiator heat output `ξ M^n`, W.
pub fn radiator_heat(
    theta_in: f64,
    theta_out: f64,
    theta_house: f64,
    xi: f64,
    n: f64,
    model: RadiatorModel,
) -> Result<f64, PhysicsError> {
    mean_temperature_difference(theta_in - theta_house, theta_out - theta_house, model)
        .map(|(m, _, _)| xi * m.powf(n))
        .ok_or(PhysicsError::InfeasibleRadiator { consumer: usize::MAX, theta_in, theta_out, theta_house })
}

/// Sizes of the design partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub n_d: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub n_qb: usize,
}

impl DesignLayout {
    pub fn of(net: &Network) -> Self {
        Self {
            n_d: net.n_streets(),
            n_alpha: net.consumers().len(),
            n_beta: net.bypass_consumers().len(),
            n_qb: net.producers().len(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_d + self.n_alpha + self.n_beta + self.n_qb
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha_offset(&self) -> usize {
        self.n_d
    }

    pub fn beta_offset(&self) -> usize {
        self.n_d + self.n_alpha
    }

    pub fn qb_offset(&self) -> usize {
        self.n_d + self.n_alpha + self.n_beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    /// Inner diameter per street, m.
    pub d: Vec<f64>,
    /// Heating valve control per consumer.
    pub alpha: Vec<f64>,
    /// Bypass valve control per bypass arc.
    pub beta: Vec<f64>,
    /// Producer inflow, m³/s.
    pub q_b: Vec<f64>,
}

impl DesignVector {
    /// Diameters from the network file (0.15 m where unset), open valves and
    /// producer inflows at their maxima.
    pub fn initial(net: &Network) -> Self {
        let d =
            net.streets().iter().map(|arcs| arcs.iter().find_map(|a| net.arc(a.0).diameter).unwrap_or(0.15)).collect();
        Self {
            d,
            alpha: vec![1.0; net.consumers().len()],
            beta: vec![1.0; net.bypass_consumers().len()],
            q_b: net.producers().iter().map(|p| p.q_b_max).collect(),
        }
    }

    pub fn layout(&self) -> DesignLayout {
        DesignLayout { n_d: self.d.len(), n_alpha: self.alpha.len(), n_beta: self.beta.len(), n_qb: self.q_b.len() }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().len());
        v.extend_from_slice(&self.d);
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.q_b);
        v
    }

    pub fn from_flat(layout: DesignLayout, x: &[f64]) -> Self {
        assert_eq!(x.len(), layout.len(), "flat design length");
        let (d, rest) = x.split_at(layout.n_d);
        let (alpha, rest) = rest.split_at(layout.n_alpha);
        let (beta, q_b) = rest.split_at(layout.n_beta);
        Self { d: d.to_vec(), alpha: alpha.to_vec(), beta: beta.to_vec(), q_b: q_b.to_vec() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Smooth {
    q: f64,
    s: f64,
    /// Upstream weight of the start node, `(1 + q/s)/2`.
    w: f64,
    dw: f64,
}

impl Smooth {
    fn new(q: f64) -> Self {
        let s = (q * q + Q_EPS * Q_EPS).sqrt();
        Self { q, s, w: 0.5 * (1.0 + q / s), dw: Q_EPS * Q_EPS / (2.0 * s * s * s) }
    }

    fn qp(&self) -> f64 {
        self.s * self.w
    }

    fn qm(&self) -> f64 {
        -self.s * (1.0 - self.w)
    }
}

/// Pipe heat retention with derivatives.
#[derive(Debug, Clone, Copy)]
struct Retention {
    f: f64,
    df_dq: f64,
    df_dd: f64,
}

/// The thermo-hydraulic model of one network.
#[derive(Debug, Clone)]
pub struct Model {
    net: Network,
    radiator: RadiatorModel,
    layout: DesignLayout,
}

impl Model {
    pub fn new(net: Network, radiator: RadiatorModel) -> Self {
        let layout = DesignLayout::of(&net);
        Self { net, radiator, layout }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn radiator_model(&self) -> RadiatorModel {
        self.radiator
    }

    pub fn layout(&self) -> DesignLayout {
        self.layout
    }

    pub fn fluid(&self) -> &FluidProperties {
        &self.net.scenario().fluid
    }

    pub fn pipe(&self) -> &PipeProperties {
        &self.net.scenario().pipe
    }

    pub fn n_y(&self) -> usize {
        self.net.n_nodes() + self.net.n_arcs()
    }

    pub fn n_z(&self) -> usize {
        self.net.n_nodes() + self.net.n_arcs() + self.net.consumers().len()
    }

    /// Diameter of internal arc `a`.
    pub fn arc_diameter(&self, phi: &DesignVector, a: usize) -> f64 {
        match self.net.role(a) {
            ArcRole::Pipe { street } => phi.d[street],
            _ => panic!("arc {a} is not a pipe"),
        }
    }

    fn arc_length(&self, a: usize) -> f64 {
        self.net.arc(a).length.expect("pipe length")
    }

    pub fn arc_conductance(&self, phi: &DesignVector, a: usize, q: f64) -> Conductance {
        conductance(q, self.arc_diameter(phi, a), self.arc_length(a), self.fluid(), self.pipe())
    }

    fn retention(&self, phi: &DesignVector, a: usize, sm: &Smooth) -> Result<Retention, PhysicsError> {
        let d = self.arc_diameter(phi, a);
        let l = self.arc_length(a);
        let r = thermal_resistance(d, self.pipe())?;
        let k = l / (self.fluid().rho_cp() * r);
        let f = (-k / sm.s).exp();
        let df_ds = f * k / (sm.s * sm.s);
        let df_dr = f * k / (sm.s * r);
        Ok(Retention { f, df_dq: df_ds * sm.q / sm.s, df_dd: df_dr * thermal_resistance_dd(d, self.pipe()) })
    }

    /// Design column of the diameter that arc `a` uses.
    fn d_col(&self, a: usize) -> usize {
        match self.net.role(a) {
            ArcRole::Pipe { street } => street,
            _ => unreachable!(),
        }
    }

    fn reference_row(&self) -> usize {
        self.net.reference_node().0
    }

    /// Hydraulic residual `H(φ, y)`.
    pub fn hydraulic_residual(&self, phi: &DesignVector, y: &[f64]) -> Vec<f64> {
        self.hydraulic_system(phi, y, false).0
    }

    /// `∂H/∂y`.
    pub fn dh_dy(&self, phi: &DesignVector, y: &[f64]) -> Triplets {
        self.hydraulic_system(phi, y, true).1.expect("jacobian requested")
    }

    /// Residual and optionally `∂H/∂y` in one pass.
    pub fn hydraulic_system(&self, phi: &DesignVector, y: &[f64], jac: bool) -> (Vec<f64>, Option<Triplets>) {
        self.hydraulic_assemble(phi, y, jac, false)
    }

    /// Residual and the matrix of the system with conductances frozen at
    /// `y`, for which `H` is linear in the state.
    pub fn hydraulic_frozen(&self, phi: &DesignVector, y: &[f64]) -> (Vec<f64>, Triplets) {
        let (r, t) = self.hydraulic_assemble(phi, y, true, true);
        (r, t.expect("matrix requested"))
    }

    fn hydraulic_assemble(
        &self,
        phi: &DesignVector,
        y: &[f64],
        jac: bool,
        frozen: bool,
    ) -> (Vec<f64>, Option<Triplets>) {
        let n = self.net.n_nodes();
        let m = self.net.n_arcs();
        assert_eq!(y.len(), n + m, "hydraulic state length");
        let (p, q) = y.split_at(n);
        let rref = self.reference_row();
        let mut r = vec![0.0; n + m];
        let mut t = jac.then(|| Triplets::with_capacity(n + m, n + m, 5 * m + 1));

        for (a, arc) in self.net.arcs().iter().enumerate() {
            let (f, to) = (arc.from.0, arc.to.0);
            if f != rref {
                r[f] += q[a];
            }
            if to != rref {
                r[to] -= q[a];
            }
            if let Some(t) = t.as_mut() {
                if f != rref {
                    t.push(f, n + a, 1.0);
                }
                if to != rref {
                    t.push(to, n + a, -1.0);
                }
            }
        }
        r[rref] = p[rref];
        if let Some(t) = t.as_mut() {
            t.push(rref, rref, 1.0);
        }

        let fluid = self.fluid();
        let pipe = self.pipe();
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let (f, to) = (arc.from.0, arc.to.0);
            let dp = p[f] - p[to];
            let row = n + a;
            match self.net.role(a) {
                ArcRole::Pipe { street } => {
                    let c = conductance(q[a], phi.d[street], self.arc_length(a), fluid, pipe);
                    r[row] = dp - q[a] / c.g;
                    if let Some(t) = t.as_mut() {
                        t.push(row, f, 1.0);
                        t.push(row, to, -1.0);
                        let slope = if frozen { 0.0 } else { q[a] * c.dg_dq / (c.g * c.g) };
                        t.push(row, n + a, -1.0 / c.g + slope);
                    }
                }
                ArcRole::Heating { consumer } => {
                    let spec = &self.net.consumers()[consumer];
                    let sm = Smooth::new(q[a]);
                    let al2 = phi.alpha[consumer] * phi.alpha[consumer];
                    r[row] = dp - spec.zeta * sm.s * q[a] / al2;
                    if let Some(t) = t.as_mut() {
                        t.push(row, f, 1.0);
                        t.push(row, to, -1.0);
                        let slope = if frozen { 0.0 } else { q[a] * q[a] / sm.s };
                        t.push(row, n + a, -spec.zeta * (sm.s + slope) / al2);
                    }
                }
                ArcRole::Bypass { consumer, slot } => {
                    let spec = &self.net.consumers()[consumer];
                    let c = phi.beta[slot] * spec.q_max_b / spec.dp_des_b;
                    r[row] = q[a] - c * dp;
                    if let Some(t) = t.as_mut() {
                        t.push(row, n + a, 1.0);
                        t.push(row, f, -c);
                        t.push(row, to, c);
                    }
                }
                ArcRole::Producer { producer } => {
                    r[row] = q[a] - phi.q_b[producer];
                    if let Some(t) = t.as_mut() {
                        t.push(row, n + a, 1.0);
                    }
                }
            }
        }
        (r, t)
    }

    /// `∂H/∂φ`, rows over `H`, columns over the flat design vector.
    pub fn dh_dphi(&self, phi: &DesignVector, y: &[f64]) -> Triplets {
        let n = self.net.n_nodes();
        let m = self.net.n_arcs();
        let (p, q) = y.split_at(n);
        let lay = self.layout;
        let mut t = Triplets::with_capacity(n + m, lay.len(), m);
        for (a, arc) in self.net.arcs().iter().enumerate() {
            let dp = p[arc.from.0] - p[arc.to.0];
            let row = n + a;
            match self.net.role(a) {
                ArcRole::Pipe { street } => {
                    let c = conductance(q[a], phi.d[street], self.arc_length(a), self.fluid(), self.pipe());
                    t.push(row, street, q[a] * c.dg_dd / (c.g * c.g));
                }
                ArcRole::Heating { consumer } => {
                    let spec = &self.net.consumers()[consumer];
                    let sm = Smooth::new(q[a]);
                    let al = phi.alpha[consumer];
                    t.push(row, lay.alpha_offset() + consumer, 2.0 * spec.zeta * sm.s * q[a] / (al * al * al));
                }
                ArcRole::Bypass { consumer, slot } => {
                    let spec = &self.net.consumers()[consumer];
                    t.push(row, lay.beta_offset() + slot, -spec.q_max_b / spec.dp_des_b * dp);
                }
                ArcRole::Producer { producer } => {
                    t.push(row, lay.qb_offset() + producer, -1.0);
                }
            }
        }
        t
    }

    /// Radiator row data for consumer `k`: `(M, ∂M/∂θ_in, ∂M/∂θ_out)`.
    fn radiator_mean(&self, k: usize, theta_in: f64, theta_out: f64) -> Result<(f64, f64, f64), PhysicsError> {
        let spec = &self.net.consumers()[k];
        mean_temperature_difference(theta_in - spec.theta_house, theta_out - spec.theta_house, self.radiator)
            .ok_or(PhysicsError::InfeasibleRadiator { consumer: k, theta_in, theta_out, theta_house: spec.theta_house })
    }

    /// Thermal residual `E(φ, y, z)`.
    pub fn thermal_residual(&self, phi: &DesignVector, y: &[f64], z: &[f64]) -> Result<Vec<f64>, PhysicsError> {
        Ok(self.thermal_system(phi, y, z, ThermalParts::default())?.residual)
    }

    /// `∂E/∂z`.
    pub fn de_dz(&self, phi: &DesignVector, y: &[f64], z: &[f64]) -> Result<Triplets, PhysicsError> {
        let parts = ThermalParts { dz: true, ..Default::default() };
        Ok(self.thermal_system(phi, y, z, parts)?.dz.expect("requested"))
    }

    /// `∂E/∂y`.
    pub fn de_dy(&self, phi: &DesignVector, y: &[f64], z: &[f64]) -> Result<Triplets, PhysicsError> {
        let parts = ThermalParts { dy: true, ..Default::default() };
        Ok(self.thermal_system(phi, y, z, parts)?.dy.expect("requested"))
    }

    /// `∂E/∂φ`.
    pub fn de_dphi(&self, phi: &DesignVector, y: &[f64], z: &[f64]) -> Result<Triplets, PhysicsError> {
        let parts = ThermalParts { dphi: true, ..Default::default() };
        Ok(self.thermal_system(phi, y, z, parts)?.dphi.expect("requested"))
    }

    /// Thermal residual with any subset of its Jacobian blocks.
    pub fn thermal_system(
        &self,
        phi: &DesignVector,
        y: &[f64],
        z: &[f64],
        parts: ThermalParts,
    ) -> Result<ThermalSystem, PhysicsError> {
        let n = self.net.n_nodes();
        let m = self.net.n_arcs();
        let nc = self.net.consumers().len();
        assert_eq!(y.len(), n + m, "hydraulic state length");
        assert_eq!(z.len(), n + m + nc, "thermal state length");
        let q = &y[n..];
        let theta_n = &z[..n];
        let theta_a = &z[n..n + m];
        let heat = &z[n + m..];
        let rcp = self.fluid().rho_cp();
        let nz = n + m + nc;
        let lay = self.layout;

        let mut r = vec![0.0; nz];
        let mut tz = parts.dz.then(|| Triplets::with_capacity(nz, nz, 8 * m + 3 * nc));
        let mut ty = parts.dy.then(|| Triplets::with_capacity(nz, n + m, 4 * m + nc));
        let mut tp = parts.dphi.then(|| Triplets::with_capacity(nz, lay.len(), m));
        let col_ta = |a: usize| n + a;
        let col_q = |a: usize| n + a;

        for (a, arc) in self.net.arcs().iter().enumerate() {
            let (f, to) = (arc.from.0, arc.to.0);
            let sm = Smooth::new(q[a]);
            let (qp, qm) = (sm.qp(), sm.qm());
            let ta = theta_a[a];
            // junction rows: outflow minus inflow of convected energy
            r[f] += qp * theta_n[f] + qm * ta;
            r[to] -= qp * ta + qm * theta_n[to];
            if let Some(t) = tz.as_mut() {
                t.push(f, f, qp);
                t.push(f, col_ta(a), qm);
                t.push(to, col_ta(a), -qp);
                t.push(to, to, -qm);
            }
            if let Some(t) = ty.as_mut() {
                t.push(f, col_q(a), sm.w * theta_n[f] + (1.0 - sm.w) * ta);
                t.push(to, col_q(a), -(sm.w * ta + (1.0 - sm.w) * theta_n[to]));
            }

            let row = n + a;
            let up = sm.w * theta_n[f] + (1.0 - sm.w) * theta_n[to];
            let dup_dq = sm.dw * (theta_n[f] - theta_n[to]);
            match self.net.role(a) {
                ArcRole::Pipe { .. } => {
                    let ret = self.retention(phi, a, &sm)?;
                    r[row] = ta - ret.f * up;
                    if let Some(t) = tz.as_mut() {
                        t.push(row, col_ta(a), 1.0);
                        t.push(row, f, -ret.f * sm.w);
                        t.push(row, to, -ret.f * (1.0 - sm.w));
                    }
                    if let Some(t) = ty.as_mut() {
                        t.push(row, col_q(a), -ret.df_dq * up - ret.f * dup_dq);
                    }
                    if let Some(t) = tp.as_mut() {
                        t.push(row, self.d_col(a), -ret.df_dd * up);
                    }
                }
                ArcRole::Heating { consumer } => {
                    let qrow = n + m + consumer;
                    r[row] = rcp * q[a] * (up - ta) - heat[consumer];
                    let spec = &self.net.consumers()[consumer];
                    let (mt, dm_in, dm_out) = self.radiator_mean(consumer, up, ta)?;
                    let mn1 = mt.powf(spec.n - 1.0);
                    let qrad = spec.xi * mn1 * mt;
                    let k = spec.xi * spec.n * mn1;
                    r[qrow] = heat[consumer] - qrad;
                    if let Some(t) = tz.as_mut() {
                        t.push(row, f, rcp * q[a] * sm.w);
                        t.push(row, to, rcp * q[a] * (1.0 - sm.w));
                        t.push(row, col_ta(a), -rcp * q[a]);
                        t.push(row, qrow, -1.0);
                        t.push(qrow, qrow, 1.0);
                        t.push(qrow, f, -k * dm_in * sm.w);
                        t.push(qrow, to, -k * dm_in * (1.0 - sm.w));
                        t.push(qrow, col_ta(a), -k * dm_out);
                    }
                    if let Some(t) = ty.as_mut() {
                        t.push(row, col_q(a), rcp * ((up - ta) + q[a] * dup_dq));
                        t.push(qrow, col_q(a), -k * dm_in * dup_dq);
                    }
                }
                ArcRole::Bypass { .. } => {
                    r[row] = ta - up;
                    if let Some(t) = tz.as_mut() {
                        t.push(row, col_ta(a), 1.0);
                        t.push(row, f, -sm.w);
                        t.push(row, to, -(1.0 - sm.w));
                    }
                    if let Some(t) = ty.as_mut() {
                        t.push(row, col_q(a), -dup_dq);
                    }
                }
                ArcRole::Producer { producer } => {
                    r[row] = ta - self.net.producers()[producer].theta_b;
                    if let Some(t) = tz.as_mut() {
                        t.push(row, col_ta(a), 1.0);
                    }
                }
            }
        }
        Ok(ThermalSystem { residual: r, dz: tz, dy: ty, dphi: tp })
    }

    /// Divisors applied to the rows of `H` for norms and factorization.
    pub fn hydraulic_row_scales(&self) -> Vec<f64> {
        let n = self.net.n_nodes();
        let (q_scale, p_scale) = self.hydraulic_scales();
        let mut s = vec![q_scale; n + self.net.n_arcs()];
        s[self.reference_row()] = p_scale;
        for (a, arc) in self.net.arcs().iter().enumerate() {
            if matches!(arc.kind, ArcKind::Internal | ArcKind::ConsumerHeating) {
                s[n + a] = p_scale;
            }
        }
        s
    }

    /// `(flow scale m³/s, pressure scale Pa)`.
    pub fn hydraulic_scales(&self) -> (f64, f64) {
        let q_scale: f64 = self.net.producers().iter().map(|p| p.q_b_max).sum();
        (q_scale, 5e4)
    }

    /// `(temperature scale K, heat scale W)`.
    pub fn thermal_scales(&self) -> (f64, f64) {
        let theta = self.net.producers().iter().map(|p| p.theta_b).fold(0.0_f64, f64::max);
        let heat = self.net.consumers().iter().map(|c| c.q_d).fold(1.0_f64, f64::max);
        (theta, heat)
    }

    /// Divisors applied to the rows of `E`.
    pub fn thermal_row_scales(&self) -> Vec<f64> {
        let n = self.net.n_nodes();
        let m = self.net.n_arcs();
        let (q_scale, _) = self.hydraulic_scales();
        let (theta_scale, heat_scale) = self.thermal_scales();
        let mut s = vec![q_scale * theta_scale; n + m + self.net.consumers().len()];
        for (a, arc) in self.net.arcs().iter().enumerate() {
            s[n + a] = if arc.kind == ArcKind::ConsumerHeating { heat_scale } else { theta_scale };
        }
        for v in &mut s[n + m..] {
            *v = heat_scale;
        }
        s
    }
}

/// Which Jacobian blocks [`Model::thermal_system`] should assemble.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThermalParts {
    pub dz: bool,
    pub dy: bool,
    pub dphi: bool,
}

#[derive(Debug, Clone)]
pub struct ThermalSystem {
    pub residual: Vec<f64>,
    pub dz: Option<Triplets>,
    pub dy: Option<Triplets>,
    pub dphi: Option<Triplets>,
}

/// Radiator coefficient and valve constant of a heating system designed to
/// deliver `q_d` at inlet `t_in` (°C) with temperature drop `dt`, pressure
/// drop `dp`, room temperature `t_room` and ambient `t_inf`.
///
/// Returns `(ξ in W/K^n, ζ in Pa·s²/m⁶)`.
pub fn design_characteristics(
    q_d: f64,
    t_in: f64,
    dt: f64,
    dp: f64,
    n: f64,
    t_room: f64,
    fluid: &FluidProperties,
) -> (f64, f64) {
    let t_out = t_in - dt;
    let lmtd = dt / ((t_in - t_room) / (t_out - t_room)).ln();
    let xi = q_d * lmtd.powf(-n);
    let q = q_d / (fluid.rho_cp() * dt);
    (xi, dp / (q * q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn defaults() -> (FluidProperties, PipeProperties) {
        (FluidProperties::default(), PipeProperties::default())
    }

    fn q_for_re(re: f64, d: f64, fluid: &FluidProperties) -> f64 {
        re * PI * fluid.mu * d / (4.0 * fluid.rho)
    }

    #[test]
    fn laminar_limit() {
        let (fl, pp) = defaults();
        let (d, l) = (0.1, 100.0);
        let q = q_for_re(100.0, d, &fl);
        let g = conductance(q, d, l, &fl, &pp).g;
        let hp = PI * d.powi(4) / (128.0 * fl.mu * l);
        assert_relative_eq!(g, hp, max_relative = 0.01);
    }

    #[test]
    fn zero_flow_is_laminar() {
        let (fl, pp) = defaults();
        let (d, l) = (0.15, 80.0);
        let g = conductance(0.0, d, l, &fl, &pp).g;
        let hp = PI * d.powi(4) / (128.0 * fl.mu * l);
        assert_relative_eq!(g, hp, max_relative = 1e-12);
    }

    #[test]
    fn rough_limit() {
        let (fl, pp) = defaults();
        let (d, l) = (0.1, 100.0);
        let q = q_for_re(1e8, d, &fl);
        let g = conductance(q, d, l, &fl, &pp).g;
        let f_d = (2.0 * (3.7 * d / pp.eps).log10()).powi(-2);
        let dp = f_d * l / d * fl.rho * (4.0 * q / (PI * d * d)).powi(2) / 2.0;
        assert_relative_eq!(g, q / dp, max_relative = 0.02);
    }

    #[test]
    fn conductance_is_even_in_q() {
        let (fl, pp) = defaults();
        for &q in &[1e-6, 3e-4, 2e-2] {
            let a = conductance(q, 0.1, 50.0, &fl, &pp);
            let b = conductance(-q, 0.1, 50.0, &fl, &pp);
            assert_eq!(a.g, b.g);
            assert_eq!(a.dg_dq, -b.dg_dq);
        }
    }

    #[test]
    fn conductance_derivatives_match_fd() {
        let (fl, pp) = defaults();
        for &d in &[1e-3, 0.032, 0.15, 0.45] {
            for &re in &[1.0, 500.0, 2500.0, 2720.0, 3000.0, 1e4, 1e6] {
                let q = q_for_re(re, d, &fl) * 1.37;
                let c = conductance(q, d, 100.0, &fl, &pp);
                let hq = 1e-6 * q.abs();
                let fdq = (conductance(q + hq, d, 100.0, &fl, &pp).g - conductance(q - hq, d, 100.0, &fl, &pp).g)
                    / (2.0 * hq);
                assert_relative_eq!(c.dg_dq, fdq, max_relative = 1e-6, epsilon = 1e-8 * c.g / q.abs());
                let hd = 1e-6 * d;
                let fdd = (conductance(q, d + hd, 100.0, &fl, &pp).g - conductance(q, d - hd, 100.0, &fl, &pp).g)
                    / (2.0 * hd);
                assert_relative_eq!(c.dg_dd, fdd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn conductance_derivative_in_roughness_blend() {
        // diameters where the f_g blending is active
        let (fl, pp) = defaults();
        for &d in &[1.2e-4, 1.8e-4, 3e-4] {
            let q = 1e-7;
            let c = conductance(q, d, 10.0, &fl, &pp);
            let hd = 1e-7 * d;
            let fdd =
                (conductance(q, d + hd, 10.0, &fl, &pp).g - conductance(q, d - hd, 10.0, &fl, &pp).g) / (2.0 * hd);
            assert_relative_eq!(c.dg_dd, fdd, max_relative = 1e-6);
        }
    }

    #[test]
    fn thermal_resistance_hand_value() {
        let pp = PipeProperties::default();
        let d = 0.15;
        let soil = (4.0_f64 / (2.0 * 0.15)).ln() / (2.0 * PI * 1.5);
        let ins = 2.0_f64.ln() / (2.0 * PI * 0.025);
        assert_relative_eq!(thermal_resistance(d, &pp).unwrap(), soil + ins, max_relative = 1e-14);
        assert_relative_eq!(soil + ins, 4.6875, max_relative = 1e-3);

        let mut thin = pp;
        thin.r = 1.0 + 1e-12;
        let r = thermal_resistance(d, &thin).unwrap();
        let soil_only = (4.0 / (thin.r * d)).ln() / (2.0 * PI * 1.5);
        assert_relative_eq!(r, soil_only, max_relative = 1e-9);

        let mut doubled = pp;
        doubled.lambda_i *= 2.0;
        let r2 = thermal_resistance(d, &doubled).unwrap();
        assert_relative_eq!(r2, soil + ins / 2.0, max_relative = 1e-14);

        assert!(thermal_resistance(2.0, &pp).is_err());
    }

    #[test]
    fn heat_retention_values() {
        let fl = FluidProperties::default();
        assert_eq!(heat_retention(1e-3, 0.0, 5.0, &fl), 1.0);
        assert_eq!(heat_retention(0.0, 10.0, 5.0, &fl), 0.0);
        assert!(heat_retention(1e6, 100.0, 5.0, &fl) > 1.0 - 1e-9);
        let expected = (-100.0_f64 / (4.114_692e6 * 1e-3 * 5.0)).exp();
        assert_relative_eq!(heat_retention(1e-3, 100.0, 5.0, &fl), expected, max_relative = 1e-12);
    }

    #[test]
    fn lmtd_series_branch_is_continuous() {
        for &u in &[999e-6_f64, 1001e-6] {
            let at = u.atanh();
            let (phi, dphi) = lmtd_ratio(u);
            assert_relative_eq!(phi, u / at, max_relative = 1e-13);
            let h = 1e-7;
            let fd = ((u + h) / (u + h).atanh() - (u - h) / (u - h).atanh()) / (2.0 * h);
            assert_relative_eq!(dphi, fd, max_relative = 1e-5);
        }
        let (m, _, _) = mean_temperature_difference(30.0, 30.0, RadiatorModel::Lmtd).unwrap();
        assert_eq!(m, 30.0);
        let (m, _, _) = mean_temperature_difference(30.0 + 1e-9, 30.0, RadiatorModel::Lmtd).unwrap();
        assert_relative_eq!(m, 30.0, max_relative = 1e-10);
    }

    #[test]
    fn mean_temperature_derivatives() {
        for model in [RadiatorModel::Lmtd, RadiatorModel::ArithmeticMean] {
            for &(a, b) in &[(40.0, 20.0), (35.0, 34.99), (50.0, 0.5)] {
                let (_, da, db) = mean_temperature_difference(a, b, model).unwrap();
                let h = 1e-6;
                let f = |a: f64, b: f64| mean_temperature_difference(a, b, model).unwrap().0;
                assert_relative_eq!(da, (f(a + h, b) - f(a - h, b)) / (2.0 * h), max_relative = 1e-6);
                assert_relative_eq!(db, (f(a, b + h) - f(a, b - h)) / (2.0 * h), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn dwelling_radiator_inversion() {
        let fl = FluidProperties::default();
        let (xi, zeta) = design_characteristics(15e3, 55.0, 20.0, 5e4, 1.2, 20.0, &fl);
        assert_relative_eq!(xi / 1e3, 0.34, max_relative = 0.03);
        assert_relative_eq!(zeta / 1e12, 1.5, max_relative = 0.03);
        // forward evaluation from the same design point recovers Q_d
        let q = radiator_heat(55.0, 35.0, 20.0, xi, 1.2, RadiatorModel::Lmtd).unwrap();
        assert_relative_eq!(q, 15e3, max_relative = 1e-12);
    }

    #[test]
    fn radiator_hand_value() {
        // supply 60 °C, return 40 °C, ambient -8 °C, room 20 °C
        let fl = FluidProperties::default();
        let (xi, _) = design_characteristics(15e3, 55.0, 20.0, 5e4, 1.2, 20.0, &fl);
        let (t_in, t_out, th) = (68.0, 48.0, 28.0);
        let lmtd = (t_in - t_out) / ((t_in - th) / (t_out - th) as f64).ln();
        let expected = xi * lmtd.powf(1.2);
        let got = radiator_heat(t_in, t_out, th, xi, 1.2, RadiatorModel::Lmtd).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!(radiator_heat(40.0, 27.0, 28.0, xi, 1.2, RadiatorModel::Lmtd).is_err());
        let mean = radiator_heat(t_in, t_out, th, xi, 1.2, RadiatorModel::ArithmeticMean).unwrap();
        assert_relative_eq!(mean, xi * 30.0_f64.powf(1.2), max_relative = 1e-12);
    }

    #[test]
    fn design_vector_round_trip() {
        let phi = DesignVector { d: vec![0.1, 0.2], alpha: vec![0.5], beta: vec![], q_b: vec![1e-3, 2e-3] };
        let flat = phi.flatten();
        assert_eq!(flat.len(), 5);
        assert_eq!(DesignVector::from_flat(phi.layout(), &flat), phi);
    }
}
