//! Design-space transforms: cost function, comfort constraints, KS
//! aggregation, smoothed multi-projection and the penalized pipe cost.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adjoint::QuantityOfInterest;
use crate::network::{ArcKind, Network};
use crate::physics::{DesignLayout, DesignVector, Model};
use crate::solver::StateSolution;

/// Diameter substituted for the catalog's "no pipe" entry, m.
pub const D_MIN: f64 = 1e-3;

/// χ below this is treated as the identity projection.
const CHI_IDENTITY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DesignError {
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("invalid continuation schedule: {0}")]
    Schedule(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeCatalog {
    /// Ascending diameters, m; the first entry is 0 (no pipe).
    pub diameters: Vec<f64>,
    /// Cost per meter for each diameter, €/m.
    pub costs: Vec<f64>,
    /// Width of the overshoot piece above the largest diameter, m.
    #[serde(default = "default_overshoot")]
    pub w: f64,
    /// Cost increase across the overshoot piece, €/m. Defaults to ten times
    /// the largest catalog cost.
    #[serde(default)]
    pub c_w: Option<f64>,
}

fn default_overshoot() -> f64 {
    0.1
}

impl Default for PipeCatalog {
    fn default() -> Self {
        Self {
            diameters: vec![0.0, 0.032, 0.065, 0.1, 0.15, 0.2, 0.3, 0.4],
            costs: vec![0.0, 2202.0, 2218.0, 2258.0, 2448.0, 2461.0, 2665.0, 2922.0],
            w: default_overshoot(),
            c_w: None,
        }
    }
}

impl PipeCatalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DesignError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        let cat: Self = serde_json::from_str(&text).map_err(|e| DesignError::Catalog(e.to_string()))?;
        cat.validate()?;
        Ok(cat)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let d = &self.diameters;
        let c = &self.costs;
        if d.len() != c.len() {
            return Err(DesignError::Catalog("diameters and costs differ in length".into()));
        }
        if d.len() < 2 {
            return Err(DesignError::Catalog("need at least one pipe size besides 0".into()));
        }
        if d[0] != 0.0 || c[0] != 0.0 {
            return Err(DesignError::Catalog("first entry must be diameter 0 at cost 0".into()));
        }
        if d.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DesignError::Catalog("diameters must be strictly ascending".into()));
        }
        if d[1] <= D_MIN {
            return Err(DesignError::Catalog(format!("smallest pipe must exceed {D_MIN} m")));
        }
        if c.windows(2).any(|w| w[1] < w[0]) || c.iter().any(|v| *v < 0.0) {
            return Err(DesignError::Catalog("costs must be nonnegative and nondecreasing".into()));
        }
        if !(self.w > 0.0) {
            return Err(DesignError::Catalog("overshoot width w must be > 0".into()));
        }
        if self.c_w.is_some_and(|v| !(v >= 0.0)) {
            return Err(DesignError::Catalog("overshoot cost must be >= 0".into()));
        }
        Ok(())
    }

    pub fn c_w(&self) -> f64 {
        self.c_w.unwrap_or(10.0 * self.costs[self.costs.len() - 1])
    }

    /// Physical diameters: the 0 entry replaced by [`D_MIN`].
    pub fn physical_diameters(&self) -> Vec<f64> {
        let mut d = self.diameters.clone();
        d[0] = D_MIN;
        d
    }

    pub fn largest(&self) -> f64 {
        self.diameters[self.diameters.len() - 1]
    }

    /// Exclusive upper bound of the diameter domain.
    pub fn upper_bound(&self) -> f64 {
        self.largest() + self.w
    }

    /// Index and physical value of the nearest catalog diameter.
    pub fn nearest(&self, d: f64) -> (usize, f64) {
        self.physical_diameters()
            .into_iter()
            .enumerate()
            .min_by(|a, b| (a.1 - d).abs().total_cmp(&(b.1 - d).abs()))
            .expect("catalog is not empty")
    }
}

/// Continuation parameters of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageParams {
    pub gamma: f64,
    pub chi: f64,
    pub upsilon: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub stages: Vec<StageParams>,
}

/// Range form of a schedule file: `n_stages` plus `[start, end]` per
/// parameter; γ is spaced geometrically, the rest linearly.
#[derive(Debug, Clone, Deserialize)]
struct ScheduleRanges {
    n_stages: usize,
    gamma: [f64; 2],
    chi: [f64; 2],
    upsilon: [f64; 2],
    omega: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScheduleFile {
    Explicit(ContinuationSchedule),
    Ranges(ScheduleRanges),
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self::from_ranges(20, [5e3, 1e5], [0.0, 100.0], [0.0, 1.0], [0.0, 100.0])
    }
}

impl ContinuationSchedule {
    pub fn from_ranges(n: usize, gamma: [f64; 2], chi: [f64; 2], upsilon: [f64; 2], omega: [f64; 2]) -> Self {
        let frac = |k: usize| if n <= 1 { 1.0 } else { k as f64 / (n - 1) as f64 };
        let lin = |r: [f64; 2], t: f64| r[0] + (r[1] - r[0]) * t;
        let stages = (0..n)
            .map(|k| {
                let t = frac(k);
                StageParams {
                    gamma: gamma[0] * (gamma[1] / gamma[0]).powf(t),
                    chi: lin(chi, t),
                    upsilon: lin(upsilon, t),
                    omega: lin(omega, t),
                }
            })
            .collect();
        Self { stages }
    }

    /// Only the first parameters of the ranges: the relaxed continuous
    /// sizing problem.
    pub fn relaxed(gamma: f64) -> Self {
        Self { stages: vec![StageParams { gamma, chi: 0.0, upsilon: 0.0, omega: 0.0 }] }
    }

    pub fn from_json(text: &str) -> Result<Self, DesignError> {
        let file: ScheduleFile = serde_json::from_str(text).map_err(|e| DesignError::Schedule(e.to_string()))?;
        let s = match file {
            ScheduleFile::Explicit(s) => s,
            ScheduleFile::Ranges(r) => Self::from_ranges(r.n_stages, r.gamma, r.chi, r.upsilon, r.omega),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DesignError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DesignError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if self.stages.is_empty() {
            return Err(DesignError::Schedule("at least one stage required".into()));
        }
        for (k, s) in self.stages.iter().enumerate() {
            if !(s.gamma > 0.0) || !(s.chi >= 0.0) || !(s.omega >= 0.0) || !(0.0..=1.0).contains(&s.upsilon) {
                return Err(DesignError::Schedule(format!("stage {k} parameters out of range: {s:?}")));
            }
        }
        for (k, w) in self.stages.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            for (name, x, y) in [
                ("gamma", a.gamma, b.gamma),
                ("chi", a.chi, b.chi),
                ("upsilon", a.upsilon, b.upsilon),
                ("omega", a.omega, b.omega),
            ] {
                if y < x {
                    return Err(DesignError::Schedule(format!("{name} decreases from stage {k} to stage {}", k + 1)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Price of pump capacity and operation, €/W.
    pub lambda_p: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { lambda_p: 1e5 }
    }
}

/// Smoothed Heaviside `P(φ, η, χ)` and its derivative in `φ`.
pub fn project_with_derivative(phi: f64, eta: f64, chi: f64) -> (f64, f64) {
    if chi < CHI_IDENTITY {
        return (phi, 1.0);
    }
    let a = (chi * eta).tanh();
    let den = a + (chi * (1.0 - eta)).tanh();
    let t = (chi * (phi - eta)).tanh();
    ((a + t) / den, chi * (1.0 - t * t) / den)
}

pub fn project(phi: f64, eta: f64, chi: f64) -> f64 {
    project_with_derivative(phi, eta, chi).0
}

/// Piece containing `d` among `knots`: `Some(j)` with `knots[j] ≤ d ≤ knots[j+1]`.
fn piece(knots: &[f64], d: f64) -> Option<usize> {
    if d < knots[0] || d > knots[knots.len() - 1] {
        return None;
    }
    Some(knots.windows(2).position(|w| d <= w[1]).unwrap_or(knots.len() - 2))
}

/// Extended projection onto the catalog; returns `(d̄, dd̄/dd)`.
///
/// Interior pieces use η = 0.5; the overshoot piece above the largest size
/// uses η = 1 so it rounds down. Below [`D_MIN`] the map is the identity.
pub fn multi_project(d: f64, cat: &PipeCatalog, chi: f64) -> Result<(f64, f64), DesignError> {
    if !(d > 0.0) || d >= cat.upper_bound() {
        return Err(DesignError::Domain(format!("diameter {d} outside (0, {})", cat.upper_bound())));
    }
    if d <= D_MIN {
        return Ok((d, 1.0));
    }
    let mut knots = cat.physical_diameters();
    knots.push(cat.upper_bound());
    let j = piece(&knots, d).expect("inside the knot range");
    let (lo, hi) = (knots[j], knots[j + 1]);
    let eta = if j == knots.len() - 2 { 1.0 } else { 0.5 };
    let width = hi - lo;
    let (p, dp) = project_with_derivative((d - lo) / width, eta, chi);
    Ok((lo + width * p, dp))
}

/// Penalized pipe cost `C(d, υ, ω)` in €/m and its derivative in `d`.
pub fn pipe_cost(d: f64, cat: &PipeCatalog, upsilon: f64, omega: f64) -> (f64, f64) {
    let dd = cat.physical_diameters();
    let c = &cat.costs;
    let n = dd.len() - 1;
    let slope = c[n] / (dd[n] - dd[1]);
    let linear = slope * (d - dd[1]);
    let (stair, dstair) = if d >= dd[n] {
        let (p, dp) = project_with_derivative((d - dd[n]) / cat.w, 0.0, omega);
        (c[n] + cat.c_w() * p, cat.c_w() * dp / cat.w)
    } else if d <= dd[0] {
        // below the no-pipe diameter the staircase stays at zero cost
        (0.0, 0.0)
    } else {
        let j = piece(&dd, d).expect("inside the catalog range");
        let width = dd[j + 1] - dd[j];
        let (p, dp) = project_with_derivative((d - dd[j]) / width, 0.0, omega);
        (c[j] + (c[j + 1] - c[j]) * p, (c[j + 1] - c[j]) * dp / width)
    };
    (upsilon * stair + (1.0 - upsilon) * linear, upsilon * dstair + (1.0 - upsilon) * slope)
}

/// `(1/γ) ln Σ exp(γ h_i)` with max-shift, and its gradient (softmax weights).
pub fn ks_aggregate(h: &[f64], gamma: f64) -> (f64, Vec<f64>) {
    assert!(!h.is_empty(), "KS aggregation of an empty vector");
    assert!(gamma > 0.0, "KS parameter must be > 0");
    let hmax = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = h.iter().map(|v| (gamma * (v - hmax)).exp()).collect();
    let sum: f64 = e.iter().sum();
    (hmax + sum.ln() / gamma, e.into_iter().map(|v| v / sum).collect())
}

/// Comfort-band rows `[0.95 − Q/Q_d, Q/Q_d − 1.05]` per consumer.
pub fn comfort_constraints(heat: &[f64], net: &Network) -> Vec<f64> {
    let mut h = Vec::with_capacity(2 * heat.len());
    for (q, c) in heat.iter().zip(net.consumers()) {
        let r = q / c.q_d;
        h.push(0.95 - r);
        h.push(r - 1.05);
    }
    h
}

/// Value of the cost function split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    /// `Σ (p_i − p_j) q_ij` over internal arcs, W.
    pub pump_power: f64,
    /// `λ_P` times the pump power, €.
    pub pump: f64,
    /// `Σ C(d) L` over internal arcs, €.
    pub piping: f64,
    pub total: f64,
}

/// Internal pipe length per street.
pub fn street_lengths(net: &Network) -> Vec<f64> {
    net.streets().iter().map(|arcs| arcs.iter().map(|a| net.arc(a.0).length.unwrap_or(0.0)).sum()).collect()
}

pub fn pump_power(model: &Model, y: &[f64]) -> f64 {
    let net = model.network();
    let n = net.n_nodes();
    net.arcs_of_kind(ArcKind::Internal).map(|a| (y[a.from.0] - y[a.to.0]) * y[n + a.id.0]).sum()
}

/// Cost function at projected design `φ̄` and its state, as a quantity of
/// interest over `(y, z, φ̄)`.
pub fn objective_qoi(
    model: &Model,
    phi_bar: &DesignVector,
    sol: &StateSolution,
    cat: &PipeCatalog,
    weights: CostWeights,
    upsilon: f64,
    omega: f64,
) -> (ObjectiveValue, QuantityOfInterest) {
    let net = model.network();
    let n = net.n_nodes();
    let y = &sol.y;
    let mut j = QuantityOfInterest::zeros(0.0, model.n_y(), model.n_z(), model.layout().len());
    let lp = weights.lambda_p;
    let mut power = 0.0;
    for a in net.arcs_of_kind(ArcKind::Internal) {
        let (f, t, k) = (a.from.0, a.to.0, a.id.0);
        let q = y[n + k];
        power += (y[f] - y[t]) * q;
        j.dj_dy[f] += lp * q;
        j.dj_dy[t] -= lp * q;
        j.dj_dy[n + k] += lp * (y[f] - y[t]);
    }
    let mut piping = 0.0;
    for (s, len) in street_lengths(net).into_iter().enumerate() {
        let (c, dc) = pipe_cost(phi_bar.d[s], cat, upsilon, omega);
        piping += c * len;
        j.dj_dphi[s] = dc * len;
    }
    let value = ObjectiveValue { pump_power: power, pump: lp * power, piping, total: lp * power + piping };
    j.value = value.total;
    (value, j)
}

/// Aggregated comfort constraint as a quantity of interest.
pub fn ks_qoi(model: &Model, sol: &StateSolution, gamma: f64) -> QuantityOfInterest {
    let net = model.network();
    let heat = sol.heat(model);
    let h = comfort_constraints(heat, net);
    let (value, w) = ks_aggregate(&h, gamma);
    let mut j = QuantityOfInterest::zeros(value, model.n_y(), model.n_z(), model.layout().len());
    let off = net.n_nodes() + net.n_arcs();
    for (k, c) in net.consumers().iter().enumerate() {
        j.dj_dz[off + k] = (w[2 * k + 1] - w[2 * k]) / c.q_d;
    }
    j
}

/// Squared relative heat mismatch `Σ ((Q − Q_d)/Q_d)²`.
pub fn mismatch_qoi(model: &Model, sol: &StateSolution) -> QuantityOfInterest {
    let net = model.network();
    let heat = sol.heat(model);
    let mut j = QuantityOfInterest::zeros(0.0, model.n_y(), model.n_z(), model.layout().len());
    let off = net.n_nodes() + net.n_arcs();
    for (k, (q, c)) in heat.iter().zip(net.consumers()).enumerate() {
        let r = (q - c.q_d) / c.q_d;
        j.value += r * r;
        j.dj_dz[off + k] = 2.0 * r / c.q_d;
    }
    j
}

/// Projects the diameter entries of `phi`; returns the projected design and
/// the projection derivative per diameter.
pub fn project_design(
    phi: &DesignVector,
    cat: &PipeCatalog,
    chi: f64,
) -> Result<(DesignVector, Vec<f64>), DesignError> {
    let mut out = phi.clone();
    let mut factors = Vec::with_capacity(phi.d.len());
    for (k, &d) in phi.d.iter().enumerate() {
        let (db, f) = multi_project(d, cat, chi)?;
        out.d[k] = db;
        factors.push(f);
    }
    Ok((out, factors))
}

/// Multiplies the diameter entries of a gradient over `φ̄` by the projection
/// derivative; the remaining entries pass through.
pub fn chain_gradient(grad_bar: &[f64], layout: DesignLayout, factors: &[f64]) -> Vec<f64> {
    assert_eq!(factors.len(), layout.n_d);
    let mut g = grad_bar.to_vec();
    for (gi, f) in g.iter_mut().zip(factors) {
        *gi *= f;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn projection_endpoints_and_symmetry() {
        for &eta in &[0.0, 0.3, 0.5, 1.0] {
            for &chi in &[0.0, 1.0, 10.0, 100.0] {
                assert_relative_eq!(project(0.0, eta, chi), 0.0, epsilon = 1e-15);
                assert_relative_eq!(project(1.0, eta, chi), 1.0, epsilon = 1e-15);
            }
        }
        for &chi in &[0.0, 3.0, 100.0] {
            assert_relative_eq!(project(0.5, 0.5, chi), 0.5, epsilon = 1e-15);
        }
        assert!(project(0.4, 0.5, 100.0) < 1e-8);
        assert!(project(0.6, 0.5, 100.0) > 1.0 - 1e-8);
        assert_eq!(project(0.37, 0.5, 0.0), 0.37);
    }

    #[test]
    fn small_chi_approaches_identity() {
        let p = project(0.37, 0.5, 1e-6);
        assert_relative_eq!(p, 0.37, max_relative = 1e-9);
    }

    #[test]
    fn multi_projection_examples() {
        let cat = PipeCatalog::default();
        for &d in &cat.physical_diameters() {
            for &chi in &[0.0, 7.0, 100.0] {
                assert_relative_eq!(multi_project(d, &cat, chi).unwrap().0, d, max_relative = 1e-14);
            }
        }
        let (db, _) = multi_project(0.12, &cat, 100.0).unwrap();
        assert!((db - 0.1).abs() < 1e-6, "{db}");
        let (db, _) = multi_project(0.125, &cat, 100.0).unwrap();
        assert_relative_eq!(db, 0.125, max_relative = 1e-12);
        // oversize rounds down to the largest size
        let (db, _) = multi_project(0.45, &cat, 100.0).unwrap();
        assert!((db - 0.4).abs() < 1e-6, "{db}");
        assert!(multi_project(0.5, &cat, 10.0).is_err());
    }

    #[test]
    fn pipe_cost_limits() {
        let cat = PipeCatalog::default();
        let (c, dc) = pipe_cost(0.2, &cat, 0.0, 50.0);
        assert_relative_eq!(c, 2922.0 * (0.2 - 0.032) / (0.4 - 0.032), max_relative = 1e-12);
        assert_relative_eq!(dc, 2922.0 / 0.368, max_relative = 1e-12);
        let (c, _) = pipe_cost(0.15, &cat, 1.0, 100.0);
        assert_relative_eq!(c, 2448.0, max_relative = 1e-3);
        // just above a catalog size the staircase jumps toward the next cost
        let (c, _) = pipe_cost(0.15 + 0.002, &cat, 1.0, 100.0);
        assert!(c > 2460.0, "{c}");
    }

    #[test]
    fn ks_closed_forms() {
        let (v, w) = ks_aggregate(&[0.3], 1e4);
        assert_eq!(v, 0.3);
        assert_eq!(w, vec![1.0]);
        let (v, _) = ks_aggregate(&[-0.05; 10], 100.0);
        assert_relative_eq!(v, -0.05 + 10f64.ln() / 100.0, max_relative = 1e-12);
    }

    #[test]
    fn schedule_default_and_validation() {
        let s = ContinuationSchedule::default();
        assert_eq!(s.len(), 20);
        assert_relative_eq!(s.stages[0].gamma, 5e3);
        assert_relative_eq!(s.stages[19].gamma, 1e5, max_relative = 1e-12);
        assert_eq!(s.stages[19].chi, 100.0);
        s.validate().unwrap();
        let bad = r#"{"stages": [{"gamma": 1e4, "chi": 0, "upsilon": 0, "omega": 0},
                                 {"gamma": 5e3, "chi": 0, "upsilon": 0, "omega": 0}]}"#;
        assert!(matches!(ContinuationSchedule::from_json(bad), Err(DesignError::Schedule(_))));
        let ranges = r#"{"n_stages": 3, "gamma": [5e3, 1e5], "chi": [0, 100], "upsilon": [0, 1], "omega": [0, 100]}"#;
        assert_eq!(ContinuationSchedule::from_json(ranges).unwrap().len(), 3);
    }

    #[test]
    fn catalog_validation() {
        PipeCatalog::default().validate().unwrap();
        let mut c = PipeCatalog::default();
        c.costs.pop();
        assert!(c.validate().is_err());
        let mut c = PipeCatalog::default();
        c.diameters.swap(2, 3);
        assert!(c.validate().is_err());
    }
}
