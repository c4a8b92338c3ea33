//! Browser bindings for the demo page in `www/`: the catalog projection and
//! cost curves, the friction factor over the Reynolds range, and a small
//! grid simulation.
//!
//! Curves come back as flat `[x0, y0, x1, y1, ...]` arrays, the simulation
//! as a JSON string.

use heatnet::design::{multi_project, pipe_cost, PipeCatalog, D_MIN};
use heatnet::grid::GridSpec;
use heatnet::network::ArcRole;
use heatnet::optimizer::{warm_start, OptimizerOptions};
use heatnet::physics::{conductance, reynolds};
use heatnet::solver::StateSolver;
use heatnet::{ArcKind, DesignVector, FluidProperties, Model, PipeProperties, RadiatorModel, SolverOptions};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

/// Physical catalog diameters, the no-pipe entry at its minimal size.
#[wasm_bindgen]
pub fn catalog_diameters() -> Vec<f64> {
    PipeCatalog::default().physical_diameters()
}

/// Upper end of the diameter domain, m.
#[wasm_bindgen]
pub fn diameter_upper_bound() -> f64 {
    PipeCatalog::default().upper_bound()
}

/// `(d, d̄)` pairs of the extended projection at steepness `chi`.
#[wasm_bindgen]
pub fn projection_curve(chi: f64, samples: usize) -> Vec<f64> {
    let cat = PipeCatalog::default();
    let hi = cat.upper_bound() * (1.0 - 1e-9);
    linspace(D_MIN, hi, samples)
        .flat_map(|d| [d, multi_project(d, &cat, chi.max(0.0)).map_or(f64::NAN, |p| p.0)])
        .collect()
}

/// `(d, C)` pairs of the penalized pipe cost in €/m.
#[wasm_bindgen]
pub fn cost_curve(upsilon: f64, omega: f64, samples: usize) -> Vec<f64> {
    let cat = PipeCatalog::default();
    let hi = cat.upper_bound() * (1.0 - 1e-9);
    linspace(D_MIN, hi, samples)
        .flat_map(|d| [d, pipe_cost(d, &cat, upsilon.clamp(0.0, 1.0), omega.max(0.0)).0])
        .collect()
}

/// `(Re, f)` pairs of the Darcy friction factor implied by the pipe
/// conductance, Re log-spaced over `[10^lo, 10^hi]`.
#[wasm_bindgen]
pub fn friction_curve(d: f64, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let fluid = FluidProperties::default();
    let pipe = PipeProperties::default();
    let l = 100.0;
    let area = std::f64::consts::PI * d * d / 4.0;
    linspace(lo, hi, samples)
        .flat_map(|e| {
            let re = 10f64.powf(e);
            // flow at this Reynolds number
            let q = re * std::f64::consts::PI * fluid.mu * d / (4.0 * fluid.rho);
            let g = conductance(q, d, l, &fluid, &pipe).g;
            let v = q / area;
            let f = (q / g) * d / (l * 0.5 * fluid.rho * v * v);
            [reynolds(q, d, &fluid), f]
        })
        .collect()
}

/// Grid simulation parameters from the page.
#[derive(Debug, Clone, Copy)]
pub struct GridRequest {
    pub rows: usize,
    pub cols: usize,
    pub consumers: usize,
    pub seed: u64,
    /// Diameter on every street, m.
    pub diameter: f64,
    /// Producer inflow as a fraction of its maximum.
    pub inflow: f64,
    /// Tune valves and inflows to the demand before reporting.
    pub balance: bool,
}

/// Builds and solves the grid; errors come back as `{"error": ...}`.
pub fn simulate(req: GridRequest) -> serde_json::Value {
    match try_simulate(req) {
        Ok(v) => v,
        Err(e) => json!({ "error": e }),
    }
}

fn try_simulate(req: GridRequest) -> Result<serde_json::Value, String> {
    let cat = PipeCatalog::default();
    if !(req.diameter > D_MIN && req.diameter < cat.upper_bound()) {
        return Err(format!("diameter must lie in ({D_MIN}, {})", cat.upper_bound()));
    }
    let mut spec = GridSpec::new(req.rows, req.cols, req.consumers, [1.0, 1.0, 0.2], req.seed);
    spec.d_init = req.diameter;
    let net = spec.generate().map_err(|e| e.to_string())?;
    let model = Model::new(net, RadiatorModel::Lmtd);
    let net = model.network();
    let mut phi = DesignVector::initial(net);
    for (q, p) in phi.q_b.iter_mut().zip(net.producers()) {
        *q = p.q_b_max * req.inflow.clamp(0.0, 1.0);
    }
    let sol = if req.balance {
        let ws = warm_start(&model, &phi, &OptimizerOptions::default()).map_err(|e| e.to_string())?;
        phi = ws.design;
        ws.state
    } else {
        StateSolver::new(SolverOptions::default()).solve_state(&model, &phi, None).map_err(|e| e.to_string())?
    };

    let n = net.n_nodes();
    let t_inf = net.scenario().t_inf;
    let theta = sol.node_temperatures(&model);
    let flows = sol.flows(&model);
    let arc_t = sol.arc_temperatures(&model);
    let nodes: Vec<_> = net
        .nodes()
        .iter()
        .map(|v| json!({ "x": v.position[0], "y": v.position[1], "t": theta[v.id.0] + t_inf, "p": sol.y[v.id.0] }))
        .collect();
    let arcs: Vec<_> = net
        .arcs()
        .iter()
        .map(|a| {
            let kind = match a.kind {
                ArcKind::Internal => "pipe",
                ArcKind::ConsumerHeating => "heating",
                ArcKind::ConsumerBypass => "bypass",
                ArcKind::Producer => "producer",
            };
            let feed = matches!(net.role(a.id.0), ArcRole::Pipe { .. }) && a.from.0 < n / 2 && a.to.0 < n / 2;
            json!({
                "from": a.from.0,
                "to": a.to.0,
                "kind": kind,
                "feed": feed,
                "q": flows[a.id.0],
                "t": arc_t[a.id.0] + t_inf,
            })
        })
        .collect();
    let heat = sol.heat(&model);
    let consumers: Vec<_> = net
        .consumers()
        .iter()
        .zip(heat)
        .map(|(c, q)| {
            let node = net.arc(c.heating_arc.0).from.0;
            json!({ "node": node, "demand": c.q_d, "heat": q })
        })
        .collect();
    let demand: f64 = net.consumers().iter().map(|c| c.q_d).sum();
    let delivered: f64 = heat.iter().sum();
    let pump = heatnet::design::pump_power(&model, &sol.y);
    Ok(json!({
        "nodes": nodes,
        "arcs": arcs,
        "consumers": consumers,
        "demand": demand,
        "delivered": delivered,
        "pump_power": pump,
        "inflow": phi.q_b,
        "newton_iterations": sol.report.hydraulic.iterations + sol.report.thermal.iterations,
    }))
}

#[wasm_bindgen]
pub fn simulate_grid(
    rows: usize,
    cols: usize,
    consumers: usize,
    seed: u64,
    diameter: f64,
    inflow: f64,
    balance: bool,
) -> String {
    simulate(GridRequest { rows, cols, consumers, seed, diameter, inflow, balance }).to_string()
}
