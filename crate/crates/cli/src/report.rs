use heatnet::design::{pump_power, PipeCatalog, D_MIN};
use heatnet::network::ArcRole;
use heatnet::{ArcKind, DesignVector, Model, NodeKind};
use serde::Serialize;
use serde_json::{json, Value};

/// Distance from `D_MIN` under which a street counts as removed, m.
pub const REMOVED_TOL: f64 = 1e-4;

#[derive(Serialize)]
struct NodeRow {
    id: usize,
    kind: &'static str,
    x: f64,
    y: f64,
    p: f64,
    theta: f64,
    temperature: f64,
}

#[derive(Serialize)]
struct ArcRow {
    id: usize,
    from: usize,
    to: usize,
    kind: &'static str,
    street: Option<usize>,
    length: Option<f64>,
    diameter: Option<f64>,
    opening: Option<f64>,
    q: f64,
    theta: f64,
    temperature: f64,
    heat: Option<f64>,
}

fn node_kind(k: NodeKind) -> &'static str {
    match k {
        NodeKind::Producer => "producer",
        NodeKind::Consumer => "consumer",
        NodeKind::Internal => "internal",
    }
}

fn arc_kind(k: ArcKind) -> &'static str {
    match k {
        ArcKind::Internal => "internal",
        ArcKind::ConsumerHeating => "consumer_heating",
        ArcKind::ConsumerBypass => "consumer_bypass",
        ArcKind::Producer => "producer",
    }
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Design value that governs arc `a`: diameter, valve opening or inflow.
fn arc_setting(model: &Model, phi: &DesignVector, a: usize) -> (Option<f64>, Option<f64>) {
    match model.network().role(a) {
        ArcRole::Pipe { street } => (Some(phi.d[street]), None),
        ArcRole::Heating { consumer } => (None, Some(phi.alpha[consumer])),
        ArcRole::Bypass { slot, .. } => (None, Some(phi.beta[slot])),
        ArcRole::Producer { .. } => (None, None),
    }
}

/// Node and arc state tables. `z` is `None` when the thermal stage was
/// skipped; temperatures and heat are then written as 0.
pub fn state_csv(model: &Model, phi: &DesignVector, y: &[f64], z: Option<&[f64]>) -> (String, String) {
    let net = model.network();
    let n = net.n_nodes();
    let m = net.n_arcs();
    let t_inf = net.scenario().t_inf;
    let theta = |i: usize| z.map_or(0.0, |z| z[i]);
    let temp = |i: usize| z.map_or(0.0, |z| z[i] + t_inf);
    let heat_of: Vec<Option<usize>> = (0..m)
        .map(|a| match net.role(a) {
            ArcRole::Heating { consumer } => Some(consumer),
            _ => None,
        })
        .collect();
    let nodes = net.nodes().iter().map(|v| NodeRow {
        id: v.id.0,
        kind: node_kind(v.kind),
        x: v.position[0],
        y: v.position[1],
        p: y[v.id.0],
        theta: theta(v.id.0),
        temperature: temp(v.id.0),
    });
    let arcs = net.arcs().iter().map(|arc| {
        let a = arc.id.0;
        let (diameter, opening) = arc_setting(model, phi, a);
        ArcRow {
            id: a,
            from: arc.from.0,
            to: arc.to.0,
            kind: arc_kind(arc.kind),
            street: arc.street,
            length: arc.length,
            diameter,
            opening,
            q: y[n + a],
            theta: theta(n + a),
            temperature: temp(n + a),
            heat: heat_of[a].map(|c| z.map_or(0.0, |z| z[n + m + c])),
        }
    });
    (to_csv(nodes), to_csv(arcs))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBalance {
    /// Heat added by the producers over their inlet temperature, W.
    pub supplied: f64,
    /// Heat emitted by the consumers, W.
    pub consumed: f64,
    /// Heat lost through pipe walls, W.
    pub losses: f64,
    pub demand: f64,
    pub pump_power: f64,
    /// Largest `|Q / Q_d − 1|`.
    pub max_deviation: f64,
}

pub fn energy_balance(model: &Model, y: &[f64], z: Option<&[f64]>) -> EnergyBalance {
    let net = model.network();
    let n = net.n_nodes();
    let m = net.n_arcs();
    let rcp = model.fluid().rho_cp();
    let demand: f64 = net.consumers().iter().map(|c| c.q_d).sum();
    let (supplied, consumed, max_deviation) = match z {
        Some(z) => {
            let supplied = net
                .producers()
                .iter()
                .map(|p| {
                    let arc = net.arc(p.arc.0);
                    rcp * y[n + p.arc.0] * (p.theta_b - z[arc.from.0])
                })
                .sum();
            let heat = &z[n + m..];
            let dev = heat.iter().zip(net.consumers()).map(|(q, c)| (q / c.q_d - 1.0).abs()).fold(0.0, f64::max);
            (supplied, heat.iter().sum(), dev)
        }
        None => (0.0, 0.0, if demand > 0.0 { 1.0 } else { 0.0 }),
    };
    EnergyBalance {
        supplied,
        consumed,
        losses: supplied - consumed,
        demand,
        pump_power: pump_power(model, y),
        max_deviation,
    }
}

/// Planar meters to degrees around `origin = [lon, lat]`, equirectangular.
fn to_lon_lat(p: [f64; 2], origin: [f64; 2]) -> [f64; 2] {
    const M_PER_DEG: f64 = 111_320.0;
    let lat = origin[1] + p[1] / M_PER_DEG;
    let lon = origin[0] + p[0] / (M_PER_DEG * origin[1].to_radians().cos());
    [lon, lat]
}

/// One LineString feature per arc. Streets at `D_MIN` are `removed` and
/// drawn grey, installed ones `placed` in red; service arcs are black.
pub fn geojson(model: &Model, projected: &DesignVector, flows: &[f64], cat: &PipeCatalog, origin: [f64; 2]) -> String {
    let net = model.network();
    let features: Vec<Value> = net
        .arcs()
        .iter()
        .map(|arc| {
            let a = arc.id.0;
            let from = to_lon_lat(net.nodes()[arc.from.0].position, origin);
            let to = to_lon_lat(net.nodes()[arc.to.0].position, origin);
            let mut props = json!({
                "id": a,
                "kind": arc_kind(arc.kind),
                "from": arc.from.0,
                "to": arc.to.0,
                "q": flows[a],
            });
            let (status, stroke, width) = match net.role(a) {
                ArcRole::Pipe { street } => {
                    let d = projected.d[street];
                    let idx = cat.nearest(d).0;
                    props["street"] = json!(street);
                    props["length"] = json!(arc.length);
                    props["diameter"] = json!(d);
                    props["catalog_diameter"] = json!(cat.diameters[idx]);
                    if (d - D_MIN).abs() <= REMOVED_TOL {
                        ("removed", "#999999", 1.0)
                    } else {
                        ("placed", "#d62728", 1.0 + 20.0 * d)
                    }
                }
                ArcRole::Heating { consumer } => {
                    props["consumer"] = json!(consumer);
                    ("service", "#000000", 1.0)
                }
                ArcRole::Bypass { consumer, .. } => {
                    props["consumer"] = json!(consumer);
                    ("service", "#000000", 1.0)
                }
                ArcRole::Producer { producer } => {
                    props["producer"] = json!(producer);
                    ("service", "#000000", 2.0)
                }
            };
            props["status"] = json!(status);
            props["stroke"] = json!(stroke);
            props["stroke-width"] = json!(width);
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [from, to]},
                "properties": props,
            })
        })
        .collect();
    let fc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_string_pretty(&fc).expect("geojson serializes") + "\n"
}

#[derive(Serialize)]
struct HistogramRow {
    diameter: f64,
    streets: usize,
    /// Street length; both pipes of a street count once.
    street_length: f64,
    /// Feed plus return pipe length.
    pipe_length: f64,
}

/// Installed length per catalog diameter; the 0 row collects removed streets.
pub fn diameter_histogram(model: &Model, projected: &DesignVector, cat: &PipeCatalog) -> String {
    let net = model.network();
    let k = cat.diameters.len();
    let mut streets = vec![0usize; k];
    let mut street_len = vec![0.0; k];
    let mut pipe_len = vec![0.0; k];
    for (s, arcs) in net.streets().iter().enumerate() {
        let idx = cat.nearest(projected.d[s]).0;
        let lengths: Vec<f64> = arcs.iter().map(|a| net.arc(a.0).length.unwrap_or(0.0)).collect();
        streets[idx] += 1;
        street_len[idx] += lengths.iter().cloned().fold(0.0, f64::max);
        pipe_len[idx] += lengths.iter().sum::<f64>();
    }
    to_csv((0..k).map(|i| HistogramRow {
        diameter: cat.diameters[i],
        streets: streets[i],
        street_length: street_len[i],
        pipe_length: pipe_len[i],
    }))
}

/// Number of streets whose projected diameter sits at `D_MIN`.
pub fn removed_streets(projected: &DesignVector) -> usize {
    projected.d.iter().filter(|d| (**d - D_MIN).abs() <= REMOVED_TOL).count()
}
