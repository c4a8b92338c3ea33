//! Superstructure graph, incidence matrices and the network definition file.
//!
//! A network is one directed graph holding both the feed and the return
//! side. Internal arcs are pipes; consumer heating/bypass arcs lead from a
//! feed node to a return node; producer arcs lead from a return node back to
//! a feed node. Nodes and arcs are addressed by dense 0-based indices.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::physics::{FluidProperties, PipeProperties};
use crate::sparse::Triplets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArcId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Producer,
    Consumer,
    Internal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Internal,
    ConsumerHeating,
    ConsumerBypass,
    Producer,
}

impl ArcKind {
    pub fn is_consumer(self) -> bool {
        matches!(self, ArcKind::ConsumerHeating | ArcKind::ConsumerBypass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Plot position in meters. Not used by the physics.
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub id: ArcId,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: ArcKind,
    /// Pipe length in meters, internal arcs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Internal arcs sharing a street share one diameter design variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street: Option<usize>,
    /// Initial inner diameter in meters, internal arcs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumerSpec {
    pub heating_arc: ArcId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bypass_arc: Option<ArcId>,
    /// Desired heat load, W.
    #[serde(rename = "Q_d")]
    pub q_d: f64,
    /// Radiator coefficient, W/K^n.
    pub xi: f64,
    /// Radiator exponent.
    pub n: f64,
    /// Heating-arc valve constant, Pa·s²/m⁶.
    pub zeta: f64,
    /// Indoor minus ambient temperature, K.
    pub theta_house: f64,
    /// Maximal bypass flow, m³/s.
    pub q_max_b: f64,
    /// Bypass design pressure drop, Pa.
    pub dp_des_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducerSpec {
    pub arc: ArcId,
    /// Supply temperature over ambient, K.
    pub theta_b: f64,
    /// Maximal volumetric inflow, m³/s.
    pub q_b_max: f64,
}

fn default_t_out_design() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Ambient temperature, °C.
    #[serde(rename = "T_inf")]
    pub t_inf: f64,
    /// Design return temperature of the network, °C.
    #[serde(rename = "T_out_d", default = "default_t_out_design")]
    pub t_out_design: f64,
    #[serde(default)]
    pub fluid: FluidProperties,
    #[serde(default)]
    pub pipe: PipeProperties,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            t_inf: -8.0,
            t_out_design: default_t_out_design(),
            fluid: FluidProperties::default(),
            pipe: PipeProperties::default(),
        }
    }
}

/// Accepts either one node id or a list, so that several reference nodes in
/// a file are reported instead of failing as a type error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceField {
    One(NodeId),
    Many(Vec<NodeId>),
}

/// On-disk layout of a network definition file (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    pub consumers: Vec<ConsumerSpec>,
    pub producers: Vec<ProducerSpec>,
    #[serde(default)]
    pub scenario: Scenario,
    pub reference_pressure_node: ReferenceField,
}

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("i/o error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: usize },
    #[error("{what} ids must be contiguous from 0, missing {id}")]
    NonContiguousId { what: &'static str, id: usize },
    #[error("dangling arc {arc}: references unknown node {node}")]
    DanglingArc { arc: usize, node: usize },
    #[error("multiple reference pressure nodes ({0})")]
    MultipleReferenceNodes(usize),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// The role of an arc within its partition, with the index into the
/// corresponding spec/design list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcRole {
    Pipe { street: usize },
    Heating { consumer: usize },
    Bypass { consumer: usize, slot: usize },
    Producer { producer: usize },
}

/// Which half of the superstructure a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Feed,
    Return,
}

/// Validated superstructure with derived index maps. Immutable after load.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    consumers: Vec<ConsumerSpec>,
    producers: Vec<ProducerSpec>,
    scenario: Scenario,
    reference: NodeId,
    roles: Vec<ArcRole>,
    sides: Vec<Side>,
    streets: Vec<Vec<ArcId>>,
    street_keys: Vec<Option<usize>>,
    bypass_consumers: Vec<usize>,
}

/// Arc subsets for [`Network::incidence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcFilter {
    All,
    Kind(ArcKind),
    Consumer,
}

impl ArcFilter {
    fn accepts(self, kind: ArcKind) -> bool {
        match self {
            ArcFilter::All => true,
            ArcFilter::Kind(k) => k == kind,
            ArcFilter::Consumer => kind.is_consumer(),
        }
    }
}

/// Node-arc incidence matrix restricted to a subset of arc columns.
///
/// Column `j` corresponds to arc `arcs[j]` and holds +1 at its start node and
/// -1 at its end node.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n_nodes: usize,
    arcs: Vec<ArcId>,
    ends: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    pub fn nrows(&self) -> usize {
        self.n_nodes
    }

    pub fn ncols(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[ArcId] {
        &self.arcs
    }

    /// (start row, end row) of column `j`.
    pub fn column(&self, j: usize) -> (usize, usize) {
        self.ends[j]
    }

    pub fn to_triplets(&self) -> Triplets {
        let mut t = Triplets::with_capacity(self.n_nodes, self.ends.len(), 2 * self.ends.len());
        for (j, &(s, e)) in self.ends.iter().enumerate() {
            t.push(s, j, 1.0);
            t.push(e, j, -1.0);
        }
        t
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.to_triplets().to_dense()
    }

    /// `A q`: net outflow per node.
    pub fn mul(&self, q: &[f64]) -> Vec<f64> {
        assert_eq!(q.len(), self.ends.len());
        let mut out = vec![0.0; self.n_nodes];
        for (&(s, e), &qa) in self.ends.iter().zip(q) {
            out[s] += qa;
            out[e] -= qa;
        }
        out
    }

    /// `Aᵀ p`: pressure difference start minus end per arc.
    pub fn tr_mul(&self, p: &[f64]) -> Vec<f64> {
        self.ends.iter().map(|&(s, e)| p[s] - p[e]).collect()
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Arc inflow and outflow matrices `max(A diag(sgn q), 0)` and
/// `min(A diag(sgn q), 0)`, with `sgn 0 = 0`.
pub fn inflow_outflow_matrices(a: &IncidenceMatrix, q: &[f64]) -> (Triplets, Triplets) {
    assert_eq!(q.len(), a.ncols(), "one flow per arc column");
    let mut a_in = Triplets::new(a.nrows(), a.ncols());
    let mut a_out = Triplets::new(a.nrows(), a.ncols());
    for (j, (&(s, e), &qa)) in a.ends.iter().zip(q).enumerate() {
        let sg = sgn(qa);
        for (row, val) in [(s, sg), (e, -sg)] {
            if val > 0.0 {
                a_in.push(row, j, val);
            } else if val < 0.0 {
                a_out.push(row, j, val);
            }
        }
    }
    (a_in, a_out)
}

fn check_ids<I: Iterator<Item = usize>>(what: &'static str, ids: I, n: usize) -> Result<(), NetworkError> {
    let mut seen = vec![false; n];
    for id in ids {
        if id >= n {
            return Err(NetworkError::NonContiguousId { what, id: seen.iter().position(|s| !s).unwrap_or(n) });
        }
        if seen[id] {
            return Err(NetworkError::DuplicateId { what, id });
        }
        seen[id] = true;
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), NetworkError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(NetworkError::Parameter(format!("{name} must be > 0, got {v}")))
    }
}

impl Network {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| NetworkError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(mut file: NetworkFile) -> Result<Self, NetworkError> {
        let n = file.nodes.len();
        let m = file.arcs.len();
        check_ids("node", file.nodes.iter().map(|x| x.id.0), n)?;
        check_ids("arc", file.arcs.iter().map(|x| x.id.0), m)?;
        file.nodes.sort_by_key(|x| x.id);
        file.arcs.sort_by_key(|x| x.id);

        for a in &file.arcs {
            for node in [a.from, a.to] {
                if node.0 >= n {
                    return Err(NetworkError::DanglingArc { arc: a.id.0, node: node.0 });
                }
            }
            if a.from == a.to {
                return Err(NetworkError::Invalid(format!("arc {} is a self-loop", a.id.0)));
            }
            match (a.kind, a.length) {
                (ArcKind::Internal, Some(l)) => positive(&format!("length of arc {}", a.id.0), l)?,
                (ArcKind::Internal, None) => {
                    return Err(NetworkError::Schema(format!("internal arc {} has no length", a.id.0)))
                }
                (_, Some(_)) => {
                    return Err(NetworkError::Schema(format!("non-pipe arc {} must not carry a length", a.id.0)))
                }
                (_, None) => {}
            }
            if a.kind != ArcKind::Internal && (a.street.is_some() || a.diameter.is_some()) {
                return Err(NetworkError::Schema(format!("non-pipe arc {} must not carry street/diameter", a.id.0)));
            }
            if let Some(d) = a.diameter {
                positive(&format!("diameter of arc {}", a.id.0), d)?;
            }
        }

        let reference = match &file.reference_pressure_node {
            ReferenceField::One(r) => *r,
            ReferenceField::Many(v) if v.len() == 1 => v[0],
            ReferenceField::Many(v) => return Err(NetworkError::MultipleReferenceNodes(v.len())),
        };
        if reference.0 >= n {
            return Err(NetworkError::Invalid(format!("reference pressure node {} does not exist", reference.0)));
        }

        // roles
        let mut roles: Vec<Option<ArcRole>> = vec![None; m];
        for (k, c) in file.consumers.iter().enumerate() {
            let h = c.heating_arc.0;
            if h >= m || file.arcs[h].kind != ArcKind::ConsumerHeating {
                return Err(NetworkError::Invalid(format!(
                    "consumer {k}: heating arc {h} is not a consumer_heating arc"
                )));
            }
            if roles[h].is_some() {
                return Err(NetworkError::Invalid(format!("heating arc {h} assigned twice")));
            }
            roles[h] = Some(ArcRole::Heating { consumer: k });
            positive("Q_d", c.q_d)?;
            positive("xi", c.xi)?;
            if !(c.n >= 1.0) {
                return Err(NetworkError::Parameter(format!("radiator exponent n must be >= 1, got {}", c.n)));
            }
            positive("zeta", c.zeta)?;
            positive("q_max_b", c.q_max_b)?;
            positive("dp_des_b", c.dp_des_b)?;
            if !c.theta_house.is_finite() {
                return Err(NetworkError::Parameter("theta_house must be finite".into()));
            }
        }
        let mut bypass_consumers = Vec::new();
        for (k, c) in file.consumers.iter().enumerate() {
            if let Some(b) = c.bypass_arc {
                let b = b.0;
                if b >= m || file.arcs[b].kind != ArcKind::ConsumerBypass {
                    return Err(NetworkError::Invalid(format!(
                        "consumer {k}: bypass arc {b} is not a consumer_bypass arc"
                    )));
                }
                let h = &file.arcs[c.heating_arc.0];
                if file.arcs[b].from != h.from || file.arcs[b].to != h.to {
                    return Err(NetworkError::Invalid(format!(
                        "consumer {k}: bypass arc {b} does not connect the heating arc's nodes"
                    )));
                }
                if roles[b].is_some() {
                    return Err(NetworkError::Invalid(format!("bypass arc {b} assigned twice")));
                }
                roles[b] = Some(ArcRole::Bypass { consumer: k, slot: bypass_consumers.len() });
                bypass_consumers.push(k);
            }
        }
        for (k, p) in file.producers.iter().enumerate() {
            let a = p.arc.0;
            if a >= m || file.arcs[a].kind != ArcKind::Producer {
                return Err(NetworkError::Invalid(format!("producer {k}: arc {a} is not a producer arc")));
            }
            if roles[a].is_some() {
                return Err(NetworkError::Invalid(format!("producer arc {a} assigned twice")));
            }
            roles[a] = Some(ArcRole::Producer { producer: k });
            positive("theta_b", p.theta_b)?;
            positive("q_b_max", p.q_b_max)?;
        }
        if file.producers.is_empty() {
            return Err(NetworkError::Invalid("network has no producer".into()));
        }

        // streets: keyed groups first (ascending key), then ungrouped pipes in arc order
        let mut keyed: BTreeMap<usize, Vec<ArcId>> = BTreeMap::new();
        let mut loose = Vec::new();
        for a in &file.arcs {
            if a.kind == ArcKind::Internal {
                match a.street {
                    Some(s) => keyed.entry(s).or_default().push(a.id),
                    None => loose.push(a.id),
                }
            }
        }
        let mut streets = Vec::new();
        let mut street_keys = Vec::new();
        for (key, arcs) in keyed {
            streets.push(arcs);
            street_keys.push(Some(key));
        }
        for a in loose {
            streets.push(vec![a]);
            street_keys.push(None);
        }
        for (s, arcs) in streets.iter().enumerate() {
            for a in arcs {
                roles[a.0] = Some(ArcRole::Pipe { street: s });
            }
        }
        let roles: Vec<ArcRole> = roles
            .into_iter()
            .enumerate()
            .map(|(a, r)| {
                r.ok_or_else(|| {
                    NetworkError::Invalid(format!("arc {a} ({:?}) has no consumer/producer spec", file.arcs[a].kind))
                })
            })
            .collect::<Result<_, _>>()?;

        // node kind partition
        let mut derived = vec![NodeKind::Internal; n];
        for a in &file.arcs {
            if a.kind.is_consumer() {
                for v in [a.from, a.to] {
                    if derived[v.0] == NodeKind::Internal {
                        derived[v.0] = NodeKind::Consumer;
                    }
                }
            }
        }
        for a in &file.arcs {
            if a.kind == ArcKind::Producer {
                derived[a.from.0] = NodeKind::Producer;
                derived[a.to.0] = NodeKind::Producer;
            }
        }
        for node in &file.nodes {
            if node.kind != derived[node.id.0] {
                return Err(NetworkError::Invalid(format!(
                    "node {} declared {:?} but its arcs make it {:?}",
                    node.id.0, node.kind, derived[node.id.0]
                )));
            }
        }

        // feed/return sides via internal-arc connectivity
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for a in &file.arcs {
            if a.kind == ArcKind::Internal {
                adj[a.from.0].push(a.to.0);
                adj[a.to.0].push(a.from.0);
            }
        }
        let mut side: Vec<Option<Side>> = vec![None; n];
        let mut queue = VecDeque::new();
        for p in &file.producers {
            let arc = &file.arcs[p.arc.0];
            for (v, s) in [(arc.to.0, Side::Feed), (arc.from.0, Side::Return)] {
                match side[v] {
                    None => {
                        side[v] = Some(s);
                        queue.push_back(v);
                    }
                    Some(prev) if prev != s => {
                        return Err(NetworkError::Invalid(format!("node {v} is on both the feed and return side")))
                    }
                    _ => {}
                }
            }
        }
        while let Some(v) = queue.pop_front() {
            let s = side[v].expect("visited");
            for &w in &adj[v] {
                match side[w] {
                    None => {
                        side[w] = Some(s);
                        queue.push_back(w);
                    }
                    Some(other) if other != s => {
                        return Err(NetworkError::Invalid(format!(
                            "feed and return networks are joined by an internal arc at node {w}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        let sides: Vec<Side> = side
            .into_iter()
            .enumerate()
            .map(|(v, s)| s.ok_or_else(|| NetworkError::Invalid(format!("node {v} is not connected to any producer"))))
            .collect::<Result<_, _>>()?;
        for a in &file.arcs {
            let (sf, st) = (sides[a.from.0], sides[a.to.0]);
            let ok = match a.kind {
                ArcKind::Internal => true,
                ArcKind::ConsumerHeating | ArcKind::ConsumerBypass => sf == Side::Feed && st == Side::Return,
                ArcKind::Producer => sf == Side::Return && st == Side::Feed,
            };
            if !ok {
                return Err(NetworkError::Invalid(format!("arc {} ({:?}) runs {:?} -> {:?}", a.id.0, a.kind, sf, st)));
            }
        }

        let is_producer_return = file.producers.iter().any(|p| file.arcs[p.arc.0].from == reference);
        if !is_producer_return {
            return Err(NetworkError::Invalid(format!(
                "reference pressure node {} is not a producer return node",
                reference.0
            )));
        }

        let sc = &file.scenario;
        positive("fluid density", sc.fluid.rho)?;
        positive("fluid viscosity", sc.fluid.mu)?;
        positive("fluid specific heat", sc.fluid.cp)?;
        sc.pipe.validate().map_err(NetworkError::Parameter)?;
        if !sc.t_inf.is_finite() || !(-60.0..=60.0).contains(&sc.t_inf) {
            return Err(NetworkError::Parameter(format!("T_inf = {} out of range", sc.t_inf)));
        }

        Ok(Self {
            nodes: file.nodes,
            arcs: file.arcs,
            consumers: file.consumers,
            producers: file.producers,
            scenario: file.scenario,
            reference,
            roles,
            sides,
            streets,
            street_keys,
            bypass_consumers,
        })
    }

    /// The file representation, suitable for serialization.
    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            nodes: self.nodes.clone(),
            arcs: self.arcs.clone(),
            consumers: self.consumers.clone(),
            producers: self.producers.clone(),
            scenario: self.scenario.clone(),
            reference_pressure_node: ReferenceField::One(self.reference),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network file serializes")
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, a: usize) -> &Arc {
        &self.arcs[a]
    }

    pub fn role(&self, a: usize) -> ArcRole {
        self.roles[a]
    }

    pub fn side(&self, v: usize) -> Side {
        self.sides[v]
    }

    pub fn consumers(&self) -> &[ConsumerSpec] {
        &self.consumers
    }

    pub fn producers(&self) -> &[ProducerSpec] {
        &self.producers
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn reference_node(&self) -> NodeId {
        self.reference
    }

    /// Internal arcs grouped by shared diameter variable.
    pub fn streets(&self) -> &[Vec<ArcId>] {
        &self.streets
    }

    pub fn street_key(&self, s: usize) -> Option<usize> {
        self.street_keys[s]
    }

    /// Consumer index for each bypass slot.
    pub fn bypass_consumers(&self) -> &[usize] {
        &self.bypass_consumers
    }

    pub fn n_streets(&self) -> usize {
        self.streets.len()
    }

    pub fn arcs_of_kind(&self, kind: ArcKind) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().filter(move |a| a.kind == kind)
    }

    /// Total length of all internal arcs, m.
    pub fn total_pipe_length(&self) -> f64 {
        self.arcs_of_kind(ArcKind::Internal).map(|a| a.length.unwrap_or(0.0)).sum()
    }

    pub fn incidence(&self, filter: ArcFilter) -> IncidenceMatrix {
        let mut arcs = Vec::new();
        let mut ends = Vec::new();
        for a in &self.arcs {
            if filter.accepts(a.kind) {
                arcs.push(a.id);
                ends.push((a.from.0, a.to.0));
            }
        }
        IncidenceMatrix { n_nodes: self.nodes.len(), arcs, ends }
    }

    /// A spanning forest of the internal-arc subgraph: `(parent arc, parent
    /// node)` per node in BFS order from each producer node. Roots have none.
    pub(crate) fn pipe_spanning_forest(&self) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for a in self.arcs_of_kind(ArcKind::Internal) {
            adj[a.from.0].push((a.to.0, a.id.0));
            adj[a.to.0].push((a.from.0, a.id.0));
        }
        let mut parent = vec![None; n];
        let mut seen = HashSet::new();
        let mut order = Vec::with_capacity(n);
        let mut roots: Vec<usize> = Vec::new();
        for p in &self.producers {
            let arc = &self.arcs[p.arc.0];
            roots.push(arc.to.0);
            roots.push(arc.from.0);
        }
        roots.extend(0..n);
        for r in roots {
            if !seen.insert(r) {
                continue;
            }
            let mut queue = VecDeque::from([r]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for &(w, a) in &adj[v] {
                    if seen.insert(w) {
                        parent[w] = Some((a, v));
                        queue.push_back(w);
                    }
                }
            }
        }
        (order, parent)
    }
}
