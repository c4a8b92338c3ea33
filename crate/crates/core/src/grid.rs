//! Synthetic street-grid superstructures.
//!
//! Junction `(i, j)` of an `rows × cols` grid has feed node `i·cols + j` and
//! return node `rows·cols + i·cols + j`. Every street carries a feed pipe
//! toward the higher node id and a return pipe in the opposite direction,
//! both sharing one diameter variable. Two producers sit at opposite edges.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{
    Arc, ArcId, ArcKind, ConsumerSpec, Network, NetworkError, NetworkFile, Node, NodeId, NodeKind, ProducerSpec,
    ReferenceField, Scenario,
};
use crate::physics::design_characteristics;

/// One consumer archetype at design conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsumerType {
    pub name: &'static str,
    /// Design heat load, W.
    pub q_d: f64,
    /// Radiator exponent.
    pub n: f64,
}

/// Renovated dwelling, dwelling and commercial demand, in mix order.
pub const CONSUMER_TYPES: [ConsumerType; 3] = [
    ConsumerType { name: "renovated", q_d: 5e3, n: 1.42 },
    ConsumerType { name: "dwelling", q_d: 15e3, n: 1.2 },
    ConsumerType { name: "commercial", q_d: 50e3, n: 1.2 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub n_consumers: usize,
    /// Relative weights of the consumer types in [`CONSUMER_TYPES`] order.
    pub mix: [f64; 3],
    pub seed: u64,
    /// Nominal street length, m.
    pub spacing: f64,
    /// Relative spread of street lengths around `spacing`.
    pub length_jitter: f64,
    pub bypass: bool,
    /// Ambient temperature, °C.
    pub t_inf: f64,
    /// Supply temperatures of the two producers, °C.
    pub t_supply: [f64; 2],
    /// Maximal heat input per producer, W.
    pub q_in_max: f64,
    /// Initial diameter on every street, m.
    pub d_init: f64,
    /// Heating system design inlet temperature, °C.
    pub t_in_design: f64,
    /// Heating system design temperature drop, K.
    pub dt_design: f64,
    /// Heating system design pressure drop, Pa.
    pub dp_design: f64,
    /// Room temperature at design conditions, °C.
    pub t_room: f64,
    /// Bypass design flow as a fraction of the heating design flow.
    pub bypass_fraction: f64,
    /// Bypass design pressure drop, Pa.
    pub dp_bypass: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            n_consumers: 16,
            mix: [0.0, 1.0, 0.0],
            seed: 1,
            spacing: 100.0,
            length_jitter: 0.1,
            bypass: true,
            t_inf: -8.0,
            t_supply: [65.0, 70.0],
            q_in_max: 2e6,
            d_init: 0.15,
            t_in_design: 55.0,
            dt_design: 20.0,
            dp_design: 5e4,
            t_room: 20.0,
            bypass_fraction: 0.1,
            dp_bypass: 5e4,
        }
    }
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, n_consumers: usize, mix: [f64; 3], seed: u64) -> Self {
        Self { rows, cols, n_consumers, mix, seed, ..Self::default() }
    }

    /// 10 × 16 grid with 160 consumers and a 1.77 MW total demand.
    pub fn district_160() -> Self {
        Self::new(10, 16, 160, [98.0, 52.0, 10.0], 7)
    }

    pub fn n_junctions(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_streets(&self) -> usize {
        self.rows * (self.cols - 1) + (self.rows - 1) * self.cols
    }

    /// Consumer counts per type by the largest-remainder method.
    pub fn type_counts(&self) -> [usize; 3] {
        let total: f64 = self.mix.iter().sum();
        let n = self.n_consumers;
        if n == 0 || total <= 0.0 {
            return [0; 3];
        }
        let quotas: Vec<f64> = self.mix.iter().map(|w| w / total * n as f64).collect();
        let mut counts = [0usize; 3];
        for k in 0..3 {
            counts[k] = quotas[k].floor() as usize;
        }
        let mut rest: Vec<usize> = (0..3).collect();
        rest.sort_by(|&a, &b| {
            (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b))
        });
        let mut missing = n - counts.iter().sum::<usize>();
        for k in rest {
            if missing == 0 {
                break;
            }
            counts[k] += 1;
            missing -= 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.rows < 2 || self.cols < 2 {
            return Err("grid needs rows, cols >= 2".into());
        }
        if self.mix.iter().any(|w| !(*w >= 0.0)) || self.mix.iter().sum::<f64>() <= 0.0 {
            return Err("consumer mix weights must be >= 0 with a positive sum".into());
        }
        if !(self.spacing > 0.0) || !(0.0..1.0).contains(&self.length_jitter) {
            return Err("spacing must be > 0 and jitter in [0, 1)".into());
        }
        if self.t_supply.iter().any(|t| *t <= self.t_inf) {
            return Err("supply temperatures must exceed ambient".into());
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Network, NetworkError> {
        self.validate().map_err(NetworkError::Parameter)?;
        Network::from_file(self.build_file())
    }

    /// The network file before validation.
    pub fn build_file(&self) -> NetworkFile {
        let (rows, cols) = (self.rows, self.cols);
        let nj = rows * cols;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scenario = Scenario { t_inf: self.t_inf, ..Scenario::default() };
        let fluid = scenario.fluid;

        let mut arcs: Vec<Arc> = Vec::new();
        let mut push_arc =
            |from: usize, to: usize, kind: ArcKind, length: Option<f64>, street: Option<usize>, d: Option<f64>| {
                let id = ArcId(arcs.len());
                arcs.push(Arc { id, from: NodeId(from), to: NodeId(to), kind, length, street, diameter: d });
                id
            };

        let mut street = 0;
        let mut add_street = |a: usize,
                              b: usize,
                              rng: &mut ChaCha8Rng,
                              push: &mut dyn FnMut(
            usize,
            usize,
            ArcKind,
            Option<f64>,
            Option<usize>,
            Option<f64>,
        ) -> ArcId| {
            let jitter =
                if self.length_jitter > 0.0 { rng.random_range(-self.length_jitter..self.length_jitter) } else { 0.0 };
            let len = self.spacing * (1.0 + jitter);
            let (lo, hi) = (a.min(b), a.max(b));
            push(lo, hi, ArcKind::Internal, Some(len), Some(street), Some(self.d_init));
            push(nj + hi, nj + lo, ArcKind::Internal, Some(len), Some(street), Some(self.d_init));
            street += 1;
        };
        for i in 0..rows {
            for j in 0..cols {
                let v = i * cols + j;
                if j + 1 < cols {
                    add_street(v, v + 1, &mut rng, &mut push_arc);
                }
                if i + 1 < rows {
                    add_street(v, v + cols, &mut rng, &mut push_arc);
                }
            }
        }

        // consumers
        let counts = self.type_counts();
        let mut types: Vec<usize> = (0..3).flat_map(|k| std::iter::repeat(k).take(counts[k])).collect();
        types.shuffle(&mut rng);
        let mut consumers = Vec::with_capacity(types.len());
        let nc = types.len();
        for (k, &ty) in types.iter().enumerate() {
            let junction = k * nj / nc;
            let ct = CONSUMER_TYPES[ty];
            let (xi, zeta) = design_characteristics(
                ct.q_d,
                self.t_in_design,
                self.dt_design,
                self.dp_design,
                ct.n,
                self.t_room,
                &fluid,
            );
            let q_design = ct.q_d / (fluid.rho_cp() * self.dt_design);
            let heating = push_arc(junction, nj + junction, ArcKind::ConsumerHeating, None, None, None);
            let bypass =
                self.bypass.then(|| push_arc(junction, nj + junction, ArcKind::ConsumerBypass, None, None, None));
            consumers.push(ConsumerSpec {
                heating_arc: heating,
                bypass_arc: bypass,
                q_d: ct.q_d,
                xi,
                n: ct.n,
                zeta,
                theta_house: self.t_room - self.t_inf,
                q_max_b: self.bypass_fraction * q_design,
                dp_des_b: self.dp_bypass,
                label: Some(ct.name.to_string()),
            });
        }

        // producers: the cooler one on the right edge, the hotter on the left
        let sites = [((rows - 1) / 2) * cols + (cols - 1), (rows / 2) * cols];
        let mut producers = Vec::new();
        for (k, &site) in sites.iter().enumerate() {
            let arc = push_arc(nj + site, site, ArcKind::Producer, None, None, None);
            let t_b = self.t_supply[k];
            producers.push(ProducerSpec {
                arc,
                theta_b: t_b - self.t_inf,
                q_b_max: self.q_in_max / (fluid.rho_cp() * (t_b - scenario.t_out_design)),
            });
        }

        let mut kinds = vec![NodeKind::Internal; 2 * nj];
        for a in &arcs {
            if a.kind.is_consumer() {
                kinds[a.from.0] = NodeKind::Consumer;
                kinds[a.to.0] = NodeKind::Consumer;
            }
        }
        for a in &arcs {
            if a.kind == ArcKind::Producer {
                kinds[a.from.0] = NodeKind::Producer;
                kinds[a.to.0] = NodeKind::Producer;
            }
        }
        let nodes = (0..2 * nj)
            .map(|v| {
                let junction = v % nj;
                let (i, j) = (junction / cols, junction % cols);
                let off = if v >= nj { 3.0 } else { 0.0 };
                Node {
                    id: NodeId(v),
                    kind: kinds[v],
                    position: [j as f64 * self.spacing + off, i as f64 * self.spacing + off],
                }
            })
            .collect();

        NetworkFile {
            nodes,
            arcs,
            consumers,
            producers,
            scenario,
            reference_pressure_node: ReferenceField::One(NodeId(nj + sites[0])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ArcKind;

    #[test]
    fn two_by_two_is_deterministic() {
        let spec = GridSpec::new(2, 2, 4, [0.0, 1.0, 0.0], 3);
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.n_nodes(), 8);
        assert_eq!(a.n_streets(), 4);
        let other = GridSpec::new(2, 2, 4, [0.0, 1.0, 0.0], 4).generate().unwrap();
        assert_ne!(a.to_json(), other.to_json());
    }

    #[test]
    fn dwelling_only_mix() {
        let net = GridSpec::new(3, 3, 9, [0.0, 1.0, 0.0], 1).generate().unwrap();
        assert!(net.consumers().iter().all(|c| c.q_d == 15e3));
    }

    #[test]
    fn district_counts() {
        let spec = GridSpec::district_160();
        assert_eq!(spec.type_counts(), [98, 52, 10]);
        let net = spec.generate().unwrap();
        assert_eq!(net.arcs_of_kind(ArcKind::ConsumerHeating).count(), 160);
        let demand: f64 = net.consumers().iter().map(|c| c.q_d).sum();
        assert!((demand - 1.77e6).abs() < 1.0);
        assert_eq!(net.n_streets(), 294);
    }

    #[test]
    fn largest_remainder() {
        let spec = GridSpec::new(2, 2, 5, [1.0, 1.0, 1.0], 0);
        assert_eq!(spec.type_counts(), [2, 2, 1]);
    }
}
