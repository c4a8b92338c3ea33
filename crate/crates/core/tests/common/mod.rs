#![allow(dead_code)]

use heatnet::grid::GridSpec;
use heatnet::network::{ArcRole, Network, Side};
use heatnet::physics::{DesignVector, Model, RadiatorModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 2 × 3 grid with two consumers and bypasses: 14 pipes, 4 consumer arcs
/// and 2 producer arcs.
pub fn random_network(seed: u64) -> Network {
    let mut spec = GridSpec::new(2, 3, 2, [1.0, 1.0, 0.0], seed);
    spec.length_jitter = 0.4;
    let net = spec.generate().unwrap();
    assert_eq!(net.n_arcs(), 20);
    net
}

pub fn model(net: Network) -> Model {
    Model::new(net, RadiatorModel::Lmtd)
}

/// Diameters, valve settings and producer inflows drawn inside the box.
pub fn random_design(model: &Model, seed: u64) -> DesignVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = DesignVector::initial(model.network());
    for d in &mut phi.d {
        *d = rng.random_range(0.04..0.2);
    }
    for a in &mut phi.alpha {
        *a = rng.random_range(0.5..1.0);
    }
    for b in &mut phi.beta {
        *b = rng.random_range(0.2..1.0);
    }
    let demand: f64 = model.network().consumers().iter().map(|c| c.q_d).sum();
    let q_need = demand / (model.fluid().rho_cp() * 20.0);
    let np = phi.q_b.len() as f64;
    for q in &mut phi.q_b {
        *q = q_need / np * rng.random_range(0.8..1.5);
    }
    phi
}

/// A state away from any solution: flows of random sign bounded away from
/// zero, temperatures inside the radiator domain.
pub fn random_state(model: &Model, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let net = model.network();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = net.n_nodes();
    let m = net.n_arcs();
    let mut y = Vec::with_capacity(n + m);
    for _ in 0..n {
        y.push(rng.random_range(-5e4..5e4));
    }
    for _ in 0..m {
        let mag: f64 = rng.random_range(2e-5..1e-3);
        y.push(if rng.random_bool(0.3) { -mag } else { mag });
    }
    // heating arcs carry positive flow so their inlet is the feed node
    for (a, _) in net.arcs().iter().enumerate() {
        if matches!(net.role(a), ArcRole::Heating { .. }) {
            y[n + a] = y[n + a].abs();
        }
    }
    let house = net.consumers().iter().map(|c| c.theta_house).fold(0.0, f64::max);
    let mut z = Vec::new();
    for v in 0..n {
        z.push(match net.side(v) {
            Side::Feed => rng.random_range(house + 30.0..house + 45.0),
            Side::Return => rng.random_range(house + 5.0..house + 25.0),
        });
    }
    for (a, arc) in net.arcs().iter().enumerate() {
        let base = match net.role(a) {
            ArcRole::Heating { .. } => z[arc.to.0],
            _ => z[arc.to.0].max(z[arc.from.0]),
        };
        z.push(base + rng.random_range(-2.0..2.0));
    }
    for c in net.consumers() {
        z.push(c.q_d * rng.random_range(0.7..1.3));
    }
    (y, z)
}

/// Largest entrywise mismatch between an analytic Jacobian and central
/// differences of `f`, relative to the larger magnitude with a floor of
/// `1e-6` of the row's largest entry and a per-entry `floor(row, col)`.
pub fn jacobian_error(
    analytic: &[Vec<f64>],
    x: &[f64],
    floor: impl Fn(usize, usize) -> f64,
    step: impl Fn(usize) -> f64,
    mut f: impl FnMut(&[f64]) -> Vec<f64>,
) -> (f64, usize, usize) {
    let rows = analytic.len();
    let cols = x.len();
    let mut fd = vec![vec![0.0; cols]; rows];
    for k in 0..cols {
        let h = step(k);
        let mut xp = x.to_vec();
        xp[k] += h;
        let mut xm = x.to_vec();
        xm[k] -= h;
        let (rp, rm) = (f(&xp), f(&xm));
        for i in 0..rows {
            fd[i][k] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    let mut worst = (0.0, 0, 0);
    for i in 0..rows {
        let rowmax = analytic[i].iter().chain(&fd[i]).fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..cols {
            let (a, b) = (analytic[i][k], fd[i][k]);
            let denom = a.abs().max(b.abs()).max(1e-6 * rowmax).max(floor(i, k)).max(f64::MIN_POSITIVE);
            let e = (a - b).abs() / denom;
            if e > worst.0 {
                worst = (e, i, k);
            }
        }
    }
    worst
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Feed pipe 0 → 1, heating arc 1 → 2, return pipe 2 → 3, producer 3 → 0.
pub const PATH_JSON: &str = r#"{
  "nodes": [
    {"id": 0, "kind": "producer", "position": [0, 0]},
    {"id": 1, "kind": "consumer", "position": [100, 0]},
    {"id": 2, "kind": "consumer", "position": [100, 3]},
    {"id": 3, "kind": "producer", "position": [0, 3]}
  ],
  "arcs": [
    {"id": 0, "from": 0, "to": 1, "kind": "internal", "length": 100.0, "street": 0},
    {"id": 1, "from": 2, "to": 3, "kind": "internal", "length": 100.0, "street": 0},
    {"id": 2, "from": 1, "to": 2, "kind": "consumer_heating"},
    {"id": 3, "from": 3, "to": 0, "kind": "producer"}
  ],
  "consumers": [
    {"heating_arc": 2, "Q_d": 15000, "xi": 338, "n": 1.2, "zeta": 1.5e12,
     "theta_house": 28, "q_max_b": 1.8e-5, "dp_des_b": 5e4}
  ],
  "producers": [{"arc": 3, "theta_b": 73, "q_b_max": 2e-3}],
  "reference_pressure_node": 3
}"#;

pub fn path_network() -> Network {
    Network::from_json(PATH_JSON).unwrap()
}

/// Dense Gaussian elimination with complete pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if m[i][j].abs() > best {
                    (pr, pc, best) = (i, j, m[i][j].abs());
                }
            }
        }
        assert!(best > 0.0, "singular matrix");
        m.swap(k, pr);
        rhs.swap(k, pr);
        for row in m.iter_mut() {
            row.swap(k, pc);
        }
        perm.swap(k, pc);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (rhs[k] - s) / m[k][k];
    }
    let mut out = vec![0.0; n];
    for k in 0..n {
        out[perm[k]] = x[k];
    }
    out
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (r, c) = (a.len(), a[0].len());
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}
