mod common;

use common::{path_network, PATH_JSON};
use faer::Mat;
use heatnet::design::{comfort_constraints, ContinuationSchedule, PipeCatalog, D_MIN};
use heatnet::grid::GridSpec;
use heatnet::network::Network;
use heatnet::optimizer::*;
use heatnet::physics::{heat_retention, thermal_resistance, DesignVector, Model, RadiatorModel};

fn toy_with_bypass() -> Network {
    let text = PATH_JSON
        .replace(
            r#"{"id": 3, "from": 3, "to": 0, "kind": "producer"}"#,
            r#"{"id": 3, "from": 3, "to": 0, "kind": "producer"},
    {"id": 4, "from": 1, "to": 2, "kind": "consumer_bypass"}"#,
        )
        .replace(r#""heating_arc": 2,"#, r#""heating_arc": 2, "bypass_arc": 4,"#);
    Network::from_json(&text).unwrap()
}

#[test]
fn kkt_hand_example() {
    // min -p1 - p2 + ½|p|² s.t. -1 + p1 + p2 <= 0: p = (½, ½), μ = ½
    let b = Mat::<f64>::identity(2, 2);
    let a = [1.0, 1.0];
    let step = sqp_step(&b, &[-1.0, -1.0], Some((-1.0, &a)), &[-10.0; 2], &[10.0; 2], 1e10).unwrap();
    assert!((step.p[0] - 0.5).abs() < 1e-10 && (step.p[1] - 0.5).abs() < 1e-10, "{:?}", step.p);
    assert!((step.mu - 0.5).abs() < 1e-9);
    assert!(!step.elastic);

    // an active upper bound on p2 moves the remaining slack to p1
    let step = sqp_step(&b, &[-1.0, -1.0], Some((-1.0, &a)), &[-10.0; 2], &[10.0, 0.2], 1e10).unwrap();
    assert!((step.p[1] - 0.2).abs() < 1e-12);
    assert!((step.p[0] - 0.8).abs() < 1e-9);
    assert!((step.mu - 0.2).abs() < 1e-9);
    assert_eq!(step.active_upper, vec![1]);
}

#[test]
fn infeasible_linearization_is_elastic() {
    let b = Mat::<f64>::identity(2, 2);
    let a = [1.0, 0.0];
    let step = sqp_step(&b, &[0.0, 0.0], Some((5.0, &a)), &[-1.0; 2], &[1.0; 2], 1e6).unwrap();
    assert!(step.elastic);
    assert!((step.p[0] + 1.0).abs() < 1e-12);
}

#[test]
fn box_qp_satisfies_kkt_on_random_problems() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(2..9);
        let m = Mat::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = Mat::<f64>::from_fn(n, n, |i, j| {
            (0..n).map(|k| m[(k, i)] * m[(k, j)]).sum::<f64>() + if i == j { 0.1 } else { 0.0 }
        });
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = box_qp(&b, &h, &l, &u, None).unwrap();
        for i in 0..n {
            let gi: f64 = (0..n).map(|j| b[(i, j)] * x[j]).sum::<f64>() + h[i];
            assert!(x[i] >= l[i] && x[i] <= u[i]);
            if x[i] > l[i] + 1e-12 && x[i] < u[i] - 1e-12 {
                assert!(gi.abs() < 1e-9, "free gradient {gi}");
            } else if x[i] <= l[i] + 1e-12 {
                assert!(gi >= -1e-9);
            } else {
                assert!(gi <= 1e-9);
            }
        }
    }
}

#[test]
fn bfgs_satisfies_the_secant_condition() {
    let mut b = Mat::<f64>::identity(3, 3);
    let s = [0.3, -0.1, 0.5];
    let y = [0.9, 0.1, 1.2];
    assert_eq!(bfgs_update(&mut b, &s, &y), BfgsOutcome::Updated);
    for i in 0..3 {
        let bs: f64 = (0..3).map(|j| b[(i, j)] * s[j]).sum();
        assert!((bs - y[i]).abs() < 1e-12);
    }
    // curvature against the step triggers damping and keeps B positive definite
    let y = [-0.3, 0.1, -0.5];
    assert_eq!(bfgs_update(&mut b, &s, &y), BfgsOutcome::Damped);
    assert!(b.llt(faer::Side::Lower).is_ok());
}

#[test]
fn oversized_toy_reaches_the_demand() {
    let m = Model::new(path_network(), RadiatorModel::Lmtd);
    let phi = DesignVector::initial(m.network());
    let ws = warm_start(&m, &phi, &OptimizerOptions::default()).unwrap();
    assert!(ws.mismatch < 1e-10, "mismatch {}", ws.mismatch);
    assert!(ws.within_band());
    let h = comfort_constraints(ws.state.heat(&m), m.network());
    assert!(h.iter().all(|v| *v <= 0.0));
    assert_eq!(ws.design.d, phi.d);
    assert_eq!(ws.history[0].stage, 0);

    // with a single path all flow crosses the radiator: q_b from the heat balance
    let (fl, pp) = (*m.fluid(), *m.pipe());
    let c = &m.network().consumers()[0];
    let tb = m.network().producers()[0].theta_b;
    let heat_at = |q: f64| {
        let t_in = tb * heat_retention(q, 100.0, thermal_resistance(phi.d[0], &pp).unwrap(), &fl);
        // outlet from the radiator balance by bisection
        let f = |t: f64| {
            let (a, b) = (t_in - c.theta_house, t - c.theta_house);
            fl.rho_cp() * q * (t_in - t) - c.xi * ((a - b) / (a / b).ln()).powf(c.n)
        };
        let (mut lo, mut hi) = (c.theta_house + 1e-9, t_in - 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        fl.rho_cp() * q * (t_in - 0.5 * (lo + hi))
    };
    let (mut lo, mut hi) = (1e-6, 2e-3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if heat_at(mid) < c.q_d {
            lo = mid
        } else {
            hi = mid
        }
    }
    let q_hand = 0.5 * (lo + hi);
    assert!((ws.design.q_b[0] / q_hand - 1.0).abs() < 1e-4, "{} vs {q_hand}", ws.design.q_b[0]);
}

#[test]
fn single_consumer_valve_matches_hand_solution() {
    let m = Model::new(toy_with_bypass(), RadiatorModel::Lmtd);
    let phi = DesignVector::initial(m.network());
    let ws = warm_start(&m, &phi, &OptimizerOptions::default()).unwrap();
    assert!(ws.mismatch < 1e-10, "mismatch {}", ws.mismatch);
    let (fl, pp) = (*m.fluid(), *m.pipe());
    let c = m.network().consumers()[0].clone();
    let tb = m.network().producers()[0].theta_b;
    let (q_b, beta) = (ws.design.q_b[0], ws.design.beta[0]);
    assert!(beta > 1e-3);
    // heating flow delivering Q_d at the inlet temperature set by q_b
    let t_in = tb * heat_retention(q_b, 100.0, thermal_resistance(phi.d[0], &pp).unwrap(), &fl);
    let lmtd = |t_out: f64| {
        let (a, b) = (t_in - c.theta_house, t_out - c.theta_house);
        (a - b) / (a / b).ln()
    };
    // Eq. pair: ξ LMTD^n = Q_d fixes the outlet, then ρc_p q_h Δθ = Q_d
    let (mut lo, mut hi) = (c.theta_house + 1e-9, t_in - 1e-9);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if c.xi * lmtd(mid).powf(c.n) > c.q_d {
            hi = mid
        } else {
            lo = mid
        }
    }
    let t_out = 0.5 * (lo + hi);
    let q_h = c.q_d / (fl.rho_cp() * (t_in - t_out));
    let dp = (q_b - q_h) / (beta * c.q_max_b / c.dp_des_b);
    let alpha = q_h * (c.zeta / dp).sqrt();
    assert!((ws.design.alpha[0] / alpha - 1.0).abs() < 1e-4, "{} vs {alpha}", ws.design.alpha[0]);
}

#[test]
fn insufficient_capacity_is_reported() {
    let mut file = path_network().to_file();
    file.producers[0].q_b_max = 1e-5;
    let m = Model::new(Network::from_file(file).unwrap(), RadiatorModel::Lmtd);
    let phi = DesignVector::initial(m.network());
    match warm_start(&m, &phi, &OptimizerOptions::default()) {
        Err(OptimizeError::InfeasibleScenario { capacity, demand }) => {
            assert!(capacity < demand);
            assert_eq!(demand, 15e3);
        }
        other => panic!("expected an infeasible scenario, got {other:?}"),
    }
}

#[test]
fn relaxed_single_stage_sizing() {
    let net = GridSpec::new(2, 2, 3, [0.0, 1.0, 0.0], 2).generate().unwrap();
    let m = Model::new(net, RadiatorModel::Lmtd);
    let opts = OptimizerOptions::default();
    let ws = warm_start(&m, &DesignVector::initial(m.network()), &opts).unwrap();
    assert!(ws.within_band());
    let cat = PipeCatalog::default();
    let schedule = ContinuationSchedule::relaxed(5e3);
    let res = optimize(&m, &ws.design, &cat, &schedule, &opts).unwrap();
    let bounds = BoxConstraints::for_model(&m, &cat);
    assert!(bounds.contains(&res.design.flatten()));
    assert!(res.history.iter().all(|r| r.stage == 1));
    assert!(res.h_ks <= 1e-9, "h_ks {}", res.h_ks);
    let first = &res.history[0];
    assert!(res.objective.total < first.objective, "{} vs {}", res.objective.total, first.objective);
    assert!(res.projected.d.iter().all(|d| *d >= D_MIN));
    // two adjoint passes per gradient, none after a Hessian reset
    assert_eq!(res.adjoint_passes % 2, 0);
    assert!(res.history.iter().all(|r| r.adjoint_passes == 2 || r.adjoint_passes == 0));
    assert_eq!(res.history[0].adjoint_passes, 2);
}

#[test]
fn frozen_operations_stay_fixed() {
    let net = GridSpec::new(2, 2, 3, [0.0, 1.0, 0.0], 2).generate().unwrap();
    let m = Model::new(net, RadiatorModel::Lmtd);
    let mut opts = OptimizerOptions::default();
    let ws = warm_start(&m, &DesignVector::initial(m.network()), &opts).unwrap();
    opts.freeze_operations = true;
    opts.max_iter = 20;
    let cat = PipeCatalog::default();
    let res = optimize(&m, &ws.design, &cat, &ContinuationSchedule::relaxed(5e3), &opts).unwrap();
    assert_eq!(res.design.alpha, ws.design.alpha);
    assert_eq!(res.design.beta, ws.design.beta);
    assert_eq!(res.design.q_b, ws.design.q_b);
}

#[test]
fn decreasing_schedule_is_rejected() {
    let mut schedule = ContinuationSchedule::default();
    schedule.stages.swap(0, 5);
    let net = GridSpec::new(2, 2, 3, [0.0, 1.0, 0.0], 2).generate().unwrap();
    let m = Model::new(net, RadiatorModel::Lmtd);
    let phi = DesignVector::initial(m.network());
    assert!(matches!(
        optimize(&m, &phi, &PipeCatalog::default(), &schedule, &OptimizerOptions::default()),
        Err(OptimizeError::Design(_))
    ));
}
