//! Acceptance checks, one PASS/FAIL line per criterion. Runs as a plain
//! binary so the lines show without `--nocapture`.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{random_design, random_network};
use heatnet::adjoint::Adjoint;
use heatnet::design::{
    comfort_constraints, ks_aggregate, ks_qoi, objective_qoi, ContinuationSchedule, PipeCatalog, StageParams, D_MIN,
};
use heatnet::grid::GridSpec;
use heatnet::network::Network;
use heatnet::optimizer::{
    catalog_objective, evaluate_design, optimize, warm_start, OptimizeResult, OptimizerOptions, WarmStart,
};
use heatnet::physics::{
    conductance, design_characteristics, DesignVector, FluidProperties, Model, PipeProperties, RadiatorModel,
};
use heatnet::solver::{convergence_order, SolverOptions, StateSolver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tight() -> SolverOptions {
    SolverOptions { tol_h: 1e-12, tol_t: 1e-12, ..Default::default() }
}

fn grid_4x4() -> Network {
    GridSpec::new(4, 4, 19, [1.0, 1.0, 0.2], 1).generate().unwrap()
}

fn gradient_audit() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let stages = [
        StageParams { gamma: 5e3, chi: 0.0, upsilon: 0.0, omega: 0.0 },
        StageParams { gamma: 1e3, chi: 5.0, upsilon: 0.5, omega: 5.0 },
    ];
    let cat = PipeCatalog::default();
    let weights = OptimizerOptions::default().weights;
    for seed in 0..3 {
        let m = Model::new(random_network(seed), RadiatorModel::Lmtd);
        let phi = random_design(&m, seed);
        for params in stages {
            let mut s = StateSolver::new(tight());
            let ev = evaluate_design(&m, &phi, &cat, params, weights, &mut s).unwrap();
            let flat = phi.flatten();
            let mut fd_f = Vec::new();
            let mut fd_c = Vec::new();
            let n_d = m.layout().n_d;
            for k in 0..flat.len() {
                // fourth-order stencil; the objective takes wide steps in the
                // operation variables to stay clear of round-off in the
                // piping term, the sharper aggregate takes narrow ones
                let x = flat[k].abs().max(1e-3);
                let (h_f, h_c) = (if k < n_d { 1e-4 * x } else { 1e-3 * x }, 1e-4 * x);
                let mut diff = |h: f64, i: usize| {
                    let mut at = |t: f64| {
                        let mut x = flat.clone();
                        x[k] += t * h;
                        let e = evaluate_design(
                            &m,
                            &DesignVector::from_flat(m.layout(), &x),
                            &cat,
                            params,
                            weights,
                            &mut s,
                        )
                        .unwrap();
                        [e.objective.total, e.h_ks][i]
                    };
                    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
                };
                fd_f.push(diff(h_f, 0));
                fd_c.push(diff(h_c, 1));
            }
            for (g, fd) in [(&ev.grad_objective, &fd_f), (&ev.grad_ks, &fd_c)] {
                let scale = fd.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                for (a, b) in g.iter().zip(fd.iter()) {
                    worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-8 * scale));
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-5 && t <= Duration::from_secs(60),
        format!("max relative error {worst:.2e} (<= 1e-5), {:.1} s (<= 60 s)", t.as_secs_f64()),
    )
}

fn physics_limits() -> Outcome {
    let (fl, pp) = (FluidProperties::default(), PipeProperties::default());
    let q_at = |re: f64, d: f64| re * PI * fl.mu * d / (4.0 * fl.rho);
    let (d, l) = (0.1, 100.0);
    let g = conductance(q_at(100.0, d), d, l, &fl, &pp).g;
    let hp = PI * d.powi(4) / (128.0 * fl.mu * l);
    let lam = (g / hp - 1.0).abs();
    let q = q_at(1e8, d);
    let g = conductance(q, d, l, &fl, &pp).g;
    let f_vk = (2.0 * (3.7 * d / pp.eps).log10()).powi(-2);
    let v = 4.0 * q / (PI * d * d);
    let rough = (g * f_vk * l / d * fl.rho * v * v / 2.0 / q - 1.0).abs();
    outcome(
        lam <= 0.01 && rough <= 0.02,
        format!("laminar deviation {:.3}% (<= 1%), rough deviation {:.3}% (<= 2%)", 100.0 * lam, 100.0 * rough),
    )
}

fn dwelling_characteristics() -> Outcome {
    let (xi, zeta) = design_characteristics(15e3, 55.0, 20.0, 5e4, 1.2, 20.0, &FluidProperties::default());
    let (ex, ez) = ((xi / 340.0 - 1.0).abs(), (zeta / 1.5e12 - 1.0).abs());
    outcome(
        ex <= 0.03 && ez <= 0.03,
        format!(
            "xi = {:.4} kW/K^1.2 ({:.2}%), zeta = {zeta:.4e} ({:.2}%), tolerance 3%",
            xi / 1e3,
            100.0 * ex,
            100.0 * ez
        ),
    )
}

fn newton_performance() -> Outcome {
    let m = Model::new(GridSpec::district_160().generate().unwrap(), RadiatorModel::Lmtd);
    let phi = DesignVector::initial(m.network());
    let t0 = Instant::now();
    let sol = StateSolver::new(SolverOptions::default()).solve_state(&m, &phi, None);
    let t = t0.elapsed();
    let Ok(sol) = sol else {
        return outcome(false, "state solve failed".into());
    };
    let res = |r: &[f64]| r.last().copied().unwrap_or(f64::NAN);
    let converged = sol.report.converged
        && res(&sol.report.hydraulic.residuals) <= 1e-8
        && res(&sol.report.thermal.residuals) <= 1e-8;
    // the order is read off a solve continued toward round-off
    let deep = StateSolver::new(tight()).solve_state(&m, &phi, None).unwrap();
    let oh = convergence_order(&deep.report.hydraulic.residuals, 2).unwrap_or(0.0);
    let ot = convergence_order(&deep.report.thermal.residuals, 2).unwrap_or(0.0);
    outcome(
        converged && oh >= 1.8 && ot >= 1.8 && t < Duration::from_secs(1),
        format!(
            "converged to 1e-8 in {}+{} iterations, order hydraulic {oh:.2} thermal {ot:.2} (>= 1.8), {:.0} ms (< 1 s)",
            sol.report.hydraulic.iterations,
            sol.report.thermal.iterations,
            t.as_secs_f64() * 1e3
        ),
    )
}

fn ks_conservatism(m: &Model, res: &OptimizeResult) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bounds_ok = true;
    for _ in 0..2000 {
        let n = rng.random_range(1..400);
        let gamma = 10f64.powf(rng.random_range(0.0..5.0));
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (ks, _) = ks_aggregate(&h, gamma);
        let max = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        bounds_ok &= ks >= max && ks <= max + (n as f64).ln() / gamma + 1e-12;
    }
    let heat = res.state.heat(m);
    let worst = heat.iter().zip(m.network().consumers()).map(|(q, c)| (0.95 - q / c.q_d).max(0.0)).fold(0.0, f64::max);
    let h = comfort_constraints(heat, m.network());
    let (ks, _) = ks_aggregate(&h, 1e5);
    let max = h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let final_ok = ks >= max && ks <= max + (h.len() as f64).ln() / 1e5;
    outcome(
        bounds_ok && final_ok && res.h_ks <= 0.0 && worst <= 1e-3,
        format!(
            "bounds hold on 2000 vectors: {bounds_ok}; final h_KS {:.2e}, worst deviation below band {:.4}% of Q_d (<= 0.1%)",
            res.h_ks,
            100.0 * worst
        ),
    )
}

fn discreteness(res: &OptimizeResult, elapsed: Duration) -> Outcome {
    let cat = PipeCatalog::default();
    let snap = res.max_snap_distance(&cat);
    outcome(
        snap <= 1e-4 && res.h_ks <= 0.0 && elapsed <= Duration::from_secs(600),
        format!(
            "max distance to catalog {snap:.2e} m (<= 1e-4), h_KS {:.2e} (<= 0), {:.0} s (<= 600 s)",
            res.h_ks,
            elapsed.as_secs_f64()
        ),
    )
}

fn improvement(m: &Model, ws: &WarmStart, res: &OptimizeResult) -> Outcome {
    let cat = PipeCatalog::default();
    let w = OptimizerOptions::default().weights;
    let baseline = catalog_objective(m, &ws.design, &ws.state, &cat, w);
    let fin = catalog_objective(m, &res.projected, &res.state, &cat, w);
    let removed = res.projected.d.iter().filter(|d| cat.nearest(**d).0 == 0).count();
    let at_min = res.projected.d.iter().filter(|d| (**d - D_MIN).abs() <= 1e-4).count();
    outcome(
        fin < baseline && removed >= 1 && at_min >= 1,
        format!(
            "objective {fin:.4e} vs uniform baseline {baseline:.4e}, {at_min} of {} streets removed",
            res.projected.d.len()
        ),
    )
}

fn scaling(res: &OptimizeResult) -> Outcome {
    let cat = PipeCatalog::default();
    let params = ContinuationSchedule::default().stages[10];
    let weights = OptimizerOptions::default().weights;
    let instances = [
        GridSpec::new(2, 2, 5, [1.0, 1.0, 1.0], 3),
        GridSpec::new(4, 4, 19, [1.0, 1.0, 0.2], 1),
        GridSpec::new(14, 12, 160, [98.0, 52.0, 10.0], 7),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for spec in instances {
        let m = Model::new(spec.generate().unwrap(), RadiatorModel::Lmtd);
        let phi = DesignVector::initial(m.network());
        let mut s = StateSolver::new(SolverOptions::default());
        let ev = evaluate_design(&m, &phi, &cat, params, weights, &mut s).unwrap();
        let n = m.layout().len();
        ok &= ev.adjoint_passes == 2;
        parts.push(format!("{n} vars: {} passes", ev.adjoint_passes));
    }
    ok &=
        matches!(parts.as_slice(), [a, b, c] if a.starts_with("16 ") && b.starts_with("64 ") && c.starts_with("632 "));
    let per_iter = res.history.iter().all(|r| r.adjoint_passes == 2 || r.adjoint_passes == 0);
    ok &= per_iter;
    outcome(ok, format!("{}; optimizer iterations use 2 passes: {per_iter}", parts.join(", ")))
}

fn adjoint_economy() -> Outcome {
    let m = Model::new(GridSpec::district_160().generate().unwrap(), RadiatorModel::Lmtd);
    let phi = DesignVector::initial(m.network());
    let cat = PipeCatalog::default();
    let params = ContinuationSchedule::default().stages[10];
    let weights = OptimizerOptions::default().weights;
    let mut solve_times = Vec::new();
    let mut grad_times = Vec::new();
    for _ in 0..5 {
        let mut s = StateSolver::new(SolverOptions::default());
        let t0 = Instant::now();
        let sol = s.solve_state(&m, &phi, None).unwrap();
        solve_times.push(t0.elapsed().as_secs_f64());
        let t1 = Instant::now();
        let adj = Adjoint::new(&m, &phi, &sol).unwrap();
        let (_, jf) = objective_qoi(&m, &phi, &sol, &cat, weights, params.upsilon, params.omega);
        let jc = ks_qoi(&m, &sol, params.gamma);
        let gf = adj.gradient(&jf).unwrap();
        let gc = adj.gradient(&jc).unwrap();
        grad_times.push(t1.elapsed().as_secs_f64());
        assert!(gf.iter().chain(&gc).all(|v| v.is_finite()));
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (ts, tg) = (median(&mut solve_times), median(&mut grad_times));
    outcome(
        tg <= 0.5 * ts,
        format!("gradient {:.1} ms vs state solve {:.1} ms, ratio {:.3} (<= 0.5)", tg * 1e3, ts * 1e3, tg / ts),
    )
}

fn report(k: usize, name: &str, o: &Outcome) {
    println!("{} criterion {k} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    // `cargo test <filter>` forwards the filter; only run on a matching one
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut all = true;
    let mut run = |k: usize, name: &str, o: Outcome| {
        report(k, name, &o);
        all &= o.pass;
    };
    run(1, "gradient audit", gradient_audit());
    run(2, "physics limits", physics_limits());
    run(3, "dwelling characteristics", dwelling_characteristics());
    run(4, "Newton performance", newton_performance());

    let m = Model::new(grid_4x4(), RadiatorModel::Lmtd);
    let opts = OptimizerOptions::default();
    let t0 = Instant::now();
    let ws = warm_start(&m, &DesignVector::initial(m.network()), &opts).unwrap();
    let res = optimize(&m, &ws.design, &PipeCatalog::default(), &ContinuationSchedule::default(), &opts).unwrap();
    let elapsed = t0.elapsed();

    run(5, "KS conservatism", ks_conservatism(&m, &res));
    run(6, "discreteness", discreteness(&res, elapsed));
    run(7, "improvement over uniform baseline", improvement(&m, &ws, &res));
    run(8, "adjoint pass count", scaling(&res));
    run(9, "adjoint economy", adjoint_economy());
    if !all {
        std::process::exit(1);
    }
}
