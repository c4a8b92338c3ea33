use std::path::Path;

use heatnet::design::PipeCatalog;
use heatnet::grid::GridSpec;
use heatnet::optimizer::{self, catalog_objective, history_csv, OptimizeError, OptimizerOptions};
use heatnet::solver::{initial_hydraulic_guess, SolveReport, StateSolver};
use heatnet::{DesignVector, Model, SolverOptions, StateSolution};
use serde_json::json;

use crate::config::{
    config_err, load_catalog, load_design, load_network, load_schedule, solver_options, Failure, OutputSet, RunConfig,
};
use crate::report::{diameter_histogram, energy_balance, geojson, removed_streets, state_csv};
use crate::{GenGridArgs, OptimizeArgs, SimulateArgs};

fn optimizer_failure(e: OptimizeError) -> Failure {
    match e {
        OptimizeError::State { .. } => Failure::Solver(e.to_string()),
        OptimizeError::Design(_) => Failure::Config(e.to_string()),
        _ => Failure::Optimizer(e.to_string()),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let c = &args.common;
    let (net, net_file) = load_network(&c.network)?;
    let model = Model::new(net, c.radiator_model.into());
    let (phi, design_file) = match &args.design {
        Some(p) => {
            let (phi, f) = load_design(p, &model)?;
            (phi, Some(f))
        }
        None => (DesignVector::initial(model.network()), None),
    };
    let solver = solver_options(c)?;
    let config = RunConfig {
        command: "simulate",
        network: Some(net_file),
        design: design_file,
        catalog: None,
        schedule: None,
        radiator_model: model.radiator_model(),
        solver,
        optimizer: None,
        grid: None,
        seed: c.seed,
    };

    let mut s = StateSolver::new(solver);
    // with every producer closed there is no heat source and the thermal
    // state is undefined; the hydraulics alone give the all-zero flow
    let (y, z, report) = if phi.q_b.iter().all(|q| *q == 0.0) {
        let mut report = SolveReport::default();
        let y0 = initial_hydraulic_guess(&model, &phi);
        let (y, _) = s.solve_hydraulic(&model, &phi, y0, &mut report).map_err(|e| Failure::Solver(e.to_string()))?;
        report.converged = true;
        (y, None, report)
    } else {
        let sol = s.solve_state(&model, &phi, None).map_err(|e| Failure::Solver(e.to_string()))?;
        (sol.y, Some(sol.z), sol.report)
    };

    let mut out = OutputSet::new(&c.out)?;
    let (nodes, arcs) = state_csv(&model, &phi, &y, z.as_deref());
    out.write("nodes.csv", &nodes)?;
    out.write("arcs.csv", &arcs)?;
    out.write("trace.csv", &report.trace_csv())?;
    let balance = energy_balance(&model, &y, z.as_deref());
    let summary = json!({
        "energy_balance": balance,
        "thermal_solved": z.is_some(),
        "hydraulic_iterations": report.hydraulic.iterations,
        "thermal_iterations": report.thermal.iterations,
    });
    out.write("energy_balance.json", &pretty(&summary))?;
    out.finish("manifest.json", &config, "ok")?;
    println!(
        "supplied {:.1} W, consumed {:.1} W, losses {:.1} W, pump {:.3} W, max deviation {:.3}%",
        balance.supplied,
        balance.consumed,
        balance.losses,
        balance.pump_power,
        100.0 * balance.max_deviation
    );
    Ok(())
}

fn solve_at(model: &Model, phi: &DesignVector, solver: SolverOptions) -> Result<StateSolution, Failure> {
    StateSolver::new(solver).solve_state(model, phi, None).map_err(|e| Failure::Solver(e.to_string()))
}

pub fn optimize(args: &OptimizeArgs) -> Result<(), Failure> {
    let c = &args.common;
    let (net, net_file) = load_network(&c.network)?;
    let model = Model::new(net, c.radiator_model.into());
    let cat = load_catalog(args.catalog.as_deref())?;
    let schedule = load_schedule(args.schedule.as_deref())?;
    let mut opts = OptimizerOptions {
        freeze_operations: args.freeze_operations,
        solver: solver_options(c)?,
        ..OptimizerOptions::default()
    };
    if let Some(l) = args.lambda_p {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Failure::Config("--lambda-p must be finite and >= 0".into()));
        }
        opts.weights.lambda_p = l;
    }
    if let Some(n) = args.max_iter {
        opts.max_iter = n;
    }
    let (start_design, design_file) = match &args.design {
        Some(p) => {
            let (phi, f) = load_design(p, &model)?;
            (Some(phi), Some(f))
        }
        None => (None, None),
    };
    let config = RunConfig {
        command: "optimize",
        network: Some(net_file),
        design: design_file,
        catalog: Some(cat.clone()),
        schedule: Some(schedule.clone()),
        radiator_model: model.radiator_model(),
        solver: opts.solver,
        optimizer: Some(opts),
        grid: None,
        seed: c.seed,
    };
    let mut out = OutputSet::new(&c.out)?;

    let (start, baseline, warm) = match start_design {
        Some(phi) => {
            let sol = solve_at(&model, &phi, opts.solver)?;
            let base = catalog_objective(&model, &phi, &sol, &cat, opts.weights);
            (phi, base, None)
        }
        None => {
            let ws = optimizer::warm_start(&model, &DesignVector::initial(model.network()), &opts)
                .map_err(optimizer_failure)?;
            let base = catalog_objective(&model, &ws.design, &ws.state, &cat, opts.weights);
            let info = json!({
                "mismatch": ws.mismatch,
                "max_deviation": ws.max_deviation,
                "within_band": ws.within_band(),
                "converged": ws.converged,
                "iterations": ws.history.len(),
            });
            (ws.design, base, Some((info, ws.history)))
        }
    };

    let mut history = warm.as_ref().map(|w| w.1.clone()).unwrap_or_default();
    let res = match optimizer::optimize(&model, &start, &cat, &schedule, &opts) {
        Ok(r) => r,
        Err(OptimizeError::StageFailed { stage, reason, last_good, history: h }) => {
            history.extend(h);
            out.write("design_last_good.json", &pretty(&json!({ "stage": stage, "design": *last_good })))?;
            out.write_timed("convergence.csv", &history_csv(&history, true))?;
            out.finish("manifest.json", &config, "failed")?;
            return Err(Failure::Optimizer(format!("continuation stage {stage} failed: {reason}")));
        }
        Err(e) => return Err(optimizer_failure(e)),
    };
    history.extend(res.history.iter().cloned());

    let final_catalog = catalog_objective(&model, &res.projected, &res.state, &cat, opts.weights);
    let snapped: Vec<f64> = res.projected.d.iter().map(|&d| cat.diameters[cat.nearest(d).0]).collect();
    let n = model.network().n_nodes();
    let flows = &res.state.y[n..n + model.network().n_arcs()];
    out.write(
        "design.json",
        &pretty(&json!({
            "design": res.projected,
            "unprojected": res.design,
            "catalog_diameters": snapped,
        })),
    )?;
    out.write_timed("convergence.csv", &history_csv(&history, true))?;
    out.write("network.geojson", &geojson(&model, &res.projected, flows, &cat, [0.0, 0.0]))?;
    out.write("diameter_histogram.csv", &diameter_histogram(&model, &res.projected, &cat))?;
    let (nodes, arcs) = state_csv(&model, &res.projected, &res.state.y, Some(&res.state.z));
    out.write("nodes.csv", &nodes)?;
    out.write("arcs.csv", &arcs)?;
    let summary = json!({
        "objective": res.objective,
        "h_ks": res.h_ks,
        "catalog_objective": final_catalog,
        "baseline_catalog_objective": baseline,
        "removed_streets": removed_streets(&res.projected),
        "streets": res.projected.d.len(),
        "max_snap_distance": res.max_snap_distance(&cat),
        "adjoint_passes": res.adjoint_passes,
        "energy_balance": energy_balance(&model, &res.state.y, Some(&res.state.z)),
        "warm_start": warm.map(|w| w.0),
        "stages": res.stages,
    });
    out.write("summary.json", &pretty(&summary))?;
    out.finish("manifest.json", &config, "ok")?;
    println!(
        "objective {:.6e} (baseline {:.6e}), h_ks {:.3e}, {}/{} streets removed",
        final_catalog,
        baseline,
        res.h_ks,
        removed_streets(&res.projected),
        res.projected.d.len()
    );
    Ok(())
}

pub fn gen_grid(args: &GenGridArgs) -> Result<(), Failure> {
    if args.mix.len() != 3 {
        return Err(Failure::Config("--mix needs three comma-separated weights".into()));
    }
    let mut spec = if args.district_160 {
        GridSpec::district_160()
    } else {
        let mix = [args.mix[0], args.mix[1], args.mix[2]];
        GridSpec::new(args.rows, args.cols, args.consumers.unwrap_or(args.rows * args.cols), mix, args.seed)
    };
    if args.district_160 {
        spec.seed = args.seed;
    }
    spec.bypass = !args.no_bypass;
    if let Some(s) = args.spacing {
        spec.spacing = s;
    }
    if let Some(d) = args.diameter {
        let cat = PipeCatalog::default();
        if !(d > 0.0 && d < cat.upper_bound()) {
            return Err(Failure::Config(format!("--diameter must lie in (0, {})", cat.upper_bound())));
        }
        spec.d_init = d;
    }
    let net = spec.generate().map_err(config_err)?;
    let dir = match args.out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = args
        .out
        .file_name()
        .ok_or_else(|| Failure::Config("--out needs a file name".into()))?
        .to_string_lossy()
        .into_owned();
    let stem = args.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(name.clone());
    let seed = spec.seed;
    let config = RunConfig {
        command: "gen-grid",
        network: None,
        design: None,
        catalog: None,
        schedule: None,
        radiator_model: Default::default(),
        solver: SolverOptions::default(),
        optimizer: None,
        grid: Some(spec),
        seed,
    };
    let mut out = OutputSet::new(dir)?;
    out.write(&name, &(net.to_json() + "\n"))?;
    out.finish(&format!("{stem}.manifest.json"), &config, "ok")?;
    let demand: f64 = net.consumers().iter().map(|c| c.q_d).sum();
    println!(
        "{} nodes, {} arcs, {} streets, {} consumers, demand {:.1} kW",
        net.n_nodes(),
        net.n_arcs(),
        net.n_streets(),
        net.consumers().len(),
        demand / 1e3
    );
    Ok(())
}
