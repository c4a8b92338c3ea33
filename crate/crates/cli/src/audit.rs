use std::fs;
use std::time::Instant;

use heatnet::design::StageParams;
use heatnet::grid::GridSpec;
use heatnet::optimizer::{evaluate_design, BoxConstraints, OptimizerOptions};
use heatnet::solver::StateSolver;
use heatnet::{DesignVector, Model, Network, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{config_err, load_catalog, load_design, load_network, Failure};
use crate::CheckArgs;

/// Random design inside the box, with producer inflows around what the
/// demand needs at a 20 K spread.
fn random_design(model: &Model, bounds: &BoxConstraints, seed: u64) -> DesignVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lay = model.layout();
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
    let each = demand / (model.fluid().rho_cp() * 20.0) / phi.q_b.len().max(1) as f64;
    for (k, q) in phi.q_b.iter_mut().enumerate() {
        *q = (each * rng.random_range(0.8..1.5)).min(bounds.hi[lay.qb_offset() + k]);
    }
    phi
}

fn default_network(seed: u64) -> Result<Network, Failure> {
    let mut spec = GridSpec::new(2, 3, 2, [1.0, 1.0, 0.0], seed);
    spec.length_jitter = 0.4;
    spec.generate().map_err(config_err)
}

#[derive(Serialize)]
struct Row {
    index: usize,
    block: &'static str,
    value: f64,
    adjoint_objective: f64,
    fd_objective: f64,
    error_objective: f64,
    adjoint_ks: f64,
    fd_ks: f64,
    error_ks: f64,
}

/// Relative error with a floor at 1e-8 of the largest component.
fn rel_errors(a: &[f64], b: &[f64]) -> Vec<f64> {
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8 * scale).max(f64::MIN_POSITIVE))
        .collect()
}

pub fn check_gradients(args: &CheckArgs) -> Result<(), Failure> {
    let net = match &args.network {
        Some(p) => load_network(p)?.0,
        None => default_network(args.seed)?,
    };
    let model = Model::new(net, args.radiator_model.into());
    let cat = load_catalog(args.catalog.as_deref())?;
    let params = StageParams { gamma: args.gamma, chi: args.chi, upsilon: args.upsilon, omega: args.omega };
    if !(params.gamma > 0.0 && params.chi >= 0.0 && (0.0..=1.0).contains(&params.upsilon) && params.omega >= 0.0) {
        return Err(Failure::Config("need gamma > 0, chi >= 0, upsilon in [0, 1], omega >= 0".into()));
    }
    let mut weights = OptimizerOptions::default().weights;
    if let Some(l) = args.lambda_p {
        weights.lambda_p = l;
    }
    let bounds = BoxConstraints::for_model(&model, &cat);
    let phi = match &args.design {
        Some(p) => load_design(p, &model)?.0,
        None => random_design(&model, &bounds, args.seed),
    };

    let clock = Instant::now();
    let mut s = StateSolver::new(SolverOptions { tol_h: 1e-12, tol_t: 1e-12, ..SolverOptions::default() });
    let fail = |e: heatnet::optimizer::OptimizeError| Failure::Solver(e.to_string());
    let ev = evaluate_design(&model, &phi, &cat, params, weights, &mut s).map_err(fail)?;
    let flat = phi.flatten();
    let lay = model.layout();
    let mut fd_f = Vec::with_capacity(flat.len());
    let mut fd_c = Vec::with_capacity(flat.len());
    for k in 0..flat.len() {
        // fourth-order central stencil; the objective's operation entries
        // take a wider step against round-off in its large total
        let x = flat[k].abs().max(1e-3);
        let h_f = if k < lay.n_d { 1e-4 * x } else { 1e-3 * x };
        let h_c = 1e-4 * x;
        let mut diff = |h: f64, ks: bool| -> Result<f64, Failure> {
            let mut at = |t: f64| -> Result<f64, Failure> {
                let mut v = flat.clone();
                v[k] += t * h;
                let e = evaluate_design(&model, &DesignVector::from_flat(lay, &v), &cat, params, weights, &mut s)
                    .map_err(fail)?;
                Ok(if ks { e.h_ks } else { e.objective.total })
            };
            Ok((-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h))
        };
        fd_f.push(diff(h_f, false)?);
        fd_c.push(diff(h_c, true)?);
    }
    let err_f = rel_errors(&ev.grad_objective, &fd_f);
    let err_c = rel_errors(&ev.grad_ks, &fd_c);
    let worst = err_f.iter().chain(&err_c).fold(0.0_f64, |m, v| m.max(*v));

    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(Vec::new());
        for k in 0..flat.len() {
            let block = if k < lay.alpha_offset() {
                "d"
            } else if k < lay.beta_offset() {
                "alpha"
            } else if k < lay.qb_offset() {
                "beta"
            } else {
                "q_b"
            };
            w.serialize(Row {
                index: k,
                block,
                value: flat[k],
                adjoint_objective: ev.grad_objective[k],
                fd_objective: fd_f[k],
                error_objective: err_f[k],
                adjoint_ks: ev.grad_ks[k],
                fd_ks: fd_c[k],
                error_ks: err_c[k],
            })
            .expect("row serializes");
        }
        let bytes = w.into_inner().expect("in-memory writer");
        fs::write(path, bytes).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    println!(
        "{} variables, {} adjoint passes, max relative error {:.3e} (tolerance {:.1e}), {:.2} s",
        flat.len(),
        ev.adjoint_passes,
        worst,
        args.tol,
        clock.elapsed().as_secs_f64()
    );
    if worst > args.tol {
        return Err(Failure::Optimizer(format!("gradient audit failed: {worst:.3e} > {:.1e}", args.tol)));
    }
    Ok(())
}
