//! Two-stage Newton solver: hydraulics first, then the thermal equations on
//! the converged flow field.
//!
//! Rows of both systems are divided by [`Model::hydraulic_row_scales`] and
//! [`Model::thermal_row_scales`] before factorization; tolerances apply to
//! the scaled infinity norm. The factorization at the converged iterate of
//! each stage is kept for adjoint solves.

use std::fmt;

use serde::Serialize;

use crate::network::{ArcKind, ArcRole};
use crate::physics::{DesignVector, Model, PhysicsError, ThermalParts, Q_EPS};
use crate::sparse::{LinearSolveError, LuFactor, SymbolicCache, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol_h: f64,
    pub tol_t: f64,
    pub max_iter: usize,
    /// Scaled residual below which the hydraulic fixed-point sweeps hand
    /// over to Newton.
    pub handover: f64,
    /// Step reduction factor of the backtracking line search.
    pub backtrack: f64,
    /// Smallest step length tried before giving up on a decrease.
    pub min_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol_h: 1e-8, tol_t: 1e-8, max_iter: 60, handover: 0.1, backtrack: 0.5, min_step: 2f64.powi(-20) }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol_h > 0.0 && self.tol_t > 0.0) {
            return Err("solver tolerances must be > 0".into());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be >= 1".into());
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err("damping parameters must lie in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Hydraulic,
    Thermal,
    Monolithic,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Hydraulic => "hydraulic",
            Stage::Thermal => "thermal",
            Stage::Monolithic => "monolithic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub stage: Stage,
    pub iteration: usize,
    pub residual: f64,
    /// Step length accepted after this iterate's residual was recorded.
    pub damping: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageReport {
    pub converged: bool,
    pub iterations: usize,
    /// Scaled infinity norm at every iterate, the last one included.
    pub residuals: Vec<f64>,
    /// Scaled infinity norm of every accepted Newton update.
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub hydraulic: StageReport,
    pub thermal: StageReport,
    pub trace: Vec<TraceRow>,
}

impl SolveReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("stage,iteration,residual,damping\n");
        for r in &self.trace {
            s.push_str(&format!("{},{},{:e},{}\n", r.stage, r.iteration, r.residual, r.damping));
        }
        s
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("{stage} stage did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { stage: Stage, iterations: usize, residual: f64 },
    #[error("{stage} Jacobian is singular: {block}")]
    Singular { stage: Stage, block: String },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("non-finite residual in the {stage} stage")]
    NonFinite { stage: Stage },
}

/// Converged state with the factorizations used to reach it.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub report: SolveReport,
    /// LU of the row-scaled `∂H/∂y` at `y`.
    pub factor_h: LuFactor,
    /// LU of the row-scaled `∂E/∂z` at `(y, z)`.
    pub factor_t: LuFactor,
}

impl StateSolution {
    pub fn pressures<'a>(&'a self, model: &Model) -> &'a [f64] {
        &self.y[..model.network().n_nodes()]
    }

    pub fn flows<'a>(&'a self, model: &Model) -> &'a [f64] {
        &self.y[model.network().n_nodes()..]
    }

    pub fn node_temperatures<'a>(&'a self, model: &Model) -> &'a [f64] {
        &self.z[..model.network().n_nodes()]
    }

    pub fn arc_temperatures<'a>(&'a self, model: &Model) -> &'a [f64] {
        let n = model.network().n_nodes();
        &self.z[n..n + model.network().n_arcs()]
    }

    pub fn heat<'a>(&'a self, model: &Model) -> &'a [f64] {
        let net = model.network();
        &self.z[net.n_nodes() + net.n_arcs()..]
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scale_rows(r: &mut [f64], scales: &[f64]) {
    for (x, s) in r.iter_mut().zip(scales) {
        *x /= s;
    }
}

fn scale_matrix(t: &Triplets, scales: &[f64]) -> Triplets {
    let mut out = Triplets::with_capacity(t.nrows(), t.ncols(), t.entries().len());
    for &(r, c, v) in t.entries() {
        out.push(r, c, v / scales[r]);
    }
    out
}

fn scaled_step(dx: &[f64], t: f64, scale: impl Fn(usize) -> f64) -> f64 {
    dx.iter().enumerate().fold(0.0_f64, |m, (i, d)| m.max((t * d / scale(i)).abs()))
}

/// Scaled residuals below this are dominated by round-off.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Least-squares slope of `log r_{k+1}` against `log r_k` over the last
/// `pairs` steps, skipping residuals at round-off level.
pub fn convergence_order(history: &[f64], pairs: usize) -> Option<f64> {
    let logs: Vec<f64> = history.iter().filter(|&&r| r > ROUNDOFF_FLOOR).map(|r| r.ln()).collect();
    if logs.len() < 3 {
        return None;
    }
    let k = pairs.min(logs.len() - 1);
    let pts: Vec<(f64, f64)> = logs.windows(2).rev().take(k).map(|w| (w[0], w[1])).collect();
    if pts.len() == 1 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

const FIXED_POINT_SWEEPS: usize = 40;

/// Newton solver with cached symbolic factorizations. One instance per
/// network; not reentrant.
#[derive(Debug, Clone, Default)]
pub struct StateSolver {
    pub options: SolverOptions,
    cache_h: SymbolicCache,
    cache_t: SymbolicCache,
    cache_m: SymbolicCache,
}

impl StateSolver {
    pub fn new(options: SolverOptions) -> Self {
        Self { options, ..Default::default() }
    }

    /// Solves both stages. `warm` supplies the initial iterate.
    pub fn solve_state(
        &mut self,
        model: &Model,
        phi: &DesignVector,
        warm: Option<(&[f64], &[f64])>,
    ) -> Result<StateSolution, SolveError> {
        let mut report = SolveReport::default();
        let y0 = match warm {
            Some((y, _)) => y.to_vec(),
            None => initial_hydraulic_guess(model, phi),
        };
        let (y, factor_h) = self.solve_hydraulic(model, phi, y0, &mut report)?;
        let z0 = match warm {
            Some((_, z)) => z.to_vec(),
            None => initial_thermal_guess(model, &y),
        };
        let (z, factor_t) = match self.solve_thermal(model, phi, &y, z0.clone(), &mut report) {
            Ok(v) => v,
            // a warm start from a distant design may begin outside the radiator domain
            Err(SolveError::Physics(_)) | Err(SolveError::NonConvergence { .. }) if warm.is_some() => {
                report.thermal = StageReport::default();
                self.solve_thermal(model, phi, &y, initial_thermal_guess(model, &y), &mut report)?
            }
            Err(e) => return Err(e),
        };
        report.converged = true;
        Ok(StateSolution { y, z, report, factor_h, factor_t })
    }

    /// Newton iteration on `H(φ, y) = 0`.
    pub fn solve_hydraulic(
        &mut self,
        model: &Model,
        phi: &DesignVector,
        mut y: Vec<f64>,
        report: &mut SolveReport,
    ) -> Result<(Vec<f64>, LuFactor), SolveError> {
        let scales = model.hydraulic_row_scales();
        let (q_scale, p_scale) = model.hydraulic_scales();
        let n = model.network().n_nodes();
        let opts = self.options;
        let stage = Stage::Hydraulic;
        let eval = |y: &[f64]| {
            let mut r = model.hydraulic_residual(phi, y);
            scale_rows(&mut r, &scales);
            r
        };
        self.fixed_point_hydraulic(model, phi, &mut y, &scales);
        let mut iter = 0;
        loop {
            let (mut r, jac) = model.hydraulic_system(phi, &y, true);
            scale_rows(&mut r, &scales);
            let norm = inf_norm(&r);
            if !norm.is_finite() {
                return Err(SolveError::NonFinite { stage });
            }
            report.hydraulic.residuals.push(norm);
            let jac = scale_matrix(&jac.expect("jacobian"), &scales);
            let lu = LuFactor::factor_cached(&jac, &mut self.cache_h).map_err(|e| singular(model, stage, &jac, e))?;
            if norm <= opts.tol_h {
                report.hydraulic.converged = true;
                report.hydraulic.iterations = iter;
                report.trace.push(TraceRow { stage, iteration: iter, residual: norm, damping: 0.0 });
                return Ok((y, lu));
            }
            if iter >= opts.max_iter {
                report.hydraulic.iterations = iter;
                return Err(SolveError::NonConvergence { stage, iterations: iter, residual: norm });
            }
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let dy = lu.solve(&neg).map_err(|e| singular(model, stage, &jac, e))?;
            let t = line_search(&y, &dy, two_norm(&r), opts, |trial| Some(two_norm(&eval(trial))));
            report.trace.push(TraceRow { stage, iteration: iter, residual: norm, damping: t });
            report.hydraulic.steps.push(scaled_step(&dy, t, |i| if i < n { p_scale } else { q_scale }));
            for (yi, di) in y.iter_mut().zip(&dy) {
                *yi += t * di;
            }
            iter += 1;
        }
    }

    /// Averaged fixed-point sweeps with conductances frozen at the current
    /// flows. Far more robust than Newton from a poor guess; stops once the
    /// residual is small enough for Newton to take over.
    fn fixed_point_hydraulic(&mut self, model: &Model, phi: &DesignVector, y: &mut [f64], scales: &[f64]) {
        for _ in 0..FIXED_POINT_SWEEPS {
            let (mut r, a) = model.hydraulic_frozen(phi, y);
            scale_rows(&mut r, scales);
            if !(inf_norm(&r) > self.options.handover) {
                return;
            }
            let a = scale_matrix(&a, scales);
            let Ok(lu) = LuFactor::factor_cached(&a, &mut self.cache_h) else {
                return;
            };
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let Ok(dy) = lu.solve(&neg) else {
                return;
            };
            for (yi, di) in y.iter_mut().zip(&dy) {
                *yi += 0.5 * di;
            }
        }
    }

    /// Newton iteration on `E(φ, y*, z) = 0`.
    pub fn solve_thermal(
        &mut self,
        model: &Model,
        phi: &DesignVector,
        y: &[f64],
        mut z: Vec<f64>,
        report: &mut SolveReport,
    ) -> Result<(Vec<f64>, LuFactor), SolveError> {
        let scales = model.thermal_row_scales();
        let (theta_scale, heat_scale) = model.thermal_scales();
        let nt = model.network().n_nodes() + model.network().n_arcs();
        let opts = self.options;
        let stage = Stage::Thermal;
        let eval = |z: &[f64]| -> Option<f64> {
            let mut r = model.thermal_residual(phi, y, z).ok()?;
            scale_rows(&mut r, &scales);
            let n = two_norm(&r);
            n.is_finite().then_some(n)
        };
        let mut iter = 0;
        loop {
            let sys = model.thermal_system(phi, y, &z, ThermalParts { dz: true, ..Default::default() })?;
            let mut r = sys.residual;
            scale_rows(&mut r, &scales);
            let norm = inf_norm(&r);
            if !norm.is_finite() {
                return Err(SolveError::NonFinite { stage });
            }
            report.thermal.residuals.push(norm);
            let jac = scale_matrix(&sys.dz.expect("jacobian"), &scales);
            let lu = LuFactor::factor_cached(&jac, &mut self.cache_t).map_err(|e| singular(model, stage, &jac, e))?;
            if norm <= opts.tol_t {
                report.thermal.converged = true;
                report.thermal.iterations = iter;
                report.trace.push(TraceRow { stage, iteration: iter, residual: norm, damping: 0.0 });
                return Ok((z, lu));
            }
            if iter >= opts.max_iter {
                report.thermal.iterations = iter;
                return Err(SolveError::NonConvergence { stage, iterations: iter, residual: norm });
            }
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let dz = lu.solve(&neg).map_err(|e| singular(model, stage, &jac, e))?;
            let t = line_search(&z, &dz, two_norm(&r), opts, eval);
            if t == 0.0 {
                // no step stays inside the radiator domain
                let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + opts.min_step * b).collect();
                model.thermal_residual(phi, y, &trial)?;
                return Err(SolveError::NonConvergence { stage, iterations: iter, residual: norm });
            }
            report.trace.push(TraceRow { stage, iteration: iter, residual: norm, damping: t });
            report.thermal.steps.push(scaled_step(&dz, t, |i| if i < nt { theta_scale } else { heat_scale }));
            for (zi, di) in z.iter_mut().zip(&dz) {
                *zi += t * di;
            }
            iter += 1;
        }
    }

    /// Newton on the full block-triangular system `c(φ, y, z) = 0` at once.
    pub fn solve_monolithic(
        &mut self,
        model: &Model,
        phi: &DesignVector,
        y0: Vec<f64>,
        z0: Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>, StageReport), SolveError> {
        let ny = model.n_y();
        let nz = model.n_z();
        let mut scales = model.hydraulic_row_scales();
        scales.extend(model.thermal_row_scales());
        let opts = self.options;
        let stage = Stage::Monolithic;
        let mut x = y0;
        x.extend(z0);
        let eval = |x: &[f64]| -> Option<Vec<f64>> {
            let mut r = model.hydraulic_residual(phi, &x[..ny]);
            r.extend(model.thermal_residual(phi, &x[..ny], &x[ny..]).ok()?);
            scale_rows(&mut r, &scales);
            Some(r)
        };
        let mut rep = StageReport::default();
        let tol = opts.tol_h.min(opts.tol_t);
        for iter in 0..=opts.max_iter {
            let (y, z) = x.split_at(ny);
            let (rh, jh) = model.hydraulic_system(phi, y, true);
            let sys = model.thermal_system(phi, y, z, ThermalParts { dz: true, dy: true, dphi: false })?;
            let mut r = rh;
            r.extend(sys.residual);
            scale_rows(&mut r, &scales);
            let norm = inf_norm(&r);
            if !norm.is_finite() {
                return Err(SolveError::NonFinite { stage });
            }
            rep.residuals.push(norm);
            if norm <= tol {
                rep.converged = true;
                rep.iterations = iter;
                let (y, z) = x.split_at(ny);
                return Ok((y.to_vec(), z.to_vec(), rep));
            }
            let mut jac = Triplets::new(ny + nz, ny + nz);
            for &(i, j, v) in jh.expect("jacobian").entries() {
                jac.push(i, j, v / scales[i]);
            }
            for &(i, j, v) in sys.dy.expect("dy").entries() {
                jac.push(ny + i, j, v / scales[ny + i]);
            }
            for &(i, j, v) in sys.dz.expect("dz").entries() {
                jac.push(ny + i, ny + j, v / scales[ny + i]);
            }
            let lu = LuFactor::factor_cached(&jac, &mut self.cache_m)
                .map_err(|e| SolveError::Singular { stage, block: e.to_string() })?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dx = lu.solve(&neg).map_err(|e| SolveError::Singular { stage, block: e.to_string() })?;
            let t = line_search(&x, &dx, two_norm(&r), opts, |trial| eval(trial).map(|r| two_norm(&r)));
            let t = if t == 0.0 { opts.min_step } else { t };
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += t * di;
            }
            rep.iterations = iter + 1;
        }
        Err(SolveError::NonConvergence {
            stage,
            iterations: opts.max_iter,
            residual: *rep.residuals.last().unwrap_or(&f64::NAN),
        })
    }
}

/// Halving line search on the scaled 2-norm. Returns the accepted step
/// length; `0` if no trial point could be evaluated at all, the smallest
/// step if none decreased the norm.
fn line_search(
    x: &[f64],
    dx: &[f64],
    norm0: f64,
    opts: SolverOptions,
    mut eval: impl FnMut(&[f64]) -> Option<f64>,
) -> f64 {
    let mut t = 1.0;
    let mut any_valid = false;
    let mut trial = vec![0.0; x.len()];
    while t >= opts.min_step {
        for i in 0..x.len() {
            trial[i] = x[i] + t * dx[i];
        }
        if let Some(n) = eval(&trial) {
            any_valid = true;
            if n < norm0 {
                return t;
            }
        }
        t *= opts.backtrack;
    }
    if any_valid {
        t / opts.backtrack
    } else {
        0.0
    }
}

/// Describes which rows/columns make a Jacobian singular.
fn singular(model: &Model, stage: Stage, jac: &Triplets, err: LinearSolveError) -> SolveError {
    let net = model.network();
    let n = net.n_nodes();
    let m = net.n_arcs();
    let name = |i: usize| -> String {
        if i < n {
            format!("node {i}")
        } else if i < n + m {
            format!("arc {} ({:?})", i - n, net.arc(i - n).kind)
        } else {
            format!("consumer {}", i - n - m)
        }
    };
    let rows = jac.empty_rows();
    let cols = jac.empty_cols();
    let block = if !rows.is_empty() || !cols.is_empty() {
        let mut parts = Vec::new();
        if !rows.is_empty() {
            parts.push(format!("empty rows: {}", rows.iter().take(5).map(|&i| name(i)).collect::<Vec<_>>().join(", ")));
        }
        if !cols.is_empty() {
            parts.push(format!(
                "empty columns: {}",
                cols.iter().take(5).map(|&i| name(i)).collect::<Vec<_>>().join(", ")
            ));
        }
        parts.join("; ")
    } else {
        format!("rank deficient ({err})")
    };
    SolveError::Singular { stage, block }
}

/// Flows spread over a spanning forest of the pipes, consumer flows
/// proportional to demand, pressures integrated along the forest.
pub fn initial_hydraulic_guess(model: &Model, phi: &DesignVector) -> Vec<f64> {
    let net = model.network();
    let n = net.n_nodes();
    let m = net.n_arcs();
    let mut q = vec![0.0; m];
    let supply: f64 = phi.q_b.iter().sum();
    let demand: f64 = net.consumers().iter().map(|c| c.q_d).sum();
    for (a, _) in net.arcs().iter().enumerate() {
        match net.role(a) {
            ArcRole::Heating { consumer } => {
                q[a] = supply * net.consumers()[consumer].q_d / demand.max(f64::MIN_POSITIVE);
            }
            ArcRole::Producer { producer } => q[a] = phi.q_b[producer],
            _ => {}
        }
    }
    let mut inj = vec![0.0; n];
    for (a, arc) in net.arcs().iter().enumerate() {
        if arc.kind != ArcKind::Internal {
            inj[arc.to.0] += q[a];
            inj[arc.from.0] -= q[a];
        }
    }
    let (order, parent) = net.pipe_spanning_forest();
    for &v in order.iter().rev() {
        if let Some((a, u)) = parent[v] {
            let arc = net.arc(a);
            q[a] = if arc.from.0 == v { inj[v] } else { -inj[v] };
            inj[u] += inj[v];
        }
    }

    let mut p = vec![0.0; n];
    let mut root = vec![usize::MAX; n];
    for &v in &order {
        match parent[v] {
            None => root[v] = v,
            Some((a, u)) => {
                root[v] = root[u];
                let dp = q[a] / model.arc_conductance(phi, a, q[a]).g;
                p[v] = if net.arc(a).from.0 == u { p[u] - dp } else { p[u] + dp };
            }
        }
    }
    // shift the reference component to p_ref = 0
    let rref = net.reference_node().0;
    let shift = p[rref];
    for v in 0..n {
        if root[v] == root[rref] {
            p[v] -= shift;
        }
    }
    // feed components: match the mean heating-arc pressure drop
    let mut offset: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for (a, arc) in net.arcs().iter().enumerate() {
        if let ArcRole::Heating { consumer } = net.role(a) {
            let spec = &net.consumers()[consumer];
            let s = (q[a] * q[a] + Q_EPS * Q_EPS).sqrt();
            let alpha = phi.alpha[consumer];
            let need = p[arc.to.0] + spec.zeta * s * q[a] / (alpha * alpha) - p[arc.from.0];
            let e = offset.entry(root[arc.from.0]).or_insert((0.0, 0));
            e.0 += need;
            e.1 += 1;
        }
    }
    for v in 0..n {
        if let Some(&(sum, cnt)) = offset.get(&root[v]) {
            if root[v] != root[rref] {
                p[v] += sum / cnt as f64;
            }
        }
    }
    let mut y = p;
    y.extend(q);
    y
}

/// Feed at the mean supply temperature, return 20 K lower, radiator outlets
/// inside the model's domain.
pub fn initial_thermal_guess(model: &Model, y: &[f64]) -> Vec<f64> {
    let net = model.network();
    let n = net.n_nodes();
    let m = net.n_arcs();
    let q = &y[n..];
    let ths = net.producers();
    let feed = ths.iter().map(|p| p.theta_b).sum::<f64>() / ths.len() as f64;
    let house = net.consumers().iter().map(|c| c.theta_house).fold(f64::MIN, f64::max);
    let ret = (feed - 20.0).max(if house.is_finite() { 0.5 * (feed + house) } else { 0.0 });
    let mut z = vec![0.0; n + m + net.consumers().len()];
    for v in 0..n {
        z[v] = match net.side(v) {
            crate::network::Side::Feed => feed,
            crate::network::Side::Return => ret,
        };
    }
    for (a, arc) in net.arcs().iter().enumerate() {
        let up = if q[a] >= 0.0 { z[arc.from.0] } else { z[arc.to.0] };
        z[n + a] = match net.role(a) {
            ArcRole::Producer { producer } => ths[producer].theta_b,
            ArcRole::Heating { consumer } => {
                let spec = &net.consumers()[consumer];
                let (lo, hi) = (spec.theta_house + 0.2 * (up - spec.theta_house), up - 1e-3 * (up - spec.theta_house));
                // an inlet at or below the house temperature has no valid
                // outlet; the solve reports the domain error
                let out = if lo < hi { ret.clamp(lo, hi) } else { up };
                let (mt, _, _) = crate::physics::mean_temperature_difference(
                    up - spec.theta_house,
                    out - spec.theta_house,
                    model.radiator_model(),
                )
                .unwrap_or((0.0, 0.0, 0.0));
                z[n + m + consumer] = spec.xi * mt.powf(spec.n);
                out
            }
            _ => up,
        };
    }
    z
}
