//! SQP with damped BFGS over the reduced problem, the warm start and the
//! outer continuation loop.
//!
//! Design variables are normalized to `[0, 1]` by their box. The QP
//! subproblem has a single linear inequality (the linearized aggregated
//! constraint) besides the box; it is solved by a search over that
//! constraint's multiplier with a box-constrained QP inside.

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use crate::adjoint::{Adjoint, AdjointError};
use crate::design::{
    self, chain_gradient, ks_qoi, mismatch_qoi, objective_qoi, project_design, ContinuationSchedule, CostWeights,
    DesignError, ObjectiveValue, PipeCatalog, StageParams, D_MIN,
};
use crate::physics::{DesignLayout, DesignVector, Model};
use crate::solver::{SolveError, SolverOptions, StateSolution, StateSolver};

#[derive(Debug, Clone, thiserror::Error)]
pub enum OptimizeError {
    #[error("producer capacity {capacity:.0} W is below the total demand {demand:.0} W")]
    InfeasibleScenario { capacity: f64, demand: f64 },
    #[error("state solve failed at the {context}: {source}")]
    State {
        context: String,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Adjoint(#[from] AdjointError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("QP subproblem failed: {0}")]
    Qp(String),
    #[error("continuation stage {stage} failed: {reason}")]
    StageFailed { stage: usize, reason: String, last_good: Box<DesignVector>, history: Vec<HistoryRow> },
}

/// Wall clock of the convergence log. Bare wasm has no clock; times read 0.
#[derive(Debug, Clone, Copy)]
struct Clock(#[cfg(not(target_arch = "wasm32"))] Instant);

impl Clock {
    fn start() -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        return Self(Instant::now());
        #[cfg(target_arch = "wasm32")]
        return Self();
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

/// Box bounds over the flat design vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxConstraints {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Smallest heating valve opening.
pub const ALPHA_MIN: f64 = 0.01;

impl BoxConstraints {
    /// Diameters in `[D_MIN, D_n + w)`, valves in `[ALPHA_MIN, 1]` and
    /// `[0, 1]`, producer inflows in `[0, q_b_max]`.
    pub fn for_model(model: &Model, cat: &PipeCatalog) -> Self {
        let net = model.network();
        let lay = model.layout();
        let d_hi = cat.upper_bound() - 1e-3 * cat.w;
        let mut lo = Vec::with_capacity(lay.len());
        let mut hi = Vec::with_capacity(lay.len());
        lo.extend(std::iter::repeat(D_MIN).take(lay.n_d));
        hi.extend(std::iter::repeat(d_hi).take(lay.n_d));
        lo.extend(std::iter::repeat(ALPHA_MIN).take(lay.n_alpha));
        hi.extend(std::iter::repeat(1.0).take(lay.n_alpha));
        lo.extend(std::iter::repeat(0.0).take(lay.n_beta));
        hi.extend(std::iter::repeat(1.0).take(lay.n_beta));
        for p in net.producers() {
            lo.push(0.0);
            hi.push(p.q_b_max);
        }
        Self { lo, hi }
    }

    /// Fixes entries `[from, to)` at the values of `phi`.
    pub fn freeze(&mut self, phi: &[f64], from: usize, to: usize) {
        for i in from..to {
            self.lo[i] = phi[i];
            self.hi[i] = phi[i];
        }
    }

    pub fn contains(&self, phi: &[f64]) -> bool {
        phi.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| *x >= *l && *x <= *h)
    }

    pub fn clamp(&self, phi: &mut [f64]) {
        for (x, (l, h)) in phi.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerOptions {
    pub step_tol: f64,
    pub kkt_tol: f64,
    /// SQP iterations per continuation stage.
    pub max_iter: usize,
    /// SQP iterations of the warm start.
    pub warm_start_max_iter: usize,
    pub armijo: f64,
    /// Smallest line-search step before the Hessian approximation is reset.
    pub min_step: f64,
    /// The aggregated constraint is enforced as `ĥ_KS + margin ≤ 0`.
    pub ks_margin: f64,
    /// Cap on the constraint multiplier before elastic mode.
    pub mu_cap: f64,
    pub freeze_operations: bool,
    pub weights: CostWeights,
    pub solver: SolverOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-6,
            kkt_tol: 1e-6,
            max_iter: 200,
            warm_start_max_iter: 200,
            armijo: 1e-4,
            min_step: 1e-10,
            ks_margin: 1e-7,
            mu_cap: 1e10,
            freeze_operations: false,
            weights: CostWeights::default(),
            solver: SolverOptions::default(),
        }
    }
}

/// One row of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    /// 0 for the warm start, continuation stages from 1.
    pub stage: usize,
    pub iteration: usize,
    pub objective: f64,
    pub pump: f64,
    pub piping: f64,
    pub h_ks: f64,
    pub step_norm: f64,
    pub adjoint_passes: usize,
    pub wall_time: f64,
}

pub fn history_csv(rows: &[HistoryRow], with_time: bool) -> String {
    let mut s = String::from("stage,iteration,objective,pump,piping,h_ks,step_norm,adjoint_passes");
    s.push_str(if with_time { ",wall_time\n" } else { "\n" });
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.6e},{}",
            r.stage, r.iteration, r.objective, r.pump, r.piping, r.h_ks, r.step_norm, r.adjoint_passes
        ));
        if with_time {
            s.push_str(&format!(",{:.6}", r.wall_time));
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub params: StageParams,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub h_ks: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BfgsOutcome {
    Updated,
    Damped,
    Skipped,
}

/// Damped BFGS update of `b` with step `s` and gradient change `y`.
///
/// When `sᵀy < 0.2 sᵀBs`, `y` is replaced by `θy + (1−θ)Bs` with
/// `θ = 0.8 sᵀBs / (sᵀBs − sᵀy)`, which keeps `b` positive definite.
pub fn bfgs_update(b: &mut Mat<f64>, s: &[f64], y: &[f64]) -> BfgsOutcome {
    let n = s.len();
    let bs: Vec<f64> = (0..n).map(|i| (0..n).map(|j| b[(i, j)] * s[j]).sum()).collect();
    let sbs: f64 = s.iter().zip(&bs).map(|(a, c)| a * c).sum();
    let sy: f64 = s.iter().zip(y).map(|(a, c)| a * c).sum();
    if !(sbs > 0.0) || !sbs.is_finite() || !sy.is_finite() {
        return BfgsOutcome::Skipped;
    }
    let (theta, outcome) =
        if sy >= 0.2 * sbs { (1.0, BfgsOutcome::Updated) } else { (0.8 * sbs / (sbs - sy), BfgsOutcome::Damped) };
    let r: Vec<f64> = y.iter().zip(&bs).map(|(yi, bi)| theta * yi + (1.0 - theta) * bi).collect();
    let sr: f64 = s.iter().zip(&r).map(|(a, c)| a * c).sum();
    if !(sr > 0.0) {
        return BfgsOutcome::Skipped;
    }
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
        }
    }
    outcome
}

fn mat_vec(b: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n).map(|i| (0..n).map(|j| b[(i, j)] * x[j]).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn quad(b: &Mat<f64>, h: &[f64], x: &[f64]) -> f64 {
    0.5 * dot(x, &mat_vec(b, x)) + dot(h, x)
}

/// `min ½xᵀBx + hᵀx` over `l ≤ x ≤ u` for symmetric positive definite `B`.
///
/// Newton steps on the free variables with a projected backtracking search,
/// falling back to a projected gradient step when the Newton arc does not
/// decrease the objective.
pub fn box_qp(b: &Mat<f64>, h: &[f64], l: &[f64], u: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>, OptimizeError> {
    let n = h.len();
    let mut x: Vec<f64> = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    for i in 0..n {
        x[i] = x[i].clamp(l[i], u[i]);
    }
    let scale = 1.0 + inf_norm(h);
    let clamp = |v: &mut Vec<f64>| {
        for i in 0..n {
            v[i] = v[i].clamp(l[i], u[i]);
        }
    };
    for _ in 0..(10 * n + 50) {
        let grad: Vec<f64> = mat_vec(b, &x).iter().zip(h).map(|(a, c)| a + c).collect();
        // projected gradient stationarity
        let pg = (0..n).map(|i| ((x[i] - grad[i]).clamp(l[i], u[i]) - x[i]).abs()).fold(0.0_f64, f64::max);
        if pg <= 1e-13 * scale {
            return Ok(x);
        }
        let free: Vec<usize> = (0..n)
            .filter(|&i| !((x[i] <= l[i] && grad[i] > 0.0) || (x[i] >= u[i] && grad[i] < 0.0)))
            .filter(|&i| l[i] < u[i])
            .collect();
        let q0 = quad(b, h, &x);
        let mut moved = false;
        if !free.is_empty() {
            let k = free.len();
            let bff = Mat::<f64>::from_fn(k, k, |i, j| b[(free[i], free[j])]);
            let mut rhs = Mat::<f64>::from_fn(k, 1, |i, _| -grad[free[i]]);
            // a numerically indefinite block falls through to the gradient step
            let mut t = match bff.llt(Side::Lower) {
                Ok(llt) => {
                    llt.solve_in_place(rhs.as_mut());
                    1.0
                }
                Err(_) => 0.0,
            };
            while t > 1e-12 {
                let mut xt = x.clone();
                for (r, &i) in free.iter().enumerate() {
                    xt[i] += t * rhs[(r, 0)];
                }
                clamp(&mut xt);
                let qt = quad(b, h, &xt);
                let lin: f64 = (0..n).map(|i| grad[i] * (xt[i] - x[i])).sum();
                if qt <= q0 + 1e-4 * lin && qt < q0 {
                    x = xt;
                    moved = true;
                    break;
                }
                if xt == x {
                    break;
                }
                t *= 0.5;
            }
        }
        if !moved {
            let gg = dot(&grad, &grad);
            let gbg = dot(&grad, &mat_vec(b, &grad));
            let mut t = if gbg > 0.0 { gg / gbg } else { 1.0 };
            loop {
                let mut xt: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - t * gi).collect();
                clamp(&mut xt);
                if quad(b, h, &xt) < q0 {
                    x = xt;
                    break;
                }
                t *= 0.5;
                if t < 1e-30 {
                    return Ok(x);
                }
            }
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpStep {
    pub p: Vec<f64>,
    /// Multiplier of the linearized constraint.
    pub mu: f64,
    /// The linearization was infeasible within the box; `p` minimizes the
    /// penalized subproblem at the multiplier cap.
    pub elastic: bool,
    pub active_lower: Vec<usize>,
    pub active_upper: Vec<usize>,
}

/// Solves `min gᵀp + ½pᵀBp` s.t. `c + aᵀp ≤ 0` and `lo ≤ p ≤ hi`.
pub fn sqp_step(
    b: &Mat<f64>,
    g: &[f64],
    constraint: Option<(f64, &[f64])>,
    lo: &[f64],
    hi: &[f64],
    mu_cap: f64,
) -> Result<QpStep, OptimizeError> {
    let finish = |p: Vec<f64>, mu: f64, elastic: bool| {
        let active_lower = (0..p.len()).filter(|&i| p[i] <= lo[i] && lo[i] < hi[i]).collect();
        let active_upper = (0..p.len()).filter(|&i| p[i] >= hi[i] && lo[i] < hi[i]).collect();
        QpStep { p, mu, elastic, active_lower, active_upper }
    };
    let p0 = box_qp(b, g, lo, hi, None)?;
    let Some((c, a)) = constraint else {
        return Ok(finish(p0, 0.0, false));
    };
    let psi_of = |p: &[f64]| c + dot(a, p);
    let psi0 = psi_of(&p0);
    if psi0 <= 0.0 {
        return Ok(finish(p0, 0.0, false));
    }
    let solve_at = |mu: f64, warm: &[f64]| -> Result<Vec<f64>, OptimizeError> {
        let h: Vec<f64> = g.iter().zip(a).map(|(gi, ai)| gi + mu * ai).collect();
        box_qp(b, &h, lo, hi, Some(warm))
    };
    let (mut mu_lo, mut psi_lo, mut p_lo) = (0.0, psi0, p0);
    let mut mu_hi = 1.0;
    let mut p_hi = solve_at(mu_hi, &p_lo)?;
    let mut psi_hi = psi_of(&p_hi);
    while psi_hi > 0.0 {
        if mu_hi >= mu_cap {
            return Ok(finish(p_hi, mu_hi, true));
        }
        mu_lo = mu_hi;
        psi_lo = psi_hi;
        p_lo = p_hi.clone();
        mu_hi = (mu_hi * 10.0).min(mu_cap);
        p_hi = solve_at(mu_hi, &p_lo)?;
        psi_hi = psi_of(&p_hi);
    }
    // Illinois regula falsi on the nonincreasing ψ(μ)
    let tol = 1e-12 * (1.0 + c.abs());
    let mut side = 0;
    for _ in 0..200 {
        if psi_hi.abs() <= tol || (mu_hi - mu_lo) <= 1e-14 * mu_hi {
            break;
        }
        let mut mu = mu_hi - psi_hi * (mu_hi - mu_lo) / (psi_hi - psi_lo);
        if !(mu > mu_lo && mu < mu_hi) {
            mu = 0.5 * (mu_lo + mu_hi);
        }
        let p = solve_at(mu, &p_hi)?;
        let psi = psi_of(&p);
        if psi > 0.0 {
            mu_lo = mu;
            psi_lo = psi;
            if side == -1 {
                psi_hi *= 0.5;
            }
            side = -1;
        } else {
            mu_hi = mu;
            psi_hi = psi;
            p_hi = p;
            if side == 1 {
                psi_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(finish(p_hi, mu_hi, false))
}

/// First-order optimality residual in normalized coordinates.
pub fn kkt_residual(x: &[f64], g: &[f64], constraint: Option<(f64, &[f64])>, mu: f64) -> f64 {
    let mut r = 0.0_f64;
    for i in 0..x.len() {
        let gl = g[i] + constraint.map_or(0.0, |(_, a)| mu * a[i]);
        r = r.max(((x[i] - gl).clamp(0.0, 1.0) - x[i]).abs());
    }
    if let Some((c, _)) = constraint {
        r = r.max((mu * c).abs()).max(c.max(0.0));
    }
    r
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    WarmStart,
    Design(StageParams),
}

struct Cached {
    x: Vec<f64>,
    phi_bar: DesignVector,
    factors: Vec<f64>,
    sol: StateSolution,
    f: f64,
    objective: ObjectiveValue,
    h_ks: f64,
}

/// Reduced-problem evaluator over the normalized free variables.
struct Evaluator<'a> {
    model: &'a Model,
    cat: &'a PipeCatalog,
    weights: CostWeights,
    solver: StateSolver,
    bounds: BoxConstraints,
    free: Vec<usize>,
    base: Vec<f64>,
    layout: DesignLayout,
    mode: Mode,
    f_ref: f64,
    margin: f64,
    warm: Option<(Vec<f64>, Vec<f64>)>,
    cache: Option<Cached>,
    passes: usize,
}

impl<'a> Evaluator<'a> {
    fn new(
        model: &'a Model,
        cat: &'a PipeCatalog,
        bounds: BoxConstraints,
        base: Vec<f64>,
        opts: &OptimizerOptions,
    ) -> Self {
        let free = (0..base.len()).filter(|&i| bounds.lo[i] < bounds.hi[i]).collect();
        Self {
            model,
            cat,
            weights: opts.weights,
            solver: StateSolver::new(opts.solver),
            bounds,
            free,
            base,
            layout: model.layout(),
            mode: Mode::WarmStart,
            f_ref: 1.0,
            margin: opts.ks_margin,
            warm: None,
            cache: None,
            passes: 0,
        }
    }

    fn to_x(&self, phi: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&i| ((phi[i] - self.bounds.lo[i]) / (self.bounds.hi[i] - self.bounds.lo[i])).clamp(0.0, 1.0))
            .collect()
    }

    fn to_phi(&self, x: &[f64]) -> Vec<f64> {
        let mut phi = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            phi[i] = self.bounds.lo[i] + x[k].clamp(0.0, 1.0) * (self.bounds.hi[i] - self.bounds.lo[i]);
        }
        phi
    }

    /// Solves the state at `x`; `Err` if the state solve fails.
    fn value(&mut self, x: &[f64]) -> Result<(f64, Option<f64>), SolveError> {
        let phi = DesignVector::from_flat(self.layout, &self.to_phi(x));
        let (chi, upsilon, omega, gamma) = match self.mode {
            Mode::WarmStart => (0.0, 1.0, 100.0, 5e3),
            Mode::Design(s) => (s.chi, s.upsilon, s.omega, s.gamma),
        };
        let (phi_bar, factors) = match self.mode {
            Mode::WarmStart => (phi.clone(), vec![1.0; phi.d.len()]),
            Mode::Design(_) => project_design(&phi, self.cat, chi)
                .map_err(|e| SolveError::Physics(crate::physics::PhysicsError::Domain(e.to_string())))?,
        };
        let warm = self.warm.as_ref().map(|(y, z)| (y.as_slice(), z.as_slice()));
        let sol = self.solver.solve_state(self.model, &phi_bar, warm)?;
        let (objective, _) = objective_qoi(self.model, &phi_bar, &sol, self.cat, self.weights, upsilon, omega);
        let h_ks = ks_qoi(self.model, &sol, gamma).value;
        let (f, c) = match self.mode {
            Mode::WarmStart => (mismatch_qoi(self.model, &sol).value, None),
            Mode::Design(_) => (objective.total / self.f_ref, Some(h_ks + self.margin)),
        };
        self.cache = Some(Cached { x: x.to_vec(), phi_bar, factors, sol, f, objective, h_ks });
        Ok((f, c))
    }

    fn accept(&mut self) {
        let c = self.cache.as_ref().expect("evaluated point");
        self.warm = Some((c.sol.y.clone(), c.sol.z.clone()));
    }

    /// Gradients of `f` and `c` at the cached point in normalized coordinates.
    fn gradient(&mut self) -> Result<(Vec<f64>, Option<Vec<f64>>), OptimizeError> {
        let c = self.cache.as_ref().expect("evaluated point");
        let adj = Adjoint::new(self.model, &c.phi_bar, &c.sol)?;
        let to_x = |g: &[f64]| -> Vec<f64> {
            self.free.iter().map(|&i| g[i] * (self.bounds.hi[i] - self.bounds.lo[i])).collect()
        };
        let out = match self.mode {
            Mode::WarmStart => {
                let g = adj.gradient(&mismatch_qoi(self.model, &c.sol))?;
                (to_x(&g), None)
            }
            Mode::Design(s) => {
                let (_, jf) = objective_qoi(self.model, &c.phi_bar, &c.sol, self.cat, self.weights, s.upsilon, s.omega);
                let gf = chain_gradient(&adj.gradient(&jf)?, self.layout, &c.factors);
                let jc = ks_qoi(self.model, &c.sol, s.gamma);
                let gc = chain_gradient(&adj.gradient(&jc)?, self.layout, &c.factors);
                let gf: Vec<f64> = to_x(&gf).into_iter().map(|v| v / self.f_ref).collect();
                (gf, Some(to_x(&gc)))
            }
        };
        self.passes += adj.passes();
        Ok(out)
    }
}

struct StageOutcome {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_stage(
    ev: &mut Evaluator,
    x0: Vec<f64>,
    stage: usize,
    max_iter: usize,
    opts: &OptimizerOptions,
    history: &mut Vec<HistoryRow>,
    clock: Clock,
) -> Result<StageOutcome, OptimizeError> {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut c) =
        ev.value(&x).map_err(|source| OptimizeError::State { context: format!("start of stage {stage}"), source })?;
    ev.accept();
    let before = ev.passes;
    let (mut g, mut a) = ev.gradient()?;
    let mut passes = ev.passes - before;
    let lo: Vec<f64> = vec![0.0; n];
    let hi: Vec<f64> = vec![1.0; n];
    let mut b = Mat::<f64>::identity(n, n);
    let mut fresh = true;
    let mut nu = 0.0_f64;
    let record = |ev: &Evaluator, it: usize, step: f64, passes: usize, history: &mut Vec<HistoryRow>| {
        let cached = ev.cache.as_ref().expect("evaluated point");
        let objective = match ev.mode {
            Mode::WarmStart => cached.f,
            Mode::Design(_) => cached.objective.total,
        };
        history.push(HistoryRow {
            stage,
            iteration: it,
            objective,
            pump: cached.objective.pump,
            piping: cached.objective.piping,
            h_ks: cached.h_ks,
            step_norm: step,
            adjoint_passes: passes,
            wall_time: clock.seconds(),
        });
    };
    if n == 0 {
        record(ev, 0, 0.0, passes, history);
        return Ok(StageOutcome { x, iterations: 0, converged: true });
    }
    for it in 0..max_iter {
        let lo_p: Vec<f64> = (0..n).map(|i| lo[i] - x[i]).collect();
        let hi_p: Vec<f64> = (0..n).map(|i| hi[i] - x[i]).collect();
        let cons = c.zip(a.as_deref());
        let qp = match sqp_step(&b, &g, cons, &lo_p, &hi_p, opts.mu_cap) {
            Ok(qp) => qp,
            Err(_) if !fresh => {
                b = Mat::<f64>::identity(n, n);
                fresh = true;
                sqp_step(&b, &g, cons, &lo_p, &hi_p, opts.mu_cap)?
            }
            Err(e) => return Err(e),
        };
        let step = inf_norm(&qp.p);
        let kkt = kkt_residual(&x, &g, cons, qp.mu);
        record(ev, it, step, passes, history);
        if step <= opts.step_tol && kkt <= opts.kkt_tol {
            return Ok(StageOutcome { x, iterations: it, converged: true });
        }
        let viol = c.map_or(0.0, |c| c.max(0.0));
        if c.is_some() {
            nu = nu.max(1.5 * qp.mu + 1e-8);
        }
        let merit0 = f + nu * viol;
        let slope = dot(&g, &qp.p) - nu * viol;
        let mut t = 1.0;
        let mut accepted = None;
        while t >= opts.min_step {
            let xt: Vec<f64> = (0..n).map(|i| (x[i] + t * qp.p[i]).clamp(0.0, 1.0)).collect();
            if let Ok((ft, ct)) = ev.value(&xt) {
                let mt = ft + nu * ct.map_or(0.0, |v| v.max(0.0));
                if mt <= merit0 + opts.armijo * t * slope.min(0.0) && mt.is_finite() {
                    accepted = Some((xt, ft, ct));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, ft, ct)) = accepted else {
            if fresh {
                return Ok(StageOutcome { x, iterations: it + 1, converged: false });
            }
            b = Mat::<f64>::identity(n, n);
            fresh = true;
            // restore the cache to the current point
            ev.value(&x)
                .map_err(|source| OptimizeError::State { context: format!("stage {stage} iterate {it}"), source })?;
            passes = 0;
            continue;
        };
        ev.accept();
        let before = ev.passes;
        let (gn, an) = ev.gradient()?;
        passes = ev.passes - before;
        let s: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
        let lag = |g: &[f64], a: &Option<Vec<f64>>| -> Vec<f64> {
            match a {
                Some(a) => g.iter().zip(a).map(|(gi, ai)| gi + qp.mu * ai).collect(),
                None => g.to_vec(),
            }
        };
        let lg_new = lag(&gn, &an);
        let lg_old = lag(&g, &a);
        let yv: Vec<f64> = lg_new.iter().zip(&lg_old).map(|(p, q)| p - q).collect();
        if fresh {
            let sy = dot(&s, &yv);
            let yy = dot(&yv, &yv);
            if sy > 0.0 && yy > 0.0 {
                b = Mat::<f64>::identity(n, n) * faer::Scale(yy / sy);
            }
            fresh = false;
        }
        bfgs_update(&mut b, &s, &yv);
        x = xt;
        f = ft;
        c = ct;
        g = gn;
        a = an;
    }
    let lo_p: Vec<f64> = (0..n).map(|i| lo[i] - x[i]).collect();
    let hi_p: Vec<f64> = (0..n).map(|i| hi[i] - x[i]).collect();
    let cons = c.zip(a.as_deref());
    let qp = sqp_step(&b, &g, cons, &lo_p, &hi_p, opts.mu_cap)?;
    record(ev, max_iter, inf_norm(&qp.p), passes, history);
    Ok(StageOutcome { x, iterations: max_iter, converged: false })
}

/// Objective, aggregated constraint and their reduced gradients with
/// respect to the flat unprojected design.
#[derive(Debug, Clone)]
pub struct DesignEvaluation {
    pub objective: ObjectiveValue,
    pub h_ks: f64,
    pub grad_objective: Vec<f64>,
    pub grad_ks: Vec<f64>,
    pub adjoint_passes: usize,
    pub projected: DesignVector,
    pub state: StateSolution,
}

/// One state solve and two adjoint passes at `phi` for stage `params`.
pub fn evaluate_design(
    model: &Model,
    phi: &DesignVector,
    cat: &PipeCatalog,
    params: StageParams,
    weights: CostWeights,
    solver: &mut StateSolver,
) -> Result<DesignEvaluation, OptimizeError> {
    let (phi_bar, factors) = project_design(phi, cat, params.chi)?;
    let sol = solver
        .solve_state(model, &phi_bar, None)
        .map_err(|source| OptimizeError::State { context: "design evaluation".into(), source })?;
    let (objective, jf) = objective_qoi(model, &phi_bar, &sol, cat, weights, params.upsilon, params.omega);
    let jc = ks_qoi(model, &sol, params.gamma);
    let lay = model.layout();
    let (grad_objective, grad_ks, adjoint_passes) = {
        let adj = Adjoint::new(model, &phi_bar, &sol)?;
        let gf = chain_gradient(&adj.gradient(&jf)?, lay, &factors);
        let gc = chain_gradient(&adj.gradient(&jc)?, lay, &factors);
        (gf, gc, adj.passes())
    };
    Ok(DesignEvaluation {
        objective,
        h_ks: jc.value,
        grad_objective,
        grad_ks,
        adjoint_passes,
        projected: phi_bar,
        state: sol,
    })
}

/// Result of the operation-parameter warm start.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub design: DesignVector,
    pub state: StateSolution,
    /// Terminal `Σ ((Q − Q_d)/Q_d)²`.
    pub mismatch: f64,
    /// Largest `|Q/Q_d − 1|`.
    pub max_deviation: f64,
    pub history: Vec<HistoryRow>,
    pub converged: bool,
}

impl WarmStart {
    pub fn within_band(&self) -> bool {
        self.max_deviation <= 0.05
    }
}

/// Total heat the producers can deliver over the design return temperature, W.
pub fn producer_capacity(model: &Model) -> f64 {
    let net = model.network();
    let theta_out = net.scenario().t_out_design - net.scenario().t_inf;
    let rcp = model.fluid().rho_cp();
    net.producers().iter().map(|p| rcp * p.q_b_max * (p.theta_b - theta_out).max(0.0)).sum()
}

/// Minimizes the squared relative heat mismatch over α, β and q_b with the
/// diameters of `phi0` fixed.
pub fn warm_start(model: &Model, phi0: &DesignVector, opts: &OptimizerOptions) -> Result<WarmStart, OptimizeError> {
    let demand: f64 = model.network().consumers().iter().map(|c| c.q_d).sum();
    let capacity = producer_capacity(model);
    if capacity < demand {
        return Err(OptimizeError::InfeasibleScenario { capacity, demand });
    }
    let cat = PipeCatalog::default();
    let flat = phi0.flatten();
    let mut bounds = BoxConstraints::for_model(model, &cat);
    let lay = model.layout();
    bounds.freeze(&flat, 0, lay.n_d);
    let mut start = flat.clone();
    bounds.clamp(&mut start);
    let mut ev = Evaluator::new(model, &cat, bounds, start.clone(), opts);
    let x0 = ev.to_x(&start);
    let mut history = Vec::new();
    let out = run_stage(&mut ev, x0, 0, opts.warm_start_max_iter, opts, &mut history, Clock::start())?;
    ev.value(&out.x).map_err(|source| OptimizeError::State { context: "end of warm start".into(), source })?;
    let cached = ev.cache.take().expect("evaluated");
    let heat = cached.sol.heat(model);
    let max_deviation =
        heat.iter().zip(model.network().consumers()).map(|(q, c)| (q / c.q_d - 1.0).abs()).fold(0.0, f64::max);
    Ok(WarmStart {
        design: cached.phi_bar,
        mismatch: cached.f,
        max_deviation,
        state: cached.sol,
        history,
        converged: out.converged,
    })
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Final unprojected design.
    pub design: DesignVector,
    /// Final projected design; its diameters are the installed sizes.
    pub projected: DesignVector,
    pub state: StateSolution,
    pub objective: ObjectiveValue,
    pub h_ks: f64,
    pub history: Vec<HistoryRow>,
    pub stages: Vec<StageSummary>,
    pub adjoint_passes: usize,
}

impl OptimizeResult {
    /// Largest distance of a projected diameter to its nearest catalog value.
    pub fn max_snap_distance(&self, cat: &PipeCatalog) -> f64 {
        self.projected.d.iter().map(|&d| (cat.nearest(d).1 - d).abs()).fold(0.0, f64::max)
    }
}

/// Pump term of the final state plus catalog cost of the nearest catalog
/// size per street, €.
pub fn catalog_objective(
    model: &Model,
    phi_bar: &DesignVector,
    sol: &StateSolution,
    cat: &PipeCatalog,
    weights: CostWeights,
) -> f64 {
    let pump = weights.lambda_p * design::pump_power(model, &sol.y);
    let lengths = design::street_lengths(model.network());
    let piping: f64 = phi_bar.d.iter().zip(&lengths).map(|(&d, l)| cat.costs[cat.nearest(d).0] * l).sum();
    pump + piping
}

/// Continuation loop over the schedule, starting from a warm-started design.
pub fn optimize(
    model: &Model,
    start: &DesignVector,
    cat: &PipeCatalog,
    schedule: &ContinuationSchedule,
    opts: &OptimizerOptions,
) -> Result<OptimizeResult, OptimizeError> {
    cat.validate()?;
    schedule.validate()?;
    let lay = model.layout();
    let mut flat = start.flatten();
    let mut bounds = BoxConstraints::for_model(model, cat);
    bounds.clamp(&mut flat);
    if opts.freeze_operations {
        bounds.freeze(&flat, lay.n_d, lay.len());
    }
    let mut ev = Evaluator::new(model, cat, bounds, flat.clone(), opts);
    let clock = Clock::start();
    let mut history = Vec::new();
    let mut stages = Vec::new();
    let mut x = ev.to_x(&flat);

    // objective reference at the start of the first stage
    ev.mode = Mode::Design(schedule.stages[0]);
    ev.value(&x).map_err(|source| OptimizeError::State { context: "initial design".into(), source })?;
    let f0 = ev.cache.as_ref().expect("evaluated").objective.total;
    ev.f_ref = f0.abs().max(1.0);

    for (k, params) in schedule.stages.iter().enumerate() {
        let stage = k + 1;
        ev.mode = Mode::Design(*params);
        let last_good = DesignVector::from_flat(lay, &ev.to_phi(&x));
        let out = match run_stage(&mut ev, x.clone(), stage, opts.max_iter, opts, &mut history, clock) {
            Ok(out) => out,
            Err(e) => {
                return Err(OptimizeError::StageFailed {
                    stage,
                    reason: e.to_string(),
                    last_good: Box::new(last_good),
                    history,
                })
            }
        };
        x = out.x;
        let last = history.last().expect("stage recorded at least one row");
        stages.push(StageSummary {
            stage,
            params: *params,
            iterations: out.iterations,
            converged: out.converged,
            objective: last.objective,
            h_ks: last.h_ks,
        });
    }
    ev.value(&x).map_err(|source| OptimizeError::State { context: "final design".into(), source })?;
    let cached = ev.cache.take().expect("evaluated");
    Ok(OptimizeResult {
        design: DesignVector::from_flat(lay, &ev.to_phi(&cached.x)),
        projected: cached.phi_bar,
        state: cached.sol,
        objective: cached.objective,
        h_ks: cached.h_ks,
        history,
        stages,
        adjoint_passes: ev.passes,
    })
}
