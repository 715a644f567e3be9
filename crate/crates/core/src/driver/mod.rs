//! The integration loop.
//!
//! [`integrate`] validates the options, resolves callback options against
//! the problem, drives the matrix-function evaluator through its lifecycle,
//! controls the step size and assembles the [`Solution`].

mod controller;
mod dense;
pub mod log;

use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

pub use controller::StepController;
pub use dense::{dense_eval, refine_output};

use self::log::{Channel, LogConfig, Logger};
use crate::error::{ExpodeError, MatFunError};
use crate::integrators::{self, DenseKind, History, IntegratorSetup, StepContext};
use crate::matfun::{
    DirectEvaluator, EvaluatorEnv, EvaluatorFactory, KrylovConfig, KrylovEvaluator, MatFunEvaluator,
};
use crate::model::{
    DenseOutput, DenseRecord, JacobianFn, JacobianVFn, LinOp, LinOpFn, LinOpVFn, OdeProblem, ProblemEval,
    RhsFn, RunInfo, Solution, State, StepAttempt,
};
use crate::options::{FunctionHandle, NormValue, NormalizedOptions, OptionsError, OptionsSet};

/// Callback for the `OutputFcn` option: receives `t` and the selected
/// components after every accepted step; returning `true` stops the run.
pub type OutputFcn<S> = Arc<Mutex<dyn FnMut(f64, &[S]) -> bool + Send>>;

/// Wraps an output function as an `OutputFcn` option value.
pub fn output_fcn_handle<S: State>(name: &str, f: impl FnMut(f64, &[S]) -> bool + Send + 'static) -> FunctionHandle {
    let f: OutputFcn<S> = Arc::new(Mutex::new(f));
    FunctionHandle::new(name, f)
}

/// Integrates `problem` with `options`, routing log output per `EXPOKIT_LOG`.
pub fn integrate<S: State>(problem: &OdeProblem<S>, options: &OptionsSet) -> Result<Solution<S>, ExpodeError> {
    let config = LogConfig::from_env().unwrap_or_else(|e| {
        eprintln!("warning: ignoring {}: {e}", log::LOG_ENV);
        LogConfig::new()
    });
    integrate_with_log(problem, options, &config)
}

/// Like [`integrate`] with explicit log routing.
pub fn integrate_with_log<S: State>(
    problem: &OdeProblem<S>,
    options: &OptionsSet,
    log_config: &LogConfig,
) -> Result<Solution<S>, ExpodeError> {
    let opts = options.validate()?;
    check_semantics::<S>(problem, &opts)?;
    let effective = effective_problem(problem, &opts)?;
    let logger = Logger::new(log_config, &enabled_channels(&opts));
    let mut integrator = integrators::build::<S>(&opts)?;
    let setup = integrator.setup();
    let mut evaluator = make_evaluator::<S>(&opts)?;
    let env = EvaluatorEnv {
        dim: effective.dim(),
        dense_available: dense_available(&effective, &setup, &opts),
        abs_tol: opts.num("AbsTol").map_or(1e-6, |a| a.data.iter().copied().fold(f64::INFINITY, f64::min)),
        rel_tol: opts.scalar("RelTol").unwrap_or(1e-3),
        test_index: opts.scalar("KrylovTestIndex").map_or(0, |i| i as usize - 1),
    };
    let caps = match evaluator.init(&env) {
        Ok(caps) => caps,
        Err(e) => {
            evaluator.cleanup();
            return Err(e.into());
        }
    };
    logger.log(Channel::Verbose, || {
        format!(
            "{} on '{}', n = {}, order {}",
            setup.name,
            effective.name(),
            effective.dim(),
            setup.order
        )
    });
    let mut ctx = StepContext::new(
        ProblemEval::new(&effective),
        evaluator,
        caps,
        History::new(setup.multi_step),
        logger,
    );
    ctx.nonautonomous = opts.flag("NonAutonomous");
    ctx.semilin = !setup.semilin && opts.flag("Semilin");
    ctx.prefer_matvec = if setup.semilin {
        opts.flag("LinOpV") || opts.handle("LinOpV").is_some()
    } else {
        opts.flag("JacobianV")
            || opts.handle("JacobianV").is_some()
            || opts.flag("GJacobianV")
            || opts.handle("GJacobianV").is_some()
    };
    let result = integrator
        .start(&mut ctx)
        .and_then(|_| run(&mut *integrator, &mut ctx, &effective, &opts, &setup));
    ctx.sync_counters();
    let description = ctx.matfun.description();
    ctx.matfun.cleanup();
    let mut sol = result?;
    sol.stats.n_rhs_evals = ctx.eval.counters.n_rhs_evals;
    sol.stats.n_g_evals = ctx.eval.counters.n_g_evals;
    sol.stats.n_jac_evals = ctx.eval.counters.n_jac_evals;
    sol.stats.n_linop_evals = ctx.eval.counters.n_linop_evals;
    sol.stats.matfun = ctx.eval.counters.matfun.clone();
    let log = &ctx.log;
    log.log(Channel::Statistics, || format!("Matrix functions evaluated {description}."));
    log.log(Channel::Statistics, || sol.stats.to_string());
    log.log(Channel::MatFunLog, || sol.stats.matfun.to_string());
    if let Some(info) = &mut sol.info {
        info.matfun_description = description;
    }
    Ok(sol)
}

fn semantic(name: &str, message: String) -> ExpodeError {
    OptionsError::Semantic {
        name: name.to_string(),
        message,
    }
    .into()
}

fn check_semantics<S: State>(problem: &OdeProblem<S>, opts: &NormalizedOptions) -> Result<(), ExpodeError> {
    let n = problem.dim();
    if opts.flag("Complex") != S::IS_COMPLEX {
        let msg = if S::IS_COMPLEX {
            "the problem is complex valued; switch Complex on".to_string()
        } else {
            "Complex is on but the problem is real valued".to_string()
        };
        return Err(semantic("Complex", msg));
    }
    if let Some(a) = opts.num("AbsTol") {
        if a.len() != 1 && a.len() != n {
            return Err(semantic(
                "AbsTol",
                format!("has {} entries but the initial value has {n}", a.len()),
            ));
        }
        if a.len() != 1 && opts.flag("NormControl") {
            return Err(semantic("AbsTol", "must be a scalar when NormControl is on".into()));
        }
    }
    if let Some(i) = opts.scalar("KrylovTestIndex") {
        if i as usize > n {
            return Err(semantic(
                "KrylovTestIndex",
                format!("index {i} exceeds the problem dimension {n}"),
            ));
        }
    }
    if let Some(sel) = opts.num("OutputSel") {
        if let Some(&bad) = sel.data.iter().find(|&&i| i as usize > n) {
            return Err(semantic("OutputSel", format!("index {bad} exceeds the problem dimension {n}")));
        }
    }
    if let (Some(lo), Some(hi)) = (opts.scalar("MinStep"), opts.scalar("MaxStep")) {
        if lo > hi {
            return Err(semantic("MinStep", format!("{lo} exceeds MaxStep = {hi}")));
        }
    }
    Ok(())
}

fn downcast<'a, T: 'static>(h: &'a FunctionHandle, option: &str) -> Result<&'a T, ExpodeError> {
    h.downcast_ref::<T>().ok_or_else(|| {
        semantic(
            option,
            format!("function handle '{}' has the wrong signature for this option", h.name()),
        )
    })
}

/// The problem with callback-valued options substituted.
fn effective_problem<S: State>(problem: &OdeProblem<S>, opts: &NormalizedOptions) -> Result<OdeProblem<S>, ExpodeError> {
    let mut p = problem.clone();
    let off = |name: &str| opts.index(name) == Some(0);
    if let Some(h) = opts.handle("GFcn") {
        p.g_fcn = Some(downcast::<RhsFn<S>>(h, "GFcn")?.clone());
    }
    if opts.integrator().is_semilinear() {
        match opts.get("LinOp") {
            Some(NormValue::Handle(h)) => {
                p.lin_op = Some(LinOp::Fn(downcast::<LinOpFn<S>>(h, "LinOp")?.clone()));
            }
            Some(NormValue::Num(a)) => {
                let m = DMatrix::from_fn(a.rows, a.cols, |i, j| S::lift(a.data[i + j * a.rows]));
                p.lin_op = Some(LinOp::Matrix(Arc::new(m)));
            }
            _ if off("LinOp") => p.lin_op = None,
            _ => {}
        }
        if let Some(h) = opts.handle("LinOpV") {
            p.lin_op_v = Some(downcast::<LinOpVFn<S>>(h, "LinOpV")?.clone());
        }
        if p.lin_op.is_none() && p.lin_op_v.is_none() {
            return Err(ExpodeError::LinOpUnavailable);
        }
        if let (Some(LinOp::Matrix(a)), n) = (&p.lin_op, p.dim()) {
            if a.nrows() != n || a.ncols() != n {
                return Err(semantic("LinOp", format!("matrix is {}x{}, expected {n}x{n}", a.nrows(), a.ncols())));
            }
        }
    } else {
        if let Some(h) = opts.handle("Jacobian") {
            p.jacobian = Some(downcast::<JacobianFn<S>>(h, "Jacobian")?.clone());
        } else if off("Jacobian") {
            p.jacobian = None;
        }
        if let Some(h) = opts.handle("JacobianV") {
            p.jacobian_v = Some(downcast::<JacobianVFn<S>>(h, "JacobianV")?.clone());
        }
        if let Some(h) = opts.handle("GJacobian") {
            p.g_jacobian = Some(downcast::<JacobianFn<S>>(h, "GJacobian")?.clone());
        } else if off("GJacobian") {
            p.g_jacobian = None;
        }
        if let Some(h) = opts.handle("GJacobianV") {
            p.g_jacobian_v = Some(downcast::<JacobianVFn<S>>(h, "GJacobianV")?.clone());
        }
        if opts.flag("Semilin") && p.lin_op.is_none() && p.lin_op_v.is_none() {
            return Err(ExpodeError::LinOpUnavailable);
        }
    }
    Ok(p)
}

fn dense_available<S: State>(p: &OdeProblem<S>, setup: &IntegratorSetup, opts: &NormalizedOptions) -> bool {
    if setup.semilin || opts.flag("Semilin") {
        p.lin_op.is_some()
    } else {
        p.jacobian.is_some() || p.jacobian_v.is_some() || p.fd_jacobian
    }
}

fn enabled_channels(opts: &NormalizedOptions) -> Vec<Channel> {
    let mut on = Vec::new();
    if opts.flag("Stats") {
        on.push(Channel::Statistics);
    }
    if opts.flag("StepStats") {
        on.push(Channel::StepLog);
    }
    if opts.flag("JacobianStats") || opts.flag("LinOpStats") {
        on.push(Channel::JacLog);
    }
    if opts.flag("MatrixFunctionStats") {
        on.push(Channel::MatFunLog);
    }
    if opts.flag("Waitbar") {
        on.push(Channel::Status);
    }
    on
}

fn make_evaluator<S: State>(opts: &NormalizedOptions) -> Result<Box<dyn MatFunEvaluator<S>>, ExpodeError> {
    if let Some(h) = opts.handle("MatrixFunctions") {
        let factory = downcast::<EvaluatorFactory<S>>(h, "MatrixFunctions")?;
        return Ok(factory());
    }
    Ok(match opts.index("MatrixFunctions") {
        Some(1) => Box::new(KrylovEvaluator::new(KrylovConfig::default())),
        _ => Box::new(DirectEvaluator::new()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Generator {
    Hermite,
    Exp4,
}

fn generator(opts: &NormalizedOptions, setup: &IntegratorSetup) -> Option<Generator> {
    match opts.list_name("DOGenerator").as_deref() {
        Some("hermite") => Some(Generator::Hermite),
        Some("exp4") if setup.dense == DenseKind::Exp4 => Some(Generator::Exp4),
        _ => None,
    }
}

/// Adjusts a step of size `h` towards a point `to_go` ahead: returns the
/// new size and whether it lands on the point, or `None` to keep `h`. A
/// leftover shorter than `h_min` is absorbed, or split when that would
/// exceed `h_max`.
fn fit_step(h: f64, to_go: f64, h_min: f64, h_max: f64) -> Option<(f64, bool)> {
    if h * (1.0 + 1e-8) >= to_go {
        return Some((to_go, true));
    }
    if to_go - h < h_min {
        return Some(if to_go <= h_max * (1.0 + 1e-8) {
            (to_go, true)
        } else {
            (to_go / 2.0, false)
        });
    }
    None
}

/// Initial step magnitude.
fn initial_step<S: State>(
    ctx: &mut StepContext<'_, S>,
    problem: &OdeProblem<S>,
    opts: &NormalizedOptions,
    setup: &IntegratorSetup,
    duration: f64,
) -> Result<f64, ExpodeError> {
    if let Some(h) = opts.scalar("InitialStep") {
        return Ok(h);
    }
    if setup.constant_step {
        return Ok(duration / 100.0);
    }
    let abs_tol = opts.num("AbsTol").map_or(1e-6, |a| a.data.iter().copied().fold(f64::INFINITY, f64::min));
    let f0 = ctx.current_f(problem.t0(), problem.y0())?;
    let fnorm = f0.iter().map(|x| x.modulus()).fold(0.0, f64::max);
    Ok(1e-2 * duration * (abs_tol / (fnorm + abs_tol)).powf(1.0 / setup.order as f64))
}

fn run<S: State>(
    integrator: &mut dyn integrators::Integrator<S>,
    ctx: &mut StepContext<'_, S>,
    problem: &OdeProblem<S>,
    opts: &NormalizedOptions,
    setup: &IntegratorSetup,
) -> Result<Solution<S>, ExpodeError> {
    let (t0, t_end) = (problem.t0(), problem.t_end());
    let dir = (t_end - t0).signum();
    let duration = (t_end - t0).abs();
    let h_max = opts.scalar("MaxStep").unwrap_or(duration);
    let h_min = opts.scalar("MinStep").unwrap_or(16.0 * f64::EPSILON * duration);
    let mut ctrl = StepController::new(
        opts.scalar("RelTol").unwrap_or(1e-3),
        opts.num("AbsTol").map_or(vec![1e-6], |a| a.data.clone()),
        h_min,
        h_max,
        setup.error_order,
    );
    ctrl.norm_control = opts.flag("NormControl");
    ctrl.h_constant = opts.flag("hConstant") || !setup.error_estimate;
    let multistep = setup.multi_step > 1;
    let gen = generator(opts, setup);
    let refine = opts.scalar("Refine").map_or(1, |r| r as usize);
    let output_times = problem.output_times().map(<[f64]>::to_vec);
    if gen.is_none() && refine > 1 && output_times.is_none() {
        return Err(ExpodeError::DenseUnavailable("Refine > 1 needs a dense output generator"));
    }
    if gen.is_none() && multistep && output_times.is_some() {
        return Err(ExpodeError::DenseUnavailable(
            "multistep integrators cannot step onto output times; set DOGenerator to hermite",
        ));
    }
    // one-step methods without dense output step onto the requested times
    let stops: Vec<f64> = match (&output_times, gen) {
        (Some(ts), None) => ts[1..].to_vec(),
        _ => Vec::new(),
    };

    let mut h = initial_step(ctx, problem, opts, setup, duration)?;
    if !setup.constant_step || !ctrl.h_constant {
        h = h.clamp(h_min, h_max);
    }
    h = h.min(duration);
    if multistep {
        let n = (duration / h - 1e-9).ceil().max(1.0);
        h = duration / n;
    }

    let output_sel: Option<Vec<usize>> = opts.num("OutputSel").map(|a| a.data.iter().map(|&i| i as usize - 1).collect());
    let output_fcn = match opts.handle("OutputFcn") {
        Some(hd) => Some(downcast::<OutputFcn<S>>(hd, "OutputFcn")?.clone()),
        None => None,
    };
    let keep_info = !opts.flag("ClearInternalData");

    let mut t = t0;
    let mut y = problem.y0().clone();
    ctx.history.push(t, y.clone());
    let mut sol_t = vec![t];
    let mut sol_y = vec![y.clone()];
    let mut dense = gen.map(|_| DenseOutput {
        t: vec![t],
        y: vec![y.clone()],
        records: Vec::new(),
    });
    let mut attempts = Vec::new();
    let mut n_steps = 0;
    let mut n_rejected = 0;
    let mut reuse = false;
    let mut next_stop = 0;
    let mut stopped = false;
    let mut progress = 0;

    while (t_end - t) * dir > 0.0 {
        let mut hs = h;
        let mut target = None;
        if let Some((h_fit, hit)) = fit_step(hs, (t_end - t).abs(), h_min, h_max) {
            hs = h_fit;
            target = hit.then_some(t_end);
        }
        if let Some(&stop) = stops.get(next_stop) {
            if let Some((h_fit, hit)) = fit_step(hs, (stop - t).abs(), h_min, h_max) {
                hs = h_fit;
                target = hit.then_some(stop);
            }
        }
        let result = integrator.step(ctx, t, &y, dir * hs, reuse);
        let res = match result {
            Err(ExpodeError::MatFun(e @ MatFunError::ReduceStep { .. })) if !multistep => {
                attempts.push(StepAttempt {
                    t,
                    h: dir * hs,
                    accepted: false,
                    err_norm: f64::INFINITY,
                    reuse,
                });
                n_rejected += 1;
                ctx.log.log(Channel::Warning, || format!("{e}; retrying with h = {:e}", hs / 2.0));
                h = hs / 2.0;
                if h < h_min {
                    return Err(ExpodeError::StepUnderflow { t, h, h_min });
                }
                reuse = true;
                continue;
            }
            other => other?,
        };
        let err_norm = match &res.err {
            Some(e) if setup.error_estimate => ctrl.error_norm(e, &y, &res.y_new),
            _ => 0.0,
        };
        let (accept, h_next) = if ctrl.h_constant {
            (true, h)
        } else {
            ctrl.propose(hs, err_norm)
        };
        ctx.log.log(Channel::StepLog, || {
            format!(
                "t = {t:.6e}  h = {:.6e}  err = {err_norm:.3e}  {}",
                dir * hs,
                if accept { "accepted" } else { "rejected" }
            )
        });
        attempts.push(StepAttempt {
            t,
            h: dir * hs,
            accepted: accept,
            err_norm,
            reuse,
        });
        if !accept {
            n_rejected += 1;
            if hs <= h_min * (1.0 + 1e-12) {
                return Err(ExpodeError::StepUnderflow {
                    t,
                    h: hs * (0.9 * err_norm.powf(-1.0 / setup.error_order as f64)),
                    h_min,
                });
            }
            h = h_next;
            reuse = true;
            continue;
        }
        n_steps += 1;
        let t_new = target.unwrap_or(t + dir * hs);
        let y_old = std::mem::replace(&mut y, res.y_new);
        ctx.history.push(t_new, y.clone());
        if let (Some(d), Some(g)) = (&mut dense, gen) {
            let record = match g {
                Generator::Hermite => {
                    let f0 = match ctx.history.get(1).and_then(|e| e.f.clone()) {
                        Some(f) => f,
                        None => ctx.eval.eval_rhs(t, &y_old)?,
                    };
                    let f1 = ctx.current_f(t_new, &y)?;
                    DenseRecord::Hermite { f0, f1 }
                }
                Generator::Exp4 => DenseRecord::Exp4 {
                    vectors: res.dense.clone().ok_or(ExpodeError::DenseUnavailable("integrator produced no stage vectors"))?,
                },
            };
            d.t.push(t_new);
            d.y.push(y.clone());
            d.records.push(record);
        }
        t = t_new;
        if output_times.is_none() || (gen.is_none() && target.is_some_and(|s| stops.get(next_stop) == Some(&s))) {
            sol_t.push(t);
            sol_y.push(y.clone());
        }
        if target.is_some_and(|s| stops.get(next_stop) == Some(&s)) {
            next_stop += 1;
        }
        if let Some(f) = &output_fcn {
            let sel: Vec<S> = match &output_sel {
                Some(idx) => idx.iter().map(|&i| y[i]).collect(),
                None => y.iter().copied().collect(),
            };
            let mut f = f.lock().map_err(|_| semantic("OutputFcn", "output function panicked".into()))?;
            if f(t, &sel) {
                stopped = true;
                break;
            }
        }
        let pct = (((t - t0).abs() / duration) * 10.0).floor() as usize;
        if pct > progress {
            progress = pct;
            ctx.log.log(Channel::Status, || format!("{}% done, t = {t:.6e}", pct * 10));
        }
        if !ctrl.h_constant || setup.constant_step {
            h = h_next;
        }
        reuse = false;
    }

    if let (Some(ts), Some(d)) = (&output_times, &dense) {
        sol_t.clear();
        sol_y.clear();
        for &s in ts {
            if stopped && (s - t) * dir > 0.0 {
                break;
            }
            sol_t.push(s);
            sol_y.push(d.eval(s)?.0);
        }
    }
    let mut sol = Solution {
        t: sol_t,
        y: sol_y,
        stats: Default::default(),
        dense,
        info: None,
        stopped,
    };
    sol.stats.n_steps = n_steps;
    sol.stats.n_rejected = n_rejected;
    if refine > 1 && output_times.is_none() {
        sol = refine_output(&sol, refine)?;
    }
    if keep_info {
        sol.info = Some(RunInfo {
            integrator: setup.name.clone(),
            matfun_description: String::new(),
            order: setup.order,
            error_order: setup.error_order,
            multi_step: setup.multi_step,
            attempts,
            h_min,
            h_max,
        });
    }
    Ok(sol)
}

