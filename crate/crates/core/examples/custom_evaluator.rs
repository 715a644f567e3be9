//! Plugging in a matrix-function evaluator.
//!
//! `Traced` forwards every call to the direct evaluator and prints the
//! protocol: `init`, `register_jobs`, then `init_step` and `evaluate` per
//! step, and `cleanup` at the end.
//!
//!     cargo run --example custom_evaluator

use std::rc::Rc;

use nalgebra::{DMatrix, DVector};

use expode::driver::integrate;
use expode::error::MatFunError;
use expode::matfun::{
    evaluator_handle, DirectEvaluator, EvaluatorCaps, EvaluatorEnv, JobTable, LinearOperator, MatFunEvaluator,
};
use expode::model::MatFunStats;
use expode::problems::minimal_example;

struct Traced {
    inner: DirectEvaluator<f64>,
    evaluations: usize,
}

impl MatFunEvaluator<f64> for Traced {
    fn init(&mut self, env: &EvaluatorEnv) -> Result<EvaluatorCaps, MatFunError> {
        println!("init (n = {})", env.dim);
        self.inner.init(env)
    }

    fn register_jobs(&mut self, jobs: &JobTable) -> Result<(), MatFunError> {
        let flags: Vec<&str> = jobs.flags().collect();
        println!("register_jobs: {} functions, flags {flags:?}", jobs.functions().len());
        self.inner.register_jobs(jobs)
    }

    fn init_step(&mut self, op: Rc<dyn LinearOperator<f64>>, t: f64, y: &DVector<f64>, h: f64) -> Result<(), MatFunError> {
        println!("init_step t = {t:.4} h = {h:.4}");
        self.inner.init_step(op, t, y, h)
    }

    fn evaluate(
        &mut self,
        flag: &str,
        v: &DVector<f64>,
        reusable: bool,
        reuse: bool,
        facs: usize,
    ) -> Result<DMatrix<f64>, MatFunError> {
        self.evaluations += 1;
        println!("  evaluate {flag} (reusable {reusable}, reuse {reuse}, facs {facs})");
        self.inner.evaluate(flag, v, reusable, reuse, facs)
    }

    fn cleanup(&mut self) {
        println!("cleanup after {} evaluations", self.evaluations);
        self.inner.cleanup();
    }

    fn description(&self) -> String {
        format!("by a traced {}", self.inner.description())
    }

    fn statistics(&self) -> MatFunStats {
        self.inner.statistics()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = minimal_example()?;
    let handle = evaluator_handle::<f64>("traced", || {
        Box::new(Traced {
            inner: DirectEvaluator::new(),
            evaluations: 0,
        })
    });
    let options = problem
        .recommended_options()
        .clone()
        .set("Integrator", "expmssemi")?
        .set("kStep", 2)?
        .set("StepSize", 0.25)?
        .set("MatrixFunctions", handle)?;
    let sol = integrate(&problem, &options)?;
    let (t, y) = sol.last();
    println!("y({t}) = [{:.6}, {:.6}]", y[0], y[1]);
    Ok(())
}
