use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use expode::driver::{dense_eval, integrate, StepController};
use expode::integrators::scheme::{rk_scheme_build, StageEdit};
use expode::model::{OdeProblem, ProblemEval};
use expode::options::{parse_options_file, OptionValue, OptionsSet};
use expode::phi::{inv_factorial, phi, phi_complex};

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(h, e)| (h.ln(), e.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// y₁′ = −y₁², y₂′ = y₁y₂, y₃′ = −y₂y₃ from (1, 1, 1), solved by
/// (1/(1+t), 1+t, exp(−t − t²/2)).
fn nonstiff(t0: f64) -> OdeProblem {
    OdeProblem::builder(t0, t0 + 1.0, DVector::from_vec(vec![1.0, 1.0, 1.0]))
        .name("nonstiff")
        .rhs(|_, y| DVector::from_vec(vec![-y[0] * y[0], y[0] * y[1], -y[1] * y[2]]))
        .jacobian(|_, y| {
            DMatrix::from_row_slice(3, 3, &[-2.0 * y[0], 0.0, 0.0, y[1], y[0], 0.0, 0.0, -y[2], -y[1]])
        })
        .exact(move |t| {
            let s = t - t0;
            DVector::from_vec(vec![1.0 / (1.0 + s), 1.0 + s, (-s - s * s / 2.0).exp()])
        })
        .build()
        .unwrap()
}

fn constant(integrator: &str, h: f64) -> OptionsSet {
    let o = OptionsSet::new().set("Integrator", integrator).unwrap();
    if integrator == "exprk" {
        return o.set("StepSize", h).unwrap();
    }
    o.set("hConstant", "on").and_then(|o| o.set("InitialStep", h)).unwrap()
}

proptest! {
    #[test]
    fn phi_recurrence(k in 0usize..7, z in -60.0f64..8.0) {
        let lhs = phi(k, z).unwrap();
        let rhs = z * phi(k + 1, z).unwrap() + inv_factorial(k);
        let scale = lhs.abs().max(inv_factorial(k)).max((z * phi(k + 1, z).unwrap()).abs());
        prop_assert!((lhs - rhs).abs() <= 1e-13 * scale, "k = {k}, z = {z}: {lhs} vs {rhs}");
    }

    #[test]
    fn phi_complex_extends_real(k in 0usize..6, x in -40.0f64..5.0, y in -20.0f64..20.0) {
        let real = phi_complex(k, Complex64::new(x, 0.0)).unwrap();
        prop_assert!(real.im == 0.0);
        prop_assert!((real.re - phi(k, x).unwrap()).abs() <= 1e-14 * real.re.abs().max(1e-300));
        let z = Complex64::new(x, y);
        let a = phi_complex(k, z).unwrap();
        let b = phi_complex(k, z.conj()).unwrap();
        prop_assert!((a - b.conj()).norm() <= 1e-14 * a.norm().max(1e-300));
    }

    #[test]
    fn error_norm_is_scaled_max(
        rel in 1e-8f64..1e-2,
        abs in 1e-10f64..1e-4,
        data in proptest::collection::vec((-1.0f64..1.0, -5.0f64..5.0, -5.0f64..5.0), 1..8),
        factor in 0.1f64..10.0,
    ) {
        let c = StepController::new(rel, vec![abs], 1e-12, 1.0, 4);
        let e = DVector::from_iterator(data.len(), data.iter().map(|d| d.0 * abs));
        let a = DVector::from_iterator(data.len(), data.iter().map(|d| d.1));
        let b = DVector::from_iterator(data.len(), data.iter().map(|d| d.2));
        let norm = c.error_norm(&e, &a, &b);
        let oracle = (0..data.len())
            .map(|i| e[i].abs() / (abs + rel * a[i].abs().max(b[i].abs())))
            .fold(0.0, f64::max);
        prop_assert!((norm - oracle).abs() <= 1e-14 * oracle.max(1e-300));
        let scaled = c.error_norm(&(&e * factor), &a, &b);
        prop_assert!((scaled - factor * norm).abs() <= 1e-12 * scaled.max(1e-300));
    }

    #[test]
    fn proposals_respect_bounds(h in 1e-6f64..0.5, err in 0.0f64..100.0) {
        let c = StepController::new(1e-6, vec![1e-8], 1e-5, 0.3, 4);
        let (accept, next) = c.propose(h, err);
        prop_assert_eq!(accept, err <= 1.0);
        prop_assert!((1e-5..=0.3).contains(&next));
        if !accept {
            prop_assert!(next <= h.max(1e-5));
        }
    }

    #[test]
    fn scheme_validation_matches_weight_sums(
        rows in proptest::collection::vec(proptest::collection::vec(-3i32..=3, 1..=3), 1..=3),
    ) {
        let edits: Vec<StageEdit> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| StageEdit::B { i: i + 1, row: r.iter().map(|&x| f64::from(x)).collect() })
            .collect();
        let scheme = rk_scheme_build(rows.len(), &edits).unwrap();
        let mut sums = [0i32; 3];
        for r in &rows {
            for (k, x) in r.iter().enumerate() {
                sums[k] += x;
            }
        }
        prop_assert_eq!(scheme.validate().is_ok(), sums == [1, 0, 0]);
    }

    #[test]
    fn fd_jacobian_close_to_exact(y in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let exact = nonstiff(0.0);
        let fd = OdeProblem::builder(0.0, 1.0, DVector::from_vec(vec![1.0, 1.0, 1.0]))
            .rhs(|_, y| DVector::from_vec(vec![-y[0] * y[0], y[0] * y[1], -y[1] * y[2]]))
            .fd_jacobian(true)
            .build()
            .unwrap();
        let y = DVector::from_vec(y);
        let j = ProblemEval::new(&exact).eval_jacobian(0.0, &y).unwrap();
        let j_fd = ProblemEval::new(&fd).eval_jacobian(0.0, &y).unwrap();
        prop_assert!((&j - &j_fd).amax() <= 1e-6 * j.amax().max(1.0), "{j} vs {j_fd}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn autonomous_runs_invariant_under_time_shift(
        shift in -50.0f64..50.0,
        integrator in prop_oneof![Just("exprb"), Just("exp4")],
    ) {
        let run = |t0: f64| {
            let o = constant(integrator, 1.0 / 16.0);
            integrate(&nonstiff(t0), &o).unwrap()
        };
        let a = run(0.0);
        let b = run(shift);
        prop_assert_eq!(a.stats.n_steps, b.stats.n_steps);
        let (_, ya) = a.last();
        let (_, yb) = b.last();
        prop_assert!((ya - yb).amax() <= 1e-11, "{ya} vs {yb}");
    }
}

#[test]
fn exp4_order_four_without_stiffness() {
    let problem = nonstiff(0.0);
    let exact = problem.exact(1.0).unwrap();
    let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|d| {
            let sol = integrate(&problem, &constant("exp4", 1.0 / d)).unwrap();
            (1.0 / d, (sol.last().1 - &exact).amax())
        })
        .collect();
    let p = slope(&pts);
    assert!((p - 4.0).abs() < 0.3, "slope {p}, {pts:?}");
}

#[test]
fn exp4_dense_output_order() {
    let problem = nonstiff(0.0);
    let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0]
        .iter()
        .map(|d| {
            let sol = integrate(&problem, &constant("exp4", 1.0 / d)).unwrap();
            let q: Vec<f64> = sol.t.windows(2).map(|w| w[0] + 0.37 * (w[1] - w[0])).collect();
            let (ys, _) = dense_eval(&sol, &q).unwrap();
            let err = q
                .iter()
                .zip(&ys)
                .map(|(&t, y)| (y - problem.exact(t).unwrap()).amax())
                .fold(0.0, f64::max);
            (1.0 / d, err)
        })
        .collect();
    let p = slope(&pts);
    assert!((p - 3.0).abs() < 0.3, "slope {p}, {pts:?}");
}

#[test]
fn options_file_round_trip() {
    let text = "# comment\nIntegrator = exprb\nRelTol = 1e-5\nAbsTol = [1e-8 1e-9 1e-10]\nNormControl = on\n";
    let mut o = OptionsSet::new();
    for (k, v) in parse_options_file(text).unwrap() {
        o.set_mut(&k, v).unwrap();
    }
    let n = o.validate().unwrap();
    assert_eq!(n.scalar("RelTol"), Some(1e-5));
    assert_eq!(n.num("AbsTol").unwrap().data, vec![1e-8, 1e-9, 1e-10]);
    assert!(n.flag("NormControl"));
    assert!(parse_options_file("RelTol 1e-5").is_err());
}

#[test]
fn unknown_and_ill_typed_options_rejected() {
    let o = OptionsSet::new().set("Integrator", "exprk").unwrap();
    assert!(o.clone().set("RelTolerance", 1e-3).is_err());
    assert!(o.clone().set("StepSize", -0.1).is_err());
    assert!(o.clone().set("Scheme", "nonexistent").is_err());
    assert!(o.set("StepSize", OptionValue::Text("small".into())).is_err());
}
