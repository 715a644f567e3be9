use std::fs;
use std::path::PathBuf;

use expode::cli::{run, EXIT_FAILURE, EXIT_INPUT, EXIT_OK};
use expode::problems::semi1;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("expode-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn expode(args: &[&str]) -> i32 {
    run(std::iter::once("expode").chain(args.iter().copied()))
}

fn read_csv(path: &PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_writes_solution_table() {
    let out = scratch("semi1.csv");
    let code = expode(&[
        "run",
        "semi1",
        "--param",
        "N=20",
        "--opt",
        "RelTol=1e-8",
        "--opt",
        "AbsTol=1e-10",
        "--tspan",
        "0,1,11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&out);
    assert_eq!(header.len(), 21);
    assert_eq!(header[0], "t");
    assert_eq!(header[20], "y20");
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][0], 0.0);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 1.0);
    let exact = semi1(20).unwrap().exact(1.0).unwrap();
    let err = (1..=20).map(|i| (last[i] - exact[i - 1]).abs()).fold(0.0, f64::max);
    assert!(err < 1e-6, "final error {err:e}");
}

#[test]
fn exit_codes() {
    let out = scratch("codes.csv");
    let out = out.to_str().unwrap();
    assert_eq!(expode(&["info", "exprb", "MinStep"]), EXIT_OK);
    assert_eq!(expode(&["run", "nonexistent", "--out", out]), EXIT_INPUT);
    assert_eq!(expode(&["run", "semi1", "--opt", "MinStep=-1", "--out", out]), EXIT_INPUT);
    assert_eq!(expode(&["run", "semi1", "--opt", "NoSuchOption=1", "--out", out]), EXIT_INPUT);
    assert_eq!(expode(&["run", "semi1", "--tspan", "0", "--out", out]), EXIT_INPUT);
    assert_eq!(expode(&["frobnicate"]), EXIT_INPUT);
    assert_eq!(expode(&["convergence", "heat1d", "--out", out]), EXIT_INPUT);
    assert_eq!(
        expode(&[
            "run", "semi1", "--opt", "MinStep=0.4", "--opt", "MaxStep=0.4", "--opt", "RelTol=1e-13", "--out", out,
        ]),
        EXIT_FAILURE
    );
}

#[test]
fn options_file_then_overrides() {
    let file = scratch("opts.txt");
    fs::write(&file, "Integrator = exprk\nScheme = krogstad\nStepSize = 0.5\n").unwrap();
    let out = scratch("file.csv");
    let args = |extra: &[&str]| {
        let mut a = vec!["run", "semi1", "--options-file", file.to_str().unwrap(), "--out", out.to_str().unwrap()];
        a.extend_from_slice(extra);
        a.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    };
    let argv = args(&[]);
    assert_eq!(expode(&argv.iter().map(String::as_str).collect::<Vec<_>>()), EXIT_OK);
    assert_eq!(read_csv(&out).1.len(), 3);
    let argv = args(&["--opt", "StepSize=0.25"]);
    assert_eq!(expode(&argv.iter().map(String::as_str).collect::<Vec<_>>()), EXIT_OK);
    assert_eq!(read_csv(&out).1.len(), 5);
}

#[test]
fn convergence_table_and_slope() {
    let out = scratch("conv.csv");
    let code = expode(&[
        "convergence",
        "semi1",
        "--param",
        "N=30",
        "--method",
        "krogstad",
        "--h",
        "1/20,1/40,1/80,1/160",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "integrator,h_or_tol,error,steps,rhs_evals,matfun_evals");
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[0], "krogstad");
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 4);
    assert_eq!(expode::cli::fitted_order(&pts).map(|p| (p - 4.0).abs() < 0.3), Some(true));
    let dat = fs::read_to_string(out.with_extension("dat")).unwrap();
    assert!(dat.starts_with("# krogstad"));
}
