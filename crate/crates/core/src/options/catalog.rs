//! The option catalog: which options exist for which integrator, their
//! types, defaults and help texts.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use super::types::{ListEntry, OptionType};
use super::value::OptionValue;
use super::OptionsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntegratorKind {
    Exprk,
    Exprb,
    Expmssemi,
    Expms,
    Exp4,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 5] = [
        IntegratorKind::Exprk,
        IntegratorKind::Exprb,
        IntegratorKind::Expmssemi,
        IntegratorKind::Expms,
        IntegratorKind::Exp4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::Exprk => "exprk",
            IntegratorKind::Exprb => "exprb",
            IntegratorKind::Expmssemi => "expmssemi",
            IntegratorKind::Expms => "expms",
            IntegratorKind::Exp4 => "exp4",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            IntegratorKind::Exprk => "exponential Runge-Kutta integrator",
            IntegratorKind::Exprb => "exponential Rosenbrock-type integrator",
            IntegratorKind::Expmssemi => "exponential multistep integrator",
            IntegratorKind::Expms => "exponential linearized multistep integrator",
            IntegratorKind::Exp4 => "exponential integrator of order four",
        }
    }

    /// Semilinear integrators work with a fixed linear part A.
    pub fn is_semilinear(self) -> bool {
        matches!(self, IntegratorKind::Exprk | IntegratorKind::Expmssemi)
    }

    /// Constant-step integrators have no step size control.
    pub fn is_constant_step(self) -> bool {
        matches!(
            self,
            IntegratorKind::Exprk | IntegratorKind::Expmssemi | IntegratorKind::Expms
        )
    }

    /// Position in the `Integrator` option's list.
    pub fn list_index(self) -> usize {
        IntegratorKind::ALL.iter().position(|k| *k == self).unwrap()
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntegratorKind {
    type Err = OptionsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IntegratorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| OptionsError::UnknownIntegrator(s.to_string()))
    }
}

/// Description of one option.
#[derive(Debug, Clone)]
pub struct OptionDesc {
    pub name: &'static str,
    pub short: &'static str,
    pub ty: OptionType,
    pub default: OptionValue,
    pub long: &'static str,
    pub see_also: &'static [&'static str],
    /// Name under which the option appears after normalization.
    pub rename_to: Option<&'static str>,
}

impl OptionDesc {
    /// The first line of the info listing.
    pub fn summary_line(&self) -> String {
        format!("{} - {} {}", self.name, self.short, self.ty.render(&self.default))
    }

    pub fn normalized_name(&self) -> &'static str {
        self.rename_to.unwrap_or(self.name)
    }
}

fn desc(
    name: &'static str,
    short: &'static str,
    ty: &str,
    default: OptionValue,
    list: &[ListEntry],
    long: &'static str,
    see_also: &'static [&'static str],
) -> OptionDesc {
    let ty = OptionType::parse(ty, list)
        .unwrap_or_else(|e| panic!("catalog type for {name}: {e}"));
    OptionDesc {
        name,
        short,
        ty,
        default,
        long,
        see_also,
        rename_to: None,
    }
}

fn names(list: &[&str]) -> Vec<ListEntry> {
    list.iter().map(|n| ListEntry::new(n)).collect()
}

fn off() -> OptionValue {
    OptionValue::from("off")
}

fn on() -> OptionValue {
    OptionValue::from("on")
}

fn integrator_option() -> OptionDesc {
    let list: Vec<&str> = IntegratorKind::ALL.iter().map(|k| k.name()).collect();
    desc(
        "Integrator",
        "Integrator to use",
        "list",
        OptionValue::from("exprb"),
        &names(&list),
        "Selects the integrator used when the generic integration routine is \
         called. exprk and expmssemi are semilinear constant step size \
         integrators, expms is a linearized constant step size integrator, \
         exprb and exp4 are linearized integrators with step size control.",
        &[],
    )
}

fn common_options() -> Vec<OptionDesc> {
    vec![
        integrator_option(),
        desc(
            "AbsTol",
            "Absolute error tolerance",
            "positive scalar | positive vector",
            OptionValue::from(1e-6),
            &[],
            "Absolute error tolerance for the error estimator. A vector gives \
             one tolerance per solution component and must have the length of \
             the initial value. Also scales the convergence threshold of the \
             Krylov matrix function evaluator.",
            &["RelTol", "NormControl"],
        ),
        desc(
            "RelTol",
            "Relative error tolerance",
            "positive scalar",
            OptionValue::from(1e-3),
            &[],
            "Relative error tolerance for the error estimator. The error of a \
             component is compared with AbsTol + RelTol * |y|.",
            &["AbsTol", "NormControl"],
        ),
        desc(
            "NormControl",
            "Control the error relative to the solution norm",
            "boolean",
            off(),
            &[],
            "When switched on, the error estimate is measured in the Euclidean \
             norm and compared with AbsTol + RelTol * norm(y) instead of \
             componentwise in the maximum norm.",
            &["AbsTol", "RelTol"],
        ),
        desc(
            "MatrixFunctions",
            "Evaluation method for the matrix functions",
            "list | function_handle",
            OptionValue::from("direct"),
            &names(&["direct", "arnoldi"]),
            "Method used to evaluate products of matrix functions with vectors. \
             'direct' diagonalizes the Jacobian or linear part and is suited \
             for small systems. 'arnoldi' uses a Krylov subspace method and \
             only needs matrix-vector products. A function handle installs a \
             custom evaluator implementing the matrix function protocol.",
            &["KrylovTestIndex", "MatrixFunctionStats"],
        ),
        desc(
            "KrylovTestIndex",
            "Component monitored by the Krylov convergence test",
            "index",
            OptionValue::from(1.0),
            &[],
            "Index of the solution component whose successive Krylov \
             approximations are compared to decide convergence of the Arnoldi \
             iteration.",
            &["MatrixFunctions"],
        ),
        desc(
            "NonAutonomous",
            "The equation depends explicitly on time",
            "boolean",
            off(),
            &[],
            "Switch on for non-autonomous equations. The derivative of the right \
             hand side with respect to t is then evaluated and used by the \
             linearized integrators.",
            &[],
        ),
        desc(
            "Complex",
            "The solution is complex valued",
            "boolean",
            off(),
            &[],
            "Must be switched on when the initial value or the right hand side \
             is complex valued. Error norms then use the complex modulus.",
            &[],
        ),
        desc(
            "Structure",
            "Structure of the Jacobian",
            "matrix | text",
            OptionValue::Empty,
            &[],
            "Describes the structure of the Jacobian. The value is checked but \
             currently not used by the built-in evaluators.",
            &["Jacobian"],
        ),
        desc(
            "GFcn",
            "Function evaluating the nonlinear part g",
            "function_handle",
            OptionValue::Empty,
            &[],
            "Function evaluating the nonlinear part g(t, y) of a semilinear \
             equation y' = A y + g(t, y). Used by the linearized integrators \
             when Semilin is on.",
            &["Semilin", "LinOp"],
        ),
        desc(
            "DOGenerator",
            "Dense output generator",
            "list",
            off(),
            &names(&["off", "hermite"]),
            "Selects the dense output formula used between time steps. \
             'hermite' is a generic cubic Hermite interpolation which is not \
             suitable for stiff problems; use it with care.",
            &["Refine"],
        ),
        desc(
            "Refine",
            "Output refinement factor",
            "index",
            OptionValue::from(1.0),
            &[],
            "Produces Refine - 1 additional output points per time step using \
             the dense output formula. Only applies when the output is given on \
             the time steps chosen by the integrator.",
            &["DOGenerator"],
        ),
        desc(
            "OutputFcn",
            "Function called after each accepted step",
            "function_handle",
            OptionValue::Empty,
            &[],
            "Called after each accepted step with the current time and the \
             solution components selected by OutputSel. Returning true stops \
             the integration.",
            &["OutputSel"],
        ),
        desc(
            "OutputSel",
            "Components passed to the output function",
            "indices",
            OptionValue::Empty,
            &[],
            "Indices (counting from 1) of the solution components passed to \
             OutputFcn and written to output files. Empty selects all \
             components.",
            &["OutputFcn"],
        ),
        desc(
            "Stats",
            "Print integration statistics",
            "boolean",
            off(),
            &[],
            "Prints the number of steps, rejected steps and function \
             evaluations at the end of the integration.",
            &["MatrixFunctionStats"],
        ),
        desc(
            "MatrixFunctionStats",
            "Print matrix function statistics",
            "boolean",
            off(),
            &[],
            "Prints the statistics collected by the matrix function evaluator \
             and routes its log output.",
            &["Stats", "MatrixFunctions"],
        ),
        desc(
            "Waitbar",
            "Show progress",
            "boolean",
            off(),
            &[],
            "Reports the integration progress as text on the status channel.",
            &[],
        ),
        desc(
            "ClearInternalData",
            "Drop internal integration data",
            "boolean",
            on(),
            &[],
            "When switched off, the internal integration data (normalized \
             options, integrator metadata, accepted step grid) is kept in the \
             returned solution for inspection.",
            &[],
        ),
    ]
}

fn semilinear_options() -> Vec<OptionDesc> {
    vec![
        desc(
            "LinOp",
            "Linear part of the equation",
            "matrix | function_handle | boolean",
            on(),
            &[],
            "The linear part A of y' = A y + g(t, y). 'on' uses the linear \
             operator of the problem, a matrix or function handle replaces it.",
            &["LinOpV", "GFcn"],
        ),
        desc(
            "LinOpV",
            "Product of the linear part with a vector",
            "function_handle | boolean",
            off(),
            &[],
            "When switched on, the linear part is only accessed through products \
             A*v. A function handle v -> A*v replaces the problem's product.",
            &["LinOp"],
        ),
        desc(
            "LinOpStats",
            "Log linear operator evaluations",
            "boolean",
            off(),
            &[],
            "Logs every evaluation of the linear operator.",
            &["LinOp"],
        ),
    ]
}

fn linearized_options() -> Vec<OptionDesc> {
    vec![
        desc(
            "Jacobian",
            "Jacobian of the right hand side",
            "function_handle | boolean",
            on(),
            &[],
            "'on' evaluates the Jacobian callback of the problem. A function \
             handle (t, y) -> J replaces it. Explicit Jacobians are required by \
             the direct matrix function evaluator.",
            &["JacobianV", "MatrixFunctions"],
        ),
        desc(
            "JacobianV",
            "Product of the Jacobian with a vector",
            "function_handle | boolean",
            off(),
            &[],
            "When switched on, the Jacobian is only accessed through products \
             J*v, which suffices for the Krylov evaluator. A function handle \
             (t, y, v) -> J*v replaces the problem's product.",
            &["Jacobian"],
        ),
        desc(
            "GJacobian",
            "Jacobian of the nonlinear part",
            "function_handle | boolean",
            on(),
            &[],
            "Jacobian of g for semilinear problems solved with a linearized \
             integrator (Semilin on). The full Jacobian is then A + dg/dy.",
            &["GJacobianV", "Semilin"],
        ),
        desc(
            "GJacobianV",
            "Product of the Jacobian of g with a vector",
            "function_handle | boolean",
            off(),
            &[],
            "Product of the Jacobian of g with a vector, the analogue of \
             JacobianV for the nonlinear part.",
            &["GJacobian", "Semilin"],
        ),
        desc(
            "Semilin",
            "Treat the equation as semilinear",
            "boolean",
            off(),
            &[],
            "Declares y' = A y + g(t, y). The Jacobian is assembled from the \
             linear part and the Jacobian of g, and GFcn supplies g.",
            &["GFcn", "GJacobian", "LinOp"],
        ),
        desc(
            "JacobianStats",
            "Log Jacobian evaluations",
            "boolean",
            off(),
            &[],
            "Logs every evaluation of the Jacobian on the jacobian channel.",
            &["Jacobian"],
        ),
    ]
}

fn constant_step_options() -> Vec<OptionDesc> {
    let mut step = desc(
        "StepSize",
        "Step size",
        "positive scalar",
        OptionValue::Empty,
        &[],
        "Constant step size. Empty selects one hundredth of the integration \
         interval. The last step is shortened to end exactly at the final time.",
        &[],
    );
    step.rename_to = Some("InitialStep");
    vec![step]
}

fn variable_step_options() -> Vec<OptionDesc> {
    vec![
        desc(
            "hConstant",
            "Disable step size control",
            "boolean",
            off(),
            &[],
            "Keeps the step size fixed at InitialStep; all steps are accepted.",
            &["InitialStep"],
        ),
        desc(
            "InitialStep",
            "Initial step size",
            "positive scalar",
            OptionValue::Empty,
            &[],
            "First step size to try. Empty estimates it from the tolerances and \
             the size of the right hand side at the initial point.",
            &["MaxStep", "MinStep"],
        ),
        desc(
            "MaxStep",
            "Largest allowed step size",
            "positive scalar",
            OptionValue::Empty,
            &[],
            "Upper bound for the step size. Empty selects the length of the \
             integration interval.",
            &["MinStep", "InitialStep"],
        ),
        desc(
            "MinStep",
            "Smallest allowed step size",
            "positive scalar",
            OptionValue::Empty,
            &[],
            "Lower bound for the step size. The integration aborts when the \
             error estimator requires a smaller step. Empty selects sixteen \
             times the machine precision times the interval length.",
            &["MaxStep", "InitialStep"],
        ),
        desc(
            "StepStats",
            "Log every step",
            "boolean",
            off(),
            &[],
            "Logs time, step size and error estimate of every attempted step.",
            &[],
        ),
    ]
}

fn multistep_options() -> Vec<OptionDesc> {
    vec![
        desc(
            "kStep",
            "Number of steps of the multistep scheme",
            "index",
            OptionValue::from(2.0),
            &[],
            "Number of previous points used by the multistep scheme. kStep = 1 \
             gives the one-step exponential Euler type method.",
            &["StartupSteps"],
        ),
        desc(
            "StartupSteps",
            "Substeps per startup step",
            "index",
            OptionValue::from(1.0),
            &[],
            "The first kStep - 1 points are computed with a one-step method of \
             matching order, using this many substeps per step.",
            &["kStep"],
        ),
    ]
}

fn exprk_options() -> Vec<OptionDesc> {
    vec![
        desc(
            "Scheme",
            "Runge-Kutta scheme",
            "list | function_handle",
            OptionValue::from("krogstad"),
            &names(crate::integrators::scheme::BUNDLED_SCHEMES),
            "Exponential Runge-Kutta scheme to use. A function handle receives \
             the Parameters option and returns a user built scheme.",
            &["Parameters"],
        ),
        desc(
            "Parameters",
            "Parameters for the scheme",
            "struct",
            OptionValue::Empty,
            &[],
            "Handed unchanged to a scheme factory given as Scheme. The bundled \
             schemes ignore it.",
            &["Scheme"],
        ),
    ]
}

fn exprb_options() -> Vec<OptionDesc> {
    vec![
        desc(
            "Order",
            "Order of the scheme",
            "list",
            OptionValue::from("43"),
            &[ListEntry::valued("32", 32.0), ListEntry::valued("43", 43.0)],
            "Selects the scheme by its order and the order of its embedded \
             error estimator: '32' is of order three with an embedded second \
             order solution, '43' of order four with an embedded third order \
             solution.",
            &["ErrorEstimate"],
        ),
        desc(
            "ErrorEstimate",
            "Error estimator",
            "list",
            OptionValue::from("embedded"),
            &names(&["embedded", "none"]),
            "'embedded' compares the solution with the embedded lower order \
             solution. 'none' reports a zero error, which is only sensible \
             together with hConstant.",
            &["Order", "hConstant"],
        ),
    ]
}

fn exp4_options() -> Vec<OptionDesc> {
    vec![desc(
        "DOGenerator",
        "Dense output generator",
        "list",
        OptionValue::from("exp4"),
        &names(&["off", "hermite", "exp4"]),
        "exp4 has its own dense output formula built from the eight vectors \
         stored per step; it replaces the generic Hermite interpolation.",
        &["Refine"],
    )]
}

/// The options available to one integrator (or all of them).
#[derive(Debug)]
pub struct Catalog {
    pub integrator: Option<IntegratorKind>,
    options: Vec<OptionDesc>,
    by_name: HashMap<String, usize>,
}

impl Catalog {
    fn build(integrator: Option<IntegratorKind>, groups: Vec<Vec<OptionDesc>>) -> Self {
        let mut options: Vec<OptionDesc> = Vec::new();
        let mut by_name = HashMap::new();
        for desc in groups.into_iter().flatten() {
            let key = desc.name.to_ascii_lowercase();
            match by_name.get(&key) {
                // later groups override earlier ones
                Some(&i) => options[i] = desc,
                None => {
                    by_name.insert(key, options.len());
                    options.push(desc);
                }
            }
        }
        Self {
            integrator,
            options,
            by_name,
        }
    }

    pub fn options(&self) -> &[OptionDesc] {
        &self.options
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<&OptionDesc> {
        self.by_name
            .get(&name.to_ascii_lowercase())
            .map(|&i| &self.options[i])
    }

    pub fn name(&self) -> &'static str {
        self.integrator.map_or("expode", IntegratorKind::name)
    }
}

fn groups_for(kind: IntegratorKind) -> Vec<Vec<OptionDesc>> {
    let mut groups = vec![common_options()];
    groups.push(if kind.is_semilinear() {
        semilinear_options()
    } else {
        linearized_options()
    });
    groups.push(if kind.is_constant_step() {
        constant_step_options()
    } else {
        variable_step_options()
    });
    match kind {
        IntegratorKind::Exprk => groups.push(exprk_options()),
        IntegratorKind::Exprb => groups.push(exprb_options()),
        IntegratorKind::Expmssemi | IntegratorKind::Expms => groups.push(multistep_options()),
        IntegratorKind::Exp4 => groups.push(exp4_options()),
    }
    groups
}

/// Catalog for one integrator.
pub fn catalog(kind: IntegratorKind) -> &'static Catalog {
    static CATALOGS: OnceLock<Vec<Catalog>> = OnceLock::new();
    let all = CATALOGS.get_or_init(|| {
        IntegratorKind::ALL
            .iter()
            .map(|k| Catalog::build(Some(*k), groups_for(*k)))
            .collect()
    });
    &all[kind.list_index()]
}

/// Union of all integrator catalogs, used when the integrator is not known
/// yet. Where integrators disagree the generic (common) description wins.
pub fn generic_catalog() -> &'static Catalog {
    static GENERIC: OnceLock<Catalog> = OnceLock::new();
    GENERIC.get_or_init(|| {
        let groups = vec![
            common_options(),
            semilinear_options(),
            linearized_options(),
            constant_step_options(),
            variable_step_options(),
            exprk_options(),
            exprb_options(),
            multistep_options(),
        ];
        Catalog::build(None, groups)
    })
}

/// Looks up a catalog by integrator name; `"expode"` selects the generic one.
pub fn catalog_by_name(name: &str) -> Result<&'static Catalog, OptionsError> {
    if name.eq_ignore_ascii_case("expode") {
        return Ok(generic_catalog());
    }
    Ok(catalog(name.parse()?))
}
