//! JSON network description and expression-valued data.
//!
//! ```json
//! {
//!   "name": "two planes",
//!   "fractures": [
//!     {
//!       "id": 1,
//!       "origin": [0, 0, 0],
//!       "axes": [[1, 0, 0], [0, 1, 0]],
//!       "vertices": [[-1, 0], [1, 0], [1, 1], [-1, 1]],
//!       "permeability": [[1, 0], [0, 1]],
//!       "dirichlet": [{ "edge": 0, "value": "1 + 2.0 * y" }],
//!       "forcing": "0",
//!       "exact": { "value": "1 + 2.0 * y", "gradient": ["0", "2"] }
//!     }
//!   ]
//! }
//! ```
//!
//! Expressions are evaluated in fracture-local coordinates `x`, `y`; `pi` is
//! predefined. Edges without a Dirichlet entry are no-flow. Integer literals
//! divide as integers, so write `1.0 / 3` rather than `1 / 3`.

use std::path::Path;
use std::sync::Arc;

use evalexpr::{build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};
use serde::{Deserialize, Serialize};

use crate::analysis::{ExactField, ExactSolution, LocalGrad};
use crate::discretization::Problem;
use crate::error::{DfnError, Result};
use crate::geometry::{build_network, BoundaryCondition, Fracture, LocalFn};
use crate::vecmath::{P2, P3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default)]
    pub name: Option<String>,
    pub fractures: Vec<FractureSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractureSpec {
    pub id: usize,
    pub origin: P3,
    pub axes: [P3; 2],
    pub vertices: Vec<P2>,
    #[serde(default = "identity")]
    pub permeability: [[f64; 2]; 2],
    #[serde(default)]
    pub dirichlet: Vec<DirichletSpec>,
    #[serde(default)]
    pub forcing: Option<String>,
    #[serde(default)]
    pub exact: Option<ExactSpec>,
}

fn identity() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 1.0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    pub edge: usize,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSpec {
    pub value: String,
    pub gradient: [String; 2],
}

/// Evaluation context binding `x`, `y` and `pi`.
struct PointContext {
    vars: [Value<DefaultNumericTypes>; 3],
}

impl Context for PointContext {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value<DefaultNumericTypes>> {
        match identifier {
            "x" => Some(&self.vars[0]),
            "y" => Some(&self.vars[1]),
            "pi" => Some(&self.vars[2]),
            _ => None,
        }
    }

    fn call_function(
        &self,
        identifier: &str,
        _argument: &Value<DefaultNumericTypes>,
    ) -> EvalexprResult<Value<DefaultNumericTypes>, DefaultNumericTypes> {
        Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, disabled: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        if disabled {
            Err(EvalexprError::BuiltinFunctionsCannotBeDisabled)
        } else {
            Ok(())
        }
    }
}

/// A compiled scalar expression in `x`, `y`.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    tree: Arc<Node<DefaultNumericTypes>>,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let err = |reason: String| DfnError::Expression { expr: source.to_string(), reason };
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| err(e.to_string()))?;
        if let Some(f) = tree.iter_function_identifiers().find(|f| *f == "random") {
            return Err(err(format!("`{f}` is not deterministic")));
        }
        if let Some(v) = tree.iter_variable_identifiers().find(|v| !matches!(*v, "x" | "y" | "pi")) {
            return Err(err(format!("unknown variable `{v}`")));
        }
        let e = Self { source: source.to_string(), tree: Arc::new(tree) };
        e.try_eval([0.0, 0.0]).map_err(|r| err(r.to_string()))?;
        Ok(e)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, p: P2) -> EvalexprResult<f64, DefaultNumericTypes> {
        let ctx = PointContext { vars: [Value::Float(p[0]), Value::Float(p[1]), Value::Float(std::f64::consts::PI)] };
        self.tree.eval_number_with_context(&ctx)
    }

    /// Evaluates at `p`; a runtime failure (for example a domain error) yields NaN.
    pub fn eval(&self, p: P2) -> f64 {
        self.try_eval(p).unwrap_or(f64::NAN)
    }

    pub fn to_local_fn(&self) -> LocalFn {
        let e = self.clone();
        LocalFn::new(move |p| e.eval(p))
    }
}

pub fn parse_network_file(json: &str) -> Result<NetworkFile> {
    Ok(serde_json::from_str(json)?)
}

/// Builds the problem described by a network file. The exact solution is
/// attached only when every fracture provides one.
pub fn problem_from_file(file: &NetworkFile, default_name: &str) -> Result<Problem> {
    let mut fractures = Vec::with_capacity(file.fractures.len());
    for spec in &file.fractures {
        let n = spec.vertices.len();
        let mut bcs = vec![BoundaryCondition::Neumann; n];
        for d in &spec.dirichlet {
            if d.edge >= n {
                return Err(DfnError::Config(format!(
                    "fracture {}: Dirichlet edge {} out of range for {n} edges",
                    spec.id, d.edge
                )));
            }
            bcs[d.edge] = BoundaryCondition::Dirichlet(Expression::parse(&d.value)?.to_local_fn());
        }
        fractures.push(Fracture::new(spec.id, spec.origin, spec.axes, spec.vertices.clone(), spec.permeability, bcs)?);
    }
    let network = build_network(fractures)?;

    // network order is by id
    let mut specs: Vec<&FractureSpec> = file.fractures.iter().collect();
    specs.sort_by_key(|s| s.id);
    let forcing = specs
        .iter()
        .map(|s| match &s.forcing {
            Some(src) => Ok(Expression::parse(src)?.to_local_fn()),
            None => Ok(LocalFn::constant(0.0)),
        })
        .collect::<Result<Vec<_>>>()?;
    let exact = if specs.iter().all(|s| s.exact.is_some()) {
        let fields = specs
            .iter()
            .map(|s| {
                let e = s.exact.as_ref().expect("checked above");
                let value = Expression::parse(&e.value)?.to_local_fn();
                let gx = Expression::parse(&e.gradient[0])?;
                let gy = Expression::parse(&e.gradient[1])?;
                Ok(ExactField { value, gradient: LocalGrad::new(move |p| [gx.eval(p), gy.eval(p)]) })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(ExactSolution::new(fields))
    } else {
        None
    };
    let name = file.name.clone().unwrap_or_else(|| default_name.to_string());
    Problem::new(name, network, forcing, exact)
}

pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = std::fs::read_to_string(path)?;
    let file = parse_network_file(&text)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
    problem_from_file(&file, stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_evaluate_in_local_coordinates() {
        let e = Expression::parse("1 + 2.0 * y - 0.5 * x").unwrap();
        assert_eq!(e.eval([2.0, 3.0]), 6.0);
        let e = Expression::parse("math::sin(pi * x)").unwrap();
        assert!(e.eval([0.5, 0.0]) - 1.0 < 1e-15);
        assert!(Expression::parse("z + 1").is_err());
        assert!(Expression::parse("1 +").is_err());
        assert!(Expression::parse("random()").is_err());
    }

    #[test]
    fn unlisted_edges_are_no_flow() {
        let json = r#"{
            "fractures": [{
                "id": 4, "origin": [0, 0, 0], "axes": [[1, 0, 0], [0, 1, 0]],
                "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
                "dirichlet": [{ "edge": 2, "value": "x" }]
            }]
        }"#;
        let p = problem_from_file(&parse_network_file(json).unwrap(), "sq").unwrap();
        let bcs = p.network.fracture(0).boundary_conditions();
        assert_eq!(bcs.iter().filter(|b| b.is_dirichlet()).count(), 1);
        assert!(bcs[2].is_dirichlet());
        assert!(p.exact.is_none());
        assert_eq!(p.name, "sq");
    }

    #[test]
    fn bad_edge_index_is_a_config_error() {
        let json = r#"{"fractures": [{"id": 0, "origin": [0,0,0], "axes": [[1,0,0],[0,1,0]],
            "vertices": [[0,0],[1,0],[0,1]], "dirichlet": [{"edge": 3, "value": "0"}]}]}"#;
        let r = problem_from_file(&parse_network_file(json).unwrap(), "t");
        assert!(matches!(r, Err(DfnError::Config(_))));
    }
}
