//! Scalar fields given as arithmetic expressions in `x1, ..., xn`.

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};

#[derive(Debug)]
pub struct Expression {
    tree: Node<DefaultNumericTypes>,
    names: Vec<String>,
}

impl Expression {
    pub fn compile(source: &str, dim: usize) -> Result<Self, String> {
        let tree = build_operator_tree::<DefaultNumericTypes>(source).map_err(|e| e.to_string())?;
        let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        if let Some(unknown) = tree.iter_variable_identifiers().find(|v| !names.iter().any(|n| n == v)) {
            return Err(format!("unknown variable `{unknown}` (expected x1..x{dim})"));
        }
        let e = Self { tree, names };
        e.try_eval(&vec![0.5; dim])?;
        Ok(e)
    }

    fn try_eval(&self, x: &[f64]) -> Result<f64, String> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (name, v) in self.names.iter().zip(x) {
            ctx.set_value(name.clone(), Value::Float(*v)).map_err(|e| e.to_string())?;
        }
        self.tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    }

    /// Value at `x`, `NaN` where the expression fails.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}
