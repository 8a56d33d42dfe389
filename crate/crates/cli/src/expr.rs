//! Custom models from expression strings.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use memdiff_core::CustomModel;

use crate::config::CustomBlock;
use crate::error::CliError;

thread_local! {
    static CONTEXT: RefCell<HashMapContext<DefaultNumericTypes>> = RefCell::new(HashMapContext::new());
}

#[derive(Clone)]
struct Compiled {
    node: Arc<Node<DefaultNumericTypes>>,
    length: f64,
}

impl Compiled {
    fn new(path: &str, src: &str, length: f64, needs_x: bool) -> Result<Self, CliError> {
        let node = build_operator_tree::<DefaultNumericTypes>(src)
            .map_err(|e| CliError::Config { path: path.into(), message: format!("cannot parse expression: {e}") })?;
        let c = Self { node: Arc::new(node), length };
        let probe = if needs_x { c.eval(0.3 * length, 0.2) } else { c.eval_u(0.2) };
        probe.map_err(|m| CliError::Config { path: path.into(), message: m })?;
        Ok(c)
    }

    fn eval(&self, x: f64, u: f64) -> Result<f64, String> {
        CONTEXT.with(|cell| {
            let mut ctx = cell.borrow_mut();
            for (k, v) in [("x", x), ("u", u), ("L", self.length), ("pi", PI)] {
                ctx.set_value(k.into(), Value::Float(v)).map_err(|e| e.to_string())?;
            }
            self.node.eval_number_with_context(&*ctx).map_err(|e| e.to_string())
        })
    }

    fn eval_u(&self, u: f64) -> Result<f64, String> {
        self.eval(0.0, u)
    }
}

/// Compiled expressions for f, g and any supplied derivatives.
pub struct ExprModel {
    f: Compiled,
    g: Compiled,
    f_u: Option<Compiled>,
    f_uu: Option<Compiled>,
    g_u: Option<Compiled>,
    g_uu: Option<Compiled>,
    g_uuu: Option<Compiled>,
}

impl ExprModel {
    pub fn compile(block: &CustomBlock, length: f64) -> Result<Self, CliError> {
        let opt = |path: &str, s: &Option<String>, needs_x: bool| -> Result<Option<Compiled>, CliError> {
            s.as_deref().map(|src| Compiled::new(path, src, length, needs_x)).transpose()
        };
        Ok(Self {
            f: Compiled::new("model.custom.f", &block.f, length, true)?,
            g: Compiled::new("model.custom.g", &block.g, length, false)?,
            f_u: opt("model.custom.f_u", &block.f_u, true)?,
            f_uu: opt("model.custom.f_uu", &block.f_uu, true)?,
            g_u: opt("model.custom.g_u", &block.g_u, false)?,
            g_uu: opt("model.custom.g_uu", &block.g_uu, false)?,
            g_uuu: opt("model.custom.g_uuu", &block.g_uuu, false)?,
        })
    }

    /// Evaluation errors after the compile-time probe yield NaN, which the solvers reject.
    pub fn into_custom(self) -> CustomModel {
        let xu = |c: Compiled| -> Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> {
            Arc::new(move |x, u| c.eval(x, u).unwrap_or(f64::NAN))
        };
        let uo = |c: Compiled| -> Arc<dyn Fn(f64) -> f64 + Send + Sync> { Arc::new(move |u| c.eval_u(u).unwrap_or(f64::NAN)) };
        CustomModel {
            f: xu(self.f),
            f_u: self.f_u.map(xu),
            f_uu: self.f_uu.map(xu),
            g: uo(self.g),
            g_u: self.g_u.map(uo),
            g_uu: self.g_uu.map(uo),
            g_uuu: self.g_uuu.map(uo),
        }
    }
}
