//! Weighted expression trees: the genotype searched by the GP engine.

mod doc;
mod eval;
mod grad;
mod ptc2;

pub use doc::{from_json, from_value, to_json};
pub(crate) use doc::fmt_float;
pub(crate) use eval::apply_node;
pub use eval::{evaluate, evaluate_with_params};
pub use grad::evaluate_with_jacobian;
pub use ptc2::{ptc2, PrimitiveSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::fmt;

/// Maximum number of children of the variadic operators (add, mul).
pub const MAX_ARITY: usize = 4;

/// Node symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Abs,
    Square,
    SqrtAbs,
    Exp,
    Log,
    Log1p,
    Sin,
    Cos,
    Tan,
    Tanh,
    Min,
    Max,
    Constant,
    Var(usize),
}

impl Op {
    /// Every non-terminal symbol, in a fixed order.
    pub const OPERATORS: [Op; 17] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Pow,
        Op::Abs,
        Op::Square,
        Op::SqrtAbs,
        Op::Exp,
        Op::Log,
        Op::Log1p,
        Op::Sin,
        Op::Cos,
        Op::Tan,
        Op::Tanh,
        Op::Min,
        Op::Max,
    ];

    /// Inclusive range of admissible child counts.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Op::Constant | Op::Var(_) => (0, 0),
            Op::Add | Op::Mul => (2, MAX_ARITY),
            Op::Sub | Op::Div | Op::Pow | Op::Min | Op::Max => (2, 2),
            _ => (1, 1),
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Op::Constant | Op::Var(_))
    }

    pub fn is_variadic(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }

    /// Per-symbol complexity weight `c_n`.
    pub fn complexity(self) -> u64 {
        match self {
            Op::Constant => 2,
            Op::Add | Op::Sub | Op::Var(_) => 3,
            Op::Abs | Op::Square | Op::Min | Op::Max | Op::Mul => 4,
            Op::Exp | Op::Log | Op::SqrtAbs | Op::Div | Op::Pow => 5,
            Op::Sin | Op::Cos | Op::Tan | Op::Tanh => 6,
            Op::Log1p => 9,
        }
    }

    /// Document name of the symbol; variables are all called `var`.
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Pow => "pow",
            Op::Abs => "abs",
            Op::Square => "square",
            Op::SqrtAbs => "sqrtabs",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Log1p => "log1p",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tan => "tan",
            Op::Tanh => "tanh",
            Op::Min => "min",
            Op::Max => "max",
            Op::Constant => "const",
            Op::Var(_) => "var",
        }
    }

    /// Inverse of [`Op::name`] for non-variable symbols.
    pub fn from_name(name: &str) -> Option<Op> {
        if name == "const" {
            return Some(Op::Constant);
        }
        Op::OPERATORS.iter().copied().find(|op| op.name() == name)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Var(i) => write!(f, "x{i}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Structural summary of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeMetrics {
    pub size: usize,
    /// Longest root-to-leaf path, in edges.
    pub depth: usize,
    pub complexity: u64,
}

/// One node of an expression tree. The node's output is multiplied by
/// `weight` when it is `Some`; `value` is only meaningful for constants.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<T> {
    pub op: Op,
    pub value: T,
    pub weight: Option<T>,
    pub children: Vec<TreeNode<T>>,
}

impl<T: Scalar> TreeNode<T> {
    pub fn var(index: usize) -> Self {
        Self::leaf(Op::Var(index), T::zero())
    }

    pub fn constant(value: T) -> Self {
        Self::leaf(Op::Constant, value)
    }

    fn leaf(op: Op, value: T) -> Self {
        Self {
            op,
            value,
            weight: None,
            children: Vec::new(),
        }
    }

    /// Builds an operator node, checking the child count against the arity.
    pub fn op(op: Op, children: Vec<TreeNode<T>>) -> Result<Self> {
        let (lo, hi) = op.arity();
        if op.is_terminal() || children.len() < lo || children.len() > hi {
            return Err(Error::Structure(format!(
                "{op} cannot take {} children",
                children.len()
            )));
        }
        Ok(Self {
            op,
            value: T::zero(),
            weight: None,
            children,
        })
    }

    pub fn with_weight(mut self, weight: T) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Node count. Weights do not count as nodes.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| 1 + c.depth())
            .max()
            .unwrap_or(0)
    }

    /// Recursive complexity: leaves return their own weight, operators multiply
    /// their weight by the sum over children. Saturates instead of overflowing.
    pub fn complexity(&self) -> u64 {
        let c = self.op.complexity();
        if self.children.is_empty() {
            return c;
        }
        let sum = self
            .children
            .iter()
            .fold(0u64, |acc, ch| acc.saturating_add(ch.complexity()));
        c.saturating_mul(sum)
    }

    pub fn metrics(&self) -> TreeMetrics {
        TreeMetrics {
            size: self.size(),
            depth: self.depth(),
            complexity: self.complexity(),
        }
    }

    /// Checks arities, variable indices and weight finiteness.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let (lo, hi) = self.op.arity();
        if self.children.len() < lo || self.children.len() > hi {
            return Err(Error::Structure(format!(
                "{} has {} children",
                self.op,
                self.children.len()
            )));
        }
        if let Op::Var(i) = self.op {
            if i >= n_features {
                return Err(Error::Structure(format!(
                    "variable x{i} out of range for {n_features} features"
                )));
            }
        }
        if let Some(w) = self.weight {
            if !w.is_finite() {
                return Err(Error::Structure(format!("non-finite weight on {}", self.op)));
            }
        }
        self.children.iter().try_for_each(|c| c.validate(n_features))
    }

    /// Largest variable index referenced, if any.
    pub fn max_feature(&self) -> Option<usize> {
        let own = match self.op {
            Op::Var(i) => Some(i),
            _ => None,
        };
        self.children
            .iter()
            .filter_map(TreeNode::max_feature)
            .chain(own)
            .max()
    }

    /// Pre-order node references.
    pub fn preorder(&self) -> Vec<&TreeNode<T>> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Depth (in edges from the root) of every node, in pre-order.
    pub fn node_depths(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![(self, 0usize)];
        while let Some((n, d)) = stack.pop() {
            out.push(d);
            stack.extend(n.children.iter().rev().map(|c| (c, d + 1)));
        }
        out
    }

    /// Node at pre-order position `index`.
    pub fn node(&self, index: usize) -> Option<&TreeNode<T>> {
        if index == 0 {
            return Some(self);
        }
        let mut offset = 1;
        for c in &self.children {
            let s = c.size();
            if index < offset + s {
                return c.node(index - offset);
            }
            offset += s;
        }
        None
    }

    pub fn node_mut(&mut self, index: usize) -> Option<&mut TreeNode<T>> {
        if index == 0 {
            return Some(self);
        }
        let mut offset = 1;
        for c in &mut self.children {
            let s = c.size();
            if index < offset + s {
                return c.node_mut(index - offset);
            }
            offset += s;
        }
        None
    }

    /// Replaces the subtree at pre-order `index`, returning the old one.
    pub fn replace(&mut self, index: usize, subtree: TreeNode<T>) -> Option<TreeNode<T>> {
        self.node_mut(index)
            .map(|slot| std::mem::replace(slot, subtree))
    }

    /// Fittable parameters in pre-order: every enabled weight, plus the value of
    /// each constant whose weight is disabled. Each node owns at most one.
    pub fn parameters(&self) -> Vec<T> {
        let mut out = Vec::new();
        for n in self.preorder() {
            if let Some(w) = n.weight {
                out.push(w);
            } else if n.op == Op::Constant {
                out.push(n.value);
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.preorder()
            .iter()
            .filter(|n| n.weight.is_some() || n.op == Op::Constant)
            .count()
    }

    /// Writes parameters back in the order produced by [`TreeNode::parameters`].
    pub fn set_parameters(&mut self, params: &[T]) -> Result<()> {
        let mut it = params.iter().copied();
        self.assign_parameters(&mut it)?;
        if it.next().is_some() {
            return Err(Error::Structure("too many parameters for tree".into()));
        }
        Ok(())
    }

    fn assign_parameters(&mut self, it: &mut impl Iterator<Item = T>) -> Result<()> {
        let missing = || Error::Structure("too few parameters for tree".into());
        if self.weight.is_some() {
            self.weight = Some(it.next().ok_or_else(missing)?);
        } else if self.op == Op::Constant {
            self.value = it.next().ok_or_else(missing)?;
        }
        self.children
            .iter_mut()
            .try_for_each(|c| c.assign_parameters(it))
    }
}

impl<T: Scalar> fmt::Display for TreeNode<T> {
    /// Infix-ish rendering used in logs: `2.5*add(x0, x1)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(w) = self.weight {
            write!(f, "{w}*")?;
        }
        match self.op {
            Op::Constant => write!(f, "{}", self.value),
            Op::Var(i) => write!(f, "x{i}"),
            op => {
                write!(f, "{}(", op.name())?;
                for (i, c) in self.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}
