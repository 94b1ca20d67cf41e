//! Inexact simplification: subtrees whose predictions land in the same
//! SimHash bucket, close enough to the bucket's indexed vector, are
//! replaced by the smallest tree seen in that bucket.

mod hash;
mod table;

pub use hash::{prediction_angle, HashKey, HashPlane};
pub use table::{init_table, Bucket, SimplificationTable};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::expr::{apply_node, evaluate, Op, TreeNode};
use crate::scalar::{mean, population_variance, Scalar};

/// Below this population variance a prediction vector counts as constant.
pub const ZERO_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Traversal {
    /// Children first; parents are re-evaluated after a child is replaced.
    #[default]
    BottomUp,
    /// Root first; a replaced subtree is not descended into.
    TopDown,
}

impl Traversal {
    pub fn name(self) -> &'static str {
        match self {
            Traversal::BottomUp => "bottom-up",
            Traversal::TopDown => "top-down",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Traversal::BottomUp, Traversal::TopDown]
            .into_iter()
            .find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplifyConfig {
    pub enabled: bool,
    /// Largest accepted Euclidean distance to the bucket's indexed vector.
    pub tolerance: f64,
    pub traversal: Traversal,
    /// Subtrees larger than this are not hashed (their parts still are).
    pub max_subtree_size: Option<usize>,
    pub hash_bits: usize,
    /// Seed of the projection plane.
    pub plane_seed: u64,
    /// Measure distance to every vector indexed in the bucket rather than
    /// only the first.
    pub scan_all_members: bool,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            tolerance: 0.01,
            traversal: Traversal::BottomUp,
            max_subtree_size: None,
            hash_bits: 256,
            plane_seed: 0,
            scan_all_members: false,
        }
    }
}

impl SimplifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("simplification tolerance must be non-negative"));
        }
        if self.hash_bits == 0 {
            return Err(Error::config("hash_bits must be positive"));
        }
        Ok(())
    }
}

/// One accepted replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    /// Pre-order index of the replaced node in the tree as it was passed in.
    pub node: usize,
    pub pre_size: usize,
    pub post_size: usize,
    pub distance: f64,
    /// Angle between the subtree's predictions and its replacement's, or
    /// `None` when either is the zero vector.
    pub angle_degrees: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplifyOutcome<T> {
    pub tree: TreeNode<T>,
    pub replacements: Vec<Replacement>,
    /// Nodes examined (hashed or skipped).
    pub visits: usize,
}

/// Simplifies `tree` against `table`, growing the table as it goes.
///
/// Each visited subtree's training predictions are hashed; a constant
/// prediction is replaced by the zero vector first. If the bucket exists and
/// the distance is within tolerance the subtree joins the bucket and is
/// swapped for the bucket's smallest tree when that is strictly smaller. A
/// missing bucket is created with the subtree. Non-finite predictions are
/// skipped.
pub fn hash_simplify<T: Scalar>(
    tree: &TreeNode<T>,
    table: &mut SimplificationTable<T>,
    config: &SimplifyConfig,
    x: &FeatureMatrix<T>,
) -> Result<SimplifyOutcome<T>> {
    tree.validate(x.ncols())?;
    if x.nrows() != table.plane().rows() {
        return Err(Error::data("training rows differ from the hash plane width"));
    }
    let mut state = State {
        table,
        config,
        x,
        replacements: Vec::new(),
        visits: 0,
    };
    let tree = if !config.enabled {
        tree.clone()
    } else {
        match config.traversal {
            Traversal::BottomUp => state.bottom_up(tree.clone(), &mut 0).0,
            Traversal::TopDown => {
                let mut tree = tree.clone();
                let preds = trace(&tree, x);
                state.top_down(&mut tree, &preds, &mut 0);
                tree
            }
        }
    };
    Ok(SimplifyOutcome {
        tree,
        replacements: state.replacements,
        visits: state.visits,
    })
}

/// Predictions of every subtree, in pre-order.
fn trace<T: Scalar>(tree: &TreeNode<T>, x: &FeatureMatrix<T>) -> Vec<Vec<T>> {
    fn go<T: Scalar>(node: &TreeNode<T>, x: &FeatureMatrix<T>, out: &mut Vec<Vec<T>>) -> Vec<T> {
        let slot = out.len();
        out.push(Vec::new());
        let kids: Vec<Vec<T>> = node.children.iter().map(|c| go(c, x, out)).collect();
        let pred = leaf_or_apply(node, &kids, x);
        out[slot] = pred.clone();
        pred
    }
    let mut out = Vec::with_capacity(tree.size());
    go(tree, x, &mut out);
    out
}

fn leaf_or_apply<T: Scalar>(node: &TreeNode<T>, kids: &[Vec<T>], x: &FeatureMatrix<T>) -> Vec<T> {
    match node.op {
        Op::Var(_) => evaluate(node, x).expect("validated before simplification"),
        _ => apply_node(node, kids, x.nrows()),
    }
}

struct State<'a, T: Scalar> {
    table: &'a mut SimplificationTable<T>,
    config: &'a SimplifyConfig,
    x: &'a FeatureMatrix<T>,
    replacements: Vec<Replacement>,
    visits: usize,
}

impl<T: Scalar> State<'_, T> {
    /// Returns the (possibly replaced) node and its predictions. `id` is the
    /// running pre-order counter over the original tree.
    fn bottom_up(&mut self, mut node: TreeNode<T>, id: &mut usize) -> (TreeNode<T>, Vec<T>) {
        let my_id = *id;
        *id += 1;
        let children = std::mem::take(&mut node.children);
        let mut kid_preds = Vec::with_capacity(children.len());
        for c in children {
            let (c, p) = self.bottom_up(c, id);
            node.children.push(c);
            kid_preds.push(p);
        }
        let pred = leaf_or_apply(&node, &kid_preds, self.x);
        match self.visit(&node, &pred, my_id) {
            Some((repl, repl_pred)) => (repl, repl_pred),
            None => (node, pred),
        }
    }

    fn top_down(&mut self, node: &mut TreeNode<T>, preds: &[Vec<T>], id: &mut usize) {
        let my_id = *id;
        let size = node.size();
        if let Some((repl, _)) = self.visit(node, &preds[my_id], my_id) {
            *node = repl;
            *id += size;
            return;
        }
        *id += 1;
        for c in node.children.iter_mut() {
            self.top_down(c, preds, id);
        }
    }

    /// Hashes one subtree; returns its replacement (and predictions) if any.
    fn visit(&mut self, node: &TreeNode<T>, pred: &[T], id: usize) -> Option<(TreeNode<T>, Vec<T>)> {
        self.visits += 1;
        let size = node.size();
        if self.config.max_subtree_size.is_some_and(|cap| size > cap) {
            return None;
        }
        if pred.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let raw: Vec<f64> = pred.iter().map(|v| v.as_f64()).collect();
        let constant = population_variance(&raw) < ZERO_VARIANCE;
        let query = if constant { vec![0.0; raw.len()] } else { raw.clone() };
        let key = self.table.key(&query).ok()?;
        let tol = self.config.tolerance;
        let scan_all = self.config.scan_all_members;
        let distance = match self.table.distance(&key, &query, scan_all) {
            None => {
                self.table.create(key, query, node.clone());
                return None;
            }
            Some(d) => d,
        };
        if !(distance <= tol) {
            return None;
        }
        let smallest = self.table.insert(&key, node.clone(), scan_all.then_some(query));
        if smallest.size() >= size {
            return None;
        }
        let mut repl = smallest;
        if repl.op == Op::Constant && repl.weight.is_none() {
            // The bucket of constant predictions holds a placeholder; give it
            // the value the subtree actually produced.
            repl.value = T::lit(mean(&raw));
        }
        let repl_pred = evaluate(&repl, self.x).expect("bucket trees use valid features");
        let before: Vec<f64> = raw;
        let after: Vec<f64> = repl_pred.iter().map(|v| v.as_f64()).collect();
        debug_assert!(repl.size() < size);
        self.replacements.push(Replacement {
            node: id,
            pre_size: size,
            post_size: repl.size(),
            distance,
            angle_degrees: prediction_angle(&before, &after),
        });
        Some((repl, repl_pred))
    }
}
