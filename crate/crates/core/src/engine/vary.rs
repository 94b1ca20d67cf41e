use super::weigh_variables;
use crate::expr::{ptc2, Op, PrimitiveSet, TreeNode};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariationOp {
    /// Swap in a subtree taken from the other parent.
    Crossover,
    /// Enable the weight of a node that has none.
    ToggleOn,
    /// Disable an enabled weight.
    ToggleOff,
    /// Replace a subtree with a fresh PTC2 tree.
    Subtree,
    /// Swap a node's symbol for another of compatible arity.
    Point,
    /// Replace an operator node by one of its children.
    Delete,
    /// Wrap a subtree in a new operator.
    Insert,
}

impl VariationOp {
    pub const ALL: [VariationOp; 7] = [
        VariationOp::Crossover,
        VariationOp::ToggleOn,
        VariationOp::ToggleOff,
        VariationOp::Subtree,
        VariationOp::Point,
        VariationOp::Delete,
        VariationOp::Insert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariationOp::Crossover => "crossover",
            VariationOp::ToggleOn => "toggle_on",
            VariationOp::ToggleOff => "toggle_off",
            VariationOp::Subtree => "subtree",
            VariationOp::Point => "point",
            VariationOp::Delete => "delete",
            VariationOp::Insert => "insert",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name)
    }
}

/// Symbols and shape limits a variation must respect.
#[derive(Debug, Clone, Copy)]
pub struct VariationLimits<'a> {
    pub prims: &'a PrimitiveSet,
    pub max_size: usize,
    pub max_depth: usize,
}

/// Per pre-order node: subtree size, subtree height, depth from the root.
struct Shape {
    size: Vec<usize>,
    height: Vec<usize>,
    depth: Vec<usize>,
}

fn shape<T>(tree: &TreeNode<T>) -> Shape {
    fn go<T>(n: &TreeNode<T>, d: usize, s: &mut Shape) -> (usize, usize) {
        let i = s.size.len();
        s.size.push(0);
        s.height.push(0);
        s.depth.push(d);
        let (mut size, mut height) = (1, 0);
        for c in &n.children {
            let (cs, ch) = go(c, d + 1, s);
            size += cs;
            height = height.max(ch + 1);
        }
        s.size[i] = size;
        s.height[i] = height;
        (size, height)
    }
    let mut s = Shape {
        size: Vec::new(),
        height: Vec::new(),
        depth: Vec::new(),
    };
    go(tree, 0, &mut s);
    s
}

/// PTC2 tree with a target size uniform in `[1, max_size]`, regenerated
/// with a smaller target if it overshoots. Variables get weight 1.
pub(crate) fn random_tree<T: Scalar, R: Rng + ?Sized>(
    prims: &PrimitiveSet,
    max_size: usize,
    max_depth: usize,
    rng: &mut R,
) -> TreeNode<T> {
    let mut target = rng.random_range(1..=max_size.max(1));
    for _ in 0..8 {
        let t = ptc2(target, max_depth, rng, prims).expect("terminal set checked");
        if t.size() <= max_size {
            return weigh_variables(t);
        }
        target = target.saturating_sub(t.size() - max_size).max(1);
    }
    weigh_variables(prims.random_terminal(rng))
}

fn pick<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> Option<usize> {
    (!candidates.is_empty()).then(|| candidates[rng.random_range(0..candidates.len())])
}

/// Applies `op` at a spot chosen among those where it can succeed. Returns
/// `None` when no such spot exists.
pub fn apply_variation<T: Scalar, R: Rng + ?Sized>(
    op: VariationOp,
    tree: &TreeNode<T>,
    other: &TreeNode<T>,
    limits: VariationLimits<'_>,
    rng: &mut R,
) -> Option<TreeNode<T>> {
    let child = match op {
        VariationOp::Crossover => crossover(tree, other, limits, rng),
        VariationOp::ToggleOn => toggle(tree, true, rng),
        VariationOp::ToggleOff => toggle(tree, false, rng),
        VariationOp::Subtree => subtree(tree, limits, rng),
        VariationOp::Point => point(tree, limits, rng),
        VariationOp::Delete => delete(tree, rng),
        VariationOp::Insert => insert(tree, limits, rng),
    }?;
    (child.size() <= limits.max_size && child.depth() <= limits.max_depth).then_some(child)
}

fn crossover<T: Scalar, R: Rng + ?Sized>(
    a: &TreeNode<T>,
    b: &TreeNode<T>,
    limits: VariationLimits<'_>,
    rng: &mut R,
) -> Option<TreeNode<T>> {
    let sa = shape(a);
    let sb = shape(b);
    let total = sa.size[0];
    let mut spots: Vec<usize> = (0..total).filter(|&i| sa.depth[i] < limits.max_depth).collect();
    spots.shuffle(rng);
    for i in spots {
        let rest = total - sa.size[i];
        if rest >= limits.max_size {
            continue;
        }
        let room = limits.max_size - rest;
        let reach = limits.max_depth - sa.depth[i];
        let donors: Vec<usize> = (0..sb.size.len())
            .filter(|&j| sb.size[j] <= room && sb.height[j] <= reach)
            .collect();
        if let Some(j) = pick(&donors, rng) {
            let mut child = a.clone();
            child.replace(i, b.node(j).expect("donor index in range").clone());
            return Some(child);
        }
    }
    None
}

fn toggle<T: Scalar, R: Rng + ?Sized>(tree: &TreeNode<T>, on: bool, rng: &mut R) -> Option<TreeNode<T>> {
    let nodes = tree.preorder();
    let spots: Vec<usize> = (0..nodes.len())
        .filter(|&i| {
            if on {
                // a weight on a constant would duplicate its value
                nodes[i].weight.is_none() && nodes[i].op != Op::Constant
            } else {
                nodes[i].weight.is_some()
            }
        })
        .collect();
    let i = pick(&spots, rng)?;
    let mut child = tree.clone();
    let n = child.node_mut(i).expect("spot in range");
    if on {
        n.weight = Some(T::one());
    } else {
        let w = n.weight.take().expect("weighted spot");
        if n.op == Op::Constant {
            n.value = n.value * w;
        }
    }
    Some(child)
}

fn subtree<T: Scalar, R: Rng + ?Sized>(
    tree: &TreeNode<T>,
    limits: VariationLimits<'_>,
    rng: &mut R,
) -> Option<TreeNode<T>> {
    let s = shape(tree);
    let total = s.size[0];
    let spots: Vec<usize> = (0..total)
        .filter(|&i| total - s.size[i] < limits.max_size && s.depth[i] <= limits.max_depth)
        .collect();
    let i = pick(&spots, rng)?;
    let room = limits.max_size - (total - s.size[i]);
    let fresh = random_tree(limits.prims, room, limits.max_depth - s.depth[i], rng);
    let mut child = tree.clone();
    child.replace(i, fresh);
    Some(child)
}

/// Terminals that differ from `node`: other variables, or a constant in
/// place of a variable.
fn terminal_alternatives<T: Scalar>(node: &TreeNode<T>, prims: &PrimitiveSet) -> Vec<Op> {
    let mut out: Vec<Op> = (0..prims.n_features).map(Op::Var).filter(|&o| o != node.op).collect();
    if prims.constants && node.op != Op::Constant {
        out.push(Op::Constant);
    }
    out
}

fn operator_alternatives<T: Scalar>(node: &TreeNode<T>, prims: &PrimitiveSet) -> Vec<Op> {
    let k = node.children.len();
    prims
        .operators
        .iter()
        .copied()
        .filter(|&o| {
            let (lo, hi) = o.arity();
            o != node.op && lo <= k && k <= hi
        })
        .collect()
}

fn point<T: Scalar, R: Rng + ?Sized>(
    tree: &TreeNode<T>,
    limits: VariationLimits<'_>,
    rng: &mut R,
) -> Option<TreeNode<T>> {
    let nodes = tree.preorder();
    let alternatives = |n: &TreeNode<T>| {
        if n.is_leaf() {
            terminal_alternatives(n, limits.prims)
        } else {
            operator_alternatives(n, limits.prims)
        }
    };
    let spots: Vec<usize> = (0..nodes.len()).filter(|&i| !alternatives(nodes[i]).is_empty()).collect();
    let i = pick(&spots, rng)?;
    let alts = alternatives(nodes[i]);
    let op = alts[rng.random_range(0..alts.len())];
    let mut child = tree.clone();
    let n = child.node_mut(i).expect("spot in range");
    match op {
        Op::Var(_) => {
            n.weight = Some(n.weight.unwrap_or(T::one()));
            n.value = T::zero();
        }
        Op::Constant => {
            n.value = limits.prims.random_constant(rng);
            n.weight = None;
        }
        _ => {}
    }
    n.op = op;
    Some(child)
}

fn delete<T: Scalar, R: Rng + ?Sized>(tree: &TreeNode<T>, rng: &mut R) -> Option<TreeNode<T>> {
    let nodes = tree.preorder();
    let spots: Vec<usize> = (0..nodes.len()).filter(|&i| !nodes[i].is_leaf()).collect();
    let i = pick(&spots, rng)?;
    let kids = &nodes[i].children;
    let keep = kids[rng.random_range(0..kids.len())].clone();
    let mut child = tree.clone();
    child.replace(i, keep);
    Some(child)
}

fn insert<T: Scalar, R: Rng + ?Sized>(
    tree: &TreeNode<T>,
    limits: VariationLimits<'_>,
    rng: &mut R,
) -> Option<TreeNode<T>> {
    let s = shape(tree);
    let total = s.size[0];
    // smallest arity among the available operators decides feasibility
    let min_arity = limits.prims.operators.iter().map(|o| o.arity().0).min()?;
    let extra = min_arity.max(1);
    let spots: Vec<usize> = (0..total)
        .filter(|&i| total + extra <= limits.max_size && s.depth[i] + s.height[i] < limits.max_depth)
        .collect();
    let i = pick(&spots, rng)?;
    let room = limits.max_size - total;
    let ops: Vec<Op> = limits
        .prims
        .operators
        .iter()
        .copied()
        .filter(|o| o.arity().0.max(1) <= room)
        .collect();
    let op = ops[rng.random_range(0..ops.len())];
    let arity = op.arity().0.max(1);
    let old = tree.node(i).expect("spot in range").clone();
    let mut children: Vec<TreeNode<T>> = (1..arity)
        .map(|_| weigh_variables(limits.prims.random_terminal(rng)))
        .collect();
    children.insert(rng.random_range(0..arity), old);
    let mut child = tree.clone();
    child.replace(i, TreeNode::op(op, children).expect("arity respected"));
    Some(child)
}
