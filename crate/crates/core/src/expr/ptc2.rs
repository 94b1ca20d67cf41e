use super::{Op, TreeNode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;
use rand_distr::StandardNormal;

/// Symbols available to the tree generator.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSet {
    pub n_features: usize,
    pub operators: Vec<Op>,
    /// Whether the constant leaf is part of the terminal set.
    pub constants: bool,
}

impl PrimitiveSet {
    pub fn new(n_features: usize, operators: Vec<Op>) -> Self {
        Self {
            n_features,
            operators,
            constants: true,
        }
    }

    pub fn terminal_count(&self) -> usize {
        self.n_features + usize::from(self.constants)
    }

    /// A uniformly drawn terminal; constants start from a standard normal draw.
    pub fn random_terminal<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> TreeNode<T> {
        let k = rng.random_range(0..self.terminal_count());
        if k < self.n_features {
            TreeNode::var(k)
        } else {
            TreeNode::constant(self.random_constant(rng))
        }
    }

    /// A fresh constant value, standard normal.
    pub fn random_constant<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::lit(rng.sample::<f64, _>(StandardNormal))
    }

    /// Draws an operator and a child count for it, keeping variadic arity
    /// within `budget` when possible.
    pub fn random_operator<R: Rng + ?Sized>(&self, rng: &mut R, budget: usize) -> (Op, usize) {
        let op = self.operators[rng.random_range(0..self.operators.len())];
        let (lo, hi) = op.arity();
        let hi = hi.min(budget.max(lo));
        (op, rng.random_range(lo..=hi))
    }
}

struct Slot {
    parent: usize,
    position: usize,
    depth: usize,
}

/// Probabilistic tree creation (PTC2). Grows a tree by expanding randomly chosen
/// open child slots until the node count plus open slots reaches `max_size`,
/// then closes every remaining slot with a terminal. Slots at `max_depth`
/// always receive terminals, so depth never exceeds `max_depth`; the size can
/// overshoot `max_size` by at most `MAX_ARITY - 1`.
pub fn ptc2<T: Scalar, R: Rng + ?Sized>(
    max_size: usize,
    max_depth: usize,
    rng: &mut R,
    prims: &PrimitiveSet,
) -> Result<TreeNode<T>> {
    if prims.terminal_count() == 0 {
        return Err(Error::config("empty terminal set"));
    }
    if max_size == 0 {
        return Err(Error::config("max_size must be at least 1"));
    }
    if max_size == 1 || max_depth == 0 || prims.operators.is_empty() {
        return Ok(prims.random_terminal(rng));
    }

    // Arena of partially built nodes; children are filled in later.
    let mut arena: Vec<(TreeNode<T>, Vec<Option<usize>>)> = Vec::new();
    let mut slots: Vec<Slot> = Vec::new();

    let open = |arena: &mut Vec<(TreeNode<T>, Vec<Option<usize>>)>,
                slots: &mut Vec<Slot>,
                op: Op,
                arity: usize,
                depth: usize| {
        let id = arena.len();
        let node = TreeNode {
            op,
            value: T::zero(),
            weight: None,
            children: Vec::new(),
        };
        arena.push((node, vec![None; arity]));
        slots.extend((0..arity).map(|position| Slot {
            parent: id,
            position,
            depth: depth + 1,
        }));
        id
    };

    let (op, arity) = prims.random_operator(rng, max_size - 1);
    open(&mut arena, &mut slots, op, arity, 0);

    while arena.len() + slots.len() < max_size && !slots.is_empty() {
        let slot = slots.swap_remove(rng.random_range(0..slots.len()));
        let id = if slot.depth >= max_depth {
            arena.push((prims.random_terminal(rng), Vec::new()));
            arena.len() - 1
        } else {
            let budget = max_size - (arena.len() + slots.len());
            let (op, arity) = prims.random_operator(rng, budget);
            open(&mut arena, &mut slots, op, arity, slot.depth)
        };
        arena[slot.parent].1[slot.position] = Some(id);
    }
    for slot in slots {
        arena.push((prims.random_terminal(rng), Vec::new()));
        let id = arena.len() - 1;
        arena[slot.parent].1[slot.position] = Some(id);
    }

    let mut built: Vec<Option<TreeNode<T>>> = Vec::with_capacity(arena.len());
    let links: Vec<Vec<Option<usize>>> = arena.iter().map(|(_, l)| l.clone()).collect();
    built.extend(arena.into_iter().map(|(n, _)| Some(n)));
    Ok(assemble(0, &mut built, &links))
}

fn assemble<T: Scalar>(
    id: usize,
    built: &mut [Option<TreeNode<T>>],
    links: &[Vec<Option<usize>>],
) -> TreeNode<T> {
    let mut node = built[id].take().expect("each node used once");
    node.children = links[id]
        .iter()
        .map(|c| assemble(c.expect("all slots filled"), built, links))
        .collect();
    node
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::MAX_ARITY;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prims() -> PrimitiveSet {
        PrimitiveSet::new(3, Op::OPERATORS.to_vec())
    }

    #[test]
    fn size_one_is_terminal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t: TreeNode<f64> = ptc2(1, 5, &mut rng, &prims()).unwrap();
            assert!(t.op.is_terminal());
        }
    }

    #[test]
    fn depth_zero_is_terminal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let t: TreeNode<f64> = ptc2(30, 0, &mut rng, &prims()).unwrap();
            assert!(t.op.is_terminal());
        }
    }

    #[test]
    fn bounds_hold_over_many_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let t: TreeNode<f64> = ptc2(20, 3, &mut rng, &prims()).unwrap();
            assert!(t.depth() <= 3);
            assert!(t.size() <= 20 + MAX_ARITY - 1);
            t.validate(3).unwrap();
        }
    }

    #[test]
    fn empty_terminal_set_is_config_error() {
        let mut p = PrimitiveSet::new(0, vec![Op::Add]);
        p.constants = false;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            ptc2::<f64, _>(5, 3, &mut rng, &p),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn reaches_target_size_when_depth_allows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PrimitiveSet::new(2, vec![Op::Add, Op::Sub, Op::Mul]);
        for _ in 0..200 {
            let t: TreeNode<f64> = ptc2(25, 10, &mut rng, &p).unwrap();
            assert!(t.size() >= 25, "size {}", t.size());
        }
    }
}
