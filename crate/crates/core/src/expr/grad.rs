//! Reverse-mode derivatives of a tree's output with respect to its
//! parameters, one forward pass plus one backward pass for all of them.

use super::eval::{nan_max, nan_min, unary_fn};
use super::{Op, TreeNode};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Rec<'a, T> {
    node: &'a TreeNode<T>,
    /// Operator output before the weight.
    pre: Vec<T>,
    /// Node output after the weight.
    post: Vec<T>,
    children: Vec<usize>,
    param: Option<usize>,
}

fn forward<'a, T: Scalar>(node: &'a TreeNode<T>, x: &FeatureMatrix<T>, tape: &mut Vec<Rec<'a, T>>, next_param: &mut usize) -> usize {
    let id = tape.len();
    let param = (node.weight.is_some() || node.op == Op::Constant).then(|| {
        *next_param += 1;
        *next_param - 1
    });
    tape.push(Rec {
        node,
        pre: Vec::new(),
        post: Vec::new(),
        children: Vec::new(),
        param,
    });
    let children: Vec<usize> = node.children.iter().map(|c| forward(c, x, tape, next_param)).collect();
    let pre = match node.op {
        Op::Constant => vec![node.value; x.nrows()],
        Op::Var(i) => x.column(i).expect("validated").to_vec(),
        op => {
            let mut acc = tape[children[0]].post.clone();
            for &c in &children[1..] {
                let rhs = &tape[c].post;
                let f: fn(T, T) -> T = match op {
                    Op::Add => |a, b| a + b,
                    Op::Mul => |a, b| a * b,
                    Op::Sub => |a, b| a - b,
                    Op::Div => |a, b| a / b,
                    Op::Pow => T::powf,
                    Op::Min => nan_min,
                    Op::Max => nan_max,
                    _ => unreachable!("binary operators only"),
                };
                acc.iter_mut().zip(rhs).for_each(|(a, &b)| *a = f(*a, b));
            }
            if children.len() == 1 {
                let f = unary_fn::<T>(op);
                acc.iter_mut().for_each(|v| *v = f(*v));
            }
            acc
        }
    };
    let post = match node.weight {
        Some(w) => pre.iter().map(|&v| v * w).collect(),
        None => pre.clone(),
    };
    let rec = &mut tape[id];
    rec.pre = pre;
    rec.post = post;
    rec.children = children;
    id
}

fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Local derivative of the operator output with respect to child `k`, row `i`.
fn partial<T: Scalar>(op: Op, args: &[&[T]], out: T, k: usize, i: usize) -> T {
    let a = args[0][i];
    match op {
        Op::Add => T::one(),
        Op::Sub => {
            if k == 0 {
                T::one()
            } else {
                -T::one()
            }
        }
        Op::Mul => args
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .fold(T::one(), |acc, (_, c)| acc * c[i]),
        Op::Div => {
            let b = args[1][i];
            if k == 0 {
                T::one() / b
            } else {
                -a / (b * b)
            }
        }
        Op::Pow => {
            let b = args[1][i];
            if k == 0 {
                b * a.powf(b - T::one())
            } else {
                out * a.ln()
            }
        }
        Op::Min | Op::Max => {
            let b = args[1][i];
            let picked_b = if op == Op::Min { b < a } else { b > a };
            if (k == 1) == picked_b {
                T::one()
            } else {
                T::zero()
            }
        }
        Op::Abs => sign(a),
        Op::Square => T::lit(2.0) * a,
        Op::SqrtAbs => sign(a) / (T::lit(2.0) * out),
        Op::Exp => out,
        Op::Log => T::one() / a,
        Op::Log1p => T::one() / (T::one() + a),
        Op::Sin => a.cos(),
        Op::Cos => -a.sin(),
        Op::Tan => T::one() + out * out,
        Op::Tanh => T::one() - out * out,
        Op::Constant | Op::Var(_) => unreachable!("terminals have no children"),
    }
}

/// Predictions of `tree` with `params` substituted, and the row-major
/// `rows × params` Jacobian of those predictions. Non-finite derivatives are
/// reported as zero slope.
pub fn evaluate_with_jacobian<T: Scalar>(
    tree: &TreeNode<T>,
    params: &[T],
    features: &FeatureMatrix<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    tree.validate(features.ncols())?;
    let p = tree.parameter_count();
    if params.len() != p {
        return Err(Error::Structure(format!("expected {p} parameters, got {}", params.len())));
    }
    let mut tree = tree.clone();
    tree.set_parameters(params)?;
    let n = features.nrows();
    let mut tape = Vec::with_capacity(tree.size());
    let mut next = 0;
    forward(&tree, features, &mut tape, &mut next);

    let mut jac = vec![T::zero(); n * p];
    // parents precede children on the tape, so one ascending sweep suffices
    let mut adjoint: Vec<Vec<T>> = vec![Vec::new(); tape.len()];
    adjoint[0] = vec![T::one(); n];
    for id in 0..tape.len() {
        let adj = std::mem::take(&mut adjoint[id]);
        let rec = &tape[id];
        if let Some(j) = rec.param {
            for i in 0..n {
                let d = if rec.node.weight.is_some() { adj[i] * rec.pre[i] } else { adj[i] };
                jac[i * p + j] = if d.is_finite() { d } else { T::zero() };
            }
        }
        if rec.children.is_empty() {
            continue;
        }
        let adj_pre: Vec<T> = match rec.node.weight {
            Some(w) => adj.iter().map(|&a| a * w).collect(),
            None => adj,
        };
        let args: Vec<&[T]> = rec.children.iter().map(|&c| tape[c].post.as_slice()).collect();
        for (k, &c) in rec.children.iter().enumerate() {
            adjoint[c] = (0..n)
                .map(|i| {
                    if adj_pre[i] == T::zero() {
                        T::zero()
                    } else {
                        adj_pre[i] * partial(rec.node.op, &args, rec.pre[i], k, i)
                    }
                })
                .collect();
        }
    }
    let pred = std::mem::take(&mut tape[0].post);
    Ok((pred, jac))
}
