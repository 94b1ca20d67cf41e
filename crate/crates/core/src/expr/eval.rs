use super::{Op, TreeNode};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Evaluates `tree` on every row of `features`. Non-finite intermediate values
/// are not trapped; they simply flow to the output.
pub fn evaluate<T: Scalar>(tree: &TreeNode<T>, features: &FeatureMatrix<T>) -> Result<Vec<T>> {
    tree.validate(features.ncols())?;
    Ok(eval_node(tree, features, &mut None))
}

/// Like [`evaluate`], but substitutes `params` (in [`TreeNode::parameters`]
/// order) for the tree's own weights and free constants.
pub fn evaluate_with_params<T: Scalar>(
    tree: &TreeNode<T>,
    params: &[T],
    features: &FeatureMatrix<T>,
) -> Result<Vec<T>> {
    tree.validate(features.ncols())?;
    let expected = tree.parameter_count();
    if params.len() != expected {
        return Err(Error::Structure(format!(
            "expected {expected} parameters, got {}",
            params.len()
        )));
    }
    Ok(eval_node(tree, features, &mut Some(params.iter())))
}

pub(crate) fn eval_node<T: Scalar>(
    node: &TreeNode<T>,
    x: &FeatureMatrix<T>,
    params: &mut Option<std::slice::Iter<'_, T>>,
) -> Vec<T> {
    // Parameters are consumed in pre-order: this node's first, then children.
    let mut weight = node.weight;
    let mut value = node.value;
    if let Some(it) = params.as_mut() {
        if weight.is_some() {
            weight = it.next().copied().or(Some(T::nan()));
        } else if node.op == Op::Constant {
            value = it.next().copied().unwrap_or_else(T::nan);
        }
    }

    let mut out = match node.op {
        Op::Constant => vec![value; x.nrows()],
        Op::Var(i) => x.column(i).expect("validated").to_vec(),
        op => {
            let mut kids = node.children.iter().map(|c| eval_node(c, x, params));
            let mut acc = kids.next().expect("operators have children");
            match op {
                Op::Add => kids.for_each(|k| zip_apply(&mut acc, &k, |a, b| a + b)),
                Op::Mul => kids.for_each(|k| zip_apply(&mut acc, &k, |a, b| a * b)),
                Op::Sub => zip_apply(&mut acc, &kids.next().expect("arity"), |a, b| a - b),
                Op::Div => zip_apply(&mut acc, &kids.next().expect("arity"), |a, b| a / b),
                Op::Pow => zip_apply(&mut acc, &kids.next().expect("arity"), T::powf),
                Op::Min => zip_apply(&mut acc, &kids.next().expect("arity"), nan_min),
                Op::Max => zip_apply(&mut acc, &kids.next().expect("arity"), nan_max),
                unary => {
                    let f = unary_fn::<T>(unary);
                    acc.iter_mut().for_each(|v| *v = f(*v));
                }
            }
            acc
        }
    };
    if let Some(w) = weight {
        out.iter_mut().for_each(|v| *v *= w);
    }
    out
}

#[inline]
fn zip_apply<T: Scalar>(acc: &mut [T], rhs: &[T], f: impl Fn(T, T) -> T) {
    acc.iter_mut().zip(rhs).for_each(|(a, &b)| *a = f(*a, b));
}

pub(crate) fn nan_min<T: Scalar>(a: T, b: T) -> T {
    if a.is_nan() || b.is_nan() {
        T::nan()
    } else if b < a {
        b
    } else {
        a
    }
}

pub(crate) fn nan_max<T: Scalar>(a: T, b: T) -> T {
    if a.is_nan() || b.is_nan() {
        T::nan()
    } else if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn unary_fn<T: Scalar>(op: Op) -> fn(T) -> T {
    match op {
        Op::Abs => T::abs,
        Op::Square => |v| v * v,
        Op::SqrtAbs => |v: T| v.abs().sqrt(),
        Op::Exp => T::exp,
        Op::Log => T::ln,
        Op::Log1p => T::ln_1p,
        Op::Sin => T::sin,
        Op::Cos => T::cos,
        Op::Tan => T::tan,
        Op::Tanh => T::tanh,
        other => unreachable!("{other} is not unary"),
    }
}

/// Applies one operator to already-evaluated child outputs, then the weight.
/// Used by bottom-up passes that have the children's predictions in hand.
pub(crate) fn apply_node<T: Scalar>(node: &TreeNode<T>, children: &[Vec<T>], rows: usize) -> Vec<T> {
    let mut out = match node.op {
        Op::Constant => vec![node.value; rows],
        Op::Var(_) => unreachable!("variables are evaluated from the matrix"),
        op => {
            let mut acc = children[0].clone();
            for rhs in &children[1..] {
                match op {
                    Op::Add => zip_apply(&mut acc, rhs, |a, b| a + b),
                    Op::Mul => zip_apply(&mut acc, rhs, |a, b| a * b),
                    Op::Sub => zip_apply(&mut acc, rhs, |a, b| a - b),
                    Op::Div => zip_apply(&mut acc, rhs, |a, b| a / b),
                    Op::Pow => zip_apply(&mut acc, rhs, T::powf),
                    Op::Min => zip_apply(&mut acc, rhs, nan_min),
                    Op::Max => zip_apply(&mut acc, rhs, nan_max),
                    _ => unreachable!(),
                }
            }
            if children.len() == 1 {
                let f = unary_fn::<T>(op);
                acc.iter_mut().for_each(|v| *v = f(*v));
            }
            acc
        }
    };
    if let Some(w) = node.weight {
        out.iter_mut().for_each(|v| *v *= w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    type N = TreeNode<f64>;

    fn col(v: &[f64]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_columns(vec![v.to_vec()]).unwrap()
    }

    #[test]
    fn identity_terminal() {
        assert_eq!(evaluate(&N::var(0), &col(&[1., 2., 3.])).unwrap(), vec![1., 2., 3.]);
    }

    #[test]
    fn square_by_multiplication() {
        let t = N::op(Op::Mul, vec![N::var(0), N::var(0)]).unwrap();
        assert_eq!(evaluate(&t, &col(&[2., 3.])).unwrap(), vec![4., 9.]);
    }

    #[test]
    fn weighted_constant() {
        let t = N::constant(5.0).with_weight(2.0);
        let x = FeatureMatrix::<f64>::empty(3);
        assert_eq!(evaluate(&t, &x).unwrap(), vec![10., 10., 10.]);
    }

    #[test]
    fn bad_variable_is_structural_error() {
        assert!(matches!(
            evaluate(&N::var(1), &col(&[1.0])),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn non_finite_values_propagate() {
        let t = N::op(Op::Log, vec![N::var(0)]).unwrap();
        let y = evaluate(&t, &col(&[-1.0, 0.0, 1.0])).unwrap();
        assert!(y[0].is_nan());
        assert_eq!(y[1], f64::NEG_INFINITY);
        assert_eq!(y[2], 0.0);
        let m = N::op(Op::Min, vec![N::var(0), N::constant(0.0)]).unwrap();
        let y = evaluate(&m, &col(&[f64::NAN, 2.0])).unwrap();
        assert!(y[0].is_nan());
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn params_override_tree_values() {
        let t = N::op(
            Op::Add,
            vec![N::var(0).with_weight(1.0), N::constant(0.0)],
        )
        .unwrap();
        let x = col(&[1.0, 2.0]);
        assert_eq!(evaluate_with_params(&t, &[3.0, 1.0], &x).unwrap(), vec![4.0, 7.0]);
        assert!(evaluate_with_params(&t, &[3.0], &x).is_err());
        assert!(evaluate_with_params(&t, &[3.0, 1.0, 2.0], &x).is_err());
    }

    #[test]
    fn apply_node_matches_evaluate() {
        let t = N::op(Op::Pow, vec![N::var(0), N::constant(2.0)])
            .unwrap()
            .with_weight(0.5);
        let x = col(&[1.0, 3.0]);
        let kids: Vec<Vec<f64>> = t.children.iter().map(|c| evaluate(c, &x).unwrap()).collect();
        assert_eq!(apply_node(&t, &kids, 2), evaluate(&t, &x).unwrap());
    }
}
