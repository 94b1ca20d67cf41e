use super::hash::euclidean;
use super::{HashKey, HashPlane, SimplifyConfig, ZERO_VARIANCE};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::expr::TreeNode;
use crate::scalar::{population_variance, Scalar};
use lru::LruCache;
use std::collections::HashMap;
use std::num::NonZeroUsize;

/// Bit counts are doubled up to this many while features still collide.
pub const MAX_HASH_BITS: usize = 4096;

/// Prediction vectors whose keys are remembered. Unchanged subtrees recur
/// across generations, and projecting onto every normal dominates a visit.
const KEY_MEMO: usize = 4096;

/// Trees sharing one hash key, smallest first.
#[derive(Debug, Clone)]
pub struct Bucket<T> {
    trees: Vec<TreeNode<T>>,
    /// Indexed prediction vectors; the first is the one that opened the bucket.
    vectors: Vec<Vec<f64>>,
}

impl<T: Scalar> Bucket<T> {
    fn new(vector: Vec<f64>, tree: TreeNode<T>) -> Self {
        Self {
            trees: vec![tree],
            vectors: vec![vector],
        }
    }

    pub fn trees(&self) -> &[TreeNode<T>] {
        &self.trees
    }

    pub fn smallest(&self) -> &TreeNode<T> {
        &self.trees[0]
    }

    /// Inserts keeping size order (ties keep arrival order); identical trees
    /// are stored once.
    fn push(&mut self, tree: TreeNode<T>) {
        let size = tree.size();
        let at = self.trees.partition_point(|t| t.size() <= size);
        let same_size = self.trees[..at].iter().rev().take_while(|t| t.size() == size);
        for t in same_size {
            if *t == tree {
                return;
            }
        }
        self.trees.insert(at, tree);
    }
}

/// Maps SimHash keys of training predictions to equivalent subtrees.
#[derive(Debug, Clone)]
pub struct SimplificationTable<T> {
    plane: HashPlane,
    buckets: HashMap<HashKey, Bucket<T>>,
    /// Exact memo keyed on the bit pattern of the hashed vector.
    keys: LruCache<Vec<u64>, HashKey>,
}

impl<T: Scalar> SimplificationTable<T> {
    pub fn new(plane: HashPlane) -> Self {
        Self {
            plane,
            buckets: HashMap::new(),
            keys: LruCache::new(NonZeroUsize::new(KEY_MEMO).expect("nonzero")),
        }
    }

    pub fn plane(&self) -> &HashPlane {
        &self.plane
    }

    /// Same as `plane().hash(v)`, memoized.
    pub fn key(&mut self, v: &[f64]) -> Result<HashKey> {
        let bits: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        if let Some(k) = self.keys.get(&bits) {
            return Ok(k.clone());
        }
        let k = self.plane.hash(v)?;
        self.keys.put(bits, k.clone());
        Ok(k)
    }

    /// Number of buckets.
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Total number of stored trees.
    pub fn n_trees(&self) -> usize {
        self.buckets.values().map(|b| b.trees.len()).sum()
    }

    pub fn bucket(&self, key: &HashKey) -> Option<&Bucket<T>> {
        self.buckets.get(key)
    }

    /// Distance from `v` to the bucket's first indexed vector, or to the
    /// nearest of all of them with `scan_all`. `None` if the key is absent.
    pub fn distance(&self, key: &HashKey, v: &[f64], scan_all: bool) -> Option<f64> {
        let b = self.buckets.get(key)?;
        let vs = if scan_all { &b.vectors[..] } else { &b.vectors[..1] };
        Some(vs.iter().map(|u| euclidean(u, v)).fold(f64::INFINITY, f64::min))
    }

    /// Opens a bucket. Does nothing if the key already exists.
    pub fn create(&mut self, key: HashKey, vector: Vec<f64>, tree: TreeNode<T>) {
        self.buckets.entry(key).or_insert_with(|| Bucket::new(vector, tree));
    }

    /// Adds `tree` to an existing bucket and returns the bucket's smallest
    /// tree. `vector`, if given, is indexed as well.
    pub fn insert(&mut self, key: &HashKey, tree: TreeNode<T>, vector: Option<Vec<f64>>) -> TreeNode<T> {
        let b = self.buckets.get_mut(key).expect("insert into an existing bucket");
        b.push(tree);
        if let Some(v) = vector {
            b.vectors.push(v);
        }
        b.smallest().clone()
    }
}

/// Builds a table holding the constant (zero vector) and every feature.
///
/// Two features with different hash keys are required. If any pair collides
/// the bit count is doubled and everything is rehashed, up to
/// [`MAX_HASH_BITS`]. Identical features therefore fail with a config error.
/// A constant feature, or one hashing to the all-zero key, joins the
/// constant bucket.
pub fn init_table<T: Scalar>(x: &FeatureMatrix<T>, config: &SimplifyConfig) -> Result<SimplificationTable<T>> {
    config.validate()?;
    let n = x.nrows();
    let columns: Vec<Vec<f64>> = x
        .columns()
        .iter()
        .map(|c| c.iter().map(|v| v.as_f64()).collect())
        .collect();
    if columns.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("training features must be finite"));
    }
    let mut bits = config.hash_bits;
    loop {
        let plane = HashPlane::new(bits, n, config.plane_seed);
        let zero = plane.hash(&vec![0.0; n])?;
        let mut table = SimplificationTable::new(plane);
        table.create(zero.clone(), vec![0.0; n], TreeNode::constant(T::zero()));
        let mut collided = false;
        for (j, col) in columns.iter().enumerate() {
            let key = if population_variance(col) < ZERO_VARIANCE {
                zero.clone()
            } else {
                table.plane.hash(col)?
            };
            if key == zero {
                table.insert(&zero, TreeNode::var(j), None);
            } else if table.buckets.contains_key(&key) {
                collided = true;
                break;
            } else {
                table.create(key, col.clone(), TreeNode::var(j));
            }
        }
        if !collided {
            return Ok(table);
        }
        if bits >= MAX_HASH_BITS {
            return Err(Error::config(format!(
                "features still share a hash key at {bits} bits; remove duplicated features"
            )));
        }
        bits = (bits * 2).min(MAX_HASH_BITS);
    }
}
