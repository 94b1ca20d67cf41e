//! Multi-objective tree GP: PTC2 initialization, per-individual parameter
//! fitting, lexicase parent selection, retrying variation, optional
//! hash-based simplification and NSGA-II survival.

mod vary;

pub use vary::{apply_variation, VariationLimits, VariationOp};
use vary::random_tree;

use crate::data::{Dataset, FeatureMatrix, Partition};
use crate::error::{Error, Result};
use crate::expr::{evaluate, evaluate_with_jacobian, evaluate_with_params, Op, PrimitiveSet, TreeNode};
use crate::moo::{pick_final, survive};
use crate::optim::{lm_fit_with_jacobian, LmConfig};
use crate::scalar::Scalar;
use crate::select::{ErrorMatrix, Selector, SelectorConfig};
use crate::simplify::{hash_simplify, init_table, SimplificationTable, SimplifyConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Quantities that can serve as objectives (all minimized).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    TrainLoss,
    ValLoss,
    Size,
    Complexity,
    Depth,
}

impl Objective {
    pub const ALL: [Objective; 5] = [
        Objective::TrainLoss,
        Objective::ValLoss,
        Objective::Size,
        Objective::Complexity,
        Objective::Depth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::TrainLoss => "train_loss",
            Objective::ValLoss => "val_loss",
            Objective::Size => "size",
            Objective::Complexity => "complexity",
            Objective::Depth => "depth",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name)
    }
}

/// What a child becomes after every variation attempt failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureFallback {
    /// A copy of the parent being varied.
    #[default]
    ParentCopy,
    /// A freshly generated random individual.
    Random,
}

impl FailureFallback {
    pub fn name(self) -> &'static str {
        match self {
            FailureFallback::ParentCopy => "parent",
            FailureFallback::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [FailureFallback::ParentCopy, FailureFallback::Random]
            .into_iter()
            .find(|f| f.name() == name)
    }
}

/// Default function set: every operator with a counterpart in the
/// simplification experiments' table.
pub const DEFAULT_OPERATORS: [Op; 15] = [
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::Div,
    Op::Abs,
    Op::Cos,
    Op::Sin,
    Op::Tan,
    Op::Exp,
    Op::Min,
    Op::Max,
    Op::Log,
    Op::Log1p,
    Op::SqrtAbs,
    Op::Square,
];

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub max_size: usize,
    pub max_depth: usize,
    /// Share of the non-test rows held out for validation when the dataset
    /// carries no validation rows of its own.
    pub validation_fraction: f64,
    /// Attempts per child before the failure fallback kicks in.
    pub variation_tolerance: usize,
    /// Relative weights, indexed like [`VariationOp::ALL`].
    pub variation_weights: [f64; 7],
    pub failure_fallback: FailureFallback,
    /// The first objective must be the training loss.
    pub objectives: Vec<Objective>,
    pub selector: SelectorConfig,
    pub simplify: SimplifyConfig,
    /// Levenberg-Marquardt settings for weights and constants.
    pub lm: LmConfig,
    pub operators: Vec<Op>,
    /// Whether constant leaves are in the terminal set.
    pub constants: bool,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            pop_size: 80,
            generations: 200,
            max_size: 128,
            max_depth: 7,
            validation_fraction: 0.25,
            variation_tolerance: 3,
            variation_weights: [1.0; 7],
            failure_fallback: FailureFallback::ParentCopy,
            objectives: vec![Objective::TrainLoss, Objective::Complexity],
            selector: SelectorConfig::default(),
            simplify: SimplifyConfig::default(),
            lm: LmConfig::default(),
            operators: DEFAULT_OPERATORS.to_vec(),
            constants: true,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 || self.pop_size % 2 != 0 {
            return Err(Error::config("pop_size must be even and at least 2"));
        }
        if self.max_size == 0 {
            return Err(Error::config("max_size must be at least 1"));
        }
        if self.variation_tolerance == 0 {
            return Err(Error::config("variation_tolerance must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        let w = &self.variation_weights;
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("variation weights must be non-negative with a positive sum"));
        }
        if self.objectives.first() != Some(&Objective::TrainLoss) {
            return Err(Error::config("the first objective must be train_loss"));
        }
        if self.operators.is_empty() {
            return Err(Error::config("the operator set is empty"));
        }
        if self.operators.iter().any(|o| o.is_terminal()) {
            return Err(Error::config("terminals cannot be listed as operators"));
        }
        self.selector.validate()?;
        self.simplify.validate()
    }
}

/// One member of the population with its cached scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual<T> {
    pub tree: TreeNode<T>,
    /// MSE on the inner training rows, `+inf` if not finite.
    pub train_loss: f64,
    /// MSE on the validation rows, `+inf` if not finite.
    pub val_loss: f64,
    pub size: usize,
    pub depth: usize,
    pub complexity: u64,
    pub valid: bool,
    train_pred: Vec<T>,
}

impl<T: Scalar> Individual<T> {
    pub fn objective(&self, o: Objective) -> f64 {
        match o {
            Objective::TrainLoss => self.train_loss,
            Objective::ValLoss => self.val_loss,
            Objective::Size => self.size as f64,
            Objective::Complexity => self.complexity as f64,
            Objective::Depth => self.depth as f64,
        }
    }

    pub fn train_predictions(&self) -> &[T] {
        &self.train_pred
    }
}

/// Per-generation summary; generation 0 is the initial population.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationLog {
    pub generation: usize,
    pub best_train_loss: f64,
    pub best_val_loss: f64,
    pub median_size: f64,
    pub median_complexity: f64,
    pub n_simplifications: usize,
    pub elapsed_ms: u128,
}

impl GenerationLog {
    pub const CSV_HEADER: &'static str =
        "generation,best_train_loss,best_val_loss,median_size,median_complexity,n_simplifications,elapsed_ms";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.generation,
            self.best_train_loss,
            self.best_val_loss,
            self.median_size,
            self.median_complexity,
            self.n_simplifications,
            self.elapsed_ms
        )
    }
}

/// One accepted subtree replacement during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplificationRecord {
    pub generation: usize,
    /// Pre-order index in the tree that was simplified.
    pub node: usize,
    pub pre_size: usize,
    pub post_size: usize,
    pub distance: f64,
    pub angle_degrees: Option<f64>,
}

impl SimplificationRecord {
    pub const CSV_HEADER: &'static str = "generation,node,pre_size,post_size,distance,angle_degrees";

    pub fn csv_row(&self) -> String {
        let angle = self.angle_degrees.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.generation, self.node, self.pre_size, self.post_size, self.distance, angle
        )
    }
}

#[derive(Debug, Clone)]
pub struct EngineRun<T> {
    /// The validation pick from the final population.
    pub best: Individual<T>,
    /// True when no validation loss was finite and training loss decided.
    pub fell_back: bool,
    pub population: Vec<Individual<T>>,
    pub log: Vec<GenerationLog>,
    pub simplifications: Vec<SimplificationRecord>,
    /// Number of subtrees visited by the simplifier over the run.
    pub simplify_visits: usize,
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

/// A random stream owned by one (generation, slot) pair, so results do not
/// depend on the order in which slots are processed.
fn stream(seed: u64, generation: usize, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) ^ slot);
    rng
}

const SELECTION_SLOT: u64 = u32::MAX as u64;
const SPLIT_SLOT: u64 = u32::MAX as u64 - 1;

/// Training and validation views plus the fitting machinery.
pub(crate) struct Problem<'a, T> {
    config: &'a EngineConfig,
    prims: PrimitiveSet,
    x_train: FeatureMatrix<T>,
    y_train: Vec<T>,
    x_val: FeatureMatrix<T>,
    y_val: Vec<T>,
}

fn mse_or_inf<T: Scalar>(pred: &[T], y: &[T]) -> f64 {
    let n = y.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let s: f64 = pred.iter().zip(y).map(|(p, t)| (p.as_f64() - t.as_f64()).powi(2)).sum();
    let v = s / n as f64;
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

impl<'a, T: Scalar> Problem<'a, T> {
    fn new(config: &'a EngineConfig, data: &Dataset<T>) -> Result<(Self, Vec<usize>, Vec<usize>)> {
        let mut train_rows = data.rows_in(Partition::Train);
        let mut val_rows = data.rows_in(Partition::Validation);
        if val_rows.is_empty() && config.validation_fraction > 0.0 {
            let n_val = (config.validation_fraction * train_rows.len() as f64).round() as usize;
            if n_val == 0 || n_val >= train_rows.len() {
                return Err(Error::data("too few rows for a validation split"));
            }
            let mut rows = train_rows.clone();
            rows.shuffle(&mut stream(config.seed, 0, SPLIT_SLOT));
            val_rows = rows.split_off(rows.len() - n_val);
            rows.sort_unstable();
            val_rows.sort_unstable();
            train_rows = rows;
        }
        if train_rows.is_empty() {
            return Err(Error::data("no training rows"));
        }
        let pick = |rows: &[usize]| -> (FeatureMatrix<T>, Vec<T>) {
            (
                data.features.select_rows(rows),
                rows.iter().map(|&i| data.target[i]).collect(),
            )
        };
        let (x_train, y_train) = pick(&train_rows);
        let (x_val, y_val) = pick(&val_rows);
        let mut prims = PrimitiveSet::new(data.nfeatures(), config.operators.clone());
        prims.constants = config.constants;
        if prims.terminal_count() == 0 {
            return Err(Error::config("no features and constants disabled"));
        }
        Ok((
            Self {
                config,
                prims,
                x_train,
                y_train,
                x_val,
                y_val,
            },
            train_rows,
            val_rows,
        ))
    }

    /// Fits enabled weights and free constants by Levenberg-Marquardt. A
    /// failed fit leaves the tree untouched.
    fn optimize(&self, tree: &mut TreeNode<T>) {
        let theta0 = tree.parameters();
        if theta0.is_empty() {
            return;
        }
        let (x, y) = (&self.x_train, &self.y_train);
        let residuals = |theta: &[T]| -> Vec<T> {
            let pred = evaluate_with_params(tree, theta, x).expect("tree validated before fitting");
            pred.iter().zip(y).map(|(&p, &t)| t - p).collect()
        };
        // residuals are y − ŷ, so their Jacobian is the negated model Jacobian
        let jacobian = |theta: &[T]| -> Vec<T> {
            let (_, j) = evaluate_with_jacobian(tree, theta, x).expect("tree validated before fitting");
            j.into_iter().map(|v| -v).collect()
        };
        if let Ok(fit) = lm_fit_with_jacobian(residuals, jacobian, &theta0, &self.config.lm) {
            if fit.params.iter().all(|v| v.is_finite()) {
                tree.set_parameters(&fit.params).expect("same parameter count");
            }
        }
    }

    fn score(&self, tree: TreeNode<T>) -> Individual<T> {
        let train_pred = evaluate(&tree, &self.x_train).expect("tree uses known features");
        let train_loss = mse_or_inf(&train_pred, &self.y_train);
        let val_loss = if self.y_val.is_empty() {
            train_loss
        } else {
            let p = evaluate(&tree, &self.x_val).expect("tree uses known features");
            mse_or_inf(&p, &self.y_val)
        };
        let m = tree.metrics();
        Individual {
            train_loss,
            val_loss,
            size: m.size,
            depth: m.depth,
            complexity: m.complexity,
            valid: train_loss.is_finite(),
            train_pred,
            tree,
        }
    }

    fn fit_and_score(&self, mut tree: TreeNode<T>) -> Individual<T> {
        self.optimize(&mut tree);
        self.score(tree)
    }

    fn random_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Individual<T> {
        let tree = random_tree(&self.prims, self.config.max_size, self.config.max_depth, rng);
        self.fit_and_score(tree)
    }

    /// One child per parent; each tries up to `variation_tolerance`
    /// variations before falling back.
    fn vary<R: Rng + ?Sized>(
        &self,
        p1: &Individual<T>,
        p2: &Individual<T>,
        rng: &mut R,
    ) -> (Individual<T>, Individual<T>) {
        let child = |ind: &Individual<T>, other: &Individual<T>, rng: &mut R| {
            for _ in 0..self.config.variation_tolerance {
                let op = self.sample_variation(rng);
                if let Some(tree) = apply_variation(op, &ind.tree, &other.tree, self.limits(), rng) {
                    return self.fit_and_score(tree);
                }
            }
            match self.config.failure_fallback {
                FailureFallback::ParentCopy => ind.clone(),
                FailureFallback::Random => self.random_individual(rng),
            }
        };
        let c1 = child(p1, p2, rng);
        let c2 = child(p2, p1, rng);
        (c1, c2)
    }

    fn limits(&self) -> VariationLimits<'_> {
        VariationLimits {
            prims: &self.prims,
            max_size: self.config.max_size,
            max_depth: self.config.max_depth,
        }
    }

    fn sample_variation<R: Rng + ?Sized>(&self, rng: &mut R) -> VariationOp {
        let w = &self.config.variation_weights;
        let mut u = rng.random_range(0.0..w.iter().sum::<f64>());
        for (op, &wi) in VariationOp::ALL.iter().zip(w) {
            if u < wi {
                return *op;
            }
            u -= wi;
        }
        // rounding can leave u marginally above the last bucket
        let last = w.iter().rposition(|&v| v > 0.0).expect("positive weight sum");
        VariationOp::ALL[last]
    }

    /// Simplifies and, if anything changed, re-fits and re-scores.
    fn simplify(
        &self,
        ind: Individual<T>,
        table: &mut SimplificationTable<T>,
        generation: usize,
        records: &mut Vec<SimplificationRecord>,
        visits: &mut usize,
    ) -> Individual<T> {
        let out = match hash_simplify(&ind.tree, table, &self.config.simplify, &self.x_train) {
            Ok(o) => o,
            Err(_) => return ind,
        };
        *visits += out.visits;
        if out.replacements.is_empty() {
            return ind;
        }
        records.extend(out.replacements.into_iter().map(|r| SimplificationRecord {
            generation,
            node: r.node,
            pre_size: r.pre_size,
            post_size: r.post_size,
            distance: r.distance,
            angle_degrees: r.angle_degrees,
        }));
        self.fit_and_score(out.tree)
    }
}

pub(crate) fn weigh_variables<T: Scalar>(mut tree: TreeNode<T>) -> TreeNode<T> {
    fn go<T: Scalar>(n: &mut TreeNode<T>) {
        if matches!(n.op, Op::Var(_)) && n.weight.is_none() {
            n.weight = Some(T::one());
        }
        n.children.iter_mut().for_each(go);
    }
    go(&mut tree);
    tree
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn summarize<T: Scalar>(
    pop: &[Individual<T>],
    generation: usize,
    n_simplifications: usize,
    start: &Instant,
) -> GenerationLog {
    GenerationLog {
        generation,
        best_train_loss: pop.iter().map(|i| i.train_loss).fold(f64::INFINITY, f64::min),
        best_val_loss: pop.iter().map(|i| i.val_loss).fold(f64::INFINITY, f64::min),
        median_size: median(pop.iter().map(|i| i.size as f64).collect()),
        median_complexity: median(pop.iter().map(|i| i.complexity as f64).collect()),
        n_simplifications,
        elapsed_ms: start.elapsed().as_millis(),
    }
}

/// Builds the initial population: PTC2 trees with uniform target sizes,
/// variable weights on, parameters fitted.
pub fn init_population<T: Scalar>(config: &EngineConfig, data: &Dataset<T>) -> Result<Vec<Individual<T>>> {
    config.validate()?;
    let (problem, _, _) = Problem::new(config, data)?;
    Ok((0..config.pop_size)
        .map(|i| problem.random_individual(&mut stream(config.seed, 0, i as u64)))
        .collect())
}

/// Runs the evolutionary loop on the dataset's training rows (test rows are
/// never touched) and returns the validation pick of the final population.
pub fn run<T: Scalar>(config: &EngineConfig, data: &Dataset<T>) -> Result<EngineRun<T>> {
    config.validate()?;
    let start = Instant::now();
    let (problem, train_rows, val_rows) = Problem::new(config, data)?;
    let mut table = if config.simplify.enabled {
        let cfg = SimplifyConfig {
            plane_seed: config.seed ^ config.simplify.plane_seed,
            ..config.simplify.clone()
        };
        Some(init_table(&problem.x_train, &cfg)?)
    } else {
        None
    };
    let mut records = Vec::new();
    let mut visits = 0;

    let mut pop: Vec<Individual<T>> = (0..config.pop_size)
        .map(|i| problem.random_individual(&mut stream(config.seed, 0, i as u64)))
        .collect();
    if let Some(table) = table.as_mut() {
        pop = pop
            .into_iter()
            .map(|ind| problem.simplify(ind, table, 0, &mut records, &mut visits))
            .collect();
    }
    let mut log = vec![summarize(&pop, 0, records.len(), &start)];

    for generation in 1..=config.generations {
        let before = records.len();
        let preds: Vec<Vec<T>> = pop.iter().map(|i| i.train_pred.clone()).collect();
        let errors = ErrorMatrix::from_predictions(&preds, &problem.y_train)?;
        let fitness: Vec<T> = pop.iter().map(|i| T::lit(i.train_loss)).collect();
        let selector = Selector::with_fitness(&errors, fitness, config.selector)?;
        let mut sel_rng = stream(config.seed, generation, SELECTION_SLOT);
        let parents: Vec<usize> = (0..config.pop_size).map(|_| selector.select(&mut sel_rng).index).collect();

        let mut offspring = Vec::with_capacity(config.pop_size);
        for (k, pair) in parents.chunks_exact(2).enumerate() {
            let mut rng = stream(config.seed, generation, k as u64);
            let (c1, c2) = problem.vary(&pop[pair[0]], &pop[pair[1]], &mut rng);
            offspring.push(c1);
            offspring.push(c2);
        }
        if let Some(table) = table.as_mut() {
            offspring = offspring
                .into_iter()
                .map(|ind| problem.simplify(ind, table, generation, &mut records, &mut visits))
                .collect();
        }

        pop.extend(offspring);
        let fit: Vec<Vec<f64>> = pop
            .iter()
            .map(|i| config.objectives.iter().map(|&o| i.objective(o)).collect())
            .collect();
        let keep = survive(&fit, config.pop_size);
        let mut slots: Vec<Option<Individual<T>>> = pop.into_iter().map(Some).collect();
        pop = keep.into_iter().map(|i| slots[i].take().expect("unique survivors")).collect();
        log.push(summarize(&pop, generation, records.len() - before, &start));
    }

    let val: Vec<f64> = pop.iter().map(|i| i.val_loss).collect();
    let train: Vec<f64> = pop.iter().map(|i| i.train_loss).collect();
    let cx: Vec<u64> = pop.iter().map(|i| i.complexity).collect();
    let sz: Vec<usize> = pop.iter().map(|i| i.size).collect();
    let pick = pick_final(&val, &train, &cx, &sz);
    Ok(EngineRun {
        best: pop[pick.index].clone(),
        fell_back: pick.fell_back,
        population: pop,
        log,
        simplifications: records,
        simplify_visits: visits,
        train_rows,
        val_rows,
    })
}
