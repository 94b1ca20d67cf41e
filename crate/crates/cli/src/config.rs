//! The flat JSON run configuration. Every key is optional and defaults to
//! the engine defaults; unknown keys are rejected.

use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use symreg::engine::{EngineConfig, FailureFallback, Objective, DEFAULT_OPERATORS};
use symreg::expr::Op;
use symreg::itea::{Heuristic, ITEAConfig, Transform};
use symreg::optim::LmConfig;
use symreg::select::{MvtWeighting, SelectorConfig, SelectorKind};
use symreg::simplify::{SimplifyConfig, Traversal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// "gp" or "itea".
    pub engine: String,
    pub seed: u64,
    pub data: Option<String>,
    pub target: Option<String>,
    pub model_out: Option<String>,
    pub log_out: Option<String>,
    pub simplify_log_out: Option<String>,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub standardize: bool,

    pub pop_size: usize,
    pub generations: usize,
    pub max_size: usize,
    pub max_depth: usize,
    pub variation_tolerance: usize,
    pub weight_crossover: f64,
    pub weight_toggle_on: f64,
    pub weight_toggle_off: f64,
    pub weight_subtree: f64,
    pub weight_point: f64,
    pub weight_delete: f64,
    pub weight_insert: f64,
    /// "parent" or "random".
    pub failure_fallback: String,
    pub objectives: Vec<String>,
    pub selector: String,
    pub tournament_size: usize,
    pub fixed_epsilon: Option<f64>,
    /// "per-size" or "by-size".
    pub mvt_weighting: String,
    pub simplify: bool,
    pub simplify_tolerance: f64,
    /// "bottom-up" or "top-down".
    pub traversal: String,
    pub max_subtree_size: Option<usize>,
    pub hash_bits: usize,
    pub scan_all_members: bool,
    pub lm_iterations: usize,
    pub operators: Vec<String>,
    pub constants: bool,

    pub itea_popsize: usize,
    pub itea_generations: usize,
    pub strength_min: i32,
    pub strength_max: i32,
    pub terms_min: usize,
    pub terms_max: usize,
    pub max_nonzero_strengths: usize,
    pub transforms: Vec<String>,
    /// "OLS", "LM", "OLS+LM" or "LM+OLS".
    pub heuristic: String,
    pub itea_tournament_size: usize,
    pub cache_capacity: usize,
    pub init_range: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EngineConfig::default();
        let i = ITEAConfig::default();
        let [wc, won, woff, ws, wp, wd, wi] = e.variation_weights;
        Self {
            engine: "gp".into(),
            seed: e.seed,
            data: None,
            target: None,
            model_out: None,
            log_out: None,
            simplify_log_out: None,
            test_fraction: 0.25,
            validation_fraction: e.validation_fraction,
            standardize: true,
            pop_size: e.pop_size,
            generations: e.generations,
            max_size: e.max_size,
            max_depth: e.max_depth,
            variation_tolerance: e.variation_tolerance,
            weight_crossover: wc,
            weight_toggle_on: won,
            weight_toggle_off: woff,
            weight_subtree: ws,
            weight_point: wp,
            weight_delete: wd,
            weight_insert: wi,
            failure_fallback: e.failure_fallback.name().into(),
            objectives: e.objectives.iter().map(|o| o.name().to_string()).collect(),
            selector: e.selector.kind.name().into(),
            tournament_size: e.selector.tournament_size,
            fixed_epsilon: e.selector.fixed_epsilon,
            mvt_weighting: mvt_name(e.selector.mvt_weighting).into(),
            simplify: e.simplify.enabled,
            simplify_tolerance: e.simplify.tolerance,
            traversal: e.simplify.traversal.name().into(),
            max_subtree_size: e.simplify.max_subtree_size,
            hash_bits: e.simplify.hash_bits,
            scan_all_members: e.simplify.scan_all_members,
            lm_iterations: e.lm.max_iters,
            operators: DEFAULT_OPERATORS.iter().map(|o| o.name().to_string()).collect(),
            constants: e.constants,
            itea_popsize: i.popsize,
            itea_generations: i.gens,
            strength_min: i.strength_bounds.0,
            strength_max: i.strength_bounds.1,
            terms_min: i.terms_bounds.0,
            terms_max: i.terms_bounds.1,
            max_nonzero_strengths: i.max_nonzero_strengths,
            transforms: i.transforms.iter().map(|t| t.name().to_string()).collect(),
            heuristic: i.heuristic.name().into(),
            itea_tournament_size: i.tournament_size,
            cache_capacity: i.cache_capacity,
            init_range: i.init_range,
        }
    }
}

fn mvt_name(w: MvtWeighting) -> &'static str {
    match w {
        MvtWeighting::PerSize => "per-size",
        MvtWeighting::BySize => "by-size",
    }
}

fn parse_name<V>(what: &str, name: &str, f: impl Fn(&str) -> Option<V>) -> CliResult<V> {
    f(name).ok_or_else(|| CliError::config(format!("unknown {what} {name:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Gp,
    Itea,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.engine_kind()?;
        Ok(cfg)
    }

    pub fn engine_kind(&self) -> CliResult<EngineKind> {
        match self.engine.as_str() {
            "gp" => Ok(EngineKind::Gp),
            "itea" => Ok(EngineKind::Itea),
            other => Err(CliError::config(format!("unknown engine {other:?}; use \"gp\" or \"itea\""))),
        }
    }

    /// SHA-256 of the canonical JSON rendering.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn lm(&self) -> LmConfig {
        LmConfig {
            max_iters: self.lm_iterations,
            ..LmConfig::default()
        }
    }

    pub fn engine_config(&self) -> CliResult<EngineConfig> {
        let selector = SelectorConfig {
            kind: parse_name("selector", &self.selector, SelectorKind::from_name)?,
            tournament_size: self.tournament_size,
            fixed_epsilon: self.fixed_epsilon,
            mvt_weighting: parse_name("mvt_weighting", &self.mvt_weighting, |n| match n {
                "per-size" => Some(MvtWeighting::PerSize),
                "by-size" => Some(MvtWeighting::BySize),
                _ => None,
            })?,
        };
        let simplify = SimplifyConfig {
            enabled: self.simplify,
            tolerance: self.simplify_tolerance,
            traversal: parse_name("traversal", &self.traversal, Traversal::from_name)?,
            max_subtree_size: self.max_subtree_size,
            hash_bits: self.hash_bits,
            scan_all_members: self.scan_all_members,
            ..SimplifyConfig::default()
        };
        let config = EngineConfig {
            pop_size: self.pop_size,
            generations: self.generations,
            max_size: self.max_size,
            max_depth: self.max_depth,
            validation_fraction: self.validation_fraction,
            variation_tolerance: self.variation_tolerance,
            variation_weights: [
                self.weight_crossover,
                self.weight_toggle_on,
                self.weight_toggle_off,
                self.weight_subtree,
                self.weight_point,
                self.weight_delete,
                self.weight_insert,
            ],
            failure_fallback: parse_name("failure_fallback", &self.failure_fallback, FailureFallback::from_name)?,
            objectives: self
                .objectives
                .iter()
                .map(|o| parse_name("objective", o, Objective::from_name))
                .collect::<CliResult<_>>()?,
            selector,
            simplify,
            lm: self.lm(),
            operators: self
                .operators
                .iter()
                .map(|o| parse_name("operator", o, Op::from_name).and_then(|op| {
                    if op.is_terminal() {
                        Err(CliError::config(format!("{o:?} is a terminal, not an operator")))
                    } else {
                        Ok(op)
                    }
                }))
                .collect::<CliResult<_>>()?,
            constants: self.constants,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn itea_config(&self) -> CliResult<ITEAConfig> {
        let config = ITEAConfig {
            popsize: self.itea_popsize,
            gens: self.itea_generations,
            strength_bounds: (self.strength_min, self.strength_max),
            terms_bounds: (self.terms_min, self.terms_max),
            max_nonzero_strengths: self.max_nonzero_strengths,
            transforms: self
                .transforms
                .iter()
                .map(|t| parse_name("transform", t, Transform::from_name))
                .collect::<CliResult<_>>()?,
            heuristic: parse_name("heuristic", &self.heuristic, Heuristic::from_name)?,
            tournament_size: self.itea_tournament_size,
            lm: self.lm(),
            cache_capacity: self.cache_capacity,
            init_range: self.init_range,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_convert() {
        let d = RunConfig::default();
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), d);
        assert_eq!(d.engine_config().unwrap(), EngineConfig::default());
        assert_eq!(d.itea_config().unwrap(), ITEAConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::from_json(r#"{"pop_sz": 10}"#).unwrap_err();
        assert_eq!(e.code, crate::error::EXIT_CONFIG);
        assert!(e.message.contains("pop_sz"));
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let c = RunConfig::from_json(r#"{"generations": 5, "selector": "lex-mvt-dynamic"}"#).unwrap();
        assert_eq!(c.generations, 5);
        assert_eq!(c.pop_size, 80);
        assert_eq!(c.engine_config().unwrap().selector.kind, SelectorKind::LexMvtDynamic);
    }

    #[test]
    fn bad_names_are_config_errors() {
        for bad in [
            r#"{"engine": "forest"}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err());
        }
        for bad in [
            r#"{"selector": "roulette"}"#,
            r#"{"operators": ["add", "x0"]}"#,
            r#"{"objectives": ["size"]}"#,
            r#"{"pop_size": 3}"#,
        ] {
            let c = RunConfig::from_json(bad).unwrap();
            assert_eq!(c.engine_config().unwrap_err().code, crate::error::EXIT_CONFIG, "{bad}");
        }
        let c = RunConfig::from_json(r#"{"heuristic": "newton"}"#).unwrap();
        assert!(c.itea_config().is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.digest(), RunConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
