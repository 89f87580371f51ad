//! Method-agnostic search machinery.
//!
//! Every search method drives a [`Session`]: it proposes architectures,
//! [`Session::submit`] decides what happens to them. A submission is either
//! *illegal* (fails validation; recorded, never evaluated), a *duplicate*
//! (same realised network as an earlier submission; recorded, never
//! re-evaluated), or *novel* (evaluated, charged against the budget). The
//! incumbent best only moves when an evaluated candidate satisfies the cost
//! constraint **and** strictly beats the incumbent's accuracy, so ties keep
//! the earlier architecture.
//!
//! The visited set grows monotonically and is keyed by
//! [`Arch::canonical_key`], i.e. by the realised network rather than the raw
//! encoding. Budget counts evaluator calls only: duplicates and illegal
//! candidates are free, which keeps comparisons between methods honest.

use crate::archspace::{Arch, CostEstimate, SearchSpace};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

/// Which cost figure a constraint binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    None,
    Flops,
    Params,
}

/// An inclusive upper bound on one cost metric. `metric: none` accepts
/// everything and is the default for spaces whose benchmark has no
/// deployment constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub metric: CostMetric,
    pub bound: f64,
}

impl Constraint {
    pub fn none() -> Self {
        Constraint {
            metric: CostMetric::None,
            bound: 0.0,
        }
    }

    pub fn flops(bound: f64) -> Self {
        Constraint {
            metric: CostMetric::Flops,
            bound,
        }
    }

    pub fn params(bound: f64) -> Self {
        Constraint {
            metric: CostMetric::Params,
            bound,
        }
    }

    /// Inclusive check: a cost exactly on the bound satisfies the
    /// constraint.
    pub fn check(&self, cost: &CostEstimate) -> bool {
        match self.metric {
            CostMetric::None => true,
            CostMetric::Flops => cost.flops_m <= self.bound,
            CostMetric::Params => cost.params_m <= self.bound,
        }
    }

    pub fn is_none(&self) -> bool {
        self.metric == CostMetric::None
    }
}

impl Default for Constraint {
    fn default() -> Self {
        Constraint::none()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.metric {
            CostMetric::None => write!(f, "none"),
            CostMetric::Flops => write!(f, "flops:{}", self.bound),
            CostMetric::Params => write!(f, "params:{}", self.bound),
        }
    }
}

impl FromStr for Constraint {
    type Err = String;

    /// Accepts `none`, `flops:<bound>`, or `params:<bound>` (mega-units).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(Constraint::none());
        }
        let (metric, bound) = s
            .split_once(':')
            .ok_or_else(|| format!("constraint {s:?} must be none or metric:value"))?;
        let bound: f64 = bound
            .trim()
            .parse()
            .map_err(|_| format!("constraint bound {bound:?} is not a number"))?;
        if !bound.is_finite() || bound < 0.0 {
            return Err(format!("constraint bound {bound} must be non-negative"));
        }
        match metric.trim().to_ascii_lowercase().as_str() {
            "flops" => Ok(Constraint::flops(bound)),
            "params" => Ok(Constraint::params(bound)),
            other => Err(format!("unknown constraint metric {other:?}")),
        }
    }
}

/// What an evaluator reports for one architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Accuracy percentage in `[0, 100]`.
    pub accuracy: f64,
    pub cost: CostEstimate,
}

/// Evaluation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no benchmark entry for {0}")]
    MissingEntry(String),
    #[error("evaluator does not support this architecture: {0}")]
    Unsupported(String),
}

/// A ground-truth oracle for one architecture. Implementations must be
/// deterministic: the same architecture always yields the same numbers.
pub trait Evaluator: Sync {
    fn evaluate(&self, arch: &Arch) -> Result<Evaluation, EvalError>;
    /// Short human-readable identity for manifests.
    fn describe(&self) -> String;
}

/// Benchmark-backed evaluator for the cell space: accuracy from the table,
/// cost from the analytic model.
pub struct BenchEvaluator {
    table: std::sync::Arc<crate::bench::BenchTable>,
    dataset: crate::bench::DatasetId,
}

impl BenchEvaluator {
    pub fn new(
        table: std::sync::Arc<crate::bench::BenchTable>,
        dataset: crate::bench::DatasetId,
    ) -> Self {
        BenchEvaluator { table, dataset }
    }

    pub fn dataset(&self) -> crate::bench::DatasetId {
        self.dataset
    }

    pub fn table(&self) -> &crate::bench::BenchTable {
        &self.table
    }
}

impl Evaluator for BenchEvaluator {
    fn evaluate(&self, arch: &Arch) -> Result<Evaluation, EvalError> {
        match arch {
            Arch::Nb201(cell) => {
                let accuracy = self
                    .table
                    .lookup(cell, self.dataset)
                    .map_err(|_| EvalError::MissingEntry(cell.to_arch_string()))?;
                Ok(Evaluation {
                    accuracy,
                    cost: crate::archspace::cost::nb201_cost(cell),
                })
            }
            Arch::Macro(_) => Err(EvalError::Unsupported(
                "benchmark tables cover the cell space only".to_string(),
            )),
        }
    }

    fn describe(&self) -> String {
        format!(
            "bench(digest={:016x}, dataset={})",
            self.table.digest(),
            self.dataset
        )
    }
}

/// Shared configuration for a single search run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Maximum number of evaluator calls.
    pub arch_budget: usize,
    /// Maximum number of search iterations (meaning is method-specific).
    pub iteration_limit: usize,
    /// Optional early-stop accuracy: the run ends as soon as the incumbent
    /// best reaches this value. Off by default.
    pub target: Option<f64>,
    pub constraint: Constraint,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            arch_budget: 100,
            iteration_limit: 20,
            target: None,
            constraint: Constraint::none(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.arch_budget == 0 {
            return Err(SearchError::Config("arch_budget must be at least 1".into()));
        }
        if self.iteration_limit == 0 {
            return Err(SearchError::Config(
                "iteration_limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Search-level failures.
#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("architecture budget exhausted")]
    BudgetExhausted,
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("bad configuration: {0}")]
    Config(String),
}

/// One submission, as recorded in the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Iteration the submission belongs to (1-based; 0 for methods without
    /// an iteration structure's setup phase).
    pub iteration: usize,
    /// Text form of the candidate; for unparseable proposals, the offending
    /// snippet.
    pub arch: String,
    /// Accuracy, present only when the candidate was evaluated.
    pub accuracy: Option<f64>,
    pub cost: Option<CostEstimate>,
    pub legal: bool,
    pub duplicate: bool,
    /// Whether the evaluated candidate satisfied the cost constraint.
    pub within_constraint: Option<bool>,
    /// Incumbent best accuracy after this record.
    pub best_so_far: Option<f64>,
}

/// Submission tallies for a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Candidates offered to the session, including unparseable ones.
    pub generated: usize,
    /// Unparseable or illegal candidates.
    pub invalid: usize,
    /// Legal candidates that repeated an already-visited network.
    pub duplicate: usize,
    /// Evaluator calls charged to the budget.
    pub evaluated: usize,
}

/// Outcome of a completed (or aborted) run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub method: String,
    pub space: String,
    pub seed: u64,
    pub best_arch: Option<String>,
    pub best_accuracy: Option<f64>,
    pub best_cost: Option<CostEstimate>,
    pub evaluations: usize,
    pub iterations: usize,
    pub counters: Counters,
    /// True when the run ended early for an abnormal reason (backend
    /// failure); normal termination by budget, iteration limit, or target is
    /// not partial.
    pub partial: bool,
    pub abort_reason: Option<String>,
    pub trajectory: Vec<EvalRecord>,
}

/// Archive plus budget accounting for one run.
pub struct Session<'a> {
    space: &'a SearchSpace,
    evaluator: &'a dyn Evaluator,
    config: &'a SearchConfig,
    visited: HashSet<String>,
    accuracy_cache: HashMap<String, f64>,
    trajectory: Vec<EvalRecord>,
    counters: Counters,
    best: Option<(Arch, f64, CostEstimate)>,
}

impl<'a> Session<'a> {
    pub fn new(
        space: &'a SearchSpace,
        evaluator: &'a dyn Evaluator,
        config: &'a SearchConfig,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        Ok(Session {
            space,
            evaluator,
            config,
            visited: HashSet::new(),
            accuracy_cache: HashMap::new(),
            trajectory: Vec::new(),
            counters: Counters::default(),
            best: None,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        self.space
    }

    pub fn config(&self) -> &SearchConfig {
        self.config
    }

    pub fn evaluations(&self) -> usize {
        self.counters.evaluated
    }

    pub fn budget_left(&self) -> usize {
        self.config.arch_budget - self.counters.evaluated
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn best(&self) -> Option<(&Arch, f64, &CostEstimate)> {
        self.best.as_ref().map(|(a, acc, c)| (a, *acc, c))
    }

    /// True once the incumbent best has reached the configured target.
    pub fn target_reached(&self) -> bool {
        match (self.config.target, &self.best) {
            (Some(t), Some((_, acc, _))) => *acc >= t,
            _ => false,
        }
    }

    /// Accuracy previously recorded for a canonical key, if any.
    pub fn cached_accuracy(&self, key: &str) -> Option<f64> {
        self.accuracy_cache.get(key).copied()
    }

    pub fn is_visited(&self, arch: &Arch) -> bool {
        self.visited.contains(&arch.canonical_key())
    }

    /// Record a proposal that never became an architecture (unparseable
    /// text). Costs no budget.
    pub fn record_unparseable(&mut self, snippet: &str, iteration: usize) -> &EvalRecord {
        self.counters.generated += 1;
        self.counters.invalid += 1;
        self.trajectory.push(EvalRecord {
            iteration,
            arch: snippet.to_string(),
            accuracy: None,
            cost: None,
            legal: false,
            duplicate: false,
            within_constraint: None,
            best_so_far: self.best.as_ref().map(|(_, acc, _)| *acc),
        });
        self.trajectory.last().expect("just pushed")
    }

    /// Submit one candidate. Illegal and duplicate candidates are recorded
    /// and cost nothing; novel legal candidates are evaluated and charged
    /// against the budget. Fails with [`SearchError::BudgetExhausted`] when
    /// a novel candidate arrives after the budget is spent.
    pub fn submit(&mut self, arch: &Arch, iteration: usize) -> Result<&EvalRecord, SearchError> {
        self.counters.generated += 1;
        let best_acc = |best: &Option<(Arch, f64, CostEstimate)>| {
            best.as_ref().map(|(_, acc, _)| *acc)
        };
        if self.space.validate(arch).is_err() {
            self.counters.invalid += 1;
            self.trajectory.push(EvalRecord {
                iteration,
                arch: arch.to_text(),
                accuracy: None,
                cost: None,
                legal: false,
                duplicate: false,
                within_constraint: None,
                best_so_far: best_acc(&self.best),
            });
            return Ok(self.trajectory.last().expect("just pushed"));
        }
        let key = arch.canonical_key();
        if self.visited.contains(&key) {
            self.counters.duplicate += 1;
            self.trajectory.push(EvalRecord {
                iteration,
                arch: arch.to_text(),
                accuracy: None,
                cost: None,
                legal: true,
                duplicate: true,
                within_constraint: None,
                best_so_far: best_acc(&self.best),
            });
            return Ok(self.trajectory.last().expect("just pushed"));
        }
        if self.budget_left() == 0 {
            // undo the generated count: the candidate was refused, not
            // processed, so a retry after this error is not double-counted
            self.counters.generated -= 1;
            return Err(SearchError::BudgetExhausted);
        }
        let evaluation = self.evaluator.evaluate(arch)?;
        self.visited.insert(key.clone());
        self.accuracy_cache.insert(key, evaluation.accuracy);
        self.counters.evaluated += 1;
        let within = self.config.constraint.check(&evaluation.cost);
        if within {
            let improves = match &self.best {
                Some((_, incumbent, _)) => evaluation.accuracy > *incumbent,
                None => true,
            };
            if improves {
                self.best = Some((arch.clone(), evaluation.accuracy, evaluation.cost));
            }
        }
        self.trajectory.push(EvalRecord {
            iteration,
            arch: arch.to_text(),
            accuracy: Some(evaluation.accuracy),
            cost: Some(evaluation.cost),
            legal: true,
            duplicate: false,
            within_constraint: Some(within),
            best_so_far: best_acc(&self.best),
        });
        Ok(self.trajectory.last().expect("just pushed"))
    }

    /// Close the session into a result.
    pub fn finish(
        self,
        method: &str,
        iterations: usize,
        abort_reason: Option<String>,
    ) -> SearchResult {
        SearchResult {
            method: method.to_string(),
            space: self.space.name(),
            seed: self.config.seed,
            best_arch: self.best.as_ref().map(|(a, _, _)| a.to_text()),
            best_accuracy: self.best.as_ref().map(|(_, acc, _)| *acc),
            best_cost: self.best.as_ref().map(|(_, _, c)| *c),
            evaluations: self.counters.evaluated,
            iterations,
            counters: self.counters,
            partial: abort_reason.is_some(),
            abort_reason,
            trajectory: self.trajectory,
        }
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

/// Summarise final accuracies across runs. Returns `None` for empty input.
/// The standard deviation is the population form (divide by `n`), matching
/// how small samples of repeated runs are conventionally reported.
pub fn summarize(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(Stats {
        mean,
        std: var.sqrt(),
    })
}

/// Write a trajectory as JSON lines, one record per line.
pub fn write_trajectory_jsonl(
    result: &SearchResult,
    mut w: impl std::io::Write,
) -> std::io::Result<()> {
    for record in &result.trajectory {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Write a trajectory as CSV with flattened cost columns.
pub fn write_trajectory_csv(
    result: &SearchResult,
    w: impl std::io::Write,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record([
        "iteration",
        "arch",
        "accuracy",
        "flops_m",
        "params_m",
        "legal",
        "duplicate",
        "within_constraint",
        "best_so_far",
    ])?;
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let fmt_bool_opt = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &result.trajectory {
        writer.write_record([
            r.iteration.to_string(),
            r.arch.replace('\n', "; "),
            fmt_opt(r.accuracy),
            fmt_opt(r.cost.map(|c| c.flops_m)),
            fmt_opt(r.cost.map(|c| c.params_m)),
            r.legal.to_string(),
            r.duplicate.to_string(),
            fmt_bool_opt(r.within_constraint),
            fmt_opt(r.best_so_far),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write the best-so-far curve: one row per iteration, suitable for
/// best-versus-iteration comparison plots.
pub fn write_curve_csv(result: &SearchResult, w: impl std::io::Write) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(["iteration", "evaluations", "best_accuracy"])?;
    let max_iter = result.trajectory.iter().map(|r| r.iteration).max();
    if let Some(max_iter) = max_iter {
        let min_iter = result
            .trajectory
            .iter()
            .map(|r| r.iteration)
            .min()
            .unwrap_or(0);
        let mut best: Option<f64> = None;
        let mut evals = 0usize;
        for it in min_iter..=max_iter {
            for r in result.trajectory.iter().filter(|r| r.iteration == it) {
                if r.accuracy.is_some() && !r.duplicate {
                    evals += 1;
                }
                if let Some(b) = r.best_so_far {
                    best = Some(b);
                }
            }
            writer.write_record([
                it.to_string(),
                evals.to_string(),
                best.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspace::nb201::{Nb201Arch, OpKind};
    use crate::synthetic::MonotoneLandscape;

    fn cell(ops: [OpKind; 6]) -> Arch {
        Arch::Nb201(Nb201Arch::new(ops))
    }

    #[test]
    fn submit_dedup_and_budget_accounting() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let config = SearchConfig {
            arch_budget: 2,
            ..SearchConfig::default()
        };
        let mut session = Session::new(&space, &eval, &config).unwrap();
        let a = cell([OpKind::None; 6]);
        let b = cell([OpKind::NorConv3x3; 6]);
        let r1 = session.submit(&a, 1).unwrap().clone();
        assert_eq!(r1.accuracy, Some(20.0));
        let r2 = session.submit(&a, 1).unwrap().clone();
        assert!(r2.duplicate);
        assert_eq!(r2.accuracy, None);
        assert_eq!(session.evaluations(), 1);
        let r3 = session.submit(&b, 2).unwrap().clone();
        assert_eq!(r3.accuracy, Some(80.0));
        assert_eq!(session.budget_left(), 0);
        // duplicates are still recordable at zero budget
        assert!(session.submit(&b, 2).unwrap().duplicate);
        // a novel candidate is refused
        let c = cell([OpKind::SkipConnect; 6]);
        assert!(matches!(
            session.submit(&c, 3),
            Err(SearchError::BudgetExhausted)
        ));
        let result = session.finish("test", 3, None);
        assert_eq!(result.counters.generated, 4);
        assert_eq!(result.counters.duplicate, 2);
        assert_eq!(result.counters.evaluated, 2);
        assert_eq!(result.best_accuracy, Some(80.0));
    }

    #[test]
    fn best_requires_constraint_and_strict_improvement() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        // all-conv cells are expensive; bound below their cost
        let all_conv_cost = crate::archspace::cost::nb201_cost(&Nb201Arch::new(
            [OpKind::NorConv3x3; 6],
        ));
        let config = SearchConfig {
            arch_budget: 10,
            constraint: Constraint::flops(all_conv_cost.flops_m - 1.0),
            ..SearchConfig::default()
        };
        let mut session = Session::new(&space, &eval, &config).unwrap();
        let cheap = cell([
            OpKind::NorConv3x3,
            OpKind::None,
            OpKind::None,
            OpKind::None,
            OpKind::None,
            OpKind::None,
        ]);
        session.submit(&cheap, 1).unwrap();
        assert_eq!(session.best().unwrap().1, 30.0);
        // higher accuracy but violates the constraint: best must not move
        let expensive = cell([OpKind::NorConv3x3; 6]);
        let r = session.submit(&expensive, 1).unwrap().clone();
        assert_eq!(r.within_constraint, Some(false));
        assert_eq!(session.best().unwrap().1, 30.0);
        // an accuracy tie keeps the earlier architecture
        let other_cheap = cell([
            OpKind::None,
            OpKind::NorConv3x3,
            OpKind::None,
            OpKind::None,
            OpKind::None,
            OpKind::None,
        ]);
        session.submit(&other_cheap, 2).unwrap();
        let (best_arch, best_acc, _) = session.best().unwrap();
        assert_eq!(best_acc, 30.0);
        assert_eq!(best_arch.to_text(), cheap.to_text());
    }

    #[test]
    fn constraint_bound_is_inclusive() {
        let est = CostEstimate {
            flops_m: 330.0,
            params_m: 5.0,
        };
        assert!(Constraint::flops(330.0).check(&est));
        assert!(!Constraint::flops(329.99).check(&est));
        assert!(Constraint::none().check(&est));
        assert!(Constraint::params(5.0).check(&est));
    }

    #[test]
    fn constraint_parses_from_flag_syntax() {
        assert_eq!("none".parse::<Constraint>().unwrap(), Constraint::none());
        assert_eq!(
            "flops:330".parse::<Constraint>().unwrap(),
            Constraint::flops(330.0)
        );
        assert_eq!(
            "params:6.5".parse::<Constraint>().unwrap(),
            Constraint::params(6.5)
        );
        assert!("watts:3".parse::<Constraint>().is_err());
        assert!("flops".parse::<Constraint>().is_err());
    }

    #[test]
    fn best_so_far_is_monotone_along_the_trajectory() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let config = SearchConfig::default();
        let mut session = Session::new(&space, &eval, &config).unwrap();
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for i in 0..50 {
            let arch = space.random_arch(&mut rng);
            let _ = session.submit(&arch, i / 5 + 1);
        }
        let result = session.finish("test", 10, None);
        let mut last = f64::MIN;
        for r in &result.trajectory {
            if let Some(b) = r.best_so_far {
                assert!(b >= last, "best-so-far regressed");
                last = b;
            }
        }
    }

    #[test]
    fn summarize_uses_population_std() {
        let stats = summarize(&[94.0, 94.4]).unwrap();
        assert!((stats.mean - 94.2).abs() < 1e-12);
        assert!((stats.std - 0.2).abs() < 1e-12);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn target_gates_on_incumbent_best() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let config = SearchConfig {
            target: Some(80.0),
            ..SearchConfig::default()
        };
        let mut session = Session::new(&space, &eval, &config).unwrap();
        session.submit(&cell([OpKind::None; 6]), 1).unwrap();
        assert!(!session.target_reached());
        session.submit(&cell([OpKind::NorConv3x3; 6]), 1).unwrap();
        assert!(session.target_reached());
    }
}
