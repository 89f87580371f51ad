//! Conventional search baselines: random search, an evolutionary algorithm,
//! and a REINFORCE-style policy-gradient controller.
//!
//! All three drive the same [`Session`] contract as the collaborative
//! search, so their results are directly comparable: identical budget
//! accounting, identical dedup rules, identical result schema. Method
//! hyperparameters follow the comparison setup: budget 100, EA population
//! 10 over 10 generations with 50% elite preservation, RL learning rate
//! 0.01 with EMA baseline momentum 0.9.

use crate::archspace::nb201::Nb201Arch;
use crate::archspace::{Arch, SearchSpace};
use crate::search::{Evaluator, SearchConfig, SearchError, SearchResult, Session};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

fn rng_for(config: &SearchConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed)
}

/// Draw an architecture not yet in the archive. Rejection-samples first;
/// for enumerable spaces a deterministic sweep from a random offset takes
/// over once rejections suggest the space is nearly exhausted, so a full
/// budget really does visit every architecture.
fn novel_random<R: Rng + ?Sized>(
    space: &SearchSpace,
    session: &Session,
    rng: &mut R,
) -> Option<Arch> {
    const REJECTION_CAP: usize = 10_000;
    for _ in 0..REJECTION_CAP {
        let arch = space.random_arch(rng);
        if !session.is_visited(&arch) {
            return Some(arch);
        }
    }
    if let Some(n) = space.enumerable_size() {
        let start = rng.gen_range(0..n);
        for k in 0..n {
            let ix = ((start + k) % n) as u32;
            // only the cell space is enumerable
            if let SearchSpace::Nb201 = space {
                let arch = Arch::Nb201(Nb201Arch::from_index(ix)?);
                if !session.is_visited(&arch) {
                    return Some(arch);
                }
            }
        }
    }
    None
}

/// Uniform i.i.d. sampling without replacement. Runs to the budget (or the
/// optional target); each evaluation is one iteration. The iteration limit
/// does not apply — random search has no iteration structure.
pub fn random_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    config: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    let mut session = Session::new(space, evaluator, config)?;
    let mut rng = rng_for(config);
    let mut iter = 0usize;
    while session.budget_left() > 0 && !session.target_reached() {
        let Some(arch) = novel_random(space, &session, &mut rng) else {
            break; // space exhausted
        };
        iter += 1;
        session.submit(&arch, iter)?;
    }
    Ok(session.finish("rs", iter, None))
}

/// Evolutionary-search knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EaConfig {
    pub population: usize,
    /// Total generations, counting the random initial population as
    /// generation 1 so `population x iterations` bounds the worst-case
    /// number of evaluations.
    pub iterations: usize,
    pub elite_fraction: f64,
    /// Per-dimension mutation probability applied to every offspring.
    pub mutation_rate: f64,
    /// Probability an offspring comes from crossover of two elites rather
    /// than mutation of one.
    pub crossover_prob: f64,
    /// How many times a duplicate offspring is redrawn before being
    /// admitted as a (free) duplicate.
    pub duplicate_retry_cap: usize,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig {
            population: 10,
            iterations: 10,
            elite_fraction: 0.5,
            mutation_rate: 0.1,
            crossover_prob: 0.5,
            duplicate_retry_cap: 10,
        }
    }
}

impl EaConfig {
    pub fn validate(&self, arch_budget: usize) -> Result<(), SearchError> {
        if self.population < 2 {
            return Err(SearchError::Config("population must be at least 2".into()));
        }
        if self.iterations == 0 {
            return Err(SearchError::Config("iterations must be at least 1".into()));
        }
        if self.population * self.iterations > arch_budget {
            return Err(SearchError::Config(format!(
                "population x iterations ({} x {}) exceeds the budget of {arch_budget}",
                self.population, self.iterations
            )));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(SearchError::Config(
                "elite_fraction must be in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(SearchError::Config("mutation_rate must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(SearchError::Config(
                "crossover_prob must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).ceil() as usize)
            .clamp(1, self.population)
    }
}

/// Fitness used for elite selection: the archived accuracy, demoted to
/// negative infinity when the architecture violates the cost constraint
/// (or was never evaluated at all).
fn fitness(session: &Session, space: &SearchSpace, config: &SearchConfig, arch: &Arch) -> f64 {
    let Some(acc) = session.cached_accuracy(&arch.canonical_key()) else {
        return f64::NEG_INFINITY;
    };
    if config.constraint.is_none() {
        return acc;
    }
    match space.estimate_cost(arch) {
        Ok(cost) if config.constraint.check(&cost) => acc,
        _ => f64::NEG_INFINITY,
    }
}

/// Generational evolutionary search: evaluate the population, keep the top
/// elite fraction, refill by crossover/mutation of uniformly sampled
/// elites. Every generation is submitted whole, so elites reappear in the
/// trajectory as free duplicates and the evaluation count stays honest.
pub fn evolutionary_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    config: &SearchConfig,
    ea: &EaConfig,
) -> Result<SearchResult, SearchError> {
    ea.validate(config.arch_budget)?;
    let mut session = Session::new(space, evaluator, config)?;
    let mut rng = rng_for(config);

    // generation 1: a random population, deduplicated on arrival
    let mut population: Vec<Arch> = Vec::new();
    for _ in 0..ea.population {
        let Some(arch) = novel_random(space, &session, &mut rng) else {
            break;
        };
        match session.submit(&arch, 1) {
            Ok(_) => population.push(arch),
            Err(SearchError::BudgetExhausted) => break,
            Err(e) => return Err(e),
        }
        if session.target_reached() {
            return Ok(session.finish("ea", 1, None));
        }
    }

    let mut generation = 1usize;
    'generations: while generation < ea.iterations
        && session.budget_left() > 0
        && !session.target_reached()
        && !population.is_empty()
    {
        generation += 1;
        // rank distinct members only: duplicate pass-throughs must not let
        // one genotype occupy several elite slots
        let mut seen = std::collections::HashSet::new();
        let mut ranked: Vec<(usize, f64)> = population
            .iter()
            .enumerate()
            .filter(|(_, a)| seen.insert(a.canonical_key()))
            .map(|(i, a)| (i, fitness(&session, space, config, a)))
            .collect();
        // stable sort: accuracy ties keep the earlier member
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite fitness"));
        let elites: Vec<Arch> = ranked
            .iter()
            .take(ea.elite_count())
            .map(|&(i, _)| population[i].clone())
            .collect();

        let mut next = elites.clone();
        while next.len() < ea.population {
            let child = spawn_child(space, ea, &elites, &session, &mut rng)?;
            next.push(child);
        }
        for member in &next {
            match session.submit(member, generation) {
                Ok(_) => {}
                Err(SearchError::BudgetExhausted) => {
                    population = next;
                    break 'generations;
                }
                Err(e) => return Err(e),
            }
            if session.target_reached() {
                population = next;
                break 'generations;
            }
        }
        population = next;
    }
    let _ = population;
    Ok(session.finish("ea", generation, None))
}

/// Produce one offspring from the elites, redrawing duplicates up to the
/// retry cap. The final draw is returned even if still a duplicate — the
/// session admits it for free, keeping the population size stable.
fn spawn_child<R: Rng + ?Sized>(
    space: &SearchSpace,
    ea: &EaConfig,
    elites: &[Arch],
    session: &Session,
    rng: &mut R,
) -> Result<Arch, SearchError> {
    let mut last: Option<Arch> = None;
    for _ in 0..=ea.duplicate_retry_cap {
        // either-or operator mix: crossover of two elites, or mutation of one
        let child = if elites.len() >= 2 && rng.gen_bool(ea.crossover_prob) {
            let i = rng.gen_range(0..elites.len());
            let mut j = rng.gen_range(0..elites.len() - 1);
            if j >= i {
                j += 1;
            }
            space
                .crossover(&elites[i], &elites[j], rng)
                .map_err(|e| SearchError::Config(e.to_string()))?
        } else {
            let i = rng.gen_range(0..elites.len());
            space
                .mutate(&elites[i], rng, ea.mutation_rate)
                .map_err(|e| SearchError::Config(e.to_string()))?
        };
        if !session.is_visited(&child) {
            return Ok(child);
        }
        last = Some(child);
    }
    Ok(last.expect("at least one draw"))
}

/// A factorized categorical policy: independent softmax logits per
/// dimension, initialized uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalPolicy {
    logits: Vec<Vec<f64>>,
}

impl CategoricalPolicy {
    pub fn new(dims: &[usize]) -> Self {
        CategoricalPolicy {
            logits: dims.iter().map(|&c| vec![0.0; c]).collect(),
        }
    }

    pub fn from_logits(logits: Vec<Vec<f64>>) -> Self {
        CategoricalPolicy { logits }
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    pub fn num_dims(&self) -> usize {
        self.logits.len()
    }

    /// Softmax probabilities for one dimension.
    pub fn probs(&self, dim: usize) -> Vec<f64> {
        let row = &self.logits[dim];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Sample one choice per dimension.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.logits.len())
            .map(|d| {
                let probs = self.probs(d);
                let draw: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        return k;
                    }
                }
                probs.len() - 1 // guard against rounding at the top end
            })
            .collect()
    }

    /// REINFORCE gradient of `advantage x log pi(actions)` with respect to
    /// the logits: `advantage x (1[k = a_d] - pi_d(k))` for every dimension
    /// `d` and choice `k`.
    pub fn grad(&self, actions: &[usize], advantage: f64) -> Vec<Vec<f64>> {
        assert_eq!(actions.len(), self.logits.len(), "one action per dimension");
        (0..self.logits.len())
            .map(|d| {
                let probs = self.probs(d);
                probs
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| advantage * ((k == actions[d]) as u8 as f64 - p))
                    .collect()
            })
            .collect()
    }

    /// Gradient-ascent step.
    pub fn apply(&mut self, grad: &[Vec<f64>], learning_rate: f64) {
        for (row, g) in self.logits.iter_mut().zip(grad.iter()) {
            for (z, dg) in row.iter_mut().zip(g.iter()) {
                *z += learning_rate * dg;
            }
        }
    }
}

/// REINFORCE knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlConfig {
    pub learning_rate: f64,
    /// Momentum of the exponential-moving-average reward baseline.
    pub ema_momentum: f64,
    /// Samples drawn (and, when novel, evaluated) per policy update.
    pub batch_size: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            learning_rate: 0.01,
            ema_momentum: 0.9,
            batch_size: 5,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SearchError::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.ema_momentum) {
            return Err(SearchError::Config("ema_momentum must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(SearchError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Policy-gradient search. Each step samples a batch from the factorized
/// policy, reads accuracies (novel candidates are evaluated and charged,
/// revisits reuse the archived value for free), and takes one REINFORCE
/// step against the EMA baseline. Rewards are accuracies scaled to
/// `[0, 1]`. The first batch uses within-batch mean centering to seed the
/// baseline. A hard step cap bounds the run even if the policy collapses
/// onto already-visited architectures.
pub fn rl_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    config: &SearchConfig,
    rl: &RlConfig,
) -> Result<SearchResult, SearchError> {
    rl.validate()?;
    let mut session = Session::new(space, evaluator, config)?;
    let mut rng = rng_for(config);
    let dims = space.dims();
    let mut policy = CategoricalPolicy::new(&dims);
    let mut baseline: Option<f64> = None;
    let step_cap = 20 * config.arch_budget.max(1);
    let mut step = 0usize;

    'steps: while step < step_cap && session.budget_left() > 0 && !session.target_reached() {
        step += 1;
        let mut batch: Vec<(Vec<usize>, f64)> = Vec::with_capacity(rl.batch_size);
        for _ in 0..rl.batch_size {
            let actions = policy.sample(&mut rng);
            let arch = space
                .arch_from_choices(&actions)
                .map_err(|e| SearchError::Config(e.to_string()))?;
            let key = arch.canonical_key();
            let reward = if let Some(acc) = session.cached_accuracy(&key) {
                // revisit: free, still informs the policy
                session.submit(&arch, step)?;
                acc / 100.0
            } else {
                match session.submit(&arch, step) {
                    Ok(record) => match record.accuracy {
                        Some(acc) => acc / 100.0,
                        None => continue, // illegal candidate carries no reward
                    },
                    Err(SearchError::BudgetExhausted) => {
                        if batch.is_empty() {
                            break 'steps;
                        }
                        break;
                    }
                    Err(e) => return Err(e),
                }
            };
            batch.push((actions, reward));
            if session.target_reached() {
                break;
            }
        }
        if batch.is_empty() {
            continue;
        }
        let mean = batch.iter().map(|(_, r)| r).sum::<f64>() / batch.len() as f64;
        let b = *baseline.get_or_insert(mean);
        let mut grad: Vec<Vec<f64>> = dims.iter().map(|&c| vec![0.0; c]).collect();
        for (actions, reward) in &batch {
            let g = policy.grad(actions, reward - b);
            for (row, gr) in grad.iter_mut().zip(g.iter()) {
                for (x, y) in row.iter_mut().zip(gr.iter()) {
                    *x += y;
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for row in grad.iter_mut() {
            for x in row.iter_mut() {
                *x *= scale;
            }
        }
        policy.apply(&grad, rl.learning_rate);
        baseline = Some(rl.ema_momentum * b + (1.0 - rl.ema_momentum) * mean);
    }
    Ok(session.finish("rl", step, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{synthetic_optimum, synthetic_table, MonotoneLandscape};

    #[test]
    fn random_search_respects_budget_and_records_everything() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let config = SearchConfig {
            arch_budget: 25,
            seed: 3,
            ..SearchConfig::default()
        };
        let result = random_search(&space, &eval, &config).unwrap();
        assert_eq!(result.evaluations, 25);
        assert_eq!(result.counters.duplicate, 0, "sampling is without replacement");
        assert_eq!(result.trajectory.len(), 25);
    }

    #[test]
    fn random_search_with_budget_one_returns_the_single_sample() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let config = SearchConfig {
            arch_budget: 1,
            seed: 9,
            ..SearchConfig::default()
        };
        let result = random_search(&space, &eval, &config).unwrap();
        assert_eq!(result.evaluations, 1);
        assert_eq!(result.best_arch, Some(result.trajectory[0].arch.clone()));
    }

    #[test]
    fn exhaustive_random_search_finds_the_table_optimum() {
        let table = std::sync::Arc::new(synthetic_table(13));
        let id = crate::bench::DatasetId {
            dataset: crate::bench::Dataset::Cifar10,
            split: crate::bench::Split::Valid,
        };
        let eval = crate::search::BenchEvaluator::new(table.clone(), id);
        let config = SearchConfig {
            arch_budget: 15_625,
            seed: 1,
            ..SearchConfig::default()
        };
        let space = SearchSpace::Nb201;
        let result = random_search(&space, &eval, &config).unwrap();
        assert_eq!(result.evaluations, 15_625, "every cell visited exactly once");
        let (opt_arch, opt_acc) = table.optimal(id).unwrap();
        assert_eq!(result.best_arch, Some(opt_arch.to_arch_string()));
        assert_eq!(result.best_accuracy, Some(opt_acc));
        assert_eq!(opt_arch, synthetic_optimum(13));
    }

    #[test]
    fn ea_converges_on_the_monotone_landscape() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        // generous sanity budget; elites ride along as free duplicates, so
        // the actual spend is population + (iterations-1) x offspring
        let ea = EaConfig {
            iterations: 25,
            ..EaConfig::default()
        };
        let mut hits = 0;
        for seed in 0..10 {
            let config = SearchConfig {
                arch_budget: 250,
                seed,
                ..SearchConfig::default()
            };
            let result = evolutionary_search(&space, &eval, &config, &ea).unwrap();
            assert!(result.evaluations <= 250);
            if result.best_accuracy == Some(80.0) {
                hits += 1;
            }
        }
        assert!(hits >= 9, "EA reached the optimum in only {hits}/10 seeds");
    }

    #[test]
    fn full_elitism_freezes_the_population() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let ea = EaConfig {
            elite_fraction: 1.0,
            ..EaConfig::default()
        };
        let config = SearchConfig {
            arch_budget: 100,
            seed: 4,
            ..SearchConfig::default()
        };
        let result = evolutionary_search(&space, &eval, &config, &ea).unwrap();
        assert_eq!(
            result.evaluations, 10,
            "pure elitism evaluates only the initial population"
        );
        // generations 2..10 resubmit the same ten members
        assert_eq!(result.counters.duplicate, 90);
    }

    #[test]
    fn ea_config_validation_catches_budget_overrun() {
        let ea = EaConfig {
            population: 20,
            iterations: 10,
            ..EaConfig::default()
        };
        assert!(ea.validate(100).is_err());
        assert!(EaConfig::default().validate(100).is_ok());
    }

    #[test]
    fn bandit_policy_concentrates_on_the_good_arm() {
        // single dimension, two arms, rewards {bad: 0.0, good: 1.0}
        let mut hits = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut policy = CategoricalPolicy::new(&[2]);
            let mut baseline: Option<f64> = None;
            for _ in 0..50 {
                let actions = policy.sample(&mut rng);
                let reward = if actions[0] == 1 { 1.0 } else { 0.0 };
                let b = *baseline.get_or_insert(reward);
                let grad = policy.grad(&actions, reward - b);
                policy.apply(&grad, 0.5);
                baseline = Some(0.9 * b + 0.1 * reward);
            }
            if policy.probs(0)[1] > 0.9 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "bandit converged in only {hits}/10 seeds");
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        // two-dimension toy space with a fixed reward table
        let rewards = |a: usize, b: usize| -> f64 {
            let table = [[0.1, 0.9, 0.4], [0.7, 0.2, 0.5]];
            table[a][b]
        };
        let base = vec![vec![0.3, -0.2], vec![0.1, 0.5, -0.4]];
        let policy = CategoricalPolicy::from_logits(base.clone());
        // expected reward and its analytic policy gradient
        let j = |p: &CategoricalPolicy| -> f64 {
            let pa = p.probs(0);
            let pb = p.probs(1);
            let mut total = 0.0;
            for (a, &qa) in pa.iter().enumerate() {
                for (b, &qb) in pb.iter().enumerate() {
                    total += qa * qb * rewards(a, b);
                }
            }
            total
        };
        let pa = policy.probs(0);
        let pb = policy.probs(1);
        let mut analytic = vec![vec![0.0; 2], vec![0.0; 3]];
        for (a, &qa) in pa.iter().enumerate() {
            for (b, &qb) in pb.iter().enumerate() {
                let g = policy.grad(&[a, b], rewards(a, b));
                for (row, gr) in analytic.iter_mut().zip(g.iter()) {
                    for (x, y) in row.iter_mut().zip(gr.iter()) {
                        *x += qa * qb * y;
                    }
                }
            }
        }
        let h = 1e-5;
        for d in 0..2 {
            for k in 0..base[d].len() {
                let mut plus = base.clone();
                plus[d][k] += h;
                let mut minus = base.clone();
                minus[d][k] -= h;
                let fd = (j(&CategoricalPolicy::from_logits(plus))
                    - j(&CategoricalPolicy::from_logits(minus)))
                    / (2.0 * h);
                let got = analytic[d][k];
                let denom = fd.abs().max(1e-8);
                assert!(
                    ((got - fd) / denom).abs() < 1e-4,
                    "dim {d} choice {k}: analytic {got} vs finite difference {fd}"
                );
            }
        }
    }

    #[test]
    fn zero_step_policy_stays_uniform() {
        let mut policy = CategoricalPolicy::new(&[4]);
        let grad = policy.grad(&[2], 0.7);
        policy.apply(&grad, 0.0);
        for p in policy.probs(0) {
            assert!((p - 0.25).abs() < 1e-12, "uniform policy drifted");
        }
    }

    #[test]
    fn rl_search_beats_chance_on_the_monotone_landscape() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let rl = RlConfig::default();
        let mut hits = 0;
        for seed in 0..10 {
            let config = SearchConfig {
                arch_budget: 100,
                seed,
                ..SearchConfig::default()
            };
            let result = rl_search(&space, &eval, &config, &rl).unwrap();
            assert!(result.evaluations <= 100);
            if result.best_accuracy.unwrap_or(0.0) >= 50.0 {
                hits += 1;
            }
        }
        assert!(
            hits >= 9,
            "RL found three or more convolutions in only {hits}/10 seeds"
        );
    }

    #[test]
    fn rl_respects_the_budget_and_archive() {
        let space = SearchSpace::Nb201;
        let eval = MonotoneLandscape;
        let config = SearchConfig {
            arch_budget: 30,
            seed: 7,
            ..SearchConfig::default()
        };
        let result = rl_search(&space, &eval, &config, &RlConfig::default()).unwrap();
        assert!(result.evaluations <= 30);
        // no architecture evaluated twice: evaluated records have distinct keys
        let mut seen = std::collections::HashSet::new();
        for r in result.trajectory.iter().filter(|r| r.accuracy.is_some()) {
            assert!(seen.insert(r.arch.clone()), "{} evaluated twice", r.arch);
        }
    }
}
