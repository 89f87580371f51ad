//! Collaborative-LLM search loop.
//!
//! Two conversational roles drive the search. The stateful *Navigator*
//! analyzes evaluation feedback and maintains a natural-language strategy;
//! the stateless *Generator* translates the current strategy into concrete
//! candidate architectures. A deterministic coordinator (this module)
//! validates candidates, deduplicates them against the visited archive,
//! charges the evaluation budget, tracks the best architecture under the
//! cost constraint, and routes fixed-format feedback back to the Navigator.
//!
//! The loop:
//!
//! ```text
//! S0 <- Navigator(target, constraint)
//! for t in 1..=T {
//!     Ct <- Generator(S_{t-1})
//!     evaluate the novel legal members of Ct, update the best
//!     break if the target accuracy is reached (or the budget is spent)
//!     H <- H + (S_{t-1}, Rt)
//!     St <- Navigator(H)
//! }
//! ```
//!
//! A single-session variant ([`sillm_search`]) runs the identical loop with
//! one conversation playing both roles, for ablation comparisons.
//!
//! Prompt templates are external text files (see `prompts/`) with named
//! placeholders; they can be overridden per run from a directory.

pub mod prompts;

use crate::archspace::{CostEstimate, SearchSpace};
use crate::backend::{BackendError, ChatBackend, ChatMessage, SamplingParams};
use crate::search::{Evaluator, SearchConfig, SearchError, SearchResult, Session};
use prompts::PromptSet;
use serde::{Deserialize, Serialize};

/// A natural-language search strategy, indexed by the iteration that
/// produced it (0 = the opening strategy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub t: usize,
    pub text: String,
}

/// Outcome status of one proposed candidate, as reported back to the
/// Navigator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Legal,
    Illegal,
    Duplicate,
}

impl RowStatus {
    fn label(self) -> &'static str {
        match self {
            RowStatus::Legal => "LEGAL",
            RowStatus::Illegal => "ILLEGAL",
            RowStatus::Duplicate => "DUPLICATE",
        }
    }
}

/// One candidate's outcome within an iteration's feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arch: String,
    pub accuracy: Option<f64>,
    pub cost: Option<CostEstimate>,
    pub status: RowStatus,
}

/// One completed iteration: the strategy that drove it and every candidate's
/// outcome, including rejected ones, so the Navigator sees failure modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub strategy: Strategy,
    pub results: Vec<ResultRow>,
}

/// Which roles keep their conversation transcript across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryPolicy {
    pub navigator_retains: bool,
    pub generator_retains: bool,
}

impl Default for MemoryPolicy {
    fn default() -> Self {
        MemoryPolicy {
            navigator_retains: true,
            generator_retains: false,
        }
    }
}

/// How many candidates to request from the Generator each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidatesPolicy {
    /// `max(floor, ceil(remaining_budget / remaining_iterations))`: keeps the
    /// budget exactly spendable within the iteration limit.
    Adaptive { floor: usize },
    Fixed(usize),
}

impl Default for CandidatesPolicy {
    fn default() -> Self {
        CandidatesPolicy::Adaptive { floor: 5 }
    }
}

impl CandidatesPolicy {
    fn request(&self, remaining_budget: usize, remaining_iterations: usize) -> usize {
        match *self {
            CandidatesPolicy::Adaptive { floor } => {
                let iters = remaining_iterations.max(1);
                floor.max(remaining_budget.div_ceil(iters)).max(1)
            }
            CandidatesPolicy::Fixed(n) => n.max(1),
        }
    }
}

/// Configuration of a collaborative run.
#[derive(Debug, Clone)]
pub struct CollmConfig {
    pub search: SearchConfig,
    pub memory: MemoryPolicy,
    pub candidates: CandidatesPolicy,
    /// Single conversation plays both roles (ablation variant).
    pub sillm: bool,
    pub navigator_params: SamplingParams,
    pub generator_params: SamplingParams,
    /// Newest history entries rendered into a memoryless Navigator prompt.
    pub max_history_entries: usize,
}

impl Default for CollmConfig {
    fn default() -> Self {
        CollmConfig {
            search: SearchConfig::default(),
            memory: MemoryPolicy::default(),
            candidates: CandidatesPolicy::default(),
            sillm: false,
            navigator_params: SamplingParams::default(),
            generator_params: SamplingParams::default(),
            max_history_entries: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CollmError {
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("the model returned an empty strategy")]
    EmptyStrategy,
    #[error("no candidate architectures could be extracted from the reply")]
    NoValidCandidates,
}

/// One role's conversation. Keeps the transcript when `retains` is set;
/// otherwise every exchange is a fresh two-message request.
pub struct LlmSession {
    system: String,
    retains: bool,
    params: SamplingParams,
    transcript: Vec<ChatMessage>,
}

impl LlmSession {
    pub fn new(system: impl Into<String>, retains: bool, params: SamplingParams) -> Self {
        LlmSession {
            system: system.into(),
            retains,
            params,
            transcript: Vec::new(),
        }
    }

    /// Messages exchanged so far (system prompt excluded).
    pub fn transcript(&self) -> &[ChatMessage] {
        &self.transcript
    }

    /// Send one user turn and return the reply. With retention, the request
    /// carries the whole transcript and the transcript grows by exactly two
    /// messages (the user turn and the reply); without it, the request is
    /// reconstructible from the system prompt and this turn alone.
    pub fn exchange(
        &mut self,
        backend: &mut dyn ChatBackend,
        user_text: &str,
    ) -> Result<String, BackendError> {
        let mut messages = Vec::with_capacity(self.transcript.len() + 2);
        messages.push(ChatMessage::system(&self.system));
        if self.retains {
            messages.extend(self.transcript.iter().cloned());
        }
        messages.push(ChatMessage::user(user_text));
        let reply = backend.chat(&messages, &self.params)?;
        if self.retains {
            self.transcript.push(ChatMessage::user(user_text));
            self.transcript.push(ChatMessage::assistant(&reply));
        }
        Ok(reply)
    }
}

fn fmt_target(target: Option<f64>) -> String {
    match target {
        Some(t) => format!("{t:.2}% (stop as soon as a candidate reaches it)"),
        None => "none (run until the evaluation budget is spent)".to_string(),
    }
}

fn fmt_constraint(config: &SearchConfig) -> String {
    if config.constraint.is_none() {
        "none".to_string()
    } else {
        config.constraint.to_string()
    }
}

fn fmt_cost(cost: &CostEstimate) -> String {
    format!("{:.2} MFLOPs, {:.2} MParams", cost.flops_m, cost.params_m)
}

/// Fixed-format feedback line for one candidate. Accuracy to two decimals;
/// missing fields render as "-" so the table shape never varies.
fn render_row(row: &ResultRow) -> String {
    let accuracy = match row.accuracy {
        Some(a) => format!("{a:.2}"),
        None => "-".to_string(),
    };
    let cost = match &row.cost {
        Some(c) => fmt_cost(c),
        None => "-".to_string(),
    };
    format!(
        "{} | accuracy: {} | cost: {} | {}",
        row.arch,
        accuracy,
        cost,
        row.status.label()
    )
}

fn render_entry(entry: &HistoryEntry) -> String {
    let mut out = format!("Iteration {} strategy: {}\nResults:\n", entry.strategy.t + 1, entry.strategy.text);
    if entry.results.is_empty() {
        out.push_str("(no candidate architectures could be extracted from the generator reply)\n");
    } else {
        for row in &entry.results {
            out.push_str(&render_row(row));
            out.push('\n');
        }
    }
    out
}

/// Render history for the Navigator: the newest entry when the session
/// retains memory (older entries already live in the transcript), otherwise
/// the newest `max_entries` in order.
fn render_history(history: &[HistoryEntry], retains: bool, max_entries: usize) -> String {
    let entries: &[HistoryEntry] = if retains {
        &history[history.len() - 1..]
    } else {
        let keep = max_entries.max(1).min(history.len());
        &history[history.len() - keep..]
    };
    let mut out = String::new();
    if entries.len() < history.len() {
        out.push_str(&format!(
            "(showing the most recent {} of {} iterations)\n\n",
            entries.len(),
            history.len()
        ));
    }
    for (i, entry) in entries.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&render_entry(entry));
    }
    out
}

/// Ask for the opening strategy.
pub fn navigator_init(
    session: &mut LlmSession,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    config: &SearchConfig,
) -> Result<Strategy, CollmError> {
    let user = prompts.render_navigator_init(&fmt_target(config.target), &fmt_constraint(config));
    let reply = session.exchange(backend, &user)?;
    let text = reply.trim().to_string();
    if text.is_empty() {
        return Err(CollmError::EmptyStrategy);
    }
    Ok(Strategy { t: 0, text })
}

/// Ask for a refined strategy after iteration `t`.
pub fn navigator_refine(
    session: &mut LlmSession,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    history: &[HistoryEntry],
    max_entries: usize,
    t: usize,
) -> Result<Strategy, CollmError> {
    debug_assert!(!history.is_empty(), "refinement needs at least one entry");
    let rendered = render_history(history, session.retains, max_entries);
    let user = prompts.render_navigator_refine(&rendered);
    let reply = session.exchange(backend, &user)?;
    let text = reply.trim().to_string();
    if text.is_empty() {
        return Err(CollmError::EmptyStrategy);
    }
    Ok(Strategy { t, text })
}

/// The Generator's reply with every architecture-shaped snippet found in it,
/// in order of appearance.
pub struct Proposal {
    pub reply: String,
    pub extractions: Vec<crate::archspace::Extraction>,
}

/// Ask the Generator for up to `n` candidates. Zero extractable snippets is
/// reported as [`CollmError::NoValidCandidates`]; the caller treats it as
/// feedback for the Navigator, not a failure.
pub fn generator_propose(
    session: &mut LlmSession,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    space: &SearchSpace,
    strategy: &Strategy,
    n: usize,
) -> Result<Proposal, CollmError> {
    let user = prompts.render_generator(&strategy.text, n.max(1));
    let reply = session.exchange(backend, &user)?;
    let extractions = space.extract_from_text(&reply);
    if extractions.is_empty() {
        return Err(CollmError::NoValidCandidates);
    }
    Ok(Proposal { reply, extractions })
}

/// Collaborative search with separate Navigator and Generator sessions.
pub fn collm_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    config: &CollmConfig,
) -> Result<SearchResult, SearchError> {
    let description = prompts.space_description(space);
    let navigator = LlmSession::new(
        prompts.render_navigator_system(&description),
        config.memory.navigator_retains,
        config.navigator_params.clone(),
    );
    let generator = LlmSession::new(
        prompts.render_generator_system(&description),
        config.memory.generator_retains,
        config.generator_params.clone(),
    );
    run_loop(
        "collm", space, evaluator, backend, prompts, config, navigator, generator,
    )
}

/// Ablation variant: one conversation plays both roles. The loop, budget
/// accounting, and feedback format are identical to [`collm_search`]; only
/// the session wiring differs.
pub fn sillm_search(
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    config: &CollmConfig,
) -> Result<SearchResult, SearchError> {
    let description = prompts.space_description(space);
    let shared_system = prompts.render_sillm_system(&description);
    let navigator = LlmSession::new(
        &shared_system,
        config.memory.navigator_retains,
        config.navigator_params.clone(),
    );
    run_loop(
        "sillm", space, evaluator, backend, prompts, config, navigator, SharedRole,
    )
}

/// Marker: the generator role borrows the navigator session.
struct SharedRole;

enum GeneratorSlot {
    Separate(LlmSession),
    Shared,
}

trait IntoGeneratorSlot {
    fn into_slot(self) -> GeneratorSlot;
}

impl IntoGeneratorSlot for LlmSession {
    fn into_slot(self) -> GeneratorSlot {
        GeneratorSlot::Separate(self)
    }
}

impl IntoGeneratorSlot for SharedRole {
    fn into_slot(self) -> GeneratorSlot {
        GeneratorSlot::Shared
    }
}

#[allow(clippy::too_many_arguments)]
fn run_loop(
    method: &str,
    space: &SearchSpace,
    evaluator: &dyn Evaluator,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    config: &CollmConfig,
    mut navigator: LlmSession,
    generator: impl IntoGeneratorSlot,
) -> Result<SearchResult, SearchError> {
    let mut generator_slot = generator.into_slot();
    let mut session = Session::new(space, evaluator, &config.search)?;
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut abort: Option<String> = None;
    let mut iterations = 0usize;

    let mut strategy = match navigator_init(&mut navigator, backend, prompts, &config.search) {
        Ok(s) => s,
        Err(e) => {
            return Ok(session.finish(method, 0, Some(format!("strategy initialization failed: {e}"))));
        }
    };

    'outer: for t in 1..=config.search.iteration_limit {
        if session.budget_left() == 0 {
            break;
        }
        let n = config.candidates.request(
            session.budget_left(),
            config.search.iteration_limit - t + 1,
        );
        let proposal = {
            let gen_session: &mut LlmSession = match &mut generator_slot {
                GeneratorSlot::Separate(s) => s,
                GeneratorSlot::Shared => &mut navigator,
            };
            generator_propose(gen_session, backend, prompts, space, &strategy, n)
        };
        iterations = t;
        let mut rows: Vec<ResultRow> = Vec::new();
        match proposal {
            Ok(proposal) => {
                let mut accepted = 0usize;
                for extraction in &proposal.extractions {
                    match &extraction.parsed {
                        Err(_) => {
                            session.record_unparseable(&extraction.text, t);
                            rows.push(ResultRow {
                                arch: extraction.text.clone(),
                                accuracy: None,
                                cost: None,
                                status: RowStatus::Illegal,
                            });
                        }
                        Ok(arch) if accepted < n => {
                            accepted += 1;
                            match session.submit(arch, t) {
                                Ok(record) => {
                                    let (legal, duplicate, mut accuracy, cost) =
                                        (record.legal, record.duplicate, record.accuracy, record.cost);
                                    let status = if !legal {
                                        RowStatus::Illegal
                                    } else if duplicate {
                                        RowStatus::Duplicate
                                    } else {
                                        RowStatus::Legal
                                    };
                                    if status == RowStatus::Duplicate {
                                        accuracy = session.cached_accuracy(&arch.canonical_key());
                                    }
                                    rows.push(ResultRow {
                                        arch: extraction.text.clone(),
                                        accuracy,
                                        cost,
                                        status,
                                    });
                                }
                                Err(SearchError::BudgetExhausted) => break,
                                Err(e) => {
                                    abort = Some(format!("evaluation failed: {e}"));
                                    break 'outer;
                                }
                            }
                        }
                        // surplus beyond the requested count is ignored
                        Ok(_) => {}
                    }
                }
            }
            Err(CollmError::Backend(e)) => {
                abort = Some(format!("generator call failed: {e}"));
                break 'outer;
            }
            Err(e) => {
                // no extractable candidates: recorded as an empty iteration
                // and surfaced to the Navigator through the feedback
                debug_assert!(matches!(e, CollmError::NoValidCandidates | CollmError::EmptyStrategy));
            }
        }

        if session.target_reached() {
            break;
        }
        if session.budget_left() == 0 {
            break;
        }
        history.push(HistoryEntry {
            strategy: strategy.clone(),
            results: rows,
        });
        match navigator_refine(
            &mut navigator,
            backend,
            prompts,
            &history,
            config.max_history_entries,
            t,
        ) {
            Ok(s) => strategy = s,
            Err(e) => {
                abort = Some(format!("strategy refinement failed: {e}"));
                break;
            }
        }
    }

    Ok(session.finish(method, iterations, abort))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::scripted::ScriptedBackend;
    use crate::backend::Role;
    use crate::bench::{Dataset, DatasetId, Split};
    use crate::search::BenchEvaluator;
    use crate::synthetic::{synthetic_optimum, synthetic_table};
    use std::sync::Arc;

    const GOOD: &str =
        "|nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|nor_conv_3x3~0|nor_conv_3x3~1|nor_conv_3x3~2|";
    const OTHER: &str =
        "|skip_connect~0|+|nor_conv_1x1~0|none~1|+|avg_pool_3x3~0|skip_connect~1|nor_conv_1x1~2|";

    fn evaluator() -> BenchEvaluator {
        BenchEvaluator::new(
            Arc::new(synthetic_table(3)),
            DatasetId::new(Dataset::Cifar10, Split::Test),
        )
    }

    fn config(budget: usize, iters: usize) -> CollmConfig {
        CollmConfig {
            search: SearchConfig {
                arch_budget: budget,
                iteration_limit: iters,
                ..SearchConfig::default()
            },
            candidates: CandidatesPolicy::Fixed(5),
            ..CollmConfig::default()
        }
    }

    #[test]
    fn candidate_policy_spends_the_budget_evenly() {
        let policy = CandidatesPolicy::default();
        assert_eq!(policy.request(100, 20), 5);
        assert_eq!(policy.request(90, 3), 30);
        assert_eq!(policy.request(4, 2), 5, "floor applies");
        assert_eq!(policy.request(7, 2), 5, "ceil(7/2)=4 is below the floor");
        assert_eq!(policy.request(11, 2), 6);
    }

    #[test]
    fn init_strategy_passes_through_and_grows_the_transcript() {
        let prompts = PromptSet::builtin();
        let mut backend =
            ScriptedBackend::from_replies(["explore diverse conv/skip mixes"]);
        let mut session = LlmSession::new("sys", true, SamplingParams::default());
        let strategy =
            navigator_init(&mut session, &mut backend, &prompts, &SearchConfig::default())
                .unwrap();
        assert_eq!(strategy.t, 0);
        assert_eq!(strategy.text, "explore diverse conv/skip mixes");
        assert_eq!(session.transcript().len(), 2, "user turn + reply retained");
        let request = &backend.requests()[0];
        assert_eq!(request[0].role, Role::System);
        assert!(request[1].content.contains("Target accuracy: none"));
        assert!(request[1].content.contains("Resource constraint: none"));
    }

    #[test]
    fn call_counts_follow_the_loop_shape() {
        // 2 iterations, no early stop: nav init + gen + refine + gen + refine
        let replies = vec![
            "strategy zero".to_string(),
            format!("1. {GOOD}"),
            "strategy one".to_string(),
            format!("1. {OTHER}"),
            "strategy two".to_string(),
        ];
        let mut backend = ScriptedBackend::from_replies(replies);
        let evaluator = evaluator();
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(100, 2),
        )
        .unwrap();
        assert_eq!(result.iterations, 2);
        assert_eq!(result.evaluations, 2);
        assert!(!result.partial, "ran to the iteration limit normally");
        assert_eq!(backend.remaining(), 0, "exactly 1 + 2 + 2 calls consumed");
        assert_eq!(result.counters.generated, 2);
    }

    #[test]
    fn early_stop_skips_further_calls() {
        let table = Arc::new(synthetic_table(3));
        let dataset = DatasetId::new(Dataset::Cifar10, Split::Test);
        let optimum = synthetic_optimum(3);
        let best_acc = table.lookup(&optimum, dataset).unwrap();
        let evaluator = BenchEvaluator::new(table, dataset);
        let mut cfg = config(100, 20);
        cfg.search.target = Some(best_acc);
        let mut backend = ScriptedBackend::from_replies([
            "open broadly".to_string(),
            format!("I suggest:\n1. {}", optimum.to_arch_string()),
            "UNREACHED".to_string(),
        ]);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &cfg,
        )
        .unwrap();
        assert_eq!(result.iterations, 1);
        assert_eq!(result.evaluations, 1);
        assert_eq!(result.best_accuracy, Some(best_acc));
        assert_eq!(
            backend.remaining(),
            1,
            "the refinement reply was never requested"
        );
        assert!(!result.partial);
    }

    #[test]
    fn repeated_architecture_is_evaluated_once() {
        let evaluator = evaluator();
        let mut replies = vec!["go".to_string()];
        for t in 0..5 {
            replies.push(format!("1. {GOOD}"));
            replies.push(format!("strategy {t}"));
        }
        let mut backend = ScriptedBackend::from_replies(replies);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(100, 5),
        )
        .unwrap();
        assert_eq!(result.evaluations, 1, "archive deduplicates repeats");
        assert_eq!(result.iterations, 5, "loop still runs to the limit");
        assert_eq!(result.counters.duplicate, 4);
        // feedback for a duplicate carries the cached accuracy
        let refine_request = &backend.requests()[4];
        let feedback = &refine_request.last().unwrap().content;
        assert!(feedback.contains("DUPLICATE"));
        assert!(!feedback.contains("accuracy: - | cost: - | DUPLICATE"));
    }

    #[test]
    fn malformed_candidate_is_reported_and_the_run_continues() {
        let evaluator = evaluator();
        let mut backend = ScriptedBackend::from_replies([
            "go".to_string(),
            format!("1. |nor_conv_9x9~0|+|none~0|none~1|+|none~0|none~1|none~2|\n2. {GOOD}"),
            "refined".to_string(),
            format!("1. {OTHER}"),
            "refined again".to_string(),
        ]);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(100, 2),
        )
        .unwrap();
        assert_eq!(result.counters.invalid, 1);
        assert_eq!(result.evaluations, 2);
        assert!(!result.partial);
        let feedback = &backend.requests()[2].last().unwrap().content;
        assert!(feedback.contains("ILLEGAL"), "failure mode visible to the navigator");
        assert!(feedback.contains("nor_conv_9x9"));
    }

    #[test]
    fn generator_reply_without_candidates_is_nonfatal() {
        let evaluator = evaluator();
        let mut backend = ScriptedBackend::from_replies([
            "go".to_string(),
            "I cannot settle on candidates yet.".to_string(),
            "try again with pipes".to_string(),
            format!("1. {GOOD}"),
            "final words".to_string(),
        ]);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(100, 2),
        )
        .unwrap();
        assert!(!result.partial);
        assert_eq!(result.evaluations, 1);
        let feedback = &backend.requests()[2].last().unwrap().content;
        assert!(feedback.contains("no candidate architectures could be extracted"));
    }

    #[test]
    fn backend_failure_aborts_with_partial_result() {
        let evaluator = evaluator();
        // script runs dry right after the first evaluation round
        let mut backend =
            ScriptedBackend::from_replies(["go".to_string(), format!("1. {GOOD}")]);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(100, 3),
        )
        .unwrap();
        assert!(result.partial);
        assert!(result
            .abort_reason
            .as_deref()
            .unwrap()
            .contains("strategy refinement failed"));
        assert_eq!(result.evaluations, 1, "work done before the failure is kept");
        assert_eq!(result.best_arch.as_deref(), Some(GOOD));
    }

    #[test]
    fn budget_exhaustion_terminates_normally() {
        let evaluator = evaluator();
        let mut backend = ScriptedBackend::from_replies([
            "go".to_string(),
            format!("1. {GOOD}\n2. {OTHER}\n3. |none~0|+|skip_connect~0|none~1|+|none~0|none~1|skip_connect~2|"),
            "UNREACHED".to_string(),
        ]);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(2, 5),
        )
        .unwrap();
        assert!(!result.partial, "running out of budget is a normal ending");
        assert_eq!(result.evaluations, 2);
        assert_eq!(result.iterations, 1);
        assert_eq!(backend.remaining(), 1, "no refinement after the budget is spent");
    }

    #[test]
    fn stateless_generator_requests_are_self_contained() {
        let evaluator = evaluator();
        let replies = vec![
            "strategy zero".to_string(),
            format!("1. {GOOD}"),
            "strategy one".to_string(),
            format!("1. {OTHER}"),
            "strategy two".to_string(),
        ];
        let mut backend = ScriptedBackend::from_replies(replies);
        collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &config(100, 2),
        )
        .unwrap();
        // requests: 0 = nav init, 1 = gen, 2 = nav refine, 3 = gen, 4 = nav refine
        for (i, expected_strategy) in [(1, "strategy zero"), (3, "strategy one")] {
            let request = &backend.requests()[i];
            assert_eq!(request.len(), 2, "system + single user turn only");
            assert_eq!(request[0].role, Role::System);
            assert!(request[1].content.contains(expected_strategy));
        }
        // the retaining navigator's final request carries the whole dialogue
        let last_nav = &backend.requests()[4];
        assert_eq!(last_nav.len(), 6, "system + 2 prior exchanges + new turn");
    }

    #[test]
    fn generator_memory_can_be_retained() {
        let evaluator = evaluator();
        let replies = vec![
            "strategy zero".to_string(),
            format!("1. {GOOD}"),
            "strategy one".to_string(),
            format!("1. {OTHER}"),
            "strategy two".to_string(),
        ];
        let mut backend = ScriptedBackend::from_replies(replies);
        let mut cfg = config(100, 2);
        cfg.memory.generator_retains = true;
        collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &cfg,
        )
        .unwrap();
        let second_gen = &backend.requests()[3];
        assert_eq!(second_gen.len(), 4, "system + prior exchange + new turn");
    }

    #[test]
    fn sillm_matches_collm_given_the_same_scripted_candidates() {
        let evaluator = evaluator();
        let replies = vec![
            "strategy zero".to_string(),
            format!("1. {GOOD}\n2. {OTHER}"),
            "strategy one".to_string(),
            format!("1. |avg_pool_3x3~0|+|none~0|nor_conv_1x1~1|+|skip_connect~0|none~1|nor_conv_3x3~2|"),
            "strategy two".to_string(),
        ];
        let mut collm_backend = ScriptedBackend::from_replies(replies.clone());
        let collm_result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut collm_backend,
            &PromptSet::builtin(),
            &config(100, 2),
        )
        .unwrap();
        let mut sillm_backend = ScriptedBackend::from_replies(replies);
        let sillm_result = sillm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut sillm_backend,
            &PromptSet::builtin(),
            &config(100, 2),
        )
        .unwrap();
        assert_eq!(collm_result.trajectory, sillm_result.trajectory);
        assert_eq!(collm_result.best_arch, sillm_result.best_arch);
        assert_eq!(collm_result.counters, sillm_result.counters);
        assert_eq!(sillm_result.method, "sillm");
        // the shared session sees both roles' turns in one transcript
        let last = sillm_backend.requests().last().unwrap();
        assert_eq!(last.len(), 10, "system + four prior exchanges + new turn");
    }

    #[test]
    fn surplus_candidates_beyond_the_request_are_ignored() {
        let evaluator = evaluator();
        let mut cfg = config(100, 1);
        cfg.candidates = CandidatesPolicy::Fixed(2);
        let mut backend = ScriptedBackend::from_replies([
            "go".to_string(),
            format!(
                "1. {GOOD}\n2. {OTHER}\n3. |none~0|+|none~0|none~1|+|none~0|none~1|none~2|"
            ),
            "tail".to_string(),
        ]);
        let result = collm_search(
            &SearchSpace::Nb201,
            &evaluator,
            &mut backend,
            &PromptSet::builtin(),
            &cfg,
        )
        .unwrap();
        assert_eq!(result.counters.generated, 2, "third candidate never enters");
    }
}
