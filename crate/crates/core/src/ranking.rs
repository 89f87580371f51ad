//! Ranking proof-of-concept: can a chat model order architectures by
//! expected accuracy without being told any accuracies?
//!
//! Each trial samples architectures with pairwise-distinct ground-truth
//! accuracies, asks the backend to rank them, and scores the agreement
//! between the predicted and true orders with Kendall's τ (no-ties form —
//! exact because ties are rejected at sampling). Trials aggregate into a
//! mean/std report plus a per-trial CSV.

use crate::archspace::nb201::Nb201Arch;
use crate::archspace::{Arch, SearchSpace};
use crate::backend::{ChatBackend, ChatMessage, SamplingParams};
use crate::bench::{fnv1a64, BenchTable, DatasetId};
use crate::collm::prompts::PromptSet;
use crate::search::summarize;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankingError {
    #[error("orders have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("order is not a permutation of the same index set")]
    NotAPermutation,
    #[error("need at least two items to rank, got {0}")]
    TooShort(usize),
    #[error("could not sample {needed} architectures with distinct accuracies")]
    Sampling { needed: usize },
}

/// Kendall's τ between two orderings of the same index set, no-ties form:
/// (concordant − discordant) / (n(n−1)/2).
///
/// Runs in O(n log n): relabel `a` by each element's position in `b`, then
/// count inversions of the relabeled sequence by merge sort.
pub fn kendall_tau(order_a: &[usize], order_b: &[usize]) -> Result<f64, RankingError> {
    let n = order_a.len();
    if n != order_b.len() {
        return Err(RankingError::LengthMismatch(n, order_b.len()));
    }
    if n < 2 {
        return Err(RankingError::TooShort(n));
    }
    let max = n - 1;
    let mut position_in_b = vec![usize::MAX; n];
    for (pos, &item) in order_b.iter().enumerate() {
        if item > max || position_in_b[item] != usize::MAX {
            return Err(RankingError::NotAPermutation);
        }
        position_in_b[item] = pos;
    }
    let mut relabeled = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for &item in order_a {
        if item > max || seen[item] {
            return Err(RankingError::NotAPermutation);
        }
        seen[item] = true;
        relabeled.push(position_in_b[item]);
    }
    let inversions = count_inversions(&mut relabeled);
    let total_pairs = (n * (n - 1) / 2) as f64;
    Ok((total_pairs - 2.0 * inversions as f64) / total_pairs)
}

fn count_inversions(values: &mut [usize]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inversions = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            // right[j] jumps ahead of every remaining left element
            inversions += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    values.copy_from_slice(&merged);
    inversions
}

/// One ranking trial. `predicted` lists sample indices best-to-worst; a
/// trial whose reply could not be parsed into a full permutation carries
/// `None` everywhere and a failure note.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingTrial {
    pub trial_id: usize,
    pub seed: u64,
    pub temperature: f64,
    pub sample: Vec<(String, f64)>,
    pub predicted: Option<Vec<usize>>,
    pub tau: Option<f64>,
    pub top1_correct: Option<bool>,
    pub reply_digest: u64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PocReport {
    pub trials: Vec<RankingTrial>,
    pub mean_tau: Option<f64>,
    pub std_tau: Option<f64>,
    /// Trials whose reply yielded no usable ranking (excluded from the mean).
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct PocConfig {
    pub n_archs: usize,
    pub n_trials: usize,
    pub seed: u64,
    /// Cycled across trials; single-entry list keeps it fixed.
    pub temperatures: Vec<f64>,
}

impl Default for PocConfig {
    fn default() -> Self {
        PocConfig {
            n_archs: 10,
            n_trials: 40,
            seed: 0,
            temperatures: vec![0.6],
        }
    }
}

/// Sample `n` architectures with pairwise-distinct accuracies.
fn sample_distinct(
    table: &BenchTable,
    dataset: DatasetId,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Nb201Arch, f64)>, RankingError> {
    let mut sample: Vec<(Nb201Arch, f64)> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let cap = 1000 * n.max(1);
    while sample.len() < n {
        attempts += 1;
        if attempts > cap {
            return Err(RankingError::Sampling { needed: n });
        }
        let index = rng.gen_range(0..crate::archspace::nb201::SPACE_SIZE) as u32;
        let arch = Nb201Arch::from_index(index).expect("index within the space");
        let Ok(accuracy) = table.lookup(&arch, dataset) else {
            continue;
        };
        let clashes = sample
            .iter()
            .any(|(a, acc)| *a == arch || *acc == accuracy);
        if !clashes {
            sample.push((arch, accuracy));
        }
    }
    Ok(sample)
}

/// Parse a reply into a best-to-worst permutation of sample indices.
///
/// Two accepted shapes, per the loose output instruction: re-emitted
/// architecture strings (matched against the sample), or a list of 1-based
/// architecture numbers. Either way the reply must cover the whole sample
/// exactly once; anything else is unusable.
pub fn parse_ranking(reply: &str, sample: &[(Nb201Arch, f64)]) -> Option<Vec<usize>> {
    let n = sample.len();
    // architecture-string form
    let extracted = SearchSpace::Nb201.extract_from_text(reply);
    if !extracted.is_empty() {
        let mut order = Vec::with_capacity(n);
        for extraction in &extracted {
            if let Ok(Arch::Nb201(arch)) = &extraction.parsed {
                if let Some(pos) = sample.iter().position(|(a, _)| a == arch) {
                    if !order.contains(&pos) {
                        order.push(pos);
                    }
                }
            }
        }
        if order.len() == n {
            return Some(order);
        }
    }
    // numeric-ID form: 1-based numbers in order of appearance
    let mut order = Vec::with_capacity(n);
    for token in reply
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
    {
        let Ok(id) = token.parse::<usize>() else {
            continue;
        };
        if (1..=n).contains(&id) && !order.contains(&(id - 1)) {
            order.push(id - 1);
            if order.len() == n {
                return Some(order);
            }
        }
    }
    None
}

/// Indices of the sample sorted by accuracy, best first.
fn true_order(sample: &[(Nb201Arch, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample[b].1.total_cmp(&sample[a].1));
    order
}

fn render_sample(sample: &[(Nb201Arch, f64)]) -> String {
    let mut out = String::from("\n");
    for (i, (arch, _)) in sample.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, arch.to_arch_string()));
    }
    out
}

/// Run one ranking trial on a prepared sample.
pub fn run_trial(
    trial_id: usize,
    seed: u64,
    sample: Vec<(Nb201Arch, f64)>,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    temperature: f64,
) -> RankingTrial {
    let system = prompts.render_ranking_system(&prompts.space_description(&SearchSpace::Nb201));
    let user = prompts.render_ranking_user(&render_sample(&sample));
    let params = SamplingParams {
        temperature,
        ..SamplingParams::default()
    };
    let messages = [ChatMessage::system(system), ChatMessage::user(user)];
    let sample_text: Vec<(String, f64)> = sample
        .iter()
        .map(|(a, acc)| (a.to_arch_string(), *acc))
        .collect();
    let mut trial = RankingTrial {
        trial_id,
        seed,
        temperature,
        sample: sample_text,
        predicted: None,
        tau: None,
        top1_correct: None,
        reply_digest: 0,
        failure: None,
    };
    let reply = match backend.chat(&messages, &params) {
        Ok(r) => r,
        Err(e) => {
            trial.failure = Some(format!("backend: {e}"));
            return trial;
        }
    };
    trial.reply_digest = fnv1a64(reply.as_bytes());
    let Some(predicted) = parse_ranking(&reply, &sample) else {
        trial.failure = Some("unparseable ranking".to_string());
        return trial;
    };
    let truth = true_order(&sample);
    let tau = kendall_tau(&predicted, &truth).expect("both are permutations of the sample");
    trial.top1_correct = Some(predicted[0] == truth[0]);
    trial.tau = Some(tau);
    trial.predicted = Some(predicted);
    trial
}

/// Run the full trial battery against one backend.
pub fn run_poc(
    table: &BenchTable,
    dataset: DatasetId,
    backend: &mut dyn ChatBackend,
    prompts: &PromptSet,
    config: &PocConfig,
) -> Result<PocReport, RankingError> {
    if config.n_archs < 2 {
        return Err(RankingError::TooShort(config.n_archs));
    }
    let mut trials = Vec::with_capacity(config.n_trials);
    for i in 0..config.n_trials {
        let seed = config.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = sample_distinct(table, dataset, config.n_archs, &mut rng)?;
        let temperature = config.temperatures[i % config.temperatures.len().max(1)];
        trials.push(run_trial(i, seed, sample, backend, prompts, temperature));
    }
    let taus: Vec<f64> = trials.iter().filter_map(|t| t.tau).collect();
    let stats = summarize(&taus);
    Ok(PocReport {
        failed: trials.len() - taus.len(),
        mean_tau: stats.map(|s| s.mean),
        std_tau: stats.map(|s| s.std),
        trials,
    })
}

/// Per-trial CSV: `trial_id, seed, tau, top1_correct, raw_reply_digest`.
/// Failed trials leave tau/top1 empty.
pub fn write_poc_csv(report: &PocReport, w: impl std::io::Write) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(w);
    writer.write_record(["trial_id", "seed", "tau", "top1_correct", "raw_reply_digest"])?;
    for trial in &report.trials {
        writer.write_record([
            trial.trial_id.to_string(),
            trial.seed.to_string(),
            trial.tau.map(|t| format!("{t:.6}")).unwrap_or_default(),
            trial
                .top1_correct
                .map(|b| b.to_string())
                .unwrap_or_default(),
            format!("{:016x}", trial.reply_digest),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
