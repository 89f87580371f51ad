//! Macro search spaces: MobileNet-style inverted-residual networks,
//! ShuffleNet-style choice-block networks, and a decoder-free vision
//! transformer family in three scales.
//!
//! Unlike the cell space, these spaces are too large to enumerate; an
//! architecture is a structured configuration rather than a single string.
//! Each space has a line-oriented text form (`Key: value` scalars and
//! `Key: [a, b, ...]` lists) used when exchanging architectures with a
//! language model, and a canonical key that identifies the realised network.
//!
//! The MobileNet encoding follows the once-for-all convention: every one of
//! the 20 kernel/expansion slots is always present in the encoding, and the
//! per-stage depth decides which slots are *active*. Inactive slots are
//! carried through mutation and crossover but ignored by the cost model and
//! by the canonical key. The transformer encoding treats per-layer heads and
//! MLP ratios the same way, with `depth` deciding the active prefix.

use super::nb201::ArchParseError;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Resolutions accepted by the MobileNet space.
pub const MOBILENET_RESOLUTIONS: [u32; 5] = [160, 176, 192, 208, 224];
/// Per-stage depth choices.
pub const MOBILENET_DEPTHS: [u32; 3] = [2, 3, 4];
/// Depthwise kernel sizes.
pub const MOBILENET_KERNELS: [u32; 3] = [3, 5, 7];
/// Expansion ratios.
pub const MOBILENET_EXPANSIONS: [u32; 3] = [3, 4, 6];
/// Number of searched stages.
pub const MOBILENET_STAGES: usize = 5;
/// Block slots per stage (depth selects a prefix of these).
pub const MOBILENET_BLOCKS_PER_STAGE: usize = 4;
/// Total kernel/expansion slots.
pub const MOBILENET_SLOTS: usize = MOBILENET_STAGES * MOBILENET_BLOCKS_PER_STAGE;

/// Number of choice blocks in the ShuffleNet space.
pub const SHUFFLENET_BLOCKS: usize = 20;
/// Number of operator choices per block: the 3x3 / 5x5 / 7x7 shuffle units
/// (choices 0..=2) and the Xception module (choice 3).
pub const SHUFFLENET_NUM_CHOICES: usize = 4;

/// MLP expansion ratios, shared by every transformer scale.
pub const AUTOFORMER_MLP_RATIOS: [f64; 3] = [3.0, 3.5, 4.0];

/// Transformer model scale. Each scale fixes the choice sets for depth,
/// embedding width, and head count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoFormerScale {
    Tiny,
    Small,
    Base,
}

impl AutoFormerScale {
    pub fn name(self) -> &'static str {
        match self {
            AutoFormerScale::Tiny => "tiny",
            AutoFormerScale::Small => "small",
            AutoFormerScale::Base => "base",
        }
    }

    pub fn depth_choices(self) -> &'static [u32] {
        match self {
            AutoFormerScale::Tiny | AutoFormerScale::Small => &[12, 13, 14],
            AutoFormerScale::Base => &[14, 15, 16],
        }
    }

    pub fn embed_choices(self) -> &'static [u32] {
        match self {
            AutoFormerScale::Tiny => &[192, 216, 240],
            AutoFormerScale::Small => &[320, 384, 448],
            AutoFormerScale::Base => &[528, 576, 624],
        }
    }

    pub fn head_choices(self) -> &'static [u32] {
        match self {
            AutoFormerScale::Tiny => &[3, 4],
            AutoFormerScale::Small => &[5, 6, 7],
            AutoFormerScale::Base => &[8, 9, 10],
        }
    }

    /// Largest depth in the scale; the length of the carried per-layer slots.
    pub fn max_depth(self) -> usize {
        *self.depth_choices().last().expect("non-empty") as usize
    }
}

/// Identifies one of the macro spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroSpaceDef {
    MobileNet,
    ShuffleNet,
    AutoFormer(AutoFormerScale),
}

impl MacroSpaceDef {
    pub fn name(&self) -> String {
        match self {
            MacroSpaceDef::MobileNet => "mobilenet".to_string(),
            MacroSpaceDef::ShuffleNet => "shufflenet".to_string(),
            MacroSpaceDef::AutoFormer(scale) => format!("autoformer-{}", scale.name()),
        }
    }
}

/// A MobileNet-space architecture.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MobileNetArch {
    pub resolution: u32,
    /// Active blocks per stage, 5 stages.
    pub depths: [u32; MOBILENET_STAGES],
    /// Depthwise kernel size per slot, 20 slots (4 per stage).
    pub kernels: [u32; MOBILENET_SLOTS],
    /// Expansion ratio per slot, 20 slots.
    pub expands: [u32; MOBILENET_SLOTS],
}

impl MobileNetArch {
    /// Slot indices realised in the network: the first `depths[s]` slots of
    /// each stage.
    pub fn active_slots(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (stage, &d) in self.depths.iter().enumerate() {
            let base = stage * MOBILENET_BLOCKS_PER_STAGE;
            for b in 0..(d as usize).min(MOBILENET_BLOCKS_PER_STAGE) {
                out.push(base + b);
            }
        }
        out
    }
}

/// A ShuffleNet-space architecture: one operator choice per block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShuffleNetArch {
    pub blocks: [u32; SHUFFLENET_BLOCKS],
}

/// A transformer architecture. `heads` and `mlp_ratios` always hold
/// `max_depth` entries for the owning scale; entries past `depth` are
/// carried but inactive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoFormerArch {
    pub depth: u32,
    pub embed_dim: u32,
    pub heads: Vec<u32>,
    pub mlp_ratios: Vec<f64>,
}

/// Any macro-space architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum MacroArch {
    MobileNet(MobileNetArch),
    ShuffleNet(ShuffleNetArch),
    AutoFormer(AutoFormerArch),
}

/// Why an architecture failed validation against a space.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("architecture variant {found} does not belong to space {expected}")]
    VariantMismatch { expected: String, found: String },
    #[error("{field}: value {value} is not one of the allowed choices")]
    ValueNotAllowed { field: String, value: String },
    #[error("{field}: expected {expected} entries, found {found}")]
    WrongLength {
        field: String,
        expected: usize,
        found: usize,
    },
}

fn check_in_set(field: &str, value: u32, set: &[u32]) -> Result<(), ValidationError> {
    if set.contains(&value) {
        Ok(())
    } else {
        Err(ValidationError::ValueNotAllowed {
            field: field.to_string(),
            value: value.to_string(),
        })
    }
}

/// Check a macro architecture against the choice sets of a space.
///
/// Every encoded slot is checked, active or not: carried slots take part in
/// mutation and crossover, so an out-of-set value there would leak into
/// active positions later.
pub fn validate_macro(space: &MacroSpaceDef, arch: &MacroArch) -> Result<(), ValidationError> {
    match (space, arch) {
        (MacroSpaceDef::MobileNet, MacroArch::MobileNet(a)) => {
            check_in_set("resolution", a.resolution, &MOBILENET_RESOLUTIONS)?;
            for (i, &d) in a.depths.iter().enumerate() {
                check_in_set(&format!("depth[{i}]"), d, &MOBILENET_DEPTHS)?;
            }
            for (i, &k) in a.kernels.iter().enumerate() {
                check_in_set(&format!("kernel[{i}]"), k, &MOBILENET_KERNELS)?;
            }
            for (i, &e) in a.expands.iter().enumerate() {
                check_in_set(&format!("expansion[{i}]"), e, &MOBILENET_EXPANSIONS)?;
            }
            Ok(())
        }
        (MacroSpaceDef::ShuffleNet, MacroArch::ShuffleNet(a)) => {
            for (i, &b) in a.blocks.iter().enumerate() {
                if b as usize >= SHUFFLENET_NUM_CHOICES {
                    return Err(ValidationError::ValueNotAllowed {
                        field: format!("block[{i}]"),
                        value: b.to_string(),
                    });
                }
            }
            Ok(())
        }
        (MacroSpaceDef::AutoFormer(scale), MacroArch::AutoFormer(a)) => {
            check_in_set("depth", a.depth, scale.depth_choices())?;
            check_in_set("embedding dimension", a.embed_dim, scale.embed_choices())?;
            let want = scale.max_depth();
            if a.heads.len() != want {
                return Err(ValidationError::WrongLength {
                    field: "attention heads".to_string(),
                    expected: want,
                    found: a.heads.len(),
                });
            }
            if a.mlp_ratios.len() != want {
                return Err(ValidationError::WrongLength {
                    field: "mlp ratios".to_string(),
                    expected: want,
                    found: a.mlp_ratios.len(),
                });
            }
            for (i, &h) in a.heads.iter().enumerate() {
                check_in_set(&format!("heads[{i}]"), h, scale.head_choices())?;
            }
            for (i, &r) in a.mlp_ratios.iter().enumerate() {
                if !AUTOFORMER_MLP_RATIOS.iter().any(|&x| (x - r).abs() < 1e-9) {
                    return Err(ValidationError::ValueNotAllowed {
                        field: format!("mlp ratio[{i}]"),
                        value: format!("{r}"),
                    });
                }
            }
            Ok(())
        }
        (space, arch) => Err(ValidationError::VariantMismatch {
            expected: space.name(),
            found: match arch {
                MacroArch::MobileNet(_) => "mobilenet".to_string(),
                MacroArch::ShuffleNet(_) => "shufflenet".to_string(),
                MacroArch::AutoFormer(_) => "autoformer".to_string(),
            },
        }),
    }
}

fn fmt_u32_list(values: &[u32]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_ratio_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.1}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Render an architecture in its line-oriented text form.
///
/// MobileNet and ShuffleNet emit every encoded slot; the transformer form
/// emits only the active `depth`-long prefix of the per-layer lists, which is
/// how such configurations are conventionally written.
pub fn serialize_macro(arch: &MacroArch) -> String {
    match arch {
        MacroArch::MobileNet(a) => format!(
            "Resolution: {}\nDepth: {}\nKernel sizes: {}\nExpansion ratios: {}",
            a.resolution,
            fmt_u32_list(&a.depths),
            fmt_u32_list(&a.kernels),
            fmt_u32_list(&a.expands)
        ),
        MacroArch::ShuffleNet(a) => format!("Block operations: {}", fmt_u32_list(&a.blocks)),
        MacroArch::AutoFormer(a) => {
            let d = (a.depth as usize).min(a.heads.len()).min(a.mlp_ratios.len());
            format!(
                "Layers: {}\nMLP ratios: {}\nAttention heads: {}\nEmbedding dimension: {}",
                a.depth,
                fmt_ratio_list(&a.mlp_ratios[..d]),
                fmt_u32_list(&a.heads[..d]),
                a.embed_dim
            )
        }
    }
}

/// Identity of the realised network: like [`serialize_macro`] but with
/// inactive MobileNet slots masked out, so two encodings that differ only in
/// carried slots map to the same key.
pub fn canonical_key(arch: &MacroArch) -> String {
    match arch {
        MacroArch::MobileNet(a) => {
            let active: std::collections::HashSet<usize> = a.active_slots().into_iter().collect();
            let mask = |values: &[u32; MOBILENET_SLOTS]| -> String {
                let parts: Vec<String> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if active.contains(&i) {
                            v.to_string()
                        } else {
                            "-".to_string()
                        }
                    })
                    .collect();
                format!("[{}]", parts.join(", "))
            };
            format!(
                "Resolution: {}\nDepth: {}\nKernel sizes: {}\nExpansion ratios: {}",
                a.resolution,
                fmt_u32_list(&a.depths),
                mask(&a.kernels),
                mask(&a.expands)
            )
        }
        _ => serialize_macro(arch),
    }
}

/// Locate `key:` in `text` and return the raw value that follows — either
/// the rest of the line (scalar) or a bracketed list.
fn field_after<'t>(text: &'t str, key: &str) -> Result<&'t str, ArchParseError> {
    let start = text.find(key).ok_or_else(|| ArchParseError::MissingField {
        key: key.to_string(),
    })?;
    let after_key = &text[start + key.len()..];
    let after_colon = after_key
        .trim_start()
        .strip_prefix(':')
        .ok_or_else(|| ArchParseError::MissingField {
            key: key.to_string(),
        })?
        .trim_start();
    Ok(after_colon)
}

fn parse_scalar_u32(text: &str, key: &str) -> Result<u32, ArchParseError> {
    let rest = field_after(text, key)?;
    let token: String = rest
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    token.parse().map_err(|_| ArchParseError::BadValue {
        key: key.to_string(),
        value: rest.chars().take(16).collect(),
    })
}

fn parse_list_raw<'t>(text: &'t str, key: &str) -> Result<Vec<&'t str>, ArchParseError> {
    let rest = field_after(text, key)?;
    let body = rest
        .strip_prefix('[')
        .ok_or_else(|| ArchParseError::BadValue {
            key: key.to_string(),
            value: rest.chars().take(16).collect(),
        })?;
    let end = body.find(']').ok_or_else(|| ArchParseError::BadValue {
        key: key.to_string(),
        value: "unterminated list".to_string(),
    })?;
    Ok(body[..end]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect())
}

fn parse_u32_list(text: &str, key: &str, expected: usize) -> Result<Vec<u32>, ArchParseError> {
    let raw = parse_list_raw(text, key)?;
    if raw.len() != expected {
        return Err(ArchParseError::WrongLength {
            key: key.to_string(),
            expected,
            found: raw.len(),
        });
    }
    raw.iter()
        .map(|tok| {
            tok.parse().map_err(|_| ArchParseError::BadValue {
                key: key.to_string(),
                value: tok.to_string(),
            })
        })
        .collect()
}

fn parse_ratio_list(text: &str, key: &str) -> Result<Vec<f64>, ArchParseError> {
    let raw = parse_list_raw(text, key)?;
    raw.iter()
        .map(|tok| {
            tok.parse().map_err(|_| ArchParseError::BadValue {
                key: key.to_string(),
                value: tok.to_string(),
            })
        })
        .collect()
}

/// Parse an architecture of the given space from its text form.
///
/// Parsing is lenient about surrounding prose — keys are located anywhere in
/// `text` — but strict about the values themselves. Set membership is *not*
/// checked here; that is [`validate_macro`]'s job, so that an out-of-range
/// proposal can be reported as illegal rather than unreadable.
pub fn parse_macro(space: &MacroSpaceDef, text: &str) -> Result<MacroArch, ArchParseError> {
    match space {
        MacroSpaceDef::MobileNet => {
            let resolution = parse_scalar_u32(text, "Resolution")?;
            let depths = parse_u32_list(text, "Depth", MOBILENET_STAGES)?;
            let kernels = parse_u32_list(text, "Kernel sizes", MOBILENET_SLOTS)?;
            let expands = parse_u32_list(text, "Expansion ratios", MOBILENET_SLOTS)?;
            Ok(MacroArch::MobileNet(MobileNetArch {
                resolution,
                depths: depths.try_into().expect("length checked"),
                kernels: kernels.try_into().expect("length checked"),
                expands: expands.try_into().expect("length checked"),
            }))
        }
        MacroSpaceDef::ShuffleNet => {
            let blocks = parse_u32_list(text, "Block operations", SHUFFLENET_BLOCKS)?;
            Ok(MacroArch::ShuffleNet(ShuffleNetArch {
                blocks: blocks.try_into().expect("length checked"),
            }))
        }
        MacroSpaceDef::AutoFormer(scale) => {
            let depth = parse_scalar_u32(text, "Layers")?;
            if depth == 0 || depth > 64 {
                return Err(ArchParseError::BadValue {
                    key: "Layers".to_string(),
                    value: depth.to_string(),
                });
            }
            let embed_dim = parse_scalar_u32(text, "Embedding dimension")?;
            let ratios = parse_ratio_list(text, "MLP ratios")?;
            let heads_raw = parse_list_raw(text, "Attention heads")?;
            let heads: Vec<u32> = heads_raw
                .iter()
                .map(|tok| {
                    tok.parse().map_err(|_| ArchParseError::BadValue {
                        key: "Attention heads".to_string(),
                        value: tok.to_string(),
                    })
                })
                .collect::<Result<_, _>>()?;
            let max_depth = scale.max_depth().max(depth as usize);
            let pad = |mut v: Vec<f64>| -> Vec<f64> {
                let last = *v.last().expect("non-empty");
                v.resize(max_depth, last);
                v
            };
            let pad_u = |mut v: Vec<u32>| -> Vec<u32> {
                let last = *v.last().expect("non-empty");
                v.resize(max_depth, last);
                v
            };
            let check_len = |key: &str, len: usize| -> Result<(), ArchParseError> {
                if len == depth as usize || len == max_depth {
                    Ok(())
                } else {
                    Err(ArchParseError::WrongLength {
                        key: key.to_string(),
                        expected: depth as usize,
                        found: len,
                    })
                }
            };
            check_len("MLP ratios", ratios.len())?;
            check_len("Attention heads", heads.len())?;
            if ratios.is_empty() || heads.is_empty() {
                return Err(ArchParseError::WrongLength {
                    key: "MLP ratios".to_string(),
                    expected: depth as usize,
                    found: 0,
                });
            }
            Ok(MacroArch::AutoFormer(AutoFormerArch {
                depth,
                embed_dim,
                heads: pad_u(heads),
                mlp_ratios: pad(ratios),
            }))
        }
    }
}

impl fmt::Display for MacroArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_macro(self))
    }
}
