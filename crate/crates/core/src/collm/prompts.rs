//! Prompt template store.
//!
//! Templates ship as external text files compiled into the binary (see the
//! crate's `prompts/` directory) and can be overridden per run by loading a
//! directory containing files with the same names. Placeholders are written
//! `{name}` and filled by plain substitution:
//!
//! - `{search_space_description}` — rendered into system prompts
//! - `{target}`, `{constraint}` — the opening Navigator turn
//! - `{history}` — rendered evaluation feedback
//! - `{strategy}`, `{n_candidates}` — the Generator turn
//! - `{archs}` — the ranking user turn
//!
//! The cell-space description is a shipped asset; descriptions for the macro
//! spaces are generated from the space definitions so the legal value sets
//! can never drift from the validator.

use crate::archspace::macrospace::{
    MacroSpaceDef, AUTOFORMER_MLP_RATIOS, MOBILENET_BLOCKS_PER_STAGE, MOBILENET_DEPTHS,
    MOBILENET_EXPANSIONS, MOBILENET_KERNELS, MOBILENET_RESOLUTIONS, MOBILENET_STAGES,
    SHUFFLENET_BLOCKS, SHUFFLENET_NUM_CHOICES,
};
use crate::archspace::SearchSpace;
use std::path::Path;

const NAVIGATOR_SYSTEM: &str = include_str!("../../prompts/navigator_system.txt");
const NAVIGATOR_INIT_USER: &str = include_str!("../../prompts/navigator_init_user.txt");
const NAVIGATOR_REFINE_USER: &str = include_str!("../../prompts/navigator_refine_user.txt");
const GENERATOR_SYSTEM: &str = include_str!("../../prompts/generator_system.txt");
const GENERATOR_USER: &str = include_str!("../../prompts/generator_user.txt");
const SILLM_SYSTEM: &str = include_str!("../../prompts/sillm_system.txt");
const RANKING_SYSTEM: &str = include_str!("../../prompts/ranking_system.txt");
const RANKING_USER: &str = include_str!("../../prompts/ranking_user.txt");
const SPACE_NB201: &str = include_str!("../../prompts/space_nb201.txt");

/// File names recognized by [`PromptSet::from_dir`].
pub const TEMPLATE_FILES: [&str; 9] = [
    "navigator_system.txt",
    "navigator_init_user.txt",
    "navigator_refine_user.txt",
    "generator_system.txt",
    "generator_user.txt",
    "sillm_system.txt",
    "ranking_system.txt",
    "ranking_user.txt",
    "space_nb201.txt",
];

#[derive(Debug, Clone)]
pub struct PromptSet {
    pub navigator_system: String,
    pub navigator_init_user: String,
    pub navigator_refine_user: String,
    pub generator_system: String,
    pub generator_user: String,
    pub sillm_system: String,
    pub ranking_system: String,
    pub ranking_user: String,
    pub space_nb201: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    /// The shipped templates.
    pub fn builtin() -> Self {
        PromptSet {
            navigator_system: NAVIGATOR_SYSTEM.to_string(),
            navigator_init_user: NAVIGATOR_INIT_USER.to_string(),
            navigator_refine_user: NAVIGATOR_REFINE_USER.to_string(),
            generator_system: GENERATOR_SYSTEM.to_string(),
            generator_user: GENERATOR_USER.to_string(),
            sillm_system: SILLM_SYSTEM.to_string(),
            ranking_system: RANKING_SYSTEM.to_string(),
            ranking_user: RANKING_USER.to_string(),
            space_nb201: SPACE_NB201.to_string(),
        }
    }

    /// The shipped templates with per-file overrides from `dir`. Only files
    /// named in [`TEMPLATE_FILES`] are consulted; a missing file keeps the
    /// built-in text.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for name in TEMPLATE_FILES {
            let path = dir.join(name);
            if !path.is_file() {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            match name {
                "navigator_system.txt" => set.navigator_system = text,
                "navigator_init_user.txt" => set.navigator_init_user = text,
                "navigator_refine_user.txt" => set.navigator_refine_user = text,
                "generator_system.txt" => set.generator_system = text,
                "generator_user.txt" => set.generator_user = text,
                "sillm_system.txt" => set.sillm_system = text,
                "ranking_system.txt" => set.ranking_system = text,
                "ranking_user.txt" => set.ranking_user = text,
                "space_nb201.txt" => set.space_nb201 = text,
                _ => unreachable!("name comes from TEMPLATE_FILES"),
            }
        }
        Ok(set)
    }

    /// Plain-language description of a search space, for `{search_space_description}`.
    pub fn space_description(&self, space: &SearchSpace) -> String {
        match space {
            SearchSpace::Nb201 => self.space_nb201.trim_end().to_string(),
            SearchSpace::Macro(def) => macro_description(def),
        }
    }

    pub fn render_navigator_system(&self, space_description: &str) -> String {
        render(&self.navigator_system, &[("search_space_description", space_description)])
    }

    pub fn render_generator_system(&self, space_description: &str) -> String {
        render(&self.generator_system, &[("search_space_description", space_description)])
    }

    pub fn render_sillm_system(&self, space_description: &str) -> String {
        render(&self.sillm_system, &[("search_space_description", space_description)])
    }

    pub fn render_ranking_system(&self, space_description: &str) -> String {
        render(&self.ranking_system, &[("search_space_description", space_description)])
    }

    pub fn render_navigator_init(&self, target: &str, constraint: &str) -> String {
        render(
            &self.navigator_init_user,
            &[("target", target), ("constraint", constraint)],
        )
    }

    pub fn render_navigator_refine(&self, history: &str) -> String {
        render(&self.navigator_refine_user, &[("history", history)])
    }

    pub fn render_generator(&self, strategy: &str, n_candidates: usize) -> String {
        render(
            &self.generator_user,
            &[
                ("strategy", strategy),
                ("n_candidates", &n_candidates.to_string()),
            ],
        )
    }

    pub fn render_ranking_user(&self, archs: &str) -> String {
        render(&self.ranking_user, &[("archs", archs)])
    }
}

fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out.trim_end().to_string()
}

fn fmt_u32_set(values: &[u32]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn macro_description(def: &MacroSpaceDef) -> String {
    match def {
        MacroSpaceDef::MobileNet => format!(
            "## Overall architecture description\n\
             The network is an inverted-residual convolutional backbone with {stages} searchable stages of up to {bps} blocks each, plus fixed stem and head modules. Per-block kernel sizes and expansion ratios are encoded for all {slots} slots; in each stage only the first `depth` slots are active.\n\n\
             ## Representation Format\n\
             Valid architectures follow this four-line format exactly:\n\
             Resolution: <input resolution, one of {res}>\n\
             Depth: [d1, d2, d3, d4, d5] — one entry per stage, each one of {depths}\n\
             Kernel sizes: [k1, ..., k{slots}] — {bps} entries per stage, each one of {kernels}\n\
             Expansion ratios: [e1, ..., e{slots}] — {bps} entries per stage, each one of {expands}",
            stages = MOBILENET_STAGES,
            bps = MOBILENET_BLOCKS_PER_STAGE,
            slots = MOBILENET_STAGES * MOBILENET_BLOCKS_PER_STAGE,
            res = fmt_u32_set(&MOBILENET_RESOLUTIONS),
            depths = fmt_u32_set(&MOBILENET_DEPTHS),
            kernels = fmt_u32_set(&MOBILENET_KERNELS),
            expands = fmt_u32_set(&MOBILENET_EXPANSIONS),
        ),
        MacroSpaceDef::ShuffleNet => format!(
            "## Overall architecture description\n\
             The network is a channel-shuffle convolutional backbone built from {blocks} searchable choice blocks between fixed stem and head modules. Each block picks one of {choices} operations: 0 = shuffle unit with 3x3 kernel, 1 = shuffle unit with 5x5 kernel, 2 = shuffle unit with 7x7 kernel, 3 = shuffle Xception module.\n\n\
             ## Representation Format\n\
             Valid architectures follow this one-line format exactly:\n\
             Block operations: [b1, ..., b{blocks}] — each entry one of 0, 1, 2, 3",
            blocks = SHUFFLENET_BLOCKS,
            choices = SHUFFLENET_NUM_CHOICES,
        ),
        MacroSpaceDef::AutoFormer(scale) => {
            let ratios = AUTOFORMER_MLP_RATIOS
                .iter()
                .map(|r| format!("{r}"))
                .collect::<Vec<_>>()
                .join(", ");
            format!(
                "## Overall architecture description\n\
                 The network is a vision transformer ({name} scale): a stack of identical-shaped encoder layers with searchable depth, per-layer MLP ratio, per-layer attention head count, and a global embedding dimension. The per-layer lists carry exactly `depth` entries.\n\n\
                 ## Representation Format\n\
                 Valid architectures follow this four-line format exactly:\n\
                 Layers: <depth, one of {depths}>\n\
                 MLP ratios: [r1, ..., r_depth] — each one of {ratios}\n\
                 Attention heads: [h1, ..., h_depth] — each one of {heads}\n\
                 Embedding dimension: <one of {embeds}>",
                name = scale.name(),
                depths = fmt_u32_set(scale.depth_choices()),
                ratios = ratios,
                heads = fmt_u32_set(scale.head_choices()),
                embeds = fmt_u32_set(scale.embed_choices()),
            )
        }
    }
}
