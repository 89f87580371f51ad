//! Architecture spaces: encodings, text forms, validation, analytic costs,
//! and variation operators.
//!
//! Two families are supported. The *cell space* ([`nb201`]) is small enough
//! to enumerate and is keyed by a canonical index; the *macro spaces*
//! ([`macrospace`]) are combinatorially large and keyed by their canonical
//! text form. [`SearchSpace`] unifies both behind one interface so search
//! methods never special-case a space.

pub mod cost;
pub mod macrospace;
pub mod nb201;
pub mod variation;

pub use cost::CostEstimate;
pub use macrospace::{
    AutoFormerArch, AutoFormerScale, MacroArch, MacroSpaceDef, MobileNetArch, ShuffleNetArch,
    ValidationError,
};
pub use nb201::{ArchParseError, Nb201Arch, OpKind};
pub use variation::ChoiceError;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

/// An architecture from any supported space.
#[derive(Debug, Clone, PartialEq)]
pub enum Arch {
    Nb201(Nb201Arch),
    Macro(MacroArch),
}

impl Arch {
    /// The canonical text form: the cell grammar string, or the macro
    /// block form.
    pub fn to_text(&self) -> String {
        match self {
            Arch::Nb201(a) => a.to_arch_string(),
            Arch::Macro(a) => macrospace::serialize_macro(a),
        }
    }

    /// Identity of the realised network. Differs from [`Arch::to_text`]
    /// only for encodings that carry inactive slots.
    pub fn canonical_key(&self) -> String {
        match self {
            Arch::Nb201(a) => a.to_arch_string(),
            Arch::Macro(a) => macrospace::canonical_key(a),
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// One of the supported search spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchSpace {
    Nb201,
    Macro(MacroSpaceDef),
}

impl SearchSpace {
    /// Short machine-readable name, also accepted by [`SearchSpace::from_str`].
    pub fn name(&self) -> String {
        match self {
            SearchSpace::Nb201 => "nb201".to_string(),
            SearchSpace::Macro(def) => def.name(),
        }
    }

    /// Number of architectures, when the space is small enough to enumerate.
    pub fn enumerable_size(&self) -> Option<u64> {
        match self {
            SearchSpace::Nb201 => Some(nb201::SPACE_SIZE),
            SearchSpace::Macro(_) => None,
        }
    }

    /// Parse an architecture from its canonical text form.
    pub fn parse_arch(&self, text: &str) -> Result<Arch, ArchParseError> {
        match self {
            SearchSpace::Nb201 => Nb201Arch::parse(text).map(Arch::Nb201),
            SearchSpace::Macro(def) => macrospace::parse_macro(def, text).map(Arch::Macro),
        }
    }

    /// Check that an architecture belongs to this space and uses only
    /// allowed values.
    pub fn validate(&self, arch: &Arch) -> Result<(), ValidationError> {
        match (self, arch) {
            (SearchSpace::Nb201, Arch::Nb201(_)) => Ok(()),
            (SearchSpace::Macro(def), Arch::Macro(a)) => macrospace::validate_macro(def, a),
            (space, arch) => Err(ValidationError::VariantMismatch {
                expected: space.name(),
                found: match arch {
                    Arch::Nb201(_) => "nb201".to_string(),
                    Arch::Macro(MacroArch::MobileNet(_)) => "mobilenet".to_string(),
                    Arch::Macro(MacroArch::ShuffleNet(_)) => "shufflenet".to_string(),
                    Arch::Macro(MacroArch::AutoFormer(_)) => "autoformer".to_string(),
                },
            }),
        }
    }

    /// Analytic cost of an architecture in this space.
    pub fn estimate_cost(&self, arch: &Arch) -> Result<CostEstimate, ValidationError> {
        match (self, arch) {
            (SearchSpace::Nb201, Arch::Nb201(a)) => Ok(cost::nb201_cost(a)),
            (SearchSpace::Macro(_), Arch::Macro(a)) => Ok(cost::macro_cost(a)),
            _ => Err(ValidationError::VariantMismatch {
                expected: self.name(),
                found: "other".to_string(),
            }),
        }
    }

    /// Scan free-form text for architecture attempts, in order of
    /// appearance. Every attempt is returned, whether or not it parses, so
    /// malformed proposals can be reported instead of silently dropped.
    pub fn extract_from_text(&self, text: &str) -> Vec<Extraction> {
        match self {
            SearchSpace::Nb201 => extract_nb201(text),
            SearchSpace::Macro(def) => extract_macro(def, text),
        }
    }
}

impl fmt::Display for SearchSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Error from parsing a space name.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown search space {0:?} (expected nb201, mobilenet, shufflenet, or autoformer-{{tiny|small|base}})")]
pub struct UnknownSpace(pub String);

impl FromStr for SearchSpace {
    type Err = UnknownSpace;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nb201" | "nas-bench-201" | "nasbench201" => Ok(SearchSpace::Nb201),
            "mobilenet" => Ok(SearchSpace::Macro(MacroSpaceDef::MobileNet)),
            "shufflenet" => Ok(SearchSpace::Macro(MacroSpaceDef::ShuffleNet)),
            "autoformer-tiny" | "autoformer-t" => Ok(SearchSpace::Macro(
                MacroSpaceDef::AutoFormer(AutoFormerScale::Tiny),
            )),
            "autoformer-small" | "autoformer-s" => Ok(SearchSpace::Macro(
                MacroSpaceDef::AutoFormer(AutoFormerScale::Small),
            )),
            "autoformer-base" | "autoformer-b" => Ok(SearchSpace::Macro(
                MacroSpaceDef::AutoFormer(AutoFormerScale::Base),
            )),
            other => Err(UnknownSpace(other.to_string())),
        }
    }
}

/// One architecture attempt found in free-form text.
#[derive(Debug, Clone)]
pub struct Extraction {
    /// What was found: the canonical text form when parsing succeeded, or
    /// the offending snippet when it did not.
    pub text: String,
    pub parsed: Result<Arch, ArchParseError>,
}

fn nb201_candidate_regex() -> &'static regex::Regex {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // One or more pipe-delimited sections joined by '+'. Deliberately
        // looser than the grammar so that near-miss attempts (wrong section
        // count, unknown ops, bad suffixes) are caught and reported by the
        // parser instead of vanishing.
        regex::Regex::new(
            r"\|(?:[A-Za-z0-9_]+~[0-9]+\|)+(?:\+\|(?:[A-Za-z0-9_]+~[0-9]+\|)+)*",
        )
        .expect("static regex compiles")
    })
}

fn extract_nb201(text: &str) -> Vec<Extraction> {
    nb201_candidate_regex()
        .find_iter(text)
        .map(|m| {
            let snippet = m.as_str().to_string();
            let parsed = Nb201Arch::parse(&snippet).map(Arch::Nb201);
            let text = match &parsed {
                Ok(arch) => arch.to_text(),
                Err(_) => snippet.clone(),
            };
            Extraction { text, parsed }
        })
        .collect()
}

fn extract_macro(def: &MacroSpaceDef, text: &str) -> Vec<Extraction> {
    let anchor = match def {
        MacroSpaceDef::MobileNet => "Resolution",
        MacroSpaceDef::ShuffleNet => "Block operations",
        MacroSpaceDef::AutoFormer(_) => "Layers",
    };
    let starts: Vec<usize> = text.match_indices(anchor).map(|(i, _)| i).collect();
    let mut out = Vec::new();
    for (ix, &start) in starts.iter().enumerate() {
        let end = starts.get(ix + 1).copied().unwrap_or(text.len());
        let window = &text[start..end];
        let parsed = macrospace::parse_macro(def, window).map(Arch::Macro);
        let shown = match &parsed {
            Ok(arch) => arch.to_text(),
            Err(_) => {
                let mut snippet: String = window.chars().take(160).collect();
                if window.chars().count() > 160 {
                    snippet.push_str("...");
                }
                snippet.trim_end().to_string()
            }
        };
        out.push(Extraction {
            text: shown,
            parsed,
        });
    }
    out
}
