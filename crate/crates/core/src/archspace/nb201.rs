//! The four-node cell space: six ordered edges, five candidate operations per
//! edge, `5^6 = 15,625` distinct cells.
//!
//! A cell is a DAG over nodes `0..=3`. Every edge `(i, j)` with `i < j`
//! carries one operation. Cells are written in a pipe-delimited text grammar,
//! one section per target node:
//!
//! ```text
//! |op~0|+|op~0|op~1|+|op~0|op~1|op~2|
//! ```
//!
//! where `op~k` means "operation applied to the output of node `k`". The
//! sections describe nodes 1, 2 and 3; sources within a section are always
//! `0..target`, in order, so the `~k` suffixes are redundant but mandatory —
//! a mismatched suffix is a parse error rather than a reinterpretation.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of edges in a cell.
pub const NUM_EDGES: usize = 6;
/// Number of candidate operations per edge.
pub const NUM_OPS: usize = 5;
/// Total number of cells in the space.
pub const SPACE_SIZE: u64 = 15_625;

/// `(source, target)` node pairs in canonical edge order. The order matches
/// the text grammar left to right and is the positional base used by
/// [`Nb201Arch::index`].
pub const EDGES: [(u8, u8); NUM_EDGES] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];

/// Candidate operation on a cell edge.
///
/// Discriminant order is the opcode order used by the canonical index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    None,
    SkipConnect,
    NorConv1x1,
    NorConv3x3,
    AvgPool3x3,
}

/// All operations in opcode order.
pub const ALL_OPS: [OpKind; NUM_OPS] = [
    OpKind::None,
    OpKind::SkipConnect,
    OpKind::NorConv1x1,
    OpKind::NorConv3x3,
    OpKind::AvgPool3x3,
];

impl OpKind {
    /// Grammar name of the operation.
    pub fn name(self) -> &'static str {
        match self {
            OpKind::None => "none",
            OpKind::SkipConnect => "skip_connect",
            OpKind::NorConv1x1 => "nor_conv_1x1",
            OpKind::NorConv3x3 => "nor_conv_3x3",
            OpKind::AvgPool3x3 => "avg_pool_3x3",
        }
    }

    /// Opcode in `0..5`, the digit used by the canonical index.
    pub fn code(self) -> usize {
        match self {
            OpKind::None => 0,
            OpKind::SkipConnect => 1,
            OpKind::NorConv1x1 => 2,
            OpKind::NorConv3x3 => 3,
            OpKind::AvgPool3x3 => 4,
        }
    }

    /// Inverse of [`OpKind::code`].
    pub fn from_code(code: usize) -> Option<Self> {
        ALL_OPS.get(code).copied()
    }

    /// Look an operation up by its grammar name.
    pub fn from_name(name: &str) -> Option<Self> {
        ALL_OPS.iter().copied().find(|op| op.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Errors produced when reading an architecture from text.
///
/// The variants are shared by the cell grammar and the macro-space block
/// formats; each one states what was wrong rather than merely that parsing
/// failed, because these messages are echoed back to language models as
/// feedback.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArchParseError {
    /// Structural damage: wrong section count, bad delimiters, embedded
    /// whitespace, missing pipes, and similar.
    #[error("malformed architecture string: {reason}")]
    Malformed { reason: String },
    /// An operation token that is not one of the five known names.
    #[error("unknown operation {token:?}")]
    UnknownOp { token: String },
    /// A `~k` suffix that does not match the position of the edge within its
    /// section.
    #[error("wrong source index: expected ~{expected}, found ~{found}")]
    WrongSourceIndex { expected: u8, found: u8 },
    /// A required key line is absent from a macro-space block.
    #[error("missing field {key:?}")]
    MissingField { key: String },
    /// A field value that could not be read as a number of the right kind.
    #[error("bad value for {key:?}: {value:?}")]
    BadValue { key: String, value: String },
    /// A list field with the wrong number of entries.
    #[error("wrong length for {key:?}: expected {expected}, found {found}")]
    WrongLength {
        key: String,
        expected: usize,
        found: usize,
    },
}

/// A cell architecture: one operation per edge, in canonical edge order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Nb201Arch {
    pub ops: [OpKind; NUM_EDGES],
}

impl Nb201Arch {
    pub fn new(ops: [OpKind; NUM_EDGES]) -> Self {
        Nb201Arch { ops }
    }

    /// Canonical index in `0..15_625`: base-5 positional encoding of the
    /// opcodes, least significant digit first. The all-`none` cell is 0.
    pub fn index(&self) -> u32 {
        let mut ix = 0u32;
        let mut base = 1u32;
        for op in self.ops {
            ix += op.code() as u32 * base;
            base *= NUM_OPS as u32;
        }
        ix
    }

    /// Inverse of [`Nb201Arch::index`].
    pub fn from_index(index: u32) -> Option<Self> {
        if u64::from(index) >= SPACE_SIZE {
            return None;
        }
        let mut rest = index as usize;
        let mut ops = [OpKind::None; NUM_EDGES];
        for slot in ops.iter_mut() {
            *slot = OpKind::from_code(rest % NUM_OPS)?;
            rest /= NUM_OPS;
        }
        Some(Nb201Arch { ops })
    }

    /// Iterate over every cell in the space in index order.
    pub fn enumerate() -> impl Iterator<Item = Nb201Arch> {
        (0..SPACE_SIZE as u32).map(|ix| Nb201Arch::from_index(ix).expect("index in range"))
    }

    /// Render the cell in the canonical text grammar.
    pub fn to_arch_string(&self) -> String {
        let o = &self.ops;
        format!(
            "|{}~0|+|{}~0|{}~1|+|{}~0|{}~1|{}~2|",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }

    /// Parse a cell from the text grammar.
    ///
    /// Surrounding whitespace is tolerated; anything structural — section
    /// count, pipe placement, token shape, source suffixes — is enforced
    /// exactly.
    pub fn parse(input: &str) -> Result<Self, ArchParseError> {
        let s = input.trim();
        if s.is_empty() {
            return Err(ArchParseError::Malformed {
                reason: "empty string".to_string(),
            });
        }
        if s.chars().any(char::is_whitespace) {
            return Err(ArchParseError::Malformed {
                reason: "embedded whitespace".to_string(),
            });
        }
        let sections: Vec<&str> = s.split('+').collect();
        if sections.len() != 3 {
            return Err(ArchParseError::Malformed {
                reason: format!(
                    "expected 3 node sections separated by '+', found {}",
                    sections.len()
                ),
            });
        }
        let mut ops = [OpKind::None; NUM_EDGES];
        let mut edge = 0usize;
        for (node, section) in sections.iter().enumerate() {
            let expected_edges = node + 1;
            let inner = section
                .strip_prefix('|')
                .and_then(|rest| rest.strip_suffix('|'))
                .ok_or_else(|| ArchParseError::Malformed {
                    reason: format!("node {} section must be pipe-delimited", node + 1),
                })?;
            let tokens: Vec<&str> = inner.split('|').collect();
            if tokens.len() != expected_edges {
                return Err(ArchParseError::Malformed {
                    reason: format!(
                        "node {} section lists {} edges, expected {}",
                        node + 1,
                        tokens.len(),
                        expected_edges
                    ),
                });
            }
            for (pos, token) in tokens.iter().enumerate() {
                let (name, src) = token.rsplit_once('~').ok_or_else(|| {
                    ArchParseError::Malformed {
                        reason: format!("edge token {token:?} lacks a '~source' suffix"),
                    }
                })?;
                if name.is_empty() {
                    return Err(ArchParseError::Malformed {
                        reason: format!("edge token {token:?} has an empty operation name"),
                    });
                }
                let op = OpKind::from_name(name).ok_or_else(|| ArchParseError::UnknownOp {
                    token: name.to_string(),
                })?;
                let found: u8 = src.parse().map_err(|_| ArchParseError::Malformed {
                    reason: format!("edge token {token:?} has a non-numeric source index"),
                })?;
                if found != pos as u8 {
                    return Err(ArchParseError::WrongSourceIndex {
                        expected: pos as u8,
                        found,
                    });
                }
                ops[edge] = op;
                edge += 1;
            }
        }
        debug_assert_eq!(edge, NUM_EDGES);
        Ok(Nb201Arch { ops })
    }
}

impl fmt::Display for Nb201Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_arch_string())
    }
}

impl std::str::FromStr for Nb201Arch {
    type Err = ArchParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Nb201Arch::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_none_cell_has_index_zero() {
        let arch = Nb201Arch::new([OpKind::None; 6]);
        assert_eq!(arch.index(), 0);
        assert_eq!(
            arch.to_arch_string(),
            "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|"
        );
    }

    #[test]
    fn last_index_is_all_avg_pool() {
        let arch = Nb201Arch::from_index(15_624).unwrap();
        assert_eq!(arch.ops, [OpKind::AvgPool3x3; 6]);
        assert!(Nb201Arch::from_index(15_625).is_none());
    }

    #[test]
    fn parse_reads_ops_in_edge_order() {
        let arch = Nb201Arch::parse(
            "|nor_conv_3x3~0|+|nor_conv_3x3~0|nor_conv_3x3~1|+|skip_connect~0|nor_conv_3x3~1|nor_conv_1x1~2|",
        )
        .unwrap();
        assert_eq!(
            arch.ops,
            [
                OpKind::NorConv3x3,
                OpKind::NorConv3x3,
                OpKind::NorConv3x3,
                OpKind::SkipConnect,
                OpKind::NorConv3x3,
                OpKind::NorConv1x1,
            ]
        );
    }

    #[test]
    fn parse_tolerates_surrounding_whitespace_only() {
        let text = "  |none~0|+|none~0|none~1|+|none~0|none~1|none~2|\n";
        assert!(Nb201Arch::parse(text).is_ok());
        let embedded = "|none~0| + |none~0|none~1|+|none~0|none~1|none~2|";
        assert!(matches!(
            Nb201Arch::parse(embedded),
            Err(ArchParseError::Malformed { .. })
        ));
    }

    #[test]
    fn parse_rejects_unknown_op() {
        let text = "|conv_9x9~0|+|none~0|none~1|+|none~0|none~1|none~2|";
        assert_eq!(
            Nb201Arch::parse(text),
            Err(ArchParseError::UnknownOp {
                token: "conv_9x9".to_string()
            })
        );
    }

    #[test]
    fn parse_rejects_wrong_source_index() {
        let text = "|none~0|+|none~0|none~0|+|none~0|none~1|none~2|";
        assert_eq!(
            Nb201Arch::parse(text),
            Err(ArchParseError::WrongSourceIndex {
                expected: 1,
                found: 0
            })
        );
    }

    #[test]
    fn round_trip_is_identity_on_sampled_indices() {
        for ix in (0..15_625u32).step_by(97) {
            let arch = Nb201Arch::from_index(ix).unwrap();
            let text = arch.to_arch_string();
            let back = Nb201Arch::parse(&text).unwrap();
            assert_eq!(back, arch);
            assert_eq!(back.index(), ix);
        }
    }
}
