//! Tabular benchmark ingestion and lookup for the cell space.
//!
//! The on-disk format is JSON lines: one object per architecture,
//!
//! ```json
//! {"arch": "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|",
//!  "cifar10": {"valid": 90.1, "test": 93.2},
//!  "cifar100": {"valid": 70.0, "test": 70.3},
//!  "imagenet16_120": {"valid": 44.5, "test": 45.0}}
//! ```
//!
//! A complete table has exactly one line for each of the 15,625 cells, in
//! any order. Duplicate architectures are rejected. Accuracies are
//! percentages in `[0, 100]`. By default a table missing any cell is
//! rejected; partial loading is explicit opt-in, and lookups against holes
//! fail loudly rather than interpolate.
//!
//! Every loaded table carries a 64-bit FNV-1a digest of the raw file bytes,
//! printed in run manifests so results can be traced to the exact data file
//! that produced them.

use crate::archspace::nb201::{Nb201Arch, SPACE_SIZE};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

/// Dataset axis of a benchmark entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Cifar10,
    Cifar100,
    ImageNet16_120,
}

impl Dataset {
    pub const ALL: [Dataset; 3] = [Dataset::Cifar10, Dataset::Cifar100, Dataset::ImageNet16_120];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Cifar10 => "cifar10",
            Dataset::Cifar100 => "cifar100",
            Dataset::ImageNet16_120 => "imagenet16-120",
        }
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cifar10" => Ok(Dataset::Cifar10),
            "cifar100" => Ok(Dataset::Cifar100),
            "imagenet16-120" | "imagenet16_120" | "imagenet16" => Ok(Dataset::ImageNet16_120),
            other => Err(format!(
                "unknown dataset {other:?} (expected cifar10, cifar100, or imagenet16-120)"
            )),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accuracy split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "valid" | "val" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected valid or test)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dataset/split pair, e.g. `cifar10/test`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetId {
    pub dataset: Dataset,
    pub split: Split,
}

impl DatasetId {
    pub fn new(dataset: Dataset, split: Split) -> Self {
        DatasetId { dataset, split }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.dataset, self.split)
    }
}

/// Valid/test accuracy pair for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitAcc {
    pub valid: f64,
    pub test: f64,
}

impl SplitAcc {
    fn get(&self, split: Split) -> f64 {
        match split {
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }
}

/// Accuracies of one architecture across all datasets and splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub cifar10: SplitAcc,
    pub cifar100: SplitAcc,
    pub imagenet16_120: SplitAcc,
}

impl BenchRecord {
    pub fn get(&self, id: DatasetId) -> f64 {
        match id.dataset {
            Dataset::Cifar10 => self.cifar10.get(id.split),
            Dataset::Cifar100 => self.cifar100.get(id.split),
            Dataset::ImageNet16_120 => self.imagenet16_120.get(id.split),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RawEntry {
    arch: String,
    cifar10: SplitAcc,
    cifar100: SplitAcc,
    imagenet16_120: SplitAcc,
}

/// Benchmark loading and lookup failures.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate architecture {arch}")]
    DuplicateArch { line: usize, arch: String },
    #[error("incomplete table: {present} of {expected} architectures present")]
    Incomplete { present: usize, expected: usize },
    #[error("no entry for architecture {arch}")]
    MissingEntry { arch: String },
    #[error("table has no entries")]
    Empty,
}

/// FNV-1a, 64 bit. Chosen for being tiny, stable, and easy to recompute in
/// any language when cross-checking a manifest.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// An in-memory benchmark table over the cell space.
#[derive(Clone)]
pub struct BenchTable {
    entries: Vec<Option<BenchRecord>>,
    present: usize,
    digest: u64,
}

impl fmt::Debug for BenchTable {
    /// Compact form: the full entry vector would be 15,625 lines of noise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchTable")
            .field("present", &self.present)
            .field("digest", &format_args!("{:016x}", self.digest))
            .finish()
    }
}

impl BenchTable {
    /// Load a complete table from a JSON-lines file. Fails on any malformed
    /// line, duplicate, out-of-range accuracy, or missing cell.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, false)
    }

    /// Load a table that may be missing cells. Lookups against the holes
    /// return [`BenchError::MissingEntry`].
    pub fn load_partial(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes, true)
    }

    /// Load from any reader; `allow_partial` as in [`BenchTable::load_partial`].
    pub fn from_reader(mut reader: impl Read, allow_partial: bool) -> Result<Self, BenchError> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, allow_partial)
    }

    pub fn from_bytes(bytes: &[u8], allow_partial: bool) -> Result<Self, BenchError> {
        let digest = fnv1a64(bytes);
        let text = std::str::from_utf8(bytes).map_err(|e| BenchError::Parse {
            line: 0,
            message: format!("not utf-8: {e}"),
        })?;
        let mut entries: Vec<Option<BenchRecord>> = vec![None; SPACE_SIZE as usize];
        let mut present = 0usize;
        for (ix, line) in text.lines().enumerate() {
            let line_no = ix + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawEntry = serde_json::from_str(line).map_err(|e| BenchError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let arch = Nb201Arch::parse(&raw.arch).map_err(|e| BenchError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let record = BenchRecord {
                cifar10: raw.cifar10,
                cifar100: raw.cifar100,
                imagenet16_120: raw.imagenet16_120,
            };
            for (name, pair) in [
                ("cifar10", record.cifar10),
                ("cifar100", record.cifar100),
                ("imagenet16_120", record.imagenet16_120),
            ] {
                for (split, v) in [("valid", pair.valid), ("test", pair.test)] {
                    if !(0.0..=100.0).contains(&v) || !v.is_finite() {
                        return Err(BenchError::Parse {
                            line: line_no,
                            message: format!("{name}.{split} accuracy {v} outside [0, 100]"),
                        });
                    }
                }
            }
            let slot = &mut entries[arch.index() as usize];
            if slot.is_some() {
                return Err(BenchError::DuplicateArch {
                    line: line_no,
                    arch: raw.arch,
                });
            }
            *slot = Some(record);
            present += 1;
        }
        if !allow_partial && present != SPACE_SIZE as usize {
            return Err(BenchError::Incomplete {
                present,
                expected: SPACE_SIZE as usize,
            });
        }
        Ok(BenchTable {
            entries,
            present,
            digest,
        })
    }

    /// Build a table directly from per-index records (used by the synthetic
    /// generator). The digest is computed over the serialised form, so a
    /// table built in memory and the same table written to disk and loaded
    /// back report the same identity.
    pub fn from_records(records: Vec<BenchRecord>) -> Self {
        assert_eq!(records.len(), SPACE_SIZE as usize, "full table required");
        let mut table = BenchTable {
            entries: records.into_iter().map(Some).collect(),
            present: SPACE_SIZE as usize,
            digest: 0,
        };
        let mut buf = Vec::new();
        table
            .write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        table.digest = fnv1a64(&buf);
        table
    }

    /// Number of architectures with data.
    pub fn len(&self) -> usize {
        self.present
    }

    pub fn is_empty(&self) -> bool {
        self.present == 0
    }

    pub fn is_complete(&self) -> bool {
        self.present == SPACE_SIZE as usize
    }

    /// 64-bit FNV-1a digest of the raw bytes this table was loaded from.
    pub fn digest(&self) -> u64 {
        self.digest
    }

    /// Accuracy of one architecture on one dataset/split.
    pub fn lookup(&self, arch: &Nb201Arch, id: DatasetId) -> Result<f64, BenchError> {
        self.entries[arch.index() as usize]
            .as_ref()
            .map(|r| r.get(id))
            .ok_or_else(|| BenchError::MissingEntry {
                arch: arch.to_arch_string(),
            })
    }

    /// Full record of one architecture.
    pub fn record(&self, arch: &Nb201Arch) -> Result<&BenchRecord, BenchError> {
        self.entries[arch.index() as usize]
            .as_ref()
            .ok_or_else(|| BenchError::MissingEntry {
                arch: arch.to_arch_string(),
            })
    }

    /// The architecture with the highest accuracy on `id`. Ties go to the
    /// smallest canonical index, which makes the result deterministic.
    pub fn optimal(&self, id: DatasetId) -> Result<(Nb201Arch, f64), BenchError> {
        let mut best: Option<(u32, f64)> = None;
        for (ix, entry) in self.entries.iter().enumerate() {
            if let Some(record) = entry {
                let acc = record.get(id);
                if best.map_or(true, |(_, b)| acc > b) {
                    best = Some((ix as u32, acc));
                }
            }
        }
        let (ix, acc) = best.ok_or(BenchError::Empty)?;
        Ok((Nb201Arch::from_index(ix).expect("index in range"), acc))
    }

    /// Write the table in the ingest format, in canonical index order.
    pub fn write_jsonl(&self, mut w: impl std::io::Write) -> Result<(), BenchError> {
        for (ix, entry) in self.entries.iter().enumerate() {
            if let Some(record) = entry {
                let arch = Nb201Arch::from_index(ix as u32).expect("index in range");
                let raw = RawEntry {
                    arch: arch.to_arch_string(),
                    cifar10: record.cifar10,
                    cifar100: record.cifar100,
                    imagenet16_120: record.imagenet16_120,
                };
                serde_json::to_writer(&mut w, &raw).map_err(|e| BenchError::Parse {
                    line: ix + 1,
                    message: e.to_string(),
                })?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry_line(arch: &Nb201Arch, base: f64) -> String {
        format!(
            r#"{{"arch": "{}", "cifar10": {{"valid": {v1}, "test": {v2}}}, "cifar100": {{"valid": {v3}, "test": {v4}}}, "imagenet16_120": {{"valid": {v5}, "test": {v6}}}}}"#,
            arch.to_arch_string(),
            v1 = base,
            v2 = base + 1.0,
            v3 = base - 10.0,
            v4 = base - 9.0,
            v5 = base - 30.0,
            v6 = base - 29.0,
        )
    }

    #[test]
    fn partial_load_and_lookup() {
        let a0 = Nb201Arch::from_index(0).unwrap();
        let a1 = Nb201Arch::from_index(1).unwrap();
        let text = format!("{}\n{}\n", entry_line(&a0, 90.0), entry_line(&a1, 91.0));
        let table = BenchTable::from_bytes(text.as_bytes(), true).unwrap();
        assert_eq!(table.len(), 2);
        let id = DatasetId::new(Dataset::Cifar10, Split::Test);
        assert_eq!(table.lookup(&a0, id).unwrap(), 91.0);
        assert_eq!(table.lookup(&a1, id).unwrap(), 92.0);
        let hole = Nb201Arch::from_index(2).unwrap();
        assert!(matches!(
            table.lookup(&hole, id),
            Err(BenchError::MissingEntry { .. })
        ));
    }

    #[test]
    fn strict_load_rejects_partial_tables() {
        let a0 = Nb201Arch::from_index(0).unwrap();
        let text = entry_line(&a0, 90.0);
        let err = BenchTable::from_bytes(text.as_bytes(), false).unwrap_err();
        assert!(matches!(
            err,
            BenchError::Incomplete {
                present: 1,
                expected: 15_625
            }
        ));
    }

    #[test]
    fn duplicates_are_rejected_with_line_number() {
        let a0 = Nb201Arch::from_index(7).unwrap();
        let text = format!("{}\n{}\n", entry_line(&a0, 90.0), entry_line(&a0, 91.0));
        let err = BenchTable::from_bytes(text.as_bytes(), true).unwrap_err();
        match err {
            BenchError::DuplicateArch { line, .. } => assert_eq!(line, 2),
            other => panic!("expected DuplicateArch, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_accuracy_is_a_parse_error() {
        let a0 = Nb201Arch::from_index(0).unwrap();
        let text = entry_line(&a0, 101.0);
        let err = BenchTable::from_bytes(text.as_bytes(), true).unwrap_err();
        assert!(matches!(err, BenchError::Parse { line: 1, .. }));
    }

    #[test]
    fn optimal_breaks_ties_by_smallest_index() {
        let a0 = Nb201Arch::from_index(3).unwrap();
        let a1 = Nb201Arch::from_index(9).unwrap();
        let text = format!("{}\n{}\n", entry_line(&a1, 90.0), entry_line(&a0, 90.0));
        let table = BenchTable::from_bytes(text.as_bytes(), true).unwrap();
        let id = DatasetId::new(Dataset::Cifar10, Split::Valid);
        let (best, acc) = table.optimal(id).unwrap();
        assert_eq!(acc, 90.0);
        assert_eq!(best.index(), 3);
    }

    #[test]
    fn digest_tracks_bytes_and_survives_round_trip() {
        let a0 = Nb201Arch::from_index(0).unwrap();
        let t1 = entry_line(&a0, 90.0);
        let t2 = entry_line(&a0, 91.0);
        let d1 = BenchTable::from_bytes(t1.as_bytes(), true).unwrap().digest();
        let d2 = BenchTable::from_bytes(t2.as_bytes(), true).unwrap().digest();
        assert_ne!(d1, d2);
        assert_eq!(d1, fnv1a64(t1.as_bytes()));
    }

    #[test]
    fn written_form_reloads_to_same_digest() {
        let records: Vec<BenchRecord> = (0..SPACE_SIZE)
            .map(|ix| {
                let v = 50.0 + (ix % 40) as f64;
                BenchRecord {
                    cifar10: SplitAcc {
                        valid: v,
                        test: v + 1.0,
                    },
                    cifar100: SplitAcc {
                        valid: v - 20.0,
                        test: v - 19.0,
                    },
                    imagenet16_120: SplitAcc {
                        valid: v - 40.0,
                        test: v - 39.0,
                    },
                }
            })
            .collect();
        let table = BenchTable::from_records(records);
        assert!(table.is_complete());
        let mut buf = Vec::new();
        table.write_jsonl(&mut buf).unwrap();
        let reloaded = BenchTable::from_bytes(&buf, false).unwrap();
        assert_eq!(reloaded.digest(), table.digest());
    }

    #[test]
    fn dataset_and_split_names_round_trip() {
        for d in Dataset::ALL {
            assert_eq!(d.name().parse::<Dataset>().unwrap(), d);
        }
        assert_eq!(
            "imagenet16_120".parse::<Dataset>().unwrap(),
            Dataset::ImageNet16_120
        );
        assert_eq!("val".parse::<Split>().unwrap(), Split::Valid);
    }
}
