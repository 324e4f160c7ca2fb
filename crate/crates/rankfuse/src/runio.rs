//! Parsing, validation, canonicalization and serialization of TREC-style
//! run files and relevance judgments.
//!
//! Run format, one entry per line:
//!
//! ```text
//! <query_id> Q0 <doc_id> <rank> <score> <tag>
//! ```
//!
//! Qrels format: `<query_id> 0 <doc_id> <grade>`. Fields are separated by
//! one or more spaces or tabs; the second column of either format is
//! accepted verbatim and ignored.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use crate::{Error, Result};

/// One line of a run file: a scored document for a query.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub query_id: String,
    pub doc_id: String,
    /// 1-based rank within the query.
    pub rank: u32,
    /// Finite relevance estimate; higher is better.
    pub score: f64,
    pub tag: String,
}

/// One system's ranked output: per query, an ordered list of entries.
///
/// A `RunList` is *canonical* when, within every query, entries are sorted
/// by score descending (ties broken by `doc_id` ascending), ranks are
/// exactly `1..=N`, and doc ids are unique. [`parse_run`] checks doc
/// uniqueness; [`RunList::canonicalize`] establishes the rest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunList {
    pub system_id: String,
    queries: BTreeMap<String, Vec<RunEntry>>,
}

impl RunList {
    pub fn new(system_id: impl Into<String>) -> Self {
        RunList {
            system_id: system_id.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Build a canonical run from per-query `(doc_id, score)` pairs.
    ///
    /// Entries are sorted score-descending with `doc_id` ascending as the
    /// tie-break, ranks are assigned `1..=N`, and each query is truncated to
    /// `depth` entries when given. The system id doubles as the entry tag.
    pub fn from_scored_docs(
        system_id: impl Into<String>,
        scored: BTreeMap<String, Vec<(String, f64)>>,
        depth: Option<usize>,
    ) -> Self {
        let system_id = system_id.into();
        let mut queries = BTreeMap::new();
        for (query_id, mut docs) in scored {
            if docs.is_empty() {
                continue;
            }
            docs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            if let Some(depth) = depth {
                docs.truncate(depth);
            }
            let entries = docs
                .into_iter()
                .enumerate()
                .map(|(i, (doc_id, score))| {
                    debug_assert!(score.is_finite());
                    RunEntry {
                        query_id: query_id.clone(),
                        doc_id,
                        rank: (i + 1) as u32,
                        score,
                        tag: system_id.clone(),
                    }
                })
                .collect();
            queries.insert(query_id, entries);
        }
        RunList { system_id, queries }
    }

    /// Queries in lexicographic order with their entries.
    pub fn queries(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.queries.iter().map(|(q, e)| (q.as_str(), e.as_slice()))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    /// Entries for one query, or `None` when the run does not cover it.
    pub fn entries(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn query_count(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Re-sort every query by score descending (ties by `doc_id` ascending)
    /// and rewrite ranks as `1..=N`.
    ///
    /// Idempotent, and never changes the multiset of `(doc_id, score)`
    /// pairs of a query.
    pub fn canonicalize(&self) -> RunList {
        let mut queries = BTreeMap::new();
        for (query_id, entries) in &self.queries {
            let mut entries = entries.clone();
            entries.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then_with(|| a.doc_id.cmp(&b.doc_id))
            });
            for (i, entry) in entries.iter_mut().enumerate() {
                entry.rank = (i + 1) as u32;
            }
            queries.insert(query_id.clone(), entries);
        }
        RunList {
            system_id: self.system_id.clone(),
            queries,
        }
    }

    fn push(&mut self, entry: RunEntry) {
        self.queries
            .entry(entry.query_id.clone())
            .or_default()
            .push(entry);
    }
}

/// Relevance judgments: query id → doc id → integer grade.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    /// Record one judgment. A `(query, doc)` pair may appear at most once.
    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) -> Result<()> {
        let query_id = query_id.into();
        let doc_id = doc_id.into();
        let docs = self.judgments.entry(query_id.clone()).or_default();
        if docs.contains_key(&doc_id) {
            return Err(Error::Validation(format!(
                "duplicate judgment for query '{query_id}', doc '{doc_id}'"
            )));
        }
        docs.insert(doc_id, grade);
        Ok(())
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    /// True when the doc is judged with grade > 0.
    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id).is_some_and(|g| g > 0)
    }

    /// Docs judged relevant (grade > 0) for a query.
    pub fn relevant_docs(&self, query_id: &str) -> HashSet<&str> {
        self.judgments
            .get(query_id)
            .map(|docs| {
                docs.iter()
                    .filter(|(_, &g)| g > 0)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// Queries with at least one relevant document, in lexicographic order.
    pub fn evaluable_queries(&self) -> Vec<&str> {
        self.judgments
            .iter()
            .filter(|(_, docs)| docs.values().any(|&g| g > 0))
            .map(|(q, _)| q.as_str())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

fn parse_token(field: &str, what: &str, line: usize) -> Result<String> {
    if field.is_empty() || field.chars().any(char::is_whitespace) {
        return Err(Error::Parse {
            line,
            reason: format!("{what} must be a non-empty token, got '{field}'"),
        });
    }
    Ok(field.to_string())
}

/// Parse a TREC run from a reader.
///
/// Blank lines are skipped. Entries are grouped by query and ordered by
/// their stated rank; the run's system id is taken from the tag of the
/// first line. Malformed lines are reported with their 1-based line
/// number; a duplicate `(query, doc)` pair is a validation error.
pub fn parse_run<R: BufRead>(reader: R) -> Result<RunList> {
    let mut run = RunList::new("");
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let query_id = parse_token(fields[0], "query id", lineno)?;
        // fields[1] is the "Q0" column: accepted and ignored.
        let doc_id = parse_token(fields[2], "doc id", lineno)?;
        let rank: u32 = fields[3].parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("rank must be a positive integer, got '{}'", fields[3]),
        })?;
        if rank == 0 {
            return Err(Error::Parse {
                line: lineno,
                reason: "rank must be >= 1".to_string(),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("score must be a number, got '{}'", fields[4]),
        })?;
        if !score.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("score must be finite, got '{}'", fields[4]),
            });
        }
        let tag = parse_token(fields[5], "tag", lineno)?;

        if run.system_id.is_empty() {
            run.system_id = tag.clone();
        }
        if !seen.insert((query_id.clone(), doc_id.clone())) {
            return Err(Error::Validation(format!(
                "duplicate document '{doc_id}' for query '{query_id}' (line {lineno})"
            )));
        }
        run.push(RunEntry {
            query_id,
            doc_id,
            rank,
            score,
            tag,
        });
    }
    for entries in run.queries.values_mut() {
        entries.sort_by_key(|e| e.rank);
    }
    Ok(run)
}

/// Parse a run from a string.
pub fn parse_run_str(text: &str) -> Result<RunList> {
    parse_run(text.as_bytes())
}

/// Parse qrels from a reader. Format: `<query_id> <ignored> <doc_id> <grade>`.
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let query_id = parse_token(fields[0], "query id", lineno)?;
        let doc_id = parse_token(fields[2], "doc id", lineno)?;
        let grade: u32 = fields[3].parse().map_err(|_| Error::Parse {
            line: lineno,
            reason: format!("grade must be a non-negative integer, got '{}'", fields[3]),
        })?;
        qrels.insert(query_id, doc_id, grade)?;
    }
    Ok(qrels)
}

/// Parse qrels from a string.
pub fn parse_qrels_str(text: &str) -> Result<Qrels> {
    parse_qrels(text.as_bytes())
}

/// Serialize a canonical run in the 6-field format with the given tag.
///
/// Scores are written with six decimal places and LF line endings; the
/// second column is always the literal `Q0`. Serializing, re-parsing and
/// serializing again yields byte-identical output.
pub fn write_run(run: &RunList, tag: &str) -> String {
    let mut out = String::new();
    for (query_id, entries) in &run.queries {
        for entry in entries {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                query_id, entry.doc_id, entry.rank, entry.score, tag
            );
        }
    }
    out
}

/// Coverage of one query across a set of runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryCoverage {
    /// Union of doc ids retrieved by any run.
    pub doc_union: BTreeSet<String>,
    /// Per system id, the number of docs retrieved for this query.
    pub depths: BTreeMap<String, usize>,
    /// System ids of runs that do not cover this query.
    pub missing_from: Vec<String>,
}

/// Per-query doc-universe report over a set of runs.
#[derive(Debug, Clone, Default)]
pub struct RunSetReport {
    pub queries: BTreeMap<String, QueryCoverage>,
    /// Human-readable warnings for queries with partial coverage.
    pub warnings: Vec<String>,
}

/// Summarize doc-universe coverage across runs.
///
/// Queries absent from some runs are flagged as warnings, not errors.
pub fn validate_runset(runs: &[RunList]) -> Result<RunSetReport> {
    if runs.is_empty() {
        return Err(Error::NoRuns);
    }
    let all_queries: BTreeSet<&str> = runs.iter().flat_map(|r| r.query_ids()).collect();
    let mut report = RunSetReport::default();
    for query_id in all_queries {
        let mut coverage = QueryCoverage {
            doc_union: BTreeSet::new(),
            depths: BTreeMap::new(),
            missing_from: Vec::new(),
        };
        for run in runs {
            match run.entries(query_id) {
                Some(entries) => {
                    coverage.depths.insert(run.system_id.clone(), entries.len());
                    coverage
                        .doc_union
                        .extend(entries.iter().map(|e| e.doc_id.clone()));
                }
                None => coverage.missing_from.push(run.system_id.clone()),
            }
        }
        if !coverage.missing_from.is_empty() {
            report.warnings.push(format!(
                "query '{}' missing from: {}",
                query_id,
                coverage.missing_from.join(", ")
            ));
        }
        report.queries.insert(query_id.to_string(), coverage);
    }
    Ok(report)
}
