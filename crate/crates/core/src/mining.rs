//! Binary-context construction and maximal frequent correlated pattern
//! mining under a minimum support and a minimum all-confidence.
//!
//! Supports are kept as exact `(count, total)` pairs. A fractional threshold
//! `t` over a denominator `d` is satisfied by a count `c` iff
//! `c >= ceil(t * d)`, so boundary cases such as "count equals threshold"
//! never depend on float rounding.
//!
//! Mining is levelwise: frequent singletons seed the maximal set, each level
//! is produced from the previous one by a prefix join, pruned by the
//! cross-support bound and by anti-monotony before any support is counted,
//! and every pattern of the new level evicts its immediate subsets from the
//! maximal set.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::grid::FileId;
use crate::workload::AccessHistory;

pub type ItemId = u32;

/// Default cap on candidates generated for a single level.
pub const DEFAULT_MAX_CANDIDATES: usize = 1_000_000;

/// Absorbs representation error in `threshold * denominator`.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MiningError {
    #[error("support is undefined on a context with no transactions")]
    EmptyContext,
    #[error("minsupp must be in (0, 1] (got {0})")]
    MinSupp(f64),
    #[error("min all-confidence must be in [0, 1] (got {0})")]
    MinAllConfidence(f64),
    #[error("candidate explosion: level {level} produced more than {limit} candidates")]
    CandidateExplosion { level: usize, limit: usize },
    #[error("line {line}: invalid item id {token:?}")]
    BadItem { line: usize, token: String },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiningThresholds {
    pub minsupp: f64,
    pub min_all_confidence: f64,
    pub max_candidates: usize,
}

impl MiningThresholds {
    pub fn new(minsupp: f64, min_all_confidence: f64) -> Result<Self, MiningError> {
        let t = MiningThresholds {
            minsupp,
            min_all_confidence,
            max_candidates: DEFAULT_MAX_CANDIDATES,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_max_candidates(mut self, limit: usize) -> Self {
        self.max_candidates = limit;
        self
    }

    pub fn validate(&self) -> Result<(), MiningError> {
        if !(self.minsupp > 0.0 && self.minsupp <= 1.0) {
            return Err(MiningError::MinSupp(self.minsupp));
        }
        if !(0.0..=1.0).contains(&self.min_all_confidence) {
            return Err(MiningError::MinAllConfidence(self.min_all_confidence));
        }
        Ok(())
    }

    /// Smallest transaction count that is frequent among `total`.
    pub fn min_count(&self, total: usize) -> usize {
        ratio_floor(self.minsupp, total).max(1)
    }

    /// `numerator / denominator >= min_all_confidence`, exactly.
    fn correlated(&self, numerator: usize, denominator: usize) -> bool {
        numerator >= ratio_floor(self.min_all_confidence, denominator)
    }
}

fn ratio_floor(threshold: f64, denominator: usize) -> usize {
    (threshold * denominator as f64 - THRESHOLD_SLACK)
        .ceil()
        .max(0.0) as usize
}

/// Exact support: `count` of `total` transactions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Support {
    pub count: usize,
    pub total: usize,
}

impl Support {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count as f64 / self.total as f64
        }
    }
}

/// Fixed-size transaction bitset.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Tidset(Vec<u64>);

impl Tidset {
    fn empty(len: usize) -> Self {
        Tidset(vec![0; len.div_ceil(64)])
    }

    fn full(len: usize) -> Self {
        let mut t = Tidset(vec![u64::MAX; len.div_ceil(64)]);
        if !len.is_multiple_of(64) {
            if let Some(last) = t.0.last_mut() {
                *last = (1u64 << (len % 64)) - 1;
            }
        }
        t
    }

    fn insert(&mut self, row: usize) {
        self.0[row / 64] |= 1 << (row % 64);
    }

    fn contains(&self, row: usize) -> bool {
        self.0[row / 64] & (1 << (row % 64)) != 0
    }

    fn intersect(&mut self, other: &Tidset) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a &= b;
        }
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn resized(&self, len: usize) -> Self {
        let mut t = self.clone();
        t.0.resize(len.div_ceil(64), 0);
        t
    }
}

/// Boolean transaction x item matrix, stored column-wise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryContext {
    items: Vec<ItemId>,
    columns: Vec<Tidset>,
    transactions: usize,
}

impl BinaryContext {
    /// Builds a context from transactions given as item lists. Duplicate
    /// items in a row are ignored.
    pub fn from_transactions<R: AsRef<[ItemId]>>(rows: &[R]) -> Self {
        let mut items: Vec<ItemId> = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        items.sort_unstable();
        items.dedup();
        let mut columns = vec![Tidset::empty(rows.len()); items.len()];
        for (row, r) in rows.iter().enumerate() {
            for item in r.as_ref() {
                let col = items.binary_search(item).expect("collected above");
                columns[col].insert(row);
            }
        }
        BinaryContext {
            items,
            columns,
            transactions: rows.len(),
        }
    }

    pub fn transaction_count(&self) -> usize {
        self.transactions
    }

    /// Items with at least one occurrence, ascending.
    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn contains(&self, row: usize, item: ItemId) -> bool {
        self.column(item).is_some_and(|c| c.contains(row))
    }

    pub fn rows(&self) -> Vec<Vec<ItemId>> {
        (0..self.transactions)
            .map(|row| {
                self.items
                    .iter()
                    .zip(&self.columns)
                    .filter(|(_, c)| c.contains(row))
                    .map(|(&i, _)| i)
                    .collect()
            })
            .collect()
    }

    /// Same context with `extra` all-false transactions appended.
    pub fn padded(&self, extra: usize) -> Self {
        let total = self.transactions + extra;
        BinaryContext {
            items: self.items.clone(),
            columns: self.columns.iter().map(|c| c.resized(total)).collect(),
            transactions: total,
        }
    }

    fn column(&self, item: ItemId) -> Option<&Tidset> {
        self.items
            .binary_search(&item)
            .ok()
            .map(|i| &self.columns[i])
    }

    fn item_count(&self, item: ItemId) -> usize {
        self.column(item).map_or(0, Tidset::count)
    }

    fn itemset_count(&self, items: &[ItemId]) -> usize {
        let mut acc = Tidset::full(self.transactions);
        for &item in items {
            match self.column(item) {
                Some(col) => acc.intersect(col),
                None => return 0,
            }
        }
        acc.count()
    }

    /// Fraction of transactions containing every item of `items`.
    pub fn support(&self, items: &[ItemId]) -> Result<Support, MiningError> {
        if self.transactions == 0 {
            return Err(MiningError::EmptyContext);
        }
        Ok(Support {
            count: self.itemset_count(items),
            total: self.transactions,
        })
    }

    /// `Supp(X) / max_{i in X} Supp(i)`; 1 for singletons, 0 if any item
    /// never occurs.
    pub fn all_confidence(&self, items: &[ItemId]) -> Result<f64, MiningError> {
        let supp = self.support(items)?;
        let almax = items.iter().map(|&i| self.item_count(i)).max().unwrap_or(0);
        if almax == 0 {
            return Ok(0.0);
        }
        Ok(supp.count as f64 / almax as f64)
    }
}

/// An itemset with its support and its largest single-item support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pattern {
    pub items: Vec<ItemId>,
    pub support: Support,
    pub almax: Support,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn all_confidence(&self) -> f64 {
        if self.almax.count == 0 {
            0.0
        } else {
            self.support.count as f64 / self.almax.count as f64
        }
    }

    pub fn files(&self) -> Vec<FileId> {
        self.items.iter().map(|&i| FileId(i)).collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.items.iter().map(ToString::to_string).collect();
        write!(
            f,
            "{} supp={:.6} all_confidence={:.6}",
            items.join(" "),
            self.support.fraction(),
            self.all_confidence()
        )
    }
}

/// Orders patterns by size descending, then lexicographically.
pub fn sort_by_size_desc(patterns: &mut [Pattern]) {
    patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.items.cmp(&b.items)));
}

/// Frequent singletons (all-confidence of a singleton is 1).
pub fn frequent_items(
    context: &BinaryContext,
    thresholds: &MiningThresholds,
) -> Result<Vec<Pattern>, MiningError> {
    thresholds.validate()?;
    let total = context.transaction_count();
    if total == 0 {
        return Ok(Vec::new());
    }
    let min_count = thresholds.min_count(total);
    Ok(context
        .items
        .iter()
        .zip(&context.columns)
        .map(|(&item, col)| (item, col.count()))
        .filter(|&(_, count)| count >= min_count)
        .map(|(item, count)| {
            let support = Support { count, total };
            Pattern {
                items: vec![item],
                support,
                almax: support,
            }
        })
        .collect())
}

/// Builds the frequent correlated patterns of size k+1 from those of size k.
pub fn generate_next_fcp(
    fcp_k: &[Pattern],
    thresholds: &MiningThresholds,
    context: &BinaryContext,
) -> Result<Vec<Pattern>, MiningError> {
    thresholds.validate()?;
    if fcp_k.is_empty() {
        return Ok(Vec::new());
    }
    let total = context.transaction_count();
    if total == 0 {
        return Ok(Vec::new());
    }
    let k = fcp_k[0].len();
    let min_count = thresholds.min_count(total);

    let mut level: Vec<&Vec<ItemId>> = fcp_k.iter().map(|p| &p.items).collect();
    level.sort();
    level.dedup();
    let known: HashSet<&[ItemId]> = level.iter().map(|v| v.as_slice()).collect();

    // Prefix join: two k-itemsets sharing their first k-1 items.
    let mut candidates: Vec<Vec<ItemId>> = Vec::new();
    let mut start = 0;
    while start < level.len() {
        let prefix = &level[start][..k - 1];
        let mut end = start + 1;
        while end < level.len() && &level[end][..k - 1] == prefix {
            end += 1;
        }
        for i in start..end {
            for j in i + 1..end {
                let mut c = level[i].clone();
                c.push(level[j][k - 1]);
                candidates.push(c);
                if candidates.len() > thresholds.max_candidates {
                    return Err(MiningError::CandidateExplosion {
                        level: k + 1,
                        limit: thresholds.max_candidates,
                    });
                }
            }
        }
        start = end;
    }

    let mut next = Vec::new();
    let mut subset = Vec::with_capacity(k);
    'candidates: for candidate in candidates {
        let counts: Vec<usize> = candidate.iter().map(|&i| context.item_count(i)).collect();
        let max_item = *counts.iter().max().expect("candidate is non-empty");
        let min_item = *counts.iter().min().expect("candidate is non-empty");
        // Cross-support: some pair has Supp(x)/Supp(y) below the threshold.
        if !thresholds.correlated(min_item, max_item) {
            continue;
        }
        // Anti-monotony: every k-subset must already be frequent correlated.
        for skip in 0..candidate.len() {
            subset.clear();
            subset.extend(
                candidate
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &x)| x),
            );
            if !known.contains(subset.as_slice()) {
                continue 'candidates;
            }
        }
        let count = context.itemset_count(&candidate);
        if count < min_count || !thresholds.correlated(count, max_item) {
            continue;
        }
        next.push(Pattern {
            items: candidate,
            support: Support { count, total },
            almax: Support {
                count: max_item,
                total,
            },
        });
    }
    Ok(next)
}

/// Every frequent correlated pattern, grouped by size (index 0 = singletons).
pub fn frequent_correlated_levels(
    context: &BinaryContext,
    thresholds: &MiningThresholds,
) -> Result<Vec<Vec<Pattern>>, MiningError> {
    let mut levels = Vec::new();
    let mut current = frequent_items(context, thresholds)?;
    while !current.is_empty() {
        let next = generate_next_fcp(&current, thresholds, context)?;
        levels.push(current);
        current = next;
    }
    Ok(levels)
}

/// Maximal frequent correlated patterns, sorted by size descending then
/// lexicographically.
pub fn mine_mfcp(
    context: &BinaryContext,
    thresholds: &MiningThresholds,
) -> Result<Vec<Pattern>, MiningError> {
    let mut current = frequent_items(context, thresholds)?;
    let mut maximal: BTreeMap<Vec<ItemId>, Pattern> = current
        .iter()
        .map(|p| (p.items.clone(), p.clone()))
        .collect();
    while !current.is_empty() {
        let next = generate_next_fcp(&current, thresholds, context)?;
        for pattern in &next {
            for skip in 0..pattern.len() {
                let mut sub = pattern.items.clone();
                sub.remove(skip);
                maximal.remove(&sub);
            }
        }
        maximal.extend(next.iter().map(|p| (p.items.clone(), p.clone())));
        current = next;
    }
    let mut result: Vec<Pattern> = maximal.into_values().collect();
    sort_by_size_desc(&mut result);
    Ok(result)
}

/// Mean request count over the jobs that requested `file` at least once;
/// zero when nobody did.
pub fn avg_access(history: &AccessHistory, file: FileId) -> f64 {
    let (sum, requesters) = requesters(history, file);
    if requesters == 0 {
        0.0
    } else {
        sum as f64 / requesters as f64
    }
}

fn requesters(history: &AccessHistory, file: FileId) -> (u64, u64) {
    history
        .cells()
        .filter(|&(_, f, _)| f == file)
        .fold((0, 0), |(sum, n), (_, _, c)| (sum + c as u64, n + 1))
}

/// One transaction per job of the history; a job contains a file iff its
/// request count for that file reaches the file's average access.
pub fn to_binary_context(history: &AccessHistory) -> BinaryContext {
    let files = history.files();
    let averages: Vec<(u64, u64)> = files.iter().map(|&f| requesters(history, f)).collect();
    let rows: Vec<Vec<ItemId>> = history
        .jobs()
        .iter()
        .map(|&job| {
            files
                .iter()
                .zip(&averages)
                .filter(|&(&f, &(sum, n))| {
                    // count >= sum / n, compared without division
                    let c = history.count(job, f) as u64;
                    c > 0 && c * n >= sum
                })
                .map(|(f, _)| f.0)
                .collect()
        })
        .collect();
    BinaryContext::from_transactions(&rows)
}

/// Parses one transaction per line, whitespace-separated non-negative
/// integer ids. Blank lines are empty transactions; `#` starts a comment
/// line.
pub fn parse_transactions(text: &str) -> Result<Vec<Vec<ItemId>>, MiningError> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<ItemId>().map_err(|_| MiningError::BadItem {
                    line: n + 1,
                    token: tok.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}
