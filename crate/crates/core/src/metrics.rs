//! Outcome breakdowns, pass@k and token summaries, plus the report formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::InstanceKey;
use crate::pipeline::SkillsMode;
use crate::platform::PlatformId;
use crate::provider::TokenUsage;

/// Per-attempt outcome. The derived order is CF < BF < BC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    /// Compile failure: did not build or could not be flashed.
    CF,
    /// Behavior failure: flashed but failed the behavioral check.
    BF,
    /// Behavior correct.
    BC,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::CF => "CF",
            Outcome::BF => "BF",
            Outcome::BC => "BC",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{} instance(s) have fewer than {k} completed attempts: {}", instances.len(), instances.join(", "))]
    InsufficientAttempts { k: usize, instances: Vec<String> },
    #[error("no instances in group {0}")]
    EmptyGroup(String),
    #[error("unsupported report format {0:?} (expected md, csv or json)")]
    UnsupportedFormat(String),
    #[error("malformed report document: {0}")]
    Parse(String),
}

/// Best outcome among the first `k` attempts.
pub fn outcome_at_k(outcomes: &[Outcome], k: usize) -> Result<Outcome, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if outcomes.len() < k {
        return Err(MetricsError::InsufficientAttempts {
            k,
            instances: Vec::new(),
        });
    }
    Ok(outcomes[..k].iter().copied().max().expect("k >= 1"))
}

/// Token usage of one run, split by node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeUsage {
    pub manager: TokenUsage,
    pub coder: TokenUsage,
}

/// What the metrics need to know about one instance. Attempt slots are in
/// index order; `None` marks an attempt that has not completed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceResult {
    pub key: InstanceKey,
    pub level: u8,
    pub outcomes: Vec<Option<Outcome>>,
    pub usage: Vec<Option<NodeUsage>>,
}

impl InstanceResult {
    /// Outcome at k if the first k attempts are complete.
    pub fn at_k(&self, k: usize) -> Option<Outcome> {
        if k == 0 || self.outcomes.len() < k {
            return None;
        }
        let first: Option<Vec<Outcome>> = self.outcomes[..k].iter().copied().collect();
        first.and_then(|o| outcome_at_k(&o, k).ok())
    }
}

/// Level column of a breakdown; `None` is the total over all levels.
pub type LevelKey = Option<u8>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanUsage {
    pub input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenSummary {
    /// Instances that contributed at least one run.
    pub instances: usize,
    pub manager: MeanUsage,
    pub coder: MeanUsage,
    pub total: MeanUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellBreakdown {
    pub mode: SkillsMode,
    pub platform: PlatformId,
    pub level: LevelKey,
    pub instances: usize,
    pub cf: usize,
    pub bf: usize,
    pub bc: usize,
    /// Instances whose first k attempts are not all complete yet.
    pub pending: usize,
    pub tokens: TokenSummary,
}

impl CellBreakdown {
    pub fn cell(&self) -> String {
        format!("{}/{}/{}", self.cf, self.bf, self.bc)
    }
}

/// An exact fraction, compared by value.
#[derive(Debug, Clone, Copy, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some((self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128)))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

fn in_group(r: &InstanceResult, mode: SkillsMode, platform: PlatformId, level: LevelKey) -> bool {
    r.key.mode == mode && r.key.platform == platform && level.is_none_or(|l| r.level == l)
}

fn group_name(mode: SkillsMode, platform: PlatformId, level: LevelKey) -> String {
    let level = level.map_or("Total".to_string(), |l| format!("L{l}"));
    format!("{}/{}/{}", mode.label(), platform.label(), level)
}

/// Mean per-instance usage: each instance's runs are averaged first, then
/// instances are averaged with equal weight.
pub fn token_summary<'a>(results: impl IntoIterator<Item = &'a InstanceResult>) -> TokenSummary {
    let mut n = 0usize;
    let mut sums = [0f64; 4];
    for r in results {
        let runs: Vec<&NodeUsage> = r.usage.iter().flatten().collect();
        if runs.is_empty() {
            continue;
        }
        let m = runs.len() as f64;
        let avg = |f: fn(&NodeUsage) -> u64| runs.iter().map(|u| f(u) as f64).sum::<f64>() / m;
        sums[0] += avg(|u| u.manager.input_tokens);
        sums[1] += avg(|u| u.manager.output_tokens);
        sums[2] += avg(|u| u.coder.input_tokens);
        sums[3] += avg(|u| u.coder.output_tokens);
        n += 1;
    }
    if n == 0 {
        return TokenSummary::default();
    }
    let d = n as f64;
    let manager = MeanUsage {
        input: sums[0] / d,
        output: sums[1] / d,
    };
    let coder = MeanUsage {
        input: sums[2] / d,
        output: sums[3] / d,
    };
    TokenSummary {
        instances: n,
        total: MeanUsage {
            input: manager.input + coder.input,
            output: manager.output + coder.output,
        },
        manager,
        coder,
    }
}

/// Groups in report order: modes, then platforms, then levels followed by
/// the total.
fn groups(results: &[InstanceResult]) -> Vec<(SkillsMode, PlatformId, LevelKey)> {
    let pairs: BTreeSet<(SkillsMode, PlatformId)> = results
        .iter()
        .map(|r| (r.key.mode, r.key.platform))
        .collect();
    let levels: BTreeSet<u8> = results.iter().map(|r| r.level).collect();
    let mut out = Vec::new();
    for (mode, platform) in pairs {
        for l in &levels {
            out.push((mode, platform, Some(*l)));
        }
        out.push((mode, platform, None));
    }
    out
}

/// Breakdowns where unfinished instances are counted as pending.
pub fn aggregate_partial(results: &[InstanceResult], k: usize) -> Vec<CellBreakdown> {
    groups(results)
        .into_iter()
        .map(|(mode, platform, level)| {
            let members: Vec<&InstanceResult> = results
                .iter()
                .filter(|r| in_group(r, mode, platform, level))
                .collect();
            let mut cell = CellBreakdown {
                mode,
                platform,
                level,
                instances: members.len(),
                cf: 0,
                bf: 0,
                bc: 0,
                pending: 0,
                tokens: token_summary(members.iter().copied()),
            };
            for r in &members {
                match r.at_k(k) {
                    Some(Outcome::CF) => cell.cf += 1,
                    Some(Outcome::BF) => cell.bf += 1,
                    Some(Outcome::BC) => cell.bc += 1,
                    None => cell.pending += 1,
                }
            }
            cell
        })
        .collect()
}

fn require_complete(results: &[InstanceResult], k: usize) -> Result<(), MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let missing: Vec<String> = results
        .iter()
        .filter(|r| r.at_k(k).is_none())
        .map(|r| r.key.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(MetricsError::InsufficientAttempts {
            k,
            instances: missing,
        })
    }
}

/// Breakdowns at k; every instance must have its first k attempts complete.
pub fn aggregate(results: &[InstanceResult], k: usize) -> Result<Vec<CellBreakdown>, MetricsError> {
    require_complete(results, k)?;
    Ok(aggregate_partial(results, k))
}

/// Fraction of the group's instances that reached BC within k attempts.
pub fn pass_at_k(
    results: &[InstanceResult],
    k: usize,
    mode: SkillsMode,
    platform: PlatformId,
    level: LevelKey,
) -> Result<Ratio, MetricsError> {
    let members: Vec<InstanceResult> = results
        .iter()
        .filter(|r| in_group(r, mode, platform, level))
        .cloned()
        .collect();
    if members.is_empty() {
        return Err(MetricsError::EmptyGroup(group_name(mode, platform, level)));
    }
    require_complete(&members, k)?;
    let bc = members
        .iter()
        .filter(|r| r.at_k(k) == Some(Outcome::BC))
        .count();
    Ok(Ratio::new(bc as u64, members.len() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(MetricsError::UnsupportedFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub k: usize,
    /// Distinct tasks per level, shown in the column headers.
    pub level_sizes: BTreeMap<u8, usize>,
    pub cells: Vec<CellBreakdown>,
}

impl Report {
    fn from_cells(results: &[InstanceResult], k: usize, cells: Vec<CellBreakdown>) -> Self {
        let mut tasks: BTreeMap<u8, BTreeSet<&str>> = BTreeMap::new();
        for r in results {
            tasks
                .entry(r.level)
                .or_default()
                .insert(r.key.task.as_str());
        }
        Self {
            k,
            level_sizes: tasks.into_iter().map(|(l, t)| (l, t.len())).collect(),
            cells,
        }
    }

    /// Report at k; fails if any instance is unfinished.
    pub fn build(results: &[InstanceResult], k: usize) -> Result<Self, MetricsError> {
        Ok(Self::from_cells(results, k, aggregate(results, k)?))
    }

    /// Report at k with unfinished instances counted as pending.
    pub fn partial(results: &[InstanceResult], k: usize) -> Self {
        Self::from_cells(results, k, aggregate_partial(results, k))
    }

    pub fn cell(
        &self,
        mode: SkillsMode,
        platform: PlatformId,
        level: LevelKey,
    ) -> Option<&CellBreakdown> {
        self.cells
            .iter()
            .find(|c| c.mode == mode && c.platform == platform && c.level == level)
    }

    pub fn emit(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Markdown => self.to_markdown(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    /// One row per (mode, platform); columns per level plus the total.
    pub fn to_markdown(&self) -> String {
        let total: usize = self.level_sizes.values().sum();
        let mut header = vec!["Skills".to_string(), "Platform".to_string()];
        header.extend(self.level_sizes.iter().map(|(l, n)| format!("L{l} ({n})")));
        header.push(format!("Total ({total})"));
        let mut out = format!("| {} |\n", header.join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
        let rows: Vec<(SkillsMode, PlatformId)> = {
            let mut seen = Vec::new();
            for c in &self.cells {
                if !seen.contains(&(c.mode, c.platform)) {
                    seen.push((c.mode, c.platform));
                }
            }
            seen
        };
        for (mode, platform) in rows {
            let mut row = vec![mode.label().to_string(), platform.label().to_string()];
            for level in self.level_sizes.keys().map(|l| Some(*l)).chain([None]) {
                row.push(
                    self.cell(mode, platform, level)
                        .map(CellBreakdown::cell)
                        .unwrap_or_else(|| "0/0/0".to_string()),
                );
            }
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
        out
    }

    /// Mean per-task token usage of each row's total group, by node.
    pub fn to_token_markdown(&self) -> String {
        let mut out = String::from(
            "| Skills | Platform | Manager in | Manager out | Coder in | Coder out | Total in | Total out |\n",
        );
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for c in self.cells.iter().filter(|c| c.level.is_none()) {
            let t = &c.tokens;
            out.push_str(&format!(
                "| {} | {} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} |\n",
                c.mode.label(),
                c.platform.label(),
                t.manager.input,
                t.manager.output,
                t.coder.input,
                t.coder.output,
                t.total.input,
                t.total.output,
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,mode,platform,level,instances,cf,bf,bc,pending,pass_at_k,\
manager_input,manager_output,coder_input,coder_output,total_input,total_output\n",
        );
        for c in &self.cells {
            let pass = if c.instances == 0 {
                String::new()
            } else {
                Ratio::new(c.bc as u64, c.instances as u64).to_string()
            };
            let t = &c.tokens;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.k,
                c.mode,
                c.platform,
                c.level.map_or("total".to_string(), |l| l.to_string()),
                c.instances,
                c.cf,
                c.bf,
                c.bc,
                c.pending,
                pass,
                t.manager.input,
                t.manager.output,
                t.coder.input,
                t.coder.output,
                t.total.input,
                t.total.output,
            ));
        }
        out
    }

    fn to_document(&self) -> JsonReport {
        let mut groups: BTreeMap<SkillsMode, BTreeMap<PlatformId, BTreeMap<String, JsonCell>>> =
            BTreeMap::new();
        for c in &self.cells {
            groups
                .entry(c.mode)
                .or_default()
                .entry(c.platform)
                .or_default()
                .insert(
                    level_label(c.level),
                    JsonCell {
                        instances: c.instances,
                        cf: c.cf,
                        bf: c.bf,
                        bc: c.bc,
                        pending: c.pending,
                        tokens: c.tokens.clone(),
                    },
                );
        }
        JsonReport {
            k: self.k,
            level_sizes: self
                .level_sizes
                .iter()
                .map(|(l, n)| (level_label(Some(*l)), *n))
                .collect(),
            groups,
        }
    }

    /// Nested mode -> platform -> level document.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let doc: JsonReport =
            serde_json::from_str(text).map_err(|e| MetricsError::Parse(e.to_string()))?;
        let mut level_sizes = BTreeMap::new();
        for (label, n) in doc.level_sizes {
            match parse_level(&label)? {
                Some(l) => level_sizes.insert(l, n),
                None => return Err(MetricsError::Parse("Total is not a level".into())),
            };
        }
        let mut cells = Vec::new();
        for (mode, platforms) in doc.groups {
            for (platform, levels) in platforms {
                let mut row: Vec<CellBreakdown> = Vec::new();
                for (label, c) in levels {
                    row.push(CellBreakdown {
                        mode,
                        platform,
                        level: parse_level(&label)?,
                        instances: c.instances,
                        cf: c.cf,
                        bf: c.bf,
                        bc: c.bc,
                        pending: c.pending,
                        tokens: c.tokens,
                    });
                }
                // levels ascending, total last
                row.sort_by_key(|c| (c.level.is_none(), c.level));
                cells.extend(row);
            }
        }
        Ok(Self {
            k: doc.k,
            level_sizes,
            cells,
        })
    }
}

fn level_label(level: LevelKey) -> String {
    level.map_or("Total".to_string(), |l| format!("L{l}"))
}

fn parse_level(label: &str) -> Result<LevelKey, MetricsError> {
    if label == "Total" {
        return Ok(None);
    }
    label
        .strip_prefix('L')
        .and_then(|n| n.parse().ok())
        .map(Some)
        .ok_or_else(|| MetricsError::Parse(format!("bad level key {label:?}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonCell {
    instances: usize,
    cf: usize,
    bf: usize,
    bc: usize,
    pending: usize,
    tokens: TokenSummary,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonReport {
    k: usize,
    level_sizes: BTreeMap<String, usize>,
    groups: BTreeMap<SkillsMode, BTreeMap<PlatformId, BTreeMap<String, JsonCell>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use Outcome::*;

    fn inst(task: &str, level: u8, outcomes: &[Outcome]) -> InstanceResult {
        InstanceResult {
            key: InstanceKey::new(task, SkillsMode::None, PlatformId::Arduino),
            level,
            outcomes: outcomes.iter().map(|o| Some(*o)).collect(),
            usage: vec![None; outcomes.len()],
        }
    }

    #[test]
    fn best_of_k() {
        assert_eq!(outcome_at_k(&[CF, CF, BF, BC, BF], 5), Ok(BC));
        assert_eq!(outcome_at_k(&[BF, CF], 1), Ok(BF));
        assert_eq!(outcome_at_k(&[CF; 5], 5), Ok(CF));
        assert!(matches!(
            outcome_at_k(&[BC], 2),
            Err(MetricsError::InsufficientAttempts { .. })
        ));
        assert_eq!(outcome_at_k(&[BC], 0), Err(MetricsError::ZeroK));
    }

    #[test]
    fn pass_at_k_and_errors() {
        let rs = vec![inst("a", 1, &[CF, BC]), inst("b", 2, &[BF, BF])];
        let p1 = pass_at_k(&rs, 1, SkillsMode::None, PlatformId::Arduino, None).unwrap();
        let p2 = pass_at_k(&rs, 2, SkillsMode::None, PlatformId::Arduino, None).unwrap();
        assert_eq!(p1, Ratio::new(0, 2));
        assert_eq!(p2, Ratio::new(1, 2));
        assert!(p1 <= p2);
        assert!(matches!(
            pass_at_k(&rs, 1, SkillsMode::HumanExpert, PlatformId::Arduino, None),
            Err(MetricsError::EmptyGroup(_))
        ));
        let mut unfinished = rs.clone();
        unfinished[0].outcomes[1] = None;
        match aggregate(&unfinished, 2) {
            Err(MetricsError::InsufficientAttempts { instances, .. }) => {
                assert_eq!(instances, ["a:none:atmega2560+arduino"])
            }
            other => panic!("{other:?}"),
        }
        let partial = aggregate_partial(&unfinished, 2);
        let total = partial.iter().find(|c| c.level.is_none()).unwrap();
        assert_eq!((total.bf, total.pending), (1, 1));
    }

    #[test]
    fn token_means() {
        let mut a = inst("a", 1, &[BC]);
        a.usage = vec![Some(NodeUsage {
            manager: TokenUsage::default(),
            coder: TokenUsage::new(100, 200),
        })];
        let mut b = inst("b", 1, &[BC]);
        b.usage = vec![Some(NodeUsage {
            manager: TokenUsage::default(),
            coder: TokenUsage::new(300, 400),
        })];
        let t = token_summary([&a, &b]);
        assert_eq!(
            t.total,
            MeanUsage {
                input: 200.0,
                output: 300.0
            }
        );
        assert_eq!(t.manager, MeanUsage::default());
    }

    #[test]
    fn formats() {
        let rs = vec![
            inst("a", 1, &[CF]),
            inst("b", 2, &[BC]),
            inst("c", 2, &[BF]),
        ];
        let report = Report::build(&rs, 1).unwrap();
        assert_eq!(
            report.to_markdown(),
            "| Skills | Platform | L1 (1) | L2 (2) | Total (3) |\n\
             |---|---|---|---|---|\n\
             | No-Skills | Arduino | 1/0/0 | 0/1/1 | 1/1/1 |\n"
        );
        let back = Report::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        assert!(report
            .to_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("1,none,atmega2560+arduino,1,1,1,0,0,0,0/1,"));
        let empty = Report::build(&[], 1).unwrap();
        assert_eq!(
            empty.to_markdown(),
            "| Skills | Platform | Total (0) |\n|---|---|---|\n"
        );
        assert_eq!(Report::from_json(&empty.to_json()).unwrap(), empty);
        assert!(matches!(
            "xml".parse::<ReportFormat>(),
            Err(MetricsError::UnsupportedFormat(_))
        ));
    }
}
