//! Report datasets: CSV ingest and emit, summary statistics, subject typology,
//! message-length distribution and hypothesis checks on solved profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{expected_earnings, liar_mass, EquilibriumReport, StrategyProfile, TGrid};
use crate::error::{Error, Result};
use crate::message_space::{classify_message, ovm, MessageKind, MessageLabel};
use crate::model::{Anonymity, Message, ModelParams, Restriction, StateSpace};
use crate::scalar::Scalar;
use crate::simulation::{ReportRecord, Stage};

pub const CSV_HEADER: [&str; 6] = ["subject_id", "environment", "stage", "true_state", "message", "realized_payoff"];

/// Reads records with the standard header. Messages are canonicalized, so
/// `10;3` becomes `3;10`.
pub fn ingest_csv<R: Read>(reader: R) -> Result<Vec<ReportRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(format!("cannot read header: {e}")))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Data(format!("expected header '{}', found '{}'", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(","))));
    }
    let widest = StateSpace::new(StateSpace::MAX_STATES)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Row { row, reason: e.to_string() })?;
        let bad = |reason: String| Error::Row { row, reason };
        if rec.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len())));
        }
        let subject_id = rec[0].to_string();
        if subject_id.is_empty() {
            return Err(bad("empty subject_id".into()));
        }
        let anonymity: Anonymity = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let stage: Restriction = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        let optional = |field: &str, name: &str| -> Result<Option<usize>> {
            if field.is_empty() {
                Ok(None)
            } else {
                field.parse::<usize>().map(Some).map_err(|_| bad(format!("{name} '{field}' is not a positive integer")))
            }
        };
        let true_state = optional(&rec[3], "true_state")?;
        let message = Message::parse(&rec[4], widest).map_err(|e| bad(e.to_string()))?;
        let realized_payoff = optional(&rec[5], "realized_payoff")?;
        if true_state == Some(0) {
            return Err(bad("true_state must be at least 1".into()));
        }
        if let Some(p) = realized_payoff {
            if !message.contains(p) {
                return Err(bad(format!("realized_payoff {p} is not in message {message}")));
            }
        }
        out.push(ReportRecord { subject_id, anonymity, stage, true_state, message, realized_payoff });
    }
    Ok(out)
}

pub fn ingest_csv_path<P: AsRef<Path>>(path: P) -> Result<Vec<ReportRecord>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    ingest_csv(std::io::BufReader::new(file))
}

pub fn emit_csv<W: Write>(records: &[ReportRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.subject_id.clone(),
            r.anonymity.token().to_string(),
            r.stage.token().to_string(),
            r.true_state.map(|s| s.to_string()).unwrap_or_default(),
            r.message.to_string(),
            r.realized_payoff.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Checks every record against a state space of size `n`.
pub fn validate_records(records: &[ReportRecord], states: StateSpace) -> Result<()> {
    for (k, r) in records.iter().enumerate() {
        let bad = |reason: String| Error::Row { row: k + 1, reason };
        if r.message.highest() > states.n() {
            return Err(bad(format!("message {} exceeds N = {}", r.message, states.n())));
        }
        if let Some(i) = r.true_state {
            if !states.contains(i) {
                return Err(bad(format!("true_state {i} outside 1..={}", states.n())));
            }
        }
    }
    Ok(())
}

/// Table-style data summary. Averages use the mean of each reported message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub avg_report_restricted: Option<f64>,
    pub avg_report_unrestricted: Option<f64>,
    /// Share of unrestricted reports that are vague.
    pub vague_share: Option<f64>,
    /// Mean number of states in unrestricted reports.
    pub avg_length: Option<f64>,
    pub n: usize,
    pub n_restricted: usize,
    pub n_unrestricted: usize,
}

impl SummaryStats {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
        vec![
            ("n", self.n.to_string()),
            ("n_restricted", self.n_restricted.to_string()),
            ("n_unrestricted", self.n_unrestricted.to_string()),
            ("avg_report_restricted", opt(self.avg_report_restricted)),
            ("avg_report_unrestricted", opt(self.avg_report_unrestricted)),
            ("vague_share", opt(self.vague_share)),
            ("avg_length", opt(self.avg_length)),
        ]
    }

    /// Average reports divided by two, the experiment's dollar conversion.
    pub fn in_dollars(&self) -> Self {
        Self {
            avg_report_restricted: self.avg_report_restricted.map(|v| v / 2.0),
            avg_report_unrestricted: self.avg_report_unrestricted.map(|v| v / 2.0),
            ..self.clone()
        }
    }
}

fn ratio(num: Rational64, den: usize) -> Option<f64> {
    (den > 0).then(|| (num / Rational64::from_integer(den as i64)).to_f64().unwrap_or(f64::NAN))
}

pub fn summarize(records: &[ReportRecord]) -> Result<SummaryStats> {
    if records.is_empty() {
        return Err(Error::Data("cannot summarize an empty record set".into()));
    }
    let mut sums = [Rational64::zero(), Rational64::zero()];
    let mut counts = [0usize, 0usize];
    let mut vague = 0i64;
    let mut length = 0i64;
    for r in records {
        let s = match r.stage {
            Restriction::Restricted => 0,
            Restriction::Unrestricted => 1,
        };
        sums[s] += Rational64::new(r.message.sum() as i64, r.message.len() as i64);
        counts[s] += 1;
        if s == 1 {
            vague += r.message.is_vague() as i64;
            length += r.message.len() as i64;
        }
    }
    Ok(SummaryStats {
        avg_report_restricted: ratio(sums[0], counts[0]),
        avg_report_unrestricted: ratio(sums[1], counts[1]),
        vague_share: ratio(Rational64::from_integer(vague), counts[1]),
        avg_length: ratio(Rational64::from_integer(length), counts[1]),
        n: records.len(),
        n_restricted: counts[0],
        n_unrestricted: counts[1],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectType {
    /// Truthful in both stages.
    TruthTeller,
    /// Lied when restricted, truthful when vague messages were allowed.
    ConditionalLiar,
    /// Lied in both stages.
    Liar,
    /// Truth unknown, or truthful when restricted but lying when unrestricted.
    Unclassifiable,
}

impl SubjectType {
    pub const ALL: [SubjectType; 4] =
        [SubjectType::TruthTeller, SubjectType::ConditionalLiar, SubjectType::Liar, SubjectType::Unclassifiable];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubjectType::TruthTeller => "truth_teller",
            SubjectType::ConditionalLiar => "conditional_liar",
            SubjectType::Liar => "liar",
            SubjectType::Unclassifiable => "unclassifiable",
        }
    }
}

impl fmt::Display for SubjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectClass {
    pub label: SubjectType,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Typology {
    pub subjects: BTreeMap<String, SubjectClass>,
}

impl Typology {
    pub fn count(&self, label: SubjectType) -> usize {
        self.subjects.values().filter(|c| c.label == label).count()
    }

    pub fn counts(&self) -> Vec<(SubjectType, usize)> {
        SubjectType::ALL.iter().map(|l| (*l, self.count(*l))).collect()
    }
}

/// Types each subject from their two reports.
pub fn classify_subjects(records: &[ReportRecord]) -> Result<Typology> {
    let mut by_subject: BTreeMap<&str, [Option<&ReportRecord>; 2]> = BTreeMap::new();
    for r in records {
        let slot = by_subject.entry(r.subject_id.as_str()).or_default();
        let k = if r.stage == Restriction::Restricted { 0 } else { 1 };
        if slot[k].is_some() {
            return Err(Error::Data(format!("subject {} has two {} records", r.subject_id, r.stage.token())));
        }
        slot[k] = Some(r);
    }
    let mut subjects = BTreeMap::new();
    for (id, [restricted, unrestricted]) in by_subject {
        let (Some(r), Some(u)) = (restricted, unrestricted) else {
            let missing = if restricted.is_none() { "restricted" } else { "unrestricted" };
            return Err(Error::Data(format!("subject {id} has no {missing} record")));
        };
        let class = match (r.is_truthful(), u.is_truthful()) {
            (Some(true), Some(true)) => SubjectClass { label: SubjectType::TruthTeller, note: None },
            (Some(false), Some(true)) => SubjectClass { label: SubjectType::ConditionalLiar, note: None },
            (Some(false), Some(false)) => SubjectClass { label: SubjectType::Liar, note: None },
            (Some(true), Some(false)) => SubjectClass {
                label: SubjectType::Unclassifiable,
                note: Some("truthful when restricted, lied when unrestricted".into()),
            },
            _ => SubjectClass { label: SubjectType::Unclassifiable, note: Some("true state unknown".into()) },
        };
        subjects.insert(id.to_string(), class);
    }
    Ok(Typology { subjects })
}

/// Cumulative share of unrestricted reports with at most each length, from 1
/// to the longest observed.
pub fn length_cdf(records: &[ReportRecord]) -> Result<Vec<(usize, f64)>> {
    let lengths: Vec<usize> =
        records.iter().filter(|r| r.stage == Restriction::Unrestricted).map(|r| r.message.len()).collect();
    if lengths.is_empty() {
        return Err(Error::Data("no unrestricted reports to build a length distribution".into()));
    }
    let longest = *lengths.iter().max().expect("nonempty");
    let mut counts = vec![0usize; longest + 1];
    for l in &lengths {
        counts[*l] += 1;
    }
    let total = lengths.len();
    let mut acc = 0usize;
    Ok((1..=longest)
        .map(|l| {
            acc += counts[l];
            (l, Rational64::new(acc as i64, total as i64).to_f64().unwrap_or(f64::NAN))
        })
        .collect())
}

/// Label of every record under the report taxonomy.
pub fn label_records(records: &[ReportRecord], states: StateSpace) -> Result<Vec<MessageLabel>> {
    validate_records(records, states)?;
    Ok(records.iter().map(|r| classify_message(&r.message, r.true_state, states)).collect())
}

/// Counts of each message kind and of interval messages per stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormTable {
    pub kinds: BTreeMap<String, usize>,
    pub intervals: usize,
    pub vague: usize,
    pub total: usize,
}

pub fn tabulate_forms(records: &[ReportRecord], states: StateSpace, stage: Stage) -> Result<FormTable> {
    validate_records(records, states)?;
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    let (mut intervals, mut vague, mut total) = (0, 0, 0);
    for r in records.iter().filter(|r| r.stage == stage) {
        let l = classify_message(&r.message, r.true_state, states);
        *kinds.entry(l.kind.as_str().to_string()).or_default() += 1;
        intervals += l.interval_flag as usize;
        vague += l.kind.is_vague() as usize;
        total += 1;
    }
    Ok(FormTable { kinds, intervals, vague, total })
}

/// A solved or verified non-anonymous profile with its equilibrium report.
#[derive(Clone, Debug)]
pub struct SolvedProfile<'a, S> {
    pub profile: &'a StrategyProfile<S>,
    pub report: &'a EquilibriumReport,
}

/// Profiles for the four environments.
#[derive(Clone, Debug)]
pub struct HypothesisInputs<'a, S> {
    pub a_r: &'a StrategyProfile<S>,
    pub a_ur: &'a StrategyProfile<S>,
    pub na_r: SolvedProfile<'a, S>,
    pub na_ur: Option<SolvedProfile<'a, S>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HypothesisStatus {
    Checked { satisfied: bool },
    NotApplicable { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub id: String,
    pub statement: String,
    pub status: HypothesisStatus,
    pub statistics: Vec<(String, f64)>,
    pub inputs: Vec<String>,
}

impl HypothesisCheck {
    pub fn satisfied(&self) -> Option<bool> {
        match self.status {
            HypothesisStatus::Checked { satisfied } => Some(satisfied),
            HypothesisStatus::NotApplicable { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn get(&self, id: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

fn vague_mass<S: Scalar>(profile: &StrategyProfile<S>, grid: &TGrid<S>) -> f64 {
    let n = profile.n() as f64;
    profile
        .rows()
        .map(|(_, c, row)| {
            row.iter().filter(|(m, _)| m.is_vague()).map(|(_, p)| (grid.mass(c) * *p).to_f64_lossy()).sum::<f64>()
        })
        .sum::<f64>()
        / n
}

fn check(id: &str, statement: &str, satisfied: bool, statistics: Vec<(String, f64)>, inputs: &[&str]) -> HypothesisCheck {
    HypothesisCheck {
        id: id.into(),
        statement: statement.into(),
        status: HypothesisStatus::Checked { satisfied },
        statistics,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
    }
}

fn not_applicable(id: &str, statement: &str, reason: String, statistics: Vec<(String, f64)>, inputs: &[&str]) -> HypothesisCheck {
    HypothesisCheck {
        id: id.into(),
        statement: statement.into(),
        status: HypothesisStatus::NotApplicable { reason },
        statistics,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
    }
}

fn unavailable(solved: &Option<SolvedProfile<'_, impl Scalar>>, label: &str) -> Option<(String, Vec<(String, f64)>)> {
    match solved {
        None => Some((format!("no {label} profile supplied"), vec![])),
        Some(s) if !s.report.converged => Some((
            format!("{label} profile did not converge"),
            vec![
                ("belief_residual".into(), s.report.belief_residual),
                ("incentive_residual".into(), s.report.incentive_residual),
            ],
        )),
        _ => None,
    }
}

/// Evaluates the four hypotheses on analytic profiles.
pub fn check_hypotheses<S: Scalar>(
    inputs: &HypothesisInputs<'_, S>,
    params: &ModelParams<S>,
    grid: &TGrid<S>,
) -> Result<HypothesisReport> {
    let states = params.states;
    let mut checks = Vec::new();

    let h1 = "agents use vague messages in unrestricted environments";
    let v = vague_mass(inputs.a_ur, grid);
    checks.push(check("H1.a-ur", h1, v > 0.0, vec![("vague_mass".into(), v)], &["a-ur"]));
    match unavailable(&inputs.na_ur, "na-ur") {
        Some((reason, stats)) => checks.push(not_applicable("H1.na-ur", h1, reason, stats, &["na-ur"])),
        None => {
            let na_ur = inputs.na_ur.as_ref().expect("checked above");
            let v = vague_mass(na_ur.profile, grid);
            checks.push(check("H1.na-ur", h1, v > 0.0, vec![("vague_mass".into(), v)], &["na-ur"]));
        }
    }

    let h2 = "more agents lie when communication is restricted";
    let (lr, lu) = (liar_mass(inputs.a_r, grid)?.to_f64_lossy(), liar_mass(inputs.a_ur, grid)?.to_f64_lossy());
    checks.push(check(
        "H2.anonymous",
        h2,
        lr > lu,
        vec![("liar_mass_restricted".into(), lr), ("liar_mass_unrestricted".into(), lu)],
        &["a-r", "a-ur"],
    ));
    let na_pair = unavailable(&Some(inputs.na_r.clone()), "na-r").or_else(|| unavailable(&inputs.na_ur, "na-ur"));
    match na_pair {
        Some((reason, stats)) => {
            checks.push(not_applicable("H2.non_anonymous", h2, reason, stats, &["na-r", "na-ur"]))
        }
        None => {
            let na_ur = inputs.na_ur.as_ref().expect("checked above");
            let (lr, lu) =
                (liar_mass(inputs.na_r.profile, grid)?.to_f64_lossy(), liar_mass(na_ur.profile, grid)?.to_f64_lossy());
            checks.push(check(
                "H2.non_anonymous",
                h2,
                lr > lu,
                vec![("liar_mass_restricted".into(), lr), ("liar_mass_unrestricted".into(), lu)],
                &["na-r", "na-ur"],
            ));
        }
    }

    let h3 = "all truth-tellers in the anonymous unrestricted environment use the optimal vague message";
    let mut off_ovm = 0usize;
    let mut below = 0usize;
    let mut precise_truth_not_top = 0usize;
    for (i, _, row) in inputs.a_ur.rows() {
        for (m, p) in row {
            if *p <= S::zero() {
                continue;
            }
            if m.contains(i) && *m != ovm(i, states) {
                off_ovm += 1;
            }
            if m.lowest() < i {
                below += 1;
            }
            if m.contains(i) && m.is_precise() && i != states.top() {
                precise_truth_not_top += 1;
            }
        }
    }
    checks.push(check("H3.i", h3, off_ovm == 0, vec![("truthful_rows_off_ovm".into(), off_ovm as f64)], &["a-ur"]));
    checks.push(check(
        "H3.ii",
        "no message contains a value below the true state, and {N} is the only truthful precise message",
        below == 0 && precise_truth_not_top == 0,
        vec![("rows_below_state".into(), below as f64), ("precise_truthful_not_top".into(), precise_truth_not_top as f64)],
        &["a-ur"],
    ));

    let h4 = "average earnings are higher in the anonymous environment";
    match unavailable(&Some(inputs.na_r.clone()), "na-r") {
        Some((reason, stats)) => checks.push(not_applicable("H4.restricted", h4, reason, stats, &["a-r", "na-r"])),
        None => {
            let (a, na) = (
                expected_earnings(inputs.a_r, grid)?.to_f64_lossy(),
                expected_earnings(inputs.na_r.profile, grid)?.to_f64_lossy(),
            );
            checks.push(check(
                "H4.restricted",
                h4,
                a >= na,
                vec![("earnings_anonymous".into(), a), ("earnings_non_anonymous".into(), na)],
                &["a-r", "na-r"],
            ));
        }
    }
    match unavailable(&inputs.na_ur, "na-ur") {
        Some((reason, stats)) => checks.push(not_applicable("H4.unrestricted", h4, reason, stats, &["a-ur", "na-ur"])),
        None => {
            let na_ur = inputs.na_ur.as_ref().expect("checked above");
            let (a, na) = (
                expected_earnings(inputs.a_ur, grid)?.to_f64_lossy(),
                expected_earnings(na_ur.profile, grid)?.to_f64_lossy(),
            );
            checks.push(check(
                "H4.unrestricted",
                h4,
                a >= na,
                vec![("earnings_anonymous".into(), a), ("earnings_non_anonymous".into(), na)],
                &["a-ur", "na-ur"],
            ));
        }
    }
    Ok(HypothesisReport { checks })
}

/// Message kinds of every record, used to build labeled output.
pub fn kind_of(record: &ReportRecord, states: StateSpace) -> MessageKind {
    classify_message(&record.message, record.true_state, states).kind
}
