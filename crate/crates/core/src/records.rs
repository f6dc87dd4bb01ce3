//! Event logs and the parsing rules that cut them into measurement
//! occurrences.
//!
//! A log is a seq-ordered list of [`EventRecord`]s. A [`ParsingRule`]
//! groups events into fixed windows of ticks; each non-empty window must
//! hold exactly one Alice command, at most one Eve command and any number of
//! detections. Detections are read through the rule's outcome encoding,
//! and the artifact policies decide what happens with two or more
//! detections (double fire) or none (no fire).

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::models::{DEFAULT_COMMAND, INCONCLUSIVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Actor {
    Alice,
    Bob,
    Eve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EventKind {
    Command,
    Detection,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Payload {
    pub label: String,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub value: Option<f64>,
}

/// One line of a log.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct EventRecord {
    pub seq: u64,
    pub tick: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub payload: Payload,
}

impl EventRecord {
    pub fn new(seq: u64, tick: u64, actor: Actor, kind: EventKind, label: &str) -> Self {
        Self {
            seq,
            tick,
            actor,
            kind,
            payload: Payload {
                label: label.to_owned(),
                value: None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DoubleFirePolicy {
    /// Keep the first detection and flag the occurrence.
    Mark,
    /// Discard the window.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum NoFirePolicy {
    /// Record `inconclusive` and flag the occurrence.
    MapToInconclusive,
    /// Discard the window.
    Drop,
}

/// Window length, artifact policies and detector encoding.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ParsingRule {
    pub window: u64,
    pub double_fire: DoubleFirePolicy,
    pub no_fire: NoFirePolicy,
    /// Detector label → outcome label.
    pub outcome_encoding: BTreeMap<String, String>,
    /// Whose detections count.
    #[cfg_attr(feature = "serde", serde(default = "default_detector"))]
    pub detector: Actor,
}

#[cfg(feature = "serde")]
fn default_detector() -> Actor {
    Actor::Bob
}

impl ParsingRule {
    /// Two-bit detector codes of a two-detector receiver:
    /// `00 → 0`, `01 → 1`, `10 → inconclusive`.
    pub fn two_bit(window: u64, double_fire: DoubleFirePolicy, no_fire: NoFirePolicy) -> Self {
        let outcome_encoding = [("00", "0"), ("01", "1"), ("10", INCONCLUSIVE)]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect();
        Self {
            window,
            double_fire,
            no_fire,
            outcome_encoding,
            detector: Actor::Bob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window must be at least one tick".into()));
        }
        if self.outcome_encoding.is_empty() {
            return Err(Error::Config("outcome encoding is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Artifact {
    DoubleFire,
    NoFire,
}

/// One parsed measurement: the window index, the commands in force and the
/// outcome.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Occurrence {
    pub index: u64,
    pub alice: String,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub eve: Option<String>,
    pub outcome: String,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Vec::is_empty")
    )]
    pub flags: Vec<Artifact>,
}

/// What the parser met and did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArtifactReport {
    pub windows: u64,
    pub occurrences: u64,
    pub double_fire_marked: u64,
    pub double_fire_dropped: u64,
    pub no_fire_mapped: u64,
    pub no_fire_dropped: u64,
    /// Detections by actors other than the rule's detector.
    pub ignored_detections: u64,
}

/// Cuts `log` into occurrences under `rule`. Windows without any event are
/// skipped.
pub fn parse_stream(
    log: &[EventRecord],
    rule: &ParsingRule,
) -> Result<(Vec<Occurrence>, ArtifactReport)> {
    rule.validate()?;
    for pair in log.windows(2) {
        if pair[1].seq <= pair[0].seq {
            return Err(Error::Structure(format!(
                "seq {} does not increase",
                pair[1].seq
            )));
        }
        if pair[1].tick / rule.window < pair[0].tick / rule.window {
            return Err(Error::Structure(format!(
                "seq {} steps back to an earlier window",
                pair[1].seq
            )));
        }
    }
    let mut report = ArtifactReport::default();
    let mut occurrences = Vec::new();
    for events in log.chunk_by(|a, b| a.tick / rule.window == b.tick / rule.window) {
        report.windows += 1;
        let window = events[0].tick / rule.window;
        if let Some(occ) = parse_window(window, events, rule, &mut report)? {
            occurrences.push(occ);
        }
    }
    report.occurrences = occurrences.len() as u64;
    Ok((occurrences, report))
}

fn parse_window(
    window: u64,
    events: &[EventRecord],
    rule: &ParsingRule,
    report: &mut ArtifactReport,
) -> Result<Option<Occurrence>> {
    let mut alice = None;
    let mut eve = None;
    let mut detections = Vec::new();
    for e in events {
        match (e.kind, e.actor) {
            (EventKind::Command, Actor::Alice) => {
                if alice.replace(e.payload.label.clone()).is_some() {
                    return Err(Error::Structure(format!(
                        "window {window} holds two Alice commands"
                    )));
                }
            }
            (EventKind::Command, Actor::Eve) => {
                if eve.replace(e.payload.label.clone()).is_some() {
                    return Err(Error::Structure(format!(
                        "window {window} holds two Eve commands"
                    )));
                }
            }
            (EventKind::Command, Actor::Bob) => {}
            (EventKind::Detection, actor) if actor == rule.detector => {
                detections.push(&e.payload.label);
            }
            (EventKind::Detection, _) => report.ignored_detections += 1,
        }
    }
    let Some(alice) = alice else {
        return Err(Error::Structure(format!(
            "window {window} has no Alice command"
        )));
    };
    let decode = |label: &String| -> Result<String> {
        rule.outcome_encoding
            .get(label)
            .cloned()
            .ok_or_else(|| Error::Label(format!("detector label `{label}` has no encoding")))
    };
    let (outcome, flags) = match detections.as_slice() {
        [] => match rule.no_fire {
            NoFirePolicy::MapToInconclusive => {
                report.no_fire_mapped += 1;
                (INCONCLUSIVE.to_owned(), vec![Artifact::NoFire])
            }
            NoFirePolicy::Drop => {
                report.no_fire_dropped += 1;
                return Ok(None);
            }
        },
        [one] => (decode(one)?, Vec::new()),
        [first, rest @ ..] => {
            for r in rest {
                decode(r)?;
            }
            match rule.double_fire {
                DoubleFirePolicy::Mark => {
                    report.double_fire_marked += 1;
                    (decode(first)?, vec![Artifact::DoubleFire])
                }
                DoubleFirePolicy::Drop => {
                    report.double_fire_dropped += 1;
                    return Ok(None);
                }
            }
        }
    };
    Ok(Some(Occurrence {
        index: window,
        alice,
        eve,
        outcome,
        flags,
    }))
}

/// Inverse of [`parse_stream`] for a rule whose encoding covers every
/// outcome: one window per occurrence at tick `index · window`.
pub fn synthesize_log(occurrences: &[Occurrence], rule: &ParsingRule) -> Result<Vec<EventRecord>> {
    rule.validate()?;
    let encode = |outcome: &str| -> Result<&str> {
        rule.outcome_encoding
            .iter()
            .find(|(_, v)| v.as_str() == outcome)
            .map(|(k, _)| k.as_str())
            .ok_or_else(|| Error::Label(format!("outcome `{outcome}` has no detector label")))
    };
    let mut log = Vec::new();
    let mut seq = 0u64;
    let mut push = |log: &mut Vec<EventRecord>, tick, actor, kind, label: &str| {
        log.push(EventRecord::new(seq, tick, actor, kind, label));
        seq += 1;
    };
    let mut last = None;
    for occ in occurrences {
        if last.is_some_and(|l| occ.index <= l) {
            return Err(Error::Structure("occurrence indices must increase".into()));
        }
        last = Some(occ.index);
        let tick = occ.index * rule.window;
        push(&mut log, tick, Actor::Alice, EventKind::Command, &occ.alice);
        if let Some(eve) = &occ.eve {
            push(&mut log, tick, Actor::Eve, EventKind::Command, eve);
        }
        if occ.flags.contains(&Artifact::NoFire) {
            continue;
        }
        let code = encode(&occ.outcome)?;
        push(&mut log, tick, rule.detector, EventKind::Detection, code);
        if occ.flags.contains(&Artifact::DoubleFire) {
            push(&mut log, tick, rule.detector, EventKind::Detection, code);
        }
    }
    Ok(log)
}

/// Counts of each outcome for one command configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyRow {
    pub alice: String,
    /// Eve's command, or `default` when none was logged.
    pub eve: String,
    pub total: u64,
    /// `(outcome, count)` over every outcome seen anywhere in the input.
    pub counts: Vec<(String, u64)>,
}

impl FrequencyRow {
    pub fn frequency(&self, outcome: &str) -> Option<f64> {
        self.counts
            .iter()
            .find(|(o, _)| o == outcome)
            .map(|(_, c)| *c as f64 / self.total as f64)
    }
}

/// Relative outcome frequencies per command configuration, laid out like a
/// probability table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrequencyTable {
    pub outcomes: Vec<String>,
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    pub fn row(&self, alice: &str, eve: &str) -> Option<&FrequencyRow> {
        self.rows.iter().find(|r| r.alice == alice && r.eve == eve)
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().map(|r| r.total).sum()
    }
}

/// Rows sorted by `(alice, eve)`, outcomes in order of first appearance.
pub fn frequencies(occurrences: &[Occurrence]) -> Result<FrequencyTable> {
    if occurrences.is_empty() {
        return Err(Error::Domain("no occurrences to count".into()));
    }
    let mut outcomes: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), BTreeMap<usize, u64>> = BTreeMap::new();
    for occ in occurrences {
        let j = match outcomes.iter().position(|o| *o == occ.outcome) {
            Some(j) => j,
            None => {
                outcomes.push(occ.outcome.clone());
                outcomes.len() - 1
            }
        };
        let eve = occ
            .eve
            .clone()
            .unwrap_or_else(|| DEFAULT_COMMAND.to_owned());
        *cells
            .entry((occ.alice.clone(), eve))
            .or_default()
            .entry(j)
            .or_default() += 1;
    }
    let rows = cells
        .into_iter()
        .map(|((alice, eve), by_outcome)| {
            let counts: Vec<(String, u64)> = outcomes
                .iter()
                .enumerate()
                .map(|(j, o)| (o.clone(), by_outcome.get(&j).copied().unwrap_or(0)))
                .collect();
            FrequencyRow {
                alice,
                eve,
                total: counts.iter().map(|(_, c)| c).sum(),
                counts,
            }
        })
        .collect();
    Ok(FrequencyTable { outcomes, rows })
}
