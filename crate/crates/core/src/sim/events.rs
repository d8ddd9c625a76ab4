//! Simulation event log, serialized as one JSON object per line.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::IdentitySource;
use crate::authn::Verdict;
use crate::error::{Error, Result};
use crate::metrics::{ConfusionCounters, DeviceKind, MetricsReport, TrustSplit};
use crate::social::{DeviceId, IdentityId, RelationType};
use crate::trust::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperienceCause {
    Interaction,
    /// The identity was seen on two devices at once.
    Duplicate,
    /// Admission found the identity already associated through another device.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t: f64,
    pub manager: DeviceId,
    pub identity: IdentityId,
    pub presenter: DeviceId,
    pub device_kind: DeviceKind,
    /// How an attacker obtained the identity; absent for legitimate devices.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<IdentitySource>,
    pub relation: RelationType,
    pub direct: f64,
    pub similarity: f64,
    pub recommendation: f64,
    pub trust: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub t: f64,
    pub manager: DeviceId,
    pub identity: IdentityId,
    pub presenter: DeviceId,
    pub relation: RelationType,
    pub direct: f64,
    pub similarity: f64,
    pub recommendation: f64,
    pub trust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Enroll {
        t: f64,
        identity: IdentityId,
        device: DeviceId,
        manager: DeviceId,
    },
    Waypoint {
        t: f64,
        device: DeviceId,
        x: f64,
        y: f64,
    },
    Communities {
        t: f64,
        count: usize,
        members: usize,
        largest: usize,
    },
    Theft {
        t: f64,
        attacker: DeviceId,
        identity: IdentityId,
        victim: DeviceId,
    },
    Fabricate {
        t: f64,
        attacker: DeviceId,
        identity: IdentityId,
    },
    Decision(DecisionRecord),
    Admit {
        t: f64,
        identity: IdentityId,
        presenter: DeviceId,
        manager: DeviceId,
    },
    Conflict {
        t: f64,
        identity: IdentityId,
        presenters: Vec<DeviceId>,
    },
    Experience {
        t: f64,
        evaluator: DeviceId,
        subject: IdentityId,
        presenter: DeviceId,
        outcome: Outcome,
        cause: ExperienceCause,
    },
    Exchange {
        t: f64,
        sender: DeviceId,
        receiver: DeviceId,
        entries: usize,
    },
    Assessment(AssessmentRecord),
    Revoke {
        t: f64,
        identity: IdentityId,
        presenter: DeviceId,
        manager: DeviceId,
        trust: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn decisions(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.events.iter().filter_map(|e| match e {
            Event::Decision(d) => Some(d),
            _ => None,
        })
    }

    pub fn assessments(&self) -> impl Iterator<Item = &AssessmentRecord> {
        self.events.iter().filter_map(|e| match e {
            Event::Assessment(a) => Some(a),
            _ => None,
        })
    }

    pub fn counters(&self) -> ConfusionCounters {
        ConfusionCounters::from_decisions(self.decisions().map(|d| (d.device_kind, d.verdict)))
    }

    /// Trust samples for one split: decisions on outside requesters, or
    /// periodic re-assessments of admitted identities.
    pub fn trust_samples(&self, split: TrustSplit) -> Vec<f64> {
        match split {
            TrustSplit::External => self.decisions().map(|d| d.trust).collect(),
            TrustSplit::Internal => self.assessments().map(|a| a.trust).collect(),
        }
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport::new(
            self.counters(),
            &self.trust_samples(TrustSplit::Internal),
            &self.trust_samples(TrustSplit::External),
        )
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: "<event log>".into(),
                line: k + 1,
                message: e.to_string(),
            })?;
            events.push(e);
        }
        Ok(EventLog { events })
    }
}
