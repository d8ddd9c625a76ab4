//! CSV result tables and the run manifest.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::Behavior;
use crate::community::Community;
use crate::error::{Error, Result};
use crate::metrics::{format_metric, MetricsReport, TrustSplit};
use crate::sim::config::ScenarioConfig;
use crate::sim::events::{Event, EventLog};
use crate::sim::RunOutput;
use crate::social::{DeviceId, IdentityId};

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Writes `f(writer)` to a fresh file at `path`.
pub fn to_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub context: String,
    pub relation: String,
    pub seed: u64,
    #[serde(rename = "DR")]
    pub dr: String,
    #[serde(rename = "ACC")]
    pub acc: String,
    #[serde(rename = "FN")]
    pub fn_rate: String,
    #[serde(rename = "FP")]
    pub fp: String,
}

impl MetricsRow {
    pub fn new(cfg: &ScenarioConfig, report: &MetricsReport) -> Self {
        MetricsRow {
            scenario: cfg.name.clone(),
            context: cfg.context.to_string(),
            relation: cfg.relation_filter.to_string(),
            seed: cfg.rng_seed,
            dr: format_metric(report.detection_rate),
            acc: format_metric(report.accuracy),
            fn_rate: format_metric(report.false_negative_rate),
            fp: format_metric(report.false_positive_rate),
        }
    }
}

pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricsRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "scenario", "context", "relation", "seed", "DR", "ACC", "FN", "FP",
    ])?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct EsrRow {
    split: &'static str,
    trust: f64,
    cum_fraction: f64,
}

pub fn write_esr_csv<W: Write>(w: W, report: &MetricsReport) -> Result<()> {
    let rows = [
        (TrustSplit::Internal, &report.internal_cdf),
        (TrustSplit::External, &report.external_cdf),
    ]
    .into_iter()
    .flat_map(|(split, cdf)| {
        cdf.iter().map(move |&(trust, cum_fraction)| EsrRow {
            split: split.name(),
            trust,
            cum_fraction,
        })
    });
    let mut out = csv_writer(w);
    out.write_record(["split", "trust", "cum_fraction"])?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct DecisionRow {
    time: f64,
    manager: DeviceId,
    identity: IdentityId,
    true_device_kind: &'static str,
    verdict: &'static str,
    trust: f64,
}

pub fn write_decisions_csv<W: Write>(w: W, log: &EventLog) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "time",
        "manager",
        "identity",
        "true_device_kind",
        "verdict",
        "trust",
    ])?;
    for d in log.decisions() {
        out.serialize(DecisionRow {
            time: d.t,
            manager: d.manager,
            identity: d.identity,
            true_device_kind: match d.device_kind {
                crate::metrics::DeviceKind::Legitimate => "legitimate",
                crate::metrics::DeviceKind::Attacker => "attacker",
            },
            verdict: match d.verdict {
                crate::authn::Verdict::Grant => "grant",
                crate::authn::Verdict::Deny => "deny",
            },
            trust: d.trust,
        })?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct TrustRow {
    time: f64,
    evaluator: DeviceId,
    subject: IdentityId,
    relation: String,
    #[serde(rename = "D")]
    direct: f64,
    #[serde(rename = "S")]
    similarity: f64,
    #[serde(rename = "R")]
    recommendation: f64,
    #[serde(rename = "T")]
    trust: f64,
}

/// Every trust evaluation in the log: access decisions and re-assessments.
pub fn write_trust_trace_csv<W: Write>(w: W, log: &EventLog) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "time",
        "evaluator",
        "subject",
        "relation",
        "D",
        "S",
        "R",
        "T",
    ])?;
    for e in log.events() {
        let row = match e {
            Event::Decision(d) => TrustRow {
                time: d.t,
                evaluator: d.manager,
                subject: d.identity,
                relation: d.relation.to_string(),
                direct: d.direct,
                similarity: d.similarity,
                recommendation: d.recommendation,
                trust: d.trust,
            },
            Event::Assessment(a) => TrustRow {
                time: a.t,
                evaluator: a.manager,
                subject: a.identity,
                relation: a.relation.to_string(),
                direct: a.direct,
                similarity: a.similarity,
                recommendation: a.recommendation,
                trust: a.trust,
            },
            _ => continue,
        };
        out.serialize(row)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct AttackRow {
    time: f64,
    attacker_device: DeviceId,
    identity: IdentityId,
    source: String,
    behavior: String,
    target_manager: DeviceId,
}

/// Access attempts made by attacker devices.
pub fn write_attack_trace_csv<W: Write>(w: W, log: &EventLog, behavior: Behavior) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "time",
        "attacker_device",
        "identity",
        "source",
        "behavior",
        "target_manager",
    ])?;
    for d in log.decisions() {
        let Some(source) = d.source else {
            continue;
        };
        out.serialize(AttackRow {
            time: d.t,
            attacker_device: d.presenter,
            identity: d.identity,
            source: source.to_string(),
            behavior: behavior.to_string(),
            target_manager: d.manager,
        })?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct CommunityRow {
    community_id: usize,
    device_id: DeviceId,
    context_kind: String,
}

/// One row per community member, by the device behind each identity.
pub fn write_communities_csv<W: Write>(
    w: W,
    communities: &[Community<IdentityId>],
    device_of: impl Fn(IdentityId) -> Option<DeviceId>,
) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["community_id", "device_id", "context_kind"])?;
    for c in communities {
        for i in &c.members {
            let Some(device_id) = device_of(*i) else {
                continue;
            };
            out.serialize(CommunityRow {
                community_id: c.id,
                device_id,
                context_kind: c.context.to_string(),
            })?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes every per-run table of `run` into `dir`, with file names prefixed
/// by `stem`. Returns the file names written.
pub fn write_run_tables(
    dir: &Path,
    stem: &str,
    cfg: &ScenarioConfig,
    run: &RunOutput,
) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let mut emit = |name: String, f: &dyn Fn(&mut dyn Write) -> Result<()>| -> Result<()> {
        to_file(&dir.join(&name), |w| f(w))?;
        written.push(name);
        Ok(())
    };
    emit(format!("{stem}_events.jsonl"), &|w| {
        run.log.write_jsonl(w).map_err(|e| Error::io("<events>", e))
    })?;
    emit(format!("{stem}_esr.csv"), &|w| {
        write_esr_csv(w, &run.report)
    })?;
    emit(format!("{stem}_decisions.csv"), &|w| {
        write_decisions_csv(w, &run.log)
    })?;
    emit(format!("{stem}_trust.csv"), &|w| {
        write_trust_trace_csv(w, &run.log)
    })?;
    emit(format!("{stem}_attacks.csv"), &|w| {
        write_attack_trace_csv(w, &run.log, cfg.attacker.behavior)
    })?;
    emit(format!("{stem}_communities.csv"), &|w| {
        write_communities_csv(w, &run.communities, |i| {
            run.identity_devices.get(&i).copied()
        })
    })?;
    Ok(written)
}

/// Everything needed to reproduce a batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
    pub config: ScenarioConfig,
}

impl Manifest {
    pub fn new(config: ScenarioConfig, seeds: Vec<u64>, files: Vec<String>) -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            files,
            config,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ConfusionCounters;

    #[test]
    fn metrics_csv_layout() {
        let cfg = ScenarioConfig::default();
        let report = MetricsReport::new(
            ConfusionCounters {
                true_positive: 7,
                false_negative: 3,
                true_negative: 0,
                false_positive: 0,
            },
            &[],
            &[],
        );
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[MetricsRow::new(&cfg, &report)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scenario,context,relation,seed,DR,ACC,FN,FP\ndefault,school,sor,1,70.0000,0.7000,30.0000,N/A\n"
        );
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let mut cfg = ScenarioConfig::default();
        cfg.name = "a,\"b\"".into();
        let report = MetricsReport::new(ConfusionCounters::default(), &[], &[]);
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[MetricsRow::new(&cfg, &report)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("\"a,\"\"b\"\"\",school"));
    }

    #[test]
    fn esr_csv_layout() {
        let report = MetricsReport::new(ConfusionCounters::default(), &[0.2, 0.4], &[0.5]);
        let mut buf = Vec::new();
        write_esr_csv(&mut buf, &report).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "split,trust,cum_fraction\ninternal,0.2,0.5\ninternal,0.4,1.0\nexternal,0.5,1.0\n"
        );
    }

    #[test]
    fn manifest_lists_seeds() {
        let m = Manifest::new(
            ScenarioConfig::default(),
            vec![1, 2, 3],
            vec!["x.csv".into()],
        );
        let text = m.to_toml_string();
        assert!(text.contains("seeds = [1, 2, 3]"));
        assert!(text.contains("[config]"));
        assert!(text.contains("node_count = 100"));
        assert_eq!(Manifest::from_toml_str(&text).unwrap(), m);
    }
}
