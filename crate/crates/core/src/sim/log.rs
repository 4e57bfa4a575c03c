use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avoidance::{ConflictRecord, Maneuver, SwitchTrigger};
use crate::corridor::{CorridorId, CorridorKind};
use crate::envelope::{AircraftClass, AircraftId};
use crate::grid::CellIndex;
use crate::link::{Anomaly, ModeName, StepOutcome};
use crate::rules::Violation;

use super::TrialResult;

pub const LOG_FORMAT: &str = "skyway-log/1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("log has no header record")]
    MissingHeader,
    #[error("unsupported log format {0:?}")]
    Format(String),
    #[error("tick {tick} follows tick {previous}")]
    TickOrder { tick: u64, previous: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutCorridor {
    pub id: CorridorId,
    pub kind: CorridorKind,
    pub speed_mps: f64,
    pub length_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutAircraft {
    pub id: AircraftId,
    pub class: AircraftClass,
    pub r_phys: f64,
    pub r_outer: f64,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Record {
    Header {
        format: String,
        scenario_sha256: String,
        seed: u64,
        dt: f64,
        duration_s: f64,
    },
    Layout {
        cell_size: f64,
        corridors: Vec<LayoutCorridor>,
        /// Distinct cells covered by any corridor.
        corridor_cells: Vec<CellIndex>,
        intersection_cells: Vec<CellIndex>,
        aircraft: Vec<LayoutAircraft>,
    },
    State {
        tick: u64,
        t: f64,
        aircraft: AircraftId,
        position: [f64; 3],
        velocity: [f64; 3],
        estimated: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corridor: Option<CorridorId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cell: Option<CellIndex>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_speed: Option<f64>,
    },
    Measurement {
        tick: u64,
        aircraft: AircraftId,
        mode: Option<ModeName>,
        outcome: StepOutcome,
    },
    Anomaly(Anomaly),
    Conflict {
        tick: u64,
        #[serde(flatten)]
        record: ConflictRecord,
    },
    Maneuver {
        tick: u64,
        aircraft: AircraftId,
        tier: u8,
        maneuver: Maneuver,
    },
    CorridorSwitch {
        tick: u64,
        aircraft: AircraftId,
        from: Option<CorridorId>,
        to: Vec<CorridorId>,
        trigger: SwitchTrigger,
    },
    Violation {
        tick: u64,
        #[serde(flatten)]
        violation: Violation,
    },
    Completed {
        tick: u64,
        aircraft: AircraftId,
        t: f64,
    },
    Result(TrialResult),
}

impl Record {
    pub fn tick(&self) -> Option<u64> {
        match self {
            Record::State { tick, .. }
            | Record::Measurement { tick, .. }
            | Record::Conflict { tick, .. }
            | Record::Maneuver { tick, .. }
            | Record::CorridorSwitch { tick, .. }
            | Record::Violation { tick, .. }
            | Record::Completed { tick, .. } => Some(*tick),
            Record::Anomaly(a) => Some(a.tick),
            Record::Header { .. } | Record::Layout { .. } | Record::Result(_) => None,
        }
    }
}

/// Append-only record sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<Record>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn header(&self) -> Option<&Record> {
        self.records.iter().find(|r| matches!(r, Record::Header { .. }))
    }

    pub fn dt(&self) -> Option<f64> {
        self.records.iter().find_map(|r| match r {
            Record::Header { dt, .. } => Some(*dt),
            _ => None,
        })
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses and checks the header and tick order.
    pub fn read_ndjson<R: BufRead>(reader: R) -> Result<Self, LogError> {
        let mut log = EventLog::new();
        let mut last_tick = 0;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: Record = serde_json::from_str(&line).map_err(|source| LogError::Parse { line: n + 1, source })?;
            if let Some(t) = r.tick() {
                if t < last_tick {
                    return Err(LogError::TickOrder { tick: t, previous: last_tick });
                }
                last_tick = t;
            }
            log.push(r);
        }
        match log.records.first() {
            Some(Record::Header { format, .. }) if format == LOG_FORMAT => Ok(log),
            Some(Record::Header { format, .. }) => Err(LogError::Format(format.clone())),
            _ => Err(LogError::MissingHeader),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::AnomalyKind;
    use crate::rules::Rule;

    #[test]
    fn round_trip() {
        let mut log = EventLog::new();
        log.push(Record::Header { format: LOG_FORMAT.into(), scenario_sha256: "ab".into(), seed: 3, dt: 0.1, duration_s: 5.0 });
        log.push(Record::State {
            tick: 0,
            t: 0.0,
            aircraft: AircraftId(1),
            position: [1.0, 2.0, 3.0],
            velocity: [0.1, 0.0, 0.0],
            estimated: [1.0, 2.0, 3.5],
            corridor: Some(CorridorId(2)),
            cell: Some(CellIndex::new(0, 1, 2, 3)),
            reference_speed: Some(15.0),
        });
        log.push(Record::Anomaly(Anomaly { kind: AnomalyKind::SignalLoss, aircraft: AircraftId(1), tick: 1, magnitude: 4.0, threshold: 3.0 }));
        log.push(Record::Violation {
            tick: 1,
            violation: Violation {
                rule: Rule::MultiOccupancy,
                aircraft: vec![AircraftId(1), AircraftId(2)],
                cell: Some(CellIndex::new(0, 1, 2, 3)),
                position: None,
                measured: Some(2.0),
                threshold: None,
            },
        });
        log.push(Record::Maneuver { tick: 2, aircraft: AircraftId(1), tier: 1, maneuver: Maneuver::HeadingChange(0.1) });
        let text = log.to_ndjson();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().next().unwrap().starts_with(r#"{"type":"header""#));
        let back = EventLog::read_ndjson(text.as_bytes()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn rejects_unordered_and_headerless() {
        let bad = "{\"type\":\"completed\",\"tick\":4,\"aircraft\":1,\"t\":0.4}\n";
        assert!(matches!(EventLog::read_ndjson(bad.as_bytes()), Err(LogError::MissingHeader)));
        let header = format!(
            "{{\"type\":\"header\",\"format\":\"{LOG_FORMAT}\",\"scenario_sha256\":\"x\",\"seed\":1,\"dt\":0.1,\"duration_s\":1.0}}\n"
        );
        let text = format!("{header}{bad}{}", bad.replace("\"tick\":4", "\"tick\":2"));
        assert!(matches!(EventLog::read_ndjson(text.as_bytes()), Err(LogError::TickOrder { tick: 2, previous: 4 })));
    }
}
