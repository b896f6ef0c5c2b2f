//! Trace files: a `#`-prefixed header followed by one CSV row per profile
//! visited. Row 0 is the start profile and has an empty player cell.
//!
//! ```text
//! # seed: 7
//! # schedule: rand
//! # start: 1 1 1
//! # model: 3f2a…
//! step,player,choices,profile,potential
//! 0,,1 1 1,1,40.5
//! 1,3,1 1 3,3,26
//! ```

use std::fmt::Write as _;

use fbs::dynamics::Trace;
use fbs::FbsModel;
use sha2::{Digest, Sha256};

use crate::document::SystemDocument;

/// SHA-256 of the canonical model text.
pub fn model_digest(model: &FbsModel) -> String {
    hex::encode(Sha256::digest(SystemDocument::model_text(model).as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub seed: Option<u64>,
    pub schedule: String,
    pub start: Vec<usize>,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// 0-based; `None` on the start row.
    pub player: Option<usize>,
    pub profile: usize,
    pub potential: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub rows: Vec<TraceRow>,
}

impl TraceFile {
    pub fn from_trace(model: &FbsModel, schedule: &str, trace: &Trace) -> Self {
        let start = model
            .profile(trace.profiles[0])
            .expect("trace profiles are valid")
            .choices()
            .to_vec();
        let rows = trace
            .profiles
            .iter()
            .enumerate()
            .map(|(step, &profile)| TraceRow {
                step,
                player: step.checked_sub(1).map(|s| trace.schedule[s]),
                profile,
                potential: trace.potential_series.as_ref().map(|s| s[step]),
            })
            .collect();
        TraceFile {
            header: TraceHeader {
                seed: trace.seed,
                schedule: schedule.to_string(),
                start,
                model: model_digest(model),
            },
            rows,
        }
    }

    /// Activation sequence, suitable for [`fbs::dynamics::Schedule::Replay`].
    pub fn schedule(&self) -> Vec<usize> {
        self.rows.iter().filter_map(|r| r.player).collect()
    }

    pub fn profiles(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.profile).collect()
    }

    pub fn to_csv(&self, model: &FbsModel) -> String {
        let h = &self.header;
        let mut s = String::new();
        match h.seed {
            Some(seed) => writeln!(s, "# seed: {seed}").unwrap(),
            None => s.push_str("# seed: none\n"),
        }
        writeln!(s, "# schedule: {}", h.schedule).unwrap();
        writeln!(
            s,
            "# start: {}",
            crate::document::join(h.start.iter().map(|c| c + 1))
        )
        .unwrap();
        writeln!(s, "# model: {}", h.model).unwrap();
        s.push_str("step,player,choices,profile,potential\n");
        for r in &self.rows {
            let label = model.profile(r.profile).expect("valid profile").label();
            let player = r.player.map(|p| (p + 1).to_string()).unwrap_or_default();
            let pot = r.potential.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{}",
                r.step,
                player,
                label,
                r.profile + 1,
                pot
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut seed = None;
        let mut schedule = None;
        let mut start = None;
        let mut model = None;
        let mut rows = Vec::new();
        let mut seen_columns = false;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let err = |m: &str| format!("line {lineno}: {m}");
            if let Some(h) = line.strip_prefix('#') {
                let (key, value) = h.split_once(':').ok_or_else(|| err("bad header line"))?;
                let value = value.trim();
                match key.trim() {
                    "seed" => {
                        seed = Some(if value == "none" {
                            None
                        } else {
                            Some(value.parse().map_err(|_| err("bad seed"))?)
                        })
                    }
                    "schedule" => schedule = Some(value.to_string()),
                    "start" => {
                        start = Some(
                            value
                                .split_whitespace()
                                .map(|t| t.parse::<usize>().ok().and_then(|c| c.checked_sub(1)))
                                .collect::<Option<Vec<_>>>()
                                .ok_or_else(|| err("bad start tuple"))?,
                        )
                    }
                    "model" => model = Some(value.to_string()),
                    other => return Err(err(&format!("unknown header `{other}`"))),
                }
                continue;
            }
            if !seen_columns {
                if line.trim() != "step,player,choices,profile,potential" {
                    return Err(err("expected column header"));
                }
                seen_columns = true;
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(err("expected 5 cells"));
            }
            let step = cells[0].parse().map_err(|_| err("bad step"))?;
            let player = match cells[1] {
                "" => None,
                p => Some(
                    p.parse::<usize>()
                        .ok()
                        .and_then(|p| p.checked_sub(1))
                        .ok_or_else(|| err("bad player"))?,
                ),
            };
            let profile = cells[3]
                .parse::<usize>()
                .ok()
                .and_then(|p| p.checked_sub(1))
                .ok_or_else(|| err("bad profile"))?;
            let potential = match cells[4] {
                "" => None,
                v => Some(v.parse().map_err(|_| err("bad potential"))?),
            };
            if step != rows.len() || player.is_none() != (step == 0) {
                return Err(err(
                    "steps must count up from 0 with a player on every step after the first",
                ));
            }
            rows.push(TraceRow {
                step,
                player,
                profile,
                potential,
            });
        }
        if rows.is_empty() {
            return Err("trace has no rows".into());
        }
        Ok(TraceFile {
            header: TraceHeader {
                seed: seed.ok_or("missing seed header")?,
                schedule: schedule.ok_or("missing schedule header")?,
                start: start.ok_or("missing start header")?,
                model: model.ok_or("missing model header")?,
            },
            rows,
        })
    }
}
