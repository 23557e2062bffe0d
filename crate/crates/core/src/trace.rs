//! Per-round regret records.

use std::fmt::Write as _;

use crate::bandit::SuperArm;
use crate::error::{Error, Result};

/// Group-testing side information for one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundDiagnostics {
    pub q_hat: f64,
    pub ell: usize,
    /// Whether the oracle's choice was optimal for the sampled parameter, when checked.
    pub oracle_match: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub arm_set: SuperArm,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub evals: u64,
    pub elapsed_ns: u64,
    pub diagnostics: Option<RoundDiagnostics>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretTrace {
    rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "t,arm_set,inst_regret,cum_regret,evals,elapsed_ns";
pub const DIAGNOSTIC_HEADER: &str = "q_hat,ell,oracle_match";

impl RegretTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_round(&mut self, t: u64, s: SuperArm, regret_inc: f64, evals: u64, elapsed_ns: u64) -> Result<()> {
        self.record_round_with(t, s, regret_inc, evals, elapsed_ns, None)
    }

    pub fn record_round_with(
        &mut self,
        t: u64,
        s: SuperArm,
        regret_inc: f64,
        evals: u64,
        elapsed_ns: u64,
        diagnostics: Option<RoundDiagnostics>,
    ) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if t <= last.t {
                return Err(Error::Usage(format!("round {t} recorded after round {}", last.t)));
            }
        }
        if !(regret_inc >= 0.0) {
            return Err(Error::Usage(format!("negative or NaN regret increment {regret_inc}")));
        }
        let cum_regret = self.cumulative_regret() + regret_inc;
        self.rows.push(TraceRow { t, arm_set: s, inst_regret: regret_inc, cum_regret, evals, elapsed_ns, diagnostics });
        Ok(())
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret after round `t` (0 before the first row).
    pub fn regret_at(&self, t: u64) -> f64 {
        let idx = self.rows.partition_point(|r| r.t <= t);
        if idx == 0 {
            0.0
        } else {
            self.rows[idx - 1].cum_regret
        }
    }

    pub fn total_evals(&self) -> u64 {
        self.rows.iter().map(|r| r.evals).sum()
    }

    pub fn has_diagnostics(&self) -> bool {
        self.rows.iter().any(|r| r.diagnostics.is_some())
    }

    pub fn to_csv(&self) -> String {
        let diag = self.has_diagnostics();
        let mut out = String::from(TRACE_HEADER);
        if diag {
            out.push(',');
            out.push_str(DIAGNOSTIC_HEADER);
        }
        out.push('\n');
        for r in &self.rows {
            let _ =
                write!(out, "{},{},{},{},{},{}", r.t, r.arm_set, r.inst_regret, r.cum_regret, r.evals, r.elapsed_ns);
            if diag {
                match &r.diagnostics {
                    Some(d) => {
                        let m = d.oracle_match.map_or(String::new(), |b| u8::from(b).to_string());
                        let _ = write!(out, ",{},{},{m}", d.q_hat, d.ell);
                    }
                    None => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`RegretTrace::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty trace".into()))?;
        let diag = match header {
            TRACE_HEADER => false,
            h if h == format!("{TRACE_HEADER},{DIAGNOSTIC_HEADER}") => true,
            h => return Err(Error::Parse(format!("unexpected trace header {h:?}"))),
        };
        let bad = |line: &str| Error::Parse(format!("malformed trace row {line:?}"));
        let mut trace = Self::new();
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != if diag { 9 } else { 6 } {
                return Err(bad(line));
            }
            let arms: Vec<usize> = if f[1].is_empty() {
                Vec::new()
            } else {
                f[1].split(';').map(str::parse).collect::<Result<_, _>>().map_err(|_| bad(line))?
            };
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(line));
            let diagnostics = if diag && !f[6].is_empty() {
                Some(RoundDiagnostics {
                    q_hat: num(f[6])?,
                    ell: int(f[7])? as usize,
                    oracle_match: match f[8] {
                        "" => None,
                        "1" => Some(true),
                        "0" => Some(false),
                        _ => return Err(bad(line)),
                    },
                })
            } else {
                None
            };
            let max = arms.iter().max().map_or(0, |m| m + 1);
            let row = TraceRow {
                t: int(f[0])?,
                arm_set: SuperArm::new(arms, max).map_err(|_| bad(line))?,
                inst_regret: num(f[2])?,
                cum_regret: num(f[3])?,
                evals: int(f[4])?,
                elapsed_ns: int(f[5])?,
                diagnostics,
            };
            trace.rows.push(row);
        }
        Ok(trace)
    }
}
