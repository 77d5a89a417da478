//! CSV and JSON artifacts: trajectories, feasibility labels and run manifests.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DockError, Result};
use crate::estimation::Phase;
use crate::feasible::{FeasibilityLabel, StateGrid};
use crate::simulator::{EpisodeResult, Outcome};

pub const TRAJECTORY_HEADER: &str = "t,x,y,theta,rho,alpha,phi,alpha_star,v_cmd,w_cmd,v_act,w_act";
pub const ESTIMATE_HEADER: &str = "xd_hat,yd_hat,xc_hat,yc_hat,phase";
pub const FEASIBLE_HEADER: &str = "rho,alpha,phi,feasible,outcome";

/// Shortest `%g`-style rendering with 9 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Trajectory CSV; estimate columns are appended when the episode ran an estimator.
pub fn trajectory_csv(result: &EpisodeResult) -> String {
    let with_estimate = result.trajectory.first().is_some_and(|s| s.estimate.is_some());
    let mut out = String::from(TRAJECTORY_HEADER);
    if with_estimate {
        out.push(',');
        out.push_str(ESTIMATE_HEADER);
    }
    out.push('\n');
    for s in &result.trajectory {
        let row = [
            s.t,
            s.pose.x,
            s.pose.y,
            s.pose.theta,
            s.state.rho,
            s.state.alpha,
            s.state.phi,
            s.alpha_star,
            s.cmd.v,
            s.cmd.w,
            s.act.v,
            s.act.w,
        ];
        out.push_str(&row.map(fmt_sig).join(","));
        if let Some(e) = &s.estimate {
            let phase = match e.phase {
                Phase::Fusing => "fusing",
                Phase::OdometryOnly => "odometry_only",
            };
            let _ = write!(
                out,
                ",{},{},{},{},{phase}",
                fmt_sig(e.objective[0]),
                fmt_sig(e.objective[1]),
                fmt_sig(e.landmark[0]),
                fmt_sig(e.landmark[1])
            );
        }
        out.push('\n');
    }
    out
}

/// Feasibility labels in grid-index order.
pub fn feasible_csv(labels: &[FeasibilityLabel]) -> String {
    let mut sorted: Vec<&FeasibilityLabel> = labels.iter().collect();
    sorted.sort_by_key(|l| l.index);
    let mut out = format!("{FEASIBLE_HEADER}\n");
    for l in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(l.state.rho),
            fmt_sig(l.state.alpha),
            fmt_sig(l.state.phi),
            u8::from(l.feasible),
            l.outcome
        );
    }
    out
}

/// Reads labels written by [`feasible_csv`]; rows must follow the grid order.
pub fn parse_feasible_csv(text: &str, grid: &StateGrid) -> Result<Vec<FeasibilityLabel>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(FEASIBLE_HEADER) {
        return Err(DockError::Parse(format!("expected header `{FEASIBLE_HEADER}`")));
    }
    let mut labels = Vec::with_capacity(grid.len());
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(DockError::Parse(format!("row {}: expected 5 fields", row + 1)));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| DockError::Parse(format!("row {}: bad number `{s}`", row + 1)))
        };
        let (rho, alpha, phi) = (num(f[0])?, num(f[1])?, num(f[2])?);
        if row >= grid.len() {
            return Err(DockError::Parse(format!(
                "more rows than the {} grid points",
                grid.len()
            )));
        }
        let expected = grid.state(row);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-7 * (1.0 + b.abs());
        if !(close(rho, expected.rho) && close(alpha, expected.alpha) && close(phi, expected.phi)) {
            return Err(DockError::Parse(format!(
                "row {}: state does not match the configured grid",
                row + 1
            )));
        }
        let feasible = match f[3] {
            "1" => true,
            "0" => false,
            other => {
                return Err(DockError::Parse(format!(
                    "row {}: bad feasible flag `{other}`",
                    row + 1
                )))
            }
        };
        let outcome = parse_outcome(f[4])
            .ok_or_else(|| DockError::Parse(format!("row {}: unknown outcome `{}`", row + 1, f[4])))?;
        labels.push(FeasibilityLabel {
            index: row,
            state: expected,
            feasible,
            outcome,
            fault: None,
        });
    }
    if labels.len() != grid.len() {
        return Err(DockError::Parse(format!(
            "{} rows for a grid of {} points",
            labels.len(),
            grid.len()
        )));
    }
    Ok(labels)
}

fn parse_outcome(s: &str) -> Option<Outcome> {
    [
        Outcome::Converged,
        Outcome::FovViolation,
        Outcome::Timeout,
        Outcome::DeadZoneStall,
        Outcome::Fault,
    ]
    .into_iter()
    .find(|o| o.as_str() == s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one command invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            tool: "fovdock".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            seed,
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, name: &str, contents: &[u8]) {
        self.artifacts.push(ArtifactRecord {
            path: name.into(),
            sha256: sha256_hex(contents),
        });
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `contents` under `dir` and records it in the manifest.
pub fn write_artifact(dir: &Path, name: &str, contents: &[u8], manifest: &mut RunManifest) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    manifest.record(name, contents);
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes to JSON");
    s.push('\n');
    s
}
