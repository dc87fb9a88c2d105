//! File writers. Floats are written with 17 significant digits so that every
//! value round-trips exactly.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;
use tumorlim::diagnostics::Diagnostics;
use tumorlim::grid::State;
use tumorlim::solver::Trajectory;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.json";
pub const LAST_STATE_FILE: &str = "last_state.csv";

pub const TRAJECTORY_HEADER: &str = "t,x,n_l,n_d,n,c,p,H";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_state(out: &mut String, s: &State) {
    let x = s.grid().centers();
    for i in 0..x.len() {
        let row = [
            s.t(),
            x[i],
            s.n_l()[i],
            s.n_d()[i],
            s.n()[i],
            s.c()[i],
            s.p()[i],
            s.h()[i],
        ];
        let cols: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", cols.join(",")).unwrap();
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    for s in &traj.snapshots {
        push_state(&mut out, s);
    }
    out
}

pub fn state_csv(state: &State) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    push_state(&mut out, state);
    out
}

pub fn diagnostics_csv(diag: &Diagnostics) -> String {
    let mut out = String::from("time,metric,value\n");
    for (t, metric, value) in diag.long_rows() {
        writeln!(out, "{},{metric},{}", fmt_f64(t), fmt_f64(value)).unwrap();
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes to JSON");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// A written file and its digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<OutputFile> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(OutputFile {
        path: name.to_string(),
        sha256: sha256_hex(contents.as_bytes()),
    })
}

/// One parsed row of a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub x: f64,
    pub n_l: f64,
    pub n_d: f64,
    pub n: f64,
    pub c: f64,
    pub p: f64,
    pub h: f64,
}

pub fn parse_trajectory(text: &str) -> std::result::Result<Vec<Row>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRAJECTORY_HEADER => {}
        _ => return Err("bad header".to_string()),
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", k + 2))?;
            if v.len() != 8 {
                return Err(format!("line {}: expected 8 columns, found {}", k + 2, v.len()));
            }
            Ok(Row {
                t: v[0],
                x: v[1],
                n_l: v[2],
                n_d: v[3],
                n: v[4],
                c: v[5],
                p: v[6],
                h: v[7],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn trajectory_parse_rejects_garbage() {
        assert!(parse_trajectory("t,x\n").is_err());
        let bad = format!("{TRAJECTORY_HEADER}\n1,2,3\n");
        assert!(parse_trajectory(&bad).unwrap_err().contains("line 2"));
        let ok = format!("{TRAJECTORY_HEADER}\n0,0.5,0.1,0,0.1,1,0.01,0.001\n");
        assert_eq!(parse_trajectory(&ok).unwrap()[0].x, 0.5);
    }
}
