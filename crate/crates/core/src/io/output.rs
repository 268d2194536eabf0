//! Plain-text artifacts: trajectory and Wigner tables, oracle reports and
//! the run manifest. Numbers are printed in shortest round-trip form so
//! identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dynamics::{IntegrationStats, Trajectory};
use crate::error::Result;
use crate::observables::WignerGrid;
use crate::reduction::OracleReport;
use crate::scalar::Real;

/// `<dir>/<scenario>.<artifact>.<ext>`
pub fn artifact_path(dir: &Path, scenario: &str, artifact: &str, ext: &str) -> PathBuf {
    dir.join(format!("{scenario}.{artifact}.{ext}"))
}

fn num<T: Real>(x: T) -> String {
    format!("{}", x.to_f64_lossy())
}

pub fn trajectory_csv<T: Real>(traj: &Trajectory<T>) -> String {
    let mut s = String::from("t,fidelity,parity,pop_e,purity\n");
    for k in 0..traj.times.len() {
        let fid = traj.fidelity.as_ref().map(|f| num(f[k])).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            num(traj.times[k]),
            fid,
            num(traj.parity[k]),
            num(traj.pop_e[k]),
            num(traj.purity[k])
        );
    }
    s
}

/// Provenance lines written as `# key: value` above Wigner tables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TableMeta {
    pub scenario: String,
    pub scenario_hash: String,
    pub timestamp: String,
    pub extra: Vec<(String, String)>,
}

impl TableMeta {
    fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# scenario: {}", self.scenario);
        let _ = writeln!(s, "# scenario_hash: {}", self.scenario_hash);
        let _ = writeln!(s, "# timestamp: {}", self.timestamp);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }
}

/// Long format: one `y1,y2,W` row per grid point, `y1` outer.
pub fn wigner_csv<T: Real>(grid: &WignerGrid<T>, meta: &TableMeta) -> String {
    let mut s = meta.header();
    s.push_str("y1,y2,W\n");
    for (r, &y1) in grid.axis1.iter().enumerate() {
        for (c, &y2) in grid.axis2.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", num(y1), num(y2), num(grid.values[[r, c]]));
        }
    }
    s
}

/// Square matrix: first row holds the `y2` axis, first column `y1`.
pub fn wigner_matrix_csv<T: Real>(grid: &WignerGrid<T>, meta: &TableMeta) -> String {
    let mut s = meta.header();
    s.push_str("y1\\y2");
    for &y2 in &grid.axis2 {
        let _ = write!(s, ",{}", num(y2));
    }
    s.push('\n');
    for (r, &y1) in grid.axis1.iter().enumerate() {
        s.push_str(&num(y1));
        for c in 0..grid.axis2.len() {
            let _ = write!(s, ",{}", num(grid.values[[r, c]]));
        }
        s.push('\n');
    }
    s
}

pub fn oracle_csv<T: Real>(rep: &OracleReport<T>) -> String {
    let mut s = String::from("t,fidelity_reduced,fidelity_full,deviation\n");
    for ((t, a), b) in rep.times.iter().zip(&rep.fidelity_reduced).zip(&rep.fidelity_full) {
        let _ = writeln!(s, "{},{},{},{}", num(*t), num(*a), num(*b), num((*a - *b).abs()));
    }
    let _ = writeln!(
        s,
        "# max_deviation {} tolerance {} c_dim {}: {}",
        num(rep.max_deviation),
        num(rep.tolerance),
        rep.c_dim,
        if rep.passed { "PASS" } else { "FAIL" }
    );
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub ion_cat: String,
    pub frontend: String,
}

/// Record of one invocation.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub command: String,
    pub config_hash: String,
    pub started: String,
    pub wall_time_s: f64,
    pub versions: Versions,
    pub threads: usize,
    pub fixed_step: Option<f64>,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationStats>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::WignerMeta;
    use ndarray::array;

    fn grid() -> WignerGrid<f64> {
        WignerGrid {
            axis1: vec![-1.0, 1.0],
            axis2: vec![-1.0, 1.0],
            values: array![[0.1, 0.2], [0.3, 0.4]],
            meta: WignerMeta::default(),
        }
    }

    #[test]
    fn wigner_tables() {
        let meta = TableMeta {
            scenario: "x".into(),
            scenario_hash: "abc".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
            extra: vec![],
        };
        let long = wigner_csv(&grid(), &meta);
        let lines: Vec<&str> = long.lines().collect();
        assert_eq!(lines[0], "# scenario: x");
        assert_eq!(lines[1], "# scenario_hash: abc");
        assert_eq!(lines[3], "y1,y2,W");
        assert_eq!(lines[5], "-1,1,0.2");
        assert_eq!(lines.len(), 8);
        let sq = wigner_matrix_csv(&grid(), &meta);
        let lines: Vec<&str> = sq.lines().collect();
        assert_eq!(lines[3], "y1\\y2,-1,1");
        assert_eq!(lines[5], "1,0.3,0.4");
    }

    #[test]
    fn artifact_naming() {
        let p = artifact_path(Path::new("out"), "fig1a_even_cat", "trajectory", "csv");
        assert_eq!(p, Path::new("out/fig1a_even_cat.trajectory.csv"));
    }
}
