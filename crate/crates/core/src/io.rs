//! Output artifacts: CSV series, JSON reports with the resolved config
//! embedded, and flat field snapshots with a text header.
//!
//! Numeric CSV cells are printed with 17 significant digits so doubles
//! round-trip; identical configurations produce byte-identical files.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::modulation::ModulationTrack;
use crate::regimes::ProbeRecord;

/// 17 significant digits: exact round-trip for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON envelope: every report embeds the schema version and the resolved
/// configuration that produced it.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    config: &'a RunConfig,
    #[serde(flatten)]
    data: T,
}

pub fn write_json_report<T: Serialize>(path: &Path, config: &RunConfig, data: T) -> Result<()> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        config,
        data,
    };
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, &env)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    out.push_str("t,dt,sup_norm,grad_l2,l2,energy,nehari\n");
    for s in &traj.samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.dt),
            fmt_f64(s.sup),
            fmt_f64(s.grad_l2),
            fmt_f64(s.l2),
            fmt_f64(s.energy),
            fmt_f64(s.nehari)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_track_csv(path: &Path, track: &ModulationTrack) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "t,s,lambda,a,grad_eps_l2,eps_l2,h_eps_l2,quad_form,lambda_s_over_lambda,a_s,\
         eps_lambda_q,delta_eps_l2,commutator_defect,tail_integral\n",
    );
    for p in &track.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.t),
            fmt_f64(p.s),
            fmt_f64(p.lambda),
            fmt_f64(p.a),
            fmt_f64(p.grad_eps_l2),
            fmt_f64(p.eps_l2),
            fmt_f64(p.h_eps_l2),
            fmt_f64(p.quad_form),
            fmt_f64(p.lambda_s_over_lambda),
            fmt_f64(p.a_s),
            fmt_f64(p.eps_lambda_q),
            fmt_f64(p.delta_eps_l2),
            fmt_f64(p.commutator_defect),
            fmt_f64(p.tail_integral)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_bisect_csv(path: &Path, probes: &[ProbeRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str("amplitude,verdict,exit_s,t_est\n");
    for p in probes {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.amplitude),
            p.verdict,
            p.exit_s.map(fmt_f64).unwrap_or_default(),
            p.t_est.map(fmt_f64).unwrap_or_default()
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Eigenfunction table for the `spectrum` command: radius, unstable mode,
/// and the modified kernel direction.
pub fn write_eigenfunction_csv(
    path: &Path,
    grid: &RadialGrid,
    y: &RadialField,
    psi0: &RadialField,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("r,y,psi0\n");
    for i in 0..grid.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(grid.nodes[i]),
            fmt_f64(y.values[i]),
            fmt_f64(psi0.values[i])
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

const SNAPSHOT_MAGIC: &str = "critheat-field";

/// Flat text snapshot: magic + version, a header `n N r_max t`, then one
/// node value per line.
pub fn write_snapshot(path: &Path, field: &RadialField, t: f64) -> Result<()> {
    let grid = &field.grid;
    let mut out = String::new();
    out.push_str(&format!("{SNAPSHOT_MAGIC} 1\n"));
    out.push_str(&format!(
        "{} {} {} {}\n",
        grid.params.n,
        grid.len(),
        fmt_f64(grid.r_max()),
        fmt_f64(t)
    ));
    for v in &field.values {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a snapshot and validate its header against the target grid.
pub fn read_snapshot(path: &Path, grid: &Arc<RadialGrid>) -> Result<(f64, RadialField)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let magic = lines
        .next()
        .ok_or_else(|| Error::SnapshotFormat("empty file".into()))?;
    if magic.trim() != format!("{SNAPSHOT_MAGIC} 1") {
        return Err(Error::SnapshotFormat(format!(
            "bad magic line {magic:?}"
        )));
    }
    let header = lines
        .next()
        .ok_or_else(|| Error::SnapshotFormat("missing header".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::SnapshotFormat(format!(
            "header needs `n N r_max t`, got {header:?}"
        )));
    }
    let n: u32 = parts[0]
        .parse()
        .map_err(|_| Error::SnapshotFormat("bad n".into()))?;
    let npts: usize = parts[1]
        .parse()
        .map_err(|_| Error::SnapshotFormat("bad N".into()))?;
    let r_max: f64 = parts[2]
        .parse()
        .map_err(|_| Error::SnapshotFormat("bad r_max".into()))?;
    let t: f64 = parts[3]
        .parse()
        .map_err(|_| Error::SnapshotFormat("bad t".into()))?;
    if n != grid.params.n {
        return Err(Error::SnapshotFormat(format!(
            "dimension mismatch: file n = {n}, grid n = {}",
            grid.params.n
        )));
    }
    if npts != grid.len() {
        return Err(Error::SnapshotFormat(format!(
            "node-count mismatch: file N = {npts}, grid N = {}",
            grid.len()
        )));
    }
    if (r_max - grid.r_max()).abs() > 1e-12 * grid.r_max() {
        return Err(Error::SnapshotFormat(format!(
            "domain mismatch: file r_max = {r_max}, grid r_max = {}",
            grid.r_max()
        )));
    }
    let mut values = Vec::with_capacity(npts);
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(
            line.parse::<f64>()
                .map_err(|_| Error::SnapshotFormat(format!("bad value line {line:?}")))?,
        );
    }
    if values.len() != npts {
        return Err(Error::SnapshotFormat(format!(
            "expected {npts} values, found {}",
            values.len()
        )));
    }
    Ok((t, RadialField::new(grid.clone(), values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};
    use crate::params::DimensionParams;

    #[test]
    fn snapshot_round_trip_and_mismatch() {
        let params = DimensionParams::reference();
        let grid = make_grid(params, 10.0, 64, Grading::Uniform).unwrap();
        let field = RadialField::from_fn(grid.clone(), |r| (-r).exp());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.dat");
        write_snapshot(&path, &field, 1.5).unwrap();
        let (t, back) = read_snapshot(&path, &grid).unwrap();
        assert_eq!(t, 1.5);
        assert_eq!(back.values, field.values);

        let other = make_grid(params, 10.0, 65, Grading::Uniform).unwrap();
        assert!(matches!(
            read_snapshot(&path, &other),
            Err(Error::SnapshotFormat(_))
        ));
        let other_r = make_grid(params, 11.0, 64, Grading::Uniform).unwrap();
        assert!(read_snapshot(&path, &other_r).is_err());
    }

    #[test]
    fn fmt_round_trips_doubles() {
        for &x in &[
            1.0,
            -3.0e-17,
            std::f64::consts::PI,
            6.02e23,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
