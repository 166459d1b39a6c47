//! Readers and writers for the on-disk formats. All `f64`.
//!
//! | data         | format                                                  |
//! |--------------|---------------------------------------------------------|
//! | poses        | CSV `t,x,y,z,qw,qx,qy,qz`, sensor-to-world, w first     |
//! | VP / horizon | CSV `t,vp_u,vp_v,hl_theta`                              |
//! | line segments| CSV `t,u1,v1,u2,v2`, several rows per `t`               |
//! | intrinsics   | TOML keys `fx, fy, cx, cy, skew`                        |
//! | point clouds | directory: `index.csv` (`frame_index,t`), `<idx>.csv` (`x,y,z`) |
//! | radar        | CSV `t,track_id,range,azimuth,doppler,ego_speed,ego_x,ego_y` |
//! | scenario     | TOML, see [`crate::sim::ScenarioSpec`]                  |
//!
//! Floats are written in shortest round-trip form, so reading back a
//! written file gives the same values.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::camera::{Intrinsics, LineSeg2D, VPObservation};
use crate::error::{CalibError, Result};
use crate::geom::{RotMat3, Vec3};
use crate::lidar::PointCloudFrame;
use crate::radar::RadarPoint;
use crate::sim::ScenarioSpec;
use crate::trajectory::Pose6D;

fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    rdr.deserialize()
        .map(|r| r.map_err(CalibError::from))
        .collect()
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_csv_header(path: &Path, header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PoseRow {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose6D<f64>>> {
    read_csv::<PoseRow>(path)?
        .into_iter()
        .map(|r| {
            Ok(Pose6D {
                t: r.t,
                position: Vec3::new(r.x, r.y, r.z),
                rotation: RotMat3::from_quaternion([r.qw, r.qx, r.qy, r.qz])?,
            })
        })
        .collect()
}

pub fn write_poses(path: &Path, poses: &[Pose6D<f64>]) -> Result<()> {
    if poses.is_empty() {
        return write_csv_header(path, &["t", "x", "y", "z", "qw", "qx", "qy", "qz"]);
    }
    write_csv(
        path,
        poses.iter().map(|p| {
            let [qw, qx, qy, qz] = p.rotation.to_quaternion();
            PoseRow {
                t: p.t,
                x: p.position.x,
                y: p.position.y,
                z: p.position.z,
                qw,
                qx,
                qy,
                qz,
            }
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct VpRow {
    t: f64,
    vp_u: f64,
    vp_v: f64,
    hl_theta: f64,
}

pub fn read_vp(path: &Path) -> Result<Vec<VPObservation<f64>>> {
    read_csv::<VpRow>(path)?
        .into_iter()
        .map(|r| {
            if ![r.t, r.vp_u, r.vp_v, r.hl_theta]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(CalibError::InvalidInput(format!(
                    "non-finite VP row at t={}",
                    r.t
                )));
            }
            Ok(VPObservation {
                t: r.t,
                vp: (r.vp_u, r.vp_v),
                hl_theta: r.hl_theta,
            })
        })
        .collect()
}

pub fn write_vp(path: &Path, obs: &[VPObservation<f64>]) -> Result<()> {
    if obs.is_empty() {
        return write_csv_header(path, &["t", "vp_u", "vp_v", "hl_theta"]);
    }
    write_csv(
        path,
        obs.iter().map(|o| VpRow {
            t: o.t,
            vp_u: o.vp.0,
            vp_v: o.vp.1,
            hl_theta: o.hl_theta,
        }),
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRow {
    t: f64,
    u1: f64,
    v1: f64,
    u2: f64,
    v2: f64,
}

/// Line segments grouped by timestamp, in time order.
pub fn read_lines(path: &Path) -> Result<Vec<(f64, Vec<LineSeg2D<f64>>)>> {
    let mut rows = read_csv::<LineRow>(path)?;
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut out: Vec<(f64, Vec<LineSeg2D<f64>>)> = Vec::new();
    for r in rows {
        let seg = LineSeg2D::new((r.u1, r.v1), (r.u2, r.v2))?;
        match out.last_mut() {
            Some((t, v)) if *t == r.t => v.push(seg),
            _ => out.push((r.t, vec![seg])),
        }
    }
    Ok(out)
}

pub fn write_lines(path: &Path, frames: &[(f64, Vec<LineSeg2D<f64>>)]) -> Result<()> {
    let rows: Vec<LineRow> = frames
        .iter()
        .flat_map(|(t, segs)| {
            segs.iter().map(move |s| LineRow {
                t: *t,
                u1: s.p1.0,
                v1: s.p1.1,
                u2: s.p2.0,
                v2: s.p2.1,
            })
        })
        .collect();
    if rows.is_empty() {
        return write_csv_header(path, &["t", "u1", "v1", "u2", "v2"]);
    }
    write_csv(path, rows)
}

pub fn read_intrinsics(path: &Path) -> Result<Intrinsics<f64>> {
    let k: Intrinsics<f64> =
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| CalibError::Parse(e.to_string()))?;
    k.validate()?;
    Ok(k)
}

pub fn write_intrinsics(path: &Path, k: &Intrinsics<f64>) -> Result<()> {
    fs::write(
        path,
        toml::to_string(k).map_err(|e| CalibError::Parse(e.to_string()))?,
    )?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    frame_index: usize,
    t: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    z: f64,
}

/// Frames listed in `dir/index.csv`, in index order.
pub fn read_clouds(dir: &Path) -> Result<Vec<PointCloudFrame<f64>>> {
    let mut index = read_csv::<IndexRow>(&dir.join("index.csv"))?;
    index.sort_by_key(|r| r.frame_index);
    index
        .into_iter()
        .map(|r| {
            let points = read_csv::<PointRow>(&dir.join(format!("{}.csv", r.frame_index)))?
                .into_iter()
                .map(|p| Vec3::new(p.x, p.y, p.z))
                .collect::<Vec<_>>();
            if !points.iter().all(|p| p.is_finite()) {
                return Err(CalibError::InvalidInput(format!(
                    "non-finite point in frame {}",
                    r.frame_index
                )));
            }
            Ok(PointCloudFrame { t: r.t, points })
        })
        .collect()
}

pub fn write_clouds(dir: &Path, frames: &[PointCloudFrame<f64>]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(
        &dir.join("index.csv"),
        frames.iter().enumerate().map(|(i, f)| IndexRow {
            frame_index: i,
            t: f.t,
        }),
    )?;
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(format!("{i}.csv"));
        if f.points.is_empty() {
            write_csv_header(&path, &["x", "y", "z"])?;
        } else {
            write_csv(
                &path,
                f.points.iter().map(|p| PointRow {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                }),
            )?;
        }
    }
    Ok(())
}

pub fn read_radar(path: &Path) -> Result<Vec<RadarPoint<f64>>> {
    let rows = read_csv::<RadarPoint<f64>>(path)?;
    for r in &rows {
        r.validate()?;
    }
    Ok(rows)
}

pub fn write_radar(path: &Path, rows: &[RadarPoint<f64>]) -> Result<()> {
    if rows.is_empty() {
        return write_csv_header(
            path,
            &[
                "t",
                "track_id",
                "range",
                "azimuth",
                "doppler",
                "ego_speed",
                "ego_x",
                "ego_y",
            ],
        );
    }
    write_csv(path, rows)
}

pub fn read_scenario(path: &Path) -> Result<ScenarioSpec> {
    toml::from_str(&fs::read_to_string(path)?).map_err(|e| CalibError::Parse(e.to_string()))
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CalibError::Parse(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| CalibError::Parse(e.to_string()))
}
