//! Resolved parameter set: built-in defaults, then the config file, then
//! `--set key=value` overrides. Every report embeds the result.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use x2car::camera::CameraConfig;
use x2car::gnss::GnssConfig;
use x2car::lidar::LidarConfig;
use x2car::radar::{PositionConfig, VelocityConfig};
use x2car::trajectory::SegmentConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyParams {
    /// Seconds per segment.
    pub segment_length: f64,
    /// Straight-span extraction used to label straight-only segments.
    pub straight: SegmentConfig<f64>,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            segment_length: 60.0,
            straight: SegmentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub seed: u64,
    pub camera: CameraConfig<f64>,
    pub lidar: LidarConfig<f64>,
    pub gnss: GnssConfig<f64>,
    pub radar_velocity: VelocityConfig<f64>,
    pub radar_position: PositionConfig<f64>,
    pub consistency: ConsistencyParams,
}

impl Params {
    /// Defaults, merged with `config` (if any), then `overrides` in order.
    pub fn resolve(config: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree = defaults_table();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            let file: Table = toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            merge(&mut tree, file, "")?;
        }
        for kv in overrides {
            let (key, raw) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override `{kv}` is not key=value")))?;
            set_path(&mut tree, key.trim(), parse_value(raw.trim()))?;
        }
        let params: Params = Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("parameters: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Usage(msg.to_string()));
        let c = &self.consistency;
        if !(c.segment_length > 0.0 && c.segment_length.is_finite()) {
            return bad("consistency.segment_length must be positive");
        }
        if self.camera.window_n < 2 || !(self.camera.std_threshold > 0.0) {
            return bad("camera.window_n >= 2 and camera.std_threshold > 0");
        }
        let l = &self.lidar;
        if !(l.r_min >= 0.0 && l.r_min < l.r_max) || !(l.inlier_tol > 0.0) || l.ransac_runs == 0 {
            return bad("lidar: 0 <= r_min < r_max, inlier_tol > 0, ransac_runs >= 1");
        }
        let v = &self.radar_velocity;
        if v.iterations == 0 || !(v.search_step > 0.0) || !(0.0..1.0).contains(&v.burn_in) {
            return bad("radar_velocity: iterations >= 1, search_step > 0, burn_in in [0, 1)");
        }
        if !(v.refine_gain > 0.0 && v.refine_gain <= 1.0) {
            return bad("radar_velocity.refine_gain must be in (0, 1]");
        }
        Ok(())
    }
}

fn defaults_table() -> Table {
    match Value::try_from(Params::default()) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("default parameters serialize to a table"),
    }
}

/// Values that do not parse as TOML are taken as bare strings.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn known(key: &str) -> CliError {
    CliError::Usage(format!("unknown parameter `{key}`"))
}

fn merge(into: &mut Table, from: Table, prefix: &str) -> Result<(), CliError> {
    let tagged = is_tagged(into);
    for (k, v) in from {
        let full = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (into.get_mut(&k), v) {
            (Some(Value::Table(dst)), Value::Table(src)) if !is_tagged(dst) => {
                merge(dst, src, &full)?
            }
            (Some(slot), v) => *slot = v,
            // Optional enum payloads (e.g. a smoothing weight) are absent
            // from some defaults but valid once the tag selects them.
            (None, v) if tagged => {
                into.insert(k, v);
            }
            (None, _) => return Err(known(&full)),
        }
    }
    Ok(())
}

fn is_tagged(t: &Table) -> bool {
    t.contains_key("kind")
}

fn set_path(tree: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| known(key))?;
    let mut node = tree;
    for p in parts {
        node = match node.get_mut(p) {
            Some(Value::Table(t)) => t,
            _ => return Err(known(key)),
        };
    }
    if node.contains_key(last) || is_tagged(node) {
        node.insert(last.to_string(), value);
        Ok(())
    } else {
        Err(known(key))
    }
}
