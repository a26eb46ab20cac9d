//! Flat `key = value` configuration files for campaign assumptions.

use std::collections::BTreeMap;
use std::path::Path;

use safety_evidence::planner::CampaignAssumptions;

use crate::error::{CliError, CliResult};

pub const CAMPAIGN_KEYS: [&str; 7] = [
    "meters_per_fatality",
    "meters_per_frame",
    "alpha",
    "robot_safety_factor",
    "perception_risk_fraction",
    "minutes_per_frame_label",
    "hourly_wage",
];

/// Parse `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Unknown or repeated keys and unparsable numbers are usage errors naming
/// the line.
pub fn parse_campaign_config(text: &str, origin: &Path) -> CliResult<BTreeMap<String, f64>> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let here = || format!("{}:{line_no}", origin.display());
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "{}: expected `key = value`, found `{line}`",
                here()
            ))
        })?;
        let key = key.trim();
        if !CAMPAIGN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!(
                "{}: unknown key `{key}` (expected one of {})",
                here(),
                CAMPAIGN_KEYS.join(", ")
            )));
        }
        let value: f64 = value.trim().parse().map_err(|_| {
            CliError::Usage(format!("{}: `{}` is not a number", here(), value.trim()))
        })?;
        if values.insert(key.to_string(), value).is_some() {
            return Err(CliError::Usage(format!(
                "{}: key `{key}` given twice",
                here()
            )));
        }
    }
    Ok(values)
}

pub fn read_campaign_config(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_campaign_config(&text, path)
}

/// Build assumptions from merged key/value pairs; every key is required.
pub fn assumptions_from_map(values: &BTreeMap<String, f64>) -> CliResult<CampaignAssumptions> {
    let missing: Vec<&str> = CAMPAIGN_KEYS
        .iter()
        .copied()
        .filter(|k| !values.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!(
            "missing campaign settings: {} (give them in --config or as --flags)",
            missing.join(", ")
        )));
    }
    let get = |k: &str| values[k];
    Ok(CampaignAssumptions {
        meters_per_fatality: get("meters_per_fatality"),
        meters_per_frame: get("meters_per_frame"),
        alpha: get("alpha"),
        robot_safety_factor: get("robot_safety_factor"),
        perception_risk_fraction: get("perception_risk_fraction"),
        minutes_per_frame_label: get("minutes_per_frame_label"),
        hourly_wage: get("hourly_wage"),
    })
}

/// Inverse of [`parse_campaign_config`].
pub fn render_campaign_config(a: &CampaignAssumptions) -> String {
    let values = [
        a.meters_per_fatality,
        a.meters_per_frame,
        a.alpha,
        a.robot_safety_factor,
        a.perception_risk_fraction,
        a.minutes_per_frame_label,
        a.hourly_wage,
    ];
    CAMPAIGN_KEYS
        .iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
