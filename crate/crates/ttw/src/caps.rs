//! Oracle cap overrides from `--caps` or `TTW_CAPS`.
//!
//! Accepted forms: a JSON object (`{"opt": 16}`), a path to a file holding
//! one, or a `key=value` list (`opt=16,tsp=12`). Unnamed caps keep their
//! defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use ttw_core::Caps;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Patch {
    tsp: Option<usize>,
    steiner: Option<usize>,
    opt: Option<usize>,
    bundle_states: Option<usize>,
    orienteering: Option<usize>,
}

impl Patch {
    fn apply(self, mut caps: Caps) -> Caps {
        caps.tsp = self.tsp.unwrap_or(caps.tsp);
        caps.steiner = self.steiner.unwrap_or(caps.steiner);
        caps.opt = self.opt.unwrap_or(caps.opt);
        caps.bundle_states = self.bundle_states.unwrap_or(caps.bundle_states);
        caps.orienteering = self.orienteering.unwrap_or(caps.orienteering);
        caps
    }
}

fn key_values(spec: &str) -> Result<Patch> {
    let mut p = Patch::default();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .with_context(|| format!("cap {item:?} is not key=value"))?;
        let v: usize = v.trim().parse().with_context(|| format!("cap {k} needs an integer"))?;
        let slot = match k.trim() {
            "tsp" => &mut p.tsp,
            "steiner" => &mut p.steiner,
            "opt" => &mut p.opt,
            "bundle_states" => &mut p.bundle_states,
            "orienteering" => &mut p.orienteering,
            other => bail!("unknown cap {other:?}"),
        };
        *slot = Some(v);
    }
    Ok(p)
}

/// Defaults with the overrides in `spec` applied.
pub fn parse_caps(spec: Option<&str>) -> Result<Caps> {
    let Some(spec) = spec.map(str::trim).filter(|s| !s.is_empty()) else {
        return Ok(Caps::default());
    };
    let patch = if spec.starts_with('{') {
        serde_json::from_str(spec).context("parsing caps JSON")?
    } else if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).with_context(|| format!("reading caps file {spec}"))?;
        serde_json::from_str(&text).with_context(|| format!("parsing caps file {spec}"))?
    } else {
        key_values(spec)?
    };
    Ok(patch.apply(Caps::default()))
}
