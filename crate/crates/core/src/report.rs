//! Residual tables with gates, verdicts and provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{write_text, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Measured but not gated.
    Info,
    /// Not applicable to this input.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: Option<f64>,
    pub gate: Option<f64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub grid: Option<GridSpec>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: String,
    pub residuals: BTreeMap<String, Residual>,
    pub info: BTreeMap<String, Value>,
    pub provenance: Provenance,
    /// Wall-clock seconds per stage; written to a separate file so the
    /// report itself stays reproducible.
    #[serde(skip)]
    pub timing: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, config_hash: &str, grid: Option<GridSpec>) -> Report {
        Report {
            verdict: String::new(),
            residuals: BTreeMap::new(),
            info: BTreeMap::new(),
            provenance: Provenance {
                command: command.into(),
                config_hash: config_hash.into(),
                grid,
                tool_version: env!("CARGO_PKG_VERSION").into(),
            },
            timing: BTreeMap::new(),
        }
    }

    fn insert(&mut self, name: &str, r: Residual) -> Result<()> {
        if self.residuals.insert(name.to_string(), r).is_some() {
            return Err(Error::Format(format!("residual '{name}' reported twice")));
        }
        Ok(())
    }

    pub fn gated(&mut self, name: &str, value: f64, gate: f64) -> Result<()> {
        let status = if value <= gate { Status::Pass } else { Status::Fail };
        self.insert(name, Residual { value: Some(value), gate: Some(gate), status, note: None })
    }

    pub fn measured(&mut self, name: &str, value: f64) -> Result<()> {
        self.insert(name, Residual { value: Some(value), gate: None, status: Status::Info, note: None })
    }

    pub fn skipped(&mut self, name: &str, why: &str) -> Result<()> {
        self.insert(name, Residual { value: None, gate: None, status: Status::Skipped, note: Some(why.into()) })
    }

    /// Marks every name not yet present as skipped.
    pub fn skip_missing(&mut self, names: &[String], why: &str) {
        for n in names {
            self.residuals.entry(n.clone()).or_insert(Residual {
                value: None,
                gate: None,
                status: Status::Skipped,
                note: Some(why.into()),
            });
        }
    }

    pub fn info(&mut self, key: &str, value: impl Into<Value>) {
        self.info.insert(key.into(), value.into());
    }

    pub fn failures(&self) -> Vec<&str> {
        self.residuals.iter().filter(|(_, r)| r.status == Status::Fail).map(|(n, _)| n.as_str()).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    /// Requires the residual names to be exactly `expected`.
    pub fn check_complete(&self, expected: &[String]) -> Result<()> {
        let want: std::collections::BTreeSet<&str> = expected.iter().map(String::as_str).collect();
        if want.len() != expected.len() {
            return Err(Error::Format("expected residual names contain duplicates".into()));
        }
        let have: std::collections::BTreeSet<&str> = self.residuals.keys().map(String::as_str).collect();
        let missing: Vec<&str> = want.difference(&have).copied().collect();
        let extra: Vec<&str> = have.difference(&want).copied().collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Format(format!("report residuals incomplete: missing {missing:?}, unexpected {extra:?}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Checks completeness, then writes `<stem>.json` and `<stem>.timing.json`.
    pub fn emit(&self, dir: &Path, stem: &str, expected: &[String]) -> Result<PathBuf> {
        self.check_complete(expected)?;
        let path = dir.join(format!("{stem}.json"));
        write_text(&path, &self.to_json()?)?;
        let timing = serde_json::to_string_pretty(&self.timing).map_err(|e| Error::Format(e.to_string()))?;
        write_text(&dir.join(format!("{stem}.timing.json")), &(timing + "\n"))?;
        Ok(path)
    }
}

/// Names of every residual the hypersurface and bending layers declare.
pub fn bend_residual_names() -> Vec<String> {
    use crate::bending::{ruled, synth, verify};
    use crate::hypersurface::{classify, envelope, sample};
    sample::GAUSS_CHECK_NAMES
        .iter()
        .chain([envelope::ENVELOPE_RESIDUAL].iter())
        .chain(classify::RESIDUAL_NAMES.iter())
        .chain(synth::RESIDUAL_NAMES.iter())
        .chain(verify::RESIDUAL_NAMES.iter())
        .chain(ruled::RESIDUAL_NAMES.iter())
        .map(|s| s.to_string())
        .collect()
}

/// `name@t=<t>` for every verification residual and parameter.
pub fn verify_residual_names(ts: &[f64]) -> Vec<String> {
    let mut out = Vec::new();
    for t in ts {
        for n in crate::bending::verify::RESIDUAL_NAMES {
            out.push(format!("{n}@t={t}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_and_completeness() {
        let mut r = Report::new("bend", "abc", None);
        r.gated("a", 1.0, 2.0).unwrap();
        r.gated("b", 3.0, 2.0).unwrap();
        r.measured("c", 0.5).unwrap();
        assert!(r.gated("a", 0.0, 1.0).is_err());
        assert_eq!(r.failures(), vec!["b"]);
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert!(r.check_complete(&names).is_err());
        r.skip_missing(&names, "n/a");
        r.check_complete(&names).unwrap();
        assert!(!r.to_json().unwrap().contains("timing"));
    }

    #[test]
    fn union_has_no_duplicates() {
        let names = bend_residual_names();
        let set: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), names.len());
    }
}
