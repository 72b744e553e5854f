//! JSON corpus manifests and filtered loading.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::signal::Signal;
use crate::wav::read_wav;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Pp,
    Mf,
    Ff,
}

impl fmt::Display for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dynamics::Pp => "pp",
            Dynamics::Mf => "mf",
            Dynamics::Ff => "ff",
        })
    }
}

impl FromStr for Dynamics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pp" => Ok(Dynamics::Pp),
            "mf" => Ok(Dynamics::Mf),
            "ff" => Ok(Dynamics::Ff),
            other => Err(Error::Manifest(format!(
                "unknown dynamics `{other}` (expected pp, mf or ff)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub instrument: String,
    pub dynamics: Dynamics,
    pub technique: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_label: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Result<Self> {
        let m = CorpusManifest {
            entries,
            root: root.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut m: CorpusManifest =
            serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.root = root.into();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        CorpusManifest::from_json(&text, root)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.path) {
                return Err(Error::Manifest(format!(
                    "duplicate path {}",
                    e.path.display()
                )));
            }
            if let Some(f0) = e.f0_label {
                if !(f0 > 0.0 && f0.is_finite()) {
                    return Err(Error::Manifest(format!(
                        "{}: f0_label {f0} is not a positive frequency",
                        e.path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }
}

/// Conjunctive filter; `None` fields accept everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusFilter {
    pub instruments: Option<Vec<String>>,
    pub dynamics: Option<Vec<Dynamics>>,
    pub technique: Option<String>,
}

impl CorpusFilter {
    pub fn accepts(&self, e: &ManifestEntry) -> bool {
        self.instruments
            .as_ref()
            .is_none_or(|set| set.contains(&e.instrument))
            && self
                .dynamics
                .as_ref()
                .is_none_or(|set| set.contains(&e.dynamics))
            && self.technique.as_ref().is_none_or(|t| *t == e.technique)
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(i) = &self.instruments {
            parts.push(format!("instrument in {i:?}"));
        }
        if let Some(d) = &self.dynamics {
            let names: Vec<String> = d.iter().map(ToString::to_string).collect();
            parts.push(format!("dynamics in {names:?}"));
        }
        if let Some(t) = &self.technique {
            parts.push(format!("technique = {t}"));
        }
        if parts.is_empty() {
            "no filter".into()
        } else {
            parts.join(", ")
        }
    }
}

/// Entries passing `filter`, in manifest order.
pub fn select<'a>(
    manifest: &'a CorpusManifest,
    filter: &CorpusFilter,
) -> Result<Vec<&'a ManifestEntry>> {
    let chosen: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| filter.accepts(e))
        .collect();
    if chosen.is_empty() {
        return Err(Error::EmptyCorpus(filter.describe()));
    }
    Ok(chosen)
}

/// Reads every selected file, in manifest order.
pub fn load_corpus(
    manifest: &CorpusManifest,
    filter: &CorpusFilter,
    exec: Execution,
) -> Result<Vec<(Signal, ManifestEntry)>> {
    let chosen = select(manifest, filter)?;
    log::info!(
        "loading {} of {} corpus entries",
        chosen.len(),
        manifest.entries.len()
    );
    par::try_map_indexed(chosen.len(), exec, |i| {
        let e = chosen[i];
        Ok((read_wav(manifest.resolve(e))?, e.clone()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{harmonic_tone, HarmonicSpec};
    use crate::wav::{write_wav, WavEncoding};
    use proptest::prelude::*;

    const SOL_LIKE: &str = r#"{
      "entries": [
        {"path": "vn/ord_pp.wav", "instrument": "violin", "dynamics": "pp", "technique": "ordinario", "f0_label": 440.0},
        {"path": "vn/pizz_mf.wav", "instrument": "violin", "dynamics": "mf", "technique": "pizzicato"},
        {"path": "fl/ord_ff.wav", "instrument": "flute", "dynamics": "ff", "technique": "ordinario"}
      ]
    }"#;

    #[test]
    fn parses_and_filters_by_technique() {
        let m = CorpusManifest::from_json(SOL_LIKE, "/data").unwrap();
        assert_eq!(
            m.resolve(&m.entries[0]),
            PathBuf::from("/data/vn/ord_pp.wav")
        );
        let f = CorpusFilter {
            technique: Some("ordinario".into()),
            ..Default::default()
        };
        let chosen = select(&m, &f).unwrap();
        assert_eq!(chosen.len(), 2);
        assert!(chosen.iter().all(|e| e.technique == "ordinario"));
        assert_eq!(select(&m, &CorpusFilter::default()).unwrap().len(), 3);
    }

    #[test]
    fn missing_instrument_is_an_error() {
        let m = CorpusManifest::from_json(SOL_LIKE, ".").unwrap();
        let f = CorpusFilter {
            instruments: Some(vec!["harp".into()]),
            ..Default::default()
        };
        assert!(matches!(select(&m, &f), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn rejects_bad_manifests() {
        let dup = r#"{"entries": [
          {"path": "a.wav", "instrument": "x", "dynamics": "pp", "technique": "t"},
          {"path": "a.wav", "instrument": "y", "dynamics": "ff", "technique": "t"}]}"#;
        assert!(CorpusManifest::from_json(dup, ".").is_err());
        let bad_dyn = r#"{"entries": [{"path": "a.wav", "instrument": "x", "dynamics": "fff", "technique": "t"}]}"#;
        assert!(CorpusManifest::from_json(bad_dyn, ".").is_err());
        assert!("mp".parse::<Dynamics>().is_err());
    }

    #[test]
    fn loads_files_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("vn")).unwrap();
        std::fs::create_dir(dir.path().join("fl")).unwrap();
        let m = CorpusManifest::from_json(SOL_LIKE, ".").unwrap();
        for (k, e) in m.entries.iter().enumerate() {
            let s = harmonic_tone(
                &HarmonicSpec::new(220.0 * (k + 1) as f64, vec![1.0], 0.05),
                16000,
            )
            .unwrap();
            write_wav(dir.path().join(&e.path), &s, WavEncoding::Pcm16).unwrap();
        }
        let manifest_path = dir.path().join("manifest.json");
        std::fs::write(&manifest_path, SOL_LIKE).unwrap();
        let m = CorpusManifest::load(&manifest_path).unwrap();
        let f = CorpusFilter {
            dynamics: Some(vec![Dynamics::Pp, Dynamics::Ff]),
            ..Default::default()
        };
        let loaded = load_corpus(&m, &f, Execution::Parallel).unwrap();
        let paths: Vec<_> = loaded.iter().map(|(_, e)| e.path.clone()).collect();
        assert_eq!(
            paths,
            vec![
                PathBuf::from("vn/ord_pp.wav"),
                PathBuf::from("fl/ord_ff.wav")
            ]
        );
    }

    fn entry_strategy() -> impl Strategy<Value = (usize, usize, usize)> {
        (0usize..3, 0usize..3, 0usize..2)
    }

    proptest! {
        #[test]
        fn selection_count_matches_naive_scan(
            rows in prop::collection::vec(entry_strategy(), 1..30),
            want_inst in prop::option::of(0usize..3),
            want_dyn in prop::option::of(0usize..3),
            want_tech in prop::option::of(0usize..2),
        ) {
            let inst = ["violin", "flute", "harp"];
            let dynm = [Dynamics::Pp, Dynamics::Mf, Dynamics::Ff];
            let tech = ["ordinario", "pizzicato"];
            let entries: Vec<ManifestEntry> = rows
                .iter()
                .enumerate()
                .map(|(k, &(i, d, t))| ManifestEntry {
                    path: PathBuf::from(format!("{k}.wav")),
                    instrument: inst[i].into(),
                    dynamics: dynm[d],
                    technique: tech[t].into(),
                    f0_label: None,
                })
                .collect();
            let m = CorpusManifest::new(entries, ".").unwrap();
            let f = CorpusFilter {
                instruments: want_inst.map(|i| vec![inst[i].to_string()]),
                dynamics: want_dyn.map(|d| vec![dynm[d]]),
                technique: want_tech.map(|t| tech[t].to_string()),
            };
            let naive = rows
                .iter()
                .filter(|&&(i, d, t)| {
                    want_inst.is_none_or(|w| w == i)
                        && want_dyn.is_none_or(|w| w == d)
                        && want_tech.is_none_or(|w| w == t)
                })
                .count();
            match select(&m, &f) {
                Ok(v) => prop_assert_eq!(v.len(), naive),
                Err(_) => prop_assert_eq!(naive, 0),
            }
        }
    }
}
