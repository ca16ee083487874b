//! Scenario manifest: one YAML file naming every input of a run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::constraints::{parse_constraints, resolve_references, ConstraintError, ConstraintSet};
use crate::elaborate::{elaborate, ElabContext, ElabError};
use crate::graph::TaskGraph;
use crate::model::{Clock, ModelError, Provenance, SymbolTable};
use crate::platform::{
    parse_platform, parse_platform_xml, parse_sdk_meta, GroundedMeta, PlatformDesc, PlatformError,
    SdkError,
};
use crate::rdsl::{parse_source, validate_unit, Diagnostic, ParseError, SourceUnit};
use crate::schedule::{Objective, SolverConfig};

pub const DEFAULT_PERIOD_SYMBOL: &str = "modem_period";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveName {
    #[default]
    Power,
    Latency,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub iterations: Option<usize>,
    pub temperature: Option<f64>,
    pub cooling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub sources: Vec<PathBuf>,
    pub top: String,
    #[serde(default)]
    pub constraints: Vec<PathBuf>,
    pub platform: PathBuf,
    #[serde(default)]
    pub sdk: Vec<PathBuf>,
    #[serde(default)]
    pub symbols: BTreeMap<String, i64>,
    #[serde(default)]
    pub arrivals: BTreeMap<String, Clock>,
    #[serde(default)]
    pub objective: ObjectiveName,
    #[serde(default)]
    pub latency_sinks: Vec<String>,
    pub period_symbol: Option<String>,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: bad manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{path}:{0}", .source)]
    Parse { path: PathBuf, source: ParseError },
    #[error("{} source diagnostic(s)", .0.iter().filter(|d| d.is_error()).count())]
    Diagnostics(Vec<Diagnostic>),
    #[error("{path}: {source}")]
    Constraint {
        path: PathBuf,
        source: ConstraintError,
    },
    #[error("constraints: {0}")]
    Resolve(ConstraintError),
    #[error("{path}: {source}")]
    Platform {
        path: PathBuf,
        source: PlatformError,
    },
    #[error("{path}: {source}")]
    Sdk { path: PathBuf, source: SdkError },
    #[error("symbols: {0}")]
    Symbols(ModelError),
    #[error("elaboration: {0}")]
    Elab(#[from] ElabError),
    #[error("no period: bind `{0}` as a symbol or pin it with an equal constraint")]
    NoPeriod(String),
    #[error("period `{0}` must be positive")]
    BadPeriod(String),
}

impl ScenarioError {
    /// IO problems map to the usage exit code, everything else is a
    /// diagnostic.
    pub fn is_io(&self) -> bool {
        matches!(self, ScenarioError::Io { .. } | ScenarioError::Manifest { .. })
    }
}

/// Fully loaded and elaborated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub unit: SourceUnit,
    pub warnings: Vec<Diagnostic>,
    pub symbols: SymbolTable,
    pub platform: PlatformDesc,
    pub metas: BTreeMap<String, GroundedMeta>,
    pub constraints: ConstraintSet,
    pub graph: TaskGraph,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ScenarioError> {
    let text = read(path)?;
    serde_yaml::from_str(&text).map_err(|e| ScenarioError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Checks that every referenced file exists before anything is parsed, so
/// a missing file is reported as IO rather than as a parse failure.
fn check_paths(dir: &Path, m: &Manifest) -> Result<(), ScenarioError> {
    let all = m
        .sources
        .iter()
        .chain(&m.constraints)
        .chain(std::iter::once(&m.platform))
        .chain(&m.sdk);
    for p in all {
        let full = dir.join(p);
        if !full.is_file() {
            return Err(ScenarioError::Io {
                path: full,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            });
        }
    }
    Ok(())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let manifest = load_manifest(path)?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Scenario::from_manifest(dir, manifest)
    }

    pub fn from_manifest(dir: PathBuf, manifest: Manifest) -> Result<Scenario, ScenarioError> {
        check_paths(&dir, &manifest)?;
        let mut units = Vec::new();
        for p in &manifest.sources {
            let full = dir.join(p);
            let text = read(&full)?;
            units.push(parse_source(&text).map_err(|source| ScenarioError::Parse {
                path: full.clone(),
                source,
            })?);
        }
        let unit = SourceUnit::merge(units);
        let diags = validate_unit(&unit);
        if diags.iter().any(Diagnostic::is_error) {
            return Err(ScenarioError::Diagnostics(diags));
        }

        let symbols = SymbolTable::new()
            .bind(
                manifest
                    .symbols
                    .iter()
                    .map(|(k, v)| (k.as_str(), *v, Provenance::SystemFile("manifest".into()))),
            )
            .map_err(ScenarioError::Symbols)?;

        let mut docs = Vec::new();
        for p in &manifest.constraints {
            let full = dir.join(p);
            docs.extend(parse_constraints(&read(&full)?).map_err(|source| {
                ScenarioError::Constraint { path: full.clone(), source }
            })?);
        }

        let pf_path = dir.join(&manifest.platform);
        let pf_text = read(&pf_path)?;
        let is_xml = pf_path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml"));
        let platform = if is_xml {
            parse_platform_xml(&pf_text)
        } else {
            parse_platform(&pf_text)
        }
        .map_err(|source| ScenarioError::Platform {
            path: pf_path.clone(),
            source,
        })?;

        let mut metas = BTreeMap::new();
        for p in &manifest.sdk {
            let full = dir.join(p);
            let sdk_err = |source| ScenarioError::Sdk {
                path: full.clone(),
                source,
            };
            for m in parse_sdk_meta(&read(&full)?).map_err(sdk_err)? {
                m.check_patterns(&platform).map_err(sdk_err)?;
                metas.insert(m.name.clone(), m.ground(&symbols).map_err(sdk_err)?);
            }
        }

        let ctx = ElabContext {
            symbols: &symbols,
            metas: &metas,
            platform: &platform,
            arrivals: &manifest.arrivals,
        };
        let mut graph = elaborate(&unit, &manifest.top, &ctx)?;
        let labels = graph.labels.keys().cloned().collect();
        let constraints =
            resolve_references(&docs, &symbols, &labels).map_err(ScenarioError::Resolve)?;

        let period = manifest
            .period_symbol
            .clone()
            .unwrap_or_else(|| DEFAULT_PERIOD_SYMBOL.to_string());
        let h = constraints
            .pinned_value(&period)
            .or_else(|| symbols.get(&period).ok())
            .ok_or_else(|| ScenarioError::NoPeriod(period.clone()))?;
        if h <= 0 {
            return Err(ScenarioError::BadPeriod(period));
        }
        graph.hyperperiod = h as Clock;

        Ok(Scenario {
            dir,
            warnings: diags,
            manifest,
            unit,
            symbols,
            platform,
            metas,
            constraints,
            graph,
        })
    }

    pub fn objective(&self) -> Objective {
        match self.manifest.objective {
            ObjectiveName::Power => Objective::MinActivePeriod,
            ObjectiveName::Latency => Objective::MinLatency(self.manifest.latency_sinks.clone()),
        }
    }

    /// Solver settings from the manifest over the defaults.
    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.manifest.solver;
        let d = SolverConfig::default();
        SolverConfig {
            seed: s.seed.unwrap_or(d.seed),
            restarts: s.restarts.unwrap_or(d.restarts),
            iterations: s.iterations.unwrap_or(d.iterations),
            temperature: s.temperature.unwrap_or(d.temperature),
            cooling: s.cooling.unwrap_or(d.cooling),
            objective: self.objective(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundled(rel: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel)
    }

    #[test]
    fn srs_scenario_loads() {
        let s = Scenario::load(&bundled("srs_chest/scenario.yaml")).unwrap();
        assert_eq!(s.graph.hyperperiod, 1_000_000);
        assert_eq!(s.graph.tasks.len(), 18);
        assert_eq!(s.constraints.free_variables(), ["grid_period", "modem_period"]);
    }

    #[test]
    fn srs_solves_and_verifies() {
        let s = Scenario::load(&bundled("srs_chest/scenario.yaml")).unwrap();
        let cfg = s.solver_config();
        let sched = crate::schedule::solve(&s.graph, &s.platform, &s.constraints, &cfg).unwrap();
        let r = crate::verify::verify(&sched, &s.graph, &s.platform, &s.constraints, 1000, 7).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        for (t, arms) in &r.coverage {
            assert!(arms.iter().all(|n| *n > 0), "{t}: {arms:?}");
        }
    }

    #[test]
    fn missing_file_is_io() {
        let dir = tempdir();
        std::fs::write(
            dir.join("m.yaml"),
            "sources: []\ntop: x\nplatform: nowhere.yaml\n",
        )
        .unwrap();
        let err = Scenario::load(&dir.join("m.yaml")).unwrap_err();
        assert!(err.is_io(), "{err}");
    }

    fn tempdir() -> PathBuf {
        let d = std::env::temp_dir().join(format!("rdsl-scn-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}
