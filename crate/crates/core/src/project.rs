//! On-disk project layout and optional `hazop.toml` configuration.
//!
//! ```toml
//! model_dir = "model"          # directory holding *.hzm files
//! registry = "registry.json"   # guide-word registry
//! analysis = "project.hza"     # analysis store
//! out_dir = "out"              # report and CSV output
//! severity_scale = ["Catastrophic", "Severe", "Moderate", "Minor", "None"]
//! ```
//!
//! Paths are relative to the project directory. When the registry file does
//! not exist, `HAZOP_REGISTRY` names a fallback file, and failing that the
//! built-in default registry is used.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostic::Diagnostic;
use crate::dsl::{parse_model, ParseError, SourceFile};
use crate::model::ProjectModel;
use crate::registry::{load_registry, GuideWordRegistry};
use crate::store::{default_severity_scale, AnalysisStore, StoreFileError};

pub const CONFIG_FILE: &str = "hazop.toml";
pub const REGISTRY_ENV: &str = "HAZOP_REGISTRY";
pub const MODEL_EXTENSION: &str = "hzm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub model_dir: PathBuf,
    pub registry: PathBuf,
    pub analysis: PathBuf,
    pub out_dir: PathBuf,
    pub severity_scale: Vec<String>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            model_dir: "model".into(),
            registry: "registry.json".into(),
            analysis: "project.hza".into(),
            out_dir: "out".into(),
            severity_scale: default_severity_scale(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: toml::de::Error },
    #[error("{} syntax error(s) in the model", .0.len())]
    Parse(Vec<ParseError>),
    #[error("invalid guide-word registry {path}")]
    Registry { path: PathBuf, diagnostics: Vec<Diagnostic> },
    #[error(transparent)]
    Store(#[from] StoreFileError),
    #[error("{0} already contains a project")]
    AlreadyExists(PathBuf),
}

impl ProjectError {
    /// Syntax or content problems, as opposed to file system trouble.
    pub fn is_content_error(&self) -> bool {
        matches!(
            self,
            ProjectError::Parse(_)
                | ProjectError::Registry { .. }
                | ProjectError::Config { .. }
                | ProjectError::Store(StoreFileError::Format { .. } | StoreFileError::Version { .. })
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct Project {
    pub root: PathBuf,
    pub config: ProjectConfig,
}

impl Project {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ProjectError> {
        let root = root.into();
        let cfg_path = root.join(CONFIG_FILE);
        let config = match fs::read_to_string(&cfg_path) {
            Ok(text) => toml::from_str(&text).map_err(|source| ProjectError::Config { path: cfg_path.clone(), source })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ProjectConfig::default(),
            Err(e) => return Err(io_err(&cfg_path)(e)),
        };
        Ok(Self { root, config })
    }

    /// Creates the default layout in `dir` with the built-in registry and a
    /// starter model file.
    pub fn init(dir: &Path, name: &str) -> Result<Self, ProjectError> {
        if dir.join(CONFIG_FILE).exists() || dir.join("project.hza").exists() {
            return Err(ProjectError::AlreadyExists(dir.to_path_buf()));
        }
        let project = Self { root: dir.to_path_buf(), config: ProjectConfig::default() };
        fs::create_dir_all(project.model_dir()).map_err(io_err(dir))?;
        let cfg = toml::to_string(&project.config).expect("config serializes");
        write(&dir.join(CONFIG_FILE), &cfg)?;
        write(&project.registry_path(), &GuideWordRegistry::default_registry().to_json())?;
        write(&project.model_dir().join(format!("model.{MODEL_EXTENSION}")), &starter_model(name))?;
        let store = AnalysisStore { project: name.to_string(), ..AnalysisStore::default() };
        store.save(&project.analysis_path())?;
        Ok(project)
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join(&self.config.model_dir)
    }

    pub fn registry_path(&self) -> PathBuf {
        self.root.join(&self.config.registry)
    }

    pub fn analysis_path(&self) -> PathBuf {
        self.root.join(&self.config.analysis)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.root.join(&self.config.out_dir)
    }

    /// `*.hzm` files of the model directory, sorted by path.
    pub fn model_sources(&self) -> Result<Vec<SourceFile>, ProjectError> {
        let dir = self.model_dir();
        let mut paths = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let path = entry.map_err(io_err(&dir))?.path();
            if path.is_file() && path.extension().is_some_and(|e| e == MODEL_EXTENSION) {
                paths.push(path);
            }
        }
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let text = fs::read_to_string(&p).map_err(io_err(&p))?;
                // Spans show paths relative to the project root.
                let shown = p.strip_prefix(&self.root).map(Path::to_path_buf).unwrap_or(p);
                Ok(SourceFile::new(shown, text))
            })
            .collect()
    }

    pub fn load_model(&self) -> Result<ProjectModel, ProjectError> {
        parse_model(&self.model_sources()?).map_err(ProjectError::Parse)
    }

    pub fn load_registry(&self) -> Result<GuideWordRegistry, ProjectError> {
        let own = self.registry_path();
        let path = if own.exists() {
            own
        } else if let Some(env) = std::env::var_os(REGISTRY_ENV) {
            PathBuf::from(env)
        } else {
            return Ok(GuideWordRegistry::default_registry());
        };
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        load_registry(&text).map_err(|diagnostics| ProjectError::Registry { path, diagnostics })
    }

    /// The analysis store, or an empty one if none was saved yet.
    pub fn load_store(&self) -> Result<AnalysisStore, ProjectError> {
        let path = self.analysis_path();
        if !path.exists() {
            return Ok(AnalysisStore {
                severity_scale: self.config.severity_scale.clone(),
                ..AnalysisStore::default()
            });
        }
        Ok(AnalysisStore::load(&path)?)
    }

    pub fn save_store(&self, store: &AnalysisStore) -> Result<(), ProjectError> {
        Ok(store.save(&self.analysis_path())?)
    }
}

fn write(path: &Path, text: &str) -> Result<(), ProjectError> {
    fs::write(path, text).map_err(io_err(path))
}

fn starter_model(name: &str) -> String {
    let mut m = ProjectModel::new(name);
    m.use_cases.push(crate::model::UseCase {
        id: "UC01".into(),
        name: "First use case".into(),
        actors: vec!["Operator".into()],
        conditions: vec![crate::model::Condition {
            id: "UC01.C1".into(),
            kind: crate::model::ConditionKind::Precondition,
            text: "The system is switched on".into(),
        }],
        description: None,
        meta: Vec::new(),
    });
    crate::dsl::serialize_model(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_then_open() {
        let dir = tempfile::tempdir().unwrap();
        let p = Project::init(dir.path(), "demo").unwrap();
        let reopened = Project::open(dir.path()).unwrap();
        assert_eq!(reopened.config, p.config);
        let model = reopened.load_model().unwrap();
        assert_eq!(model.name, "demo");
        assert_eq!(reopened.load_registry().unwrap(), GuideWordRegistry::default_registry());
        assert_eq!(reopened.load_store().unwrap().project, "demo");
        assert!(matches!(Project::init(dir.path(), "again"), Err(ProjectError::AlreadyExists(_))));
    }

    #[test]
    fn config_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(CONFIG_FILE), "model_dir = \"uml\"\nseverity_scale = [\"High\", \"Low\"]\n").unwrap();
        let p = Project::open(dir.path()).unwrap();
        assert_eq!(p.model_dir(), dir.path().join("uml"));
        assert_eq!(p.analysis_path(), dir.path().join("project.hza"));
        assert_eq!(p.load_store().unwrap().severity_scale, vec!["High", "Low"]);

        fs::write(dir.path().join(CONFIG_FILE), "colour = \"red\"\n").unwrap();
        assert!(matches!(Project::open(dir.path()), Err(ProjectError::Config { .. })));
    }
}
