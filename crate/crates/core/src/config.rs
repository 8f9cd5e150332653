//! Run configuration: flat `key=value` files with `#` comments, every key
//! overridable by a command-line flag of the same name.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use crate::candidates::EnumerationConfig;
use crate::error::{Error, Result};
use crate::rerank::{Mode, Properties, RerankConfig};
use crate::split::SplitSpec;

/// Everything a pipeline run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `kg.tsv`: catalog triples. Keep user-product interaction edges out of
    /// this file; the pipeline injects training interactions itself so that
    /// held-out interactions can never leak into popularity scores.
    pub kg: PathBuf,
    /// `entities.tsv`: entity-id to entity-type mapping.
    pub entities: PathBuf,
    /// `interactions.tsv`: the full interaction log (split downstream).
    pub interactions: PathBuf,
    /// Optional `users.tsv` with a binary sensitive attribute.
    pub groups: Option<PathBuf>,
    /// Optional `paths.tsv` from an upstream model; when set, candidate
    /// generation is skipped and these paths are re-ranked instead.
    pub paths: Option<PathBuf>,
    /// Output directory for every artifact.
    pub out: PathBuf,
    pub k: usize,
    pub alpha: f64,
    pub mode: Mode,
    pub properties: Properties,
    pub beta_lir: f64,
    pub beta_sep: f64,
    /// Seed for synthetic-data commands; echoed into reports.
    pub seed: u64,
    pub max_edges: usize,
    pub per_product_cap: usize,
    pub candidate_cap: usize,
    /// Relation label used when injecting training interactions as triples.
    pub interaction_relation: String,
    pub split_train: f64,
    pub split_validation: f64,
    pub split_test: f64,
    /// Attribute name reported for the groups file.
    pub group_attribute: String,
    pub audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kg: PathBuf::new(),
            entities: PathBuf::new(),
            interactions: PathBuf::new(),
            groups: None,
            paths: None,
            out: PathBuf::new(),
            k: 10,
            alpha: 0.1,
            mode: Mode::Weighted,
            properties: Properties::ALL,
            beta_lir: 0.3,
            beta_sep: 0.3,
            seed: 42,
            max_edges: 3,
            per_product_cap: 25,
            candidate_cap: 200,
            interaction_relation: "interacted".to_string(),
            split_train: 0.7,
            split_validation: 0.1,
            split_test: 0.2,
            group_attribute: "group".to_string(),
            audit: false,
        }
    }
}

impl RunConfig {
    /// Parse a config file. Lines are `key = value`; blank lines and `#`
    /// comments are ignored.
    pub fn from_file(path: &FsPath) -> Result<Self> {
        let contents = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        for (idx, line) in contents.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    idx + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), idx + 1))
            })?;
        }
        Ok(cfg)
    }

    /// Apply one `key = value` assignment. The CLI funnels its flags through
    /// this as well, so files and flags accept the same keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
        }
        match key {
            "kg" => self.kg = PathBuf::from(value),
            "entities" => self.entities = PathBuf::from(value),
            "interactions" => self.interactions = PathBuf::from(value),
            "groups" => self.groups = Some(PathBuf::from(value)),
            "paths" => self.paths = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "k" => self.k = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "mode" => self.mode = Mode::parse(value)?,
            "properties" => self.properties = Properties::parse(value)?,
            "beta_lir" => self.beta_lir = parse(key, value)?,
            "beta_sep" => self.beta_sep = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "max_edges" => self.max_edges = parse(key, value)?,
            "per_product_cap" => self.per_product_cap = parse(key, value)?,
            "candidate_cap" => self.candidate_cap = parse(key, value)?,
            "interaction_relation" => self.interaction_relation = value.to_string(),
            "split_train" => self.split_train = parse(key, value)?,
            "split_validation" => self.split_validation = parse(key, value)?,
            "split_test" => self.split_test = parse(key, value)?,
            "group_attribute" => self.group_attribute = value.to_string(),
            "audit" => self.audit = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Check ranges and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("kg", Some(&self.kg)),
            ("entities", Some(&self.entities)),
            ("interactions", Some(&self.interactions)),
            ("groups", self.groups.as_ref()),
            ("paths", self.paths.as_ref()),
        ] {
            let Some(path) = path else { continue };
            if path.as_os_str().is_empty() {
                return Err(Error::Config(format!("required path '{name}' is not set")));
            }
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{name} file '{}' does not exist",
                    path.display()
                )));
            }
        }
        if self.out.as_os_str().is_empty() {
            return Err(Error::Config("output directory 'out' is not set".to_string()));
        }
        self.rerank_config().validate()?;
        self.split_spec()?;
        self.enumeration_config().validate()?;
        for (name, beta) in [("beta_lir", self.beta_lir), ("beta_sep", self.beta_sep)] {
            if !(0.0..=1.0).contains(&beta) || beta.is_nan() {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {beta}")));
            }
        }
        Ok(())
    }

    pub fn rerank_config(&self) -> RerankConfig {
        RerankConfig {
            alpha: self.alpha,
            properties: self.properties,
            k: self.k,
            mode: self.mode,
            audit: self.audit,
        }
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.split_train, self.split_validation, self.split_test)
    }

    pub fn enumeration_config(&self) -> EnumerationConfig {
        EnumerationConfig {
            max_edges: self.max_edges,
            per_product_cap: self.per_product_cap,
            candidate_cap: self.candidate_cap,
        }
    }

    /// Key/value view of the configuration for report metadata.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("kg", self.kg.display().to_string());
        put("entities", self.entities.display().to_string());
        put("interactions", self.interactions.display().to_string());
        if let Some(groups) = &self.groups {
            put("groups", groups.display().to_string());
        }
        if let Some(paths) = &self.paths {
            put("paths", paths.display().to_string());
        }
        put("out", self.out.display().to_string());
        put("k", self.k.to_string());
        put("alpha", self.alpha.to_string());
        put("mode", self.mode.name().to_string());
        put("properties", self.properties.name());
        put("beta_lir", self.beta_lir.to_string());
        put("beta_sep", self.beta_sep.to_string());
        put("seed", self.seed.to_string());
        put("max_edges", self.max_edges.to_string());
        put("per_product_cap", self.per_product_cap.to_string());
        put("candidate_cap", self.candidate_cap.to_string());
        put("interaction_relation", self.interaction_relation.clone());
        put("split_train", self.split_train.to_string());
        put("split_validation", self.split_validation.to_string());
        put("split_test", self.split_test.to_string());
        put("group_attribute", self.group_attribute.clone());
        put("audit", self.audit.to_string());
        map
    }

    /// Render as a config file.
    pub fn to_config_file(&self) -> String {
        let mut out = String::from("# pipeline configuration\n");
        for (key, value) in self.echo() {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_file_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        let cfg = RunConfig {
            kg: PathBuf::from("kg.tsv"),
            entities: PathBuf::from("entities.tsv"),
            interactions: PathBuf::from("interactions.tsv"),
            out: PathBuf::from("out"),
            ..RunConfig::default()
        };
        fs::write(&path, cfg.to_config_file()).unwrap();
        let parsed = RunConfig::from_file(&path).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("gamma", "1").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("gamma"));
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            kg: dir.path().join("absent-kg.tsv"),
            entities: dir.path().join("entities.tsv"),
            interactions: dir.path().join("interactions.tsv"),
            out: dir.path().join("out"),
            ..RunConfig::default()
        };
        fs::write(&cfg.entities, "").unwrap();
        fs::write(&cfg.interactions, "").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("absent-kg.tsv"));
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.txt");
        fs::write(&path, "# a comment\n\nalpha = 0.25\nk = 5\n").unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.alpha, 0.25);
        assert_eq!(cfg.k, 5);
    }
}
