//! Layered run configuration: flags > TOML file > environment > defaults.
//!
//! The API key itself never passes through here; only the name of the
//! variable that holds it.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use fairify_core::llm::{BackendConfig, BackendKind, RequestParams};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u32 = 42;
pub const DEFAULT_SAMPLE_N: usize = 200;
pub const DEFAULT_OUT_DIR: &str = "fairify-out";

/// `FIELD=ONTOLOGY_ID:PATH`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologySpec {
    pub field: String,
    pub ontology_id: String,
    pub path: PathBuf,
}

impl FromStr for OntologySpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (field, rest) = s
            .split_once('=')
            .ok_or_else(|| anyhow!("`{s}`: expected FIELD=ONTOLOGY_ID:PATH"))?;
        let (id, path) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("`{s}`: expected FIELD=ONTOLOGY_ID:PATH"))?;
        if field.trim().is_empty() || id.trim().is_empty() || path.trim().is_empty() {
            bail!("`{s}`: field, ontology id and path must all be non-empty");
        }
        Ok(Self {
            field: field.trim().to_string(),
            ontology_id: id.trim().to_string(),
            path: PathBuf::from(path.trim()),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialBackend {
    pub kind: Option<BackendKind>,
    pub endpoint_url: Option<String>,
    pub api_key_env: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub backoff_ms: Option<u64>,
    pub max_in_flight: Option<usize>,
}

/// One configuration layer. Unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    #[serde(default)]
    pub backend: PartialBackend,
    pub template: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub ontologies: Option<Vec<String>>,
    pub aliases: Option<PathBuf>,
    pub seed: Option<u32>,
    pub sample_n: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub strict_required: Option<bool>,
    pub synonyms: Option<bool>,
    pub cassette: Option<PathBuf>,
    pub record: Option<bool>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),+) => { $( $hi.$f = $hi.$f.take().or($lo.$f); )+ };
}

impl PartialConfig {
    /// Fill every unset field of `self` from `lower`.
    pub fn overlay(mut self, lower: PartialConfig) -> Self {
        overlay!(self.backend, lower.backend, kind, endpoint_url, api_key_env, model, temperature, timeout_secs,
            max_retries, backoff_ms, max_in_flight);
        overlay!(self, lower, template, dictionary, ontologies, aliases, seed, sample_n, out_dir, strict_required,
            synonyms, cassette, record);
        self
    }

    /// Parse a TOML file; relative paths are taken relative to the file.
    pub fn from_toml_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PartialConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.template, &mut cfg.dictionary, &mut cfg.aliases, &mut cfg.out_dir, &mut cfg.cassette]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(specs) = cfg.ontologies.as_mut() {
            for s in specs.iter_mut() {
                let spec: OntologySpec = s.parse()?;
                if spec.path.is_relative() {
                    *s = format!("{}={}:{}", spec.field, spec.ontology_id, base.join(&spec.path).display());
                }
            }
        }
        Ok(cfg)
    }

    /// `FAIRIFY_*` variables, read through `lookup` so tests need not touch the process environment.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        fn parse<T: FromStr>(name: &str, v: Option<String>) -> anyhow::Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            v.map(|s| s.trim().parse::<T>().map_err(|e| anyhow!("{name}={s}: {e}"))).transpose()
        }
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        Ok(Self {
            backend: PartialBackend {
                kind: parse("FAIRIFY_BACKEND", get("FAIRIFY_BACKEND"))?,
                endpoint_url: get("FAIRIFY_ENDPOINT_URL"),
                api_key_env: get("FAIRIFY_API_KEY_ENV"),
                model: get("FAIRIFY_MODEL"),
                temperature: parse("FAIRIFY_TEMPERATURE", get("FAIRIFY_TEMPERATURE"))?,
                timeout_secs: parse("FAIRIFY_TIMEOUT_SECS", get("FAIRIFY_TIMEOUT_SECS"))?,
                max_retries: parse("FAIRIFY_MAX_RETRIES", get("FAIRIFY_MAX_RETRIES"))?,
                backoff_ms: parse("FAIRIFY_BACKOFF_MS", get("FAIRIFY_BACKOFF_MS"))?,
                max_in_flight: parse("FAIRIFY_MAX_IN_FLIGHT", get("FAIRIFY_MAX_IN_FLIGHT"))?,
            },
            template: get("FAIRIFY_TEMPLATE").map(PathBuf::from),
            dictionary: get("FAIRIFY_DICTIONARY").map(PathBuf::from),
            ontologies: None,
            aliases: get("FAIRIFY_ALIASES").map(PathBuf::from),
            seed: parse("FAIRIFY_SEED", get("FAIRIFY_SEED"))?,
            sample_n: None,
            out_dir: get("FAIRIFY_OUT_DIR").map(PathBuf::from),
            strict_required: None,
            synonyms: None,
            cassette: get("FAIRIFY_CASSETTE").map(PathBuf::from),
            record: None,
        })
    }

    pub fn resolve(self) -> anyhow::Result<RunConfig> {
        let d = BackendConfig::default();
        let b = self.backend;
        let backend = BackendConfig {
            kind: b.kind.unwrap_or(d.kind),
            endpoint_url: b.endpoint_url.or(d.endpoint_url),
            api_key_env: b.api_key_env.unwrap_or(d.api_key_env),
            timeout: b.timeout_secs.map(Duration::from_secs).unwrap_or(d.timeout),
            max_retries: b.max_retries.unwrap_or(d.max_retries),
            backoff_base: b.backoff_ms.map(Duration::from_millis).unwrap_or(d.backoff_base),
            max_in_flight: b.max_in_flight.unwrap_or(d.max_in_flight),
            params: RequestParams {
                model: b.model.unwrap_or(d.params.model),
                temperature: b.temperature.unwrap_or(d.params.temperature),
            },
        };
        backend.validate()?;
        let ontologies = self
            .ontologies
            .unwrap_or_default()
            .iter()
            .map(|s| s.parse())
            .collect::<anyhow::Result<Vec<OntologySpec>>>()?;
        Ok(RunConfig {
            backend,
            template: self.template,
            dictionary: self.dictionary,
            ontologies,
            aliases: self.aliases,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            sample_n: self.sample_n.unwrap_or(DEFAULT_SAMPLE_N),
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            strict_required: self.strict_required.unwrap_or(false),
            synonyms: self.synonyms.unwrap_or(true),
            cassette: self.cassette,
            record: self.record.unwrap_or(true),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub template: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub ontologies: Vec<OntologySpec>,
    pub aliases: Option<PathBuf>,
    pub seed: u32,
    pub sample_n: usize,
    pub out_dir: PathBuf,
    pub strict_required: bool,
    pub synonyms: bool,
    pub cassette: Option<PathBuf>,
    pub record: bool,
}

/// Merge the three layers and apply defaults.
pub fn load(
    flags: PartialConfig,
    config_file: Option<&Path>,
    env: impl Fn(&str) -> Option<String>,
) -> anyhow::Result<RunConfig> {
    let file = match config_file {
        Some(p) => PartialConfig::from_toml_file(p)?,
        None => PartialConfig::default(),
    };
    flags.overlay(file).overlay(PartialConfig::from_env(env)?).resolve()
}
