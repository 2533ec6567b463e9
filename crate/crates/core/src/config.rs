//! Flat `key = value` run configuration with per-stage content hashes.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gcn::SslForm;
use crate::mining::{CandidateStrategy, EpsilonMode, MiningConfig};
use crate::pipeline::FiltrationKind;
use crate::train::{PairWeighting, TrainConfig};
use crate::vectorize::PIConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub lcc: bool,
    pub filtration: FiltrationKind,
    pub radius: usize,
    pub alpha: f64,
    pub resolution: f64,
    /// `None` means one grid cell.
    pub sigma: Option<f64>,
    pub mining: MiningConfig,
    pub train: TrainConfig,
    pub split_seed: u64,
    pub train_per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub report_budget: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "dataset".into(),
            edges: None,
            features: None,
            labels: None,
            lcc: true,
            filtration: FiltrationKind::Ricci,
            radius: 2,
            alpha: crate::curvature::DEFAULT_ALPHA,
            resolution: 0.1,
            sigma: None,
            mining: MiningConfig::default(),
            train: TrainConfig::default(),
            split_seed: 0,
            train_per_class: 20,
            val_size: 500,
            test_size: 1000,
            report_budget: 200_000,
            output: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad value {value:?} for `{key}`"))),
    }
}

fn path_or_none(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".into(), |p| p.display().to_string())
}

fn epsilon_text(e: EpsilonMode) -> String {
    match e {
        EpsilonMode::Absolute(x) => format!("absolute:{x}"),
        EpsilonMode::Quantile(q) => format!("quantile:{q}"),
    }
}

fn strategy_text(s: CandidateStrategy) -> String {
    match s {
        CandidateStrategy::Exhaustive => "exhaustive".into(),
        CandidateStrategy::Sampled(k) => format!("sampled:{k}"),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "name" => self.name = v.to_string(),
            "edges" => self.edges = path_or_none(v),
            "features" => self.features = path_or_none(v),
            "labels" => self.labels = path_or_none(v),
            "lcc" => self.lcc = parse_bool(key, v)?,
            "filtration" => self.filtration = v.parse()?,
            "radius" => self.radius = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "resolution" => self.resolution = parse(key, v)?,
            "sigma" => {
                self.sigma = if v == "auto" {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "delta" => self.mining.delta = parse(key, v)?,
            "epsilon" => {
                self.mining.epsilon = match v.split_once(':') {
                    Some(("absolute", x)) => EpsilonMode::Absolute(parse(key, x)?),
                    Some(("quantile", q)) => EpsilonMode::Quantile(parse(key, q)?),
                    _ => {
                        return Err(Error::Config(format!(
                            "epsilon must be absolute:<x> or quantile:<q>, got {v:?}"
                        )))
                    }
                }
            }
            "max_pairs_per_node" => self.mining.max_pairs_per_node = parse(key, v)?,
            "candidates" => {
                self.mining.strategy = match v.split_once(':') {
                    None if v == "exhaustive" => CandidateStrategy::Exhaustive,
                    Some(("sampled", k)) => CandidateStrategy::Sampled(parse(key, k)?),
                    _ => {
                        return Err(Error::Config(format!(
                            "candidates must be exhaustive or sampled:<k>, got {v:?}"
                        )))
                    }
                }
            }
            "hidden_dim" => self.train.hidden_dim = parse(key, v)?,
            "lambda" => self.train.lambda = parse(key, v)?,
            "tau" => self.train.tau = parse(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "patience" => self.train.patience = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "weight_decay" => self.train.weight_decay = parse(key, v)?,
            "negatives" => self.train.negatives_per_pair = parse(key, v)?,
            "dropout" => self.train.dropout = parse(key, v)?,
            "ssl_form" => {
                self.train.ssl_form = match v {
                    "infonce" => SslForm::InfoNce,
                    "literal" => SslForm::Literal,
                    _ => {
                        return Err(Error::Config(format!(
                            "ssl_form must be infonce or literal, got {v:?}"
                        )))
                    }
                }
            }
            "pair_weighting" => {
                self.train.pair_weighting = match v {
                    "binary" => PairWeighting::Binary,
                    "margin" => PairWeighting::Margin,
                    _ => {
                        return Err(Error::Config(format!(
                            "pair_weighting must be binary or margin, got {v:?}"
                        )))
                    }
                }
            }
            "seed" => self.train.seed = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "train_per_class" => self.train_per_class = parse(key, v)?,
            "val_size" => self.val_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "report_budget" => self.report_budget = parse(key, v)?,
            "output" => self.output = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        fn s(x: impl Display) -> String {
            x.to_string()
        }
        let t = &self.train;
        vec![
            ("name", self.name.clone()),
            ("edges", show_path(&self.edges)),
            ("features", show_path(&self.features)),
            ("labels", show_path(&self.labels)),
            ("lcc", s(self.lcc)),
            ("filtration", s(self.filtration)),
            ("radius", s(self.radius)),
            ("alpha", s(self.alpha)),
            ("resolution", s(self.resolution)),
            ("sigma", self.sigma.map_or_else(|| "auto".into(), s)),
            ("delta", s(self.mining.delta)),
            ("epsilon", epsilon_text(self.mining.epsilon)),
            ("max_pairs_per_node", s(self.mining.max_pairs_per_node)),
            ("candidates", strategy_text(self.mining.strategy)),
            ("hidden_dim", s(t.hidden_dim)),
            ("lambda", s(t.lambda)),
            ("tau", s(t.tau)),
            ("epochs", s(t.epochs)),
            ("patience", s(t.patience)),
            ("learning_rate", s(t.learning_rate)),
            ("weight_decay", s(t.weight_decay)),
            ("negatives", s(t.negatives_per_pair)),
            ("dropout", s(t.dropout)),
            (
                "ssl_form",
                match t.ssl_form {
                    SslForm::InfoNce => "infonce".into(),
                    SslForm::Literal => "literal".into(),
                },
            ),
            (
                "pair_weighting",
                match t.pair_weighting {
                    PairWeighting::Binary => "binary".into(),
                    PairWeighting::Margin => "margin".into(),
                },
            ),
            ("seed", s(t.seed)),
            ("split_seed", s(self.split_seed)),
            ("train_per_class", s(self.train_per_class)),
            ("val_size", s(self.val_size)),
            ("test_size", s(self.test_size)),
            ("report_budget", s(self.report_budget)),
            ("output", self.output.display().to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    pub fn pi_config(&self) -> Result<PIConfig> {
        match self.sigma {
            Some(s) => PIConfig::with_sigma(self.resolution, s),
            None => PIConfig::new(self.resolution),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| Error::Config(e.to_string());
        if self.radius == 0 {
            return Err(Error::Config("radius must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must lie in [0, 1]".into()));
        }
        self.pi_config()?;
        self.mining.validate().map_err(config)?;
        self.train.validate().map_err(config)?;
        if self.train_per_class == 0 {
            return Err(Error::Config("train_per_class must be positive".into()));
        }
        Ok(())
    }

    fn digest(parts: &[(&str, String)]) -> String {
        let mut h = Sha256::new();
        for (k, v) in parts {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())[..16].to_string()
    }

    fn pick(&self, keys: &[&str]) -> Vec<(&'static str, String)> {
        self.entries()
            .into_iter()
            .filter(|(k, _)| keys.contains(k))
            .collect()
    }

    /// Identifies a PI store: the graph content plus extraction settings.
    pub fn extract_hash(&self, graph_hash: &str) -> String {
        let mut parts = vec![("graph", graph_hash.to_string())];
        parts.extend(self.pick(&[
            "lcc",
            "filtration",
            "radius",
            "alpha",
            "resolution",
            "sigma",
        ]));
        Self::digest(&parts)
    }

    pub fn mine_hash(&self, graph_hash: &str) -> String {
        let mut parts = vec![("extract", self.extract_hash(graph_hash))];
        parts.extend(self.pick(&["delta", "epsilon", "max_pairs_per_node", "candidates"]));
        Self::digest(&parts)
    }

    /// `data_hash` covers the graph, features and labels actually trained on.
    pub fn train_hash(&self, data_hash: &str, graph_hash: &str) -> String {
        let mut parts = vec![("data", data_hash.to_string())];
        if self.train.lambda != 0.0 {
            parts.push(("mine", self.mine_hash(graph_hash)));
        }
        parts.extend(self.pick(&[
            "hidden_dim",
            "lambda",
            "tau",
            "epochs",
            "patience",
            "learning_rate",
            "weight_decay",
            "negatives",
            "dropout",
            "ssl_form",
            "pair_weighting",
            "seed",
            "split_seed",
            "train_per_class",
            "val_size",
            "test_size",
        ]));
        Self::digest(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("edges", "data/cora.edges").unwrap();
        cfg.set("epsilon", "absolute:0.125").unwrap();
        cfg.set("candidates", "sampled:40").unwrap();
        cfg.set("sigma", "0.07").unwrap();
        cfg.set("weight_decay", "0.0005").unwrap();
        cfg.set("ssl_form", "literal").unwrap();
        assert_eq!(RunConfig::parse_text(&cfg.to_text()).unwrap(), cfg);
        let default = RunConfig::default();
        assert_eq!(RunConfig::parse_text(&default.to_text()).unwrap(), default);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("colour", "red"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("radius", "two"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("epsilon", "0.1"), Err(Error::Config(_))));
        assert!(RunConfig::parse_text("radius 2").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = RunConfig::parse_text("# run\n\nlambda = 0.3\nlcc = false\n").unwrap();
        assert_eq!(cfg.train.lambda, 0.3);
        assert!(!cfg.lcc);
    }

    #[test]
    fn stage_hashes_track_their_inputs() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.set("lambda", "0.5").unwrap();
        assert_eq!(a.extract_hash("g"), b.extract_hash("g"));
        assert_eq!(a.mine_hash("g"), b.mine_hash("g"));
        assert_ne!(a.train_hash("d", "g"), b.train_hash("d", "g"));
        b.set("delta", "3").unwrap();
        assert_eq!(a.extract_hash("g"), b.extract_hash("g"));
        assert_ne!(a.mine_hash("g"), b.mine_hash("g"));
        b.set("resolution", "0.05").unwrap();
        assert_ne!(a.extract_hash("g"), b.extract_hash("g"));
        assert_ne!(a.extract_hash("g"), a.extract_hash("h"));
        let mut c = a.clone();
        c.set("output", "elsewhere").unwrap();
        assert_eq!(a.train_hash("d", "g"), c.train_hash("d", "g"));
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.set("resolution", "0.3").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.set("delta", "1").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
