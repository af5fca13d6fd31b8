//! TOML experiment files.
//!
//! ```toml
//! seed = 7
//!
//! [[network.layers]]
//! rows = 2
//! cols = 2
//! weights = [0.5, 0.0, 0.0, 0.5]   # row-major, or weights_file = "w1.txt"
//! bias = [1.0, 0.0]                # defaults to zeros
//! activation = "relu"              # or { separable = [...] }, { softmax = true },
//!                                  # { sandwich = { l_rows = 3, l = [...], inner = "tanh" } }
//!
//! [schedule]
//! mode = "averaged"                # constant | averaged | margin
//! alpha = 0.5
//! family = "harmonic"              # constant (with lambda) | harmonic (with d, eps)
//! d = 1.0
//! eps = 0.1
//!
//! [stop]
//! tol = 1e-10
//! max_iter = 1000000
//! divergence_norm = 1e12
//!
//! [perturbation]
//! omega = 0.1
//! nu = 1.0
//! directions = "ones"              # or "random", drawn from the seed
//!
//! [run]
//! x0 = [0.0, 0.0]                  # or x0_random = true; defaults to zeros
//! reference = [2.0, 0.0]           # or reference_file = "ref.txt"
//!
//! [certify]
//! alpha_step = 1e-3
//!
//! [output]
//! trace = "trace.csv"
//! certificate = "cert.txt"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::activation::ScalarActivation;
use crate::certify::DEFAULT_ALPHA_STEP;
use crate::engine::{PerturbationSchedule, RelaxationFamily, RelaxationSchedule, Stop};
use crate::error::{Error, Result};
use crate::linalg::{parse_matrix, parse_row};
use crate::network::{Layer, Network};
use crate::operator::ActivationOperator;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub stop: StopSpec,
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub rows: usize,
    pub cols: usize,
    pub weights: Option<Vec<f64>>,
    pub weights_file: Option<PathBuf>,
    pub bias: Option<Vec<f64>>,
    pub activation: ActivationSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ActivationSpec {
    /// A scalar activation key applied to every coordinate.
    Uniform(String),
    Table(ActivationTable),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationTable {
    pub separable: Option<Vec<String>>,
    pub softmax: Option<bool>,
    pub sandwich: Option<SandwichSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichSpec {
    pub l_rows: usize,
    pub l: Option<Vec<f64>>,
    pub l_file: Option<PathBuf>,
    pub inner: Box<ActivationSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub mode: Option<String>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub family: Option<String>,
    pub d: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub divergence_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub nu: f64,
    pub directions: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub x0_random: bool,
    pub reference: Option<Vec<f64>>,
    pub reference_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    pub alpha_step: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn read(&self, path: &Path) -> Result<String> {
        let full = self.resolve(path);
        fs::read_to_string(&full).map_err(|e| config_err(format!("cannot read {}: {e}", full.display())))
    }

    pub fn network(&self) -> Result<Network> {
        if self.network.layers.is_empty() {
            return Err(config_err("network has no layers"));
        }
        let layers = self
            .network
            .layers
            .iter()
            .enumerate()
            .map(|(i, spec)| self.layer(spec).map_err(|e| config_err(format!("layer {}: {e}", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }

    fn layer(&self, spec: &LayerSpec) -> Result<Layer> {
        let weight = self.matrix(spec.rows, spec.cols, spec.weights.as_deref(), spec.weights_file.as_deref(), "weights")?;
        let bias = match &spec.bias {
            Some(b) if b.len() != spec.rows => {
                return Err(config_err(format!("bias has {} entries, expected {}", b.len(), spec.rows)))
            }
            Some(b) => DVector::from_column_slice(b),
            None => DVector::zeros(spec.rows),
        };
        let activation = self.activation(&spec.activation, spec.rows)?;
        Layer::new(weight, bias, activation)
    }

    fn matrix(&self, rows: usize, cols: usize, inline: Option<&[f64]>, file: Option<&Path>, what: &str) -> Result<DMatrix<f64>> {
        let m = match (inline, file) {
            (Some(v), None) => {
                if v.len() != rows * cols {
                    return Err(config_err(format!("{what} has {} entries, expected {rows}x{cols}", v.len())));
                }
                DMatrix::from_row_slice(rows, cols, v)
            }
            (None, Some(path)) => parse_matrix(&self.read(path)?)?,
            _ => return Err(config_err(format!("give exactly one of `{what}` and `{what}_file`"))),
        };
        if m.shape() != (rows, cols) {
            return Err(config_err(format!("{what} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols())));
        }
        Ok(m)
    }

    fn activation(&self, spec: &ActivationSpec, dim: usize) -> Result<ActivationOperator> {
        match spec {
            ActivationSpec::Uniform(key) => ActivationOperator::uniform(key.parse::<ScalarActivation>()?, dim),
            ActivationSpec::Table(t) => match (&t.separable, t.softmax, &t.sandwich) {
                (Some(keys), None, None) => {
                    if keys.len() != dim {
                        return Err(config_err(format!("{} separable components, expected {dim}", keys.len())));
                    }
                    let acts = keys.iter().map(|k| k.parse()).collect::<Result<Vec<ScalarActivation>>>()?;
                    ActivationOperator::separable(acts)
                }
                (None, Some(true), None) => ActivationOperator::softmax(dim),
                (None, None, Some(s)) => {
                    let l = self.matrix(s.l_rows, dim, s.l.as_deref(), s.l_file.as_deref(), "l")?;
                    let inner = self.activation(&s.inner, s.l_rows)?;
                    ActivationOperator::sandwich(l, inner)
                }
                _ => Err(config_err("activation table needs exactly one of separable, softmax = true, sandwich")),
            },
        }
    }

    pub fn schedule(&self) -> Result<RelaxationSchedule> {
        let s = &self.schedule;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| config_err(format!("schedule needs `{name}`")));
        let schedule = match s.mode.as_deref().unwrap_or("constant") {
            "constant" => RelaxationSchedule::Constant(s.lambda.unwrap_or(1.0)),
            "averaged" | "theorem1_ii" => {
                let alpha = need(s.alpha, "alpha")?;
                let family = match s.family.as_deref().unwrap_or("constant") {
                    "constant" => RelaxationFamily::Constant(need(s.lambda, "lambda")?),
                    "harmonic" => RelaxationFamily::Harmonic { d: need(s.d, "d")?, eps: need(s.eps, "eps")? },
                    other => return Err(config_err(format!("unknown schedule family `{other}`"))),
                };
                RelaxationSchedule::Averaged { alpha, family }
            }
            "margin" | "theorem_g" => RelaxationSchedule::Margin {
                alpha: need(s.alpha, "alpha")?,
                eps: need(s.eps, "eps")?,
                lambda: need(s.lambda, "lambda")?,
            },
            other => return Err(config_err(format!("unknown schedule mode `{other}`"))),
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn stop(&self) -> Stop {
        let d = Stop::default();
        Stop {
            tol: self.stop.tol.unwrap_or(d.tol),
            max_iter: self.stop.max_iter.unwrap_or(d.max_iter),
            divergence_norm: self.stop.divergence_norm.unwrap_or(d.divergence_norm),
        }
    }

    pub fn perturbation(&self, net: &Network) -> Result<Option<PerturbationSchedule>> {
        let Some(p) = &self.perturbation else { return Ok(None) };
        let schedule = match p.directions.as_deref().unwrap_or("ones") {
            "ones" => PerturbationSchedule::new(net, p.omega, p.rho, p.eta, p.nu)?,
            "random" => PerturbationSchedule::with_random_directions(net, p.omega, p.rho, p.eta, p.nu, self.seed)?,
            other => return Err(config_err(format!("unknown perturbation directions `{other}`"))),
        };
        Ok(Some(schedule))
    }

    pub fn x0(&self, net: &Network) -> Result<DVector<f64>> {
        let dim = net.dim();
        match (&self.run.x0, self.run.x0_random) {
            (Some(_), true) => Err(config_err("give either `x0` or `x0_random`, not both")),
            (Some(v), false) => vector(v, dim, "x0"),
            (None, true) => {
                // decorrelate from the perturbation stream
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
                Ok(DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0)))
            }
            (None, false) => Ok(DVector::zeros(dim)),
        }
    }

    pub fn reference(&self, net: &Network) -> Result<Option<DVector<f64>>> {
        match (&self.run.reference, &self.run.reference_file) {
            (Some(_), Some(_)) => Err(config_err("give either `reference` or `reference_file`, not both")),
            (Some(v), None) => vector(v, net.dim(), "reference").map(Some),
            (None, Some(path)) => {
                let text = self.read(path)?;
                let values: Vec<f64> = text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(parse_row)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| config_err(format!("reference file: {e}")))?
                    .concat();
                vector(&values, net.dim(), "reference").map(Some)
            }
            (None, None) => Ok(None),
        }
    }

    pub fn alpha_step(&self) -> f64 {
        self.certify.alpha_step.unwrap_or(DEFAULT_ALPHA_STEP)
    }
}

fn vector(v: &[f64], dim: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != dim {
        return Err(config_err(format!("{what} has {} entries, expected {dim}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(config_err(format!("{what} has non-finite entries")));
    }
    Ok(DVector::from_column_slice(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_config() {
        let cfg = parse(
            r#"
            [[network.layers]]
            rows = 1
            cols = 1
            weights = [0.5]
            bias = [1.0]
            activation = "identity"
            "#,
        )
        .unwrap();
        let net = cfg.network().unwrap();
        assert_eq!(net.forward(&DVector::from_element(1, 2.0)).unwrap()[0], 2.0);
        assert_eq!(cfg.schedule().unwrap(), RelaxationSchedule::Constant(1.0));
        assert_eq!(cfg.stop(), Stop::default());
        assert!(cfg.perturbation(&net).unwrap().is_none());
        assert_eq!(cfg.x0(&net).unwrap(), DVector::zeros(1));
    }

    #[test]
    fn activation_tables() {
        let cfg = parse(
            r#"
            [[network.layers]]
            rows = 2
            cols = 2
            weights = [1, 0, 0, 1]
            activation = { separable = ["relu", "prelu:0.5"] }

            [[network.layers]]
            rows = 3
            cols = 2
            weights = [1, 0, 0, 1, 1, 1]
            activation = { softmax = true }

            [[network.layers]]
            rows = 2
            cols = 3
            weights = [1, 0, 0, 0, 1, 0]
            activation = { sandwich = { l_rows = 1, l = [0.6, 0.8], inner = "satlin" } }
            "#,
        )
        .unwrap();
        let net = cfg.network().unwrap();
        assert_eq!(net.layer_dims(), vec![2, 3, 2]);
        let bad = parse(
            r#"
            [[network.layers]]
            rows = 1
            cols = 1
            weights = [1]
            activation = { softmax = true, separable = ["relu"] }
            "#,
        )
        .unwrap();
        assert!(bad.network().is_err());
    }

    #[test]
    fn schedule_modes() {
        let base = "[[network.layers]]\nrows = 1\ncols = 1\nweights = [1]\nactivation = \"relu\"\n";
        let cfg = parse(&format!("{base}[schedule]\nmode = \"theorem1_ii\"\nalpha = 0.5\nfamily = \"harmonic\"\nd = 1\neps = 0.1\n")).unwrap();
        assert!(matches!(cfg.schedule().unwrap(), RelaxationSchedule::Averaged { .. }));
        let cfg = parse(&format!("{base}[schedule]\nmode = \"averaged\"\nalpha = 0.5\nlambda = 2.5\n")).unwrap();
        assert!(cfg.schedule().is_err());
        let cfg = parse(&format!("{base}[schedule]\nmode = \"bogus\"\n")).unwrap();
        assert!(cfg.schedule().is_err());
        assert!(parse(&format!("{base}[schedule]\nunknown = 1\n")).is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse("seed = 1").is_err());
        let cfg = parse("[[network.layers]]\nrows = 2\ncols = 2\nweights = [1, 2, 3]\nactivation = \"relu\"\n").unwrap();
        assert!(cfg.network().is_err());
        let cfg = parse("[[network.layers]]\nrows = 1\ncols = 1\nweights_file = \"missing.txt\"\nactivation = \"relu\"\n").unwrap();
        assert!(matches!(cfg.network(), Err(Error::Config(_))));
        let cfg = parse("[[network.layers]]\nrows = 1\ncols = 1\nweights = [1]\nactivation = \"swish\"\n").unwrap();
        assert!(cfg.network().is_err());
    }

    #[test]
    fn random_start_is_seeded() {
        let text = "seed = 11\n[[network.layers]]\nrows = 3\ncols = 3\nweights = [1,0,0,0,1,0,0,0,1]\nactivation = \"relu\"\n[run]\nx0_random = true\n";
        let a = parse(text).unwrap();
        let b = parse(text).unwrap();
        let net = a.network().unwrap();
        assert_eq!(a.x0(&net).unwrap(), b.x0(&net).unwrap());
        assert!(a.x0(&net).unwrap().iter().all(|v| v.abs() <= 1.0));
    }
}
