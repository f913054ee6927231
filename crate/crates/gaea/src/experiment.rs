//! Experiment specification documents.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "entropy",
//!   "problem": {"kind": "supernet", "space": {...}, "data": {"kind": "planted", ...}},
//!   "variants": [{"name": "gaea", "method": "gaea_eg"}, {"name": "softmax", "method": "softmax_baseline"}],
//!   "seeds": {"start": 0, "count": 50},
//!   "search": {"epochs": 30, "lr_arch": 1.0}
//! }
//! ```

use std::path::{Path, PathBuf};

use gaea_core::blockmd::{BlockSelection, OutputIterate};
use gaea_core::problems::RwcParams;
use gaea_core::supernet::{SearchConfig, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub problem: ProblemSpec,
    pub variants: Vec<VariantSpec>,
    pub seeds: SeedRange,
    /// Block mirror descent settings for `rwc_benchmark` and `simplex_linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerSpec>,
    /// Search settings for `supernet`; the seed is replaced per run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    RwcBenchmark(RwcParams),
    SimplexLinear(SimplexLinearSpec),
    Supernet(SupernetSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplexLinearSpec {
    pub k: usize,
    /// Planted costs: one zero, the rest uniform on `[gap, 1]`.
    #[serde(default = "default_gap")]
    pub gap: f64,
    /// Standard deviation of additive Gaussian gradient noise.
    #[serde(default)]
    pub noise: f64,
    /// Fixed cost seed; by default every run seed draws its own costs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_seed: Option<u64>,
}

fn default_gap() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupernetSpec {
    pub space: SpaceSource,
    pub data: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSource {
    File { file: PathBuf },
    Inline(SearchSpace),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Targets generated by one architecture plus Gaussian noise.
    Planted {
        arch: Vec<usize>,
        samples: usize,
        noise: f64,
        #[serde(default = "default_weight_scale")]
        weight_scale: f64,
        /// Fixed task seed; by default every run seed draws its own task.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
    },
}

fn default_weight_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exponentiated gradient on simplex blocks, SGD elsewhere.
    GaeaEg,
    /// Projected Euclidean steps on simplex blocks.
    EuclideanSgd,
    /// Softmax logits trained by SGD (supernet only).
    SoftmaxBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl SeedRange {
    pub fn iter(&self) -> impl Iterator<Item = u64> {
        self.start..self.start + self.count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub horizon: Horizon,
    #[serde(default = "default_selection")]
    pub selection: BlockSelection,
    #[serde(default = "default_output")]
    pub output: OutputIterate,
    /// Measure `Δ_{1/(2γ)}` at the output iterate.
    #[serde(default = "yes")]
    pub stationarity: bool,
    #[serde(default)]
    pub moments: MomentSpec,
}

fn default_selection() -> BlockSelection {
    BlockSelection::UniformRandom
}

fn default_output() -> OutputIterate {
    OutputIterate::WeightedRandom
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    /// Iterations and step from the target stationarity `eps`.
    Theory { eps: f64 },
    /// Fixed horizons with the matching constant step; one run per horizon.
    Sweep { iterations: Vec<usize> },
    /// Explicit horizon and constant step.
    Fixed { iterations: usize, step: f64 },
}

/// How the gradient second moments `G_i²` are measured when the problem
/// does not declare them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentSpec {
    pub points: usize,
    pub draws: usize,
    /// Radius of the sampled region relative to the distance from the
    /// initial point to the problem's centre.
    pub radius: f64,
    /// Multiplier applied to the measured moments.
    pub safety: f64,
    pub seed: u64,
}

impl Default for MomentSpec {
    fn default() -> Self {
        Self { points: 64, draws: 2000, radius: 1.5, safety: 1.05, seed: 0 }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec: ExperimentSpec = crate::io::read_json(path)?;
        spec.validate()?;
        spec.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| HarnessError::json("<inline experiment>", e))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Makes file references relative to the directory of the spec.
    fn resolve_paths(&mut self, base: &Path) {
        if let ProblemSpec::Supernet(s) = &mut self.problem {
            if let SpaceSource::File { file } = &mut s.space {
                if file.is_relative() {
                    *file = base.join(&*file);
                }
            }
            if let DataSource::Csv { path } = &mut s.data {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(HarnessError::Spec(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return err(format!("experiment name '{}' must be nonempty and contain no path separators", self.name));
        }
        if self.variants.is_empty() {
            return err("at least one variant is required".into());
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return err("variant names must be unique".into());
        }
        if names.iter().any(|n| n.is_empty() || n.contains(['/', '\\', '@'])) {
            return err("variant names must be nonempty and contain no '/', '\\' or '@'".into());
        }
        if self.seeds.count == 0 {
            return err("seed count must be positive".into());
        }
        match &self.problem {
            ProblemSpec::Supernet(_) => {
                if self.search.is_none() {
                    return err("supernet experiments need a 'search' section".into());
                }
                if self.variants.iter().any(|v| v.method == Method::EuclideanSgd) {
                    return err("supernet variants are gaea_eg or softmax_baseline".into());
                }
            }
            _ => {
                let Some(opt) = &self.optimizer else {
                    return err("block mirror descent experiments need an 'optimizer' section".into());
                };
                if self.variants.iter().any(|v| v.method == Method::SoftmaxBaseline) {
                    return err("softmax_baseline applies to supernet experiments only".into());
                }
                match &opt.horizon {
                    Horizon::Theory { eps } if !(*eps > 0.0) => return err("eps must be positive".into()),
                    Horizon::Sweep { iterations } if iterations.is_empty() || iterations.contains(&0) => {
                        return err("sweep horizons must be positive".into())
                    }
                    Horizon::Fixed { iterations, step } if *iterations == 0 || !(*step > 0.0) => {
                        return err("fixed horizon needs positive iterations and step".into())
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"{
        "schema_version": 1,
        "name": "rate",
        "problem": {"kind": "rwc_benchmark", "w_noise": 2.0},
        "variants": [{"name": "gaea", "method": "gaea_eg"}],
        "seeds": {"start": 0, "count": 3},
        "optimizer": {"horizon": {"kind": "sweep", "iterations": [64, 128]}}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let spec = ExperimentSpec::from_json(SPEC).unwrap();
        match &spec.problem {
            ProblemSpec::RwcBenchmark(p) => {
                assert_eq!(p.w_noise, 2.0);
                assert_eq!(p.w_dim, RwcParams::default().w_dim);
            }
            other => panic!("{other:?}"),
        }
        let opt = spec.optimizer.as_ref().unwrap();
        assert_eq!(opt.selection, BlockSelection::UniformRandom);
        assert!(opt.stationarity);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn rejects_inconsistent_specs() {
        let bad_version = SPEC.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(ExperimentSpec::from_json(&bad_version).is_err());
        let unknown = SPEC.replace("\"name\": \"rate\"", "\"name\": \"rate\", \"extra\": 1");
        assert!(ExperimentSpec::from_json(&unknown).is_err());
        let softmax = SPEC.replace("gaea_eg", "softmax_baseline");
        assert!(ExperimentSpec::from_json(&softmax).is_err());
        let no_opt = SPEC.replace(r#""optimizer": {"horizon": {"kind": "sweep", "iterations": [64, 128]}}"#, r#""search": {}"#);
        assert!(ExperimentSpec::from_json(&no_opt).is_err());
        let dup = SPEC.replace(r#"[{"name": "gaea", "method": "gaea_eg"}]"#, r#"[{"name": "a", "method": "gaea_eg"}, {"name": "a", "method": "euclidean_sgd"}]"#);
        assert!(ExperimentSpec::from_json(&dup).is_err());
    }

    #[test]
    fn supernet_space_can_be_inline_or_a_file() {
        let inline = r#"{"file": "space.json"}"#;
        assert!(matches!(serde_json::from_str::<SpaceSource>(inline).unwrap(), SpaceSource::File { .. }));
        let inline = r#"{"nodes": 3, "edges": [[1, 0], [2, 0], [2, 1]], "ops": ["zero", "diagonal", "softplus"], "dim": 3}"#;
        match serde_json::from_str::<SpaceSource>(inline).unwrap() {
            SpaceSource::Inline(s) => assert_eq!(s.num_architectures(), 27),
            other => panic!("{other:?}"),
        }
    }
}
