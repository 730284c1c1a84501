//! Run configuration.
//!
//! A config is a small TOML document with three flat sections:
//!
//! ```toml
//! [system]
//! name = "solenoid"
//! params = [0.4, 0.5]
//!
//! [pipeline]
//! kind = "uniqueness"
//! atoms = 10001
//! tol = 1e-3
//!
//! [output]
//! dir = "out/uniqueness"
//! ```
//!
//! Every key is optional except `system.name` and `pipeline.kind`; keys that
//! the chosen pipeline does not read are rejected, as are unknown keys.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub pipeline: PipelineSpec,
    #[serde(default, skip_serializing_if = "OutputSpec::is_empty")]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

impl OutputSpec {
    fn is_empty(&self) -> bool {
        self.dir.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Lift,
    Uniqueness,
    StableLeaf,
    Ulam,
    Spectrum,
    Coboundary,
    Corr,
    Clt,
    Attractor,
    Wasserstein,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lift => "lift",
            Self::Uniqueness => "uniqueness",
            Self::StableLeaf => "stable-leaf",
            Self::Ulam => "ulam",
            Self::Spectrum => "spectrum",
            Self::Coboundary => "coboundary",
            Self::Corr => "corr",
            Self::Clt => "clt",
            Self::Attractor => "attractor",
            Self::Wasserstein => "wasserstein",
        }
    }

    /// Keys of `[pipeline]` this pipeline reads, besides `kind`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::Lift => &["seed", "atoms", "tol", "n_max", "base", "expect", "section"],
            Self::Uniqueness => &["seed", "atoms", "tol", "n_max", "base", "sections"],
            Self::StableLeaf => &["seed", "atoms", "tol", "n_max"],
            Self::Ulam => &["seed", "cells", "construction", "samples", "tol"],
            Self::Spectrum => {
                &["seed", "cells", "construction", "samples", "tol", "n_max", "observable", "expect_second", "second_tol"]
            }
            Self::Coboundary => &["seed", "observable", "hol_constant", "target_osc", "cells", "atoms", "energy_tol"],
            Self::Corr => &["seed", "observable", "observable_g", "n_max", "orbit_len", "expect_sigma2", "sigma2_tol"],
            Self::Clt => &["seed", "observable", "atoms", "n_block", "blocks", "orbit_len", "ks_max"],
            Self::Attractor => &["n_iter", "size", "grid_base", "grid_fiber"],
            Self::Wasserstein => &["seed", "atoms", "pairs", "epsilon"],
        }
    }

    /// Whether the pipeline draws random numbers with its default settings.
    fn stochastic(self, spec: &PipelineSpec) -> bool {
        match self {
            Self::Lift | Self::Uniqueness => spec.base.as_deref() == Some("orbit"),
            Self::Ulam | Self::Spectrum => spec.construction.as_deref() == Some("monte-carlo"),
            Self::Attractor => false,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub kind: PipelineKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// `grid` (equally spaced atoms) or `orbit` (Birkhoff sample).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    /// `converge` or `non-shrinking`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<String>,
    /// Named start section: `system`, `center`, `boundary` or `wave`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sections: Option<Vec<String>>,
    /// `exact` or `monte-carlo`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable_g: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_second: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hol_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_osc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect_sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_block: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_base: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_fiber: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        let kind = p.kind;
        let table = toml::Value::try_from(p)?;
        let allowed = kind.keys();
        for key in table.as_table().into_iter().flat_map(|t| t.keys()) {
            if key != "kind" && !allowed.contains(&key.as_str()) {
                bail!("config: key `pipeline.{key}` is not used by the `{}` pipeline", kind.name());
            }
        }
        check_range("atoms", p.atoms, 1, 10_000_000)?;
        check_range("cells", p.cells, 2, 1 << 20)?;
        check_range("n_max", p.n_max, 1, 100_000)?;
        check_range("samples", p.samples, 1, 10_000_000)?;
        check_range("orbit_len", p.orbit_len, 1000, 100_000_000)?;
        check_range("n_block", p.n_block, 100, 10_000_000)?;
        check_range("blocks", p.blocks, 100, 1_000_000)?;
        check_range("n_iter", p.n_iter, 0, 64)?;
        check_range("size", p.size, 8, 8192)?;
        check_range("grid_base", p.grid_base, 1, 10_000_000)?;
        check_range("grid_fiber", p.grid_fiber, 1, 1024)?;
        check_range("pairs", p.pairs, 1, 10_000)?;
        check_open_unit("tol", p.tol)?;
        check_open_unit("target_osc", p.target_osc)?;
        check_open_unit("energy_tol", p.energy_tol)?;
        check_open_unit("second_tol", p.second_tol)?;
        check_open_unit("sigma2_tol", p.sigma2_tol)?;
        check_open_unit("ks_max", p.ks_max)?;
        check_open_unit("epsilon", p.epsilon)?;
        if let Some(h) = p.hol_constant {
            if !(h >= 0.0 && h.is_finite()) {
                bail!("config: `hol_constant` must be a nonnegative number");
            }
        }
        if let Some(b) = &p.base {
            if b != "grid" && b != "orbit" {
                bail!("config: `base` must be \"grid\" or \"orbit\", got {b:?}");
            }
        }
        if let Some(e) = &p.expect {
            if e != "converge" && e != "non-shrinking" {
                bail!("config: `expect` must be \"converge\" or \"non-shrinking\", got {e:?}");
            }
        }
        if let Some(c) = &p.construction {
            if c != "exact" && c != "monte-carlo" {
                bail!("config: `construction` must be \"exact\" or \"monte-carlo\", got {c:?}");
            }
        }
        if p.samples.is_some() && p.construction.as_deref() != Some("monte-carlo") {
            bail!("config: `samples` only applies to construction = \"monte-carlo\"");
        }
        if p.second_tol.is_some() && p.expect_second.is_none() {
            bail!("config: `second_tol` needs `expect_second`");
        }
        if p.sigma2_tol.is_some() && p.expect_sigma2.is_none() {
            bail!("config: `sigma2_tol` needs `expect_sigma2`");
        }
        Ok(())
    }

    /// Applies a command-line seed (ignored by pipelines without one) and
    /// checks that stochastic runs have a seed.
    pub fn with_seed(mut self, seed: Option<u64>) -> Result<Self> {
        if seed.is_some() && self.pipeline.kind.keys().contains(&"seed") {
            self.pipeline.seed = seed;
        }
        let p = &self.pipeline;
        if p.seed.is_none() && p.kind.stochastic(p) {
            bail!("config: the `{}` pipeline is stochastic and needs `pipeline.seed` (or --seed)", p.kind.name());
        }
        Ok(self)
    }
}

fn check_range(name: &str, v: Option<usize>, lo: usize, hi: usize) -> Result<()> {
    match v {
        Some(x) if x < lo || x > hi => bail!("config: `{name}` = {x} is outside [{lo}, {hi}]"),
        _ => Ok(()),
    }
}

fn check_open_unit(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x < 1.0) => bail!("config: `{name}` = {x} must lie in (0, 1)"),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[system]\nname = \"doubling\"\n\n[pipeline]\nkind = \"ulam\"\ncells = 64\n";

    #[test]
    fn minimal_round_trip() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.pipeline.kind, PipelineKind::Ulam);
        let again = RunConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(again.canonical(), cfg.canonical());
    }

    #[test]
    fn unknown_and_unused_keys_are_rejected() {
        let e = RunConfig::parse(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(format!("{e:#}").contains("bogus"));
        let e = RunConfig::parse(&format!("{MINIMAL}pairs = 3\n")).unwrap_err();
        assert!(format!("{e:#}").contains("not used"));
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = RunConfig::parse("[system]\nname = \n").unwrap_err();
        assert!(format!("{e:#}").contains("line 2"), "{e:#}");
    }

    #[test]
    fn stochastic_pipelines_need_a_seed() {
        let text = "[system]\nname = \"doubling\"\n[pipeline]\nkind = \"corr\"\nobservable = \"y\"\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert!(cfg.clone().with_seed(None).is_err());
        assert_eq!(cfg.with_seed(Some(4)).unwrap().pipeline.seed, Some(4));
    }

    #[test]
    fn ranges_are_checked() {
        let e = RunConfig::parse("[system]\nname = \"doubling\"\n[pipeline]\nkind = \"ulam\"\ncells = 1\n").unwrap_err();
        assert!(format!("{e:#}").contains("cells"));
    }
}
