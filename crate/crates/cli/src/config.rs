//! JSON configuration with fail-fast schema checks.

use std::path::{Path, PathBuf};

use microlab_core::covering::RectUnion;
use microlab_core::energy::EnergyParams;
use microlab_core::fields::Rect;
use microlab_core::minimizer::MinimizeOptions;
use microlab_core::scaling_lab::Construction;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub minimize: MinimizeOptions,
    pub output: Option<PathBuf>,
    pub construct: ConstructSection,
    pub cover: CoverSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FormArg {
    Unrescaled,
    Rescaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub p: f64,
    pub theta: f64,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    /// Defaults to `rescaled` when only `sigma` is given.
    pub form: Option<FormArg>,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            p: 2.0,
            theta: 0.25,
            epsilon: None,
            sigma: None,
            form: None,
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-4;

impl ParamsSection {
    pub fn resolve(&self) -> Result<EnergyParams<f64>, CliError> {
        let form = match (self.form, self.epsilon, self.sigma) {
            (_, Some(_), Some(_)) => return Err(CliError::Config("give either params.epsilon or params.sigma".into())),
            (Some(f), _, _) => f,
            (None, None, Some(_)) => FormArg::Rescaled,
            (None, _, None) => FormArg::Unrescaled,
        };
        let tp = self.theta.powf(self.p);
        let params = match form {
            FormArg::Unrescaled => {
                let eps = self
                    .epsilon
                    .or(self.sigma.map(|s| s * tp))
                    .unwrap_or(DEFAULT_EPSILON);
                EnergyParams::unrescaled(self.p, self.theta, eps)?
            }
            FormArg::Rescaled => {
                let sigma = self
                    .sigma
                    .or(self.epsilon.map(|e| e / tp))
                    .unwrap_or(DEFAULT_EPSILON / tp);
                EnergyParams::rescaled(self.p, self.theta, sigma)?
            }
        };
        Ok(params)
    }
}

/// Sampling grid; when set it also overrides `minimize.nx/ny`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

pub const DEFAULT_SAMPLES: usize = 129;

impl GridSection {
    pub fn dims(&self) -> (usize, usize) {
        (self.nx.unwrap_or(DEFAULT_SAMPLES), self.ny.unwrap_or(DEFAULT_SAMPLES))
    }
}

/// `epsilon` values in multiples of `theta^p`, log-spaced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for LogRange {
    fn default() -> Self {
        Self { lo: 1e-5, hi: 1e-1, n: 9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Absolute epsilon values; takes precedence over `log_range`.
    pub epsilons: Option<Vec<f64>>,
    pub log_range: LogRange,
    pub constructions: Vec<Construction>,
    /// Refine the best analytic candidate with the `minimize` options.
    pub refine: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: None,
            log_range: LogRange::default(),
            constructions: vec![Construction::Constant, Construction::Branching],
            refine: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Constant,
    Branching,
    Example,
    Recovery,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructSection {
    pub kind: Kind,
    /// Exponent of the example sequence.
    pub alpha: f64,
}

impl Default for ConstructSection {
    fn default() -> Self {
        Self {
            kind: Kind::Constant,
            alpha: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Named(String),
    Rects { rects: Vec<Rect<f64>> },
}

impl DomainSpec {
    pub fn resolve(&self) -> Result<RectUnion, CliError> {
        match self {
            DomainSpec::Named(n) => match n.as_str() {
                "square" => Ok(RectUnion::unit_square()),
                "l-shape" => Ok(RectUnion::l_shape()),
                "slab" => Ok(RectUnion::slab(1e-2)?),
                other => Err(CliError::Config(format!(
                    "unknown domain `{other}` (expected square, l-shape, slab or {{\"rects\": [...]}})"
                ))),
            },
            DomainSpec::Rects { rects } => Ok(RectUnion::new(rects.clone())?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverSection {
    pub domain: DomainSpec,
    pub delta: f64,
    pub depth: u32,
    pub samples: usize,
}

impl Default for CoverSection {
    fn default() -> Self {
        Self {
            domain: DomainSpec::Named("square".into()),
            delta: 1.0,
            depth: 6,
            samples: 10_000,
        }
    }
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<Config>(r#"{"params": {"p": 2, "thetaa": 0.1}}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"extra": 1}"#).is_err());
        assert!(serde_json::from_str::<Config>(r#"{"minimize": {"nx": 8, "foo": 1}}"#).is_err());
    }

    #[test]
    fn params_form_inference() {
        let c: Config = serde_json::from_str(r#"{"params": {"p": 2, "theta": 0.25, "sigma": 2}}"#).unwrap();
        let p = c.params.resolve().unwrap();
        assert_eq!(p.form, microlab_core::energy::Form::Rescaled);
        assert_eq!(p.epsilon, 0.125);
        let both: Config = serde_json::from_str(r#"{"params": {"epsilon": 1, "sigma": 2}}"#).unwrap();
        assert!(both.params.resolve().is_err());
    }

    #[test]
    fn domains() {
        let d: DomainSpec = serde_json::from_str(r#"{"rects": [{"x0":0,"x1":1,"y0":0,"y1":1}]}"#).unwrap();
        assert!(d.resolve().is_ok());
        assert!(DomainSpec::Named("disk".into()).resolve().is_err());
    }
}
