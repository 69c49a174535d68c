//! Run configuration shared by the command-line front end.
//!
//! Points and grids are kept as strings so that fractions such as `1/3`
//! survive into exact arithmetic.

use serde::{Deserialize, Serialize};

use crate::bounds::DecayModel;
use crate::dynamics::{BranchSpec, FullBranchMap, Potential};
use crate::error::{Error, Result};
use crate::extremes::Observable;
use crate::interval::Topology;
use crate::scalar::{parse_count_list, parse_rational, parse_rational_list, Rational};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub lo: String,
    pub hi: String,
    pub slope: String,
    pub intercept: String,
}

/// A builtin name, a list of branch widths, or explicit affine branches.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<BranchConfig>>,
}

impl MapSpec {
    pub fn builtin(name: &str) -> Self {
        MapSpec {
            builtin: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<FullBranchMap> {
        match (&self.builtin, &self.widths, &self.branches) {
            (Some(name), None, None) => FullBranchMap::builtin(name),
            (None, Some(w), None) => {
                let widths = w
                    .iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>>>()?;
                FullBranchMap::from_widths("widths", &widths)
            }
            (None, None, Some(bs)) => {
                let mut out = Vec::with_capacity(bs.len());
                for b in bs {
                    out.push(BranchSpec::affine(
                        parse_rational(&b.lo)?,
                        parse_rational(&b.hi)?,
                        parse_rational(&b.slope)?,
                        parse_rational(&b.intercept)?,
                    ));
                }
                FullBranchMap::new("custom", out)
            }
            _ => Err(Error::Parse(
                "map needs exactly one of builtin, widths or branches".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub zeta: String,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default)]
    pub topology: Topology,
}

fn default_profile() -> String {
    "neg-log".into()
}

impl Default for ObservableSpec {
    fn default() -> Self {
        ObservableSpec {
            zeta: "1/3".into(),
            profile: default_profile(),
            beta: None,
            c: None,
            topology: Topology::Circle,
        }
    }
}

impl ObservableSpec {
    pub fn centre(&self) -> Result<Rational> {
        parse_rational(&self.zeta)
    }

    pub fn build(&self) -> Result<Observable> {
        let centre = self.centre()?;
        let obs = match self.profile.as_str() {
            "neg-log" => Observable::neg_log(centre),
            "power" => Observable::power(centre, self.beta.unwrap_or(1.0), self.c.unwrap_or(0.0))?,
            other => return Err(Error::Parse(format!("unknown profile '{other}'"))),
        };
        Ok(obs.with_topology(self.topology))
    }
}

/// Fully resolved run parameters; embedded verbatim in every output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSpec,
    pub observable: ObservableSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub exact: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn decay_for(&self, map: &FullBranchMap) -> Result<DecayModel> {
        let d = self
            .decay
            .clone()
            .unwrap_or_else(|| DecayModel::default_for(map));
        d.validate()?;
        Ok(d)
    }

    pub fn n_grid(&self) -> Result<Vec<u64>> {
        list(&self.n, "n", parse_count_list)
    }

    pub fn eps_grid(&self) -> Result<Vec<Rational>> {
        list(&self.eps, "eps", parse_rational_list)
    }

    pub fn tau_grid(&self) -> Result<Vec<Rational>> {
        list(&self.tau, "tau", parse_rational_list)
    }

    pub fn trial_count(&self) -> Result<u64> {
        match &self.trials {
            Some(s) => crate::scalar::parse_count(s),
            None => Err(Error::Parse("missing trials".into())),
        }
    }
}

fn list<T>(v: &Option<String>, name: &str, parse: fn(&str) -> Result<Vec<T>>) -> Result<Vec<T>> {
    match v {
        Some(s) => parse(s),
        None => Err(Error::Parse(format!("missing {name}"))),
    }
}
