//! Run configuration: sharing rule, control transformation, load balancing
//! policy, MAC model and quota overrides, all loadable from one JSON file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bargaining::{SharingSpec, Utility};
use crate::error::{Error, Result};
use crate::mac80211::MacModel;
use crate::model::PlayerId;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sharing: SharingConfig,
    pub control: ControlConfig,
    pub loadbalance: LoadBalanceConfig,
    pub mac: MacConfig,
    pub quota: QuotaConfig,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sharing.to_spec()?;
        self.control.validate()?;
        self.loadbalance.validate()?;
        self.mac.to_model()?.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "family")]
pub enum SharingConfig {
    /// Equal sharing of the coalition worth.
    Identity,
    /// Power utilities x^alpha, per player ("w1", "f2", ...); missing players
    /// get alpha 1.
    Power {
        #[serde(default)]
        alphas: BTreeMap<String, f64>,
    },
    /// A named built-in concave utility shared by everyone.
    Custom { name: String },
}

impl Default for SharingConfig {
    fn default() -> Self {
        SharingConfig::Identity
    }
}

impl SharingConfig {
    pub fn to_spec(&self) -> Result<SharingSpec> {
        match self {
            SharingConfig::Identity => Ok(SharingSpec::Identity),
            SharingConfig::Power { alphas } => {
                let mut map = BTreeMap::new();
                for (k, &v) in alphas {
                    let id: PlayerId = k.parse()?;
                    if !(v > 0.0) {
                        return Err(Error::InvalidConfig(format!("alpha for {k} must be positive")));
                    }
                    map.insert(id, v);
                }
                Ok(SharingSpec::Power { alphas: map })
            }
            SharingConfig::Custom { name } => Ok(SharingSpec::Custom(Utility::by_name(name)?)),
        }
    }
}

/// Scalar values broadcast to every AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerApValue {
    Scalar(f64),
    PerAp(Vec<f64>),
}

impl PerApValue {
    pub fn resolve(&self, n_aps: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerApValue::Scalar(v) => Ok(vec![*v; n_aps]),
            PerApValue::PerAp(vs) => {
                if vs.len() != n_aps {
                    return Err(Error::InvalidConfig(format!(
                        "{what} has {} entries for {n_aps} APs",
                        vs.len()
                    )));
                }
                Ok(vs.clone())
            }
        }
    }
}

/// `qhat: "auto"` peaks each AP's tax at one more than its load-balance
/// share (the AP counts as a coalition member); explicit values are used
/// verbatim as cell-size targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QhatConfig {
    Auto(String),
    Explicit(Vec<f64>),
}

impl Default for QhatConfig {
    fn default() -> Self {
        QhatConfig::Auto("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "family")]
pub enum ControlConfig {
    None,
    Gaussian {
        #[serde(default = "default_sigma")]
        sigma: PerApValue,
        #[serde(default)]
        qhat: QhatConfig,
    },
}

fn default_sigma() -> PerApValue {
    PerApValue::Scalar(0.3)
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig::Gaussian { sigma: default_sigma(), qhat: QhatConfig::default() }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if let ControlConfig::Gaussian { sigma, qhat } = self {
            match sigma {
                PerApValue::Scalar(s) if !(*s > 0.0) => {
                    return Err(Error::InvalidConfig(format!("sigma {s} must be positive")));
                }
                PerApValue::PerAp(vs) if vs.iter().any(|s| !(*s > 0.0)) => {
                    return Err(Error::InvalidConfig("all sigmas must be positive".into()));
                }
                _ => {}
            }
            if let QhatConfig::Auto(word) = qhat {
                if word != "auto" {
                    return Err(Error::InvalidConfig(format!(
                        "qhat must be \"auto\" or an array, got \"{word}\""
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadBalanceConfig {
    pub policy: String,
    /// Explicit load-balance shares, bypassing the policy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qhat_override: Option<Vec<f64>>,
}

impl Default for LoadBalanceConfig {
    fn default() -> Self {
        LoadBalanceConfig { policy: "equal-split".into(), qhat_override: None }
    }
}

impl LoadBalanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.policy != "equal-split" {
            return Err(Error::InvalidConfig(format!("unknown loadbalance policy {}", self.policy)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_fixed: Option<f64>,
    /// Full table replacement; defaults otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<crate::mac80211::MacParams>>,
}

impl MacConfig {
    pub fn to_model(&self) -> Result<MacModel> {
        let mut model = MacModel::default();
        if let Some(tables) = &self.tables {
            model.tables = tables.clone();
        }
        model.beta_fixed = self.beta_fixed;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuotaConfig {
    /// Hard caps per AP, overriding both scenario quotas and the derived
    /// ceil(qhat) clamp.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<u32>>,
}
