use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::estimators::{DEFAULT_NU_BIASED, DEFAULT_NU_UNBIASED};
use crate::kinetics::{similarity_rates, LigandMixture};
use crate::kpr::DEFAULT_KAPPA;
use crate::theory::{AnalyticScenario, Metric, UnknownLigand};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;
/// Name that selects the built-in configuration instead of a file.
pub const BUILTIN_DEFAULTS: &str = "defaults";

/// One simulated scenario plus everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Monte Carlo trials per sweep point.
    pub trials: usize,
    pub model: ModelConfig,
    pub ratios: RatiosConfig,
    pub estimators: EstimatorConfig,
    pub kpr: KprConfig,
    /// Ligands present in the channel but unknown to the receiver.
    #[serde(default)]
    pub unknown: Vec<UnknownLigand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of known ligand types `M`.
    pub ligand_types: usize,
    /// Similarity parameter `χ`: `k⁻_{M-i} = χ^i·k⁻_M`.
    pub chi: f64,
    /// `k⁻_M`, the highest-affinity unbinding rate.
    pub anchor_rate: f64,
    pub binding_rate: f64,
    pub total_concentration: f64,
    /// Unbound/bound samples `N` per estimate.
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    Uniform,
    /// `α_M = weight`, the rest share `1 − weight` equally.
    HighestAffinity,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatiosConfig {
    pub kind: RatioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// 1-based indices of known ligands absent from the channel; the
    /// present ones share the mass equally.
    #[serde(default)]
    pub absent: Vec<usize>,
}

/// Estimators compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepEstimator {
    Unbiased,
    Biased,
    /// Unbiased estimator at the ν minimizing its analytic metric.
    NuOpt,
}

impl SweepEstimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepEstimator::Unbiased => "unbiased",
            SweepEstimator::Biased => "biased",
            SweepEstimator::NuOpt => "nu_opt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(SweepEstimator::Unbiased),
            "biased" => Ok(SweepEstimator::Biased),
            "nu_opt" => Ok(SweepEstimator::NuOpt),
            _ => Err(config("estimators", format!("unknown estimator '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    /// Average NMSE unless a ligand is absent.
    Auto,
    AverageNmse,
    TotalNormalizedMse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kinds: Vec<SweepEstimator>,
    pub nu_unbiased: f64,
    pub nu_biased: f64,
    /// `T_0 = T_1/f`, `T_M = f·T_{M-1}` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_factor: Option<f64>,
    pub metric: MetricChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KprConfig {
    pub kappa: f64,
    /// `μ`, S-messenger production rate.
    pub production_rate: f64,
    pub receptors: usize,
    /// Independent receptor batches in the histogram figure.
    pub replicates: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            trials: 10_000,
            model: ModelConfig {
                ligand_types: 5,
                chi: 5.0,
                anchor_rate: 1.0,
                binding_rate: 1.0,
                total_concentration: 1.0,
                samples: 10_000,
            },
            ratios: RatiosConfig {
                kind: RatioKind::Uniform,
                weight: None,
                values: None,
                absent: Vec::new(),
            },
            estimators: EstimatorConfig {
                kinds: vec![SweepEstimator::Unbiased],
                nu_unbiased: DEFAULT_NU_UNBIASED,
                nu_biased: DEFAULT_NU_BIASED,
                filter_factor: None,
                metric: MetricChoice::Auto,
            },
            kpr: KprConfig {
                kappa: DEFAULT_KAPPA,
                production_rate: 1.0,
                receptors: 10_000,
                replicates: 2_000,
            },
            unknown: Vec::new(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    /// Built-in defaults: `M = 5`, `χ = 5`, `k⁻_M = 1/s`, `N = 10⁴`,
    /// uniform ratios, `ν = 3`.
    pub fn defaults() -> Self {
        Self::default()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| config("file", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config("file", e.to_string()))
    }

    /// Loads a TOML file, or the built-in defaults for `"defaults"`.
    pub fn load(path: &str) -> Result<Self> {
        if path == BUILTIN_DEFAULTS {
            return Ok(Self::defaults());
        }
        let text = std::fs::read_to_string(Path::new(path))
            .map_err(|e| config("file", format!("{path}: {e}")))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let m = &self.model;
        if m.ligand_types == 0 {
            return Err(config(
                "model.ligand_types",
                "at least one ligand type is required",
            ));
        }
        if !(m.chi > 1.0 && m.chi.is_finite()) {
            return Err(config("model.chi", format!("must exceed 1, got {}", m.chi)));
        }
        positive("model.anchor_rate", m.anchor_rate)?;
        positive("model.binding_rate", m.binding_rate)?;
        positive("model.total_concentration", m.total_concentration)?;
        if m.samples < 3 {
            return Err(config(
                "model.samples",
                format!("at least 3 are required, got {}", m.samples),
            ));
        }
        let e = &self.estimators;
        positive("estimators.nu_unbiased", e.nu_unbiased)?;
        positive("estimators.nu_biased", e.nu_biased)?;
        if let Some(f) = e.filter_factor {
            if !(f > 1.0) {
                return Err(config(
                    "estimators.filter_factor",
                    format!("must exceed 1, got {f}"),
                ));
            }
        }
        positive("kpr.kappa", self.kpr.kappa)?;
        positive("kpr.production_rate", self.kpr.production_rate)?;
        if self.kpr.receptors == 0 {
            return Err(config("kpr.receptors", "at least one receptor is required"));
        }
        for (i, u) in self.unknown.iter().enumerate() {
            positive(&format!("unknown[{i}].rate"), u.rate)?;
            if !(0.0..1.0).contains(&u.ratio) {
                return Err(config(format!("unknown[{i}].ratio"), "must lie in [0, 1)"));
            }
        }
        if self.unknown.iter().map(|u| u.ratio).sum::<f64>() >= 1.0 {
            return Err(config("unknown", "unknown ratios must sum below 1"));
        }
        self.known_ratios()?;
        similarity_rates(m.ligand_types, m.chi, m.anchor_rate)
            .map_err(|e| config("model", e.to_string()))?;
        Ok(())
    }

    /// Known unbinding rates, decreasing.
    pub fn rates(&self) -> Result<Vec<f64>> {
        similarity_rates(
            self.model.ligand_types,
            self.model.chi,
            self.model.anchor_rate,
        )
    }

    /// Ratios of the known ligands relative to all ligands in the channel.
    pub fn known_ratios(&self) -> Result<Vec<f64>> {
        let m = self.model.ligand_types;
        let r = &self.ratios;
        let mut base = match r.kind {
            RatioKind::Uniform => vec![1.0; m],
            RatioKind::HighestAffinity => {
                let w = r
                    .weight
                    .ok_or_else(|| config("ratios.weight", "required for highest_affinity"))?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(config(
                        "ratios.weight",
                        format!("must lie in [0, 1], got {w}"),
                    ));
                }
                if m == 1 {
                    vec![1.0]
                } else {
                    let mut v = vec![(1.0 - w) / (m - 1) as f64; m];
                    v[m - 1] = w;
                    v
                }
            }
            RatioKind::Explicit => {
                let v = r
                    .values
                    .clone()
                    .ok_or_else(|| config("ratios.values", "required for explicit ratios"))?;
                if v.len() != m {
                    return Err(config(
                        "ratios.values",
                        format!("{} values for {m} ligand types", v.len()),
                    ));
                }
                if v.iter().any(|a| !(*a >= 0.0)) {
                    return Err(config("ratios.values", "ratios must be non-negative"));
                }
                v
            }
        };
        for &i in &r.absent {
            if i == 0 || i > m {
                return Err(config(
                    "ratios.absent",
                    format!("index {i} is outside 1..={m}"),
                ));
            }
            base[i - 1] = 0.0;
        }
        if !r.absent.is_empty() && r.kind == RatioKind::Uniform {
            base.iter_mut()
                .for_each(|a| *a = if *a > 0.0 { 1.0 } else { 0.0 });
        }
        let sum: f64 = base.iter().sum();
        if !(sum > 0.0) {
            return Err(config(
                "ratios",
                "at least one known ligand must be present",
            ));
        }
        let known_mass = 1.0 - self.unknown.iter().map(|u| u.ratio).sum::<f64>();
        Ok(base.iter().map(|a| a / sum * known_mass).collect())
    }

    pub fn metric(&self) -> Result<Metric> {
        Ok(match self.estimators.metric {
            MetricChoice::Auto => Metric::for_truth(&self.known_ratios()?),
            MetricChoice::AverageNmse => Metric::AverageNmse,
            MetricChoice::TotalNormalizedMse => Metric::TotalNormalizedMse,
        })
    }

    /// The channel including unknown ligands. Components with equal rates
    /// are merged, since their bound times are indistinguishable.
    pub fn channel(&self) -> Result<LigandMixture> {
        let mut parts: Vec<(f64, f64)> = self
            .rates()?
            .into_iter()
            .zip(self.known_ratios()?)
            .collect();
        parts.extend(self.unknown.iter().map(|u| (u.rate, u.ratio)));
        parts.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut rates: Vec<f64> = Vec::new();
        let mut ratios: Vec<f64> = Vec::new();
        for (k, a) in parts {
            if rates.last() == Some(&k) {
                *ratios.last_mut().expect("non-empty") += a;
            } else {
                rates.push(k);
                ratios.push(a);
            }
        }
        let sum: f64 = ratios.iter().sum();
        ratios.iter_mut().for_each(|a| *a /= sum);
        LigandMixture::new(
            self.model.binding_rate,
            rates,
            ratios,
            self.model.total_concentration,
        )
    }

    pub fn analytic_scenario(&self) -> Result<AnalyticScenario> {
        Ok(AnalyticScenario {
            rates: self.rates()?,
            ratios: self.known_ratios()?,
            unknown: self.unknown.clone(),
            samples: self.model.samples,
            total_concentration: self.model.total_concentration,
            filter_factor: self.estimators.filter_factor,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_file_matches_defaults() {
        let chapter = include_str!("../../../../book/src/experiments.md");
        let block = chapter
            .split("```toml\n")
            .nth(1)
            .and_then(|rest| rest.split("```").next())
            .unwrap();
        assert_eq!(
            ScenarioConfig::from_toml_str(block).unwrap(),
            ScenarioConfig::defaults()
        );
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = ScenarioConfig::defaults();
        let text = cfg.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn round_trip_with_optional_sections() {
        let mut cfg = ScenarioConfig::defaults();
        cfg.unknown.push(UnknownLigand {
            rate: 100.0,
            ratio: 0.1,
        });
        cfg.estimators.filter_factor = Some(5.0);
        cfg.ratios.absent = vec![2];
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn ratio_specifications() {
        let mut cfg = ScenarioConfig::defaults();
        assert_eq!(cfg.known_ratios().unwrap(), vec![0.2; 5]);
        cfg.ratios.absent = vec![1, 5];
        let r = cfg.known_ratios().unwrap();
        assert_eq!(r[0], 0.0);
        assert!((r[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cfg.metric().unwrap(), Metric::TotalNormalizedMse);
        cfg.ratios = RatiosConfig {
            kind: RatioKind::HighestAffinity,
            weight: Some(0.6),
            values: None,
            absent: vec![],
        };
        let r = cfg.known_ratios().unwrap();
        assert!((r[4] - 0.6).abs() < 1e-15 && (r[0] - 0.1).abs() < 1e-15);
        cfg.ratios.kind = RatioKind::Uniform;
        cfg.unknown.push(UnknownLigand {
            rate: 100.0,
            ratio: 0.1,
        });
        assert!((cfg.known_ratios().unwrap()[0] - 0.18).abs() < 1e-15);
        let ch = cfg.channel().unwrap();
        assert_eq!(ch.unbinding_rates(), &[625.0, 125.0, 100.0, 25.0, 5.0, 1.0]);
    }

    #[test]
    fn errors_name_the_field() {
        let mut cfg = ScenarioConfig::defaults();
        cfg.model.chi = 1.0;
        match cfg.validate() {
            Err(crate::Error::Config { field, .. }) => assert_eq!(field, "model.chi"),
            other => panic!("{other:?}"),
        }
        assert!(ScenarioConfig::from_toml_str("schema_version = 1\nbogus = 2").is_err());
    }
}
