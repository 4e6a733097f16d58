//! Run configuration: a single JSON document with defaults matching the
//! reference figures. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pt_amplifier::ep::ToyBranch;
use pt_amplifier::signals::AmplifierSpec;
use pt_amplifier::wigner::{CatSpec, CosineArgument};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpMode {
    /// Closed-form toy model `M0 = t`, `Omega0 = 1/t`.
    Toy,
    /// Numerical EP integration on the Hermitian partner of `amplifier`.
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CosineChoice {
    Oracle,
    Printed,
}

impl CosineChoice {
    pub fn argument(self) -> CosineArgument {
        match self {
            CosineChoice::Oracle => CosineArgument::ORACLE,
            CosineChoice::Printed => CosineArgument::PRINTED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtRegionConfig {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub n: usize,
}

impl Default for PtRegionConfig {
    fn default() -> Self {
        PtRegionConfig { alpha: [0.0, 1.0], beta: [0.0, 1.0], n: 201 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpConfig {
    pub mode: EpMode,
    pub c1: f64,
    pub c2: f64,
    /// `eta_plus`, `eta_minus`, `1+`, `1-`, `2+` or `2-`.
    pub branch: String,
    pub eta0: f64,
    pub span: [f64; 2],
    pub samples: usize,
    /// Numeric mode only; defaults to the frozen-coefficient static value.
    pub eta_init: Option<f64>,
    pub etadot_init: Option<f64>,
    /// Numeric mode: samples of the partner's `M0` and `Omega0^2` used to
    /// build interpolating tables.
    pub partner_samples: usize,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            mode: EpMode::Toy,
            c1: 4.0,
            c2: 4.0,
            branch: "eta_plus".into(),
            eta0: 1.0,
            span: [1.0, 10.0],
            samples: 91,
            eta_init: None,
            etadot_init: None,
            partner_samples: 2001,
        }
    }
}

impl EpConfig {
    pub fn branch(&self) -> Result<ToyBranch, CliError> {
        ToyBranch::parse(&self.branch)
            .ok_or_else(|| CliError::Config(format!("ep.branch: unknown branch {:?}", self.branch)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Sample times; defaults to `ep.samples` points across `ep.span`.
    pub times: Option<Vec<f64>>,
    pub x_range: [f64; 2],
    pub nx: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { times: None, x_range: [-5.0, 5.0], nx: 201 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub times: Vec<f64>,
    pub nx: usize,
    pub np: usize,
    /// Divide by the phase-space integral so the grid has unit mass.
    pub normalized: bool,
    pub cosine: CosineChoice,
}

impl Default for WignerConfig {
    fn default() -> Self {
        WignerConfig {
            times: vec![0.1, 1.0, 2.0, 100.0, 1000.0],
            nx: 101,
            np: 101,
            normalized: false,
            cosine: CosineChoice::Oracle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub amplifier: AmplifierSpec,
    pub kappa: f64,
    /// Time at which `metric-solve` evaluates the amplifier.
    pub metric_time: f64,
    /// Admit negative amplification rates (outside the default domain).
    pub allow_negative_rates: bool,
    pub pt_region: PtRegionConfig,
    pub ep: EpConfig,
    pub evolve: EvolveConfig,
    pub cat: CatSpec,
    pub wigner: WignerConfig,
    pub out: PathBuf,
    pub tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            amplifier: AmplifierSpec::constant(1.0, 0.1, 0.2, 1.0),
            kappa: 1.0,
            metric_time: 0.0,
            allow_negative_rates: false,
            pt_region: PtRegionConfig::default(),
            ep: EpConfig::default(),
            evolve: EvolveConfig::default(),
            cat: CatSpec::default(),
            wigner: WignerConfig::default(),
            out: PathBuf::from("out"),
            tol: 1e-10,
        }
    }
}

fn range_ok(name: &str, r: [f64; 2]) -> Result<(), CliError> {
    if r.iter().all(|v| v.is_finite()) && r[0] < r[1] {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name}: need finite [min, max] with min < max, got {r:?}")))
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        require(self.kappa.is_finite(), || format!("kappa must be finite, got {}", self.kappa))?;
        require(self.metric_time.is_finite(), || "metric_time must be finite".into())?;
        require(self.tol > 0.0 && self.tol <= 1e-2, || format!("tol must lie in (0, 1e-2], got {}", self.tol))?;
        range_ok("pt_region.alpha", self.pt_region.alpha)?;
        range_ok("pt_region.beta", self.pt_region.beta)?;
        require(self.pt_region.n >= 2, || format!("pt_region.n must be >= 2, got {}", self.pt_region.n))?;

        let ep = &self.ep;
        require(ep.c1 >= 1.0 && ep.c2.is_finite(), || format!("ep: need c1 >= 1 and finite c2, got ({}, {})", ep.c1, ep.c2))?;
        ep.branch()?;
        require(ep.eta0 > 0.0 && ep.eta0.is_finite(), || format!("ep.eta0 must be positive, got {}", ep.eta0))?;
        range_ok("ep.span", ep.span)?;
        require(ep.samples >= 2, || "ep.samples must be >= 2".into())?;
        require(ep.partner_samples >= 3, || "ep.partner_samples must be >= 3".into())?;
        if let Some(e) = ep.eta_init {
            require(e > 0.0 && e.is_finite(), || format!("ep.eta_init must be positive, got {e}"))?;
        }
        if let Some(d) = ep.etadot_init {
            require(d.is_finite(), || "ep.etadot_init must be finite".into())?;
        }
        if ep.mode == EpMode::Toy {
            require(ep.span[0] > 0.0, || "ep.span: the toy model needs t > 0".into())?;
            require(ep.eta0 == 1.0, || "ep.eta0: the toy model fixes eta0 = 1".into())?;
        }

        if let Some(ts) = &self.evolve.times {
            require(!ts.is_empty() && ts.iter().all(|t| t.is_finite()), || "evolve.times must be nonempty and finite".into())?;
        }
        range_ok("evolve.x_range", self.evolve.x_range)?;
        require(self.evolve.nx >= 2, || "evolve.nx must be >= 2".into())?;

        require(self.cat.x0.is_finite() && self.cat.p0.is_finite(), || "cat: x0 and p0 must be finite".into())?;
        let w = &self.wigner;
        require(!w.times.is_empty() && w.times.iter().all(|t| t.is_finite()), || "wigner.times must be nonempty and finite".into())?;
        require(w.nx >= 16 && w.np >= 16, || format!("wigner grid must be at least 16 x 16, got {} x {}", w.nx, w.np))?;
        if ep.mode == EpMode::Toy {
            require(w.times.iter().all(|&t| t > 0.0), || "wigner.times: the toy model needs t > 0".into())?;
        }
        Ok(())
    }

    pub fn evolve_times(&self) -> Vec<f64> {
        self.evolve.times.clone().unwrap_or_else(|| {
            let [a, b] = self.ep.span;
            let n = self.ep.samples;
            (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"kapa": 1.0}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"ep": {"c3": 1.0}}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"kappa": 2.0}"#).unwrap();
        assert_eq!(partial.kappa, 2.0);
        assert_eq!(partial.ep.c1, 4.0);
    }

    #[test]
    fn invalid_values_are_reported() {
        let mut cfg = RunConfig::default();
        cfg.ep.c1 = 0.5;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.ep.branch = "3+".into();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.wigner.times = vec![0.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_times_cover_span() {
        let t = RunConfig::default().evolve_times();
        assert_eq!(t.len(), 91);
        assert_eq!((t[0], t[90]), (1.0, 10.0));
    }
}
