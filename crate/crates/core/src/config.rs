//! Run configuration: a flat TOML key-value file (JSON accepted) plus the
//! named figure presets.
//!
//! All frequencies are ratios to the simulated mode frequency, which is the
//! unit (`ω = 1`). Times are given as `g t` with `g` the per-qubit coupling
//! (`g0` for the pulsed model).
//!
//! ```toml
//! model = "dicke"        # dicke | biased | pulsed | fermi_bose_analog | broadband
//! n_qubits = 2
//! fock_cutoff = 22
//! n_trotter = 11
//! t_max = 1.0            # g t at the end of the run
//! coupling = 1.5         # g = λ/√N
//! qubit_freq = 0.05      # ω0
//! kappa = 0.01
//! gamma_s = 0.005
//! gamma_d = 0.005
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{ModelParams, PulseParams};
use crate::hilbert::HilbertSpace;
use crate::lindblad::{IntegratorConfig, NoiseParams, Reference, RunOptions, STABILITY_LIMIT};
use crate::trotter::{build_schedule, ScheduleOptions, TrotterSchedule, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Dicke,
    Biased,
    Pulsed,
    /// Inhomogeneous Dicke model with `ω0^i = 2 ε_i` from fermionic level energies.
    FermiBoseAnalog,
    /// Dicke model with a per-qubit frequency list.
    Broadband,
}

impl Model {
    pub fn variant(self) -> Variant {
        match self {
            Model::Biased => Variant::Biased,
            Model::Pulsed => Variant::Pulsed,
            Model::Dicke | Model::FermiBoseAnalog | Model::Broadband => Variant::Dicke,
        }
    }
}

fn default_stability() -> f64 {
    STABILITY_LIMIT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub n_qubits: usize,
    pub fock_cutoff: usize,
    pub n_trotter: usize,
    /// Final `g t`.
    pub t_max: f64,
    /// Per-qubit coupling `g = λ/√N` (or `g0` for the pulsed model).
    pub coupling: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_freq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_freqs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_energies: Option<Vec<f64>>,
    #[serde(default)]
    pub bias: f64,
    /// `g1` of the pulsed model; defaults to `2 g0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_coupling: Option<f64>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub gamma_s: f64,
    #[serde(default)]
    pub gamma_d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_stability")]
    pub stability_limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_duration: Option<f64>,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub intra_step: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Everything needed to execute a configuration.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub space: HilbertSpace,
    pub variant: Variant,
    pub params: ModelParams,
    pub simulated_time: f64,
    pub n_steps: usize,
    pub noise: NoiseParams,
    pub integrator: IntegratorConfig,
    pub options: RunOptions,
    pub schedule_options: ScheduleOptions,
}

impl ResolvedRun {
    pub fn schedule(&self) -> Result<TrotterSchedule> {
        build_schedule(
            self.variant,
            self.space,
            &self.params,
            self.simulated_time,
            self.n_steps,
            &self.schedule_options,
        )
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_config_text(path)?;
        if is_json(path) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Keys of `overrides` replace those of `self`; the result is validated
    /// as a whole.
    pub fn overlay(&self, overrides: toml::Table) -> Result<Self> {
        let mut base = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in overrides {
            base.insert(k, v);
        }
        base.try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Overlay the keys of a config file onto `self`.
    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = read_config_text(path)?;
        let table: toml::Table = if is_json(path) {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            toml::Table::try_from(v).map_err(|e| Error::Config(e.to_string()))?
        } else {
            text.parse()
                .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?
        };
        self.overlay(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Set a single key from its textual value (used by sweeps).
    pub fn with_key(&self, key: &str, value: &str) -> Result<Self> {
        let parsed: toml::Table = format!("{key} = {value}")
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        self.overlay(parsed)
    }

    fn qubit_frequencies(&self) -> Result<Vec<f64>> {
        let n = self.n_qubits;
        match self.model {
            Model::FermiBoseAnalog => {
                let e = self.level_energies.as_ref().ok_or_else(|| {
                    Error::Config("fermi_bose_analog needs level_energies".into())
                })?;
                Ok(e.iter().map(|x| 2.0 * x).collect())
            }
            Model::Broadband => self
                .qubit_freqs
                .clone()
                .ok_or_else(|| Error::Config("broadband needs a qubit_freqs list".into())),
            _ => match (&self.qubit_freqs, self.qubit_freq) {
                (Some(_), Some(_)) => Err(Error::Config(
                    "give either qubit_freq or qubit_freqs, not both".into(),
                )),
                (Some(v), None) => Ok(v.clone()),
                (None, Some(w)) => Ok(vec![w; n]),
                (None, None) => Err(Error::Config("qubit_freq is required".into())),
            },
        }
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.n_trotter == 0 {
            return Err(Error::Config("n_trotter must be at least 1".into()));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::Config(
                "t_max must be finite and non-negative".into(),
            ));
        }
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(Error::Config(
                "coupling must be positive (t_max is in units of 1/g)".into(),
            ));
        }
        if self.bias != 0.0 && self.model != Model::Biased {
            return Err(Error::Config(
                "bias is only meaningful for the biased model".into(),
            ));
        }
        if self.pulse_coupling.is_some() && self.model != Model::Pulsed {
            return Err(Error::Config(
                "pulse_coupling is only meaningful for the pulsed model".into(),
            ));
        }
        let space = HilbertSpace::new(self.n_qubits, self.fock_cutoff).map_err(cfg_err)?;
        let freqs = self.qubit_frequencies()?;
        if freqs.len() != self.n_qubits {
            return Err(Error::Config(format!(
                "{} qubit frequencies for {} qubits",
                freqs.len(),
                self.n_qubits
            )));
        }
        let sqrt_n = (self.n_qubits as f64).sqrt();
        let t = self.t_max / self.coupling;
        let mut params = ModelParams::dicke(self.n_qubits, 0.0, 1.0, self.coupling * sqrt_n);
        params.qubit_freqs = freqs;
        params.bias = self.bias;
        if let Some(e) = &self.level_energies {
            params.fermi_bose = Some(crate::hamiltonians::FermiBoseParams {
                level_energies: e.clone(),
            });
        }
        if self.model == Model::Pulsed {
            // one kick per Trotter step, equal time at g0 and g1
            let step = t / self.n_trotter as f64;
            if step <= 0.0 {
                return Err(Error::Config("the pulsed model needs t_max > 0".into()));
            }
            let g1 = self.pulse_coupling.unwrap_or(2.0 * self.coupling);
            params.pulse = Some(PulseParams::from_couplings(
                self.coupling,
                g1,
                self.n_qubits,
                step / 2.0,
                step / (2.0 * std::f64::consts::PI),
            ));
        }
        params.validate().map_err(cfg_err)?;
        let noise = NoiseParams::new(self.kappa, self.gamma_s, self.gamma_d);
        noise.validate().map_err(cfg_err)?;
        let integrator = IntegratorConfig {
            dt: self.dt,
            stability_limit: self.stability_limit,
            ..IntegratorConfig::default()
        };
        integrator.validate().map_err(cfg_err)?;
        if let Some(d) = self.gate_duration {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config("gate_duration must be non-negative".into()));
            }
        }
        Ok(ResolvedRun {
            space,
            variant: self.model.variant(),
            params,
            simulated_time: t,
            n_steps: self.n_trotter,
            noise,
            integrator,
            options: RunOptions {
                reference: self.reference,
                intra_step: self.intra_step,
            },
            schedule_options: ScheduleOptions {
                gate_duration: self.gate_duration,
            },
        })
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_config_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 3] = [
    "dicke-dsc-fidelity",
    "dicke-usc-photons",
    "pulsed-dsc-fidelity",
];

/// Fock cutoff of the deep-strong-coupling Dicke preset; top-two-level
/// leakage stays below 1e-4 up to `g t = 1` for N ≤ 3.
pub const DSC_FOCK_CUTOFF: usize = 22;
/// Final `g t` of the deep-strong-coupling Dicke preset.
pub const DSC_T_MAX: f64 = 1.0;
/// The pulsed preset spends half of each step at `g1 = 2 g0`, so it needs a
/// higher cutoff and a shorter window for the same leakage guard.
pub const PULSED_FOCK_CUTOFF: usize = 28;
pub const PULSED_T_MAX: f64 = 0.8;
/// Ultrastrong-coupling photon preset. The N = 3 state develops displaced
/// components with up to ~9 photons, hence the cutoff.
pub const USC_FOCK_CUTOFF: usize = 26;
pub const USC_T_MAX: f64 = 1.5;

fn figure_noise(mut c: RunConfig) -> RunConfig {
    c.kappa = 1e-2;
    c.gamma_s = 0.5e-2;
    c.gamma_d = 0.5e-2;
    c
}

fn base(
    model: Model,
    n_qubits: usize,
    fock_cutoff: usize,
    n_trotter: usize,
    t_max: f64,
    coupling: f64,
) -> RunConfig {
    figure_noise(RunConfig {
        model,
        n_qubits,
        fock_cutoff,
        n_trotter,
        t_max,
        coupling,
        qubit_freq: Some(1.0 / 20.0),
        qubit_freqs: None,
        level_energies: None,
        bias: 0.0,
        pulse_coupling: None,
        kappa: 0.0,
        gamma_s: 0.0,
        gamma_d: 0.0,
        dt: None,
        stability_limit: STABILITY_LIMIT,
        gate_duration: None,
        reference: Reference::IdealExact,
        intra_step: false,
        output: None,
    })
}

/// The representative member (N = 2) of a named preset.
pub fn preset(name: &str) -> Result<RunConfig> {
    Ok(preset_family(name)?.remove(0))
}

/// Every configuration of a named preset, in a fixed order.
pub fn preset_family(name: &str) -> Result<Vec<RunConfig>> {
    match name {
        "dicke-dsc-fidelity" => Ok([2, 3]
            .into_iter()
            .flat_map(|nq| {
                [11, 9, 7]
                    .into_iter()
                    .map(move |n| base(Model::Dicke, nq, DSC_FOCK_CUTOFF, n, DSC_T_MAX, 1.5))
            })
            .collect()),
        "dicke-usc-photons" => Ok([2, 3]
            .into_iter()
            .map(|nq| base(Model::Dicke, nq, USC_FOCK_CUTOFF, 7, USC_T_MAX, 0.5))
            .collect()),
        "pulsed-dsc-fidelity" => Ok([2, 3]
            .into_iter()
            .map(|nq| {
                let mut c = base(Model::Pulsed, nq, PULSED_FOCK_CUTOFF, 13, PULSED_T_MAX, 1.5);
                c.pulse_coupling = Some(3.0);
                c
            })
            .collect()),
        other => Err(Error::Config(format!(
            "unknown preset {other:?}; known presets: {}",
            PRESETS.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            for c in preset_family(name).unwrap() {
                let r = c.resolve().unwrap();
                assert_eq!(r.space.n_qubits(), c.n_qubits);
                let s = r.schedule().unwrap();
                assert!((s.axis_coupling * s.simulated_time - c.t_max).abs() < 1e-12);
            }
        }
        assert!(preset("nope").unwrap_err().is_config_error());
    }

    #[test]
    fn figure_parameters() {
        let c = preset("dicke-dsc-fidelity").unwrap();
        let r = c.resolve().unwrap();
        assert!((r.params.per_qubit_coupling() - 1.5).abs() < 1e-14);
        assert_eq!(r.params.qubit_freqs, vec![0.05, 0.05]);
        assert_eq!(r.noise, NoiseParams::new(0.01, 0.005, 0.005));
        let ns: Vec<usize> = preset_family("dicke-dsc-fidelity")
            .unwrap()
            .iter()
            .map(|c| c.n_trotter)
            .collect();
        assert_eq!(ns, vec![11, 9, 7, 11, 9, 7]);
        let p = preset("pulsed-dsc-fidelity").unwrap().resolve().unwrap();
        let pulse = p.params.pulse.unwrap();
        assert!((pulse.peak_coupling() / pulse.lambda0 - 2.0).abs() < 1e-12);
        assert_eq!(p.n_steps, 13);
        let u = preset("dicke-usc-photons").unwrap().resolve().unwrap();
        assert!((u.params.per_qubit_coupling() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let c = preset("pulsed-dsc-fidelity").unwrap();
        let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let bad = format!("{}\nbogus = 1\n", c.to_toml());
        assert!(RunConfig::from_toml_str(&bad)
            .unwrap_err()
            .is_config_error());
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json_str(&json).unwrap(), c);
    }

    #[test]
    fn overlay_and_keys() {
        let c = preset("dicke-dsc-fidelity").unwrap();
        let d = c.with_key("n_trotter", "32").unwrap();
        assert_eq!(d.n_trotter, 32);
        assert!(c.with_key("n_trotter", "\"x\"").is_err());
        assert!(c.with_key("wrong", "1").is_err());
    }

    #[test]
    fn model_specific_keys() {
        let mut c = preset("dicke-dsc-fidelity").unwrap();
        c.model = Model::FermiBoseAnalog;
        assert!(c.resolve().is_err());
        c.level_energies = Some(vec![0.02, 0.03]);
        c.qubit_freq = None;
        let r = c.resolve().unwrap();
        assert_eq!(r.params.qubit_freqs, vec![0.04, 0.06]);
        let mut b = preset("dicke-dsc-fidelity").unwrap();
        b.model = Model::Broadband;
        b.qubit_freqs = Some(vec![0.04]);
        assert!(b.resolve().is_err());
        b.qubit_freq = None;
        b.qubit_freqs = Some(vec![0.04, 0.06]);
        b.resolve().unwrap();
        let mut d = preset("dicke-dsc-fidelity").unwrap();
        d.bias = 0.1;
        assert!(d.resolve().is_err());
        d.model = Model::Biased;
        assert_eq!(d.resolve().unwrap().variant, Variant::Biased);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut c = preset("dicke-dsc-fidelity").unwrap();
        c.kappa = -1.0;
        assert!(c.resolve().unwrap_err().is_config_error());
        let mut c = preset("dicke-dsc-fidelity").unwrap();
        c.fock_cutoff = 100_000;
        assert!(c.resolve().unwrap_err().is_config_error());
        let mut c = preset("dicke-dsc-fidelity").unwrap();
        c.stability_limit = 0.5;
        assert!(c.resolve().unwrap_err().is_config_error());
    }
}
