//! The four-diode transmitter model shared by synthesis, ingestion and analysis.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leakage::PolarizationErrors;
use crate::signal::{SampledDistribution1D, SpatialMode2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Polarization::H, Polarization::V, Polarization::D, Polarization::A];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarization::H => "H",
            Polarization::V => "V",
            Polarization::D => "D",
            Polarization::A => "A",
        }
    }

    pub fn parse(s: &str) -> Option<Polarization> {
        match s.trim() {
            "H" | "h" => Some(Polarization::H),
            "V" | "v" => Some(Polarization::V),
            "D" | "d" => Some(Polarization::D),
            "A" | "a" => Some(Polarization::A),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the two preparation bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "HV")]
    HV,
    #[serde(rename = "DA")]
    DA,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::HV, Basis::DA];

    pub fn labels(self) -> (Polarization, Polarization) {
        match self {
            Basis::HV => (Polarization::H, Polarization::V),
            Basis::DA => (Polarization::D, Polarization::A),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Basis::HV => "HV",
            Basis::DA => "DA",
        }
    }
}

/// A measured source parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Wavelength,
    Pulse,
    Arrival,
    Spatial,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::Wavelength, Parameter::Pulse, Parameter::Arrival, Parameter::Spatial];

    pub fn as_str(self) -> &'static str {
        match self {
            Parameter::Wavelength => "wavelength",
            Parameter::Pulse => "pulse",
            Parameter::Arrival => "arrival",
            Parameter::Spatial => "spatial",
        }
    }

    pub fn parse(s: &str) -> Option<Parameter> {
        match s.trim() {
            "wavelength" => Some(Parameter::Wavelength),
            "pulse" | "pulse_width" => Some(Parameter::Pulse),
            "arrival" | "arrival_time" => Some(Parameter::Arrival),
            "spatial" | "spatial_mode" => Some(Parameter::Spatial),
            _ => None,
        }
    }

    pub fn is_spatial(self) -> bool {
        self == Parameter::Spatial
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What Eve can observe about one diode for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Profile(SampledDistribution1D),
    Mode(SpatialMode2D),
}

impl Observation {
    pub fn as_profile(&self) -> Option<&SampledDistribution1D> {
        match self {
            Observation::Profile(d) => Some(d),
            Observation::Mode(_) => None,
        }
    }

    pub fn as_mode(&self) -> Option<&SpatialMode2D> {
        match self {
            Observation::Mode(m) => Some(m),
            Observation::Profile(_) => None,
        }
    }

    pub fn is_normalized(&self) -> bool {
        match self {
            Observation::Profile(d) => d.is_normalized(),
            Observation::Mode(m) => m.is_normalized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiodeRecord {
    pub polarization: Polarization,
    /// Metadata only; no leakage estimator uses it.
    pub mean_photon_number: f64,
    pub parameters: BTreeMap<Parameter, Observation>,
}

impl DiodeRecord {
    pub fn new(polarization: Polarization, mean_photon_number: f64) -> Self {
        DiodeRecord { polarization, mean_photon_number, parameters: BTreeMap::new() }
    }

    pub fn with(mut self, parameter: Parameter, observation: Observation) -> Self {
        self.parameters.insert(parameter, observation);
        self
    }
}

/// Four diodes indexed by polarization, plus the per-basis polarization errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceEnsemble {
    diodes: Vec<DiodeRecord>,
    pub polarization_errors: PolarizationErrors,
    pub clock_period_ns: f64,
    /// Non-fatal notes collected while building (clamped values and the like).
    pub warnings: Vec<String>,
}

impl SourceEnsemble {
    pub fn new(
        diodes: Vec<DiodeRecord>,
        polarization_errors: PolarizationErrors,
        clock_period_ns: f64,
    ) -> Result<Self> {
        let mut slots: [Option<DiodeRecord>; 4] = Default::default();
        for d in diodes {
            let i = d.polarization.index();
            if slots[i].is_some() {
                return Err(Error::InvalidEnsemble(format!("duplicate diode {}", d.polarization)));
            }
            slots[i] = Some(d);
        }
        let mut ordered = Vec::with_capacity(4);
        for (slot, label) in slots.into_iter().zip(Polarization::ALL) {
            ordered.push(slot.ok_or_else(|| Error::InvalidEnsemble(format!("missing diode {label}")))?);
        }
        if !(clock_period_ns > 0.0) {
            return Err(Error::NonPositivePeriod(clock_period_ns));
        }
        Ok(SourceEnsemble { diodes: ordered, polarization_errors, clock_period_ns, warnings: Vec::new() })
    }

    pub fn diode(&self, p: Polarization) -> &DiodeRecord {
        &self.diodes[p.index()]
    }

    pub fn diode_mut(&mut self, p: Polarization) -> &mut DiodeRecord {
        &mut self.diodes[p.index()]
    }

    pub fn diodes(&self) -> &[DiodeRecord] {
        &self.diodes
    }

    pub fn observation(&self, p: Polarization, parameter: Parameter) -> Result<&Observation> {
        self.diode(p).parameters.get(&parameter).ok_or_else(|| Error::MissingParameter(parameter.to_string()))
    }

    /// Parameters recorded for all four diodes, in canonical order.
    pub fn parameters(&self) -> Vec<Parameter> {
        Parameter::ALL.into_iter().filter(|p| self.diodes.iter().all(|d| d.parameters.contains_key(p))).collect()
    }
}
