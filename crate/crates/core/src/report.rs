//! Whole-ensemble analysis and the JSON report document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Basis, Observation, Parameter, SourceEnsemble};
use crate::error::{Error, Result};
use crate::leakage::{
    basis_pair, basis_report, joint_leakage, key_rate_bound, polarization_leakage, qber_to_iab, BasisPair, BasisReport,
    Direction, EstimatorOptions, Method, DEFAULT_CELL_BUDGET,
};
use crate::xcorr::downsample_2d;

pub const SCHEMA_VERSION: u32 = 1;
/// Joint leakage is only attempted for this many parameters or fewer.
pub const MAX_JOINT_PARAMETERS: usize = 3;
/// Per-parameter cap on 1D bins in the joint grid.
pub const MAX_JOINT_BINS: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFingerprint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InputFingerprint {
    pub fn manifest(path: impl Into<String>) -> Self {
        InputFingerprint { manifest: Some(path.into()), preset: None, seed: None }
    }

    pub fn preset(name: impl Into<String>, seed: u64) -> Self {
        InputFingerprint { manifest: None, preset: Some(name.into()), seed: Some(seed) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSection {
    pub parameter: Parameter,
    pub results: Vec<BasisReport>,
}

impl ParameterSection {
    pub fn result(&self, method: Method) -> Option<&BasisReport> {
        self.results.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationSection {
    pub e_hv: f64,
    pub e_da: f64,
    pub delta_e: f64,
    pub leakage_proxy: f64,
    pub proxy_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSection {
    pub parameters: Vec<Parameter>,
    pub hv: f64,
    pub da: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSection {
    /// Always `exact`.
    pub method: Method,
    /// Max-over-basis exact leakage per parameter.
    pub components: BTreeMap<Parameter, f64>,
    /// Sum of `components`.
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_independent: Option<JointSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateSection {
    pub qber: f64,
    pub direction: Direction,
    pub i_ab: f64,
    pub i_ae: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i_be: Option<f64>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool_version: String,
    pub input: InputFingerprint,
    pub parameters: Vec<ParameterSection>,
    pub polarization: PolarizationSection,
    pub budget: BudgetSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key_rate: Option<KeyRateSection>,
    pub warnings: Vec<String>,
}

impl ReportDocument {
    pub fn section(&self, parameter: Parameter) -> Option<&ParameterSection> {
        self.parameters.iter().find(|s| s.parameter == parameter)
    }

    /// Every leakage number in the report, labeled, in document order.
    pub fn values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for s in &self.parameters {
            for r in &s.results {
                for b in Basis::ALL {
                    let label = format!("{}/{}/{}", s.parameter, r.method.as_str(), b.as_str());
                    out.push((label, r.get(b).bits_per_pulse));
                }
            }
        }
        out.push(("polarization/delta_e".into(), self.polarization.delta_e));
        out.push(("budget/total".into(), self.budget.total));
        if let Some(j) = &self.budget.joint_independent {
            out.push(("budget/joint".into(), j.max));
        }
        out
    }

    /// Attaches the `I(A:B) - I(A:E)` section using the exact budget as `I(A:E)`.
    pub fn with_key_rate(mut self, qber: f64, direction: Direction, i_be: Option<f64>) -> Result<Self> {
        let i_ab = qber_to_iab(qber)?;
        let i_ae = self.budget.total.min(1.0);
        let rate = key_rate_bound(i_ab, i_ae, direction, i_be)?;
        self.key_rate = Some(KeyRateSection { qber, direction, i_ab, i_ae, i_be, rate });
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    /// Empty means every parameter present in the ensemble.
    pub parameters: Vec<Parameter>,
    pub methods: Vec<Method>,
    pub estimator: EstimatorOptions,
    pub joint: bool,
    pub cell_budget: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            parameters: Vec::new(),
            methods: vec![Method::Exact, Method::Eq8Literal, Method::Guessing],
            estimator: EstimatorOptions::default(),
            joint: false,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

fn coarsen_pair(pair: &BasisPair, target_cells: usize) -> Result<BasisPair> {
    match (pair.dist0(), pair.dist1()) {
        (Observation::Profile(a), Observation::Profile(b)) => {
            let target = target_cells.min(MAX_JOINT_BINS);
            let factor = a.axis().count().div_ceil(target.max(1));
            BasisPair::new(
                pair.basis,
                Observation::Profile(a.coarsen(factor)?),
                Observation::Profile(b.coarsen(factor)?),
                pair.prior0(),
            )
        }
        (Observation::Mode(a), Observation::Mode(b)) => {
            let side = ((target_cells as f64).sqrt().floor() as usize).max(1);
            let factor = a.rows().max(a.cols()).div_ceil(side);
            BasisPair::new(
                pair.basis,
                Observation::Mode(downsample_2d(a, factor)?),
                Observation::Mode(downsample_2d(b, factor)?),
                pair.prior0(),
            )
        }
        _ => Err(Error::KindMismatch),
    }
}

/// Joint leakage over `parameters` for one basis, coarsening every grid so
/// the product stays within `cell_budget`.
pub fn joint_for_basis(
    ensemble: &SourceEnsemble,
    parameters: &[Parameter],
    basis: Basis,
    prior0: f64,
    cell_budget: u64,
) -> Result<f64> {
    if parameters.len() > MAX_JOINT_PARAMETERS {
        return Err(Error::TooManyParameters { cells: u128::MAX, budget: cell_budget });
    }
    let per = (cell_budget as f64).powf(1.0 / parameters.len().max(1) as f64).floor() as usize;
    let pairs = parameters
        .iter()
        .map(|&p| coarsen_pair(&basis_pair(ensemble, p, basis, prior0)?, per))
        .collect::<Result<Vec<_>>>()?;
    Ok(joint_leakage(&pairs, cell_budget)?.bits_per_pulse)
}

/// Runs every requested parameter and method over the ensemble.
///
/// Parameters are evaluated on separate threads; the document is
/// assembled in canonical parameter order so output does not depend on
/// scheduling.
pub fn analyze(ensemble: &SourceEnsemble, opts: &AnalysisOptions, input: InputFingerprint) -> Result<ReportDocument> {
    let parameters = if opts.parameters.is_empty() {
        ensemble.parameters()
    } else {
        let mut ps = opts.parameters.clone();
        ps.sort();
        ps.dedup();
        ps
    };
    let mut methods = opts.methods.clone();
    methods.sort();
    methods.dedup();

    let jobs: Vec<Result<(ParameterSection, BasisReport)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = parameters
            .iter()
            .map(|&parameter| {
                let methods = &methods;
                scope.spawn(move || -> Result<(ParameterSection, BasisReport)> {
                    let mut results = Vec::with_capacity(methods.len());
                    for &m in methods {
                        results.push(basis_report(ensemble, parameter, m, &opts.estimator)?);
                    }
                    let exact = match results.iter().find(|r| r.method == Method::Exact) {
                        Some(r) => r.clone(),
                        None => basis_report(ensemble, parameter, Method::Exact, &opts.estimator)?,
                    };
                    Ok((ParameterSection { parameter, results }, exact))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("analysis thread panicked")).collect()
    });

    let mut sections = Vec::with_capacity(jobs.len());
    let mut components = BTreeMap::new();
    let mut warnings = ensemble.warnings.clone();
    for job in jobs {
        let (section, exact) = job?;
        components.insert(section.parameter, exact.max);
        for r in &section.results {
            for b in Basis::ALL {
                let res = r.get(b);
                if res.eq8_negative() {
                    warnings.push(format!(
                        "eq8: {} {} raw value {:.6} is negative; reported as 0",
                        section.parameter,
                        b.as_str(),
                        res.raw()
                    ));
                }
            }
        }
        sections.push(section);
    }
    let total = components.values().sum();

    let joint_independent = if opts.joint {
        if parameters.len() > MAX_JOINT_PARAMETERS {
            warnings.push(format!(
                "joint: {} parameters requested, at most {MAX_JOINT_PARAMETERS} supported; skipped",
                parameters.len()
            ));
            None
        } else {
            let run = |b| joint_for_basis(ensemble, &parameters, b, opts.estimator.prior0, opts.cell_budget);
            match (run(Basis::HV), run(Basis::DA)) {
                (Ok(hv), Ok(da)) => Some(JointSection { parameters: parameters.clone(), hv, da, max: hv.max(da) }),
                (Err(e), _) | (_, Err(e)) => {
                    warnings.push(format!("joint: skipped ({e})"));
                    None
                }
            }
        }
    } else {
        None
    };

    let pol = polarization_leakage(&ensemble.polarization_errors);
    Ok(ReportDocument {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input,
        parameters: sections,
        polarization: PolarizationSection {
            e_hv: ensemble.polarization_errors.e_hv,
            e_da: ensemble.polarization_errors.e_da,
            delta_e: pol.delta_e,
            leakage_proxy: pol.leakage_proxy,
            proxy_constant: pol.proxy_constant,
        },
        budget: BudgetSection { method: Method::Exact, components, total, joint_independent },
        key_rate: None,
        warnings,
    })
}
