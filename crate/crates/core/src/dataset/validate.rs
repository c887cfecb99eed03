use std::collections::BTreeSet;

use serde::Serialize;

use super::{ActionLabel, Dataset, LabelCounts};

/// Allowed relative deviation of the measured median interval from the nominal period.
pub const RATE_TOLERANCE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamRate {
    pub trial_id: u32,
    pub stream: String,
    pub nominal: f64,
    pub estimated: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub trial_id: Option<u32>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    RateMismatch {
        trial_id: u32,
        stream: String,
        nominal: f64,
        estimated: f64,
    },
    MissingLabel {
        label: ActionLabel,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub total: usize,
    pub counts: LabelCounts,
    pub no_trials: bool,
    pub stream_rates: Vec<StreamRate>,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.warnings.is_empty()
    }

    pub fn all_labels_present(&self) -> bool {
        self.counts.missing().is_empty()
    }
}

pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let counts = d.counts();
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    let mut stream_rates = Vec::new();

    let mut seen = BTreeSet::new();
    for trial in &d.trials {
        let id = trial.trial_id;
        if !seen.insert(id) {
            violations.push(Violation {
                trial_id: Some(id),
                message: "duplicate trial id".into(),
            });
        }
        if let Err(e) = trial.scene.validate() {
            violations.push(Violation {
                trial_id: Some(id),
                message: e.to_string(),
            });
        }
        if let Err(e) = trial.hand() {
            violations.push(Violation {
                trial_id: Some(id),
                message: e.to_string(),
            });
        }
        for s in trial.streams.values() {
            if let Err(e) = s.check() {
                violations.push(Violation {
                    trial_id: Some(id),
                    message: e.to_string(),
                });
            }
            let estimated = s.estimated_rate();
            if let Some(est) = estimated {
                let nominal_dt = 1.0 / s.nominal_rate;
                let dt = 1.0 / est;
                if ((dt - nominal_dt) / nominal_dt).abs() > RATE_TOLERANCE {
                    warnings.push(Warning::RateMismatch {
                        trial_id: id,
                        stream: s.name.clone(),
                        nominal: s.nominal_rate,
                        estimated: est,
                    });
                }
            }
            stream_rates.push(StreamRate {
                trial_id: id,
                stream: s.name.clone(),
                nominal: s.nominal_rate,
                estimated,
            });
        }
    }
    if !d.trials.is_empty() {
        warnings.extend(
            counts
                .missing()
                .into_iter()
                .map(|label| Warning::MissingLabel { label }),
        );
    }

    ValidationReport {
        total: d.trials.len(),
        counts,
        no_trials: d.trials.is_empty(),
        stream_rates,
        violations,
        warnings,
    }
}
