//! JSON form of a scenario. Nonlinear evaluators live in code and are
//! looked up by name; linear systems carry their matrices.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenarios::{builtin, scenario_linear, LinearDecoupling};
use super::Scenario;
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Vector};

/// Matrices of a linear scenario as arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSpec {
    #[serde(rename = "E")]
    pub e: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "A1", default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub reference_points: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearSpec>,
}

fn matrix_from_rows(label: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Validation(format!("{label}: rows have different lengths")));
    }
    Ok(Matrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

impl ScenarioDocument {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            name: s.name.clone(),
            dimension: s.dim(),
            reference_points: s
                .reference_points
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().copied().collect()))
                .collect(),
            linear: s.linear.clone(),
        }
    }

    pub fn into_scenario(self) -> Result<Scenario> {
        let mut scenario = match &self.linear {
            Some(spec) => {
                let a1 = spec.a1.as_deref().map(|r| matrix_from_rows("A1", r)).transpose()?;
                scenario_linear(
                    &self.name,
                    &matrix_from_rows("E", &spec.e)?,
                    &matrix_from_rows("H", &spec.h)?,
                    &LinearDecoupling {
                        q: matrix_from_rows("Q", &spec.q)?,
                        p: matrix_from_rows("P", &spec.p)?,
                        a1,
                    },
                )?
            }
            None => builtin(&self.name)
                .ok_or_else(|| Error::Validation(format!("unknown scenario '{}'", self.name)))?,
        };
        if scenario.dim() != self.dimension {
            return Err(Error::Validation(format!(
                "document dimension {} does not match scenario dimension {}",
                self.dimension,
                scenario.dim()
            )));
        }
        for (name, p) in self.reference_points {
            if p.len() != self.dimension {
                return Err(Error::Validation(format!("reference point '{name}' has wrong length")));
            }
            let v = Vector::from_vec(p);
            if !scenario.system.domain.contains(&v) {
                return Err(Error::Validation(format!("reference point '{name}' is outside the domain")));
            }
            match scenario.reference_points.iter_mut().find(|(k, _)| *k == name) {
                Some(slot) => slot.1 = v,
                None => scenario.reference_points.push((name, v)),
            }
        }
        Ok(scenario)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)?.into_scenario()
    }
}
