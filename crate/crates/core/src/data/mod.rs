//! Datasets, attribute-type detection, transforms and synthetic generators.

mod generate;
mod io;

use ndarray::Array2;

use crate::edm::{AttributeKind, FamilySpec};
use crate::error::{Error, Result};

pub use generate::{
    generate_heterogeneous, generate_homogeneous_1d, qq_quantiles, quantile, sample_from_params, sample_member,
    Generated, GeneratorSpec, Member,
};
pub use io::{
    read_assignments, read_csv, read_model, write_assignments, write_csv, write_model, CsvOptions, ModelFile,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// N×J values.
    pub values: Array2<f64>,
    pub kinds: Vec<AttributeKind>,
    pub labels: Option<Vec<usize>>,
    pub names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(values: Array2<f64>) -> Dataset {
        let kinds = detect_kinds(&values);
        Dataset {
            values,
            kinds,
            labels: None,
            names: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Values ready for modelling (unit-interval columns logit-transformed)
    /// and the family attached to each column.
    pub fn prepare(&self) -> Result<(Array2<f64>, Vec<FamilySpec>)> {
        let mut values = self.values.clone();
        let mut families = Vec::with_capacity(self.kinds.len());
        for (j, kind) in self.kinds.iter().enumerate() {
            if *kind == AttributeKind::UnitInterval {
                let col: Vec<f64> = values.column(j).to_vec();
                let t = logit(&col)?;
                values.column_mut(j).assign(&ndarray::Array1::from(t));
            }
            families.push(FamilySpec::for_kind(kind.modelled())?);
        }
        Ok((values, families))
    }
}

fn is_integer(v: f64) -> bool {
    (v - v.round()).abs() < 1e-9
}

/// Kind of a single column.
pub fn detect_kind(column: &[f64]) -> AttributeKind {
    let discrete = column.iter().all(|v| is_integer(*v));
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match (discrete, min) {
        (true, m) if m > 0.0 => AttributeKind::PositiveDiscrete,
        (true, m) if m >= 0.0 => AttributeKind::NonNegativeDiscrete,
        (true, _) => AttributeKind::RealContinuous,
        (false, m) if m > 0.0 && max < 1.0 => AttributeKind::UnitInterval,
        (false, m) if m > 0.0 => AttributeKind::PositiveContinuous,
        (false, m) if m >= 0.0 => AttributeKind::NonNegativeContinuous,
        _ => AttributeKind::RealContinuous,
    }
}

pub fn detect_kinds(values: &Array2<f64>) -> Vec<AttributeKind> {
    values.columns().into_iter().map(|c| detect_kind(&c.to_vec())).collect()
}

pub fn logit(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&x| {
            if x > 0.0 && x < 1.0 {
                Ok((x / (1.0 - x)).ln())
            } else {
                Err(Error::domain(format!("logit needs values strictly inside (0, 1), got {x}")))
            }
        })
        .collect()
}

pub fn inverse_logit(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&z| {
            if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            }
        })
        .collect()
}
