//! Observational causal data: one record is (covariates x, binary treatment t,
//! factual outcome y).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Binary treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Treatment {
    Control,
    Treated,
}

pub const ARMS: [Treatment; 2] = [Treatment::Control, Treatment::Treated];

impl Treatment {
    pub fn index(self) -> usize {
        match self {
            Treatment::Control => 0,
            Treatment::Treated => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Treatment::Control),
            1 => Ok(Treatment::Treated),
            other => Err(Error::invalid(format!("treatment must be 0 or 1, got {other}"))),
        }
    }

    pub fn as_int(self) -> u8 {
        self.index() as u8
    }
}

/// One observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalRecord<T> {
    pub x: Vec<T>,
    pub t: Treatment,
    pub y: T,
}

/// An ordered collection of records with a common covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDataset<T> {
    records: Vec<CausalRecord<T>>,
    dim: usize,
}

impl<T: Scalar> CausalDataset<T> {
    pub fn new(records: Vec<CausalRecord<T>>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::invalid("dataset must contain at least one record"));
        };
        let dim = first.x.len();
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.x.len(),
                });
            }
            if r.x.iter().any(|v| !v.is_finite()) || !r.y.is_finite() {
                return Err(Error::invalid(format!("non-finite value in record {i}")));
            }
        }
        Ok(CausalDataset { records, dim })
    }

    pub fn records(&self) -> &[CausalRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> Vec<T> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn count(&self, arm: Treatment) -> usize {
        self.records.iter().filter(|r| r.t == arm).count()
    }

    /// Outcomes of one arm, in record order.
    pub fn arm_outcomes(&self, arm: Treatment) -> Vec<T> {
        self.records
            .iter()
            .filter(|r| r.t == arm)
            .map(|r| r.y)
            .collect()
    }

    /// Per-dimension mean and standard deviation of the covariates.
    /// Dimensions with zero spread get unit scale so z-scoring is a no-op.
    pub fn covariate_moments(&self) -> (Vec<T>, Vec<T>) {
        let n = T::from(self.len()).unwrap();
        let mut mean = vec![T::zero(); self.dim];
        for r in &self.records {
            for (m, &v) in mean.iter_mut().zip(&r.x) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }
        let mut sd = vec![T::zero(); self.dim];
        for r in &self.records {
            for ((s, &v), &m) in sd.iter_mut().zip(&r.x).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        for s in &mut sd {
            *s = (*s / n).sqrt();
            if !(*s > T::zero()) {
                *s = T::one();
            }
        }
        (mean, sd)
    }
}
