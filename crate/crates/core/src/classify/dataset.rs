use ndarray::{concatenate, Array2, Axis};

use crate::{Error, Result};

/// Per-pixel features (`N×B`) with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f32>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Array2<f32>, labels: Vec<u8>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows for {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidInput("dataset has no features".into()));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not 0 or 1")));
        }
        Ok(Self { features, labels })
    }

    /// Row-major convenience constructor.
    pub fn from_rows(rows: &[Vec<f32>], labels: Vec<u8>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        let flat: Vec<f32> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), width), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f32> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(Error::SingleClass)
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stacks datasets with equal feature width.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.n_features() != first.n_features()) {
            return Err(Error::Dimension("datasets differ in feature width".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = concatenate(Axis(0), &views).map_err(|e| Error::Dimension(e.to_string()))?;
        let labels = parts
            .iter()
            .flat_map(|p| p.labels.iter().copied())
            .collect();
        Ok(Dataset { features, labels })
    }

    /// Copy with every feature multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Dataset {
        Dataset {
            features: &self.features * factor,
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks() {
        assert!(Dataset::from_rows(&[vec![0.1, 0.2]], vec![1]).is_ok());
        assert!(Dataset::from_rows(&[vec![0.1, 0.2]], vec![2]).is_err());
        assert!(Dataset::from_rows(&[vec![0.1, f32::NAN]], vec![0]).is_err());
        assert!(Dataset::from_rows(&[vec![0.1], vec![0.1, 0.2]], vec![0, 1]).is_err());
        assert!(Dataset::from_rows(&[vec![0.1]], vec![0, 1]).is_err());
    }

    #[test]
    fn select_and_concat() {
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0]).unwrap();
        let s = d.select(&[2, 1]);
        assert_eq!(s.labels(), &[0, 1]);
        assert_eq!(s.features()[[0, 0]], 2.0);
        let c = Dataset::concat(&[d.clone(), s]).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.has_both_classes());
        assert!(!d.select(&[0, 2]).has_both_classes());
    }
}
