//! Learnable per-class centers; they double as the linear classifier.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::Mat;

/// The center matrix C, one row per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCenters {
    mat: Mat,
}

impl ClassCenters {
    pub fn new(mat: Mat) -> Result<Self> {
        if mat.rows() < 2 {
            return Err(CoreError::InvalidConfig(
                "at least two class centers are required".into(),
            ));
        }
        if !mat.is_finite() {
            return Err(CoreError::NonFinite("class centers"));
        }
        Ok(ClassCenters { mat })
    }

    pub fn n_classes(&self) -> usize {
        self.mat.rows()
    }

    pub fn dim(&self) -> usize {
        self.mat.cols()
    }

    pub fn center(&self, k: usize) -> &[f64] {
        self.mat.row(k)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }

    /// Mutable access for optimizer updates. Finiteness is re-checked by the
    /// training loop's loss guard rather than per write.
    pub fn as_mat_mut(&mut self) -> &mut Mat {
        &mut self.mat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_two_classes() {
        let m = Mat::from_rows(vec![vec![1.0, 0.0]]).unwrap();
        assert!(ClassCenters::new(m).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let m = Mat::from_rows(vec![vec![1.0], vec![f64::NAN]]).unwrap();
        assert!(ClassCenters::new(m).is_err());
    }

    #[test]
    fn row_access() {
        let m = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = ClassCenters::new(m).unwrap();
        assert_eq!(c.center(1), &[3.0, 4.0]);
        assert_eq!(c.n_classes(), 2);
        assert_eq!(c.dim(), 2);
    }
}
