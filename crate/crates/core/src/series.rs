use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances at iteration `n` in the operator, L^1 and L^2 norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub dist_op: f64,
    #[serde(rename = "dist_L1")]
    pub dist_l1: f64,
    #[serde(rename = "dist_L2")]
    pub dist_l2: f64,
}

/// A labelled sequence of distances with strictly increasing `n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub label: String,
    pub points: Vec<SeriesPoint>,
}

impl ConvergenceSeries {
    pub fn new(label: impl Into<String>) -> Self {
        ConvergenceSeries {
            label: label.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, point: SeriesPoint) -> Result<()> {
        if let Some(last) = self.points.last() {
            if point.n <= last.n {
                return Err(Error::Precondition(format!(
                    "series index {} does not increase past {}",
                    point.n, last.n
                )));
            }
        }
        for v in [point.dist_op, point.dist_l1, point.dist_l2] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Precondition(format!("invalid distance {v}")));
            }
        }
        self.points.push(point);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&SeriesPoint> {
        self.points.last()
    }

    /// Operator-norm distance at iteration `n`, if recorded.
    pub fn dist_op_at(&self, n: usize) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.dist_op)
    }

    /// First iteration whose operator-norm distance is below `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.points.iter().find(|p| p.dist_op < tol).map(|p| p.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(n: usize, d: f64) -> SeriesPoint {
        SeriesPoint {
            n,
            dist_op: d,
            dist_l1: d,
            dist_l2: d,
        }
    }

    #[test]
    fn enforces_order_and_sign() {
        let mut s = ConvergenceSeries::new("x");
        s.push(pt(0, 1.0)).unwrap();
        s.push(pt(2, 0.5)).unwrap();
        assert!(s.push(pt(2, 0.1)).is_err());
        assert!(s.push(pt(3, -0.1)).is_err());
        assert!(s.push(pt(3, f64::NAN)).is_err());
        assert_eq!(s.first_below(0.6), Some(2));
        assert_eq!(s.dist_op_at(0), Some(1.0));
    }

    #[test]
    fn json_field_names() {
        let v = serde_json::to_value(pt(1, 0.25));
        let v = v.unwrap();
        assert!(v.get("dist_L1").is_some() && v.get("dist_L2").is_some());
    }
}
