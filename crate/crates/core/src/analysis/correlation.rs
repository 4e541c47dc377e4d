//! Pearson correlation matrices over named columns.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major coefficients.
    pub r: Vec<Vec<f64>>,
    pub samples: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.r[i][j])
    }
}

pub fn correlation_matrix(table: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix> {
    let rows = table.first().map_or(0, |c| c.1.len());
    if table.iter().any(|c| c.1.len() != rows) {
        return Err(invalid("columns must have equal length"));
    }
    if rows < 3 {
        return Err(Error::TooShort { len: rows, min: 3 });
    }
    // Centred columns scaled to unit norm.
    let mut unit = Vec::with_capacity(table.len());
    for (name, col) in table {
        let mean = col.iter().sum::<f64>() / rows as f64;
        let centred: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = col.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(norm > 1e-12 * scale.max(f64::MIN_POSITIVE)) || !norm.is_finite() {
            return Err(Error::ConstantColumn(name.clone()));
        }
        unit.push(centred.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let k = table.len();
    let mut r = vec![vec![0.0; k]; k];
    for i in 0..k {
        r[i][i] = 1.0;
        for j in 0..i {
            let dot: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
            let v = dot.clamp(-1.0, 1.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        labels: table.iter().map(|c| c.0.clone()).collect(),
        r,
        samples: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(name: &str, v: Vec<f64>) -> (String, Vec<f64>) {
        (name.to_string(), v)
    }

    #[test]
    fn exact_linear_relations() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 3.0).collect();
        let m = correlation_matrix(&[col("x", x.clone()), col("y", y), col("x2", x)]).unwrap();
        assert!((m.get("x", "y").unwrap() + 1.0).abs() < 1e-12);
        assert!((m.get("x", "x2").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.samples, 20);
    }

    #[test]
    fn constant_column_is_named() {
        let err = correlation_matrix(&[col("a", vec![1.0, 2.0, 3.0]), col("flat", vec![2.0; 3])]).unwrap_err();
        assert_eq!(err, Error::ConstantColumn("flat".into()));
        assert!(correlation_matrix(&[col("a", vec![1.0, 2.0])]).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance_and_sign_flip(
            data in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 5..40),
            scale in 0.1f64..50.0,
            shift in -100.0f64..100.0,
        ) {
            let a: Vec<f64> = data.iter().map(|d| d.0).collect();
            let b: Vec<f64> = data.iter().map(|d| d.1 + 0.5 * d.0).collect();
            let c: Vec<f64> = data.iter().map(|d| d.2).collect();
            let base = correlation_matrix(&[col("a", a.clone()), col("b", b.clone()), col("c", c.clone())]);
            prop_assume!(base.is_ok());
            let base = base.unwrap();
            let scaled: Vec<f64> = a.iter().map(|v| scale * v + shift).collect();
            let moved = correlation_matrix(&[col("a", scaled), col("b", b.clone()), col("c", c.clone())]).unwrap();
            let negated: Vec<f64> = a.iter().map(|v| -v).collect();
            let flipped = correlation_matrix(&[col("a", negated), col("b", b), col("c", c)]).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((base.r[i][j] - moved.r[i][j]).abs() < 1e-9);
                    let sign = if (i == 0) != (j == 0) { -1.0 } else { 1.0 };
                    prop_assert!((base.r[i][j] - sign * flipped.r[i][j]).abs() < 1e-9);
                    prop_assert!(base.r[i][j].abs() <= 1.0);
                    prop_assert_eq!(base.r[i][j], base.r[j][i]);
                }
            }
        }
    }
}
