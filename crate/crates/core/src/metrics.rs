//! Accuracy, confusion matrices, and cross-validation summaries.

use std::fmt;
use std::io::Write;

use crate::classifier::Cnn;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        ConfusionMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            n,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.n || predicted >= self.n {
            return Err(Error::Index(format!(
                "({truth}, {predicted}) outside a {n}x{n} confusion matrix",
                n = self.n
            )));
        }
        self.counts[truth * self.n + predicted] += 1;
        Ok(())
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.n..(truth + 1) * self.n]
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "true\\pred")?;
        for j in 0..self.n {
            write!(f, "\t{j}")?;
        }
        writeln!(f)?;
        for i in 0..self.n {
            write!(f, "{i}")?;
            for c in self.row(i) {
                write!(f, "\t{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// trace / total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// One count per sample at (label, predicted class).
pub fn evaluate(model: &Cnn, samples: &[(Tensor, usize)]) -> Result<ConfusionMatrix> {
    use rayon::prelude::*;
    let predictions: Vec<usize> = samples
        .par_iter()
        .map(|(x, _)| model.predict(x))
        .collect::<Result<_>>()?;
    let mut cm = ConfusionMatrix::new(model.config().n_classes);
    for ((_, label), p) in samples.iter().zip(predictions) {
        cm.record(*label, p)
            .map_err(|_| Error::Data(format!("label {label} out of range")))?;
    }
    Ok(cm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation (divisor n).
    pub sd: f64,
}

pub fn crossval_aggregate(fold_accuracies: &[f64]) -> Result<CrossValReport> {
    if fold_accuracies.is_empty() {
        return Err(Error::Argument("no fold accuracies to aggregate".into()));
    }
    // sorted summation makes the result independent of input order
    let mut sorted = fold_accuracies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let mut sq: Vec<f64> = sorted.iter().map(|a| (a - mean) * (a - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let sd = (sq.iter().sum::<f64>() / n).sqrt();
    Ok(CrossValReport {
        fold_accuracies: fold_accuracies.to_vec(),
        mean,
        sd,
    })
}

impl CrossValReport {
    /// `fold,accuracy` rows, then `mean` and `sd` rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "fold,accuracy")?;
        for (i, a) in self.fold_accuracies.iter().enumerate() {
            writeln!(out, "{i},{a}")?;
        }
        writeln!(out, "mean,{}", self.mean)?;
        writeln!(out, "sd,{}", self.sd)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_cases() {
        let d = ConfusionMatrix::from_rows(&[vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 7]]).unwrap();
        assert_eq!(accuracy(&d).unwrap(), 1.0);
        let h = ConfusionMatrix::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(accuracy(&h).unwrap(), 0.5);
        assert!(matches!(accuracy(&ConfusionMatrix::new(3)), Err(Error::Argument(_))));
        assert!(ConfusionMatrix::from_rows(&[vec![1, 1]]).is_err());
    }

    #[test]
    fn record_bounds() {
        let mut cm = ConfusionMatrix::new(2);
        cm.record(1, 0).unwrap();
        assert!(cm.record(2, 0).is_err());
        assert_eq!(cm.get(1, 0), 1);
        assert_eq!(cm.total(), 1);
        assert_eq!(cm.trace(), 0);
    }

    #[test]
    fn aggregate_cases() {
        let r = crossval_aggregate(&[1.0; 10]).unwrap();
        assert_eq!((r.mean, r.sd), (1.0, 0.0));
        let r = crossval_aggregate(&[0.9, 1.0]).unwrap();
        assert!((r.mean - 0.95).abs() < 1e-15);
        assert!((r.sd - 0.05).abs() < 1e-12);
        assert!(matches!(crossval_aggregate(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn aggregate_permutation_invariant() {
        let a = [0.75, 0.9166666666666666, 1.0, 0.8333333333333334, 0.6666666666666666, 0.9];
        let base = crossval_aggregate(&a).unwrap();
        let mut b = a;
        b.reverse();
        b.swap(1, 4);
        let other = crossval_aggregate(&b).unwrap();
        assert_eq!((base.mean, base.sd), (other.mean, other.sd));
    }

    #[test]
    fn report_csv() {
        let r = crossval_aggregate(&[0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "fold,accuracy\n0,0.5\n1,1\nmean,0.75\nsd,0.25\n");
    }
}
