//! Confusion matrices, accuracy/sensitivity/specificity, information
//! transfer rate and the accuracy/ITR sweep over window fractions.

use std::fmt::Write as _;

use crate::eog::{truncate_epoch, Epoch};
use crate::error::{param, Result};

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        Self { counts: vec![vec![0; k]; k], class_names }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(param("confusion matrices differ in class count"));
        }
        for (a, b) in self.counts.iter_mut().flatten().zip(other.counts.iter().flatten()) {
            *a += b;
        }
        Ok(())
    }

    /// CSV with a header row of predicted classes and one row per true class.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth\\pred");
        for n in &self.class_names {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for (n, row) in self.class_names.iter().zip(&self.counts) {
            s.push_str(n);
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

fn default_names(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// Counts `(truth, prediction)` pairs into a `num_classes`-square matrix.
pub fn confusion(preds: &[usize], truths: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    confusion_named(preds, truths, default_names(num_classes))
}

pub fn confusion_named(preds: &[usize], truths: &[usize], class_names: Vec<String>) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(param(format!("{} predictions for {} truths", preds.len(), truths.len())));
    }
    let mut cm = ConfusionMatrix::new(class_names);
    let k = cm.num_classes();
    for (i, (&p, &t)) in preds.iter().zip(truths).enumerate() {
        if p >= k || t >= k {
            return Err(param(format!("pair {i}: class ids ({t}, {p}) outside 0..{k}")));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

/// Percentages; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn pct(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Accuracy, plus sensitivity and specificity of `positive_class` when the
/// matrix is binary.
pub fn metrics(cm: &ConfusionMatrix, positive_class: Option<usize>) -> Result<Metrics> {
    let accuracy = pct(cm.correct(), cm.total());
    let Some(pos) = positive_class else {
        return Ok(Metrics { accuracy, sensitivity: None, specificity: None });
    };
    if cm.num_classes() != 2 || pos > 1 {
        return Err(param("sensitivity/specificity need a 2-class matrix and positive class 0 or 1"));
    }
    let neg = 1 - pos;
    let (tp, fn_) = (cm.counts[pos][pos], cm.counts[pos][neg]);
    let (tn, fp) = (cm.counts[neg][neg], cm.counts[neg][pos]);
    Ok(Metrics { accuracy, sensitivity: pct(tp, tp + fn_), specificity: pct(tn, tn + fp) })
}

/// One-vs-rest sensitivity and specificity averaged over classes that have
/// a defined value.
pub fn macro_metrics(cm: &ConfusionMatrix) -> Metrics {
    let k = cm.num_classes();
    let total = cm.total();
    let (mut sens, mut spec) = (Vec::new(), Vec::new());
    for c in 0..k {
        let tp = cm.counts[c][c];
        let row: u64 = cm.counts[c].iter().sum();
        let col: u64 = cm.counts.iter().map(|r| r[c]).sum();
        let tn = total - row - col + tp;
        sens.extend(pct(tp, row));
        spec.extend(pct(tn, total - row));
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Metrics { accuracy: pct(cm.correct(), total), sensitivity: mean(&sens), specificity: mean(&spec) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItrPoint {
    pub t: f64,
    pub p: f64,
    pub m: usize,
    /// bit/min, never negative.
    pub itr: f64,
    /// `p < 1/m`; the raw rate was negative and has been clamped.
    pub below_chance: bool,
}

/// Information transfer rate in bit/min for accuracy `p` over `m` classes
/// with one decision per `t` seconds:
///
/// `60 · (log2 m + p log2 p + (1−p) log2((1−p)/(m−1))) / t`
///
/// with `0·log 0 = 0`. Clamped at 0 below chance.
pub fn itr_point(p: f64, m: usize, t: f64) -> Result<ItrPoint> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(param(format!("accuracy must lie in (0, 1], got {p}")));
    }
    if m < 2 {
        return Err(param(format!("need at least 2 classes, got {m}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(param(format!("window length must be positive, got {t}")));
    }
    let mf = m as f64;
    let mut bits = mf.log2() + p * p.log2();
    if p < 1.0 {
        bits += (1.0 - p) * ((1.0 - p) / (mf - 1.0)).log2();
    }
    let raw = 60.0 * bits / t;
    let below_chance = p < 1.0 / mf;
    if below_chance {
        log::warn!("accuracy {p} is below chance for {m} classes; ITR clamped to 0");
    }
    // exact chance level cancels to rounding noise
    let itr = if below_chance || raw < 0.0 { 0.0 } else { raw };
    Ok(ItrPoint { t, p, m, itr, below_chance })
}

pub fn itr(p: f64, m: usize, t: f64) -> Result<f64> {
    itr_point(p, m, t).map(|x| x.itr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub accuracy: f64,
    pub itr: ItrPoint,
}

/// Accuracy and ITR for each window fraction.
///
/// Every epoch is truncated to the fraction and `predict` classifies the
/// truncated set (it may train a model for that input length first).
pub fn itr_curve<F>(epochs: &[Epoch], fractions: &[f64], window_s: f64, num_classes: usize, mut predict: F) -> Result<Vec<CurvePoint>>
where
    F: FnMut(f64, &[Epoch]) -> Result<Vec<usize>>,
{
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let cut: Vec<Epoch> = epochs.iter().map(|e| truncate_epoch(e, f)).collect::<Result<_>>()?;
        let preds = predict(f, &cut)?;
        let truths: Vec<usize> = cut.iter().map(|e| e.label.class_id()).collect();
        let cm = confusion(&preds, &truths, num_classes)?;
        let accuracy = cm.correct() as f64 / cm.total().max(1) as f64;
        let itr = itr_point(accuracy.max(f64::MIN_POSITIVE), num_classes, f * window_s)?;
        out.push(CurvePoint { fraction: f, accuracy, itr });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_basics() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let cm = confusion(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert_eq!(metrics(&cm, None).unwrap().accuracy, None);
        let cm = confusion(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert!((metrics(&cm, None).unwrap().accuracy.unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert!(confusion(&[0], &[], 2).is_err());
        assert!(confusion(&[5], &[0], 2).is_err());
    }

    #[test]
    fn binary_metrics() {
        let perfect = confusion(&[0, 1, 1, 0], &[0, 1, 1, 0], 2).unwrap();
        let m = metrics(&perfect, Some(1)).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (Some(100.0), Some(100.0), Some(100.0)));
        let neg = confusion(&[0, 0, 0, 0], &[1, 1, 0, 0], 2).unwrap();
        let m = metrics(&neg, Some(1)).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (Some(50.0), Some(0.0), Some(100.0)));
        let no_pos = confusion(&[0, 0], &[0, 0], 2).unwrap();
        assert_eq!(metrics(&no_pos, Some(1)).unwrap().sensitivity, None);
        assert!(metrics(&confusion(&[], &[], 3).unwrap(), Some(1)).is_err());
    }

    #[test]
    fn itr_reference_values() {
        assert!((itr(0.814, 11, 0.8).unwrap() - 161.0).abs() <= 1.0);
        assert!((itr(0.9668, 11, 2.0).unwrap() - 94.78).abs() <= 1.0);
        assert!((itr(1.0, 2, 60.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((itr(1.0, 11, 2.0).unwrap() - 30.0 * 11f64.log2()).abs() < 1e-12);
        for m in 2..20 {
            assert!(itr(1.0 / m as f64, m, 1.7).unwrap().abs() < 1e-9);
        }
        let p = itr_point(0.05, 11, 1.0).unwrap();
        assert!(p.below_chance && p.itr == 0.0);
        assert!(itr(0.0, 11, 1.0).is_err());
        assert!(itr(0.5, 1, 1.0).is_err());
        assert!(itr(0.5, 2, 0.0).is_err());
    }

    #[test]
    fn macro_metrics_on_diagonal() {
        let cm = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        let m = macro_metrics(&cm);
        assert_eq!((m.sensitivity, m.specificity), (Some(100.0), Some(100.0)));
    }

    proptest! {
        #[test]
        fn itr_increases_with_accuracy(m in 2usize..20, a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.1f64..10.0) {
            let lo = 1.0 / m as f64;
            let (p1, p2) = (lo + (1.0 - lo) * a.min(b), lo + (1.0 - lo) * a.max(b));
            prop_assume!(p2 - p1 > 1e-9);
            prop_assert!(itr(p2, m, t).unwrap() > itr(p1, m, t).unwrap());
        }

        #[test]
        fn itr_scales_inversely_with_t(m in 2usize..20, a in 0.0f64..1.0, t in 0.1f64..10.0, k in 0.1f64..10.0) {
            let p = 1.0 / m as f64 + (1.0 - 1.0 / m as f64) * a;
            let base = itr(p, m, t).unwrap();
            prop_assert!((itr(p, m, k * t).unwrap() - base / k).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn accuracy_round_trip(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let direct = p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / p.len() as f64 * 100.0;
            let cm = confusion(&p, &t, 5).unwrap();
            prop_assert_eq!(cm.total() as usize, p.len());
            prop_assert!((metrics(&cm, None).unwrap().accuracy.unwrap() - direct).abs() < 1e-9);
        }
    }
}
