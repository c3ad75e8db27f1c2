use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::raster::{EvalMask, LabelGrid};

/// Minimum masked-in support for a class to count towards the macro average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinSupport {
    /// Fraction of all masked-in pixels, rounded up.
    Fraction(f64),
    Pixels(usize),
}

impl Default for MinSupport {
    fn default() -> Self {
        MinSupport::Fraction(0.001)
    }
}

impl MinSupport {
    pub fn resolve(self, masked_in: usize) -> usize {
        match self {
            MinSupport::Fraction(f) => (f * masked_in as f64).ceil() as usize,
            MinSupport::Pixels(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class_id: u16,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Whether the class takes part in the macro average.
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub months: Option<u32>,
    pub class_table: Vec<String>,
    pub unknown_id: u16,
    /// One entry per class id, Unknown included (never `included`).
    pub classes: Vec<ClassMetrics>,
    /// Unweighted mean F1 over included classes; 0 when none qualify.
    pub macro_f1: f64,
    /// Row-major `V×V` counts, rows = truth, columns = prediction.
    pub confusion: Vec<u64>,
    pub masked_in: u64,
    pub min_support: usize,
}

/// Running confusion tally, mergeable across scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    classes: usize,
    counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Confusion { classes, counts: vec![0; classes * classes] }
    }

    /// Tallies masked-in pixels whose truth is not `unknown_id`.
    pub fn add(&mut self, pred: &[u16], labels: &LabelGrid, mask: &EvalMask) -> Result<(), TrainError> {
        let n = labels.height() * labels.width();
        if pred.len() != n || mask.valid.len() != n || (mask.h, mask.w) != (labels.height(), labels.width()) {
            return Err(TrainError::Data(format!(
                "prediction ({}), labels ({}×{}) and mask ({}×{}) disagree",
                pred.len(),
                labels.height(),
                labels.width(),
                mask.h,
                mask.w
            )));
        }
        let v = self.classes;
        for ((&p, &t), &m) in pred.iter().zip(labels.ids()).zip(&mask.valid) {
            if !m || t == labels.unknown_id {
                continue;
            }
            let (p, t) = (p as usize, t as usize);
            if p >= v || t >= v {
                return Err(TrainError::Data(format!("class id {} out of range for {v} classes", p.max(t))));
            }
            self.counts[t * v + p] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn report(&self, class_table: &[String], unknown_id: u16, min_support: MinSupport, months: Option<u32>) -> Result<MetricsReport, TrainError> {
        let v = self.classes;
        if class_table.len() != v {
            return Err(TrainError::ClassTableMismatch(format!("{} names for {v} classes", class_table.len())));
        }
        let masked_in = self.total();
        if masked_in == 0 {
            return Err(TrainError::EmptyMask);
        }
        let min_support = min_support.resolve(masked_in as usize);
        let mut classes = Vec::with_capacity(v);
        for c in 0..v {
            let tp = self.counts[c * v + c];
            let support: u64 = self.counts[c * v..(c + 1) * v].iter().sum();
            let predicted: u64 = (0..v).map(|t| self.counts[t * v + c]).sum();
            let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            classes.push(ClassMetrics {
                class_id: c as u16,
                name: class_table[c].clone(),
                precision,
                recall,
                f1,
                support,
                included: c != unknown_id as usize && support > 0 && support >= min_support as u64,
            });
        }
        let inc: Vec<f64> = classes.iter().filter(|c| c.included).map(|c| c.f1).collect();
        let macro_f1 = if inc.is_empty() { 0.0 } else { inc.iter().sum::<f64>() / inc.len() as f64 };
        Ok(MetricsReport {
            months,
            class_table: class_table.to_vec(),
            unknown_id,
            classes,
            macro_f1,
            confusion: self.counts.clone(),
            masked_in,
            min_support,
        })
    }
}

/// Per-class precision/recall/F1 of `pred` against `labels` over the masked-in
/// pixels whose truth is known.
pub fn evaluate_f1(pred: &[u16], labels: &LabelGrid, mask: &EvalMask, min_support: MinSupport) -> Result<MetricsReport, TrainError> {
    let mut conf = Confusion::new(labels.class_table.len());
    conf.add(pred, labels, mask)?;
    conf.report(&labels.class_table, labels.unknown_id, min_support, None)
}

impl MetricsReport {
    pub fn num_classes(&self) -> usize {
        self.class_table.len()
    }

    pub fn included(&self) -> impl Iterator<Item = &ClassMetrics> {
        self.classes.iter().filter(|c| c.included)
    }

    pub fn confusion_at(&self, truth: usize, pred: usize) -> u64 {
        self.confusion[truth * self.num_classes() + pred]
    }

    /// `class,precision,recall,f1,support` for included classes, then a
    /// `macro` row carrying the macro F1 and the masked-in pixel count.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        for c in self.included() {
            let _ = writeln!(s, "{},{:.6},{:.6},{:.6},{}", c.name, c.precision, c.recall, c.f1, c.support);
        }
        let _ = writeln!(s, "macro,,,{:.6},{}", self.macro_f1, self.masked_in);
        s
    }
}

/// Plain-text confusion matrix (rows = truth, columns = prediction, ordered
/// by class id) and the same counts as CSV.
pub fn confusion_render(report: &MetricsReport) -> (String, String) {
    let v = report.num_classes();
    let names = &report.class_table;
    let width = names
        .iter()
        .map(|n| n.len())
        .chain(report.confusion.iter().map(|c| c.to_string().len()))
        .max()
        .unwrap_or(1)
        .max("truth\\pred".len());

    let mut text = format!("{:>width$}", "truth\\pred");
    for n in names {
        let _ = write!(text, " {n:>width$}");
    }
    text.push('\n');
    let mut csv = String::from("truth");
    for n in names {
        let _ = write!(csv, ",{n}");
    }
    csv.push('\n');
    for t in 0..v {
        let _ = write!(text, "{:>width$}", names[t]);
        csv.push_str(&names[t]);
        for p in 0..v {
            let c = report.confusion_at(t, p);
            let _ = write!(text, " {c:>width$}");
            let _ = write!(csv, ",{c}");
        }
        text.push('\n');
        csv.push('\n');
    }
    (text, csv)
}

/// Per-class and macro F1 deltas (`b − a`) as `class,f1_a,f1_b,delta`.
/// Classes included in only one report get an empty cell for the other
/// and no delta.
pub fn compare_runs(a: &MetricsReport, b: &MetricsReport) -> Result<String, TrainError> {
    if a.class_table != b.class_table {
        return Err(TrainError::ClassTableMismatch(format!("{:?} vs {:?}", a.class_table, b.class_table)));
    }
    let mut s = String::from("class,f1_a,f1_b,delta\n");
    for (ca, cb) in a.classes.iter().zip(&b.classes) {
        match (ca.included, cb.included) {
            (true, true) => {
                let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", ca.name, ca.f1, cb.f1, cb.f1 - ca.f1);
            }
            (true, false) => {
                let _ = writeln!(s, "{},{:.6},,", ca.name, ca.f1);
            }
            (false, true) => {
                let _ = writeln!(s, "{},,{:.6},", cb.name, cb.f1);
            }
            (false, false) => {}
        }
    }
    let _ = writeln!(s, "macro,{:.6},{:.6},{:.6}", a.macro_f1, b.macro_f1, b.macro_f1 - a.macro_f1);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn grid(h: usize, w: usize, ids: Vec<u16>, v: usize) -> LabelGrid {
        let table = (0..v).map(|i| if i == 0 { "unknown".to_string() } else { format!("c{i}") }).collect();
        LabelGrid::new(h, w, ids, table, 0).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let l = grid(2, 3, vec![1, 2, 2, 1, 3, 3], 4);
        let r = evaluate_f1(l.ids(), &l, &EvalMask::all(2, 3, true), MinSupport::Pixels(1)).unwrap();
        assert!(r.included().all(|c| c.f1 == 1.0));
        assert_eq!(r.macro_f1, 1.0);
        for t in 0..4 {
            for p in 0..4 {
                if t != p {
                    assert_eq!(r.confusion_at(t, p), 0);
                }
            }
        }
    }

    #[test]
    fn hand_computed_f1() {
        // Class 1: TP=2, FP=1, FN=1.
        let l = grid(1, 5, vec![1, 1, 1, 2, 2], 3);
        let pred = [1, 1, 2, 1, 2];
        let r = evaluate_f1(&pred, &l, &EvalMask::all(1, 5, true), MinSupport::Pixels(1)).unwrap();
        assert!((r.classes[1].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.classes[1].precision - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn low_support_class_excluded_from_macro_only() {
        let mut ids = vec![1u16; 100];
        ids[0] = 2;
        let l = grid(10, 10, ids, 3);
        let mut pred = vec![1u16; 100];
        pred[0] = 2;
        pred[1] = 2;
        let r = evaluate_f1(&pred, &l, &EvalMask::all(10, 10, true), MinSupport::Pixels(2)).unwrap();
        assert!(!r.classes[2].included);
        assert_eq!(r.confusion_at(2, 2), 1);
        assert_eq!(r.macro_f1, r.classes[1].f1);
    }

    #[test]
    fn unknown_truth_and_mask_are_skipped() {
        let l = grid(1, 4, vec![0, 1, 2, 2], 3);
        let mask = EvalMask { h: 1, w: 4, valid: vec![true, true, true, false] };
        let r = evaluate_f1(&[1, 1, 2, 1], &l, &mask, MinSupport::default()).unwrap();
        assert_eq!(r.masked_in, 2);
        assert!(!r.classes[0].included);
        let total: u64 = r.confusion.iter().sum();
        assert_eq!(total, r.masked_in);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let l = grid(1, 2, vec![1, 2], 3);
        let err = evaluate_f1(&[1, 2], &l, &EvalMask::all(1, 2, false), MinSupport::default());
        assert!(matches!(err, Err(TrainError::EmptyMask)));
    }

    #[test]
    fn min_support_scales_with_masked_pixels() {
        assert_eq!(MinSupport::default().resolve(4096), 5);
        assert_eq!(MinSupport::default().resolve(1000), 1);
    }

    #[test]
    fn confusion_render_shapes() {
        let l = grid(2, 2, vec![1, 2, 2, 1], 3);
        let r = evaluate_f1(&[1, 1, 1, 1], &l, &EvalMask::all(2, 2, true), MinSupport::Pixels(1)).unwrap();
        let (text, csv) = confusion_render(&r);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(csv.lines().nth(2).unwrap(), "c1,0,2,0");
        assert_eq!(csv.lines().nth(3).unwrap(), "c2,0,2,0");
    }

    #[test]
    fn compare_identical_and_mismatched() {
        let l = grid(2, 2, vec![1, 2, 2, 1], 3);
        let r = evaluate_f1(&[1, 2, 1, 1], &l, &EvalMask::all(2, 2, true), MinSupport::Pixels(1)).unwrap();
        let csv = compare_runs(&r, &r).unwrap();
        for line in csv.lines().skip(1) {
            assert!(line.ends_with(",0.000000"), "{line}");
        }
        let other = grid(2, 2, vec![1, 2, 2, 1], 4);
        let r2 = evaluate_f1(&[1, 2, 1, 1], &other, &EvalMask::all(2, 2, true), MinSupport::Pixels(1)).unwrap();
        assert!(matches!(compare_runs(&r, &r2), Err(TrainError::ClassTableMismatch(_))));
    }

    #[test]
    fn macro_delta_is_mean_of_class_deltas() {
        let mut rng = SplitMix64::new(3);
        let ids: Vec<u16> = (0..400).map(|_| 1 + rng.below(4) as u16).collect();
        let l = grid(20, 20, ids.clone(), 5);
        let noisy = |rng: &mut SplitMix64, p: f64| -> Vec<u16> {
            ids.iter().map(|&t| if rng.bernoulli(p) { 1 + rng.below(4) as u16 } else { t }).collect()
        };
        let mask = EvalMask::all(20, 20, true);
        let a = evaluate_f1(&noisy(&mut rng, 0.3), &l, &mask, MinSupport::default()).unwrap();
        let b = evaluate_f1(&noisy(&mut rng, 0.6), &l, &mask, MinSupport::default()).unwrap();
        let deltas: Vec<f64> = a.classes.iter().zip(&b.classes).filter(|(x, _)| x.included).map(|(x, y)| y.f1 - x.f1).collect();
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        assert!((mean - (b.macro_f1 - a.macro_f1)).abs() < 1e-12);
    }
}
