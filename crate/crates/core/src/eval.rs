//! Task metrics, per-class reports and the unpaired Welch t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Task;

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
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

    pub fn from_rows(rows: &[&[u64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            n,
            counts: rows.concat(),
        })
    }

    pub fn from_predictions(n: usize, gold: &[usize], predicted: &[usize]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::Shape {
                op: "confusion matrix",
                left: vec![gold.len()],
                right: vec![predicted.len()],
            });
        }
        let mut cm = Self::new(n);
        for (&g, &p) in gold.iter().zip(predicted) {
            cm.add(g, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, gold: usize, predicted: usize) -> Result<()> {
        for c in [gold, predicted] {
            if c >= self.n {
                return Err(Error::Index {
                    what: "class",
                    index: c,
                    size: self.n,
                });
            }
        }
        self.counts[gold * self.n + predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold * self.n + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Gold examples of `class`.
    pub fn support(&self, class: usize) -> u64 {
        (0..self.n).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.n).map(|g| self.get(g, class)).sum()
    }

    fn require(&self, n: usize, metric: &'static str) -> Result<()> {
        if self.n != n {
            return Err(Error::Shape {
                op: metric,
                left: vec![n, n],
                right: vec![self.n, self.n],
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Harmonic mean with `0/0 → 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

pub fn precision_recall_f1(cm: &ConfusionMatrix, class: usize) -> Prf {
    let tp = cm.get(class, class) as f64;
    let precision = ratio(tp, cm.predicted(class) as f64);
    let recall = ratio(tp, cm.support(class) as f64);
    Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

/// Mean of the three sentiment recalls.
pub fn avg_rec_from(recalls: [f64; 3]) -> f64 {
    recalls.iter().sum::<f64>() / 3.0
}

/// Mean of the FAVOR and AGAINST F-scores.
pub fn f_avg_from(f_favor: f64, f_against: f64) -> f64 {
    (f_favor + f_against) / 2.0
}

pub fn avg_rec(cm: &ConfusionMatrix) -> Result<f64> {
    cm.require(3, "avg_rec")?;
    Ok(avg_rec_from([0, 1, 2].map(|c| precision_recall_f1(cm, c).recall)))
}

/// Classes are ordered FAVOR, AGAINST, NEUTRAL; NEUTRAL's F-score is ignored.
pub fn f_avg(cm: &ConfusionMatrix) -> Result<f64> {
    cm.require(3, "f_avg")?;
    Ok(f_avg_from(precision_recall_f1(cm, 0).f1, precision_recall_f1(cm, 1).f1))
}

/// F1 of class 1 (HATEFUL).
pub fn f1_hateful(cm: &ConfusionMatrix) -> Result<f64> {
    cm.require(2, "f1_hateful")?;
    Ok(precision_recall_f1(cm, 1).f1)
}

pub fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Sentiment => "avg_rec",
        Task::Stance => "f_avg",
        Task::Hate => "f1_hateful",
    }
}

pub fn task_metric(task: Task, cm: &ConfusionMatrix) -> Result<f64> {
    match task {
        Task::Sentiment => avg_rec(cm),
        Task::Stance => f_avg(cm),
        Task::Hate => f1_hateful(cm),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    pub metric: String,
    pub value: f64,
    pub per_class: Vec<ClassReport>,
    pub confusion: ConfusionMatrix,
}

impl MetricReport {
    pub fn new(task: Task, cm: &ConfusionMatrix) -> Result<Self> {
        cm.require(task.num_classes(), "metric report")?;
        let per_class = task
            .labels()
            .iter()
            .enumerate()
            .map(|(c, label)| {
                let prf = precision_recall_f1(cm, c);
                ClassReport {
                    label: label.to_string(),
                    precision: prf.precision,
                    recall: prf.recall,
                    f1: prf.f1,
                    support: cm.support(c),
                }
            })
            .collect();
        Ok(MetricReport {
            task,
            metric: metric_name(task).to_string(),
            value: task_metric(task, cm)?,
            per_class,
            confusion: cm.clone(),
        })
    }
}

/// Sample mean and (n−1) standard deviation.
pub fn mean_std(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 values, got {}", xs.len())));
    }
    if xs.iter().all(|x| *x == xs[0]) {
        return Ok((xs[0], 0.0));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Unpaired two-sided Welch t-test.
///
/// When both samples have zero variance the statistic is undefined: equal
/// means give `t = 0, p = 1`, different means `t = ±inf, p = 0`; `df` is then
/// `n_a + n_b − 2`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    let (ma, sa) = mean_std(a)?;
    let (mb, sb) = mean_std(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            WelchResult { t: 0.0, df, p: 1.0 }
        } else {
            WelchResult {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df,
                p: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: student_t_two_sided(t, df),
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` via the continued fraction, using the symmetry
/// `I_x(a, b) = 1 − I_{1−x}(b, a)` where that converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub row: String,
    pub column: String,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Row mean exceeds column mean with `p < alpha`.
    pub improves: bool,
    pub significant: bool,
}

/// All ordered pairs of run sets, tested at `alpha`.
pub fn significance_matrix(sets: &[(String, Vec<f64>)], alpha: f64) -> Result<Vec<PairVerdict>> {
    let mut out = Vec::new();
    for (ra, a) in sets {
        for (rb, b) in sets {
            if ra == rb {
                continue;
            }
            let w = welch_t_test(a, b)?;
            let significant = w.p < alpha;
            out.push(PairVerdict {
                row: ra.clone(),
                column: rb.clone(),
                t: w.t,
                df: w.df,
                p: w.p,
                improves: significant && w.t > 0.0,
                significant,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_empty_classes() {
        let cm = ConfusionMatrix::from_rows(&[&[3, 0, 0], &[0, 2, 0], &[0, 0, 0]]).unwrap();
        let p = precision_recall_f1(&cm, 0);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let p = precision_recall_f1(&cm, 2);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        let full = ConfusionMatrix::from_rows(&[&[3, 0, 0], &[0, 2, 0], &[0, 0, 1]]).unwrap();
        assert_eq!(avg_rec(&full).unwrap(), 1.0);
        assert_eq!(f_avg(&full).unwrap(), 1.0);
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        let cm2 = ConfusionMatrix::new(2);
        assert!(avg_rec(&cm2).is_err());
        assert!(f_avg(&cm2).is_err());
        assert!(f1_hateful(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn no_hateful_predictions_scores_zero() {
        let cm = ConfusionMatrix::from_rows(&[&[5, 0], &[4, 0]]).unwrap();
        assert_eq!(f1_hateful(&cm).unwrap(), 0.0);
    }

    #[test]
    fn f_avg_ignores_neutral() {
        let a = ConfusionMatrix::from_rows(&[&[4, 1, 0], &[1, 3, 0], &[0, 0, 7]]).unwrap();
        let b = ConfusionMatrix::from_rows(&[&[4, 1, 0], &[1, 3, 0], &[0, 0, 0]]).unwrap();
        assert_eq!(f_avg(&a).unwrap(), f_avg(&b).unwrap());
    }

    #[test]
    fn welch_hand_values() {
        let w = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((w.t - (-3.0 / (2.0f64 / 3.0).sqrt())).abs() < 1e-12);
        assert!((w.df - 4.0).abs() < 1e-12);
        let same = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((same.t, same.p), (0.0, 1.0));
        let flat = welch_t_test(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(flat.p, 1.0);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn t_tail_at_known_points() {
        // df = 1 is Cauchy: P(|T| ≥ 1) = 0.5; df = 2 has a closed form.
        assert!((student_t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-12);
        for t in [0.3f64, 1.7, 4.2] {
            let exact = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((student_t_two_sided(t, 2.0) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_gamma_at_integers() {
        let mut fact = 1.0f64;
        for n in 1..15 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-10, "{n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn mean_std_hand_values() {
        let (m, s) = mean_std(&[0.60, 0.62]).unwrap();
        assert!((m - 0.61).abs() < 1e-15);
        assert!((s - 0.014142135623730963).abs() < 1e-12);
        assert_eq!(mean_std(&[0.3, 0.3, 0.3]).unwrap().1, 0.0);
    }

    #[test]
    fn significance_matrix_markers() {
        let sets = vec![
            ("gat".to_string(), vec![0.70, 0.71, 0.72, 0.70]),
            ("ling".to_string(), vec![0.60, 0.61, 0.60, 0.62]),
        ];
        let m = significance_matrix(&sets, 0.05).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m[0].improves && !m[1].improves && m[1].significant);
        let same = vec![("a".to_string(), vec![0.5, 0.6]), ("b".to_string(), vec![0.5, 0.6])];
        assert!(significance_matrix(&same, 0.05).unwrap().iter().all(|v| !v.significant));
    }

    fn cm3() -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::vec(0u64..50, 9)
    }

    proptest! {
        #[test]
        fn avg_rec_matches_recount(c in cm3()) {
            let cm = ConfusionMatrix { n: 3, counts: c.clone() };
            let mut recalls = [0.0; 3];
            for (k, r) in recalls.iter_mut().enumerate() {
                let row: u64 = c[k * 3..k * 3 + 3].iter().sum();
                *r = if row == 0 { 0.0 } else { c[k * 3 + k] as f64 / row as f64 };
            }
            let expect = (recalls[0] + recalls[1] + recalls[2]) / 3.0;
            prop_assert!((avg_rec(&cm).unwrap() - expect).abs() < 1e-12);
        }

        #[test]
        fn f1_hateful_matches_recount(c in proptest::collection::vec(0u64..50, 4)) {
            let cm = ConfusionMatrix { n: 2, counts: c.clone() };
            let (tp, fp, fneg) = (c[3] as f64, c[1] as f64, c[2] as f64);
            let expect = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
            prop_assert!((f1_hateful(&cm).unwrap() - expect).abs() < 1e-12);
        }

        #[test]
        fn avg_rec_scale_invariant(c in cm3(), k in 1u64..5) {
            let cm = ConfusionMatrix { n: 3, counts: c.clone() };
            let scaled = ConfusionMatrix { n: 3, counts: c.iter().map(|x| x * k).collect() };
            prop_assert!((avg_rec(&cm).unwrap() - avg_rec(&scaled).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn metrics_in_unit_interval(c in cm3()) {
            let cm = ConfusionMatrix { n: 3, counts: c };
            for v in [avg_rec(&cm).unwrap(), f_avg(&cm).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn welch_antisymmetric_and_shift_invariant(
            a in proptest::collection::vec(-5.0f64..5.0, 2..8),
            b in proptest::collection::vec(-5.0f64..5.0, 2..8),
            shift in -3.0f64..3.0,
        ) {
            let ab = welch_t_test(&a, &b).unwrap();
            let ba = welch_t_test(&b, &a).unwrap();
            prop_assert!((ab.t + ba.t).abs() < 1e-9 * (1.0 + ab.t.abs()));
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
            let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
            let s = welch_t_test(&sa, &sb).unwrap();
            prop_assert!((s.t - ab.t).abs() < 1e-6 * (1.0 + ab.t.abs()));
        }
    }
}
