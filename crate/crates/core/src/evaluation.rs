//! Labeling quality metrics, estimated object count and result exports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::observation::Label;
use crate::runtime::{LabelRecord, LabelingResult};

/// Observations grouped by label; sets are keyed by observation id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub sets: BTreeMap<Label, BTreeSet<usize>>,
}

impl Partition {
    /// Builds a partition from `(observation id, label)` pairs.
    pub fn from_assignments(items: impl IntoIterator<Item = (usize, Label)>) -> Result<Self> {
        let mut sets: BTreeMap<Label, BTreeSet<usize>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for (id, l) in items {
            if !seen.insert(id) {
                return Err(Error::Evaluation(format!("observation {id} assigned twice")));
            }
            sets.entry(l).or_default().insert(id);
        }
        Ok(Self { sets })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn elements(&self) -> BTreeSet<usize> {
        self.sets.values().flatten().copied().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Number of estimated sets.
    pub k: usize,
}

/// Number of distinct argmax labels among labeled observations.
pub fn estimated_count(result: &LabelingResult) -> usize {
    result.records.iter().filter_map(|r| r.label).collect::<BTreeSet<_>>().len()
}

/// Trajectory precision, recall and their harmonic mean, averaged over the
/// estimated sets.
pub fn precision_recall_f(est: &Partition, truth: &Partition) -> Result<Scores> {
    if est.is_empty() {
        return Err(Error::Evaluation("estimated partition is empty".into()));
    }
    if est.elements() != truth.elements() {
        return Err(Error::Evaluation("partitions cover different observations".into()));
    }
    let owner: HashMap<usize, Label> = truth.sets.iter().flat_map(|(l, s)| s.iter().map(move |&i| (i, *l))).collect();
    let k = est.len();
    let (mut p, mut r) = (0.0, 0.0);
    for set in est.sets.values() {
        let mut overlap: HashMap<Label, usize> = HashMap::new();
        for i in set {
            *overlap.entry(owner[i]).or_insert(0) += 1;
        }
        let best_p = overlap.values().copied().max().unwrap_or(0) as f64 / set.len() as f64;
        let best_r = overlap.iter().map(|(l, &n)| n as f64 / truth.sets[l].len() as f64).fold(0.0, f64::max);
        p += best_p;
        r += best_r;
    }
    p /= k as f64;
    r /= k as f64;
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok(Scores { precision: p, recall: r, f_measure: f, k })
}

fn record_id(i: usize, r: &LabelRecord) -> usize {
    r.global_index.unwrap_or(i + 1)
}

/// Estimated and true partitions over the observations the run labeled.
/// `truth[i]` is the ground truth of `result.records[i]`.
pub fn partitions(result: &LabelingResult, truth: &[Option<Label>]) -> Result<(Partition, Partition)> {
    if truth.len() != result.records.len() {
        return Err(Error::Evaluation(format!(
            "{} ground-truth labels for {} results",
            truth.len(),
            result.records.len()
        )));
    }
    let mut est = Vec::new();
    let mut tru = Vec::new();
    for (i, (r, t)) in result.records.iter().zip(truth).enumerate() {
        let Some(label) = r.label else { continue };
        let t = t.ok_or_else(|| Error::Evaluation(format!("observation {} has no ground truth", record_id(i, r))))?;
        est.push((record_id(i, r), label));
        tru.push((record_id(i, r), t));
    }
    Ok((Partition::from_assignments(est)?, Partition::from_assignments(tru)?))
}

/// Structured metrics report for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub observations: usize,
    pub dropped: usize,
    pub k_estimated: usize,
    pub k_truth: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tau_d_secs: f64,
    pub config: InferenceConfig,
}

pub fn evaluate(result: &LabelingResult, truth: &[Option<Label>], config: &InferenceConfig) -> Result<MetricsReport> {
    let (est, tru) = partitions(result, truth)?;
    let s = precision_recall_f(&est, &tru)?;
    Ok(MetricsReport {
        observations: result.records.len(),
        dropped: result.dropped_count(),
        k_estimated: estimated_count(result),
        k_truth: tru.len(),
        precision: s.precision,
        recall: s.recall,
        f_measure: s.f_measure,
        tau_d_secs: result.tau_d(),
        config: config.clone(),
    })
}

/// Writes observations x labels posterior probabilities as CSV. Columns are
/// every label that appears in any support, oldest first; an optional final
/// column carries the ground-truth label.
pub fn export_belief_matrix(result: &LabelingResult, truth: Option<&[Option<Label>]>, mut w: impl Write) -> Result<()> {
    let labels: BTreeSet<Label> =
        result.records.iter().filter_map(|r| r.belief.as_ref()).flat_map(|b| b.labels().copied()).collect();
    let labels: Vec<Label> = labels.into_iter().collect();
    let mut header = vec!["observation".to_string()];
    header.extend(labels.iter().map(Label::to_string));
    if truth.is_some() {
        header.push("truth".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for (i, r) in result.records.iter().enumerate() {
        let mut row = vec![format!("c{}-{}", r.camera, r.local_index)];
        for l in &labels {
            let p = r.belief.as_ref().map_or(0.0, |b| b.prob(l));
            row.push(format!("{p:.11e}"));
        }
        if let Some(t) = truth {
            row.push(t.get(i).copied().flatten().map(|l| l.to_string()).unwrap_or_default());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parsed belief-matrix CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
    pub truth: Option<Vec<String>>,
}

pub fn parse_belief_matrix(r: impl BufRead) -> Result<BeliefMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })??;
    let mut cols: Vec<String> = header.split(',').map(str::to_string).collect();
    let has_truth = cols.last().is_some_and(|c| c == "truth");
    if has_truth {
        cols.pop();
    }
    let labels = cols[1..].to_vec();
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let mut cells: Vec<&str> = line.split(',').collect();
        let expected = labels.len() + 1 + usize::from(has_truth);
        if cells.len() != expected {
            return Err(Error::Parse { line: i + 2, msg: format!("{} cells, expected {expected}", cells.len()) });
        }
        if has_truth {
            truth.push(cells.pop().unwrap_or_default().to_string());
        }
        let probs = cells[1..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() }))
            .collect::<Result<Vec<_>>>()?;
        rows.push((cells[0].to_string(), probs));
    }
    Ok(BeliefMatrix { labels, rows, truth: has_truth.then_some(truth) })
}

/// One row of a missing-detection sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub deleted: usize,
    pub order: usize,
    pub trials: usize,
    pub mean_f: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

/// Averages per-trial scores into one sweep row.
pub fn sweep_row(deleted: usize, order: usize, scores: &[Scores]) -> Result<SweepRow> {
    if scores.is_empty() {
        return Err(Error::Evaluation("sweep needs at least one trial".into()));
    }
    let n = scores.len() as f64;
    Ok(SweepRow {
        deleted,
        order,
        trials: scores.len(),
        mean_f: scores.iter().map(|s| s.f_measure).sum::<f64>() / n,
        mean_precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        mean_recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "deleted,order,trials,mean_f,mean_precision,mean_recall")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.deleted, r.order, r.trials, r.mean_f, r.mean_precision, r.mean_recall
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::Belief;
    use crate::topology::CameraId;

    fn lab(i: u32) -> Label {
        Label::new(CameraId(0), i, i as f64)
    }

    fn part(sets: &[(u32, &[usize])]) -> Partition {
        Partition::from_assignments(sets.iter().flat_map(|(l, ids)| ids.iter().map(move |&i| (i, lab(*l))))).unwrap()
    }

    #[test]
    fn hand_computed_example() {
        let truth = part(&[(1, &[1, 2, 3]), (4, &[4, 5])]);
        let est = part(&[(1, &[1, 2]), (3, &[3, 4, 5])]);
        let s = precision_recall_f(&est, &truth).unwrap();
        for v in [s.precision, s.recall, s.f_measure] {
            assert!((v - 5.0 / 6.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn extreme_partitions() {
        let truth = part(&[(1, &[1, 2, 3]), (4, &[4, 5])]);
        let s = precision_recall_f(&truth, &truth).unwrap();
        assert_eq!((s.precision, s.recall, s.f_measure), (1.0, 1.0, 1.0));
        let singles = part(&[(1, &[1]), (2, &[2]), (3, &[3]), (4, &[4]), (5, &[5])]);
        assert_eq!(precision_recall_f(&singles, &truth).unwrap().precision, 1.0);
        let one = part(&[(1, &[1, 2, 3, 4, 5])]);
        assert_eq!(precision_recall_f(&one, &truth).unwrap().recall, 1.0);
        assert!(precision_recall_f(&Partition::default(), &truth).is_err());
    }

    fn result(beliefs: Vec<Belief>) -> LabelingResult {
        LabelingResult {
            records: beliefs
                .into_iter()
                .enumerate()
                .map(|(i, b)| LabelRecord {
                    global_index: Some(i + 1),
                    camera: CameraId(0),
                    local_index: i as u32 + 1,
                    t_en: i as f64,
                    label: Some(b.argmax().unwrap()),
                    belief: Some(b),
                    log_evidence: 0.0,
                })
                .collect(),
            timing: Default::default(),
        }
    }

    #[test]
    fn counts() {
        let r = result(vec![Belief::certain(lab(1)), Belief::certain(lab(1))]);
        assert_eq!(estimated_count(&r), 1);
        let r = result(vec![Belief::certain(lab(1)), Belief::certain(lab(2))]);
        assert_eq!(estimated_count(&r), 2);
    }

    #[test]
    fn belief_matrix_round_trip() {
        let b = Belief::normalize([(lab(1), 1.0 / 3.0), (lab(2), 2.0 / 3.0)]).unwrap();
        let r = result(vec![Belief::certain(lab(1)), b.clone()]);
        let mut buf = Vec::new();
        export_belief_matrix(&r, Some(&[Some(lab(1)), Some(lab(1))]), &mut buf).unwrap();
        let m = parse_belief_matrix(buf.as_slice()).unwrap();
        assert_eq!(m.labels, vec!["c0-1", "c0-2"]);
        assert_eq!(m.rows[0].1, vec![1.0, 0.0]);
        for (got, want) in m.rows[1].1.iter().zip([1.0 / 3.0, 2.0 / 3.0]) {
            assert!(((got - want) / want).abs() < 1e-11);
        }
        assert!((m.rows[1].1.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.truth.unwrap(), vec!["c0-1", "c0-1"]);

        let single = result(vec![Belief::certain(lab(1))]);
        let mut buf = Vec::new();
        export_belief_matrix(&single, None, &mut buf).unwrap();
        let m = parse_belief_matrix(buf.as_slice()).unwrap();
        assert_eq!(m.rows, vec![("c0-1".to_string(), vec![1.0])]);
    }

    #[test]
    fn sweep_csv_shape() {
        let s = Scores { precision: 1.0, recall: 0.5, f_measure: 2.0 / 3.0, k: 2 };
        let rows: Vec<SweepRow> =
            [0, 10].iter().flat_map(|&d| (0..2).map(move |q| sweep_row(d, q, &[s]).unwrap())).collect();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("deleted,order"));
    }
}
