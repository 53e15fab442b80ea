//! Group-disparity metrics over binary test-set predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictions paired with ground truth and a binary group assignment.
#[derive(Debug, Clone)]
pub struct GroupedPredictions {
    pub y_true: Vec<bool>,
    pub y_pred: Vec<bool>,
    /// true = privileged group.
    pub group: Vec<bool>,
}

impl GroupedPredictions {
    pub fn new(y_true: Vec<bool>, y_pred: Vec<bool>, group: Vec<bool>) -> Result<Self> {
        if y_true.len() != y_pred.len() || y_true.len() != group.len() {
            return Err(Error::Shape(format!(
                "lengths differ: {} true, {} pred, {} group",
                y_true.len(),
                y_pred.len(),
                group.len()
            )));
        }
        let gp = GroupedPredictions {
            y_true,
            y_pred,
            group,
        };
        gp.check_groups()?;
        Ok(gp)
    }

    fn check_groups(&self) -> Result<()> {
        let has_priv = self.group.iter().any(|&g| g);
        let has_unpriv = self.group.iter().any(|&g| !g);
        if !has_priv || !has_unpriv {
            return Err(Error::Grouping(
                "both group values must be present".into(),
            ));
        }
        Ok(())
    }
}

/// Confusion cells for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn size(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Per-group confusion counts: (privileged, unprivileged).
pub fn group_confusion(gp: &GroupedPredictions) -> Result<(Confusion, Confusion)> {
    gp.check_groups()?;
    let mut privileged = Confusion::default();
    let mut unprivileged = Confusion::default();
    for ((&t, &p), &g) in gp.y_true.iter().zip(&gp.y_pred).zip(&gp.group) {
        let cell = if g { &mut privileged } else { &mut unprivileged };
        match (t, p) {
            (true, true) => cell.tp += 1,
            (false, true) => cell.fp += 1,
            (false, false) => cell.tn += 1,
            (true, false) => cell.fn_ += 1,
        }
    }
    Ok((privileged, unprivileged))
}

/// Rates for one group; denominator-free rates are 0 and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub positive_rate: f64,
    /// Names of rates whose denominator was empty (defined as 0).
    pub degenerate: Vec<String>,
}

fn rates(c: &Confusion) -> GroupRates {
    let mut degenerate = Vec::new();
    let mut rate = |num: usize, den: usize, name: &str| -> f64 {
        if den == 0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = rate(c.tp + c.tn, c.size(), "accuracy");
    let precision = rate(c.tp, c.tp + c.fp, "precision");
    let tpr = rate(c.tp, c.tp + c.fn_, "tpr");
    let fpr = rate(c.fp, c.fp + c.tn, "fpr");
    let positive_rate = rate(c.tp + c.fp, c.size(), "positive_rate");
    GroupRates {
        confusion: *c,
        accuracy,
        precision,
        tpr,
        fpr,
        positive_rate,
        degenerate,
    }
}

/// The six group-disparity metrics plus the underlying per-group rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy_diff: f64,
    pub precision_diff: f64,
    pub tpr_diff: f64,
    pub fpr_diff: f64,
    pub demographic_parity_diff: f64,
    /// max(tpr_diff, fpr_diff).
    pub equalized_odds_diff: f64,
    pub privileged: GroupRates,
    pub unprivileged: GroupRates,
}

/// Absolute differences of the per-group rates.
pub fn fairness_report(gp: &GroupedPredictions) -> Result<FairnessReport> {
    let (c_priv, c_unpriv) = group_confusion(gp)?;
    let privileged = rates(&c_priv);
    let unprivileged = rates(&c_unpriv);
    let tpr_diff = (privileged.tpr - unprivileged.tpr).abs();
    let fpr_diff = (privileged.fpr - unprivileged.fpr).abs();
    Ok(FairnessReport {
        accuracy_diff: (privileged.accuracy - unprivileged.accuracy).abs(),
        precision_diff: (privileged.precision - unprivileged.precision).abs(),
        tpr_diff,
        fpr_diff,
        demographic_parity_diff: (privileged.positive_rate - unprivileged.positive_rate).abs(),
        equalized_odds_diff: tpr_diff.max(fpr_diff),
        privileged,
        unprivileged,
    })
}
