//! Training objectives as plain evaluative functions.
//!
//! Batched inputs are `B × T` row-major slices (one row per batch entry).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hungarian::{hungarian_assign, TapAssignment};
use crate::units::DEFAULT_BIN_SPACING_NS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Scale applied to delays (per ns) before comparing with powers (dB).
    pub delay_weight: f64,
    pub repulsion_min_sep_ns: f64,
    pub repulsion_alpha: f64,
    pub lambda_temporal: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            // one delay bin weighs like one dB
            delay_weight: 1.0 / DEFAULT_BIN_SPACING_NS,
            repulsion_min_sep_ns: DEFAULT_BIN_SPACING_NS,
            repulsion_alpha: 1.0,
            lambda_temporal: 0.1,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_weight > 0.0) {
            return Err(Error::Config("delay_weight must be > 0".into()));
        }
        if !(self.repulsion_min_sep_ns >= 0.0 && self.repulsion_alpha >= 0.0 && self.lambda_temporal >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// A tap as seen by the matching loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapPoint {
    pub delay_ns: f64,
    pub power_db: f64,
}

impl TapPoint {
    pub fn new(delay_ns: f64, power_db: f64) -> Self {
        Self { delay_ns, power_db }
    }
}

fn check_same_shape(a: &[Vec<f64>], b: &[Vec<f64>], what: &str) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::Shape(format!("{what}: prediction and truth shapes differ")));
    }
    Ok(())
}

fn mse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    let count: usize = pred.iter().map(Vec::len).sum();
    if count == 0 {
        return Err(Error::Shape("mean squared error over no elements".into()));
    }
    let sum: f64 = pred
        .iter()
        .flatten()
        .zip(truth.iter().flatten())
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok(sum / count as f64)
}

/// Mean squared step between adjacent entries. A single entry scores 0.
pub fn temporal_consistency(seq: &[f64]) -> Result<f64> {
    match seq.len() {
        0 => Err(Error::Contract("temporal consistency of an empty sequence".into())),
        1 => Ok(0.0),
        n => Ok(seq.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (n - 1) as f64),
    }
}

/// Batch form: every row is one sequence of equal length `T`.
pub fn temporal_consistency_batch(rows: &[Vec<f64>]) -> Result<f64> {
    let Some(t) = rows.first().map(Vec::len) else {
        return Err(Error::Contract("temporal consistency of an empty batch".into()));
    };
    if rows.iter().any(|r| r.len() != t) {
        return Err(Error::Shape("batch rows differ in length".into()));
    }
    if t == 0 {
        return Err(Error::Contract("temporal consistency of empty sequences".into()));
    }
    if t == 1 {
        return Ok(0.0);
    }
    let sum: f64 = rows
        .iter()
        .flat_map(|r| r.windows(2).map(|w| (w[1] - w[0]).powi(2)))
        .sum();
    Ok(sum / (rows.len() * (t - 1)) as f64)
}

/// First-tap power objective: MSE plus weighted temporal smoothness.
pub fn stage1_loss(pred: &[Vec<f64>], truth: &[Vec<f64>], cfg: &MatchConfig) -> Result<f64> {
    check_same_shape(pred, truth, "stage 1")?;
    Ok(mse(pred, truth)? + cfg.lambda_temporal * temporal_consistency_batch(pred)?)
}

/// K-factor and tap-count objective. `N` is regressed as a real number.
pub fn stage2_loss(
    pred_k: &[Vec<f64>],
    truth_k: &[Vec<f64>],
    pred_n: &[Vec<f64>],
    truth_n: &[Vec<f64>],
    cfg: &MatchConfig,
) -> Result<f64> {
    check_same_shape(pred_k, truth_k, "stage 2 K")?;
    check_same_shape(pred_n, truth_n, "stage 2 N")?;
    Ok(mse(pred_k, truth_k)? + mse(pred_n, truth_n)? + cfg.lambda_temporal * temporal_consistency_batch(pred_k)?)
}

/// Squared distance between `[w_d·τ, p]` vectors.
fn pair_cost(pred: &TapPoint, truth: &TapPoint, w: f64) -> f64 {
    (w * pred.delay_ns - w * truth.delay_ns).powi(2) + (pred.power_db - truth.power_db).powi(2)
}

/// Set-to-set distance under the optimal assignment, averaged over the
/// truth taps. Surplus predictions cost nothing here.
pub fn match_loss(pred: &[TapPoint], truth: &[TapPoint], cfg: &MatchConfig) -> Result<(f64, TapAssignment)> {
    cfg.validate()?;
    if truth.is_empty() {
        return Ok((
            0.0,
            TapAssignment {
                pairs: Vec::new(),
                unmatched_pred: (0..pred.len()).collect(),
                cost: 0.0,
            },
        ));
    }
    if pred.len() < truth.len() {
        return Err(Error::Shape(format!(
            "{} predicted taps cannot cover {} truth taps",
            pred.len(),
            truth.len()
        )));
    }
    let cost: Vec<Vec<f64>> = pred
        .iter()
        .map(|p| truth.iter().map(|t| pair_cost(p, t, cfg.delay_weight)).collect())
        .collect();
    let assignment = hungarian_assign(&cost)?;
    Ok((assignment.cost / truth.len() as f64, assignment))
}

/// Hinge penalty on every ordered pair of predicted delays closer than
/// `repulsion_min_sep_ns`, averaged over the `N(N−1)` pairs.
pub fn repulsion_loss(pred_delays: &[f64], cfg: &MatchConfig) -> f64 {
    let n = pred_delays.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (i, a) in pred_delays.iter().enumerate() {
        for (j, b) in pred_delays.iter().enumerate() {
            if i != j {
                sum += (cfg.repulsion_min_sep_ns - (a - b).abs()).max(0.0);
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

/// Mean matching loss over frames plus `α` times the mean repulsion.
pub fn stage3_loss(pred_sets: &[Vec<TapPoint>], truth_sets: &[Vec<TapPoint>], cfg: &MatchConfig) -> Result<f64> {
    if pred_sets.len() != truth_sets.len() {
        return Err(Error::Shape(format!(
            "{} predicted frames vs {} truth frames",
            pred_sets.len(),
            truth_sets.len()
        )));
    }
    if pred_sets.is_empty() {
        return Err(Error::Shape("stage 3 loss over no frames".into()));
    }
    let frames = pred_sets.len() as f64;
    let mut matched = 0.0;
    let mut repulsion = 0.0;
    for (pred, truth) in pred_sets.iter().zip(truth_sets) {
        matched += match_loss(pred, truth, cfg)?.0;
        let delays: Vec<f64> = pred.iter().map(|t| t.delay_ns).collect();
        repulsion += repulsion_loss(&delays, cfg);
    }
    Ok(matched / frames + cfg.repulsion_alpha * repulsion / frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> MatchConfig {
        MatchConfig::default()
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_consistency(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
        assert_eq!(temporal_consistency(&[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(temporal_consistency(&[0.0, 2.0, 6.0]).unwrap(), 10.0);
        assert_eq!(temporal_consistency(&[3.0]).unwrap(), 0.0);
        assert!(matches!(temporal_consistency(&[]), Err(Error::Contract(_))));
        let batch = vec![vec![0.0, 1.0, 0.0], vec![0.0, 2.0, 6.0]];
        assert_eq!(temporal_consistency_batch(&batch).unwrap(), (2.0 + 20.0) / 4.0);
    }

    #[test]
    fn stage1_examples() {
        let flat = vec![vec![1.0, 1.0, 1.0]; 2];
        assert_eq!(stage1_loss(&flat, &flat, &cfg()).unwrap(), 0.0);
        let wiggle = vec![vec![0.0, 1.0, 0.0]; 2];
        assert!((stage1_loss(&wiggle, &wiggle, &cfg()).unwrap() - 0.1).abs() < 1e-15);
        let c = MatchConfig { lambda_temporal: 0.0, ..cfg() };
        let truth = vec![vec![0.0, 0.0, 0.0]; 2];
        assert!((stage1_loss(&wiggle, &truth, &c).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        assert!(matches!(stage1_loss(&wiggle, &truth[..1], &c), Err(Error::Shape(_))));
    }

    #[test]
    fn stage2_examples() {
        let k = vec![vec![5.0, 5.0, 5.0]];
        let n = vec![vec![3.0, 3.0, 3.0]];
        assert_eq!(stage2_loss(&k, &k, &n, &n, &cfg()).unwrap(), 0.0);
        let k_off = vec![vec![6.0, 6.0, 6.0]];
        assert_eq!(stage2_loss(&k_off, &k, &n, &n, &cfg()).unwrap(), 1.0);
        let n_off = vec![vec![3.5, 3.5, 3.5]];
        assert_eq!(stage2_loss(&k, &k, &n_off, &n, &cfg()).unwrap(), 0.25);
    }

    #[test]
    fn match_examples() {
        let truth = vec![TapPoint::new(0.0, 0.0), TapPoint::new(100.0, -6.0)];
        let (l, a) = match_loss(&truth, &truth, &cfg()).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(a.pairs.len(), 2);

        let c = MatchConfig { delay_weight: 1.0, ..cfg() };
        let (l, _) = match_loss(&[TapPoint::new(1.0, 0.0)], &[TapPoint::new(0.0, 0.0)], &c).unwrap();
        assert_eq!(l, 1.0);

        let swapped = vec![truth[1], truth[0]];
        let (l, a) = match_loss(&swapped, &truth, &cfg()).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(a.pairs, vec![(1, 0), (0, 1)]);

        let (l, a) = match_loss(&truth, &[], &cfg()).unwrap();
        assert_eq!(l, 0.0);
        assert!(a.pairs.is_empty());
        assert!(matches!(match_loss(&truth[..1], &truth, &cfg()), Err(Error::Shape(_))));
    }

    #[test]
    fn surplus_predictions_are_free() {
        let truth = vec![TapPoint::new(0.0, 0.0)];
        let pred = vec![TapPoint::new(500.0, -30.0), TapPoint::new(0.0, 0.0)];
        let (l, a) = match_loss(&pred, &truth, &cfg()).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(a.unmatched_pred, vec![0]);
    }

    #[test]
    fn repulsion_examples() {
        assert_eq!(repulsion_loss(&[0.0, 100.0, 200.0], &cfg()), 0.0);
        assert!((repulsion_loss(&[50.0, 50.0], &cfg()) - 33.3).abs() < 1e-12);
        assert_eq!(repulsion_loss(&[1.0], &cfg()), 0.0);
        assert_eq!(repulsion_loss(&[], &cfg()), 0.0);
    }

    #[test]
    fn stage3_examples() {
        let truth = vec![vec![TapPoint::new(0.0, 0.0), TapPoint::new(100.0, -3.0)]];
        assert_eq!(stage3_loss(&truth, &truth, &cfg()).unwrap(), 0.0);

        let pred = vec![vec![TapPoint::new(0.0, 0.0), TapPoint::new(10.0, -3.0)]];
        let no_rep = MatchConfig { repulsion_alpha: 0.0, ..cfg() };
        let (m, _) = match_loss(&pred[0], &truth[0], &no_rep).unwrap();
        assert_eq!(stage3_loss(&pred, &truth, &no_rep).unwrap(), m);

        let dup = vec![vec![TapPoint::new(0.0, 0.0), TapPoint::new(0.0, 0.0), TapPoint::new(100.0, -3.0)]];
        let c = MatchConfig { repulsion_alpha: 2.5, ..cfg() };
        let with = stage3_loss(&dup, &truth, &c).unwrap();
        let without = stage3_loss(&dup, &truth, &MatchConfig { repulsion_alpha: 0.0, ..c }).unwrap();
        let rep = repulsion_loss(&[0.0, 0.0, 100.0], &c);
        assert!(rep > 0.0);
        assert!((with - without - 2.5 * rep).abs() < 1e-12);

        assert!(matches!(stage3_loss(&dup, &[], &c), Err(Error::Shape(_))));
    }

    fn tap_set(max: usize) -> impl Strategy<Value = Vec<TapPoint>> {
        prop::collection::vec((0.0f64..1000.0, -40.0f64..0.0).prop_map(|(d, p)| TapPoint::new(d, p)), 1..=max)
    }

    proptest! {
        #[test]
        fn match_permutation_invariant(truth in tap_set(5), extra in tap_set(3), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut pred: Vec<TapPoint> = truth.iter().map(|t| TapPoint::new(t.delay_ns + 7.0, t.power_db - 1.0)).collect();
            pred.extend(extra);
            let (base, _) = match_loss(&pred, &truth, &cfg()).unwrap();
            let mut p2 = pred.clone();
            let mut t2 = truth.clone();
            p2.shuffle(&mut rng);
            t2.shuffle(&mut rng);
            let (l, _) = match_loss(&p2, &t2, &cfg()).unwrap();
            prop_assert!((l - base).abs() <= 1e-12 * (1.0 + base));
        }

        #[test]
        fn power_term_scales_quadratically(truth in tap_set(5), s in 0.1f64..10.0) {
            let pred: Vec<TapPoint> = truth.iter().rev().map(|t| TapPoint::new(0.0, t.power_db + 2.0)).collect();
            let truth0: Vec<TapPoint> = truth.iter().map(|t| TapPoint::new(0.0, t.power_db)).collect();
            let scale = |v: &[TapPoint]| v.iter().map(|t| TapPoint::new(0.0, t.power_db * s)).collect::<Vec<_>>();
            let (a, _) = match_loss(&pred, &truth0, &cfg()).unwrap();
            let (b, _) = match_loss(&scale(&pred), &scale(&truth0), &cfg()).unwrap();
            prop_assert!((b - s * s * a).abs() <= 1e-9 * (1.0 + b));
        }

        #[test]
        fn repulsion_zero_iff_separated(d in prop::collection::vec(0.0f64..300.0, 2..8)) {
            let c = cfg();
            let mut min_gap = f64::INFINITY;
            for i in 0..d.len() {
                for j in i + 1..d.len() {
                    min_gap = min_gap.min((d[i] - d[j]).abs());
                }
            }
            prop_assert_eq!(repulsion_loss(&d, &c) == 0.0, min_gap >= c.repulsion_min_sep_ns);
        }

        #[test]
        fn repulsion_monotone_in_crowding(a in 0.0f64..100.0, gap in 0.0f64..60.0, shrink in 0.0f64..1.0) {
            let c = cfg();
            let far = repulsion_loss(&[a, a + gap], &c);
            let near = repulsion_loss(&[a, a + gap * shrink], &c);
            prop_assert!(near >= far);
        }
    }
}
