//! Runtime audits of the structural guarantees: pairwise ordering checks,
//! finite-difference derivative signs, convexity/concavity midpoint checks,
//! and a trained fit battery covering the three qualitative monotone target
//! shapes (convex, concave, sigmoidal).
//!
//! Audits evaluate the pre-head network output. A linear or sigmoid head is
//! a monotone reparametrization and preserves every ordering tested here; a
//! softmax head mixes outputs and makes per-class monotonicity claims
//! meaningless, so claims stop at the final linear layer.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::{ActivationKind, ActivationSelector};
use crate::data::{DatasetDescriptor, FeatureSpec, TabularDataset, TargetSpec, Task};
use crate::error::{Error, Result};
use crate::layer::MonotonicityIndicator;
use crate::network::{FinalActivation, Network, NetworkSpec};
use crate::numeric::FD_STEP;
use crate::train::{train_fresh, TrainConfig};

/// Ordering slack absorbing float roundoff in otherwise exact comparisons.
pub const ORDER_SLACK: f64 = 1e-12;
/// Slack for finite-difference derivative signs near kinks.
pub const GRADIENT_SLACK: f64 = 1e-8;
/// Slack for midpoint convexity comparisons.
pub const MIDPOINT_SLACK: f64 = 1e-10;

/// Axis-aligned box the audits sample from; stands in for the compact set
/// the guarantees are stated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SamplingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "sampling box bounds",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidConfig(format!(
                    "sampling box needs finite lo < hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[-half_width, half_width]` on every axis.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    /// Per-feature empirical min/max widened by 10% of the range on each
    /// side (a degenerate constant feature widens by 0.5).
    pub fn from_data(data: &TabularDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidConfig("empty dataset has no bounds".into()));
        }
        let d = data.num_features();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in &data.features {
            for i in 0..d {
                lo[i] = lo[i].min(row[i]);
                hi[i] = hi[i].max(row[i]);
            }
        }
        for i in 0..d {
            let margin = (0.1 * (hi[i] - lo[i])).max(0.0);
            let margin = if margin > 0.0 { margin } else { 0.5 };
            lo[i] -= margin;
            hi[i] += margin;
        }
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| rng.random_range(l..h))
            .collect()
    }
}

/// Per-feature outcome of an ordering or derivative-sign audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub feature: usize,
    pub direction: i8,
    pub pairs_tested: usize,
    pub violations: usize,
    /// Largest margin by which an ordering failed; 0 when clean.
    pub worst_violation: f64,
}

pub fn total_violations(reports: &[MonotonicityReport]) -> usize {
    reports.iter().map(|r| r.violations).sum()
}

/// Integrated-form monotonicity audit: for each feature declared monotone,
/// samples `n_pairs` points `x` in the box plus a positive step along that
/// feature, and checks the declared ordering of the two pre-head outputs.
/// A pair counts as one violation if any output coordinate is misordered.
pub fn check_pairwise_monotonicity(
    net: &Network,
    indicator: &MonotonicityIndicator,
    sampling_box: &SamplingBox,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<MonotonicityReport>> {
    if n_pairs == 0 {
        return Err(Error::InvalidConfig("need at least one pair".into()));
    }
    if sampling_box.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "sampling box",
            expected: net.input_dim(),
            got: sampling_box.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for (feature, direction) in indicator.monotone_features() {
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for _ in 0..n_pairs {
            let x = sampling_box.sample(&mut rng);
            let delta = sampling_box.width(feature) * rng.random_range(f64::EPSILON..=1.0);
            let mut x_hi = x.clone();
            x_hi[feature] += delta;
            let y_lo = net.forward_pre_head(&x)?;
            let y_hi = net.forward_pre_head(&x_hi)?;
            let mut pair_worst = 0.0f64;
            for (a, b) in y_lo.iter().zip(&y_hi) {
                let margin = f64::from(direction) * (a - b);
                if margin > ORDER_SLACK {
                    pair_worst = pair_worst.max(margin);
                }
            }
            if pair_worst > 0.0 {
                violations += 1;
                worst = worst.max(pair_worst);
            }
        }
        reports.push(MonotonicityReport {
            feature,
            direction,
            pairs_tested: n_pairs,
            violations,
            worst_violation: worst,
        });
    }
    Ok(reports)
}

/// Derivative-sign audit: central finite differences of each pre-head
/// output w.r.t. each monotone feature at `n_points` random points must
/// carry the declared sign up to [`GRADIENT_SLACK`].
pub fn check_gradient_sign(
    net: &Network,
    indicator: &MonotonicityIndicator,
    sampling_box: &SamplingBox,
    n_points: usize,
    seed: u64,
) -> Result<Vec<MonotonicityReport>> {
    if n_points == 0 {
        return Err(Error::InvalidConfig("need at least one point".into()));
    }
    if sampling_box.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "sampling box",
            expected: net.input_dim(),
            got: sampling_box.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for (feature, direction) in indicator.monotone_features() {
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for _ in 0..n_points {
            let x = sampling_box.sample(&mut rng);
            let mut plus = x.clone();
            plus[feature] += FD_STEP;
            let mut minus = x.clone();
            minus[feature] -= FD_STEP;
            let y_plus = net.forward_pre_head(&plus)?;
            let y_minus = net.forward_pre_head(&minus)?;
            let mut point_worst = 0.0f64;
            for (p, m) in y_plus.iter().zip(&y_minus) {
                let derivative = (p - m) / (2.0 * FD_STEP);
                let margin = -f64::from(direction) * derivative;
                if margin > GRADIENT_SLACK {
                    point_worst = point_worst.max(margin);
                }
            }
            if point_worst > 0.0 {
                violations += 1;
                worst = worst.max(point_worst);
            }
        }
        reports.push(MonotonicityReport {
            feature,
            direction,
            pairs_tested: n_points,
            violations,
            worst_violation: worst,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvexityMode {
    Convex,
    Concave,
}

/// Outcome of a midpoint convexity/concavity audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub mode: ConvexityMode,
    pub triples_tested: usize,
    pub violations: usize,
    pub worst_violation: f64,
}

/// Midpoint audit of the whole network output: convex claims need every
/// hidden selector all-convex, concave claims all-concave (the structural
/// condition the guarantee is stated under); a mixed selector is not a
/// claim this audit can test and is rejected.
pub fn check_convexity(
    net: &Network,
    mode: ConvexityMode,
    sampling_box: &SamplingBox,
    n_triples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if n_triples == 0 {
        return Err(Error::InvalidConfig("need at least one triple".into()));
    }
    for layer in net.all_layers() {
        if layer.output_is_linear() {
            continue;
        }
        let s = layer.selector();
        let ok = match mode {
            ConvexityMode::Convex => s.concave == 0 && s.saturated == 0,
            ConvexityMode::Concave => s.convex == 0 && s.saturated == 0,
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "{mode:?} claim needs matching single-branch selectors, found ({}, {}, {})",
                s.convex, s.concave, s.saturated
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..n_triples {
        let a = sampling_box.sample(&mut rng);
        let b = sampling_box.sample(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let fa = net.forward_pre_head(&a)?;
        let fb = net.forward_pre_head(&b)?;
        let fm = net.forward_pre_head(&mid)?;
        let mut triple_worst = 0.0f64;
        for j in 0..fm.len() {
            let avg = 0.5 * (fa[j] + fb[j]);
            let margin = match mode {
                ConvexityMode::Convex => fm[j] - avg,
                ConvexityMode::Concave => avg - fm[j],
            };
            if margin > MIDPOINT_SLACK {
                triple_worst = triple_worst.max(margin);
            }
        }
        if triple_worst > 0.0 {
            violations += 1;
            worst = worst.max(triple_worst);
        }
    }
    Ok(ConvexityReport {
        mode,
        triples_tested: n_triples,
        violations,
        worst_violation: worst,
    })
}

/// One fit-battery entry: a 1-D monotone target, the selector used, and
/// whether the trained net was expected to reach the threshold (positive
/// cases) or stall above it (the negative control).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryCase {
    pub name: String,
    pub selector: ActivationSelector,
    pub test_mse: f64,
    pub threshold: f64,
    pub should_fit: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub kind: ActivationKind,
    pub seed: u64,
    pub cases: Vec<BatteryCase>,
}

impl BatteryReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

fn grid_dataset(name: &str, lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> TabularDataset {
    let descriptor = DatasetDescriptor {
        name: name.into(),
        task: Task::Regression,
        features: vec![FeatureSpec::monotone("x", 1)],
        target: TargetSpec::plain("y"),
        normalization: None,
    };
    let xs: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    TabularDataset {
        descriptor,
        features: xs.iter().map(|&x| vec![x]).collect(),
        targets: xs.iter().map(|&x| f(x)).collect(),
        dropped_rows: 0,
        filtered_rows: 0,
    }
}

const BATTERY_WIDTH: usize = 32;

#[allow(clippy::too_many_arguments)]
fn battery_case(
    kind: ActivationKind,
    seed: u64,
    name: &str,
    lo: f64,
    hi: f64,
    f: &dyn Fn(f64) -> f64,
    selector: ActivationSelector,
    threshold: f64,
    should_fit: bool,
) -> Result<BatteryCase> {
    let train_data = grid_dataset(name, lo, hi, 256, f);
    // Offset midpoints as the held-out grid.
    let test_half = (hi - lo) / 512.0;
    let test_data = grid_dataset(name, lo + test_half, hi - test_half, 101, f);

    let spec = NetworkSpec {
        architecture: crate::network::Architecture::Type1,
        indicator: MonotonicityIndicator::ones(1),
        hidden: vec![crate::network::LayerSpec {
            width: BATTERY_WIDTH,
            selector: Some(selector),
            kind: None,
        }],
        kind,
        final_activation: FinalActivation::Linear,
        output_dim: 1,
        per_feature_units: Vec::new(),
        free_extractor: Vec::new(),
    };
    let config = TrainConfig {
        learning_rate: 1e-2,
        epochs: 2500,
        batch_size: 32,
        seed,
        ..TrainConfig::default()
    };
    let (_, report) = train_fresh(&spec, &train_data, &test_data, &config)?;
    let mse = report.test_metric;
    Ok(BatteryCase {
        name: name.into(),
        selector,
        test_mse: mse,
        threshold,
        should_fit,
        passed: if should_fit {
            mse < threshold
        } else {
            mse > threshold
        },
    })
}

/// Trains four small constrained nets on canonical 1-D monotone targets:
/// a convex one (exp(x)-1 on [0,2]) with all-convex units, a concave one
/// (ln(1+x) on [0,3]) with all-concave units, a sigmoidal one
/// (1/(1+exp(-5x)) on [-2,2]) with all-saturated units, and the same
/// sigmoidal target with all-convex units as a negative control that must
/// stall: convex functions cannot track the concave right half.
pub fn universal_fit_battery(kind: ActivationKind, seed: u64) -> Result<BatteryReport> {
    let w = BATTERY_WIDTH;
    let cases = vec![
        battery_case(
            kind,
            seed,
            "convex-exp",
            0.0,
            2.0,
            &|x| x.exp() - 1.0,
            ActivationSelector::all_convex(w),
            1e-3,
            true,
        )?,
        battery_case(
            kind,
            seed,
            "concave-log1p",
            0.0,
            3.0,
            &|x| x.ln_1p(),
            ActivationSelector::all_concave(w),
            1e-3,
            true,
        )?,
        battery_case(
            kind,
            seed,
            "sigmoidal-saturated",
            -2.0,
            2.0,
            &|x| 1.0 / (1.0 + (-5.0 * x).exp()),
            ActivationSelector::all_saturated(w),
            1e-3,
            true,
        )?,
        battery_case(
            kind,
            seed,
            "sigmoidal-convex-control",
            -2.0,
            2.0,
            &|x| 1.0 / (1.0 + (-5.0 * x).exp()),
            ActivationSelector::all_convex(w),
            1e-2,
            false,
        )?,
    ];
    Ok(BatteryReport { kind, seed, cases })
}
