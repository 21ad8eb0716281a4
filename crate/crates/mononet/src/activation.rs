//! The base activation family and its three-way construction.
//!
//! Every base activation is zero-centred, monotonically increasing, convex,
//! and bounded below. From a base `f` the module derives:
//!
//! * the concave variant: point reflection `-f(-x)`,
//! * the saturated variant: `f(x+1) - f(1)` for `x < 0`, reflection-shifted
//!   `-f(1-x) + f(1)` for `x >= 0` — bounded on both sides, zero at zero,
//! * the combined per-layer activation, which partitions a layer's units
//!   among the three variants by an [`ActivationSelector`],
//! * a step-function approximant that rescales the saturated variant into
//!   `[0, 1]`.
//!
//! Base activations are strategy objects: each implements [`BaseActivation`]
//! and is registered by name, so model files and CLI flags select them at
//! runtime via [`ActivationKind::from_name`].

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A zero-centred, increasing, convex, lower-bounded scalar activation.
///
/// Implementations must keep all four properties; the derived concave and
/// saturated variants rely on them.
pub trait BaseActivation: Send + Sync {
    /// Lowercase tag used by CLI flags and model files.
    fn name(&self) -> &'static str;

    fn value(&self, x: f64) -> f64;

    /// Derivative, taking the right branch at kinks.
    fn derivative(&self, x: f64) -> f64;

    /// Derivative, taking the left branch at kinks. Smooth activations keep
    /// the default.
    fn derivative_left(&self, x: f64) -> f64 {
        self.derivative(x)
    }

    /// `lim_{x -> -inf} value(x)`; finite by the lower-bound requirement.
    fn lower_limit(&self) -> f64;
}

struct Relu;

impl BaseActivation for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn value(&self, x: f64) -> f64 {
        x.max(0.0)
    }

    fn derivative(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            0.0
        }
    }

    fn derivative_left(&self, x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    fn lower_limit(&self) -> f64 {
        0.0
    }
}

struct Elu;

impl BaseActivation for Elu {
    fn name(&self) -> &'static str {
        "elu"
    }

    fn value(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x
        } else {
            x.exp_m1()
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            x.exp()
        }
    }

    fn lower_limit(&self) -> f64 {
        -1.0
    }
}

/// Standard published SELU scale constant.
pub const SELU_LAMBDA: f64 = 1.0507009873554804934193349852946;
/// Standard published SELU alpha constant.
pub const SELU_ALPHA: f64 = 1.6732632423543772848170429916717;

/// SELU with the standard constants.
///
/// Erratum note: with `alpha > 1` the left derivative at zero (`lambda *
/// alpha`) exceeds the right derivative (`lambda`), so SELU is increasing,
/// zero-centred, and bounded below but NOT globally convex. The
/// convexity-dependent guarantees (convex-branch selectors yielding convex
/// outputs) therefore hold for `relu` and `elu` only; everything resting on
/// monotonicity and boundedness alone still holds for `selu`.
struct Selu;

impl BaseActivation for Selu {
    fn name(&self) -> &'static str {
        "selu"
    }

    fn value(&self, x: f64) -> f64 {
        if x >= 0.0 {
            SELU_LAMBDA * x
        } else {
            SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        if x >= 0.0 {
            SELU_LAMBDA
        } else {
            SELU_LAMBDA * SELU_ALPHA * x.exp()
        }
    }

    fn lower_limit(&self) -> f64 {
        -SELU_LAMBDA * SELU_ALPHA
    }
}

static RELU: Relu = Relu;
static ELU: Elu = Elu;
static SELU: Selu = Selu;

static REGISTRY: [&dyn BaseActivation; 3] = [&RELU, &ELU, &SELU];

/// All registered base activations, in stable name order.
pub fn registry() -> &'static [&'static dyn BaseActivation] {
    &REGISTRY
}

/// Handle to a registered base activation; the unit of runtime selection.
///
/// Compares, hashes, and serializes by registry name.
#[derive(Clone, Copy)]
pub struct ActivationKind(&'static dyn BaseActivation);

impl ActivationKind {
    pub const fn relu() -> Self {
        Self(&RELU)
    }

    pub const fn elu() -> Self {
        Self(&ELU)
    }

    pub const fn selu() -> Self {
        Self(&SELU)
    }

    /// Looks up a registered activation by its lowercase name tag.
    pub fn from_name(name: &str) -> Result<Self> {
        let wanted = name.to_ascii_lowercase();
        REGISTRY
            .iter()
            .find(|base| base.name() == wanted)
            .map(|base| Self(*base))
            .ok_or_else(|| Error::UnknownActivation(name.to_string()))
    }

    /// Every registered kind, in registry order.
    pub fn all() -> Vec<ActivationKind> {
        REGISTRY.iter().map(|base| Self(*base)).collect()
    }

    pub fn name(self) -> &'static str {
        self.0.name()
    }

    /// The convex base function.
    pub fn base(self, x: f64) -> f64 {
        self.0.value(x)
    }

    /// Derivative of the base function (right branch at kinks).
    pub fn base_derivative(self, x: f64) -> f64 {
        self.0.derivative(x)
    }

    /// The concave variant: point reflection of the base about the origin.
    pub fn reflected(self, x: f64) -> f64 {
        -self.0.value(-x)
    }

    /// Derivative of the reflected variant (right branch at kinks).
    pub fn reflected_derivative(self, x: f64) -> f64 {
        self.0.derivative_left(-x)
    }

    /// The saturated variant: bounded on both sides, zero at zero, increasing.
    pub fn saturated(self, x: f64) -> f64 {
        if x < 0.0 {
            self.0.value(x + 1.0) - self.0.value(1.0)
        } else {
            self.reflected(x - 1.0) + self.0.value(1.0)
        }
    }

    /// Derivative of the saturated variant (right branch at kinks).
    pub fn saturated_derivative(self, x: f64) -> f64 {
        if x < 0.0 {
            self.0.derivative(x + 1.0)
        } else {
            self.0.derivative_left(1.0 - x)
        }
    }

    /// `lim_{x -> -inf}` of the base function.
    pub fn lower_limit(self) -> f64 {
        self.0.lower_limit()
    }
}

impl fmt::Debug for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for ActivationKind {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Eq for ActivationKind {}

impl std::hash::Hash for ActivationKind {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name().hash(state);
    }
}

impl Serialize for ActivationKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ActivationKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        ActivationKind::from_name(&name).map_err(D::Error::custom)
    }
}

/// Partition of a layer's units among the convex, concave, and saturated
/// activation branches. Unit `j` (0-based) uses the convex branch for
/// `j < convex`, the concave branch for `j < convex + concave`, and the
/// saturated branch otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivationSelector {
    pub convex: usize,
    pub concave: usize,
    pub saturated: usize,
}

impl ActivationSelector {
    pub fn new(convex: usize, concave: usize, saturated: usize) -> Self {
        Self {
            convex,
            concave,
            saturated,
        }
    }

    pub fn all_convex(width: usize) -> Self {
        Self::new(width, 0, 0)
    }

    pub fn all_concave(width: usize) -> Self {
        Self::new(0, width, 0)
    }

    pub fn all_saturated(width: usize) -> Self {
        Self::new(0, 0, width)
    }

    /// Default split: convex and concave each get `width/3` (one more apiece
    /// while the remainder allows), the saturated branch takes the rest, so
    /// all three branches are populated whenever `width >= 3`.
    pub fn split_default(width: usize) -> Self {
        let third = width / 3;
        let rem = width % 3;
        Self {
            convex: third + usize::from(rem > 0),
            concave: third + usize::from(rem > 1),
            saturated: third,
        }
    }

    /// Layer width this selector describes.
    pub fn width(&self) -> usize {
        self.convex + self.concave + self.saturated
    }
}

impl Serialize for ActivationSelector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        [self.convex, self.concave, self.saturated].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ActivationSelector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [convex, concave, saturated] = <[usize; 3]>::deserialize(deserializer)?;
        Ok(Self::new(convex, concave, saturated))
    }
}

/// Applies the partitioned activation to a pre-activation vector.
pub fn combined(selector: ActivationSelector, kind: ActivationKind, h: &[f64]) -> Result<Vec<f64>> {
    if selector.width() != h.len() {
        return Err(Error::DimensionMismatch {
            context: "combined activation selector",
            expected: h.len(),
            got: selector.width(),
        });
    }
    Ok(h.iter()
        .enumerate()
        .map(|(j, &hj)| {
            if j < selector.convex {
                kind.base(hj)
            } else if j < selector.convex + selector.concave {
                kind.reflected(hj)
            } else {
                kind.saturated(hj)
            }
        })
        .collect())
}

/// Elementwise derivative of [`combined`]; every entry is nonnegative.
pub fn combined_derivative(
    selector: ActivationSelector,
    kind: ActivationKind,
    h: &[f64],
) -> Result<Vec<f64>> {
    if selector.width() != h.len() {
        return Err(Error::DimensionMismatch {
            context: "combined activation selector",
            expected: h.len(),
            got: selector.width(),
        });
    }
    Ok(h.iter()
        .enumerate()
        .map(|(j, &hj)| {
            if j < selector.convex {
                kind.base_derivative(hj)
            } else if j < selector.convex + selector.concave {
                kind.reflected_derivative(hj)
            } else {
                kind.saturated_derivative(hj)
            }
        })
        .collect())
}

/// Step-function approximant: the saturated variant rescaled into `[0, 1]`
/// and evaluated at `a * x`. Exactly `0.5` at `x = 0`; converges pointwise to
/// the unit step as `a` grows.
pub fn heavyside_approximant(kind: ActivationKind, x: f64, a: f64) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "step-approximant sharpness must be positive, got {a}"
        )));
    }
    // Shift by -lower_limit + base(1): the exact range half-width of the
    // saturated variant, so the output spans [0, 1].
    let shift = kind.base(1.0) - kind.lower_limit();
    Ok((kind.saturated(a * x) + shift) / (2.0 * shift))
}
