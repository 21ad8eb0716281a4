//! The monotone constrained dense layer.
//!
//! Weights are stored unconstrained; the sign constraint is re-applied at
//! every forward pass, per input feature: a `+1` indicator entry forces the
//! feature's weights through `|w|`, `-1` through `-|w|`, and `0` leaves them
//! free. Optimizers therefore work in an unconstrained parameter space and
//! monotonicity holds unconditionally, not merely after projection steps.

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::activation::{combined, combined_derivative, ActivationKind, ActivationSelector};
use crate::error::{Error, Result};
use crate::numeric::{affine_forward, Matrix};

/// Per-input monotonicity declaration: `+1` non-decreasing, `-1`
/// non-increasing, `0` unconstrained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityIndicator(Vec<i8>);

impl MonotonicityIndicator {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|e| ![-1, 0, 1].contains(*e)) {
            return Err(Error::InvalidConfig(format!(
                "monotonicity indicator entries must be -1, 0, or 1; got {bad}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    /// Indices and signs of the declared-monotone features.
    pub fn monotone_features(&self) -> Vec<(usize, i8)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != 0)
            .map(|(i, &t)| (i, t))
            .collect()
    }

    pub fn any_monotone(&self) -> bool {
        self.0.iter().any(|&t| t != 0)
    }
}

impl Serialize for MonotonicityIndicator {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MonotonicityIndicator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<i8>::deserialize(deserializer)?;
        MonotonicityIndicator::new(entries).map_err(D::Error::custom)
    }
}

/// `sign(w)` with `sign(0) = 0`; the subgradient choice for `d|w|/dw` at zero.
#[inline]
fn sign_or_zero(w: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w.signum()
    }
}

/// Applies the weight-sign operator to an `m x n` matrix whose columns
/// correspond to input features: column `i` is forced nonnegative for
/// `t[i] = 1`, nonpositive for `t[i] = -1`, and left unchanged for `t[i] = 0`.
pub fn apply_indicator(m: &Matrix, t: &MonotonicityIndicator) -> Result<Matrix> {
    if t.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            context: "apply_indicator",
            expected: m.cols(),
            got: t.len(),
        });
    }
    let mut out = m.clone();
    for j in 0..m.rows() {
        for i in 0..m.cols() {
            let v = m.get(j, i);
            match t.get(i) {
                1 => out.set(j, i, v.abs()),
                -1 => out.set(j, i, -v.abs()),
                _ => {}
            }
        }
    }
    Ok(out)
}

/// A dense layer whose effective weights pass through the sign constraint
/// and whose units use the combined three-branch activation.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneDenseLayer {
    /// Unconstrained stored weights, `n x m` (inputs x units). Never mutated
    /// by the constraint itself.
    weights: Matrix,
    bias: Vec<f64>,
    indicator: MonotonicityIndicator,
    selector: ActivationSelector,
    kind: ActivationKind,
    /// Final layers skip the combined activation and emit the raw affine map.
    output_is_linear: bool,
}

impl MonotoneDenseLayer {
    pub fn new(
        weights: Matrix,
        bias: Vec<f64>,
        indicator: MonotonicityIndicator,
        selector: ActivationSelector,
        kind: ActivationKind,
        output_is_linear: bool,
    ) -> Result<Self> {
        if indicator.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                context: "layer indicator",
                expected: weights.rows(),
                got: indicator.len(),
            });
        }
        if bias.len() != weights.cols() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weights.cols(),
                got: bias.len(),
            });
        }
        if selector.width() != weights.cols() {
            return Err(Error::DimensionMismatch {
                context: "layer selector",
                expected: weights.cols(),
                got: selector.width(),
            });
        }
        Ok(Self {
            weights,
            bias,
            indicator,
            selector,
            kind,
            output_is_linear,
        })
    }

    /// Fan-scaled uniform init (limit `sqrt(6 / (n + m))`), zero bias.
    pub fn init<R: Rng>(
        n: usize,
        m: usize,
        indicator: MonotonicityIndicator,
        selector: ActivationSelector,
        kind: ActivationKind,
        output_is_linear: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = (6.0 / (n + m) as f64).sqrt();
        let data = (0..n * m)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self::new(
            Matrix::from_vec(n, m, data)?,
            vec![0.0; m],
            indicator,
            selector,
            kind,
            output_is_linear,
        )
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn indicator(&self) -> &MonotonicityIndicator {
        &self.indicator
    }

    pub fn selector(&self) -> ActivationSelector {
        self.selector
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn output_is_linear(&self) -> bool {
        self.output_is_linear
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// Stored weights with the sign constraint applied per input row
    /// (`n x m` orientation).
    fn constrained_weights(&self) -> Matrix {
        let mut c = self.weights.clone();
        for i in 0..c.rows() {
            let t = self.indicator.get(i);
            if t == 0 {
                continue;
            }
            for j in 0..c.cols() {
                let v = c.get(i, j);
                c.set(i, j, if t == 1 { v.abs() } else { -v.abs() });
            }
        }
        c
    }

    /// Effective `m x n` matrix seen by the layer map, i.e. the sign
    /// constraint applied to the stored weights' transpose.
    pub fn effective_weights(&self) -> Matrix {
        apply_indicator(&self.weights.transposed(), &self.indicator)
            .expect("indicator length is a construction invariant")
    }

    /// Forward map. Returns `(y, h)` where `h` is the pre-activation cache
    /// consumed by [`MonotoneDenseLayer::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = affine_forward(&self.constrained_weights(), x, &self.bias)?;
        let y = if self.output_is_linear {
            h.clone()
        } else {
            combined(self.selector, self.kind, &h)?
        };
        Ok((y, h))
    }

    /// Reverse-mode rule for the full constrained layer. `d|w|/dw = sign(w)`
    /// with `sign(0) = 0`. Returns gradients for the stored (unconstrained)
    /// weights, the bias, and the input.
    pub fn backward(
        &self,
        x: &[f64],
        h: &[f64],
        grad_y: &[f64],
    ) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.weights.rows(), self.weights.cols());
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                context: "layer backward input",
                expected: n,
                got: x.len(),
            });
        }
        if h.len() != m || grad_y.len() != m {
            return Err(Error::DimensionMismatch {
                context: "layer backward gradient",
                expected: m,
                got: grad_y.len().max(h.len()),
            });
        }

        let grad_h: Vec<f64> = if self.output_is_linear {
            grad_y.to_vec()
        } else {
            let d = combined_derivative(self.selector, self.kind, h)?;
            grad_y.iter().zip(&d).map(|(g, dh)| g * dh).collect()
        };

        let mut grad_w = Matrix::zeros(n, m);
        let mut grad_x = vec![0.0; n];
        for i in 0..n {
            let t = self.indicator.get(i);
            let mut acc = 0.0;
            for (j, &gh) in grad_h.iter().enumerate() {
                let w = self.weights.get(i, j);
                let (effective, dw_factor) = match t {
                    1 => (w.abs(), sign_or_zero(w)),
                    -1 => (-w.abs(), -sign_or_zero(w)),
                    _ => (w, 1.0),
                };
                grad_w.set(i, j, dw_factor * x[i] * gh);
                acc += effective * gh;
            }
            grad_x[i] = acc;
        }
        Ok((grad_w, grad_h, grad_x))
    }
}
