//! Dense neural networks that are partially monotone by construction.
//!
//! A per-feature indicator in `{-1, 0, +1}` routes each input through a
//! weight-sign constraint, and hidden units draw from a three-branch
//! activation family (convex base, concave reflection, saturated). Together
//! these make every declared monotone relationship hold for any parameter
//! values — before, during, and after training — so monotonicity is a
//! structural property, not a regularizer target.
//!
//! Crate layout:
//!
//! * [`numeric`]: dense matrix plumbing and the finite-difference oracle.
//! * [`activation`]: the base activation registry and the three-branch
//!   construction.
//! * [`layer`]: the sign-constrained dense layer with analytic backward.
//! * [`network`]: the two architectures, serialization, and the affine
//!   rescale transform.
//! * [`train`]: losses, optimizers, the deterministic training loop, and
//!   grid search.
//! * [`verify`]: monotonicity/convexity audits and the fit battery.
//! * [`data`]: CSV ingestion, normalization, splits, dataset descriptors,
//!   and the synthetic generator.

pub mod activation;
pub mod data;
pub mod error;
pub mod layer;
pub mod network;
pub mod numeric;
pub mod train;
pub mod verify;

pub use activation::{ActivationKind, ActivationSelector};
pub use data::{
    apply_normalization, builtin_descriptor, generate_synthetic, load_csv, normalize, split_80_20,
    DatasetDescriptor, Normalization, TabularDataset, Task,
};
pub use error::{Error, Result};
pub use layer::{MonotoneDenseLayer, MonotonicityIndicator};
pub use network::{
    build, build_type1, build_type2, load_model, rescale_equivalent, save_model, Architecture,
    FinalActivation, LayerSpec, Network, NetworkSpec, PerFeatureUnit,
};
pub use numeric::Matrix;
pub use train::{
    cross_entropy_loss, evaluate, grid_search, make_optimizer, mse_loss, multi_run, train,
    train_fresh, GridSearchReport, LossKind, Optimizer, SearchSpace, TrainConfig, TrainReport,
};
pub use verify::{
    check_convexity, check_gradient_sign, check_pairwise_monotonicity, universal_fit_battery,
    BatteryReport, ConvexityMode, MonotonicityReport, SamplingBox,
};
