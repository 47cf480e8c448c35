//! Evaluation of binary segmentations against multiple acceptable
//! annotations.
//!
//! When several experts annotate the same image, the pixels they all mark
//! form an inner region and the pixels any of them marks form an outer
//! region. A prediction whose boundary stays between the two is acceptable.
//! The extended Dice
//!
//! ```text
//! (|P∩O| + |P∩I|) / (|P| + |I|)
//! ```
//!
//! scores a prediction `P` against inner region `I` and outer region `O`; it
//! is the ordinary Dice when `I = O`. This crate provides the metric, its
//! differentiable loss with an analytic gradient, the conventional
//! Dice/IoU/Hausdorff battery, consensus construction, frame-intensity
//! curves, and ROC analysis of metric scores against quality grades.
//!
//! ```
//! use xdice::{acceptable_region, extended_dice, AnnotationSet, Mask};
//!
//! let a = Mask::from_coords(3, 1, [(0, 0), (0, 1)]).unwrap();
//! let b = Mask::from_coords(3, 1, [(0, 1), (0, 2)]).unwrap();
//! let region = acceptable_region(&AnnotationSet::from_masks(vec![a, b]).unwrap());
//!
//! let prediction = Mask::from_coords(3, 1, [(0, 1), (0, 2)]).unwrap();
//! assert_eq!(extended_dice(&prediction, &region).unwrap(), 1.0);
//! ```

pub mod error;
pub mod evaluation;
pub mod io;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod perfusion;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use evaluation::{compare_metrics_auc, grade_to_class, roc, GradedImage, RocCurve};
pub use loss::{
    batch_extended_dice_loss, extended_dice_loss, finite_difference_check, LossResult,
    SoftPrediction,
};
pub use mask::{
    acceptable_region, intersect_all, majority_vote, union_all, AcceptableRegion, AnnotationSet,
    Mask,
};
pub use metrics::{
    aggregate, dice, extended_dice, hausdorff, hausdorff_with, iou, pairwise_dice_matrix,
    AggregateStat, HausdorffMode, MetricKind, MetricValue, PairwiseMatrix,
};
pub use perfusion::{
    average_curves, curve, curve_error, frame_intensity, IntensityCurve, IntensityFrame,
    IntensityStat,
};
