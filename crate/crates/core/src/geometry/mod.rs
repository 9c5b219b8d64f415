//! Binary-mask and box geometry: IoU, square-element morphology, bounding
//! boxes and point membership.

mod bbox;
mod mask;
mod morphology;

pub use bbox::{bbox_of_mask, box_iou, Bbox, Point2};
pub use mask::{mask_iou, point_in_mask, BinaryMask};
pub use morphology::{
    dilate, dilate_square, erode, erode_square, morph_gradient, StructuringElement,
};
