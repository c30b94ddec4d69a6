//! CMLLR feature transforms and the asynchronous background decoder.
//!
//! Each background condition is a CMLLR transform that maps its frames onto
//! one shared canonical GMM. Decoding finds the best sequence of transforms
//! under a first-order model that stays in the current background with a
//! fixed probability and otherwise switches uniformly.

mod bank;
mod cmllr;

pub use bank::{decode_backgrounds, BackgroundBank, DEFAULT_STAY_PROB};
pub use cmllr::{
    apply_transform, estimate_cmllr, estimate_cmllr_from, transformed_log_likelihood, CmllrFit,
    CmllrTransform, MIN_ABS_DET,
};
