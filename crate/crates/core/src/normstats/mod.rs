//! Instance normalization and whitening, in both self-statistics form
//! (IN, IW) and thumbnail-statistics form (TIN, TIW).
//!
//! The thumbnail forms take statistics captured elsewhere, usually from a
//! downscaled copy of the whole image. Once the statistics are fixed each
//! layer is a pointwise affine map, so every patch of the image goes through
//! exactly the same transform and patch outputs line up.

mod bank;
mod stats;
mod whiten;

pub use bank::{BankEntry, BankMode, StatsBank};
pub use stats::{
    adain_transfer, blend_style, channel_stats, instance_norm, thumbnail_instance_norm, AffineParams,
    ChannelStats, EPS,
};
pub use whiten::{
    instance_whiten, symmetric_eigen, thumbnail_instance_whiten, whitening_stats, WhiteningStats,
};

pub(crate) use stats::{adain_in_place, channel_stats_view, normalize_in_place};
pub(crate) use whiten::{whiten_into, whitening_stats_view};
