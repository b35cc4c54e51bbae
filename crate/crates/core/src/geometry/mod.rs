//! Vanishing-point estimation, beam regions and beam search-space reduction.

pub mod region;
pub mod search;
pub mod vp;

pub use region::{beam_region_fan, beam_region_strip, beam_regions, regions_svg, BeamRegion, RegionVariant};
pub use search::{isolate_tx, reduce_search_space, SearchSpace};
pub use vp::{estimate_vp, pole_edge_segments, Segment, VanishingPoint};
