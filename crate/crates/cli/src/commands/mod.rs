pub mod augment;
pub mod demo;
pub mod metrics;
pub mod normalize;
pub mod plan;
pub mod sample;
pub mod tile_info;
