pub mod barriers;
pub mod error;
pub mod geometry;
pub mod geotag;
pub mod marking;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod signs;
pub mod superpixel;
pub mod synth;

pub use error::{Error, Result};
