//! Texture-aware superpixels from patch-based nearest-neighbor clustering.
//!
//! Pixels are clustered by matching each pixel's patch against patches in a
//! spatially constrained window with a PatchMatch-style search. A pixel takes
//! the label of the superpixel owning its best correspondence. Several
//! independent estimations are merged by per-pixel majority vote, and
//! connectivity is enforced at the end.
//!
//! ```no_run
//! use nnsc::{image::LabImage, clustering::{nnsc_decompose, NnscParams}};
//!
//! let raster = image::open("input.png").unwrap().to_rgb8();
//! let lab = LabImage::from_rgb8(&raster);
//! let params = NnscParams { k: 200, ..NnscParams::default() };
//! let decomposition = nnsc_decompose(&lab, &params).unwrap();
//! println!("{} superpixels", decomposition.labels.num_labels());
//! ```

pub mod cli;
pub mod clustering;
pub mod datasets;
pub mod error;
pub mod image;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
