//! Image containers and the pixel-level primitives shared by every stage.

mod components;
mod grid;
pub mod io;
pub(crate) mod line;
mod morphology;

pub use components::{connected_components, Components, Connectivity};
pub use grid::{BinaryMask, Image, LabelMap, Point};
pub use line::{bresenham, PixelPath};
pub use morphology::{dilate, disc_offsets, erode};
