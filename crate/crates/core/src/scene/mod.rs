//! Synthetic street scenes: camera, objects, rendering and detector-input preprocessing.

pub mod camera;
pub mod io;
pub mod preprocess;
pub mod render;
pub mod world;

pub use camera::{Camera, Point2, Vec3};
pub use preprocess::{grayscale, preprocess, Plane, VisualMode};
pub use render::{render, Rendered, RgbImage, BACKGROUND};
pub use world::{
    azimuth_of, spawn_scene, step_scene, tx_azimuth, BsPose, EdgeMode, Lane, ObjectKind,
    StreetBounds, StreetConfig, WorldObject,
};
