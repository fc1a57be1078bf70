//! Pinhole camera model and the camera/world coordinate frames.
//!
//! Camera frame: x right, y down, z forward along the optical axis.
//! World frame: X right (same as camera x), Y forward, Z up, ground at Z = 0.
//! The camera is mounted level at `camera_height` above the ground, so the
//! transform between the two frames is an axis relabeling plus a height offset.

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::DepthSample;

/// Marker trait for coordinate frames a [`Point3`] can live in.
pub trait Frame: Copy + Clone + fmt::Debug + PartialEq + Default + Send + Sync + 'static {
    const NAME: &'static str;
}

/// Camera optical frame (x right, y down, z forward).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Camera;

/// World frame (X right, Y forward, Z up, ground plane Z = 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct World;

impl Frame for Camera {
    const NAME: &'static str = "camera";
}

impl Frame for World {
    const NAME: &'static str = "world";
}

/// A 3D point in meters, tagged with the frame it is expressed in.
///
/// Arithmetic is only defined between points of the same frame, so mixing
/// camera and world coordinates is a compile error.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Point3<F: Frame> {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    frame: PhantomData<F>,
}

impl<F: Frame> Point3<F> {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, frame: PhantomData }
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<F: Frame> fmt::Debug for Point3<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point3<{}>({}, {}, {})", F::NAME, self.x, self.y, self.z)
    }
}

impl<F: Frame> Sub for Point3<F> {
    type Output = Vector3<f64>;

    fn sub(self, rhs: Self) -> Vector3<f64> {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<F: Frame> Add<Vector3<f64>> for Point3<F> {
    type Output = Point3<F>;

    fn add(self, rhs: Vector3<f64>) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<F: Frame> Sub<Vector3<f64>> for Point3<F> {
    type Output = Point3<F>;

    fn sub(self, rhs: Vector3<f64>) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Pinhole intrinsics plus the mounting height of a level camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Height of the optical center above the ground plane, meters.
    pub camera_height: f64,
    /// Horizontal field of view in degrees. Informational only.
    pub hfov_deg: f64,
}

/// Default sensor: 640x480 with a 68 degree horizontal field of view.
pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;
pub const DEFAULT_HFOV_DEG: f64 = 68.0;
pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.0;

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::from_hfov(DEFAULT_WIDTH, DEFAULT_HEIGHT, DEFAULT_HFOV_DEG, DEFAULT_CAMERA_HEIGHT)
            .expect("default intrinsics are valid")
    }
}

impl CameraIntrinsics {
    #[allow(clippy::too_many_arguments)]
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, camera_height: f64) -> Result<Self> {
        let hfov_deg = if fx > 0.0 { 2.0 * (f64::from(width) / (2.0 * fx)).atan().to_degrees() } else { f64::NAN };
        let intr = Self { fx, fy, cx, cy, width, height, camera_height, hfov_deg };
        intr.validate()?;
        Ok(intr)
    }

    /// Square pixels, principal point at the image center.
    pub fn from_hfov(width: u32, height: u32, hfov_deg: f64, camera_height: f64) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(Error::InvalidIntrinsics(format!("hfov_deg {hfov_deg} outside (0, 180)")));
        }
        let fx = f64::from(width) / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
        let intr = Self {
            fx,
            fy: fx,
            cx: f64::from(width) / 2.0,
            cy: f64::from(height) / 2.0,
            width,
            height,
            camera_height,
            hfov_deg,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            problems.push(format!("fx must be > 0 (got {})", self.fx));
        }
        if !(self.fy > 0.0 && self.fy.is_finite()) {
            problems.push(format!("fy must be > 0 (got {})", self.fy));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            problems.push(format!("cx must lie in [0, width) (got {})", self.cx));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            problems.push(format!("cy must lie in [0, height) (got {})", self.cy));
        }
        if !(self.camera_height > 0.0 && self.camera_height.is_finite()) {
            problems.push(format!("camera_height must be > 0 (got {})", self.camera_height));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidIntrinsics(problems.join("; ")))
        }
    }

    /// Parses the intrinsics TOML file format.
    ///
    /// `width`, `height` and `camera_height` are required. Either give
    /// `hfov_deg` (square pixels, centered principal point) or explicit
    /// `fx`/`fy`/`cx`/`cy`; explicit values win when both are present.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: IntrinsicsFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_intrinsics()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("intrinsics serialize")
    }

    pub fn deproject(&self, sample: &DepthSample) -> Result<Point3<Camera>> {
        deproject(sample, self)
    }

    pub fn project(&self, p: &Point3<Camera>) -> Result<DepthSample> {
        project(p, self)
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= f64::from(self.width) && v <= f64::from(self.height)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntrinsicsFile {
    width: u32,
    height: u32,
    camera_height: f64,
    hfov_deg: Option<f64>,
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
}

impl IntrinsicsFile {
    fn into_intrinsics(self) -> Result<CameraIntrinsics> {
        let base = match self.hfov_deg {
            Some(hfov) => Some(CameraIntrinsics::from_hfov(self.width, self.height, hfov, self.camera_height)?),
            None => None,
        };
        let pick = |explicit: Option<f64>, derived: Option<f64>, name: &str| {
            explicit
                .or(derived)
                .ok_or_else(|| Error::Config(format!("intrinsics file needs either `{name}` or `hfov_deg`")))
        };
        let fx = pick(self.fx, base.map(|b| b.fx), "fx")?;
        let fy = pick(self.fy, base.map(|b| b.fy), "fy")?;
        let cx = pick(self.cx, base.map(|b| b.cx), "cx")?;
        let cy = pick(self.cy, base.map(|b| b.cy), "cy")?;
        let mut intr = CameraIntrinsics::new(fx, fy, cx, cy, self.width, self.height, self.camera_height)?;
        if let Some(h) = self.hfov_deg {
            intr.hfov_deg = h;
        }
        Ok(intr)
    }
}

/// Back-projects a pixel with depth into the camera frame.
pub fn deproject(sample: &DepthSample, intr: &CameraIntrinsics) -> Result<Point3<Camera>> {
    deproject_pixel(sample.u, sample.v, sample.z, intr)
}

pub fn deproject_pixel(u: f64, v: f64, z: f64, intr: &CameraIntrinsics) -> Result<Point3<Camera>> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidSample(z));
    }
    Ok(Point3::new((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z))
}

/// Projects a camera-frame point to pixel coordinates, keeping its depth.
pub fn project(p: &Point3<Camera>, intr: &CameraIntrinsics) -> Result<DepthSample> {
    if !(p.z > 0.0 && p.z.is_finite()) {
        return Err(Error::BehindCamera(p.z));
    }
    Ok(DepthSample { u: intr.fx * p.x / p.z + intr.cx, v: intr.fy * p.y / p.z + intr.cy, z: p.z })
}

pub fn camera_to_world(p: &Point3<Camera>, intr: &CameraIntrinsics) -> Point3<World> {
    Point3::new(p.x, p.z, intr.camera_height - p.y)
}

pub fn world_to_camera(p: &Point3<World>, intr: &CameraIntrinsics) -> Point3<Camera> {
    Point3::new(p.x, intr.camera_height - p.z, p.y)
}
