//! Workspace geometry: points, cylindrical obstacles and safe-set queries.
//!
//! Agents are treated as points. A body radius, when needed, is folded into
//! the obstacles through [`Environment::inflation`].

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point or displacement in the world frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Distance between the projections onto the XY plane.
    pub fn distance_xy(self, other: Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Linear interpolation, `w = 0` gives `self`.
    pub fn lerp(self, other: Vec3, w: f64) -> Vec3 {
        self + (other - self) * w
    }

    /// Rotates the XY components by `yaw` radians about +z.
    pub fn rotate_yaw(self, yaw: f64) -> Vec3 {
        let (s, c) = yaw.sin_cos();
        Vec3::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cylinder radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("cylinder z extent is empty: z_min {z_min} >= z_max {z_max}")]
    EmptyExtent { z_min: f64, z_max: f64 },
    #[error("workspace bounds are empty along at least one axis")]
    EmptyBounds,
    #[error("inflation must be non-negative, got {0}")]
    NegativeInflation(f64),
    #[error("non-finite value in environment description")]
    NonFinite,
}

/// Vertical cylinder with a finite z extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    #[serde(rename = "cx")]
    pub center_x: f64,
    #[serde(rename = "cy")]
    pub center_y: f64,
    #[serde(rename = "r")]
    pub radius: f64,
    #[serde(rename = "z0")]
    pub z_min: f64,
    #[serde(rename = "z1")]
    pub z_max: f64,
}

impl Cylinder {
    pub fn new(
        center_x: f64,
        center_y: f64,
        radius: f64,
        z_min: f64,
        z_max: f64,
    ) -> Result<Self, GeometryError> {
        let c = Cylinder {
            center_x,
            center_y,
            radius,
            z_min,
            z_max,
        };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), GeometryError> {
        let vals = [
            self.center_x,
            self.center_y,
            self.radius,
            self.z_min,
            self.z_max,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if self.radius <= 0.0 {
            return Err(GeometryError::NonPositiveRadius(self.radius));
        }
        if self.z_min >= self.z_max {
            return Err(GeometryError::EmptyExtent {
                z_min: self.z_min,
                z_max: self.z_max,
            });
        }
        Ok(())
    }

    /// Signed clearance of `r` from this cylinder grown radially by `inflation`.
    ///
    /// Inside the z extent this is the XY distance to the axis minus the grown
    /// radius. Above or below the extent it is the Euclidean distance to the
    /// grown solid, which is always positive.
    pub fn clearance(&self, r: Vec3, inflation: f64) -> f64 {
        let radial = (r.x - self.center_x).hypot(r.y - self.center_y) - self.radius - inflation;
        if r.z >= self.z_min && r.z <= self.z_max {
            return radial;
        }
        let dz = if r.z < self.z_min {
            self.z_min - r.z
        } else {
            r.z - self.z_max
        };
        let dr = radial.max(0.0);
        (dr * dr + dz * dz).sqrt()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvironmentRepr {
    bounds: [Vec3; 2],
    cylinders: Vec<Cylinder>,
    inflation: f64,
}

/// Axis-aligned workspace box populated with cylinders.
///
/// The safe set is the open interior of the box minus the inflated
/// cylinders; boundary points are unsafe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentRepr", into = "EnvironmentRepr")]
pub struct Environment {
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
    pub obstacles: Vec<Cylinder>,
    pub inflation: f64,
}

impl TryFrom<EnvironmentRepr> for Environment {
    type Error = GeometryError;
    fn try_from(r: EnvironmentRepr) -> Result<Self, Self::Error> {
        Environment::new(r.bounds[0], r.bounds[1], r.cylinders, r.inflation)
    }
}

impl From<Environment> for EnvironmentRepr {
    fn from(e: Environment) -> Self {
        EnvironmentRepr {
            bounds: [e.bounds_min, e.bounds_max],
            cylinders: e.obstacles,
            inflation: e.inflation,
        }
    }
}

impl Environment {
    pub fn new(
        bounds_min: Vec3,
        bounds_max: Vec3,
        obstacles: Vec<Cylinder>,
        inflation: f64,
    ) -> Result<Self, GeometryError> {
        if !bounds_min.is_finite() || !bounds_max.is_finite() || !inflation.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if bounds_min.x >= bounds_max.x
            || bounds_min.y >= bounds_max.y
            || bounds_min.z >= bounds_max.z
        {
            return Err(GeometryError::EmptyBounds);
        }
        if inflation < 0.0 {
            return Err(GeometryError::NegativeInflation(inflation));
        }
        for c in &obstacles {
            c.check()?;
        }
        Ok(Environment {
            bounds_min,
            bounds_max,
            obstacles,
            inflation,
        })
    }

    /// An obstacle-free box.
    pub fn empty(bounds_min: Vec3, bounds_max: Vec3) -> Result<Self, GeometryError> {
        Environment::new(bounds_min, bounds_max, Vec::new(), 0.0)
    }

    /// Same obstacles with a different inflation radius.
    pub fn with_inflation(&self, inflation: f64) -> Result<Self, GeometryError> {
        Environment::new(
            self.bounds_min,
            self.bounds_max,
            self.obstacles.clone(),
            inflation,
        )
    }

    /// Distance to the nearest box face, negative outside the box.
    pub fn boundary_clearance(&self, r: Vec3) -> f64 {
        let lo = r - self.bounds_min;
        let hi = self.bounds_max - r;
        lo.x.min(lo.y).min(lo.z).min(hi.x).min(hi.y).min(hi.z)
    }

    /// Signed clearance of `r`: negative inside an obstacle or outside the box.
    pub fn min_clearance(&self, r: Vec3) -> f64 {
        self.obstacles
            .iter()
            .map(|c| c.clearance(r, self.inflation))
            .fold(self.boundary_clearance(r), f64::min)
    }

    pub fn in_safe_set(&self, r: Vec3) -> bool {
        let inside_box = r.x > self.bounds_min.x
            && r.x < self.bounds_max.x
            && r.y > self.bounds_min.y
            && r.y < self.bounds_max.y
            && r.z > self.bounds_min.z
            && r.z < self.bounds_max.z;
        inside_box
            && self.obstacles.iter().all(|c| {
                r.z < c.z_min
                    || r.z > c.z_max
                    || (r.x - c.center_x).hypot(r.y - c.center_y) - c.radius - self.inflation > 0.0
            })
    }

    /// True when every point within `margin` of `r` is in the safe set.
    pub fn clear_by(&self, r: Vec3, margin: f64) -> bool {
        self.min_clearance(r) > margin
    }
}
