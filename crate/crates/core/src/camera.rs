//! Pinhole cameras and ray generation.
//!
//! Right-handed convention, camera looks along -z, +y up in camera space.
//! Rays pass through pixel centers.

use alloc::string::String;
use alloc::vec::Vec;

use crate::numeric;
use crate::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat4 = [[f64; 4]; 4];

#[inline]
pub fn v_add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn v_sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn v_scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn v_dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn v_cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn v_norm(a: Vec3) -> f64 {
    numeric::sqrt(v_dot(a, a))
}

#[inline]
pub fn v_normalize(a: Vec3) -> Vec3 {
    let n = v_norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub camera_to_world: Mat4,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        camera_to_world: Mat4,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Invalid {
                context: "camera",
                detail: String::from("focal lengths must be positive"),
            });
        }
        if width == 0 || height == 0 {
            return Err(Error::Invalid {
                context: "camera",
                detail: String::from("image dimensions must be positive"),
            });
        }
        let deviation = rotation_orthonormality_deviation(&camera_to_world);
        if deviation > 1e-5 {
            return Err(Error::NonOrthonormalRotation { deviation });
        }
        Ok(Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            camera_to_world,
        })
    }

    pub fn position(&self) -> Vec3 {
        [
            self.camera_to_world[0][3],
            self.camera_to_world[1][3],
            self.camera_to_world[2][3],
        ]
    }

    fn rotate(&self, v: Vec3) -> Vec3 {
        let m = &self.camera_to_world;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// World-space unit direction through the center of pixel (u, v).
    pub fn pixel_direction(&self, u: usize, v: usize) -> Vec3 {
        let x = (u as f64 + 0.5 - self.cx) / self.fx;
        let y = -((v as f64 + 0.5 - self.cy) / self.fy);
        v_normalize(self.rotate([x, y, -1.0]))
    }

    /// A camera at `position` looking at `target`, +y-ish up.
    pub fn look_at(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        position: Vec3,
        target: Vec3,
    ) -> Result<Self> {
        let z_axis = v_normalize(v_sub(position, target)); // camera looks along -z
        let mut up = [0.0, 1.0, 0.0];
        if v_dot(up, z_axis).abs() > 0.999 {
            up = [1.0, 0.0, 0.0];
        }
        let x_axis = v_normalize(v_cross(up, z_axis));
        let y_axis = v_cross(z_axis, x_axis);
        let m = [
            [x_axis[0], y_axis[0], z_axis[0], position[0]],
            [x_axis[1], y_axis[1], z_axis[1], position[1]],
            [x_axis[2], y_axis[2], z_axis[2], position[2]],
            [0.0, 0.0, 0.0, 1.0],
        ];
        Camera::new(fx, fy, cx, cy, width, height, m)
    }
}

/// Max |R^T R - I| over the 3x3 rotation block.
pub fn rotation_orthonormality_deviation(m: &Mat4) -> f64 {
    let mut max_dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let mut dot = 0.0;
            for r in 0..3 {
                dot += m[r][i] * m[r][j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((dot - target).abs());
        }
    }
    max_dev
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    pub near: f64,
    pub far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3, near: f64, far: f64) -> Result<Self> {
        let n = v_norm(dir);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::NonUnitDirection { norm: n });
        }
        if !(near >= 0.0 && near < far) {
            return Err(Error::DegenerateRay { near, far });
        }
        Ok(Ray {
            origin,
            dir,
            near,
            far,
        })
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        v_add(self.origin, v_scale(self.dir, t))
    }
}

/// Rays through the centers of the given pixels.
pub fn generate_rays(
    cam: &Camera,
    pixels: &[(usize, usize)],
    near: f64,
    far: f64,
) -> Result<Vec<Ray>> {
    let origin = cam.position();
    let mut out = Vec::with_capacity(pixels.len());
    for &(u, v) in pixels {
        if u >= cam.width || v >= cam.height {
            return Err(Error::IndexOutOfBounds {
                context: "pixel index",
                index: u.max(v),
                len: cam.width.max(cam.height),
            });
        }
        out.push(Ray::new(origin, cam.pixel_direction(u, v), near, far)?);
    }
    Ok(out)
}

pub const IDENTITY_POSE: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];
