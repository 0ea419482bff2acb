use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular gate frame. The aperture is `width x height` between the
/// centerlines of the frame bars, which are cylinders of diameter
/// `thickness`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateGeometry {
    pub center: Vector3<f64>,
    /// Unit normal pointing in the direction of traversal.
    pub normal: Vector3<f64>,
    pub width: f64,
    pub height: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Top, Side::Bottom, Side::Left, Side::Right];
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Top => "top",
            Side::Bottom => "bottom",
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top" => Ok(Side::Top),
            "bottom" => Ok(Side::Bottom),
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::invalid(format!("unknown gate side {other:?}"))),
        }
    }
}

/// Where a segment or trajectory crossed the gate plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Interpolation parameter along the segment.
    pub s: f64,
    pub point: Vector3<f64>,
    pub inside: bool,
}

impl GateGeometry {
    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("gate normal must be a unit vector"));
        }
        if self.normal.z.abs() > 0.99 {
            return Err(Error::invalid("gate must stand upright"));
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.thickness >= 0.0) {
            return Err(Error::invalid("gate dimensions must be positive"));
        }
        Ok(())
    }

    /// In-plane unit vectors `(right, up)`; `up` is world z projected onto
    /// the gate plane and `right = normal x up`.
    pub fn axes(&self) -> (Vector3<f64>, Vector3<f64>) {
        let z = Vector3::z();
        let up = (z - self.normal * self.normal.dot(&z)).normalize();
        (self.normal.cross(&up), up)
    }

    /// Midpoint of an edge and the outward in-plane direction for it.
    pub fn edge(&self, side: Side) -> (Vector3<f64>, Vector3<f64>) {
        let (right, up) = self.axes();
        let dir = match side {
            Side::Top => up,
            Side::Bottom => -up,
            Side::Right => right,
            Side::Left => -right,
        };
        let half = match side {
            Side::Top | Side::Bottom => self.height / 2.0,
            Side::Left | Side::Right => self.width / 2.0,
        };
        (self.center + dir * half, dir)
    }

    fn corners(&self) -> [Vector3<f64>; 4] {
        let (right, up) = self.axes();
        let (w, h) = (self.width / 2.0, self.height / 2.0);
        [
            self.center + right * w + up * h,
            self.center - right * w + up * h,
            self.center - right * w - up * h,
            self.center + right * w - up * h,
        ]
    }

    /// Distance from `p` to the surface of the frame bars.
    pub fn frame_distance(&self, p: &Vector3<f64>) -> f64 {
        let c = self.corners();
        (0..4)
            .map(|i| point_segment_distance(p, &c[i], &c[(i + 1) % 4]))
            .fold(f64::INFINITY, f64::min)
            - self.thickness / 2.0
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(&(p - self.center))
    }

    /// Whether an in-plane point lies inside the aperture shrunk by `margin`.
    pub fn in_aperture(&self, p: &Vector3<f64>, margin: f64) -> bool {
        let (right, up) = self.axes();
        let d = p - self.center;
        d.dot(&right).abs() <= self.width / 2.0 - margin && d.dot(&up).abs() <= self.height / 2.0 - margin
    }

    /// Crossing of the segment `a -> b` from the negative to the positive
    /// side (or the reverse), if any.
    pub fn crossing(&self, a: &Vector3<f64>, b: &Vector3<f64>, margin: f64) -> Option<Crossing> {
        let (sa, sb) = (self.signed_distance(a), self.signed_distance(b));
        if (sa < 0.0) == (sb < 0.0) {
            return None;
        }
        let s = sa / (sa - sb);
        let point = a + (b - a) * s;
        Some(Crossing {
            s,
            point,
            inside: self.in_aperture(&point, margin),
        })
    }

    /// Smallest frame distance along the segment `a -> b`.
    pub fn segment_clearance(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let c = self.corners();
        (0..4)
            .map(|i| segment_segment_distance(a, b, &c[i], &c[(i + 1) % 4]))
            .fold(f64::INFINITY, f64::min)
            - self.thickness / 2.0
    }
}

pub fn point_segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * s)).norm()
}

/// Minimum distance between two segments, by clamped closest points.
pub fn segment_segment_distance(p1: &Vector3<f64>, q1: &Vector3<f64>, p2: &Vector3<f64>, q2: &Vector3<f64>) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-15 && e <= 1e-15 {
        return r.norm();
    }
    if a <= 1e-15 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-15 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-15 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Open-top bin. A release counts as placed when the gripper is above the
/// footprint and no higher than `release_ceiling` over the rim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinRegion {
    /// Center of the opening (rim height).
    pub center: Vector3<f64>,
    /// Half sizes of the footprint along x and y.
    pub half_extent: [f64; 2],
    pub release_ceiling: f64,
}

impl BinRegion {
    pub fn contains_release(&self, p: &Vector3<f64>) -> bool {
        (p.x - self.center.x).abs() <= self.half_extent[0]
            && (p.y - self.center.y).abs() <= self.half_extent[1]
            && p.z >= self.center.z
            && p.z <= self.center.z + self.release_ceiling
    }

    fn validate(&self) -> Result<()> {
        if self.half_extent.iter().all(|&h| h > 0.0) && self.release_ceiling > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("bin region is degenerate"))
        }
    }
}

/// Static scene description, read from JSON.
///
/// ```json
/// {"id": "gate", "gate": {"center": [0,0,1.2], "normal": [1,0,0], "width": 1.0,
///  "height": 1.0, "thickness": 0.05}, "object": [3,0,1], "bin": {"center": [3,1.5,0.5],
///  "half_extent": [0.3,0.3], "release_ceiling": 0.8}, "start": [-3,0,1.2],
///  "start_yaw": 0.0, "after_gate": [1.2,0,1.2]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub id: String,
    pub gate: GateGeometry,
    /// Grasp point of the object.
    pub object: Vector3<f64>,
    pub bin: BinRegion,
    pub start: Vector3<f64>,
    #[serde(default)]
    pub start_yaw: f64,
    /// Nominal point the route passes after the gate.
    pub after_gate: Vector3<f64>,
}

impl Scene {
    /// Gate at the origin facing +x, object on a 1 m pedestal beyond it.
    pub fn gate_default() -> Self {
        Scene {
            id: "gate".into(),
            gate: GateGeometry {
                center: Vector3::new(0.0, 0.0, 1.2),
                normal: Vector3::x(),
                width: 1.0,
                height: 1.0,
                thickness: 0.05,
            },
            object: Vector3::new(3.0, 0.0, 1.0),
            bin: BinRegion {
                center: Vector3::new(3.0, 1.5, 0.5),
                half_extent: [0.3, 0.3],
                release_ceiling: 0.8,
            },
            start: Vector3::new(-3.0, 0.0, 1.2),
            start_yaw: 0.0,
            after_gate: Vector3::new(1.2, 0.0, 1.2),
        }
    }

    /// Same layout with the start already past the gate.
    pub fn pick_place_default() -> Self {
        Scene {
            id: "pick_place".into(),
            start: Vector3::new(1.2, 0.0, 1.2),
            ..Self::gate_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        self.bin.validate()?;
        let finite = [self.object, self.start, self.after_gate, self.bin.center]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite || !self.start_yaw.is_finite() {
            return Err(Error::NonFinite { what: "scene" });
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
