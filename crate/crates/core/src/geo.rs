//! Spherical geometry on a 6371 km earth: haversine distances, great-circle
//! interpolation and the even-odd point-in-polygon test used for zone lookup.

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const KM_PER_NM: f64 = 1.852;

const DEG2RAD: f64 = std::f64::consts::PI / 180.0;
const RAD2DEG: f64 = 180.0 / std::f64::consts::PI;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && self.lat.abs() <= 90.0
            && self.lon.abs() <= 180.0
    }
}

/// Haversine great-circle distance in kilometres.
pub fn great_circle_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat * DEG2RAD;
    let lat2 = b.lat * DEG2RAD;
    let dlat = (b.lat - a.lat) * DEG2RAD;
    let dlon = (b.lon - a.lon) * DEG2RAD;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

fn unit_vector(p: GeoPoint) -> [f64; 3] {
    let lat = p.lat * DEG2RAD;
    let lon = p.lon * DEG2RAD;
    [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
}

fn from_unit_vector(v: [f64; 3]) -> GeoPoint {
    let lat = v[2].clamp(-1.0, 1.0).asin() * RAD2DEG;
    let lon = v[1].atan2(v[0]) * RAD2DEG;
    GeoPoint::new(lat, lon)
}

/// Point at fraction `t` along the great circle from `a` to `b`.
///
/// Degenerate pairs (coincident or antipodal endpoints, where the great
/// circle is not unique) return `a`.
pub fn intermediate_point(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    let va = unit_vector(a);
    let vb = unit_vector(b);
    let dot = (va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]).clamp(-1.0, 1.0);
    let omega = dot.acos();
    let sin_omega = omega.sin();
    if sin_omega < 1e-12 {
        return a;
    }
    let ca = ((1.0 - t) * omega).sin() / sin_omega;
    let cb = (t * omega).sin() / sin_omega;
    let v = [
        ca * va[0] + cb * vb[0],
        ca * va[1] + cb * vb[1],
        ca * va[2] + cb * vb[2],
    ];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    from_unit_vector([v[0] / norm, v[1] / norm, v[2] / norm])
}

/// One sample of a flown path: position, altitude and timestamp.
///
/// Serialized as the flat array `[lat, lon, alt_ft, time_s]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct TrajectoryPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt_ft: f64,
    pub time_s: f64,
}

impl TrajectoryPoint {
    pub fn new(lat: f64, lon: f64, alt_ft: f64, time_s: f64) -> Self {
        Self {
            lat,
            lon,
            alt_ft,
            time_s,
        }
    }

    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

impl From<[f64; 4]> for TrajectoryPoint {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<TrajectoryPoint> for [f64; 4] {
    fn from(p: TrajectoryPoint) -> Self {
        [p.lat, p.lon, p.alt_ft, p.time_s]
    }
}

/// An ordered sequence of trajectory points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(points: Vec<TrajectoryPoint>) -> Self {
        Self { points }
    }

    pub fn first(&self) -> GeoPoint {
        self.points[0].position()
    }

    pub fn last(&self) -> GeoPoint {
        self.points[self.points.len() - 1].position()
    }

    /// Flown length: sum of great-circle lengths of consecutive legs.
    pub fn path_km(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| great_circle_km(w[0].position(), w[1].position()))
            .sum()
    }

    /// Great-circle distance between the first and last points.
    pub fn orthodrome_km(&self) -> f64 {
        great_circle_km(self.first(), self.last())
    }

    /// Structural checks applied when flights are loaded: at least two
    /// points, valid coordinates and strictly increasing timestamps.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.points.len() < 2 {
            return Err(format!(
                "trajectory needs at least 2 points, got {}",
                self.points.len()
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.position().is_valid() {
                return Err(format!("point {i} has invalid coordinates ({}, {})", p.lat, p.lon));
            }
            if !p.time_s.is_finite() || !p.alt_ft.is_finite() {
                return Err(format!("point {i} has non-finite altitude or time"));
            }
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if w[1].time_s <= w[0].time_s {
                return Err(format!(
                    "timestamps must be strictly increasing, point {} -> {}",
                    i,
                    i + 1
                ));
            }
        }
        Ok(())
    }
}

/// Even-odd ray-casting test, treating lat/lon as planar coordinates.
///
/// `rings` holds one or more closed rings; a point inside an odd number of
/// rings is inside the polygon, so additional rings act as holes. Works for
/// rings stored with or without the repeated closing vertex.
pub fn point_in_polygon(p: GeoPoint, rings: &[Vec<GeoPoint>]) -> bool {
    let mut inside = false;
    for ring in rings {
        let n = ring.len();
        if n < 3 {
            continue;
        }
        let mut j = n - 1;
        for i in 0..n {
            let a = ring[i];
            let b = ring[j];
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let cross = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
                if p.lon < cross {
                    inside = !inside;
                }
            }
            j = i;
        }
    }
    inside
}
