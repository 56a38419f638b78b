//! Great-circle geometry and the maritime predicate library.

mod predicates;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use predicates::{
    builtin_registry, DistanceKernel, HeadingTowardsKernel, InAreaKernel, IsFishingVesselKernel,
    WithinCircleKernel, DEFAULT_HEADING_TOLERANCE_DEG,
};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("coordinates out of range: lon {lon}, lat {lat}")]
    OutOfRange { lon: f64, lat: f64 },
    #[error("polygon `{0}` needs at least 3 distinct vertices")]
    DegeneratePolygon(String),
    #[error("region entry `{0}` must define exactly one of point, polygon or circle")]
    BadRegionEntry(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed regions file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub const fn new(lon: f64, lat: f64) -> Self {
        GeoPoint { lon, lat }
    }

    pub fn checked(lon: f64, lat: f64) -> Result<Self, GeoError> {
        if (-180.0..=180.0).contains(&lon) && (-90.0..=90.0).contains(&lat) {
            Ok(GeoPoint { lon, lat })
        } else {
            Err(GeoError::OutOfRange { lon, lat })
        }
    }
}

/// Haversine distance in kilometres.
pub fn distance_km(p: GeoPoint, q: GeoPoint) -> f64 {
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `p` to `q`, degrees in `[0, 360)`.
pub fn bearing_deg(p: GeoPoint, q: GeoPoint) -> f64 {
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dlambda = (q.lon - p.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

/// Point reached from `p` after travelling `dist_km` on initial bearing `bearing`.
pub fn destination(p: GeoPoint, bearing: f64, dist_km: f64) -> GeoPoint {
    let delta = dist_km / EARTH_RADIUS_KM;
    let theta = bearing.to_radians();
    let phi1 = p.lat.to_radians();
    let lambda1 = p.lon.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1
        + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    GeoPoint {
        lon: (lambda2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0,
        lat: phi2.to_degrees(),
    }
}

/// Smallest absolute difference between two compass angles, in `[0, 180]`.
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Even-odd ray casting in the lon/lat plane. The ring is implicitly closed.
pub fn point_in_polygon(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Polygon(Vec<GeoPoint>),
    Circle { center: GeoPoint, radius_km: f64 },
}

impl Region {
    /// Polygon from a ring; a repeated closing vertex is dropped.
    pub fn polygon(mut ring: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(GeoError::DegeneratePolygon(format!("{ring:?}")));
        }
        Ok(Region::Polygon(ring))
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        match self {
            Region::Polygon(ring) => point_in_polygon(p, ring),
            Region::Circle { center, radius_km } => distance_km(*center, p) < *radius_km,
        }
    }

    /// Vertex average for polygons, the centre for circles.
    pub fn anchor(&self) -> GeoPoint {
        match self {
            Region::Polygon(ring) => {
                let n = ring.len() as f64;
                GeoPoint {
                    lon: ring.iter().map(|p| p.lon).sum::<f64>() / n,
                    lat: ring.iter().map(|p| p.lat).sum::<f64>() / n,
                }
            }
            Region::Circle { center, .. } => *center,
        }
    }
}

/// Background knowledge the maritime predicates consult.
#[derive(Debug, Clone)]
pub struct GeoContext {
    pub points: HashMap<String, GeoPoint>,
    pub regions: HashMap<String, Region>,
    pub fishing_vessels: HashSet<String>,
    pub heading_tolerance_deg: f64,
}

impl Default for GeoContext {
    fn default() -> Self {
        GeoContext {
            points: HashMap::new(),
            regions: HashMap::new(),
            fishing_vessels: HashSet::new(),
            heading_tolerance_deg: DEFAULT_HEADING_TOLERANCE_DEG,
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct CircleEntry {
    center: [f64; 2],
    radius_km: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct RegionEntry {
    name: String,
    #[serde(default)]
    point: Option<[f64; 2]>,
    #[serde(default)]
    polygon: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    circle: Option<CircleEntry>,
}

impl GeoContext {
    /// Loads named points and regions from a JSON list such as
    /// `[{"name": "Port", "point": [lon, lat]}, {"name": "Area", "polygon": [[lon, lat], ...]},
    ///   {"name": "Harbour", "circle": {"center": [lon, lat], "radius_km": 5.0}}]`.
    pub fn load_regions_json(&mut self, text: &str) -> Result<(), GeoError> {
        let entries: Vec<RegionEntry> = serde_json::from_str(text)?;
        for e in entries {
            let defined =
                e.point.is_some() as u8 + e.polygon.is_some() as u8 + e.circle.is_some() as u8;
            if defined != 1 {
                return Err(GeoError::BadRegionEntry(e.name));
            }
            if let Some([lon, lat]) = e.point {
                self.points.insert(e.name, GeoPoint::checked(lon, lat)?);
            } else if let Some(ring) = e.polygon {
                let ring = ring
                    .into_iter()
                    .map(|[lon, lat]| GeoPoint::checked(lon, lat))
                    .collect::<Result<Vec<_>, _>>()?;
                let region = Region::polygon(ring)
                    .map_err(|_| GeoError::DegeneratePolygon(e.name.clone()))?;
                self.regions.insert(e.name, region);
            } else if let Some(c) = e.circle {
                let center = GeoPoint::checked(c.center[0], c.center[1])?;
                self.regions.insert(
                    e.name,
                    Region::Circle {
                        center,
                        radius_km: c.radius_km,
                    },
                );
            }
        }
        Ok(())
    }

    pub fn load_regions_file(&mut self, path: &Path) -> Result<(), GeoError> {
        let text = std::fs::read_to_string(path)?;
        self.load_regions_json(&text)
    }

    /// One vessel id per line; blank lines and `#` comments are skipped.
    pub fn load_fishing_vessels(&mut self, text: &str) {
        for line in text.lines() {
            let id = line.trim();
            if !id.is_empty() && !id.starts_with('#') {
                self.fishing_vessels.insert(id.to_string());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haversine_desk_checks() {
        let p = GeoPoint::new(12.3, -45.6);
        assert_eq!(distance_km(p, p), 0.0);
        let one_deg = distance_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 1.0));
        assert!((one_deg - EARTH_RADIUS_KM * std::f64::consts::PI / 180.0).abs() < 1e-9);
        assert!((one_deg - 111.195).abs() < 1e-3);
        let anti = distance_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(180.0, 0.0));
        assert!((anti - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 0.01);
        assert!((anti - 20015.114).abs() < 1e-3);
    }

    #[test]
    fn symmetry_and_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let mut pt = || GeoPoint::new(rng.gen_range(-180.0..180.0), rng.gen_range(-90.0..90.0));
            let (a, b, c) = (pt(), pt(), pt());
            assert!((distance_km(a, b) - distance_km(b, a)).abs() < 1e-6);
            assert!(distance_km(a, c) <= distance_km(a, b) + distance_km(b, c) + 1e-6);
        }
    }

    #[test]
    fn bearing_and_destination_agree() {
        let port = GeoPoint::new(-4.49, 48.38);
        for (b, d) in [(0.0, 5.0), (90.0, 7.5), (200.0, 12.0), (359.0, 0.3)] {
            let q = destination(port, b, d);
            assert!((distance_km(port, q) - d).abs() < 1e-6);
            assert!(angular_difference(bearing_deg(port, q), b) < 1e-6);
        }
        assert!((bearing_deg(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 1.0)) - 0.0).abs() < 1e-9);
        assert!(
            (bearing_deg(GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 0.0)) - 90.0).abs() < 1e-9
        );
    }

    #[test]
    fn angular_difference_wraps() {
        assert_eq!(angular_difference(350.0, 10.0), 20.0);
        assert_eq!(angular_difference(10.0, 350.0), 20.0);
        assert_eq!(angular_difference(0.0, 180.0), 180.0);
    }

    #[test]
    fn polygon_closure_and_contains() {
        let sq = Region::polygon(vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(1.0, 0.0),
            GeoPoint::new(1.0, 1.0),
            GeoPoint::new(0.0, 1.0),
            GeoPoint::new(0.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(&sq, Region::Polygon(r) if r.len() == 4));
        assert!(sq.contains(GeoPoint::new(0.5, 0.5)));
        assert!(!sq.contains(GeoPoint::new(1.5, 0.5)));
        assert!(Region::polygon(vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 1.0)]).is_err());
    }

    #[test]
    fn regions_file() {
        let mut ctx = GeoContext::default();
        ctx.load_regions_json(
            r#"[{"name": "Port", "point": [-4.49, 48.38]},
                {"name": "Area", "polygon": [[0,0],[1,0],[1,1]]},
                {"name": "Harbour", "circle": {"center": [-4.49, 48.38], "radius_km": 5.0}}]"#,
        )
        .unwrap();
        assert_eq!(ctx.points.len(), 1);
        assert_eq!(ctx.regions.len(), 2);
        assert!(ctx.load_regions_json(r#"[{"name": "Bad"}]"#).is_err());
        ctx.load_fishing_vessels("v1\n\n# comment\nv2\n");
        assert_eq!(ctx.fishing_vessels.len(), 2);
    }
}
