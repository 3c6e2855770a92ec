//! En-route charging: charging-zone geometry, per-zone flown distance and
//! the unit-rate x distance x weight charge formula.
//!
//! A trajectory leg longer than [`DENSIFY_KM`] is subdivided into equal
//! great-circle pieces; each piece is attributed to the zone containing its
//! midpoint (first matching zone wins when zones overlap). The charge for a
//! zone is `unit_rate * (km_in_zone / 100) * weight_factor`, with
//! `weight_factor = sqrt(mtow / 50)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{great_circle_km, intermediate_point, point_in_polygon, GeoPoint, Trajectory};

/// Maximum leg length, in kilometres, fed to the midpoint-in-zone test.
pub const DENSIFY_KM: f64 = 50.0;

/// A charging zone: polygon rings plus unit rates (EUR per 100 km per unit
/// weight factor) keyed by charging period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargingZone {
    pub id: String,
    pub rings: Vec<Vec<GeoPoint>>,
    pub unit_rates: BTreeMap<String, f64>,
}

impl ChargingZone {
    pub fn contains(&self, p: GeoPoint) -> bool {
        point_in_polygon(p, &self.rings)
    }
}

/// Ordered collection of charging zones. Order is the file order and decides
/// which zone wins when geometries overlap.
#[derive(Debug, Clone)]
pub struct ZoneSet {
    zones: Vec<ChargingZone>,
}

impl ZoneSet {
    pub fn new(zones: Vec<ChargingZone>) -> Self {
        Self { zones }
    }

    pub fn zones(&self) -> &[ChargingZone] {
        &self.zones
    }

    pub fn zone_ids(&self) -> Vec<String> {
        self.zones.iter().map(|z| z.id.clone()).collect()
    }

    pub fn by_id(&self, id: &str) -> Option<&ChargingZone> {
        self.zones.iter().find(|z| z.id == id)
    }

    /// First zone, in file order, containing the point.
    pub fn find(&self, p: GeoPoint) -> Option<&ChargingZone> {
        self.zones.iter().find(|z| z.contains(p))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_geojson(&text).map_err(|message| Error::FileFormat {
            path: path.display().to_string(),
            line: 0,
            message,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::atomic_write(path, self.to_geojson().as_bytes())
    }

    pub fn from_geojson(text: &str) -> std::result::Result<Self, String> {
        let fc: FeatureCollection =
            serde_json::from_str(text).map_err(|e| format!("invalid zone JSON: {e}"))?;
        if fc.kind != "FeatureCollection" {
            return Err(format!("expected a FeatureCollection, got {:?}", fc.kind));
        }
        let mut zones = Vec::with_capacity(fc.features.len());
        for (i, feature) in fc.features.into_iter().enumerate() {
            if feature.geometry.kind != "Polygon" {
                return Err(format!(
                    "feature {i}: expected Polygon geometry, got {:?}",
                    feature.geometry.kind
                ));
            }
            let mut rings = Vec::with_capacity(feature.geometry.coordinates.len());
            for ring in feature.geometry.coordinates {
                if ring.len() < 3 {
                    return Err(format!("feature {i}: ring with fewer than 3 positions"));
                }
                // GeoJSON positions are [lon, lat].
                rings.push(ring.iter().map(|c| GeoPoint::new(c[1], c[0])).collect());
            }
            zones.push(ChargingZone {
                id: feature.properties.id,
                rings,
                unit_rates: feature.properties.unit_rates,
            });
        }
        Ok(Self { zones })
    }

    pub fn to_geojson(&self) -> String {
        let fc = FeatureCollection {
            kind: "FeatureCollection".to_string(),
            features: self
                .zones
                .iter()
                .map(|z| Feature {
                    kind: "Feature".to_string(),
                    properties: ZoneProperties {
                        id: z.id.clone(),
                        unit_rates: z.unit_rates.clone(),
                    },
                    geometry: Geometry {
                        kind: "Polygon".to_string(),
                        coordinates: z
                            .rings
                            .iter()
                            .map(|ring| ring.iter().map(|p| [p.lon, p.lat]).collect())
                            .collect(),
                    },
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&fc).expect("zone serialization");
        out.push('\n');
        out
    }
}

#[derive(Serialize, Deserialize)]
struct FeatureCollection {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    properties: ZoneProperties,
    geometry: Geometry,
}

#[derive(Serialize, Deserialize)]
struct ZoneProperties {
    id: String,
    unit_rates: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

/// Kilometres flown inside each zone, plus totals for the whole path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneDistanceProfile {
    pub km_by_zone: BTreeMap<String, f64>,
    pub total_km: f64,
    pub orthodrome_km: f64,
}

/// Attribute the flown distance of a trajectory to charging zones.
pub fn zone_distance_profile(trajectory: &Trajectory, zones: &ZoneSet) -> ZoneDistanceProfile {
    let mut km_by_zone: BTreeMap<String, f64> = BTreeMap::new();
    let mut total_km = 0.0;
    for w in trajectory.points.windows(2) {
        let a = w[0].position();
        let b = w[1].position();
        let leg_km = great_circle_km(a, b);
        if leg_km == 0.0 {
            continue;
        }
        let pieces = (leg_km / DENSIFY_KM).ceil().max(1.0) as usize;
        let piece_km = leg_km / pieces as f64;
        for k in 0..pieces {
            let t_mid = (k as f64 + 0.5) / pieces as f64;
            let mid = intermediate_point(a, b, t_mid);
            if let Some(zone) = zones.find(mid) {
                *km_by_zone.entry(zone.id.clone()).or_insert(0.0) += piece_km;
            }
            total_km += piece_km;
        }
    }
    ZoneDistanceProfile {
        km_by_zone,
        total_km,
        orthodrome_km: trajectory.orthodrome_km(),
    }
}

/// Weight factor `sqrt(mtow / 50)` for an MTOW in tonnes.
pub fn weight_factor(mtow_tonnes: f64) -> Result<f64> {
    if !mtow_tonnes.is_finite() || mtow_tonnes <= 0.0 {
        return Err(Error::InvalidMtow(mtow_tonnes));
    }
    Ok((mtow_tonnes / 50.0).sqrt())
}

/// Per-zone and total charge for one flown profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeBreakdown {
    pub by_zone: BTreeMap<String, f64>,
    pub total_eur: f64,
}

/// Price a distance profile for one charging period.
///
/// Every zone present in the profile must exist in `zones` and carry a unit
/// rate for `period`; the distance factor is `km / 100`.
pub fn route_charges(
    profile: &ZoneDistanceProfile,
    zones: &ZoneSet,
    period: &str,
    wf: f64,
) -> Result<ChargeBreakdown> {
    let mut by_zone = BTreeMap::new();
    let mut total_eur = 0.0;
    for (zone_id, km) in &profile.km_by_zone {
        let zone = zones
            .by_id(zone_id)
            .ok_or_else(|| Error::UnknownZone(zone_id.clone()))?;
        let rate = zone
            .unit_rates
            .get(period)
            .ok_or_else(|| Error::MissingUnitRate {
                zone: zone_id.clone(),
                period: period.to_string(),
            })?;
        let charge = rate * (km / 100.0) * wf;
        total_eur += charge;
        by_zone.insert(zone_id.clone(), charge);
    }
    Ok(ChargeBreakdown { by_zone, total_eur })
}
