//! Region catalog, coordinates and nearest-region mapping.

use crate::model::{Quality, RegionId};

use super::WorkloadError;

const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RegionInfo {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// Named cloud sites with coordinates, indexed by [`RegionId`].
#[derive(Clone, Debug, PartialEq)]
pub struct RegionCatalog {
    regions: Vec<RegionInfo>,
}

impl RegionCatalog {
    pub fn new(regions: Vec<RegionInfo>) -> Result<Self, WorkloadError> {
        if regions.is_empty() {
            return Err(WorkloadError::EmptyCatalog);
        }
        for (i, r) in regions.iter().enumerate() {
            check_coords(r.lat, r.lon)?;
            if regions[..i].iter().any(|o| o.name == r.name) {
                return Err(WorkloadError::DuplicateRegion(r.name.clone()));
            }
        }
        Ok(Self { regions })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn get(&self, r: RegionId) -> &RegionInfo {
        &self.regions[r.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (RegionId, &RegionInfo)> {
        self.regions.iter().enumerate().map(|(i, r)| (RegionId(i), r))
    }

    /// Resolves a region given by catalog name or by numeric index.
    pub fn resolve(&self, token: &str) -> Option<RegionId> {
        let t = token.trim();
        if let Ok(i) = t.parse::<usize>() {
            return (i < self.len()).then_some(RegionId(i));
        }
        self.regions.iter().position(|r| r.name == t).map(RegionId)
    }
}

fn check_coords(lat: f64, lon: f64) -> Result<(), WorkloadError> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(WorkloadError::BadCoordinates { lat, lon });
    }
    Ok(())
}

/// Great-circle distance in km.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Nearest catalog site by great-circle distance; ties go to the lowest
/// index.
pub fn map_to_region(lat: f64, lon: f64, catalog: &RegionCatalog) -> Result<RegionId, WorkloadError> {
    check_coords(lat, lon)?;
    let mut best: Option<(f64, RegionId)> = None;
    for (id, r) in catalog.iter() {
        let d = haversine_km(lat, lon, r.lat, r.lon);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, id));
        }
    }
    best.map(|(_, id)| id).ok_or(WorkloadError::EmptyCatalog)
}

/// Quality class nearest to the frame height, ties upward, capped at 720p.
pub fn classify_bitrate(width: u32, height: u32) -> Result<Quality, WorkloadError> {
    if width == 0 || height == 0 {
        return Err(WorkloadError::BadDimensions { width, height });
    }
    let h = i64::from(height);
    let q = Quality::ALL
        .iter()
        .copied()
        .min_by_key(|q| ((i64::from(q.height()) - h).abs(), std::cmp::Reverse(q.height())))
        .expect("four classes");
    Ok(q)
}
