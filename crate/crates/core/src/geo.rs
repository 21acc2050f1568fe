//! Link geometry and satellite-crop parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Minimum along-link crop width.
pub const GLOBAL_MIN_WIDTH_M: f64 = 256.0;
/// Along-link margin applied to the Tx–Rx distance.
pub const GLOBAL_WIDTH_FACTOR: f64 = 1.1;
pub const GLOBAL_HEIGHT_M: f64 = 128.0;
pub const GLOBAL_OUT_PX: (u32, u32) = (512, 256);
pub const LOCAL_SIDE_M: f64 = 256.0;
pub const LOCAL_OUT_PX: (u32, u32) = (224, 224);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        let p = Self { lat_deg, lon_deg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat_deg) || !(-180.0..=180.0).contains(&self.lon_deg) {
            return Err(Error::Validation(format!(
                "coordinate ({}, {}) out of range",
                self.lat_deg, self.lon_deg
            )));
        }
        Ok(())
    }

    /// Parses `"lat,lon"`.
    pub fn parse(s: &str) -> Result<Self> {
        let (lat, lon) = s
            .split_once(',')
            .ok_or_else(|| Error::Validation(format!("expected \"lat,lon\", got {s:?}")))?;
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| Error::Validation(format!("bad coordinate {x:?}: {e}")))
        };
        Self::new(num(lat)?, num(lon)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub distance_m: f64,
    /// Initial bearing from Tx to Rx, clockwise from north, in `[0, 360)`.
    pub azimuth_deg: f64,
    /// Tx and Rx coincide; the azimuth is a placeholder 0.
    pub coincident: bool,
}

/// Haversine distance and initial bearing from `tx` to `rx`.
pub fn link_geometry(tx: &GeoPoint, rx: &GeoPoint) -> LinkGeometry {
    let (p1, p2) = (tx.lat_deg.to_radians(), rx.lat_deg.to_radians());
    let dphi = p2 - p1;
    let dlambda = (rx.lon_deg - tx.lon_deg).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlambda / 2.0).sin().powi(2);
    let distance_m = 2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin();
    if distance_m == 0.0 {
        return LinkGeometry {
            distance_m: 0.0,
            azimuth_deg: 0.0,
            coincident: true,
        };
    }
    let y = dlambda.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dlambda.cos();
    LinkGeometry {
        distance_m,
        azimuth_deg: normalize_deg(y.atan2(x).to_degrees()),
        coincident: false,
    }
}

/// Wraps into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r >= 360.0 { 0.0 } else { r }
}

/// Great-circle midpoint.
pub fn midpoint(a: &GeoPoint, b: &GeoPoint) -> GeoPoint {
    let (p1, l1) = (a.lat_deg.to_radians(), a.lon_deg.to_radians());
    let (p2, l2) = (b.lat_deg.to_radians(), b.lon_deg.to_radians());
    let dl = l2 - l1;
    let bx = p2.cos() * dl.cos();
    let by = p2.cos() * dl.sin();
    let lat = (p1.sin() + p2.sin()).atan2(((p1.cos() + bx).powi(2) + by * by).sqrt());
    let lon = l1 + by.atan2(p1.cos() + bx);
    GeoPoint {
        lat_deg: lat.to_degrees(),
        lon_deg: (lon.to_degrees() + 540.0).rem_euclid(360.0) - 180.0,
    }
}

/// East/north offset of `p` from `origin` in metres (equirectangular).
pub fn local_offset_m(origin: &GeoPoint, p: &GeoPoint) -> (f64, f64) {
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    let east = (p.lon_deg - origin.lon_deg) * k * origin.lat_deg.to_radians().cos();
    let north = (p.lat_deg - origin.lat_deg) * k;
    (east, north)
}

/// Inverse of [`local_offset_m`].
pub fn offset_to_geo(origin: &GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    GeoPoint {
        lat_deg: origin.lat_deg + north_m / k,
        lon_deg: origin.lon_deg + east_m / (k * origin.lat_deg.to_radians().cos()),
    }
}

/// A rotated ground rectangle and the pixel size it is resampled to.
///
/// `rotation_deg` turns the crop frame clockwise: at 0 the crop's `+x`
/// axis points east and `+y` south, so a north-up source is copied as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub width_m: f64,
    pub height_m: f64,
    pub out_width_px: u32,
    pub out_height_px: u32,
    pub center: GeoPoint,
    pub rotation_deg: f64,
}

impl CropSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.width_m > 0.0 && self.height_m > 0.0) || self.out_width_px == 0 || self.out_height_px == 0 {
            return Err(Error::Validation("crop dimensions must be positive".into()));
        }
        self.center.validate()
    }
}

/// Rotation that lays a link with bearing `azimuth_deg` along `+x`
/// (Tx on the left, Rx on the right).
pub fn alignment_rotation(azimuth_deg: f64) -> f64 {
    normalize_deg(azimuth_deg - 90.0)
}

/// Link-wide crop: at least 256 m along the link, 128 m across, 512 × 256 px.
pub fn global_crop_spec(geom: &LinkGeometry, midpoint: &GeoPoint) -> CropSpec {
    CropSpec {
        width_m: (GLOBAL_WIDTH_FACTOR * geom.distance_m).max(GLOBAL_MIN_WIDTH_M),
        height_m: GLOBAL_HEIGHT_M,
        out_width_px: GLOBAL_OUT_PX.0,
        out_height_px: GLOBAL_OUT_PX.1,
        center: *midpoint,
        rotation_deg: alignment_rotation(geom.azimuth_deg),
    }
}

/// 256 m square around the Rx at 224 × 224 px, same alignment as the global crop.
pub fn local_crop_spec(rx: &GeoPoint, geom: &LinkGeometry) -> CropSpec {
    CropSpec {
        width_m: LOCAL_SIDE_M,
        height_m: LOCAL_SIDE_M,
        out_width_px: LOCAL_OUT_PX.0,
        out_height_px: LOCAL_OUT_PX.1,
        center: *rx,
        rotation_deg: alignment_rotation(geom.azimuth_deg),
    }
}
