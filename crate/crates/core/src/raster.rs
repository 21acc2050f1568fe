//! 8-bit gray/RGB rasters with a north-up georeference, PNG I/O, rotated
//! crop-and-resample, mask ingestion and link annotation.

use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{local_offset_m, offset_to_geo, CropSpec, GeoPoint};

/// Sidecar georeference for a PNG: top-left corner and ground resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Georef {
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub meters_per_pixel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pixels: Vec<u8>,
    width_px: u32,
    height_px: u32,
    channels: u8,
    meters_per_pixel: f64,
    origin: GeoPoint,
}

impl Raster {
    pub fn new(
        pixels: Vec<u8>,
        width_px: u32,
        height_px: u32,
        channels: u8,
        meters_per_pixel: f64,
        origin: GeoPoint,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("rasters have 1 or 3 channels, got {channels}")));
        }
        let expected = width_px as usize * height_px as usize * channels as usize;
        if pixels.len() != expected || expected == 0 {
            return Err(Error::Shape(format!(
                "{} pixel bytes for a {width_px}×{height_px}×{channels} raster",
                pixels.len()
            )));
        }
        if !(meters_per_pixel.is_finite() && meters_per_pixel > 0.0) {
            return Err(Error::Validation(format!(
                "meters_per_pixel must be > 0, got {meters_per_pixel}"
            )));
        }
        origin.validate()?;
        Ok(Self {
            pixels,
            width_px,
            height_px,
            channels,
            meters_per_pixel,
            origin,
        })
    }

    pub fn filled(width_px: u32, height_px: u32, channels: u8, value: u8, meters_per_pixel: f64, origin: GeoPoint) -> Result<Self> {
        let n = width_px as usize * height_px as usize * channels as usize;
        Self::new(vec![value; n], width_px, height_px, channels, meters_per_pixel, origin)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.meters_per_pixel
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn georef(&self) -> Georef {
        Georef {
            origin_lat_deg: self.origin.lat_deg,
            origin_lon_deg: self.origin.lon_deg,
            meters_per_pixel: self.meters_per_pixel,
        }
    }

    fn index(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width_px as usize + x as usize) * self.channels as usize + c as usize
    }

    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.pixels[self.index(x, y, c)]
    }

    pub fn set(&mut self, x: u32, y: u32, c: u8, v: u8) {
        let i = self.index(x, y, c);
        self.pixels[i] = v;
    }

    pub fn mean_intensity(&self) -> f64 {
        self.pixels.iter().map(|&p| p as f64).sum::<f64>() / self.pixels.len() as f64
    }

    /// Continuous pixel coordinates of `p`; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
    pub fn geo_to_pixel(&self, p: &GeoPoint) -> (f64, f64) {
        let (east, north) = local_offset_m(&self.origin, p);
        (east / self.meters_per_pixel, -north / self.meters_per_pixel)
    }

    pub fn pixel_to_geo(&self, x: f64, y: f64) -> GeoPoint {
        offset_to_geo(&self.origin, x * self.meters_per_pixel, -y * self.meters_per_pixel)
    }

    /// Bilinear sample at a continuous pixel position; `None` outside the footprint.
    fn sample(&self, x: f64, y: f64, c: u8) -> Option<f64> {
        let (w, h) = (self.width_px as f64, self.height_px as f64);
        if !(x >= 0.0 && x <= w && y >= 0.0 && y <= h) {
            return None;
        }
        // centre-aligned coordinates, clamped at the border
        let fx = (x - 0.5).clamp(0.0, w - 1.0);
        let fy = (y - 0.5).clamp(0.0, h - 1.0);
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - x0, fy - y0);
        let (x0, y0) = (x0 as u32, y0 as u32);
        let x1 = (x0 + 1).min(self.width_px - 1);
        let y1 = (y0 + 1).min(self.height_px - 1);
        let p = |xx, yy| self.get(xx, yy, c) as f64;
        let top = p(x0, y0) * (1.0 - tx) + p(x1, y0) * tx;
        let bottom = p(x0, y1) * (1.0 - tx) + p(x1, y1) * tx;
        Some(top * (1.0 - ty) + bottom * ty)
    }
}

pub fn read_georef(path: &Path) -> Result<Georef> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_georef(path: &Path, georef: &Georef) -> Result<()> {
    let text = serde_json::to_string_pretty(georef)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.into(),
            source: other,
        },
    }
}

/// Loads an 8-bit PNG. Gray and gray-alpha become 1 channel, anything else RGB.
pub fn read_png(path: &Path, georef: &Georef) -> Result<Raster> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let origin = GeoPoint::new(georef.origin_lat_deg, georef.origin_lon_deg)?;
    let (w, h) = (img.width(), img.height());
    match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            Raster::new(img.to_luma8().into_raw(), w, h, 1, georef.meters_per_pixel, origin)
        }
        _ => Raster::new(img.to_rgb8().into_raw(), w, h, 3, georef.meters_per_pixel, origin),
    }
}

pub fn write_png(path: &Path, raster: &Raster) -> Result<()> {
    let (w, h) = (raster.width_px, raster.height_px);
    let pixels = raster.pixels.clone();
    let result = if raster.channels == 1 {
        GrayImage::from_raw(w, h, pixels).map(|i| i.save(path))
    } else {
        RgbImage::from_raw(w, h, pixels).map(|i| i.save(path))
    };
    result
        .expect("raster buffer size is checked at construction")
        .map_err(|e| image_err(path, e))
}

/// Output of [`rotate_crop_resize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cropped {
    pub raster: Raster,
    /// Output pixels whose footprint fell outside the source; they are 0.
    pub out_of_bounds_px: usize,
}

impl Cropped {
    pub fn clipped(&self) -> bool {
        self.out_of_bounds_px > 0
    }
}

/// Resamples the rotated ground rectangle `spec` out of `src` with
/// bilinear interpolation.
///
/// The result carries `meters_per_pixel = width_m / out_width_px` and the
/// ground position of its top-left corner; for rotated crops that
/// georeference is only nominal.
pub fn rotate_crop_resize(src: &Raster, spec: &CropSpec) -> Result<Cropped> {
    spec.validate()?;
    let (cx, cy) = src.geo_to_pixel(&spec.center);
    let theta = spec.rotation_deg.to_radians();
    let (s, c) = theta.sin_cos();
    // crop axes expressed in source pixel space (x right, y down)
    let ex = (c, s);
    let ey = (-s, c);
    let mpp = src.meters_per_pixel;
    let (ow, oh) = (spec.out_width_px, spec.out_height_px);

    let mut out = vec![0u8; ow as usize * oh as usize * src.channels as usize];
    let mut oob = 0usize;
    for row in 0..oh {
        let v = ((row as f64 + 0.5) / oh as f64 - 0.5) * spec.height_m / mpp;
        for col in 0..ow {
            let u = ((col as f64 + 0.5) / ow as f64 - 0.5) * spec.width_m / mpp;
            let sx = cx + u * ex.0 + v * ey.0;
            let sy = cy + u * ex.1 + v * ey.1;
            let base = (row as usize * ow as usize + col as usize) * src.channels as usize;
            let mut inside = true;
            for ch in 0..src.channels {
                match src.sample(sx, sy, ch) {
                    Some(val) => out[base + ch as usize] = val.round().clamp(0.0, 255.0) as u8,
                    None => inside = false,
                }
            }
            if !inside {
                oob += 1;
            }
        }
    }
    if oob == ow as usize * oh as usize {
        return Err(Error::Range("crop lies entirely outside the source raster".into()));
    }

    let out_mpp = spec.width_m / ow as f64;
    let hw = -0.5 * spec.width_m / mpp;
    let hh = -0.5 * spec.height_m / mpp;
    let corner = src.pixel_to_geo(cx + hw * ex.0 + hh * ey.0, cy + hw * ex.1 + hh * ey.1);
    Ok(Cropped {
        raster: Raster::new(out, ow, oh, src.channels, out_mpp, corner)?,
        out_of_bounds_px: oob,
    })
}

/// A binarized building mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub raster: Raster,
    pub building_fraction: f64,
}

/// Thresholds a single-channel mask at 128 into {0, 255}.
pub fn ingest_mask(src: &Raster) -> Result<Mask> {
    if src.channels != 1 {
        return Err(Error::Shape(format!(
            "masks must be single-channel, got {} channels",
            src.channels
        )));
    }
    let pixels: Vec<u8> = src.pixels.iter().map(|&p| if p >= 128 { 255 } else { 0 }).collect();
    let on = pixels.iter().filter(|&&p| p == 255).count();
    let building_fraction = on as f64 / pixels.len() as f64;
    Ok(Mask {
        raster: Raster { pixels, ..src.clone() },
        building_fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationStyle {
    pub marker_radius_px: u32,
    pub tx_color: [u8; 3],
    pub rx_color: [u8; 3],
    pub line_color: [u8; 3],
}

impl Default for AnnotationStyle {
    fn default() -> Self {
        Self {
            marker_radius_px: 4,
            tx_color: [255, 0, 0],
            rx_color: [0, 0, 255],
            line_color: [255, 255, 0],
        }
    }
}

fn put(r: &mut Raster, x: i64, y: i64, color: [u8; 3]) {
    if x < 0 || y < 0 || x >= r.width_px as i64 || y >= r.height_px as i64 {
        return;
    }
    if r.channels == 1 {
        let luma = (0.299 * color[0] as f64 + 0.587 * color[1] as f64 + 0.114 * color[2] as f64).round() as u8;
        r.set(x as u32, y as u32, 0, luma);
    } else {
        for (ch, &v) in color.iter().enumerate() {
            r.set(x as u32, y as u32, ch as u8, v);
        }
    }
}

/// Draws a 1-px line between the two pixel positions and a filled disc at each end.
pub fn annotate_link(raster: &mut Raster, tx_px: (f64, f64), rx_px: (f64, f64), style: &AnnotationStyle) {
    let (x0, y0) = (tx_px.0.floor() as i64, tx_px.1.floor() as i64);
    let (x1, y1) = (rx_px.0.floor() as i64, rx_px.1.floor() as i64);
    // Bresenham
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(raster, x, y, style.line_color);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    let r = style.marker_radius_px as i64;
    for (cx, cy, color) in [(x0, y0, style.tx_color), (x1, y1, style.rx_color)] {
        for yy in -r..=r {
            for xx in -r..=r {
                if xx * xx + yy * yy <= r * r {
                    put(raster, cx + xx, cy + yy, color);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> GeoPoint {
        GeoPoint::new(30.0, 120.0).unwrap()
    }

    fn gradient(w: u32, h: u32) -> Raster {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.push(((x * 7 + y * 3) % 256) as u8);
            }
        }
        Raster::new(px, w, h, 1, 1.0, origin()).unwrap()
    }

    fn identity_spec(r: &Raster, rotation_deg: f64) -> CropSpec {
        let w = r.width_px() as f64;
        let h = r.height_px() as f64;
        CropSpec {
            width_m: w * r.meters_per_pixel(),
            height_m: h * r.meters_per_pixel(),
            out_width_px: r.width_px(),
            out_height_px: r.height_px(),
            center: r.pixel_to_geo(w / 2.0, h / 2.0),
            rotation_deg,
        }
    }

    #[test]
    fn identity_crop_copies_pixels() {
        let src = gradient(40, 30);
        let out = rotate_crop_resize(&src, &identity_spec(&src, 0.0)).unwrap();
        assert_eq!(out.raster.pixels(), src.pixels());
        assert!(!out.clipped());
    }

    #[test]
    fn full_turn_matches_no_turn() {
        let src = gradient(40, 40);
        let mut spec = identity_spec(&src, 0.0);
        spec.width_m = 20.0;
        spec.height_m = 20.0;
        spec.out_width_px = 20;
        spec.out_height_px = 20;
        let a = rotate_crop_resize(&src, &spec).unwrap();
        spec.rotation_deg = 360.0;
        let b = rotate_crop_resize(&src, &spec).unwrap();
        for (x, y) in a.raster.pixels().iter().zip(b.raster.pixels()) {
            assert!((*x as i32 - *y as i32).abs() <= 1);
        }
    }

    #[test]
    fn quarter_turn_transposes_boundary() {
        // left half dark, right half bright
        let (w, h) = (40u32, 40u32);
        let px: Vec<u8> = (0..h).flat_map(|_| (0..w).map(|x| if x < w / 2 { 0 } else { 200 })).collect();
        let src = Raster::new(px, w, h, 1, 1.0, origin()).unwrap();
        let mut spec = identity_spec(&src, 90.0);
        spec.width_m = 20.0;
        spec.height_m = 20.0;
        spec.out_width_px = 20;
        spec.out_height_px = 20;
        let out = rotate_crop_resize(&src, &spec).unwrap().raster;
        // the vertical boundary is now horizontal: rows are uniform
        for y in [0u32, 5, 14, 19] {
            let first = out.get(0, y, 0);
            assert!((0..20).all(|x| out.get(x, y, 0) == first), "row {y}");
        }
        assert_ne!(out.get(0, 0, 0), out.get(0, 19, 0));
    }

    #[test]
    fn smooth_crop_keeps_mean() {
        let (w, h) = (200u32, 200u32);
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let v = 128.0 + 60.0 * (x as f64 / 23.0).sin() * (y as f64 / 31.0).cos();
                px.push(v.round() as u8);
            }
        }
        let src = Raster::new(px, w, h, 1, 0.5, origin()).unwrap();
        let spec = CropSpec {
            width_m: 60.0,
            height_m: 40.0,
            out_width_px: 120,
            out_height_px: 80,
            center: src.pixel_to_geo(100.0, 100.0),
            rotation_deg: 37.0,
        };
        let out = rotate_crop_resize(&src, &spec).unwrap();
        assert!(!out.clipped());
        // reference mean over the same footprint by dense point sampling
        let theta = 37f64.to_radians();
        let (s, c) = theta.sin_cos();
        let mut acc = 0.0;
        let mut n = 0.0;
        for i in 0..240 {
            for j in 0..160 {
                let u = ((i as f64 + 0.5) / 240.0 - 0.5) * 120.0;
                let v = ((j as f64 + 0.5) / 160.0 - 0.5) * 80.0;
                let x = 100.0 + u * c - v * s;
                let y = 100.0 + u * s + v * c;
                acc += src.get(x as u32, y as u32, 0) as f64;
                n += 1.0;
            }
        }
        let reference = acc / n;
        let got = out.raster.mean_intensity();
        assert!((got - reference).abs() / reference < 0.02, "{got} vs {reference}");
    }

    #[test]
    fn partial_and_total_misses() {
        let src = gradient(20, 20);
        let mut spec = identity_spec(&src, 0.0);
        spec.center = src.pixel_to_geo(20.0, 10.0);
        let out = rotate_crop_resize(&src, &spec).unwrap();
        assert!(out.clipped());
        spec.center = src.pixel_to_geo(500.0, 500.0);
        assert!(matches!(rotate_crop_resize(&src, &spec), Err(Error::Range(_))));
    }

    #[test]
    fn mask_examples() {
        let zero = Raster::filled(4, 4, 1, 0, 1.0, origin()).unwrap();
        assert_eq!(ingest_mask(&zero).unwrap().building_fraction, 0.0);
        let full = Raster::filled(4, 4, 1, 255, 1.0, origin()).unwrap();
        assert_eq!(ingest_mask(&full).unwrap().building_fraction, 1.0);
        let px: Vec<u8> = (0..16).map(|i| if i % 4 < 2 { 10 } else { 180 }).collect();
        let half = Raster::new(px, 4, 4, 1, 1.0, origin()).unwrap();
        let m = ingest_mask(&half).unwrap();
        assert_eq!(m.building_fraction, 0.5);
        assert!(m.raster.pixels().iter().all(|&p| p == 0 || p == 255));
        let rgb = Raster::filled(2, 2, 3, 0, 1.0, origin()).unwrap();
        assert!(matches!(ingest_mask(&rgb), Err(Error::Shape(_))));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let src = gradient(13, 7);
        write_png(&path, &src).unwrap();
        let gpath = dir.path().join("a.json");
        write_georef(&gpath, &src.georef()).unwrap();
        let back = read_png(&path, &read_georef(&gpath).unwrap()).unwrap();
        assert_eq!(back, src);
        let missing = read_png(&dir.path().join("nope.png"), &src.georef()).unwrap_err();
        assert!(missing.is_io());
    }

    #[test]
    fn annotation_marks_endpoints() {
        let mut r = Raster::filled(30, 30, 3, 0, 1.0, origin()).unwrap();
        let style = AnnotationStyle::default();
        annotate_link(&mut r, (5.0, 5.0), (25.0, 20.0), &style);
        assert_eq!([r.get(5, 5, 0), r.get(5, 5, 1), r.get(5, 5, 2)], style.tx_color);
        assert_eq!([r.get(25, 20, 0), r.get(25, 20, 1), r.get(25, 20, 2)], style.rx_color);
        let on_line = |y| [r.get(15, y, 0), r.get(15, y, 1)] == style.line_color[..2];
        assert!(on_line(12) || on_line(13));
    }

    #[test]
    fn constructor_checks() {
        assert!(matches!(Raster::new(vec![0; 4], 2, 2, 2, 1.0, origin()), Err(Error::Shape(_))));
        assert!(matches!(Raster::new(vec![0; 3], 2, 2, 1, 1.0, origin()), Err(Error::Shape(_))));
        assert!(Raster::new(vec![0; 4], 2, 2, 1, 0.0, origin()).is_err());
    }
}
