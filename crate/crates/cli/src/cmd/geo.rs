use std::path::Path;

use log::warn;
use serde::Serialize;
use tdlforge::geo::{global_crop_spec, link_geometry, local_crop_spec, midpoint, CropSpec, GeoPoint, LinkGeometry};
use tdlforge::raster::{annotate_link, ingest_mask, read_georef, read_png, rotate_crop_resize, write_png, AnnotationStyle, Georef, Raster};

use crate::args::{GeoCmd, GlobalArgs};
use crate::exit::CliError;
use crate::output::{create_dir, print_json, write_json};

pub const GEO_FILE: &str = "geo.json";

#[derive(Serialize)]
struct GeoReport {
    tx: GeoPoint,
    rx: GeoPoint,
    link: LinkGeometry,
    global_crop: CropSpec,
    local_crop: CropSpec,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    images: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    building_fraction: Option<f64>,
}

fn crop(src: &Raster, spec: &CropSpec, what: &str) -> Result<Raster, CliError> {
    let c = rotate_crop_resize(src, spec).map_err(|e| CliError::from(e).context(format!("{what} crop")))?;
    if c.clipped() {
        warn!("{what} crop runs off the raster; {} pixels left black", c.out_of_bounds_px);
    }
    Ok(c.raster)
}

fn save(out: &Path, name: &str, r: &Raster, images: &mut Vec<String>) -> Result<(), CliError> {
    write_png(&out.join(name), r)?;
    images.push(name.to_string());
    Ok(())
}

pub fn run(a: &GeoCmd, g: &GlobalArgs) -> Result<(), CliError> {
    let tx = GeoPoint::parse(&a.tx).map_err(|e| CliError::from(e).context("--tx"))?;
    let rx = GeoPoint::parse(&a.rx).map_err(|e| CliError::from(e).context("--rx"))?;
    let link = link_geometry(&tx, &rx);
    if link.coincident {
        warn!("Tx and Rx coincide; azimuth defaults to 0");
    }
    let global = global_crop_spec(&link, &midpoint(&tx, &rx));
    let local = local_crop_spec(&rx, &link);

    create_dir(&a.out)?;
    let mut images = Vec::new();
    let mut building_fraction = None;
    let georef: Option<Georef> = a.georef.as_deref().map(read_georef).transpose()?;

    if let (Some(path), Some(gr)) = (&a.raster, &georef) {
        let src = read_png(path, gr)?;
        let mut gimg = crop(&src, &global, "global")?;
        if a.annotate {
            let px_per_m = global.out_width_px as f64 / global.width_m;
            let (cx, cy) = (global.out_width_px as f64 / 2.0, global.out_height_px as f64 / 2.0);
            let half = 0.5 * link.distance_m * px_per_m;
            annotate_link(&mut gimg, (cx - half, cy), (cx + half, cy), &AnnotationStyle::default());
        }
        save(&a.out, "global.png", &gimg, &mut images)?;
        save(&a.out, "local.png", &crop(&src, &local, "local")?, &mut images)?;
    }
    if let (Some(path), Some(gr)) = (&a.mask, &georef) {
        let mask = ingest_mask(&crop(&read_png(path, gr)?, &local, "mask")?)?;
        building_fraction = Some(mask.building_fraction);
        save(&a.out, "mask.png", &mask.raster, &mut images)?;
    }

    let report = GeoReport {
        tx,
        rx,
        link,
        global_crop: global,
        local_crop: local,
        images,
        building_fraction,
    };
    write_json(&a.out.join(GEO_FILE), &report)?;
    if g.json {
        print_json(&report)?;
    } else {
        println!(
            "distance {:.2} m  azimuth {:.2} deg{}",
            link.distance_m,
            link.azimuth_deg,
            if link.coincident { "  (coincident)" } else { "" }
        );
        for (name, c) in [("global", &global), ("local", &local)] {
            println!(
                "{name:<6} {:.1} x {:.1} m -> {} x {} px  centre {:.6},{:.6}  rotation {:.2} deg",
                c.width_m, c.height_m, c.out_width_px, c.out_height_px, c.center.lat_deg, c.center.lon_deg, c.rotation_deg
            );
        }
        for img in &report.images {
            println!("wrote {}", a.out.join(img).display());
        }
        if let Some(f) = building_fraction {
            println!("building fraction {f:.3}");
        }
    }
    Ok(())
}
