//! Deterministic SVG rendering: unit-disk chord diagrams of laminations,
//! optional escape-time raster underlay, optional external-ray polylines.
//!
//! All coordinates are formatted with fixed precision, so identical inputs
//! produce byte-identical documents.

use std::fmt::Write as _;

use base64::Engine;
use image::ImageEncoder;
use num_complex::Complex64;

use crate::angle::Angle;
use crate::lamination::Lamination;
use crate::model::ModelGraph;
use crate::poly::PolynomialSpec;
use crate::ray::RayTrace;

/// Escape-time raster settings for the background image.
#[derive(Debug, Clone)]
pub struct Underlay {
    pub spec: PolynomialSpec,
    pub resolution: u32,
    pub max_iter: u32,
}

impl Underlay {
    pub fn new(spec: PolynomialSpec) -> Self {
        Underlay {
            spec,
            resolution: 256,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Pixel width/height of the square viewport.
    pub size: u32,
    /// Dynamical-plane radius mapped onto the unit circle. Rays and the
    /// raster are scaled by 1/world_radius; with `None` the escape radius of
    /// the underlay polynomial is used, or 1 when there is nothing dynamic.
    pub world_radius: Option<f64>,
    pub underlay: Option<Underlay>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            size: 800,
            world_radius: None,
            underlay: None,
        }
    }
}

fn point_on_circle(a: &Angle) -> (f64, f64) {
    let t = 2.0 * std::f64::consts::PI * a.to_f64();
    (t.cos(), t.sin())
}

fn fmt_coord(x: f64) -> String {
    // Fixed precision keeps output byte-stable; -0.0 would not.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.6}")
}

/// Path data for the chord between two circle angles, drawn as the
/// hyperbolic geodesic (the circular arc orthogonal to the unit circle);
/// near-diameters degrade to straight lines.
fn chord_path(a: &Angle, b: &Angle) -> String {
    let (x1, y1) = point_on_circle(a);
    let (x2, y2) = point_on_circle(b);
    // Half the angular separation decides the geodesic curvature.
    let ta = 2.0 * std::f64::consts::PI * a.to_f64();
    let tb = 2.0 * std::f64::consts::PI * b.to_f64();
    let half = ((tb - ta) / 2.0).sin().abs();
    let cos_half = ((tb - ta) / 2.0).cos().abs();
    if cos_half < 1e-3 {
        return format!(
            "M {} {} L {} {}",
            fmt_coord(x1),
            fmt_coord(y1),
            fmt_coord(x2),
            fmt_coord(y2)
        );
    }
    let radius = half / cos_half; // tan of the half angle
    let sweep = {
        // Draw on the side that bulges toward the shorter boundary arc.
        let span = (b.to_f64() - a.to_f64()).rem_euclid(1.0);
        if span <= 0.5 {
            0
        } else {
            1
        }
    };
    format!(
        "M {} {} A {} {} 0 0 {} {} {}",
        fmt_coord(x1),
        fmt_coord(y1),
        fmt_coord(radius),
        fmt_coord(radius),
        sweep,
        fmt_coord(x2),
        fmt_coord(y2)
    )
}

fn escape_time_png(underlay: &Underlay, world_radius: f64) -> String {
    let n = underlay.resolution;
    let mut img = image::GrayImage::new(n, n);
    for py in 0..n {
        for px in 0..n {
            // Pixel centers over [-w, w]^2, y axis pointing up.
            let re = (px as f64 + 0.5) / n as f64 * 2.0 - 1.0;
            let im = 1.0 - (py as f64 + 0.5) / n as f64 * 2.0;
            let mut z = Complex64::new(re * world_radius, im * world_radius);
            let mut count = underlay.max_iter;
            for i in 0..underlay.max_iter {
                if z.norm() > underlay.spec.escape_radius() {
                    count = i;
                    break;
                }
                z = underlay.spec.evaluate(z);
            }
            let shade = if count == underlay.max_iter {
                40u8
            } else {
                255 - ((count as f64 / underlay.max_iter as f64).sqrt() * 140.0) as u8
            };
            img.put_pixel(px, py, image::Luma([shade]));
        }
    }
    let mut bytes = Vec::new();
    image::codecs::png::PngEncoder::new(&mut bytes)
        .write_image(&img, n, n, image::ExtendedColorType::L8)
        .expect("in-memory png encoding");
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

const CHORD_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Renders the lamination as a unit-disk chord diagram, optionally over an
/// escape-time raster and under external-ray polylines, as one SVG document.
pub fn render_svg(
    lam: &Lamination,
    model: Option<&ModelGraph>,
    rays: &[RayTrace],
    options: &RenderOptions,
) -> String {
    let world_radius = options.world_radius.unwrap_or_else(|| {
        options
            .underlay
            .as_ref()
            .map(|u| u.spec.escape_radius())
            .unwrap_or(1.0)
    });

    let mut svg = String::new();
    let size = options.size;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{size}" height="{size}" viewBox="-1.15 -1.15 2.3 2.3">"#
    );
    let _ = writeln!(svg, "<!-- lamina {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        svg,
        "<!-- degree {} classes {} world_radius {} -->",
        lam.degree(),
        lam.classes().len(),
        fmt_coord(world_radius)
    );
    if let Some(model) = model {
        let _ = writeln!(
            svg,
            "<!-- model: {} cut points, {} gaps -->",
            model.class_count(),
            model.gap_count()
        );
    }
    // The y axis points up: flip, because SVG y grows downward.
    let _ = writeln!(svg, r#"<g transform="scale(1,-1)">"#);

    if let Some(underlay) = &options.underlay {
        let data = escape_time_png(underlay, world_radius);
        let _ = writeln!(
            svg,
            r#"<image x="-1" y="-1" width="2" height="2" transform="scale(1,-1)" preserveAspectRatio="none" xlink:href="data:image/png;base64,{data}"/>"#
        );
    }

    let _ = writeln!(
        svg,
        r##"<circle cx="0" cy="0" r="1" fill="none" stroke="#333333" stroke-width="0.008"/>"##
    );

    for (idx, class) in lam.classes().iter().enumerate() {
        let color = CHORD_COLORS[idx % CHORD_COLORS.len()];
        for (a, b) in class.chords() {
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="0.006"/>"#,
                chord_path(a, b)
            );
        }
        for angle in class.angles() {
            let (x, y) = point_on_circle(angle);
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="0.012" fill="{color}"/>"#,
                fmt_coord(x),
                fmt_coord(y)
            );
        }
    }

    for ray in rays {
        let mut d = String::new();
        for (i, z) in ray.points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(
                d,
                "{cmd} {} {} ",
                fmt_coord(z.re / world_radius),
                fmt_coord(z.im / world_radius)
            );
        }
        let _ = writeln!(
            svg,
            r##"<path d="{}" fill="none" stroke="#e6b422" stroke-width="0.004"/>"##,
            d.trim_end()
        );
    }

    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    svg
}
