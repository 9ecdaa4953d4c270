//! Raster images (binary PPM) and Morse graph text output.
//!
//! Images put grid axis 0 horizontally and axis 1 vertically with the y axis
//! pointing up: pixel `(px, py)` shows cell `(px / scale, (height - 1 - py) / scale)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graphrep::MorseDecomposition;
use crate::grid::Grid;
use crate::recurrence::RecurrenceField;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
pub const GRAY: Rgb = [160, 160, 160];

/// Colours of Morse sets, cycled by set index.
pub const PALETTE: [Rgb; 16] = [
    [228, 26, 28],
    [55, 126, 184],
    [77, 175, 74],
    [152, 78, 163],
    [255, 127, 0],
    [166, 86, 40],
    [247, 129, 191],
    [0, 0, 0],
    [23, 190, 207],
    [188, 189, 34],
    [31, 119, 180],
    [140, 86, 75],
    [127, 127, 127],
    [214, 39, 40],
    [44, 160, 44],
    [148, 103, 189],
];

/// Stops of the sequential colour map, dark to bright.
const RAMP: [Rgb; 5] = [[0, 0, 4], [87, 16, 110], [188, 55, 84], [249, 142, 9], [252, 255, 164]];

/// Colour for `t` in `[0, 1]`.
pub fn ramp(t: f64) -> Rgb {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (a[k] as f64 + (b[k] as f64 - a[k] as f64) * f).round() as u8;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    /// Row-major from the top-left pixel.
    pub pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        RasterImage {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, px: usize, py: usize) -> Rgb {
        self.pixels[py * self.width + px]
    }

    pub fn set(&mut self, px: usize, py: usize, c: Rgb) {
        self.pixels[py * self.width + px] = c;
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm())?;
        Ok(())
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |d: &str| Error::parse("PPM image", d);
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(
                std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| bad("header"))?
                    .to_string(),
            );
        }
        pos += 1;
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("expected P6 with maxval 255"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let data = bytes.get(pos..).ok_or_else(|| bad("missing data"))?;
        if data.len() != width * height * 3 {
            return Err(bad("pixel data length"));
        }
        Ok(RasterImage {
            width,
            height,
            pixels: data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }
}

fn planar(grid: &Grid) -> Result<(usize, usize)> {
    match grid.resolution() {
        &[w, h] => Ok((w, h)),
        r => Err(Error::UnsupportedDimension(r.len())),
    }
}

fn check_scale(scale: usize) -> Result<()> {
    if scale == 0 {
        Err(Error::InvalidArgument("scale must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Paints cells of a planar grid of `w x h` cells, `scale` pixels per cell.
fn paint_cells<F: Fn(usize, usize) -> Rgb>(w: usize, h: usize, scale: usize, colour: F) -> RasterImage {
    let mut img = RasterImage::new(w * scale, h * scale, WHITE);
    for py in 0..h * scale {
        let j = (h * scale - 1 - py) / scale;
        for px in 0..w * scale {
            img.set(px, py, colour(px / scale, j));
        }
    }
    img
}

/// Morse sets coloured by index on a white background.
pub fn render_morse(md: &MorseDecomposition, grid: &Grid, scale: usize) -> Result<RasterImage> {
    let (w, h) = planar(grid)?;
    check_scale(scale)?;
    let member = md.membership(grid.len());
    Ok(paint_cells(w, h, scale, |i, j| match member[i * h + j] {
        Some(s) => PALETTE[s as usize % PALETTE.len()],
        None => WHITE,
    }))
}

/// Recurrence times mapped linearly from the smallest (dark) to the largest
/// (bright) value; cells outside the set stay white. Also returns the colour
/// legend as CSV (`rec,r,g,b` for every value in the observed range).
pub fn render_recurrence(field: &RecurrenceField, grid: &Grid, scale: usize) -> Result<(RasterImage, String)> {
    let (w, h) = planar(grid)?;
    check_scale(scale)?;
    let (lo, hi) = (field.min_rec(), field.max_rec());
    let colour = |r: u32| {
        if hi == lo {
            ramp(0.0)
        } else {
            ramp((r - lo) as f64 / (hi - lo) as f64)
        }
    };
    let mut values = vec![None; grid.len()];
    for (&c, &r) in field.cells.iter().zip(&field.rec) {
        values[c] = Some(r);
    }
    let img = paint_cells(w, h, scale, |i, j| values[i * h + j].map_or(WHITE, colour));
    let mut legend = String::from("rec,r,g,b\n");
    for r in lo..=hi {
        let c = colour(r);
        let _ = writeln!(legend, "{r},{},{},{}", c[0], c[1], c[2]);
    }
    Ok((img, legend))
}

/// Values over a planar parameter grid mapped linearly over their observed
/// range; `None` boxes are gray. When `classes` is given, a one-pixel black
/// line is drawn on the box edges that separate different classes.
pub fn render_heatmap(
    values: &[Option<f64>],
    resolution: &[usize],
    classes: Option<&[u32]>,
    scale: usize,
) -> Result<RasterImage> {
    let &[w, h] = resolution else {
        return Err(Error::UnsupportedDimension(resolution.len()));
    };
    check_scale(scale)?;
    if values.len() != w * h || classes.is_some_and(|c| c.len() != w * h) {
        return Err(Error::DimensionMismatch {
            expected: w * h,
            found: values.len(),
        });
    }
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut img = paint_cells(w, h, scale, |i, j| match values[i * h + j] {
        Some(v) if hi > lo => ramp((v - lo) / (hi - lo)),
        Some(_) => ramp(0.0),
        None => GRAY,
    });
    if let Some(cls) = classes {
        draw_class_borders(&mut img, cls, w, h, scale);
    }
    Ok(img)
}

/// Categorical map over a planar parameter grid: label `k >= 0` takes
/// palette colour `k`, negative labels (noise) are gray and `None` (no data)
/// is white.
pub fn render_labels(labels: &[Option<i64>], resolution: &[usize], scale: usize) -> Result<RasterImage> {
    let &[w, h] = resolution else {
        return Err(Error::UnsupportedDimension(resolution.len()));
    };
    check_scale(scale)?;
    if labels.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: w * h,
            found: labels.len(),
        });
    }
    Ok(paint_cells(w, h, scale, |i, j| match labels[i * h + j] {
        Some(k) if k >= 0 => PALETTE[k as usize % PALETTE.len()],
        Some(_) => GRAY,
        None => WHITE,
    }))
}

fn draw_class_borders(img: &mut RasterImage, cls: &[u32], w: usize, h: usize, scale: usize) {
    let class = |i: usize, j: usize| cls[i * h + j];
    for i in 0..w {
        for j in 0..h {
            // right edge of box (i, j)
            if i + 1 < w && class(i, j) != class(i + 1, j) {
                let px = (i + 1) * scale - 1;
                for k in 0..scale {
                    img.set(px, (h - 1 - j) * scale + k, BLACK);
                }
            }
            // top edge of box (i, j)
            if j + 1 < h && class(i, j) != class(i, j + 1) {
                let py = (h - 1 - j) * scale;
                for k in 0..scale {
                    img.set(i * scale + k, py, BLACK);
                }
            }
        }
    }
}

/// Morse graph in Graphviz DOT syntax. Nodes are labelled `i : card`,
/// attracting sets are drawn as filled yellow boxes, and edges follow the
/// flow along the transitive reduction.
pub fn export_morse_graph(md: &MorseDecomposition) -> String {
    let mut out = String::from("digraph morse {\n");
    for (i, s) in md.sets.iter().enumerate() {
        let _ = write!(out, "  n{i} [label=\"{i} : {}\"", s.len());
        if md.attracting[i] {
            out.push_str(", shape=box, style=filled, fillcolor=yellow");
        }
        if md.touches_boundary[i] {
            out.push_str(", color=red");
        }
        out.push_str("];\n");
    }
    for &(a, b) in &md.reduced_edges {
        let _ = writeln!(out, "  n{a} -> n{b};");
    }
    out.push_str("}\n");
    out
}
