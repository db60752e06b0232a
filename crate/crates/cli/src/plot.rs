//! Minimal PNG rendering for the two report figures: NLD histograms and the
//! per-sequence segment timeline. Rectangles into an RGB buffer are all these
//! figures need, so there is no plotting dependency.

use std::path::Path;

use image::{Rgb, RgbImage};

use motionseg::Error;

const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [174, 199, 232],
    [255, 187, 120],
];

pub fn class_color(class: usize) -> Rgb<u8> {
    Rgb(PALETTE[class % PALETTE.len()])
}

fn fill(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, color: Rgb<u8>) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.put_pixel(x, y, color);
        }
    }
}

/// Bars over [0, 1]; `bins` are (lo, hi, count) triples.
pub fn histogram_png(path: &Path, bins: &[(f64, f64, usize)]) -> Result<(), Error> {
    let width = 400u32;
    let height = 240u32;
    let margin = 10u32;
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let max_count = bins.iter().map(|&(_, _, c)| c).max().unwrap_or(1).max(1) as f64;
    let plot_w = width - 2 * margin;
    let plot_h = height - 2 * margin;
    for &(lo, hi, count) in bins {
        let x0 = margin + (lo * plot_w as f64) as u32;
        let x1 = margin + (hi * plot_w as f64) as u32;
        let bar = ((count as f64 / max_count) * plot_h as f64) as u32;
        fill(&mut img, x0, height - margin - bar, x1.saturating_sub(1), height - margin, Rgb([31, 119, 180]));
    }
    // baseline
    fill(&mut img, margin, height - margin, width - margin, height - margin + 1, Rgb([0, 0, 0]));
    img.save(path).map_err(|e| Error::data(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

/// One row per sequence, colored intervals per class; spans are in samples.
pub fn timeline_png(
    path: &Path,
    rows: &[(String, Vec<(usize, usize, usize)>)],
) -> Result<(), Error> {
    let row_h = 4u32;
    let gap = 1u32;
    let width = 720u32;
    let height = (rows.len() as u32) * (row_h + gap) + gap;
    let max_len = rows
        .iter()
        .flat_map(|(_, spans)| spans.iter().map(|&(_, end, _)| end))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let mut img = RgbImage::from_pixel(width, height.max(row_h), Rgb([255, 255, 255]));
    for (i, (_, spans)) in rows.iter().enumerate() {
        let y0 = gap + i as u32 * (row_h + gap);
        for &(start, end, class) in spans {
            let x0 = (start as f64 / max_len * width as f64) as u32;
            let x1 = (end as f64 / max_len * width as f64) as u32;
            fill(&mut img, x0, y0, x1.max(x0 + 1), y0 + row_h, class_color(class));
        }
    }
    img.save(path).map_err(|e| Error::data(format!("writing {}: {e}", path.display())))?;
    Ok(())
}
