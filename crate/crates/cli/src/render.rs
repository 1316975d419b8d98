//! Deterministic raster rendering of densities and trajectories.
//!
//! Purely presentational: nothing downstream reads these images. Pixels are
//! computed with fixed arithmetic and encoded with fixed PNG settings, so the
//! same input always produces byte-identical files.

use crate::errors::CliError;

/// Grayscale image buffer, one byte per pixel, row-major from the top-left.
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    fn set(&mut self, x: usize, y: usize, v: u8) {
        if x < self.width && y < self.height {
            self.pixels[y * self.width + x] = v;
        }
    }

    /// Encode as an 8-bit grayscale PNG with fixed settings.
    pub fn encode_png(&self) -> Result<Vec<u8>, CliError> {
        let mut bytes = Vec::new();
        {
            let mut encoder =
                png::Encoder::new(&mut bytes, self.width as u32, self.height as u32);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            encoder.set_compression(png::Compression::Default);
            encoder.set_filter(png::FilterType::NoFilter);
            let mut writer = encoder
                .write_header()
                .map_err(|e| CliError::Io(format!("png encode failed: {e}")))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| CliError::Io(format!("png encode failed: {e}")))?;
        }
        Ok(bytes)
    }
}

fn shade(v: f64, max: f64) -> u8 {
    if max <= 0.0 || !v.is_finite() {
        return 0;
    }
    let t = (v / max).clamp(0.0, 1.0);
    (t * 255.0).round() as u8
}

/// Render a 2D scalar field (row-major, axis 0 outermost) as a heatmap:
/// axis 0 maps to the horizontal pixel coordinate increasing rightward,
/// axis 1 to the vertical increasing upward, each grid cell an integer
/// `scale`×`scale` pixel block, intensity linear from 0 to the field maximum.
pub fn heatmap_2d(values: &[f64], n0: usize, n1: usize, scale: usize) -> GrayImage {
    assert_eq!(values.len(), n0 * n1);
    let scale = scale.max(1);
    let max = values.iter().cloned().fold(0.0_f64, f64::max);
    let mut img = GrayImage::new(n0 * scale, n1 * scale);
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let v = shade(values[i0 * n1 + i1], max);
            for px in 0..scale {
                for py in 0..scale {
                    // Vertical axis flipped so increasing axis-1 coordinate
                    // points up in the image.
                    img.set(i0 * scale + px, (n1 - 1 - i1) * scale + py, v);
                }
            }
        }
    }
    img
}

/// Render a sequence of 1D profiles (e.g. density frames over time) as a
/// space-time heatmap: rows are frames from top to bottom, columns are grid
/// points, intensity linear from 0 to the global maximum.
pub fn heatmap_rows(rows: &[Vec<f64>], scale: usize) -> GrayImage {
    let scale = scale.max(1);
    let width = rows.first().map_or(0, Vec::len);
    let max = rows
        .iter()
        .flat_map(|r| r.iter().cloned())
        .fold(0.0_f64, f64::max);
    let mut img = GrayImage::new(width * scale, rows.len() * scale);
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), width, "ragged frame");
        for (i, &v) in row.iter().enumerate() {
            let v = shade(v, max);
            for px in 0..scale {
                for py in 0..scale {
                    img.set(i * scale + px, j * scale + py, v);
                }
            }
        }
    }
    img
}

/// Plot one or more (x, y) polylines — trajectories, histograms as curves —
/// into a fixed-size image. Data extents map linearly onto the pixel box;
/// each series is drawn by marking the pixel nearest each segment sample.
pub fn polylines(series: &[Vec<(f64, f64)>], width: usize, height: usize) -> GrayImage {
    let mut img = GrayImage::new(width, height);
    let pts = series.iter().flatten();
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &(x, y) in pts {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !x_min.is_finite() || !y_min.is_finite() {
        return img;
    }
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y_span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let to_px = |x: f64, y: f64| {
        let px = ((x - x_min) / x_span * (width - 1) as f64).round() as usize;
        // y increases upward in data, downward in pixels.
        let py = ((y_max - y) / y_span * (height - 1) as f64).round() as usize;
        (px, py)
    };
    for line in series {
        for pair in line.windows(2) {
            let (x0, y0) = to_px(pair[0].0, pair[0].1);
            let (x1, y1) = to_px(pair[1].0, pair[1].1);
            // Sample the segment densely enough to leave no pixel gaps.
            let steps = x0.abs_diff(x1).max(y0.abs_diff(y1)).max(1);
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let px = (x0 as f64 + t * (x1 as f64 - x0 as f64)).round() as usize;
                let py = (y0 as f64 + t * (y1 as f64 - y0 as f64)).round() as usize;
                img.set(px, py, 255);
            }
        }
        if line.len() == 1 {
            let (px, py) = to_px(line[0].0, line[0].1);
            img.set(px, py, 255);
        }
    }
    img
}
