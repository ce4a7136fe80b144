//! Pixel-grid substrate: RGB images, region label maps and their file formats.
//!
//! Images are read from 8-bit RGB PNG or binary PPM (P6). Label maps are read
//! from CSV (one text row per pixel row) or 16-bit grayscale PNG. Every label
//! map is normalized on construction: each 4-connected component of equal raw
//! labels becomes one region, and regions are numbered densely in raster
//! first-occurrence order. Saving and re-loading a normalized map is therefore
//! the identity.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must be at least 1x1"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "expected {} samples for {}x{} RGB, got {}",
                width * height * 3,
                width,
                height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }
}

/// Region assignment over a pixel grid. Regions are 4-connected and numbered
/// `0..region_count()` in raster order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl LabelMap {
    /// Builds a map from arbitrary raw labels. Disconnected pixels sharing a
    /// raw label end up in distinct regions.
    pub fn new(width: usize, height: usize, raw: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("label map must be at least 1x1"));
        }
        if raw.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} labels for {}x{}, got {}",
                width * height,
                width,
                height,
                raw.len()
            )));
        }
        const UNSET: u32 = u32::MAX;
        let mut labels = vec![UNSET; raw.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..raw.len() {
            if labels[start] != UNSET {
                continue;
            }
            let value = raw[start];
            labels[start] = next;
            stack.push(start);
            while let Some(p) = stack.pop() {
                let (x, y) = (p % width, p / width);
                let mut visit = |q: usize| {
                    if labels[q] == UNSET && raw[q] == value {
                        labels[q] = next;
                        stack.push(q);
                    }
                };
                if x > 0 {
                    visit(p - 1);
                }
                if x + 1 < width {
                    visit(p + 1);
                }
                if y > 0 {
                    visit(p - width);
                }
                if y + 1 < height {
                    visit(p + width);
                }
            }
            next += 1;
        }
        Ok(Self {
            width,
            height,
            labels,
            region_count: next as usize,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    pub fn region_areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.region_count];
        for &l in &self.labels {
            areas[l as usize] += 1;
        }
        areas
    }

    pub fn same_grid(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Replaces every region label by `mapping[label]` and re-normalizes.
    pub fn map_regions(&self, mapping: &[u32]) -> Result<Self> {
        if mapping.len() != self.region_count {
            return Err(Error::Dimension(format!(
                "mapping covers {} regions, map has {}",
                mapping.len(),
                self.region_count
            )));
        }
        let raw = self.labels.iter().map(|&l| mapping[l as usize]).collect();
        Self::new(self.width, self.height, raw)
    }

    /// Over-segmentation used when no leave partition is supplied: colors are
    /// quantized to `levels` per channel and cut by a `block`-pixel grid, then
    /// split into connected components.
    pub fn over_segment(image: &Image, levels: u32, block: usize) -> Result<Self> {
        if levels == 0 || block == 0 {
            return Err(Error::invalid("levels and block must be positive"));
        }
        let (w, h) = (image.width(), image.height());
        let blocks_x = w.div_ceil(block) as u32;
        let mut raw = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let [r, g, b] = image.pixel(x, y);
                let q = |v: u8| (v as u32 * levels) / 256;
                let color = (q(r) * levels + q(g)) * levels + q(b);
                let cell = (y / block) as u32 * blocks_x + (x / block) as u32;
                raw.push(cell * levels * levels * levels + color);
            }
        }
        Self::new(w, h, raw)
    }
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P6") || extension(path) == "ppm" {
        return decode_ppm(&bytes);
    }
    let decoded = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format("png", e.to_string()))?;
    match decoded {
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = buf.dimensions();
            Image::new(w as usize, h as usize, buf.into_raw())
        }
        other => Err(Error::format(
            "color_type",
            format!("expected 8-bit RGB, found {:?}", other.color()),
        )),
    }
}

pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if extension(path) == "ppm" {
        let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
        out.extend_from_slice(&image.data);
        return fs::write(path, out).map_err(|e| Error::io(path, e));
    }
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(image.width as u32, image.height as u32, image.data.clone())
            .ok_or_else(|| Error::Internal("rgb buffer size".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format("png", e.to_string()))
}

/// Parses a binary PPM (P6) with maxval 255.
pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    const NAMES: [&str; 4] = ["magic", "width", "height", "maxval"];
    while fields.len() < 4 {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => {
                    return Err(Error::format(
                        NAMES[fields.len()],
                        "truncated PPM header",
                    ))
                }
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(&bytes[start..pos]);
    }
    if fields[0] != b"P6" {
        return Err(Error::format("magic", "expected P6"));
    }
    let number = |i: usize| -> Result<usize> {
        std::str::from_utf8(fields[i])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(NAMES[i], "not a decimal integer"))
    };
    let (w, h, maxval) = (number(1)?, number(2)?, number(3)?);
    if maxval != 255 {
        return Err(Error::format(
            "maxval",
            format!("only 8-bit samples (maxval 255) are supported, got {maxval}"),
        ));
    }
    // exactly one whitespace byte separates header from raster
    if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err(Error::format("maxval", "truncated PPM header"));
    }
    pos += 1;
    let need = w * h * 3;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::format(
            "raster",
            format!("expected {need} bytes, found {}", raster.len()),
        ));
    }
    Image::new(w, h, raster[..need].to_vec())
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let (w, h, raw) = load_raw_labels(path)?;
    LabelMap::new(w, h, raw)
}

/// Label values as stored, without component splitting or renumbering.
pub fn load_raw_labels(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u32>)> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "png" => {
            let decoded = ImageReader::open(path)
                .map_err(|e| Error::io(path, e))?
                .decode()
                .map_err(|e| Error::format("png", e.to_string()))?;
            match decoded {
                DynamicImage::ImageLuma16(buf) => {
                    let (w, h) = buf.dimensions();
                    let raw = buf.into_raw().into_iter().map(u32::from).collect();
                    Ok((w as usize, h as usize, raw))
                }
                other => Err(Error::format(
                    "color_type",
                    format!("expected 16-bit grayscale, found {:?}", other.color()),
                )),
            }
        }
        _ => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_raw_label_csv(&text)
        }
    }
}

pub fn parse_label_csv(text: &str) -> Result<LabelMap> {
    let (width, height, raw) = parse_raw_label_csv(text)?;
    LabelMap::new(width, height, raw)
}

/// Parses CSV labels verbatim, without relabeling: `(width, height, labels)`.
pub fn parse_raw_label_csv(text: &str) -> Result<(usize, usize, Vec<u32>)> {
    let mut width = None;
    let mut raw = Vec::new();
    let mut height = 0;
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = raw.len();
        for cell in line.split(',') {
            let v: u32 = cell
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("row {row}"), format!("bad label `{cell}`")))?;
            raw.push(v);
        }
        let n = raw.len() - before;
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(Error::format(
                    format!("row {row}"),
                    format!("ragged row: {n} labels, expected {w}"),
                ))
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::format("rows", "empty label map"))?;
    Ok((width, height, raw))
}

pub fn label_csv(map: &LabelMap) -> String {
    raw_label_csv(map.width, &map.labels)
}

/// CSV text for an arbitrary per-pixel label array (e.g. global cluster ids).
pub fn raw_label_csv(width: usize, labels: &[u32]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for row in labels.chunks(width) {
        for (i, l) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&l.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn save_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    save_raw_labels(map.width, map.height, &map.labels, path)
}

/// Writes per-pixel labels as CSV or 16-bit PNG depending on the extension.
pub fn save_raw_labels(
    width: usize,
    height: usize,
    labels: &[u32],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if extension(path) == "png" {
        if let Some(&max) = labels.iter().max() {
            if max > u16::MAX as u32 {
                return Err(Error::format(
                    "label",
                    format!("label {max} exceeds 65535, not representable in 16-bit PNG"),
                ));
            }
        }
        let data: Vec<u16> = labels.iter().map(|&l| l as u16).collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(width as u32, height as u32, data)
                .ok_or_else(|| Error::Internal("label buffer size".into()))?;
        return buf
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::format("png", e.to_string()));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(raw_label_csv(width, labels).as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_ppm_decodes_to_zero_samples() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0u8; 12]);
        let img = decode_ppm(&bytes).unwrap();
        assert_eq!(img.samples(), &[0u8; 12]);
    }

    #[test]
    fn ppm_comments_are_skipped() {
        let mut bytes = b"P6 # comment\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert_eq!(decode_ppm(&bytes).unwrap().pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn truncated_ppm_header_is_a_format_error() {
        let err = decode_ppm(b"P6\n2 ").unwrap_err();
        assert!(matches!(err, Error::Format { ref field, .. } if field == "height"), "{err}");
    }

    #[test]
    fn sixteen_bit_ppm_names_maxval() {
        let err = decode_ppm(b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap_err();
        assert!(matches!(err, Error::Format { ref field, .. } if field == "maxval"));
    }

    #[test]
    fn csv_rows_become_regions() {
        let m = parse_label_csv("0,0\n1,1").unwrap();
        assert_eq!(m.region_count(), 2);
        assert_eq!(m.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn labels_are_densified_in_first_occurrence_order() {
        let m = parse_label_csv("7,7\n3,3\n").unwrap();
        assert_eq!(m.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn disconnected_label_is_split() {
        let m = parse_label_csv("5,1,5\n1,1,1").unwrap();
        assert_eq!(m.region_count(), 3);
        assert_eq!(m.labels(), &[0, 1, 2, 1, 1, 1]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matches!(
            parse_label_csv("0,0\n1"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn png_label_overflow_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = save_raw_labels(2, 1, &[0, 70000], dir.path().join("l.png")).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_image("/nonexistent/definitely.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn over_segment_respects_blocks() {
        let img = Image::filled(8, 4, [10, 10, 10]).unwrap();
        let m = LabelMap::over_segment(&img, 4, 4).unwrap();
        assert_eq!(m.region_count(), 2);
    }
}
