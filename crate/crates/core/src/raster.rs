//! Raster, mask and geometry primitives.
//!
//! Coordinates put the origin at the top-left corner with `x` growing to the
//! right and `y` growing downward. Boxes are half-open: `[x0, x1) × [y0, y1)`.

use std::io::Cursor;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB image stored row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRaster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for ImageRaster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageRaster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageRaster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!("degenerate size {width}x{height}")));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "pixel buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&rgb);
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let img = RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

/// A row-major boolean mask.
///
/// Serializes through its RLE form, so JSON documents carry
/// `{"w":..,"h":..,"counts":[..]}` wherever a mask appears.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RleMask", try_from = "RleMask")]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "mask holds {} bits, {width}x{height} needs {}",
                bits.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    /// Builds a mask from nested rows, `rows[y][x]`. Handy for small literals.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.as_ref().len()) as u32;
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for row in rows {
            let row = row.as_ref();
            if row.len() as u32 != width {
                return Err(Error::InvalidRaster("ragged mask rows".into()));
            }
            bits.extend(row.iter().map(|&v| v != 0));
        }
        Self::from_bits(width, height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight half-open bounding rectangle `(x0, y0, x1, y1)`, `None` when empty.
    pub fn bounds(&self) -> Option<(u32, u32, u32, u32)> {
        let w = self.width as usize;
        let mut x0 = u32::MAX;
        let mut y0 = u32::MAX;
        let mut x1 = 0;
        let mut y1 = 0;
        for (y, row) in self.bits.chunks(w.max(1)).enumerate() {
            let Some(first) = row.iter().position(|&b| b) else {
                continue;
            };
            let last = row.iter().rposition(|&b| b).unwrap_or(first);
            x0 = x0.min(first as u32);
            x1 = x1.max(last as u32 + 1);
            y0 = y0.min(y as u32);
            y1 = y as u32 + 1;
        }
        (x0 != u32::MAX).then_some((x0, y0, x1, y1))
    }

    pub(crate) fn ensure_same_dims(&self, other: &BinaryMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    /// In-place union; `other` must share dimensions.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.ensure_same_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// `true` when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Pointwise OR of two equally sized masks.
pub fn mask_union(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    let mut out = a.clone();
    out.union_with(b)?;
    Ok(out)
}

/// Intersection over union, `1.0` when both masks are empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x & y) as u64;
        union += (x | y) as u64;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Row-major run-length encoding, starting with a (possibly empty) zero run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub w: u32,
    pub h: u32,
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn validate(&self) -> Result<()> {
        let total: u64 = self.counts.iter().sum();
        let expected = self.w as u64 * self.h as u64;
        if total != expected {
            return Err(Error::InvalidRle(format!(
                "counts sum to {total}, {}x{} needs {expected}",
                self.w, self.h
            )));
        }
        if let Some(i) = self.counts.iter().skip(1).position(|&c| c == 0) {
            return Err(Error::InvalidRle(format!("zero-length run at index {}", i + 1)));
        }
        Ok(())
    }
}

pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &bit in &mask.bits {
        if bit != current {
            counts.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    if run > 0 || counts.is_empty() {
        counts.push(run);
    }
    RleMask {
        w: mask.width,
        h: mask.height,
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask> {
    rle.validate()?;
    let mut bits = Vec::with_capacity(rle.w as usize * rle.h as usize);
    let mut value = false;
    for &c in &rle.counts {
        bits.extend(std::iter::repeat_n(value, c as usize));
        value = !value;
    }
    BinaryMask::from_bits(rle.w, rle.h, bits)
}

impl From<BinaryMask> for RleMask {
    fn from(mask: BinaryMask) -> Self {
        rle_encode(&mask)
    }
}

impl TryFrom<RleMask> for BinaryMask {
    type Error = Error;

    fn try_from(rle: RleMask) -> Result<Self> {
        rle_decode(&rle)
    }
}

/// Axis-aligned detection box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub score: f64,
    pub phrase: String,
}

impl BBox {
    pub fn area(&self) -> u64 {
        (self.x1.saturating_sub(self.x0)) as u64 * (self.y1.saturating_sub(self.y0)) as u64
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = self.x1.min(other.x1).saturating_sub(self.x0.max(other.x0)) as u64;
        let iy = self.y1.min(other.y1).saturating_sub(self.y0.max(other.y0)) as u64;
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union == 0 {
            return 0.0;
        }
        inter as f64 / union as f64
    }

    pub fn is_valid_for(&self, width: u32, height: u32) -> bool {
        self.x0 < self.x1
            && self.y0 < self.y1
            && self.x1 <= width
            && self.y1 <= height
            && (0.0..=1.0).contains(&self.score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Background,
    Foreground,
}

// Serialized as the 0/1 label convention of promptable segmenters.
impl Serialize for Polarity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(match self {
            Polarity::Background => 0,
            Polarity::Foreground => 1,
        })
    }
}

impl<'de> Deserialize<'de> for Polarity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(Polarity::Background),
            1 => Ok(Polarity::Foreground),
            other => Err(serde::de::Error::custom(format!(
                "polarity must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointPrompt {
    pub x: u32,
    pub y: u32,
    pub polarity: Polarity,
}

impl PointPrompt {
    pub fn foreground(x: u32, y: u32) -> Self {
        Self {
            x,
            y,
            polarity: Polarity::Foreground,
        }
    }
}

/// Per-pixel text/image alignment scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl SimilarityMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "similarity map holds {} values, {width}x{height} needs {}",
                values.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Min-max rescale into `[0, 1]`. Constant maps become all zeros.
pub fn normalize_similarity_map(map: &SimilarityMap) -> Result<SimilarityMap> {
    if let Some(i) = map.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let (lo, hi) = map
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let values = if map.values.is_empty() || hi <= lo {
        vec![0.0; map.values.len()]
    } else {
        let (lo, range) = (lo as f64, hi as f64 - lo as f64);
        map.values
            .iter()
            .map(|&v| if v == hi { 1.0 } else { ((v as f64 - lo) / range) as f32 })
            .collect()
    };
    Ok(SimilarityMap {
        width: map.width,
        height: map.height,
        values,
    })
}

/// One segmenter output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMask {
    pub mask: BinaryMask,
    pub confidence: f64,
}

/// Crops the tight bounding rectangle of `mask` out of `img`, blacking out
/// pixels that are not in the mask.
pub fn crop_to_bbox(img: &ImageRaster, mask: &BinaryMask) -> Result<ImageRaster> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: mask.dims(),
        });
    }
    let (x0, y0, x1, y1) = mask.bounds().ok_or(Error::EmptyMask)?;
    let (w, h) = (x1 - x0, y1 - y0);
    let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
    for y in y0..y1 {
        for x in x0..x1 {
            if mask.get(x, y) {
                pixels.extend_from_slice(&img.pixel(x, y));
            } else {
                pixels.extend_from_slice(&[0, 0, 0]);
            }
        }
    }
    ImageRaster::new(w, h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[u8]]) -> BinaryMask {
        BinaryMask::from_rows(rows).unwrap()
    }

    #[test]
    fn union_examples() {
        let a = m(&[&[1, 0], &[0, 0]]);
        let b = m(&[&[0, 0], &[0, 1]]);
        // pointwise OR computed by hand
        assert_eq!(mask_union(&a, &b).unwrap(), m(&[&[1, 0], &[0, 1]]));
        let empty = BinaryMask::empty(2, 2);
        assert_eq!(mask_union(&empty, &b).unwrap(), b);
        assert_eq!(mask_union(&b, &b).unwrap(), b);
    }

    #[test]
    fn union_rejects_mismatched_dims() {
        let err = mask_union(&BinaryMask::empty(2, 2), &BinaryMask::empty(3, 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn iou_examples() {
        let a = m(&[&[1, 1], &[0, 0]]);
        let b = m(&[&[1, 0], &[0, 0]]);
        assert_eq!(mask_iou(&a, &b).unwrap(), 0.5);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        let c = m(&[&[0, 0], &[1, 1]]);
        assert_eq!(mask_iou(&a, &c).unwrap(), 0.0);
        let e = BinaryMask::empty(2, 2);
        assert_eq!(mask_iou(&e, &e).unwrap(), 1.0);
        assert!(mask_iou(&a, &BinaryMask::empty(1, 1)).is_err());
    }

    #[test]
    fn rle_examples() {
        assert_eq!(rle_encode(&BinaryMask::empty(2, 2)).counts, vec![4]);
        assert_eq!(rle_encode(&BinaryMask::full(2, 2)).counts, vec![0, 4]);
        assert_eq!(rle_encode(&m(&[&[1, 1], &[0, 0]])).counts, vec![0, 2, 2]);
        assert_eq!(rle_encode(&m(&[&[0, 1], &[1, 0]])).counts, vec![1, 2, 1]);
    }

    #[test]
    fn rle_decode_rejects_bad_counts() {
        let bad = RleMask {
            w: 2,
            h: 2,
            counts: vec![1, 2],
        };
        assert!(matches!(rle_decode(&bad), Err(Error::InvalidRle(_))));
        let zero_run = RleMask {
            w: 2,
            h: 2,
            counts: vec![1, 0, 3],
        };
        assert!(rle_decode(&zero_run).is_err());
    }

    #[test]
    fn rle_json_shape() {
        let json = serde_json::to_string(&m(&[&[1, 1], &[0, 0]])).unwrap();
        assert_eq!(json, r#"{"w":2,"h":2,"counts":[0,2,2]}"#);
        let back: BinaryMask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m(&[&[1, 1], &[0, 0]]));
    }

    #[test]
    fn normalize_examples() {
        let s = SimilarityMap::new(3, 1, vec![0.0, 5.0, 10.0]).unwrap();
        assert_eq!(normalize_similarity_map(&s).unwrap().values(), &[0.0, 0.5, 1.0]);
        let c = SimilarityMap::new(2, 1, vec![7.0, 7.0]).unwrap();
        assert_eq!(normalize_similarity_map(&c).unwrap().values(), &[0.0, 0.0]);
        let n = SimilarityMap::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(normalize_similarity_map(&n).unwrap(), n);
        let bad = SimilarityMap::new(2, 1, vec![0.0, f32::NAN]).unwrap();
        assert!(matches!(normalize_similarity_map(&bad), Err(Error::NonFinite(1))));
        let inf = SimilarityMap::new(1, 1, vec![f32::INFINITY]).unwrap();
        assert!(normalize_similarity_map(&inf).is_err());
    }

    fn checker(w: u32, h: u32) -> ImageRaster {
        let mut img = ImageRaster::filled(w, h, [0, 0, 0]).unwrap();
        for y in 0..h {
            for x in 0..w {
                img.set_pixel(x, y, [x as u8 + 1, y as u8 + 1, 7]);
            }
        }
        img
    }

    #[test]
    fn crop_examples() {
        let img = checker(4, 4);
        assert_eq!(crop_to_bbox(&img, &BinaryMask::full(4, 4)).unwrap(), img);

        let mut single = BinaryMask::empty(4, 4);
        single.set(2, 1, true);
        let one = crop_to_bbox(&img, &single).unwrap();
        assert_eq!(one.dims(), (1, 1));
        assert_eq!(one.pixel(0, 0), img.pixel(2, 1));

        // L shape: left column of a 3x3 block plus its bottom row.
        let l = m(&[&[0, 1, 0, 0], &[0, 1, 0, 0], &[0, 1, 1, 1], &[0, 0, 0, 0]]);
        let crop = crop_to_bbox(&img, &l).unwrap();
        assert_eq!(crop.dims(), (3, 3));
        let mut zeroed = 0;
        for y in 0..3 {
            for x in 0..3 {
                if l.get(x + 1, y) {
                    assert_eq!(crop.pixel(x, y), img.pixel(x + 1, y));
                } else {
                    assert_eq!(crop.pixel(x, y), [0, 0, 0]);
                    zeroed += 1;
                }
            }
        }
        assert_eq!(zeroed, 4);

        assert!(matches!(
            crop_to_bbox(&img, &BinaryMask::empty(4, 4)),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn raster_validation_and_png_round_trip() {
        assert!(ImageRaster::new(0, 3, vec![]).is_err());
        assert!(ImageRaster::new(2, 2, vec![0; 11]).is_err());
        let img = checker(5, 3);
        let back = ImageRaster::from_png(&img.to_png().unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn box_iou() {
        let b = |x0, y0, x1, y1| BBox {
            x0,
            y0,
            x1,
            y1,
            score: 1.0,
            phrase: String::new(),
        };
        assert_eq!(b(0, 0, 2, 2).iou(&b(0, 0, 2, 2)), 1.0);
        assert_eq!(b(0, 0, 2, 2).iou(&b(2, 0, 4, 2)), 0.0);
        assert_eq!(b(0, 0, 2, 2).iou(&b(1, 0, 3, 2)), 2.0 / 6.0);
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize)
                .prop_map(move |bits| BinaryMask::from_bits(w, h, bits).unwrap())
        })
    }

    fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask, BinaryMask)> {
        (1u32..10, 1u32..10).prop_flat_map(|(w, h)| {
            let n = (w * h) as usize;
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(a, b, c)| {
                    (
                        BinaryMask::from_bits(w, h, a).unwrap(),
                        BinaryMask::from_bits(w, h, b).unwrap(),
                        BinaryMask::from_bits(w, h, c).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn rle_round_trip(mask in arb_mask()) {
            let rle = rle_encode(&mask);
            prop_assert!(rle.validate().is_ok());
            prop_assert_eq!(rle_decode(&rle).unwrap(), mask);
        }

        #[test]
        fn union_laws((a, b, c) in arb_pair()) {
            let ab = mask_union(&a, &b).unwrap();
            prop_assert_eq!(&ab, &mask_union(&b, &a).unwrap());
            prop_assert_eq!(
                mask_union(&ab, &c).unwrap(),
                mask_union(&a, &mask_union(&b, &c).unwrap()).unwrap()
            );
            prop_assert_eq!(&mask_union(&a, &a).unwrap(), &a);
            prop_assert_eq!(&mask_union(&a, &BinaryMask::empty(a.width(), a.height())).unwrap(), &a);
        }

        #[test]
        fn iou_laws((a, b, _c) in arb_pair()) {
            let ab = mask_iou(&a, &b).unwrap();
            prop_assert_eq!(ab, mask_iou(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_empty() {
                prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
            }
        }

        #[test]
        fn normalize_range_and_argmax(values in proptest::collection::vec(-1e3f32..1e3, 1..40)) {
            let n = values.len() as u32;
            let map = SimilarityMap::new(n, 1, values.clone()).unwrap();
            let out = normalize_similarity_map(&map).unwrap();
            prop_assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
            let max = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let min = values.iter().cloned().fold(f32::INFINITY, f32::min);
            if max > min {
                for (i, &v) in values.iter().enumerate() {
                    if v == max {
                        prop_assert_eq!(out.values()[i], 1.0);
                    }
                }
            }
        }
    }
}
