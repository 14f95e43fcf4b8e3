//! Dataset manifests, ground-truth decoding, and tiling.
//!
//! Large frames are padded right and bottom to a multiple of the tile size
//! and cut into a row-major grid. Predictions are stitched back and padding
//! is dropped, so metrics are always computed on the original frame.

use std::collections::{BTreeMap, HashSet};
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ColorType, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::promptgen::ClassSpec;
use crate::raster::{BinaryMask, ImageRaster};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    /// Defaults to the image file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
}

impl ManifestItem {
    pub fn id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub tile_size: u32,
    pub ignore_index: u8,
    pub classes: Vec<ClassSpec>,
    /// `"R,G,B"` → class id. Absent means ground truth is an 8-bit index PNG.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<BTreeMap<String, u8>>,
    pub items: Vec<ManifestItem>,
    /// Directory item paths are relative to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Dataset(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("manifest {}: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 {
            return Err(Error::Dataset("tile_size must be at least 1".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Dataset("manifest lists no classes".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if c.id as usize != i {
                return Err(Error::Dataset(format!(
                    "class ids must be dense from 0: position {i} has id {}",
                    c.id
                )));
            }
            c.validate()?;
        }
        if (self.ignore_index as usize) < self.classes.len() {
            return Err(Error::Dataset(format!(
                "ignore_index {} collides with a class id",
                self.ignore_index
            )));
        }
        self.palette_table()?;
        let mut ids = HashSet::new();
        for item in &self.items {
            if !ids.insert(item.id()) {
                return Err(Error::Dataset(format!("duplicate item id {:?}", item.id())));
            }
        }
        Ok(())
    }

    /// Parsed palette. Values must be class ids or `ignore_index`.
    pub fn palette_table(&self) -> Result<Option<BTreeMap<[u8; 3], u8>>> {
        let Some(palette) = &self.palette else {
            return Ok(None);
        };
        let mut table = BTreeMap::new();
        let mut seen_ids = HashSet::new();
        for (key, &id) in palette {
            let rgb = parse_rgb(key)?;
            if (id as usize) >= self.classes.len() && id != self.ignore_index {
                return Err(Error::Dataset(format!(
                    "palette entry {key:?} maps to unknown class {id}"
                )));
            }
            if table.insert(rgb, id).is_some() {
                return Err(Error::Dataset(format!("palette colour {key:?} listed twice")));
            }
            if id != self.ignore_index && !seen_ids.insert(id) {
                return Err(Error::Dataset(format!("class {id} has more than one palette colour")));
            }
        }
        Ok(Some(table))
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn item(&self, id: &str) -> Option<&ManifestItem> {
        self.items.iter().find(|i| i.id() == id)
    }

    pub fn class_by_label(&self, label: &str) -> Option<&ClassSpec> {
        let key = label.trim();
        self.classes.iter().find(|c| c.label.eq_ignore_ascii_case(key))
    }

    pub fn load_image(&self, item: &ManifestItem) -> Result<ImageRaster> {
        let path = self.resolve(&item.image);
        let bytes =
            std::fs::read(&path).map_err(|e| Error::Dataset(format!("cannot read image {}: {e}", path.display())))?;
        ImageRaster::from_png(&bytes)
    }

    pub fn load_gt(&self, item: &ManifestItem) -> Result<Option<GroundTruth>> {
        let Some(rel) = &item.gt else {
            return Ok(None);
        };
        let path = self.resolve(rel);
        let bytes = std::fs::read(&path)
            .map_err(|e| Error::Dataset(format!("cannot read ground truth {}: {e}", path.display())))?;
        GroundTruth::from_png(&bytes, self.palette.is_some()).map(Some)
    }
}

fn parse_rgb(key: &str) -> Result<[u8; 3]> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    let bad = || Error::Dataset(format!("palette key {key:?} is not \"R,G,B\""));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut rgb = [0u8; 3];
    for (slot, p) in rgb.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| bad())?;
    }
    Ok(rgb)
}

/// Ground truth as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Indexed { width: u32, height: u32, values: Vec<u8> },
    Rgb(ImageRaster),
}

impl GroundTruth {
    pub fn indexed(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster(format!(
                "{} index values for a {width}x{height} frame",
                values.len()
            )));
        }
        Ok(GroundTruth::Indexed { width, height, values })
    }

    pub fn dims(&self) -> (u32, u32) {
        match self {
            GroundTruth::Indexed { width, height, .. } => (*width, *height),
            GroundTruth::Rgb(img) => img.dims(),
        }
    }

    /// Index mode requires an 8-bit single-channel PNG.
    pub fn from_png(bytes: &[u8], rgb: bool) -> Result<Self> {
        if rgb {
            return ImageRaster::from_png(bytes).map(GroundTruth::Rgb);
        }
        let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png).decode()?;
        if img.color() != ColorType::L8 {
            return Err(Error::Dataset(format!(
                "index ground truth must be an 8-bit grayscale PNG, found {:?}",
                img.color()
            )));
        }
        let luma = img.into_luma8();
        let (w, h) = luma.dimensions();
        GroundTruth::indexed(w, h, luma.into_raw())
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        match self {
            GroundTruth::Rgb(img) => img.to_png(),
            GroundTruth::Indexed { width, height, values } => {
                let buf = image::GrayImage::from_raw(*width, *height, values.clone())
                    .ok_or_else(|| Error::InvalidRaster("index buffer size".into()))?;
                let mut out = Vec::new();
                buf.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
                Ok(out)
            }
        }
    }
}

/// Per-class masks and the ignore mask; together they partition the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedGt {
    pub classes: Vec<BinaryMask>,
    pub ignore: BinaryMask,
}

pub fn decode_gt(gt: &GroundTruth, manifest: &DatasetManifest) -> Result<DecodedGt> {
    let (w, h) = gt.dims();
    let n = manifest.classes.len();
    let ignore_index = manifest.ignore_index;
    let mut index = Vec::with_capacity(w as usize * h as usize);
    match gt {
        GroundTruth::Indexed { values, .. } => {
            for (i, &v) in values.iter().enumerate() {
                if (v as usize) >= n && v != ignore_index {
                    return Err(Error::Dataset(format!(
                        "unknown class index {v} at pixel ({}, {})",
                        i % w as usize,
                        i / w as usize
                    )));
                }
                index.push(v);
            }
        }
        GroundTruth::Rgb(img) => {
            let table = manifest
                .palette_table()?
                .ok_or_else(|| Error::Dataset("RGB ground truth needs a palette".into()))?;
            for (i, px) in img.pixels().chunks_exact(3).enumerate() {
                let rgb = [px[0], px[1], px[2]];
                let v = *table.get(&rgb).ok_or_else(|| {
                    Error::Dataset(format!(
                        "unknown colour {},{},{} at pixel ({}, {})",
                        rgb[0],
                        rgb[1],
                        rgb[2],
                        i % w as usize,
                        i / w as usize
                    ))
                })?;
                index.push(v);
            }
        }
    }
    let classes = (0..n)
        .map(|c| BinaryMask::from_bits(w, h, index.iter().map(|&v| v as usize == c).collect()))
        .collect::<Result<Vec<_>>>()?;
    let ignore = BinaryMask::from_bits(w, h, index.iter().map(|&v| v == ignore_index).collect())?;
    Ok(DecodedGt { classes, ignore })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub width: u32,
    pub height: u32,
    pub tile_size: u32,
    pub columns: u32,
    pub rows: u32,
    pub pad_rgb: [u8; 3],
}

impl TileGrid {
    pub fn new(width: u32, height: u32, tile_size: u32, pad_rgb: [u8; 3]) -> Result<Self> {
        if tile_size == 0 {
            return Err(Error::InvalidArgument("tile_size must be at least 1".into()));
        }
        Ok(Self {
            width,
            height,
            tile_size,
            columns: width.div_ceil(tile_size),
            rows: height.div_ceil(tile_size),
            pad_rgb,
        })
    }

    pub fn len(&self) -> usize {
        self.columns as usize * self.rows as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn padded_dims(&self) -> (u64, u64) {
        (
            self.columns as u64 * self.tile_size as u64,
            self.rows as u64 * self.tile_size as u64,
        )
    }

    /// Top-left corner of tile `i` in row-major order.
    pub fn origin(&self, i: usize) -> (u32, u32) {
        let col = (i % self.columns as usize) as u32;
        let row = (i / self.columns as usize) as u32;
        (col * self.tile_size, row * self.tile_size)
    }

    /// Width and height of the part of tile `i` inside the original frame.
    pub fn valid_extent(&self, i: usize) -> (u32, u32) {
        let (x0, y0) = self.origin(i);
        (
            self.tile_size.min(self.width - x0),
            self.tile_size.min(self.height - y0),
        )
    }
}

pub fn tile_image(img: &ImageRaster, tile_size: u32, pad_rgb: [u8; 3]) -> Result<(TileGrid, Vec<ImageRaster>)> {
    let grid = TileGrid::new(img.width(), img.height(), tile_size, pad_rgb)?;
    let t = tile_size as usize;
    let src = img.pixels();
    let stride = img.width() as usize * 3;
    let mut tiles = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (x0, y0) = grid.origin(i);
        let (vw, vh) = grid.valid_extent(i);
        let mut buf: Vec<u8> = pad_rgb.iter().copied().cycle().take(t * t * 3).collect();
        for dy in 0..vh as usize {
            let s = (y0 as usize + dy) * stride + x0 as usize * 3;
            buf[dy * t * 3..dy * t * 3 + vw as usize * 3].copy_from_slice(&src[s..s + vw as usize * 3]);
        }
        tiles.push(ImageRaster::new(tile_size, tile_size, buf)?);
    }
    Ok((grid, tiles))
}

/// Cuts a full-frame mask along `grid`; padded pixels take `pad_value`.
pub fn tile_mask(grid: &TileGrid, mask: &BinaryMask, pad_value: bool) -> Result<Vec<BinaryMask>> {
    if mask.dims() != (grid.width, grid.height) {
        return Err(Error::DimensionMismatch {
            expected: (grid.width, grid.height),
            found: mask.dims(),
        });
    }
    let t = grid.tile_size as usize;
    let src = mask.bits();
    let stride = grid.width as usize;
    (0..grid.len())
        .map(|i| {
            let (x0, y0) = grid.origin(i);
            let (vw, vh) = grid.valid_extent(i);
            let mut bits = vec![pad_value; t * t];
            for dy in 0..vh as usize {
                let s = (y0 as usize + dy) * stride + x0 as usize;
                bits[dy * t..dy * t + vw as usize].copy_from_slice(&src[s..s + vw as usize]);
            }
            BinaryMask::from_bits(grid.tile_size, grid.tile_size, bits)
        })
        .collect()
}

/// Reassembles row-major tile masks and drops the padding.
pub fn stitch(grid: &TileGrid, tile_masks: &[BinaryMask]) -> Result<BinaryMask> {
    if tile_masks.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} tiles, got {}",
            grid.len(),
            tile_masks.len()
        )));
    }
    let t = grid.tile_size as usize;
    let stride = grid.width as usize;
    let mut bits = vec![false; stride * grid.height as usize];
    for (i, m) in tile_masks.iter().enumerate() {
        if m.dims() != (grid.tile_size, grid.tile_size) {
            return Err(Error::DimensionMismatch {
                expected: (grid.tile_size, grid.tile_size),
                found: m.dims(),
            });
        }
        let (x0, y0) = grid.origin(i);
        let (vw, vh) = grid.valid_extent(i);
        let src = m.bits();
        for dy in 0..vh as usize {
            let d = (y0 as usize + dy) * stride + x0 as usize;
            bits[d..d + vw as usize].copy_from_slice(&src[dy * t..dy * t + vw as usize]);
        }
    }
    BinaryMask::from_bits(grid.width, grid.height, bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::confusion_counts;
    use proptest::prelude::*;

    fn manifest(palette: Option<&[(&str, u8)]>) -> DatasetManifest {
        DatasetManifest {
            name: "t".into(),
            tile_size: 4,
            ignore_index: 255,
            classes: vec![ClassSpec::new(0, "road"), ClassSpec::new(1, "tree")],
            palette: palette.map(|p| p.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
            items: vec![],
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn tile_counts() {
        let g = TileGrid::new(2048, 2048, 1024, [0; 3]).unwrap();
        assert_eq!((g.columns, g.rows, g.len()), (2, 2, 4));
        let g = TileGrid::new(3840, 2160, 1024, [0; 3]).unwrap();
        assert_eq!((g.columns, g.rows), (4, 3));
        let (pw, ph) = g.padded_dims();
        assert_eq!((pw - 3840, ph - 2160), (256, 912));
        assert!(TileGrid::new(4, 4, 0, [0; 3]).is_err());
    }

    #[test]
    fn single_tile_is_identity() {
        let mut img = ImageRaster::filled(8, 8, [1, 2, 3]).unwrap();
        img.set_pixel(7, 7, [9, 9, 9]);
        let (grid, tiles) = tile_image(&img, 8, [0; 3]).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(tiles[0], img);
    }

    #[test]
    fn image_padding_uses_pad_colour() {
        let img = ImageRaster::filled(5, 3, [7, 7, 7]).unwrap();
        let (grid, tiles) = tile_image(&img, 4, [0, 0, 0]).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(tiles[0].pixel(3, 2), [7, 7, 7]);
        assert_eq!(tiles[0].pixel(0, 3), [0, 0, 0]);
        assert_eq!(tiles[1].pixel(0, 0), [7, 7, 7]);
        assert_eq!(tiles[1].pixel(1, 0), [0, 0, 0]);
    }

    #[test]
    fn all_one_tiles_stitch_to_full() {
        let g = TileGrid::new(5, 7, 3, [0; 3]).unwrap();
        let tiles = vec![BinaryMask::full(3, 3); g.len()];
        assert_eq!(stitch(&g, &tiles).unwrap(), BinaryMask::full(5, 7));
        assert!(stitch(&g, &tiles[1..]).is_err());
        let mut bad = tiles.clone();
        bad[0] = BinaryMask::full(2, 3);
        assert!(stitch(&g, &bad).is_err());
    }

    #[test]
    fn decode_indexed_example() {
        let gt = GroundTruth::indexed(2, 2, vec![0, 1, 1, 255]).unwrap();
        let d = decode_gt(&gt, &manifest(None)).unwrap();
        assert_eq!(d.classes[0].count(), 1);
        assert_eq!(d.classes[1].count(), 2);
        assert_eq!(d.ignore.count(), 1);
        assert!(d.ignore.get(1, 1));
    }

    #[test]
    fn decode_single_class() {
        let gt = GroundTruth::indexed(3, 2, vec![1; 6]).unwrap();
        let d = decode_gt(&gt, &manifest(None)).unwrap();
        assert!(d.classes[0].is_empty());
        assert_eq!(d.classes[1], BinaryMask::full(3, 2));
    }

    #[test]
    fn decode_unknown_values_name_the_pixel() {
        let gt = GroundTruth::indexed(2, 2, vec![0, 0, 0, 7]).unwrap();
        let err = decode_gt(&gt, &manifest(None)).unwrap_err().to_string();
        assert!(err.contains("7") && err.contains("(1, 1)"), "{err}");

        let m = manifest(Some(&[("255,0,0", 0), ("0,255,0", 1)]));
        let mut img = ImageRaster::filled(3, 1, [255, 0, 0]).unwrap();
        img.set_pixel(2, 0, [1, 2, 3]);
        let err = decode_gt(&GroundTruth::Rgb(img), &m).unwrap_err().to_string();
        assert!(err.contains("1,2,3") && err.contains("(2, 0)"), "{err}");
    }

    #[test]
    fn decode_rgb_partitions() {
        let m = manifest(Some(&[("255,0,0", 0), ("0,255,0", 1)]));
        let mut img = ImageRaster::filled(4, 4, [255, 0, 0]).unwrap();
        for y in 0..4 {
            img.set_pixel(3, y, [0, 255, 0]);
        }
        let d = decode_gt(&GroundTruth::Rgb(img), &m).unwrap();
        assert_eq!(d.classes[0].count(), 12);
        assert_eq!(d.classes[1].count(), 4);
        assert!(d.ignore.is_empty());
    }

    #[test]
    fn manifest_validation() {
        let mut m = manifest(None);
        assert!(m.validate().is_ok());
        m.tile_size = 0;
        assert!(m.validate().is_err());

        let mut m = manifest(None);
        m.classes[1].id = 5;
        assert!(m.validate().is_err());

        let m = manifest(Some(&[("1,1,1", 0), ("1, 1, 1", 1)]));
        assert!(m.validate().is_err());
        let m = manifest(Some(&[("1,1,1", 0), ("2,2,2", 0)]));
        assert!(m.validate().is_err());
        let m = manifest(Some(&[("1,1", 0)]));
        assert!(m.validate().is_err());

        let mut m = manifest(None);
        m.ignore_index = 1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn manifest_json_shape() {
        let json = r#"{"name":"d","tile_size":1024,"ignore_index":255,
            "classes":[{"id":0,"label":"building","synonyms":["house"]}],
            "palette":{"0,0,255":0},
            "items":[{"image":"a.png","gt":"a_gt.png"},{"image":"b.png"}]}"#;
        let m: DatasetManifest = serde_json::from_str(json).unwrap();
        m.validate().unwrap();
        assert_eq!(m.items[0].id(), "a");
        assert_eq!(m.items[1].gt, None);
        assert_eq!(m.palette_table().unwrap().unwrap()[&[0, 0, 255]], 0);
    }

    #[test]
    fn index_png_round_trip() {
        let gt = GroundTruth::indexed(3, 2, vec![0, 1, 255, 1, 0, 0]).unwrap();
        let png = gt.to_png().unwrap();
        assert_eq!(GroundTruth::from_png(&png, false).unwrap(), gt);
        let rgb = ImageRaster::filled(2, 2, [1, 2, 3]).unwrap().to_png().unwrap();
        assert!(GroundTruth::from_png(&rgb, false).is_err());
    }

    fn arb_frame() -> impl Strategy<Value = (u32, u32, u32, u64)> {
        (1u32..70, 1u32..70, 1u32..40, any::<u64>())
    }

    fn pseudo_mask(w: u32, h: u32, seed: u64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            let v = (x as u64).wrapping_mul(0x9E37_79B9).wrapping_add((y as u64) << 17) ^ seed;
            v.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 63 == 1
        })
    }

    proptest! {
        #[test]
        fn stitch_inverts_tile((w, h, t, seed) in arb_frame(), pad in any::<bool>()) {
            let mask = pseudo_mask(w, h, seed);
            let grid = TileGrid::new(w, h, t, [0; 3]).unwrap();
            let tiles = tile_mask(&grid, &mask, pad).unwrap();
            prop_assert_eq!(tiles.len(), grid.len());
            prop_assert_eq!(stitch(&grid, &tiles).unwrap(), mask);
        }

        #[test]
        fn image_tiles_cover_frame((w, h, t, seed) in arb_frame()) {
            let mut img = ImageRaster::filled(w, h, [0; 3]).unwrap();
            for y in 0..h { for x in 0..w {
                img.set_pixel(x, y, [(x ^ seed as u32) as u8, y as u8, 1]);
            }}
            let (grid, tiles) = tile_image(&img, t, [0; 3]).unwrap();
            for (i, tile) in tiles.iter().enumerate() {
                let (x0, y0) = grid.origin(i);
                for y in 0..t { for x in 0..t {
                    let inside = x0 + x < w && y0 + y < h;
                    let want = if inside { img.pixel(x0 + x, y0 + y) } else { [0; 3] };
                    prop_assert_eq!(tile.pixel(x, y), want);
                }}
            }
        }

        #[test]
        fn padding_never_counted((w, h, t, seed) in arb_frame()) {
            let gt = pseudo_mask(w, h, seed);
            let grid = TileGrid::new(w, h, t, [0; 3]).unwrap();
            let gt_tiles = tile_mask(&grid, &gt, false).unwrap();
            let ign_tiles = tile_mask(&grid, &BinaryMask::empty(w, h), true).unwrap();
            let total: u64 = gt_tiles.iter().zip(&ign_tiles).map(|(g, i)| {
                confusion_counts(&BinaryMask::full(t, t), g, Some(i)).unwrap().total()
            }).sum();
            prop_assert_eq!(total, w as u64 * h as u64);
        }

        #[test]
        fn decoded_masks_partition_frame(values in proptest::collection::vec(prop_oneof![Just(0u8), Just(1u8), Just(255u8)], 1..60)) {
            let w = values.len() as u32;
            let gt = GroundTruth::indexed(w, 1, values).unwrap();
            let d = decode_gt(&gt, &manifest(None)).unwrap();
            for x in 0..w {
                let hits = d.classes.iter().filter(|m| m.get(x, 0)).count() + d.ignore.get(x, 0) as usize;
                prop_assert_eq!(hits, 1);
            }
        }
    }
}
