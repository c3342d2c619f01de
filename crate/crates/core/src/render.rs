//! Palette rendering of label grids.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::RgbImage;
use serde::Serialize;

use crate::corpus::{LabelId, LabelMap, LabelTaxonomy, UNLABELED};
use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// Color drawn for unlabeled pixels; never produced by the default palette.
pub const UNLABELED_COLOR: Rgb = [0, 0, 0];

/// Bijective label-to-color table.
#[derive(Clone, Debug, PartialEq)]
pub struct Palette {
    colors: BTreeMap<LabelId, Rgb>,
    reverse: BTreeMap<Rgb, LabelId>,
}

/// The bit-interleaved colormap used by PASCAL VOC.
fn voc_color(index: u32) -> Rgb {
    let (mut r, mut g, mut b) = (0u8, 0u8, 0u8);
    let mut c = index;
    for j in 0..8 {
        r |= ((c & 1) as u8) << (7 - j);
        g |= (((c >> 1) & 1) as u8) << (7 - j);
        b |= (((c >> 2) & 1) as u8) << (7 - j);
        c >>= 3;
    }
    [r, g, b]
}

impl Palette {
    pub fn from_colors(colors: BTreeMap<LabelId, Rgb>) -> Result<Self> {
        let mut reverse = BTreeMap::new();
        for (&id, &c) in &colors {
            if c == UNLABELED_COLOR {
                return Err(Error::Invalid(format!("label {id} uses the reserved unlabeled color")));
            }
            if let Some(prev) = reverse.insert(c, id) {
                return Err(Error::Invalid(format!("labels {prev} and {id} share color {c:?}")));
            }
        }
        Ok(Palette { colors, reverse })
    }

    /// VOC colormap at `id + 1`, so no label is drawn black.
    pub fn default_for(taxonomy: &LabelTaxonomy) -> Self {
        let colors = taxonomy.ids().map(|id| (id, voc_color(id.0 as u32 + 1))).collect();
        Self::from_colors(colors).expect("VOC colormap is injective")
    }

    /// JSON object mapping label id (as a string) to `[r, g, b]`; the ids
    /// must all exist in `taxonomy`.
    pub fn load(path: &Path, taxonomy: &LabelTaxonomy) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Rgb> =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let mut colors = BTreeMap::new();
        for (k, c) in raw {
            let id = k
                .parse::<u8>()
                .ok()
                .map(LabelId)
                .filter(|&id| taxonomy.contains(id))
                .ok_or_else(|| Error::UnknownLabel(k.clone()))?;
            colors.insert(id, c);
        }
        Self::from_colors(colors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let raw: BTreeMap<String, Rgb> = self.colors.iter().map(|(k, v)| (k.0.to_string(), *v)).collect();
        let text = serde_json::to_string_pretty(&raw).map_err(|e| Error::json("palette", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn color(&self, id: LabelId) -> Option<Rgb> {
        self.colors.get(&id).copied()
    }

    pub fn label_of(&self, color: Rgb) -> Option<LabelId> {
        self.reverse.get(&color).copied()
    }

    pub fn colors(&self) -> &BTreeMap<LabelId, Rgb> {
        &self.colors
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LegendRow {
    pub id: LabelId,
    pub name: String,
    pub color: Rgb,
    pub pixels: u64,
    pub share: f64,
}

/// RGB render plus a legend sorted by descending pixel count (ties by id).
pub fn colorize(map: &LabelMap, palette: &Palette, taxonomy: &LabelTaxonomy) -> Result<(RgbImage, Vec<LegendRow>)> {
    let hist = map.histogram();
    for &id in hist.keys() {
        if palette.color(id).is_none() {
            return Err(Error::UnknownLabel(format!("label {id} has no palette color")));
        }
    }
    let mut img = RgbImage::new(map.width(), map.height());
    for (&v, px) in map.raw().iter().zip(img.pixels_mut()) {
        px.0 = if v == UNLABELED { UNLABELED_COLOR } else { palette.colors[&LabelId(v)] };
    }
    let total = map.raw().len() as f64;
    let mut legend: Vec<LegendRow> = hist
        .into_iter()
        .map(|(id, n)| LegendRow {
            id,
            name: taxonomy.name(id),
            color: palette.colors[&id],
            pixels: n,
            share: n as f64 / total,
        })
        .collect();
    legend.sort_by(|a, b| b.pixels.cmp(&a.pixels).then(a.id.cmp(&b.id)));
    Ok((img, legend))
}

/// Inverse of [`colorize`]; black decodes to unlabeled.
pub fn decode(img: &RgbImage, palette: &Palette) -> Result<LabelMap> {
    let mut data = Vec::with_capacity(img.as_raw().len() / 3);
    for px in img.pixels() {
        if px.0 == UNLABELED_COLOR {
            data.push(UNLABELED);
        } else {
            let id = palette.label_of(px.0).ok_or_else(|| Error::UnknownLabel(format!("color {:?}", px.0)))?;
            data.push(id.0);
        }
    }
    LabelMap::new(img.width(), img.height(), data)
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.to_path_buf(), source: e })
}
