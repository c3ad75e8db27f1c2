//! Label maps as binary PPM images.

use anyhow::{bail, Result};
use wstatt_core::raster::LabelGrid;

/// Fixed class colors (Okabe-Ito first, then extras); see [`class_color`].
pub const PALETTE: [[u8; 3]; 12] = [
    [230, 159, 0],
    [86, 180, 233],
    [0, 158, 115],
    [240, 228, 66],
    [0, 114, 178],
    [213, 94, 0],
    [204, 121, 167],
    [153, 153, 153],
    [255, 255, 255],
    [128, 0, 0],
    [0, 128, 128],
    [128, 128, 0],
];

/// Color of class `id`: black for `unknown_id`, otherwise the palette entry
/// at `id % 12`.
pub fn class_color(id: u16, unknown_id: u16) -> [u8; 3] {
    if id == unknown_id {
        [0, 0, 0]
    } else {
        PALETTE[id as usize % PALETTE.len()]
    }
}

/// `P6` image with one pixel per cell.
pub fn render_ppm(labels: &LabelGrid) -> Result<Vec<u8>> {
    let (h, w) = (labels.height(), labels.width());
    let classes = labels.class_table.len();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * h * w);
    for &id in labels.ids() {
        if id as usize >= classes {
            bail!("class id {id} outside the {classes}-entry class table");
        }
        out.extend_from_slice(&class_color(id, labels.unknown_id));
    }
    Ok(out)
}
