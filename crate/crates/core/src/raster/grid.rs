use serde::{Deserialize, Serialize};

use super::{EvalMask, LabelGrid, RasterError};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Fraction of crop pixels, when labels were supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_frac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub grid_px: usize,
    pub scene_h: usize,
    pub scene_w: usize,
    pub cells: Vec<GridCell>,
}

impl GridLayout {
    pub fn kept(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().filter(|c| c.split != Split::Dropped)
    }

    pub fn full_cells(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().filter(move |c| c.rows == self.grid_px && c.cols == self.grid_px)
    }
}

/// Seeded split assignment: shuffles the kept-cell ordinals and hands out
/// `train`/`val` fractions, the remainder going to test.
pub fn seeded_split(seed: u64, kept: usize, train_frac: f64, val_frac: f64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..kept).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let n_train = (kept as f64 * train_frac).round() as usize;
    let n_val = ((kept as f64 * val_frac).round() as usize).min(kept - n_train.min(kept));
    let mut out = vec![Split::Test; kept];
    for (rank, &cell) in order.iter().enumerate() {
        out[cell] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}

/// Tiles the scene into `grid_px` squares.
///
/// Trailing partial cells are dropped with reason `"partial"`. With labels,
/// cells whose crop fraction is `<= min_crop_frac` are dropped as
/// `"low-crop"`. The remaining cells get their split from `assign`, called
/// with the running ordinal of kept cells.
pub fn partition_grids(
    scene_h: usize,
    scene_w: usize,
    grid_px: usize,
    labels: Option<&LabelGrid>,
    crop_ids: &[u16],
    min_crop_frac: f64,
    mut assign: impl FnMut(usize) -> Split,
) -> Result<GridLayout, RasterError> {
    if grid_px == 0 || grid_px > scene_h || grid_px > scene_w {
        return Err(RasterError::GridSize { grid_px, h: scene_h, w: scene_w });
    }
    if let Some(l) = labels {
        if l.height() != scene_h || l.width() != scene_w {
            return Err(RasterError::Invalid(format!(
                "labels are {}x{}, scene is {scene_h}x{scene_w}",
                l.height(),
                l.width()
            )));
        }
    }
    let mut cells = Vec::new();
    let mut ordinal = 0;
    for row0 in (0..scene_h).step_by(grid_px) {
        for col0 in (0..scene_w).step_by(grid_px) {
            let rows = grid_px.min(scene_h - row0);
            let cols = grid_px.min(scene_w - col0);
            if rows < grid_px || cols < grid_px {
                cells.push(GridCell {
                    row0,
                    col0,
                    rows,
                    cols,
                    split: Split::Dropped,
                    reason: Some("partial".into()),
                    crop_frac: None,
                });
                continue;
            }
            let crop_frac = labels.map(|l| {
                let mut crop = 0usize;
                for i in row0..row0 + rows {
                    for j in col0..col0 + cols {
                        if crop_ids.contains(&l.get(i, j)) {
                            crop += 1;
                        }
                    }
                }
                crop as f64 / (rows * cols) as f64
            });
            let (split, reason) = match crop_frac {
                Some(f) if f <= min_crop_frac => (Split::Dropped, Some("low-crop".to_string())),
                _ => {
                    let s = assign(ordinal);
                    ordinal += 1;
                    (s, None)
                }
            };
            cells.push(GridCell { row0, col0, rows, cols, split, reason, crop_frac });
        }
    }
    Ok(GridLayout { grid_px, scene_h, scene_w, cells })
}

/// Valid iff the pixel is at least `margin` pixels from every edge. When
/// `2·margin >= min(h, w)` nothing is valid.
pub fn boundary_exclusion_mask(h: usize, w: usize, margin: usize) -> EvalMask {
    let mut mask = EvalMask::all(h, w, false);
    if 2 * margin >= h.min(w) {
        return mask;
    }
    for i in margin..h - margin {
        for j in margin..w - margin {
            mask.valid[i * w + j] = true;
        }
    }
    mask
}
