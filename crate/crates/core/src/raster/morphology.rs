//! Label cleanup: boundary erosion and small-component removal.
//!
//! Both operate per class on the label raster and write `unknown_id` into
//! the pixels they discard. Unknown pixels are background: they are never
//! relabeled and never form components.

use super::LabelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

fn neighbors(
    i: usize,
    j: usize,
    h: usize,
    w: usize,
    conn: Connectivity,
) -> impl Iterator<Item = (usize, usize)> {
    conn.offsets().iter().filter_map(move |&(di, dj)| {
        let (ni, nj) = (i as isize + di, j as isize + dj);
        (ni >= 0 && nj >= 0 && (ni as usize) < h && (nj as usize) < w).then_some((ni as usize, nj as usize))
    })
}

/// One pass: a labeled pixel survives iff every in-bounds 8-neighbor has
/// the same id.
fn erode_once(labels: &LabelGrid) -> LabelGrid {
    let (h, w) = (labels.height(), labels.width());
    let unknown = labels.unknown_id;
    let mut out = labels.clone();
    for i in 0..h {
        for j in 0..w {
            let id = labels.get(i, j);
            if id == unknown {
                continue;
            }
            if neighbors(i, j, h, w, Connectivity::Eight).any(|(ni, nj)| labels.get(ni, nj) != id) {
                out.set(i, j, unknown);
            }
        }
    }
    out
}

/// Removes `levels` layers of pixels at class boundaries.
pub fn erode_labels(labels: &LabelGrid, levels: usize) -> LabelGrid {
    let mut out = labels.clone();
    for _ in 0..levels {
        out = erode_once(&out);
    }
    out
}

/// Relabels every same-class connected component smaller than `min_size`
/// pixels as Unknown.
pub fn remove_small_components(labels: &LabelGrid, min_size: usize, connectivity: Connectivity) -> LabelGrid {
    let (h, w) = (labels.height(), labels.width());
    let unknown = labels.unknown_id;
    let mut out = labels.clone();
    if min_size <= 1 {
        return out;
    }
    let mut seen = vec![false; h * w];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..h * w {
        let id = labels.ids()[start];
        if seen[start] || id == unknown {
            continue;
        }
        component.clear();
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            component.push(p);
            for (ni, nj) in neighbors(p / w, p % w, h, w, connectivity) {
                let q = ni * w + nj;
                if !seen[q] && labels.ids()[q] == id {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        if component.len() < min_size {
            for &p in &component {
                out.ids_mut()[p] = unknown;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn grid(rows: &[&str]) -> LabelGrid {
        // '.' = unknown(0), 'A' = 1, 'B' = 2, 'C' = 3
        let h = rows.len();
        let w = rows[0].len();
        let ids = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| if b == b'.' { 0 } else { (b - b'A' + 1) as u16 }))
            .collect();
        LabelGrid::new(h, w, ids, vec!["unknown".into(), "A".into(), "B".into(), "C".into()], 0).unwrap()
    }

    fn render(g: &LabelGrid) -> Vec<String> {
        (0..g.height())
            .map(|i| {
                (0..g.width())
                    .map(|j| match g.get(i, j) {
                        0 => '.',
                        k => (b'A' + k as u8 - 1) as char,
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn thin_line_disappears() {
        let g = grid(&["BBBBB", "AAAAA", "BBBBB"]);
        let e = erode_labels(&g, 1);
        assert_eq!(render(&e)[1], ".....");
    }

    #[test]
    fn three_by_three_block_keeps_center() {
        let g = grid(&["BBBBB", "BAAAB", "BAAAB", "BAAAB", "BBBBB"]);
        let e = erode_labels(&g, 1);
        // Brute force over the nine A pixels: only (2,2) has all-A neighbors.
        for i in 1..4 {
            for j in 1..4 {
                let expect = if (i, j) == (2, 2) { 1 } else { 0 };
                assert_eq!(e.get(i, j), expect, "pixel ({i},{j})");
            }
        }
    }

    #[test]
    fn zero_levels_is_identity() {
        let g = grid(&["AB", "BA"]);
        assert_eq!(erode_labels(&g, 0), g);
    }

    #[test]
    fn scene_edge_does_not_erode() {
        let g = grid(&["AAA", "AAA"]);
        assert_eq!(erode_labels(&g, 1), g);
    }

    #[test]
    fn small_component_becomes_unknown() {
        let g = grid(&["AAAB", "BBBB", "BBBB"]);
        let r = remove_small_components(&g, 5, Connectivity::Eight);
        assert_eq!(render(&r)[0], "...B");
    }

    #[test]
    fn min_size_one_is_identity() {
        let g = grid(&["AB.", "CAB"]);
        assert_eq!(remove_small_components(&g, 1, Connectivity::Eight), g);
    }

    #[test]
    fn diagonal_pixels_connect_under_eight() {
        let g = grid(&["AB", "BA"]);
        let r8 = remove_small_components(&g, 2, Connectivity::Eight);
        assert_eq!(r8, g);
        let r4 = remove_small_components(&g, 2, Connectivity::Four);
        assert_eq!(render(&r4), vec!["..", ".."]);
    }

    /// Union-find labeling, independent of the flood fill above.
    pub(crate) fn components_oracle(g: &LabelGrid, min_size: usize, conn: Connectivity) -> LabelGrid {
        let (h, w) = (g.height(), g.width());
        let mut parent: Vec<usize> = (0..h * w).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for i in 0..h {
            for j in 0..w {
                for (di, dj) in conn.offsets() {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni as usize >= h || nj as usize >= w {
                        continue;
                    }
                    let (a, b) = (i * w + j, ni as usize * w + nj as usize);
                    if g.ids()[a] == g.ids()[b] && g.ids()[a] != g.unknown_id {
                        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                        parent[ra] = rb;
                    }
                }
            }
        }
        let mut size = vec![0usize; h * w];
        for p in 0..h * w {
            let r = find(&mut parent, p);
            size[r] += 1;
        }
        let mut out = g.clone();
        for p in 0..h * w {
            let r = find(&mut parent, p);
            if g.ids()[p] != g.unknown_id && size[r] < min_size {
                out.ids_mut()[p] = g.unknown_id;
            }
        }
        out
    }

    fn random_grid(seed: u64, h: usize, w: usize, classes: u16) -> LabelGrid {
        let mut r = SplitMix64::new(seed);
        let ids = (0..h * w).map(|_| r.below(classes as usize) as u16).collect();
        LabelGrid::new(h, w, ids, (0..classes).map(|c| format!("c{c}")).collect(), 0).unwrap()
    }

    proptest! {
        #[test]
        fn components_match_union_find(seed in any::<u64>(), h in 1usize..33, w in 1usize..33,
                                       min_size in 1usize..8, eight in any::<bool>()) {
            let g = random_grid(seed, h, w, 4);
            let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
            prop_assert_eq!(remove_small_components(&g, min_size, conn), components_oracle(&g, min_size, conn));
        }

        #[test]
        fn erosion_levels_compose(seed in any::<u64>(), a in 0usize..3, b in 0usize..3) {
            let g = random_grid(seed, 12, 12, 2);
            prop_assert_eq!(erode_labels(&g, a + b), erode_labels(&erode_labels(&g, a), b));
        }
    }
}
