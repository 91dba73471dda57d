//! 8-connected component labelling with a two-pass union-find.

use crate::imaging::{BinaryMask, BoundingBox, Component, LabelImage, Raster};

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // slot 0 is the background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Labels 8-connected foreground regions, dropping those with fewer than
/// `min_area` pixels. Surviving labels are `1..=K` in first-encounter raster
/// order.
pub fn connected_components(mask: &BinaryMask, min_area: usize) -> LabelImage {
    let (w, h) = mask.dims();
    let mut provisional = vec![0u32; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            // already-visited 8-neighbours: W, NW, N, NE
            let mut label = 0u32;
            let mut consider = |l: u32, sets: &mut DisjointSet| {
                if l != 0 {
                    label = if label == 0 { l } else { sets.union(label, l) };
                }
            };
            if x > 0 {
                consider(provisional[y * w + x - 1], &mut sets);
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    consider(provisional[up + x - 1], &mut sets);
                }
                consider(provisional[up + x], &mut sets);
                if x + 1 < w {
                    consider(provisional[up + x + 1], &mut sets);
                }
            }
            if label == 0 {
                label = sets.make();
            }
            provisional[y * w + x] = label;
        }
    }

    // resolve roots and gather statistics per root
    let mut root_stats: Vec<Option<(usize, BoundingBox, usize)>> = vec![None; sets.parent.len()];
    for (i, p) in provisional.iter_mut().enumerate() {
        if *p == 0 {
            continue;
        }
        let r = sets.find(*p);
        *p = r;
        let (x, y) = (i % w, i / w);
        match &mut root_stats[r as usize] {
            Some((count, bbox, _)) => {
                *count += 1;
                bbox.include(x, y);
            }
            slot @ None => *slot = Some((1, BoundingBox::point(x, y), i)),
        }
    }

    // renumber in order of each component's first raster pixel
    let mut order: Vec<(usize, u32)> = root_stats
        .iter()
        .enumerate()
        .filter_map(|(r, s)| match s {
            Some((count, _, first)) if *count >= min_area.max(1) => Some((*first, r as u32)),
            _ => None,
        })
        .collect();
    order.sort_unstable();

    let mut remap = vec![0u32; sets.parent.len()];
    let mut components = Vec::with_capacity(order.len());
    for (k, &(_, root)) in order.iter().enumerate() {
        let label = k as u32 + 1;
        remap[root as usize] = label;
        let (count, bbox, _) = root_stats[root as usize].expect("root has stats");
        components.push(Component {
            label,
            pixel_count: count,
            bbox,
        });
    }
    for p in &mut provisional {
        *p = remap[*p as usize];
    }

    LabelImage::from_parts(
        Raster::from_vec(w, h, provisional).expect("dimensions preserved"),
        components,
    )
}
