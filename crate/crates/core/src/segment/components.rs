//! Connected components over building pixels and small-component merging.

use std::collections::BTreeMap;

/// 4-connected components of equal label among `pixels` (sorted raster
/// indices on a grid of width `w`). Returns a component id per pixel, ids in
/// order of first pixel.
pub fn label_components(pixels: &[usize], labels: &[usize], w: usize) -> Vec<usize> {
    let n = pixels.len();
    let local = |idx: usize| pixels.binary_search(&idx).ok();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for q in neighbors(pixels[p], w).into_iter().flatten().filter_map(local) {
                if comp[q] == usize::MAX && labels[q] == labels[p] {
                    comp[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    comp
}

fn neighbors(idx: usize, w: usize) -> [Option<usize>; 4] {
    let c = idx % w;
    [idx.checked_sub(w), Some(idx + w), (c > 0).then(|| idx - 1), (c + 1 < w).then(|| idx + 1)]
}

/// Merge components smaller than `min_pixels` into the neighbor sharing the
/// longest boundary, smallest component first (ties to the lower id).
/// Components without neighbors are kept. Returns the new component per pixel,
/// renumbered by first pixel.
pub fn merge_small(pixels: &[usize], comp: &[usize], w: usize, min_pixels: usize) -> Vec<usize> {
    let count = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; count];
    for &c in comp {
        size[c] += 1;
    }
    let mut border: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); count];
    for (p, &idx) in pixels.iter().enumerate() {
        // right and down neighbors count each shared edge once
        let c = idx % w;
        let right = (c + 1 < w).then(|| idx + 1);
        for q in [right, Some(idx + w)].into_iter().flatten() {
            if let Ok(q) = pixels.binary_search(&q) {
                let (a, b) = (comp[p], comp[q]);
                if a != b {
                    *border[a].entry(b).or_insert(0) += 1;
                    *border[b].entry(a).or_insert(0) += 1;
                }
            }
        }
    }
    let mut alive = vec![true; count];
    let mut target: Vec<usize> = (0..count).collect();
    loop {
        let pick = (0..count)
            .filter(|&c| alive[c] && size[c] < min_pixels && !border[c].is_empty())
            .min_by_key(|&c| (size[c], c));
        let Some(small) = pick else { break };
        let (&into, _) = border[small].iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).expect("non-empty border");
        alive[small] = false;
        target[small] = into;
        size[into] += size[small];
        let moved = std::mem::take(&mut border[small]);
        for (other, len) in moved {
            border[other].remove(&small);
            if other != into {
                *border[into].entry(other).or_insert(0) += len;
                *border[other].entry(into).or_insert(0) += len;
            }
        }
    }
    let resolve = |mut c: usize| {
        while target[c] != c {
            c = target[c];
        }
        c
    };
    let mut renumber = vec![usize::MAX; count];
    let mut next = 0;
    comp.iter()
        .map(|&c| {
            let r = resolve(c);
            if renumber[r] == usize::MAX {
                renumber[r] = next;
                next += 1;
            }
            renumber[r]
        })
        .collect()
}
