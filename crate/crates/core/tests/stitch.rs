use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satsolar_core::raster::{ColorRaster, GridMeta, HeightRaster, Raster};
use satsolar_core::stitch::*;

fn random_raster(rng: &mut ChaCha8Rng, w: usize, h: usize) -> HeightRaster {
    Raster::from_fn(GridMeta::with_size(w, h, 0.25).unwrap(), |_, _| rng.random_range(-50.0..50.0))
}

#[test]
fn single_tile_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = random_raster(&mut rng, 37, 23);
    let t = TilePlacement { tile: r.clone(), row_offset: 0, col_offset: 0, margin: 8 };
    assert_eq!(stitch(&[t], r.meta()).unwrap(), r);
}

#[test]
fn identical_content_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = random_raster(&mut rng, 150, 110);
    let wins = split_tiles(r.meta(), 64, 16).unwrap();
    let tiles = split_raster(&r, &wins, 8).unwrap();
    assert!(tiles.len() >= 6);
    assert_eq!(stitch(&tiles, r.meta()).unwrap().data(), r.data());

    let labels = r.map(|v| (v.abs() as u32) % 5);
    let ltiles = split_raster(&labels, &wins, 8).unwrap();
    assert_eq!(stitch_labels(&ltiles, labels.meta()).unwrap().data(), labels.data());

    let rgb: ColorRaster = r.map(|v| [(v + 50.0) as u8, 7, (100.0 - v) as u8]);
    let ctiles = split_raster(&rgb, &wins, 8).unwrap();
    assert_eq!(stitch(&ctiles, rgb.meta()).unwrap().data(), rgb.data());
}

#[test]
fn constant_tiles_meet_at_their_mean() {
    for m in [1usize, 3, 8] {
        let overlap = 2 * m;
        let tw = 20;
        let mosaic = GridMeta::with_size(2 * tw - overlap, 6, 1.0).unwrap();
        let tmeta = GridMeta::with_size(tw, 6, 1.0).unwrap();
        let tiles = [
            TilePlacement { tile: Raster::filled(tmeta, 0.0), row_offset: 0, col_offset: 0, margin: m },
            TilePlacement { tile: Raster::filled(tmeta, 10.0), row_offset: 0, col_offset: tw - overlap, margin: m },
        ];
        let out = stitch(&tiles, &mosaic).unwrap();
        // the midline falls between the two central overlap columns
        let left = tw - overlap + m - 1;
        for r in 0..6 {
            let mid = 0.5 * (out.at(r, left) + out.at(r, left + 1));
            assert!((mid - 5.0).abs() < 1e-9, "margin {m}: {mid}");
            for c in 0..mosaic.width {
                let v = *out.at(r, c);
                assert!((0.0..=10.0).contains(&v));
            }
        }
    }
}

#[test]
fn odd_overlap_centre_pixel_is_the_mean() {
    let tmeta = GridMeta::with_size(11, 3, 1.0).unwrap();
    let mosaic = GridMeta::with_size(17, 3, 1.0).unwrap();
    let tiles = [
        TilePlacement { tile: Raster::filled(tmeta, 0.0), row_offset: 0, col_offset: 0, margin: 2 },
        TilePlacement { tile: Raster::filled(tmeta, 10.0), row_offset: 0, col_offset: 6, margin: 2 },
    ];
    let out = stitch(&tiles, &mosaic).unwrap();
    assert_eq!(*out.at(1, 8), 5.0);
}

#[test]
fn tile_order_does_not_change_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mosaic = GridMeta::with_size(90, 70, 0.25).unwrap();
    let wins = split_tiles(&mosaic, 40, 12).unwrap();
    let mut tiles: Vec<TilePlacement<f64>> = wins
        .iter()
        .map(|w| TilePlacement {
            tile: random_raster(&mut rng, w.width, w.height),
            row_offset: w.row_offset,
            col_offset: w.col_offset,
            margin: 6,
        })
        .collect();
    // a duplicate window with different content
    let extra = TilePlacement { tile: random_raster(&mut rng, 40, 40), ..tiles[1].clone() };
    tiles.push(extra);
    let reference = stitch(&tiles, &mosaic).unwrap();
    let labels: Vec<TilePlacement<u32>> = tiles
        .iter()
        .map(|t| TilePlacement {
            tile: t.tile.map(|v| (v.abs() as u32) % 4),
            row_offset: t.row_offset,
            col_offset: t.col_offset,
            margin: t.margin,
        })
        .collect();
    let lref = stitch_labels(&labels, &mosaic).unwrap();
    for seed in 0..8 {
        let mut order: Vec<usize> = (0..tiles.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<_> = order.iter().map(|&k| tiles[k].clone()).collect();
        let out = stitch(&shuffled, &mosaic).unwrap();
        assert!(out.data().iter().zip(reference.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let lshuffled: Vec<_> = order.iter().map(|&k| labels[k].clone()).collect();
        assert_eq!(stitch_labels(&lshuffled, &mosaic).unwrap(), lref);
    }
}

proptest! {
    #[test]
    fn stitched_values_stay_within_covering_range(seed in 0u64..1000, margin in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mosaic = GridMeta::with_size(30, 26, 0.25).unwrap();
        let wins = split_tiles(&mosaic, 14, 5).unwrap();
        let tiles: Vec<TilePlacement<f64>> = wins.iter().map(|w| TilePlacement {
            tile: random_raster(&mut rng, w.width, w.height),
            row_offset: w.row_offset,
            col_offset: w.col_offset,
            margin,
        }).collect();
        let out = stitch(&tiles, &mosaic).unwrap();
        for r in 0..mosaic.height {
            for c in 0..mosaic.width {
                let vals: Vec<f64> = tiles.iter().filter_map(|t| {
                    let (tr, tc) = (r.checked_sub(t.row_offset)?, c.checked_sub(t.col_offset)?);
                    t.tile.get(tr, tc).copied()
                }).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let v = *out.at(r, c);
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }
    }
}
