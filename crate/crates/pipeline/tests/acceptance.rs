//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use satsolar_core::io::read_json;
use satsolar_core::masking::{coverage_mask, temporal_mismatch_mask};
use satsolar_core::maxflow::{min_cut, FlowGraph};
use satsolar_core::metrics::{
    azimuth_distance_deg, mape, masked_mae, match_and_iou, segment_angle_errors, MetricsReport, Region,
};
use satsolar_core::raster::{ColorRaster, GridMeta, HeightRaster, InstanceKind, InstanceMap, Raster};
use satsolar_core::reproject::{derive_angles, reproject, reproject_with_sides, Direction, ViewGeometry};
use satsolar_core::segment::{segment_roofs_detailed, SegmentParams, SegmentStats};
use satsolar_core::solar::{
    annual_flux, declination_deg, is_shaded, sun_position, sun_positions, IrradianceModel, SunSample,
};
use satsolar_core::stitch::{split_raster, split_tiles, stitch, stitch_labels, TilePlacement};
use satsolar_core::synth::{
    perturb, random_scene, render_scene, BuildingSpec, RandomSceneParams, RoofType, SceneSpec, SceneTruth, Terrain,
};
use satsolar_core::terrain::surface_normals;
use satsolar_pipeline::scene::truth_stats;
use satsolar_pipeline::{evaluate, load_prefix, run_pipeline_with_workers, PipelineConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_heights(rng: &mut ChaCha8Rng, w: usize, h: usize) -> HeightRaster {
    let meta = GridMeta::with_size(w, h, 0.25).unwrap();
    Raster::from_fn(meta, |_, _| if rng.random_bool(0.3) { rng.random_range(0.0..12.0) } else { 0.0 })
}

fn truth_scene(seed: u64, size: usize) -> SceneTruth {
    let meta = GridMeta::new(0.0, size as f64 * 0.25, 0.25, size, size).unwrap();
    let mut params = RandomSceneParams::new(meta);
    params.cell_m = (size as f64 * 0.25 / 2.0).min(20.0);
    render_scene(&random_scene(&params, seed).unwrap()).unwrap()
}

fn random_view(rng: &mut ChaCha8Rng) -> ViewGeometry {
    ViewGeometry::new(rng.random_range(30.0..=90.0), rng.random_range(0.0..360.0)).unwrap()
}

fn reprojection_exactness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let el = if k % 100 == 0 { 90.0 } else { r.random_range(1e-3..=90.0) };
        let az = r.random_range(0.0..360.0);
        let (ax, ay) = derive_angles(el, az).unwrap();
        let t = f64::tan(el.to_radians());
        let (ex, ey) = if el == 90.0 {
            (0.0, 0.0)
        } else {
            ((az.to_radians().sin() / t).atan().to_degrees(), (az.to_radians().cos() / t).atan().to_degrees())
        };
        worst = worst.max((ax - ex).abs()).max((ay - ey).abs());
    }
    ensure!(worst <= 1e-12, "angle deviation {worst:e}");
    ensure!(derive_angles(0.0, 10.0).is_err() && derive_angles(-1.0, 10.0).is_err(), "bad elevation accepted");
    let nadir = ViewGeometry::new(90.0, 0.0).unwrap();
    for _ in 0..20 {
        let (w, h) = (r.random_range(8..80), r.random_range(8..80));
        let heights = random_heights(&mut r, w, h);
        let values = heights.map(|v| v * 3.0 - 1.0);
        for dir in [Direction::ToNadir, Direction::ToOffnadir] {
            let out = reproject(&values, &heights, &nadir, dir).unwrap();
            ensure!(out.values == values, "nadir reprojection changed values");
            ensure!(out.occlusion.count_true() == 0, "nadir reprojection occluded pixels");
            ensure!(
                out.provenance.iter().enumerate().all(|(i, p)| *p == Some(i)),
                "nadir provenance is not the identity"
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.2}s");
    Ok(format!("max angle deviation {worst:e}, {secs:.3}s"))
}

/// Exhaustive z-buffer: for every target, the maximal (height, source) among
/// all sub-projections landing on it.
fn zbuffer_oracle(heights: &HeightRaster, view: &ViewGeometry, dir: Direction, sides: bool) -> Vec<Option<usize>> {
    let meta = heights.meta();
    let res = meta.spatial_resolution;
    let sign = if dir == Direction::ToNadir { -1.0 } else { 1.0 };
    let (ty, tx) = (view.angle_y_deg.to_radians().tan(), view.angle_x_deg.to_radians().tan());
    let mut best: Vec<Option<(f64, usize)>> = vec![None; meta.len()];
    for i in 0..meta.len() {
        if !heights.is_valid(i) {
            continue;
        }
        let (row, col) = meta.row_col(i);
        let top = heights.data()[i];
        let mut levels = vec![top];
        if sides {
            let mut base = top;
            let nbrs = [
                (row as i64 - 1, col as i64),
                (row as i64 + 1, col as i64),
                (row as i64, col as i64 - 1),
                (row as i64, col as i64 + 1),
            ];
            for (r, c) in nbrs {
                if let Some(j) = (r >= 0 && c >= 0 && (r as usize) < meta.height && (c as usize) < meta.width)
                    .then(|| meta.index(r as usize, c as usize))
                {
                    if heights.is_valid(j) {
                        base = base.min(heights.data()[j]);
                    }
                }
            }
            let mut k = 0.0;
            while base + k < top {
                levels.push(base + k);
                k += 1.0;
            }
        }
        for z in levels {
            let (dr, dc) = if view.is_nadir() { (0.0, 0.0) } else { (sign * (z / res) * ty, sign * (z / res) * tx) };
            let (tr, tc) = ((row as f64 + dr).round(), (col as f64 + dc).round());
            if tr < 0.0 || tc < 0.0 || tr >= meta.height as f64 || tc >= meta.width as f64 {
                continue;
            }
            let t = meta.index(tr as usize, tc as usize);
            let cand = (z, i);
            if best[t].is_none_or(|b| cand.0 > b.0 || (cand.0 == b.0 && cand.1 > b.1)) {
                best[t] = Some(cand);
            }
        }
    }
    best.into_iter().map(|b| b.map(|(_, i)| i)).collect()
}

fn occlusion_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut targets = 0usize;
    for k in 0..50 {
        let size = r.random_range(32..=128);
        let truth = truth_scene(1000 + k, size);
        let view = random_view(&mut r);
        let dir = if k % 2 == 0 { Direction::ToOffnadir } else { Direction::ToNadir };
        let plain = reproject(&truth.heightmap, &truth.heightmap, &view, dir).unwrap();
        let want = zbuffer_oracle(&truth.heightmap, &view, dir, false);
        ensure!(plain.provenance == want, "scene {k}: winners differ from the oracle");
        for (t, w) in want.iter().enumerate() {
            ensure!(plain.occlusion.data()[t] == w.is_none(), "scene {k}: occlusion differs at {t}");
        }
        let sides = reproject_with_sides(&truth.heightmap, &view).unwrap();
        let want = zbuffer_oracle(&truth.heightmap, &view, Direction::ToOffnadir, true);
        ensure!(sides.provenance == want, "scene {k}: wall winners differ from the oracle");
        for (t, w) in want.iter().enumerate() {
            ensure!(sides.occlusion.data()[t] == w.is_none(), "scene {k}: wall occlusion differs at {t}");
        }
        targets += want.len();
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s");
    Ok(format!("50 scenes, {targets} targets matched, {secs:.2}s"))
}

fn round_trip() -> Outcome {
    let mut r = rng(3);
    let (mut visible, mut recovered) = (0usize, 0usize);
    for k in 0..20 {
        let truth = truth_scene(2000 + k, 128);
        let view = random_view(&mut r);
        let meta = *truth.heightmap.meta();
        let index = Raster::from_fn(meta, |row, col| meta.index(row, col));
        let fwd = reproject(&index, &truth.heightmap, &view, Direction::ToOffnadir).unwrap();
        let back = reproject(&fwd.values, &fwd.heights, &view, Direction::ToNadir).unwrap();
        let mut seen = vec![false; meta.len()];
        for p in fwd.provenance.iter().flatten() {
            seen[*p] = true;
        }
        for i in (0..meta.len()).filter(|&i| seen[i]) {
            visible += 1;
            if back.values.is_valid(i)
                && back.values.data()[i] == i
                && back.heights.data()[i].to_bits() == truth.heightmap.data()[i].to_bits()
            {
                recovered += 1;
            }
        }
    }
    let frac = recovered as f64 / visible as f64;
    ensure!(frac >= 0.99, "recovered {:.4}% of {visible}", 100.0 * frac);
    Ok(format!("recovered {:.3}% of {visible} visible pixels", 100.0 * frac))
}

fn single_roof(r: &mut ChaCha8Rng, roof: RoofType) -> SceneSpec {
    let width = r.random_range(8.0..11.0);
    let length = r.random_range(13.0..17.0);
    let pitch: f64 = r.random_range(15.0..40.0);
    SceneSpec {
        meta: GridMeta::new(0.0, 24.0, 0.25, 96, 96).unwrap(),
        terrain: Terrain::Constant { elevation: 0.0 },
        buildings: vec![BuildingSpec {
            center_x: 12.0 + r.random_range(-0.5..0.5),
            center_y: 12.0 + r.random_range(-0.5..0.5),
            length,
            width,
            orientation_deg: r.random_range(0.0..180.0),
            eave_height: 4.0,
            ridge_height: Some(4.0 + pitch.to_radians().tan() * width / 2.0),
            roof,
        }],
    }
}

struct FaceScore {
    iou: f64,
    pitch: f64,
    azimuth: f64,
}

fn face_scores(pred: &InstanceMap, pred_stats: &[SegmentStats], truth: &SceneTruth) -> Vec<FaceScore> {
    let all = Raster::filled(*truth.segments.meta(), true);
    let labels = truth_stats(truth);
    let m = match_and_iou(pred, &truth.segments, &all).unwrap();
    let by_id = |stats: &[SegmentStats], id: u32| stats.iter().find(|s| s.id == id).cloned();
    m.pairs
        .iter()
        .map(|p| {
            let l = by_id(&labels, p.label_id).unwrap();
            match p.pred_id.and_then(|id| by_id(pred_stats, id)) {
                Some(s) => FaceScore {
                    iou: p.iou,
                    pitch: (s.pitch_deg - l.pitch_deg).abs(),
                    azimuth: match (s.azimuth_deg, l.azimuth_deg) {
                        (Some(a), Some(b)) => azimuth_distance_deg(a, b),
                        (None, None) => 0.0,
                        _ => 180.0,
                    },
                },
                None => FaceScore { iou: 0.0, pitch: 90.0, azimuth: 180.0 },
            }
        })
        .collect()
}

fn segmentation_recovery() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let params = SegmentParams::default();
    let (mut clean_iou, mut clean_pitch, mut clean_az) = (1.0f64, 0.0f64, 0.0f64);
    let (mut noisy_iou, mut noisy_pitch) = (1.0f64, 0.0f64);
    for k in 0..20 {
        let roof = if k % 2 == 0 { RoofType::Gable } else { RoofType::Hip };
        let truth = render_scene(&single_roof(&mut r, roof)).unwrap();
        let s = segment_roofs_detailed(&truth.dsm, &truth.buildings, &params).unwrap();
        for t in &s.traces {
            for stage in &t.stages {
                ensure!(stage.windows(2).all(|w| w[1] <= w[0]), "scene {k}: energy rose {stage:?}");
            }
        }
        for f in face_scores(&s.segments, &s.stats, &truth) {
            clean_iou = clean_iou.min(f.iou);
            clean_pitch = clean_pitch.max(f.pitch);
            clean_az = clean_az.max(f.azimuth);
        }
        let dsm = perturb(&truth, 0.05, 500 + k).unwrap();
        let s = segment_roofs_detailed(&dsm, &truth.buildings, &params).unwrap();
        for t in &s.traces {
            for stage in &t.stages {
                ensure!(stage.windows(2).all(|w| w[1] <= w[0]), "noisy scene {k}: energy rose {stage:?}");
            }
        }
        for f in face_scores(&s.segments, &s.stats, &truth) {
            noisy_iou = noisy_iou.min(f.iou);
            noisy_pitch = noisy_pitch.max(f.pitch);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "clean: min IoU {clean_iou:.3}, max pitch err {clean_pitch:.2}°, max azimuth err {clean_az:.2}°; \
         noisy: min IoU {noisy_iou:.3}, max pitch err {noisy_pitch:.2}°; {secs:.1}s"
    );
    ensure!(clean_iou >= 0.90 && clean_pitch <= 1.0 && clean_az <= 2.0, "{detail}");
    ensure!(noisy_iou >= 0.80 && noisy_pitch <= 3.0, "{detail}");
    ensure!(secs < 120.0, "{detail}");
    Ok(detail)
}

fn max_flow_correctness() -> Outcome {
    let mut r = rng(5);
    for g in 0..100 {
        let n = r.random_range(2..=12);
        let mut cap = vec![vec![0i64; n]; n];
        let mut graph = FlowGraph::new(n);
        for _ in 0..r.random_range(0..=n * n) {
            let (a, b) = (r.random_range(0..n), r.random_range(0..n));
            if a == b {
                continue;
            }
            let c = r.random_range(0..=20);
            cap[a][b] += c;
            graph.add_edge(a, b, c);
        }
        let (s, t) = (0, n - 1);
        let cut_of = |side: &dyn Fn(usize) -> bool| -> i64 {
            let mut v = 0;
            for a in 0..n {
                for b in 0..n {
                    if side(a) && !side(b) {
                        v += cap[a][b];
                    }
                }
            }
            v
        };
        let mut best = i64::MAX;
        for bits in 0u32..(1 << n) {
            if bits & 1 == 0 || bits & (1 << t) != 0 {
                continue;
            }
            best = best.min(cut_of(&|v| bits & (1 << v) != 0));
        }
        let (value, side) = min_cut(graph, s, t);
        ensure!(value == best, "graph {g}: flow {value} vs enumeration {best}");
        ensure!(side[s] && !side[t], "graph {g}: terminals on the wrong side");
        ensure!(cut_of(&|v| side[v]) == best, "graph {g}: returned partition is not a minimum cut");
    }
    Ok("100 graphs match exhaustive enumeration".into())
}

fn flux_analytics() -> Outcome {
    let mut r = rng(6);
    let flat = Raster::filled(GridMeta::with_size(9, 9, 0.25).unwrap(), 2.0);
    let normals = surface_normals(&flat).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let w = r.random_range(0.1..500.0);
        let dni = r.random_range(100.0..1500.0);
        let suns = [SunSample { elevation_deg: 90.0, azimuth_deg: r.random_range(0.0..360.0), weight_hours: w }];
        let model = IrradianceModel { direct_normal_irradiance: dni, diffuse_fraction: 0.0 };
        let f = annual_flux(&flat, &normals, &suns, &model).unwrap();
        worst = worst.max((f.data()[40] - dni * w / 1000.0).abs());
    }
    ensure!(worst <= 1e-9, "zenith flux deviation {worst:e}");

    let wall =
        Raster::from_fn(
            GridMeta::with_size(80, 40, 0.25).unwrap(),
            |_, c| {
                if (40..42).contains(&c) {
                    10.0
                } else {
                    0.0
                }
            },
        );
    let sun = |el, az| SunSample { elevation_deg: el, azimuth_deg: az, weight_hours: 1.0 };
    ensure!(is_shaded(&wall, 20, 20, &sun(45.0, 90.0)), "45° sun behind the wall is not shaded");
    ensure!(!is_shaded(&wall, 20, 20, &sun(70.0, 90.0)), "70° sun over the wall is shaded");
    for s in sun_positions(35.0, 24).unwrap() {
        ensure!(!is_shaded(&flat, 4, 4, &s), "flat raster shaded");
    }

    let mut worst_rel = 0.0f64;
    for lat in [0.0, 30.0, 50.0] {
        let total: f64 = sun_positions(lat, 24).unwrap().iter().map(|s| s.weight_hours).sum();
        let mut minutes = 0usize;
        for n in 1..=365 {
            let decl = declination_deg(n as f64);
            for m in 0..1440 {
                let t = (m as f64 + 0.5) / 60.0;
                if sun_position(lat, decl, 15.0 * (t - 12.0)).0 > 0.0 {
                    minutes += 1;
                }
            }
        }
        let daylight = minutes as f64 / 60.0;
        worst_rel = worst_rel.max((total - daylight).abs() / daylight);
    }
    ensure!(worst_rel < 0.02, "daylight hours off by {:.2}%", 100.0 * worst_rel);

    let suns = sun_positions(35.0, 12).unwrap();
    let model = IrradianceModel::default();
    for p in 0..10 {
        let dsm = random_heights(&mut r, 40, 40);
        let normals = surface_normals(&dsm).unwrap();
        let mut lowered = dsm.clone();
        for _ in 0..r.random_range(1..60) {
            let i = r.random_range(0..lowered.data().len());
            lowered.data_mut()[i] -= r.random_range(0.0..6.0);
        }
        let a = annual_flux(&dsm, &normals, &suns, &model).unwrap();
        let b = annual_flux(&lowered, &normals, &suns, &model).unwrap();
        for i in 0..dsm.data().len() {
            if lowered.data()[i] == dsm.data()[i] {
                ensure!(b.data()[i] >= a.data()[i], "pair {p}: flux dropped at {i}");
            }
        }
    }
    Ok(format!("zenith deviation {worst:e}, daylight within {:.2}%", 100.0 * worst_rel))
}

fn stitching() -> Outcome {
    let mut r = rng(7);
    let base = Raster::from_fn(GridMeta::with_size(150, 110, 0.25).unwrap(), |_, _| r.random_range(-50.0..50.0));
    let single = TilePlacement { tile: base.clone(), row_offset: 0, col_offset: 0, margin: 8 };
    ensure!(stitch(&[single], base.meta()).unwrap() == base, "single tile not bit-exact");

    let wins = split_tiles(base.meta(), 64, 16).unwrap();
    let tiles = split_raster(&base, &wins, 8).unwrap();
    ensure!(stitch(&tiles, base.meta()).unwrap().data() == base.data(), "identical floats not bit-exact");
    let labels = base.map(|v| (v.abs() as u32) % 5);
    let ltiles = split_raster(&labels, &wins, 8).unwrap();
    ensure!(stitch_labels(&ltiles, labels.meta()).unwrap().data() == labels.data(), "identical labels not bit-exact");
    let rgb: ColorRaster = base.map(|v| [(v + 50.0) as u8, 7, (100.0 - v) as u8]);
    let ctiles = split_raster(&rgb, &wins, 8).unwrap();
    ensure!(stitch(&ctiles, rgb.meta()).unwrap().data() == rgb.data(), "identical colors not bit-exact");

    let mut worst = 0.0f64;
    for m in [1usize, 3, 8] {
        let (tw, overlap) = (20, 2 * m);
        let mosaic = GridMeta::with_size(2 * tw - overlap, 6, 1.0).unwrap();
        let tmeta = GridMeta::with_size(tw, 6, 1.0).unwrap();
        let pair = [
            TilePlacement { tile: Raster::filled(tmeta, 0.0), row_offset: 0, col_offset: 0, margin: m },
            TilePlacement { tile: Raster::filled(tmeta, 10.0), row_offset: 0, col_offset: tw - overlap, margin: m },
        ];
        let out = stitch(&pair, &mosaic).unwrap();
        let left = tw - overlap + m - 1;
        for row in 0..6 {
            worst = worst.max((0.5 * (out.at(row, left) + out.at(row, left + 1)) - 5.0).abs());
        }
    }
    ensure!(worst <= 1e-9, "midline deviation {worst:e}");

    let noisy: Vec<TilePlacement<f64>> = tiles
        .iter()
        .map(|t| TilePlacement {
            tile: Raster::from_fn(*t.tile.meta(), |row, col| t.tile.at(row, col) + r.random_range(-1.0..1.0)),
            ..*t
        })
        .collect();
    let noisy_labels: Vec<TilePlacement<u32>> = ltiles
        .iter()
        .map(|t| TilePlacement { tile: Raster::from_fn(*t.tile.meta(), |_, _| r.random_range(0..4)), ..*t })
        .collect();
    let want = stitch(&noisy, base.meta()).unwrap();
    let want_labels = stitch_labels(&noisy_labels, base.meta()).unwrap();
    for _ in 0..10 {
        let mut order: Vec<usize> = (0..noisy.len()).collect();
        order.shuffle(&mut r);
        let perm: Vec<_> = order.iter().map(|&i| noisy[i].clone()).collect();
        let got = stitch(&perm, base.meta()).unwrap();
        ensure!(
            got.data().iter().zip(want.data()).all(|(a, b)| a.to_bits() == b.to_bits()),
            "permuted float stitch differs"
        );
        let perm: Vec<_> = order.iter().map(|&i| noisy_labels[i].clone()).collect();
        ensure!(stitch_labels(&perm, base.meta()).unwrap() == want_labels, "permuted label stitch differs");
    }
    Ok(format!("{} tiles, midline deviation {worst:e}", tiles.len()))
}

fn metrics_identities() -> Outcome {
    let meta = GridMeta::with_size(2, 1, 1.0).unwrap();
    let label = Raster::from_vec(meta, vec![1.0, 5.0]).unwrap();
    let all = Raster::filled(meta, true);
    ensure!(masked_mae(&label, &label, &all, Region::All).unwrap() == 0.0, "mae(x, x) != 0");
    let plus = label.map(|v| v + 1.0);
    ensure!(masked_mae(&plus, &label, &all, Region::All).unwrap() == 1.0, "mae(x + 1, x) != 1");
    let pred = Raster::from_vec(meta, vec![2.0, 8.0]).unwrap();
    let mask = Raster::from_vec(meta, vec![false, true]).unwrap();
    ensure!(masked_mae(&pred, &label, &mask, Region::All).unwrap() == 3.0, "masked 2-pixel MAE != 3");

    let stat = |id, area, pitch, az| SegmentStats {
        id,
        building_id: 1,
        pixel_count: 0,
        area_m2: area,
        pitch_deg: pitch,
        azimuth_deg: az,
        mean_normal: [0.0, 0.0, 1.0],
    };
    let smeta = GridMeta::with_size(6, 1, 1.0).unwrap();
    let seg = |ids: Vec<u32>| InstanceMap::new(InstanceKind::RoofSegments, Raster::from_vec(smeta, ids).unwrap());
    let sall = Raster::filled(smeta, true);
    let two = seg(vec![1, 1, 1, 2, 2, 2]);
    let matching = match_and_iou(&two, &two, &sall).unwrap();
    let same = [stat(1, 10.0, 20.0, Some(90.0)), stat(2, 30.0, 40.0, Some(270.0))];
    let e = segment_angle_errors(&same, &same, &matching).unwrap();
    ensure!(e.pitch_error_deg == 0.0 && e.azimuth_error_deg == Some(0.0), "identical stats give {e:?}");
    ensure!(azimuth_distance_deg(350.0, 10.0) == 20.0, "wraparound distance");
    let shifted = [stat(1, 10.0, 22.0, Some(90.0)), stat(2, 30.0, 46.0, Some(270.0))];
    let e = segment_angle_errors(&shifted, &same, &matching).unwrap();
    ensure!((e.pitch_error_deg - 5.0).abs() < 1e-12, "weighted pitch error {}", e.pitch_error_deg);

    let l = seg(vec![1, 1, 1, 1, 0, 0]);
    ensure!(match_and_iou(&l, &l, &sall).unwrap().iou == 1.0, "IoU(x, x) != 1");
    ensure!(match_and_iou(&seg(vec![0; 6]), &l, &sall).unwrap().iou == 0.0, "IoU(empty, x) != 0");
    let hand = match_and_iou(&seg(vec![0, 0, 5, 5, 5, 5]), &l, &sall).unwrap().iou;
    ensure!((hand - 2.0 / 6.0).abs() <= 1e-12, "hand IoU {hand}");

    let energy: BTreeMap<u32, f64> = [(1, 100.0), (2, 200.0)].into();
    ensure!(mape(&energy, &energy).unwrap().mape == 0.0, "MAPE(x, x) != 0");
    let scaled: BTreeMap<u32, f64> = energy.iter().map(|(&k, &v)| (k, 1.1 * v)).collect();
    let m = mape(&scaled, &energy).unwrap().mape;
    ensure!((m - 0.10).abs() <= 1e-12, "scale MAPE {m}");
    let other: BTreeMap<u32, f64> = [(1, 90.0), (2, 260.0)].into();
    let m = mape(&other, &energy).unwrap().mape;
    ensure!((m - 0.20).abs() <= 1e-12, "hand MAPE {m}");

    let bmeta = GridMeta::with_size(1000, 1, 1.0).unwrap();
    let building = InstanceMap::new(InstanceKind::Buildings, Raster::filled(bmeta, 1));
    let covered = |k: usize| {
        InstanceMap::new(
            InstanceKind::RoofSegments,
            Raster::from_vec(bmeta, (0..1000).map(|i| u32::from(i < k)).collect()).unwrap(),
        )
    };
    let at_half = coverage_mask(&building, &covered(500), 0.5).unwrap();
    ensure!(at_half.data().iter().all(|&v| v), "coverage 0.5 excluded");
    let below = coverage_mask(&building, &covered(499), 0.5).unwrap();
    ensure!(below.data().iter().all(|&v| !v), "coverage 0.499 included");
    let a = InstanceMap::new(InstanceKind::Buildings, Raster::from_vec(meta, vec![1, 0]).unwrap());
    let b = InstanceMap::new(InstanceKind::Buildings, Raster::from_vec(meta, vec![0, 0]).unwrap());
    ensure!(temporal_mismatch_mask(&a, &b).unwrap().data() == [false, true], "mismatch mask wrong");
    Ok("all identities exact".into())
}

fn run_in(s: &common::Scenario, dir: &Path, workers: usize) -> Result<(PipelineConfig, f64), String> {
    let mut cfg = s.config.clone();
    cfg.output_dir = dir.to_path_buf();
    let t = Instant::now();
    run_pipeline_with_workers(&cfg, workers).map_err(|e| e.to_string())?;
    Ok((cfg, t.elapsed().as_secs_f64()))
}

fn quality(out: &Path) -> Result<(f64, f64), String> {
    let report: MetricsReport = read_json(out.join("run.report.json")).map_err(|e| e.to_string())?;
    Ok((report.building_mae_m.ok_or("no building MAE")?, report.segment_iou_fraction.ok_or("no segment IoU")?))
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let s = common::scenario(dir.path(), 256, 11, 60.0, 135.0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_in(&s, &a, 1)?;
    run_in(&s, &b, 1)?;
    let (mae, iou) = quality(&a)?;
    ensure!(mae < 0.1 && iou >= 0.85, "building MAE {mae:.4} m, IoU {iou:.3}");
    let pred = load_prefix(&b.join("run")).map_err(|e| e.to_string())?;
    let label = load_prefix(&a.join("run")).map_err(|e| e.to_string())?;
    let self_report = evaluate(&pred, &label, &[]).map_err(|e| e.to_string())?;
    let self_mape = self_report.mape_at_5kw_fraction.ok_or("no MAPE@5kW")?;
    ensure!(self_mape == 0.0, "pipeline-vs-itself MAPE@5kW {self_mape}");

    let big_dir = tempfile::tempdir().unwrap();
    let big = common::scenario(big_dir.path(), 1024, 12, 60.0, 135.0);
    let (_, secs) = run_in(&big, &big_dir.path().join("out"), rayon::current_num_threads())?;
    let (big_mae, big_iou) = quality(&big_dir.path().join("out"))?;
    let detail = format!(
        "256²: building MAE {mae:.4} m, IoU {iou:.3}, self MAPE@5kW {self_mape}; \
         1024²: {secs:.1}s, MAE {big_mae:.4} m, IoU {big_iou:.3}"
    );
    ensure!(secs < 60.0 && big_mae < 0.1 && big_iou >= 0.85, "{detail}");
    Ok(detail)
}

fn raster_outputs(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "asc" || e == "png"))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let s = common::scenario(dir.path(), 256, 11, 60.0, 135.0);
    let (one, eight) = (dir.path().join("w1"), dir.path().join("w8"));
    run_in(&s, &one, 1)?;
    run_in(&s, &eight, 8)?;
    let files = raster_outputs(&one);
    ensure!(!files.is_empty(), "no raster outputs");
    let manifest = |d: &Path| -> serde_json::Value { read_json(d.join("manifest.json")).unwrap() };
    let names = |m: &serde_json::Value| -> Vec<String> {
        m["stages"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|s| s["outputs"].as_array().unwrap().iter())
            .filter_map(|p| Path::new(p.as_str().unwrap()).file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    };
    ensure!(names(&manifest(&one)) == names(&manifest(&eight)), "manifests list different outputs");
    for f in &files {
        let other = eight.join(f.file_name().unwrap());
        let (x, y) = (std::fs::read(f).unwrap(), std::fs::read(&other).map_err(|e| e.to_string())?);
        ensure!(x == y, "{} differs between 1 and 8 workers", f.display());
    }
    Ok(format!("{} raster outputs bit-identical for 1 and 8 workers", files.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("reprojection exactness", reprojection_exactness),
        ("occlusion oracle", occlusion_oracle),
        ("round trip", round_trip),
        ("segmentation recovery", segmentation_recovery),
        ("max-flow correctness", max_flow_correctness),
        ("flux analytics", flux_analytics),
        ("stitching", stitching),
        ("metrics identities", metrics_identities),
        ("end-to-end self-consistency", end_to_end),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
