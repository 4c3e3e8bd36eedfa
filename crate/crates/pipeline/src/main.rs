use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use satsolar_core::io::{
    false_color, read_color, read_height, read_json, read_labels, read_mask, write_color, write_gray, write_height,
    write_json, write_labels, write_mask,
};
use satsolar_core::masking::{coverage_mask, temporal_mismatch_mask};
use satsolar_core::panels::{building_energy, place_panels, render_overlay, PanelSpec};
use satsolar_core::raster::{InstanceKind, InstanceMap, MaskRaster};
use satsolar_core::reproject::{reproject, reproject_values_with_sides, Direction, ViewGeometry, DEFAULT_SIDE_STEP_M};
use satsolar_core::resample::{compose_dsm, resample_bilinear};
use satsolar_core::segment::{building_normals, segment_normals, segment_roofs_detailed, SegmentParams, SegmentStats};
use satsolar_core::solar::{annual_flux_within, sun_positions, IrradianceModel};
use satsolar_core::stitch::{stitch, stitch_labels, StitchManifest, TilePlacement};
use satsolar_core::synth::{render_scene, SceneSpec};
use satsolar_core::terrain::{hillshade, surface_normals};
use satsolar_pipeline::paths::{self, with_suffix};
use satsolar_pipeline::scene::write_truth;
use satsolar_pipeline::{evaluate, load_prefix, run_pipeline, validate_config, EnergyFile, WORKERS_ENV};

/// Rooftop solar assessment from satellite-derived surface models.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 stage failure.
#[derive(Parser)]
#[command(name = "satsolar", version)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene spec to truth rasters and stats.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Move a raster between the nadir and off-nadir frames.
    Reproject(ReprojectArgs),
    /// Resample a terrain model onto a height map grid and add them.
    ComposeDsm {
        #[arg(long)]
        heightmap: PathBuf,
        #[arg(long)]
        terrain: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Graph-cut roof segmentation within each building.
    Segment {
        #[arg(long)]
        dsm: PathBuf,
        #[arg(long)]
        buildings: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
        #[arg(long, default_value_t = 15.0)]
        lambda: f64,
        #[arg(long, default_value_t = 2.0)]
        min_area: f64,
    },
    /// Evaluation masks.
    #[command(subcommand)]
    Mask(MaskCommand),
    /// Annual solar flux per pixel.
    Flux(FluxArgs),
    /// Panel layouts and building energy.
    Panels(PanelArgs),
    /// Mosaic overlapping tiles listed in a manifest.
    Stitch {
        #[arg(long)]
        tiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare prediction files against labels.
    Evaluate {
        #[arg(long)]
        pred_prefix: PathBuf,
        #[arg(long)]
        label_prefix: PathBuf,
        #[arg(long, num_args = 0..)]
        masks: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grayscale hillshade of a height raster.
    Hillshade {
        #[arg(long)]
        dsm: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 45.0)]
        elevation: f64,
        #[arg(long, default_value_t = 315.0)]
        azimuth: f64,
    },
    /// Run every stage from a config file.
    ///
    /// Config keys and defaults: rgb, heightmap | dsm, dtm (optional), buildings,
    /// view {elevation_deg 90, azimuth_deg 0}, latitude_deg, resolution 0.25,
    /// tile_size 1024, tile_overlap 128, segmentation {lambda 15, data_cap_deg 60,
    /// min_area_m2 2, passes 2, refit_rounds 1}, infill {tolerance 0.5,
    /// max_iterations 500, blur_radius 2}, samples_per_day 24, irradiance
    /// {direct_normal_irradiance 1000, diffuse_fraction 0}, panel {length_m 1.65,
    /// width_m 0.99, rated_power_w 400, efficiency 0.2, performance_ratio 0.85},
    /// energy_cap_w 5000, label_prefix (optional), output_dir.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a config file and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    ToNadir,
    ToOffnadir,
}

#[derive(Args)]
struct ReprojectArgs {
    #[arg(long)]
    elevation: f64,
    #[arg(long)]
    azimuth: f64,
    #[arg(long, value_enum)]
    direction: DirectionArg,
    /// Heights above ground in the source frame.
    #[arg(long)]
    heights: PathBuf,
    /// Raster to move: `.asc` or `.png`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_prefix: PathBuf,
    /// Fill building walls when rendering off-nadir.
    #[arg(long)]
    sides: bool,
    /// Rung spacing for building walls.
    #[arg(long, default_value_t = DEFAULT_SIDE_STEP_M)]
    side_step: f64,
}

#[derive(Subcommand)]
enum MaskCommand {
    /// Pixels where two building maps agree on occupancy.
    Mismatch {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Buildings whose segment coverage reaches the threshold.
    Coverage {
        #[arg(long)]
        buildings: PathBuf,
        #[arg(long)]
        segments: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FluxArgs {
    #[arg(long)]
    dsm: PathBuf,
    #[arg(long)]
    lat: f64,
    #[arg(long, default_value_t = 1000.0)]
    dni: f64,
    #[arg(long, default_value_t = 0.0)]
    diffuse: f64,
    #[arg(long, default_value_t = 24)]
    samples_per_day: usize,
    /// Use per-segment normals; restricts output to segment pixels unless
    /// `--buildings` is also given.
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Restrict output to building pixels.
    #[arg(long)]
    buildings: Option<PathBuf>,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct PanelArgs {
    #[arg(long)]
    segments: PathBuf,
    #[arg(long)]
    stats: PathBuf,
    #[arg(long)]
    flux: PathBuf,
    #[arg(long)]
    out_prefix: PathBuf,
    /// Image to draw the layouts on.
    #[arg(long)]
    rgb: Option<PathBuf>,
    #[arg(long, default_value_t = 5000.0)]
    cap_w: f64,
    /// JSON panel spec overriding the defaults.
    #[arg(long)]
    panel: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Stage(String),
}

type Outcome = Result<(), Failure>;

fn input<T>(r: satsolar_core::Result<T>, what: &Path) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(format!("{}: {e}", what.display())))
}

fn stage<T>(r: satsolar_core::Result<T>, name: &str) -> Result<T, Failure> {
    r.map_err(|e| Failure::Stage(format!("{name}: {e}")))
}

fn instances(path: &Path, kind: InstanceKind) -> Result<InstanceMap, Failure> {
    Ok(InstanceMap::new(kind, input(read_labels(path), path)?))
}

fn cmd_reproject(a: &ReprojectArgs) -> Outcome {
    let view = ViewGeometry::new(a.elevation, a.azimuth).map_err(|e| Failure::Usage(e.to_string()))?;
    if a.sides && matches!(a.direction, DirectionArg::ToNadir) {
        return Err(Failure::Usage("--sides only applies to --direction to-offnadir".into()));
    }
    let heights = input(read_height(&a.heights), &a.heights)?;
    let direction = match a.direction {
        DirectionArg::ToNadir => Direction::ToNadir,
        DirectionArg::ToOffnadir => Direction::ToOffnadir,
    };
    let is_png = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let (occlusion, provenance) = if is_png {
        let img = input(read_color(&a.input), &a.input)?;
        let r = stage(
            if a.sides {
                reproject_values_with_sides(&img, &heights, &view, a.side_step)
            } else {
                reproject(&img, &heights, &view, direction)
            },
            "reproject",
        )?;
        stage(write_color(with_suffix(&a.out_prefix, ".out.png"), &r.values), "write")?;
        (r.occlusion.clone(), r.provenance_raster())
    } else {
        let vals = input(read_height(&a.input), &a.input)?;
        let r = stage(
            if a.sides {
                reproject_values_with_sides(&vals, &heights, &view, a.side_step)
            } else {
                reproject(&vals, &heights, &view, direction)
            },
            "reproject",
        )?;
        stage(write_height(with_suffix(&a.out_prefix, ".out.asc"), &r.values), "write")?;
        (r.occlusion.clone(), r.provenance_raster())
    };
    stage(write_mask(with_suffix(&a.out_prefix, ".occlusion.asc"), &occlusion), "write")?;
    stage(write_labels(with_suffix(&a.out_prefix, ".provenance.asc"), &provenance), "write")
}

fn cmd_flux(a: &FluxArgs) -> Outcome {
    let dsm = input(read_height(&a.dsm), &a.dsm)?;
    let model = IrradianceModel { direct_normal_irradiance: a.dni, diffuse_fraction: a.diffuse };
    model.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let suns = sun_positions(a.lat, a.samples_per_day).map_err(|e| Failure::Usage(e.to_string()))?;
    let segments = a.segments.as_deref().map(|p| instances(p, InstanceKind::RoofSegments)).transpose()?;
    let buildings = a.buildings.as_deref().map(|p| instances(p, InstanceKind::Buildings)).transpose()?;
    let normals = match (&segments, &buildings) {
        (Some(s), _) => stage(segment_normals(&dsm, s), "normals")?,
        (None, Some(b)) => stage(building_normals(&dsm, b), "normals")?,
        (None, None) => stage(surface_normals(&dsm), "normals")?,
    };
    let region = buildings.as_ref().or(segments.as_ref()).map(InstanceMap::occupancy);
    let flux = stage(annual_flux_within(&dsm, &normals, &suns, &model, region.as_ref().map(MaskRaster::data)), "flux")?;
    stage(write_height(with_suffix(&a.out_prefix, ".flux.asc"), &flux), "write")?;
    stage(write_color(with_suffix(&a.out_prefix, ".flux.png"), &false_color(&flux)), "write")
}

fn cmd_panels(a: &PanelArgs) -> Outcome {
    let seg = instances(&a.segments, InstanceKind::RoofSegments)?;
    let stats: Vec<SegmentStats> = input(read_json(&a.stats), &a.stats)?;
    let flux = input(read_height(&a.flux), &a.flux)?;
    let spec: PanelSpec = match &a.panel {
        Some(p) => input(read_json(p), p)?,
        None => PanelSpec::default(),
    };
    let placed = stage(place_panels(&seg, &stats, &flux, &spec), "panels")?;
    stage(write_json(with_suffix(&a.out_prefix, ".panels.json"), &placed), "write")?;
    let energy = EnergyFile {
        cap_w: a.cap_w,
        uncapped_kwh: building_energy(&placed, None, spec.rated_power_w),
        capped_kwh: building_energy(&placed, Some(a.cap_w), spec.rated_power_w),
    };
    stage(write_json(with_suffix(&a.out_prefix, paths::ENERGY), &energy), "write")?;
    if let Some(rgb) = &a.rgb {
        let img = input(read_color(rgb), rgb)?;
        stage(write_color(with_suffix(&a.out_prefix, ".panels.png"), &render_overlay(&img, &placed)), "write")?;
    }
    Ok(())
}

fn cmd_stitch(manifest_path: &Path, out: &Path) -> Outcome {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", manifest_path.display())))?;
    let m = input(StitchManifest::from_json(&text), manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &str| base.join(p);
    if m.labels {
        let mut tiles = Vec::with_capacity(m.tiles.len());
        for t in &m.tiles {
            let path = resolve(&t.path);
            tiles.push(TilePlacement {
                tile: input(read_labels(&path), &path)?,
                row_offset: t.row_offset,
                col_offset: t.col_offset,
                margin: m.margin,
            });
        }
        let mosaic = stage(stitch_labels(&tiles, &m.mosaic), "stitch")?;
        stage(write_labels(out, &mosaic), "write")
    } else {
        let mut tiles = Vec::with_capacity(m.tiles.len());
        for t in &m.tiles {
            let path = resolve(&t.path);
            tiles.push(TilePlacement {
                tile: input(read_height(&path), &path)?,
                row_offset: t.row_offset,
                col_offset: t.col_offset,
                margin: m.margin,
            });
        }
        let mosaic = stage(stitch(&tiles, &m.mosaic), "stitch")?;
        stage(write_height(out, &mosaic), "write")
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Synth { spec, out_prefix } => {
            let text =
                std::fs::read_to_string(&spec).map_err(|e| Failure::Usage(format!("{}: {e}", spec.display())))?;
            let scene = input(SceneSpec::from_json(&text), &spec)?;
            let truth = stage(render_scene(&scene), "synth")?;
            stage(write_truth(&truth, &out_prefix), "write").map(|_| ())
        }
        Command::Reproject(a) => cmd_reproject(&a),
        Command::ComposeDsm { heightmap, terrain, out } => {
            let h = input(read_height(&heightmap), &heightmap)?;
            let t = input(read_height(&terrain), &terrain)?;
            let t = stage(resample_bilinear(&t, h.meta()), "resample")?;
            let dsm = stage(compose_dsm(&h, &t), "compose-dsm")?;
            stage(write_height(&out, &dsm), "write")
        }
        Command::Segment { dsm, buildings, out_prefix, lambda, min_area } => {
            let d = input(read_height(&dsm), &dsm)?;
            let b = instances(&buildings, InstanceKind::Buildings)?;
            let params = SegmentParams { lambda, min_area_m2: min_area, ..SegmentParams::default() };
            let seg = stage(segment_roofs_detailed(&d, &b, &params), "segment")?;
            stage(write_labels(with_suffix(&out_prefix, paths::SEGMENTS), &seg.segments.ids), "write")?;
            stage(write_json(with_suffix(&out_prefix, paths::STATS), &seg.stats), "write")?;
            stage(write_json(with_suffix(&out_prefix, ".energy_trace.json"), &seg.traces), "write")
        }
        Command::Mask(MaskCommand::Mismatch { a, b, out }) => {
            let (ma, mb) = (instances(&a, InstanceKind::Buildings)?, instances(&b, InstanceKind::Buildings)?);
            let m = stage(temporal_mismatch_mask(&ma, &mb), "mask")?;
            stage(write_mask(&out, &m), "write")
        }
        Command::Mask(MaskCommand::Coverage { buildings, segments, threshold, out }) => {
            let b = instances(&buildings, InstanceKind::Buildings)?;
            let s = instances(&segments, InstanceKind::RoofSegments)?;
            let m = stage(coverage_mask(&b, &s, threshold), "mask")?;
            stage(write_mask(&out, &m), "write")
        }
        Command::Flux(a) => cmd_flux(&a),
        Command::Panels(a) => cmd_panels(&a),
        Command::Stitch { tiles, out } => cmd_stitch(&tiles, &out),
        Command::Evaluate { pred_prefix, label_prefix, masks, out } => {
            let pred = input(load_prefix(&pred_prefix), &pred_prefix)?;
            let label = input(load_prefix(&label_prefix), &label_prefix)?;
            let masks = masks.iter().map(|m| input(read_mask(m), m)).collect::<Result<Vec<_>, _>>()?;
            let report = stage(evaluate(&pred, &label, &masks), "evaluate")?;
            stage(write_json(&out, &report), "write")
        }
        Command::Hillshade { dsm, out, elevation, azimuth } => {
            let d = input(read_height(&dsm), &dsm)?;
            let g = stage(hillshade(&d, elevation, azimuth), "hillshade")?;
            stage(write_gray(&out, &g), "write")
        }
        Command::Run { config } => {
            let cfg = validate_config(&config).map_err(|e| Failure::Usage(e.to_string()))?;
            let manifest = run_pipeline(&cfg).map_err(|e| Failure::Stage(e.to_string()))?;
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", cfg.output_dir.join("manifest.json").display());
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = validate_config(&config).map_err(|e| Failure::Usage(e.to_string()))?;
            let text = serde_json::to_string_pretty(&cfg).map_err(|e| Failure::Stage(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
