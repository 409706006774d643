//! Command-line surface for the reduced-reference quality measure: feature
//! extraction, single-pair scoring, batch evaluation against subjective
//! scores, and small utilities for inspecting tilings, decompositions, and
//! synthetic test imagery.
//!
//! Exit codes: 0 success, 1 the computation was degenerate (constant scores,
//! unfittable models), 2 usage or I/O errors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use tetriqa::dataset_io::{
    crop_to_transform_size, load_grayscale, parse_manifest, read_rr, write_pgm, write_rr,
    ManifestEntry,
};
use tetriqa::divergence::SubbandDistance;
use tetriqa::eval::{
    evaluate, psnr, render_tables, report_to_csv, scatter_to_csv, EvaluationRecord,
    EvaluationReport, FitMode,
};
use tetriqa::gsm::RrFeatureSet;
use tetriqa::plane::ImagePlane;
use tetriqa::synth::{add_awgn, gaussian_blur, oriented_texture};
use tetriqa::tiling::{fundamental_forms, CoveringDictionary};
use tetriqa::{extract_features_from_plane, quality_score, tetrolet};

#[derive(Parser)]
#[command(
    name = "tetriqa",
    version,
    about = "Reduced-reference image quality assessment in the tetrolet domain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Knobs shared by the pipeline commands; the defaults are the method's
/// published operating point.
#[derive(Args, Debug, Clone, Copy)]
struct PipelineOpts {
    /// Decomposition depth in levels
    #[arg(long, default_value_t = 2)]
    levels: usize,
    /// Pooling constant in the quality formula
    #[arg(long, default_value_t = 0.1)]
    d0: f64,
    /// Relative ridge added to covariance diagonals
    #[arg(long, default_value_t = 1e-6)]
    eps_reg: f64,
    /// Seed for synthesized content; the analysis itself is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitModeArg {
    /// Refit the logistic inside every distortion group
    PerGroup,
    /// Fit once on the pooled data and reuse per group
    Global,
}

impl From<FitModeArg> for FitMode {
    fn from(arg: FitModeArg) -> FitMode {
        match arg {
            FitModeArg::PerGroup => FitMode::PerGroup,
            FitModeArg::Global => FitMode::Global,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract reduced-reference features from a reference image
    Extract {
        /// Reference image (PNG, PGM, BMP, JPEG, or TIFF)
        reference: PathBuf,
        /// Output feature file (JSON)
        out: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Score a distorted image against a saved feature file
    Measure {
        /// Distorted image
        distorted: PathBuf,
        /// Feature file written by `extract`
        features: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Score a distorted image directly against a reference image
    Compare {
        /// Reference image
        reference: PathBuf,
        /// Distorted image
        distorted: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Score every manifest row and correlate with subjective scores
    Evaluate {
        /// CSV manifest with columns ref_path, dist_path, mos, distortion_label
        manifest: PathBuf,
        /// How the logistic mapping is fitted for per-group rows
        #[arg(long, value_enum, default_value_t = FitModeArg::PerGroup)]
        fit_mode: FitModeArg,
        /// Also evaluate a PSNR comparator over the same rows
        #[arg(long)]
        psnr: bool,
        /// Directory for the report and scatter CSV files
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// List the 4x4 tetromino coverings the transform chooses among
    Tilings {
        /// Print one covering as a 4x4 label grid
        #[arg(long)]
        index: Option<u8>,
        /// Group the coverings into equivalence classes under the 8 board symmetries
        #[arg(long)]
        orbits: bool,
    },
    /// Decompose an image and dump the subband planes as text files
    Decompose {
        /// Input image
        image: PathBuf,
        /// Directory for the dumped planes
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Write a seeded synthetic test image, optionally distorted
    Synth {
        /// Output image (PGM)
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        /// Gaussian blur of this standard deviation, applied first
        #[arg(long)]
        blur: Option<f64>,
        /// Additive white Gaussian noise of this standard deviation
        #[arg(long)]
        awgn: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() {
    // Default SIGPIPE disposition: writing into a closed pipe (`tetriqa
    // tilings | head`) terminates the process instead of panicking.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        let degenerate = e
            .chain()
            .filter_map(|c| c.downcast_ref::<tetriqa::Error>())
            .any(tetriqa::Error::is_degenerate);
        std::process::exit(if degenerate { 1 } else { 2 });
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract { reference, out, opts } => cmd_extract(&reference, &out, &opts),
        Command::Measure { distorted, features, opts } => cmd_measure(&distorted, &features, &opts),
        Command::Compare { reference, distorted, opts } => cmd_compare(&reference, &distorted, &opts),
        Command::Evaluate { manifest, fit_mode, psnr, out_dir, opts } => {
            cmd_evaluate(&manifest, fit_mode.into(), psnr, &out_dir, &opts)
        }
        Command::Tilings { index, orbits } => cmd_tilings(index, orbits),
        Command::Decompose { image, out_dir, opts } => cmd_decompose(&image, &out_dir, &opts),
        Command::Synth { out, width, height, blur, awgn, seed } => {
            cmd_synth(&out, width, height, blur, awgn, seed)
        }
    }
}

/// Human-readable identifier for an input file: its stem, or the whole path
/// if there is none.
fn source_id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn print_subband_summary(features: &RrFeatureSet) {
    for f in &features.features {
        println!(
            "scale {} orientation {}: k = {:.6}, lambda = {:.6}, zero-dropped = {:.4}",
            f.scale, f.orientation, f.weibull.shape, f.weibull.scale, f.dropped_zero_fraction
        );
    }
}

fn print_distances(distances: &[SubbandDistance], q: f64) {
    for d in distances {
        println!(
            "scale {} orientation {}: D = {:.6}",
            d.scale, d.orientation, d.value
        );
    }
    println!("Q = {q:.6}");
}

fn cmd_extract(reference: &Path, out: &Path, opts: &PipelineOpts) -> anyhow::Result<()> {
    let plane = load_grayscale(reference)?;
    let features =
        extract_features_from_plane(&plane, &source_id_for(reference), opts.levels, opts.eps_reg)?;
    write_rr(&features, out)?;
    println!(
        "{}: analyzed {}x{} at {} levels, {} subbands",
        features.source_id,
        features.width,
        features.height,
        features.levels,
        features.features.len()
    );
    print_subband_summary(&features);
    println!("wrote {}", out.display());
    Ok(())
}

/// Loads and crops a distorted image, checks it against the dimensions the
/// feature set records, and returns its features plus the cropped plane.
fn distorted_features(
    reference: &RrFeatureSet,
    distorted: &Path,
    opts: &PipelineOpts,
) -> anyhow::Result<(RrFeatureSet, ImagePlane)> {
    let plane = load_grayscale(distorted)?;
    let cropped = crop_to_transform_size(&plane, reference.levels)?;
    if (cropped.plane.width(), cropped.plane.height()) != (reference.width, reference.height) {
        anyhow::bail!(
            "distorted image {} crops to {}x{} but the feature set records {}x{}",
            distorted.display(),
            cropped.plane.width(),
            cropped.plane.height(),
            reference.width,
            reference.height
        );
    }
    let features = extract_features_from_plane(
        &cropped.plane,
        &source_id_for(distorted),
        reference.levels,
        opts.eps_reg,
    )?;
    Ok((features, cropped.plane))
}

fn cmd_measure(distorted: &Path, features_path: &Path, opts: &PipelineOpts) -> anyhow::Result<()> {
    let reference = read_rr(features_path)?;
    let (features, _) = distorted_features(&reference, distorted, opts)?;
    let (q, distances) = quality_score(&reference, &features, opts.d0)?;
    println!(
        "{} vs features of {} ({}x{}, {} levels)",
        features.source_id, reference.source_id, reference.width, reference.height, reference.levels
    );
    print_distances(&distances, q.value);
    Ok(())
}

fn cmd_compare(reference: &Path, distorted: &Path, opts: &PipelineOpts) -> anyhow::Result<()> {
    let ref_plane = load_grayscale(reference)?;
    let ref_features = extract_features_from_plane(
        &ref_plane,
        &source_id_for(reference),
        opts.levels,
        opts.eps_reg,
    )?;
    let (dist_features, _) = distorted_features(&ref_features, distorted, opts)?;
    let (q, distances) = quality_score(&ref_features, &dist_features, opts.d0)?;
    println!(
        "{} vs {} ({}x{}, {} levels)",
        dist_features.source_id,
        ref_features.source_id,
        ref_features.width,
        ref_features.height,
        ref_features.levels
    );
    print_distances(&distances, q.value);
    Ok(())
}

/// Per-reference cache entry: extracted features plus the cropped plane
/// (kept for the PSNR comparator).
struct CachedReference {
    features: RrFeatureSet,
    plane: ImagePlane,
}

fn cached_reference<'a>(
    cache: &'a mut HashMap<[u8; 32], CachedReference>,
    path: &Path,
    opts: &PipelineOpts,
) -> anyhow::Result<&'a CachedReference> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading reference {}", path.display()))?;
    let hash: [u8; 32] = Sha256::digest(&bytes).into();
    if !cache.contains_key(&hash) {
        let plane = load_grayscale(path)?;
        let cropped = crop_to_transform_size(&plane, opts.levels)?;
        let features = extract_features_from_plane(
            &cropped.plane,
            &source_id_for(path),
            opts.levels,
            opts.eps_reg,
        )?;
        cache.insert(
            hash,
            CachedReference {
                features,
                plane: cropped.plane,
            },
        );
    }
    Ok(&cache[&hash])
}

fn evaluate_row(
    entry: &ManifestEntry,
    cache: &mut HashMap<[u8; 32], CachedReference>,
    with_psnr: bool,
    opts: &PipelineOpts,
) -> anyhow::Result<(EvaluationRecord, Option<EvaluationRecord>)> {
    let reference = cached_reference(cache, &entry.ref_path, opts)?;
    let (dist_features, dist_plane) =
        distorted_features(&reference.features, &entry.dist_path, opts)?;
    let (q, _) = quality_score(&reference.features, &dist_features, opts.d0)?;
    let record = EvaluationRecord {
        ref_id: reference.features.source_id.clone(),
        distortion_label: entry.distortion_label.clone(),
        q: q.value,
        mos: entry.mos,
    };
    let psnr_record = if with_psnr {
        let mut p = psnr(&reference.plane, &dist_plane)?;
        if !p.is_finite() {
            // An identical pair has unbounded PSNR; cap it so the logistic
            // fit stays finite.
            p = 100.0;
        }
        Some(EvaluationRecord {
            q: p,
            ..record.clone()
        })
    } else {
        None
    };
    Ok((record, psnr_record))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_evaluate(
    manifest: &Path,
    fit_mode: FitMode,
    with_psnr: bool,
    out_dir: &Path,
    opts: &PipelineOpts,
) -> anyhow::Result<()> {
    let entries = parse_manifest(manifest)?;
    if entries.is_empty() {
        anyhow::bail!("manifest {} lists no rows", manifest.display());
    }
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let mut cache: HashMap<[u8; 32], CachedReference> = HashMap::new();
    let mut records = Vec::new();
    let mut psnr_records = Vec::new();
    let mut skipped = 0usize;
    for entry in &entries {
        match evaluate_row(entry, &mut cache, with_psnr, opts) {
            Ok((record, psnr_record)) => {
                records.push(record);
                psnr_records.extend(psnr_record);
            }
            Err(e) => {
                eprintln!(
                    "skipping {} vs {}: {e:#}",
                    entry.ref_path.display(),
                    entry.dist_path.display()
                );
                skipped += 1;
            }
        }
    }
    println!(
        "scored {} of {} rows ({} skipped)",
        records.len(),
        entries.len(),
        skipped
    );
    if records.is_empty() {
        anyhow::bail!("no manifest row could be scored");
    }

    let report = evaluate(&records, fit_mode)?;
    let psnr_report = if with_psnr {
        Some(evaluate(&psnr_records, fit_mode)?)
    } else {
        None
    };
    let mut tables: Vec<(&str, &EvaluationReport)> = vec![("tetriqa", &report)];
    if let Some(ref pr) = psnr_report {
        tables.push(("psnr", pr));
    }
    print!("{}", render_tables(&tables));

    write_text(&out_dir.join("report.csv"), &report_to_csv(&report))?;
    write_text(
        &out_dir.join("scatter.csv"),
        &scatter_to_csv(&records, &report),
    )?;
    if let Some(ref pr) = psnr_report {
        write_text(&out_dir.join("psnr_report.csv"), &report_to_csv(pr))?;
    }
    Ok(())
}

fn cmd_tilings(index: Option<u8>, orbits: bool) -> anyhow::Result<()> {
    let dict = CoveringDictionary::standard();
    if let Some(i) = index {
        let covering = dict
            .get(i)
            .ok_or_else(|| anyhow::anyhow!("covering index {i} out of range 0..{}", dict.len()))?;
        println!("covering {i}:");
        println!("{}", covering.ascii());
    } else if orbits {
        let forms = fundamental_forms(dict);
        println!(
            "{} coverings in {} classes under the 8 board symmetries",
            dict.len(),
            forms.len()
        );
        for orbit in &forms {
            let members: Vec<String> = orbit.members().iter().map(u8::to_string).collect();
            println!(
                "class of covering {:>3} ({} members): {}",
                orbit.representative(),
                orbit.members().len(),
                members.join(" ")
            );
        }
    } else {
        println!("{} coverings", dict.len());
        for covering in dict.coverings() {
            println!("{:>3} {}", covering.index(), covering.label_string());
        }
    }
    Ok(())
}

fn cmd_decompose(image: &Path, out_dir: &Path, opts: &PipelineOpts) -> anyhow::Result<()> {
    let plane = load_grayscale(image)?;
    let cropped = crop_to_transform_size(&plane, opts.levels)?;
    if (cropped.plane.width(), cropped.plane.height()) != (plane.width(), plane.height()) {
        println!(
            "cropped {}x{} to {}x{} (offset row {}, col {})",
            plane.width(),
            plane.height(),
            cropped.plane.width(),
            cropped.plane.height(),
            cropped.offset_row,
            cropped.offset_col
        );
    }
    let decomposition = tetrolet::forward(&cropped.plane, opts.levels)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    for path in tetrolet::dump_decomposition(&decomposition, out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_synth(
    out: &Path,
    width: usize,
    height: usize,
    blur: Option<f64>,
    awgn: Option<f64>,
    seed: u64,
) -> anyhow::Result<()> {
    let mut plane = oriented_texture(width, height, seed)?;
    if let Some(radius) = blur {
        plane = gaussian_blur(&plane, radius)?;
    }
    if let Some(sigma) = awgn {
        // Offset decorrelates the noise stream from the texture stream.
        plane = add_awgn(&plane, sigma, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    }
    write_pgm(&plane, out)?;
    println!("wrote {} ({width}x{height}, seed {seed})", out.display());
    Ok(())
}
