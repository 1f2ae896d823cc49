//! Command-line front end for the surface kernel: generate quad meshes of
//! constant-angle surfaces, verify meshes or parameter sets, and selftest
//! the ambient geometry.
//!
//! Exit codes: 0 success (and verification verdict pass), 1 I/O or file
//! format failure, 2 parameter rejection, 3 degenerate or ill-conditioned
//! geometry, 4 verification verdict failure.
//!
//! All numbers printed to the console carry 17 significant digits so runs
//! are reproducible across languages; mesh and sidecar files use the
//! shortest decimal form that parses back to the identical `f64`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ads_helix::generate::{
    assemble, classify, family_from_preset, FamilyPreset, CLASSIFY_TOL,
};
use ads_helix::mesh::{
    mesh_surface, parse_domain, parse_grid, read_mesh, spectral_data, verify_mesh,
    write_mesh, write_text_atomic, Sidecar,
};
use ads_helix::verify::{ambient_selftest, verify_surface, Report};
use ads_helix::{Ambient, Case, Error, HelixSurface, Result, SurfaceParams};

/// Dead zone for the case decision at the CLI boundary. A τ passed as a
/// decimal literal rarely hits the degenerate value exactly, so |B| below
/// this is treated as the B = 0 case by snapping τ to the exact critical
/// value √(λ+ν²)/|ν|; after the snap every downstream consumer (library
/// classification at its tighter tolerance, sidecar, verifier) agrees on
/// the case.
const CLI_CLASSIFY_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "ads-helix",
    version,
    about = "Constant-angle surfaces in a Berger-deformed anti-de Sitter 3-space: \
             generate quad meshes, verify them, selftest the ambient geometry"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a surface mesh and its parameter sidecar.
    Generate(GenerateArgs),
    /// Verify a mesh file against its sidecar, or a parameter set from scratch.
    Verify(VerifyArgs),
    /// Run the ambient geometry selftest (connection, curvature, fibration).
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SurfaceArgs {
    /// Curvature scale κ > 0 of the ambient quadric ⟨q,q⟩ = −4/κ.
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    kappa: f64,
    /// Fiber scaling τ > 0 of the Berger-like metric g_τ.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    tau: f64,
    /// Causal character λ = ±1 of the unit normal.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    /// Constant angle ν ≠ 0 (|ν| > 1 required when λ = −1).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    nu: f64,
    /// Expected case (b-pos | b-zero | b-neg); fails if parameters disagree.
    #[arg(long)]
    case: Option<String>,
    /// Isometry-family preset: identity | const-xi1:<c>,linear-xi3.
    #[arg(long, default_value = "identity")]
    family: String,
    /// Sampling grid NXxNY.
    #[arg(long, default_value = "33x33")]
    grid: String,
    /// x-window a:b (default: automatic degeneracy-avoiding scan).
    #[arg(long, allow_hyphen_values = true)]
    xdomain: Option<String>,
    /// y-window a:b.
    #[arg(long, default_value = "0:1", allow_hyphen_values = true)]
    ydomain: String,
    /// Seed recorded in reports and the sidecar.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    /// Output mesh path; the sidecar lands next to it as <out>.params.
    #[arg(long, default_value = "surface.mesh")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Mesh file to verify (needs its <mesh>.params sidecar). Without this,
    /// the surface is built from the parameter flags and verified directly.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[command(flatten)]
    surface: SurfaceArgs,
    /// Also write the report to this file (atomically).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Curvature scale κ > 0.
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    kappa: f64,
    /// Fiber scaling τ > 0.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    tau: f64,
    /// Seed for the random sample points and test fields.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report to this file (atomically).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Selftest(a) => cmd_selftest(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) | Error::Format(_) => 1,
                Error::InvalidParams(_) => 2,
                Error::Degenerate(_) | Error::IllConditioned(_) => 3,
            })
        }
    }
}

/// `ADS_HELIX_THREADS` caps the global worker pool used for grid sampling.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("ADS_HELIX_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring ADS_HELIX_THREADS={v:?} (want a positive integer)"),
        }
    }
}

/// Builds the surface described by the flags, snapping τ inside the CLI
/// dead zone. Returns the surface and the effective τ.
fn build_surface(a: &SurfaceArgs) -> Result<HelixSurface> {
    let params = SurfaceParams::new(a.lambda, a.nu)?;
    let mut tau = a.tau;
    let b_raw = params.class_b(tau);
    if classify(b_raw, CLI_CLASSIFY_TOL) == Case::BZero
        && classify(b_raw, CLASSIFY_TOL) != Case::BZero
    {
        let snapped = params.lambda_nu2().sqrt() / a.nu.abs();
        eprintln!(
            "note: |B| = {:.16e} is below {CLI_CLASSIFY_TOL:e}; snapping tau to {snapped:.16e} \
             for the degenerate-case construction",
            b_raw.abs()
        );
        tau = snapped;
    }
    let amb = Ambient::new(a.kappa, tau)?;
    if let Some(want) = &a.case {
        let want = Case::from_token(want)?;
        let got = classify(params.class_b(tau), CLASSIFY_TOL);
        if want != got {
            return Err(Error::InvalidParams(format!(
                "requested case {} but the parameters give B = {:.16e} ({})",
                want.token(),
                params.class_b(tau),
                got.token()
            )));
        }
    }
    let preset = FamilyPreset::parse(&a.family)?;
    let ydomain = parse_domain(&a.ydomain)?;
    let xdomain = a.xdomain.as_deref().map(parse_domain).transpose()?;
    let family = family_from_preset(&amb, &params, preset, ydomain)?;
    assemble(amb, params, family, ydomain, xdomain)
}

fn cmd_generate(a: GenerateArgs) -> Result<bool> {
    let (nx, ny) = parse_grid(&a.surface.grid)?;
    let srf = build_surface(&a.surface)?;
    let mesh = mesh_surface(&srf, nx, ny);
    write_mesh(&a.out, &mesh)?;
    let sidecar = Sidecar::for_surface(&srf, &a.surface.family, nx, ny, a.surface.seed)?;
    let sidecar_path = Sidecar::path_for(&a.out);
    sidecar.write(&sidecar_path)?;

    println!("case {}", srf.case.token());
    println!("kappa {:.16e}", srf.amb.kappa);
    println!("tau {:.16e}", srf.amb.tau);
    println!("lambda {:.16e}", srf.params.lambda);
    println!("nu {:.16e}", srf.params.nu);
    println!("class-b {:.16e}", srf.params.class_b(srf.amb.tau));
    for (k, v) in spectral_data(&srf.amb, &srf.params)? {
        println!("{k} {v:.16e}");
    }
    println!("xdomain {:.16e}:{:.16e}", srf.xdomain.0, srf.xdomain.1);
    println!("ydomain {:.16e}:{:.16e}", srf.ydomain.0, srf.ydomain.1);
    println!("grid {nx}x{ny}");
    println!("vertices {}", mesh.vertices.len());
    println!("quads {}", mesh.quads.len());
    println!("mesh {}", a.out.display());
    println!("params {}", sidecar_path.display());
    Ok(true)
}

fn emit_report(rep: &Report, out: Option<&PathBuf>) -> Result<bool> {
    let text = rep.render();
    print!("{text}");
    if let Some(path) = out {
        write_text_atomic(path, &text)?;
    }
    Ok(rep.verdict())
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let rep = match &a.mesh {
        Some(path) => {
            let mesh = read_mesh(path)?;
            let sidecar = Sidecar::read(&Sidecar::path_for(path))?;
            verify_mesh(&mesh, &sidecar)?
        }
        None => {
            let (nx, ny) = parse_grid(&a.surface.grid)?;
            let srf = build_surface(&a.surface)?;
            verify_surface(&srf, nx.max(25), ny.max(25), a.surface.seed)?
        }
    };
    emit_report(&rep, a.out.as_ref())
}

fn cmd_selftest(a: SelftestArgs) -> Result<bool> {
    let rep = ambient_selftest(a.kappa, a.tau, a.seed)?;
    emit_report(&rep, a.out.as_ref())
}
