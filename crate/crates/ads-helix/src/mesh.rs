//! Plain-text quad meshes of generated surfaces, with a parameter sidecar.
//!
//! A mesh file is line-oriented and self-describing:
//!
//! ```text
//! ads-helix v1 <case> <kappa> <tau> <lambda> <nu>
//! v x₁ x₂ x₃ x₄ px py pz        (one per vertex, row-major, x fastest)
//! f i j k l                     (1-indexed counter-clockwise quads)
//! ```
//!
//! The ambient coordinates are raw quadric positions; (px, py, pz) is a
//! ready-to-plot chart — the base point pushed into the Poincaré disk plus
//! the fiber angle scaled by half the quadric radius — so a viewer can draw
//! the mesh without knowing any geometry. Numbers use the shortest decimal
//! form that parses back to the identical `f64`, so files round-trip
//! bit-exactly. Writes go through a temporary file in the destination
//! directory and are atomically renamed into place.
//!
//! The sidecar (`<mesh>.params`) holds one `key value` pair per line: the
//! construction inputs (case, κ, τ, λ, ν, family, domains, grid, seed), the
//! case invariant B, and the spectral data of the generating curve. It is
//! sufficient to regenerate the surface from scratch, which is exactly what
//! [`verify_mesh`] does to cross-examine a mesh file against its sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ambient::Ambient;
use crate::generate::{
    assemble, classify, curve_b_neg, curve_b_pos, family_from_preset, Case, FamilyPreset,
    HelixSurface, SurfaceParams, CLASSIFY_TOL,
};
use crate::paraquaternion::Vec4;
use crate::verify::{verify_parts, Report};
use crate::{Error, Result};

/// Mesh format identifier (first two tokens of the header line).
pub const MESH_FORMAT: &str = "ads-helix v1";
/// Sidecar format identifier (value of its `format` key).
pub const SIDECAR_FORMAT: &str = "ads-helix-params-v1";

/// Tolerances for mesh cross-examination.
pub const TOL_MESH_MEMBERSHIP: f64 = 1e-8;
pub const TOL_MESH_REBUILD: f64 = 1e-9;
pub const TOL_SIDECAR_CONSISTENCY: f64 = 1e-12;

/// One sampled vertex: quadric position plus the plot chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshVertex {
    pub pos: Vec4,
    pub proj: [f64; 3],
}

/// A sampled surface patch with its construction parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub case: Case,
    pub kappa: f64,
    pub tau: f64,
    pub lambda: f64,
    pub nu: f64,
    pub vertices: Vec<MeshVertex>,
    pub quads: Vec<[u32; 4]>,
}

/// Chart used by the bundled viewer: the base point of the fibration in the
/// Poincaré disk, and the fiber angle atan2(x₄, x₃) scaled by half the
/// quadric radius 2/√κ so all three coordinates share a length scale.
pub fn projection(amb: &Ambient, q: Vec4) -> [f64; 3] {
    let [b1, b2, b3] = amb.hopf(q);
    let den = 1.0 / amb.kappa.sqrt() + b3;
    [
        b1 / den,
        b2 / den,
        q.0[3].atan2(q.0[2]) / amb.kappa.sqrt(),
    ]
}

/// Samples the surface on an nx×ny grid (row-major, x fastest) and builds
/// the quad connectivity. Rows are sampled in parallel.
pub fn mesh_surface(srf: &HelixSurface, nx: usize, ny: usize) -> Mesh {
    let imm = srf.immersion();
    let amb = srf.amb;
    let (x0, x1) = srf.xdomain;
    let (y0, y1) = srf.ydomain;
    let vertices: Vec<MeshVertex> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let y = y0 + (y1 - y0) * j as f64 / (ny - 1) as f64;
            let imm = &imm;
            (0..nx).map(move |i| {
                let x = x0 + (x1 - x0) * i as f64 / (nx - 1) as f64;
                let pos = imm.position(x, y);
                MeshVertex {
                    pos,
                    proj: projection(&amb, pos),
                }
            })
        })
        .collect();
    let mut quads = Vec::with_capacity((nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = (j * nx + i) as u32 + 1;
            let b = (j * nx + i + 1) as u32 + 1;
            let c = ((j + 1) * nx + i + 1) as u32 + 1;
            let d = ((j + 1) * nx + i) as u32 + 1;
            quads.push([a, b, c, d]);
        }
    }
    Mesh {
        case: srf.case,
        kappa: amb.kappa,
        tau: amb.tau,
        lambda: srf.params.lambda,
        nu: srf.params.nu,
        vertices,
        quads,
    }
}

/// Writes text through a temporary file in the destination directory and
/// renames it into place, so readers never observe a partial file.
pub fn write_text_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    std::fs::write(tmp.path(), contents)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes a mesh file atomically.
pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "{MESH_FORMAT} {} {} {} {} {}",
        mesh.case.token(),
        mesh.kappa,
        mesh.tau,
        mesh.lambda,
        mesh.nu
    )
    .expect("writing to a String cannot fail");
    for v in &mesh.vertices {
        let [x1, x2, x3, x4] = v.pos.0;
        let [px, py, pz] = v.proj;
        writeln!(out, "v {x1} {x2} {x3} {x4} {px} {py} {pz}").unwrap();
    }
    for q in &mesh.quads {
        writeln!(out, "f {} {} {} {}", q[0], q[1], q[2], q[3]).unwrap();
    }
    write_text_atomic(path, &out)
}

fn bad(line_no: usize, what: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line_no}: {what}"))
}

fn parse_float(tok: &str, line_no: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| bad(line_no, format!("expected a number, got {tok:?}")))?;
    if !v.is_finite() {
        return Err(bad(line_no, format!("non-finite number {tok:?}")));
    }
    Ok(v)
}

/// Reads and strictly validates a mesh file: every line must be the header,
/// a vertex, or a face; every face index must point at a vertex.
pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty mesh file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 7 || toks[0] != "ads-helix" || toks[1] != "v1" {
        return Err(bad(1, format!("bad header {header:?}")));
    }
    let case = Case::from_token(toks[2]).map_err(|e| bad(1, e))?;
    let kappa = parse_float(toks[3], 1)?;
    let tau = parse_float(toks[4], 1)?;
    let lambda = parse_float(toks[5], 1)?;
    let nu = parse_float(toks[6], 1)?;

    let mut vertices = Vec::new();
    let mut quads = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first() {
            Some(&"v") if toks.len() == 8 => {
                let mut nums = [0.0; 7];
                for (slot, tok) in nums.iter_mut().zip(&toks[1..]) {
                    *slot = parse_float(tok, line_no)?;
                }
                vertices.push(MeshVertex {
                    pos: Vec4([nums[0], nums[1], nums[2], nums[3]]),
                    proj: [nums[4], nums[5], nums[6]],
                });
            }
            Some(&"f") if toks.len() == 5 => {
                let mut q = [0u32; 4];
                for (slot, tok) in q.iter_mut().zip(&toks[1..]) {
                    *slot = tok
                        .parse()
                        .map_err(|_| bad(line_no, format!("bad face index {tok:?}")))?;
                }
                quads.push(q);
            }
            _ => return Err(bad(line_no, format!("unrecognized line {line:?}"))),
        }
    }
    for q in &quads {
        for &i in q {
            if i == 0 || i as usize > vertices.len() {
                return Err(Error::Format(format!(
                    "face index {i} outside 1..={}",
                    vertices.len()
                )));
            }
        }
    }
    Ok(Mesh {
        case,
        kappa,
        tau,
        lambda,
        nu,
        vertices,
        quads,
    })
}

/// Construction record sufficient to regenerate a surface: written next to
/// each mesh as `<mesh>.params`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sidecar {
    pub case: Case,
    pub kappa: f64,
    pub tau: f64,
    pub lambda: f64,
    pub nu: f64,
    pub family: String,
    pub xdomain: (f64, f64),
    pub ydomain: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub seed: u64,
    pub class_b: f64,
    /// Case-specific spectral data of the generating curve (key, value).
    pub spectral: Vec<(String, f64)>,
}

/// Spectral data recorded in the sidecar for a parameter set, recomputed
/// identically during cross-examination.
pub fn spectral_data(amb: &Ambient, params: &SurfaceParams) -> Result<Vec<(String, f64)>> {
    let case = classify(params.class_b(amb.tau), CLASSIFY_TOL);
    Ok(match case {
        Case::BPos => {
            let c = curve_b_pos(amb, params)?;
            vec![
                ("alpha1".into(), c.alpha1),
                ("alpha2".into(), c.alpha2),
                ("w11".into(), c.w11),
                ("w33".into(), c.w33),
                ("d".into(), c.d),
            ]
        }
        Case::BZero => Vec::new(),
        Case::BNeg => {
            let c = curve_b_neg(amb, params)?;
            vec![
                ("alpha".into(), c.alpha),
                ("beta".into(), c.beta),
                ("w14".into(), c.w14),
            ]
        }
    })
}

impl Sidecar {
    /// Sidecar path for a mesh path: the `.params` suffix is appended.
    pub fn path_for(mesh_path: &Path) -> PathBuf {
        let mut os = mesh_path.as_os_str().to_os_string();
        os.push(".params");
        PathBuf::from(os)
    }

    pub fn for_surface(
        srf: &HelixSurface,
        family: &str,
        nx: usize,
        ny: usize,
        seed: u64,
    ) -> Result<Sidecar> {
        Ok(Sidecar {
            case: srf.case,
            kappa: srf.amb.kappa,
            tau: srf.amb.tau,
            lambda: srf.params.lambda,
            nu: srf.params.nu,
            family: family.to_string(),
            xdomain: srf.xdomain,
            ydomain: srf.ydomain,
            nx,
            ny,
            seed,
            class_b: srf.params.class_b(srf.amb.tau),
            spectral: spectral_data(&srf.amb, &srf.params)?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "format {SIDECAR_FORMAT}").unwrap();
        writeln!(out, "case {}", self.case.token()).unwrap();
        writeln!(out, "kappa {}", self.kappa).unwrap();
        writeln!(out, "tau {}", self.tau).unwrap();
        writeln!(out, "lambda {}", self.lambda).unwrap();
        writeln!(out, "nu {}", self.nu).unwrap();
        writeln!(out, "family {}", self.family).unwrap();
        writeln!(out, "xdomain {}:{}", self.xdomain.0, self.xdomain.1).unwrap();
        writeln!(out, "ydomain {}:{}", self.ydomain.0, self.ydomain.1).unwrap();
        writeln!(out, "grid {}x{}", self.nx, self.ny).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        writeln!(out, "class-b {}", self.class_b).unwrap();
        for (k, v) in &self.spectral {
            writeln!(out, "{k} {v}").unwrap();
        }
        write_text_atomic(path, &out)
    }

    pub fn read(path: &Path) -> Result<Sidecar> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let (Some(k), Some(v), None) = (it.next(), it.next(), it.next()) else {
                return Err(bad(idx + 1, format!("expected `key value`, got {line:?}")));
            };
            pairs.push((k.to_string(), v.to_string()));
        }
        let mut take = |key: &str| -> Result<String> {
            let at = pairs
                .iter()
                .position(|(k, _)| k == key)
                .ok_or_else(|| Error::Format(format!("missing key {key:?}")))?;
            Ok(pairs.remove(at).1)
        };
        let format = take("format")?;
        if format != SIDECAR_FORMAT {
            return Err(Error::Format(format!("unsupported format {format:?}")));
        }
        let case = Case::from_token(&take("case")?)?;
        let fl = |s: String| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Format(format!("bad number {s:?}")))?;
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite number {s:?}")));
            }
            Ok(v)
        };
        let kappa = fl(take("kappa")?)?;
        let tau = fl(take("tau")?)?;
        let lambda = fl(take("lambda")?)?;
        let nu = fl(take("nu")?)?;
        let family = take("family")?;
        let xdomain = parse_domain(&take("xdomain")?)?;
        let ydomain = parse_domain(&take("ydomain")?)?;
        let (nx, ny) = parse_grid(&take("grid")?)?;
        let seed: u64 = take("seed")?
            .parse()
            .map_err(|_| Error::Format("bad seed".into()))?;
        let class_b = fl(take("class-b")?)?;
        let mut spectral = Vec::new();
        for (k, v) in pairs {
            spectral.push((k, fl(v)?));
        }
        Ok(Sidecar {
            case,
            kappa,
            tau,
            lambda,
            nu,
            family,
            xdomain,
            ydomain,
            nx,
            ny,
            seed,
            class_b,
            spectral,
        })
    }
}

/// Parses `a:b` into an increasing interval.
pub fn parse_domain(s: &str) -> Result<(f64, f64)> {
    let err = || Error::Format(format!("expected `a:b` with a < b, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    let a: f64 = a.parse().map_err(|_| err())?;
    let b: f64 = b.parse().map_err(|_| err())?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(err());
    }
    Ok((a, b))
}

/// Parses `NXxNY`, requiring at least a 2×2 grid.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let err = || Error::Format(format!("expected `NXxNY` with both ≥ 2, got {s:?}"));
    let (a, b) = s.split_once('x').ok_or_else(err)?;
    let a: usize = a.parse().map_err(|_| err())?;
    let b: usize = b.parse().map_err(|_| err())?;
    if a < 2 || b < 2 {
        return Err(err());
    }
    Ok((a, b))
}

/// Rebuilds the surface a sidecar describes.
pub fn surface_from_sidecar(sc: &Sidecar) -> Result<HelixSurface> {
    let amb = Ambient::new(sc.kappa, sc.tau)?;
    let params = SurfaceParams::new(sc.lambda, sc.nu)?;
    let preset = FamilyPreset::parse(&sc.family)?;
    let family = family_from_preset(&amb, &params, preset, sc.ydomain)?;
    assemble(amb, params, family, sc.ydomain, Some(sc.xdomain))
}

/// Cross-examines a mesh file against its sidecar: the sidecar must agree
/// with the mesh header and with values recomputed from the parameters
/// (`sidecar-consistency`), every vertex must sit on the quadric
/// (`mesh-membership`), and regenerating the surface from the sidecar must
/// reproduce every vertex and quad (`mesh-rebuild`). The full surface check
/// battery then runs on the regenerated surface.
pub fn verify_mesh(mesh: &Mesh, sc: &Sidecar) -> Result<Report> {
    let srf = surface_from_sidecar(sc)?;
    let amb = srf.amb;

    let mut consistency = 0.0f64;
    for (a, b) in [
        (mesh.kappa, sc.kappa),
        (mesh.tau, sc.tau),
        (mesh.lambda, sc.lambda),
        (mesh.nu, sc.nu),
        (sc.class_b, srf.params.class_b(amb.tau)),
    ] {
        consistency = consistency.max((a - b).abs());
    }
    if mesh.case != sc.case || sc.case != srf.case {
        consistency = f64::INFINITY;
    }
    let expected_spectral = spectral_data(&amb, &srf.params)?;
    if expected_spectral.len() != sc.spectral.len() {
        consistency = f64::INFINITY;
    } else {
        for ((ka, va), (kb, vb)) in expected_spectral.iter().zip(&sc.spectral) {
            if ka != kb {
                consistency = f64::INFINITY;
            } else {
                consistency = consistency.max((va - vb).abs());
            }
        }
    }

    let mut membership = 0.0f64;
    for v in &mesh.vertices {
        membership = membership.max(amb.membership_defect(v.pos));
    }

    let rebuilt = mesh_surface(&srf, sc.nx, sc.ny);
    let mut rebuild = 0.0f64;
    if rebuilt.vertices.len() != mesh.vertices.len() || rebuilt.quads != mesh.quads {
        rebuild = f64::INFINITY;
    } else {
        for (a, b) in rebuilt.vertices.iter().zip(&mesh.vertices) {
            rebuild = rebuild.max((a.pos - b.pos).max_abs());
            for (pa, pb) in a.proj.iter().zip(&b.proj) {
                rebuild = rebuild.max((pa - pb).abs());
            }
        }
    }

    let imm = srf.immersion();
    let mut rep = verify_parts(
        &amb,
        &srf.params,
        Some(&srf.family),
        &imm,
        sc.nx.max(25),
        sc.ny.max(25),
        sc.seed,
    )?;
    rep.check("sidecar-consistency", consistency, TOL_SIDECAR_CONSISTENCY);
    rep.check("mesh-membership", membership, TOL_MESH_MEMBERSHIP);
    rep.check("mesh-rebuild", rebuild, TOL_MESH_REBUILD);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn sample_surface() -> HelixSurface {
        let amb = Ambient::new(4.0, 2.0).unwrap();
        let params = SurfaceParams::new(1.0, 1.0).unwrap();
        let fam =
            family_from_preset(&amb, &params, FamilyPreset::Identity, (0.0, 1.0)).unwrap();
        assemble(amb, params, fam, (0.0, 1.0), None).unwrap()
    }

    #[test]
    fn projection_lands_in_the_disk_with_bounded_fiber_angle() {
        let amb = Ambient::new(4.0, 2.0).unwrap();
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let q = amb.sample_point(&mut rng);
            let [px, py, pz] = projection(&amb, q);
            assert!(px * px + py * py < 1.0, "disk point escaped: {px}, {py}");
            let bound = std::f64::consts::PI / amb.kappa.sqrt();
            assert!((-bound..=bound).contains(&pz), "fiber angle {pz}");
        }
    }

    #[test]
    fn two_by_two_grid_is_one_quad() {
        let mesh = mesh_surface(&sample_surface(), 2, 2);
        assert_eq!(mesh.vertices.len(), 4);
        assert_eq!(mesh.quads, vec![[1, 2, 4, 3]]);
        // Row-major, x fastest: vertices 1,2 share y; 1,3 share x.
        let v = &mesh.vertices;
        assert!((v[0].proj[2] - v[1].proj[2]).abs() > 0.0 || v[0].pos != v[1].pos);
        let counts = mesh_surface(&sample_surface(), 5, 4);
        assert_eq!(counts.vertices.len(), 20);
        assert_eq!(counts.quads.len(), 12);
    }

    #[test]
    fn mesh_files_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patch.mesh");
        let mesh = mesh_surface(&sample_surface(), 7, 5);
        write_mesh(&path, &mesh).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(mesh, back);
        for v in &back.vertices {
            assert!(
                Ambient::new(back.kappa, back.tau)
                    .unwrap()
                    .membership_defect(v.pos)
                    < 1e-12
            );
        }
    }

    #[test]
    fn sidecars_round_trip_and_locate_next_to_the_mesh() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("patch.mesh");
        let path = Sidecar::path_for(&mesh_path);
        assert!(path.to_string_lossy().ends_with("patch.mesh.params"));
        let srf = sample_surface();
        let sc = Sidecar::for_surface(&srf, "identity", 7, 5, 11).unwrap();
        assert_eq!(sc.spectral.len(), 5);
        sc.write(&path).unwrap();
        let back = Sidecar::read(&path).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn malformed_files_are_rejected_with_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mesh");
        let cases = [
            "not-a-header\n",
            "ads-helix v2 b-pos 4 2 1 1\n",
            "ads-helix v1 b-pos 4 2 1 1\nv 1 2 3\n",
            "ads-helix v1 b-pos 4 2 1 1\nv 1 2 3 nan 0 0 0\n",
            "ads-helix v1 b-pos 4 2 1 1\nv 1 0 0 0 0 0 0\nf 1 2 3 4\n",
            "ads-helix v1 b-pos 4 2 1 1\nwhat 1 2\n",
        ];
        for text in cases {
            std::fs::write(&path, text).unwrap();
            match read_mesh(&path) {
                Err(Error::Format(_)) => {}
                other => panic!("{text:?} gave {other:?}"),
            }
        }
        let sc_path = dir.path().join("bad.params");
        std::fs::write(&sc_path, "format something-else\n").unwrap();
        assert!(matches!(
            Sidecar::read(&sc_path),
            Err(Error::Format(_))
        ));
        std::fs::write(&sc_path, "format ads-helix-params-v1\ncase b-pos\n").unwrap();
        assert!(matches!(Sidecar::read(&sc_path), Err(Error::Format(_))));
    }

    #[test]
    fn verify_mesh_accepts_generated_output_and_rejects_tampering() {
        let srf = sample_surface();
        let mesh = mesh_surface(&srf, 25, 25);
        let sc = Sidecar::for_surface(&srf, "identity", 25, 25, 5).unwrap();
        let rep = verify_mesh(&mesh, &sc).unwrap();
        assert!(rep.verdict(), "{}", rep.render());

        // A single nudged vertex breaks both membership and the rebuild.
        let mut tampered = mesh.clone();
        tampered.vertices[40].pos = tampered.vertices[40].pos + Vec4::new(1e-6, 0.0, 0.0, 0.0);
        let rep = verify_mesh(&tampered, &sc).unwrap();
        assert!(!rep.get("mesh-membership").unwrap().pass());
        assert!(!rep.get("mesh-rebuild").unwrap().pass());
        assert!(!rep.verdict());

        // A sidecar whose stated parameters drift from the mesh header
        // trips the consistency check.
        let mut skewed = sc.clone();
        skewed.class_b += 1e-9;
        let rep = verify_mesh(&mesh, &skewed).unwrap();
        assert!(!rep.get("sidecar-consistency").unwrap().pass());
    }
}
