use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use h2green::bem::{
    l2_projection, neumann_l2_error, solve_dirichlet, GalerkinOperator, LayerPotential, QuadratureOrders,
};
use h2green::densela::{DenseMatrix, LinearOperator};
use h2green::geometry::{generate_sphere, load_off, validate, write_off, TriangleMesh};
use h2green::hierarchy::{
    build_h2, build_h_aca_baseline, build_h_green, build_h_hybrid, compare_dense, H2Matrix, HMatrix, Partition,
    StorageReport, DENSE_COMPARISON_LIMIT,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{MeshArgs, MeshSource, Method, RunArgs};
use crate::error::CliError;

const VERIFY_BLOCKS: usize = 8;
const MATVEC_REPEATS: usize = 5;

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn load_meshes(src: &MeshSource) -> Result<Vec<Arc<TriangleMesh>>, CliError> {
    if let Some(path) = &src.mesh_file {
        let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        let mesh = load_off(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
        let report = validate(&mesh);
        if !report.is_valid() {
            return Err(input(format!("{}: invalid mesh\n{report}", path.display())));
        }
        return Ok(vec![Arc::new(mesh)]);
    }
    if src.mesh_level.is_empty() {
        return Err(input("one of --mesh-level or --mesh-file is required"));
    }
    src.mesh_level.iter().map(|&l| Ok(Arc::new(generate_sphere(l)?))).collect()
}

fn single_mesh(src: &MeshSource) -> Result<Arc<TriangleMesh>, CliError> {
    if src.mesh_level.len() > 1 {
        return Err(input("this command takes a single --mesh-level"));
    }
    Ok(load_meshes(src)?.remove(0))
}

fn writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Copy)]
struct Setting {
    method: Method,
    m: Option<usize>,
    tol: Option<f64>,
}

fn check_list<T>(name: &str, v: &[T], ok: impl Fn(&T) -> bool) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(input(format!("{name}: empty list")));
    }
    if !v.iter().all(ok) {
        return Err(input(format!("{name}: values out of range")));
    }
    Ok(())
}

fn settings(a: &RunArgs) -> Result<Vec<Setting>, CliError> {
    let positive = |x: &f64| x.is_finite() && *x > 0.0;
    check_list("--method", &a.method, |_| true)?;
    check_list("-m", &a.m, |&m| m >= 1)?;
    check_list("--tol", &a.tol, positive)?;
    check_list("--eps-aca", &a.eps_aca, positive)?;
    if !positive(&a.eta) || !positive(&a.delta_scale) {
        return Err(input("--eta and --delta-scale must be positive"));
    }
    if a.leaf_size == 0 || a.quad_regular == 0 || a.quad_singular == 0 {
        return Err(input("--leaf-size and quadrature orders must be at least 1"));
    }
    if a.method.contains(&Method::Green) && a.eta * a.delta_scale >= 1.0 {
        // admissible blocks then only guarantee dist >= delta, not dist > delta
        return Err(input(format!("method green needs eta * delta-scale < 1 (got {} * {})", a.eta, a.delta_scale)));
    }
    let mut out = Vec::new();
    for &method in &a.method {
        match method {
            Method::Green => out.extend(a.m.iter().map(|&m| Setting { method, m: Some(m), tol: None })),
            Method::Hybrid | Method::H2 => {
                for &m in &a.m {
                    out.extend(a.tol.iter().map(|&t| Setting { method, m: Some(m), tol: Some(t) }));
                }
            }
            Method::Aca => out.extend(a.eps_aca.iter().map(|&t| Setting { method, m: None, tol: Some(t) })),
        }
    }
    Ok(out)
}

fn operator(mesh: &Arc<TriangleMesh>, layer: LayerPotential, a: &RunArgs) -> Result<GalerkinOperator, CliError> {
    let orders = QuadratureOrders { regular: a.quad_regular, singular: a.quad_singular };
    Ok(GalerkinOperator::new(mesh.clone(), layer, orders)?)
}

enum Built {
    H(HMatrix),
    H2(H2Matrix),
}

impl Built {
    fn new(op: &GalerkinOperator, p: &Partition, s: Setting, delta_scale: f64) -> Result<Self, CliError> {
        let m = s.m.unwrap_or(0);
        let tol = s.tol.unwrap_or(0.0);
        Ok(match s.method {
            Method::Green => Built::H(build_h_green(op, p, m, delta_scale)?),
            Method::Hybrid => Built::H(build_h_hybrid(op, p, m, delta_scale, tol)?),
            Method::H2 => Built::H2(build_h2(op, p, m, delta_scale, tol)?),
            Method::Aca => Built::H(build_h_aca_baseline(op, p, tol)?),
        })
    }

    fn operator(&self) -> &dyn LinearOperator {
        match self {
            Built::H(h) => h,
            Built::H2(h) => h,
        }
    }

    fn storage(&self) -> StorageReport {
        match self {
            Built::H(h) => h.storage(),
            Built::H2(h) => h.storage(),
        }
    }

    fn to_dense(&self) -> DenseMatrix {
        match self {
            Built::H(h) => h.to_dense(),
            Built::H2(h) => h.to_dense(),
        }
    }

    fn block_rank(&self, block: usize, t: usize, s: usize) -> usize {
        match self {
            Built::H(h) => h.leaves().iter().find(|l| l.block == block).and_then(|l| h.block_rank(l)).unwrap_or(0),
            Built::H2(h) => h.row_basis().rank(t).min(h.col_basis().rank(s)),
        }
    }
}

pub fn mesh(a: &MeshArgs) -> Result<(), CliError> {
    let mesh = single_mesh(&a.source)?;
    let report = validate(&mesh);
    let text = write_off(&mesh);
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    eprintln!("{report}");
    if !report.is_valid() {
        return Err(input("mesh failed validation"));
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyRow {
    block_id: String,
    method: &'static str,
    m: Option<usize>,
    tol: Option<f64>,
    rel_frobenius: f64,
    rel_spectral: f64,
    rank: usize,
}

fn submatrix(a: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Dense comparison of every setting, for the whole matrix and for sampled
/// admissible blocks. Fails if errors are not finite, if the pure Green
/// error does not decrease strictly in `m`, or if the ACA error exceeds ten
/// times its tolerance.
pub fn verify(a: &RunArgs) -> Result<(), CliError> {
    let settings = settings(a)?;
    let mesh = single_mesh(&a.source)?;
    if mesh.triangle_count() > DENSE_COMPARISON_LIMIT {
        return Err(input(format!(
            "verify builds the dense matrix; {} triangles exceed the limit {DENSE_COMPARISON_LIMIT}",
            mesh.triangle_count()
        )));
    }
    let op = operator(&mesh, LayerPotential::Single, a)?;
    let p = Partition::new(&op, a.leaf_size, a.eta)?;
    let dense = op.assemble_dense();

    let leaves = p.blocks.admissible_leaves();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut picked: Vec<usize> =
        sample(&mut rng, leaves.len(), VERIFY_BLOCKS.min(leaves.len())).into_iter().map(|k| leaves[k]).collect();
    picked.sort_unstable();

    let mut w = writer(a.out.as_deref())?;
    let mut failures = Vec::new();
    let mut green_errors: Vec<(usize, f64)> = Vec::new();
    for s in settings {
        let built = Built::new(&op, &p, s, a.delta_scale)?;
        let approx = built.to_dense();
        let global = compare_dense(&approx, &dense)?;
        let row = |block_id: String, c: h2green::hierarchy::DenseComparison, rank| VerifyRow {
            block_id,
            method: s.method.name(),
            m: s.m,
            tol: s.tol,
            rel_frobenius: c.rel_frobenius,
            rel_spectral: c.rel_spectral,
            rank,
        };
        w.serialize(row("global".into(), global, built.storage().max_rank()))?;
        if !(global.rel_frobenius.is_finite() && global.rel_spectral.is_finite()) {
            failures.push(format!("{} m={:?} tol={:?}: non-finite error", s.method.name(), s.m, s.tol));
        }
        match s.method {
            Method::Green => green_errors.push((s.m.unwrap_or(0), global.rel_spectral)),
            Method::Aca => {
                let eps = s.tol.unwrap_or(0.0);
                if global.rel_frobenius > 10.0 * eps {
                    failures.push(format!("aca eps={eps}: error {:.3e} above 10 eps", global.rel_frobenius));
                }
            }
            _ => {}
        }
        for &b in &picked {
            let blk = p.blocks.node(b);
            let (rows, cols) = (p.rows.indices(blk.row), p.cols.indices(blk.col));
            let c = compare_dense(&submatrix(&approx, rows, cols), &submatrix(&dense, rows, cols))?;
            w.serialize(row(b.to_string(), c, built.block_rank(b, blk.row, blk.col)))?;
        }
        w.flush()?;
    }
    green_errors.sort_by_key(|&(m, _)| m);
    for pair in green_errors.windows(2) {
        if pair[1].1 >= pair[0].1 {
            failures.push(format!(
                "green error does not decrease from m={} ({:.3e}) to m={} ({:.3e})",
                pair[0].0, pair[0].1, pair[1].0, pair[1].1
            ));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Acceptance(failures.join("\n")))
    }
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    method: &'static str,
    m: Option<usize>,
    tol: Option<f64>,
    eta: f64,
    delta_scale: f64,
    build_seconds: f64,
    bytes: usize,
    bytes_per_dof: f64,
    matvec_seconds: f64,
}

/// Single layer matrices; build time covers the cluster and block trees.
pub fn bench(a: &RunArgs) -> Result<(), CliError> {
    let settings = settings(a)?;
    let meshes = load_meshes(&a.source)?;
    let mut w = writer(a.out.as_deref())?;
    for mesh in meshes {
        let op = operator(&mesh, LayerPotential::Single, a)?;
        let n = op.row_count();
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; n];
        for &s in &settings {
            let start = Instant::now();
            let p = Partition::new(&op, a.leaf_size, a.eta)?;
            let built = Built::new(&op, &p, s, a.delta_scale)?;
            let build_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            for _ in 0..MATVEC_REPEATS {
                built.operator().apply(&x, &mut y);
            }
            let matvec_seconds = start.elapsed().as_secs_f64() / MATVEC_REPEATS as f64;
            let storage = built.storage();
            w.serialize(BenchRow {
                n,
                method: s.method.name(),
                m: s.m,
                tol: s.tol,
                eta: a.eta,
                delta_scale: a.delta_scale,
                build_seconds,
                bytes: storage.total_bytes(),
                bytes_per_dof: storage.bytes_per_dof(),
                matvec_seconds,
            })?;
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveRow {
    n: usize,
    case: &'static str,
    #[serde(rename = "epsilon_L2")]
    epsilon_l2: f64,
    cg_iterations: usize,
    build_seconds: f64,
    solve_seconds: f64,
}

/// Build time covers trees and both matrices; solve time covers the
/// projection of the Dirichlet data, the solver and the error.
pub fn solve(a: &RunArgs) -> Result<(), CliError> {
    let settings = settings(a)?;
    let [s] = settings[..] else {
        return Err(input("solve takes one method with a single -m and tolerance"));
    };
    check_list("--case", &a.case, |_| true)?;
    let meshes = load_meshes(&a.source)?;
    let mut w = writer(a.out.as_deref())?;
    for mesh in meshes {
        let start = Instant::now();
        let v_op = operator(&mesh, LayerPotential::Single, a)?;
        let k_op = operator(&mesh, LayerPotential::Double, a)?;
        let v = Built::new(&v_op, &Partition::new(&v_op, a.leaf_size, a.eta)?, s, a.delta_scale)?;
        let k = Built::new(&k_op, &Partition::new(&k_op, a.leaf_size, a.eta)?, s, a.delta_scale)?;
        let build_seconds = start.elapsed().as_secs_f64();
        for &case in &a.case {
            let case = case.into();
            let start = Instant::now();
            let beta = l2_projection(&mesh, case)?;
            let sol = solve_dirichlet(v.operator(), k.operator(), &mesh, &beta)?;
            let err = neumann_l2_error(&mesh, &sol.alpha, case)?;
            w.serialize(SolveRow {
                n: mesh.triangle_count(),
                case: case.name(),
                epsilon_l2: err,
                cg_iterations: sol.iterations,
                build_seconds,
                solve_seconds: start.elapsed().as_secs_f64(),
            })?;
            w.flush()?;
        }
    }
    Ok(())
}
