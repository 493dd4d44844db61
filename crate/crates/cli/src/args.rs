use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use h2green::bem::HarmonicTestCase;

#[derive(Debug, Parser)]
#[command(
    name = "h2green",
    version,
    about = "Green hybrid H/H2 compression of Laplace BEM matrices on the unit sphere"
)]
pub struct Cli {
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or convert a mesh, write it as OFF and print a validation report.
    Mesh(MeshArgs),
    /// Compare compressed single layer matrices against the dense matrix.
    Verify(RunArgs),
    /// Build time, storage and matvec time of compressed single layer matrices.
    Bench(RunArgs),
    /// Solve the Dirichlet problem and report the Neumann L2 error.
    Solve(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MeshSource {
    /// Sphere refinement level(s); level l has 8 * 4^l triangles.
    #[arg(long = "mesh-level", value_delimiter = ',', conflicts_with = "mesh_file")]
    pub mesh_level: Vec<usize>,

    /// Closed triangle mesh in OFF format.
    #[arg(long = "mesh-file")]
    pub mesh_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub source: MeshSource,

    /// Output OFF file; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Green,
    Hybrid,
    H2,
    Aca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Green => "green",
            Method::Hybrid => "hybrid",
            Method::H2 => "h2",
            Method::Aca => "aca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Case {
    F1,
    F2,
    F3,
}

impl From<Case> for HarmonicTestCase {
    fn from(c: Case) -> Self {
        match c {
            Case::F1 => HarmonicTestCase::F1,
            Case::F2 => HarmonicTestCase::F2,
            Case::F3 => HarmonicTestCase::F3,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: MeshSource,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "h2")]
    pub method: Vec<Method>,

    /// Gauss points per direction and face of the Green quadrature.
    #[arg(short = 'm', value_delimiter = ',', default_value = "2")]
    pub m: Vec<usize>,

    /// Relative cross approximation tolerance of the hybrid and H2 methods.
    #[arg(long, value_delimiter = ',', default_value = "5e-4")]
    pub tol: Vec<f64>,

    /// Relative tolerance of the ACA baseline.
    #[arg(long = "eps-aca", value_delimiter = ',', default_value = "5e-4")]
    pub eps_aca: Vec<f64>,

    /// Admissibility parameter.
    #[arg(long, default_value_t = 2.0)]
    pub eta: f64,

    /// Green box distance as a fraction of the cluster diameter.
    #[arg(long = "delta-scale", default_value_t = 1.0)]
    pub delta_scale: f64,

    #[arg(long = "leaf-size", default_value_t = 16)]
    pub leaf_size: usize,

    /// Gauss points per direction for separated triangle pairs.
    #[arg(long = "quad-regular", default_value_t = 3)]
    pub quad_regular: usize,

    /// Gauss points per direction for touching triangle pairs.
    #[arg(long = "quad-singular", default_value_t = 5)]
    pub quad_singular: usize,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "f1,f2,f3")]
    pub case: Vec<Case>,

    /// Output CSV file; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Seed for sampled blocks and random test vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
