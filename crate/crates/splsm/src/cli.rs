//! Command-line front end: fitting CSV data, predicting from a saved model,
//! running the Monte Carlo experiments, and validating meshes.

use crate::basis::{self, SplineSpace};
use crate::inference;
use crate::mesh::{load_mesh, load_mesh_json, MeshJson, Point2, Triangulation};
use crate::select::{fit_plsm_with, FitOptions};
use crate::sim::{run_monte_carlo, Example, SimConfig};
use crate::smoother::DesignSmoother;
use crate::space::{space_key, AssembledSpace};
use clap::{Args, Parser, Subcommand};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// exit code for usage / input errors
pub const EXIT_INPUT: i32 = 2;
/// exit code for numerical failures
pub const EXIT_NUMERIC: i32 = 1;

#[derive(Parser)]
#[command(
    name = "splsm",
    about = "Penalized semiparametric regression over triangulated 2-D domains",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a partially linear spatial model to a CSV dataset
    Fit(FitArgs),
    /// Predict from a saved model on new locations
    Predict(PredictArgs),
    /// Run a Monte Carlo simulation experiment
    Simulate(SimulateArgs),
    /// Validate a triangulation and report mesh diagnostics
    MeshCheck(MeshCheckArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// builtin mesh id (tri1, tri2, tri3, lattice, blob), a JSON mesh file,
    /// or a vertices CSV used together with --triangles
    #[arg(long)]
    mesh: String,
    /// triangles CSV when --mesh points at a vertices CSV
    #[arg(long)]
    triangles: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// input CSV with header row
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    mesh: MeshArgs,
    /// response column name
    #[arg(long)]
    y: String,
    /// comma-separated covariate column names (may be empty for pure smoothing)
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    z: Vec<String>,
    /// two location column names, e.g. --x lon,lat
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    x: Vec<String>,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// rescale covariate columns to unit second moment before fitting
    #[arg(long)]
    standardize: bool,
    /// output path for the fit JSON (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// directory for cached spline-space assemblies
    #[arg(long, env = "SPLSM_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// write the estimated surface on a WxH bounding-box grid to this CSV
    #[arg(long)]
    surface_out: Option<PathBuf>,
    /// surface grid size as WxH, e.g. 180x80
    #[arg(long, default_value = "180x80")]
    surface_grid: String,
    /// write GCV traces (steps 0 and 2) to this CSV
    #[arg(long)]
    dump_gcv: Option<PathBuf>,
    /// write the BIC selection path to this CSV
    #[arg(long)]
    dump_path: Option<PathBuf>,
    /// explicit smoothing-parameter grid (comma-separated)
    #[arg(long, value_delimiter = ',')]
    lambda1_grid: Option<Vec<f64>>,
    /// explicit selection-parameter grid (comma-separated)
    #[arg(long, value_delimiter = ',')]
    lambda2_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct PredictArgs {
    /// model JSON written by `fit`
    #[arg(long)]
    model: PathBuf,
    /// CSV of new rows (locations + covariates under the training names)
    #[arg(long)]
    data: PathBuf,
    /// optional mesh to cross-check against the model's mesh hash
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    triangles: Option<PathBuf>,
    /// output CSV (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    example: ExampleArg,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value = "tri2")]
    mesh: String,
    #[arg(long)]
    triangles: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// fit with the true support fixed (oracle run)
    #[arg(long)]
    oracle: bool,
    /// worker threads for the replication pool (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// per-replication CSV dump
    #[arg(long)]
    dump_reps: Option<PathBuf>,
    #[arg(long, env = "SPLSM_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum ExampleArg {
    Horseshoe,
    CorrelatedNoise,
}

#[derive(Args)]
struct MeshCheckArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Saved model: everything needed to reproduce predictions.
#[derive(Serialize, Deserialize)]
pub struct FitResult {
    pub mesh: MeshJson,
    pub mesh_hash: String,
    pub d: usize,
    pub r: usize,
    pub y_col: String,
    pub z_cols: Vec<String>,
    pub x_cols: Vec<String>,
    /// coefficients on the original covariate scale
    pub beta: Vec<f64>,
    /// second-moment scales applied when --standardize was given
    pub z_scales: Option<Vec<f64>>,
    pub active: Vec<usize>,
    pub active_names: Vec<String>,
    pub gamma: Vec<f64>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub trace_hat: f64,
    pub rss: f64,
    pub sigma2: f64,
    pub edf: f64,
    /// sandwich standard errors aligned with `active`
    pub se: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub n: usize,
    /// fitted values Zᵀβ̂ + α̂(X) at the training rows
    pub fitted: Vec<f64>,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: msg.into(),
        }
    }
    fn numeric(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: msg.into(),
        }
    }
}

pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::MeshCheck(args) => cmd_mesh_check(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

const BUILTIN_MESHES: &[(&str, &str, &str)] = &[
    (
        "tri1",
        include_str!("../fixtures/horseshoe_tri1_vertices.csv"),
        include_str!("../fixtures/horseshoe_tri1_triangles.csv"),
    ),
    (
        "tri2",
        include_str!("../fixtures/horseshoe_tri2_vertices.csv"),
        include_str!("../fixtures/horseshoe_tri2_triangles.csv"),
    ),
    (
        "tri3",
        include_str!("../fixtures/horseshoe_tri3_vertices.csv"),
        include_str!("../fixtures/horseshoe_tri3_triangles.csv"),
    ),
    (
        "lattice",
        include_str!("../fixtures/lattice_vertices.csv"),
        include_str!("../fixtures/lattice_triangles.csv"),
    ),
    (
        "blob",
        include_str!("../fixtures/blob_vertices.csv"),
        include_str!("../fixtures/blob_triangles.csv"),
    ),
];

fn resolve_mesh(spec: &str, triangles: &Option<PathBuf>) -> Result<Triangulation, CliError> {
    if let Some((_, v, t)) = BUILTIN_MESHES.iter().find(|(id, _, _)| *id == spec) {
        return load_mesh(v.as_bytes(), t.as_bytes())
            .map_err(|e| CliError::input(format!("builtin mesh {spec}: {e}")));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(CliError::input(format!(
            "mesh '{spec}' is neither a builtin id ({}) nor an existing file",
            BUILTIN_MESHES
                .iter()
                .map(|(id, _, _)| *id)
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    if let Some(tri) = triangles {
        let vf = std::fs::File::open(path)
            .map_err(|e| CliError::input(format!("open {}: {e}", path.display())))?;
        let tf = std::fs::File::open(tri)
            .map_err(|e| CliError::input(format!("open {}: {e}", tri.display())))?;
        load_mesh(vf, tf).map_err(|e| CliError::input(format!("mesh load: {e}")))
    } else {
        let f = std::fs::File::open(path)
            .map_err(|e| CliError::input(format!("open {}: {e}", path.display())))?;
        load_mesh_json(f).map_err(|e| CliError::input(format!("mesh load: {e}")))
    }
}

struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn read_table(path: &Path, wanted: &[&str]) -> Result<Table, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("read {}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::input(format!("csv header: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut indices = Vec::with_capacity(wanted.len());
    for name in wanted {
        match headers.iter().position(|h| h == name) {
            Some(i) => indices.push(i),
            None => {
                return Err(CliError::input(format!(
                    "column '{name}' not found; available: {}",
                    headers.join(", ")
                )))
            }
        }
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("csv row {}: {e}", row_no + 2)))?;
        for (k, &i) in indices.iter().enumerate() {
            let raw = rec.get(i).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| {
                CliError::input(format!(
                    "row {}, column '{}': cannot parse '{raw}' as a number",
                    row_no + 2,
                    wanted[k]
                ))
            })?;
            columns[k].push(v);
        }
    }
    Ok(Table {
        headers: wanted.iter().map(|s| s.to_string()).collect(),
        columns,
    })
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::input(format!("write {}: {e}", p.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    if args.x.len() != 2 {
        return Err(CliError::input("--x needs exactly two column names"));
    }
    let mut roles: Vec<&str> = vec![args.y.as_str()];
    roles.extend(args.z.iter().map(|s| s.as_str()));
    roles.extend(args.x.iter().map(|s| s.as_str()));
    let mut seen = std::collections::HashSet::new();
    for role in &roles {
        if !seen.insert(*role) {
            return Err(CliError::input(format!(
                "column '{role}' is assigned to more than one role"
            )));
        }
    }
    let table = read_table(&args.data, &roles)?;
    let n = table.columns[0].len();
    if n == 0 {
        return Err(CliError::input("no data rows"));
    }
    let p = args.z.len();
    let y = Array1::from_vec(table.columns[0].clone());
    let mut z = Array2::zeros((n, p));
    for j in 0..p {
        for i in 0..n {
            z[[i, j]] = table.columns[1 + j][i];
        }
    }
    let points: Vec<Point2> = (0..n)
        .map(|i| Point2::new(table.columns[1 + p][i], table.columns[2 + p][i]))
        .collect();

    let mesh = resolve_mesh(&args.mesh.mesh, &args.mesh.triangles)?;
    let off: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| mesh.locate(**p).is_none())
        .map(|(i, _)| i + 2) // 1-based with header row
        .collect();
    if !off.is_empty() {
        let shown: Vec<String> = off.iter().take(10).map(|i| i.to_string()).collect();
        return Err(CliError::input(format!(
            "{} rows lie outside the mesh domain (csv lines {}{})",
            off.len(),
            shown.join(", "),
            if off.len() > 10 { ", ..." } else { "" }
        )));
    }

    let z_scales: Option<Vec<f64>> = args.standardize.then(|| {
        (0..p)
            .map(|j| {
                let s = (z.column(j).dot(&z.column(j)) / n as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    });
    let mut z_fit = z.clone();
    if let Some(scales) = &z_scales {
        for (j, &s) in scales.iter().enumerate() {
            z_fit.column_mut(j).mapv_inplace(|v| v / s);
        }
    }

    let space = SplineSpace::new(mesh, args.d, args.r)
        .map_err(|e| CliError::input(format!("spline space: {e}")))?;
    let aspace = AssembledSpace::load_or_assemble(space, args.cache_dir.as_deref())
        .map_err(|e| CliError::numeric(format!("assembly: {e}")))?;
    let b = basis::eval_basis_matrix(&aspace.space, &points)
        .map_err(|e| CliError::numeric(format!("basis evaluation: {e}")))?;
    let ds = DesignSmoother::build(&aspace, &b)
        .map_err(|e| CliError::numeric(format!("smoother setup: {e}")))?;
    let opts = FitOptions {
        lambda1_grid: args.lambda1_grid.clone(),
        lambda2_grid: args.lambda2_grid.clone(),
        ..Default::default()
    };
    let fit = fit_plsm_with(&aspace, &ds, &y, &z_fit, &opts)
        .map_err(|e| CliError::numeric(format!("fit: {e}")))?;
    let report = inference::sandwich_cov(&fit, &ds, &z_fit, n)
        .map_err(|e| CliError::numeric(format!("inference: {e}")))?;

    // report beta on the original covariate scale
    let mut beta = fit.beta.to_vec();
    if let Some(scales) = &z_scales {
        for j in 0..p {
            beta[j] /= scales[j];
        }
    }
    // fitted values recomputed exactly as predict will: Zᵀβ̂ + α̂(X)
    let alpha_hat = basis::eval_spline(&aspace.space, &fit.gamma, &points)
        .map_err(|e| CliError::numeric(format!("surface evaluation: {e}")))?;
    let fitted: Vec<f64> = (0..n)
        .map(|i| {
            let lin: f64 = (0..p).map(|j| z[[i, j]] * beta[j]).sum();
            lin + alpha_hat[i].unwrap_or(f64::NAN)
        })
        .collect();

    if let Some(path) = &args.dump_gcv {
        let mut out = String::from("step,lambda,rss,trace_hat,gcv\n");
        for row in &fit.gcv_step0 {
            let _ = writeln!(out, "0,{},{},{},{}", row.lambda, row.rss, row.trace_hat, row.gcv);
        }
        for row in &fit.gcv_step2 {
            let _ = writeln!(out, "2,{},{},{},{}", row.lambda, row.rss, row.trace_hat, row.gcv);
        }
        std::fs::write(path, out)
            .map_err(|e| CliError::input(format!("write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.dump_path {
        let mut out = String::from("lambda2,df,rss,bic\n");
        for row in &fit.bic_table {
            let _ = writeln!(out, "{},{},{},{}", row.lambda2, row.df, row.rss, row.bic);
        }
        std::fs::write(path, out)
            .map_err(|e| CliError::input(format!("write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.surface_out {
        let (w, h) = parse_grid(&args.surface_grid)?;
        let csv = surface_csv(&aspace.space, &fit.gamma, w, h)
            .map_err(|e| CliError::numeric(format!("surface grid: {e}")))?;
        std::fs::write(path, csv)
            .map_err(|e| CliError::input(format!("write {}: {e}", path.display())))?;
    }

    let result = FitResult {
        mesh: aspace.space.mesh.to_json(),
        mesh_hash: aspace.key.clone(),
        d: args.d,
        r: args.r,
        y_col: args.y.clone(),
        z_cols: args.z.clone(),
        x_cols: args.x.clone(),
        beta,
        z_scales,
        active: fit.active.clone(),
        active_names: fit.active.iter().map(|&j| args.z[j].clone()).collect(),
        gamma: fit.gamma.to_vec(),
        lambda0: fit.lambda0,
        lambda1: fit.lambda1,
        lambda2: fit.lambda2,
        trace_hat: fit.trace_hat,
        rss: fit.rss,
        sigma2: report.sigma2,
        edf: report.edf,
        se: report.se,
        cov: report.cov,
        n,
        fitted,
    };
    let json = serde_json::to_string_pretty(&result)
        .map_err(|e| CliError::numeric(format!("serialize: {e}")))?;
    write_output(&args.out, &json)?;
    let _ = table.headers;
    Ok(())
}

fn parse_grid(spec: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = spec.split('x').collect();
    if parts.len() != 2 {
        return Err(CliError::input("grid spec must look like 180x80"));
    }
    let w: usize = parts[0]
        .parse()
        .map_err(|_| CliError::input("bad grid width"))?;
    let h: usize = parts[1]
        .parse()
        .map_err(|_| CliError::input("bad grid height"))?;
    if w < 2 || h < 2 {
        return Err(CliError::input("grid must be at least 2x2"));
    }
    Ok((w, h))
}

fn surface_csv(
    space: &SplineSpace,
    gamma: &Array1<f64>,
    w: usize,
    h: usize,
) -> Result<String, basis::BasisError> {
    let mesh = &space.mesh;
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        xmin = xmin.min(v.x);
        xmax = xmax.max(v.x);
        ymin = ymin.min(v.y);
        ymax = ymax.max(v.y);
    }
    let mut pts = Vec::with_capacity(w * h);
    for iy in 0..h {
        let y = ymin + (ymax - ymin) * iy as f64 / (h - 1) as f64;
        for ix in 0..w {
            let x = xmin + (xmax - xmin) * ix as f64 / (w - 1) as f64;
            pts.push(Point2::new(x, y));
        }
    }
    let vals = basis::eval_spline(space, gamma, &pts)?;
    let mut out = String::from("x,y,alpha\n");
    for (p, v) in pts.iter().zip(vals) {
        match v {
            Some(a) => {
                let _ = writeln!(out, "{},{},{a}", p.x, p.y);
            }
            None => {
                let _ = writeln!(out, "{},{},NA", p.x, p.y);
            }
        }
    }
    Ok(out)
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let model_text = std::fs::read_to_string(&args.model)
        .map_err(|e| CliError::input(format!("read {}: {e}", args.model.display())))?;
    let model: FitResult = serde_json::from_str(&model_text)
        .map_err(|e| CliError::input(format!("parse model JSON: {e}")))?;
    let mesh = model
        .mesh
        .clone()
        .build()
        .map_err(|e| CliError::input(format!("mesh in model: {e}")))?;
    if let Some(spec) = &args.mesh {
        let other = resolve_mesh(spec, &args.triangles)?;
        let key = space_key(&other, model.d, model.r);
        if key != model.mesh_hash {
            return Err(CliError::input(format!(
                "mesh hash mismatch: model was fit on {}, provided mesh hashes to {key}",
                model.mesh_hash
            )));
        }
    }
    let mut wanted: Vec<&str> = model.x_cols.iter().map(|s| s.as_str()).collect();
    wanted.extend(model.z_cols.iter().map(|s| s.as_str()));
    let table = read_table(&args.data, &wanted)?;
    let n = table.columns[0].len();
    let p = model.z_cols.len();
    let points: Vec<Point2> = (0..n)
        .map(|i| Point2::new(table.columns[0][i], table.columns[1][i]))
        .collect();
    let space = SplineSpace::new(mesh, model.d, model.r)
        .map_err(|e| CliError::input(format!("spline space: {e}")))?;
    let gamma = Array1::from_vec(model.gamma.clone());
    let alpha = basis::eval_spline(&space, &gamma, &points)
        .map_err(|e| CliError::numeric(format!("surface evaluation: {e}")))?;
    let mut out = String::from("x,y,alpha,prediction\n");
    for i in 0..n {
        match alpha[i] {
            Some(a) => {
                let lin: f64 = (0..p).map(|j| table.columns[2 + j][i] * model.beta[j]).sum();
                let _ = writeln!(out, "{},{},{a},{}", points[i].x, points[i].y, lin + a);
            }
            None => {
                let _ = writeln!(out, "{},{},NA,NA", points[i].x, points[i].y);
            }
        }
    }
    write_output(&args.out, &out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    }
    let mesh = resolve_mesh(&args.mesh, &args.triangles)?;
    let space = SplineSpace::new(mesh, args.d, args.r)
        .map_err(|e| CliError::input(format!("spline space: {e}")))?;
    let aspace = AssembledSpace::load_or_assemble(space, args.cache_dir.as_deref())
        .map_err(|e| CliError::numeric(format!("assembly: {e}")))?;
    let mut cfg = match args.example {
        ExampleArg::Horseshoe => SimConfig::horseshoe(args.n, args.rho, args.reps, args.seed),
        ExampleArg::CorrelatedNoise => SimConfig::correlated_noise(args.n, args.reps, args.seed),
    };
    cfg.sigma = args.sigma;
    cfg.oracle = args.oracle;
    if cfg.example == Example::Horseshoe {
        cfg.rho = args.rho;
    }
    cfg.validate()
        .map_err(|e| CliError::input(e.to_string()))?;
    let output = run_monte_carlo(&aspace, &cfg, &FitOptions::default())
        .map_err(|e| CliError::numeric(e.to_string()))?;
    if let Some(path) = &args.dump_reps {
        let mut out =
            String::from("replication,active,beta,se,lambda0,lambda1,lambda2,sigma2,rmse_alpha,error\n");
        for r in &output.records {
            let active = r
                .active
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let beta = r
                .beta
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let se = r
                .se
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.replication,
                active,
                beta,
                se,
                r.lambda0,
                r.lambda1,
                r.lambda2,
                r.sigma2,
                r.rmse_alpha,
                r.error.clone().unwrap_or_default()
            );
        }
        std::fs::write(path, out)
            .map_err(|e| CliError::input(format!("write {}: {e}", path.display())))?;
    }
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::numeric(format!("serialize: {e}")))?;
    write_output(&args.out, &json)
}

fn cmd_mesh_check(args: MeshCheckArgs) -> Result<(), CliError> {
    let mesh = resolve_mesh(&args.mesh.mesh, &args.mesh.triangles)?;
    let report = mesh.validate();
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::numeric(format!("serialize: {e}")))?;
    write_output(&args.out, &json)
}
