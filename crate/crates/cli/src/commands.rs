use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hypflow_core::curvature::{alpha_curvature, angle_defect, gauss_bonnet_residual};
use hypflow_core::delaunay::{extended_curvature, is_weighted_delaunay, DEFAULT_TOLERANCE};
use hypflow_core::fixture::{generate, FixtureKind};
use hypflow_core::flows::{run_flow, FlowConfig, FlowKind, FlowStatus};
use hypflow_core::meshfile::{LoadedMesh, MeshFile, Target};
use hypflow_core::solver::{existence_precheck, newton_solve, SolveConfig, SolveStatus};

use crate::error::CliError;
use crate::RunArgs;

pub struct FlowOptions {
    pub kind: FlowKind,
    pub dt: f64,
    pub adaptive: bool,
    pub flip_log: Option<PathBuf>,
    pub surgery: bool,
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(fail)?;
    }
    std::fs::write(path, contents).map_err(fail)
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_output(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Parses `--target`: a number, or a file of numbers separated by
/// whitespace or commas (a JSON array also parses).
pub fn parse_target(spec: &str) -> Result<Target, CliError> {
    if let Ok(v) = spec.trim().parse::<f64>() {
        return Ok(Target::Uniform(v));
    }
    let text = std::fs::read_to_string(spec)
        .map_err(|e| CliError::Usage(format!("--target {spec:?} is neither a number nor a readable file: {e}")))?;
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | '[' | ']'))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad value {t:?} in target file {spec}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Target::PerVertex)
}

fn load(path: &Path) -> Result<(MeshFile, LoadedMesh), CliError> {
    let file = MeshFile::read(path)?;
    let loaded = file.load()?;
    Ok((file, loaded))
}

pub fn check(path: &Path) -> Result<(), CliError> {
    let file = MeshFile::read(path)?;
    let (tri, report) = file.validate()?;
    let mut out = String::new();
    writeln!(
        out,
        "vertices {}, edges {}, faces {}, euler characteristic {}",
        tri.num_vertices(),
        tri.num_edges(),
        tri.num_faces(),
        tri.euler_characteristic()
    )
    .unwrap();
    writeln!(out, "simplicial: {}", yes_no(tri.is_simplicial())).unwrap();
    writeln!(out, "admissible: {}", yes_no(report.inadmissible_faces.is_empty())).unwrap();
    for &f in &report.inadmissible_faces {
        writeln!(out, "  face {:?} violates a triangle inequality", tri.face_vertices(f)).unwrap();
    }
    writeln!(out, "separated: {}", yes_no(report.overlapping_edges.is_empty())).unwrap();
    for &(e, inv) in &report.overlapping_edges {
        let (a, b) = tri.endpoints(e);
        writeln!(out, "  edge {a}-{b} (id {}) has inversive distance {inv}", e.0).unwrap();
    }
    if !report.is_clean() {
        println!("{out}status: invalid");
        return Err(CliError::Validation(format!("{} failed validation", path.display())));
    }
    let loaded = file.load()?;
    let delaunay = is_weighted_delaunay(&loaded.class, &loaded.h, DEFAULT_TOLERANCE)?;
    let max_sum = delaunay.angle_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    writeln!(
        out,
        "weighted Delaunay: {} (largest angle sum {:.6} pi, {} violations)",
        yes_no(delaunay.is_delaunay()),
        max_sum / PI,
        delaunay.violations.len()
    )
    .unwrap();
    writeln!(out, "{}", gauss_bonnet_line(&loaded)?).unwrap();
    println!("{out}status: clean");
    Ok(())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn gauss_bonnet_line(mesh: &LoadedMesh) -> Result<String, CliError> {
    let residual = gauss_bonnet_residual(&mesh.class, &mesh.h).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(format!("gauss-bonnet residual: {residual:e}"))
}

pub fn curvature(path: &Path, alpha: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let (_, mesh) = load(path)?;
    let alpha = alpha.or(mesh.alpha).unwrap_or(0.0);
    let (k, class) = extended_curvature(&mesh.class, &mesh.h, DEFAULT_TOLERANCE)?;
    let r = alpha_curvature(&k, &mesh.h, alpha);
    let mut text = String::from("vertex,h,K,R_alpha\n");
    for (i, ((h, k), r)) in mesh.h.iter().zip(&k).zip(&r).enumerate() {
        writeln!(text, "{i},{h:e},{k:e},{r:e}").unwrap();
    }
    let chi = class.triangulation().euler_characteristic();
    writeln!(text, "# alpha {alpha}").unwrap();
    writeln!(text, "# sum K {:e}", k.iter().sum::<f64>()).unwrap();
    writeln!(text, "# 2 pi chi {:e}", 2.0 * PI * chi as f64).unwrap();
    writeln!(text, "# {}", gauss_bonnet_line(&mesh)?).unwrap();
    emit(out, &text)
}

pub fn fixture(
    kind: FixtureKind,
    seed: u64,
    alpha: Option<f64>,
    target: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let class = generate(kind, seed).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut file = MeshFile::from_class(&class, &class.reference_factor())?;
    file.alpha = alpha;
    if let Some(spec) = target {
        let t = parse_target(spec)?;
        t.expand(class.num_vertices())?;
        file.target = Some(t);
    }
    emit(out, &file.to_json())
}

/// Alpha and target for a run, from the command line or else the file.
fn resolve_problem(args: &RunArgs, mesh: &LoadedMesh, file: &MeshFile) -> Result<(f64, Vec<f64>, Target), CliError> {
    let alpha = args
        .alpha
        .or(mesh.alpha)
        .ok_or_else(|| CliError::Usage("no alpha given: pass --alpha or set \"alpha\" in the mesh".into()))?;
    let target = match &args.target {
        Some(spec) => parse_target(spec)?,
        None => file
            .target
            .clone()
            .ok_or_else(|| CliError::Usage("no target curvature given: pass --target or set \"target\" in the mesh".into()))?,
    };
    let expanded = target.expand(mesh.class.num_vertices())?;
    Ok((alpha, expanded, target))
}

/// Where a run writes one of its outputs. With several meshes `base` is a
/// directory and the file is named after the mesh.
fn output_path(base: Option<&Path>, mesh: &Path, multi: bool, ext: &str) -> Option<PathBuf> {
    let base = base?;
    if !multi {
        return Some(base.to_path_buf());
    }
    let stem = mesh.file_stem().map_or_else(|| "mesh".into(), |s| s.to_string_lossy().into_owned());
    Some(base.join(format!("{stem}.{ext}")))
}

/// Runs `job` on every mesh, at most `jobs` at a time, and prints the
/// reports in input order.
fn sweep<F>(args: &RunArgs, job: F) -> Result<(), CliError>
where
    F: Fn(&Path, bool) -> (String, Result<(), CliError>) + Sync,
{
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let multi = args.meshes.len() > 1;
    let mut results = Vec::with_capacity(args.meshes.len());
    for chunk in args.meshes.chunks(args.jobs) {
        let done: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|m| s.spawn(|| job(m, multi))).collect();
            handles.into_iter().map(|h| h.join().expect("run panicked")).collect()
        });
        results.extend(done);
    }
    let mut worst: Option<CliError> = None;
    for (path, (report, result)) in args.meshes.iter().zip(results) {
        print!("{report}");
        if let Err(e) = result {
            if multi {
                eprintln!("hypflow: {}: {e}", path.display());
            }
            if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                worst = Some(e);
            }
        }
    }
    match worst {
        Some(e) if multi => Err(CliError::from_code(e.exit_code(), "some runs failed".into())),
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn flow(args: &RunArgs, opts: &FlowOptions) -> Result<(), CliError> {
    sweep(args, |path, multi| {
        let mut report = String::new();
        let result = flow_one(args, opts, path, multi, &mut report);
        (report, result)
    })
}

fn precheck_line(report: &mut String, chi: i64, alpha: f64, target: &[f64]) -> Result<(), CliError> {
    let verdict = existence_precheck(chi, alpha, target)?;
    writeln!(report, "existence precheck: {verdict}").unwrap();
    Ok(())
}

fn flow_one(
    args: &RunArgs,
    opts: &FlowOptions,
    path: &Path,
    multi: bool,
    report: &mut String,
) -> Result<(), CliError> {
    writeln!(report, "mesh: {}", path.display()).unwrap();
    let (file, mesh) = load(path)?;
    let (alpha, target, target_spec) = resolve_problem(args, &mesh, &file)?;
    precheck_line(report, mesh.class.triangulation().euler_characteristic(), alpha, &target)?;

    let mut config = FlowConfig::new(alpha, target);
    config.dt = opts.dt;
    config.dt_min = config.dt_min.min(opts.dt);
    config.adaptive = opts.adaptive;
    config.surgery = opts.surgery;
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(n) = args.max_steps {
        config.max_steps = n;
    }
    let outcome = run_flow(&mesh.class, &mesh.h, &config, opts.kind)?;
    let trace = &outcome.trace;
    let last = trace.records.last().expect("trace has an initial record");
    writeln!(report, "flow: {:?}{}", opts.kind, if opts.surgery { "" } else { " (fixed triangulation)" }).unwrap();
    writeln!(report, "status: {}", flow_status(&outcome.status)).unwrap();
    writeln!(report, "steps: {} (rejected {})", trace.records.len() - 1, trace.rejected_steps).unwrap();
    writeln!(report, "time: {:e}", last.t).unwrap();
    writeln!(report, "sup error: {:e}", last.sup_err).unwrap();
    writeln!(report, "W increment: {:e}", last.w_increment).unwrap();
    writeln!(report, "flips: {}", trace.flips.len()).unwrap();
    if !opts.surgery {
        writeln!(report, "Delaunay violations: {}", trace.total_violations()).unwrap();
    }

    if let Some(p) = output_path(args.trace.as_deref(), path, multi, "csv") {
        write_output(&p, &trace.to_csv())?;
    }
    let flip_path = match &opts.flip_log {
        Some(base) => output_path(Some(base), path, multi, "flips.jsonl"),
        None if multi => output_path(args.trace.as_deref(), path, true, "flips.jsonl"),
        None => args.trace.as_ref().map(|t| t.with_extension("flips.jsonl")),
    };
    if let Some(p) = flip_path {
        write_output(&p, &trace.flip_log_jsonl())?;
    }
    if let Some(p) = output_path(args.out.as_deref(), path, multi, "json") {
        let mut out = MeshFile::from_class(&outcome.class, &outcome.h)?;
        out.alpha = Some(alpha);
        out.target = Some(target_spec);
        write_output(&p, &out.to_json())?;
    }
    match outcome.status {
        FlowStatus::Converged => Ok(()),
        other => Err(CliError::Numerical(format!("flow did not converge: {}", flow_status(&other)))),
    }
}

fn flow_status(s: &FlowStatus) -> String {
    match s {
        FlowStatus::Converged => "converged".into(),
        FlowStatus::MaxSteps => "step limit reached".into(),
        FlowStatus::MaxTime => "time limit reached".into(),
        FlowStatus::Failed(m) => format!("failed ({m})"),
    }
}

pub fn solve(args: &RunArgs) -> Result<(), CliError> {
    sweep(args, |path, multi| {
        let mut report = String::new();
        let result = solve_one(args, path, multi, &mut report);
        (report, result)
    })
}

fn solve_one(args: &RunArgs, path: &Path, multi: bool, report: &mut String) -> Result<(), CliError> {
    writeln!(report, "mesh: {}", path.display()).unwrap();
    let (file, mesh) = load(path)?;
    let (alpha, target, target_spec) = resolve_problem(args, &mesh, &file)?;
    precheck_line(report, mesh.class.triangulation().euler_characteristic(), alpha, &target)?;

    let mut config = SolveConfig::new(alpha, target);
    if let Some(eps) = args.eps {
        config.grad_tol = eps;
    }
    if let Some(n) = args.max_steps {
        config.max_iter = n;
    }
    let outcome = newton_solve(&mesh.class, &mesh.h, &config)?;
    let k = angle_defect(&outcome.class, &outcome.h).map_err(|e| CliError::Numerical(e.to_string()))?;
    let sup_err = alpha_curvature(&k, &outcome.h, alpha)
        .iter()
        .zip(&config.target)
        .map(|(r, t)| (r - t).abs())
        .fold(0.0, f64::max);
    writeln!(report, "solver: newton").unwrap();
    writeln!(
        report,
        "status: {}",
        match outcome.status {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "iteration limit reached",
        }
    )
    .unwrap();
    writeln!(report, "iterations: {}", outcome.iterations).unwrap();
    writeln!(report, "sup error: {sup_err:e}").unwrap();
    writeln!(report, "flips: {}", outcome.flips.len()).unwrap();

    if let Some(p) = output_path(args.trace.as_deref(), path, multi, "csv") {
        write_output(&p, &outcome.log_csv())?;
    }
    if let Some(p) = output_path(args.out.as_deref(), path, multi, "json") {
        let mut out = MeshFile::from_class(&outcome.class, &outcome.h)?;
        out.alpha = Some(alpha);
        out.target = Some(target_spec);
        write_output(&p, &out.to_json())?;
    }
    match outcome.status {
        SolveStatus::Converged => Ok(()),
        SolveStatus::MaxIterations => Err(CliError::Numerical("Newton iteration did not converge".into())),
    }
}
