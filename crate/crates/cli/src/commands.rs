use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use c1quintic::assembly::{assemble, Discretization};
use c1quintic::bernstein::Vec2;
use c1quintic::mesh::{refine_uniform, CurvedTriangulation, TriClass};
use c1quintic::problems::{builtin_mesh, builtin_problem, ProblemId};
use c1quintic::solver::{linearize_ma, multilevel_run, NewtonOptions};
use c1quintic::space::{Locator, SplineFunction, SplineSpace};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::table::{write_csv, NormSource};

/// Options of `solve`. Every field can also be given in the `--config` file, whose values
/// take precedence over the command line.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// disk, ellipse-exp, ellipse-sin or c2-domain.
    #[arg(long)]
    pub problem: Option<String>,
    /// Number of levels, the first on the initial mesh [default: 4].
    #[arg(long)]
    pub levels: Option<usize>,
    /// Initial mesh file replacing the built-in one (same domain expected).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Which differences fill the norm columns [default: auto].
    #[arg(long, value_enum)]
    pub norms: Option<NormSource>,
    /// Newton stopping tolerance on the L² update.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// CSV table output (stdout when omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Full run report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Final-level solution as a spline file, for `export plot`.
    #[arg(long)]
    pub save_solution: Option<PathBuf>,
    /// Lattice samples of the final solution as x,y,value rows.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Lattice points per axis for `--plot` [default: 50].
    #[arg(long)]
    pub lattice: Option<usize>,
    /// Directory for the final Newton matrix and load vector in Matrix Market format.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
    /// JSON file with any of the options above (snake_case keys).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl SolveArgs {
    /// Fills every field set in `file` over `self`.
    fn overridden_by(self, file: SolveArgs) -> SolveArgs {
        SolveArgs {
            problem: file.problem.or(self.problem),
            levels: file.levels.or(self.levels),
            mesh: file.mesh.or(self.mesh),
            norms: file.norms.or(self.norms),
            tol: file.tol.or(self.tol),
            max_iter: file.max_iter.or(self.max_iter),
            out: file.out.or(self.out),
            report: file.report.or(self.report),
            save_solution: file.save_solution.or(self.save_solution),
            plot: file.plot.or(self.plot),
            lattice: file.lattice.or(self.lattice),
            dump_matrices: file.dump_matrices.or(self.dump_matrices),
            config: self.config,
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// A mesh file, or the name of a shipped mesh.
fn load_mesh(arg: &str) -> Result<CurvedTriangulation> {
    let path = Path::new(arg);
    if path.exists() {
        return CurvedTriangulation::load(path).with_context(|| format!("loading {arg}"));
    }
    builtin_mesh(arg).with_context(|| format!("{arg} is neither a file nor a built-in mesh"))
}

pub fn solve(args: SolveArgs) -> Result<()> {
    let args = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file: SolveArgs = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            args.overridden_by(file)
        }
        None => args,
    };
    let Some(name) = args.problem.as_deref() else {
        bail!("no problem given (--problem or \"problem\" in the config file)");
    };
    let id: ProblemId = name.parse()?;
    let mut problem = builtin_problem(id)?;
    if let Some(m) = &args.mesh {
        problem.mesh = CurvedTriangulation::load(m).with_context(|| format!("loading {}", m.display()))?;
    }
    let defaults = NewtonOptions::default();
    let opts = NewtonOptions {
        tol: args.tol.unwrap_or(defaults.tol),
        max_iter: args.max_iter.unwrap_or(defaults.max_iter),
        ..defaults
    };
    let levels = args.levels.unwrap_or(4);
    let (report, u) = multilevel_run(&problem, levels, &opts)?;
    write_csv(
        output(args.out.as_deref())?,
        &report,
        args.norms.unwrap_or(NormSource::Auto),
    )?;
    if let Some(p) = &args.report {
        serde_json::to_writer_pretty(output(Some(p))?, &report)?;
    }
    if let Some(p) = &args.save_solution {
        u.save(p)?;
    }
    if let Some(p) = &args.plot {
        write_lattice(&u, args.lattice.unwrap_or(50), output(Some(p))?)?;
    }
    if let Some(dir) = &args.dump_matrices {
        dump_newton_system(&u, &problem.g, dir, levels)?;
    }
    Ok(())
}

/// Newton matrix and load vector linearized at `u`.
fn dump_newton_system(u: &SplineFunction, g: &c1quintic::solver::ScalarField, dir: &Path, level: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let disc = Discretization::new(u.space.clone())?;
    let sys = assemble(&linearize_ma(u, g.clone()), &disc);
    let mut w = output(Some(&dir.join(format!("newton-level{level}.mtx"))))?;
    sys.matrix.write_matrix_market(&mut w)?;
    let mut w = output(Some(&dir.join(format!("load-level{level}.mtx"))))?;
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", sys.rhs.len())?;
    for v in &sys.rhs {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

/// `n × n` lattice over the bounding box of the domain; points outside are skipped.
fn write_lattice(u: &SplineFunction, n: usize, w: impl Write) -> Result<()> {
    if n < 2 {
        bail!("the lattice needs at least 2 points per axis");
    }
    let mesh = &u.space.mesh;
    let mut pts: Vec<Vec2> = mesh.vertices.clone();
    for t in mesh.triangles_of(TriClass::Pie) {
        for k in 0..=16 {
            pts.push(mesh.pie_point(t, 1.0, k as f64 / 16.0)?.0);
        }
    }
    let lo = pts.iter().fold(Vec2::repeat(f64::INFINITY), |a, p| a.inf(p));
    let hi = pts.iter().fold(Vec2::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
    let loc = Locator::new(u);
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["x", "y", "value"])?;
    for j in 0..n {
        for i in 0..n {
            let x = Vec2::new(
                lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
            );
            // the locator also accepts points just outside curved edges
            if let Some((t, b)) = loc.locate(x).ok().filter(|&(t, _)| mesh.contains(t, x).is_some()) {
                let v = u.patch(t).value_at(b);
                csv.write_record([format!("{:.6}", x.x), format!("{:.6}", x.y), format!("{v:.10e}")])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn export_plot(solution: &Path, lattice: usize, out: Option<&Path>) -> Result<()> {
    let u = SplineFunction::load(solution).with_context(|| format!("loading {}", solution.display()))?;
    write_lattice(&u, lattice, output(out)?)
}

pub fn validate(arg: &str) -> Result<()> {
    let m = CurvedTriangulation::load(arg).with_context(|| format!("{arg} is not a valid mesh"))?;
    println!(
        "{arg}: valid, {} vertices, {} triangles ({} pie, {} buffer)",
        m.n_vertices(),
        m.n_triangles(),
        m.triangles_of(TriClass::Pie).len(),
        m.triangles_of(TriClass::Buffer).len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    /// Mesh file or built-in mesh name (disk, ellipse, c2-domain).
    pub mesh: String,
    /// Number of refinements.
    #[arg(long, default_value_t = 1)]
    pub times: usize,
    /// Output mesh file (stdout when omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn refine(a: RefineArgs) -> Result<()> {
    let mut m = load_mesh(&a.mesh)?;
    for _ in 0..a.times {
        m = refine_uniform(&m)?;
    }
    serde_json::to_writer_pretty(output(a.out.as_deref())?, &m.to_file())?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// Mesh file or built-in mesh name (disk, ellipse, c2-domain).
    pub mesh: String,
    /// Uniform refinements applied first.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
struct SpaceInfo {
    vertices: usize,
    triangles: usize,
    dimension: usize,
    interior_vertex: usize,
    interior_edge: usize,
    tangent_boundary_vertex: usize,
    pie: usize,
    buffer: usize,
}

pub fn space_info(a: InfoArgs) -> Result<()> {
    let mut m = load_mesh(&a.mesh)?;
    for _ in 0..a.refine {
        m = refine_uniform(&m)?;
    }
    let space = Arc::new(SplineSpace::new(m)?);
    let c = space.mds.counts;
    let info = SpaceInfo {
        vertices: space.mesh.n_vertices(),
        triangles: space.mesh.n_triangles(),
        dimension: space.dim(),
        interior_vertex: c[0],
        interior_edge: c[1],
        tangent_boundary_vertex: c[2],
        pie: c[3],
        buffer: c[4],
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&info)?);
    } else {
        println!("vertices {}, triangles {}", info.vertices, info.triangles);
        println!("dimension {}", info.dimension);
        println!("  interior vertex          {}", info.interior_vertex);
        println!("  interior edge            {}", info.interior_edge);
        println!("  tangent boundary vertex  {}", info.tangent_boundary_vertex);
        println!("  pie                      {}", info.pie);
        println!("  buffer                   {}", info.buffer);
    }
    Ok(())
}
