//! Newton–Galerkin iteration for `det ∇²u = g` with `u = 0` on the boundary, and the
//! multilevel driver with convergence tables.

use std::sync::Arc;

use nalgebra::Matrix2;
use serde::Serialize;

use crate::assembly::{
    assemble, difference_norms, error_norms, residual_norm, spline_difference_norms, Discretization,
    LinearEllipticProblem, Norms, PointCoefficients,
};
use crate::bernstein::{Jet2, Vec2};
use crate::error::{Error, Result};
use crate::mesh::{refine_uniform, CurvedTriangulation};
use crate::space::{transfer, SplineFunction, SplineSpace};

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type JetField = Arc<dyn Fn(Vec2) -> Jet2 + Send + Sync>;

/// Cofactor of a symmetric 2×2 matrix.
pub fn cofactor(h: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(h[(1, 1)], -h[(0, 1)], -h[(1, 0)], h[(0, 0)])
}

/// `det ∇²u = g` on a triangulated conic domain with homogeneous boundary data.
#[derive(Clone)]
pub struct MongeAmpereProblem {
    pub name: String,
    pub mesh: CurvedTriangulation,
    pub g: ScalarField,
    pub exact: Option<JetField>,
}

impl std::fmt::Debug for MongeAmpereProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MongeAmpereProblem")
            .field("name", &self.name)
            .field("triangles", &self.mesh.n_triangles())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonOptions {
    /// Stop once `‖u_k − u_{k+1}‖_{L²}` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Updates below `stagnation · ‖u_k‖_{L²}` that fail to shrink by half are treated as
    /// round-off and end the iteration.
    pub stagnation: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-15,
            max_iter: 20,
            stagnation: 1e-11,
        }
    }
}

/// The Newton system at `u`: `A = cof ∇²u`, load `g − det ∇²u`. Its Galerkin solution
/// `w` gives the next iterate `u − w`.
pub fn linearize_ma(u: &SplineFunction, g: ScalarField) -> LinearEllipticProblem {
    let u = u.clone();
    LinearEllipticProblem::new(true, move |t, q| {
        let h = u.patch(t).jet_at(q.bary).hess;
        PointCoefficients {
            a: cofactor(&h),
            f: g(q.x) - h.determinant(),
            ..Default::default()
        }
    })
}

/// Smallest eigenvalue of `cof ∇²u` over the quadrature points (negative means the
/// linearized problem is not elliptic there).
pub fn ellipticity_monitor(disc: &Discretization, u: &SplineFunction) -> f64 {
    let mut lo = f64::INFINITY;
    for (t, rule) in disc.rules.iter().enumerate() {
        let p = u.patch(t);
        for q in rule {
            let h = cofactor(&p.jet_at(q.bary).hess);
            let (a, b, c) = (h[(0, 0)], h[(0, 1)], h[(1, 1)]);
            let m = 0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt();
            lo = lo.min(m);
        }
    }
    lo
}

/// Galerkin solution of `Δu = 2√g`, `u = 0` on the boundary.
pub fn poisson_initial_guess(disc: &Discretization, g: ScalarField) -> Result<SplineFunction> {
    let p = LinearEllipticProblem::from_fields(true, move |x| {
        let gx = g(x);
        PointCoefficients {
            a: Matrix2::identity(),
            f: -2.0 * gx.max(0.0).sqrt(),
            ..Default::default()
        }
    });
    let sys = assemble(&p, disc);
    let sol = disc.solve(&sys)?;
    SplineFunction::new(disc.space.clone(), sol.x)
}

#[derive(Clone, Debug)]
pub struct NewtonState {
    pub u: SplineFunction,
    pub k: usize,
    pub updates: Vec<f64>,
    pub diverged: bool,
}

impl NewtonState {
    pub fn new(u: SplineFunction) -> Self {
        Self {
            u,
            k: 0,
            updates: Vec::new(),
            diverged: false,
        }
    }

    pub fn last_update(&self) -> Option<f64> {
        self.updates.last().copied()
    }
}

fn l2_norm(disc: &Discretization, s: &SplineFunction) -> f64 {
    difference_norms(disc, |t, q| s.patch(t).jet_at(q.bary), |_, _| Jet2::zero()).l2
}

/// One Newton step; the recorded update is `‖u_k − u_{k+1}‖_{L²}`.
pub fn newton_step(disc: &Discretization, state: NewtonState, g: ScalarField) -> Result<NewtonState> {
    let lin = linearize_ma(&state.u, g);
    let sys = assemble(&lin, disc);
    let sol = disc.solve(&sys)?;
    let w = SplineFunction::new(disc.space.clone(), sol.x)?;
    let dofs: Vec<f64> = state.u.dofs.iter().zip(&w.dofs).map(|(u, w)| u - w).collect();
    let u = SplineFunction::new(disc.space.clone(), dofs)?;
    let mut updates = state.updates;
    updates.push(l2_norm(disc, &w));
    let n = updates.len();
    let diverged = state.diverged || (n >= 4 && (n - 3..n).all(|i| updates[i] > updates[i - 1]));
    log::debug!(
        "newton step {}: update {:e}, solve residual {:e}",
        state.k + 1,
        updates[n - 1],
        sol.relative_residual
    );
    Ok(NewtonState {
        u,
        k: state.k + 1,
        updates,
        diverged,
    })
}

/// Newton iteration on one level until the update norm drops below `opts.tol`, stagnates
/// at round-off, diverges, or `opts.max_iter` is reached.
pub fn newton_solve(
    disc: &Discretization,
    u0: SplineFunction,
    g: ScalarField,
    opts: &NewtonOptions,
) -> Result<NewtonState> {
    let mut st = NewtonState::new(u0);
    while st.k < opts.max_iter {
        st = newton_step(disc, st, g.clone())?;
        let upd = st.last_update().unwrap();
        if upd < opts.tol || st.diverged {
            break;
        }
        let scale = l2_norm(disc, &st.u);
        let prev = st.updates.iter().rev().nth(1).copied();
        if upd < opts.stagnation * scale && prev.is_some_and(|p| upd > 0.5 * p) {
            break;
        }
    }
    Ok(st)
}

/// Number of Newton updates larger than the round-off floor `stagnation · ‖u‖_{L²}` (at
/// least 1): the iterations that changed the solution beyond working precision.
pub fn effective_iterations(updates: &[f64], scale: f64, opts: &NewtonOptions) -> usize {
    let floor = opts.tol.max(opts.stagnation * scale);
    updates.iter().filter(|&&u| u >= floor).count().max(1)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub dim: usize,
    pub triangles: usize,
    /// Newton iterations counted by [`effective_iterations`].
    pub iterations: usize,
    /// All Newton steps performed.
    pub steps: usize,
    pub updates: Vec<f64>,
    /// Error against the exact solution, when known.
    pub error: Option<Norms>,
    /// Difference to the next level's solution.
    pub eps: Option<Norms>,
    pub residual: f64,
    pub min_cofactor_eigenvalue: f64,
    pub diverged: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunReport {
    pub problem: String,
    /// Errors of the Poisson initial guess on level 1.
    pub init_error: Option<Norms>,
    pub init_residual: f64,
    pub levels: Vec<LevelReport>,
}

/// `log₂(a / b)`, or `None` when either is missing or not positive.
pub fn rate(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
        _ => None,
    }
}

struct LevelResult {
    disc: Discretization,
    u: SplineFunction,
    report: LevelReport,
}

fn run_level(
    problem: &MongeAmpereProblem,
    level: usize,
    mesh: CurvedTriangulation,
    prev: Option<&SplineFunction>,
    opts: &NewtonOptions,
    run: &mut RunReport,
) -> Result<LevelResult> {
    let space = Arc::new(SplineSpace::new(mesh)?);
    let disc = Discretization::new(space.clone())?;
    let u0 = match prev {
        None => {
            let u0 = poisson_initial_guess(&disc, problem.g.clone())?;
            run.init_residual = residual_norm(&disc, &u0, |x| (problem.g)(x));
            run.init_error = problem.exact.as_ref().map(|e| error_norms(&disc, &u0, |x| e(x)));
            u0
        }
        Some(p) => transfer(p, &space)?,
    };
    let st = newton_solve(&disc, u0, problem.g.clone(), opts)?;
    let scale = l2_norm(&disc, &st.u);
    let report = LevelReport {
        level,
        dim: space.dim(),
        triangles: space.mesh.n_triangles(),
        iterations: effective_iterations(&st.updates, scale, opts),
        steps: st.k,
        updates: st.updates.clone(),
        error: problem.exact.as_ref().map(|e| error_norms(&disc, &st.u, |x| e(x))),
        eps: None,
        residual: residual_norm(&disc, &st.u, |x| (problem.g)(x)),
        min_cofactor_eigenvalue: ellipticity_monitor(&disc, &st.u),
        diverged: st.diverged,
    };
    if st.diverged {
        log::warn!("{} level {level}: Newton iteration diverged", problem.name);
    }
    log::info!(
        "{} level {level}: dim {}, {} steps, residual {:e}",
        problem.name,
        report.dim,
        report.steps,
        report.residual
    );
    Ok(LevelResult { disc, u: st.u, report })
}

/// Runs levels `1..=levels`, each on the uniform refinement of the previous mesh. Level 1
/// starts from the Poisson guess, later levels from the transferred previous solution.
/// `ε_ℓ = u_ℓ − u_{ℓ+1}` is filled in for all but the last level. Returns the report and
/// the last level's solution.
pub fn multilevel_run(
    problem: &MongeAmpereProblem,
    levels: usize,
    opts: &NewtonOptions,
) -> Result<(RunReport, SplineFunction)> {
    if levels == 0 {
        return Err(Error::Input("at least one level is required".into()));
    }
    let mut run = RunReport {
        problem: problem.name.clone(),
        ..Default::default()
    };
    let mut mesh = problem.mesh.clone();
    let mut prev: Option<LevelResult> = None;
    for level in 1..=levels {
        if level > 1 {
            mesh = refine_uniform(&mesh)?;
        }
        let cur = run_level(
            problem,
            level,
            mesh.clone(),
            prev.as_ref().map(|p| &p.u),
            opts,
            &mut run,
        )?;
        if let Some(mut p) = prev.take() {
            p.report.eps = Some(spline_difference_norms(&cur.disc, &cur.u, &p.u));
            run.levels.push(p.report);
        }
        prev = Some(cur);
    }
    let last = prev.expect("at least one level");
    run.levels.push(last.report);
    Ok((run, last.u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::ring_disk;

    #[test]
    fn cofactor_of_symmetric_matrix() {
        let h = Matrix2::new(3.0, -1.0, -1.0, 2.0);
        assert_eq!(cofactor(&h), Matrix2::new(2.0, 1.0, 1.0, 3.0));
        assert_eq!(
            cofactor(&Matrix2::new(0.0, 1.0, 1.0, 0.0)),
            Matrix2::new(0.0, -1.0, -1.0, 0.0)
        );
    }

    #[test]
    fn poisson_guess_for_unit_density_is_the_paraboloid() {
        let disc = Discretization::new(Arc::new(SplineSpace::new(ring_disk(8)).unwrap())).unwrap();
        let u = poisson_initial_guess(&disc, Arc::new(|_| 1.0)).unwrap();
        let e = error_norms(&disc, &u, |x| Jet2 {
            value: 0.5 * (x.norm_squared() - 1.0),
            grad: x,
            hess: Matrix2::identity(),
        });
        assert!(e.l2 < 1e-9, "{e:?}");
    }

    #[test]
    fn zero_density_gives_zero_guess() {
        let disc = Discretization::new(Arc::new(SplineSpace::new(ring_disk(8)).unwrap())).unwrap();
        let u = poisson_initial_guess(&disc, Arc::new(|_| 0.0)).unwrap();
        assert!(u.dofs.iter().all(|&d| d.abs() < 1e-14));
    }

    #[test]
    fn rates_use_base_two_logarithm() {
        assert_eq!(rate(Some(8.0), Some(1.0)), Some(3.0));
        assert_eq!(rate(None, Some(1.0)), None);
        assert_eq!(rate(Some(0.0), Some(1.0)), None);
    }
}
