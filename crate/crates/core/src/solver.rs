//! Backward Euler / Galerkin time stepping.
//!
//! Each step solves the coupled system for `(u^n, p^n)`
//!
//! ```text
//! [ A    -B      ] [u^n]   [ F^n                              ]
//! [ Bᵀ   C + τ D ] [p^n] = [ τ G^n + C p^{n-1} + Bᵀ u^{n-1}   ]
//! ```
//!
//! where `B` has displacement rows and pressure columns and the pressure
//! rows are scaled by the step `τ`. Dirichlet data are eliminated
//! symmetrically, and the factorization of the constrained matrix is cached
//! per step size.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;

use crate::error::{Error, Result};
use crate::forms::{self, MaterialParams};
use crate::mesh::{Mesh, Point};
use crate::problem::MpetProblem;
use crate::spaces::{interpolate, make_space, Field, Quadrature, Space};
use crate::sparse::SparseMatrix;

/// Discrete times `t_0 < t_1 < … < t_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    // nominal step sizes, kept exact for uniform grids so that every step
    // reuses the same factorization
    steps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<TimeGrid> {
        if times.len() < 2 {
            return Err(Error::InvalidArgument("a time grid needs at least two times".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let steps = times.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(TimeGrid { times, steps })
    }

    /// Uniform steps of size `tau` from `t0` to `end`; `end - t0` must be a
    /// multiple of `tau` up to rounding.
    pub fn uniform(t0: f64, end: f64, tau: f64) -> Result<TimeGrid> {
        if !(tau > 0.0) || !(end > t0) {
            return Err(Error::InvalidArgument(format!("invalid uniform grid t0 = {t0}, T = {end}, tau = {tau}")));
        }
        let ratio = (end - t0) / tau;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::InvalidArgument(format!("T - t0 = {} is not a multiple of tau = {tau}", end - t0)));
        }
        let n = n as usize;
        let mut times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * tau).collect();
        times[n] = end;
        let mut grid = TimeGrid::new(times)?;
        grid.steps.fill(tau);
        Ok(grid)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Step `τ_n = t_n − t_{n−1}` for `n ≥ 1`.
    pub fn step(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Coefficient vectors of `u_h^n` and `p_h^n` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

/// Polynomial degrees of the displacement and pressure spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Degrees {
    pub displacement: usize,
    pub pressure: usize,
}

impl Default for Degrees {
    /// Taylor–Hood: quadratic displacement, linear pressures.
    fn default() -> Self {
        Degrees { displacement: 2, pressure: 1 }
    }
}

/// Spaces and assembled matrices on one mesh.
#[derive(Debug)]
pub struct Discretization {
    pub space_u: Arc<Space>,
    pub space_p: Arc<Space>,
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub bt: SparseMatrix,
    pub c: SparseMatrix,
    pub d: SparseMatrix,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, params: &MaterialParams, degrees: Degrees) -> Result<Discretization> {
        let space_u = make_space(mesh.clone(), degrees.displacement, 2)?;
        let space_p = make_space(mesh, degrees.pressure, params.num_networks())?;
        let a = forms::assemble_a(&space_u, params)?;
        let b = forms::assemble_b(&space_u, &space_p, params)?;
        let bt = b.transpose();
        let c = forms::assemble_c(&space_p, params)?;
        let d = forms::assemble_d(&space_p, params)?;
        Ok(Discretization { space_u, space_p, a, b, bt, c, d })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space_u.mesh()
    }

    pub fn num_dofs(&self) -> usize {
        self.space_u.num_dofs() + self.space_p.num_dofs()
    }

    /// The unconstrained block matrix for step size `tau`.
    pub fn block_matrix(&self, tau: f64) -> SparseMatrix {
        let (nu, np) = (self.space_u.num_dofs(), self.space_p.num_dofs());
        let ctd = self.c.add_scaled(tau, &self.d);
        SparseMatrix::from_blocks(
            &[nu, np],
            &[nu, np],
            &[(0, 0, &self.a, 1.0), (0, 1, &self.b, -1.0), (1, 0, &self.bt, 1.0), (1, 1, &ctd, 1.0)],
        )
    }
}

struct Factored {
    full: SparseMatrix,
    lu: Lu<usize, f64>,
}

fn factor(full: SparseMatrix, fixed: &[bool], time: f64) -> Result<Factored> {
    let lu = full
        .eliminate(fixed)
        .to_faer()
        .sp_lu()
        .map_err(|e| Error::Solve { time, message: format!("sparse LU failed: {e:?}") })?;
    Ok(Factored { full, lu })
}

fn solve(f: &Factored, rhs: &[f64], time: f64) -> Result<Vec<f64>> {
    let x = f.lu.solve(&faer::Col::from_fn(rhs.len(), |i| rhs[i]));
    let x: Vec<f64> = (0..rhs.len()).map(|i| x[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve {
            time,
            message: "non-finite solution; the system is singular or badly conditioned".into(),
        });
    }
    Ok(x)
}

/// Time stepper for a fixed mesh.
pub struct MpetSolver<'a> {
    problem: &'a dyn MpetProblem,
    disc: Discretization,
    fixed_u: Vec<bool>,
    fixed: Vec<bool>,
    elasticity: Option<Factored>,
    factors: HashMap<u64, Factored>,
    reuse: bool,
}

impl<'a> MpetSolver<'a> {
    pub fn new(problem: &'a dyn MpetProblem, mesh: Arc<Mesh>, degrees: Degrees) -> Result<MpetSolver<'a>> {
        let disc = Discretization::new(mesh, problem.params(), degrees)?;
        let fixed_u = forms::boundary_mask(&disc.space_u);
        let mut fixed = fixed_u.clone();
        fixed.extend(forms::boundary_mask(&disc.space_p));
        Ok(MpetSolver { problem, disc, fixed_u, fixed, elasticity: None, factors: HashMap::new(), reuse: true })
    }

    /// Disables the factorization cache, refactoring at every step.
    pub fn without_factor_reuse(mut self) -> Self {
        self.reuse = false;
        self
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn space_u(&self) -> &Arc<Space> {
        &self.disc.space_u
    }

    pub fn space_p(&self) -> &Arc<Space> {
        &self.disc.space_p
    }

    pub fn problem(&self) -> &'a dyn MpetProblem {
        self.problem
    }

    /// Number of distinct step sizes factored so far.
    pub fn cached_factorizations(&self) -> usize {
        self.factors.len()
    }

    pub fn body_force_load(&self, t: f64) -> Vec<f64> {
        let pr = self.problem;
        forms::assemble_load(&self.disc.space_u, |x, t, o| o.copy_from_slice(&pr.body_force(x, t)), t)
    }

    pub fn fluid_source_load(&self, t: f64) -> Vec<f64> {
        let pr = self.problem;
        forms::assemble_load(&self.disc.space_p, |x, t, o| pr.fluid_source(x, t, o), t)
    }

    fn boundary_u(&self, t: f64) -> Vec<f64> {
        let pr = self.problem;
        forms::boundary_values(&self.disc.space_u, |x, t, o| o.copy_from_slice(&pr.displacement_boundary(x, t)), t)
    }

    fn boundary_p(&self, t: f64) -> Vec<f64> {
        let pr = self.problem;
        forms::boundary_values(&self.disc.space_p, |x, t, o| pr.pressure_boundary(x, t, o), t)
    }

    /// Interpolates the initial pressure.
    pub fn initial_pressure(&self, t0: f64) -> Field {
        let pr = self.problem;
        interpolate(|x, t, o| pr.initial_pressure(x, t, o), &self.disc.space_p, t0)
    }

    /// Solves `a(u0, v) = (f(t0), v) + b(v, p0)` with Dirichlet data at `t0`.
    pub fn solve_initial_displacement(&mut self, p0: &Field, t0: f64) -> Result<Field> {
        if !Arc::ptr_eq(p0.space(), &self.disc.space_p) {
            return Err(Error::InvalidArgument("initial pressure is not in the solver's pressure space".into()));
        }
        let mut rhs = self.body_force_load(t0);
        for (r, v) in rhs.iter_mut().zip(self.disc.b.mul_vec(p0.values())) {
            *r += v;
        }
        if self.elasticity.is_none() {
            self.elasticity = Some(factor(self.disc.a.clone(), &self.fixed_u, t0)?);
        }
        let f = self.elasticity.as_ref().unwrap();
        f.full.lift(&mut rhs, &self.fixed_u, &self.boundary_u(t0));
        let u = solve(f, &rhs, t0)?;
        Field::new(self.disc.space_u.clone(), u, t0)
    }

    /// `(u_h^0, p_h^0)` at `t0`.
    pub fn initial_state(&mut self, t0: f64) -> Result<State> {
        let p0 = self.initial_pressure(t0);
        let u0 = self.solve_initial_displacement(&p0, t0)?;
        Ok(State { t: t0, u: u0.into_values(), p: p0.into_values() })
    }

    /// Right-hand side of the step from `prev` to `prev.t + tau`, before
    /// boundary conditions.
    pub fn step_rhs(&self, prev: &State, tau: f64) -> Vec<f64> {
        let t = prev.t + tau;
        let mut rhs = self.body_force_load(t);
        let g = self.fluid_source_load(t);
        let cp = self.disc.c.mul_vec(&prev.p);
        let btu = self.disc.bt.mul_vec(&prev.u);
        rhs.extend((0..g.len()).map(|i| tau * g[i] + cp[i] + btu[i]));
        rhs
    }

    /// Advances `prev` by one step of size `tau`.
    pub fn step(&mut self, prev: &State, tau: f64) -> Result<State> {
        self.step_to(prev, tau, prev.t + tau)
    }

    /// Advances `prev` by `tau` to time `t`, which callers pass explicitly
    /// when they need it to hit a grid time exactly.
    pub fn step_to(&mut self, prev: &State, tau: f64, t: f64) -> Result<State> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
        }
        let mut rhs = self.step_rhs(prev, tau);
        // the loads above were evaluated at prev.t + tau; recompute at t when
        // rounding made them differ
        if t != prev.t + tau {
            let shifted = State { t: t - tau, ..prev.clone() };
            rhs = self.step_rhs(&shifted, tau);
        }
        let mut g = self.boundary_u(t);
        g.extend(self.boundary_p(t));
        let key = tau.to_bits();
        if !self.reuse {
            self.factors.clear();
        }
        if !self.factors.contains_key(&key) {
            let f = factor(self.disc.block_matrix(tau), &self.fixed, t)?;
            self.factors.insert(key, f);
        }
        let f = &self.factors[&key];
        f.full.lift(&mut rhs, &self.fixed, &g);
        let mut x = solve(f, &rhs, t)?;
        let p = x.split_off(self.disc.space_u.num_dofs());
        Ok(State { t, u: x, p })
    }

    /// Initial state followed by one step per grid interval.
    pub fn run(&mut self, grid: &TimeGrid) -> Result<Trajectory> {
        let mut states = vec![self.initial_state(grid.start())?];
        for n in 1..=grid.num_steps() {
            let next = self.step_to(&states[n - 1], grid.step(n), grid.times()[n])?;
            states.push(next);
        }
        Ok(self.trajectory(states))
    }

    pub fn trajectory(&self, states: Vec<State>) -> Trajectory {
        Trajectory { space_u: self.disc.space_u.clone(), space_p: self.disc.space_p.clone(), states }
    }

    /// Relative residuals of both discrete equations for the step
    /// `prev -> next`, with boundary rows excluded.
    pub fn step_residuals(&self, prev: &State, next: &State) -> (f64, f64) {
        let tau = next.t - prev.t;
        let shifted = State { t: next.t - tau, ..prev.clone() };
        let rhs = self.step_rhs(&shifted, tau);
        let full = self.disc.block_matrix(tau);
        let mut x = next.u.clone();
        x.extend_from_slice(&next.p);
        let ax = full.mul_vec(&x);
        let nu = self.disc.space_u.num_dofs();
        let rel = |range: std::ops::Range<usize>| {
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for i in range {
                if !self.fixed[i] {
                    num = num.max((ax[i] - rhs[i]).abs());
                    den = den.max(rhs[i].abs());
                }
            }
            num / den.max(f64::MIN_POSITIVE)
        };
        (rel(0..nu), rel(nu..x.len()))
    }
}

/// Discrete solutions at every time level on a fixed mesh.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub space_u: Arc<Space>,
    pub space_p: Arc<Space>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn displacement(&self, n: usize) -> Field {
        let s = &self.states[n];
        Field::new(self.space_u.clone(), s.u.clone(), s.t).expect("state matches space")
    }

    pub fn pressure(&self, n: usize) -> Field {
        let s = &self.states[n];
        Field::new(self.space_p.clone(), s.p.clone(), s.t).expect("state matches space")
    }

    /// Writes the checkpoint format: a header line, then per time level a
    /// line `step <n> <t> <len u> <len p>` followed by one line of
    /// displacement and one line of pressure coefficients.
    pub fn write_ascii<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# trajectory {} levels", self.states.len())?;
        for (n, s) in self.states.iter().enumerate() {
            writeln!(w, "step {n} {:e} {} {}", s.t, s.u.len(), s.p.len())?;
            let line = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
            writeln!(w, "{}", line(&s.u))?;
            writeln!(w, "{}", line(&s.p))?;
        }
        Ok(())
    }

    /// Reads states written by [`Trajectory::write_ascii`].
    pub fn read_states<R: BufRead>(r: R) -> Result<Vec<State>> {
        let bad = |m: &str| Error::InvalidArgument(format!("malformed trajectory: {m}"));
        let mut lines = r.lines().filter(|l| l.as_ref().map(|l| !l.starts_with('#')).unwrap_or(true));
        let mut states = Vec::new();
        while let Some(head) = lines.next() {
            let head = head?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            if parts.len() != 5 || parts[0] != "step" {
                return Err(bad("expected a step header"));
            }
            let t: f64 = parts[2].parse().map_err(|_| bad("time"))?;
            let (nu, np): (usize, usize) =
                (parts[3].parse().map_err(|_| bad("length"))?, parts[4].parse().map_err(|_| bad("length"))?);
            let mut read = |n: usize| -> Result<Vec<f64>> {
                let l = lines.next().ok_or_else(|| bad("truncated"))??;
                let v: Vec<f64> =
                    l.split_whitespace().map(|x| x.parse().map_err(|_| bad("value"))).collect::<Result<_>>()?;
                if v.len() != n {
                    return Err(bad("length mismatch"));
                }
                Ok(v)
            };
            let u = read(nu)?;
            let p = read(np)?;
            states.push(State { t, u, p });
        }
        Ok(states)
    }
}

/// Darcy velocity `v_j = −κ_j ∇p_j` of one network, evaluated cellwise.
#[derive(Clone, Debug)]
pub struct DarcyVelocity {
    pressure: Field,
    network: usize,
    kappa: f64,
}

pub fn darcy_velocity(pressure: &Field, params: &MaterialParams, network: usize) -> Result<DarcyVelocity> {
    if network >= params.num_networks() || pressure.space().components() != params.num_networks() {
        return Err(Error::InvalidArgument(format!(
            "network {network} out of range for {} networks",
            params.num_networks()
        )));
    }
    Ok(DarcyVelocity { pressure: pressure.clone(), network, kappa: params.kappa[network] })
}

impl DarcyVelocity {
    /// Velocity on `cell` at reference point `xi`.
    pub fn eval(&self, cell: usize, xi: Point) -> Result<Point> {
        let g = self.pressure.evaluate(cell, &[xi])?[0].gradient[self.network];
        Ok([-self.kappa * g[0], -self.kappa * g[1]])
    }

    pub fn l2_norm(&self) -> f64 {
        let mesh = self.pressure.space().mesh();
        let quad = Quadrature::triangle(2 * self.pressure.space().degree());
        let mut sum = 0.0;
        for k in 0..mesh.num_cells() {
            let area = mesh.cell_geometry(k).expect("valid cell").area;
            let vals = self.pressure.evaluate(k, &quad.points).expect("valid cell");
            for (pv, w) in vals.iter().zip(&quad.weights) {
                let g = pv.gradient[self.network];
                sum += 2.0 * area * w * self.kappa * self.kappa * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        sum.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::problem::{FnProblem, Manufactured};

    fn zero_problem() -> impl MpetProblem {
        FnProblem {
            params: Manufactured::default_params(),
            body_force: |_, _| [0.0, 0.0],
            fluid_source: |_, _, o: &mut [f64]| o.fill(0.0),
            displacement_boundary: |_, _| [0.0, 0.0],
            pressure_boundary: |_, _, o: &mut [f64]| o.fill(0.0),
        }
    }

    #[test]
    fn time_grids() {
        let g = TimeGrid::uniform(0.0, 0.4, 0.1).unwrap();
        assert_eq!(g.num_steps(), 4);
        assert_eq!(g.end(), 0.4);
        assert!((g.step(3) - 0.1).abs() < 1e-15);
        assert!(TimeGrid::uniform(0.0, 0.4, 0.3).is_err());
        assert!(TimeGrid::uniform(0.0, 0.4, 0.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.2, 0.2]).is_err());
        assert!(TimeGrid::new(vec![0.0]).is_err());
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let pr = zero_problem();
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let mut s = MpetSolver::new(&pr, mesh, Degrees::default()).unwrap();
        let traj = s.run(&TimeGrid::uniform(0.0, 0.3, 0.1).unwrap()).unwrap();
        assert_eq!(traj.len(), 4);
        for st in &traj.states {
            assert!(st.u.iter().chain(&st.p).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn manufactured_steps_satisfy_the_discrete_equations() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(4).unwrap());
        let mut s = MpetSolver::new(&pr, mesh, Degrees::default()).unwrap();
        let traj = s.run(&TimeGrid::uniform(0.0, 0.4, 0.1).unwrap()).unwrap();
        // f, p and the boundary data all vanish at t = 0
        assert!(traj.states[0].u.iter().all(|v| v.abs() < 1e-12));
        for n in 1..traj.len() {
            let (ru, rp) = s.step_residuals(&traj.states[n - 1], &traj.states[n]);
            assert!(ru < 1e-9 && rp < 1e-9, "step {n}: {ru:e} {rp:e}");
        }
        assert_eq!(s.cached_factorizations(), 1);
    }

    #[test]
    fn factor_reuse_is_bitwise_identical() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(4).unwrap());
        let grid = TimeGrid::uniform(0.0, 0.4, 0.1).unwrap();
        let a = MpetSolver::new(&pr, mesh.clone(), Degrees::default()).unwrap().run(&grid).unwrap();
        let b = MpetSolver::new(&pr, mesh, Degrees::default()).unwrap().without_factor_reuse().run(&grid).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn single_step_run_equals_step() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let mut s = MpetSolver::new(&pr, mesh, Degrees::default()).unwrap();
        let traj = s.run(&TimeGrid::uniform(0.0, 0.2, 0.2).unwrap()).unwrap();
        let s0 = s.initial_state(0.0).unwrap();
        let s1 = s.step(&s0, 0.2).unwrap();
        assert_eq!(traj.states[1], s1);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let pr = Manufactured::new(Manufactured::default_params());
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let mut s = MpetSolver::new(&pr, mesh, Degrees::default()).unwrap();
        let traj = s.run(&TimeGrid::uniform(0.0, 0.2, 0.1).unwrap()).unwrap();
        let mut buf = Vec::new();
        traj.write_ascii(&mut buf).unwrap();
        let states = Trajectory::read_states(&buf[..]).unwrap();
        assert_eq!(states, traj.states);
        assert!(Trajectory::read_states(&b"step 0 0.0 2 1\n1 2\n"[..]).is_err());
    }

    #[test]
    fn darcy_velocities() {
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let mut params = MaterialParams::uniform(1.0, 1.0, 2, 0.5, 1.0, 1.0, 0.0).unwrap();
        params.kappa[0] = 2.0;
        let sp = make_space(mesh.clone(), 1, 2).unwrap();
        let p = interpolate(|x, _, o| o.copy_from_slice(&[x[0], 3.0]), &sp, 0.0);
        let v0 = darcy_velocity(&p, &params, 0).unwrap();
        let v1 = darcy_velocity(&p, &params, 1).unwrap();
        for k in 0..mesh.num_cells() {
            let v = v0.eval(k, [0.2, 0.2]).unwrap();
            assert!((v[0] + 2.0).abs() < 1e-12 && v[1].abs() < 1e-12);
            let w = v1.eval(k, [0.2, 0.2]).unwrap();
            assert!(w[0].abs() < 1e-12 && w[1].abs() < 1e-12);
        }
        // ‖v‖² = ∫ κ² |∇x|² = 4
        assert!((v0.l2_norm() - 2.0).abs() < 1e-12);
        assert!(darcy_velocity(&p, &params, 2).is_err());
    }
}
