//! Method-of-lines finite differences for the conservative form
//! `u_t = [(d1 + d11 u + d12 v) u]_xx + u (a1 − b1 u − c1 v)` (and for `v`)
//! on a cell-centered grid, with explicit RK4 in time.

mod config;

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{SimulateConfig, SimulateConfigError};

use crate::invariance::SKTSystem;
use crate::solutions::{eval_family, SolutionError, SolutionFamily};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid needs n >= 8 and x1 > x0")]
    BadGrid,
    #[error("non-finite state at step {step} (t = {time})")]
    Unstable { step: usize, time: f64, last: Box<GridState> },
    #[error("time step underflow ({0:e}) at t = {1}")]
    DtUnderflow(f64, f64),
    #[error("cfl factor must lie in (0, 1]")]
    BadCfl,
    #[error("parameter values: {0}")]
    Parameters(String),
    #[error(transparent)]
    Solution(#[from] SolutionError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub x0: f64,
    pub x1: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x0: f64, x1: f64, n: usize) -> Result<Grid1D, SimError> {
        if n < 8 || !(x1 > x0) {
            return Err(SimError::BadGrid);
        }
        Ok(Grid1D { x0, x1, n })
    }

    pub fn h(&self) -> f64 {
        (self.x1 - self.x0) / self.n as f64
    }

    /// Center of cell `i`; `i = -1` and `i = n` are the ghost cells.
    pub fn center(&self, i: isize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n as isize).map(|i| self.center(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub time: f64,
}

impl GridState {
    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> (f64, f64)) -> GridState {
        let (u, v) = grid.centers().into_iter().map(f).unzip();
        GridState { u, v, time: 0.0 }
    }

    pub fn from_family(grid: &Grid1D, sol: &SolutionFamily, t: f64) -> Result<GridState, SimError> {
        let mut u = Vec::with_capacity(grid.n);
        let mut v = Vec::with_capacity(grid.n);
        for x in grid.centers() {
            let (a, b) = eval_family(sol, t, x)?;
            u.push(a);
            v.push(b);
        }
        Ok(GridState { u, v, time: t })
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// `(Σ u h, Σ v h)`.
    pub fn mass(&self, h: f64) -> (f64, f64) {
        (self.u.iter().sum::<f64>() * h, self.v.iter().sum::<f64>() * h)
    }
}

#[derive(Clone, Debug)]
pub enum BCSpec {
    ZeroNeumann,
    Periodic,
    /// Ghost values taken from the exact family at the ghost centers.
    ExactDirichlet(Box<SolutionFamily>),
}

impl BCSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BCSpec::ZeroNeumann => "zero-neumann",
            BCSpec::Periodic => "periodic",
            BCSpec::ExactDirichlet(_) => "exact-dirichlet",
        }
    }
}

/// Second-difference stencil. `OneSided` averages the central differences at
/// cells `i` and `i+1`, i.e. it is centered half a cell off and only first
/// order; it is kept as a negative control for convergence studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    Central,
    OneSided,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_end: f64,
    /// Keep every `stride`-th step in the trajectory (the final state is
    /// always kept).
    pub stride: usize,
    pub stencil: Stencil,
    /// Stop after this many steps even if `t_end` is not reached.
    pub max_steps: Option<usize>,
}

impl SolverConfig {
    pub fn new(t_end: f64) -> SolverConfig {
        SolverConfig { cfl: 0.2, t_end, stride: usize::MAX, stencil: Stencil::Central, max_steps: None }
    }
}

/// Numeric coefficients in the order of [`crate::invariance::PARAM_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients(pub [f64; 12]);

impl Coefficients {
    pub fn from_system(sys: &SKTSystem, values: &std::collections::BTreeMap<String, f64>) -> Result<Coefficients, SimError> {
        let mut k = [0.0; 12];
        for (i, p) in sys.params.iter().enumerate() {
            k[i] = p.eval_numeric(values, 0.0).map_err(|e| SimError::Parameters(e.to_string()))?;
        }
        Ok(Coefficients(k))
    }

    fn potentials(&self, u: f64, v: f64) -> (f64, f64) {
        let [d1, d2, d11, d12, d21, d22, ..] = self.0;
        ((d1 + d11 * u + d12 * v) * u, (d2 + d21 * u + d22 * v) * v)
    }

    fn reactions(&self, u: f64, v: f64) -> (f64, f64) {
        let [_, _, _, _, _, _, a1, a2, b1, b2, c1, c2] = self.0;
        (u * (a1 - b1 * u - c1 * v), v * (a2 - b2 * u - c2 * v))
    }

    /// Bound on the entries of the diffusion matrix at one point.
    fn diffusivity(&self, u: f64, v: f64) -> f64 {
        let [d1, d2, d11, d12, d21, d22, ..] = self.0;
        (d1 + 2.0 * d11 * u + d12 * v)
            .abs()
            .max((d2 + d21 * u + 2.0 * d22 * v).abs())
            .max((d12 * u).abs())
            .max((d21 * v).abs())
    }
}

/// Values at cells `-2 ..= n+1` (two ghosts on each side).
fn extend(grid: &Grid1D, state: &GridState, bc: &BCSpec) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let n = grid.n;
    let mut u = vec![0.0; n + 4];
    let mut v = vec![0.0; n + 4];
    u[2..n + 2].copy_from_slice(&state.u);
    v[2..n + 2].copy_from_slice(&state.v);
    for g in [0usize, 1, n + 2, n + 3] {
        let i = g as isize - 2;
        let (a, b) = match bc {
            BCSpec::ZeroNeumann => {
                let m = if i < 0 { -1 - i } else { 2 * n as isize - 1 - i };
                (state.u[m as usize], state.v[m as usize])
            }
            BCSpec::Periodic => {
                let m = i.rem_euclid(n as isize) as usize;
                (state.u[m], state.v[m])
            }
            BCSpec::ExactDirichlet(sol) => eval_family(sol, state.time, grid.center(i))?,
        };
        u[g] = a;
        v[g] = b;
    }
    Ok((u, v))
}

/// Time derivatives of all cells.
pub fn discretize_rhs(
    k: &Coefficients,
    grid: &Grid1D,
    state: &GridState,
    bc: &BCSpec,
    stencil: Stencil,
) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let n = grid.n;
    let (ue, ve) = extend(grid, state, bc)?;
    let (p, q): (Vec<f64>, Vec<f64>) = ue.iter().zip(&ve).map(|(&a, &b)| k.potentials(a, b)).unzip();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let second = |f: &[f64], j: usize| match stencil {
        Stencil::Central => (f[j - 1] - 2.0 * f[j] + f[j + 1]) * inv_h2,
        Stencil::OneSided => 0.5 * (f[j - 1] - f[j] - f[j + 1] + f[j + 2]) * inv_h2,
    };
    let mut du = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for i in 0..n {
        let j = i + 2;
        let (ru, rv) = k.reactions(state.u[i], state.v[i]);
        du.push(second(&p, j) + ru);
        dv.push(second(&q, j) + rv);
    }
    Ok((du, dv))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub states: Vec<GridState>,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &GridState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Header `t,x,u,v`, one row per (sample time, cell).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,x,u,v\n");
        let xs = self.grid.centers();
        for st in &self.states {
            for (i, x) in xs.iter().enumerate() {
                s.push_str(&format!("{},{},{},{}\n", st.time, x, st.u[i], st.v[i]));
            }
        }
        s
    }
}

fn axpy(base: &GridState, dt: f64, d: &(Vec<f64>, Vec<f64>)) -> GridState {
    GridState {
        u: base.u.iter().zip(&d.0).map(|(a, b)| a + dt * b).collect(),
        v: base.v.iter().zip(&d.1).map(|(a, b)| a + dt * b).collect(),
        time: base.time + dt,
    }
}

/// Integrate with RK4 and `dt = cfl·h²/max diffusivity`, recomputed each step.
pub fn run(
    k: &Coefficients,
    grid: &Grid1D,
    init: GridState,
    bc: &BCSpec,
    config: &SolverConfig,
) -> Result<Trajectory, SimError> {
    if !(config.cfl > 0.0 && config.cfl <= 1.0) {
        return Err(SimError::BadCfl);
    }
    if !init.is_finite() {
        return Err(SimError::Unstable { step: 0, time: init.time, last: Box::new(init) });
    }
    let h2 = grid.h() * grid.h();
    let mut state = init;
    let mut states = vec![state.clone()];
    let mut steps = 0usize;
    let t_end = config.t_end;
    while state.time < t_end && config.max_steps.map_or(true, |m| steps < m) {
        let dmax = state.u.iter().zip(&state.v).map(|(&a, &b)| k.diffusivity(a, b)).fold(0.0, f64::max);
        let mut dt = if dmax > 0.0 { config.cfl * h2 / dmax } else { config.cfl * h2 };
        if config.max_steps.is_none() {
            dt = dt.min(t_end - state.time);
        }
        if dt < 1e-12 {
            if t_end - state.time < 1e-12 {
                break;
            }
            return Err(SimError::DtUnderflow(dt, state.time));
        }
        let k1 = discretize_rhs(k, grid, &state, bc, config.stencil)?;
        let s2 = axpy(&state, dt / 2.0, &k1);
        let k2 = discretize_rhs(k, grid, &s2, bc, config.stencil)?;
        let s3 = axpy(&state, dt / 2.0, &k2);
        let k3 = discretize_rhs(k, grid, &s3, bc, config.stencil)?;
        let s4 = axpy(&state, dt, &k3);
        let k4 = discretize_rhs(k, grid, &s4, bc, config.stencil)?;
        let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64], y: &[f64]| -> Vec<f64> {
            (0..y.len()).map(|i| y[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
        };
        let next = GridState {
            u: comb(&k1.0, &k2.0, &k3.0, &k4.0, &state.u),
            v: comb(&k1.1, &k2.1, &k3.1, &k4.1, &state.v),
            time: state.time + dt,
        };
        steps += 1;
        if !next.is_finite() {
            return Err(SimError::Unstable { step: steps, time: next.time, last: Box::new(state) });
        }
        state = next;
        if steps % config.stride.max(1) == 0 {
            states.push(state.clone());
        }
    }
    if states.last().map(|s| s.time) != Some(state.time) {
        states.push(state);
    }
    Ok(Trajectory { grid: *grid, states, steps })
}

/// Relative discrete L2 distance over both fields.
pub fn relative_l2(a: &GridState, b: &GridState) -> f64 {
    let num: f64 = a.u.iter().zip(&b.u).chain(a.v.iter().zip(&b.v)).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.u.iter().chain(&b.v).map(|y| y * y).sum();
    (num / den).sqrt()
}

#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    pub steps: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `log2(e(n)/e(2n))` for consecutive rows.
    pub orders: Vec<f64>,
    pub elapsed: Duration,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,rel_l2,steps,order\n");
        for (i, r) in self.rows.iter().enumerate() {
            let o = if i == 0 { String::new() } else { format!("{}", self.orders[i - 1]) };
            s.push_str(&format!("{},{:e},{},{}\n", r.n, r.error, r.steps, o));
        }
        s
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>6} {:>12} {:>8} {:>8}", "n", "rel L2", "steps", "order")?;
        for (i, r) in self.rows.iter().enumerate() {
            let o = if i == 0 { "-".to_string() } else { format!("{:.3}", self.orders[i - 1]) };
            write!(f, "\n{:>6} {:>12.4e} {:>8} {:>8}", r.n, r.error, r.steps, o)?;
        }
        Ok(())
    }
}

/// Run the exact family from `t = 0` to `t_end` on each grid (in parallel)
/// and compare with the exact values.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    sys: &SKTSystem,
    family: &SolutionFamily,
    x: (f64, f64),
    sizes: &[usize],
    t_end: f64,
    bc: &BCSpec,
    stencil: Stencil,
) -> Result<ConvergenceReport, SimError> {
    let start = Instant::now();
    let k = Coefficients::from_system(sys, &family.sample.params)?;
    let rows: Vec<ConvergenceRow> = sizes
        .par_iter()
        .map(|&n| {
            let t0 = Instant::now();
            let grid = Grid1D::new(x.0, x.1, n)?;
            let init = GridState::from_family(&grid, family, 0.0)?;
            let cfg = SolverConfig { stencil, ..SolverConfig::new(t_end) };
            let traj = run(&k, &grid, init, bc, &cfg)?;
            let exact = GridState::from_family(&grid, family, traj.last().time)?;
            Ok(ConvergenceRow { n, error: relative_l2(traj.last(), &exact), steps: traj.steps, elapsed: t0.elapsed() })
        })
        .collect::<Result<_, SimError>>()?;
    let orders = rows.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect();
    Ok(ConvergenceReport { rows, orders, elapsed: start.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(pairs: &[(usize, f64)]) -> Coefficients {
        let mut k = [0.0; 12];
        for (i, v) in pairs {
            k[*i] = *v;
        }
        Coefficients(k)
    }

    #[test]
    fn uniform_state_pure_diffusion() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        let s = GridState::from_fn(&g, |_| (2.0, 3.0));
        let k = coeffs(&[(3, 1.0), (4, 1.0)]);
        for bc in [BCSpec::ZeroNeumann, BCSpec::Periodic] {
            let (du, dv) = discretize_rhs(&k, &g, &s, &bc, Stencil::Central).unwrap();
            assert!(du.iter().chain(&dv).all(|x| *x == 0.0));
        }
    }

    #[test]
    fn uniform_state_reaction() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        let s = GridState::from_fn(&g, |_| (2.0, 3.0));
        // 3-1: d12 = d21 = 1, c1 = b2 = 1
        let k = coeffs(&[(3, 1.0), (4, 1.0), (10, 1.0), (9, 1.0)]);
        let (du, dv) = discretize_rhs(&k, &g, &s, &BCSpec::ZeroNeumann, Stencil::Central).unwrap();
        assert!(du.iter().chain(&dv).all(|x| *x == -6.0));
    }

    #[test]
    fn quartic_second_difference() {
        let k = coeffs(&[(3, 1.0)]);
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let g = Grid1D::new(0.0, 1.0, n).unwrap();
            let s = GridState::from_fn(&g, |x| (x * x, x * x));
            let (du, _) = discretize_rhs(&k, &g, &s, &BCSpec::Periodic, Stencil::Central).unwrap();
            let i = n / 2;
            let x = g.center(i as isize);
            errs.push((du[i] - 12.0 * x * x).abs());
        }
        // exact second difference of x^4 is 12x^2 + 2h^2
        assert!((errs[0] / errs[1] - 4.0).abs() < 1e-6, "{errs:?}");
    }

    #[test]
    fn zero_end_time_returns_initial_state() {
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        let s = GridState::from_fn(&g, |x| (x, 1.0));
        let t = run(&coeffs(&[(0, 1.0)]), &g, s.clone(), &BCSpec::ZeroNeumann, &SolverConfig::new(0.0)).unwrap();
        assert_eq!(t.states, vec![s]);
        assert_eq!(t.steps, 0);
    }

    #[test]
    fn uniform_data_follows_logistic_ode() {
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        let sys = crate::solutions::builtin_system("3-1").unwrap();
        let seed = crate::solutions::builtin_family("seed-3-5").unwrap();
        let k = Coefficients::from_system(&sys, &seed.sample.params).unwrap();
        let init = GridState::from_family(&g, &seed, 0.0).unwrap();
        for bc in [BCSpec::ZeroNeumann, BCSpec::Periodic, BCSpec::ExactDirichlet(Box::new(seed.clone()))] {
            let t = run(&k, &g, init.clone(), &bc, &SolverConfig::new(0.5)).unwrap();
            let exact = GridState::from_family(&g, &seed, 0.5).unwrap();
            assert!(relative_l2(t.last(), &exact) < 1e-10, "{}", bc.name());
            // exact ghosts differ from the interior by the time-stepping error
            let tol = if matches!(bc, BCSpec::ExactDirichlet(_)) { 1e-10 } else { 1e-13 };
            let u0 = t.last().u[0];
            let spread = t.last().u.iter().map(|x| (x - u0).abs()).fold(0.0, f64::max);
            assert!(spread < tol, "{} {spread:e}", bc.name());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Grid1D::new(0.0, 1.0, 4).is_err());
        assert!(Grid1D::new(1.0, 0.0, 16).is_err());
        let g = Grid1D::new(0.0, 1.0, 8).unwrap();
        let s = GridState::from_fn(&g, |_| (f64::NAN, 1.0));
        let r = run(&coeffs(&[]), &g, s, &BCSpec::Periodic, &SolverConfig::new(1.0));
        assert!(matches!(r, Err(SimError::Unstable { .. })));
    }
}
