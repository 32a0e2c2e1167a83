//! `[simulate]` configuration blocks.
//!
//! ```text
//! [simulate]
//! system = 3-2
//! grid.x0 = 0
//! grid.x1 = 3.141592653589793
//! grid.n = 128
//! bc = zero-neumann
//! cfl = 0.2
//! t_end = 0.2
//! init = family-3-7
//! params = alpha1 = 1, alpha2 = 0.5, p = 0.1, lambda1 = 1, lambda2 = 0
//! stride = 100
//! ```
//!
//! `init` is a family id or a pair `u-expression; v-expression` in `x`.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{BCSpec, Coefficients, Grid1D, GridState, SimError, SolverConfig};
use crate::catalog::{list, parse_ini, IniError};
use crate::expr::{eval_ast, parse_ast, Ast, AstEnv};
use crate::solutions::{builtin_family, builtin_system, SolutionFamily};

#[derive(Debug, Error)]
pub enum SimulateConfigError {
    #[error(transparent)]
    Ini(#[from] IniError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug)]
pub enum Init {
    Family(Box<SolutionFamily>),
    Pair(Ast, Ast),
}

#[derive(Clone, Debug)]
pub struct SimulateConfig {
    pub system: String,
    pub grid: Grid1D,
    pub bc: BCSpec,
    pub solver: SolverConfig,
    pub init: Init,
    pub params: BTreeMap<String, f64>,
}

fn num(s: &BTreeMap<&str, &str>, key: &str, default: Option<f64>) -> Result<f64, SimulateConfigError> {
    match s.get(key) {
        Some(v) => v.parse().map_err(|_| SimulateConfigError::Invalid(format!("'{key}' is not a number: {v}"))),
        None => default.ok_or_else(|| SimulateConfigError::Invalid(format!("missing key '{key}'"))),
    }
}

impl SimulateConfig {
    pub fn parse(text: &str) -> Result<SimulateConfig, SimulateConfigError> {
        let sections = parse_ini(text)?;
        let sec = sections
            .iter()
            .find(|s| s.name == "simulate")
            .ok_or_else(|| SimulateConfigError::Invalid("no [simulate] section".into()))?;
        let map: BTreeMap<&str, &str> = sec.entries.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let mut params = BTreeMap::new();
        for item in list(map.get("params").copied().unwrap_or("")) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| SimulateConfigError::Invalid(format!("bad parameter '{item}'")))?;
            let v: f64 =
                v.trim().parse().map_err(|_| SimulateConfigError::Invalid(format!("bad value in '{item}'")))?;
            params.insert(k.trim().to_string(), v);
        }
        let n = num(&map, "grid.n", None)?;
        if n.fract() != 0.0 || n < 0.0 {
            return Err(SimulateConfigError::Invalid("grid.n must be a positive integer".into()));
        }
        let grid = Grid1D::new(num(&map, "grid.x0", None)?, num(&map, "grid.x1", None)?, n as usize)?;
        let init_text = map.get("init").ok_or_else(|| SimulateConfigError::Invalid("missing key 'init'".into()))?;
        let init = if let Some((u, v)) = init_text.split_once(';') {
            let p = |s: &str| parse_ast(s.trim()).map_err(|e| SimulateConfigError::Invalid(format!("init: {e}")));
            Init::Pair(p(u)?, p(v)?)
        } else {
            let mut f = builtin_family(init_text.trim()).map_err(|e| SimulateConfigError::Invalid(e.to_string()))?;
            for (k, v) in &params {
                f.sample.params.insert(k.clone(), *v);
            }
            Init::Family(Box::new(f))
        };
        let bc = match map.get("bc").copied().unwrap_or("zero-neumann") {
            "zero-neumann" => BCSpec::ZeroNeumann,
            "periodic" => BCSpec::Periodic,
            "exact-dirichlet" => match &init {
                Init::Family(f) => BCSpec::ExactDirichlet(f.clone()),
                Init::Pair(..) => {
                    return Err(SimulateConfigError::Invalid("exact-dirichlet needs a solution family as init".into()))
                }
            },
            other => return Err(SimulateConfigError::Invalid(format!("unknown bc '{other}'"))),
        };
        let system = match (map.get("system"), &init) {
            (Some(s), _) => s.to_string(),
            (None, Init::Family(f)) => f.system.clone(),
            (None, Init::Pair(..)) => return Err(SimulateConfigError::Invalid("missing key 'system'".into())),
        };
        let mut solver = SolverConfig::new(num(&map, "t_end", None)?);
        solver.cfl = num(&map, "cfl", Some(0.2))?;
        solver.stride = num(&map, "stride", Some(f64::MAX))?.min(usize::MAX as f64) as usize;
        Ok(SimulateConfig { system, grid, bc, solver, init, params })
    }

    pub fn coefficients(&self) -> Result<Coefficients, SimulateConfigError> {
        let sys = builtin_system(&self.system).map_err(|e| SimulateConfigError::Invalid(e.to_string()))?;
        let mut values = self.params.clone();
        if let Init::Family(f) = &self.init {
            for (k, v) in &f.sample.params {
                values.entry(k.clone()).or_insert(*v);
            }
        }
        Ok(Coefficients::from_system(&sys, &values)?)
    }

    pub fn initial_state(&self) -> Result<GridState, SimulateConfigError> {
        match &self.init {
            Init::Family(f) => Ok(GridState::from_family(&self.grid, f, 0.0)?),
            Init::Pair(u, v) => {
                let mut us = Vec::new();
                let mut vs = Vec::new();
                for x in self.grid.centers() {
                    let mut env = AstEnv { values: self.params.clone() };
                    env.set("x", x);
                    env.set("t", 0.0);
                    let e = |a: &Ast| eval_ast(a, &env, 0.0).map_err(|e| SimulateConfigError::Invalid(e.to_string()));
                    us.push(e(u)?);
                    vs.push(e(v)?);
                }
                Ok(GridState { u: us, v: vs, time: 0.0 })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pair_and_family() {
        let c = SimulateConfig::parse(
            "[simulate]\nsystem = T3.7\ngrid.x0 = 0\ngrid.x1 = 1\ngrid.n = 16\nt_end = 0.1\ninit = 2 + x; 1\n",
        )
        .unwrap();
        assert_eq!(c.initial_state().unwrap().u[0], 2.0 + 1.0 / 32.0);
        let c = SimulateConfig::parse(
            "[simulate]\ngrid.x0 = 0\ngrid.x1 = 3\ngrid.n = 16\nt_end = 0.1\ninit = seed-3-5\nbc = exact-dirichlet\n",
        )
        .unwrap();
        assert_eq!(c.system, "3-1");
        assert!(matches!(c.bc, BCSpec::ExactDirichlet(_)));
        assert!(c.coefficients().is_ok());
    }

    #[test]
    fn rejects_dirichlet_without_family() {
        let r = SimulateConfig::parse(
            "[simulate]\nsystem = 3-1\ngrid.x0 = 0\ngrid.x1 = 1\ngrid.n = 16\nt_end = 1\ninit = 1; 1\nbc = exact-dirichlet\n",
        );
        assert!(r.is_err());
    }
}
