use std::f64::consts::PI;

use symkit::simulator::*;
use symkit::solutions::{builtin_family, builtin_system, SolutionFamily};

fn family_3_7() -> SolutionFamily {
    builtin_family("family-3-7").unwrap().bind(&[
        ("alpha1", 1.0),
        ("alpha2", 0.5),
        ("p", 0.1),
        ("lambda1", 1.0),
        ("lambda2", 0.0),
    ])
}

#[test]
fn second_order_against_exact_family() {
    let sys = builtin_system("3-2").unwrap();
    let r = convergence_study(&sys, &family_3_7(), (0.0, PI), &[64, 128, 256], 0.2, &BCSpec::ZeroNeumann, Stencil::Central)
        .unwrap();
    println!("{r}");
    for o in &r.orders {
        assert!((o - 2.0).abs() < 0.2, "{o}");
    }
    assert!(r.rows[2].error < 1e-4);
    assert!(r.elapsed.as_secs_f64() < 30.0);
}

#[test]
fn dirichlet_matches_neumann_order() {
    let sys = builtin_system("3-2").unwrap();
    let f = family_3_7();
    let bc = BCSpec::ExactDirichlet(Box::new(f.clone()));
    let r = convergence_study(&sys, &f, (0.0, PI), &[64, 128, 256], 0.2, &bc, Stencil::Central).unwrap();
    println!("{r}");
    for o in &r.orders {
        assert!((o - 2.0).abs() < 0.2, "{o}");
    }
}

#[test]
fn one_sided_stencil_is_first_order() {
    let sys = builtin_system("3-2").unwrap();
    let f = family_3_7();
    let bc = BCSpec::ExactDirichlet(Box::new(f.clone()));
    let r = convergence_study(&sys, &f, (0.0, PI), &[64, 128, 256], 0.2, &bc, Stencil::OneSided).unwrap();
    println!("{r}");
    for o in &r.orders {
        assert!((o - 1.0).abs() < 0.3, "{o}");
    }
}

#[test]
fn negative_sum_mode_is_unstable() {
    // alpha2 = -1 makes u + v <= 0: backward diffusion of the u + v mode
    let sys = builtin_system("3-2").unwrap();
    let f = builtin_family("family-3-7").unwrap().bind(&[("alpha2", -1.0), ("lambda2", 0.0)]);
    let r = convergence_study(&sys, &f, (0.0, PI), &[256], 0.2, &BCSpec::ZeroNeumann, Stencil::Central);
    match r {
        Err(SimError::Unstable { .. }) | Err(SimError::DtUnderflow(..)) => {}
        Ok(rep) => assert!(rep.rows[0].error > 1e-2, "{rep}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn pure_cross_diffusion_conserves_mass() {
    let sys = builtin_system("T3.7").unwrap();
    let k = Coefficients::from_system(&sys, &Default::default()).unwrap();
    let g = Grid1D::new(0.0, PI, 128).unwrap();
    let init = GridState::from_fn(&g, |x| (2.0 + 0.5 * x.cos(), 1.0 + 0.3 * (2.0 * x).sin()));
    let cfg = SolverConfig { max_steps: Some(1000), ..SolverConfig::new(f64::INFINITY) };
    let t = run(&k, &g, init.clone(), &BCSpec::ZeroNeumann, &cfg).unwrap();
    assert_eq!(t.steps, 1000);
    let (m0, m1) = (init.mass(g.h()), t.last().mass(g.h()));
    let drift = ((m1.0 - m0.0) / m0.0).abs().max(((m1.1 - m0.1) / m0.1).abs());
    println!("mass drift {drift:e}");
    assert!(drift < 1e-8);
}

#[test]
fn swap_symmetric_system_swaps_trajectories() {
    let sys = builtin_system("1-4").unwrap();
    let mut vals = std::collections::BTreeMap::new();
    vals.insert("b".to_string(), 1.0);
    let k = Coefficients::from_system(&sys, &vals).unwrap();
    let g = Grid1D::new(0.0, 1.0, 32).unwrap();
    let a = GridState::from_fn(&g, |x| (2.0 + x, 1.0 + x * x));
    let b = GridState { u: a.v.clone(), v: a.u.clone(), time: 0.0 };
    let cfg = SolverConfig::new(0.01);
    let ta = run(&k, &g, a, &BCSpec::ZeroNeumann, &cfg).unwrap();
    let tb = run(&k, &g, b, &BCSpec::ZeroNeumann, &cfg).unwrap();
    assert_eq!(ta.last().u, tb.last().v);
    assert_eq!(ta.last().v, tb.last().u);
}

#[test]
fn trajectory_csv() {
    let g = Grid1D::new(0.0, 1.0, 8).unwrap();
    let k = Coefficients([1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let cfg = SolverConfig { stride: 10, ..SolverConfig::new(0.01) };
    let t = run(&k, &g, GridState::from_fn(&g, |x| (x, 1.0 - x)), &BCSpec::Periodic, &cfg).unwrap();
    let csv = t.to_csv();
    assert!(csv.starts_with("t,x,u,v\n"));
    assert_eq!(csv.lines().count(), 1 + 8 * t.states.len());
}
