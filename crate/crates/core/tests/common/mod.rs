//! Random expression pairs and the parse-tree oracle shared by the kernel
//! and acceptance tests.

use std::cell::Cell;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symkit::expr::{eval_ast_jet_guarded, parse, parse_ast, AstEnv};

pub const TOL: f64 = 1e-9;

pub fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("t".to_string()),
        Just("x".to_string()),
        Just("a".to_string()),
        Just("b".to_string()),
        (1i32..5).prop_map(|n| n.to_string()),
    ]
}

pub fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("({l} + {r})")),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("({l} - {r})")),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("({l})*({r})")),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("({l})/(2 + ({r})^2)")),
            (inner.clone(), 2u32..4).prop_map(|(l, n)| format!("({l})^{n}")),
            inner.clone().prop_map(|l| format!("exp({l})")),
            inner.clone().prop_map(|l| format!("sin({l})")),
            inner.clone().prop_map(|l| format!("cos({l})")),
            inner.prop_map(|l| format!("sqrt(1 + ({l})^2)")),
        ]
    })
}

fn poly() -> impl Strategy<Value = String> {
    leaf().prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("({l} + {r})")),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| format!("({l})*({r})")),
            (inner, 1i32..4).prop_map(|(l, k)| format!("({l})/{k}")),
        ]
    })
}

/// Pairs equal by construction, and pairs that differ by a perturbation.
pub fn pair() -> impl Strategy<Value = (String, String)> {
    let e = expr;
    prop_oneof![
        (e(), e(), e()).prop_map(|(a, b, c)| (format!("({a})*({b}) + ({a})*({c})"), format!("({a})*(({b}) + ({c}))"))),
        (e(), e()).prop_map(|(a, b)| (format!("({a})*(3 + ({b})^2)/(3 + ({b})^2)"), a)),
        (e(), e()).prop_map(|(a, b)| (format!("({a}) + ({b}) - ({b})"), a)),
        (e(), e()).prop_map(|(a, b)| (format!("(({a}) + ({b}))^2"), format!("({a})^2 + 2*({a})*({b}) + ({b})^2"))),
        (e(), e()).prop_map(|(a, w)| (format!("({a})*(sin({w})^2 + cos({w})^2)"), a)),
        (e(), e()).prop_map(|(a, w)| (format!("({a})*sqrt(1 + ({w})^2)^2"), format!("({a})*(1 + ({w})^2)"))),
        (e(), poly(), poly()).prop_map(|(a, w, z)| (format!("({a})*exp({w})*exp({z})"), format!("({a})*exp({w} + {z})"))),
        (e(), leaf(), 1i32..1000).prop_map(|(a, l, k)| (format!("({a}) + ({l})/{k}"), a)),
        (e(), e()).prop_map(|(a, b)| (a, b)),
    ]
}

pub fn points(seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20).map(|_| [rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

/// Evaluate both parse trees (no normalization) at 20 points.
pub fn numerically_equal(a: &str, b: &str) -> Option<bool> {
    let (ta, tb) = (parse_ast(a).ok()?, parse_ast(b).ok()?);
    let mut used = 0;
    for [t, x, pa, pb] in points(1) {
        let env = AstEnv::new().with("t", t).with("x", x).with("a", pa).with("b", pb);
        let (Ok(va), Ok(vb)) = (eval_ast_jet_guarded(&ta, &env, 0.1, 0.01), eval_ast_jet_guarded(&tb, &env, 0.1, 0.01))
        else {
            continue;
        };
        if !va.v.is_finite() || !vb.v.is_finite() {
            continue;
        }
        used += 1;
        if (va.v - vb.v).abs() > TOL * va.v.abs().max(vb.v.abs()).max(1.0) {
            return Some(false);
        }
    }
    (used >= 10).then_some(true)
}

#[derive(Debug, Default)]
pub struct Agreement {
    pub equal: usize,
    pub different: usize,
    pub skipped: usize,
    /// First disagreement, if any.
    pub mismatch: Option<(String, String, bool)>,
}

/// Compare the symbolic zero test with the oracle on `cases` pairs.
pub fn symbolic_vs_numeric(cases: u32) -> Agreement {
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let (equal, different, skipped) = (Cell::new(0), Cell::new(0), Cell::new(0));
    let result = runner.run(&pair(), |(a, b)| {
        let sym = match (parse(&a), parse(&b)) {
            (Ok(x), Ok(y)) => (&x - &y).is_zero(),
            _ => {
                skipped.set(skipped.get() + 1);
                return Ok(());
            }
        };
        let Some(num) = numerically_equal(&a, &b) else {
            skipped.set(skipped.get() + 1);
            return Ok(());
        };
        prop_assert_eq!(sym, num);
        let c = if sym { &equal } else { &different };
        c.set(c.get() + 1);
        Ok(())
    });
    let mismatch = match result {
        Err(proptest::test_runner::TestError::Fail(_, (a, b))) => {
            let sym = (&parse(&a).unwrap() - &parse(&b).unwrap()).is_zero();
            Some((a, b, sym))
        }
        _ => None,
    };
    Agreement { equal: equal.get(), different: different.get(), skipped: skipped.get(), mismatch }
}
