mod common;

use proptest::prelude::*;

use common::*;
use symkit::expr::{eval_ast_jet_guarded, parse, parse_ast, AstEnv, Symbol};

#[test]
fn symbolic_zero_matches_numeric_oracle() {
    let a = symbolic_vs_numeric(1000);
    println!("equal {}, different {}, skipped {}", a.equal, a.different, a.skipped);
    assert!(a.mismatch.is_none(), "{:?}", a.mismatch);
    assert!(a.equal >= 300 && a.different >= 100);
    assert!(a.skipped <= 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn diff_is_linear_and_leibniz(a in expr(), b in expr()) {
        let (ea, eb) = (parse(&a).unwrap(), parse(&b).unwrap());
        let x = Symbol::x();
        let lin = (&ea + &eb).diff(&x) - (ea.diff(&x) + eb.diff(&x));
        prop_assert!(lin.is_zero());
        let leibniz = (&ea * &eb).diff(&x) - (&ea.diff(&x) * &eb + &ea * &eb.diff(&x));
        prop_assert!(leibniz.is_zero());
    }

    #[test]
    fn diff_matches_forward_mode(a in expr()) {
        let e = parse(&a).unwrap();
        let d = e.diff(&Symbol::x());
        let ast = parse_ast(&a).unwrap();
        for [t, x, pa, pb] in points(2) {
            let env = AstEnv::new().with("t", t).with("x", x).with("a", pa).with("b", pb);
            let Ok(j) = eval_ast_jet_guarded(&ast, &env, 0.1, 0.01) else { continue };
            let vals = [("t", t), ("x", x), ("a", pa), ("b", pb)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
            let Ok(s) = d.eval_numeric(&vals, 1e-12) else { continue };
            prop_assert!((s - j.dx()).abs() <= TOL * s.abs().max(j.dx().abs()).max(1.0), "{a}: {s} vs {}", j.dx());
        }
    }
}
