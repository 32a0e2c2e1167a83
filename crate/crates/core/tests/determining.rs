use symkit::invariance::{generate_determining, golden_report, SKTSystem};

#[test]
fn generic_system_reproduces_printed_equations() {
    let report = golden_report(&SKTSystem::generic());
    println!("{report}");
    assert!(report.is_clean(), "{:#?}", report.discrepancies());
    assert_eq!(report.equation_count(), 17);
}

#[test]
fn translations_satisfy_generic_system() {
    let sys = SKTSystem::generic();
    let det = generate_determining(&sys);
    for (name, value) in [("xi0", 1), ("xi1", 1)] {
        for eq in &det.equations {
            let mut e = eq.expr.clone();
            for f in ["xi0", "xi1", "eta1", "eta2"] {
                let v = if f == name { symkit::Expr::int(value) } else { symkit::Expr::zero() };
                e = e.substitute_function(f, &v);
            }
            assert!(e.is_zero(), "{name}: {eq}");
        }
    }
}
