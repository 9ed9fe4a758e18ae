mod common;

use approxsym::expr::{diff_raw, name, Expr, Jet, Name};
use approxsym::jet::{apply_prolonged, prolong, total_derivative, Generator};
use common::flow::{max_error, Sample};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn indep() -> Vec<Name> {
    vec![name("t"), name("x")]
}

fn deps() -> Vec<Name> {
    vec![name("u")]
}

/// Point-generator components: trees in t, x, u only.
fn point_tree() -> impl Strategy<Value = Expr> {
    poly_tree().prop_map(|e| e.subs(&[(ux(), Expr::var("t"))]))
}

fn point_generator() -> impl Strategy<Value = Generator> {
    (point_tree(), point_tree(), point_tree())
        .prop_map(|(a, b, c)| Generator::new().with_xi("t", a).with_xi("x", b).with_eta("u", c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn total_derivatives_commute(e in expr_tree()) {
        let tx = total_derivative(&total_derivative(&e, "t"), "x");
        let xt = total_derivative(&total_derivative(&e, "x"), "t");
        prop_assert_eq!(tx, xt);
    }

    #[test]
    fn prolongation_restricts(g in point_generator()) {
        let p2 = prolong(&g, &indep(), &deps(), 2);
        let p1 = prolong(&g, &indep(), &deps(), 1);
        for (j, e) in &p1 {
            prop_assert_eq!(&p2[j], e);
        }
        prop_assert_eq!(p2.len(), 5);
    }

    #[test]
    fn prolonged_generator_on_point_functions(g in point_generator(), e in point_tree()) {
        let direct = (g.xi_of("t") * diff_raw(&e, &Expr::var("t")).unwrap()
            + g.xi_of("x") * diff_raw(&e, &Expr::var("x")).unwrap()
            + g.eta_of("u") * diff_raw(&e, &u()).unwrap())
        .normalize();
        prop_assert_eq!(apply_prolonged(&g, &indep(), &deps(), &e), direct);
    }
}

#[test]
fn total_derivative_examples() {
    let uxx = Expr::jet("u", &["x", "x"]);
    assert_eq!(total_derivative(&u().powi(2), "x"), (Expr::int(2) * u() * ux()).normalize());
    assert_eq!(total_derivative(&(u() * ux()), "x"), (ux().powi(2) + u() * uxx).normalize());
}

#[test]
fn surface_condition_consequence() {
    // D_t of u_t + xi u_x - eta with xi = 0, eta = g(t) u
    let g = Expr::func("g", vec![Expr::var("t")]);
    let q = Expr::jet("u", &["t"]) - g.clone() * u();
    let want = Expr::jet("u", &["t", "t"]) - g.diff(&Expr::var("t")).unwrap() * u() - g * Expr::jet("u", &["t"]);
    assert_eq!(total_derivative(&q, "t"), want.normalize());
}

fn classical_heat() -> Vec<(&'static str, Generator)> {
    let (t, x) = (Expr::var("t"), Expr::var("x"));
    vec![
        ("translate_t", Generator::new().with_xi("t", Expr::one())),
        ("translate_x", Generator::new().with_xi("x", Expr::one())),
        ("scale_u", Generator::new().with_eta("u", u())),
        ("scale", Generator::new().with_xi("t", Expr::int(2) * t.clone()).with_xi("x", x.clone())),
        ("galilei", Generator::new().with_xi("x", Expr::int(2) * t.clone()).with_eta("u", -(x.clone() * u()))),
        (
            "projective",
            Generator::new()
                .with_xi("t", Expr::int(4) * t.powi(2))
                .with_xi("x", Expr::int(4) * t.clone() * x.clone())
                .with_eta("u", -((x.powi(2) + Expr::int(2) * t) * u())),
        ),
    ]
}

fn nonlinear_point() -> Vec<(&'static str, Generator)> {
    let (t, x) = (Expr::var("t"), Expr::var("x"));
    vec![
        ("mixed", Generator::new().with_xi("t", u() * x.clone()).with_xi("x", t.clone().sin()).with_eta("u", x.clone() * u().powi(2))),
        ("rdc_xi1", Generator::new().with_xi("t", Expr::one()).with_xi("x", (t.clone() / Expr::int(3)).exp()).with_eta("u", u() / Expr::int(3))),
    ]
}

#[test]
fn prolongation_matches_flow() {
    let sample = Sample {
        phi: (Expr::rat(3, 10) * Expr::var("t") + Expr::rat(1, 2) * Expr::var("x")).exp() * Expr::rat(1, 2)
            + Expr::var("x").sin() * Expr::var("t").cos()
            + Expr::int(2),
    };
    let mut r = rng(11);
    let points: Vec<(f64, f64)> = (0..10).map(|_| (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
    for (n, g) in classical_heat().into_iter().chain(nonlinear_point()) {
        let err = max_error(&g, &sample, &points);
        assert!(err < 1e-6, "{n}: relative error {err:e}");
    }
}

#[test]
fn scaling_prolongation() {
    let g = Generator::new().with_eta("u", u());
    let pr = prolong(&g, &[name("x")], &deps(), 2);
    assert_eq!(pr[&Jet::new("u", approxsym::expr::MultiIndex::from_counts([("x", 1)]))], ux());
    assert_eq!(
        pr[&Jet::new("u", approxsym::expr::MultiIndex::from_counts([("x", 2)]))],
        Expr::jet("u", &["x", "x"])
    );
}
