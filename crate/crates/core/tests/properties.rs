use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use novlab_core::bifurcation::{apply_self_slide, loop_consistency, self_slide_factor};
use novlab_core::groupoid::{GeneratorSpec, Letter, ObjectSpec};
use novlab_core::holonomy::{compute_invariants, passage_discs, v1_dot, PassageOptions};
use novlab_core::local_model::Boundary;
use novlab_core::{
    make_elementary_family, Arrow, Character, CrossingEvent, CrossingSign, ElementaryParams, GroupoidGraph,
    LatitudeFrame, ModelPoint, MorseModelConfig, NovikovComplex, RingElement, SlideScript, TruncationContext,
};

/// `p` carries loops `g`, `h`; `e: p → q`; `q` carries a loop `k`.
fn graph() -> Arc<GroupoidGraph> {
    let gen = |n: &str, s: &str, t: &str, u: f64| GeneratorSpec {
        name: n.into(),
        source: s.into(),
        target: t.into(),
        u_value: u,
    };
    GroupoidGraph::new(
        vec![ObjectSpec { name: "p".into(), morse_index: 1 }, ObjectSpec { name: "q".into(), morse_index: 0 }],
        vec![gen("g", "p", "p", -1.0), gen("h", "p", "p", -0.625), gen("e", "p", "q", -0.375), gen("k", "q", "q", -0.875)],
    )
    .unwrap()
}

/// Walk from `start`, picking at each step one of the letters leaving the
/// current object.
fn walk(graph: &GroupoidGraph, start: &str, choices: &[u8]) -> Arrow {
    let (g, h, e, k) = (0, 1, 2, 3);
    let mut at = graph.object_id(start).unwrap();
    let p = graph.object_id("p").unwrap();
    let mut letters = Vec::new();
    for c in choices {
        let options: &[(usize, i8)] =
            if at == p { &[(g, 1), (g, -1), (h, 1), (h, -1), (e, 1)] } else { &[(k, 1), (k, -1), (e, -1)] };
        let (id, exp) = options[*c as usize % options.len()];
        letters.push(Letter::new(id, exp));
        let gen = &graph.generators()[id];
        at = if exp > 0 { gen.target } else { gen.source };
    }
    graph.arrow_from_letters(graph.object_id(start).unwrap(), &letters).unwrap()
}

fn end_name(graph: &GroupoidGraph, a: &Arrow) -> String {
    graph.object_name(a.target()).to_string()
}

fn word() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn composition_is_associative(a in word(), b in word(), c in word()) {
        let gr = graph();
        let x = walk(&gr, "p", &a);
        let y = walk(&gr, &end_name(&gr, &x), &b);
        let z = walk(&gr, &end_name(&gr, &y), &c);
        let left = x.compose(&y).unwrap().unwrap().compose(&z).unwrap().unwrap();
        let right = x.compose(&y.compose(&z).unwrap().unwrap()).unwrap().unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn words_reduce_against_inverses(a in word()) {
        let gr = graph();
        let x = walk(&gr, "p", &a);
        let back = x.compose(&x.inverse()).unwrap().unwrap();
        prop_assert!(back.is_identity());
        prop_assert_eq!(back.source(), x.source());
        let inv2 = x.inverse().inverse();
        prop_assert_eq!(inv2, x);
    }

    #[test]
    fn valuation_is_additive(a in word(), b in word()) {
        let gr = graph();
        let x = walk(&gr, "p", &a);
        let y = walk(&gr, &end_name(&gr, &x), &b);
        let xy = x.compose(&y).unwrap().unwrap();
        prop_assert!((gr.u_value(&xy) - gr.u_value(&x) - gr.u_value(&y)).abs() < 1e-12);
        prop_assert!((gr.u_value(&x.inverse()) + gr.u_value(&x)).abs() < 1e-12);
    }

    #[test]
    fn mismatched_ends_compose_to_nothing(a in word()) {
        let gr = graph();
        let x = walk(&gr, "q", &a);
        let y = walk(&gr, &end_name(&gr, &x), &[]);
        let stray = if gr.object_name(x.target()) == "p" { walk(&gr, "q", &[0]) } else { walk(&gr, "p", &[0]) };
        prop_assert!(x.compose(&y).unwrap().is_some());
        prop_assert!(x.compose(&stray).unwrap().is_none());
    }

    #[test]
    fn rendered_words_parse_back(a in word()) {
        let gr = graph();
        let x = walk(&gr, "p", &a);
        prop_assert_eq!(gr.parse_arrow(&gr.render_arrow(&x)).unwrap(), x);
    }
}

/// Random element at `p` from words over `g`, `h` (and their inverses when
/// `inverses` is set).
fn element(ctx: &TruncationContext, terms: &[(Vec<u8>, i8)], inverses: bool) -> RingElement {
    let gr = ctx.graph();
    let p = gr.object_id("p").unwrap();
    let picks: &[(usize, i8)] = if inverses { &[(0, 1), (0, -1), (1, 1), (1, -1)] } else { &[(0, 1), (1, 1)] };
    let ts = terms.iter().map(|(w, c)| {
        let letters: Vec<Letter> = w.iter().map(|c| {
            let (id, e) = picks[*c as usize % picks.len()];
            Letter::new(id, e)
        }).collect();
        (gr.arrow_from_letters(p, &letters).unwrap(), BigInt::from(*c))
    });
    RingElement::from_terms(ctx, ts.collect::<Vec<_>>()).unwrap()
}

fn terms() -> impl Strategy<Value = Vec<(Vec<u8>, i8)>> {
    prop::collection::vec((prop::collection::vec(any::<u8>(), 0..=6), -3i8..=3), 0..5)
}

fn length() -> impl Strategy<Value = f64> {
    (1u32..=24).prop_map(|k| k as f64 * 0.25 + 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ring_axioms(l in length(), a in terms(), b in terms(), c in terms()) {
        let ctx = TruncationContext::new(graph(), l).unwrap();
        let (a, b, c) = (element(&ctx, &a, false), element(&ctx, &b, false), element(&ctx, &c, false));
        let eq = |x: &RingElement, y: &RingElement| RingElement::l_equal(x, y, l).unwrap();
        prop_assert!(eq(&a.mul(&b).unwrap().mul(&c).unwrap(), &a.mul(&b.mul(&c).unwrap()).unwrap()));
        prop_assert!(eq(&a.mul(&b.add(&c).unwrap()).unwrap(), &a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()));
        prop_assert!(eq(&a.add(&b).unwrap().mul(&c).unwrap(), &a.mul(&c).unwrap().add(&b.mul(&c).unwrap()).unwrap()));
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert!(a.sub(&a).unwrap().is_zero());
        let one = RingElement::one(&ctx);
        prop_assert_eq!(one.mul(&a).unwrap(), a.clone());
        prop_assert_eq!(a.mul(&one).unwrap(), a);
    }

    #[test]
    fn positive_support_is_flagged(l in length(), a in terms()) {
        let ctx = TruncationContext::new(graph(), l).unwrap();
        let a = element(&ctx, &a, true);
        let gr = ctx.graph();
        let positive = a.terms().any(|(w, _)| gr.u_value(w) > 0.0);
        prop_assert_eq!(a.is_congruence_safe(), !positive);
        prop_assert_eq!(a.positive_support().is_empty(), !positive);
    }

    #[test]
    fn truncation_is_a_ring_map(l in length(), cut in 0.05f64..1.0, a in terms(), b in terms()) {
        let ctx = TruncationContext::new(graph(), l).unwrap();
        let (a, b) = (element(&ctx, &a, false), element(&ctx, &b, false));
        prop_assume!(a.is_congruence_safe() && b.is_congruence_safe());
        let short = l * cut;
        let lhs = a.mul(&b).unwrap().truncate(short).unwrap();
        let rhs = a.truncate(short).unwrap().mul(&b.truncate(short).unwrap()).unwrap();
        prop_assert_eq!(lhs.render(), rhs.render());
        prop_assert!(RingElement::l_equal(&a.mul(&b).unwrap(), &rhs, short).unwrap());
    }

    #[test]
    fn unit_inverse_is_two_sided(l in length(), r in terms()) {
        let ctx = TruncationContext::new(graph(), l).unwrap();
        let gr = ctx.graph().clone();
        let p = gr.object_id("p").unwrap();
        // Only strictly negative words: every letter is g or h.
        let r = element(&ctx, &r.into_iter().filter(|(w, _)| !w.is_empty()).collect::<Vec<_>>(), false);
        let x = RingElement::identity(&ctx, p).sub(&r).unwrap();
        let y = x.unit_inverse().unwrap();
        let one = RingElement::identity(&ctx, p);
        prop_assert_eq!(x.mul(&y).unwrap(), one.clone());
        prop_assert_eq!(y.mul(&x).unwrap(), one);
    }

    #[test]
    fn geometric_series_term_count(steps in 1u32..=40, l in 0.1f64..12.0) {
        let u = -(steps as f64) * 0.075;
        let frac = l / u.abs();
        prop_assume!((frac - frac.round()).abs() > 1e-9);
        let gr = GroupoidGraph::new(
            vec![ObjectSpec { name: "p".into(), morse_index: 1 }],
            vec![GeneratorSpec { name: "g".into(), source: "p".into(), target: "p".into(), u_value: u }],
        ).unwrap();
        let ctx = TruncationContext::new(gr.clone(), l).unwrap();
        let g = gr.generator_arrow(0);
        let s = RingElement::geometric_series(&g, &ctx).unwrap();
        prop_assert_eq!(s.len(), frac.ceil() as usize);
        prop_assert!(s.terms().all(|(_, c)| *c == BigInt::from(1)));
    }
}

fn loop_graph(u: f64) -> (Arc<GroupoidGraph>, Arrow) {
    let gr = GroupoidGraph::new(
        vec![ObjectSpec { name: "p".into(), morse_index: 1 }],
        vec![GeneratorSpec { name: "g".into(), source: "p".into(), target: "p".into(), u_value: u }],
    )
    .unwrap();
    let g = gr.generator_arrow(0);
    (gr, g)
}

fn character() -> impl Strategy<Value = Character> {
    prop_oneof![Just(Character::Plus), Just(Character::Minus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn opposite_crossings_cancel(u in -3.0f64..-0.1, ratio in 0.05f64..10.0, c in character()) {
        let (gr, g) = loop_graph(u);
        let ctx = TruncationContext::new(gr, ratio * u.abs()).unwrap();
        let pos = CrossingEvent::new(g.clone(), c, CrossingSign::Positive);
        let neg = pos.flipped();
        let one = RingElement::identity(&ctx, g.source());
        let (fp, fn_) = (self_slide_factor(&pos, &ctx).unwrap(), self_slide_factor(&neg, &ctx).unwrap());
        prop_assert_eq!(fp.mul(&fn_).unwrap(), one.clone());
        prop_assert_eq!(fn_.mul(&fp).unwrap(), one.clone());
        prop_assert_eq!(fn_, fp.unit_inverse().unwrap());
        let there_and_back = SlideScript { events: vec![pos, neg] };
        prop_assert!(loop_consistency(&there_and_back, &ctx).unwrap().consistent);
    }

    #[test]
    fn doubling_loop_closes(u in -3.0f64..-0.1, ratio in 0.05f64..=10.0) {
        let (gr, g) = loop_graph(u);
        let ctx = TruncationContext::new(gr, ratio * u.abs()).unwrap();
        let audit = loop_consistency(&SlideScript::doubling(&g).unwrap(), &ctx).unwrap();
        prop_assert!(audit.consistent, "residual {}", audit.residual);
    }

    #[test]
    fn half_doubling_does_not_close(u in -3.0f64..-0.1, ratio in 2.05f64..=10.0) {
        let (gr, g) = loop_graph(u);
        let ctx = TruncationContext::new(gr, ratio * u.abs()).unwrap();
        let mut s = SlideScript::doubling(&g).unwrap();
        s.events.pop();
        prop_assert!(!loop_consistency(&s, &ctx).unwrap().consistent);
    }

    #[test]
    fn slides_preserve_d_squared(seed in any::<u64>(), c in character(), positive in any::<bool>()) {
        let (complex, g) = cancellation_complex(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(complex.check_d_squared().passed());
        let sign = if positive { CrossingSign::Positive } else { CrossingSign::Negative };
        let out = apply_self_slide(&complex, &CrossingEvent::new(g, c, sign)).unwrap();
        prop_assert!(out.check_d_squared().passed());
    }
}

/// `qq → p → q` and `qq → p2 → q` whose two paths cancel through `e2`.
fn cancellation_complex(rng: &mut ChaCha8Rng) -> (NovikovComplex, Arrow) {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let specs = [
        ("g", "p", "p", u(-2.0, -0.2)),
        ("e", "p", "q", u(-1.5, -0.1)),
        ("f", "qq", "p", u(-1.5, -0.1)),
        ("e2", "p2", "q", u(-0.1, -0.01)),
    ];
    let gr = GroupoidGraph::new(
        vec![
            ObjectSpec { name: "qq".into(), morse_index: 2 },
            ObjectSpec { name: "p".into(), morse_index: 1 },
            ObjectSpec { name: "p2".into(), morse_index: 1 },
            ObjectSpec { name: "q".into(), morse_index: 0 },
        ],
        specs
            .iter()
            .map(|(n, s, t, v)| GeneratorSpec { name: n.to_string(), source: s.to_string(), target: t.to_string(), u_value: *v })
            .collect(),
    )
    .unwrap();
    let ctx = TruncationContext::new(gr.clone(), rng.random_range(1.0..6.0)).unwrap();
    let arrow = |w: &str| gr.parse_arrow(w).unwrap();
    let k1 = rng.random_range(0..3);
    let k2 = rng.random_range(0..3);
    let c1 = rng.random_range(1i64..=3) * if rng.random_bool(0.5) { 1 } else { -1 };
    let a_word = if k1 == 0 { "f".to_string() } else { format!("f.g^{k1}") };
    let b_word = if k2 == 0 { "e".to_string() } else { format!("g^{k2}.e") };
    let a = RingElement::from_terms(&ctx, [(arrow(&a_word), BigInt::from(c1)), (arrow("f"), BigInt::from(1))]).unwrap();
    let b = RingElement::from_terms(&ctx, [(arrow(&b_word), BigInt::from(1)), (arrow("e"), BigInt::from(2))]).unwrap();
    let e2 = RingElement::monomial(&ctx, arrow("e2"), 1).unwrap();
    let e2_inv = RingElement::monomial(&ctx, arrow("e2^-1"), 1).unwrap();
    let cross = a.mul(&b).unwrap().mul(&e2_inv).unwrap().neg();
    let id = |n: &str| gr.object_id(n).unwrap();
    let c = NovikovComplex::new(&ctx)
        .set_incidence(id("qq"), id("p"), a)
        .unwrap()
        .set_incidence(id("p"), id("q"), b)
        .unwrap()
        .set_incidence(id("p2"), id("q"), e2)
        .unwrap()
        .set_incidence(id("qq"), id("p2"), cross)
        .unwrap();
    (c, arrow("g"))
}

fn unit(dim: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, dim)
        .prop_filter("away from zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(|v| DVector::from_vec(v).normalize())
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=6).prop_flat_map(|n| (Just(n), 1..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn descend_keeps_sphere_coordinates(
        (n, i) in dims(),
        seeds in (any::<u64>(), 1e-3f64..0.9),
    ) {
        let cfg = MorseModelConfig::new(n, i, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.0);
        let mut draw = |d: usize| loop {
            let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
            if v.norm() > 0.1 { return v.normalize(); }
        };
        let (phi, psi) = (draw(i), draw(n - i));
        let top = ModelPoint::top_from_spherical(&cfg, &phi, seeds.1, &psi);
        let bottom = top.descend(&cfg).unwrap();
        prop_assert!(bottom.on_boundary(&cfg, Boundary::Bottom));
        let a = top.spherical(Boundary::Top);
        let b = bottom.spherical(Boundary::Bottom);
        prop_assert!((a.r - b.r).abs() < 1e-12);
        prop_assert!((a.phi.unwrap() - b.phi.unwrap()).amax() < 1e-12);
        prop_assert!((a.psi.unwrap() - b.psi.unwrap()).amax() < 1e-12);
        let prod = |p: &ModelPoint| p.minus.norm() * p.plus.norm();
        prop_assert!((prod(&top) - prod(&bottom)).abs() < 1e-12);
        let up = bottom.ascend(&cfg).unwrap();
        prop_assert!((up.minus - &top.minus).amax() < 1e-12);
        prop_assert!((up.plus - &top.plus).amax() < 1e-12);
    }

    #[test]
    fn latitude_is_rotation_invariant(nu in unit(4), theta in unit(4), m in prop::collection::vec(-1.0f64..1.0, 16)) {
        let q = DMatrix::from_vec(4, 4, m).qr().q();
        let before = LatitudeFrame::new(nu.clone()).unwrap().latitude(&theta);
        let after = LatitudeFrame::new(&q * &nu).unwrap().latitude(&(&q * &theta));
        prop_assert!((before - after).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&before));
    }
}

fn signed(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m })
}

fn params() -> impl Strategy<Value = ElementaryParams> {
    (unit(2), unit(2), signed(0.1, 0.9), signed(0.1, 0.9), 0.5f64..2.0).prop_map(|(am, ap, wphi, wpsi, eta)| {
        ElementaryParams {
            a_minus: am.iter().copied().collect(),
            a_plus: ap.iter().copied().collect(),
            omega_phi: wphi,
            omega_psi: wpsi,
            eta,
            tube_radius: None,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn invariants_round_trip(p in params()) {
        let cfg = MorseModelConfig::new(4, 2, 1.0, 1.0).unwrap();
        let f = make_elementary_family(&cfg, &p).unwrap();
        let inv = compute_invariants(&f).unwrap();
        prop_assert!((inv.omega_phi - p.omega_phi).abs() < 1e-6);
        prop_assert!((inv.omega_psi - p.omega_psi).abs() < 1e-6);
        prop_assert!((inv.eta - p.eta).abs() < 1e-6);
        prop_assert!((inv.chi - (inv.eta * inv.omega_psi + inv.omega_phi)).abs() < 1e-15);
    }

    #[test]
    fn character_identity(p in params()) {
        let cfg = MorseModelConfig::new(4, 2, 1.0, 1.0).unwrap();
        let f = make_elementary_family(&cfg, &p).unwrap();
        let inv = compute_invariants(&f).unwrap();
        let vdot = v1_dot(&f).unwrap();
        prop_assert!((inv.omega_phi * vdot - inv.chi).abs() < 1e-5);
    }

    #[test]
    fn first_passage_orientation_follows_s(p in params(), s in signed(0.002, 0.02)) {
        let cfg = MorseModelConfig::new(4, 2, 1.0, 1.0).unwrap();
        let f = make_elementary_family(&cfg, &p).unwrap();
        let clouds = passage_discs(&f, s, 1, PassageOptions::default()).unwrap();
        prop_assert!(!clouds[0].is_empty());
        prop_assert_eq!(clouds[0].orientation(), Some(if s > 0.0 { 1 } else { -1 }));
        prop_assert!(clouds[0].points.iter().all(|q| q.point().on_boundary(&cfg, Boundary::Bottom)));
    }

    #[test]
    fn holonomy_inverts(p in params(), s in signed(0.0, 0.02), x in -0.2f64..0.2, v in -0.2f64..0.2) {
        let cfg = MorseModelConfig::new(4, 2, 1.0, 1.0).unwrap();
        let f = make_elementary_family(&cfg, &p).unwrap();
        let start = f.chart_lower_inv(&novlab_core::holonomy::TubeCoords::new(
            DVector::from_element(1, x), DVector::from_element(1, 0.0), v));
        if let Some(img) = f.evaluate_holonomy(s, &start) {
            let back = f.inverse_holonomy(s, &img).unwrap();
            prop_assert!((back.minus - &start.minus).amax() < 1e-10);
            prop_assert!((back.plus - &start.plus).amax() < 1e-10);
        }
    }
}
