mod common;

use std::sync::OnceLock;

use proptest::prelude::*;

use surflab::affine_deform::{margulis_invariant, Cocycle};
use surflab::flag_geometry::{flag_from_tuple, form_from_plane, plane_from_form, tuple_from_flags};
use surflab::fuchsian::{self, Sl2Matrix};
use surflab::linalg;
use surflab::principal_rep::{principal_basis, sym_power_rep, PrincipalBasis, Representation};
use surflab::surface_group::{extend_cocycle, reduce, solve_cocycle_space, CocycleBasis, GroupPresentation, Letter, Word};

struct Setup {
    rep: Representation,
    cocycles: CocycleBasis,
    basis: PrincipalBasis,
}

fn setup(p: usize) -> &'static Setup {
    static CELLS: [OnceLock<Setup>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[p - 2].get_or_init(|| {
        let rep = Representation::fuchsian(p).unwrap();
        let cocycles = solve_cocycle_space(&rep).unwrap();
        Setup { rep, cocycles, basis: principal_basis(p).unwrap() }
    })
}

fn presentation() -> GroupPresentation {
    GroupPresentation::genus2()
}

prop_compose! {
    fn word(max_len: usize)(letters in prop::collection::vec((0usize..4, any::<bool>()), 0..max_len)) -> Word {
        reduce(&Word::new(letters.into_iter().map(|(g, inv)| Letter::new(g, inv))), None)
    }
}

fn trace_of(w: &Word) -> f64 {
    let (_, gens) = fuchsian::octagon_group().unwrap();
    fuchsian::evaluate(&gens, w).trace().abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn reduce_is_idempotent(w in word(40)) {
        let pres = presentation();
        let once = pres.reduce(&w);
        prop_assert_eq!(pres.reduce(&once), once.clone());
        prop_assert!((trace_of(&once) - trace_of(&w)).abs() <= 1e-9 * trace_of(&w).max(1.0));
    }

    #[test]
    fn canonical_form_is_conjugation_invariant(w in word(16), c in word(8), shift in 0usize..16) {
        let pres = presentation();
        let base = pres.conjugacy_canonical(&w);
        prop_assert_eq!(pres.conjugacy_canonical(&w.conjugate_by(&c)), base.clone());
        if !w.is_empty() {
            let k = shift % w.len();
            let rotated = Word::new(w.letters()[k..].iter().chain(&w.letters()[..k]).copied());
            prop_assert_eq!(pres.conjugacy_canonical(&rotated), base.clone());
        }
        if !base.is_empty() {
            let t0 = trace_of(&w);
            prop_assert!((trace_of(&base.as_word()) - t0).abs() <= 1e-9 * t0);
        }
    }

    #[test]
    fn relator_insertion_keeps_the_class(w in word(12), at in 0usize..12, rot in 0usize..8, inv in any::<bool>()) {
        let pres = presentation();
        let r = pres.relator().letters();
        let mut rel = Word::new(r[rot..].iter().chain(&r[..rot]).copied());
        if inv {
            rel = rel.inverse();
        }
        let k = at.min(w.len());
        let u = Word::new(w.letters()[..k].iter().copied());
        let v = Word::new(w.letters()[k..].iter().copied());
        let moved = reduce(&u.concat(&rel).concat(&v), None);
        let a = pres.conjugacy_canonical(&w);
        let b = pres.conjugacy_canonical(&moved);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn extension_obeys_the_cocycle_rule(u in word(10), v in word(10), seed in any::<u64>(), p in 2usize..4) {
        let s = setup(p);
        let omega = Cocycle::random(&s.cocycles, seed).unwrap();
        let uv = u.concat(&v);
        let lhs = extend_cocycle(&omega, &uv, &s.rep);
        let (wu, wv, ru) = (extend_cocycle(&omega, &u, &s.rep), extend_cocycle(&omega, &v, &s.rep), s.rep.evaluate(&u));
        // Size of the terms that cancel, not of the result.
        let scale = (wu.amax() + linalg::max_abs(&ru) * wv.amax()).max(1.0);
        let rhs = wu + ru * wv;
        prop_assert!((lhs - rhs).amax() <= 1e-10 * scale);
    }

    #[test]
    fn cocycles_vanish_on_the_relator(seed in any::<u64>(), p in 2usize..5) {
        let s = setup(p);
        let omega = Cocycle::random(&s.cocycles, seed).unwrap();
        let r = omega.relator_residual(&s.rep).unwrap();
        prop_assert!(r <= 1e-8 * omega.flatten().amax().max(1.0) * s.rep.relator_conditioning().unwrap_or(1.0));
    }

    #[test]
    fn symmetric_power_is_a_homomorphism(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0, p in 2usize..5) {
        let m = Sl2Matrix::new(1.0, a, 0.0, 1.0).unwrap() * Sl2Matrix::diag(b.exp()) * Sl2Matrix::rotation(c);
        let n = Sl2Matrix::translation(d) * Sl2Matrix::rotation(a + c);
        let lhs = sym_power_rep(p, &(m * n)).unwrap();
        let rhs = sym_power_rep(p, &m).unwrap() * sym_power_rep(p, &n).unwrap();
        prop_assert!(linalg::max_abs(&(&lhs - &rhs)) <= 1e-9 * linalg::max_abs(&lhs).max(1.0));
    }

    #[test]
    fn margulis_invariant_is_a_class_function(w in word(8), c in word(6), seed in any::<u64>(), p in 2usize..4) {
        prop_assume!(w.len() >= 2);
        let s = setup(p);
        let pres = presentation();
        let canon = pres.conjugacy_canonical(&w);
        prop_assume!(!canon.is_empty() && s.rep.sl2_holonomy(&canon.as_word()).unwrap().is_hyperbolic());
        let omega = Cocycle::random(&s.cocycles, seed).unwrap();
        let a = margulis_invariant(&s.rep, &omega, &canon.as_word()).unwrap();
        let conj = reduce(&canon.as_word().conjugate_by(&c), None);
        let b = margulis_invariant(&s.rep, &omega, &conj).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{} vs {}", a, b);
        let original = margulis_invariant(&s.rep, &omega, &w).unwrap();
        prop_assert!((a - original).abs() <= 1e-8 * a.abs().max(1.0));
        let l = canon.letters();
        for k in 1..l.len() {
            let rotated = Word::new(l[k..].iter().chain(&l[..k]).copied());
            let r = margulis_invariant(&s.rep, &omega, &rotated).unwrap();
            prop_assert!((a - r).abs() <= 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn margulis_invariant_sees_only_cohomology(w in word(10), seed in any::<u64>(), v in prop::collection::vec(-3.0f64..3.0, 5), p in 2usize..4) {
        let s = setup(p);
        prop_assume!(!w.is_empty() && s.rep.sl2_holonomy(&w).unwrap().is_hyperbolic());
        let omega = Cocycle::random(&s.cocycles, seed).unwrap();
        let vec = nalgebra::DVector::from_fn(s.rep.dim(), |i, _| v[i % v.len()]);
        let shifted = omega.add(&Cocycle::coboundary(&s.rep, &vec));
        let a = margulis_invariant(&s.rep, &omega, &w).unwrap();
        let b = margulis_invariant(&s.rep, &shifted, &w).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }

    #[test]
    fn margulis_invariant_is_homogeneous_and_has_inversion_parity(w in word(6), seed in any::<u64>(), p in 2usize..4) {
        let s = setup(p);
        prop_assume!(!w.is_empty() && s.rep.sl2_holonomy(&w).unwrap().is_hyperbolic());
        let omega = Cocycle::random(&s.cocycles, seed).unwrap();
        let a = margulis_invariant(&s.rep, &omega, &w).unwrap();
        for n in [2usize, 3] {
            let an = margulis_invariant(&s.rep, &omega, &w.pow(n)).unwrap();
            prop_assert!((an - n as f64 * a).abs() <= 1e-8 * an.abs().max(1.0));
        }
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let ainv = margulis_invariant(&s.rep, &omega, &w.inverse()).unwrap();
        prop_assert!((ainv - sign * a).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn tuple_flag_round_trips(seed in any::<u64>(), p in 2usize..5) {
        let s = setup(p);
        let mut rng = common::rng(seed);
        let t = common::random_tuple(&s.basis, &mut rng);
        let (l, m) = flag_from_tuple(&t, &s.basis).unwrap();
        let back = tuple_from_flags(&l, &m, &s.basis).unwrap();
        prop_assert!(common::tuple_distance(&t, &back) <= 1e-8);
        let (l2, m2) = flag_from_tuple(&back, &s.basis).unwrap();
        prop_assert!(common::flag_distance(&l, &l2) <= 1e-8 && common::flag_distance(&m, &m2) <= 1e-8);
    }

    #[test]
    fn tuple_from_flags_is_equivariant(seed in any::<u64>(), p in 2usize..5) {
        let s = setup(p);
        let mut rng = common::rng(seed);
        let t = common::random_tuple(&s.basis, &mut rng);
        let g = common::random_isometry(s.basis.form_e(), &mut rng, 0.5);
        let (l, m) = flag_from_tuple(&t.transform(&g), &s.basis).unwrap();
        let moved = tuple_from_flags(&l, &m, &s.basis).unwrap();
        prop_assert!(common::tuple_distance(&moved, &t.transform(&g)) <= 1e-8);
    }

    #[test]
    fn antisymmetric_forms_are_isotropic_planes(seed in any::<u64>(), p in 2usize..5, antisymmetric in any::<bool>()) {
        let s = setup(p);
        let mut rng = common::rng(seed);
        let t0 = linalg::from_columns(s.basis.e());
        let t1 = linalg::from_columns(s.basis.e_bar());
        let a = common::gaussian_matrix(&mut rng, p, p);
        let omega = if antisymmetric { &a - a.transpose() } else { &a + a.transpose() };
        let plane = plane_from_form(&omega, &t0, &t1, s.basis.form_e()).unwrap();
        let restricted = plane.transpose() * s.basis.form_e().gram() * &plane;
        let isotropic = linalg::max_abs(&restricted) <= 1e-9 * linalg::max_abs(&plane).powi(2);
        prop_assert_eq!(isotropic, antisymmetric);
        let back = form_from_plane(&plane, &t0, &t1, s.basis.form_e()).unwrap();
        prop_assert!(linalg::max_abs(&(&back - &omega)) <= 1e-9 * linalg::max_abs(&omega).max(1.0));
    }
}
