//! Checks against independent computations: direct word evaluation,
//! unpruned enumeration and closed-form eigenvalues.

use std::collections::BTreeSet;

use surflab::flag_geometry::{classify_orientation, Orientation};
use surflab::fuchsian::{
    self, axis_ball_radius, default_slack, enumerate_ball, enumerate_class_representatives, octagon_circumradius,
    octagon_group, translation_length, BallOptions,
};
use surflab::principal_rep::{eigendata_sl2, principal_basis, Representation};
use surflab::spectra::length_spectrum;
use surflab::surface_group::CyclicWord;

#[test]
fn enumerated_matrices_match_their_words() {
    let (_, gens) = octagon_group().unwrap();
    let ball = enumerate_ball(&gens, 8.0, default_slack(), BallOptions::default()).unwrap();
    assert!(ball.elements().len() > 500);
    for e in ball.elements() {
        let direct = fuchsian::evaluate(&gens, &e.word);
        assert!(direct.projective_distance(&e.matrix) <= 1e-9 * direct.max_abs(), "{}", e.word);
        let back = fuchsian::evaluate(&gens, &e.word.inverse());
        assert!((back.displacement() - e.distance).abs() <= 1e-9, "{}", e.word);
    }
}

#[test]
fn ball_counts_are_stable_in_the_slack() {
    let (_, gens) = octagon_group().unwrap();
    let c = default_slack();
    let a = enumerate_ball(&gens, 7.0, c, BallOptions::default()).unwrap();
    let b = enumerate_ball(&gens, 7.0, 2.0 * c, BallOptions::default()).unwrap();
    for k in 1..=70 {
        let t = k as f64 / 10.0;
        assert_eq!(a.count(t), b.count(t), "N({t})");
    }
}

fn classes_of(words: impl Iterator<Item = surflab::surface_group::Word>) -> BTreeSet<CyclicWord> {
    let pres = surflab::surface_group::GroupPresentation::genus2();
    words.map(|w| pres.conjugacy_canonical(&w)).filter(|c| !c.is_empty()).collect()
}

/// The certified search with no slack finds exactly the classes of a plain
/// ball enumeration and of a search with a full circumradius of slack.
#[test]
fn class_search_needs_no_slack() {
    let (_, gens) = octagon_group().unwrap();
    let t = 7.0;
    let zero = enumerate_class_representatives(&gens, t, 0.0, BallOptions::default()).unwrap();
    let wide = enumerate_class_representatives(&gens, t, octagon_circumradius(), BallOptions::default()).unwrap();
    let radius = axis_ball_radius(t, octagon_circumradius()) + 1e-9;
    let ball = enumerate_ball(&gens, radius, default_slack(), BallOptions::default()).unwrap();
    let short = ball
        .elements()
        .iter()
        .filter(|e| e.matrix.is_hyperbolic() && translation_length(&e.matrix).unwrap() <= t)
        .map(|e| e.word.clone());
    let plain = classes_of(short);
    assert!(plain.len() > 200);
    assert_eq!(classes_of(zero.elements.iter().map(|e| e.word.clone())), plain);
    assert_eq!(classes_of(wide.elements.iter().map(|e| e.word.clone())), plain);
}

#[test]
fn eigenvalues_are_powers_of_the_sl2_eigenvalue() {
    let (_, gens) = octagon_group().unwrap();
    let reps = enumerate_class_representatives(&gens, 8.0, 0.0, BallOptions::default()).unwrap();
    for p in 2..=4 {
        let rep = Representation::fuchsian(p).unwrap();
        let spec = length_spectrum(&rep, &reps, None).unwrap();
        assert_eq!(spec.dropped(), 0);
        for c in spec.classes() {
            let lambda = (c.l_hyp / 2.0).exp();
            for (i, &l) in c.lambda.iter().enumerate() {
                let expected = lambda.powi(2 * (p - 1 - i) as i32);
                assert!((l - expected).abs() <= 1e-7 * expected, "{} lambda_{}", c.word, i + 1);
            }
        }
    }
}

#[test]
fn attracting_planes_are_positive() {
    let (_, gens) = octagon_group().unwrap();
    let reps = enumerate_class_representatives(&gens, 6.0, 0.0, BallOptions::default()).unwrap();
    for p in 2..=4 {
        let basis = principal_basis(p).unwrap();
        for e in &reps.elements {
            let ed = eigendata_sl2(&e.matrix, &basis).unwrap();
            let o = classify_orientation(&ed.theta(), &basis).unwrap();
            assert_eq!(o, Orientation::Positive, "p = {p}, {}", e.word);
        }
    }
}
