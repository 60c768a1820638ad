use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{fmt_f64, write_atomic, write_json, ExperimentConfig};
use crate::affine_deform::{self, derivative_check, finite_difference_check};
use crate::error::{Error, Result};
use crate::flag_geometry::sample_triple_margins;
use crate::fuchsian::{self, BallOptions, ClassRepresentatives, Sl2Matrix};
use crate::linalg;
use crate::principal_rep::{principal_basis, Representation};
use crate::spectra::{
    anosov_gap_report, bm_average, length_spectrum, perturbed_entropy_scan, rms_ratio, spectrum_entropy, GapReport,
    LengthFunctional, LengthSpectrum,
};
use crate::surface_group::{CyclicWord, Letter, Word};

const FD_MAX_FREE_LENGTH: usize = 3;

fn out_path(c: &ExperimentConfig, name: &str) -> PathBuf {
    c.out.join(name)
}

fn require_builtin(c: &ExperimentConfig, what: &str) -> Result<()> {
    if c.is_builtin() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{what} needs the builtin group: class enumeration is certified for the octagon tiling only"
        )))
    }
}

fn class_reps(c: &ExperimentConfig, max_length: f64) -> Result<ClassRepresentatives> {
    let (_, gens) = c.sl2_generators()?;
    fuchsian::enumerate_class_representatives(&gens, max_length, c.slack, BallOptions::default())
}

fn build_spectrum(c: &ExperimentConfig, rep: &Representation, max_length: f64) -> Result<LengthSpectrum> {
    let reps = class_reps(c, max_length)?;
    let mut spec = length_spectrum(rep, &reps, None)?;
    if spec.dropped() > 0 {
        return Err(Error::numerical(format!("{} classes failed the eigenvalue computation", spec.dropped())));
    }
    if c.cocycle.is_some() {
        spec.attach_margulis(rep)?;
    }
    Ok(spec)
}

/// Reduced words of length 1 to 30, uniformly random letters.
fn random_words(generators: usize, count: usize, seed: u64) -> Vec<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters: Vec<Letter> = Letter::all(generators).collect();
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=30);
            let mut w: Vec<Letter> = Vec::with_capacity(len);
            while w.len() < len {
                let l = letters[rng.random_range(0..letters.len())];
                if w.last().is_some_and(|x| x.inverse() == l) {
                    continue;
                }
                w.push(l);
            }
            Word::new(w)
        })
        .collect()
}

/// The first `count` nontrivial reduced words in shortlex order.
fn shortlex_words(generators: usize, count: usize) -> Vec<Word> {
    let mut out = Vec::with_capacity(count);
    let mut layer = vec![Word::empty()];
    while out.len() < count {
        let mut next = Vec::new();
        for w in &layer {
            for l in Letter::all(generators) {
                if w.letters().last().is_some_and(|x| x.inverse() == l) {
                    continue;
                }
                next.push(w.concat(&Word::new([l])));
            }
        }
        out.extend(next.iter().take(count - out.len()).cloned());
        layer = next;
    }
    out
}

#[derive(Serialize)]
struct CheckRepReport {
    p: usize,
    group: super::GroupSpec,
    relator_residual_sl2: f64,
    relator_residual_v: f64,
    relator_residual_e: f64,
    signature_v: (usize, usize),
    signature_e: (usize, usize),
    words: usize,
    word_source: &'static str,
    max_preservation_residual_v: f64,
    max_preservation_residual_e: f64,
    tolerance: f64,
    pass: bool,
}

/// Form preservation is measured relative to `||M||^2`.
fn relative_preservation(rep: &Representation, w: &Word) -> f64 {
    let m = rep.evaluate_uncached(w);
    let s = linalg::max_abs(&m).max(1.0);
    rep.form().preservation_residual(&m) / (s * s)
}

pub fn check_rep(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (presentation, gens) = c.sl2_generators()?;
    let rep = c.representation()?;
    let emb = rep.embedded()?;
    let k = rep.generator_count();
    let (words, word_source) = match c.seed {
        Some(seed) => (random_words(k, c.samples, seed), "random"),
        None => (shortlex_words(k, c.samples), "shortlex"),
    };
    let max = |r: &Representation| words.iter().map(|w| relative_preservation(r, w)).fold(0.0, f64::max);
    let p = c.p;
    let mut report = CheckRepReport {
        p,
        group: c.group.clone(),
        relator_residual_sl2: fuchsian::evaluate(&gens, presentation.relator()).projective_distance(&Sl2Matrix::IDENTITY),
        relator_residual_v: rep.relator_residual().unwrap_or(0.0),
        relator_residual_e: emb.relator_residual().unwrap_or(0.0),
        signature_v: rep.form().signature(),
        signature_e: emb.form().signature(),
        words: words.len(),
        word_source,
        max_preservation_residual_v: max(&rep),
        max_preservation_residual_e: max(&emb),
        tolerance: c.tolerance,
        pass: false,
    };
    report.pass = report.relator_residual_sl2 <= c.tolerance
        && report.relator_residual_v <= c.tolerance
        && report.relator_residual_e <= c.tolerance
        && report.signature_v == (p, p - 1)
        && report.signature_e == (p, p)
        && report.max_preservation_residual_v <= c.tolerance
        && report.max_preservation_residual_e <= c.tolerance;
    let path = out_path(c, "check_rep.json");
    write_json(&path, &report)?;
    if !report.pass {
        return Err(Error::numerical(format!("representation check failed, see {}", path.display())));
    }
    Ok(vec![path])
}

#[derive(Serialize)]
struct SpectrumReport {
    p: usize,
    max_length: f64,
    radius: f64,
    slack: f64,
    classes: usize,
    gaps: GapReport,
}

pub fn spectrum(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_builtin(c, "spectrum")?;
    let rep = c.representation()?;
    let mut spec = build_spectrum(c, &rep, c.radius)?;
    if let Some(omega) = c.cocycle(&rep)? {
        spec.set_alpha(&omega)?;
    }
    let report = SpectrumReport {
        p: c.p,
        max_length: spec.max_length(),
        radius: spec.radius(),
        slack: spec.slack(),
        classes: spec.len(),
        gaps: anosov_gap_report(&spec, c.tolerance),
    };
    let csv = out_path(c, "spectrum.csv");
    let json = out_path(c, "spectrum.json");
    write_atomic(&csv, spec.to_csv().as_bytes())?;
    write_json(&json, &report)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct EntropyReport {
    p: usize,
    radius: f64,
    classes: usize,
    hyperbolic: crate::spectra::EntropyEstimate,
    last_root: crate::spectra::EntropyEstimate,
    ball_elements: usize,
    ball: crate::spectra::EntropyEstimate,
}

pub fn entropy(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_builtin(c, "entropy")?;
    let rep = c.representation()?;
    let spec = build_spectrum(c, &rep, c.radius)?;
    let window = c.window();
    let (_, gens) = c.sl2_generators()?;
    let ball = fuchsian::enumerate_ball(&gens, c.radius, fuchsian::default_slack(), BallOptions::default())?;
    let report = EntropyReport {
        p: c.p,
        radius: c.radius,
        classes: spec.len(),
        hyperbolic: spectrum_entropy(&spec, &LengthFunctional::Hyperbolic, window)?,
        last_root: spectrum_entropy(&spec, &LengthFunctional::LastRoot, window)?,
        ball_elements: ball.elements().len(),
        ball: crate::spectra::ball_entropy(&ball, window)?,
    };
    let path = out_path(c, "entropy.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct WindowAverage {
    window: [f64; 2],
    bm_average: crate::spectra::BmAverage,
    rms_alpha_over_length: f64,
}

#[derive(Serialize)]
struct MargulisReport {
    p: usize,
    radius: f64,
    classes: usize,
    entropy: f64,
    max_abs_alpha: f64,
    averages: Vec<WindowAverage>,
}

pub fn margulis(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_builtin(c, "margulis")?;
    let rep = c.representation()?;
    let omega = c.require_cocycle(&rep)?;
    let spec = build_spectrum(c, &rep, c.radius)?;
    let alphas = spec.alphas(&omega)?;
    let lengths = spec.l_lastroot();
    let window = c.window();
    let h = spectrum_entropy(&spec, &LengthFunctional::LastRoot, window).map(|e| e.estimate).unwrap_or(1.0);

    let mut csv = String::from("word,word_length,l_lastroot,alpha,alpha_over_length\n");
    for (cl, a) in spec.classes().iter().zip(&alphas) {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            cl.word,
            cl.word_length(),
            fmt_f64(cl.l_lastroot),
            fmt_f64(*a),
            fmt_f64(a / cl.l_lastroot)
        );
    }
    let width = window[1] - window[0];
    let mut averages = Vec::new();
    for end in [window[1] - 4.0, window[1] - 2.0, window[1]] {
        let w = [end - width, end];
        if w[0] <= 0.0 {
            continue;
        }
        averages.push(WindowAverage {
            window: w,
            bm_average: bm_average(&lengths, &alphas, w, h)?,
            rms_alpha_over_length: rms_ratio(&lengths, &alphas, w),
        });
    }
    let report = MargulisReport {
        p: c.p,
        radius: c.radius,
        classes: spec.len(),
        entropy: h,
        max_abs_alpha: alphas.iter().fold(0.0, |m, a| m.max(a.abs())),
        averages,
    };
    let csv_path = out_path(c, "margulis.csv");
    let json = out_path(c, "margulis.json");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_json(&json, &report)?;
    Ok(vec![csv_path, json])
}

#[derive(Serialize)]
struct AlphaSystemCheck {
    z: f64,
    max_below_diagonal: f64,
    min_abs_diagonal: f64,
}

#[derive(Serialize)]
struct TransversalityReport {
    p: usize,
    radius: f64,
    triples: usize,
    min_raw_margin: f64,
    min_balanced_margin: f64,
    alpha_system: Vec<AlphaSystemCheck>,
}

pub fn transversality(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_builtin(c, "transversality")?;
    let seed = c.require_seed("transversality sampling")?;
    let (_, gens) = c.sl2_generators()?;
    let basis = principal_basis(c.p)?;
    let ball = fuchsian::enumerate_ball(&gens, c.radius, fuchsian::default_slack(), BallOptions::default())?;
    let margins = sample_triple_margins(ball.elements(), &basis, c.samples, seed)?;

    let mut csv = String::from("gamma,eta,raw_margin,balanced_margin\n");
    for m in &margins {
        let _ = writeln!(csv, "{},{},{},{}", m.gamma, m.eta, fmt_f64(m.raw), fmt_f64(m.balanced));
    }
    let alpha_system = [0.5, 1.0, 2.0]
        .into_iter()
        .map(|z| {
            let s = basis.alpha_system(z);
            let n = s.nrows();
            let mut below = 0.0f64;
            let mut diag = f64::INFINITY;
            for i in 0..n {
                diag = diag.min(s[(i, i)].abs());
                for j in 0..i {
                    below = below.max(s[(i, j)].abs());
                }
            }
            AlphaSystemCheck { z, max_below_diagonal: below, min_abs_diagonal: diag }
        })
        .collect();
    let report = TransversalityReport {
        p: c.p,
        radius: c.radius,
        triples: margins.len(),
        min_raw_margin: margins.iter().map(|m| m.raw).fold(f64::INFINITY, f64::min),
        min_balanced_margin: margins.iter().map(|m| m.balanced).fold(f64::INFINITY, f64::min),
        alpha_system,
    };
    let csv_path = out_path(c, "transversality.csv");
    let json = out_path(c, "transversality.json");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_json(&json, &report)?;
    Ok(vec![csv_path, json])
}

#[derive(Serialize)]
struct DerivCheckReport {
    p: usize,
    classes: usize,
    max_relative_error_alpha: f64,
    max_lower_derivative: f64,
    free_subgroup: Vec<String>,
    fd_step: f64,
    fd_words: usize,
    max_relative_error_fd: f64,
}

/// Distinct nontrivial classes among the class representatives, in order.
fn distinct_class_words(c: &ExperimentConfig, rep: &Representation) -> Result<Vec<CyclicWord>> {
    let reps = class_reps(c, c.radius)?;
    let presentation = rep.presentation().ok_or_else(|| Error::invalid("missing presentation"))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in &reps.elements {
        let cw = presentation.conjugacy_canonical(&e.word);
        if !cw.is_empty() && seen.insert(cw.clone()) {
            out.push(cw);
        }
    }
    out.sort();
    Ok(out)
}

pub fn deriv_check(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_builtin(c, "deriv-check")?;
    let seed = c.require_seed("class sampling")?;
    let rep = c.representation()?;
    let omega = c.require_cocycle(&rep)?;
    let basis = principal_basis(c.p)?;
    let pool = distinct_class_words(c, &rep)?;
    if pool.is_empty() {
        return Err(Error::invalid("no classes below the radius"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Word> = (0..c.samples.min(pool.len()))
        .map(|_| pool[rng.random_range(0..pool.len())].as_word())
        .collect();

    let mut csv = String::from("route,word,lambda_dot_p,reference,relative_error,max_lower_derivative\n");
    let (mut max_alpha, mut max_lower) = (0.0f64, 0.0f64);
    for w in &picks {
        let d = derivative_check(&rep, &basis, &omega, w)?;
        max_alpha = max_alpha.max(d.relative_error);
        max_lower = max_lower.max(d.lower);
        let _ = writeln!(
            csv,
            "half_alpha,{},{},{},{},{}",
            w,
            fmt_f64(d.lambda_dot_p),
            fmt_f64(d.half_alpha),
            fmt_f64(d.relative_error),
            fmt_f64(d.lower)
        );
    }
    let subgroup = affine_deform::default_free_subgroup(&rep)?;
    let fd_words = affine_deform::admissible_free_words(&rep, &subgroup, FD_MAX_FREE_LENGTH)?;
    let mut max_fd = 0.0f64;
    for w in &fd_words {
        let f = finite_difference_check(&rep, &basis, &subgroup, &omega, w, c.fd_step)?;
        max_fd = max_fd.max(f.relative_error);
        let _ = writeln!(
            csv,
            "finite_difference,{},{},{},{},",
            f.expanded,
            fmt_f64(f.lambda_dot_p),
            fmt_f64(f.finite_difference),
            fmt_f64(f.relative_error)
        );
    }
    let report = DerivCheckReport {
        p: c.p,
        classes: picks.len(),
        max_relative_error_alpha: max_alpha,
        max_lower_derivative: max_lower,
        free_subgroup: subgroup.iter().map(|w| w.to_string()).collect(),
        fd_step: c.fd_step,
        fd_words: fd_words.len(),
        max_relative_error_fd: max_fd,
    };
    let csv_path = out_path(c, "deriv_check.csv");
    let json = out_path(c, "deriv_check.json");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_json(&json, &report)?;
    Ok(vec![csv_path, json])
}

#[derive(Serialize)]
struct ScanReport {
    p: usize,
    spectrum_length: f64,
    #[serde(flatten)]
    scan: crate::spectra::EntropyScan,
    consistency: Option<f64>,
}

/// The spectrum is taken one unit beyond the window so that perturbed
/// lengths below the window end come from enumerated classes.
pub fn scan(c: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    require_builtin(c, "scan")?;
    let rep = c.representation()?;
    let omega = c.require_cocycle(&rep)?;
    let spec = build_spectrum(c, &rep, c.radius + 1.0)?;
    let scan = perturbed_entropy_scan(&spec, &omega, &c.grid, c.window())?;
    let mut csv = String::from("s,estimate,residual,critical_exponent\n");
    for r in &scan.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(r.s),
            fmt_f64(r.estimate),
            fmt_f64(r.residual),
            fmt_f64(r.critical_exponent)
        );
    }
    let report = ScanReport { p: c.p, spectrum_length: spec.max_length(), consistency: scan.consistency(), scan };
    let csv_path = out_path(c, "scan.csv");
    let json = out_path(c, "scan.json");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_json(&json, &report)?;
    Ok(vec![csv_path, json])
}
