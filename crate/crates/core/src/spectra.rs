//! Length spectra of conjugacy classes, entropy estimates, orbit averages
//! approximating the Bowen-Margulis measure, perturbed-length entropy scans
//! and Anosov gap statistics.

use std::collections::HashMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::affine_deform::{margulis_covector, Cocycle};
use crate::error::{Error, Result};
use crate::fuchsian::{translation_length, BallEnumeration, ClassRepresentatives};
use crate::principal_rep::{eigendata, eigendata_sl2, principal_basis, EigenData, Representation};
use crate::surface_group::CyclicWord;

/// Per-class data.
#[derive(Clone, Debug)]
pub struct ClassRecord {
    pub word: CyclicWord,
    /// `|tr|` of the SL(2,R) representative.
    pub trace: f64,
    pub l_hyp: f64,
    /// `log lambda_p + log lambda_{p-1}`.
    pub l_lastroot: f64,
    /// `lambda_1 > ... > lambda_p`.
    pub lambda: Vec<f64>,
    /// `lambda_bar_1 < ... < lambda_bar_p`.
    pub lambda_bar: Vec<f64>,
    pub alpha: Option<f64>,
}

impl ClassRecord {
    pub fn word_length(&self) -> usize {
        self.word.len()
    }
}

/// Conjugacy classes with hyperbolic length at most `max_length`, sorted by
/// `(l_hyp, word)`.
#[derive(Clone, Debug)]
pub struct LengthSpectrum {
    p: usize,
    max_length: f64,
    radius: f64,
    slack: f64,
    classes: Vec<ClassRecord>,
    covectors: Option<Vec<DVector<f64>>>,
    dropped: usize,
}

impl LengthSpectrum {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn max_length(&self) -> f64 {
        self.max_length
    }

    /// Radius of the ball the representatives were taken from.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    pub fn classes(&self) -> &[ClassRecord] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Classes dropped because their eigendata failed.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Computes the functionals `omega -> alpha(gamma)` for every class, so
    /// that [`LengthSpectrum::alphas`] is a dot product per class.
    pub fn attach_margulis(&mut self, rep: &Representation) -> Result<()> {
        if self.covectors.is_some() {
            return Ok(());
        }
        let covectors = self
            .classes
            .par_iter()
            .map(|c| margulis_covector(rep, &c.word.as_word()))
            .collect::<Result<Vec<_>>>()?;
        self.covectors = Some(covectors);
        Ok(())
    }

    /// Margulis invariants of every class for `omega`.
    pub fn alphas(&self, omega: &Cocycle) -> Result<Vec<f64>> {
        let cov = self
            .covectors
            .as_ref()
            .ok_or_else(|| Error::invalid("Margulis functionals not attached to the spectrum"))?;
        let flat = omega.flatten();
        if cov.first().is_some_and(|c| c.len() != flat.len()) {
            return Err(Error::invalid("cocycle does not match the representation"));
        }
        Ok(cov.iter().map(|c| c.dot(&flat)).collect())
    }

    /// Fills `alpha` in every record.
    pub fn set_alpha(&mut self, omega: &Cocycle) -> Result<()> {
        let alphas = self.alphas(omega)?;
        for (c, a) in self.classes.iter_mut().zip(alphas) {
            c.alpha = Some(a);
        }
        Ok(())
    }

    pub fn l_hyp(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.l_hyp).collect()
    }

    pub fn l_lastroot(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.l_lastroot).collect()
    }

    /// CSV with one row per class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("word,word_length,trace,l_hyp,l_lastroot,alpha");
        for i in 1..=self.p {
            out += &format!(",lambda_{i}");
        }
        out.push('\n');
        for c in &self.classes {
            out += &format!(
                "{},{},{:.16e},{:.16e},{:.16e},",
                c.word,
                c.word_length(),
                c.trace,
                c.l_hyp,
                c.l_lastroot
            );
            if let Some(a) = c.alpha {
                out += &format!("{a:.16e}");
            }
            for l in &c.lambda {
                out += &format!(",{l:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// Groups traces within `tol` and returns `(trace, classes)` pairs in
    /// increasing order.
    pub fn trace_multiplicities(&self, tol: f64) -> Vec<(f64, usize)> {
        let mut traces: Vec<f64> = self.classes.iter().map(|c| c.trace).collect();
        traces.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for t in traces {
            match out.last_mut() {
                Some((t0, n)) if (t - *t0).abs() <= tol * t0.max(1.0) => *n += 1,
                _ => out.push((t, 1)),
            }
        }
        out
    }
}

/// Builds the spectrum of `rep` from class representatives of the Fuchsian
/// group underlying it.
pub fn length_spectrum(
    rep: &Representation,
    reps: &ClassRepresentatives,
    omega: Option<&Cocycle>,
) -> Result<LengthSpectrum> {
    let presentation = rep
        .presentation()
        .ok_or_else(|| Error::invalid("a length spectrum needs a group presentation"))?;
    let basis = principal_basis(rep.p())?;

    let mut seen: HashMap<CyclicWord, usize> = HashMap::new();
    let mut firsts = Vec::new();
    for (i, e) in reps.elements.iter().enumerate() {
        let c = presentation.conjugacy_canonical(&e.word);
        if c.is_empty() {
            continue;
        }
        if let std::collections::hash_map::Entry::Vacant(v) = seen.entry(c.clone()) {
            v.insert(i);
            firsts.push((c, i));
        }
    }

    let results: Vec<Result<ClassRecord>> = firsts
        .par_iter()
        .map(|(word, i)| {
            let m = &reps.elements[*i].matrix;
            let l_hyp = translation_length(m)?;
            let w = word.as_word();
            let ed: EigenData = match rep.sl2_holonomy(&w) {
                Some(g) => eigendata_sl2(&g, &basis)?,
                None => eigendata(&rep.evaluate(&w), &basis)?,
            };
            let p = ed.p();
            let lambda = ed.lambda().to_vec();
            let l_lastroot = lambda[p - 1].ln() + lambda[p - 2].ln();
            Ok(ClassRecord {
                word: word.clone(),
                trace: m.trace().abs(),
                l_hyp,
                l_lastroot,
                lambda,
                lambda_bar: ed.lambda_bar().to_vec(),
                alpha: None,
            })
        })
        .collect();

    let mut classes = Vec::with_capacity(results.len());
    let mut dropped = 0;
    for (r, (word, _)) in results.into_iter().zip(&firsts) {
        match r {
            Ok(c) => classes.push(c),
            Err(e) => {
                log::warn!("dropping class {word}: {e}");
                dropped += 1;
            }
        }
    }
    classes.sort_by(|x, y| x.l_hyp.total_cmp(&y.l_hyp).then_with(|| x.word.cmp(&y.word)));
    let mut spec = LengthSpectrum {
        p: rep.p(),
        max_length: reps.max_length,
        radius: reps.radius,
        slack: reps.slack,
        classes,
        covectors: None,
        dropped,
    };
    if let Some(omega) = omega {
        spec.attach_margulis(rep)?;
        spec.set_alpha(omega)?;
    }
    Ok(spec)
}

/// Length functionals on conjugacy classes.
#[derive(Clone, Debug)]
pub enum LengthFunctional {
    Hyperbolic,
    LastRoot,
    /// First-order perturbed last-root length `l + s alpha / 2`.
    Perturbed { omega: Cocycle, s: f64 },
}

impl LengthFunctional {
    pub fn name(&self) -> String {
        match self {
            LengthFunctional::Hyperbolic => "hyperbolic".into(),
            LengthFunctional::LastRoot => "last_root".into(),
            LengthFunctional::Perturbed { s, .. } => format!("perturbed({s})"),
        }
    }

    /// Values on every class of `spec`, in order.
    pub fn values(&self, spec: &LengthSpectrum) -> Result<Vec<f64>> {
        match self {
            LengthFunctional::Hyperbolic => Ok(spec.l_hyp()),
            LengthFunctional::LastRoot => Ok(spec.l_lastroot()),
            LengthFunctional::Perturbed { omega, s } => perturbed_values(spec, &spec.alphas(omega)?, *s),
        }
    }
}

/// `l_lastroot + s alpha / 2`, rejecting scales at which some class would
/// reach a nonpositive length.
pub fn perturbed_values(spec: &LengthSpectrum, alphas: &[f64], s: f64) -> Result<Vec<f64>> {
    let mut worst: Option<(usize, f64)> = None;
    for (i, (c, a)) in spec.classes.iter().zip(alphas).enumerate() {
        let ratio = s.abs() * a.abs() / c.l_lastroot;
        if worst.is_none_or(|(_, r)| ratio > r) {
            worst = Some((i, ratio));
        }
    }
    if let Some((i, r)) = worst {
        if r >= 1.0 {
            return Err(Error::invalid(format!(
                "perturbed length of class {} is not positive at s = {s} (|s alpha| / l = {r})",
                spec.classes[i].word
            )));
        }
    }
    Ok(spec.classes.iter().zip(alphas).map(|(c, a)| c.l_lastroot + 0.5 * s * a).collect())
}

/// How orbits are counted when estimating entropy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Counting {
    /// `N(T) = #{x <= T}`; grows like `e^{hT}` for group elements.
    Plain,
    /// `N(T) = sum_{x <= T} x`; grows like `e^{hT}` for closed orbits,
    /// whose plain count carries an extra `1/T`.
    LengthWeighted,
}

/// Entropy estimate from a least-squares fit of `log N(T)` over a window.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyEstimate {
    pub estimate: f64,
    pub window: [f64; 2],
    /// RMS deviation of `log N` from the fitted line.
    pub residual: f64,
    /// Number of values in the window.
    pub count: usize,
    /// Values at most `T1`.
    pub total: usize,
    pub critical_exponent: f64,
    pub counting: Counting,
}

const FIT_STEP: f64 = 0.01;
pub const MIN_WINDOW_COUNT: usize = 100;

/// Slope of `log N(T)` on `[t0, t1]`, sampled every 0.01, and the critical
/// exponent cross-check.
///
/// The critical exponent is the `s` at which the windowed Poincare sums
/// `sum w(x) e^{-s x}` over the lower and upper halves of the window agree,
/// i.e. the exponent that makes the series grow linearly.
pub fn entropy_estimate(values: &[f64], window: [f64; 2], counting: Counting) -> Result<EntropyEstimate> {
    let [t0, t1] = window;
    if !(t0.is_finite() && t1.is_finite()) || t1 - t0 < 2.0 || t0 <= 0.0 {
        return Err(Error::invalid(format!("entropy window [{t0}, {t1}] must have T0 > 0 and T1 - T0 >= 2")));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let weight = |x: f64| match counting {
        Counting::Plain => 1.0,
        Counting::LengthWeighted => x,
    };
    let count = sorted.iter().filter(|&&x| x >= t0 && x <= t1).count();
    if count < MIN_WINDOW_COUNT {
        return Err(Error::invalid(format!(
            "only {count} values in window [{t0}, {t1}], need at least {MIN_WINDOW_COUNT}"
        )));
    }
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for &x in &sorted {
        acc += weight(x);
        cumulative.push(acc);
    }
    let n_at = |t: f64| {
        let k = sorted.partition_point(|&x| x <= t);
        if k == 0 {
            0.0
        } else {
            cumulative[k - 1]
        }
    };
    if n_at(t0) <= 0.0 {
        return Err(Error::invalid(format!("no values below the window start {t0}")));
    }
    let steps = ((t1 - t0) / FIT_STEP).round() as usize;
    let xs: Vec<f64> = (0..=steps).map(|k| t0 + (t1 - t0) * k as f64 / steps as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&t| n_at(t).ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>()
        / xs.len() as f64)
        .sqrt();

    let in_window: Vec<f64> = sorted.iter().copied().filter(|&x| x >= t0 && x <= t1).collect();
    let critical_exponent = critical_exponent(&in_window, window, weight);
    Ok(EntropyEstimate {
        estimate: slope,
        window,
        residual,
        count,
        total: sorted.partition_point(|&x| x <= t1),
        critical_exponent,
        counting,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn critical_exponent(values: &[f64], window: [f64; 2], weight: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (window[0] + window[1]);
    // shifting by `mid` keeps the exponentials in range
    let balance = |s: f64| {
        values
            .iter()
            .map(|&x| {
                let w = weight(x) * (-s * (x - mid)).exp();
                if x < mid {
                    w
                } else {
                    -w
                }
            })
            .sum::<f64>()
    };
    // balance is increasing in s
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if balance(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Entropy of a spectrum under a functional, counting closed orbits
/// weighted by length.
pub fn spectrum_entropy(
    spec: &LengthSpectrum,
    functional: &LengthFunctional,
    window: [f64; 2],
) -> Result<EntropyEstimate> {
    check_window(spec, window)?;
    entropy_estimate(&functional.values(spec)?, window, Counting::LengthWeighted)
}

/// Growth rate of the element count `#{g : d(o, g o) <= T}`.
pub fn ball_entropy(ball: &BallEnumeration, window: [f64; 2]) -> Result<EntropyEstimate> {
    if window[1] > ball.radius() + 1e-12 {
        return Err(Error::invalid(format!("window end {} exceeds the ball radius {}", window[1], ball.radius())));
    }
    let d: Vec<f64> = ball.elements().iter().skip(1).map(|e| e.distance).collect();
    entropy_estimate(&d, window, Counting::Plain)
}

fn check_window(spec: &LengthSpectrum, window: [f64; 2]) -> Result<()> {
    if window[1] > spec.max_length + 1e-12 {
        return Err(Error::invalid(format!(
            "window end {} exceeds the spectrum length bound {}",
            window[1], spec.max_length
        )));
    }
    Ok(())
}

/// Closed-orbit average of an observable.
#[derive(Clone, Debug, Serialize)]
pub struct BmAverage {
    /// `sum obs / sum l` over classes with `l` in the window.
    pub value: f64,
    /// Same with weights `e^{-h l}`.
    pub weighted: f64,
    pub window: [f64; 2],
    pub count: usize,
}

/// Averages `obs` against the closed orbits whose length lies in `window`.
pub fn bm_average(lengths: &[f64], obs: &[f64], window: [f64; 2], entropy: f64) -> Result<BmAverage> {
    if lengths.len() != obs.len() {
        return Err(Error::invalid("observable and length lists differ in size"));
    }
    let (mut num, mut den, mut wnum, mut wden, mut count) = (0.0, 0.0, 0.0, 0.0, 0);
    for (&l, &o) in lengths.iter().zip(obs) {
        if l < window[0] || l > window[1] {
            continue;
        }
        let w = (-entropy * (l - window[1])).exp();
        num += o;
        den += l;
        wnum += w * o;
        wden += w * l;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(format!("no closed orbits in window [{}, {}]", window[0], window[1])));
    }
    Ok(BmAverage { value: num / den, weighted: wnum / wden, window, count })
}

/// RMS of `alpha / l` over the window.
pub fn rms_ratio(lengths: &[f64], obs: &[f64], window: [f64; 2]) -> f64 {
    let (sum, n) = lengths
        .iter()
        .zip(obs)
        .filter(|(l, _)| **l >= window[0] && **l <= window[1])
        .fold((0.0, 0usize), |(s, n), (l, o)| (s + (o / l).powi(2), n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub s: f64,
    pub estimate: f64,
    pub residual: f64,
    pub critical_exponent: f64,
}

/// Entropy of the perturbed spectra along an `s` grid.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyScan {
    pub rows: Vec<ScanRow>,
    pub window: [f64; 2],
    /// `(h(s) - h(-s)) / 2s` at the smallest `s > 0` whose negative is also
    /// on the grid.
    pub central_slope: Option<f64>,
    /// `bm_average(alpha / 2)` of the unperturbed spectrum over the window.
    pub half_alpha_average: f64,
    /// Entropy at `s = 0`.
    pub base_entropy: f64,
    /// Largest fit residual among the rows.
    pub max_residual: f64,
}

impl EntropyScan {
    /// `slope + h^2 bm_average(alpha / 2)`, which vanishes at first order.
    pub fn consistency(&self) -> Option<f64> {
        self.central_slope.map(|d| d + self.base_entropy.powi(2) * self.half_alpha_average)
    }
}

/// Entropy of `l + s alpha / 2` for each `s` in `grid`.
///
/// Every perturbed length below `T1` must come from a class in the
/// spectrum; the window end is therefore required to stay below
/// `max_length (1 - max|s| k)` with `k = max |alpha| / 2l` over the
/// spectrum.
pub fn perturbed_entropy_scan(
    spec: &LengthSpectrum,
    omega: &Cocycle,
    grid: &[f64],
    window: [f64; 2],
) -> Result<EntropyScan> {
    let alphas = spec.alphas(omega)?;
    let k = spec
        .classes
        .iter()
        .zip(&alphas)
        .map(|(c, a)| 0.5 * a.abs() / c.l_lastroot)
        .fold(0.0, f64::max);
    let smax = grid.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let bound = spec.max_length * (1.0 - smax * k);
    if window[1] > bound + 1e-12 {
        return Err(Error::invalid(format!(
            "window end {} exceeds {bound}, the length up to which the perturbed spectrum is complete",
            window[1]
        )));
    }
    let rows = grid
        .iter()
        .map(|&s| {
            let e = entropy_estimate(&perturbed_values(spec, &alphas, s)?, window, Counting::LengthWeighted)?;
            Ok(ScanRow { s, estimate: e.estimate, residual: e.residual, critical_exponent: e.critical_exponent })
        })
        .collect::<Result<Vec<_>>>()?;
    let at = |s: f64| rows.iter().find(|r| r.s == s).map(|r| r.estimate);
    let central_slope = grid
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && at(-s).is_some())
        .min_by(f64::total_cmp)
        .map(|s| (at(s).unwrap() - at(-s).unwrap()) / (2.0 * s));
    let base = entropy_estimate(&spec.l_lastroot(), window, Counting::LengthWeighted)?;
    let half: Vec<f64> = alphas.iter().map(|a| 0.5 * a).collect();
    let avg = bm_average(&spec.l_lastroot(), &half, window, base.estimate)?;
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(EntropyScan {
        rows,
        window,
        central_slope,
        half_alpha_average: avg.value,
        base_entropy: base.estimate,
        max_residual,
    })
}

/// A class failing one of the gap conditions.
#[derive(Clone, Debug, Serialize)]
pub struct GapViolation {
    pub word: String,
    pub reason: String,
}

/// Eigenvalue gap statistics over a spectrum.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub classes: usize,
    /// `max |lambda_p - 1|`.
    pub max_neutral_deviation: f64,
    /// `max |lambda_i lambda_bar_i - 1|`.
    pub max_pairing_deviation: f64,
    /// `min log(lambda_i / lambda_{i+1})`.
    pub min_ordering_gap: f64,
    /// `min log(lambda_i lambda_j / (lambda_{p-1} lambda_p))` over the other pairs.
    pub min_product_gap: f64,
    /// `min log(lambda_{p-1} lambda_p)`.
    pub min_last_root: f64,
    pub violations: Vec<GapViolation>,
}

/// Checks the eigenvalue ordering and the product gaps class by class.
pub fn anosov_gap_report(spec: &LengthSpectrum, tol: f64) -> GapReport {
    let mut r = GapReport {
        classes: spec.classes.len(),
        max_neutral_deviation: 0.0,
        max_pairing_deviation: 0.0,
        min_ordering_gap: f64::INFINITY,
        min_product_gap: f64::INFINITY,
        min_last_root: f64::INFINITY,
        violations: Vec::new(),
    };
    for c in &spec.classes {
        let p = c.lambda.len();
        let mut fail = |reason: String| r.violations.push(GapViolation { word: c.word.to_string(), reason });
        let neutral = (c.lambda[p - 1] - 1.0).abs();
        r.max_neutral_deviation = r.max_neutral_deviation.max(neutral);
        if neutral > tol {
            fail(format!("lambda_p = {}", c.lambda[p - 1]));
        }
        for i in 0..p {
            let dev = (c.lambda[i] * c.lambda_bar[i] - 1.0).abs();
            r.max_pairing_deviation = r.max_pairing_deviation.max(dev);
            if dev > tol {
                fail(format!("lambda_{0} lambda_bar_{0} = {1}", i + 1, c.lambda[i] * c.lambda_bar[i]));
            }
        }
        for i in 0..p - 1 {
            let gap = (c.lambda[i] / c.lambda[i + 1]).ln();
            r.min_ordering_gap = r.min_ordering_gap.min(gap);
            if !(gap > 0.0) {
                fail(format!("lambda_{} <= lambda_{}", i + 1, i + 2));
            }
        }
        let last = (c.lambda[p - 2] * c.lambda[p - 1]).ln();
        r.min_last_root = r.min_last_root.min(last);
        if !(last > 0.0) {
            fail(format!("lambda_(p-1) lambda_p = {}", last.exp()));
        }
        for i in 0..p {
            for j in i + 1..p {
                if i == p - 2 && j == p - 1 {
                    continue;
                }
                let gap = (c.lambda[i] * c.lambda[j]).ln() - last;
                r.min_product_gap = r.min_product_gap.min(gap);
                if !(gap > 0.0) {
                    fail(format!("lambda_{} lambda_{} not above the last root", i + 1, j + 1));
                }
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::{default_slack, enumerate_ball, enumerate_class_representatives, octagon_group, BallOptions};

    fn spectrum(p: usize, t: f64) -> LengthSpectrum {
        let (_, gens) = octagon_group().unwrap();
        let reps = enumerate_class_representatives(&gens, t, 0.0, BallOptions::default()).unwrap();
        length_spectrum(&Representation::fuchsian(p).unwrap(), &reps, None).unwrap()
    }

    #[test]
    fn shortest_classes() {
        let s = spectrum(2, 4.0);
        assert_eq!(s.dropped(), 0);
        // |tr| = 2 + sqrt 2 for every generator
        let l0 = s.classes()[0].l_hyp;
        assert!((l0 - 2.0 * (1.0 + 0.5 * 2f64.sqrt()).acosh()).abs() < 1e-9, "{l0}");
        assert!(s.classes().iter().filter(|c| (c.l_hyp - l0).abs() < 1e-9).count() >= 8);
        for c in s.classes() {
            assert!((c.l_lastroot - c.l_hyp).abs() < 1e-8);
        }
    }

    #[test]
    fn traces_pair_up_with_inverse_classes() {
        let s = spectrum(2, 7.0);
        for (_, n) in s.trace_multiplicities(1e-7) {
            assert_eq!(n % 2, 0);
        }
    }

    #[test]
    fn exponential_model_is_recovered() {
        // x = log(1 + k / 50): N(T) ~ 50 e^T
        let xs: Vec<f64> = (1..200_000).map(|k| (1.0 + k as f64 / 50.0).ln()).collect();
        let e = entropy_estimate(&xs, [4.0, 8.0], Counting::Plain).unwrap();
        assert!((e.estimate - 1.0).abs() < 0.01, "{}", e.estimate);
        assert!((e.critical_exponent - 1.0).abs() < 0.01);
        assert!(entropy_estimate(&xs[..50], [0.5, 3.0], Counting::Plain).is_err());
        assert!(entropy_estimate(&xs, [4.0, 5.0], Counting::Plain).is_err());
    }

    #[test]
    fn ball_growth_rate() {
        let (_, gens) = octagon_group().unwrap();
        let ball = enumerate_ball(&gens, 10.0, default_slack(), BallOptions::default()).unwrap();
        let e = ball_entropy(&ball, [6.0, 10.0]).unwrap();
        assert!((e.estimate - 1.0).abs() < 0.1, "{}", e.estimate);
    }

    #[test]
    fn average_normalisation() {
        let l = [1.0, 2.0, 3.0];
        let avg = bm_average(&l, &l, [0.0, 10.0], 1.0).unwrap();
        assert!((avg.value - 1.0).abs() < 1e-15 && (avg.weighted - 1.0).abs() < 1e-15);
        assert!(bm_average(&l, &l, [5.0, 10.0], 1.0).is_err());
    }

    #[test]
    fn fuchsian_gaps() {
        let s = spectrum(3, 6.0);
        let r = anosov_gap_report(&s, 1e-9);
        assert!(r.violations.is_empty(), "{:?}", &r.violations[..1]);
        assert!(r.min_product_gap > 0.0 && r.min_last_root > 0.0);
    }
}
