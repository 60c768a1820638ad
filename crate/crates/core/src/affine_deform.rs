//! Affine deformations of SO(p, p-1) representations: translation cocycles,
//! neutral vectors, Margulis invariants, the associated tangent directions
//! in so(p, p), first-order eigenvalue variations and finite deformations
//! of free subgroups.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fuchsian::{self, BoundaryPoint, Sl2Matrix};
use crate::linalg;
use crate::principal_rep::{
    self, eigendata, eigendata_sl2, EigenData, PrincipalBasis, Representation, VSpectrum,
};
use crate::surface_group::{cyclic_reduce, extend_cocycle, CocycleBasis, Letter, Word};

/// Translation parts `omega_g`, one vector of `V` per generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Cocycle {
    vectors: Vec<DVector<f64>>,
}

impl Cocycle {
    pub fn new(vectors: Vec<DVector<f64>>) -> Self {
        Cocycle { vectors }
    }

    pub fn zero(generators: usize, dim: usize) -> Self {
        Cocycle { vectors: vec![DVector::zeros(dim); generators] }
    }

    /// `omega_g = v - rho0(g) v`.
    pub fn coboundary(rho0: &Representation, v: &DVector<f64>) -> Self {
        let vectors = rho0.generators().iter().map(|g| v - g * v).collect();
        Cocycle { vectors }
    }

    /// Gaussian combination of a cocycle basis, reproducible from `seed`.
    pub fn random(basis: &CocycleBasis, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<f64> = (0..basis.dimension()).map(|_| StandardNormal.sample(&mut rng)).collect();
        basis.combine(&coeffs)
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn generator_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn flatten(&self) -> DVector<f64> {
        let d = self.vectors.first().map(|v| v.len()).unwrap_or(0);
        DVector::from_fn(d * self.vectors.len(), |i, _| self.vectors[i / d][i % d])
    }

    pub fn from_flat(flat: &DVector<f64>, generators: usize) -> Self {
        let d = flat.len() / generators;
        let vectors = (0..generators).map(|g| flat.rows(g * d, d).into_owned()).collect();
        Cocycle { vectors }
    }

    pub fn add(&self, other: &Cocycle) -> Cocycle {
        Cocycle { vectors: self.vectors.iter().zip(&other.vectors).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: f64) -> Cocycle {
        Cocycle { vectors: self.vectors.iter().map(|a| a * s).collect() }
    }

    /// `omega_R` along the relator.
    pub fn relator_residual(&self, rho0: &Representation) -> Option<f64> {
        let r = rho0.presentation()?.relator().clone();
        Some(extend_cocycle(self, &r, rho0).amax())
    }
}

/// Unit spacelike fixed vector of `rho0(w)` with its orientation
/// certificate.
#[derive(Clone, Debug)]
pub struct NeutralVector {
    pub x: DVector<f64>,
    /// `det[v_1, ..., v_{p-1}, x, v_{p+1}, ..., v_{2p-1}]`, positive.
    pub certificate: f64,
    /// `||A x - x|| / (||A|| ||x||)`.
    pub residual: f64,
}

fn spectrum_of(rho0: &Representation, w: &Word) -> Result<(VSpectrum, DMatrix<f64>)> {
    if w.is_empty() {
        return Err(Error::invalid("the identity has no neutral vector"));
    }
    let a = rho0.evaluate(w);
    let vs = match rho0.sl2_holonomy(w) {
        Some(g) => principal_rep::v_spectrum_sl2(rho0.p(), &g)?,
        None => principal_rep::v_spectrum(&a, rho0.form())?,
    };
    Ok((vs, a))
}

pub fn neutral_vector(rho0: &Representation, w: &Word) -> Result<NeutralVector> {
    let (vs, a) = spectrum_of(rho0, w)?;
    let x = vs.neutral().clone();
    let residual = (&a * &x - &x).norm() / (a.norm() * x.norm());
    if residual > principal_rep::DEFAULT_TOL {
        return Err(Error::numerical(format!("fixed vector residual {residual:e} for {w}")));
    }
    let certificate = linalg::from_columns(vs.vectors()).determinant();
    Ok(NeutralVector { x, certificate, residual })
}

/// `Q(omega_w, x_w)` evaluated literally.
pub fn margulis_invariant_direct(rho0: &Representation, omega: &Cocycle, w: &Word) -> Result<f64> {
    let x = neutral_vector(rho0, w)?.x;
    Ok(rho0.form().pair(&extend_cocycle(omega, w, rho0), &x))
}

fn rotation(w: &Word, j: usize) -> Word {
    let l = w.letters();
    Word::new(l[j..].iter().chain(l[..j].iter()).copied())
}

/// The Margulis invariant `alpha(w) = Q(omega_w, x_w)`.
pub fn margulis_invariant(rho0: &Representation, omega: &Cocycle, w: &Word) -> Result<f64> {
    Ok(margulis_covector(rho0, w)?.dot(&omega.flatten()))
}

/// The linear functional `omega -> alpha(w)` on flattened cocycles.
///
/// Expanding the cocycle rule and moving each factor onto the neutral
/// vector gives `alpha(w) = sum_j Q(omega_{l_j}, x_{r_j})` over the letters
/// of `w`, where `r_j` is the rotation of `w` starting at `l_j` (or at the
/// next letter, with a sign, when `l_j` is an inverse). Every term is of
/// unit size, which avoids the cancellation in `Q(omega_w, x_w)` when
/// `rho0(w)` is large. The word is cyclically reduced first, which leaves
/// `alpha` unchanged and keeps the rotations short. Without an SL(2,R) lift
/// the literal formula is applied to unit cocycles instead.
pub fn margulis_covector(rho0: &Representation, w: &Word) -> Result<DVector<f64>> {
    let w = &cyclic_reduce(w);
    if w.is_empty() {
        return Err(Error::invalid("the identity has no Margulis invariant"));
    }
    let d = rho0.dim();
    let g = rho0.generator_count();
    let mut out = DVector::zeros(d * g);
    if rho0.sl2().is_none() {
        let x = neutral_vector(rho0, w)?.x;
        for i in 0..d * g {
            let mut flat = DVector::zeros(d * g);
            flat[i] = 1.0;
            let unit = Cocycle::from_flat(&flat, g);
            out[i] = rho0.form().pair(&extend_cocycle(&unit, w, rho0), &x);
        }
        return Ok(out);
    }
    let n = w.len();
    let neutrals = (0..n)
        .map(|j| neutral_vector(rho0, &rotation(w, j)).map(|nv| rho0.form().lower(&nv.x)))
        .collect::<Result<Vec<_>>>()?;
    for (j, &l) in w.letters().iter().enumerate() {
        let mut block = out.rows_mut(l.generator() * d, d);
        if l.is_inverse() {
            block -= &neutrals[(j + 1) % n];
        } else {
            block += &neutrals[j];
        }
    }
    Ok(out)
}

/// The element `X_w` of so(p, p): `u -> Q(u, w) f` on `V`, `f -> w`.
pub fn x_matrix(basis: &PrincipalBasis, w: &DVector<f64>) -> DMatrix<f64> {
    let d = w.len();
    let covector = basis.form_v().lower(w);
    let mut x = DMatrix::zeros(d + 1, d + 1);
    for j in 0..d {
        x[(d, j)] = covector[j];
        x[(j, d)] = w[j];
    }
    x
}

/// Tangent direction `rho_dot_g = X_{c_g}` with `c_g = sigma omega_g / 2`,
/// right-trivialized: `rho_t(g) = exp(t X_{c_g}) rho0(g)`.
#[derive(Clone, Debug)]
pub struct DeformationDirection {
    c: Cocycle,
    matrices: Vec<DMatrix<f64>>,
}

impl DeformationDirection {
    /// Translation data `c_g`.
    pub fn cocycle(&self) -> &Cocycle {
        &self.c
    }

    /// `rho_dot_g` per generator.
    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `rho_dot_w` as the Lie-algebra cocycle `X_{c_w}`.
    pub fn at(&self, rho0: &Representation, basis: &PrincipalBasis, w: &Word) -> DMatrix<f64> {
        x_matrix(basis, &extend_cocycle(&self.c, w, rho0))
    }

    /// `rho_dot_w` by `rho_dot_{uv} = rho_dot_u + Ad(rho0(u)) rho_dot_v` on
    /// matrices.
    pub fn at_by_adjoint(&self, rho0: &Representation, basis: &PrincipalBasis, w: &Word) -> DMatrix<f64> {
        let d = rho0.dim() + 1;
        let mut acc = DMatrix::<f64>::zeros(d, d);
        let mut prefix = DMatrix::<f64>::identity(d, d);
        let mut prefix_inv = DMatrix::<f64>::identity(d, d);
        for &l in w.letters() {
            let step = self.letter(rho0, basis, l);
            acc += &prefix * step * &prefix_inv;
            let m = principal_rep::embed_unchecked(rho0.letter_matrix(l));
            let m_inv = principal_rep::embed_unchecked(rho0.letter_matrix(l.inverse()));
            prefix *= m;
            prefix_inv = m_inv * prefix_inv;
        }
        acc
    }

    /// Right-trivialized derivative of a letter; inverse letters give
    /// `-Ad(rho0(g)^-1) rho_dot_g`.
    pub fn letter(&self, rho0: &Representation, basis: &PrincipalBasis, l: Letter) -> DMatrix<f64> {
        let c = &self.c.vectors()[l.generator()];
        if l.is_inverse() {
            -x_matrix(basis, &(rho0.letter_matrix(l) * c))
        } else {
            self.matrices[l.generator()].clone()
        }
    }
}

/// The direction whose first-order eigenvalue variation is `alpha / 2` on
/// the neutral line.
pub fn deformation_direction(omega: &Cocycle, basis: &PrincipalBasis) -> DeformationDirection {
    let c = omega.scale(0.5 * basis.sigma());
    let matrices = c.vectors().iter().map(|w| x_matrix(basis, w)).collect();
    DeformationDirection { c, matrices }
}

/// The vector `e_f` with `Q(omega_g, v) = <rho_dot_g(e_f) | v>` for the
/// derivative `rho_dot_g` of [`deformation_direction`] at `rho0(g)`.
pub fn e_f(basis: &PrincipalBasis) -> DVector<f64> {
    basis.f() * (2.0 * basis.sigma())
}

/// First-order variations of the eigenvalues, in the order of
/// [`EigenData`]: `lambda_dot` then `lambda_bar_dot`.
#[derive(Clone, Debug)]
pub struct EigenDerivative {
    pub lambda_dot: Vec<f64>,
    pub lambda_bar_dot: Vec<f64>,
}

fn perturbation(ed: &EigenData, m: &DMatrix<f64>) -> EigenDerivative {
    let term = |u: &DVector<f64>, v: &DVector<f64>| u.dot(&(m * v)) / u.dot(v);
    EigenDerivative {
        lambda_dot: ed.v().iter().zip(ed.left()).map(|(v, u)| term(u, v)).collect(),
        lambda_bar_dot: ed.v_bar().iter().zip(ed.left_bar()).map(|(v, u)| term(u, v)).collect(),
    }
}

/// `lambda_dot_i = u_i . (rho_dot_w rho0(w)) v_i / (u_i . v_i)` for a map
/// `a = rho0(w)` of `E` and its right-trivialized derivative.
pub fn eigenvalue_derivative(
    a: &DMatrix<f64>,
    a_dot: &DMatrix<f64>,
    basis: &PrincipalBasis,
) -> Result<EigenDerivative> {
    let ed = eigendata(a, basis)?;
    Ok(perturbation(&ed, &(a_dot * a)))
}

/// [`eigenvalue_derivative`] along a word, summed over rotations so that
/// only unit-size eigenvectors of conjugates of `w` enter:
/// `lambda_dot_i / lambda_i = sum_j u_i^(j) . X_j v_i^(j) / (u_i^(j) . v_i^(j))`
/// where `X_j` is the derivative of the `j`-th letter and the eigenvectors
/// are those of the rotation starting at that letter.
pub fn eigenvalue_derivative_word(
    rho0: &Representation,
    dir: &DeformationDirection,
    basis: &PrincipalBasis,
    w: &Word,
) -> Result<EigenDerivative> {
    if w.is_empty() {
        return Err(Error::invalid("the identity has no eigenvalue derivative"));
    }
    let p = basis.p();
    let mut out = EigenDerivative { lambda_dot: vec![0.0; p], lambda_bar_dot: vec![0.0; p] };
    let mut lambda = Vec::new();
    let mut lambda_bar = Vec::new();
    for (j, &l) in w.letters().iter().enumerate() {
        let r = rotation(w, j);
        let ed = match rho0.sl2_holonomy(&r) {
            Some(g) => eigendata_sl2(&g, basis)?,
            None => eigendata(&principal_rep::embed_unchecked(&rho0.evaluate(&r)), basis)?,
        };
        let term = perturbation(&ed, &dir.letter(rho0, basis, l));
        for i in 0..p {
            out.lambda_dot[i] += term.lambda_dot[i];
            out.lambda_bar_dot[i] += term.lambda_bar_dot[i];
        }
        if j == 0 {
            lambda = ed.lambda().to_vec();
            lambda_bar = ed.lambda_bar().to_vec();
        }
    }
    for i in 0..p {
        out.lambda_dot[i] *= lambda[i];
        out.lambda_bar_dot[i] *= lambda_bar[i];
    }
    Ok(out)
}

fn arc_contains(center: &BoundaryPoint, radius: f64, z: &BoundaryPoint) -> bool {
    center.distance(z) < radius
}

/// Smallest powers `(n, m)` for which `g^n` and `h^m` play ping-pong on
/// the circle: small arcs around the four fixed points are disjoint and
/// each power maps the complement of its repelling arc into its attracting
/// arc. Returns `None` when no powers up to 8 work.
pub fn ping_pong_powers(g: &Sl2Matrix, h: &Sl2Matrix) -> Option<(usize, usize)> {
    let (ga, gr) = fuchsian::fixed_points(g).ok()?;
    let (ha, hr) = fuchsian::fixed_points(h).ok()?;
    let pts = [ga, gr, ha, hr];
    let mut sep = f64::INFINITY;
    for i in 0..4 {
        for j in 0..i {
            sep = sep.min(pts[i].distance(&pts[j]));
        }
    }
    if sep < 1e-6 {
        return None;
    }
    let radius = 0.45 * sep;
    let samples: Vec<BoundaryPoint> = (0..720)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / 720.0;
            BoundaryPoint::new(t.cos(), t.sin())
        })
        .collect();
    let power_for = |m: &Sl2Matrix, att: &BoundaryPoint, rep: &BoundaryPoint| {
        let mut acc = *m;
        for n in 1..=8 {
            let ok = samples
                .iter()
                .filter(|z| !arc_contains(rep, radius, z))
                .all(|z| arc_contains(att, radius * 0.9, &acc.act(*z)));
            if ok {
                return Some(n);
            }
            acc = acc * *m;
        }
        None
    };
    let n = power_for(g, &ga, &gr)?;
    let m = power_for(h, &ha, &hr)?;
    let gi = g.inverse();
    let hi = h.inverse();
    let n_inv = power_for(&gi, &gr, &ga)?;
    let m_inv = power_for(&hi, &hr, &ha)?;
    Some((n.max(n_inv), m.max(m_inv)))
}

/// Default free subgroup: powers of `a1` and `b1` that pass the ping-pong
/// check.
pub fn default_free_subgroup(rho0: &Representation) -> Result<Vec<Word>> {
    let sl2 = rho0
        .sl2()
        .ok_or_else(|| Error::invalid("free subgroup selection needs an SL(2,R) lift"))?;
    let (n, m) = ping_pong_powers(&sl2[0], &sl2[1])
        .ok_or_else(|| Error::numerical("ping-pong check failed for a1, b1"))?;
    let a = Word::new([Letter::new(0, false)]).pow(n);
    let b = Word::new([Letter::new(1, false)]).pow(m);
    Ok(vec![a, b])
}

/// The free group on `subgroup` deformed to `exp(t X_{c_s}) rho0(s)` on `E`.
pub fn finite_t_rep(
    rho0: &Representation,
    subgroup: &[Word],
    omega: &Cocycle,
    t: f64,
    basis: &PrincipalBasis,
) -> Result<Representation> {
    let dir = deformation_direction(omega, basis);
    let gens = subgroup
        .iter()
        .map(|s| {
            let x = dir.at(rho0, basis, s) * t;
            x.exp() * principal_rep::embed_unchecked(&rho0.evaluate(s))
        })
        .collect();
    Representation::new(basis.p(), basis.form_e().clone(), gens, None)
}

/// Substitutes the subgroup generators into a word of the free group.
pub fn substitute(subgroup: &[Word], w: &Word) -> Word {
    w.letters().iter().fold(Word::empty(), |acc, &l| {
        let s = &subgroup[l.generator()];
        let piece = if l.is_inverse() { s.inverse() } else { s.clone() };
        acc.concat(&piece)
    })
}

/// Eigenvalue of `a` on the eigenline closest to `reference` among the
/// two eigenvalues nearest to 1.
pub fn eigenvalue_near_one(a: &DMatrix<f64>, reference: &DVector<f64>) -> Result<f64> {
    let spectrum = principal_rep::real_spectrum(a)?;
    let mut near: Vec<f64> = spectrum.clone();
    near.sort_by(|x, y| (x - 1.0).abs().total_cmp(&(y - 1.0).abs()));
    let n = a.nrows();
    let mut best: Option<(f64, f64)> = None;
    for &lambda in near.iter().take(2) {
        let shifted = a - DMatrix::identity(n, n) * lambda;
        let (v, _) = linalg::smallest_singular_vector(&shifted);
        let (u, _) = linalg::smallest_singular_vector(&shifted.transpose());
        let refined = u.dot(&(a * &v)) / u.dot(&v);
        let dist = linalg::line_distance(&v, reference);
        if best.map(|(d, _)| dist < d).unwrap_or(true) {
            best = Some((dist, refined));
        }
    }
    let (dist, value) = best.ok_or_else(|| Error::numerical("empty spectrum"))?;
    if dist > 0.1 {
        return Err(Error::numerical(format!("no eigenline near the reference (distance {dist:e})")));
    }
    Ok(value)
}

/// Central difference `(lambda_p(rho_t(w)) - lambda_p(rho_-t(w))) / 2t` for a
/// word `w` of the free group on `subgroup`, following the eigenline that
/// starts at `E_p`.
pub fn finite_difference_lambda_p(
    rho0: &Representation,
    subgroup: &[Word],
    omega: &Cocycle,
    w: &Word,
    t: f64,
    basis: &PrincipalBasis,
) -> Result<f64> {
    let full = substitute(subgroup, w);
    let g = rho0
        .sl2_holonomy(&full)
        .ok_or_else(|| Error::invalid("finite differences need an SL(2,R) lift"))?;
    let reference = eigendata_sl2(&g, basis)?.v()[basis.p() - 1].clone();
    let plus = finite_t_rep(rho0, subgroup, omega, t, basis)?.evaluate(w);
    let minus = finite_t_rep(rho0, subgroup, omega, -t, basis)?.evaluate(w);
    let lp = eigenvalue_near_one(&plus, &reference)
        .map_err(|e| Error::numerical(format!("spectral collision at t = {t} for {w}: {e}")))?;
    let lm = eigenvalue_near_one(&minus, &reference)
        .map_err(|e| Error::numerical(format!("spectral collision at t = {} for {w}: {e}", -t)))?;
    Ok((lp - lm) / (2.0 * t))
}

/// `|a - b| / |b|`, or `|a - b|` when `|b| < 1e-6`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if b.abs() < 1e-6 {
        d
    } else {
        d / b.abs()
    }
}

/// The perturbation formula against the Margulis invariant for one class.
#[derive(Clone, Debug)]
pub struct DerivativeCheck {
    pub word: Word,
    pub lambda_dot_p: f64,
    pub half_alpha: f64,
    pub relative_error: f64,
    /// `max_{i<p} |lambda_dot_i|`.
    pub lower: f64,
}

pub fn derivative_check(
    rho0: &Representation,
    basis: &PrincipalBasis,
    omega: &Cocycle,
    w: &Word,
) -> Result<DerivativeCheck> {
    let dir = deformation_direction(omega, basis);
    let d = eigenvalue_derivative_word(rho0, &dir, basis, w)?;
    let p = basis.p();
    let half_alpha = 0.5 * margulis_invariant(rho0, omega, w)?;
    let lambda_dot_p = d.lambda_dot[p - 1];
    let lower = d.lambda_dot[..p - 1].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(DerivativeCheck {
        word: w.clone(),
        lambda_dot_p,
        half_alpha,
        relative_error: relative_error(lambda_dot_p, half_alpha),
        lower,
    })
}

/// Largest `lambda_1` of an element used for finite differences: the
/// eigenvalue near 1 of an explicit product is only known to about
/// `eps lambda_1`, which must stay far below `t^2`.
pub const FD_MAX_LAMBDA: f64 = 1e6;

/// Cyclically reduced words of the free group on `subgroup` up to length
/// `max_len` whose expansion has `lambda_1 <= FD_MAX_LAMBDA`, in shortlex
/// order. Words that are not cyclically reduced are conjugate to shorter
/// ones but are evaluated through much larger products.
pub fn admissible_free_words(rho0: &Representation, subgroup: &[Word], max_len: usize) -> Result<Vec<Word>> {
    let k = subgroup.len();
    let p = rho0.p();
    let mut out = Vec::new();
    let mut layer = vec![Word::empty()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for l in Letter::all(k) {
                if w.letters().last().is_some_and(|x| x.inverse() == l) {
                    continue;
                }
                let v = w.concat(&Word::new([l]));
                let g = rho0
                    .sl2_holonomy(&substitute(subgroup, &v))
                    .ok_or_else(|| Error::invalid("finite differences need an SL(2,R) lift"))?;
                let lambda_1 = g.spectral_radius().powi(2 * p as i32 - 2);
                let cyclic = v.letters()[0].inverse() != l || v.len() == 1;
                if cyclic && lambda_1 <= FD_MAX_LAMBDA {
                    out.push(v.clone());
                }
                next.push(v);
            }
        }
        layer = next;
    }
    Ok(out)
}

/// The perturbation formula against a central difference of the deformed
/// free subgroup.
#[derive(Clone, Debug)]
pub struct FiniteDifferenceCheck {
    /// Word of the free subgroup.
    pub word: Word,
    /// The same element in the surface group.
    pub expanded: Word,
    pub lambda_dot_p: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

pub fn finite_difference_check(
    rho0: &Representation,
    basis: &PrincipalBasis,
    subgroup: &[Word],
    omega: &Cocycle,
    w: &Word,
    t: f64,
) -> Result<FiniteDifferenceCheck> {
    let expanded = substitute(subgroup, w);
    let dir = deformation_direction(omega, basis);
    let lambda_dot_p = eigenvalue_derivative_word(rho0, &dir, basis, &expanded)?.lambda_dot[basis.p() - 1];
    let fd = finite_difference_lambda_p(rho0, subgroup, omega, w, t, basis)?;
    Ok(FiniteDifferenceCheck {
        word: w.clone(),
        expanded,
        lambda_dot_p,
        finite_difference: fd,
        relative_error: relative_error(fd, lambda_dot_p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface_group::solve_cocycle_space;

    fn setup(p: usize) -> (Representation, PrincipalBasis, CocycleBasis) {
        let rep = Representation::fuchsian(p).unwrap();
        let basis = principal_rep::principal_basis(p).unwrap();
        let cb = solve_cocycle_space(&rep).unwrap();
        (rep, basis, cb)
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn zero_cocycle_has_zero_invariant() {
        let (rep, _, _) = setup(2);
        let z = Cocycle::zero(4, 3);
        assert_eq!(margulis_invariant(&rep, &z, &w("abC")).unwrap(), 0.0);
    }

    #[test]
    fn rotation_sum_matches_literal_formula() {
        let (rep, _, cb) = setup(3);
        let omega = Cocycle::random(&cb, 11).unwrap();
        for s in ["a", "ab", "aB", "abcD", "cAdb"] {
            let a = margulis_invariant(&rep, &omega, &w(s)).unwrap();
            let b = margulis_invariant_direct(&rep, &omega, &w(s)).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{s}: {a} vs {b}");
        }
    }

    #[test]
    fn neutral_vector_of_power_is_unchanged() {
        let (rep, _, _) = setup(2);
        let x1 = neutral_vector(&rep, &w("aB")).unwrap();
        let x3 = neutral_vector(&rep, &w("aBaBaB")).unwrap();
        assert!((x1.x - x3.x).norm() < 1e-9);
        assert!(x1.certificate > 0.0);
    }

    #[test]
    fn direction_lies_in_the_isometry_algebra() {
        let (rep, basis, cb) = setup(2);
        let omega = Cocycle::random(&cb, 1).unwrap();
        let dir = deformation_direction(&omega, &basis);
        let g = basis.form_e().gram();
        for x in dir.matrices() {
            let anti = x.transpose() * g + g * x;
            assert!(linalg::max_abs(&anti) < 1e-12);
        }
        let word = w("abD");
        let lie = dir.at(&rep, &basis, &word);
        let adj = dir.at_by_adjoint(&rep, &basis, &word);
        assert!(linalg::max_abs(&(lie - adj)) < 1e-9);
    }

    #[test]
    fn matrix_and_rotation_routes_agree() {
        let (rep, basis, cb) = setup(2);
        let omega = Cocycle::random(&cb, 4).unwrap();
        let dir = deformation_direction(&omega, &basis);
        let word = w("abcD");
        let a = principal_rep::embed_unchecked(&rep.evaluate(&word));
        let by_matrix = eigenvalue_derivative(&a, &dir.at(&rep, &basis, &word), &basis).unwrap();
        let by_word = eigenvalue_derivative_word(&rep, &dir, &basis, &word).unwrap();
        let alpha = margulis_invariant(&rep, &omega, &word).unwrap();
        assert!((by_matrix.lambda_dot[1] - 0.5 * alpha).abs() < 1e-8);
        assert!((by_word.lambda_dot[1] - 0.5 * alpha).abs() < 1e-10);
        assert!(by_word.lambda_dot[0].abs() < 1e-8);
    }

    #[test]
    fn ping_pong_on_generators() {
        let (rep, _, _) = setup(2);
        let sub = default_free_subgroup(&rep).unwrap();
        assert_eq!(sub.len(), 2);
    }

    #[test]
    fn zero_time_is_the_embedding() {
        let (rep, basis, cb) = setup(2);
        let omega = Cocycle::random(&cb, 2).unwrap();
        let sub = vec![w("a"), w("b")];
        let r0 = finite_t_rep(&rep, &sub, &omega, 0.0, &basis).unwrap();
        let want = principal_rep::embed_unchecked(&rep.evaluate(&w("a")));
        assert!(linalg::max_abs(&(r0.generators()[0].clone() - want)) < 1e-14);
    }
}
