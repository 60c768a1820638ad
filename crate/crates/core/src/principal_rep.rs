//! The (2p-1)-dimensional irreducible representation of SL(2,R), its
//! invariant form of signature (p, p-1), the adapted basis `epsilon_m`,
//! the embedding into SO(p,p) on `E = V + L`, and eigen-decompositions with
//! Q-paired normalization.

use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fuchsian::{self, Sl2Matrix};
use crate::linalg;
use crate::surface_group::{GroupPresentation, Letter, Word};

/// Default tolerance on matrices of norm `O(lambda_1)`.
pub const DEFAULT_TOL: f64 = 1e-9;

const CACHE_LIMIT: usize = 1 << 16;

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A symmetric bilinear form with its signature.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    signature: (usize, usize),
}

impl QuadraticForm {
    /// Rejects asymmetric or degenerate Gram matrices.
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::invalid("Gram matrix must be square"));
        }
        let scale = linalg::max_abs(&gram).max(1.0);
        if linalg::max_abs(&(&gram - gram.transpose())) > 1e-12 * scale {
            return Err(Error::invalid("Gram matrix is not symmetric"));
        }
        let eig = gram.clone().symmetric_eigen();
        let tol = 1e-12 * scale;
        let pos = eig.eigenvalues.iter().filter(|&&x| x > tol).count();
        let neg = eig.eigenvalues.iter().filter(|&&x| x < -tol).count();
        if pos + neg != gram.nrows() {
            return Err(Error::invalid("quadratic form is degenerate"));
        }
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::invalid("quadratic form is degenerate"))?;
        Ok(QuadraticForm { gram, gram_inv, signature: (pos, neg) })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Numbers of positive and negative directions.
    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn pair(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.gram * v))
    }

    pub fn norm2(&self, u: &DVector<f64>) -> f64 {
        self.pair(u, u)
    }

    /// The covector `Q(u, .)` as a column.
    pub fn lower(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.gram * u
    }

    /// `max |M^T Q M - Q|`.
    pub fn preservation_residual(&self, m: &DMatrix<f64>) -> f64 {
        linalg::max_abs(&(m.transpose() * &self.gram * m - &self.gram))
    }

    /// Inverse of a form-preserving map, `Q^-1 M^T Q`.
    pub fn isometry_inverse(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gram_inv * m.transpose() * &self.gram
    }
}

/// Action of an arbitrary 2x2 matrix `[[a, b], [c, d]]` on binary forms of
/// degree `n`, in the monomial basis `x^(n-k) y^k`.
pub fn sym_power_matrix(n: usize, a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        // (a x + c y)^(n-k) (b x + d y)^k
        for i in 0..=(n - k) {
            let left = binomial(n - k, i) * a.powi((n - k - i) as i32) * c.powi(i as i32);
            if left == 0.0 {
                continue;
            }
            for j in 0..=k {
                let right = binomial(k, j) * b.powi((k - j) as i32) * d.powi(j as i32);
                out[(i + j, k)] += left * right;
            }
        }
    }
    out
}

/// The symmetric power of degree `2p - 2` of `m`.
pub fn sym_power_rep(p: usize, m: &Sl2Matrix) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::invalid(format!("p must be at least 2, got {p}")));
    }
    if (m.det() - 1.0).abs() > 1e-10 * (1.0 + m.max_abs().powi(2)) {
        return Err(Error::invalid(format!("determinant {} is not 1", m.det())));
    }
    Ok(sym_power_matrix(2 * p - 2, m.a, m.b, m.c, m.d))
}

/// The SL(2,R)-invariant form on `V`, signature `(p, p-1)`, in the
/// monomial basis.
pub fn invariant_form(p: usize) -> Result<QuadraticForm> {
    if p < 2 {
        return Err(Error::invalid(format!("p must be at least 2, got {p}")));
    }
    let n = 2 * p - 2;
    let mut g = DMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        let sign = if (k + p - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        g[(k, n - k)] = sign / binomial(n, k);
    }
    QuadraticForm::new(g)
}

/// The form `Q(u) - x^2` on `E = V + L`, signature `(p, p)`.
pub fn extended_form(p: usize) -> Result<QuadraticForm> {
    let qv = invariant_form(p)?;
    let d = qv.dim();
    let mut g = DMatrix::zeros(d + 1, d + 1);
    g.view_mut((0, 0), (d, d)).copy_from(qv.gram());
    g[(d, d)] = -1.0;
    QuadraticForm::new(g)
}

/// The adapted basis of `V` and the embedded basis of `E`.
#[derive(Clone, Debug)]
pub struct PrincipalBasis {
    p: usize,
    form_v: QuadraticForm,
    form_e: QuadraticForm,
    epsilon: Vec<DVector<f64>>,
    e: Vec<DVector<f64>>,
    e_bar: Vec<DVector<f64>>,
    f: DVector<f64>,
    sigma: f64,
}

impl PrincipalBasis {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn form_v(&self) -> &QuadraticForm {
        &self.form_v
    }

    pub fn form_e(&self) -> &QuadraticForm {
        &self.form_e
    }

    /// `epsilon_1, ..., epsilon_{2p-1}` (index 0 holds `epsilon_1`).
    pub fn epsilon(&self) -> &[DVector<f64>] {
        &self.epsilon
    }

    /// `epsilon_bar_m = epsilon_{2p-m}`, with `m` counted from 1.
    pub fn epsilon_bar(&self, m: usize) -> &DVector<f64> {
        &self.epsilon[2 * self.p - 1 - m]
    }

    /// `e_1, ..., e_p` in `E`.
    pub fn e(&self) -> &[DVector<f64>] {
        &self.e
    }

    /// `e_bar_1, ..., e_bar_p` in `E`.
    pub fn e_bar(&self) -> &[DVector<f64>] {
        &self.e_bar
    }

    /// Generator of the timelike line `L`.
    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    /// Sign with `E_p = span(x + sigma f)` for neutral vectors `x` oriented
    /// by the determinant rule; makes `Theta` positive.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `V -> E`, `u -> u + 0 f`.
    pub fn lift(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len() + 1);
        out.rows_mut(0, u.len()).copy_from(u);
        out
    }

    /// Table `alpha[(k-1, m-1)] = <A epsilon_k | epsilon_bar_m>` for the
    /// unipotent `A` with off-diagonal entry `z`; vanishes exactly for
    /// `m < k`.
    pub fn alpha(&self, z: f64) -> DMatrix<f64> {
        let a = sym_power_matrix(2 * self.p - 2, 1.0, 0.0, z, 1.0);
        let n = 2 * self.p - 1;
        DMatrix::from_fn(n, n, |k, m| {
            self.form_v.pair(&(&a * &self.epsilon[k]), self.epsilon_bar(m + 1))
        })
    }

    /// The `p x p` system `(alpha_{m,k})` with rows `m = 1..p` and columns
    /// `k = 1..p-1, p+1`.
    pub fn alpha_system(&self, z: f64) -> DMatrix<f64> {
        let table = self.alpha(z);
        let p = self.p;
        DMatrix::from_fn(p, p, |m, j| {
            let k = if j + 1 < p { j } else { p };
            table[(m, k)]
        })
    }

    /// Columns `e_1..e_p, e_bar_1..e_bar_p`.
    pub fn frame(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.e.iter().chain(self.e_bar.iter()).cloned().collect();
        linalg::from_columns(&cols)
    }

    /// The positive reference plane `span(e_i + e_bar_i)`.
    pub fn positive_reference(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.e.iter().zip(&self.e_bar).map(|(a, b)| a + b).collect();
        linalg::from_columns(&cols)
    }

    /// The negative reference plane `span(e_i - e_bar_i)`.
    pub fn negative_reference(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.e.iter().zip(&self.e_bar).map(|(a, b)| a - b).collect();
        linalg::from_columns(&cols)
    }
}

/// Builds the adapted basis and checks every identity it is meant to
/// satisfy.
pub fn principal_basis(p: usize) -> Result<PrincipalBasis> {
    let form_v = invariant_form(p)?;
    let form_e = extended_form(p)?;
    let n = 2 * p - 2;
    let dim = n + 1;
    let mut scale = vec![0.0; dim];
    for m in 1..=dim {
        let magnitude = binomial(n, m - 1).sqrt();
        let sign = if m <= p {
            1.0
        } else {
            let k = 2 * p - m;
            if (k + p).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        };
        scale[m - 1] = sign * magnitude;
    }
    let epsilon: Vec<DVector<f64>> = (0..dim)
        .map(|i| {
            let mut v = DVector::zeros(dim);
            v[i] = scale[i];
            v
        })
        .collect();

    let mut f = DVector::zeros(dim + 1);
    f[dim] = 1.0;
    let lift = |u: &DVector<f64>| {
        let mut out = DVector::zeros(dim + 1);
        out.rows_mut(0, dim).copy_from(u);
        out
    };
    let root2 = std::f64::consts::SQRT_2;
    let mut e: Vec<DVector<f64>> = (0..p - 1).map(|i| lift(&epsilon[i])).collect();
    let mut e_bar: Vec<DVector<f64>> = (0..p - 1).map(|i| lift(&epsilon[n - i])).collect();
    e.push((lift(&epsilon[p - 1]) - &f) / root2);
    e_bar.push((lift(&epsilon[p - 1]) + &f) / root2);

    let det_sign = linalg::from_columns(&epsilon).determinant().signum();
    let sigma = -det_sign;

    let basis = PrincipalBasis { p, form_v, form_e, epsilon, e, e_bar, f, sigma };
    validate_basis(&basis)?;
    Ok(basis)
}

fn validate_basis(b: &PrincipalBasis) -> Result<()> {
    let p = b.p;
    let dim = 2 * p - 1;
    let fail = |what: &str| Err(Error::numerical(format!("principal basis check failed: {what}")));
    for k in 1..=dim {
        for m in 1..=dim {
            let want = if k == m { 1.0 } else { 0.0 };
            if (b.form_v.pair(&b.epsilon[k - 1], b.epsilon_bar(m)) - want).abs() > 1e-12 {
                return fail("pairing <eps_k|eps_bar_m>");
            }
        }
    }
    let lambda = 2.0;
    let big = sym_power_rep(p, &Sl2Matrix::diag(lambda))?;
    for m in 1..=dim {
        let want = lambda.powi(2 * p as i32 - 2 * m as i32);
        let image = &big * &b.epsilon[m - 1];
        if (image - &b.epsilon[m - 1] * want).norm() > 1e-12 * want.max(1.0) {
            return fail("diagonal eigenvalue law");
        }
    }
    let alpha = b.alpha(1.0);
    for k in 0..dim {
        for m in 0..dim {
            if m < k && alpha[(k, m)] != 0.0 {
                return fail("alpha vanishes below the diagonal");
            }
            if m >= k && alpha[(k, m)].abs() <= 1e-8 {
                return fail("alpha nonzero on and above the diagonal");
            }
        }
        if alpha[(k, k)] <= 0.0 {
            return fail("alpha diagonal positive");
        }
    }
    for i in 0..p {
        for j in 0..p {
            let want = if i == j { 1.0 } else { 0.0 };
            if b.form_e.pair(&b.e[i], &b.e[j]).abs() > 1e-12
                || b.form_e.pair(&b.e_bar[i], &b.e_bar[j]).abs() > 1e-12
                || (b.form_e.pair(&b.e[i], &b.e_bar[j]) - want).abs() > 1e-12
            {
                return fail("embedded pairing");
            }
        }
    }
    Ok(())
}

/// Extends a map of `V` by the identity on `L`.
pub fn embed_so_pp(p: usize, m_v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let form_v = invariant_form(p)?;
    if m_v.nrows() != form_v.dim() || m_v.ncols() != form_v.dim() {
        return Err(Error::invalid(format!(
            "expected a {0}x{0} matrix, got {1}x{2}",
            form_v.dim(),
            m_v.nrows(),
            m_v.ncols()
        )));
    }
    let scale = linalg::max_abs(m_v).max(1.0);
    let residual = form_v.preservation_residual(m_v);
    if residual > DEFAULT_TOL * scale * scale {
        return Err(Error::invalid(format!("matrix does not preserve the form (residual {residual:e})")));
    }
    Ok(embed_unchecked(m_v))
}

pub(crate) fn embed_unchecked(m_v: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m_v.nrows();
    let mut out = DMatrix::identity(d + 1, d + 1);
    out.view_mut((0, 0), (d, d)).copy_from(m_v);
    out
}

/// A representation of a finitely generated group by form-preserving
/// matrices, evaluated on words with memoization.
pub struct Representation {
    p: usize,
    form: QuadraticForm,
    presentation: Option<GroupPresentation>,
    generators: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    sl2: Option<Vec<Sl2Matrix>>,
    cache: RwLock<HashMap<Word, DMatrix<f64>>>,
}

impl Clone for Representation {
    fn clone(&self) -> Self {
        Representation {
            p: self.p,
            form: self.form.clone(),
            presentation: self.presentation.clone(),
            generators: self.generators.clone(),
            inverses: self.inverses.clone(),
            sl2: self.sl2.clone(),
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Representation")
            .field("p", &self.p)
            .field("dim", &self.dim())
            .field("generators", &self.generators.len())
            .field("sl2", &self.sl2.is_some())
            .finish()
    }
}

impl Representation {
    /// Checks form preservation of every generator and, when a presentation
    /// is given, that the relator maps to `+-identity`. The relator residual
    /// is measured relative to the conditioning of its partial products.
    pub fn new(
        p: usize,
        form: QuadraticForm,
        generators: Vec<DMatrix<f64>>,
        presentation: Option<GroupPresentation>,
    ) -> Result<Self> {
        let rep = Representation::build(p, form, generators, presentation, None)?;
        if let Some(r) = rep.relator_residual() {
            let scale = rep.relator_conditioning().unwrap_or(1.0);
            if r > DEFAULT_TOL * scale {
                return Err(Error::invalid(format!("relator image is not +-identity (residual {r:e})")));
            }
        }
        Ok(rep)
    }

    fn build(
        p: usize,
        form: QuadraticForm,
        generators: Vec<DMatrix<f64>>,
        presentation: Option<GroupPresentation>,
        sl2: Option<Vec<Sl2Matrix>>,
    ) -> Result<Self> {
        let d = form.dim();
        if let Some(pres) = &presentation {
            if pres.generator_count() != generators.len() {
                return Err(Error::invalid(format!(
                    "presentation has {} generators but {} matrices were given",
                    pres.generator_count(),
                    generators.len()
                )));
            }
        }
        for (i, g) in generators.iter().enumerate() {
            if g.nrows() != d || g.ncols() != d {
                return Err(Error::invalid(format!("generator {i} is not {d}x{d}")));
            }
            let scale = linalg::max_abs(g).max(1.0);
            let residual = form.preservation_residual(g);
            if residual > 1e-10 * scale * scale {
                return Err(Error::invalid(format!(
                    "generator {i} does not preserve the form (residual {residual:e})"
                )));
            }
        }
        let inverses = generators.iter().map(|g| form.isometry_inverse(g)).collect();
        Ok(Representation {
            p,
            form,
            presentation,
            generators,
            inverses,
            sl2,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// Composition of an SL(2,R) representation with the principal
    /// representation on `V`. Words are evaluated in SL(2,R) first.
    pub fn from_sl2(p: usize, presentation: GroupPresentation, sl2: Vec<Sl2Matrix>) -> Result<Self> {
        let gens = sl2.iter().map(|m| sym_power_rep(p, m)).collect::<Result<Vec<_>>>()?;
        let holonomy = fuchsian::evaluate(&sl2, presentation.relator());
        let r = holonomy.projective_distance(&Sl2Matrix::IDENTITY);
        if r > DEFAULT_TOL {
            return Err(Error::invalid(format!("relator image is not +-identity (residual {r:e})")));
        }
        let rep = Representation::build(p, invariant_form(p)?, gens, Some(presentation), Some(sl2))?;
        if let Some(r) = rep.relator_residual() {
            if r > DEFAULT_TOL {
                return Err(Error::invalid(format!("relator image is not +-identity (residual {r:e})")));
            }
        }
        Ok(rep)
    }

    /// The octagon group composed with the principal representation.
    pub fn fuchsian(p: usize) -> Result<Self> {
        let (presentation, gens) = fuchsian::octagon_group()?;
        Representation::from_sl2(p, presentation, gens)
    }

    /// The same group acting on `E = V + L`, trivially on `L`.
    pub fn embedded(&self) -> Result<Self> {
        let form = extended_form(self.p)?;
        if self.dim() + 1 != form.dim() {
            return Err(Error::invalid("only representations on V can be embedded"));
        }
        let gens = self.generators.iter().map(embed_unchecked).collect();
        Representation::build(self.p, form, gens, self.presentation.clone(), self.sl2.clone())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn form(&self) -> &QuadraticForm {
        &self.form
    }

    /// `None` for free groups.
    pub fn presentation(&self) -> Option<&GroupPresentation> {
        self.presentation.as_ref()
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    /// Image of a letter; inverse letters map to inverse matrices.
    pub fn letter_matrix(&self, l: Letter) -> &DMatrix<f64> {
        if l.is_inverse() {
            &self.inverses[l.generator()]
        } else {
            &self.generators[l.generator()]
        }
    }

    /// SL(2,R) generators when the representation factors through the
    /// principal representation.
    pub fn sl2(&self) -> Option<&[Sl2Matrix]> {
        self.sl2.as_deref()
    }

    pub fn sl2_holonomy(&self, w: &Word) -> Option<Sl2Matrix> {
        self.sl2.as_ref().map(|g| fuchsian::evaluate(g, w))
    }

    /// Image of a word; memoized on its reduced form.
    pub fn evaluate(&self, w: &Word) -> DMatrix<f64> {
        let key = match &self.presentation {
            Some(p) => p.reduce(w),
            None => w.clone(),
        };
        if let Some(m) = self.cache.read().expect("cache lock").get(&key) {
            return m.clone();
        }
        let m = self.evaluate_uncached(&key);
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() < CACHE_LIMIT {
            cache.insert(key, m.clone());
        }
        m
    }

    /// Image of a word without touching the cache.
    pub fn evaluate_uncached(&self, w: &Word) -> DMatrix<f64> {
        let d = self.dim();
        if let Some(g) = self.sl2_holonomy(w) {
            let v = sym_power_matrix(2 * self.p - 2, g.a, g.b, g.c, g.d);
            return if d == v.nrows() { v } else { embed_unchecked(&v) };
        }
        self.product(w)
    }

    /// Left-to-right product of the letter matrices.
    pub fn product(&self, w: &Word) -> DMatrix<f64> {
        let d = self.dim();
        w.letters()
            .iter()
            .fold(DMatrix::identity(d, d), |acc, &l| acc * self.letter_matrix(l))
    }

    /// `max ||P|| ||P^-1||` over prefixes `P` of the relator, the scale of
    /// rounding in its evaluated product.
    pub fn relator_conditioning(&self) -> Option<f64> {
        let pres = self.presentation.as_ref()?;
        let d = self.dim();
        let mut prefix = DMatrix::<f64>::identity(d, d);
        let mut worst: f64 = 1.0;
        for &l in pres.relator().letters() {
            prefix *= self.letter_matrix(l);
            let inv = self.form.isometry_inverse(&prefix);
            worst = worst.max(linalg::max_abs(&prefix) * linalg::max_abs(&inv));
        }
        Some(worst)
    }

    /// Distance of the relator image from `+-identity`.
    pub fn relator_residual(&self) -> Option<f64> {
        let pres = self.presentation.as_ref()?;
        let m = self.evaluate_uncached(pres.relator());
        let d = self.dim();
        let id = DMatrix::<f64>::identity(d, d);
        Some(linalg::max_abs(&(&m - &id)).min(linalg::max_abs(&(&m + &id))))
    }
}

/// Eigen-decomposition of a map of `V` in SO(p, p-1): eigenvalues in
/// decreasing order with the neutral eigenvalue in the middle slot.
#[derive(Clone, Debug)]
pub struct VSpectrum {
    values: Vec<f64>,
    vectors: Vec<DVector<f64>>,
}

impl VSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `v_1, ..., v_{2p-1}` with `Q(v_i, v_{2p-i}) = 1`; the middle vector is
    /// the neutral vector, `Q(x, x) = 1`, oriented so that
    /// `det[v_1, ..., v_{2p-1}] > 0`.
    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn neutral(&self) -> &DVector<f64> {
        &self.vectors[self.vectors.len() / 2]
    }

    /// `max ||A v - lambda v|| / (||A|| ||v||)`.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        spectral_residual(a, &self.values, &self.vectors)
    }
}

fn spectral_residual(a: &DMatrix<f64>, values: &[f64], vectors: &[DVector<f64>]) -> f64 {
    let an = a.norm();
    values
        .iter()
        .zip(vectors)
        .map(|(&l, v)| (a * v - v * l).norm() / (an * v.norm()))
        .fold(0.0, f64::max)
}

fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let n = v.norm();
    let v = v / n;
    let (mut idx, mut best) = (0, 0.0);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best + 1e-12 {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        -v
    } else {
        v
    }
}

/// Eigenvector and refined eigenvalue near `lambda`, using left and right
/// singular null vectors and a two-sided Rayleigh quotient.
fn refine(a: &DMatrix<f64>, lambda: f64) -> (f64, DVector<f64>) {
    let n = a.nrows();
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let (v, _) = linalg::smallest_singular_vector(&shifted);
    let (u, _) = linalg::smallest_singular_vector(&shifted.transpose());
    let denom = u.dot(&v);
    let refined = if denom.abs() > 1e-8 { u.dot(&(a * &v)) / denom } else { lambda };
    (refined, v)
}

/// Real eigenvalues of `a`, decreasing; errors on complex pairs.
pub(crate) fn real_spectrum(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let scale = linalg::max_abs(a).max(1.0);
    let eig = a.clone().complex_eigenvalues();
    let mut out = Vec::with_capacity(eig.len());
    for z in eig.iter() {
        if z.im.abs() > DEFAULT_TOL * scale {
            return Err(Error::numerical(format!("complex eigenvalue {} + {}i", z.re, z.im)));
        }
        out.push(z.re);
    }
    out.sort_by(|x, y| y.total_cmp(x));
    Ok(out)
}

fn check_gaps(values: &[f64]) -> Result<f64> {
    let mut min_gap = f64::INFINITY;
    for w in values.windows(2) {
        let gap = (w[0] - w[1]) / w[0].abs().max(1.0);
        if gap <= 1e-7 {
            return Err(Error::numerical(format!("eigenvalue collision near {}", w[0])));
        }
        min_gap = min_gap.min(gap);
    }
    Ok(min_gap)
}

fn orient_neutral(vectors: &mut [DVector<f64>]) {
    let mid = vectors.len() / 2;
    if linalg::from_columns(vectors).determinant() < 0.0 {
        vectors[mid] = -&vectors[mid];
    }
}

/// Pairs `v_i` with `v_{2p-i}` and orients the neutral vector.
fn normalize_v(form: &QuadraticForm, mut vectors: Vec<DVector<f64>>) -> Result<Vec<DVector<f64>>> {
    let n = vectors.len();
    let mid = n / 2;
    for i in 0..mid {
        vectors[i] = canonical_sign(vectors[i].clone());
        let pairing = form.pair(&vectors[i], &vectors[n - 1 - i]);
        if pairing.abs() < 1e-300 {
            return Err(Error::numerical("eigenvectors of inverse eigenvalues do not pair"));
        }
        vectors[n - 1 - i] /= pairing;
    }
    let q = form.norm2(&vectors[mid]);
    let scale = vectors[mid].norm_squared();
    if q <= 1e-12 * scale {
        return Err(Error::numerical("fixed vector is not spacelike"));
    }
    vectors[mid] /= q.sqrt();
    orient_neutral(&mut vectors);
    Ok(vectors)
}

/// General route for a map of `V` in SO(p, p-1): real solver, singular null
/// vectors, upper half from `A`, lower half from `A^-1 = Q^-1 A^T Q`.
pub fn v_spectrum(a: &DMatrix<f64>, form: &QuadraticForm) -> Result<VSpectrum> {
    let n = a.nrows();
    if n.is_multiple_of(2) || n != form.dim() {
        return Err(Error::invalid("expected an odd-dimensional map matching the form"));
    }
    let p = n.div_ceil(2);
    let spectrum = real_spectrum(a)?;
    let top: Vec<f64> = spectrum[..p - 1].to_vec();
    let mut check = top.clone();
    check.push(spectrum[p - 1]);
    check_gaps(&check)?;
    let inv = form.isometry_inverse(a);
    let mut values = vec![0.0; n];
    let mut vectors = vec![DVector::zeros(n); n];
    for i in 0..p - 1 {
        let (l, v) = refine(a, top[i]);
        values[i] = l;
        vectors[i] = v;
        let (mu, w) = refine(&inv, top[i]);
        values[n - 1 - i] = 1.0 / mu;
        vectors[n - 1 - i] = w;
    }
    let (mid, x) = refine(a, spectrum[p - 1]);
    values[p - 1] = mid;
    vectors[p - 1] = x;
    let vectors = normalize_v(form, vectors)?;
    Ok(VSpectrum { values, vectors })
}

/// Route for images of hyperbolic SL(2,R) elements: eigenvectors are
/// symmetric tensors `a^(n-k) r^k` of the attracting and repelling
/// directions and eigenvalues are powers of the SL(2,R) eigenvalue.
pub fn v_spectrum_sl2(p: usize, g: &Sl2Matrix) -> Result<VSpectrum> {
    let form = invariant_form(p)?;
    let (att, rep) = fuchsian::fixed_points(g)?;
    let n = 2 * p - 2;
    let mu = g.spectral_radius();
    let values: Vec<f64> = (0..=n).map(|k| mu.powi(n as i32 - 2 * k as i32)).collect();
    let frame = sym_power_matrix(n, att.x, rep.x, att.y, rep.y);
    let det = att.x * rep.y - rep.x * att.y;
    let vectors = normalize_sym_frame(&form, &frame, det)?;
    Ok(VSpectrum { values, vectors })
}

/// [`normalize_v`] for the columns of `sym(M)`, using
/// `Q(sym(M) u, sym(M) v) = det(M)^n Q(u, v)` and
/// `det sym(M) = det(M)^(n(n+1)/2)` in place of computed pairings, which
/// cancel badly when the fixed points are close.
fn normalize_sym_frame(form: &QuadraticForm, frame: &DMatrix<f64>, det: f64) -> Result<Vec<DVector<f64>>> {
    let n = frame.ncols() - 1;
    let mid = n / 2;
    let g = form.gram();
    let dn = det.powi(n as i32);
    let mut vectors: Vec<DVector<f64>> = (0..=n).map(|k| frame.column(k).into_owned()).collect();
    // sign of the determinant of the rescaled frame
    let mut sign = if n * (n + 1) / 2 % 2 == 1 { det.signum() } else { 1.0 };
    for i in 0..mid {
        let norm = vectors[i].norm();
        let unit = canonical_sign(vectors[i].clone());
        let s = if unit.dot(&vectors[i]) < 0.0 { -1.0 } else { 1.0 };
        let pairing = s / norm * dn * g[(i, n - i)];
        if pairing.abs() < 1e-300 {
            return Err(Error::numerical("eigenvectors of inverse eigenvalues do not pair"));
        }
        vectors[i] = unit;
        vectors[n - i] /= pairing;
        sign *= s * pairing.signum();
    }
    let q = dn * g[(mid, mid)];
    if q <= 0.0 {
        return Err(Error::numerical("fixed vector is not spacelike"));
    }
    vectors[mid] /= q.sqrt();
    if sign < 0.0 {
        vectors[mid] = -&vectors[mid];
    }
    Ok(vectors)
}

/// Eigenvalues `lambda_1 > ... > lambda_p >= lambda_bar_p > ... >
/// lambda_bar_1` of a map of `E` with Q-paired eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenData {
    lambda: Vec<f64>,
    lambda_bar: Vec<f64>,
    v: Vec<DVector<f64>>,
    v_bar: Vec<DVector<f64>>,
    left: Vec<DVector<f64>>,
    left_bar: Vec<DVector<f64>>,
    min_gap: f64,
    structural: bool,
}

impl EigenData {
    pub fn p(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_bar(&self) -> &[f64] {
        &self.lambda_bar
    }

    /// All eigenvalues in decreasing order.
    pub fn spectrum(&self) -> Vec<f64> {
        self.lambda.iter().chain(self.lambda_bar.iter().rev()).copied().collect()
    }

    /// Eigenvectors spanning `E_1, ..., E_p`.
    pub fn v(&self) -> &[DVector<f64>] {
        &self.v
    }

    /// Eigenvectors spanning `E_bar_1, ..., E_bar_p`.
    pub fn v_bar(&self) -> &[DVector<f64>] {
        &self.v_bar
    }

    /// Left eigenvectors `Q v_bar_i`, dual to `v_i`.
    pub fn left(&self) -> &[DVector<f64>] {
        &self.left
    }

    /// Left eigenvectors `Q v_i`, dual to `v_bar_i`.
    pub fn left_bar(&self) -> &[DVector<f64>] {
        &self.left_bar
    }

    /// Smallest relative gap between consecutive eigenvalues, ignoring the
    /// structural pair at 1.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// True when the pair at eigenvalue 1 was split structurally.
    pub fn structural(&self) -> bool {
        self.structural
    }

    /// `Theta = E_1 + ... + E_p`.
    pub fn theta(&self) -> DMatrix<f64> {
        linalg::from_columns(&self.v)
    }

    /// `Theta_bar = E_bar_1 + ... + E_bar_p`.
    pub fn theta_bar(&self) -> DMatrix<f64> {
        linalg::from_columns(&self.v_bar)
    }

    /// `max ||A v - lambda v|| / (||A|| ||v||)` over all pairs.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        spectral_residual(a, &self.lambda, &self.v).max(spectral_residual(a, &self.lambda_bar, &self.v_bar))
    }

    fn assemble(
        form: &QuadraticForm,
        lambda: Vec<f64>,
        lambda_bar: Vec<f64>,
        v: Vec<DVector<f64>>,
        v_bar: Vec<DVector<f64>>,
        min_gap: f64,
        structural: bool,
    ) -> Self {
        let left = v_bar.iter().map(|x| form.lower(x)).collect();
        let left_bar = v.iter().map(|x| form.lower(x)).collect();
        EigenData { lambda, lambda_bar, v, v_bar, left, left_bar, min_gap, structural }
    }

    /// Lifts a spectrum on `V` to `E`, splitting the eigenvalue-1 plane
    /// `span(x, f)` into the lightlike lines `x + sigma f` and `x - sigma f`.
    pub fn from_v_spectrum(vs: &VSpectrum, basis: &PrincipalBasis) -> Self {
        let p = basis.p();
        let n = 2 * p - 1;
        let lift = |u: &DVector<f64>| basis.lift(u);
        let root2 = std::f64::consts::SQRT_2;
        let x = lift(vs.neutral());
        let f = basis.f() * basis.sigma();
        let mut lambda: Vec<f64> = vs.values[..p - 1].to_vec();
        let mut v: Vec<DVector<f64>> = vs.vectors[..p - 1].iter().map(lift).collect();
        let mut lambda_bar: Vec<f64> = (0..p - 1).map(|i| vs.values[n - 1 - i]).collect();
        let mut v_bar: Vec<DVector<f64>> = (0..p - 1).map(|i| lift(&vs.vectors[n - 1 - i])).collect();
        lambda.push(vs.values[p - 1]);
        lambda_bar.push(vs.values[p - 1]);
        v.push((&x + &f) / root2);
        v_bar.push((&x - &f) / root2);
        let mut upper = vs.values[..p].to_vec();
        upper.truncate(p);
        let min_gap = upper
            .windows(2)
            .map(|w| (w[0] - w[1]) / w[0].abs().max(1.0))
            .fold(f64::INFINITY, f64::min);
        EigenData::assemble(basis.form_e(), lambda, lambda_bar, v, v_bar, min_gap, true)
    }
}

/// Eigen-decomposition of a form-preserving map of `E`.
///
/// Maps that fix `f` and preserve `V` are handled on `V` with the
/// eigenvalue-1 plane split structurally; anything else must have simple
/// real spectrum.
pub fn eigendata(a: &DMatrix<f64>, basis: &PrincipalBasis) -> Result<EigenData> {
    let form = basis.form_e();
    let d = form.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(Error::invalid(format!("expected a {d}x{d} matrix")));
    }
    let p = basis.p();
    let scale = linalg::max_abs(a).max(1.0);
    let fixes_line = (0..d - 1).all(|i| a[(i, d - 1)].abs() <= 1e-13 * scale && a[(d - 1, i)].abs() <= 1e-13 * scale)
        && (a[(d - 1, d - 1)] - 1.0).abs() <= 1e-13 * scale;
    if fixes_line {
        let block = a.view((0, 0), (d - 1, d - 1)).into_owned();
        let vs = v_spectrum(&block, basis.form_v())?;
        return Ok(EigenData::from_v_spectrum(&vs, basis));
    }
    let spectrum = real_spectrum(a)?;
    let top: Vec<f64> = spectrum[..p].to_vec();
    let mut check = top.clone();
    check.push(spectrum[p]);
    let min_gap = check_gaps(&check)?;
    let inv = form.isometry_inverse(a);
    let mut lambda = Vec::with_capacity(p);
    let mut lambda_bar = Vec::with_capacity(p);
    let mut v = Vec::with_capacity(p);
    let mut v_bar = Vec::with_capacity(p);
    for &t in &top {
        let (l, x) = refine(a, t);
        let x = canonical_sign(x);
        let (mu, y) = refine(&inv, t);
        let pairing = form.pair(&x, &y);
        if pairing.abs() < 1e-300 {
            return Err(Error::numerical("eigenvectors of inverse eigenvalues do not pair"));
        }
        lambda.push(l);
        lambda_bar.push(1.0 / mu);
        v.push(x);
        v_bar.push(y / pairing);
    }
    Ok(EigenData::assemble(form, lambda, lambda_bar, v, v_bar, min_gap, false))
}

/// Functorial route for the embedded image of a hyperbolic SL(2,R) element,
/// validated against the matrix it describes.
pub fn eigendata_sl2(g: &Sl2Matrix, basis: &PrincipalBasis) -> Result<EigenData> {
    let p = basis.p();
    let vs = v_spectrum_sl2(p, g)?;
    let a = sym_power_rep(p, g)?;
    let residual = vs.residual(&a);
    if residual > DEFAULT_TOL {
        return Err(Error::numerical(format!("eigenvector residual {residual:e}")));
    }
    Ok(EigenData::from_v_spectrum(&vs, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sl2(rng: &mut ChaCha8Rng) -> Sl2Matrix {
        let a: f64 = rng.random_range(-2.0..2.0);
        let b: f64 = rng.random_range(-2.0..2.0);
        let c: f64 = rng.random_range(-2.0..2.0);
        let a = if a.abs() < 0.2 { 0.7 } else { a };
        Sl2Matrix { a, b, c, d: (1.0 + b * c) / a }
    }

    /// Coefficients of `(a x + c y)^(n-k) (b x + d y)^k` by repeated
    /// polynomial multiplication.
    fn oracle_sym(n: usize, m: &Sl2Matrix) -> DMatrix<f64> {
        let mul = |p: &[f64], q: &[f64]| {
            let mut out = vec![0.0; p.len() + q.len() - 1];
            for (i, x) in p.iter().enumerate() {
                for (j, y) in q.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        };
        let mut out = DMatrix::zeros(n + 1, n + 1);
        for k in 0..=n {
            let mut poly = vec![1.0];
            for _ in 0..n - k {
                poly = mul(&poly, &[m.a, m.c]);
            }
            for _ in 0..k {
                poly = mul(&poly, &[m.b, m.d]);
            }
            for (i, x) in poly.iter().enumerate() {
                out[(i, k)] = *x;
            }
        }
        out
    }

    #[test]
    fn unipotent_square() {
        let m = Sl2Matrix::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let s = sym_power_rep(2, &m).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s, want);
        assert_eq!(sym_power_rep(2, &Sl2Matrix::IDENTITY).unwrap(), DMatrix::identity(3, 3));
        assert!(sym_power_rep(1, &m).is_err());
    }

    #[test]
    fn matches_polynomial_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 2..=4 {
            for _ in 0..10 {
                let m = random_sl2(&mut rng);
                let got = sym_power_rep(p, &m).unwrap();
                let want = oracle_sym(2 * p - 2, &m);
                assert!(linalg::max_abs(&(got - want)) < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_eigenvalues() {
        let s = sym_power_rep(2, &Sl2Matrix::diag(2.0)).unwrap();
        let ev = real_spectrum(&s).unwrap();
        assert!((ev[0] - 4.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12 && (ev[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn form_signature_and_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in 2..=4 {
            let q = invariant_form(p).unwrap();
            assert_eq!(q.signature(), (p, p - 1));
            assert_eq!(extended_form(p).unwrap().signature(), (p, p));
            for _ in 0..100 {
                let m = sym_power_rep(p, &random_sl2(&mut rng)).unwrap();
                let scale = linalg::max_abs(&m).max(1.0);
                assert!(q.preservation_residual(&m) <= 1e-9 * scale * scale);
            }
        }
    }

    #[test]
    fn basis_builds_for_small_p() {
        for p in 2..=4 {
            let b = principal_basis(p).unwrap();
            let sys = b.alpha_system(1.0);
            for i in 0..p {
                assert!(sys[(i, i)].abs() > 1e-8);
                for j in 0..i {
                    assert_eq!(sys[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn embedding_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = 3;
        let q = extended_form(p).unwrap();
        let m1 = sym_power_rep(p, &random_sl2(&mut rng)).unwrap();
        let m2 = sym_power_rep(p, &random_sl2(&mut rng)).unwrap();
        let e1 = embed_so_pp(p, &m1).unwrap();
        let e2 = embed_so_pp(p, &m2).unwrap();
        let e12 = embed_so_pp(p, &(&m1 * &m2)).unwrap();
        assert!(linalg::max_abs(&(e1.clone() * e2 - e12)) < 1e-9);
        assert!(q.preservation_residual(&e1) < 1e-9);
        assert!(embed_so_pp(p, &DMatrix::from_element(5, 5, 1.0)).is_err());
    }

    #[test]
    fn fuchsian_generic_and_functorial_agree() {
        let rep = Representation::fuchsian(2).unwrap();
        let basis = principal_basis(2).unwrap();
        let w: Word = "abC".parse().unwrap();
        let g = rep.sl2_holonomy(&w).unwrap();
        let a = embed_so_pp(2, &rep.evaluate(&w)).unwrap();
        let generic = eigendata(&a, &basis).unwrap();
        let functorial = eigendata_sl2(&g, &basis).unwrap();
        for i in 0..2 {
            assert!((generic.lambda()[i] - functorial.lambda()[i]).abs() < 1e-9 * generic.lambda()[0]);
            assert!(linalg::line_distance(&generic.v()[i], &functorial.v()[i]) < 1e-8);
            assert!(linalg::line_distance(&generic.v_bar()[i], &functorial.v_bar()[i]) < 1e-8);
        }
        assert!(generic.structural());
    }

    #[test]
    fn pairing_normalization() {
        let basis = principal_basis(3).unwrap();
        let rep = Representation::fuchsian(3).unwrap();
        let g = rep.sl2_holonomy(&"abAd".parse().unwrap()).unwrap();
        let ed = eigendata_sl2(&g, &basis).unwrap();
        let q = basis.form_e();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((q.pair(&ed.v()[i], &ed.v_bar()[j]) - want).abs() < 1e-9);
                assert!(q.pair(&ed.v()[i], &ed.v()[j]).abs() < 1e-9);
            }
            assert!((ed.lambda()[i] * ed.lambda_bar()[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cached_evaluation_matches_direct_product() {
        let rep = Representation::fuchsian(2).unwrap();
        let w: Word = "abcdAB".parse().unwrap();
        let first = rep.evaluate(&w);
        let second = rep.evaluate(&w);
        assert_eq!(first, second);
        assert!(linalg::max_abs(&(first - rep.evaluate_uncached(&w))) < 1e-12);
        assert!(rep.relator_residual().unwrap() < 1e-9);
    }
}
