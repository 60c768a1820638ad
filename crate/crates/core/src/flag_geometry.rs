//! Isotropic flags in a space with a split form of signature (p, p):
//! orientation classes of maximal isotropic planes, the correspondence
//! between Q-paired tuples of lines and transverse flag pairs, planes as
//! graphs over a maximal isotropic, and the transversality margin for
//! triples of boundary points.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fuchsian::{fixed_points, BallElement, BoundaryPoint, Sl2Matrix};
use crate::linalg::{self, RANK_TOL};
use crate::principal_rep::{eigendata_sl2, sym_power_matrix, PrincipalBasis, QuadraticForm};
use crate::surface_group::Word;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

/// Sign of a maximal isotropic plane `P` relative to the reference split
/// `E = F + F°`, with `F = span(e_i + e_bar_i)` positive and
/// `F° = span(e_i - e_bar_i)` negative: `P` is the graph of `A: F -> F°`
/// and the class is the sign of `det A` in those bases.
pub fn classify_orientation(plane: &DMatrix<f64>, reference: &PrincipalBasis) -> Result<Orientation> {
    let p = reference.p();
    if plane.ncols() != p || plane.nrows() != 2 * p {
        return Err(Error::invalid(format!("expected a {}x{p} spanning matrix", 2 * p)));
    }
    let split = linalg::hcat(&[&reference.positive_reference(), &reference.negative_reference()]);
    let coords = split
        .try_inverse()
        .ok_or_else(|| Error::numerical("reference split is singular"))?
        * plane;
    let x = coords.rows(0, p).into_owned();
    let y = coords.rows(p, p).into_owned();
    let sx = x.clone().svd(false, false).singular_values;
    if sx.min() <= RANK_TOL * sx.max().max(f64::MIN_POSITIVE) {
        return Err(Error::numerical("plane is not a graph over the positive reference"));
    }
    let sign = x.determinant() * y.determinant();
    if sign == 0.0 {
        return Err(Error::numerical("graph map is singular"));
    }
    Ok(if sign > 0.0 { Orientation::Positive } else { Orientation::Negative })
}

fn isotropy_residual(span: &DMatrix<f64>, form: &QuadraticForm) -> f64 {
    let s = linalg::orthonormal_span(span, RANK_TOL);
    linalg::max_abs(&(s.transpose() * form.gram() * &s))
}

/// Nested isotropic subspaces `L_1 < ... < L_p`, `L_i` spanned by the first
/// `i` columns.
#[derive(Clone, Debug)]
pub struct IsotropicFlag {
    basis: DMatrix<f64>,
    orientation: Orientation,
}

impl IsotropicFlag {
    pub fn new(basis: DMatrix<f64>, reference: &PrincipalBasis) -> Result<Self> {
        let p = reference.p();
        if basis.ncols() != p || basis.nrows() != 2 * p {
            return Err(Error::invalid(format!("expected a {}x{p} spanning matrix", 2 * p)));
        }
        if linalg::rank(&basis, RANK_TOL) != p {
            return Err(Error::invalid("flag vectors are linearly dependent"));
        }
        if isotropy_residual(&basis, reference.form_e()) > 1e-8 {
            return Err(Error::invalid("top plane of the flag is not isotropic"));
        }
        let orientation = classify_orientation(&basis, reference)?;
        Ok(IsotropicFlag { basis, orientation })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `L_i` as a spanning matrix, `0 <= i <= p`.
    pub fn subspace(&self, i: usize) -> DMatrix<f64> {
        self.basis.columns(0, i).into_owned()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }
}

/// Two p-tuples of lines, `E_i` and `E_bar_i`, with `Q(E_i, E_bar_j) = 0`
/// for `i != j`, pairing 1 for `i = j`, and each tuple isotropic.
#[derive(Clone, Debug)]
pub struct PairedTuple {
    pub e: Vec<DVector<f64>>,
    pub e_bar: Vec<DVector<f64>>,
}

impl PairedTuple {
    /// Largest deviation from the pairing pattern after rescaling `E_bar_i`
    /// to pair to 1 with `E_i`.
    pub fn pairing_residual(&self, form: &QuadraticForm) -> f64 {
        let p = self.e.len();
        let mut worst: f64 = 0.0;
        for i in 0..p {
            let ei = &self.e[i] / self.e[i].norm();
            let fi = &self.e_bar[i] / self.e_bar[i].norm();
            for j in 0..p {
                let ej = &self.e[j] / self.e[j].norm();
                let fj = &self.e_bar[j] / self.e_bar[j].norm();
                worst = worst.max(form.pair(&ei, &ej).abs()).max(form.pair(&fi, &fj).abs());
                if i != j {
                    worst = worst.max(form.pair(&ei, &fj).abs());
                }
            }
        }
        worst
    }

    pub fn validate(&self, form: &QuadraticForm) -> Result<()> {
        let p = self.e.len();
        if self.e_bar.len() != p || p == 0 {
            return Err(Error::invalid("tuples must have equal nonzero length"));
        }
        if self.pairing_residual(form) > 1e-8 {
            return Err(Error::invalid("tuple is not Q-paired"));
        }
        for i in 0..p {
            let c = form.pair(&self.e[i], &self.e_bar[i]) / (self.e[i].norm() * self.e_bar[i].norm());
            if c.abs() < 1e-10 {
                return Err(Error::invalid(format!("lines {} do not pair", i + 1)));
            }
        }
        Ok(())
    }

    /// Action of a linear map on every line.
    pub fn transform(&self, g: &DMatrix<f64>) -> PairedTuple {
        PairedTuple {
            e: self.e.iter().map(|v| g * v).collect(),
            e_bar: self.e_bar.iter().map(|v| g * v).collect(),
        }
    }
}

/// `L_i = E_1 + ... + E_i`, `M_i = E_bar_1 + ... + E_bar_i`.
pub fn flag_from_tuple(t: &PairedTuple, reference: &PrincipalBasis) -> Result<(IsotropicFlag, IsotropicFlag)> {
    t.validate(reference.form_e())?;
    let l = IsotropicFlag::new(linalg::from_columns(&t.e), reference)?;
    let m = IsotropicFlag::new(linalg::from_columns(&t.e_bar), reference)?;
    Ok((l, m))
}

/// Checks `M_i + L_i° = E` for every `i`.
pub fn flags_transverse(l: &IsotropicFlag, m: &IsotropicFlag, form: &QuadraticForm) -> bool {
    let p = l.dim();
    (1..=p).all(|i| {
        let l_perp = linalg::q_orthogonal(&l.subspace(i), form.gram(), RANK_TOL);
        let m_perp = linalg::q_orthogonal(&m.subspace(i), form.gram(), RANK_TOL);
        linalg::rank(&linalg::hcat(&[&m.subspace(i), &l_perp]), RANK_TOL) == 2 * p
            && linalg::rank(&linalg::hcat(&[&l.subspace(i), &m_perp]), RANK_TOL) == 2 * p
    })
}

fn one_dimensional(span: DMatrix<f64>, what: &str, i: usize) -> Result<DVector<f64>> {
    if span.ncols() != 1 {
        return Err(Error::invalid(format!(
            "flags are not transverse: {what} {i} has dimension {}",
            span.ncols()
        )));
    }
    Ok(span.column(0).into_owned())
}

/// Inverse of [`flag_from_tuple`]: `E_i = L_i ∩ (M_{i-1})°` and
/// `E_bar_i = M_i ∩ (L_{i-1})°`, with `E_bar_i` scaled to pair to 1.
pub fn tuple_from_flags(l: &IsotropicFlag, m: &IsotropicFlag, reference: &PrincipalBasis) -> Result<PairedTuple> {
    let form = reference.form_e();
    if !flags_transverse(l, m, form) {
        return Err(Error::invalid("flags are not transverse"));
    }
    let p = l.dim();
    let mut e = Vec::with_capacity(p);
    let mut e_bar = Vec::with_capacity(p);
    let n = 2 * p;
    for i in 1..=p {
        let m_perp = if i == 1 {
            DMatrix::identity(n, n)
        } else {
            linalg::q_orthogonal(&m.subspace(i - 1), form.gram(), RANK_TOL)
        };
        let l_perp = if i == 1 {
            DMatrix::identity(n, n)
        } else {
            linalg::q_orthogonal(&l.subspace(i - 1), form.gram(), RANK_TOL)
        };
        let ei = one_dimensional(linalg::intersect(&l.subspace(i), &m_perp, RANK_TOL), "E", i)?;
        let fi = one_dimensional(linalg::intersect(&m.subspace(i), &l_perp, RANK_TOL), "E_bar", i)?;
        let pairing = form.pair(&ei, &fi);
        if pairing.abs() < 1e-10 {
            return Err(Error::invalid(format!("flags are not transverse at level {i}")));
        }
        e.push(ei);
        e_bar.push(fi / pairing);
    }
    let t = PairedTuple { e, e_bar };
    t.validate(form)?;
    Ok(t)
}

/// `omega_F(u, v) = Q(u, f(v))` for `F = graph(f: theta0 -> theta1)`, as a
/// matrix in the column basis of `theta0`.
pub fn form_from_plane(
    plane: &DMatrix<f64>,
    theta0: &DMatrix<f64>,
    theta1: &DMatrix<f64>,
    form: &QuadraticForm,
) -> Result<DMatrix<f64>> {
    let p = theta0.ncols();
    let split = linalg::hcat(&[theta0, theta1]);
    let coords = split
        .try_inverse()
        .ok_or_else(|| Error::invalid("theta0 and theta1 are not transverse"))?
        * plane;
    let b0 = coords.rows(0, p).into_owned();
    let b1 = coords.rows(p, p).into_owned();
    let sv = b0.clone().svd(false, false).singular_values;
    if sv.min() <= RANK_TOL * sv.max().max(f64::MIN_POSITIVE) {
        return Err(Error::invalid("plane is not transverse to theta1"));
    }
    let f = b1 * b0.try_inverse().ok_or_else(|| Error::invalid("plane is not transverse to theta1"))?;
    Ok(theta0.transpose() * form.gram() * theta1 * f)
}

/// Inverse of [`form_from_plane`].
pub fn plane_from_form(
    omega: &DMatrix<f64>,
    theta0: &DMatrix<f64>,
    theta1: &DMatrix<f64>,
    form: &QuadraticForm,
) -> Result<DMatrix<f64>> {
    let pairing = theta0.transpose() * form.gram() * theta1;
    let f = pairing
        .try_inverse()
        .ok_or_else(|| Error::invalid("theta0 and theta1 are not transverse"))?
        * omega;
    Ok(theta0 + theta1 * f)
}

/// `|det|` of orthonormal bases of `Theta(z)` and
/// `F(x, y) = E_p + (E_{p-1}° ∩ Theta_bar(y))` side by side; zero exactly
/// when the two planes meet.
pub fn transversality_margin(
    p: usize,
    theta_z: &DMatrix<f64>,
    e_p: &DVector<f64>,
    e_p1: &DVector<f64>,
    theta_bar_y: &DMatrix<f64>,
    form: &QuadraticForm,
) -> Result<f64> {
    if theta_z.ncols() != p || theta_bar_y.ncols() != p {
        return Err(Error::invalid("Theta(z) and Theta_bar(y) must have dimension p"));
    }
    let line = DMatrix::from_column_slice(e_p1.len(), 1, e_p1.as_slice());
    let perp = linalg::q_orthogonal(&line, form.gram(), RANK_TOL);
    let cut = linalg::intersect(&perp, theta_bar_y, 1e-8);
    let e_p = DMatrix::from_column_slice(e_p.len(), 1, e_p.as_slice());
    let f = linalg::orthonormal_span(&linalg::hcat(&[&e_p, &cut]), 1e-8);
    if f.ncols() != p {
        return Err(Error::numerical(format!("F(x, y) has dimension {} instead of {p}", f.ncols())));
    }
    let t = linalg::orthonormal_span(theta_z, 1e-8);
    if t.ncols() != p {
        return Err(Error::numerical("Theta(z) is degenerate"));
    }
    Ok(linalg::hcat(&[&t, &f]).determinant().abs())
}

// Matrix sending [1:0], [0:1], [1:1] to x, y, z.
fn triple_frame(x: BoundaryPoint, y: BoundaryPoint, z: BoundaryPoint) -> Result<Matrix2<f64>> {
    let xy = Matrix2::new(x.x, y.x, x.y, y.y);
    let ab = xy
        .try_inverse()
        .ok_or_else(|| Error::invalid("boundary points of the triple are not pairwise distinct"))?
        * Vector2::new(z.x, z.y);
    Ok(Matrix2::new(ab[0] * x.x, ab[1] * y.x, ab[0] * x.y, ab[1] * y.y))
}

/// The element of SL(2,R) moving `(x, y, z)` to the evenly spaced triple
/// with the same cyclic orientation.
pub fn balancing_element(x: BoundaryPoint, y: BoundaryPoint, z: BoundaryPoint) -> Result<Sl2Matrix> {
    let source = triple_frame(x, y, z)?;
    let at = |t: f64| BoundaryPoint::new(t.cos(), t.sin());
    let third = std::f64::consts::PI / 3.0;
    let mut target = triple_frame(at(0.0), at(third), at(2.0 * third))?;
    if target.determinant().signum() != source.determinant().signum() {
        target = triple_frame(at(0.0), at(2.0 * third), at(third))?;
    }
    let g = target * source.try_inverse().ok_or_else(|| Error::numerical("singular triple frame"))?;
    let s = g.determinant().sqrt();
    Sl2Matrix::new(g[(0, 0)] / s, g[(0, 1)] / s, g[(1, 0)] / s, g[(1, 1)] / s)
}

/// Margins of the boundary triple `(x, y, z) = (gamma+, gamma-, eta+)` for
/// the embedded Fuchsian representation: `(raw, balanced)`, the second
/// after moving all data by the image of [`balancing_element`]. The raw
/// margin decays like a power of the smallest separation of the points and
/// is reported as 0 once the subspaces are numerically degenerate; the
/// balanced one does not depend on where the triple sits.
pub fn fixed_point_margin(gamma: &Sl2Matrix, eta: &Sl2Matrix, basis: &PrincipalBasis) -> Result<(f64, f64)> {
    let (x, y) = fixed_points(gamma)?;
    let (z, _) = fixed_points(eta)?;
    if z.distance(&x) < 1e-9 || z.distance(&y) < 1e-9 {
        return Err(Error::invalid("boundary points of the triple are not pairwise distinct"));
    }
    // the data are equivariant, so conjugating the elements moves them
    let k = balancing_element(x, y, z)?;
    let k_inv = k.inverse();
    let balanced = pair_margin(&(k * *gamma * k_inv), &(k * *eta * k_inv), basis)?;
    let raw = match pair_margin(gamma, eta, basis) {
        Ok(m) => m,
        Err(Error::Numerical(_)) => 0.0,
        Err(e) => return Err(e),
    };
    Ok((raw, balanced))
}

fn pair_margin(gamma: &Sl2Matrix, eta: &Sl2Matrix, basis: &PrincipalBasis) -> Result<f64> {
    let p = basis.p();
    let g = eigendata_sl2(gamma, basis)?;
    let h = eigendata_sl2(eta, basis)?;
    let (z, _) = fixed_points(eta)?;
    let (_, y) = fixed_points(gamma)?;
    let theta_z = osculating_plane(z, &h.v()[p - 1], basis);
    let theta_bar_y = osculating_plane(y, &g.v_bar()[p - 1], basis);
    transversality_margin(p, &theta_z, &g.v()[p - 1], &g.v()[p - 2], &theta_bar_y, basis.form_e())
}

/// `W_{p-1}(a) + span(top)`, with `W_{p-1}(a)` spanned by the forms
/// `a^{n-k} w^k`, `k < p - 1`, for `w` orthogonal to `a`, and `top` reduced
/// modulo `W_{p-1}(a)`. Same span as the eigenvectors `a^{n-k} r^k`, but
/// well conditioned when `r` is close to `a`.
fn osculating_plane(a: BoundaryPoint, top: &DVector<f64>, basis: &PrincipalBasis) -> DMatrix<f64> {
    let p = basis.p();
    let n = 2 * p - 2;
    let sym = sym_power_matrix(n, a.x, -a.y, a.y, a.x);
    let cols: Vec<DVector<f64>> = (0..p - 1).map(|k| basis.lift(&sym.column(k).into_owned())).collect();
    let w = linalg::orthonormal_span(&linalg::from_columns(&cols), RANK_TOL);
    let reduced = top - &w * (w.transpose() * top);
    let reduced = &reduced / reduced.norm();
    linalg::hcat(&[&w, &DMatrix::from_column_slice(reduced.len(), 1, reduced.as_slice())])
}

#[derive(Clone, Debug)]
pub struct TripleMargin {
    pub gamma: Word,
    pub eta: Word,
    pub raw: f64,
    pub balanced: f64,
}

/// Margins of `count` triples built from random pairs of nontrivial
/// elements; pairs whose fixed points collide are redrawn.
pub fn sample_triple_margins(
    elements: &[BallElement],
    basis: &PrincipalBasis,
    count: usize,
    seed: u64,
) -> Result<Vec<TripleMargin>> {
    let pool: Vec<&BallElement> = elements.iter().filter(|e| e.matrix.is_hyperbolic()).collect();
    if pool.len() < 2 {
        return Err(Error::invalid("need at least two hyperbolic elements to sample triples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 20 * count + 100 {
            return Err(Error::invalid("too many degenerate triples"));
        }
        let g = pool[rng.random_range(0..pool.len())];
        let h = pool[rng.random_range(0..pool.len())];
        match fixed_point_margin(&g.matrix, &h.matrix, basis) {
            Ok((raw, balanced)) => {
                out.push(TripleMargin { gamma: g.word.clone(), eta: h.word.clone(), raw, balanced })
            }
            Err(Error::InvalidInput(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principal_rep::principal_basis;

    #[test]
    fn reference_orientations() {
        for p in 2..=4 {
            let b = principal_basis(p).unwrap();
            let pos = linalg::from_columns(b.e());
            assert_eq!(classify_orientation(&pos, &b).unwrap(), Orientation::Positive);
            let mut cols = b.e()[..p - 1].to_vec();
            cols.push(b.e_bar()[p - 1].clone());
            let neg = linalg::from_columns(&cols);
            assert_eq!(classify_orientation(&neg, &b).unwrap(), Orientation::Negative);
        }
    }

    #[test]
    fn standard_tuple_round_trip() {
        let b = principal_basis(3).unwrap();
        let t = PairedTuple { e: b.e().to_vec(), e_bar: b.e_bar().to_vec() };
        let (l, m) = flag_from_tuple(&t, &b).unwrap();
        assert!(flags_transverse(&l, &m, b.form_e()));
        let back = tuple_from_flags(&l, &m, &b).unwrap();
        for i in 0..3 {
            assert!(linalg::line_distance(&back.e[i], &t.e[i]) < 1e-10);
            assert!(linalg::line_distance(&back.e_bar[i], &t.e_bar[i]) < 1e-10);
        }
    }

    #[test]
    fn non_transverse_flags_rejected() {
        let b = principal_basis(2).unwrap();
        let l = IsotropicFlag::new(linalg::from_columns(b.e()), &b).unwrap();
        assert!(tuple_from_flags(&l, &l, &b).is_err());
    }

    #[test]
    fn graph_of_zero_is_zero_form() {
        let b = principal_basis(2).unwrap();
        let t0 = linalg::from_columns(b.e());
        let t1 = linalg::from_columns(b.e_bar());
        let w = form_from_plane(&t0, &t0, &t1, b.form_e()).unwrap();
        assert!(linalg::max_abs(&w) < 1e-14);
        assert!(form_from_plane(&t1, &t0, &t1, b.form_e()).is_err());
    }

    #[test]
    fn generator_triples_are_transverse() {
        let (_, gens) = crate::fuchsian::octagon_group().unwrap();
        for p in [2, 3] {
            let b = principal_basis(p).unwrap();
            for i in 0..4 {
                let j = (i + 1) % 4;
                let (raw, balanced) = fixed_point_margin(&gens[i], &gens[j], &b).unwrap();
                assert!(raw > 1e-6 && balanced > 1e-6);
            }
            assert!(fixed_point_margin(&gens[0], &(gens[0] * gens[0]), &b).is_err());
        }
    }

    #[test]
    fn balancing_moves_triple_to_even_spacing() {
        let pts = [BoundaryPoint::new(1.0, 0.2), BoundaryPoint::new(0.3, 1.0), BoundaryPoint::new(-1.0, 0.9)];
        let g = balancing_element(pts[0], pts[1], pts[2]).unwrap();
        assert!((g.det() - 1.0).abs() < 1e-12);
        let images: Vec<BoundaryPoint> = pts.iter().map(|&q| g.act(q)).collect();
        let third = std::f64::consts::PI / 3.0;
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((images[i].distance(&images[j]) - third.sin()).abs() < 1e-12);
        }
        assert!(images[0].distance(&BoundaryPoint::new(1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn standard_alpha_system_is_triangular() {
        for z in [0.5, 1.0, 2.0] {
            let b = principal_basis(3).unwrap();
            let s = b.alpha_system(z);
            for i in 0..3 {
                assert!(s[(i, i)].abs() > 1e-8);
                for j in 0..i {
                    assert_eq!(s[(i, j)], 0.0);
                }
            }
        }
    }
}
