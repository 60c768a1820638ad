//! Words in the genus-2 surface group, their reduction and conjugacy
//! canonicalization, and the linear algebra of group cocycles.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::affine_deform::Cocycle;
use crate::error::{Error, Result};
use crate::linalg;
use crate::principal_rep::Representation;

/// A generator or its inverse. Encoded as `2 * generator + inverse`, which
/// is also the lexicographic order used for canonical forms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter((generator as u8) * 2 + inverse as u8)
    }

    pub fn generator(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn from_code(code: u8) -> Self {
        Letter(code)
    }

    /// All letters over `n` generators, in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Letter> {
        (0..2 * n as u8).map(Letter)
    }

    fn symbol(self) -> char {
        let c = (b'a' + self.generator() as u8) as char;
        if self.is_inverse() {
            c.to_ascii_uppercase()
        } else {
            c
        }
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A word in the generators. Constructed words are freely reduced.
///
/// Text form: one character per letter, `a b c d` for the generators
/// `a1 b1 a2 b2` and upper case for inverses; the empty word prints as `e`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds the free reduction of the given letter sequence.
    pub fn new(letters: impl IntoIterator<Item = Letter>) -> Self {
        Word(free_reduce(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        Word::new(self.0.iter().chain(other.0.iter()).copied())
    }

    pub fn pow(&self, n: usize) -> Self {
        Word::new(std::iter::repeat_n(self.0.iter().copied(), n).flatten())
    }

    /// Conjugate `c w c^-1`.
    pub fn conjugate_by(&self, c: &Word) -> Self {
        c.concat(self).concat(&c.inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        for l in &self.0 {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(Word::empty());
        }
        let mut letters = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let lower = ch.to_ascii_lowercase();
            if !lower.is_ascii_lowercase() {
                return Err(Error::invalid(format!("bad letter {ch:?} in word {s:?}")));
            }
            letters.push(Letter::new((lower as u8 - b'a') as usize, ch.is_ascii_uppercase()));
        }
        Ok(Word::new(letters))
    }
}

fn free_reduce(letters: impl IntoIterator<Item = Letter>) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::new();
    for l in letters {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// One-relator presentation of a surface group.
#[derive(Clone, Debug)]
pub struct GroupPresentation {
    generator_count: usize,
    relator: Word,
    labels: Vec<String>,
    /// Cyclic rotations of the relator and of its inverse.
    pieces: Vec<Vec<Letter>>,
}

impl GroupPresentation {
    pub fn new(generator_count: usize, relator: Word, labels: Vec<String>) -> Result<Self> {
        if generator_count < 2 {
            return Err(Error::invalid("a presentation needs at least two generators"));
        }
        if labels.len() != generator_count {
            return Err(Error::invalid("one label per generator is required"));
        }
        let r = relator.letters();
        if r.is_empty() || r[0] == r[r.len() - 1].inverse() {
            return Err(Error::invalid("relator must be cyclically reduced and nonempty"));
        }
        if r.iter().any(|l| l.generator() >= generator_count) {
            return Err(Error::invalid("relator uses an unknown generator"));
        }
        let mut pieces = Vec::with_capacity(2 * r.len());
        for base in [relator.clone(), relator.inverse()] {
            let b = base.letters();
            for k in 0..b.len() {
                pieces.push(b[k..].iter().chain(&b[..k]).copied().collect());
            }
        }
        Ok(GroupPresentation { generator_count, relator, labels, pieces })
    }

    /// `a1 b1 a1^-1 b1^-1 a2 b2 a2^-1 b2^-1`.
    pub fn genus2() -> Self {
        let (a1, b1, a2, b2) = (0, 1, 2, 3);
        let r = [
            Letter::new(a1, false),
            Letter::new(b1, false),
            Letter::new(a1, true),
            Letter::new(b1, true),
            Letter::new(a2, false),
            Letter::new(b2, false),
            Letter::new(a2, true),
            Letter::new(b2, true),
        ];
        let labels = ["a1", "b1", "a2", "b2"].iter().map(|s| s.to_string()).collect();
        GroupPresentation::new(4, Word::new(r), labels).expect("genus-2 presentation is valid")
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    pub fn relator(&self) -> &Word {
        &self.relator
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn generator(&self, i: usize) -> Word {
        Word::new([Letter::new(i, false)])
    }

    fn relator_len(&self) -> usize {
        self.relator.len()
    }

    /// Free reduction followed by Dehn reduction: any subword agreeing with
    /// more than half of a cyclic rotation of the relator (or its inverse)
    /// is replaced by the inverse of the shorter complement.
    pub fn reduce(&self, w: &Word) -> Word {
        let mut letters = w.letters().to_vec();
        while let Some(next) = self.dehn_step(&letters) {
            letters = next;
        }
        Word(letters)
    }

    fn dehn_step(&self, w: &[Letter]) -> Option<Vec<Letter>> {
        let n = self.relator_len();
        for start in 0..w.len() {
            for piece in &self.pieces {
                let k = common_prefix(&w[start..], piece);
                if 2 * k > n {
                    let complement = piece[k..].iter().rev().map(|l| l.inverse());
                    let rebuilt = w[..start]
                        .iter()
                        .copied()
                        .chain(complement)
                        .chain(w[start + k..].iter().copied());
                    return Some(free_reduce(rebuilt));
                }
            }
        }
        None
    }

    /// Canonical representative of the conjugacy class of `w`.
    ///
    /// Cyclic free reduction and cyclic Dehn reduction, then the minimal
    /// rotation over all cyclic words reachable by exchanging one half of a
    /// relator rotation for the other half.
    pub fn conjugacy_canonical(&self, w: &Word) -> CyclicWord {
        let mut current = self.cyclic_dehn(self.reduce(w).0);
        'restart: loop {
            let mut seen: HashSet<Vec<Letter>> = HashSet::new();
            let mut queue = vec![min_rotation(&current)];
            seen.insert(queue[0].clone());
            let mut best = queue[0].clone();
            while let Some(word) = queue.pop() {
                if seen.len() > HALF_SWAP_LIMIT {
                    break;
                }
                for next in self.half_swaps(&word) {
                    let reduced = self.cyclic_dehn(next);
                    if reduced.len() < current.len() {
                        current = reduced;
                        continue 'restart;
                    }
                    let rot = min_rotation(&reduced);
                    if seen.insert(rot.clone()) {
                        if rot < best {
                            best = rot.clone();
                        }
                        queue.push(rot);
                    }
                }
            }
            return CyclicWord(best);
        }
    }

    fn cyclic_dehn(&self, letters: Vec<Letter>) -> Vec<Letter> {
        let mut w = cyclic_free_reduce(letters);
        let n = self.relator_len();
        'outer: loop {
            let len = w.len();
            if len == 0 {
                return w;
            }
            for start in 0..len {
                let rotated: Vec<Letter> = w[start..].iter().chain(&w[..start]).copied().collect();
                for piece in &self.pieces {
                    let k = common_prefix(&rotated, piece);
                    if 2 * k > n {
                        let complement = piece[k..].iter().rev().map(|l| l.inverse());
                        let rebuilt: Vec<Letter> =
                            complement.chain(rotated[k..].iter().copied()).collect();
                        w = cyclic_free_reduce(rebuilt);
                        continue 'outer;
                    }
                }
            }
            return w;
        }
    }

    /// Cyclic words obtained by replacing a cyclic subword equal to exactly
    /// half of a relator rotation by the inverse of the other half.
    fn half_swaps(&self, w: &[Letter]) -> Vec<Vec<Letter>> {
        let n = self.relator_len();
        let half = n / 2;
        let mut out = Vec::new();
        if !n.is_multiple_of(2) || w.len() < half {
            return out;
        }
        for start in 0..w.len() {
            let rotated: Vec<Letter> = w[start..].iter().chain(&w[..start]).copied().collect();
            for piece in &self.pieces {
                if common_prefix(&rotated, piece) >= half {
                    let complement = piece[half..].iter().rev().map(|l| l.inverse());
                    out.push(
                        complement
                            .chain(rotated[half..].iter().copied())
                            .collect(),
                    );
                }
            }
        }
        out
    }
}

const HALF_SWAP_LIMIT: usize = 4096;

fn common_prefix(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn cyclic_free_reduce(letters: Vec<Letter>) -> Vec<Letter> {
    let mut w = free_reduce(letters);
    while w.len() >= 2 && w[0] == w[w.len() - 1].inverse() {
        w.pop();
        w.remove(0);
    }
    w
}

/// Free and cyclic reduction, without Dehn moves: a conjugate of `w`.
pub fn cyclic_reduce(w: &Word) -> Word {
    Word(cyclic_free_reduce(w.letters().to_vec()))
}

fn min_rotation(w: &[Letter]) -> Vec<Letter> {
    let n = w.len();
    (0..n.max(1))
        .map(|k| w[k.min(n)..].iter().chain(&w[..k.min(n)]).copied().collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Cyclically reduced word stored in canonical rotation; stands for a
/// conjugacy class. The empty cyclic word is the trivial class.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CyclicWord(Vec<Letter>);

impl CyclicWord {
    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The stored rotation as an ordinary word.
    pub fn as_word(&self) -> Word {
        Word(self.0.clone())
    }
}

impl PartialOrd for CyclicWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CyclicWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_word())
    }
}

impl fmt::Debug for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CyclicWord({self})")
    }
}

/// Free reduction, plus Dehn reduction when a presentation is supplied.
pub fn reduce(w: &Word, presentation: Option<&GroupPresentation>) -> Word {
    match presentation {
        Some(p) => p.reduce(w),
        None => Word::new(w.letters().iter().copied()),
    }
}

pub fn conjugacy_canonical(w: &Word, presentation: &GroupPresentation) -> CyclicWord {
    presentation.conjugacy_canonical(w)
}

/// `omega_w` by the cocycle rule `omega_{uv} = omega_u + rho0(u) omega_v`.
pub fn extend_cocycle(omega: &Cocycle, w: &Word, rho0: &Representation) -> DVector<f64> {
    let d = rho0.dim();
    let mut acc = DVector::zeros(d);
    let mut prefix = DMatrix::identity(d, d);
    for &l in w.letters() {
        let step = letter_translation(omega, l, rho0);
        acc += &prefix * step;
        prefix *= rho0.letter_matrix(l);
    }
    acc
}

fn letter_translation(omega: &Cocycle, l: Letter, rho0: &Representation) -> DVector<f64> {
    let v = &omega.vectors()[l.generator()];
    if l.is_inverse() {
        -(rho0.letter_matrix(l) * v)
    } else {
        v.clone()
    }
}

/// Basis of the space of generator assignments whose cocycle extension
/// vanishes along the relator.
#[derive(Clone, Debug)]
pub struct CocycleBasis {
    basis: Vec<Cocycle>,
    constraint_rank: usize,
    rank_deficient: bool,
}

impl CocycleBasis {
    pub fn basis(&self) -> &[Cocycle] {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn constraint_rank(&self) -> usize {
        self.constraint_rank
    }

    /// Set when the relator constraint has rank below the module dimension,
    /// which signals an invariant vector or a degenerate representation.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// Linear combination of the basis elements.
    pub fn combine(&self, coefficients: &[f64]) -> Result<Cocycle> {
        if coefficients.len() != self.basis.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                self.basis.len(),
                coefficients.len()
            )));
        }
        let first = &self.basis[0];
        let mut vectors: Vec<DVector<f64>> =
            first.vectors().iter().map(|v| DVector::zeros(v.len())).collect();
        for (c, b) in coefficients.iter().zip(&self.basis) {
            for (acc, v) in vectors.iter_mut().zip(b.vectors()) {
                *acc += v * *c;
            }
        }
        Ok(Cocycle::new(vectors))
    }

    /// Orthogonal projection (in the flattened Euclidean coordinates) onto
    /// the span of the basis.
    pub fn project(&self, omega: &Cocycle) -> Cocycle {
        let flat = omega.flatten();
        let b = linalg::from_columns(&self.basis.iter().map(|c| c.flatten()).collect::<Vec<_>>());
        let coeffs = b.clone().svd(true, true).solve(&flat, 1e-12).expect("svd solve");
        let projected = b * coeffs;
        Cocycle::from_flat(&projected, omega.vectors().len())
    }
}

/// Solves `omega_R = 0` for the relator `R` by dense least squares with
/// singular values below `1e-10 * max` treated as zero.
pub fn solve_cocycle_space(rho0: &Representation) -> Result<CocycleBasis> {
    let d = rho0.dim();
    let presentation = rho0
        .presentation()
        .ok_or_else(|| Error::invalid("cocycle space needs a group with a relator"))?;
    let g = presentation.generator_count();
    let relator = presentation.relator().clone();
    let mut constraint = DMatrix::zeros(d, g * d);
    for col in 0..g * d {
        let mut flat = DVector::zeros(g * d);
        flat[col] = 1.0;
        let unit = Cocycle::from_flat(&flat, g);
        let image = extend_cocycle(&unit, &relator, rho0);
        constraint.set_column(col, &image);
    }
    let kernel = linalg::null_space(&constraint, linalg::RANK_TOL);
    let constraint_rank = g * d - kernel.ncols();
    let rank_deficient = constraint_rank < d;
    if rank_deficient {
        log::warn!("relator constraint has rank {constraint_rank} < {d}; representation may have invariant vectors");
    }
    let basis = (0..kernel.ncols())
        .map(|j| Cocycle::from_flat(&kernel.column(j).into_owned(), g))
        .collect();
    Ok(CocycleBasis { basis, constraint_rank, rank_deficient })
}

/// Deduplicated set of canonical classes, ordered canonically.
pub fn distinct_classes<'a>(
    words: impl IntoIterator<Item = &'a Word>,
    presentation: &GroupPresentation,
) -> BTreeSet<CyclicWord> {
    words
        .into_iter()
        .map(|w| presentation.conjugacy_canonical(w))
        .filter(|c| !c.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn free_cancellation() {
        assert_eq!(w("aAb"), w("b"));
        assert_eq!(reduce(&w("aAb"), None), w("b"));
        assert!(reduce(&Word::empty(), None).is_empty());
    }

    #[test]
    fn relator_reduces_to_identity() {
        let g = GroupPresentation::genus2();
        assert_eq!(g.relator().to_string(), "abABcdCD");
        assert!(g.reduce(g.relator()).is_empty());
        assert!(g.reduce(&g.relator().inverse()).is_empty());
    }

    #[test]
    fn long_relator_piece_is_shortened() {
        let g = GroupPresentation::genus2();
        // five letters of the relator equal the inverse of the other three
        assert_eq!(g.reduce(&w("abABc")), w("dcD"));
    }

    #[test]
    fn cyclic_rotations_share_a_class() {
        let g = GroupPresentation::genus2();
        assert_eq!(g.conjugacy_canonical(&w("ba")), g.conjugacy_canonical(&w("ab")));
        let inner = w("bcD");
        assert_eq!(
            g.conjugacy_canonical(&inner.conjugate_by(&w("a"))),
            g.conjugacy_canonical(&inner)
        );
    }

    #[test]
    fn rotated_relator_is_trivial_class() {
        let g = GroupPresentation::genus2();
        let r = g.relator().letters();
        let rotated = Word::new(r[3..].iter().chain(&r[..3]).copied());
        assert!(g.conjugacy_canonical(&rotated).is_empty());
    }

    #[test]
    fn parse_and_display_round_trip() {
        let word = w("abCdA");
        assert_eq!(word.to_string().parse::<Word>().unwrap(), word);
        assert!("a1".parse::<Word>().is_err());
    }

    #[test]
    fn inverse_and_powers() {
        let x = w("abc");
        assert!(x.concat(&x.inverse()).is_empty());
        assert_eq!(x.pow(2), w("abcabc"));
    }
}
