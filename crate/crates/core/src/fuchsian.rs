//! Fuchsian geometry of the genus-2 octagon group: explicit generators in
//! SL(2,R), translation lengths, boundary fixed points and ball enumeration
//! in the Cayley graph measured by orbit displacement in the upper
//! half-plane.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::ops::Mul;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::surface_group::{GroupPresentation, Letter, Word};

/// A 2x2 real matrix of determinant one, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sl2Matrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sl2Matrix {
    pub const IDENTITY: Sl2Matrix = Sl2Matrix { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Checked constructor: the determinant must be one within `1e-10`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Sl2Matrix { a, b, c, d };
        if (m.det() - 1.0).abs() > 1e-10 * (1.0 + m.max_abs().powi(2)) {
            return Err(Error::invalid(format!("determinant {} is not 1", m.det())));
        }
        Ok(m)
    }

    pub fn diag(lambda: f64) -> Self {
        Sl2Matrix { a: lambda, b: 0.0, c: 0.0, d: 1.0 / lambda }
    }

    /// Rotation by `theta` about the point `i` of the upper half-plane.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Sl2Matrix { a: c, b: s, c: -s, d: c }
    }

    /// Translation by hyperbolic distance `dist` along the imaginary axis.
    pub fn translation(dist: f64) -> Self {
        Sl2Matrix::diag((dist / 2.0).exp())
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        Sl2Matrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn neg(&self) -> Self {
        Sl2Matrix { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[self.a, self.b, self.c, self.d])
    }

    /// Representative of `+-M` with nonnegative trace.
    pub fn projective_normal(&self) -> Self {
        if self.trace() < 0.0 {
            self.neg()
        } else {
            *self
        }
    }

    /// Distance to `other` in PSL(2,R), entrywise max.
    pub fn projective_distance(&self, other: &Sl2Matrix) -> f64 {
        let diff = |m: &Sl2Matrix, n: &Sl2Matrix| {
            (m.a - n.a).abs().max((m.b - n.b).abs()).max((m.c - n.c).abs()).max((m.d - n.d).abs())
        };
        diff(self, other).min(diff(self, &other.neg()))
    }

    /// Hyperbolic distance between `i` and `M i`.
    pub fn displacement(&self) -> f64 {
        let s = 0.5 * (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d);
        s.max(1.0).acosh()
    }

    /// Moebius action on a boundary point given in homogeneous coordinates.
    pub fn act(&self, p: BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint::new(self.a * p.x + self.b * p.y, self.c * p.x + self.d * p.y)
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2.0 + 1e-12
    }

    /// Larger eigenvalue modulus, for hyperbolic matrices.
    pub fn spectral_radius(&self) -> f64 {
        let t = self.trace().abs() / 2.0;
        t + (t * t - 1.0).max(0.0).sqrt()
    }
}

impl Mul for Sl2Matrix {
    type Output = Sl2Matrix;

    fn mul(self, o: Sl2Matrix) -> Sl2Matrix {
        Sl2Matrix {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// A point of the projective line, normalized to unit length with a
/// canonical sign.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub x: f64,
    pub y: f64,
}

impl BoundaryPoint {
    pub fn new(x: f64, y: f64) -> Self {
        let n = x.hypot(y);
        let (mut x, mut y) = (x / n, y / n);
        if y < 0.0 || (y == 0.0 && x < 0.0) {
            x = -x;
            y = -y;
        }
        BoundaryPoint { x, y }
    }

    /// Sine of the angle between the representing lines.
    pub fn distance(&self, other: &BoundaryPoint) -> f64 {
        (self.x * other.y - self.y * other.x).abs()
    }
}

/// `2 arccosh(|tr M| / 2)`; rejects non-hyperbolic input.
pub fn translation_length(m: &Sl2Matrix) -> Result<f64> {
    if !m.is_hyperbolic() {
        return Err(Error::invalid(format!("matrix with trace {} is not hyperbolic", m.trace())));
    }
    Ok(2.0 * (m.trace().abs() / 2.0).acosh())
}

/// Attracting and repelling fixed points on the boundary, in that order.
pub fn fixed_points(m: &Sl2Matrix) -> Result<(BoundaryPoint, BoundaryPoint)> {
    if !m.is_hyperbolic() {
        return Err(Error::invalid(format!("matrix with trace {} is not hyperbolic", m.trace())));
    }
    let t = m.trace();
    let disc = (t * t / 4.0 - 1.0).sqrt();
    let big = t / 2.0 + t.signum() * disc;
    let small = 1.0 / big;
    Ok((eigenline(m, big), eigenline(m, small)))
}

fn eigenline(m: &Sl2Matrix, lambda: f64) -> BoundaryPoint {
    let v1 = (m.b, lambda - m.a);
    let v2 = (lambda - m.d, m.c);
    if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) {
        BoundaryPoint::new(v1.0, v1.1)
    } else {
        BoundaryPoint::new(v2.0, v2.1)
    }
}

/// Inradius of the regular octagon with interior angles `pi/4`:
/// `cosh r = cot(pi/8)`.
pub fn octagon_inradius() -> f64 {
    (1.0 / FRAC_PI_8.tan()).acosh()
}

/// Circumradius of the same octagon: `cosh R = cot(pi/8)^2`.
pub fn octagon_circumradius() -> f64 {
    (1.0 / FRAC_PI_8.tan()).powi(2).acosh()
}

/// Side pairing carrying side `from` of the octagon onto side `to`, the
/// sides being numbered counterclockwise from the one crossed by the
/// positive imaginary axis.
fn side_pairing(from: usize, to: usize) -> Sl2Matrix {
    let shift = Sl2Matrix::translation(2.0 * octagon_inradius());
    Sl2Matrix::rotation(to as f64 * FRAC_PI_4) * shift * Sl2Matrix::rotation(PI - from as f64 * FRAC_PI_4)
}

/// The genus-2 group as side pairings of the regular octagon centred at
/// `i` with all angles `pi/4`, glued along the pattern
/// `a1 b1 a1^-1 b1^-1 a2 b2 a2^-1 b2^-1`.
pub fn octagon_group() -> Result<(GroupPresentation, Vec<Sl2Matrix>)> {
    let presentation = GroupPresentation::genus2();
    let gens = vec![side_pairing(2, 0), side_pairing(1, 3), side_pairing(6, 4), side_pairing(5, 7)];
    let holonomy = evaluate(&gens, presentation.relator());
    let residual = holonomy.projective_distance(&Sl2Matrix::IDENTITY);
    if residual > 1e-9 {
        return Err(Error::numerical(format!("octagon relator residual {residual:e}")));
    }
    Ok((presentation, gens))
}

/// Holonomy of a word.
pub fn evaluate(gens: &[Sl2Matrix], w: &Word) -> Sl2Matrix {
    w.letters()
        .iter()
        .fold(Sl2Matrix::IDENTITY, |acc, &l| acc * letter_matrix(gens, l))
}

pub fn letter_matrix(gens: &[Sl2Matrix], l: Letter) -> Sl2Matrix {
    let g = gens[l.generator()];
    if l.is_inverse() {
        g.inverse()
    } else {
        g
    }
}

/// One group element found by [`enumerate_ball`].
#[derive(Clone, Debug)]
pub struct BallElement {
    pub matrix: Sl2Matrix,
    pub word: Word,
    pub distance: f64,
}

/// All elements `g` with `d(o, g o) <= radius`, where `o = i` is the centre
/// of the octagon.
#[derive(Clone, Debug)]
pub struct BallEnumeration {
    radius: f64,
    slack: f64,
    elements: Vec<BallElement>,
    visited: usize,
}

impl BallEnumeration {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn slack(&self) -> f64 {
        self.slack
    }

    /// Elements sorted by distance, ties broken by word.
    pub fn elements(&self) -> &[BallElement] {
        &self.elements
    }

    /// Number of nodes the search visited, including the slack shell.
    pub fn visited(&self) -> usize {
        self.visited
    }

    /// `N(t)`: elements with `d(o, g o) <= t`, for `t <= radius`.
    pub fn count(&self, t: f64) -> usize {
        self.elements.partition_point(|e| e.distance <= t)
    }

    /// Rows `(t, N(t), log N(t) / t)` on a uniform grid of `steps` points.
    pub fn summary(&self, steps: usize) -> Vec<(f64, usize, f64)> {
        (1..=steps)
            .map(|k| {
                let t = self.radius * k as f64 / steps as f64;
                let n = self.count(t);
                (t, n, (n as f64).ln() / t)
            })
            .collect()
    }
}

/// Options for [`enumerate_ball`].
#[derive(Clone, Copy, Debug)]
pub struct BallOptions {
    /// Largest number of group elements held at once.
    pub memory_budget: usize,
    /// Grid used to hash matrices.
    pub quantum: f64,
}

impl Default for BallOptions {
    fn default() -> Self {
        BallOptions { memory_budget: 40_000_000, quantum: 1e-7 }
    }
}

/// Default pruning slack: the octagon circumradius. Every tile met by the
/// geodesic segment from `o` to `g o` has its centre within this distance
/// of the segment, so shortest words never leave the pruned region.
pub fn default_slack() -> f64 {
    octagon_circumradius() + 1e-9
}

struct Node {
    matrix: Sl2Matrix,
    parent: u32,
    letter: Letter,
    distance: f64,
}

type Key = [i64; 4];

struct Dedup {
    quantum: f64,
    table: HashMap<Key, Vec<u32>>,
}

impl Dedup {
    fn key(&self, m: &Sl2Matrix) -> ([f64; 4], Key) {
        let scaled = [m.a / self.quantum, m.b / self.quantum, m.c / self.quantum, m.d / self.quantum];
        (scaled, scaled.map(|x| x.round() as i64))
    }

    fn find(&self, m: &Sl2Matrix, nodes: &[Node]) -> Option<u32> {
        let (scaled, key) = self.key(m);
        // neighbouring cells are probed for entries close to a rounding boundary
        let mut options: [[i64; 2]; 4] = [[0; 2]; 4];
        let mut counts = [1usize; 4];
        for i in 0..4 {
            options[i][0] = key[i];
            let frac = scaled[i] - key[i] as f64;
            if frac.abs() > 0.4 {
                options[i][1] = key[i] + frac.signum() as i64;
                counts[i] = 2;
            }
        }
        for i0 in 0..counts[0] {
            for i1 in 0..counts[1] {
                for i2 in 0..counts[2] {
                    for i3 in 0..counts[3] {
                        let k = [options[0][i0], options[1][i1], options[2][i2], options[3][i3]];
                        if let Some(list) = self.table.get(&k) {
                            for &idx in list {
                                let other = &nodes[idx as usize].matrix;
                                let diff = (other.a - m.a)
                                    .abs()
                                    .max((other.b - m.b).abs())
                                    .max((other.c - m.c).abs())
                                    .max((other.d - m.d).abs());
                                if diff < self.quantum {
                                    return Some(idx);
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, m: &Sl2Matrix, idx: u32) {
        let (_, key) = self.key(m);
        self.table.entry(key).or_default().push(idx);
    }
}

fn check_radius(radius: f64, slack: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if !(slack >= 0.0) || !slack.is_finite() {
        return Err(Error::invalid(format!("slack must be nonnegative, got {slack}")));
    }
    Ok(())
}

// BFS over reduced words with right multiplication; every node within `limit`.
fn search(gens: &[Sl2Matrix], limit: f64, options: BallOptions) -> Result<Vec<Node>> {
    let letters: Vec<Letter> = Letter::all(gens.len()).collect();
    let letter_mats: Vec<Sl2Matrix> = letters.iter().map(|&l| letter_matrix(gens, l)).collect();

    let mut nodes = vec![Node {
        matrix: Sl2Matrix::IDENTITY,
        parent: u32::MAX,
        letter: Letter::new(0, false),
        distance: 0.0,
    }];
    let mut dedup = Dedup { quantum: options.quantum, table: HashMap::new() };
    dedup.insert(&Sl2Matrix::IDENTITY, 0);
    let mut frontier: Vec<u32> = vec![0];

    while !frontier.is_empty() {
        let children: Vec<Vec<(Sl2Matrix, Letter, f64)>> = frontier
            .par_iter()
            .map(|&idx| {
                let node = &nodes[idx as usize];
                let mut out = Vec::with_capacity(letters.len());
                for (k, &l) in letters.iter().enumerate() {
                    if idx != 0 && l == node.letter.inverse() {
                        continue;
                    }
                    let m = (node.matrix * letter_mats[k]).projective_normal();
                    let d = m.displacement();
                    if d <= limit {
                        out.push((m, l, d));
                    }
                }
                out
            })
            .collect();
        let mut next = Vec::new();
        for (parent, kids) in frontier.iter().zip(children) {
            for (m, l, d) in kids {
                if dedup.find(&m, &nodes).is_some() {
                    continue;
                }
                let idx = nodes.len() as u32;
                nodes.push(Node { matrix: m, parent: *parent, letter: l, distance: d });
                dedup.insert(&m, idx);
                next.push(idx);
            }
        }
        if nodes.len() > options.memory_budget {
            return Err(Error::MemoryBudget { budget: options.memory_budget, frontier: next.len() });
        }
        frontier = next;
    }
    Ok(nodes)
}

fn word_of(nodes: &[Node], mut idx: u32) -> Word {
    let mut letters = Vec::new();
    while idx != 0 {
        let n = &nodes[idx as usize];
        letters.push(n.letter);
        idx = n.parent;
    }
    letters.reverse();
    Word::new(letters)
}

fn sorted_elements(nodes: &[Node], keep: impl Fn(&Node) -> bool) -> Vec<BallElement> {
    let mut elements: Vec<BallElement> = (0..nodes.len())
        .filter(|&i| keep(&nodes[i]))
        .map(|i| BallElement { matrix: nodes[i].matrix, word: word_of(nodes, i as u32), distance: nodes[i].distance })
        .collect();
    elements.sort_by(|x, y| x.distance.total_cmp(&y.distance).then_with(|| x.word.cmp(&y.word)));
    elements
}

/// Breadth-first search over reduced words, pruning words with
/// `d(o, w o) > radius + slack`; returns every element within `radius`
/// with its lexicographically smallest shortest word.
pub fn enumerate_ball(
    gens: &[Sl2Matrix],
    radius: f64,
    slack: f64,
    options: BallOptions,
) -> Result<BallEnumeration> {
    check_radius(radius, slack)?;
    let nodes = search(gens, radius + slack, options)?;
    let elements = sorted_elements(&nodes, |n| n.distance <= radius);
    Ok(BallEnumeration { radius, slack, elements, visited: nodes.len() })
}

/// Largest `d(o, g o)` for a hyperbolic `g` with translation length at most
/// `length` whose axis passes within `delta` of `o`.
pub fn axis_ball_radius(length: f64, delta: f64) -> f64 {
    (delta.cosh().powi(2) * (length.cosh() - 1.0) + 1.0).acosh()
}

/// Distance from `o` to the axis of a hyperbolic element with translation
/// length `length` and displacement `distance`.
pub fn axis_distance(distance: f64, length: f64) -> f64 {
    let c2 = (distance.cosh() - 1.0) / (length.cosh() - 1.0);
    c2.max(1.0).sqrt().acosh()
}

/// Class representatives: hyperbolic elements with translation length at most
/// `max_length` whose axis meets the closed octagon's circumscribed disc.
/// Every conjugacy class with `l <= max_length` has such a representative,
/// all of which lie in the ball of radius `axis_ball_radius(max_length, R)`.
#[derive(Clone, Debug)]
pub struct ClassRepresentatives {
    pub max_length: f64,
    pub radius: f64,
    pub slack: f64,
    pub visited: usize,
    pub elements: Vec<BallElement>,
}

pub fn enumerate_class_representatives(
    gens: &[Sl2Matrix],
    max_length: f64,
    slack: f64,
    options: BallOptions,
) -> Result<ClassRepresentatives> {
    let rc = octagon_circumradius();
    let radius = axis_ball_radius(max_length, rc) + 1e-9;
    check_radius(radius, slack)?;
    let nodes = search(gens, radius + slack, options)?;
    let keep = |n: &Node| {
        if n.distance > radius || !n.matrix.is_hyperbolic() {
            return false;
        }
        let l = translation_length(&n.matrix).unwrap_or(f64::INFINITY);
        l <= max_length && axis_distance(n.distance, l) <= rc + 1e-9
    };
    let elements = sorted_elements(&nodes, keep);
    Ok(ClassRepresentatives { max_length, radius, slack, visited: nodes.len(), elements })
}
