//! Interval arithmetic and branch-and-bound range bounding over boxes.
//!
//! Arithmetic is plain `f64` with an outward slack of [`OUTWARD_SLACK`] (relative to
//! magnitude, floored at 1) added after every rounding operation. Negation and point
//! construction are exact.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

pub const OUTWARD_SLACK: f64 = 1e-12;

/// Default subdivision budget per [`bound_range`] query.
pub const DEFAULT_MAX_BOXES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("invalid interval [{lo}, {hi}]")]
    Invalid { lo: f64, hi: f64 },
    #[error("division by an interval containing zero: {0}")]
    DivisionByZero(Interval),
    #[error("empty box")]
    EmptyBox,
    #[error("search region excludes the whole box")]
    EmptyRegion,
    #[error("{0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[inline]
fn down(v: f64) -> f64 {
    v - OUTWARD_SLACK * (1.0 + v.abs())
}

#[inline]
fn up(v: f64) -> f64 {
    v + OUTWARD_SLACK * (1.0 + v.abs())
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi || !lo.is_finite() || !hi.is_finite() {
            return Err(IntervalError::Invalid { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// Widened constructor used after rounding operations.
    fn rounded(lo: f64, hi: f64) -> Self {
        Self { lo: down(lo), hi: up(hi) }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// Exactly the point zero (operations with it are exact).
    pub fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    pub fn sqr(self) -> Interval {
        let (a, b) = (self.lo * self.lo, self.hi * self.hi);
        if self.contains_zero() {
            Interval::rounded(0.0, a.max(b)).clamp_lo(0.0)
        } else {
            Interval::rounded(a.min(b), a.max(b))
        }
    }

    fn clamp_lo(mut self, floor: f64) -> Interval {
        if self.lo < floor {
            self.lo = floor;
        }
        self
    }

    pub fn powi(self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => self,
            _ if n % 2 == 0 => self.powi(n / 2).sqr(),
            _ => self * self.powi(n - 1),
        }
    }

    pub fn recip(self) -> Result<Interval, IntervalError> {
        if self.contains_zero() {
            return Err(IntervalError::DivisionByZero(self));
        }
        Ok(Interval::rounded(1.0 / self.hi, 1.0 / self.lo))
    }

    pub fn checked_div(self, rhs: Interval) -> Result<Interval, IntervalError> {
        Ok(self * rhs.recip()?)
    }

    pub fn tanh(self) -> Interval {
        Interval::rounded(self.lo.tanh(), self.hi.tanh())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        if rhs.is_zero() {
            return self;
        }
        if self.is_zero() {
            return rhs;
        }
        Interval::rounded(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        if rhs.is_zero() {
            return self;
        }
        if self.is_point() && self == rhs {
            return Interval::ZERO;
        }
        Interval::rounded(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if self.is_zero() || rhs.is_zero() {
            return Interval::ZERO;
        }
        if rhs == Interval::ONE {
            return self;
        }
        if self == Interval::ONE {
            return rhs;
        }
        let p = [self.lo * rhs.lo, self.lo * rhs.hi, self.hi * rhs.lo, self.hi * rhs.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::rounded(lo, hi)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, rhs: f64) -> Interval {
        self - Interval::point(rhs)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, rhs: f64) -> Interval {
        self * Interval::point(rhs)
    }
}

impl Add<Interval> for f64 {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::point(self) + rhs
    }
}

impl Sub<Interval> for f64 {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::point(self) - rhs
    }
}

impl Mul<Interval> for f64 {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        Interval::point(self) * rhs
    }
}

/// Axis-aligned box: one interval per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalBox(Vec<Interval>);

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self, IntervalError> {
        if dims.is_empty() {
            return Err(IntervalError::EmptyBox);
        }
        Ok(Self(dims))
    }

    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self, IntervalError> {
        if lower.len() != upper.len() {
            return Err(IntervalError::Domain("bound lengths differ".into()));
        }
        let dims = lower
            .iter()
            .zip(upper)
            .map(|(&l, &u)| Interval::new(l, u))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Interval {
        self.0[i]
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }

    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        for (i, iv) in self.0.iter().enumerate() {
            if iv.width() > self.0[best].width() {
                best = i;
            }
        }
        best
    }

    pub fn max_width(&self) -> f64 {
        self.0.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.0.len() && self.0.iter().zip(p).all(|(iv, &v)| iv.contains(v))
    }

    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        other.0.len() == self.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.contains_interval(b))
    }

    pub fn with_dim(&self, dim: usize, iv: Interval) -> IntervalBox {
        let mut dims = self.0.clone();
        dims[dim] = iv;
        IntervalBox(dims)
    }

    pub fn bisect(&self, dim: usize) -> (IntervalBox, IntervalBox) {
        let iv = self.0[dim];
        let m = iv.mid();
        (
            self.with_dim(dim, Interval { lo: iv.lo, hi: m }),
            self.with_dim(dim, Interval { lo: m, hi: iv.hi }),
        )
    }

    /// Sub-box restricted to the dimension range `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> &[Interval] {
        &self.0[start..start + len]
    }
}

/// Natural interval extension evaluation: the returned interval contains the range of
/// the expression over `b`.
pub fn eval_interval<F>(expr: F, b: &IntervalBox) -> Result<Interval, IntervalError>
where
    F: Fn(&IntervalBox) -> Result<Interval, IntervalError>,
{
    expr(b)
}

/// Restricts a branch-and-bound search to a subset of the root box.
pub trait SearchRegion: Sync {
    /// True when no point of `b` lies in the region. Must be sound (never exclude a
    /// box that intersects the region).
    fn excludes(&self, b: &IntervalBox) -> bool;

    /// Points of `b` inside the region used to tighten the incumbent.
    fn probe_points(&self, b: &IntervalBox) -> Vec<Vec<f64>>;
}

/// The whole root box.
pub struct WholeBox;

impl SearchRegion for WholeBox {
    fn excludes(&self, _b: &IntervalBox) -> bool {
        false
    }

    fn probe_points(&self, b: &IntervalBox) -> Vec<Vec<f64>> {
        vec![b.midpoint()]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundOptions {
    pub max_boxes: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { max_boxes: DEFAULT_MAX_BOXES }
    }
}

/// Result of a [`bound_range`] query. `range` always contains the true range; when
/// `tight` is set each end is within `tol` of the true infimum/supremum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeBound {
    pub range: Interval,
    pub tight: bool,
    pub boxes: usize,
}

struct Node {
    lo: f64,
    b: IntervalBox,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.lo.total_cmp(&other.lo) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // min-heap on the lower bound
    fn cmp(&self, other: &Self) -> Ordering {
        other.lo.total_cmp(&self.lo)
    }
}

struct InfResult {
    lo: f64,
    tight: bool,
    boxes: usize,
}

/// Picks the dimension whose collapse to its midpoint shrinks the enclosure most;
/// falls back to the widest dimension.
fn split_dim<FI>(ifn: &FI, b: &IntervalBox, parent: Interval) -> Result<usize, IntervalError>
where
    FI: Fn(&IntervalBox) -> Result<Interval, IntervalError>,
{
    let mut best = None;
    let mut best_gain = 0.0;
    for d in 0..b.dims() {
        let iv = b.get(d);
        if iv.width() <= 0.0 {
            continue;
        }
        let collapsed = ifn(&b.with_dim(d, Interval::point(iv.mid())))?;
        let gain = parent.width() - collapsed.width();
        if gain > best_gain * (1.0 + 1e-9) + 1e-15 {
            best_gain = gain;
            best = Some(d);
        }
    }
    Ok(best.unwrap_or_else(|| b.widest_dim()))
}

fn bound_inf<FI, FP, R>(
    ifn: &FI,
    pfn: &FP,
    region: &R,
    root: &IntervalBox,
    tol: f64,
    opts: BoundOptions,
) -> Result<InfResult, IntervalError>
where
    FI: Fn(&IntervalBox) -> Result<Interval, IntervalError>,
    FP: Fn(&[f64]) -> f64,
    R: SearchRegion + ?Sized,
{
    if region.excludes(root) {
        return Err(IntervalError::EmptyRegion);
    }
    let mut incumbent = f64::INFINITY;
    let probe = |b: &IntervalBox, incumbent: &mut f64| {
        for p in region.probe_points(b) {
            let v = pfn(&p);
            if v < *incumbent {
                *incumbent = v;
            }
        }
    };

    let mut heap = BinaryHeap::new();
    let root_iv = ifn(root)?;
    probe(root, &mut incumbent);
    heap.push(Node { lo: root_iv.lo(), b: root.clone() });
    let mut boxes = 1usize;
    let mut tight = true;
    // lowest bound among boxes that could not be split further
    let mut stuck_lo = f64::INFINITY;

    loop {
        let Some(node) = heap.pop() else {
            // every remaining box was pruned against the incumbent
            let lo = if incumbent.is_finite() { down(incumbent) } else { stuck_lo };
            return Ok(InfResult { lo: lo.min(stuck_lo), tight, boxes });
        };
        if node.lo >= stuck_lo {
            return Ok(InfResult { lo: stuck_lo, tight: false, boxes });
        }
        if incumbent - node.lo <= tol {
            return Ok(InfResult { lo: node.lo, tight, boxes });
        }
        if boxes >= opts.max_boxes {
            return Ok(InfResult { lo: node.lo, tight: false, boxes });
        }
        if node.b.max_width() <= 0.0 {
            // degenerate box outside the probe set; keep its bound, stop refining it
            stuck_lo = stuck_lo.min(node.lo);
            tight = false;
            continue;
        }
        let parent_iv = ifn(&node.b)?;
        let dim = split_dim(ifn, &node.b, parent_iv)?;
        let (left, right) = node.b.bisect(dim);
        for child in [left, right] {
            if region.excludes(&child) {
                continue;
            }
            boxes += 1;
            let iv = ifn(&child)?;
            probe(&child, &mut incumbent);
            // children keep at least the parent's bound (inclusion isotonicity)
            let lo = iv.lo().max(node.lo);
            if lo <= incumbent {
                heap.push(Node { lo, b: child });
            }
        }
    }
}

/// Conservative, `tol`-tight enclosure of the range of an expression over `root ∩ region`.
///
/// `interval_fn` is the interval extension, `point_fn` the point evaluator of the same
/// expression. On budget exhaustion the (still conservative) current bound is returned
/// with `tight == false`.
pub fn bound_range_in<FI, FP, R>(
    interval_fn: FI,
    point_fn: FP,
    region: &R,
    root: &IntervalBox,
    tol: f64,
    opts: BoundOptions,
) -> Result<RangeBound, IntervalError>
where
    FI: Fn(&IntervalBox) -> Result<Interval, IntervalError>,
    FP: Fn(&[f64]) -> f64,
    R: SearchRegion + ?Sized,
{
    if !(tol > 0.0) {
        return Err(IntervalError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let inf = bound_inf(&interval_fn, &point_fn, region, root, tol, opts)?;
    let neg_ifn = |b: &IntervalBox| interval_fn(b).map(|iv| -iv);
    let neg_pfn = |p: &[f64]| -point_fn(p);
    let sup = bound_inf(&neg_ifn, &neg_pfn, region, root, tol, opts)?;
    let (lo, hi) = (inf.lo, -sup.lo);
    let range = if lo <= hi { Interval { lo, hi } } else { Interval { lo: hi, hi: lo } };
    Ok(RangeBound { range, tight: inf.tight && sup.tight, boxes: inf.boxes + sup.boxes })
}

/// [`bound_range_in`] over the whole box.
pub fn bound_range<FI, FP>(
    interval_fn: FI,
    point_fn: FP,
    root: &IntervalBox,
    tol: f64,
    opts: BoundOptions,
) -> Result<RangeBound, IntervalError>
where
    FI: Fn(&IntervalBox) -> Result<Interval, IntervalError>,
    FP: Fn(&[f64]) -> f64,
{
    bound_range_in(interval_fn, point_fn, &WholeBox, root, tol, opts)
}

/// Dense row-major matrix of intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Interval::ZERO; rows * cols] }
    }

    pub fn from_points(m: &nalgebra::DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, Interval::point(m[(i, j)]));
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Interval {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Interval) {
        self.data[i * self.cols + j] = v;
    }

    /// `self * k` for a point matrix `k`.
    pub fn mul_point(&self, k: &nalgebra::DMatrix<f64>) -> IntervalMatrix {
        let mut out = IntervalMatrix::zeros(self.rows, k.ncols());
        for i in 0..self.rows {
            for j in 0..k.ncols() {
                let mut acc = Interval::ZERO;
                for l in 0..self.cols {
                    acc = acc + self.get(i, l) * Interval::point(k[(l, j)]);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    /// Entrywise `self - m` for a point matrix `m`.
    pub fn sub_point(&self, m: &nalgebra::DMatrix<f64>) -> IntervalMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j) - Interval::point(m[(i, j)]));
            }
        }
        out
    }

    pub fn add(&self, other: &IntervalMatrix) -> IntervalMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect();
        IntervalMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn is_exact_zero(&self) -> bool {
        self.data.iter().all(Interval::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn grid_range<F: Fn(&[f64]) -> f64>(f: F, b: &IntervalBox, per_dim: usize) -> (f64, f64) {
        let d = b.dims();
        let mut idx = vec![0usize; d];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        loop {
            let p: Vec<f64> = (0..d)
                .map(|k| {
                    let iv = b.get(k);
                    iv.lo() + iv.width() * idx[k] as f64 / (per_dim - 1) as f64
                })
                .collect();
            let v = f(&p);
            lo = lo.min(v);
            hi = hi.max(v);
            let mut k = 0;
            loop {
                if k == d {
                    return (lo, hi);
                }
                idx[k] += 1;
                if idx[k] < per_dim {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    #[test]
    fn constant_is_exact() {
        let b = IntervalBox::from_bounds(&[-3.0, 0.0], &[5.0, 1.0]).unwrap();
        let r = eval_interval(|_| Ok(Interval::point(3.0)), &b).unwrap();
        assert_eq!(r, Interval::point(3.0));
    }

    #[test]
    fn product_contains_grid_range() {
        let b = IntervalBox::from_bounds(&[0.0, -1.0], &[1.0, 1.0]).unwrap();
        let (glo, ghi) = grid_range(|p| p[0] * p[1], &b, 100);
        assert_eq!((glo, ghi), (-1.0, 1.0));
        let r = eval_interval(|b| Ok(b.get(0) * b.get(1)), &b).unwrap();
        assert!(r.lo() <= glo && r.hi() >= ghi);
    }

    #[test]
    fn van_der_pol_entry_contains_grid_range() {
        let b = IntervalBox::from_bounds(&[-0.3375, -0.1], &[0.3, 0.1]).unwrap();
        let f = |p: &[f64]| (1.0 + p[1]) * (p[0] * p[0] - 1.0) + 1.0;
        let (glo, ghi) = grid_range(f, &b, 201);
        // extremes: (x1 = 0, θ2 = 0.1) and (x1 = -0.3375, θ2 = -0.1)
        let sup = 1.0 - 0.9 * (1.0 - 0.3375 * 0.3375);
        assert!((glo - (-0.1)).abs() < 1e-4, "{glo}");
        assert!((ghi - sup).abs() < 1e-12, "{ghi}");
        let r = eval_interval(|b| Ok((1.0 + b.get(1)) * (b.get(0).sqr() - 1.0) + 1.0), &b).unwrap();
        assert!(r.lo() <= -0.1 && r.hi() >= sup, "{r}");
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert!(matches!(iv(-1.0, 1.0).recip(), Err(IntervalError::DivisionByZero(_))));
        assert!(iv(1.0, 2.0).checked_div(iv(-0.5, 0.5)).is_err());
        let q = iv(1.0, 2.0).checked_div(iv(2.0, 4.0)).unwrap();
        assert!(q.contains(0.25) && q.contains(1.0));
    }

    #[test]
    fn invalid_intervals_rejected() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
        assert!(IntervalBox::new(vec![]).is_err());
    }

    #[test]
    fn square_of_straddling_interval_is_nonnegative() {
        let s = iv(-2.0, 1.0).sqr();
        assert_eq!(s.lo(), 0.0);
        assert!(s.hi() >= 4.0);
        assert!(iv(-2.0, 1.0).powi(3).contains(-8.0));
    }

    #[test]
    fn bound_x_squared() {
        let b = IntervalBox::from_bounds(&[-1.0], &[1.0]).unwrap();
        let r = bound_range(|b| Ok(b.get(0).sqr()), |p| p[0] * p[0], &b, 1e-3, BoundOptions::default())
            .unwrap();
        assert!(r.tight);
        assert!(r.range.lo() <= 0.0 && r.range.lo() >= -1e-3, "{}", r.range);
        assert!(r.range.hi() >= 1.0 && r.range.hi() <= 1.0 + 1e-3, "{}", r.range);
    }

    #[test]
    fn bound_monotone_parameter() {
        let b = IntervalBox::from_bounds(&[-0.05], &[0.05]).unwrap();
        let r = bound_range(|b| Ok(-b.get(0)), |p| -p[0], &b, 1e-3, BoundOptions::default()).unwrap();
        assert!(r.range.lo() <= -0.05 && r.range.lo() >= -0.051);
        assert!(r.range.hi() >= 0.05 && r.range.hi() <= 0.051);
    }

    #[test]
    fn bound_bilinear_entry_against_grid() {
        let b = IntervalBox::from_bounds(&[-0.3375, -0.8523, -0.1], &[0.3, 0.8077, 0.1]).unwrap();
        let f = |p: &[f64]| 2.0 * (1.0 + p[2]) * p[0] * p[1];
        // monomial in each variable: extremes are at vertices, so the grid hits them
        let (glo, ghi) = grid_range(f, &b, 41);
        let r = bound_range(
            |b| Ok(2.0 * (1.0 + b.get(2)) * b.get(0) * b.get(1)),
            f,
            &b,
            1e-3,
            BoundOptions::default(),
        )
        .unwrap();
        assert!(r.tight);
        assert!(r.range.lo() <= glo && glo - r.range.lo() <= 1e-3, "{} vs {glo}", r.range);
        assert!(r.range.hi() >= ghi && r.range.hi() - ghi <= 1e-3, "{} vs {ghi}", r.range);
    }

    #[test]
    fn budget_exhaustion_is_flagged_but_sound() {
        let b = IntervalBox::from_bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        // x - x style dependency problem: enclosure never becomes exact
        let ifn = |b: &IntervalBox| Ok(b.get(0) * b.get(1) - b.get(1) * b.get(0));
        let r = bound_range(ifn, |_| 0.0, &b, 1e-9, BoundOptions { max_boxes: 50 }).unwrap();
        assert!(!r.tight);
        assert!(r.range.contains(0.0));
    }

    #[test]
    fn bad_tolerance_rejected() {
        let b = IntervalBox::from_bounds(&[0.0], &[1.0]).unwrap();
        assert!(bound_range(|b| Ok(b.get(0)), |p| p[0], &b, 0.0, BoundOptions::default()).is_err());
    }
}
