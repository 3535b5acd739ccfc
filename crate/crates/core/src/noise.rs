//! Lattice realization of two-parameter white noise.
//!
//! On a square `n × n` grid of cells of side `h`, every cell `(k, l)` with
//! `k < l` (strictly inside `x₂ > x₁`, i.e. `t > 0`) carries an i.i.d.
//! `N(0, h²)` increment, so that the integral of the noise over any
//! grid-aligned rectangle `A` in that region is Gaussian with variance
//! `area(A)` and disjoint rectangles are independent. Cells on or below the
//! diagonal hold 0: solutions are only computed for `t ≥ 0`, and the
//! integration triangles exclude the diagonal cells. Every region integral
//! used elsewhere in the crate reduces to a (weighted) sum of these
//! increments.
//!
//! Increments are rounded to multiples of [`INCREMENT_QUANTUM`]. With the grid
//! side bounded by [`MAX_SIDE`], every partial sum of increments is then an
//! exactly representable `f64`, which makes rectangle sums additive and the
//! linear solution's difference identities hold bit for bit.
//!
//! Seeding is counter based: row `k` of path `p` draws cells `l = k+1, k+2, …`
//! in order from the ChaCha stream `k` keyed by `path_key(seed, p)`, so a
//! cell's value depends only on `(seed, p, k, l)` and never on scheduling.

use std::ops::Range;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increments are multiples of 2⁻⁴⁰.
pub const INCREMENT_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

/// Largest accepted grid side `n·h`. Sums of increments stay far below 2¹³
/// in magnitude, where multiples of 2⁻⁴⁰ are still exact.
pub const MAX_SIDE: f64 = 256.0;

/// Relative tolerance used when checking that a length is a multiple of `h`.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-9;

// Streams at or above this value are reserved for aggregated sampling.
const AGGREGATE_STREAM_BASE: u64 = 1 << 63;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the random stream family owned by one Monte Carlo path.
pub fn path_key(seed: u64, path: u64) -> u64 {
    mix64(seed ^ mix64(path.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub(crate) fn stream_rng(seed: u64, path: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(path_key(seed, path));
    rng.set_stream(stream);
    rng
}

/// Rounds to the nearest multiple of [`INCREMENT_QUANTUM`] (ties to even).
#[inline]
pub fn quantize(x: f64) -> f64 {
    // Adding 1.5·2⁵² forces rounding at the units place for |y| < 2⁵¹; both
    // scalings by powers of two are exact.
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let y = x * (1u64 << 40) as f64;
    if y.abs() < (1u64 << 51) as f64 {
        ((y + SHIFT) - SHIFT) * INCREMENT_QUANTUM
    } else {
        y.round_ties_even() * INCREMENT_QUANTUM
    }
}

/// Square lattice `[a₁, a₁ + n·h] × [a₂, a₂ + n·h]` in null coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: (f64, f64),
    pub n: usize,
    pub h: f64,
}

impl GridSpec {
    pub fn new(origin: (f64, f64), n: usize, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!(
                "lattice step h must be positive, got {h}"
            )));
        }
        if n < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 cells per axis, got {n}"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::Config(format!(
                "grid origin must be finite, got {origin:?}"
            )));
        }
        let side = n as f64 * h;
        if side > MAX_SIDE {
            return Err(Error::Config(format!(
                "grid side n·h = {side} exceeds the supported maximum {MAX_SIDE}"
            )));
        }
        Ok(Self { origin, n, h })
    }

    /// Grid whose diagonal `i = j` lies on `x₁ = x₂`, as the solvers require.
    pub fn diagonal(origin: f64, n: usize, h: f64) -> Result<Self> {
        Self::new((origin, origin), n, h)
    }

    pub fn side(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn is_diagonal(&self) -> bool {
        self.origin.0 == self.origin.1
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.h
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.origin.1 + j as f64 * self.h
    }

    /// Number of lattice steps in `length`, which must be a multiple of `h`.
    pub fn steps(&self, length: f64) -> Result<usize> {
        steps_of(length, self.h)
    }

    pub fn index1(&self, x1: f64) -> Result<usize> {
        self.lattice_index(x1 - self.origin.0, "x₁", x1)
    }

    pub fn index2(&self, x2: f64) -> Result<usize> {
        self.lattice_index(x2 - self.origin.1, "x₂", x2)
    }

    fn lattice_index(&self, offset: f64, axis: &str, coord: f64) -> Result<usize> {
        let ratio = offset / self.h;
        let k = ratio.round();
        if (ratio - k).abs() > ALIGNMENT_TOLERANCE * k.abs().max(1.0) {
            return Err(Error::Config(format!(
                "{axis} = {coord} is not a lattice coordinate (h = {})",
                self.h
            )));
        }
        if k < 0.0 || k > self.n as f64 {
            return Err(Error::Range(format!(
                "{axis} = {coord} lies outside the grid [{}, {}]",
                coord - offset,
                coord - offset + self.side()
            )));
        }
        Ok(k as usize)
    }
}

/// Number of steps of size `h` in `length`; errors when misaligned or negative.
pub fn steps_of(length: f64, h: f64) -> Result<usize> {
    let ratio = length / h;
    let k = ratio.round();
    if !ratio.is_finite() || k < 0.0 || (ratio - k).abs() > ALIGNMENT_TOLERANCE * k.abs().max(1.0) {
        return Err(Error::Config(format!(
            "length {length} is not a non-negative multiple of h = {h}; nearest valid value is {}",
            k.max(0.0) * h
        )));
    }
    Ok(k as usize)
}

/// Half-open block of cells `axis1 × axis2` (cell `(k, l)` spans
/// `[a₁ + k·h, a₁ + (k+1)·h] × [a₂ + l·h, a₂ + (l+1)·h]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellRect {
    pub axis1: Range<usize>,
    pub axis2: Range<usize>,
}

impl CellRect {
    pub fn new(axis1: Range<usize>, axis2: Range<usize>) -> Self {
        Self { axis1, axis2 }
    }

    pub fn is_empty(&self) -> bool {
        self.axis1.is_empty() || self.axis2.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.axis1.len() * self.axis2.len()
        }
    }
}

/// Identity of the noise a field was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseTag {
    pub seed: u64,
    pub path: u64,
    pub n: usize,
    pub h_bits: u64,
    pub origin_bits: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct NoiseField {
    grid: GridSpec,
    seed: u64,
    path: u64,
    increments: Vec<f64>,
    /// Two-dimensional prefix sums, built on first use.
    cumulative: OnceLock<Vec<f64>>,
}

/// Path 0 of the noise family selected by `seed`.
pub fn sample_noise(grid: GridSpec, seed: u64) -> Result<NoiseField> {
    NoiseField::sample(grid, seed, 0)
}

impl NoiseField {
    /// Draws the increments of cells above the diagonal for one path.
    pub fn sample(grid: GridSpec, seed: u64, path: u64) -> Result<Self> {
        let grid = GridSpec::new(grid.origin, grid.n, grid.h)?;
        let n = grid.n;
        let mut increments = vec![0.0; n * n];
        for (k, row) in increments.chunks_exact_mut(n).enumerate() {
            let mut rng = stream_rng(seed, path, k as u64);
            for w in row[k + 1..].iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = quantize(grid.h * z);
            }
        }
        Ok(Self {
            grid,
            seed,
            path,
            increments,
            cumulative: OnceLock::new(),
        })
    }

    /// Builds a field from caller-supplied increments (rounded to the quantum).
    pub fn from_increments(grid: GridSpec, seed: u64, path: u64, mut increments: Vec<f64>) -> Self {
        let n = grid.n;
        assert_eq!(increments.len(), n * n, "increment table must be n×n");
        for w in increments.iter_mut() {
            *w = quantize(*w);
        }
        Self {
            grid,
            seed,
            path,
            increments,
            cumulative: OnceLock::new(),
        }
    }

    fn prefix_sums(&self) -> &[f64] {
        self.cumulative.get_or_init(|| {
            // cumulative[i][j] = Σ_{k<i, l<j} W(k, l), built row by row.
            let n = self.grid.n;
            let stride = n + 1;
            let mut cumulative = vec![0.0; stride * stride];
            for k in 0..n {
                let mut row_sum = 0.0;
                for l in 0..n {
                    row_sum += self.increments[k * n + l];
                    cumulative[(k + 1) * stride + l + 1] = cumulative[k * stride + l + 1] + row_sum;
                }
            }
            cumulative
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    pub fn tag(&self) -> NoiseTag {
        NoiseTag {
            seed: self.seed,
            path: self.path,
            n: self.grid.n,
            h_bits: self.grid.h.to_bits(),
            origin_bits: (self.grid.origin.0.to_bits(), self.grid.origin.1.to_bits()),
        }
    }

    #[inline]
    pub fn increment(&self, k: usize, l: usize) -> f64 {
        self.increments[k * self.grid.n + l]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Row `k` of the increment table, i.e. cells `(k, 0..n)`.
    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.grid.n;
        &self.increments[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn cumulative(&self, i: usize, j: usize) -> f64 {
        self.prefix_sums()[i * (self.grid.n + 1) + j]
    }

    /// Noise integral over a block of cells by four-corner inclusion–exclusion.
    pub fn rectangle_integral(&self, rect: &CellRect) -> Result<f64> {
        if rect.is_empty() {
            return Ok(0.0);
        }
        let n = self.grid.n;
        if rect.axis1.end > n || rect.axis2.end > n {
            return Err(Error::Range(format!(
                "cell rectangle {:?} × {:?} exceeds the {n}×{n} grid",
                rect.axis1, rect.axis2
            )));
        }
        let (k0, k1) = (rect.axis1.start, rect.axis1.end);
        let (l0, l1) = (rect.axis2.start, rect.axis2.end);
        Ok(
            self.cumulative(k1, l1) - self.cumulative(k0, l1) - self.cumulative(k1, l0)
                + self.cumulative(k0, l0),
        )
    }

    /// `Σ weights[m] · W(column, rows.start + m)`.
    pub fn strip_integral(
        &self,
        column: usize,
        rows: Range<usize>,
        weights: &[f64],
    ) -> Result<f64> {
        let n = self.grid.n;
        if rows.is_empty() {
            return Ok(0.0);
        }
        if column >= n || rows.end > n {
            return Err(Error::Range(format!(
                "strip at column {column}, rows {rows:?} exceeds the {n}×{n} grid"
            )));
        }
        if weights.len() != rows.len() {
            return Err(Error::Range(format!(
                "strip has {} cells but {} weights were given",
                rows.len(),
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::Data(format!("strip weight {bad} is not finite")));
        }
        let cells = &self.row(column)[rows];
        Ok(cells.iter().zip(weights).map(|(w, c)| w * c).sum())
    }
}

/// Noise integrals over nested squares of `sides[0] > sides[1] > …` cells,
/// all anchored at the same lower-left lattice point.
///
/// The squares are decomposed into disjoint L-shaped shells plus the innermost
/// square. The sum of `m` i.i.d. `N(0, h²)` increments is `N(0, m·h²)`, so each
/// shell is drawn as one aggregated Gaussian; the joint law of the returned
/// integrals is exactly that of the corresponding [`NoiseField`] rectangle
/// sums, at a cost independent of the square sizes.
pub fn nested_square_integrals(h: f64, sides: &[usize], seed: u64, path: u64) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!(
            "lattice step h must be positive, got {h}"
        )));
    }
    if sides.is_empty() {
        return Ok(Vec::new());
    }
    if sides.windows(2).any(|w| w[0] <= w[1]) || sides[sides.len() - 1] == 0 {
        return Err(Error::Config(format!(
            "nested square sides must be strictly decreasing and positive, got {sides:?}"
        )));
    }
    let mut out = vec![0.0; sides.len()];
    let mut acc = 0.0;
    for idx in (0..sides.len()).rev() {
        let outer = sides[idx] as f64;
        let inner = sides.get(idx + 1).map_or(0.0, |&s| s as f64);
        let cells = outer * outer - inner * inner;
        let mut rng = stream_rng(seed, path, AGGREGATE_STREAM_BASE + idx as u64);
        let z: f64 = StandardNormal.sample(&mut rng);
        acc += quantize(h * cells.sqrt() * z);
        out[idx] = acc;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> GridSpec {
        GridSpec::diagonal(0.0, n, h).unwrap()
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(matches!(
            GridSpec::new((0.0, 0.0), 1, 0.1),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            GridSpec::new((0.0, 0.0), 4, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            GridSpec::new((0.0, 0.0), 4, -1.0),
            Err(Error::Config(_))
        ));
        assert!(GridSpec::new((0.0, 0.0), 4, f64::NAN).is_err());
    }

    #[test]
    fn same_seed_gives_identical_field() {
        let g = grid(16, 0.05);
        let a = sample_noise(g, 42).unwrap();
        let b = sample_noise(g, 42).unwrap();
        let c = sample_noise(g, 43).unwrap();
        let bits = |f: &NoiseField| {
            f.increments()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn cells_do_not_depend_on_other_rows_or_paths() {
        let a = NoiseField::sample(grid(8, 0.1), 7, 3).unwrap();
        let b = NoiseField::sample(grid(12, 0.1), 7, 3).unwrap();
        // Row k of path p is the same stream regardless of how many rows exist.
        for k in 0..8 {
            assert_eq!(a.row(k), &b.row(k)[..8]);
        }
        let other = NoiseField::sample(grid(8, 0.1), 7, 4).unwrap();
        assert_ne!(a.row(0), other.row(0));
    }

    #[test]
    fn cells_on_or_below_the_diagonal_are_empty() {
        let f = sample_noise(grid(9, 0.1), 1).unwrap();
        for k in 0..9 {
            for l in 0..9 {
                assert_eq!(f.increment(k, l) == 0.0, l <= k, "cell ({k}, {l})");
            }
        }
    }

    #[test]
    fn unit_cell_variance_is_one() {
        let g = grid(2, 1.0);
        let n = 40_000u64;
        let sum_sq: f64 = (0..n)
            .map(|p| {
                NoiseField::sample(g, 11, p)
                    .unwrap()
                    .increment(0, 1)
                    .powi(2)
            })
            .sum();
        let var = sum_sq / n as f64;
        // Var of the estimator is 2/N.
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn rectangle_integral_edge_cases() {
        let f = sample_noise(grid(8, 0.125), 3).unwrap();
        assert_eq!(
            f.rectangle_integral(&CellRect::new(2..2, 0..5)).unwrap(),
            0.0
        );
        assert_eq!(
            f.rectangle_integral(&CellRect::new(0..8, 0..8)).unwrap(),
            f.cumulative(8, 8)
        );
        assert!(matches!(
            f.rectangle_integral(&CellRect::new(0..9, 0..2)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn rectangle_integral_matches_direct_sum_and_splits_exactly() {
        let f = sample_noise(grid(16, 1.0 / 16.0), 5).unwrap();
        let direct = |r: &CellRect| {
            let mut s = 0.0;
            for k in r.axis1.clone() {
                for l in r.axis2.clone() {
                    s += f.increment(k, l);
                }
            }
            s
        };
        let whole = CellRect::new(3..13, 1..15);
        let left = CellRect::new(3..8, 1..15);
        let right = CellRect::new(8..13, 1..15);
        let top = CellRect::new(3..13, 9..15);
        let bottom = CellRect::new(3..13, 1..9);
        let w = f.rectangle_integral(&whole).unwrap();
        assert_eq!(w, direct(&whole));
        assert_eq!(
            w,
            f.rectangle_integral(&left).unwrap() + f.rectangle_integral(&right).unwrap()
        );
        assert_eq!(
            w,
            f.rectangle_integral(&top).unwrap() + f.rectangle_integral(&bottom).unwrap()
        );
    }

    #[test]
    fn strip_integral_cases() {
        let f = sample_noise(grid(10, 0.1), 9).unwrap();
        assert_eq!(f.strip_integral(4, 2..9, &[0.0; 7]).unwrap(), 0.0);
        let ones = f.strip_integral(4, 2..9, &[1.0; 7]).unwrap();
        let rect = f.rectangle_integral(&CellRect::new(4..5, 2..9)).unwrap();
        assert!((ones - rect).abs() <= 1e-15);

        let weights: Vec<f64> = (0..7).map(|m| (m as f64 * 0.7).sin() + 0.3).collect();
        let got = f.strip_integral(4, 2..9, &weights).unwrap();
        let mut want = 0.0;
        for (m, l) in (2..9).enumerate() {
            want += weights[m] * f.increment(4, l);
        }
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300));

        assert!(matches!(
            f.strip_integral(10, 0..2, &[1.0; 2]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            f.strip_integral(0, 5..11, &[1.0; 6]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            f.strip_integral(0, 0..2, &[1.0]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            f.strip_integral(0, 0..2, &[1.0, f64::NAN]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn lattice_isometry_for_overlapping_rectangles() {
        // A = 3×2 cells, B = 2×3 cells overlapping in 2×2 cells of area 0.01 each.
        let g = grid(6, 0.1);
        let a = CellRect::new(0..3, 3..5);
        let b = CellRect::new(1..3, 3..6);
        let n = 100_000u64;
        let (mut saa, mut sab) = (0.0, 0.0);
        let (mut saa2, mut sab2) = (0.0, 0.0);
        for p in 0..n {
            let f = NoiseField::sample(g, 2024, p).unwrap();
            let ia = f.rectangle_integral(&a).unwrap();
            let ib = f.rectangle_integral(&b).unwrap();
            saa += ia * ia;
            sab += ia * ib;
            saa2 += (ia * ia).powi(2);
            sab2 += (ia * ib).powi(2);
        }
        let nf = n as f64;
        let (maa, mab) = (saa / nf, sab / nf);
        let se_aa = ((saa2 / nf - maa * maa) / nf).sqrt();
        let se_ab = ((sab2 / nf - mab * mab) / nf).sqrt();
        assert!((maa - 0.06).abs() < 3.0 * se_aa, "Var = {maa} ± {se_aa}");
        assert!((mab - 0.04).abs() < 4.0 * se_ab, "Cov = {mab} ± {se_ab}");
    }

    #[test]
    fn steps_reports_nearest_valid_value() {
        assert_eq!(steps_of(0.375, 0.125).unwrap(), 3);
        let err = steps_of(0.3, 0.125).unwrap_err().to_string();
        assert!(err.contains("0.25"), "{err}");
    }

    #[test]
    fn nested_squares_match_lattice_law() {
        let h = 0.25;
        let sides = [4usize, 2, 1];
        let n = 60_000u64;
        let mut second = [[0.0f64; 3]; 3];
        for p in 0..n {
            let s = nested_square_integrals(h, &sides, 99, p).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    second[a][b] += s[a] * s[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let inner = sides[a.max(b)] as f64 * h;
                let cov = second[a][b] / n as f64;
                let expect = inner * inner;
                // Relative standard error of a Gaussian second moment is at most √(2/N).
                let tol =
                    4.0 * (2.0 / n as f64).sqrt() * (sides[a] as f64 * sides[b] as f64) * h * h;
                assert!((cov - expect).abs() < tol, "({a},{b}) {cov} vs {expect}");
            }
        }
        assert!(nested_square_integrals(h, &[2, 2], 1, 0).is_err());
        assert!(nested_square_integrals(h, &[2, 0], 1, 0).is_err());
    }
}
