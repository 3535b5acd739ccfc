//! Lattice solutions of the null-coordinate integral equation.
//!
//! Lattice point `(i, j)` sits at `(a + i·h, a + j·h)`; only the closed upper
//! triangle `i ≤ j` (nonnegative time) is stored. The solution at `(i, j)`
//! integrates the noise over the cells `(k, l)` with `i ≤ k < l < j`, i.e. the
//! cells lying entirely inside `{x₁ ≤ y₁ ≤ y₂ ≤ x₂}`. Cells cut by the
//! diagonal are dropped.
//!
//! The integrand of cell `(k, l)` is `F(v(k, l))`. That corner depends only on
//! cells `(k', l')` with `l' < l`, so the sum is an adapted (Itô/Walsh type)
//! lattice integral, and the scheme satisfies the cell identity
//!
//! ```text
//!     v(i+1, j+1) − v(i+1, j) − v(i, j+1) + v(i, j) = −½ F(v(i, j)) W(i, j)
//! ```
//!
//! up to rounding (exactly when `F` is constant and the data vanish).

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_stencil, to_null, InitialData, Nonlinearity, NullPoint, Sign, SpaceTimePoint, Stencil,
};
use crate::noise::{GridSpec, NoiseField, NoiseTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InitialData,
    Linear,
    Marching,
    Picard,
    Tabulated,
}

/// Values on the lattice triangle `0 ≤ i ≤ j ≤ n`.
#[derive(Debug, Clone)]
pub struct SolutionField {
    grid: GridSpec,
    values: Vec<f64>,
    provenance: Provenance,
    noise: Option<NoiseTag>,
}

#[inline]
fn row_offset(n: usize, i: usize) -> usize {
    // Σ_{r<i} (n + 1 − r)
    i * (n + 1) - i * i.saturating_sub(1) / 2
}

fn triangle_len(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

impl SolutionField {
    fn zeros(grid: GridSpec, provenance: Provenance, noise: Option<NoiseTag>) -> Self {
        Self {
            grid,
            values: vec![0.0; triangle_len(grid.n)],
            provenance,
            noise,
        }
    }

    /// Tabulates an arbitrary function of the lattice indices.
    pub fn from_fn(grid: GridSpec, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(grid, Provenance::Tabulated, None);
        for i in 0..=grid.n {
            for j in i..=grid.n {
                field.set(i, j, f(i, j));
            }
        }
        field
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn noise_tag(&self) -> Option<NoiseTag> {
        self.noise
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        row_offset(self.grid.n, i) + (j - i)
    }

    /// `None` outside `0 ≤ i ≤ j ≤ n`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i <= j && j <= self.grid.n {
            Some(self.values[self.index(i, j)])
        } else {
            None
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j && j <= self.grid.n);
        self.values[self.index(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = self.index(i, j);
        self.values[idx] = value;
    }

    /// Row `i`: values at `(i, i..=n)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let start = row_offset(self.grid.n, i);
        &self.values[start..start + self.grid.n + 1 - i]
    }

    pub fn value_at_null(&self, q: NullPoint) -> Result<f64> {
        let i = self.grid.index1(q.x1)?;
        let j = self.grid.index2(q.x2)?;
        self.get(i, j).ok_or_else(|| {
            Error::Range(format!(
                "point ({}, {}) has negative time; fields cover x₂ ≥ x₁ only",
                q.x1, q.x2
            ))
        })
    }

    pub fn value_at_spacetime(&self, p: SpaceTimePoint) -> Result<f64> {
        self.value_at_null(to_null(p))
    }

    /// Iterates `(i, j, value)` row by row.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.grid.n;
        (0..=n).flat_map(move |i| (i..=n).map(move |j| (i, j, self.at(i, j))))
    }

    pub fn max_abs_difference(&self, other: &SolutionField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Consistency("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }
}

fn require_diagonal(grid: &GridSpec) -> Result<()> {
    if grid.is_diagonal() {
        Ok(())
    } else {
        Err(Error::Consistency(format!(
            "solution fields need the lattice diagonal on x₁ = x₂; grid origin is {:?}",
            grid.origin
        )))
    }
}

/// `½u₀(√2x₁) − ½U₁(√2x₁)` and `½u₀(√2x₂) + ½U₁(√2x₂)` per lattice index.
fn v0_halves(grid: &GridSpec, data: &InitialData) -> (Vec<f64>, Vec<f64>) {
    let left = (0..=grid.n).map(|i| data.v0_left(grid.x1(i))).collect();
    let right = (0..=grid.n).map(|j| data.v0_right(grid.x2(j))).collect();
    (left, right)
}

/// The free wave `V₀` on the lattice triangle.
pub fn tabulate_v0(grid: &GridSpec, data: &InitialData) -> Result<SolutionField> {
    require_diagonal(grid)?;
    data.u0.validate()?;
    data.u1.validate()?;
    let (left, right) = v0_halves(grid, data);
    let mut field = SolutionField::zeros(*grid, Provenance::InitialData, None);
    for i in 0..=grid.n {
        for j in i..=grid.n {
            field.set(i, j, left[i] + right[j]);
        }
    }
    Ok(field)
}

/// The linear solution `Z̃` (`F ≡ 1`, zero data) by the strip recursion
/// `Z̃(i, j) = Z̃(i+1, j) + ½ S(i, j)`, `S(i, j) = Σ_{i<l<j} W(i, l)`.
pub fn solve_linear(noise: &NoiseField) -> Result<SolutionField> {
    let grid = *noise.grid();
    require_diagonal(&grid)?;
    let n = grid.n;
    let mut z = SolutionField::zeros(grid, Provenance::Linear, Some(noise.tag()));
    for i in (0..n).rev() {
        let w = noise.row(i);
        let mut s = 0.0;
        for j in i + 1..=n {
            if j >= i + 2 {
                s += w[j - 1];
            }
            let below = z.at(i + 1, j);
            z.set(i, j, below + 0.5 * s);
        }
    }
    Ok(z)
}

/// Nonlinear solution by light-cone marching.
///
/// Rows are processed from `i = n` down to `0`; each value needs the row
/// above (`i + 1`) and earlier entries of its own row, so every lattice point
/// is computed once: `O(n²)` time and memory. The stochastic part
/// `I = v − V₀` is marched separately so that `F ≡ 0` reproduces `V₀` and
/// `F ≡ 1` with zero data reproduces [`solve_linear`] bit for bit.
pub fn solve_marching(
    noise: &NoiseField,
    data: &InitialData,
    f: &Nonlinearity,
) -> Result<SolutionField> {
    let grid = *noise.grid();
    require_diagonal(&grid)?;
    data.u0.validate()?;
    data.u1.validate()?;
    f.validate()?;
    let n = grid.n;
    let (left, right) = v0_halves(&grid, data);
    let mut v = SolutionField::zeros(grid, Provenance::Marching, Some(noise.tag()));
    // integral[j] holds I(i+1, j) on entry to row i and I(i, j) on exit.
    let mut integral = vec![0.0; n + 1];
    v.set(n, n, left[n] + right[n]);
    // Rows are marched in blocks, column by column with the higher row first.
    // Each row's recursion is sequential, so interleaving MARCH_BLOCK rows lets
    // their evaluations of F overlap; every value is still computed by the
    // same operations in the same order as a row-at-a-time sweep.
    let mut hi = n;
    while hi > 0 {
        let lo = hi.saturating_sub(MARCH_BLOCK);
        let rows = hi - lo;
        let mut s = [0.0; MARCH_BLOCK];
        let mut prev = [0.0; MARCH_BLOCK];
        for r in lo..hi {
            let d = left[r] + right[r];
            v.set(r, r, d);
            prev[r - lo] = d;
            integral[r] = 0.0;
        }
        for j in lo + 1..=n {
            for b in (0..rows).rev() {
                let r = lo + b;
                if j <= r {
                    continue;
                }
                if j >= r + 2 {
                    s[b] += f.eval(prev[b]) * noise.increment(r, j - 1);
                }
                let value = integral[j] + 0.5 * s[b];
                integral[j] = value;
                let x = left[r] + right[j] + value;
                v.set(r, j, x);
                prev[b] = x;
            }
        }
        hi = lo;
    }
    Ok(v)
}

const MARCH_BLOCK: usize = 4;

/// `V₀ + ½ Σ_{T(i,j)} g(k, l) W(k, l)` for a given integrand field `g`.
fn integrate_against(
    noise: &NoiseField,
    base: &[f64],
    integrand: &SolutionField,
    out: &mut SolutionField,
) {
    let n = noise.grid().n;
    let mut integral = vec![0.0; n + 1];
    for i in (0..=n).rev() {
        let w = if i < n { noise.row(i) } else { &[][..] };
        out.set(i, i, base[row_offset(n, i)]);
        integral[i] = 0.0;
        let mut s = 0.0;
        for j in i + 1..=n {
            if j >= i + 2 {
                let l = j - 1;
                s += integrand.at(i, l) * w[l];
            }
            let value = integral[j] + 0.5 * s;
            integral[j] = value;
            out.set(i, j, base[row_offset(n, i) + j - i] + value);
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardRun {
    pub field: SolutionField,
    /// `sup |u⁽ᵐ⁾ − u⁽ᵐ⁻¹⁾|` for `m = 1..=iterations`.
    pub increments: Vec<f64>,
}

/// Fixed-point iteration `u⁽ᵐ⁾ = V₀ + ½ Σ F(u⁽ᵐ⁻¹⁾(corner)) W` from `u⁽⁰⁾ = V₀`.
pub fn solve_picard(
    noise: &NoiseField,
    data: &InitialData,
    f: &Nonlinearity,
    iterations: usize,
) -> Result<PicardRun> {
    if iterations == 0 {
        return Err(Error::Config(
            "Picard iteration needs at least one step".into(),
        ));
    }
    f.validate()?;
    let grid = *noise.grid();
    let v0 = tabulate_v0(&grid, data)?;
    let mut current = v0.clone();
    current.provenance = Provenance::Picard;
    current.noise = Some(noise.tag());
    let mut next = current.clone();
    let mut integrand = SolutionField::zeros(grid, Provenance::Tabulated, None);
    let mut increments = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for (g, u) in integrand.values.iter_mut().zip(&current.values) {
            *g = f.eval(*u);
        }
        integrate_against(noise, &v0.values, &integrand, &mut next);
        increments.push(next.max_abs_difference(&current)?);
        std::mem::swap(&mut current, &mut next);
    }
    Ok(PicardRun {
        field: current,
        increments,
    })
}

/// One linearization remainder `δδv − F(v(x))·δδZ̃` and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderSample {
    pub base: (usize, usize),
    pub steps: usize,
    pub sign: Sign,
    pub value: f64,
    /// `F(v(x)) · δδZ̃(x)`
    pub linear_term: f64,
    /// `δδv(x)`
    pub dd_v: f64,
}

fn same_noise(v: &SolutionField, z: &SolutionField) -> Result<()> {
    match (v.noise_tag(), z.noise_tag()) {
        (Some(a), Some(b)) if a == b => Ok(()),
        _ => Err(Error::Consistency(
            "remainder needs both fields computed from the same noise realization".into(),
        )),
    }
}

/// `D v(x) − F(v(x))·D Z̃(x)` for an arbitrary difference stencil `D`.
/// Returns `(remainder, F(v(x))·D Z̃, D v)`.
pub fn stencil_remainder(
    v: &SolutionField,
    z: &SolutionField,
    f: &Nonlinearity,
    base: (usize, usize),
    stencil: &Stencil,
) -> Result<(f64, f64, f64)> {
    same_noise(v, z)?;
    let dv = apply_stencil(v, stencil, base)?;
    let dz = apply_stencil(z, stencil, base)?;
    let vx = v.get(base.0, base.1).ok_or_else(|| {
        Error::Range(format!(
            "base point {base:?} is outside the computed region"
        ))
    })?;
    let linear = f.eval(vx) * dz;
    Ok((dv - linear, linear, dv))
}

/// `R̃^±_ε(x) = δ^{(1)}_{±ε}δ^{(2)}_ε v(x) − F(v(x)) δ^{(1)}_{±ε}δ^{(2)}_ε Z̃(x)`
/// with `ε = steps·h`.
pub fn remainder(
    v: &SolutionField,
    z: &SolutionField,
    f: &Nonlinearity,
    base: (usize, usize),
    steps: usize,
    sign: Sign,
) -> Result<RemainderSample> {
    let (value, linear_term, dd_v) =
        stencil_remainder(v, z, f, base, &Stencil::mixed(sign, steps))?;
    Ok(RemainderSample {
        base,
        steps,
        sign,
        value,
        linear_term,
        dd_v,
    })
}

/// Lattice coordinates `(x₁, x₂, t, x)` of point `(i, j)`.
pub fn lattice_coordinates(grid: &GridSpec, i: usize, j: usize) -> (f64, f64, f64, f64) {
    let (x1, x2) = (grid.x1(i), grid.x2(j));
    (x1, x2, (x2 - x1) / SQRT_2, (x1 + x2) / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;
    use crate::noise::{sample_noise, CellRect};

    fn grid(n: usize) -> GridSpec {
        GridSpec::diagonal(0.0, n, 1.0 / n as f64).unwrap()
    }

    /// Direct triangle sum ½ Σ_{i ≤ k < l < j} g(k, l) W(k, l).
    fn triangle_sum(
        noise: &NoiseField,
        i: usize,
        j: usize,
        g: impl Fn(usize, usize) -> f64,
    ) -> f64 {
        let mut s = 0.0;
        for k in i..j {
            for l in k + 1..j {
                s += g(k, l) * noise.increment(k, l);
            }
        }
        0.5 * s
    }

    #[test]
    fn triangular_indexing_round_trips() {
        let f = SolutionField::from_fn(grid(7), |i, j| (i * 100 + j) as f64);
        for i in 0..=7 {
            assert_eq!(f.row(i).len(), 8 - i);
            for j in i..=7 {
                assert_eq!(f.get(i, j), Some((i * 100 + j) as f64));
            }
        }
        assert_eq!(f.get(3, 2), None);
        assert_eq!(f.get(0, 8), None);
        assert_eq!(f.iter().count(), triangle_len(7));
    }

    #[test]
    fn linear_field_vanishes_on_diagonal_and_matches_brute_force() {
        let noise = sample_noise(grid(8), 31).unwrap();
        let z = solve_linear(&noise).unwrap();
        for i in 0..=8 {
            assert_eq!(z.get(i, i), Some(0.0));
            for j in i..=8 {
                let direct = triangle_sum(&noise, i, j, |_, _| 1.0);
                assert!((z.get(i, j).unwrap() - direct).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn off_diagonal_grid_is_rejected() {
        let g = GridSpec::new((0.0, 0.5), 8, 0.125).unwrap();
        let noise = sample_noise(g, 1).unwrap();
        assert!(matches!(solve_linear(&noise), Err(Error::Consistency(_))));
    }

    #[test]
    fn zero_nonlinearity_reproduces_v0() {
        let g = GridSpec::diagonal(-0.3, 20, 0.05).unwrap();
        let noise = sample_noise(g, 2).unwrap();
        let data = InitialData::new(
            Profile::Sine {
                amplitude: 0.7,
                frequency: 2.0,
            },
            Profile::TanhRamp {
                height: 0.4,
                width: 0.5,
            },
        );
        let v = solve_marching(&noise, &data, &Nonlinearity::Affine { a: 0.0, b: 0.0 }).unwrap();
        let v0 = tabulate_v0(&g, &data).unwrap();
        assert_eq!(v.max_abs_difference(&v0).unwrap(), 0.0);
        for i in 0..=20 {
            assert_eq!(v.get(i, i).unwrap(), data.u0.value(SQRT_2 * g.x1(i)));
        }
    }

    #[test]
    fn unit_nonlinearity_with_zero_data_is_the_linear_field() {
        let noise = sample_noise(grid(64), 8).unwrap();
        let v = solve_marching(&noise, &InitialData::ZERO, &Nonlinearity::One).unwrap();
        let z = solve_linear(&noise).unwrap();
        assert_eq!(v.max_abs_difference(&z).unwrap(), 0.0);
    }

    #[test]
    fn marching_matches_direct_triangle_sums() {
        let data = InitialData::new(
            Profile::Constant { value: 0.3 },
            Profile::Sine {
                amplitude: 0.5,
                frequency: 1.0,
            },
        );
        for f in [
            Nonlinearity::Tanh,
            Nonlinearity::Sin,
            Nonlinearity::Affine { a: 1.5, b: -0.2 },
        ] {
            let noise =
                sample_noise(GridSpec::diagonal(-0.5, 16, 1.0 / 16.0).unwrap(), 77).unwrap();
            let v = solve_marching(&noise, &data, &f).unwrap();
            let g = *noise.grid();
            for i in 0..=16 {
                for j in i..=16 {
                    let direct = data.eval_v0(NullPoint::new(g.x1(i), g.x2(j)))
                        + triangle_sum(&noise, i, j, |k, l| f.eval(v.get(k, l).unwrap()));
                    assert!(
                        (v.get(i, j).unwrap() - direct).abs() <= 1e-12,
                        "{f} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn cell_identity_holds_everywhere() {
        let noise = sample_noise(GridSpec::diagonal(0.0, 48, 1.0 / 48.0).unwrap(), 4).unwrap();
        let data = InitialData::new(Profile::Constant { value: 0.5 }, Profile::Zero);
        let f = Nonlinearity::Tanh;
        let v = solve_marching(&noise, &data, &f).unwrap();
        for i in 0..48 {
            for j in i + 1..48 {
                let dd = apply_stencil(&v, &Stencil::mixed(Sign::Plus, 1), (i, j)).unwrap();
                let rhs = -0.5 * f.eval(v.get(i, j).unwrap()) * noise.increment(i, j);
                assert!((dd - rhs).abs() <= 1e-14, "({i},{j}) {dd} vs {rhs}");
            }
        }
    }

    #[test]
    fn picard_with_constant_nonlinearity_converges_in_one_step() {
        let noise = sample_noise(grid(32), 6).unwrap();
        let data = InitialData::new(Profile::Constant { value: 0.25 }, Profile::Zero);
        let run = solve_picard(&noise, &data, &Nonlinearity::One, 4).unwrap();
        assert!(run.increments[0] > 0.0);
        assert!(run.increments[1..].iter().all(|&d| d == 0.0));
        let z = solve_linear(&noise).unwrap();
        for (i, j, value) in run.field.iter() {
            assert_eq!(value, 0.25 + z.get(i, j).unwrap());
        }
        assert!(solve_picard(&noise, &data, &Nonlinearity::One, 0).is_err());
    }

    #[test]
    fn picard_converges_to_marching_solution() {
        let noise = sample_noise(grid(64), 12).unwrap();
        let data = InitialData::new(Profile::Constant { value: 0.5 }, Profile::Zero);
        let f = Nonlinearity::Tanh;
        let run = solve_picard(&noise, &data, &f, 30).unwrap();
        let v = solve_marching(&noise, &data, &f).unwrap();
        assert!(run.field.max_abs_difference(&v).unwrap() <= 1e-8);
        let d = &run.increments;
        let rho = (1..d.len())
            .filter(|&m| d[m] > 0.0)
            .map(|m| (d[m] / d[0]).powf(1.0 / m as f64))
            .fold(0.0, f64::max);
        assert!(rho < 1.0, "increments {d:?}");
    }

    #[test]
    fn remainder_identities() {
        let g = GridSpec::diagonal(-0.25, 80, 1.0 / 64.0).unwrap();
        let noise = sample_noise(g, 10).unwrap();
        let z = solve_linear(&noise).unwrap();
        let data = InitialData::new(Profile::Constant { value: 0.5 }, Profile::Zero);
        let base = (16usize, 56usize);

        // F ≡ 1 with separable data: exact linearization.
        let v1 = solve_marching(&noise, &data, &Nonlinearity::One).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let r = remainder(&v1, &z, &Nonlinearity::One, base, 8, sign).unwrap();
            assert!(r.value.abs() <= 1e-15);
        }

        let f = Nonlinearity::Tanh;
        let v = solve_marching(&noise, &data, &f).unwrap();
        // ε = h: both sides are −½F(v(x))W(cell).
        let single = remainder(&v, &z, &f, base, 1, Sign::Plus).unwrap();
        assert!(single.value.abs() <= 1e-15);

        // ε = 16h: telescoped cell sum.
        let fx = f.eval(v.get(base.0, base.1).unwrap());
        let r = 16;
        let plus = remainder(&v, &z, &f, base, r, Sign::Plus).unwrap();
        let mut want = 0.0;
        for k in base.0..base.0 + r {
            for l in base.1..base.1 + r {
                want += (f.eval(v.get(k, l).unwrap()) - fx) * noise.increment(k, l);
            }
        }
        assert!((plus.value + 0.5 * want).abs() <= 1e-12);
        assert!((plus.value - (plus.dd_v - plus.linear_term)).abs() <= 1e-12);

        let minus = remainder(&v, &z, &f, base, r, Sign::Minus).unwrap();
        let mut want = 0.0;
        for k in base.0 - r..base.0 {
            for l in base.1..base.1 + r {
                want += (f.eval(v.get(k, l).unwrap()) - fx) * noise.increment(k, l);
            }
        }
        assert!((minus.value - 0.5 * want).abs() <= 1e-12);

        let linear_rect = noise
            .rectangle_integral(&CellRect::new(base.0..base.0 + r, base.1..base.1 + r))
            .unwrap();
        assert_eq!(plus.linear_term, fx * (-0.5 * linear_rect));
    }

    #[test]
    fn remainder_rejects_mismatched_noise() {
        let g = grid(16);
        let z = solve_linear(&sample_noise(g, 1).unwrap()).unwrap();
        let v = solve_marching(
            &sample_noise(g, 2).unwrap(),
            &InitialData::ZERO,
            &Nonlinearity::Tanh,
        )
        .unwrap();
        assert!(matches!(
            remainder(&v, &z, &Nonlinearity::Tanh, (2, 8), 2, Sign::Plus),
            Err(Error::Consistency(_))
        ));
        let v0 = tabulate_v0(&g, &InitialData::ZERO).unwrap();
        assert!(matches!(
            remainder(&v0, &z, &Nonlinearity::Tanh, (2, 8), 2, Sign::Plus),
            Err(Error::Consistency(_))
        ));
    }
}
