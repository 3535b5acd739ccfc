//! Coordinate changes, initial data, nonlinearities and difference stencils.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::steps_of;
use crate::solver::SolutionField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullPoint {
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub t: f64,
    pub x: f64,
}

impl NullPoint {
    pub fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }
}

impl SpaceTimePoint {
    pub fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }
}

/// `x₁ = (x − t)/√2`, `x₂ = (x + t)/√2`.
pub fn to_null(p: SpaceTimePoint) -> NullPoint {
    NullPoint {
        x1: (p.x - p.t) * FRAC_1_SQRT_2,
        x2: (p.x + p.t) * FRAC_1_SQRT_2,
    }
}

/// `t = (x₂ − x₁)/√2`, `x = (x₁ + x₂)/√2`.
pub fn from_null(q: NullPoint) -> SpaceTimePoint {
    SpaceTimePoint {
        t: (q.x2 - q.x1) * FRAC_1_SQRT_2,
        x: (q.x1 + q.x2) * FRAC_1_SQRT_2,
    }
}

/// Closed-form profiles for the initial data. Each is bounded with a bounded
/// derivative and has an explicit antiderivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · sin(frequency · y)`
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    /// `height · tanh(y / width)`
    TanhRamp {
        height: f64,
        width: f64,
    },
}

impl Profile {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Sine {
                amplitude,
                frequency,
            } => amplitude * (frequency * y).sin(),
            Profile::TanhRamp { height, width } => height * (y / width).tanh(),
        }
    }

    /// An antiderivative, so that `∫_a^b value = antiderivative(b) − antiderivative(a)`.
    pub fn antiderivative(&self, y: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value * y,
            Profile::Sine {
                amplitude,
                frequency,
            } => {
                if frequency == 0.0 {
                    0.0
                } else {
                    -amplitude * (frequency * y).cos() / frequency
                }
            }
            Profile::TanhRamp { height, width } => height * width * ln_cosh(y / width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Zero => true,
            Profile::Constant { value } => value.is_finite(),
            Profile::Sine {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
            Profile::TanhRamp { height, width } => {
                height.is_finite() && width.is_finite() && width > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid profile parameters: {self}")))
        }
    }
}

fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Constant { value } => write!(f, "constant({value})"),
            Profile::Sine {
                amplitude,
                frequency,
            } => write!(f, "sine({amplitude}, {frequency})"),
            Profile::TanhRamp { height, width } => write!(f, "tanh_ramp({height}, {width})"),
        }
    }
}

/// Initial position `u₀` and velocity `u₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: Profile,
    pub u1: Profile,
}

impl InitialData {
    pub const ZERO: InitialData = InitialData {
        u0: Profile::Zero,
        u1: Profile::Zero,
    };

    pub fn new(u0: Profile, u1: Profile) -> Self {
        Self { u0, u1 }
    }

    // V₀(x₁, x₂) = ½u₀(√2x₁) + ½u₀(√2x₂) + ½[U₁(√2x₂) − U₁(√2x₁)] splits as
    // left(x₁) + right(x₂). The solvers tabulate the same two halves, so
    // eval_v0 and the tabulated field agree bit for bit.
    pub fn v0_left(&self, x1: f64) -> f64 {
        let y = SQRT_2 * x1;
        0.5 * self.u0.value(y) - 0.5 * self.u1.antiderivative(y)
    }

    pub fn v0_right(&self, x2: f64) -> f64 {
        let y = SQRT_2 * x2;
        0.5 * self.u0.value(y) + 0.5 * self.u1.antiderivative(y)
    }

    /// The free wave `V₀` (d'Alembert) in null coordinates.
    pub fn eval_v0(&self, q: NullPoint) -> f64 {
        self.v0_left(q.x1) + self.v0_right(q.x2)
    }

    pub fn is_separable_constant(&self) -> bool {
        matches!(self.u0, Profile::Zero | Profile::Constant { .. })
            && matches!(self.u1, Profile::Zero)
    }
}

/// Lipschitz nonlinearity `F` multiplying the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `F ≡ 1`, the additive (linear) equation.
    One,
    Identity,
    Sin,
    Tanh,
    /// `a·s + b`
    Affine {
        a: f64,
        b: f64,
    },
}

impl Nonlinearity {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Nonlinearity::One => 1.0,
            Nonlinearity::Identity => s,
            Nonlinearity::Sin => s.sin(),
            Nonlinearity::Tanh => s.tanh(),
            Nonlinearity::Affine { a, b } => a * s + b,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::One => 0.0,
            Nonlinearity::Identity | Nonlinearity::Sin | Nonlinearity::Tanh => 1.0,
            Nonlinearity::Affine { a, .. } => a.abs(),
        }
    }

    /// Constant `F` linearizes exactly: every remainder vanishes.
    pub fn is_constant(&self) -> bool {
        self.lipschitz() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::Affine { a, b } if !(a.is_finite() && b.is_finite()) => {
                Err(Error::Config(format!(
                    "affine nonlinearity needs finite coefficients, got ({a}, {b})"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::One => write!(f, "one"),
            Nonlinearity::Identity => write!(f, "identity"),
            Nonlinearity::Sin => write!(f, "sin"),
            Nonlinearity::Tanh => write!(f, "tanh"),
            Nonlinearity::Affine { a, b } => write!(f, "affine({a}, {b})"),
        }
    }
}

/// Direction of the first-axis step in a mixed difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> isize {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// The two mixed second differences of the original `(t, x)` frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OriginalDifference {
    /// `f(t, x+2ε) − f(t−ε, x+ε) − f(t+ε, x+ε) + f(t, x)`
    Delta1,
    /// `f(t+2ε, x) − f(t+ε, x−ε) − f(t+ε, x+ε) + f(t, x)`
    Delta2,
}

impl OriginalDifference {
    pub fn label(self) -> &'static str {
        match self {
            OriginalDifference::Delta1 => "D1",
            OriginalDifference::Delta2 => "D2",
        }
    }

    /// The null-plane sign this difference becomes after the coordinate change.
    pub fn null_sign(self) -> Sign {
        match self {
            OriginalDifference::Delta1 => Sign::Plus,
            OriginalDifference::Delta2 => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilPoint {
    /// Lattice offset `(di, dj)` along `(x₁, x₂)`.
    pub offset: (isize, isize),
    pub coef: f64,
}

/// Signed finite-difference pattern in grid units.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    points: Vec<StencilPoint>,
}

impl Stencil {
    pub fn from_points(points: Vec<StencilPoint>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[StencilPoint] {
        &self.points
    }

    /// `δ^{(1)}_{±r}δ^{(2)}_{r}`: `f(i±r, j+r) − f(i±r, j) − f(i, j+r) + f(i, j)`.
    pub fn mixed(sign: Sign, steps: usize) -> Self {
        let a = sign.factor() * steps as isize;
        let b = steps as isize;
        Self::from_points(vec![
            StencilPoint {
                offset: (a, b),
                coef: 1.0,
            },
            StencilPoint {
                offset: (a, 0),
                coef: -1.0,
            },
            StencilPoint {
                offset: (0, b),
                coef: -1.0,
            },
            StencilPoint {
                offset: (0, 0),
                coef: 1.0,
            },
        ])
    }

    /// `δ^{(1)}_r f = f(i+r, j) − f(i, j)`.
    pub fn first_axis(steps: usize) -> Self {
        Self::from_points(vec![
            StencilPoint {
                offset: (steps as isize, 0),
                coef: 1.0,
            },
            StencilPoint {
                offset: (0, 0),
                coef: -1.0,
            },
        ])
    }

    /// `δ^{(2)}_r f = f(i, j+r) − f(i, j)`.
    pub fn second_axis(steps: usize) -> Self {
        Self::from_points(vec![
            StencilPoint {
                offset: (0, steps as isize),
                coef: 1.0,
            },
            StencilPoint {
                offset: (0, 0),
                coef: -1.0,
            },
        ])
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.points.iter().map(|p| p.coef).sum()
    }

    /// `(min di, max di, min dj, max dj)` over the stencil.
    pub fn extent(&self) -> (isize, isize, isize, isize) {
        self.points.iter().fold((0, 0, 0, 0), |(a, b, c, d), p| {
            (
                a.min(p.offset.0),
                b.max(p.offset.0),
                c.min(p.offset.1),
                d.max(p.offset.1),
            )
        })
    }
}

/// `Σ coef · field(base + offset)`, in stencil order.
pub fn apply_stencil(
    field: &SolutionField,
    stencil: &Stencil,
    base: (usize, usize),
) -> Result<f64> {
    let mut acc = 0.0;
    for p in stencil.points() {
        let i = base.0 as isize + p.offset.0;
        let j = base.1 as isize + p.offset.1;
        let value = if i >= 0 && j >= 0 {
            field.get(i as usize, j as usize)
        } else {
            None
        };
        let value = value.ok_or_else(|| {
            Error::Range(format!(
                "stencil point ({i}, {j}) from base {base:?} is outside the computed region \
                 (0 ≤ i ≤ j ≤ {})",
                field.grid().n
            ))
        })?;
        acc += p.coef * value;
    }
    Ok(acc)
}

/// Null-plane stencil equivalent to `Δ^{(1)}_ε` or `Δ^{(2)}_ε`: with
/// `ε' = √2 ε` they become `δ^{(1)}_{ε'}δ^{(2)}_{ε'}` and `δ^{(1)}_{−ε'}δ^{(2)}_{ε'}`.
pub fn map_original_stencil(kind: OriginalDifference, eps: f64, h: f64) -> Result<Stencil> {
    let steps = steps_of(SQRT_2 * eps, h).map_err(|_| {
        let k = (SQRT_2 * eps / h).round().max(0.0);
        Error::Config(format!(
            "√2·ε = {} is not a multiple of h = {h}; nearest valid ε is {}",
            SQRT_2 * eps,
            k * h / SQRT_2
        ))
    })?;
    Ok(Stencil::mixed(kind.null_sign(), steps))
}

/// Evaluates `Δ^{(j)}_ε f(t, x)` by reading the field through `from_null`
/// at the four space-time points of the definition.
pub fn original_difference(
    field: &SolutionField,
    kind: OriginalDifference,
    p: SpaceTimePoint,
    eps: f64,
) -> Result<f64> {
    let at = |t: f64, x: f64| field.value_at_spacetime(SpaceTimePoint::new(t, x));
    let (t, x) = (p.t, p.x);
    Ok(match kind {
        OriginalDifference::Delta1 => {
            at(t, x + 2.0 * eps)? - at(t - eps, x + eps)? - at(t + eps, x + eps)? + at(t, x)?
        }
        OriginalDifference::Delta2 => {
            at(t + 2.0 * eps, x)? - at(t + eps, x - eps)? - at(t + eps, x + eps)? + at(t, x)?
        }
    })
}
