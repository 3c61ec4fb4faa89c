//! Exact representation of the Liénard system's defining functions.
//!
//! A system is `x' = y - F(x)`, `y' = -g(x)` with `g(x) = g0(x) + c*sgn(x)`.
//! `F` and `g0` are sums of odd terms with closed-form derivatives and
//! antiderivatives, which keeps every downstream evaluation exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of geometric bracketing points used when hunting zeros of F and F'.
pub const BRACKET_GRID: usize = 4096;
/// Relative tolerance for root refinement.
pub const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("F' is unbounded at x = {x} (term with exponent < 1)")]
    NonDifferentiable { x: f64 },
    #[error("F does not have exactly two positive simple zeros in (0, d): found {zeros_found}")]
    ShapeMismatch { zeros_found: usize },
    #[error("no zero of F' found inside (beta1, beta2)")]
    NoAlphaZero,
    #[error("invalid system spec: {reason}")]
    InvalidSpec { reason: String },
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One odd building block of F or g0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OddTerm {
    /// `k * sgn(x) * |x|^p`
    PowerOdd { coef: f64, exponent: f64 },
    /// `k * sgn(x) * min(|x|^p, s)`
    SaturatedPowerOdd {
        coef: f64,
        exponent: f64,
        saturation: f64,
    },
    /// `k * sgn(x)`, value 0 at x = 0
    SignStep { coef: f64 },
}

impl OddTerm {
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            OddTerm::PowerOdd { coef, exponent } => coef * sgn(x) * ax.powf(exponent),
            OddTerm::SaturatedPowerOdd {
                coef,
                exponent,
                saturation,
            } => coef * sgn(x) * ax.powf(exponent).min(saturation),
            OddTerm::SignStep { coef } => coef * sgn(x),
        }
    }

    /// Closed-form derivative where it exists; `None` at the saturation
    /// corner (caller decides which one-sided value to take) and at x = 0
    /// for exponents below 1.
    fn derivative(&self, x: f64) -> DerivPoint {
        let ax = x.abs();
        match *self {
            OddTerm::PowerOdd { coef, exponent } => {
                if ax == 0.0 {
                    if exponent > 1.0 {
                        DerivPoint::Value(0.0)
                    } else if exponent == 1.0 {
                        DerivPoint::Value(coef)
                    } else {
                        DerivPoint::Unbounded
                    }
                } else {
                    DerivPoint::Value(coef * exponent * ax.powf(exponent - 1.0))
                }
            }
            OddTerm::SaturatedPowerOdd {
                coef,
                exponent,
                saturation,
            } => {
                if ax == 0.0 {
                    return if exponent > 1.0 {
                        DerivPoint::Value(0.0)
                    } else if exponent == 1.0 {
                        DerivPoint::Value(coef)
                    } else {
                        DerivPoint::Unbounded
                    };
                }
                let corner = saturation.powf(1.0 / exponent);
                if ax < corner {
                    DerivPoint::Value(coef * exponent * ax.powf(exponent - 1.0))
                } else if ax > corner {
                    DerivPoint::Value(0.0)
                } else {
                    // one-sided from the side of larger |x|: the flat side
                    DerivPoint::Corner(0.0)
                }
            }
            OddTerm::SignStep { .. } => {
                if ax == 0.0 {
                    DerivPoint::Unbounded
                } else {
                    DerivPoint::Value(0.0)
                }
            }
        }
    }

    /// Exact antiderivative vanishing at 0 (an even function of x).
    fn antiderivative(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            OddTerm::PowerOdd { coef, exponent } => {
                coef * ax.powf(exponent + 1.0) / (exponent + 1.0)
            }
            OddTerm::SaturatedPowerOdd {
                coef,
                exponent,
                saturation,
            } => {
                let corner = saturation.powf(1.0 / exponent);
                if ax <= corner {
                    coef * ax.powf(exponent + 1.0) / (exponent + 1.0)
                } else {
                    coef * (corner.powf(exponent + 1.0) / (exponent + 1.0)
                        + saturation * (ax - corner))
                }
            }
            OddTerm::SignStep { coef } => coef * ax,
        }
    }

    /// Positive abscissa where this term has a derivative jump, if any.
    fn corner(&self) -> Option<f64> {
        match *self {
            OddTerm::SaturatedPowerOdd {
                exponent,
                saturation,
                ..
            } => Some(saturation.powf(1.0 / exponent)),
            _ => None,
        }
    }

    fn min_exponent(&self) -> f64 {
        match *self {
            OddTerm::PowerOdd { exponent, .. } | OddTerm::SaturatedPowerOdd { exponent, .. } => {
                exponent
            }
            OddTerm::SignStep { .. } => 0.0,
        }
    }

    fn is_sign_step(&self) -> bool {
        matches!(self, OddTerm::SignStep { .. })
    }
}

enum DerivPoint {
    Value(f64),
    Corner(f64),
    Unbounded,
}

/// Derivative value together with a flag marking one-sided evaluation at a
/// corner of F.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeValue {
    pub value: f64,
    pub one_sided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointMethod {
    ClosedForm,
    Numeric,
}

/// The landmark abscissae of F: zeros beta1 < beta2 and the minimum
/// location alpha1 between them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacteristicPoints {
    pub beta1: f64,
    pub alpha1: f64,
    pub beta2: f64,
    pub fprime_zeros: Vec<f64>,
    pub method: PointMethod,
}

/// Immutable description of one Liénard system. Construction validates the
/// structural hypotheses (odd terms, positive restoring force, c >= 0), so
/// a value of this type is always evaluable.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    name: String,
    f_terms: Vec<OddTerm>,
    g0_terms: Vec<OddTerm>,
    c: f64,
    domain_d: f64,
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        f_terms: Vec<OddTerm>,
        g0_terms: Vec<OddTerm>,
        c: f64,
        domain_d: f64,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if !(domain_d > 0.0) {
            return Err(ModelError::InvalidSpec {
                reason: format!("domain_d must be positive, got {domain_d}"),
            });
        }
        if c < 0.0 {
            return Err(ModelError::InvalidSpec {
                reason: format!("sign-step coefficient c must be >= 0, got {c}"),
            });
        }
        if f_terms.iter().any(|t| t.is_sign_step()) {
            return Err(ModelError::InvalidSpec {
                reason: "F must be continuous: SignStep terms are not allowed in F_terms".into(),
            });
        }
        if g0_terms.iter().any(|t| t.is_sign_step()) {
            return Err(ModelError::InvalidSpec {
                reason: "g0 must be Lipschitz: SignStep terms are not allowed in g0_terms \
                         (use the c field for the jump)"
                    .into(),
            });
        }
        let spec = Self {
            name,
            f_terms,
            g0_terms,
            c,
            domain_d,
        };
        // x*g0(x) > 0 on a sample grid of (0, d); oddness covers x < 0.
        for i in 1..=256 {
            let x = domain_d * i as f64 / 256.0;
            if x * spec.eval_g0(x) <= 0.0 {
                return Err(ModelError::InvalidSpec {
                    reason: format!(
                        "restoring force violates x*g0(x) > 0 at x = {x} (g0 = {})",
                        spec.eval_g0(x)
                    ),
                });
            }
        }
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn domain_d(&self) -> f64 {
        self.domain_d
    }
    pub fn f_terms(&self) -> &[OddTerm] {
        &self.f_terms
    }
    pub fn g0_terms(&self) -> &[OddTerm] {
        &self.g0_terms
    }

    pub fn eval_big_f(&self, x: f64) -> f64 {
        self.f_terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn eval_g0(&self, x: f64) -> f64 {
        self.g0_terms.iter().map(|t| t.eval(x)).sum()
    }

    /// g(x) = g0(x) + c*sgn(x), with g(0) = 0.
    pub fn eval_g(&self, x: f64) -> f64 {
        self.eval_g0(x) + self.c * sgn(x)
    }

    /// G(x) = ∫₀ˣ g, exact per-term antiderivative plus c|x|. Even in x.
    pub fn eval_big_g(&self, x: f64) -> f64 {
        self.g0_terms
            .iter()
            .map(|t| t.antiderivative(x))
            .sum::<f64>()
            + self.c * x.abs()
    }

    /// E(x, y) = G(x) + y²/2.
    pub fn eval_energy(&self, x: f64, y: f64) -> f64 {
        self.eval_big_g(x) + 0.5 * y * y
    }

    /// f(x) = F'(x), per-term closed form. At a saturation corner the value
    /// is one-sided (from larger |x|) and flagged.
    pub fn eval_f(&self, x: f64) -> Result<DerivativeValue, ModelError> {
        let mut value = 0.0;
        let mut one_sided = false;
        for term in &self.f_terms {
            match term.derivative(x) {
                DerivPoint::Value(v) => value += v,
                DerivPoint::Corner(v) => {
                    value += v;
                    one_sided = true;
                }
                DerivPoint::Unbounded => return Err(ModelError::NonDifferentiable { x }),
            }
        }
        Ok(DerivativeValue { value, one_sided })
    }

    /// F'(x) as a plain number; at the (measure-zero) unbounded points this
    /// returns infinity instead of an error. Used by quadrature, whose nodes
    /// never land exactly on x = 0.
    pub fn f_unchecked(&self, x: f64) -> f64 {
        match self.eval_f(x) {
            Ok(d) => d.value,
            Err(_) => f64::INFINITY,
        }
    }

    /// Positive abscissae where F has a derivative jump, sorted.
    pub fn f_corners(&self) -> Vec<f64> {
        let mut corners: Vec<f64> = self.f_terms.iter().filter_map(|t| t.corner()).collect();
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
        corners.dedup();
        corners
    }

    /// True if some F term has exponent < 1, making F' unbounded at 0.
    pub fn f_singular_at_origin(&self) -> bool {
        self.f_terms.iter().any(|t| t.min_exponent() < 1.0)
    }

    /// max |F| over the bracketing grid; the scale used by tolerance tests.
    pub fn scale_f(&self) -> f64 {
        let mut m = 0.0f64;
        for x in geometric_grid(1e-6 * self.domain_d, self.domain_d, BRACKET_GRID) {
            m = m.max(self.eval_big_f(x).abs());
        }
        m.max(f64::MIN_POSITIVE)
    }

    /// g0'(0+), estimated from a small secant; used for origin-disk scaling.
    pub fn g0_slope_at_origin(&self) -> f64 {
        let h = 1e-6 * self.domain_d;
        self.eval_g0(h) / h
    }

    /// Landmark points of F. Uses the quintic closed forms when F is
    /// exactly a*x + b*x^3 + x^5 with a > 0, b < -2*sqrt(a); otherwise falls
    /// back to bracketing and bisection.
    pub fn characteristic_points(&self) -> Result<CharacteristicPoints, ModelError> {
        if let Some((a, b)) = self.quintic_coefficients() {
            if a > 0.0 && b < -2.0 * a.sqrt() {
                let disc = b * b - 4.0 * a;
                let beta1 = ((-b - disc.sqrt()) / 2.0).sqrt();
                let beta2 = ((-b + disc.sqrt()) / 2.0).sqrt();
                let disc_f = 9.0 * b * b - 20.0 * a;
                let x1 = ((-3.0 * b - disc_f.sqrt()) / 10.0).sqrt();
                let x2 = ((-3.0 * b + disc_f.sqrt()) / 10.0).sqrt();
                if beta2 < self.domain_d {
                    return Ok(CharacteristicPoints {
                        beta1,
                        alpha1: x2,
                        beta2,
                        fprime_zeros: vec![x1, x2],
                        method: PointMethod::ClosedForm,
                    });
                }
            }
        }
        self.characteristic_points_numeric()
    }

    /// (a, b) when F = a*x + b*x^3 + 1*x^5 exactly.
    fn quintic_coefficients(&self) -> Option<(f64, f64)> {
        let mut a = None;
        let mut b = None;
        let mut quintic = None;
        for term in &self.f_terms {
            match *term {
                OddTerm::PowerOdd { coef, exponent } if exponent == 1.0 && a.is_none() => {
                    a = Some(coef)
                }
                OddTerm::PowerOdd { coef, exponent } if exponent == 3.0 && b.is_none() => {
                    b = Some(coef)
                }
                OddTerm::PowerOdd { coef, exponent } if exponent == 5.0 && quintic.is_none() => {
                    quintic = Some(coef)
                }
                _ => return None,
            }
        }
        match (a, b, quintic) {
            (Some(a), Some(b), Some(q)) if q == 1.0 => Some((a, b)),
            _ => None,
        }
    }

    fn characteristic_points_numeric(&self) -> Result<CharacteristicPoints, ModelError> {
        let grid: Vec<f64> =
            geometric_grid(1e-6 * self.domain_d, self.domain_d, BRACKET_GRID).collect();
        let f_zeros = sign_change_roots(&grid, |x| self.eval_big_f(x));
        if f_zeros.len() != 2 {
            return Err(ModelError::ShapeMismatch {
                zeros_found: f_zeros.len(),
            });
        }
        let (beta1, beta2) = (f_zeros[0], f_zeros[1]);
        let fprime_zeros = sign_change_roots(&grid, |x| self.f_unchecked(x));
        let alpha1 = fprime_zeros
            .iter()
            .copied()
            .filter(|&z| z > beta1 && z < beta2)
            .fold(None, |acc: Option<f64>, z| Some(acc.map_or(z, |a| a.max(z))))
            .ok_or(ModelError::NoAlphaZero)?;
        Ok(CharacteristicPoints {
            beta1,
            alpha1,
            beta2,
            fprime_zeros,
            method: PointMethod::Numeric,
        })
    }
}

/// Geometric grid of n points spanning [lo, hi], lo > 0.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let ratio = (hi / lo).ln();
    (0..n).map(move |i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
}

/// Roots of `f` bracketed by sign changes over consecutive grid points,
/// refined by bisection to ROOT_TOL relative. Works across jump
/// discontinuities of `f` (the bisection converges to the jump abscissa).
fn sign_change_roots(grid: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev_x = grid[0];
    let mut prev_v = f(prev_x);
    for &x in &grid[1..] {
        let v = f(x);
        if prev_v == 0.0 {
            roots.push(prev_x);
        } else if v != 0.0 && prev_v.signum() != v.signum() {
            roots.push(bisect_sign_change(prev_x, x, prev_v, &f));
        }
        prev_x = x;
        prev_v = v;
    }
    if prev_v == 0.0 {
        roots.push(prev_x);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() <= ROOT_TOL * b.abs());
    roots
}

fn bisect_sign_change(mut lo: f64, mut hi: f64, flo: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let lo_sign = flo.signum();
    while hi - lo > ROOT_TOL * hi.abs() {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Builtin systems
// ---------------------------------------------------------------------------

fn power(coef: f64, exponent: f64) -> OddTerm {
    OddTerm::PowerOdd { coef, exponent }
}

/// Quintic oscillator: F = a*x + b*x^3 + x^5, g = c*x + x^3 (continuous).
pub fn glo(a: f64, b: f64, c: f64) -> Result<SystemSpec, ModelError> {
    if c < 0.0 {
        return Err(ModelError::InvalidSpec {
            reason: format!("glo requires c >= 0 (unique equilibrium), got {c}"),
        });
    }
    let mut g0 = Vec::new();
    if c != 0.0 {
        g0.push(power(c, 1.0));
    }
    g0.push(power(1.0, 3.0));
    SystemSpec::new(
        format!("glo({a},{b},{c})"),
        vec![power(a, 1.0), power(b, 3.0), power(1.0, 5.0)],
        g0,
        0.0,
        8.0,
    )
}

/// Discontinuous restoring force: F = a*x + b*x^3 + x^5, g = x + c*sgn(x).
pub fn filippov(a: f64, b: f64, c: f64) -> Result<SystemSpec, ModelError> {
    SystemSpec::new(
        format!("filippov({a},{b},{c})"),
        vec![power(a, 1.0), power(b, 3.0), power(1.0, 5.0)],
        vec![power(1.0, 1.0)],
        c,
        8.0,
    )
}

/// Rychkov's system: F = mu1*x + mu2*x^3 + x^5, g = x.
pub fn rychkov(mu1: f64, mu2: f64) -> Result<SystemSpec, ModelError> {
    SystemSpec::new(
        format!("rychkov({mu1},{mu2})"),
        vec![power(mu1, 1.0), power(mu2, 3.0), power(1.0, 5.0)],
        vec![power(1.0, 1.0)],
        0.0,
        8.0,
    )
}

/// Piecewise system with saturated fractional-power damping and g = x^(1/3).
pub fn pls(a1: f64, a2: f64, a3: f64) -> Result<SystemSpec, ModelError> {
    SystemSpec::new(
        format!("pls({a1},{a2},{a3})"),
        vec![
            power(a1, 2.0 / 3.0),
            OddTerm::SaturatedPowerOdd {
                coef: a2,
                exponent: 2.0 / 3.0,
                saturation: 1.0,
            },
            OddTerm::SaturatedPowerOdd {
                coef: a3,
                exponent: 2.0 / 3.0,
                saturation: 2.0,
            },
        ],
        vec![power(1.0, 1.0 / 3.0)],
        0.0,
        12.0,
    )
}

/// F ≡ 0, g = x: the Hamiltonian comparison system, every orbit closed.
pub fn hamiltonian_test() -> SystemSpec {
    SystemSpec::new("hamiltonian-test", vec![], vec![power(1.0, 1.0)], 0.0, 8.0)
        .expect("builtin is valid")
}
