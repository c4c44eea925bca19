//! Selection rate `S(x)` and daughter distribution `b(x, y)`.
//!
//! Both solvers consume kernels only through partial integrals over cells, so
//! every kernel kind provides exact closed forms for
//! `∫ b(x, y) dx`, `∫ x b(x, y) dx` and `∫ S(x) b(x0, x) dx`.

use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre8;

/// Overall fragmentation rate of particles of size `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionFunction {
    /// `S(x) = coefficient * x^exponent`.
    Power { coefficient: f64, exponent: f64 },
}

impl SelectionFunction {
    pub fn power(coefficient: f64, exponent: f64) -> Result<Self> {
        if !coefficient.is_finite() || coefficient < 0.0 {
            return Err(invalid("coefficient", "must be finite and nonnegative"));
        }
        if !exponent.is_finite() || exponent < 0.0 {
            return Err(invalid("exponent", "must be finite and nonnegative"));
        }
        Ok(Self::Power {
            coefficient,
            exponent,
        })
    }

    /// `S(x) = x`.
    pub fn linear() -> Self {
        Self::Power {
            coefficient: 1.0,
            exponent: 1.0,
        }
    }

    /// `S(x) = x²`.
    pub fn quadratic() -> Self {
        Self::Power {
            coefficient: 1.0,
            exponent: 2.0,
        }
    }

    /// `S ≡ 0`.
    pub fn zero() -> Self {
        Self::Power {
            coefficient: 0.0,
            exponent: 1.0,
        }
    }

    pub fn rate(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(invalid("x", "size must be nonnegative"));
        }
        Ok(self.eval(x))
    }

    /// Unchecked evaluation for `x ≥ 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Power {
                coefficient,
                exponent,
            } => {
                if coefficient == 0.0 {
                    0.0
                } else if exponent == 1.0 {
                    coefficient * x
                } else if exponent == 2.0 {
                    coefficient * x * x
                } else {
                    coefficient * libm::pow(x, exponent)
                }
            }
        }
    }
}

/// Expected number density of fragments of size `x` per breakage of a
/// parent of size `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DaughterDistribution {
    /// `b(x, y) = 2 / y` on `0 ≤ x < y`: binary breakage with uniform
    /// fragment sizes.
    #[default]
    PowerLawBinary,
}

impl DaughterDistribution {
    /// Pointwise density `b(x, y)`.
    pub fn density(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::PowerLawBinary => {
                if x >= 0.0 && x < y {
                    2.0 / y
                } else {
                    0.0
                }
            }
        }
    }

    /// Mean fragment count `ν(y) = ∫_0^y b(x, y) dx`.
    pub fn fragments(&self, _y: f64) -> f64 {
        match self {
            Self::PowerLawBinary => 2.0,
        }
    }

    /// `∫_a^c b(x, y) dx` for `0 ≤ a ≤ c ≤ y`.
    pub fn number_integral(&self, a: f64, c: f64, y: f64) -> Result<f64> {
        check_daughter_range(a, c, y)?;
        Ok(self.number_integral_unchecked(a, c, y))
    }

    #[inline]
    pub(crate) fn number_integral_unchecked(&self, a: f64, c: f64, y: f64) -> f64 {
        match self {
            Self::PowerLawBinary => 2.0 * (c - a) / y,
        }
    }

    /// `∫_a^c x b(x, y) dx` for `0 ≤ a ≤ c ≤ y`.
    pub fn mass_integral(&self, a: f64, c: f64, y: f64) -> Result<f64> {
        check_daughter_range(a, c, y)?;
        Ok(match self {
            Self::PowerLawBinary => (c - a) * (c + a) / y,
        })
    }
}

fn check_daughter_range(a: f64, c: f64, y: f64) -> Result<()> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(invalid("y", "parent size must be finite and positive"));
    }
    if !(a >= 0.0) || !(a <= c) || !(c <= y) {
        return Err(Error::InvalidRange {
            lower: a,
            upper: c,
            parent: y,
        });
    }
    Ok(())
}

fn check_parent_range(x0: f64, a: f64, c: f64) -> Result<()> {
    if !(x0 >= 0.0) || !a.is_finite() || !c.is_finite() || !(a <= c) {
        return Err(Error::InvalidRange {
            lower: a,
            upper: c,
            parent: x0,
        });
    }
    Ok(())
}

/// `∫_a^c S(x) b(x0, x) dx`: parent sizes `x` range over `[a, c]`, the
/// daughter size is fixed at `x0`.
///
/// Parents no larger than `x0` produce no fragments of size `x0`, so the lower
/// limit is raised to `x0` when `a < x0`. Every current kernel pair has a
/// closed form; [`weighted_selection_daughter_quadrature`] is the generic
/// 8-point Gauss–Legendre path.
pub fn weighted_selection_daughter_integral(
    selection: &SelectionFunction,
    daughter: &DaughterDistribution,
    x0: f64,
    a: f64,
    c: f64,
) -> Result<f64> {
    check_parent_range(x0, a, c)?;
    let a = a.max(x0).min(c);
    if a == c {
        return Ok(0.0);
    }
    match closed_form_weighted(selection, daughter, a, c) {
        Some(v) if v.is_finite() => Ok(v),
        Some(_) => Err(invalid(
            "selection",
            "weighted daughter integral diverges at the origin",
        )),
        None => Ok(gauss_legendre8(
            |x| selection.eval(x) * daughter.density(x0, x),
            a,
            c,
        )),
    }
}

/// Same integral as [`weighted_selection_daughter_integral`], always by
/// 8-point Gauss–Legendre quadrature.
pub fn weighted_selection_daughter_quadrature(
    selection: &SelectionFunction,
    daughter: &DaughterDistribution,
    x0: f64,
    a: f64,
    c: f64,
) -> Result<f64> {
    check_parent_range(x0, a, c)?;
    let a = a.max(x0).min(c);
    Ok(gauss_legendre8(
        |x| {
            if x > x0 {
                selection.eval(x) * daughter.density(x0, x)
            } else {
                0.0
            }
        },
        a,
        c,
    ))
}

fn closed_form_weighted(
    selection: &SelectionFunction,
    daughter: &DaughterDistribution,
    a: f64,
    c: f64,
) -> Option<f64> {
    match (selection, daughter) {
        (
            SelectionFunction::Power {
                coefficient,
                exponent,
            },
            DaughterDistribution::PowerLawBinary,
        ) => {
            // S0 x^α · 2/x integrates to (2 S0 / α)(c^α − a^α)
            let k = *coefficient;
            let alpha = *exponent;
            Some(if k == 0.0 {
                0.0
            } else if alpha == 1.0 {
                2.0 * k * (c - a)
            } else if alpha == 2.0 {
                k * (c - a) * (c + a)
            } else if alpha == 0.0 {
                2.0 * k * libm::log(c / a)
            } else {
                2.0 * k / alpha * (libm::pow(c, alpha) - libm::pow(a, alpha))
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn selection_values() {
        assert_eq!(SelectionFunction::linear().rate(3.0).unwrap(), 3.0);
        assert_eq!(SelectionFunction::quadratic().rate(0.0).unwrap(), 0.0);
        assert_eq!(SelectionFunction::quadratic().rate(4.0).unwrap(), 16.0);
        assert!(SelectionFunction::linear().rate(-1.0).is_err());
        let s = SelectionFunction::power(0.5, 1.5).unwrap();
        assert_relative_eq!(s.rate(4.0).unwrap(), 4.0, max_relative = 1e-15);
        assert!(SelectionFunction::power(-1.0, 1.0).is_err());
    }

    #[test]
    fn number_integrals() {
        let b = DaughterDistribution::PowerLawBinary;
        assert_eq!(b.number_integral(0.0, 7.0, 7.0).unwrap(), 2.0);
        assert_eq!(b.number_integral(0.0, 2.0, 4.0).unwrap(), 1.0);
        assert_relative_eq!(b.number_integral(2.0, 3.0, 3.0).unwrap(), 2.0 / 3.0);
        assert!(b.number_integral(3.0, 2.0, 4.0).is_err());
        assert!(b.number_integral(0.0, 5.0, 4.0).is_err());
    }

    #[test]
    fn mass_integrals() {
        let b = DaughterDistribution::PowerLawBinary;
        assert_eq!(b.mass_integral(0.0, 5.0, 5.0).unwrap(), 5.0);
        assert_eq!(b.mass_integral(0.0, 2.0, 4.0).unwrap(), 1.0);
        assert_eq!(b.mass_integral(1.5, 1.5, 4.0).unwrap(), 0.0);
        assert!(b.mass_integral(2.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn weighted_integrals() {
        let b = DaughterDistribution::PowerLawBinary;
        let lin = SelectionFunction::linear();
        let quad = SelectionFunction::quadratic();
        assert_eq!(
            weighted_selection_daughter_integral(&lin, &b, 1.0, 2.0, 5.0).unwrap(),
            6.0
        );
        assert_eq!(
            weighted_selection_daughter_integral(&quad, &b, 1.0, 2.0, 4.0).unwrap(),
            12.0
        );
        assert_eq!(
            weighted_selection_daughter_integral(&quad, &b, 1.0, 3.0, 3.0).unwrap(),
            0.0
        );
        assert!(weighted_selection_daughter_integral(&lin, &b, 1.0, 4.0, 3.0).is_err());
    }

    #[test]
    fn general_power_closed_form_matches_quadrature() {
        let b = DaughterDistribution::PowerLawBinary;
        let s = SelectionFunction::power(0.7, 3.0).unwrap();
        let exact = weighted_selection_daughter_integral(&s, &b, 0.5, 1.0, 2.0).unwrap();
        let quad = weighted_selection_daughter_quadrature(&s, &b, 0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(exact, 2.0 * 0.7 / 3.0 * 7.0, max_relative = 1e-14);
        assert_relative_eq!(exact, quad, max_relative = 1e-13);
    }

    #[test]
    fn constant_selection_uses_log_form() {
        let b = DaughterDistribution::PowerLawBinary;
        let s = SelectionFunction::power(1.0, 0.0).unwrap();
        let v = weighted_selection_daughter_integral(&s, &b, 0.5, 1.0, libm::exp(1.0)).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn lower_limit_clamped_to_daughter_size() {
        let b = DaughterDistribution::PowerLawBinary;
        let lin = SelectionFunction::linear();
        let v = weighted_selection_daughter_integral(&lin, &b, 3.0, 2.0, 4.0).unwrap();
        assert_eq!(v, 2.0);
    }
}
