//! Binary vapor–liquid equilibrium: Antoine saturation pressure, Wilson
//! activity coefficients, modified Raoult's law, bubble/dew points and the
//! VLE residual used by the physics loss.
//!
//! Units throughout: temperature in K, pressure in kPa, Antoine in the
//! `log10(Psat[kPa]) = a - b / (T[K] + c)` form. Component 1 is always the
//! heavy (less volatile) species.

use serde::{Deserialize, Serialize};

use crate::scalar::{Dual, Scalar};

/// Closure tolerance on `sum(y) - 1` (bubble) or `sum(x) - 1` (dew).
pub const CLOSURE_TOL: f64 = 1e-10;
const BRACKET_MARGIN_K: f64 = 5.0;
const MAX_BISECTION: usize = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermoError {
    #[error("temperature {t} K outside the Antoine domain (t + c = {shifted})")]
    AntoineDomain { t: f64, shifted: f64 },
    #[error("mole fraction {0} outside [0, 1]")]
    MoleFraction(f64),
    #[error("pressure must be positive, got {0} kPa")]
    Pressure(f64),
    #[error("{kind} point: no sign change on [{lo}, {hi}] K")]
    NoBracket { kind: &'static str, lo: f64, hi: f64 },
    #[error("{kind} point: closure residual {residual} after {iterations} bisections")]
    NotConverged {
        kind: &'static str,
        residual: f64,
        iterations: usize,
    },
    #[error("invalid binary system: {0}")]
    InvalidSystem(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntoineCoeffs {
    pub a: f64,
    /// K
    pub b: f64,
    /// K
    pub c: f64,
}

impl AntoineCoeffs {
    /// Saturation pressure without a domain check.
    #[inline]
    pub fn psat<S: Scalar>(&self, t: S) -> S {
        (S::cst(self.a) - S::cst(self.b) / (t + S::cst(self.c))).pow10()
    }

    /// Temperature at which `psat == p`.
    pub fn boiling_point(&self, p: f64) -> f64 {
        self.b / (self.a - libm::log10(p)) - self.c
    }
}

pub fn antoine_psat(t: f64, c: &AntoineCoeffs) -> Result<f64, ThermoError> {
    let shifted = t + c.c;
    if !(shifted > 0.0) {
        return Err(ThermoError::AntoineDomain { t, shifted });
    }
    Ok(c.psat(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WilsonParams {
    pub lambda_12: f64,
    pub lambda_21: f64,
}

impl WilsonParams {
    /// Two-parameter Wilson activity coefficients `(gamma_1, gamma_2)` for
    /// liquid mole fractions `(x1, x2)`.
    pub fn gammas<S: Scalar>(&self, x1: S, x2: S) -> (S, S) {
        let l12 = S::cst(self.lambda_12);
        let l21 = S::cst(self.lambda_21);
        let d1 = x1 + l12 * x2;
        let d2 = x2 + l21 * x1;
        let bracket = l12 / d1 - l21 / d2;
        let ln_g1 = -d1.ln() + x2 * bracket;
        let ln_g2 = -d2.ln() - x1 * bracket;
        (ln_g1.exp(), ln_g2.exp())
    }
}

pub fn wilson_gamma(x_heavy: f64, w: &WilsonParams) -> Result<(f64, f64), ThermoError> {
    check_fraction(x_heavy)?;
    Ok(w.gammas(x_heavy, 1.0 - x_heavy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub name: alloc::string::String,
    pub antoine: AntoineCoeffs,
    /// Liquid heat capacity, kJ/(kmol K).
    pub cp_liquid: f64,
    /// Heat of vaporization, kJ/kmol.
    pub dh_vap: f64,
    /// kg/kmol
    pub molar_mass: f64,
}

/// Heavy/light pair with shared Wilson parameters and the enthalpy
/// reference temperature of the linear enthalpy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarySystem {
    pub heavy: Component,
    pub light: Component,
    pub wilson: WilsonParams,
    /// K
    pub t_ref: f64,
}

/// Result of a dew-point solve: temperature and the incipient liquid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DewPoint {
    pub t: f64,
    pub x_heavy: f64,
}

impl BinarySystem {
    pub fn validate(&self) -> Result<(), ThermoError> {
        let w = &self.wilson;
        if !(w.lambda_12 > 0.0 && w.lambda_21 > 0.0) {
            return Err(ThermoError::InvalidSystem("Wilson parameters must be positive"));
        }
        for c in [&self.heavy, &self.light] {
            if !(c.antoine.b > 0.0) {
                return Err(ThermoError::InvalidSystem("Antoine b must be positive"));
            }
            if !(c.cp_liquid > 0.0 && c.dh_vap > 0.0 && c.molar_mass > 0.0) {
                return Err(ThermoError::InvalidSystem(
                    "cp_liquid, dh_vap and molar_mass must be positive",
                ));
            }
        }
        // Volatility ordering across the atmospheric operating window.
        let lo = self.light.antoine.boiling_point(101.325) - 20.0;
        let hi = self.heavy.antoine.boiling_point(101.325) + 20.0;
        for i in 0..=20 {
            let t = lo + (hi - lo) * i as f64 / 20.0;
            if self.light.antoine.psat(t) <= self.heavy.antoine.psat(t) {
                return Err(ThermoError::InvalidSystem(
                    "light component must be more volatile than heavy component",
                ));
            }
        }
        Ok(())
    }

    /// Modified Raoult vapor fractions `(y_heavy, y_light)`, unnormalized.
    #[inline]
    pub fn raoult<S: Scalar>(&self, x_heavy: S, x_light: S, t: S, p: S) -> (S, S) {
        let (g1, g2) = self.wilson.gammas(x_heavy, x_light);
        (
            g1 * self.heavy.antoine.psat(t) * x_heavy / p,
            g2 * self.light.antoine.psat(t) * x_light / p,
        )
    }

    /// `sum_i (y_i - gamma_i Psat_i(T) x_i / P)^2`.
    pub fn vle_residual<S: Scalar>(&self, x: (S, S), y: (S, S), t: S, p: S) -> S {
        let (e1, e2) = self.raoult(x.0, x.1, t, p);
        (y.0 - e1).square() + (y.1 - e2).square()
    }

    /// Heavy and light pure-component boiling points at `p`.
    pub fn pure_boiling_points(&self, p: f64) -> (f64, f64) {
        (
            self.heavy.antoine.boiling_point(p),
            self.light.antoine.boiling_point(p),
        )
    }

    fn bracket(&self, p: f64) -> (f64, f64) {
        let (tb_h, tb_l) = self.pure_boiling_points(p);
        (tb_l.min(tb_h) - BRACKET_MARGIN_K, tb_h.max(tb_l) + BRACKET_MARGIN_K)
    }

    pub fn bubble_point_t(&self, x_heavy: f64, p: f64) -> Result<f64, ThermoError> {
        check_fraction(x_heavy)?;
        check_pressure(p)?;
        let x_light = 1.0 - x_heavy;
        let closure = |t: f64| {
            let (y1, y2) = self.raoult(x_heavy, x_light, t, p);
            y1 + y2 - 1.0
        };
        bisect("bubble", self.bracket(p), closure, true)
    }

    pub fn dew_point(&self, y_heavy: f64, p: f64) -> Result<DewPoint, ThermoError> {
        check_fraction(y_heavy)?;
        check_pressure(p)?;
        let y_light = 1.0 - y_heavy;
        let liquid = |t: f64| -> (f64, f64) {
            let k1 = self.heavy.antoine.psat(t) / p;
            let k2 = self.light.antoine.psat(t) / p;
            let (mut x1, mut x2) = (y_heavy / k1, y_light / k2);
            for _ in 0..200 {
                let s = x1 + x2;
                let (g1, g2) = self.wilson.gammas(x1 / s, x2 / s);
                let n1 = y_heavy / (g1 * k1);
                let n2 = y_light / (g2 * k2);
                let done = libm::fabs(n1 - x1) + libm::fabs(n2 - x2) < 1e-15;
                x1 = n1;
                x2 = n2;
                if done {
                    break;
                }
            }
            (x1, x2)
        };
        let closure = |t: f64| {
            let (x1, x2) = liquid(t);
            x1 + x2 - 1.0
        };
        let t = bisect("dew", self.bracket(p), closure, false)?;
        let (x1, x2) = liquid(t);
        Ok(DewPoint {
            t,
            x_heavy: x1 / (x1 + x2),
        })
    }

    pub fn dew_point_t(&self, y_heavy: f64, p: f64) -> Result<f64, ThermoError> {
        self.dew_point(y_heavy, p).map(|d| d.t)
    }

    /// Dew temperature as a differentiable function of `(y_heavy, p)`.
    ///
    /// The value comes from [`Self::dew_point`]; the tangent is obtained by
    /// implicit differentiation of the two equilibrium equations
    /// `x gamma_1 Psat_1 = y P` and `(1-x) gamma_2 Psat_2 = (1-y) P`.
    pub fn dew_point_scalar<S: Scalar>(&self, y_heavy: S, p: S) -> Result<S, ThermoError> {
        let (y, pv) = (y_heavy.value(), p.value());
        let dew = self.dew_point(y, pv)?;
        let xs = Dual::<2>::var(dew.x_heavy, 0);
        let ts = Dual::<2>::var(dew.t, 1);
        let one = Dual::<2>::cst(1.0);
        let (g1, g2) = self.wilson.gammas(xs, one - xs);
        let f1 = xs * g1 * self.heavy.antoine.psat(ts);
        let f2 = (one - xs) * g2 * self.light.antoine.psat(ts);
        // J = [[df1/dx, df1/dT], [df2/dx, df2/dT]]
        let (a, b, c, d) = (f1.d[0], f1.d[1], f2.d[0], f2.d[1]);
        let det = a * d - b * c;
        // dF/dy = (-P, P), dF/dP = (-y, -(1-y)); dT = -(J^-1 dF)_T
        let dt_of = |r1: f64, r2: f64| -(a * r2 - c * r1) / det;
        let dt_dy = dt_of(-pv, pv);
        let dt_dp = dt_of(-y, -(1.0 - y));
        Ok(S::cst(dew.t) + (y_heavy - S::cst(y)) * S::cst(dt_dy) + (p - S::cst(pv)) * S::cst(dt_dp))
    }

    /// Linear liquid enthalpy `sum x_i cp_i (T - t_ref)`, kJ/kmol.
    pub fn liquid_enthalpy<S: Scalar>(&self, x_heavy: S, x_light: S, t: S) -> S {
        let dt = t - S::cst(self.t_ref);
        (x_heavy * S::cst(self.heavy.cp_liquid) + x_light * S::cst(self.light.cp_liquid)) * dt
    }

    /// Vapor enthalpy: liquid enthalpy plus mole-weighted heat of vaporization.
    pub fn vapor_enthalpy<S: Scalar>(&self, y_heavy: S, y_light: S, t: S) -> S {
        self.liquid_enthalpy(y_heavy, y_light, t)
            + y_heavy * S::cst(self.heavy.dh_vap)
            + y_light * S::cst(self.light.dh_vap)
    }

    /// Mole-weighted molar mass, kg/kmol.
    pub fn molar_mass<S: Scalar>(&self, x_heavy: S, x_light: S) -> S {
        (x_heavy * S::cst(self.heavy.molar_mass) + x_light * S::cst(self.light.molar_mass))
            / (x_heavy + x_light)
    }
}

pub fn raoult_y(
    x_heavy: f64,
    t: f64,
    p: f64,
    sys: &BinarySystem,
) -> Result<(f64, f64), ThermoError> {
    check_fraction(x_heavy)?;
    check_pressure(p)?;
    antoine_psat(t, &sys.heavy.antoine)?;
    antoine_psat(t, &sys.light.antoine)?;
    Ok(sys.raoult(x_heavy, 1.0 - x_heavy, t, p))
}

pub fn bubble_point_t(x_heavy: f64, p: f64, sys: &BinarySystem) -> Result<f64, ThermoError> {
    sys.bubble_point_t(x_heavy, p)
}

pub fn dew_point_t(y_heavy: f64, p: f64, sys: &BinarySystem) -> Result<f64, ThermoError> {
    sys.dew_point_t(y_heavy, p)
}

/// Checked VLE residual for liquid `x` and vapor `y` (heavy, light).
pub fn vle_residual(
    x: [f64; 2],
    y: [f64; 2],
    t: f64,
    p: f64,
    sys: &BinarySystem,
) -> Result<f64, ThermoError> {
    for v in x.iter().chain(y.iter()) {
        check_fraction(*v)?;
    }
    check_pressure(p)?;
    antoine_psat(t, &sys.heavy.antoine)?;
    antoine_psat(t, &sys.light.antoine)?;
    Ok(sys.vle_residual((x[0], x[1]), (y[0], y[1]), t, p))
}

fn check_fraction(x: f64) -> Result<(), ThermoError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(ThermoError::MoleFraction(x))
    }
}

fn check_pressure(p: f64) -> Result<(), ThermoError> {
    if p > 0.0 {
        Ok(())
    } else {
        Err(ThermoError::Pressure(p))
    }
}

/// Bisection on a monotone closure function. The bracket is narrowed to
/// round-off so the root is a smooth function of the inputs; the result is
/// accepted when `|f| < CLOSURE_TOL` there.
fn bisect(
    kind: &'static str,
    (lo0, hi0): (f64, f64),
    f: impl Fn(f64) -> f64,
    increasing: bool,
) -> Result<f64, ThermoError> {
    let sign = if increasing { 1.0 } else { -1.0 };
    let g = |t: f64| sign * f(t);
    let (mut lo, mut hi) = (lo0, hi0);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if !(g_lo < 0.0 && g_hi > 0.0) {
        if libm::fabs(g_lo) < CLOSURE_TOL {
            return Ok(lo);
        }
        if libm::fabs(g_hi) < CLOSURE_TOL {
            return Ok(hi);
        }
        return Err(ThermoError::NoBracket { kind, lo, hi });
    }
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        residual = libm::fabs(gm);
        if gm == 0.0 || hi - lo <= 4.0 * f64::EPSILON * libm::fabs(hi) {
            if residual < CLOSURE_TOL {
                return Ok(mid);
            }
            break;
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ThermoError::NotConverged {
        kind,
        residual,
        iterations: MAX_BISECTION,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::identical_components;
    use super::*;

    const A: AntoineCoeffs = AntoineCoeffs {
        a: 6.0,
        b: 1200.0,
        c: -50.0,
    };

    #[test]
    fn psat_is_one_kpa_where_exponent_vanishes() {
        // a - b/(t+c) = 0  =>  t = b/a - c
        let t = A.b / A.a - A.c;
        assert!((antoine_psat(t, &A).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psat_rejects_domain() {
        assert!(matches!(
            antoine_psat(50.0, &A),
            Err(ThermoError::AntoineDomain { .. })
        ));
    }

    #[test]
    fn wilson_ideal_reduction() {
        let w = WilsonParams {
            lambda_12: 1.0,
            lambda_21: 1.0,
        };
        for i in 0..=10 {
            let (g1, g2) = wilson_gamma(i as f64 / 10.0, &w).unwrap();
            assert!((g1 - 1.0).abs() < 1e-15 && (g2 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn wilson_rejects_out_of_range() {
        let w = WilsonParams {
            lambda_12: 0.7,
            lambda_21: 1.2,
        };
        assert_eq!(wilson_gamma(1.5, &w), Err(ThermoError::MoleFraction(1.5)));
        assert!(wilson_gamma(-0.1, &w).is_err());
    }

    #[test]
    fn raoult_reduces_to_x_when_psat_equals_p() {
        let sys = identical_components(A);
        let t = 360.0;
        let p = A.psat(t);
        let (y1, y2) = raoult_y(0.3, t, p, &sys).unwrap();
        assert!((y1 - 0.3).abs() < 1e-14 && (y2 - 0.7).abs() < 1e-14);
    }

    #[test]
    fn raoult_rejects_nonpositive_pressure() {
        let sys = identical_components(A);
        assert_eq!(raoult_y(0.3, 360.0, 0.0, &sys), Err(ThermoError::Pressure(0.0)));
    }

    #[test]
    fn residual_of_pure_vapor_against_fixed_equilibrium() {
        // ideal, psat = P  =>  equilibrium y = x = (0.4, 0.6)
        let sys = identical_components(A);
        let t = 355.0;
        let p = A.psat(t);
        let r = vle_residual([0.4, 0.6], [1.0, 0.0], t, p, &sys).unwrap();
        assert!((r - 0.72).abs() < 1e-14, "{r}");
    }

    #[test]
    fn bisection_reports_missing_bracket() {
        let r = bisect("bubble", (0.0, 1.0), |t| t + 5.0, true);
        assert!(matches!(r, Err(ThermoError::NoBracket { .. })));
    }
}
