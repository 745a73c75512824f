use crate::error::{Error, Result};
use crate::model::{ExecState, ModelParams};
use crate::oracle::bellman::bellman_rhs_folded;
use crate::quadratic::QuadraticValue;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub u: f64,
    pub value: f64,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`, stopping when
/// the bracket is narrower than `tol`. Returns the best point seen.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..MAX_ITER {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        Minimum { u: c, value: fc }
    } else {
        Minimum { u: d, value: fd }
    }
}

/// One successive-parabolic-interpolation step around `m` with half-width `h`. Near the
/// bottom of a smooth bowl the objective is flat to within rounding, so comparing values
/// cannot locate the minimizer much better than `sqrt(eps |f|)`; the three-point vertex
/// uses differences over a wide stencil and does.
fn parabolic_polish<F: FnMut(f64) -> f64>(f: &mut F, m: Minimum, h: f64) -> Minimum {
    let (fl, fr) = (f(m.u - h), f(m.u + h));
    let curv = fl - 2.0 * m.value + fr;
    if !(curv > 0.0) {
        return m;
    }
    let step = h * (fl - fr) / (2.0 * curv);
    if !step.is_finite() || step.abs() > h {
        return m;
    }
    let u = m.u + step;
    let value = f(u);
    if value <= m.value + 1e-12 * (1.0 + m.value.abs()) {
        Minimum { u, value }
    } else {
        m
    }
}

/// Default search bracket `+-(|q| + lambda dt + 10)`.
pub fn default_bracket(x: ExecState, dt: f64) -> (f64, f64) {
    let r = x.q.abs() + x.lambda.abs() * dt + 10.0;
    (-r, r)
}

/// Numeric minimizer of the folded Bellman right-hand side at step `n`.
///
/// Golden section on the bracket, widened tenfold once if the minimizer sits on an edge,
/// then a parabolic polish. Uses no closed-form coefficients.
pub fn minimize_u(
    x: ExecState,
    v_next: &QuadraticValue,
    params: &ModelParams,
    n: usize,
    bracket: Option<(f64, f64)>,
) -> Result<Minimum> {
    let dt = params.dt_at(n)?;
    let (mut lo, mut hi) = bracket.unwrap_or_else(|| default_bracket(x, dt));
    if !(lo < hi) {
        return Err(Error::invalid(
            "bracket",
            format!("empty bracket [{lo}, {hi}]"),
        ));
    }
    let mut f = |u: f64| bellman_rhs_folded(x, u, v_next, params, n).unwrap_or(f64::INFINITY);
    for attempt in 0..2 {
        let width = hi - lo;
        let m = golden_section(&mut f, lo, hi, 1e-10 * (1.0 + lo.abs().max(hi.abs())));
        let edge = 1e-6 * width;
        if m.u - lo > edge && hi - m.u > edge {
            let h = (0.1 * (1.0 + m.u.abs())).min(0.25 * width);
            return Ok(parabolic_polish(&mut f, m, h));
        }
        if attempt == 0 {
            let mid = 0.5 * (lo + hi);
            lo = mid - 5.0 * width;
            hi = mid + 5.0 * width;
        }
    }
    Err(Error::BracketFailure { lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GammaSchedule;
    use crate::solver::{last_period_policy, terminal_value};

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let m = golden_section(|u| (u - 1.3) * (u - 1.3) + 2.0, -10.0, 10.0, 1e-9);
        assert!((m.u - 1.3).abs() < 1e-6);
        assert!((m.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_last_period_closed_form() {
        let params =
            ModelParams::uniform(1, 0.1, &GammaSchedule::Constant(0.3), 10.0, 0.5).unwrap();
        let v = terminal_value(&params);
        let pol = last_period_policy(&params);
        for &(q, l) in &[(5.0, 5.0), (0.0, 2.0), (-3.0, 8.0), (12.0, 0.0)] {
            let x = ExecState::new(q, l);
            let m = minimize_u(x, &v, &params, 0, None).unwrap();
            assert!(
                (m.u - pol.action(x)).abs() < 1e-6,
                "{} vs {}",
                m.u,
                pol.action(x)
            );
        }
    }

    #[test]
    fn stiff_terminal_without_impact_trades_expected_remainder() {
        let dt = 0.2;
        let params = ModelParams::uniform(1, dt, &GammaSchedule::Constant(0.0), 1e8, 0.0).unwrap();
        let x = ExecState::new(6.0, 4.0);
        let m = minimize_u(x, &terminal_value(&params), &params, 0, None).unwrap();
        assert!((m.u - (6.0 - 4.0 * dt)).abs() < 1e-6);
    }

    #[test]
    fn widens_a_bracket_that_misses() {
        let params =
            ModelParams::uniform(1, 0.1, &GammaSchedule::Constant(0.3), 10.0, 0.5).unwrap();
        let v = terminal_value(&params);
        let x = ExecState::new(5.0, 5.0);
        let m = minimize_u(x, &v, &params, 0, Some((-1.0, 1.0))).unwrap();
        assert!((m.u - last_period_policy(&params).action(x)).abs() < 1e-6);
        assert!(matches!(
            minimize_u(
                ExecState::new(500.0, 5.0),
                &v,
                &params,
                0,
                Some((-1.0, 1.0))
            ),
            Err(Error::BracketFailure { .. })
        ));
    }
}
