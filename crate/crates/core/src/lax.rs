//! Time evolution of the coupled system: Hamilton's equations for `(q, p)`
//! and the operadic Lax equation `μ̇ = [M, μ] = M•μ − μ•M` for the structure
//! constants, together with the residuals that compare the evolved `μ`
//! against the closed-form family.

use std::io::Write;

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::multilinear::Operation;
use crate::operad::gerstenhaber_bracket;
use crate::oscillator::{
    aux_functions_continuous, aux_functions_principal, g_functions_with, hamilton_rhs,
    hamiltonian, lax_m, mu_family, mu_family_coeffs, mu_family_from_aux, wrap_angle, MuParams,
    OscState, Real,
};

/// `[M, L] = ML − LM` for arity-1 operations.
pub fn matrix_lax_rhs(l: &Operation, m: &Operation) -> Result<Operation> {
    if l.arity() != 1 || m.arity() != 1 {
        return Err(Error::Dimension("matrix Lax equation needs two arity-1 operations".into()));
    }
    l.check_same_shape(m)?;
    let d = l.dim();
    Operation::from_fn(d, 1, |idx| {
        let (i, j) = (idx[0], idx[1]);
        (0..d)
            .map(|s| m.get(&[i, s]) * l.get(&[s, j]) - l.get(&[i, s]) * m.get(&[s, j]))
            .sum()
    })
}

/// `M•μ − μ•M` through the Gerstenhaber bracket, for `|M| = 0`, `|μ| = 1`.
pub fn operadic_lax_rhs(mu: &Operation, m: &Operation) -> Result<Operation> {
    if mu.arity() != 2 || m.arity() != 1 {
        return Err(Error::Arity(format!(
            "operadic Lax equation needs arity(mu) = 2 and arity(M) = 1, got {} and {}",
            mu.arity(),
            m.arity()
        )));
    }
    gerstenhaber_bracket(m, mu)
}

/// `μ̇^i_{jk} = μ^s_{jk} M^i_s − M^s_j μ^i_{sk} − M^s_k μ^i_{js}` by direct summation.
pub fn structure_constant_rhs(mu: &Operation, m: &Operation) -> Result<Operation> {
    if mu.arity() != 2 || m.arity() != 1 {
        return Err(Error::Dimension(format!(
            "structure-constant equation needs arities (2, 1), got ({}, {})",
            mu.arity(),
            m.arity()
        )));
    }
    mu.check_same_dim(m)?;
    let d = mu.dim();
    let mut out = vec![0.0; d * d * d];
    structure_rhs_into(d, mu.coeffs(), m.coeffs(), &mut out);
    Operation::new(d, 2, out)
}

pub(crate) fn structure_rhs_into<T: Real>(d: usize, mu: &[T], m: &[T], out: &mut [T]) {
    let mu_at = |i: usize, j: usize, k: usize| mu[(i * d + j) * d + k];
    let m_at = |i: usize, j: usize| m[i * d + j];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut acc = T::from(0.0);
                for s in 0..d {
                    acc = acc + mu_at(s, j, k) * m_at(i, s)
                        - m_at(s, j) * mu_at(i, s, k)
                        - m_at(s, k) * mu_at(i, j, s);
                }
                out[(i * d + j) * d + k] = acc;
            }
        }
    }
}

/// Time, oscillator state, evolving structure constants and the unwrapped
/// phase used to pick the continuous branch.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub osc: OscState,
    pub mu: Operation,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub omega: f64,
    pub q0: f64,
    pub p0: f64,
    pub params: MuParams,
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(what.to_string()));
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return bad("omega must be > 0");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if self.dt > 0.1 / self.omega {
            return Err(Error::Validation(format!(
                "dt = {} exceeds the resolution floor 0.1/omega = {}",
                self.dt,
                0.1 / self.omega
            )));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end must be > 0");
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1");
        }
        if !self.q0.is_finite() || !self.p0.is_finite() {
            return bad("q0, p0 must be finite");
        }
        MuParams::new(self.params.c)?;
        Ok(())
    }

    pub fn initial_state(&self) -> Result<OscState> {
        OscState::new(self.omega, self.q0, self.p0)
    }

    fn step_count(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    fn time_at(&self, k: usize) -> f64 {
        (k as f64 * self.dt).min(self.t_end)
    }
}

fn derivative(omega: f64, m: &[f64], y: &[f64], out: &mut [f64]) {
    out[0] = y[1];
    out[1] = -omega * omega * y[0];
    structure_rhs_into(2, &y[2..], m, &mut out[2..]);
}

/// One classical RK4 step of the coupled 10-component system. `M` must be
/// the dim-2 arity-1 generator; the oscillator frequency is taken from the
/// state.
pub fn rk4_step(state: &SystemState, m: &Operation, dt: f64) -> Result<SystemState> {
    if state.mu.dim() != 2 || state.mu.arity() != 2 || m.dim() != 2 || m.arity() != 1 {
        return Err(Error::Dimension("rk4_step integrates dim-2 (mu, M) only".into()));
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Validation("dt must be > 0".into()));
    }
    let omega = state.osc.omega;
    let mc = m.coeffs();
    let mut y = [0.0; 10];
    y[0] = state.osc.q;
    y[1] = state.osc.p;
    y[2..].copy_from_slice(state.mu.coeffs());

    let mut k1 = [0.0; 10];
    let mut k2 = [0.0; 10];
    let mut k3 = [0.0; 10];
    let mut k4 = [0.0; 10];
    let mut tmp = [0.0; 10];
    derivative(omega, mc, &y, &mut k1);
    for n in 0..10 {
        tmp[n] = y[n] + 0.5 * dt * k1[n];
    }
    derivative(omega, mc, &tmp, &mut k2);
    for n in 0..10 {
        tmp[n] = y[n] + 0.5 * dt * k2[n];
    }
    derivative(omega, mc, &tmp, &mut k3);
    for n in 0..10 {
        tmp[n] = y[n] + dt * k3[n];
    }
    derivative(omega, mc, &tmp, &mut k4);
    for n in 0..10 {
        y[n] += dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }

    let t = state.t + dt;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t });
    }
    let osc = OscState::new(omega, y[0], y[1])?;
    // Re-anchor on the new phase each step so rounding does not accumulate.
    let theta = if hamiltonian(&osc) > 0.0 {
        state.theta + wrap_angle(osc.phase() - state.theta)
    } else {
        state.theta
    };
    Ok(SystemState {
        t,
        osc,
        mu: Operation::new(2, 2, y[2..].to_vec())?,
        theta,
    })
}

/// Closed-form solution `q(t) = q₀cos ωt + (p₀/ω)sin ωt`, `p(t) = p₀cos ωt − ωq₀ sin ωt`.
pub fn analytic_state(config: &IntegratorConfig, t: f64) -> Result<OscState> {
    let w = config.omega;
    let (sin, cos) = (w * t).sin_cos();
    OscState::new(
        w,
        config.q0 * cos + config.p0 / w * sin,
        config.p0 * cos - w * config.q0 * sin,
    )
}

/// Unwrapped phase of the closed-form flow: `θ₀ + ωt`.
pub fn analytic_theta(config: &IntegratorConfig, t: f64) -> Result<f64> {
    Ok(config.initial_state()?.phase() + config.omega * t)
}

/// The family evaluated along the closed-form flow on the continuous branch.
///
/// `theta_unwrapped` selects the sheet: it must lie within 1e−6 of
/// `θ₀ + ωt + 2πk` for some integer `k`, and the value is then computed at
/// exactly that angle.
pub fn analytic_mu(config: &IntegratorConfig, t: f64, theta_unwrapped: f64) -> Result<Operation> {
    let s = analytic_state(config, t)?;
    if hamiltonian(&s) == 0.0 {
        return Err(Error::DegenerateState { q: s.q, p: s.p });
    }
    let exact = analytic_theta(config, t)?;
    let turns = ((theta_unwrapped - exact) / std::f64::consts::TAU).round();
    let theta = exact + turns * std::f64::consts::TAU;
    if (theta - theta_unwrapped).abs() > 1e-6 {
        return Err(Error::Validation(format!(
            "angle {theta_unwrapped} does not match the flow phase {exact} modulo 2π"
        )));
    }
    // The closed-form state and θ₀ + ωt agree only to rounding, so re-anchor
    // onto the state's own phase on the selected sheet.
    let anchored = theta + wrap_angle(s.phase() - theta);
    let aux = aux_functions_continuous(&s, anchored)?;
    Ok(mu_family_from_aux(&aux, &config.params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub h: f64,
    pub theta: f64,
    pub mu_numeric: [f64; 8],
    pub mu_analytic: [f64; 8],
    pub err_mu_max: f64,
    pub g_values: [f64; 4],
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub config: IntegratorConfig,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,q,p,H,mu_111,mu_112,mu_121,mu_122,mu_211,mu_212,mu_221,mu_222,amu_111,amu_112,amu_121,amu_122,amu_211,amu_212,amu_221,amu_222,err_mu_max,energy_drift";

/// Shortest round-trip decimal (at most 17 significant digits).
pub fn format_number(x: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(x).to_string()
}

impl Trajectory {
    pub fn max_err_mu(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.err_mu_max))
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.energy_drift))
    }

    pub fn max_g(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.g_values)
            .fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            let fields = [r.t, r.q, r.p, r.h]
                .into_iter()
                .chain(r.mu_numeric)
                .chain(r.mu_analytic)
                .chain([r.err_mu_max, r.energy_drift]);
            for (n, v) in fields.enumerate() {
                if n > 0 {
                    line.push(',');
                }
                line.push_str(&format_number(v));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn make_record(
    config: &IntegratorConfig,
    state: &SystemState,
    h0: f64,
) -> Result<StepRecord> {
    let h = hamiltonian(&state.osc);
    let analytic = analytic_mu(config, state.t, state.theta)?;
    let mut mu_numeric = [0.0; 8];
    mu_numeric.copy_from_slice(state.mu.coeffs());
    let mut mu_analytic = [0.0; 8];
    mu_analytic.copy_from_slice(analytic.coeffs());
    let err_mu_max = mu_numeric
        .iter()
        .zip(&mu_analytic)
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    let aux = aux_functions_continuous(&state.osc, state.theta)?;
    let (dq, dp) = hamilton_rhs(&state.osc);
    let g = g_functions_with(&aux, &state.osc, dq, dp)?;
    Ok(StepRecord {
        t: state.t,
        q: state.osc.q,
        p: state.osc.p,
        h,
        theta: state.theta,
        mu_numeric,
        mu_analytic,
        err_mu_max,
        g_values: g.to_array(),
        energy_drift: (h - h0).abs() / h0.max(1e-300),
    })
}

/// Integrates from the family's value at the initial state (principal branch)
/// to `t_end` and compares against the closed form at every recorded step.
pub fn evolve(config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    let s0 = config.initial_state()?;
    let h0 = hamiltonian(&s0);
    if h0 == 0.0 {
        return Err(Error::DegenerateState { q: s0.q, p: s0.p });
    }
    let m = lax_m(config.omega);
    let mut state = SystemState {
        t: 0.0,
        osc: s0,
        mu: mu_family(&s0, &config.params),
        theta: aux_functions_principal(&s0).theta,
    };
    let steps = config.step_count();
    let mut records = vec![make_record(config, &state, h0)?];
    for k in 1..=steps {
        let t_next = config.time_at(k);
        let mut next = rk4_step(&state, &m, t_next - state.t)?;
        next.t = t_next;
        state = next;
        if k % config.record_every == 0 || k == steps {
            records.push(make_record(config, &state, h0)?);
        }
    }
    Ok(Trajectory {
        records,
        config: config.clone(),
    })
}

/// Max-abs coefficient of `p ∂μ/∂q − ω²q ∂μ/∂p − (M•μ − μ•M)` for the family
/// on the principal branch, with central differences of step `h`. The
/// stencil is evaluated in double-double arithmetic so the O(h²) truncation
/// error is not buried under rounding noise.
///
/// Refuses stencils whose points come within `10h/√(2H)` radians of the
/// branch cut `θ = π`.
pub fn pde_residual(s: &OscState, params: &MuParams, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Validation("finite-difference step must be > 0".into()));
    }
    let energy = hamiltonian(s);
    if energy == 0.0 {
        return Err(Error::DegenerateState { q: s.q, p: s.p });
    }
    let required = 10.0 * h / s.radius();
    for (dq, dp) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
        let probe = OscState::new(s.omega, s.q + dq, s.p + dp)?;
        let margin = std::f64::consts::PI - probe.phase().abs();
        if margin <= required {
            return Err(Error::BranchCut { margin, required });
        }
    }
    Ok(pde_residual_extended(s, params, h))
}

/// Principal-branch family value in double-double arithmetic.
///
/// Uses the algebraic solution `A₊² = √(2H) + p`, `A₋² = √(2H) − p`,
/// `A₊A₋ = ωq`, taking the square root on whichever side avoids
/// cancellation. Only field operations and `sqrt` are involved, so every
/// step keeps about 106 bits.
pub(crate) fn mu_family_extended(omega: f64, q: f64, p: f64, params: &MuParams) -> [TwoFloat; 8] {
    let (q, p) = (TwoFloat::from(q), TwoFloat::from(p));
    let wq = TwoFloat::from(omega) * q;
    let radius = (p * p + wq * wq).sqrt();
    let (a_plus, a_minus) = if p.hi() >= 0.0 {
        let a_plus = (radius + p).sqrt();
        (a_plus, dd_div(wq, a_plus))
    } else {
        let root = (radius - p).sqrt();
        let a_minus = if wq.hi() < 0.0 { -root } else { root };
        (dd_div(wq, a_minus), a_minus)
    };
    let (ap2, am2) = (a_plus * a_plus, a_minus * a_minus);
    let half = TwoFloat::from(0.5);
    let three = TwoFloat::from(3.0);
    let d_plus = half * a_plus * (ap2 - three * am2);
    let d_minus = half * a_minus * (three * ap2 - am2);
    mu_family_coeffs(a_plus, a_minus, d_plus, d_minus, params)
}

/// Double-double quotient by three-term long division. twofloat's own
/// `TwoFloat / TwoFloat` forms `1 − b·t` without a fused multiply-add and is
/// only accurate to about one double ulp.
fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

fn pde_residual_extended(s: &OscState, params: &MuParams, h: f64) -> f64 {
    let family = |q: f64, p: f64| mu_family_extended(s.omega, q, p, params);
    let (q_hi, q_lo) = (s.q + h, s.q - h);
    let (p_hi, p_lo) = (s.p + h, s.p - h);
    // Differences of doubles are exact in double-double.
    let q_span = TwoFloat::from(q_hi) - TwoFloat::from(q_lo);
    let p_span = TwoFloat::from(p_hi) - TwoFloat::from(p_lo);
    let (mu_qh, mu_ql) = (family(q_hi, s.p), family(q_lo, s.p));
    let (mu_ph, mu_pl) = (family(s.q, p_hi), family(s.q, p_lo));
    let centre = family(s.q, s.p);
    let m = lax_m(s.omega).coeffs().iter().map(|&x| TwoFloat::from(x)).collect::<Vec<_>>();
    let mut bracket = [TwoFloat::from(0.0); 8];
    structure_rhs_into(2, &centre, &m, &mut bracket);

    let p = TwoFloat::from(s.p);
    let w2q = TwoFloat::from(s.omega) * TwoFloat::from(s.omega) * TwoFloat::from(s.q);
    (0..8)
        .map(|n| {
            let dq = dd_div(mu_qh[n] - mu_ql[n], q_span);
            let dp = dd_div(mu_ph[n] - mu_pl[n], p_span);
            f64::from(p * dq - w2q * dp - bracket[n]).abs()
        })
        .fold(0.0, f64::max)
}

/// The same residual for an arbitrary field `μ(q, p)`.
pub fn pde_residual_of<F>(s: &OscState, h: f64, field: F) -> Result<f64>
where
    F: Fn(&OscState) -> Result<Operation>,
{
    let at = |q: f64, p: f64| -> Result<Operation> { field(&OscState::new(s.omega, q, p)?) };
    // Use the representable step actually taken in each direction.
    let (q_hi, q_lo) = (s.q + h, s.q - h);
    let (p_hi, p_lo) = (s.p + h, s.p - h);
    let dmu_dq = Operation::linear_combine(1.0, &at(q_hi, s.p)?, -1.0, &at(q_lo, s.p)?)?
        .scale(1.0 / (q_hi - q_lo));
    let dmu_dp = Operation::linear_combine(1.0, &at(s.q, p_hi)?, -1.0, &at(s.q, p_lo)?)?
        .scale(1.0 / (p_hi - p_lo));
    let transport = Operation::linear_combine(s.p, &dmu_dq, -s.omega * s.omega * s.q, &dmu_dp)?;
    let bracket = operadic_lax_rhs(&field(s)?, &lax_m(s.omega))?;
    Ok(Operation::linear_combine(1.0, &transport, -1.0, &bracket)?.max_abs())
}

fn max_state_error(config: &IntegratorConfig, dt: f64) -> Result<f64> {
    let cfg = IntegratorConfig {
        dt,
        ..config.clone()
    };
    cfg.validate()?;
    let s0 = cfg.initial_state()?;
    let m = lax_m(cfg.omega);
    let mut state = SystemState {
        t: 0.0,
        osc: s0,
        mu: mu_family(&s0, &cfg.params),
        theta: s0.phase(),
    };
    let mut worst: f64 = 0.0;
    for k in 1..=cfg.step_count() {
        let t_next = cfg.time_at(k);
        state = rk4_step(&state, &m, t_next - state.t)?;
        state.t = t_next;
        let exact = analytic_state(&cfg, t_next)?;
        worst = worst
            .max((state.osc.q - exact.q).abs())
            .max((state.osc.p - exact.p).abs());
    }
    Ok(worst)
}

/// Ratio `e(dt)/e(dt/2)` of the maximum phase-space error against the
/// closed form; about 16 for a fourth-order method.
pub fn rk4_order_check(config: &IntegratorConfig) -> Result<f64> {
    let coarse = max_state_error(config, config.dt)?;
    let fine = max_state_error(config, 0.5 * config.dt)?;
    Ok(coarse / fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn st(omega: f64, q: f64, p: f64) -> OscState {
        OscState::new(omega, q, p).unwrap()
    }

    fn only_111() -> Operation {
        Operation::from_fn(2, 2, |idx| if idx == [0, 0, 0] { 1.0 } else { 0.0 }).unwrap()
    }

    fn config(omega: f64, q0: f64, p0: f64, params: MuParams) -> IntegratorConfig {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 20.0,
            omega,
            q0,
            p0,
            params,
            record_every: 1,
        }
    }

    #[test]
    fn matrix_lax_examples() {
        let (l, m) = crate::oscillator::lax_matrices(&st(1.0, 1.0, 0.0));
        assert_eq!(matrix_lax_rhs(&l, &m).unwrap().coeffs(), &[-1.0, 0.0, 0.0, 1.0]);
        assert_eq!(matrix_lax_rhs(&m, &m).unwrap().max_abs(), 0.0);
        let (l, m) = crate::oscillator::lax_matrices(&st(1.0, 0.0, 1.0));
        assert_eq!(matrix_lax_rhs(&l, &m).unwrap().coeffs(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn classical_lax_equation_is_hamilton() {
        // L̇ = [[ṗ, ωq̇], [ωq̇, −ṗ]] must equal [M, L]
        let s = st(1.7, 0.4, -1.3);
        let (l, m) = crate::oscillator::lax_matrices(&s);
        let (dq, dp) = hamilton_rhs(&s);
        let w = s.omega;
        let expected = Operation::new(2, 1, vec![dp, w * dq, w * dq, -dp]).unwrap();
        assert!(matrix_lax_rhs(&l, &m).unwrap().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn lax_rhs_basis_example() {
        let m = lax_m(1.0);
        let mut expected = [0.0; 8];
        expected[1] = 0.5;
        expected[2] = 0.5;
        expected[4] = 0.5;
        assert_eq!(operadic_lax_rhs(&only_111(), &m).unwrap().coeffs(), &expected);
        assert_eq!(structure_constant_rhs(&only_111(), &m).unwrap().coeffs(), &expected);
        let zero = Operation::zeros(2, 2).unwrap();
        assert_eq!(operadic_lax_rhs(&zero, &m).unwrap().max_abs(), 0.0);
        assert_eq!(structure_constant_rhs(&zero, &m).unwrap().max_abs(), 0.0);
        assert!(matches!(operadic_lax_rhs(&m, &m), Err(Error::Arity(_))));
    }

    #[test]
    fn index_formula_matches_written_system() {
        // The eight component equations for M = (ω/2)[[0,−1],[1,0]], written out.
        let mut rng = SeededRng::new(99);
        let w = 1.3;
        let mu = rng.operation(2, 2);
        let c = |i: usize, j: usize, k: usize| mu.get(&[i - 1, j - 1, k - 1]);
        let h = w / 2.0;
        let expected = [
            -h * (c(2, 1, 1) + c(1, 1, 2) + c(1, 2, 1)),
            -h * (c(2, 1, 2) - c(1, 1, 1) + c(1, 2, 2)),
            -h * (c(2, 2, 1) - c(1, 1, 1) + c(1, 2, 2)),
            -h * (c(2, 2, 2) - c(1, 1, 2) - c(1, 2, 1)),
            h * (c(1, 1, 1) - c(2, 1, 2) - c(2, 2, 1)),
            h * (c(1, 1, 2) + c(2, 1, 1) - c(2, 2, 2)),
            h * (c(1, 2, 1) + c(2, 1, 1) - c(2, 2, 2)),
            h * (c(1, 2, 2) + c(2, 1, 2) + c(2, 2, 1)),
        ];
        let rhs = structure_constant_rhs(&mu, &lax_m(w)).unwrap();
        for (x, y) in rhs.coeffs().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn rk4_matches_closed_form_one_step() {
        let s = SystemState {
            t: 0.0,
            osc: st(1.0, 0.0, 1.0),
            mu: Operation::zeros(2, 2).unwrap(),
            theta: 0.0,
        };
        let z: f64 = 0.1;
        let next = rk4_step(&s, &lax_m(1.0), z).unwrap();
        // One RK4 step applies the degree-4 Taylor polynomial of exp(zJ).
        assert!((next.osc.q - (z - z.powi(3) / 6.0)).abs() < 1e-15);
        assert!((next.osc.p - (1.0 - z * z / 2.0 + z.powi(4) / 24.0)).abs() < 1e-15);
        // Truncation vs the closed form: z^5/120 in q, z^6/720 in p.
        assert!((next.osc.q - z.sin()).abs() < 1e-7);
        assert!((next.osc.p - z.cos()).abs() < 1e-8);
        assert_eq!(next.mu.max_abs(), 0.0);
        assert!((next.theta - 0.1).abs() < 1e-7);
    }

    #[test]
    fn rk4_at_the_origin_rotates_mu_only() {
        let s = SystemState {
            t: 0.0,
            osc: st(1.0, 0.0, 0.0),
            mu: only_111(),
            theta: 0.0,
        };
        let next = rk4_step(&s, &lax_m(1.0), 0.01).unwrap();
        assert_eq!((next.osc.q, next.osc.p), (0.0, 0.0));
        assert_ne!(next.mu, s.mu);
        assert_eq!(next.theta, 0.0);
    }

    #[test]
    fn analytic_state_examples() {
        let cfg = config(1.0, 0.0, 1.0, MuParams::zero());
        let s = analytic_state(&cfg, 0.0).unwrap();
        assert_eq!((s.q, s.p), (0.0, 1.0));
        let s = analytic_state(&cfg, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((s.q - 1.0).abs() < 1e-15 && s.p.abs() < 1e-15);
        let cfg = config(1.7, 0.3, -0.8, MuParams::zero());
        let h0 = hamiltonian(&analytic_state(&cfg, 0.0).unwrap());
        let h10 = hamiltonian(&analytic_state(&cfg, 10.0).unwrap());
        assert!((h10 - h0).abs() / h0 < 1e-13);
    }

    #[test]
    fn analytic_mu_periodicity() {
        let cfg = config(1.0, 0.3, 0.8, MuParams::new([0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8]).unwrap());
        let th0 = analytic_theta(&cfg, 0.0).unwrap();
        let at0 = analytic_mu(&cfg, 0.0, th0).unwrap();
        assert!(at0.max_abs_diff(&mu_family(&cfg.initial_state().unwrap(), &cfg.params)).unwrap() < 1e-15);

        let period = std::f64::consts::TAU;
        let one = analytic_mu(&cfg, period, analytic_theta(&cfg, period).unwrap()).unwrap();
        assert!(one.max_abs_diff(&at0.scale(-1.0)).unwrap() < 1e-12);
        let two = analytic_mu(&cfg, 2.0 * period, analytic_theta(&cfg, 2.0 * period).unwrap()).unwrap();
        assert!(two.max_abs_diff(&at0).unwrap() < 1e-12);

        assert!(analytic_mu(&cfg, 0.0, th0 + 0.5).is_err());
    }

    #[test]
    fn evolve_zero_params_stays_zero() {
        let mut cfg = config(1.0, 0.0, 1.0, MuParams::zero());
        cfg.t_end = 1.0;
        let traj = evolve(&cfg).unwrap();
        assert_eq!(traj.max_err_mu(), 0.0);
        assert!(traj.records.iter().all(|r| r.mu_numeric == [0.0; 8]));
    }

    #[test]
    fn evolve_records_and_rejects() {
        let mut cfg = config(1.0, 0.0, 1.0, MuParams::unit(5));
        cfg.t_end = 0.0105;
        cfg.record_every = 4;
        let traj = evolve(&cfg).unwrap();
        let times: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
        assert_eq!(times.len(), 4);
        assert_eq!(times[0], 0.0);
        assert!((times[1] - 0.004).abs() < 1e-15 && (times[2] - 0.008).abs() < 1e-15);
        assert_eq!(*times.last().unwrap(), 0.0105);

        let cfg0 = config(1.0, 0.0, 0.0, MuParams::unit(5));
        assert!(matches!(evolve(&cfg0), Err(Error::DegenerateState { .. })));
        let mut coarse = config(1.0, 0.0, 1.0, MuParams::unit(5));
        coarse.dt = 0.2;
        assert!(matches!(evolve(&coarse), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let mut cfg = config(1.0, 0.0, 1.0, MuParams::unit(5));
        cfg.t_end = 0.003;
        let traj = evolve(&cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRAJECTORY_CSV_HEADER);
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 4);
        for row in rows {
            let fields: Vec<f64> = row.split(',').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields.len(), 22);
        }
    }

    #[test]
    fn pde_examples() {
        let s = st(1.0, 0.0, 2.0);
        assert!(pde_residual(&s, &MuParams::unit(5), 1e-5).unwrap() <= 1e-8);
        assert_eq!(pde_residual(&s, &MuParams::zero(), 1e-5).unwrap(), 0.0);
        let r = pde_residual_of(&st(1.0, 0.3, -0.4), 1e-5, |_| Ok(only_111())).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn extended_family_matches_half_angle_family() {
        let mut rng = SeededRng::new(21);
        for _ in 0..200 {
            let s = st(rng.uniform(0.5, 2.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
            let params = MuParams::new(std::array::from_fn(|_| rng.symmetric())).unwrap();
            let fast = mu_family(&s, &params);
            let extended = mu_family_extended(s.omega, s.q, s.p, &params);
            for (x, y) in fast.coeffs().iter().zip(extended) {
                assert!((x - f64::from(y)).abs() < 1e-13, "{s:?}");
            }
        }
    }

    #[test]
    fn dd_div_is_double_double_accurate() {
        let one = TwoFloat::from(1.0);
        let three = TwoFloat::from(3.0);
        let third = dd_div(one, three);
        assert!(f64::from(third * three - one).abs() < 1e-31);
        let x = TwoFloat::new_add(0.7, 1e-18);
        let y = TwoFloat::from(2.0).sqrt();
        assert!(f64::from(dd_div(x, y) * y - x).abs() < 1e-31);
    }

    #[test]
    fn extended_pde_residual_is_second_order() {
        let s = st(1.0, 0.7, -0.4);
        let params = MuParams::unit(7);
        let coarse = pde_residual(&s, &params, 1e-4).unwrap();
        let fine = pde_residual(&s, &params, 5e-5).unwrap();
        assert!((coarse / fine - 4.0).abs() < 0.05, "{coarse:e} {fine:e}");
    }

    #[test]
    fn pde_refuses_the_cut() {
        let s = st(1.0, 1e-7, -1.0);
        assert!(matches!(
            pde_residual(&s, &MuParams::unit(1), 1e-5),
            Err(Error::BranchCut { .. })
        ));
    }

    #[test]
    fn format_number_is_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            let text = format_number(x);
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let digits = text.chars().take_while(|c| *c != 'e').filter(|c| c.is_ascii_digit()).count();
            assert!(digits <= 18, "{text}");
        }
    }
}
