//! The harmonic oscillator `H = ½(p² + ω²q²)` and everything needed to state
//! and check its 2-dimensional binary operadic Lax representation.
//!
//! The auxiliary functions satisfy
//!
//! ```text
//! A₊² + A₋² = 2√(2H),  A₊² − A₋² = 2p,  A₊A₋ = ωq,
//! D₊ = ½A₊(A₊² − 3A₋²),  D₋ = ½A₋(3A₊² − A₋²).
//! ```
//!
//! With `θ = atan2(ωq, p)` these are solved by the half-angle formulas
//! `A₊ = √2 (2H)^{1/4} cos(θ/2)`, `A₋ = √2 (2H)^{1/4} sin(θ/2)`. The pair is only
//! determined up to an overall sign: the principal branch takes `θ ∈ (−π, π]`
//! (so `A₊ ≥ 0`) and jumps across `θ = π`, while trajectories carry an
//! unwrapped `θ` and use the continuous branch.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::multilinear::Operation;

/// One phase-space point together with the oscillator frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscState {
    pub omega: f64,
    pub q: f64,
    pub p: f64,
}

impl OscState {
    pub fn new(omega: f64, q: f64, p: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Validation(format!("omega must be finite and > 0, got {omega}")));
        }
        if !q.is_finite() || !p.is_finite() {
            return Err(Error::Validation(format!("q, p must be finite, got ({q}, {p})")));
        }
        Ok(Self { omega, q, p })
    }

    /// `√(2H) = |(p, ωq)|`.
    pub fn radius(&self) -> f64 {
        self.p.hypot(self.omega * self.q)
    }

    /// Principal phase angle `atan2(ωq, p) ∈ (−π, π]`, 0 at the origin.
    pub fn phase(&self) -> f64 {
        let wq = self.omega * self.q;
        if wq == 0.0 && self.p == 0.0 {
            return 0.0;
        }
        let theta = (wq + 0.0).atan2(self.p);
        if theta <= -PI {
            PI
        } else {
            theta
        }
    }

    fn require_energy(&self) -> Result<()> {
        if hamiltonian(self) > 0.0 {
            Ok(())
        } else {
            Err(Error::DegenerateState { q: self.q, p: self.p })
        }
    }
}

pub fn hamiltonian(s: &OscState) -> f64 {
    0.5 * (s.p * s.p + s.omega * s.omega * s.q * s.q)
}

/// Hamilton's equations: `(q̇, ṗ) = (p, −ω²q)`.
pub fn hamilton_rhs(s: &OscState) -> (f64, f64) {
    (s.p, -s.omega * s.omega * s.q)
}

/// `M = (ω/2)[[0, −1], [1, 0]]`.
pub fn lax_m(omega: f64) -> Operation {
    let h = 0.5 * omega;
    Operation::new(2, 1, vec![0.0, -h, h, 0.0]).expect("finite entries")
}

/// Classical Lax pair `L = [[p, ωq], [ωq, −p]]`, `M = (ω/2)[[0, −1], [1, 0]]`.
pub fn lax_matrices(s: &OscState) -> (Operation, Operation) {
    let wq = s.omega * s.q;
    let l = Operation::new(2, 1, vec![s.p, wq, wq, -s.p]).expect("finite entries");
    (l, lax_m(s.omega))
}

/// `A±`, `D±` at one phase point, with the angle that selected the branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxFunctions {
    pub a_plus: f64,
    pub a_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub theta: f64,
}

impl AuxFunctions {
    fn from_angle(s: &OscState, theta: f64) -> Self {
        let amplitude = (2.0 * s.radius()).sqrt();
        let (sin, cos) = (0.5 * theta).sin_cos();
        Self::from_a(amplitude * cos, amplitude * sin, theta)
    }

    fn from_a(a_plus: f64, a_minus: f64, theta: f64) -> Self {
        let (ap2, am2) = (a_plus * a_plus, a_minus * a_minus);
        Self {
            a_plus,
            a_minus,
            d_plus: 0.5 * a_plus * (ap2 - 3.0 * am2),
            d_minus: 0.5 * a_minus * (3.0 * ap2 - am2),
            theta,
        }
    }

    /// Residuals of the five defining relations, in order:
    /// `A₊²+A₋²−2√(2H)`, `A₊²−A₋²−2p`, `A₊A₋−ωq`, and the two `D±` definitions.
    pub fn relation_residuals(&self, s: &OscState) -> [f64; 5] {
        let (ap, am) = (self.a_plus, self.a_minus);
        [
            ap * ap + am * am - 2.0 * s.radius(),
            ap * ap - am * am - 2.0 * s.p,
            ap * am - s.omega * s.q,
            self.d_plus - 0.5 * ap * (ap * ap - 3.0 * am * am),
            self.d_minus - 0.5 * am * (3.0 * ap * ap - am * am),
        ]
    }

    pub fn negated(&self) -> Self {
        Self {
            a_plus: -self.a_plus,
            a_minus: -self.a_minus,
            d_plus: -self.d_plus,
            d_minus: -self.d_minus,
            theta: self.theta + TAU,
        }
    }
}

/// Principal branch: `θ = atan2(ωq, p) ∈ (−π, π]`, hence `A₊ ≥ 0`.
pub fn aux_functions_principal(s: &OscState) -> AuxFunctions {
    if hamiltonian(s) == 0.0 {
        return AuxFunctions::from_a(0.0, 0.0, 0.0);
    }
    AuxFunctions::from_angle(s, s.phase())
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Continuous branch selected by an unwrapped angle; `A₊` may be negative.
/// The angle must agree with `atan2(ωq, p)` modulo 2π to within 1e−9.
pub fn aux_functions_continuous(s: &OscState, theta_unwrapped: f64) -> Result<AuxFunctions> {
    if !theta_unwrapped.is_finite() {
        return Err(Error::Validation("unwrapped angle is not finite".into()));
    }
    if hamiltonian(s) == 0.0 {
        return Ok(AuxFunctions::from_a(0.0, 0.0, theta_unwrapped));
    }
    let mismatch = wrap_angle(theta_unwrapped - s.phase()).abs();
    if mismatch > 1e-9 {
        return Err(Error::Validation(format!(
            "angle {theta_unwrapped} is {mismatch:.3e} rad away from the phase of (q, p)"
        )));
    }
    Ok(AuxFunctions::from_angle(s, theta_unwrapped))
}

/// Time derivatives of the auxiliary functions for a candidate `(q̇, ṗ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxRates {
    pub a_plus: f64,
    pub a_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

/// Solves `A₊Ȧ₊ − A₋Ȧ₋ = ṗ`, `A₋Ȧ₊ + A₊Ȧ₋ = ωq̇` by Cramer's rule (determinant
/// `A₊² + A₋² = 2√(2H)`), then differentiates `D±` by the chain rule.
pub fn aux_rates(aux: &AuxFunctions, s: &OscState, dq: f64, dp: f64) -> Result<AuxRates> {
    s.require_energy()?;
    let (ap, am) = (aux.a_plus, aux.a_minus);
    let det = ap * ap + am * am;
    let wdq = s.omega * dq;
    let rate_plus = (dp * ap + am * wdq) / det;
    let rate_minus = (ap * wdq - am * dp) / det;
    let d_plus =
        0.5 * rate_plus * (ap * ap - 3.0 * am * am) + ap * (ap * rate_plus - 3.0 * am * rate_minus);
    let d_minus = 0.5 * rate_minus * (3.0 * ap * ap - am * am)
        + am * (3.0 * ap * rate_plus - am * rate_minus);
    Ok(AuxRates {
        a_plus: rate_plus,
        a_minus: rate_minus,
        d_plus,
        d_minus,
    })
}

/// First differentiated relation, `A₊Ȧ₊ + A₋Ȧ₋ − (pṗ + ω²qq̇)/√(2H)`, which
/// the Cramer solution of the other two must reproduce.
pub fn energy_relation_residual(
    aux: &AuxFunctions,
    rates: &AuxRates,
    s: &OscState,
    dq: f64,
    dp: f64,
) -> f64 {
    aux.a_plus * rates.a_plus + aux.a_minus * rates.a_minus
        - (s.p * dp + s.omega * s.omega * s.q * dq) / s.radius()
}

/// `G±^{ω/2} = Ȧ± ± (ω/2)A∓` and `G±^{3ω/2} = Ḋ± ± (3ω/2)D∓`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GFunctions {
    pub g_plus_w2: f64,
    pub g_minus_w2: f64,
    pub g_plus_3w2: f64,
    pub g_minus_3w2: f64,
}

impl GFunctions {
    pub fn to_array(&self) -> [f64; 4] {
        [self.g_plus_w2, self.g_minus_w2, self.g_plus_3w2, self.g_minus_3w2]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// G-functions on the principal branch.
pub fn g_functions(s: &OscState, dq: f64, dp: f64) -> Result<GFunctions> {
    g_functions_with(&aux_functions_principal(s), s, dq, dp)
}

/// G-functions on the branch fixed by `aux`. Switching branch flips all four signs.
pub fn g_functions_with(aux: &AuxFunctions, s: &OscState, dq: f64, dp: f64) -> Result<GFunctions> {
    let rates = aux_rates(aux, s, dq, dp)?;
    let half = 0.5 * s.omega;
    let three_half = 1.5 * s.omega;
    Ok(GFunctions {
        g_plus_w2: rates.a_plus + half * aux.a_minus,
        g_minus_w2: rates.a_minus - half * aux.a_plus,
        g_plus_3w2: rates.d_plus + three_half * aux.d_minus,
        g_minus_3w2: rates.d_minus - three_half * aux.d_plus,
    })
}

/// The eight real parameters `C₁..C₈` of the solution family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuParams {
    pub c: [f64; 8],
}

impl MuParams {
    pub fn new(c: [f64; 8]) -> Result<Self> {
        if let Some(pos) = c.iter().position(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("C{} is not finite", pos + 1)));
        }
        Ok(Self { c })
    }

    /// Unit vector with `C_nu = 1` (one-based).
    pub fn unit(nu: usize) -> Self {
        let mut c = [0.0; 8];
        c[nu - 1] = 1.0;
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: [0.0; 8] }
    }

    pub fn combine(a: f64, x: &MuParams, b: f64, y: &MuParams) -> MuParams {
        let mut c = [0.0; 8];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = a * x.c[k] + b * y.c[k];
        }
        MuParams { c }
    }
}

/// Scalar types the family can be evaluated in (`f64`, double-double).
pub trait Real:
    Copy + From<f64> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
}

impl<T> Real for T where
    T: Copy + From<f64> + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + Neg<Output = T>
{
}

/// The family's structure constants as linear forms in `(A₊, A₋, D₊, D₋)`,
/// in flat order `μ¹₁₁, μ¹₁₂, μ¹₂₁, μ¹₂₂, μ²₁₁, μ²₁₂, μ²₂₁, μ²₂₂`.
pub fn mu_family_coeffs<T: Real>(ap: T, am: T, dp: T, dm: T, params: &MuParams) -> [T; 8] {
    let [c1, c2, c3, c4, c5, c6, c7, c8] = params.c.map(T::from);
    [
        c5 * am + c6 * ap + c7 * dm + c8 * dp,
        c1 * ap + c2 * am - c7 * dp + c8 * dm,
        -c1 * ap - c2 * am - c3 * ap - c4 * am - c5 * ap + c6 * am - c7 * dp + c8 * dm,
        -c3 * am + c4 * ap - c7 * dm - c8 * dp,
        c3 * ap + c4 * am - c7 * dp + c8 * dm,
        c1 * am - c2 * ap + c3 * am - c4 * ap + c5 * am + c6 * ap - c7 * dm - c8 * dp,
        -c1 * am + c2 * ap - c7 * dm - c8 * dp,
        -c5 * ap + c6 * am + c7 * dp - c8 * dm,
    ]
}

/// The binary operation `μ(q, p)` of the family on the principal branch.
pub fn mu_family(s: &OscState, params: &MuParams) -> Operation {
    mu_family_from_aux(&aux_functions_principal(s), params)
}

pub fn mu_family_from_aux(aux: &AuxFunctions, params: &MuParams) -> Operation {
    let c = mu_family_coeffs(aux.a_plus, aux.a_minus, aux.d_plus, aux.d_minus, params);
    Operation::new(2, 2, c.to_vec()).expect("finite coefficients")
}

/// Time derivative of the family along a motion with the given rates.
pub fn mu_family_rate(rates: &AuxRates, params: &MuParams) -> Operation {
    let c = mu_family_coeffs(rates.a_plus, rates.a_minus, rates.d_plus, rates.d_minus, params);
    Operation::new(2, 2, c.to_vec()).expect("finite coefficients")
}

// Entry codes for Γ: 0 is a structural zero, ±1 = ±G₊^{ω/2},
// ±2 = ±G₋^{ω/2}, ±3 = ±G₊^{3ω/2}, ±4 = ±G₋^{3ω/2}.
const GAMMA_PATTERN: [[i8; 8]; 8] = [
    [0, 1, -1, 0, 0, 2, -2, 0],
    [0, 2, -2, 0, 0, -1, 1, 0],
    [0, 0, -1, -2, 1, 2, 0, 0],
    [0, 0, -2, 1, 2, -1, 0, 0],
    [2, 0, -1, 0, 0, 2, 0, -1],
    [1, 0, 2, 0, 0, 1, 0, 2],
    [4, -3, -3, -4, -3, -4, -4, 3],
    [3, 4, 4, -3, 4, -3, -3, -4],
];

/// The 8×8 matrix Γ; row β pairs with C_β, column α is a structure constant in flat order.
///
/// Row `r` (zero-based) collects the coefficients of `C_{r+1}`; column `c`
/// is the structure-constant equation at flat index `c`
/// (`μ¹₁₁, μ¹₁₂, …, μ²₂₂`). With that pairing the Lax residual
/// `μ̇ − [M, μ]` of equation `c` is `Σ_r C_{r+1} Γ[r][c]`; see
/// [`GammaMatrix::lax_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMatrix {
    pub entries: [[f64; 8]; 8],
}

impl GammaMatrix {
    pub fn from_g(g: &GFunctions) -> Self {
        let values = g.to_array();
        let mut entries = [[0.0; 8]; 8];
        for (row, codes) in GAMMA_PATTERN.iter().enumerate() {
            for (col, &code) in codes.iter().enumerate() {
                if code != 0 {
                    let v = values[code.unsigned_abs() as usize - 1];
                    entries[row][col] = if code > 0 { v } else { -v };
                }
            }
        }
        Self { entries }
    }

    /// Entries that vanish identically.
    pub fn structural_zeros() -> [[bool; 8]; 8] {
        GAMMA_PATTERN.map(|row| row.map(|code| code == 0))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `Σ_r C_{r+1} Γ[r][c]` for each equation `c`.
    pub fn lax_residual(&self, params: &MuParams) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (col, slot) in out.iter_mut().enumerate() {
            *slot = (0..8).map(|row| params.c[row] * self.entries[row][col]).sum();
        }
        out
    }
}

/// Γ on the principal branch for candidate derivatives `(q̇, ṗ)`.
pub fn gamma_matrix(s: &OscState, dq: f64, dp: f64) -> Result<GammaMatrix> {
    Ok(GammaMatrix::from_g(&g_functions(s, dq, dp)?))
}

/// Residuals of the Cramer-step identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerResiduals {
    /// `Δ − 2H` with `Δ = p² + ω²q²`.
    pub delta: f64,
    /// `(D₋p − D₊ωq) − 2A₋H`.
    pub minus: f64,
    /// `(D₊p + D₋ωq) − 2A₊H`.
    pub plus: f64,
}

pub fn cramer_residuals(s: &OscState) -> CramerResiduals {
    let aux = aux_functions_principal(s);
    let h = hamiltonian(s);
    let wq = s.omega * s.q;
    let delta = s.p * s.p + wq * wq;
    CramerResiduals {
        delta: delta - 2.0 * h,
        minus: (aux.d_minus * s.p - aux.d_plus * wq) - 2.0 * aux.a_minus * h,
        plus: (aux.d_plus * s.p + aux.d_minus * wq) - 2.0 * aux.a_plus * h,
    }
}

/// Recovers `(Ȧ₊, Ȧ₋)` from `pȦ₊ − ωqȦ₋ = −(ω/2)D₋`, `ωqȦ₊ + pȦ₋ = (ω/2)D₊`
/// via `Δ`, `Δ_{Ȧ₊}`, `Δ_{Ȧ₋}`.
pub fn cramer_rates(aux: &AuxFunctions, s: &OscState) -> Result<(f64, f64)> {
    s.require_energy()?;
    let wq = s.omega * s.q;
    let half = 0.5 * s.omega;
    let delta = s.p * s.p + wq * wq;
    let delta_plus = -half * (aux.d_minus * s.p - aux.d_plus * wq);
    let delta_minus = half * (aux.d_plus * s.p + aux.d_minus * wq);
    Ok((delta_plus / delta, delta_minus / delta))
}
