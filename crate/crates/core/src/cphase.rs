//! Gate-level constructs: local single-qubit rotations, the four-step
//! controlled-phase schedule, rise/decay-corrected pulse layouts, the
//! (n, k) parameter solver, and closed-form analytic references.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;

use crate::model::LocalControls;
use crate::schedule::{Channel, ControlTimeline, Pulse};
use crate::{C64, Error, Matrix3, Matrix4, Matrix9, Result};
use crate::propagate::Unitary9;

/// Full parameter set of the four-step controlled-phase gate.
///
/// Step 2 runs for `tau2 = 2 pi (2k - 1)` with tunnelling `mu23_1` on unit 1
/// and a raised second-dot energy of 1/2; steps 1 and 3 swap the unit-2
/// populations with rate `mu23_2` over `tau1 = tau3 = pi / (2 mu23_2)`; step 4
/// applies local phases `ell pi` and `pi` over `tau4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    pub n: u64,
    pub k: u64,
    pub mu23_1: f64,
    pub tau2: f64,
    pub ell: f64,
    pub mu23_2: f64,
    pub tau1: f64,
    pub tau3: f64,
    pub tau4: f64,
    pub tau_s: f64,
    pub corrected: bool,
}

impl GateParams {
    /// Gate parameters for the phase indices `(n, k)` with default step
    /// durations (`mu23_2 = 1`, `tau4 = pi/2`) and ideal square pulses.
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::domain("n and k must be positive"));
        }
        if 2 * n <= 2 * k - 1 {
            return Err(Error::domain(format!(
                "need 2n > 2k - 1, got n = {n}, k = {k}"
            )));
        }
        let u2 = 2.0 * n as f64 / (2 * k - 1) as f64;
        Ok(Self {
            n,
            k,
            mu23_1: 0.25 * (u2 * u2 - 1.0).sqrt(),
            tau2: 2.0 * PI * (2 * k - 1) as f64,
            ell: 0.5 - ((n + k) % 2) as f64,
            mu23_2: 1.0,
            tau1: FRAC_PI_2,
            tau3: FRAC_PI_2,
            tau4: FRAC_PI_2,
            tau_s: 0.0,
            corrected: false,
        })
    }

    /// Sets the step-1/3 swap rate; the swap durations follow as
    /// `tau1 = tau3 = pi / (2 mu23_2)`.
    pub fn with_swap_rate(mut self, mu23_2: f64) -> Result<Self> {
        if !(mu23_2 > 0.0) {
            return Err(Error::domain(format!("mu23_2 must be positive: {mu23_2}")));
        }
        self.mu23_2 = mu23_2;
        self.tau1 = PI / (2.0 * mu23_2);
        self.tau3 = self.tau1;
        Ok(self)
    }

    pub fn with_tau4(mut self, tau4: f64) -> Result<Self> {
        if !(tau4 > 0.0) {
            return Err(Error::domain(format!("tau4 must be positive: {tau4}")));
        }
        self.tau4 = tau4;
        Ok(self)
    }

    /// Sets the pulse rise/decay time and whether the schedule compensates
    /// for it (extended pulse lengths and a recomputed step-4 amplitude).
    pub fn with_smoothing(mut self, tau_s: f64, corrected: bool) -> Result<Self> {
        if !(tau_s >= 0.0) {
            return Err(Error::domain(format!("tau_s must be >= 0: {tau_s}")));
        }
        self.tau_s = tau_s;
        self.corrected = corrected;
        Ok(self)
    }

    /// `u2 = 2n / (2k - 1)`, the dimensionless step-2 precession ratio.
    pub fn u2(&self) -> f64 {
        2.0 * self.n as f64 / (2 * self.k - 1) as f64
    }

    pub fn step_durations(&self) -> [f64; 4] {
        [self.tau1, self.tau2, self.tau3, self.tau4]
    }

    /// Total schedule length; corrected schedules extend each step by tau_s.
    pub fn total_duration(&self) -> f64 {
        let nominal: f64 = self.step_durations().iter().sum();
        if self.corrected {
            nominal + 4.0 * self.tau_s
        } else {
            nominal
        }
    }
}

fn ceil_pos_int(x: f64) -> u64 {
    ((x - 1e-9).ceil().max(1.0)) as u64
}

fn floor_int(x: f64) -> u64 {
    (x + 1e-9).floor() as u64
}

/// Smallest-(n, k) gate parameters compatible with a minimum step duration
/// `tau_min` and/or a maximum tunnelling rate `mu_max`.
///
/// With a `tau_min` constraint the free steps 1, 3 and 4 are also scheduled
/// at `tau_min`; with only `mu_max`, the swap rate is capped at `mu_max`.
pub fn select_gate_params(tau_min: Option<f64>, mu_max: Option<f64>) -> Result<GateParams> {
    if let Some(t) = tau_min {
        if !(t > 0.0) {
            return Err(Error::domain(format!("tau_min must be positive: {t}")));
        }
    }
    if let Some(m) = mu_max {
        if !(m > 0.0) {
            return Err(Error::domain(format!("mu_max must be positive: {m}")));
        }
    }
    let k_from_time = |t: f64| ceil_pos_int(t / (4.0 * PI) + 0.5);
    let (n, k) = match (tau_min, mu_max) {
        (None, None) => (1, 1),
        (Some(t), None) => {
            let k = k_from_time(t);
            (k, k)
        }
        (None, Some(m)) => {
            let u_max = (16.0 * m * m + 1.0).sqrt();
            let k = ceil_pos_int(1.0 / (u_max - 1.0)) / 2 + 1;
            (floor_int((2 * k - 1) as f64 * u_max / 2.0), k)
        }
        (Some(t), Some(m)) => {
            let u_max = (16.0 * m * m + 1.0).sqrt();
            let k_rate = ceil_pos_int(1.0 / (u_max - 1.0)) / 2 + 1;
            let k = k_rate.max(k_from_time(t));
            (floor_int((2 * k - 1) as f64 * u_max / 2.0), k)
        }
    };
    let mut p = GateParams::new(n, k)?;
    let mut swap = p.mu23_2;
    if let Some(t) = tau_min {
        swap = PI / (2.0 * t);
        p = p.with_tau4(t)?;
    }
    if let Some(m) = mu_max {
        swap = swap.min(m);
    }
    if swap != p.mu23_2 {
        p = p.with_swap_rate(swap)?;
    }
    Ok(p)
}

fn ch_swap2() -> Channel {
    Channel::tunnel(2, 2, 3)
}

fn ch_tunnel1() -> Channel {
    Channel::tunnel(1, 2, 3)
}

fn ch_eps2_1() -> Channel {
    Channel::energy(1, 2)
}

fn ch_eps2_2() -> Channel {
    Channel::energy(2, 2)
}

/// Extra phase picked up on the second dot of unit 1 because the raised
/// energy window is wider than the ideal step-2 plateau:
/// `delta_phi = int_{t1}^{t2} eps2_1 dt - tau2 / 2`.
pub fn correction_phase(p: &GateParams) -> Result<f64> {
    if !p.corrected || p.tau_s == 0.0 {
        return Ok(0.0);
    }
    let s = p.tau_s;
    let tau1p = p.tau1 + s;
    let tau2p = p.tau2 + s;
    let window = Pulse::new(ch_eps2_1(), tau1p - s, tau2p + 2.0 * s, 0.5, s)?;
    let (t1, t2) = (window.t0, window.end());
    let tl = ControlTimeline::new(vec![window], t2 + s)?;
    Ok(tl.pulse_area(ch_eps2_1(), t1, t2) - p.tau2 / 2.0)
}

/// Lays out the four-step schedule on the control channels.
///
/// Uncorrected schedules keep the nominal step lengths (rise and decay eat
/// into each plateau); corrected schedules extend every pulse by `tau_s`,
/// open the step-2 energy window `tau_s` before the tunnelling pulse and
/// close it `tau_s` after, and absorb the resulting phase surplus into the
/// step-4 amplitude.
pub fn build_cphase_timeline(p: &GateParams) -> Result<ControlTimeline> {
    for (i, tau) in p.step_durations().iter().enumerate() {
        if p.tau_s > *tau {
            return Err(Error::config(format!(
                "tau_s = {} exceeds the step-{} duration {tau}",
                p.tau_s,
                i + 1
            )));
        }
    }
    let s = p.tau_s;
    if !p.corrected {
        let t2 = p.tau1;
        let t3 = t2 + p.tau2;
        let t4 = t3 + p.tau3;
        let pulses = vec![
            Pulse::new(ch_swap2(), 0.0, p.tau1, p.mu23_2, s)?,
            Pulse::new(ch_eps2_1(), t2, p.tau2, 0.5, s)?,
            Pulse::new(ch_tunnel1(), t2, p.tau2, p.mu23_1, s)?,
            Pulse::new(ch_swap2(), t3, p.tau3, p.mu23_2, s)?,
            Pulse::new(ch_eps2_1(), t4, p.tau4, p.ell * PI / p.tau4, s)?,
            Pulse::new(ch_eps2_2(), t4, p.tau4, PI / p.tau4, s)?,
        ];
        return ControlTimeline::new(pulses, t4 + p.tau4);
    }

    let delta_phi = correction_phase(p)?;
    let (tau1p, tau2p, tau3p, tau4p) = (p.tau1 + s, p.tau2 + s, p.tau3 + s, p.tau4 + s);
    let t2 = tau1p;
    let t3 = t2 + tau2p;
    let t4 = t3 + tau3p;
    let pulses = vec![
        Pulse::new(ch_swap2(), 0.0, tau1p, p.mu23_2, s)?,
        Pulse::new(ch_eps2_1(), t2 - s, tau2p + 2.0 * s, 0.5, s)?,
        Pulse::new(ch_tunnel1(), t2, tau2p, p.mu23_1, s)?,
        Pulse::new(ch_swap2(), t3, tau3p, p.mu23_2, s)?,
        Pulse::new(ch_eps2_1(), t4, tau4p, (p.ell * PI - delta_phi) / p.tau4, s)?,
        Pulse::new(ch_eps2_2(), t4, tau4p, PI / p.tau4, s)?,
    ];
    ControlTimeline::new(pulses, t4 + tau4p)
}

/// Angles of a composed local gate `U2(phi2) U12(alpha) U2(phi1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGateSpec {
    pub phi1: f64,
    pub alpha: f64,
    pub phi2: f64,
}

impl LocalGateSpec {
    pub fn new(phi1: f64, alpha: f64, phi2: f64) -> Result<Self> {
        if ![phi1, alpha, phi2].iter().all(|x| x.is_finite()) {
            return Err(Error::domain("local gate angles must be finite"));
        }
        Ok(Self { phi1, alpha, phi2 })
    }

    pub fn hadamard() -> Self {
        Self {
            phi1: -FRAC_PI_2,
            alpha: FRAC_PI_4,
            phi2: -FRAC_PI_2,
        }
    }
}

/// `diag(1, e^{-i phi}, 1)`: phase on the second dot from a detuning pulse
/// with area `phi`.
pub fn local_phase_unitary(phi: f64) -> Matrix3 {
    let mut m = Matrix3::identity();
    m[(1, 1)] = C64::from_polar(1.0, -phi);
    m
}

/// Rotation between the first two dots from a tunnelling pulse with area
/// `alpha`; the third dot is untouched.
pub fn tunnel_unitary(alpha: f64) -> Matrix3 {
    let (sin, cos) = alpha.sin_cos();
    let mut m = Matrix3::identity();
    m[(0, 0)] = C64::new(cos, 0.0);
    m[(1, 1)] = C64::new(cos, 0.0);
    m[(0, 1)] = C64::new(0.0, -sin);
    m[(1, 0)] = C64::new(0.0, -sin);
    m
}

pub fn compose_local(spec: &LocalGateSpec) -> Matrix3 {
    local_phase_unitary(spec.phi2) * tunnel_unitary(spec.alpha) * local_phase_unitary(spec.phi1)
}

/// Controls and duration that realize a Hadamard in a single step:
/// simultaneous detuning `eps2 - eps1 = -2 mu12` and tunnelling `mu12`,
/// held for `t = pi / (2 sqrt(2) mu12)`.
pub fn one_step_hadamard(mu12: f64) -> Result<(LocalControls, f64)> {
    if !(mu12 > 0.0) {
        return Err(Error::domain(format!("mu12 must be positive: {mu12}")));
    }
    let controls = LocalControls {
        eps: [mu12, -mu12, 0.0],
        mu: [mu12, 0.0, 0.0],
    };
    Ok((controls, PI / (2.0 * 2.0_f64.sqrt() * mu12)))
}

/// The controlled-phase target `diag(1, 1, 1, -1)`.
pub fn target_unitary() -> Matrix4 {
    let mut m = Matrix4::identity();
    m[(3, 3)] = C64::new(-1.0, 0.0);
    m
}

/// Closed-form step-1/3 unitary: `diag(1, -iX, 1, -iX, 1, W)` in the pair
/// blocks `(|d2>, |d3>)`, at the swap time `tau1 = pi / (2 mu)`.
pub fn analytic_swap1(mu: f64) -> Result<Unitary9> {
    if !(mu > 0.0) {
        return Err(Error::domain(format!("mu must be positive: {mu}")));
    }
    let tau1 = PI / (2.0 * mu);
    let u1 = (1.0 + 4.0 * mu * mu).sqrt();
    let half = tau1 * u1 / 2.0;
    let pre = C64::from_polar(1.0, -tau1 / 2.0);
    let w11 = pre * C64::new(half.cos(), half.sin() / u1);
    let w22 = pre * C64::new(half.cos(), -half.sin() / u1);
    let w12 = pre * C64::new(0.0, -2.0 * mu * half.sin() / u1);

    let mut m = Matrix9::zeros();
    let minus_i = C64::new(0.0, -1.0);
    for d in [0, 3, 6] {
        m[(d, d)] = C64::new(1.0, 0.0);
    }
    for (a, b) in [(1, 2), (4, 5)] {
        m[(a, b)] = minus_i;
        m[(b, a)] = minus_i;
    }
    m[(7, 7)] = w11;
    m[(8, 8)] = w22;
    m[(7, 8)] = w12;
    m[(8, 7)] = w12;
    Unitary9::new(m)
}

/// Closed-form diagonal phases accumulated during step 2:
/// `diag(1, 1, 1, a, a, a', a, a, a')` with `a = (-1)^n exp(-i n pi / u2)`
/// and `a' = (-1)^n exp(-3 i n pi / u2)`.
pub fn analytic_step2(n: u64, k: u64) -> Result<Unitary9> {
    let p = GateParams::new(n, k)?;
    let u2 = p.u2();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let a = C64::from_polar(sign, -(n as f64) * PI / u2);
    let a_prime = C64::from_polar(sign, -3.0 * n as f64 * PI / u2);
    let mut m = Matrix9::identity();
    for idx in [3, 4, 6, 7] {
        m[(idx, idx)] = a;
    }
    for idx in [5, 8] {
        m[(idx, idx)] = a_prime;
    }
    Unitary9::new(m)
}

/// Qubit-subspace projection of `U1 U2 U1`: `diag(1, -1, a, -a')`, one local
/// rotation away from the controlled-phase target.
pub fn analytic_composed(n: u64, k: u64) -> Result<Matrix4> {
    let u2 = analytic_step2(n, k)?;
    let m = u2.matrix();
    let (a, a_prime) = (m[(3, 3)], m[(5, 5)]);
    let mut out = Matrix4::identity();
    out[(1, 1)] = C64::new(-1.0, 0.0);
    out[(2, 2)] = a;
    out[(3, 3)] = -a_prime;
    Ok(out)
}

/// One gate-parameter record with rate and duration conversions to physical
/// units (`time_unit_ps` picoseconds per dimensionless time unit).
#[derive(Debug, Clone, Serialize)]
pub struct GateParamsReport {
    pub n: u64,
    pub k: u64,
    pub ell: f64,
    pub corrected: bool,
    pub mu23_1: f64,
    pub mu23_2: f64,
    pub mu23_1_rad_per_s: f64,
    pub mu23_2_rad_per_s: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau4: f64,
    pub tau_s: f64,
    pub total_duration: f64,
    pub tau1_ps: f64,
    pub tau2_ps: f64,
    pub tau3_ps: f64,
    pub tau4_ps: f64,
    pub tau_s_ps: f64,
    pub total_duration_ps: f64,
    pub time_unit_ps: f64,
    pub delta_phi: f64,
}

pub fn gate_report(p: &GateParams, time_unit_ps: f64) -> Result<GateParamsReport> {
    if !(time_unit_ps > 0.0) {
        return Err(Error::domain(format!(
            "time unit must be positive: {time_unit_ps}"
        )));
    }
    let rate = 1.0 / (time_unit_ps * 1e-12);
    let total = p.total_duration();
    Ok(GateParamsReport {
        n: p.n,
        k: p.k,
        ell: p.ell,
        corrected: p.corrected,
        mu23_1: p.mu23_1,
        mu23_2: p.mu23_2,
        mu23_1_rad_per_s: p.mu23_1 * rate,
        mu23_2_rad_per_s: p.mu23_2 * rate,
        tau1: p.tau1,
        tau2: p.tau2,
        tau3: p.tau3,
        tau4: p.tau4,
        tau_s: p.tau_s,
        total_duration: total,
        tau1_ps: p.tau1 * time_unit_ps,
        tau2_ps: p.tau2 * time_unit_ps,
        tau3_ps: p.tau3 * time_unit_ps,
        tau4_ps: p.tau4 * time_unit_ps,
        tau_s_ps: p.tau_s * time_unit_ps,
        total_duration_ps: total * time_unit_ps,
        time_unit_ps,
        delta_phi: correction_phase(p)?,
    })
}
