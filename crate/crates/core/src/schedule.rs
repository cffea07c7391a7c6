//! Multi-channel control timelines: error-function-smoothed square pulses,
//! pulse-area quadrature and seeded 1/f noise overlays.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use statrs::function::erf::erf;

use crate::{Error, Result};

/// Steepness of the error-function pulse edges: erf(ERF_STEEPNESS / 2) of
/// the transition completes within the rise/decay window.
pub const ERF_STEEPNESS: f64 = 4.0;

/// What a control channel actuates on one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelKind {
    /// Ground-state energy of one dot.
    Energy(u8),
    /// Tunnelling rate between two dots (unordered pair, stored d < d').
    Tunnel(u8, u8),
}

/// A control channel: unit index (1 or 2) plus what it actuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel {
    pub unit: u8,
    pub kind: ChannelKind,
}

impl Channel {
    pub fn energy(unit: u8, dot: u8) -> Self {
        debug_assert!((1..=2).contains(&unit) && (1..=3).contains(&dot));
        Self {
            unit,
            kind: ChannelKind::Energy(dot),
        }
    }

    pub fn tunnel(unit: u8, d: u8, dp: u8) -> Self {
        debug_assert!((1..=2).contains(&unit) && d != dp);
        let (lo, hi) = if d < dp { (d, dp) } else { (dp, d) };
        Self {
            unit,
            kind: ChannelKind::Tunnel(lo, hi),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ChannelKind::Energy(d) => write!(f, "eps{}_{}", d, self.unit),
            ChannelKind::Tunnel(d, dp) => write!(f, "mu{}{}_{}", d, dp, self.unit),
        }
    }
}

/// Square pulse of amplitude `amplitude` and nominal length `tau`
/// (including rise and decay), with error-function edges of width `tau_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub channel: Channel,
    pub t0: f64,
    pub tau: f64,
    pub amplitude: f64,
    pub tau_s: f64,
}

impl Pulse {
    pub fn new(channel: Channel, t0: f64, tau: f64, amplitude: f64, tau_s: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::config(format!("pulse length must be positive: {tau}")));
        }
        if !(0.0..=tau).contains(&tau_s) {
            return Err(Error::config(format!(
                "rise/decay time {tau_s} must satisfy 0 <= tau_s <= tau = {tau}"
            )));
        }
        Ok(Self {
            channel,
            t0,
            tau,
            amplitude,
            tau_s,
        })
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.tau
    }

    /// Control value at time `t`. With `tau_s = 0` this is the ideal square
    /// pulse; otherwise the rise occupies `[t0, t0 + tau_s]` and the decay
    /// `[t0 + tau - tau_s, t0 + tau]`.
    pub fn value(&self, t: f64) -> f64 {
        if self.tau_s == 0.0 {
            return if t > self.t0 && t < self.end() {
                self.amplitude
            } else {
                0.0
            };
        }
        let b = ERF_STEEPNESS / self.tau_s;
        let rise = erf(b * (t - self.t0 - self.tau_s / 2.0));
        let fall = erf(b * (t - self.t0 - self.tau + self.tau_s / 2.0));
        0.5 * self.amplitude * (rise - fall)
    }

    /// Times where the pulse switches between its smooth pieces, for use as
    /// quadrature breakpoints.
    fn breakpoints(&self) -> [f64; 4] {
        [
            self.t0,
            self.t0 + self.tau_s,
            self.end() - self.tau_s,
            self.end(),
        ]
    }
}

/// Bound, spectrally shaped control noise: flat below `omega0`, 1/omega
/// above, zero mean, rescaled to peak exactly at `eta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub eta0: f64,
    pub omega0: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(eta0: f64, omega0: f64, seed: u64) -> Result<Self> {
        if !(eta0 >= 0.0) {
            return Err(Error::config(format!("eta0 must be >= 0: {eta0}")));
        }
        if !(omega0 > 0.0) {
            return Err(Error::config(format!("omega0 must be > 0: {omega0}")));
        }
        Ok(Self { eta0, omega0, seed })
    }
}

/// A frozen noise realization, sampled on a uniform grid and linearly
/// interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl NoiseTrace {
    pub fn value(&self, t: f64) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        let x = (t / self.dt).clamp(0.0, (n - 1) as f64);
        let i = x.floor() as usize;
        if i + 1 >= n {
            return self.samples[n - 1];
        }
        let f = x - i as f64;
        self.samples[i] * (1.0 - f) + self.samples[i + 1] * f
    }
}

/// Synthesizes a 1/f-with-cut-off noise trace by inverse Fourier transform:
/// zero DC component, spectral magnitudes proportional to
/// `1 / max(omega, omega0)`, uniformly random phases from the seeded
/// generator, rescaled so that `max |eta(t)| = eta0` exactly.
pub fn generate_noise(spec: &NoiseSpec, duration: f64, dt: f64) -> Result<NoiseTrace> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("non-positive dt = {dt}")));
    }
    if !(duration > dt) {
        return Err(Error::domain(format!(
            "duration {duration} must exceed dt {dt}"
        )));
    }
    let n = (duration / dt).ceil() as usize + 1;
    if spec.eta0 == 0.0 {
        return Ok(NoiseTrace {
            dt,
            samples: vec![0.0; n],
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=(n - 1) / 2 {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / (n as f64 * dt);
        let mag = 1.0 / omega.max(spec.omega0);
        let phase: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let c = Complex64::from_polar(mag, phase);
        spectrum[k] = c;
        spectrum[n - k] = c.conj();
    }
    // an even-length grid has an unpaired Nyquist bin; leave it at zero

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut spectrum);

    let mut samples: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let peak = samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if peak > 0.0 {
        let scale = spec.eta0 / peak;
        for x in &mut samples {
            *x *= scale;
        }
    }
    Ok(NoiseTrace { dt, samples })
}

/// A multi-channel piecewise control trajectory. Overlapping pulses on one
/// channel sum; noise overlays multiply the clean value by `1 + eta(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlTimeline {
    pulses: Vec<Pulse>,
    total_duration: f64,
    overlays: BTreeMap<Channel, NoiseTrace>,
}

impl ControlTimeline {
    pub fn new(pulses: Vec<Pulse>, total_duration: f64) -> Result<Self> {
        let max_end = pulses.iter().map(Pulse::end).fold(0.0f64, f64::max);
        if total_duration < max_end - 1e-12 {
            return Err(Error::config(format!(
                "total duration {total_duration} shorter than last pulse end {max_end}"
            )));
        }
        Ok(Self {
            pulses,
            total_duration,
            overlays: BTreeMap::new(),
        })
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    /// Channels carrying at least one pulse, in canonical order.
    pub fn channels(&self) -> Vec<Channel> {
        let mut chs: Vec<Channel> = self.pulses.iter().map(|p| p.channel).collect();
        chs.sort();
        chs.dedup();
        chs
    }

    /// Attaches one independent noise realization per active channel, with
    /// per-channel seeds derived from `master_seed` and the channel's index
    /// in canonical order.
    pub fn apply_noise(&mut self, eta0: f64, omega0: f64, master_seed: u64, dt: f64) -> Result<()> {
        for (idx, ch) in self.channels().into_iter().enumerate() {
            let spec = NoiseSpec::new(eta0, omega0, derive_seed(master_seed, idx as u64))?;
            let trace = generate_noise(&spec, self.total_duration, dt)?;
            self.overlays.insert(ch, trace);
        }
        Ok(())
    }

    /// Value of `ch` at time `t`: sum of all pulse samples, then noise.
    /// A channel with no pulses reads zero.
    pub fn channel_value(&self, ch: Channel, t: f64) -> f64 {
        let mut v = 0.0;
        for p in &self.pulses {
            if p.channel == ch {
                v += p.value(t);
            }
        }
        if let Some(trace) = self.overlays.get(&ch) {
            v *= 1.0 + trace.value(t);
        }
        v
    }

    /// Integral of `channel_value` over `[t_start, t_end]` by composite
    /// Simpson quadrature split at pulse breakpoints.
    pub fn pulse_area(&self, ch: Channel, t_start: f64, t_end: f64) -> f64 {
        assert!(t_start < t_end, "pulse_area: empty interval");
        let mut cuts = vec![t_start, t_end];
        for p in &self.pulses {
            if p.channel != ch {
                continue;
            }
            for b in p.breakpoints() {
                if b > t_start && b < t_end {
                    cuts.push(b);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut area = 0.0;
        for w in cuts.windows(2) {
            area += simpson(|t| self.channel_value(ch, t), w[0], w[1], 400);
        }
        area
    }

    /// Writes `(t, channel_id, value)` rows for all active channels on a
    /// uniform grid of spacing `dt`.
    pub fn export_csv<W: Write>(&self, writer: W, dt: f64) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "channel_id", "value"])?;
        let channels = self.channels();
        let steps = (self.total_duration / dt).round() as usize;
        for i in 0..=steps {
            let t = (i as f64 * dt).min(self.total_duration);
            for &ch in &channels {
                out.write_record([
                    format!("{t}"),
                    ch.to_string(),
                    format!("{}", self.channel_value(ch, t)),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    // pieces are smooth on the open interval; ideal square pulses are
    // discontinuous exactly at the cut points, so sample just inside
    let nudge = 1e-9 * (b - a);
    let mut sum = f(a + nudge) + f(b - nudge);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Deterministic seed derivation (SplitMix64 finalizer over base and index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
