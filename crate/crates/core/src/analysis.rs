//! Gate quality and phase diagnostics: average gate fidelity with leakage,
//! Bloch-vector trajectories of the two auxiliary-coupled subsystems, swept
//! solid angles, and the closed-form geometric-phase predictions.

use std::io::Write;

use serde::Serialize;

use crate::propagate::{project_qubit_subspace, PropagationResult, Unitary9};
use crate::{basis_ket, Error, Matrix4, Result, Vector9, QUBIT_SUBSPACE};

/// Average gate fidelity of a projected evolution against a 4x4 target,
/// together with the mean end-of-gate leakage out of the qubit subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub error: f64,
    pub leakage: f64,
}

/// Haar-average fidelity for a (possibly leaky) unitary evolution:
/// `F = [Tr(M M^dag) + |Tr M|^2] / 20` with `M = target^dag P(U)`, where `P`
/// restricts to the qubit subspace. Invariant under a global phase on `U`.
pub fn average_gate_fidelity(u_full: &Unitary9, target: &Matrix4) -> FidelityReport {
    let m = target.adjoint() * project_qubit_subspace(u_full);
    let mm = (m * m.adjoint()).trace().re;
    let tr = m.trace();
    let fidelity = (mm + tr.norm_sqr()) / 20.0;
    FidelityReport {
        fidelity,
        error: 1.0 - fidelity,
        leakage: (1.0 - mm / 4.0).max(0.0),
    }
}

/// The two auxiliary-coupled two-level subsystems followed during step 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subsystem {
    /// `{|21>, |31>}`: qubit 1 parked on dot 2, with its auxiliary state.
    S1,
    /// `{|23>, |33>}`: same, conditioned on qubit 2 occupying its second dot.
    S2,
}

impl Subsystem {
    /// Nine-dimensional amplitudes making up the pair `(up, down)`.
    pub fn indices(self) -> (usize, usize) {
        match self {
            Subsystem::S1 => (3, 6),
            Subsystem::S2 => (5, 8),
        }
    }

    /// Basis state whose trajectory exposes this subsystem.
    pub fn initial_state(self) -> Vector9 {
        match self {
            Subsystem::S1 => basis_ket(2, 1),
            Subsystem::S2 => basis_ket(2, 3),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subsystem::S1 => "S1",
            Subsystem::S2 => "S2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSample {
    pub t: f64,
    pub s: [f64; 3],
    /// Norm of the two retained amplitudes before renormalization.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub subsystem: Subsystem,
    pub samples: Vec<BlochSample>,
}

/// Extracts the Bloch path of one subsystem from a tracked propagation.
///
/// The propagation must track the subsystem's defining initial state
/// (`|21>` for S1, `|23>` for S2). At each sample the two amplitudes are
/// renormalized before conversion, and the discarded norm is recorded.
pub fn bloch_trajectory(result: &PropagationResult, subsystem: Subsystem) -> Result<BlochTrajectory> {
    let want = subsystem.initial_state();
    let state_idx = result
        .initial_states
        .iter()
        .position(|s| (s - want).norm() < 1e-9)
        .ok_or_else(|| {
            Error::domain(format!(
                "propagation does not track the {} initial state",
                subsystem.label()
            ))
        })?;
    let (i_up, i_down) = subsystem.indices();
    let mut samples = Vec::with_capacity(result.trajectory.len());
    for sample in &result.trajectory {
        let psi = &sample.states[state_idx];
        let (c0, c1) = (psi[i_up], psi[i_down]);
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if norm < 1e-6 {
            return Err(Error::DegenerateExtraction {
                t: sample.t,
                norm,
            });
        }
        let (c0, c1) = (c0 / norm, c1 / norm);
        let cross = c0.conj() * c1;
        samples.push(BlochSample {
            t: sample.t,
            s: [
                2.0 * cross.re,
                2.0 * cross.im,
                c0.norm_sqr() - c1.norm_sqr(),
            ],
            norm,
        });
    }
    Ok(BlochTrajectory {
        subsystem,
        samples,
    })
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Total solid angle swept by a closed Bloch loop, in steradians.
///
/// Consecutive samples are fanned into spherical triangles against the loop
/// centroid and their signed excesses accumulated, so multiple revolutions
/// count their full area. The area is measured about the loop's own winding
/// axis, so simple precession loops always report the positive cap area per
/// revolution regardless of which hemisphere they enclose.
pub fn solid_angle(traj: &BlochTrajectory) -> Result<f64> {
    let pts: Vec<[f64; 3]> = traj.samples.iter().map(|s| s.s).collect();
    if pts.len() < 3 {
        return Err(Error::domain("trajectory too short for an area"));
    }
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let gap = ((first[0] - last[0]).powi(2)
        + (first[1] - last[1]).powi(2)
        + (first[2] - last[2]).powi(2))
    .sqrt();
    if gap >= 0.05 {
        return Err(Error::NonClosedLoop { gap });
    }

    // Reference point: the loop's winding axis (direction of the vector
    // area), so that each revolution contributes its full cap area with the
    // traversal orientation. Falls back to the first sample for degenerate
    // (zero-winding) paths.
    let mut axis = [0.0; 3];
    for i in 0..pts.len() {
        let x = cross(pts[i], pts[(i + 1) % pts.len()]);
        axis[0] += x[0];
        axis[1] += x[1];
        axis[2] += x[2];
    }
    let a_norm = dot(axis, axis).sqrt();
    let r = if a_norm > 1e-6 {
        [axis[0] / a_norm, axis[1] / a_norm, axis[2] / a_norm]
    } else {
        first
    };

    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let num = dot(r, cross(a, b));
        let den = 1.0 + dot(r, a) + dot(a, b) + dot(b, r);
        total += 2.0 * num.atan2(den);
    }
    // Close the fan back to the first sample.
    let num = dot(r, cross(last, first));
    let den = 1.0 + dot(r, last) + dot(last, first) + dot(first, r);
    total += 2.0 * num.atan2(den);
    Ok(total)
}

/// Closed-form conditional phases and solid angles of the two branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedPhases {
    pub phase1: f64,
    pub phase2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

/// `phase_{1,2} = [2n -/+ (2k-1)] pi/2` and `Omega_{1,2} = 2 pi n
/// (1 -/+ (2k-1)/(2n))`; each branch satisfies phase = Omega/2.
pub fn predicted_phases(n: u64, k: u64) -> Result<PredictedPhases> {
    if n == 0 || k == 0 || 2 * n <= 2 * k - 1 {
        return Err(Error::domain(format!(
            "need positive n, k with 2n > 2k - 1, got n = {n}, k = {k}"
        )));
    }
    let (nf, m) = (n as f64, (2 * k - 1) as f64);
    let half_pi = std::f64::consts::FRAC_PI_2;
    Ok(PredictedPhases {
        phase1: (2.0 * nf - m) * half_pi,
        phase2: (2.0 * nf + m) * half_pi,
        omega1: (2.0 * nf - m) * std::f64::consts::PI,
        omega2: (2.0 * nf + m) * std::f64::consts::PI,
    })
}

/// Writes a Bloch trajectory as CSV rows `(t, s_x, s_y, s_z, norm, subsystem)`.
pub fn export_bloch_csv<W: Write>(traj: &BlochTrajectory, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["t", "s_x", "s_y", "s_z", "norm", "subsystem"])?;
    for s in &traj.samples {
        out.write_record([
            format!("{:.6}", s.t),
            format!("{:.12}", s.s[0]),
            format!("{:.12}", s.s[1]),
            format!("{:.12}", s.s[2]),
            format!("{:.12}", s.norm),
            traj.subsystem.label().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Embeds a 4x4 unitary on the qubit subspace into the 9-level space, acting
/// as the identity elsewhere. Convenience for tests and exact references.
pub fn embed_qubit_unitary(m: &Matrix4) -> Result<Unitary9> {
    let mut full = crate::Matrix9::identity();
    for (bi, &i) in QUBIT_SUBSPACE.iter().enumerate() {
        for (bj, &j) in QUBIT_SUBSPACE.iter().enumerate() {
            full[(i, j)] = m[(bi, bj)];
        }
    }
    Unitary9::new(full)
}
