//! Adaptive integration of quadratic ODE systems `Phi' = A(Phi, Phi) + f(s, Phi)`.
//!
//! The stepper is the Dormand–Prince 5(4) pair with a PI step-size
//! controller. Blow-up shows up as a norm exceeding
//! [`IntegratorOptions::blowup_threshold`] or as step collapse accompanied by
//! norm growth; step collapse without growth is reported separately.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::algebra::QuadraticHamiltonian;
use crate::error::{check_dim, Error, Result};
use crate::system::AsymptoticSystem;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_H_MIN: f64 = 1e-12;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;
pub const DEFAULT_MAX_SAMPLES: usize = 4096;

/// Norm growth (relative to the data) above which a step collapse counts as
/// blow-up rather than stiffness.
const COLLAPSE_GROWTH: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub blowup_threshold: f64,
    pub max_steps: usize,
    /// Soft cap on stored samples; older samples are thinned beyond it.
    pub max_samples: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            h_min: DEFAULT_H_MIN,
            h_max: f64::INFINITY,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            max_steps: 20_000_000,
            max_samples: DEFAULT_MAX_SAMPLES,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 1e-14 && self.tol < 1e-3) {
            return Err(Error::Domain(format!(
                "tolerance must lie in (1e-14, 1e-3), got {}",
                self.tol
            )));
        }
        if !(self.h_min > 0.0) || !(self.h_max > self.h_min) {
            return Err(Error::Domain("need 0 < h_min < h_max".into()));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::Domain("blow-up threshold must be positive".into()));
        }
        if self.max_samples < 8 {
            return Err(Error::Domain("max_samples must be at least 8".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Completed { s_max: f64 },
    Blowup { s_estimate: f64 },
    StepUnderflow { s_last: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub s: f64,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Supremum of `max_A |Phi_A|` over every accepted step.
    pub max_abs: f64,
    /// Supremum of the Hamiltonian norm over every accepted step, when the
    /// system carries a Hamiltonian.
    pub max_metric: Option<f64>,
    pub initial_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: Status,
    pub stats: TrajectoryStats,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.phi.len())
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories always hold the initial sample")
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self.status, Status::Blowup { .. })
    }
}

#[inline]
pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[inline]
fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    Zero,
    RandomPiecewise,
    AdversarialAligned,
}

/// Norm in which the forcing envelope is enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingNorm {
    Max,
    Metric(QuadraticHamiltonian),
}

impl ForcingNorm {
    pub fn of(&self, v: &[f64]) -> f64 {
        match self {
            ForcingNorm::Max => max_norm(v),
            ForcingNorm::Metric(h) => h.norm(v),
        }
    }
}

/// Perturbation `f(s, Phi)` with `|f| <= C eps exp(-delta s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub kind: ForcingKind,
    pub c: f64,
    pub eps: f64,
    pub delta: f64,
    pub segment_length: f64,
    pub seed: u64,
    pub norm: ForcingNorm,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl Forcing {
    pub fn zero() -> Self {
        Self {
            kind: ForcingKind::Zero,
            c: 0.0,
            eps: 0.0,
            delta: 1.0,
            segment_length: 1.0,
            seed: 0,
            norm: ForcingNorm::Max,
        }
    }

    pub fn random_piecewise(c: f64, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        make_forcing(ForcingKind::RandomPiecewise, c, eps, delta, seed)
    }

    pub fn adversarial_aligned(c: f64, eps: f64, delta: f64) -> Result<Self> {
        make_forcing(ForcingKind::AdversarialAligned, c, eps, delta, 0)
    }

    pub fn with_segment_length(mut self, len: f64) -> Result<Self> {
        positive("segment length", len)?;
        self.segment_length = len;
        Ok(self)
    }

    pub fn with_norm(mut self, norm: ForcingNorm) -> Self {
        self.norm = norm;
        self
    }

    /// `C eps exp(-delta s)`.
    #[inline]
    pub fn envelope(&self, s: f64) -> f64 {
        match self.kind {
            ForcingKind::Zero => 0.0,
            _ => self.c * self.eps * (-self.delta * s).exp(),
        }
    }

    /// Total forcing budget `C eps / delta`.
    pub fn budget(&self) -> f64 {
        match self.kind {
            ForcingKind::Zero => 0.0,
            _ => self.c * self.eps / self.delta,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == ForcingKind::Zero
    }

    fn segment_index(&self, s: f64) -> u64 {
        (s.max(0.0) / self.segment_length).floor() as u64
    }

    /// Next discontinuity of the forcing strictly after `s`.
    fn next_breakpoint(&self, s: f64) -> Option<f64> {
        match self.kind {
            ForcingKind::RandomPiecewise => {
                let k = self.segment_index(s) + 1;
                let b = k as f64 * self.segment_length;
                Some(if b > s { b } else { b + self.segment_length })
            }
            _ => None,
        }
    }

    /// Unit direction (in the declared norm) used on segment `k`.
    fn segment_direction(&self, k: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(k)));
        loop {
            for o in out.iter_mut() {
                *o = StandardNormal.sample(&mut rng);
            }
            let n = self.norm.of(out);
            if n > 1e-12 {
                out.iter_mut().for_each(|o| *o /= n);
                return;
            }
        }
    }

    pub fn evaluate(&self, s: f64, phi: &[f64], out: &mut [f64]) {
        self.evaluate_on_segment(s, s, phi, out);
    }

    /// Like [`Forcing::evaluate`], but picks the piecewise direction from the
    /// segment containing `s_ref`. Steps never straddle a breakpoint, so
    /// passing the step midpoint keeps every stage on one segment.
    fn evaluate_on_segment(&self, s: f64, s_ref: f64, phi: &[f64], out: &mut [f64]) {
        match self.kind {
            ForcingKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            ForcingKind::RandomPiecewise => {
                self.segment_direction(self.segment_index(s_ref), out);
                let amp = self.envelope(s);
                out.iter_mut().for_each(|o| *o *= amp);
            }
            ForcingKind::AdversarialAligned => {
                let size = match &self.norm {
                    ForcingNorm::Max => euclidean_norm(phi),
                    ForcingNorm::Metric(h) => h.norm(phi),
                };
                if size == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return;
                }
                let scale = self.envelope(s) / size;
                for (o, p) in out.iter_mut().zip(phi) {
                    *o = scale * p;
                }
            }
        }
    }
}

/// Builds a forcing of the given kind in the max-norm; attach a Hamiltonian
/// norm with [`Forcing::with_norm`].
pub fn make_forcing(kind: ForcingKind, c: f64, eps: f64, delta: f64, seed: u64) -> Result<Forcing> {
    if kind == ForcingKind::Zero {
        return Ok(Forcing::zero());
    }
    positive("C", c)?;
    positive("eps", eps)?;
    positive("delta", delta)?;
    Ok(Forcing {
        kind,
        c,
        eps,
        delta,
        segment_length: 1.0,
        seed,
        norm: ForcingNorm::Max,
    })
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller constants (Hairer & Wanner's DOPRI5 defaults).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Rhs<'a> {
    sys: &'a AsymptoticSystem,
    forcing: &'a Forcing,
    buf: Vec<f64>,
    evals: usize,
}

impl Rhs<'_> {
    fn eval(&mut self, s: f64, s_ref: f64, y: &[f64], out: &mut [f64]) {
        self.evals += 1;
        self.sys.rhs_into(y, out);
        if !self.forcing.is_zero() {
            self.forcing.evaluate_on_segment(s, s_ref, y, &mut self.buf);
            for (o, f) in out.iter_mut().zip(&self.buf) {
                *o += f;
            }
        }
    }
}

enum Sampling<'a> {
    Adaptive { cap: usize },
    At(&'a [f64]),
}

struct Recorder {
    samples: Vec<Sample>,
    cap: usize,
}

impl Recorder {
    fn push(&mut self, s: f64, phi: &[f64]) {
        self.samples.push(Sample { s, phi: phi.to_vec() });
        if self.samples.len() > 2 * self.cap {
            // Thin all but the most recent quarter by half.
            let keep_tail = self.cap / 4;
            let split = self.samples.len() - keep_tail;
            let tail = self.samples.split_off(split);
            let head = std::mem::take(&mut self.samples);
            self.samples = head.into_iter().step_by(2).collect();
            self.samples.extend(tail);
        }
    }
}

/// Integrates with default options and the given tolerance.
pub fn integrate(
    sys: &AsymptoticSystem,
    phi0: &[f64],
    s_max: f64,
    forcing: &Forcing,
    tol: f64,
) -> Result<Trajectory> {
    integrate_with(sys, phi0, s_max, forcing, &IntegratorOptions::with_tol(tol))
}

pub fn integrate_with(
    sys: &AsymptoticSystem,
    phi0: &[f64],
    s_max: f64,
    forcing: &Forcing,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::Domain(format!("s_max must be positive and finite, got {s_max}")));
    }
    solve(sys, phi0, 0.0, s_max, forcing, opts, Sampling::Adaptive { cap: opts.max_samples })
}

/// Integrates from `points[0]` and records the solution exactly at each of
/// the (strictly increasing) `points`.
pub fn integrate_at(
    sys: &AsymptoticSystem,
    phi0: &[f64],
    points: &[f64],
    forcing: &Forcing,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if points.len() < 2 {
        return Err(Error::Insufficient("need at least two output points".into()));
    }
    if points.windows(2).any(|w| !(w[1] > w[0])) || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain("output points must be finite and strictly increasing".into()));
    }
    solve(
        sys,
        phi0,
        points[0],
        points[points.len() - 1],
        forcing,
        opts,
        Sampling::At(&points[1..]),
    )
}

fn solve(
    sys: &AsymptoticSystem,
    phi0: &[f64],
    s0: f64,
    s_end: f64,
    forcing: &Forcing,
    opts: &IntegratorOptions,
    sampling: Sampling<'_>,
) -> Result<Trajectory> {
    opts.validate()?;
    check_dim(sys.dim(), phi0.len())?;
    if phi0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial data".into()));
    }

    let n = sys.dim();
    let metric = sys.hamiltonian().map(|(_, h)| h);
    let mut rhs = Rhs {
        sys,
        forcing,
        buf: vec![0.0; n],
        evals: 0,
    };

    let mut y = phi0.to_vec();
    let mut s = s0;
    let norm0 = max_norm(&y);
    let mut stats = TrajectoryStats {
        max_abs: norm0,
        max_metric: metric.map(|h| h.norm(&y)),
        initial_metric: metric.map(|h| h.norm(&y)),
        ..Default::default()
    };

    let (mut recorder, outputs) = match sampling {
        Sampling::Adaptive { cap } => (Recorder { samples: Vec::new(), cap }, None),
        Sampling::At(points) => (
            Recorder {
                samples: Vec::with_capacity(points.len() + 1),
                cap: usize::MAX / 4,
            },
            Some(points),
        ),
    };
    recorder.push(s, &y);
    let mut next_output = 0usize;

    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    let mut prev_point = (s, norm0);
    let mut err_old = 1e-4_f64;

    // initial step
    rhs.eval(s, s, &y, &mut k[0]);
    let mut fsal_valid = forcing.next_breakpoint(s).is_none();
    let d0 = norm0;
    let d1 = max_norm(&k[0]);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(opts.h_max).min(s_end - s);

    let mut reject_streak = false;
    let finish = |status: Status, recorder: Recorder, mut stats: TrajectoryStats, evals: usize| {
        stats.rhs_evaluations = evals;
        Trajectory {
            samples: recorder.samples,
            status,
            stats,
        }
    };

    loop {
        if stats.accepted_steps + stats.rejected_steps >= opts.max_steps {
            return Ok(finish(Status::StepUnderflow { s_last: s }, recorder, stats, rhs.evals));
        }

        // Clamp to the end, the next output point and the next forcing breakpoint.
        let mut target = s_end;
        if let Some(points) = outputs {
            if next_output < points.len() {
                target = target.min(points[next_output]);
            }
        }
        if let Some(b) = forcing.next_breakpoint(s) {
            target = target.min(b);
        }
        let mut hit_target = false;
        if s + h >= target || (target - s - h) < 1e-12 * target.abs().max(1.0) {
            h = target - s;
            hit_target = true;
        }
        if !hit_target && (h < opts.h_min || s + h <= s) {
            let norm = max_norm(&y);
            let grown = norm > COLLAPSE_GROWTH * norm0.max(1e-300);
            let status = if grown {
                Status::Blowup {
                    s_estimate: extrapolate_pole(prev_point, (s, norm)),
                }
            } else {
                Status::StepUnderflow { s_last: s }
            };
            if recorder.samples.last().map(|x| x.s) != Some(s) {
                recorder.push(s, &y);
            }
            return Ok(finish(status, recorder, stats, rhs.evals));
        }
        let s_ref = s + 0.5 * h;
        if !fsal_valid {
            rhs.eval(s, s_ref, &y, &mut k[0]);
        }

        // stages
        for i in 0..n {
            stage[i] = y[i] + h * A21 * k[0][i];
        }
        let (k0, rest) = k.split_at_mut(1);
        rhs.eval(s + C2 * h, s_ref, &stage, &mut rest[0]);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k0[0][i] + A32 * rest[0][i]);
        }
        rhs.eval(s + C3 * h, s_ref, &stage, &mut rest[1]);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k0[0][i] + A42 * rest[0][i] + A43 * rest[1][i]);
        }
        rhs.eval(s + C4 * h, s_ref, &stage, &mut rest[2]);
        for i in 0..n {
            stage[i] = y[i]
                + h * (A51 * k0[0][i] + A52 * rest[0][i] + A53 * rest[1][i] + A54 * rest[2][i]);
        }
        rhs.eval(s + C5 * h, s_ref, &stage, &mut rest[3]);
        for i in 0..n {
            stage[i] = y[i]
                + h * (A61 * k0[0][i]
                    + A62 * rest[0][i]
                    + A63 * rest[1][i]
                    + A64 * rest[2][i]
                    + A65 * rest[3][i]);
        }
        let s_next = if hit_target { target } else { s + h };
        rhs.eval(s_next, s_ref, &stage, &mut rest[4]);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k0[0][i]
                    + A73 * rest[1][i]
                    + A74 * rest[2][i]
                    + A75 * rest[3][i]
                    + A76 * rest[4][i]);
        }
        rhs.eval(s_next, s_ref, &y_new, &mut rest[5]);
        for i in 0..n {
            err[i] = h
                * (E1 * k0[0][i]
                    + E3 * rest[1][i]
                    + E4 * rest[2][i]
                    + E5 * rest[3][i]
                    + E6 * rest[4][i]
                    + E7 * rest[5][i]);
        }

        let scale = opts.tol * max_norm(&y).max(max_norm(&y_new)).max(1e-290);
        let err_norm = err.iter().fold(0.0_f64, |m, e| m.max((e / scale).abs()));
        let finite = err_norm.is_finite() && y_new.iter().all(|v| v.is_finite());

        if finite && err_norm <= 1.0 {
            // accept
            stats.accepted_steps += 1;
            s = s_next;
            std::mem::swap(&mut y, &mut y_new);
            let norm = max_norm(&y);
            stats.max_abs = stats.max_abs.max(norm);
            if let Some(h_metric) = metric {
                let m = h_metric.norm(&y);
                stats.max_metric = Some(stats.max_metric.map_or(m, |old| old.max(m)));
            }

            let at_output = match outputs {
                Some(points) => {
                    if next_output < points.len() && hit_target && s == points[next_output] {
                        next_output += 1;
                        true
                    } else {
                        false
                    }
                }
                None => true,
            };
            if at_output {
                recorder.push(s, &y);
            }

            if norm > opts.blowup_threshold {
                let s_est = extrapolate_pole(prev_point, (s, norm));
                if !at_output {
                    recorder.push(s, &y);
                }
                return Ok(finish(Status::Blowup { s_estimate: s_est }, recorder, stats, rhs.evals));
            }
            prev_point = (s, norm);

            if s >= s_end {
                if outputs.is_none() && recorder.samples.last().map(|x| x.s) != Some(s) {
                    recorder.push(s, &y);
                }
                return Ok(finish(Status::Completed { s_max: s_end }, recorder, stats, rhs.evals));
            }

            // FSAL: last stage is f(s_next, y_new) unless a breakpoint was crossed.
            let crossed_break = forcing
                .next_breakpoint(s - 0.5 * h)
                .is_some_and(|b| b <= s);
            if crossed_break {
                fsal_valid = false;
            } else {
                let (first, last) = k.split_at_mut(6);
                first[0].copy_from_slice(&last[0]);
                fsal_valid = true;
            }

            let fac11 = err_norm.max(1e-16).powf(EXPO);
            let mut fac = fac11 / err_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let h_next = h / fac;
            err_old = err_norm.max(1e-4);
            h = if reject_streak { h_next.min(h) } else { h_next };
            h = h.min(opts.h_max);
            reject_streak = false;
        } else {
            stats.rejected_steps += 1;
            fsal_valid = true; // k[0] still holds f(s, y)
            let shrink = if finite {
                (err_norm.powf(EXPO) / SAFETY).min(1.0 / FAC_MIN)
            } else {
                1.0 / FAC_MIN
            };
            h /= shrink.max(1.0 + 1e-3);
            reject_streak = true;
        }
    }
}

/// Secant extrapolation of `1/|Phi|` to zero, never earlier than `last.0`.
fn extrapolate_pole(prev: (f64, f64), last: (f64, f64)) -> f64 {
    let (s0, n0) = prev;
    let (s1, n1) = last;
    if !(n1.is_finite()) || n1 <= 0.0 {
        return s1;
    }
    let (inv0, inv1) = (1.0 / n0.max(1e-300), 1.0 / n1);
    let slope = (inv1 - inv0) / (s1 - s0);
    if s1 > s0 && slope < 0.0 {
        s1 + inv1 / -slope
    } else {
        s1
    }
}

/// Pole location from a least-squares fit of `1/|Phi|` against `s` over the
/// last decade of norm growth. `None` unless the trajectory blew up.
pub fn blowup_time_estimate(traj: &Trajectory) -> Option<f64> {
    let Status::Blowup { s_estimate } = traj.status else {
        return None;
    };
    let last = traj.last();
    let last_norm = max_norm(&last.phi);
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .rev()
        .map(|p| (p.s, max_norm(&p.phi)))
        .take_while(|(_, nrm)| *nrm >= last_norm / 10.0 && *nrm > 0.0)
        .map(|(s, nrm)| (s, 1.0 / nrm))
        .collect();
    if pts.len() < 3 {
        return Some(s_estimate.max(last.s));
    }
    let m = pts.len() as f64;
    let sx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let sy = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - sx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum();
    if sxx == 0.0 {
        return Some(s_estimate.max(last.s));
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Some(s_estimate.max(last.s));
    }
    let root = sx - sy / slope;
    Some(root.max(last.s))
}
