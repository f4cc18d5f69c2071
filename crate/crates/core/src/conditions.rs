//! Classifiers for asymptotic systems: the classical null condition, the
//! growth taxonomy of unforced flows, a sampled boundedness-and-stability
//! test under decaying forcing, and the analytic bound for Hamiltonian
//! systems.
//!
//! The sampled test can only ever report "no counterexample found"; the
//! analytic certificate is what covers the Hamiltonian family.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{validate_algebra, LieAlgebra, QuadraticHamiltonian};
use crate::error::{Error, Result};
use crate::ode::{
    blowup_time_estimate, integrate_at, integrate_with, make_forcing, max_norm, Forcing,
    ForcingKind, ForcingNorm, IntegratorOptions, Status, Trajectory,
};
use crate::system::{AsymptoticSystem, WaveSystemSpec};

/// Growth classification uses a much larger blow-up threshold than the
/// default so that super-exponential growth can run to the end.
pub const CLASSIFY_BLOWUP_THRESHOLD: f64 = 1e150;
const CLASSIFY_OUTPUT_POINTS: usize = 513;
/// Corners are enumerated exhaustively up to this dimension.
const MAX_VERTEX_DIM: usize = 8;
/// Relative growth of the envelope over the fit window below which a
/// trajectory counts as bounded.
const BOUNDED_GROWTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    ClassicalNull,
    BoundedStable { c_tilde: f64 },
    LinearGrowth { rate: f64 },
    ExponentialGrowth { rate: f64 },
    SuperExponential { rate: f64 },
    Blowup { s_star: f64 },
    /// Bounded but above the stability threshold.
    Unbounded { c_tilde: f64 },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::ClassicalNull => "classical_null",
            Verdict::BoundedStable { .. } => "bounded_stable",
            Verdict::LinearGrowth { .. } => "linear_growth",
            Verdict::ExponentialGrowth { .. } => "exponential_growth",
            Verdict::SuperExponential { .. } => "super_exponential",
            Verdict::Blowup { .. } => "blowup",
            Verdict::Unbounded { .. } => "unbounded",
        }
    }

    /// Whether a batch pipeline should treat this as a failure.
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            Verdict::Blowup { .. } | Verdict::SuperExponential { .. } | Verdict::Unbounded { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    Constant,
    Linear,
    Exponential,
    SuperExponential,
}

/// Least-squares fit of one growth model to an envelope.
///
/// `a`, `b` are the model parameters (`a`, `a + b s`, `exp(a + b s)`,
/// `exp(exp(a + b s))`), `rss` the residual sum of squares in `log E`, and
/// `r_squared` the coefficient of determination in the model's own
/// linearising transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: GrowthModel,
    pub a: f64,
    pub b: f64,
    pub rss: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub id: usize,
    pub data: Vec<f64>,
    pub forcing: ForcingKind,
    pub status: Status,
    pub sup_abs: f64,
    pub sup_metric: Option<f64>,
    pub initial_metric: Option<f64>,
    pub s_star: Option<f64>,
    /// `sup |y|_H <= |y(0)|_H + C eps / delta + 10 tol`, when certified.
    pub within_certificate: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub eps: f64,
    pub s_max: f64,
    /// `sup` over trials of `sup_s max_A |Phi_A| / eps`.
    pub c_tilde_empirical: Option<f64>,
    pub worst_trial: Option<usize>,
    pub trials: Vec<TrialSummary>,
    /// Fits of the worst trial's envelope, best first.
    pub fits: Vec<ModelFit>,
    pub certificate: Option<HamiltonianCertificate>,
    /// Set by [`check_condition_1`].
    pub passed: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition1Params {
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    pub trials: usize,
    pub s_max: f64,
    pub seed: u64,
    #[serde(default = "default_fail_threshold")]
    pub fail_threshold: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_fail_threshold() -> f64 {
    100.0
}

fn default_tol() -> f64 {
    crate::ode::DEFAULT_TOL
}

impl Condition1Params {
    pub fn new(eps: f64, delta: f64, c: f64, trials: usize, s_max: f64, seed: u64) -> Self {
        Self {
            eps,
            delta,
            c,
            trials,
            s_max,
            seed,
            fail_threshold: default_fail_threshold(),
            tol: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("eps", self.eps),
            ("delta", self.delta),
            ("C", self.c),
            ("s_max", self.s_max),
            ("fail_threshold", self.fail_threshold),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {x}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Analytic bound for Euler flows under decaying forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianCertificate {
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    /// `C eps / delta`: bound on `sup_s |y(s)|_H - |y(0)|_H`.
    pub drift_bound: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `|y|_H <= k1 |y|_max`.
    pub k1: f64,
    /// `|y|_max <= k2 |y|_H`.
    pub k2: f64,
    /// Bound on `sup_s |y(s)|_max / eps` for data with `|y(0)|_max <= eps`.
    pub c_tilde_bound: f64,
    pub status: String,
}

impl HamiltonianCertificate {
    /// The bound on `sup_s |y(s)|_H` for a given initial norm.
    pub fn metric_bound(&self, initial_metric: f64) -> f64 {
        initial_metric + self.drift_bound
    }
}

/// True iff every bad coefficient vanishes.
pub fn classical_null_condition(spec: &WaveSystemSpec) -> bool {
    spec.bad_coeffs.max_abs() == 0.0
}

pub fn certify_hamiltonian(
    alg: &LieAlgebra,
    ham: &QuadraticHamiltonian,
    eps: f64,
    delta: f64,
    c: f64,
) -> Result<HamiltonianCertificate> {
    if alg.dim() != ham.dim() {
        return Err(Error::Dimension {
            expected: alg.dim(),
            found: ham.dim(),
        });
    }
    for (name, x) in [("eps", eps), ("delta", delta)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {x}")));
        }
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("C must be non-negative, got {c}")));
    }
    let report = validate_algebra(alg);
    if !report.is_ok() {
        return Err(Error::Domain(format!(
            "{} is not a Lie algebra (antisymmetry residual {:e}, Jacobi residual {:e})",
            alg.label(),
            report.antisymmetry.worst_residual,
            report.jacobi.worst_residual
        )));
    }
    let pivot = ham.smallest_cholesky_pivot();
    if !(pivot > 0.0) {
        return Err(Error::NotPositiveDefinite(pivot));
    }
    let (lambda_min, lambda_max) = ham.eigen_bounds();
    if !(lambda_min > 0.0) {
        return Err(Error::NotPositiveDefinite(lambda_min));
    }
    let n = ham.dim() as f64;
    let k1 = (n * lambda_max).sqrt();
    let k2 = 1.0 / lambda_min.sqrt();
    Ok(HamiltonianCertificate {
        eps,
        delta,
        c,
        drift_bound: c * eps / delta,
        lambda_min,
        lambda_max,
        k1,
        k2,
        c_tilde_bound: k2 * (k1 + c / delta),
        status: "certified bounded-stable".into(),
    })
}

/// The `2^N` sign vertices of the cube of radius `eps` (positive vertex
/// first), followed by the `2N` signed coordinate points.
fn corner_data(n: usize, eps: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if n <= MAX_VERTEX_DIM {
        for mask in 0..(1usize << n) {
            out.push((0..n).map(|a| if mask >> a & 1 == 1 { -eps } else { eps }).collect());
        }
    } else {
        out.push(vec![eps; n]);
        out.push(vec![-eps; n]);
    }
    for a in 0..n {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[a] = sign * eps;
            out.push(v);
        }
    }
    out
}

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index as u64)
}

/// Uniform in the cube of radius `eps`.
fn random_in_ball(n: usize, eps: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-eps..=eps)).collect()
}

/// Uniform in the cube, then pushed to the boundary along the largest
/// component so that the max-norm is exactly `eps`.
fn random_on_sphere(n: usize, eps: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = random_in_ball(n, eps, rng);
    let (arg, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |(i, m), (j, x)| if x.abs() > m { (j, x.abs()) } else { (i, m) });
    v[arg] = if v[arg] < 0.0 { -eps } else { eps };
    v
}

fn ensemble(
    n: usize,
    eps: f64,
    trials: usize,
    seed: u64,
    draw: fn(usize, f64, &mut ChaCha8Rng) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let mut data = corner_data(n, eps);
    let corners = data.len();
    for i in corners..trials.max(corners) {
        data.push(draw(n, eps, &mut trial_rng(seed, i)));
    }
    data
}

/// `sup_{s' <= s} |Phi(s')|` at each sample.
fn running_envelope(traj: &Trajectory) -> Vec<(f64, f64)> {
    let mut m = 0.0_f64;
    traj.samples
        .iter()
        .map(|p| {
            m = m.max(max_norm(&p.phi));
            (p.s, m)
        })
        .collect()
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    (a, b, r2)
}

/// Fits every applicable growth model to an envelope; best (lowest RSS)
/// first.
pub fn fit_growth_models(window: &[(f64, f64)]) -> Vec<ModelFit> {
    let xs: Vec<f64> = window.iter().map(|p| p.0).collect();
    let es: Vec<f64> = window.iter().map(|p| p.1).collect();
    if xs.len() < 3 || es.iter().any(|e| !(*e > 0.0)) {
        return Vec::new();
    }
    let log_e: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let rss_log = |pred: &dyn Fn(f64) -> f64| -> f64 {
        xs.iter()
            .zip(&log_e)
            .map(|(x, l)| {
                let p = pred(*x);
                if p.is_finite() {
                    (p - l).powi(2)
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    };

    let mut fits = Vec::with_capacity(4);

    let mean = log_e.iter().sum::<f64>() / log_e.len() as f64;
    fits.push(ModelFit {
        model: GrowthModel::Constant,
        a: mean.exp(),
        b: 0.0,
        rss: rss_log(&|_| mean),
        r_squared: 0.0,
    });

    let (a, b, r2) = linear_fit(&xs, &es);
    fits.push(ModelFit {
        model: GrowthModel::Linear,
        a,
        b,
        rss: rss_log(&|x| {
            let v = a + b * x;
            if v > 0.0 {
                v.ln()
            } else {
                f64::INFINITY
            }
        }),
        r_squared: r2,
    });

    let (a, b, r2) = linear_fit(&xs, &log_e);
    fits.push(ModelFit {
        model: GrowthModel::Exponential,
        a,
        b,
        rss: rss_log(&|x| a + b * x),
        r_squared: r2,
    });

    if log_e.iter().all(|l| *l > 0.0) {
        let loglog: Vec<f64> = log_e.iter().map(|l| l.ln()).collect();
        let (a, b, r2) = linear_fit(&xs, &loglog);
        fits.push(ModelFit {
            model: GrowthModel::SuperExponential,
            a,
            b,
            rss: rss_log(&|x| (a + b * x).exp()),
            r_squared: r2,
        });
    }

    fits.sort_by(|x, y| x.rss.total_cmp(&y.rss));
    fits
}

/// Picks the simplest growing model whose residual is within a factor of
/// two of the best one.
fn select_model(fits: &[ModelFit]) -> Option<ModelFit> {
    let best = fits.first()?.rss;
    let slack = 2.0 * best + 1e-12;
    [GrowthModel::Linear, GrowthModel::Exponential, GrowthModel::SuperExponential]
        .iter()
        .filter_map(|m| fits.iter().find(|f| f.model == *m))
        .find(|f| f.rss <= slack)
        .copied()
}

fn summarize(
    id: usize,
    data: &[f64],
    forcing: ForcingKind,
    traj: &Trajectory,
    certificate: Option<&HamiltonianCertificate>,
    tol: f64,
) -> TrialSummary {
    let within_certificate = certificate.and_then(|cert| {
        let sup = traj.stats.max_metric?;
        let y0 = traj.stats.initial_metric?;
        Some(sup <= cert.metric_bound(y0) + 10.0 * tol)
    });
    TrialSummary {
        id,
        data: data.to_vec(),
        forcing,
        status: traj.status,
        sup_abs: traj.stats.max_abs,
        sup_metric: traj.stats.max_metric,
        initial_metric: traj.stats.initial_metric,
        s_star: blowup_time_estimate(traj),
        within_certificate,
    }
}

fn argmax_by(values: impl Iterator<Item = f64>) -> Option<usize> {
    values
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, m)) if v <= m => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Integrates unforced trajectories from data of max-norm `eps` (corners
/// first, then random boundary points) and fits growth models to the worst
/// envelope over `s in [s_max/2, s_max]`.
pub fn classify_growth(
    sys: &AsymptoticSystem,
    eps: f64,
    s_max: f64,
    trials: usize,
    seed: u64,
) -> Result<ClassificationReport> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Domain(format!("eps must lie in (0, 0.5], got {eps}")));
    }
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::Domain(format!("s_max must be positive, got {s_max}")));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    let n = sys.dim();
    let data = ensemble(n, eps, trials, seed, random_on_sphere);
    let opts = IntegratorOptions {
        blowup_threshold: CLASSIFY_BLOWUP_THRESHOLD,
        ..IntegratorOptions::default()
    };
    let points: Vec<f64> = (0..CLASSIFY_OUTPUT_POINTS)
        .map(|k| s_max * k as f64 / (CLASSIFY_OUTPUT_POINTS - 1) as f64)
        .collect();
    let runs: Vec<Trajectory> = data
        .par_iter()
        .map(|phi0| integrate_at(sys, phi0, &points, &Forcing::zero(), &opts))
        .collect::<Result<_>>()?;

    let trials: Vec<TrialSummary> = runs
        .iter()
        .zip(&data)
        .enumerate()
        .map(|(i, (t, d))| summarize(i, d, ForcingKind::Zero, t, None, opts.tol))
        .collect();

    let c_tilde = trials.iter().map(|t| t.sup_abs / eps).fold(0.0, f64::max);
    let mut report = ClassificationReport {
        verdict: Verdict::BoundedStable { c_tilde },
        eps,
        s_max,
        c_tilde_empirical: Some(c_tilde),
        worst_trial: None,
        trials,
        fits: Vec::new(),
        certificate: None,
        passed: None,
        warnings: Vec::new(),
    };

    let blowups: Vec<(usize, f64)> = report
        .trials
        .iter()
        .filter_map(|t| t.s_star.map(|s| (t.id, s)))
        .collect();
    if let Some(&(id, s_star)) = blowups.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
        report.verdict = Verdict::Blowup { s_star };
        report.worst_trial = Some(id);
        report.c_tilde_empirical = None;
        return Ok(report);
    }
    if let Some(t) = report.trials.iter().find(|t| !matches!(t.status, Status::Completed { .. })) {
        report
            .warnings
            .push(format!("trial {} stopped early: {:?}", t.id, t.status));
    }

    // Worst trial: largest envelope at the end of the run.
    let worst = argmax_by(runs.iter().map(|t| max_norm(&t.last().phi).max(t.stats.max_abs)))
        .expect("at least one trial");
    report.worst_trial = Some(worst);
    let env = running_envelope(&runs[worst]);
    let window: Vec<(f64, f64)> = env.into_iter().filter(|p| p.0 >= 0.5 * s_max).collect();
    report.fits = fit_growth_models(&window);

    let (first, last) = (window[0].1, window[window.len() - 1].1);
    let bounded = last <= first * (1.0 + BOUNDED_GROWTH);
    if !bounded {
        if let Some(fit) = select_model(&report.fits) {
            report.verdict = match fit.model {
                GrowthModel::Linear => Verdict::LinearGrowth { rate: fit.b },
                GrowthModel::Exponential => Verdict::ExponentialGrowth { rate: fit.b },
                GrowthModel::SuperExponential => Verdict::SuperExponential { rate: fit.b },
                GrowthModel::Constant => unreachable!(),
            };
        }
    }
    Ok(report)
}

/// Sampled boundedness-and-stability test under decaying forcing.
///
/// Every datum (corners first, then uniform samples in the cube) runs once
/// under random piecewise-constant forcing and once under forcing aligned
/// with the solution. Systems carrying a Hamiltonian enforce the forcing
/// envelope in the Hamiltonian norm and check each trial against the
/// analytic certificate.
pub fn check_condition_1(sys: &AsymptoticSystem, p: &Condition1Params) -> Result<ClassificationReport> {
    p.validate()?;
    let mut warnings = Vec::new();
    let tail = (-p.delta * p.s_max).exp();
    if tail > 1e-8 {
        let msg = format!(
            "exp(-delta s_max) = {tail:e} > 1e-8: s_max may be too short to see the forcing decay"
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let certificate = match sys.hamiltonian() {
        Some((alg, ham)) => Some(certify_hamiltonian(alg, ham, p.eps, p.delta, p.c)?),
        None => None,
    };
    let norm = match sys.hamiltonian() {
        Some((_, ham)) => ForcingNorm::Metric(ham.clone()),
        None => ForcingNorm::Max,
    };
    let opts = IntegratorOptions::with_tol(p.tol);
    let data = ensemble(sys.dim(), p.eps, p.trials, p.seed, random_in_ball);

    let jobs: Vec<(usize, ForcingKind)> = (0..data.len())
        .flat_map(|i| [(i, ForcingKind::RandomPiecewise), (i, ForcingKind::AdversarialAligned)])
        .collect();
    let trials: Vec<TrialSummary> = jobs
        .par_iter()
        .map(|&(i, kind)| {
            let forcing = make_forcing(kind, p.c, p.eps, p.delta, p.seed ^ i as u64)?
                .with_norm(norm.clone());
            let traj = integrate_with(sys, &data[i], p.s_max, &forcing, &opts)?;
            let mut summary = summarize(i, &data[i], kind, &traj, certificate.as_ref(), p.tol);
            // Trajectories are not retained; keep only their summaries.
            summary.id = i;
            Ok(summary)
        })
        .collect::<Result<_>>()?;

    let c_tilde = trials.iter().map(|t| t.sup_abs / p.eps).fold(0.0, f64::max);
    let worst = argmax_by(trials.iter().map(|t| t.sup_abs));
    let mut report = ClassificationReport {
        verdict: Verdict::BoundedStable { c_tilde },
        eps: p.eps,
        s_max: p.s_max,
        c_tilde_empirical: Some(c_tilde),
        worst_trial: worst,
        trials,
        fits: Vec::new(),
        certificate,
        passed: Some(true),
        warnings,
    };

    let first_blowup = report
        .trials
        .iter()
        .enumerate()
        .filter_map(|(k, t)| t.s_star.map(|s| (k, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((k, s_star)) = first_blowup {
        report.verdict = Verdict::Blowup { s_star };
        report.worst_trial = Some(k);
        report.c_tilde_empirical = None;
        report.passed = Some(false);
    } else if c_tilde > p.fail_threshold {
        report.verdict = Verdict::Unbounded { c_tilde };
        report.passed = Some(false);
    } else if let Some(k) = report.trials.iter().position(|t| t.within_certificate == Some(false)) {
        report
            .warnings
            .push(format!("trial {k} exceeds the analytic certificate"));
        report.passed = Some(false);
    } else if let Some(t) = report
        .trials
        .iter()
        .find(|t| matches!(t.status, Status::StepUnderflow { .. }))
    {
        report
            .warnings
            .push(format!("trial {} stopped early: {:?}", t.id, t.status));
        report.passed = Some(false);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::rigid_body;
    use crate::system::{asymptotic_system, catalogue, hamiltonian_asymptotic_system};
    use proptest::prelude::*;

    fn cat(name: &str) -> AsymptoticSystem {
        asymptotic_system(&catalogue(name, &[]).unwrap())
    }

    fn rigid(i: [f64; 3]) -> AsymptoticSystem {
        let (alg, ham) = rigid_body(i[0], i[1], i[2]).unwrap();
        hamiltonian_asymptotic_system(&alg, &ham).unwrap()
    }

    #[test]
    fn classical_null_examples() {
        assert!(classical_null_condition(&catalogue("null_form", &[]).unwrap()));
        assert!(!classical_null_condition(&catalogue("john", &[]).unwrap()));
        assert!(!classical_null_condition(&catalogue("weak_null_chain", &[]).unwrap()));
        assert!(classical_null_condition(&catalogue("rigid_body", &[1.0, 1.0, 1.0]).unwrap()));
        assert!(!classical_null_condition(&catalogue("rigid_body", &[1.0, 2.0, 3.0]).unwrap()));
    }

    #[test]
    fn corners_come_first_and_include_positive_vertex() {
        let c = corner_data(2, 0.1);
        assert_eq!(c[0], vec![0.1, 0.1]);
        assert_eq!(c.len(), 4 + 4);
        assert!(c.iter().all(|v| (max_norm(v) - 0.1).abs() == 0.0));
        let data = ensemble(2, 0.1, 20, 3, random_on_sphere);
        assert_eq!(data.len(), 20);
        assert!(data.iter().all(|v| max_norm(v) == 0.1));
        let data = ensemble(2, 0.1, 20, 3, random_in_ball);
        assert!(data.iter().all(|v| max_norm(v) <= 0.1));
    }

    #[test]
    fn weak_null_chain_grows_linearly_at_quarter_eps_squared() {
        let r = classify_growth(&cat("weak_null_chain"), 0.1, 200.0, 16, 1).unwrap();
        let Verdict::LinearGrowth { rate } = r.verdict else {
            panic!("{:?} {:?}", r.verdict, r.fits)
        };
        assert!((rate - 2.5e-3).abs() <= 0.1 * 2.5e-3, "{rate}");
    }

    #[test]
    fn super_exponential_chain_is_flagged() {
        let r = classify_growth(&cat("super_exponential"), 0.3, 60.0, 16, 1).unwrap();
        assert!(matches!(r.verdict, Verdict::SuperExponential { .. }), "{:?} {:?}", r.verdict, r.fits);
        let fit = r.fits.iter().find(|f| f.model == GrowthModel::SuperExponential).unwrap();
        assert!(fit.r_squared >= 0.99, "{}", fit.r_squared);
    }

    #[test]
    fn rigid_body_is_bounded_within_twice_the_data() {
        let r = classify_growth(&rigid([1.0, 2.0, 3.0]), 0.05, 1e4, 24, 5).unwrap();
        let Verdict::BoundedStable { c_tilde } = r.verdict else {
            panic!("{:?}", r.verdict)
        };
        assert!(c_tilde <= 2.0, "{c_tilde}");
        for t in &r.trials {
            assert!(t.sup_abs <= 2.0 * 0.05);
        }
    }

    #[test]
    fn trivial_system_is_bounded_with_unit_constant() {
        let r = classify_growth(&cat("free"), 0.2, 50.0, 8, 0).unwrap();
        assert_eq!(r.verdict, Verdict::BoundedStable { c_tilde: 1.0 });
    }

    #[test]
    fn john_classifies_as_blowup_near_four_over_eps() {
        let r = classify_growth(&cat("john"), 0.1, 100.0, 4, 0).unwrap();
        let Verdict::Blowup { s_star } = r.verdict else { panic!("{:?}", r.verdict) };
        assert!((s_star - 40.0).abs() < 0.4, "{s_star}");
    }

    #[test]
    fn exponential_growth_is_recognised() {
        // Phi_0' = Phi_0 Phi_1 / 4 with Phi_1 held constant by Phi_1' = 0.
        let mut f = crate::tensor::Tensor3::zeros(2);
        f.set(0, 0, 1, 0.5);
        f.set(0, 1, 0, 0.5);
        let spec = WaveSystemSpec::with_bad_coeffs("exp", f).unwrap();
        let r = classify_growth(&asymptotic_system(&spec), 0.2, 200.0, 8, 0).unwrap();
        let Verdict::ExponentialGrowth { rate } = r.verdict else {
            panic!("{:?} {:?}", r.verdict, r.fits)
        };
        assert!((rate - 0.05).abs() < 1e-6, "{rate}");
    }

    #[test]
    fn certificate_values_for_rigid_body() {
        let (alg, ham) = rigid_body(1.0, 2.0, 3.0).unwrap();
        let cert = certify_hamiltonian(&alg, &ham, 0.01, 0.5, 1.0).unwrap();
        assert!((cert.drift_bound - 0.02).abs() < 1e-15);
        assert!((cert.lambda_min - 1.0 / 6.0).abs() < 1e-12);
        assert!((cert.lambda_max - 0.5).abs() < 1e-12);
        assert!((cert.k1 - 1.5f64.sqrt()).abs() < 1e-12);
        assert!((cert.k2 - 6.0f64.sqrt()).abs() < 1e-12);
        let zero = certify_hamiltonian(&alg, &ham, 0.01, 0.5, 0.0).unwrap();
        assert_eq!(zero.drift_bound, 0.0);
        assert_eq!(zero.metric_bound(0.3), 0.3);
    }

    #[test]
    fn certificate_rejects_indefinite_forms_and_bad_algebras() {
        let alg = LieAlgebra::so3();
        let bad = QuadraticHamiltonian::new_unchecked(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            certify_hamiltonian(&alg, &bad, 0.1, 1.0, 1.0),
            Err(Error::NotPositiveDefinite(_))
        ));
        let mut c = alg.structure().clone();
        c.set(0, 1, 2, 0.5);
        let broken = LieAlgebra::new("broken", c).unwrap();
        let ham = QuadraticHamiltonian::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        assert!(certify_hamiltonian(&broken, &ham, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn condition_1_fails_for_john_near_the_closed_form_pole() {
        let p = Condition1Params::new(0.1, 0.5, 1.0, 4, 100.0, 9);
        let r = check_condition_1(&cat("john"), &p).unwrap();
        assert_eq!(r.passed, Some(false));
        let Verdict::Blowup { s_star } = r.verdict else { panic!("{:?}", r.verdict) };
        // Forcing can add at most C eps / delta = 0.2 to the corner datum,
        // so the pole lies between 4 / 0.3 and the unforced 4 / 0.1.
        assert!(s_star <= 40.0 * 1.01 && s_star >= 4.0 / 0.3, "{s_star}");
        let corner = r
            .trials
            .iter()
            .find(|t| t.id == 0 && t.forcing == ForcingKind::AdversarialAligned)
            .unwrap();
        assert_eq!(corner.data, vec![0.1]);
        assert!(corner.s_star.is_some());

        // With a tiny forcing budget the corner pole stays near 4 / eps.
        let p = Condition1Params::new(0.1, 0.5, 1e-3, 4, 100.0, 9);
        let r = check_condition_1(&cat("john"), &p).unwrap();
        let Verdict::Blowup { s_star } = r.verdict else { panic!("{:?}", r.verdict) };
        assert!((s_star - 40.0).abs() <= 0.4, "{s_star}");
    }

    #[test]
    fn condition_1_zero_system_respects_trivial_bound() {
        let p = Condition1Params::new(0.01, 1.0, 1.0, 32, 40.0, 4);
        let r = check_condition_1(&cat("free"), &p).unwrap();
        assert_eq!(r.passed, Some(true));
        let c = r.c_tilde_empirical.unwrap();
        assert!(c <= 2.0 + 1e-9 && c >= 1.0, "{c}");
    }

    #[test]
    fn condition_1_rigid_body_is_dominated_by_certificate() {
        let p = Condition1Params::new(0.01, 0.5, 1.0, 40, 100.0, 11);
        let r = check_condition_1(&rigid([1.0, 2.0, 3.0]), &p).unwrap();
        assert_eq!(r.passed, Some(true), "{:?}", r.warnings);
        let cert = r.certificate.as_ref().unwrap();
        assert!(r.c_tilde_empirical.unwrap() <= cert.c_tilde_bound);
        assert!(r.trials.iter().all(|t| t.within_certificate == Some(true)));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn condition_1_warns_when_forcing_has_not_decayed() {
        let p = Condition1Params::new(0.01, 0.5, 1.0, 2, 10.0, 0);
        let r = check_condition_1(&rigid([1.0, 2.0, 3.0]), &p).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("s_max")));
    }

    #[test]
    fn condition_1_is_deterministic_and_monotone_in_trials() {
        let sys = rigid([1.0, 2.0, 3.0]);
        let p = Condition1Params::new(0.02, 1.0, 1.0, 20, 30.0, 77);
        let a = check_condition_1(&sys, &p).unwrap();
        let b = check_condition_1(&sys, &p).unwrap();
        assert_eq!(a, b);
        let doubled = check_condition_1(&sys, &Condition1Params { trials: 40, ..p }).unwrap();
        assert_eq!(&doubled.trials[..a.trials.len()], &a.trials[..]);

        let john = cat("john");
        let p = Condition1Params::new(0.05, 1.0, 1.0, 3, 100.0, 1);
        let r = check_condition_1(&john, &p).unwrap();
        let r2 = check_condition_1(&john, &Condition1Params { trials: 6, ..p }).unwrap();
        assert_eq!(r.passed, Some(false));
        assert_eq!(r2.passed, Some(false));
    }

    #[test]
    fn condition_1_rejects_bad_params() {
        let sys = cat("john");
        assert!(check_condition_1(&sys, &Condition1Params::new(0.0, 1.0, 1.0, 1, 1.0, 0)).is_err());
        assert!(check_condition_1(&sys, &Condition1Params::new(0.1, 1.0, 1.0, 0, 1.0, 0)).is_err());
        assert!(classify_growth(&sys, 0.6, 1.0, 1, 0).is_err());
    }

    #[test]
    fn fit_selection_on_synthetic_envelopes() {
        let s: Vec<f64> = (0..100).map(|k| 50.0 + k as f64 * 0.5).collect();
        let lin: Vec<(f64, f64)> = s.iter().map(|x| (*x, 0.1 + 0.01 * x)).collect();
        assert_eq!(select_model(&fit_growth_models(&lin)).unwrap().model, GrowthModel::Linear);
        let exp: Vec<(f64, f64)> = s.iter().map(|x| (*x, (0.1 * x).exp())).collect();
        assert_eq!(select_model(&fit_growth_models(&exp)).unwrap().model, GrowthModel::Exponential);
        let sup: Vec<(f64, f64)> = s.iter().map(|x| (*x, (0.05 * x).exp().exp())).collect();
        assert_eq!(
            select_model(&fit_growth_models(&sup)).unwrap().model,
            GrowthModel::SuperExponential
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn verdict_is_sign_equivariant(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 8),
            eps in 0.05f64..0.3,
        ) {
            // Corner-only ensembles are symmetric under Phi -> -Phi, so the
            // verdict for -F must match the verdict for F.
            let f = crate::tensor::Tensor3::from_fn(2, |a, b, c| {
                let (lo, hi) = if b <= c { (b, c) } else { (c, b) };
                coeffs[a * 4 + lo * 2 + hi]
            });
            let spec = WaveSystemSpec::with_bad_coeffs("random", f).unwrap();
            let sys = asymptotic_system(&spec);
            let neg = asymptotic_system(&spec.negated());
            let n_corners = corner_data(2, eps).len();
            let a = classify_growth(&sys, eps, 20.0, n_corners, 0).unwrap();
            let b = classify_growth(&neg, eps, 20.0, n_corners, 0).unwrap();
            prop_assert_eq!(a.verdict.name(), b.verdict.name());
            match (a.verdict, b.verdict) {
                (Verdict::Blowup { s_star: x }, Verdict::Blowup { s_star: y }) => {
                    prop_assert!((x - y).abs() < 1e-6 * x.max(1.0));
                }
                (Verdict::BoundedStable { c_tilde: x }, Verdict::BoundedStable { c_tilde: y }) => {
                    prop_assert!((x - y).abs() < 1e-9);
                }
                _ => {}
            }
        }
    }
}
