//! Spherically symmetric semilinear wave systems in double-null coordinates.
//!
//! With `u = t - r`, `v = t + r`, `psi = r phi` and `box = d_t^2 - Laplacian`,
//! a radial solution of `box phi_A = RHS_A` satisfies
//!
//! ```text
//! d_u d_v psi_A = (r / 4) RHS_A
//! d_t phi = (psi_u + psi_v) / r
//! d_u phi = psi_u / r + psi / (2 r^2),   d_v phi = psi_v / r - psi / (2 r^2)
//! m^{-1}(d phi_B, d phi_C) = -2 (d_u phi_B d_v phi_C + d_v phi_B d_u phi_C)
//! ```
//!
//! The domain is the rectangle `[u0, u1] x [v0, v1]` with `v0 > u1`, so `r`
//! stays away from the axis. Data are prescribed on `v = v0` (ingoing) and
//! `u = u0` (outgoing); the interior is filled one diamond at a time.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::QuadraticHamiltonian;
use crate::error::{check_dim, Error, Result};
use crate::ode::{integrate_at, max_norm, Forcing, IntegratorOptions};
use crate::system::{AsymptoticSystem, WaveSystemSpec};

pub const DEFAULT_GRID_BLOWUP_THRESHOLD: f64 = 1e6;
pub const CORNER_TOL: f64 = 1e-12;
/// Anti-diagonals shorter than this are filled sequentially.
const PARALLEL_MIN_CELLS: usize = 64;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Extra term `S_A(u, v)` added to `d_u d_v psi_A`.
pub type Source = Arc<dyn Fn(f64, f64, usize) -> f64 + Send + Sync>;

/// Smooth bump supported on `(-1, 1)` with peak value 1 at 0.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// `psi_A` on the ingoing cone `v = v0` and the outgoing cone `u = u0`.
#[derive(Clone)]
pub struct CharacteristicData {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    ingoing: Vec<Profile>,
    outgoing: Vec<Profile>,
}

impl fmt::Debug for CharacteristicData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharacteristicData")
            .field("u_range", &self.u_range)
            .field("v_range", &self.v_range)
            .field("n_fields", &self.n_fields())
            .field("corner", &self.corner_values())
            .finish()
    }
}

impl CharacteristicData {
    pub fn from_fns(
        u_range: (f64, f64),
        v_range: (f64, f64),
        ingoing: Vec<Profile>,
        outgoing: Vec<Profile>,
    ) -> Result<Self> {
        check_dim(ingoing.len(), outgoing.len())?;
        if ingoing.is_empty() {
            return Err(Error::Domain("need at least one field".into()));
        }
        let data = Self {
            u_range,
            v_range,
            ingoing,
            outgoing,
        };
        data.check_corner()?;
        Ok(data)
    }

    /// Bumps `a_A bump((u - center) / width)` on the ingoing cone and the
    /// matching constants on the outgoing cone.
    pub fn bumps(
        u_range: (f64, f64),
        v_range: (f64, f64),
        amplitudes: &[f64],
        center: f64,
        width: f64,
    ) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::Domain(format!("bump width must be positive, got {width}")));
        }
        let u0 = u_range.0;
        let ingoing: Vec<Profile> = amplitudes
            .iter()
            .map(|&a| Arc::new(move |u: f64| a * bump((u - center) / width)) as Profile)
            .collect();
        let outgoing: Vec<Profile> = amplitudes
            .iter()
            .map(|&a| {
                let c = a * bump((u0 - center) / width);
                Arc::new(move |_v: f64| c) as Profile
            })
            .collect();
        Self::from_fns(u_range, v_range, ingoing, outgoing)
    }

    pub fn n_fields(&self) -> usize {
        self.ingoing.len()
    }

    pub fn ingoing(&self, field: usize, u: f64) -> f64 {
        (self.ingoing[field])(u)
    }

    pub fn outgoing(&self, field: usize, v: f64) -> f64 {
        (self.outgoing[field])(v)
    }

    pub fn corner_values(&self) -> Vec<f64> {
        (0..self.n_fields())
            .map(|a| self.ingoing(a, self.u_range.0))
            .collect()
    }

    pub fn check_corner(&self) -> Result<()> {
        for a in 0..self.n_fields() {
            let x = self.ingoing(a, self.u_range.0);
            let y = self.outgoing(a, self.v_range.0);
            if !((x - y).abs() <= CORNER_TOL) {
                return Err(Error::IncompatibleData(format!(
                    "field {a}: ingoing value {x} and outgoing value {y} differ at the corner"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Default)]
pub struct EvolveOptions {
    /// Worker threads for anti-diagonal sweeps; `None` uses the ambient pool
    /// and `Some(1)` runs sequentially. Results do not depend on it.
    pub threads: Option<usize>,
    pub blowup_threshold: Option<f64>,
    pub source: Option<Source>,
}

impl fmt::Debug for EvolveOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolveOptions")
            .field("threads", &self.threads)
            .field("blowup_threshold", &self.blowup_threshold)
            .field("source", &self.source.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GridStatus {
    Completed,
    Blowup { u: f64, v: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_fields: usize,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub h: f64,
    pub nu: usize,
    pub nv: usize,
    pub status: GridStatus,
    /// Nodes `(i, j)` with `i + j` above this (and off the data cones) were
    /// not computed.
    pub valid_diagonal: usize,
}

/// `psi_A(u_i, v_j)` on the uniform grid `u_i = u0 + i h`, `v_j = v0 + j h`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicGrid {
    pub n_fields: usize,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub h: f64,
    pub nu: usize,
    pub nv: usize,
    pub status: GridStatus,
    valid_diagonal: usize,
    psi: Vec<f64>,
}

impl CharacteristicGrid {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (i * (self.nv + 1) + j) * self.n_fields
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u_range.0 + i as f64 * self.h
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_range.0 + j as f64 * self.h
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.v(j) - self.u(i))
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        i <= self.nu && j <= self.nv && (i == 0 || j == 0 || i + j <= self.valid_diagonal)
    }

    /// All field values at a node.
    pub fn node(&self, i: usize, j: usize) -> &[f64] {
        let k = self.idx(i, j);
        &self.psi[k..k + self.n_fields]
    }

    pub fn psi(&self, i: usize, j: usize, field: usize) -> f64 {
        self.psi[self.idx(i, j) + field]
    }

    pub fn is_completed(&self) -> bool {
        self.status == GridStatus::Completed
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            n_fields: self.n_fields,
            u_range: self.u_range,
            v_range: self.v_range,
            h: self.h,
            nu: self.nu,
            nv: self.nv,
            status: self.status,
            valid_diagonal: self.valid_diagonal,
        }
    }

    /// Index of the grid line `u = u`, if there is one.
    pub fn u_index(&self, u: f64) -> Option<usize> {
        let x = (u - self.u_range.0) / self.h;
        let i = x.round();
        if i >= 0.0 && i <= self.nu as f64 && (x - i).abs() <= 1e-9 * x.abs().max(1.0) {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Largest first-derivative and `|psi| / r` magnitudes over every valid
    /// diamond, from centred differences.
    pub fn derivative_norms(&self) -> DerivativeNorms {
        let mut out = DerivativeNorms::default();
        for i in 0..self.nu {
            for j in 0..self.nv {
                if !self.is_valid(i + 1, j + 1) {
                    continue;
                }
                let r = 0.5 * (self.v(j) - self.u(i));
                for a in 0..self.n_fields {
                    let (s, ua, vb, n) = (
                        self.psi(i, j, a),
                        self.psi(i + 1, j, a),
                        self.psi(i, j + 1, a),
                        self.psi(i + 1, j + 1, a),
                    );
                    out.psi_u = out.psi_u.max(((ua - s + n - vb) / (2.0 * self.h)).abs());
                    out.psi_v = out.psi_v.max(((vb - s + n - ua) / (2.0 * self.h)).abs());
                    out.phi = out.phi.max((0.25 * (s + ua + vb + n) / r).abs());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivativeNorms {
    pub psi_u: f64,
    pub psi_v: f64,
    pub phi: f64,
}

impl DerivativeNorms {
    pub fn max(&self) -> f64 {
        self.psi_u.max(self.psi_v).max(self.phi)
    }
}

fn grid_count(range: (f64, f64), h: f64, name: &str) -> Result<usize> {
    let len = range.1 - range.0;
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::Domain(format!("{name} range must be increasing, got {range:?}")));
    }
    let n = (len / h).round();
    if n < 1.0 || (n * h - len).abs() > 1e-9 * len.max(1.0) {
        return Err(Error::Domain(format!("h = {h} does not divide the {name} range {range:?}")));
    }
    Ok(n as usize)
}

struct Kernel<'a> {
    n: usize,
    f: &'a [f64],
    g: &'a [f64],
    has_g: bool,
    source: Option<&'a Source>,
}

impl Kernel<'_> {
    /// `(r/4) RHS + S` at a cell centre.
    fn eval(&self, u: f64, v: f64, r: f64, c: &[f64], pu: &[f64], pv: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inv_r = 1.0 / r;
        let half_r2 = 0.5 * inv_r * inv_r;
        let mut dt = [0.0; MAX_STACK_FIELDS];
        let mut du = [0.0; MAX_STACK_FIELDS];
        let mut dv = [0.0; MAX_STACK_FIELDS];
        for b in 0..n {
            dt[b] = (pu[b] + pv[b]) * inv_r;
            du[b] = pu[b] * inv_r + c[b] * half_r2;
            dv[b] = pv[b] * inv_r - c[b] * half_r2;
        }
        for a in 0..n {
            let mut acc = 0.0;
            for b in 0..n {
                let base = (a * n + b) * n;
                let frow = &self.f[base..base + n];
                let mut inner = 0.0;
                for cc in 0..n {
                    inner += frow[cc] * dt[cc];
                }
                acc += inner * dt[b];
                if self.has_g {
                    let grow = &self.g[base..base + n];
                    let mut nf = 0.0;
                    for cc in 0..n {
                        nf += grow[cc] * (du[b] * dv[cc] + dv[b] * du[cc]);
                    }
                    acc -= 2.0 * nf;
                }
            }
            out[a] = 0.25 * r * acc;
            if let Some(src) = self.source {
                out[a] += src(u, v, a);
            }
        }
    }
}

const MAX_STACK_FIELDS: usize = 16;

struct CellResult {
    north: [f64; MAX_STACK_FIELDS],
    blew_up: bool,
}

pub fn evolve(spec: &WaveSystemSpec, data: &CharacteristicData, h: f64) -> Result<CharacteristicGrid> {
    evolve_with(spec, data, h, &EvolveOptions::default())
}

pub fn evolve_with(
    spec: &WaveSystemSpec,
    data: &CharacteristicData,
    h: f64,
    opts: &EvolveOptions,
) -> Result<CharacteristicGrid> {
    match opts.threads {
        Some(t) if t > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
            pool.install(|| evolve_impl(spec, data, h, opts, true))
        }
        Some(_) => evolve_impl(spec, data, h, opts, false),
        None => evolve_impl(spec, data, h, opts, true),
    }
}

fn evolve_impl(
    spec: &WaveSystemSpec,
    data: &CharacteristicData,
    h: f64,
    opts: &EvolveOptions,
    parallel: bool,
) -> Result<CharacteristicGrid> {
    let n = spec.n_fields;
    check_dim(n, data.n_fields())?;
    if n > MAX_STACK_FIELDS {
        return Err(Error::Domain(format!("at most {MAX_STACK_FIELDS} fields are supported")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("h must be positive, got {h}")));
    }
    let (u0, u1) = data.u_range;
    let (v0, _) = data.v_range;
    if !(v0 > u1) {
        return Err(Error::Domain(format!(
            "need v0 > u1 so that r stays positive (r_min = {})",
            0.5 * (v0 - u1)
        )));
    }
    let nu = grid_count(data.u_range, h, "u")?;
    let nv = grid_count(data.v_range, h, "v")?;
    data.check_corner()?;
    let threshold = opts.blowup_threshold.unwrap_or(DEFAULT_GRID_BLOWUP_THRESHOLD);

    let mut grid = CharacteristicGrid {
        n_fields: n,
        u_range: (u0, u1),
        v_range: data.v_range,
        h,
        nu,
        nv,
        status: GridStatus::Completed,
        valid_diagonal: nu + nv,
        psi: vec![0.0; (nu + 1) * (nv + 1) * n],
    };
    for i in 0..=nu {
        let u = grid.u(i);
        let k = grid.idx(i, 0);
        for a in 0..n {
            grid.psi[k + a] = data.ingoing(a, u);
        }
    }
    for j in 1..=nv {
        let v = grid.v(j);
        let k = grid.idx(0, j);
        for a in 0..n {
            grid.psi[k + a] = data.outgoing(a, v);
        }
    }
    if grid.psi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("characteristic data".into()));
    }

    let kernel = Kernel {
        n,
        f: spec.bad_coeffs.as_slice(),
        g: spec.nullform_coeffs.as_slice(),
        has_g: spec.nullform_coeffs.max_abs() > 0.0,
        source: opts.source.as_ref(),
    };

    // Cell (i, j) has corners S = (i, j), A = (i+1, j), B = (i, j+1) and
    // produces N = (i+1, j+1). Cells with equal i + j are independent.
    for d in 0..(nu + nv - 1) {
        let i_lo = d.saturating_sub(nv - 1);
        let i_hi = d.min(nu - 1);
        let cells = i_lo..=i_hi;
        let compute = |i: usize| cell(&grid, &kernel, i, d - i, threshold);
        let results: Vec<CellResult> = if parallel && i_hi + 1 - i_lo >= PARALLEL_MIN_CELLS {
            cells.clone().into_par_iter().map(compute).collect()
        } else {
            cells.clone().map(compute).collect()
        };
        // The failing cell with the smallest v on this diagonal.
        if let Some((k, _)) = results.iter().enumerate().rev().find(|(_, r)| r.blew_up) {
            let i = i_lo + k;
            let j = d - i;
            grid.status = GridStatus::Blowup {
                u: grid.u(i) + 0.5 * h,
                v: grid.v(j) + 0.5 * h,
            };
            grid.valid_diagonal = d + 1;
            return Ok(grid);
        }
        for (i, res) in cells.zip(results) {
            let k = grid.idx(i + 1, d - i + 1);
            grid.psi[k..k + n].copy_from_slice(&res.north[..n]);
        }
    }
    Ok(grid)
}

fn cell(grid: &CharacteristicGrid, kernel: &Kernel<'_>, i: usize, j: usize, threshold: f64) -> CellResult {
    let n = grid.n_fields;
    let h = grid.h;
    let s = grid.node(i, j);
    let a = grid.node(i + 1, j);
    let b = grid.node(i, j + 1);
    let uc = grid.u(i) + 0.5 * h;
    let vc = grid.v(j) + 0.5 * h;
    let r = 0.5 * (vc - uc);

    let mut north = [0.0; MAX_STACK_FIELDS];
    let mut c = [0.0; MAX_STACK_FIELDS];
    let mut pu = [0.0; MAX_STACK_FIELDS];
    let mut pv = [0.0; MAX_STACK_FIELDS];
    let mut g = [0.0; MAX_STACK_FIELDS];

    // predictor: N* = A + B - S
    for k in 0..n {
        north[k] = a[k] + b[k] - s[k];
    }
    for pass in 0..2 {
        for k in 0..n {
            c[k] = 0.25 * (s[k] + a[k] + b[k] + north[k]);
            pu[k] = (a[k] - s[k] + north[k] - b[k]) / (2.0 * h);
            pv[k] = (b[k] - s[k] + north[k] - a[k]) / (2.0 * h);
        }
        kernel.eval(uc, vc, r, &c[..n], &pu[..n], &pv[..n], &mut g[..n]);
        for k in 0..n {
            north[k] = a[k] + b[k] - s[k] + h * h * g[k];
        }
        if pass == 1 {
            for k in 0..n {
                c[k] = 0.25 * (s[k] + a[k] + b[k] + north[k]);
                pu[k] = (a[k] - s[k] + north[k] - b[k]) / (2.0 * h);
                pv[k] = (b[k] - s[k] + north[k] - a[k]) / (2.0 * h);
            }
        }
    }
    let blew_up = (0..n).any(|k| {
        let m = (c[k] / r).abs().max(pu[k].abs()).max(pv[k].abs());
        !(m <= threshold)
    });
    CellResult { north, blew_up }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub s: f64,
    pub v: f64,
    pub phi: Vec<f64>,
}

/// `Phi_A = r (d_t - d_r) phi_A = 2 d_u psi_A + psi_A / r` along `u = u_fixed`,
/// against `s = ln r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationTrace {
    pub u_fixed: f64,
    pub h: f64,
    pub source: GridMeta,
    pub samples: Vec<TraceSample>,
}

impl RadiationTrace {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |p| p.phi.len())
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.samples[0].s, self.samples[self.samples.len() - 1].s)
    }
}

pub fn radiation_trace(grid: &CharacteristicGrid, u_fixed: f64) -> Result<RadiationTrace> {
    let i = grid
        .u_index(u_fixed)
        .ok_or_else(|| Error::Domain(format!("u = {u_fixed} is not a grid line")))?;
    if grid.nu < 2 {
        return Err(Error::Insufficient("need at least three u grid lines".into()));
    }
    let h = grid.h;
    let n = grid.n_fields;
    // Fourth-order centred where the grid allows, second-order centred next
    // to the edges, second-order one-sided on them.
    let stencil: Vec<(usize, f64)> = if i == 0 {
        vec![(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if i == grid.nu {
        vec![(i - 2, 0.5), (i - 1, -2.0), (i, 1.5)]
    } else if i >= 2 && i + 2 <= grid.nu {
        vec![(i - 2, 1.0 / 12.0), (i - 1, -2.0 / 3.0), (i + 1, 2.0 / 3.0), (i + 2, -1.0 / 12.0)]
    } else {
        vec![(i - 1, -0.5), (i + 1, 0.5)]
    };
    let mut samples = Vec::with_capacity(grid.nv + 1);
    for j in 0..=grid.nv {
        if !stencil.iter().all(|&(k, _)| grid.is_valid(k, j)) {
            break;
        }
        let r = grid.r(i, j);
        let phi: Vec<f64> = (0..n)
            .map(|a| {
                let du: f64 = stencil.iter().map(|&(k, w)| w * grid.psi(k, j, a)).sum::<f64>() / h;
                2.0 * du + grid.psi(i, j, a) / r
            })
            .collect();
        samples.push(TraceSample {
            s: r.ln(),
            v: grid.v(j),
            phi,
        });
    }
    if samples.len() < 2 {
        return Err(Error::Insufficient(format!("no computed samples along u = {u_fixed}")));
    }
    Ok(RadiationTrace {
        u_fixed: grid.u(i),
        h,
        source: grid.meta(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticComparison {
    pub s_start: f64,
    pub eps: f64,
    /// `sup_s max_A |Phi_trace - Phi_ode| / (eps + sup_s |Phi_trace|)`.
    pub sup_relative_deviation: f64,
    /// `(s, relative deviation)`.
    pub deviation: Vec<(f64, f64)>,
    /// `(s, max_A |dPhi_trace/ds - A(Phi_trace, Phi_trace)|)`.
    pub residual: Vec<(f64, f64)>,
}

/// Integrates the asymptotic system from the trace value at (the first
/// sample at or after) `s_start` and measures how far the trace departs
/// from it. At least one decade of `r` must remain beyond `s_start`.
pub fn compare_to_asymptotic(
    trace: &RadiationTrace,
    sys: &AsymptoticSystem,
    s_start: f64,
) -> Result<AsymptoticComparison> {
    check_dim(sys.dim(), trace.dim())?;
    let k0 = trace
        .samples
        .iter()
        .position(|p| p.s >= s_start)
        .ok_or_else(|| Error::Insufficient(format!("trace ends before s = {s_start}")))?;
    let tail = &trace.samples[k0..];
    let s0 = tail[0].s;
    let s_end = tail[tail.len() - 1].s;
    if s_end - s0 < std::f64::consts::LN_10 - 1e-12 {
        return Err(Error::Insufficient(format!(
            "need a decade of r after s = {s0}, trace ends at s = {s_end}"
        )));
    }
    let points: Vec<f64> = tail.iter().map(|p| p.s).collect();
    let opts = IntegratorOptions::with_tol(1e-11);
    let ode = integrate_at(sys, &tail[0].phi, &points, &Forcing::zero(), &opts)?;
    if ode.samples.len() != points.len() {
        return Err(Error::Domain(format!(
            "asymptotic flow from the trace value stopped early: {:?}",
            ode.status
        )));
    }
    let eps = max_norm(&tail[0].phi);
    let scale = eps + tail.iter().map(|p| max_norm(&p.phi)).fold(0.0, f64::max);
    let deviation: Vec<(f64, f64)> = tail
        .iter()
        .zip(&ode.samples)
        .map(|(t, o)| {
            let d = t.phi.iter().zip(&o.phi).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            (t.s, if scale > 0.0 { d / scale } else { d })
        })
        .collect();
    let sup = deviation.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(AsymptoticComparison {
        s_start: s0,
        eps,
        sup_relative_deviation: sup,
        deviation,
        residual: trace_residual(tail, sys),
    })
}

fn trace_residual(samples: &[TraceSample], sys: &AsymptoticSystem) -> Vec<(f64, f64)> {
    if samples.len() < 3 {
        return Vec::new();
    }
    samples
        .windows(3)
        .map(|w| {
            let ds = w[2].s - w[0].s;
            let rhs = sys.rhs(&w[1].phi).expect("dimension checked");
            let res = (0..rhs.len())
                .map(|a| ((w[2].phi[a] - w[0].phi[a]) / ds - rhs[a]).abs())
                .fold(0.0, f64::max);
            (w[1].s, res)
        })
        .collect()
}

/// Residual of the trace against the asymptotic system over its full length.
pub fn asymptotic_residual(trace: &RadiationTrace, sys: &AsymptoticSystem) -> Result<Vec<(f64, f64)>> {
    check_dim(sys.dim(), trace.dim())?;
    Ok(trace_residual(&trace.samples, sys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianDrift {
    /// `(s, H(Phi(s)))`.
    pub values: Vec<(f64, f64)>,
    pub tail_start: f64,
    pub tail_mean: f64,
    /// `max - min` of `H` over the last decade of `r`.
    pub tail_oscillation: f64,
    /// `tail_oscillation / |tail_mean|` (zero when both vanish).
    pub relative_tail_oscillation: f64,
    /// Slope of `ln |dH/ds|` against `s`, when `H` is not constant.
    pub decay_rate: Option<f64>,
}

pub fn hamiltonian_drift(trace: &RadiationTrace, ham: &QuadraticHamiltonian) -> Result<HamiltonianDrift> {
    check_dim(ham.dim(), trace.dim())?;
    let values: Vec<(f64, f64)> = trace.samples.iter().map(|p| (p.s, ham.bilinear(&p.phi, &p.phi))).collect();
    let s_end = values[values.len() - 1].0;
    let tail_start = (s_end - std::f64::consts::LN_10).max(values[0].0);
    let tail: Vec<f64> = values.iter().filter(|p| p.0 >= tail_start).map(|p| p.1).collect();
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_oscillation = hi - lo;
    let relative_tail_oscillation = if tail_oscillation == 0.0 {
        0.0
    } else {
        tail_oscillation / tail_mean.abs()
    };

    let pts: Vec<(f64, f64)> = values
        .windows(2)
        .filter_map(|w| {
            let d = ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs();
            (d > 0.0 && d.is_finite()).then(|| (0.5 * (w[0].0 + w[1].0), d.ln()))
        })
        .collect();
    let decay_rate = (pts.len() >= 3).then(|| {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    });
    Ok(HamiltonianDrift {
        values,
        tail_start,
        tail_mean,
        tail_oscillation,
        relative_tail_oscillation,
        decay_rate,
    })
}
