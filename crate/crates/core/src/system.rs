//! Semilinear wave systems with quadratic first-derivative nonlinearities,
//! the built-in example catalogue, and the derived asymptotic ODE systems.
//!
//! A system of `N` fields reads
//!
//! ```text
//! box phi_A = F[A][B][C] (d_t phi_B)(d_t phi_C) + G[A][B][C] Q(phi_B, phi_C)
//! Q(f, g)   = -(d_t f)(d_t g) + sum_i (d_i f)(d_i g)
//! ```
//!
//! where `box = d_t^2 - Laplacian` (see [`crate::wave1d`]). The null forms `Q`
//! are dropped by the asymptotic system, which keeps only the `F` block:
//! `dPhi_A/ds = F[A][B][C] Phi_B Phi_C / 4` with `Phi = r (d_t - d_r) phi`.

use serde::{Deserialize, Serialize};

use crate::algebra::{euler_coefficients, LieAlgebra, QuadraticHamiltonian, DEFAULT_EULER_FACTOR};
use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor3;

/// Relative tolerance for the `(B, C)` symmetry of coefficient arrays.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveSystemSpec {
    pub n_fields: usize,
    pub bad_coeffs: Tensor3,
    pub nullform_coeffs: Tensor3,
    #[serde(default)]
    pub label: String,
}

impl WaveSystemSpec {
    pub fn new(
        label: impl Into<String>,
        bad_coeffs: Tensor3,
        nullform_coeffs: Tensor3,
    ) -> Result<Self> {
        let n = bad_coeffs.dim();
        if n == 0 {
            return Err(Error::Shape("a wave system needs at least one field".into()));
        }
        check_dim(n, nullform_coeffs.dim())?;
        for (name, t) in [("bad_coeffs", &bad_coeffs), ("nullform_coeffs", &nullform_coeffs)] {
            if !t.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
            let (asym, at) = t.worst_asymmetry_in_last_pair();
            if asym > SYMMETRY_TOL * t.max_abs().max(1.0) {
                let (a, b, c) = at.unwrap_or_default();
                return Err(Error::Domain(format!(
                    "{name} not symmetric in the last two indices at [{a}][{b}][{c}] (residual {asym:e})"
                )));
            }
        }
        Ok(Self {
            n_fields: n,
            bad_coeffs,
            nullform_coeffs,
            label: label.into(),
        })
    }

    /// Only `(d_t phi)(d_t phi)` couplings.
    pub fn with_bad_coeffs(label: impl Into<String>, bad_coeffs: Tensor3) -> Result<Self> {
        let n = bad_coeffs.dim();
        Self::new(label, bad_coeffs, Tensor3::zeros(n))
    }

    /// Linear (free) wave equations for `n` fields.
    pub fn free(n: usize) -> Result<Self> {
        Self::new(format!("free({n})"), Tensor3::zeros(n), Tensor3::zeros(n))
    }

    pub fn negated(&self) -> Self {
        Self {
            n_fields: self.n_fields,
            bad_coeffs: self.bad_coeffs.scaled(-1.0),
            nullform_coeffs: self.nullform_coeffs.scaled(-1.0),
            label: format!("-({})", self.label),
        }
    }
}

impl<'de> Deserialize<'de> for WaveSystemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            n_fields: usize,
            bad_coeffs: Tensor3,
            #[serde(default)]
            nullform_coeffs: Option<Tensor3>,
            #[serde(default)]
            label: String,
        }
        let raw = Raw::deserialize(d)?;
        if raw.bad_coeffs.dim() != raw.n_fields {
            return Err(serde::de::Error::custom(format!(
                "n_fields is {} but bad_coeffs has dimension {}",
                raw.n_fields,
                raw.bad_coeffs.dim()
            )));
        }
        let g = raw.nullform_coeffs.unwrap_or_else(|| Tensor3::zeros(raw.n_fields));
        WaveSystemSpec::new(raw.label, raw.bad_coeffs, g).map_err(serde::de::Error::custom)
    }
}

/// Where an asymptotic system came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    WaveSystem {
        label: String,
    },
    Hamiltonian {
        algebra: LieAlgebra,
        hamiltonian: QuadraticHamiltonian,
    },
}

/// `dPhi_A/ds = coeffs[A][B][C] Phi_B Phi_C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSystem {
    pub n_fields: usize,
    pub coeffs: Tensor3,
    pub provenance: Provenance,
}

impl AsymptoticSystem {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n_fields
    }

    /// Evaluates the quadratic right-hand side into `out`.
    #[inline]
    pub fn rhs_into(&self, phi: &[f64], out: &mut [f64]) {
        let n = self.n_fields;
        for (a, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for b in 0..n {
                if phi[b] == 0.0 {
                    continue;
                }
                let row = self.coeffs.row(a, b);
                let inner: f64 = row.iter().zip(phi).map(|(k, p)| k * p).sum();
                acc += inner * phi[b];
            }
            *o = acc;
        }
    }

    pub fn rhs(&self, phi: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_fields, phi.len())?;
        let mut out = vec![0.0; self.n_fields];
        self.rhs_into(phi, &mut out);
        Ok(out)
    }

    pub fn is_trivial(&self) -> bool {
        self.coeffs.max_abs() == 0.0
    }

    pub fn hamiltonian(&self) -> Option<(&LieAlgebra, &QuadraticHamiltonian)> {
        match &self.provenance {
            Provenance::Hamiltonian {
                algebra,
                hamiltonian,
            } => Some((algebra, hamiltonian)),
            Provenance::WaveSystem { .. } => None,
        }
    }

    /// Records a Hamiltonian origin after checking that the quadratic
    /// coefficients coincide with those of the Euler field.
    pub fn with_hamiltonian(mut self, alg: LieAlgebra, ham: QuadraticHamiltonian) -> Result<Self> {
        check_dim(self.n_fields, alg.dim())?;
        check_dim(self.n_fields, ham.dim())?;
        let expected = symmetrized_euler(&alg, &ham)?;
        let scale = expected.max_abs().max(1.0);
        let mismatch = self
            .coeffs
            .as_slice()
            .iter()
            .zip(expected.as_slice())
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
        if mismatch > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "asymptotic coefficients differ from the Euler field of {} (residual {mismatch:e})",
                alg.label()
            )));
        }
        self.provenance = Provenance::Hamiltonian {
            algebra: alg,
            hamiltonian: ham,
        };
        Ok(self)
    }
}

/// Keeps the `(d_t phi)^2`-type couplings with weight 1/4 and drops the null
/// forms.
pub fn asymptotic_system(spec: &WaveSystemSpec) -> AsymptoticSystem {
    AsymptoticSystem {
        n_fields: spec.n_fields,
        coeffs: spec.bad_coeffs.scaled(0.25),
        provenance: Provenance::WaveSystem {
            label: spec.label.clone(),
        },
    }
}

fn symmetrized_euler(alg: &LieAlgebra, ham: &QuadraticHamiltonian) -> Result<Tensor3> {
    let e = euler_coefficients(alg, ham, DEFAULT_EULER_FACTOR)?;
    Ok(Tensor3::from_fn(e.dim(), |a, c, d| 0.5 * (e.get(a, c, d) + e.get(a, d, c))))
}

/// Wave system whose asymptotic system is the Euler flow of `(alg, ham)`.
pub fn from_hamiltonian(alg: &LieAlgebra, ham: &QuadraticHamiltonian) -> Result<WaveSystemSpec> {
    let f = symmetrized_euler(alg, ham)?.scaled(4.0);
    let label = if alg.label().is_empty() {
        "hamiltonian".to_string()
    } else {
        alg.label().to_string()
    };
    WaveSystemSpec::with_bad_coeffs(label, f)
}

/// Asymptotic system of [`from_hamiltonian`] with the Hamiltonian attached.
pub fn hamiltonian_asymptotic_system(
    alg: &LieAlgebra,
    ham: &QuadraticHamiltonian,
) -> Result<AsymptoticSystem> {
    let spec = from_hamiltonian(alg, ham)?;
    asymptotic_system(&spec).with_hamiltonian(alg.clone(), ham.clone())
}

pub struct CatalogueEntry {
    pub name: &'static str,
    /// Name as shown in listings, including parameters.
    pub display: &'static str,
    pub equation: &'static str,
    pub behaviour: &'static str,
}

pub const CATALOGUE: &[CatalogueEntry] = &[
    CatalogueEntry {
        name: "null_form",
        display: "null_form",
        equation: "box phi = (d_t phi)^2 - |grad phi|^2",
        behaviour: "classical null condition; small data exist globally",
    },
    CatalogueEntry {
        name: "john",
        display: "john",
        equation: "box phi = (d_t phi)^2",
        behaviour: "all nontrivial solutions blow up",
    },
    CatalogueEntry {
        name: "weak_null_chain",
        display: "weak_null_chain",
        equation: "box phi_0 = 0, box phi_1 = (d_t phi_0)^2",
        behaviour: "weak null condition; radiation field grows like eps^2 s / 4",
    },
    CatalogueEntry {
        name: "super_exponential",
        display: "super_exponential",
        equation: "box phi_1 = (d_t phi_0)(d_t phi_1), box phi_2 = (d_t phi_1)(d_t phi_2)",
        behaviour: "fails weak null condition; growth like exp(exp(eps s))",
    },
    CatalogueEntry {
        name: "rigid_body",
        display: "rigid_body(I1,I2,I3)",
        equation: "model Euler equations",
        behaviour: "asymptotic system is the rigid-body Euler flow; bounded and stable",
    },
    CatalogueEntry {
        name: "free",
        display: "free([N])",
        equation: "box phi_A = 0",
        behaviour: "linear control case (N fields, default 1)",
    },
];

fn expect_params(name: &str, params: &[f64], expected: usize) -> Result<()> {
    if params.len() == expected {
        Ok(())
    } else {
        Err(Error::ParamCount {
            name: name.to_string(),
            expected,
            found: params.len(),
        })
    }
}

/// Looks up a built-in system by name.
pub fn catalogue(name: &str, params: &[f64]) -> Result<WaveSystemSpec> {
    match name {
        "null_form" => {
            expect_params(name, params, 0)?;
            let mut g = Tensor3::zeros(1);
            g.set(0, 0, 0, -1.0);
            WaveSystemSpec::new(name, Tensor3::zeros(1), g)
        }
        "john" => {
            expect_params(name, params, 0)?;
            let mut f = Tensor3::zeros(1);
            f.set(0, 0, 0, 1.0);
            WaveSystemSpec::with_bad_coeffs(name, f)
        }
        "weak_null_chain" => {
            expect_params(name, params, 0)?;
            let mut f = Tensor3::zeros(2);
            f.set(1, 0, 0, 1.0);
            WaveSystemSpec::with_bad_coeffs(name, f)
        }
        "super_exponential" => {
            expect_params(name, params, 0)?;
            let mut f = Tensor3::zeros(3);
            f.set(1, 0, 1, 0.5);
            f.set(1, 1, 0, 0.5);
            f.set(2, 1, 2, 0.5);
            f.set(2, 2, 1, 0.5);
            WaveSystemSpec::with_bad_coeffs(name, f)
        }
        "rigid_body" => {
            expect_params(name, params, 3)?;
            let (alg, ham) = crate::algebra::rigid_body(params[0], params[1], params[2])?;
            from_hamiltonian(&alg, &ham)
        }
        "free" => {
            let n = match params {
                [] => 1,
                [n] if *n >= 1.0 && n.fract() == 0.0 => *n as usize,
                [n] => return Err(Error::Domain(format!("field count must be a positive integer, got {n}"))),
                _ => {
                    return Err(Error::ParamCount {
                        name: name.into(),
                        expected: 1,
                        found: params.len(),
                    })
                }
            };
            WaveSystemSpec::free(n)
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// The Lie-algebraic origin of a catalogue system, when it has one.
pub fn catalogue_hamiltonian(
    name: &str,
    params: &[f64],
) -> Result<Option<(LieAlgebra, QuadraticHamiltonian)>> {
    match name {
        "rigid_body" => {
            expect_params(name, params, 3)?;
            crate::algebra::rigid_body(params[0], params[1], params[2]).map(Some)
        }
        _ => {
            catalogue(name, params)?;
            Ok(None)
        }
    }
}

/// One line per built-in system.
pub fn list_catalogue() -> String {
    let mut out = String::new();
    for entry in CATALOGUE {
        let n = match entry.name {
            "rigid_body" => catalogue(entry.name, &[1.0, 2.0, 3.0]),
            _ => catalogue(entry.name, &[]),
        }
        .map(|s| s.n_fields)
        .unwrap_or(0);
        let line = match entry.name {
            // the behaviour is the point of this one
            "super_exponential" => format!("{} — {} — {}", entry.display, entry.behaviour, entry.equation),
            _ => format!("{} — {} — {}", entry.display, entry.equation, entry.behaviour),
        };
        out.push_str(&format!("{line}  [N={n}]\n"));
    }
    out
}
