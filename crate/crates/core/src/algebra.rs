//! Lie algebras given by structure constants, quadratic Hamiltonians on the
//! dual space, and the Euler (Lie–Poisson) vector field they generate.
//!
//! Index conventions: `structure[c][b][a]` is the coefficient of `e_c` in
//! `[e_b, e_a]`. The Hamiltonian is `H(y) = y_a H^{ab} y_b` with no factor
//! of one half, and the Euler equations read
//!
//! ```text
//! dy_a/ds = k * C^c_{ba} H^{bd} y_c y_d,     k = 2
//! ```
//!
//! The factor `k = 2` is `dH/dy_b = 2 H^{bd} y_d`; with it the rigid-body
//! constructor reproduces `I_1 w_1' = (I_2 - I_3) w_2 w_3` in angular
//! velocities `w_a = y_a / I_a`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor3;

/// Absolute tolerance for the antisymmetry, Jacobi and symmetry identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Overall factor in front of the structure-constant contraction.
pub const DEFAULT_EULER_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LieAlgebra {
    dim: usize,
    structure: Tensor3,
    #[serde(default)]
    label: String,
}

impl LieAlgebra {
    /// Wraps a structure-constant array. Only the shape is checked here; use
    /// [`validate_algebra`] for the Lie identities.
    pub fn new(label: impl Into<String>, structure: Tensor3) -> Result<Self> {
        if structure.dim() == 0 {
            return Err(Error::Shape("algebra dimension must be positive".into()));
        }
        if !structure.is_finite() {
            return Err(Error::NonFinite("structure constants".into()));
        }
        Ok(Self {
            dim: structure.dim(),
            structure,
            label: label.into(),
        })
    }

    /// so(3) with `[e_b, e_a] = eps_{bac} e_c`.
    pub fn so3() -> Self {
        let structure = Tensor3::from_fn(3, |c, b, a| levi_civita(b, a, c));
        Self {
            dim: 3,
            structure,
            label: "so(3)".into(),
        }
    }

    pub fn abelian(dim: usize) -> Self {
        Self {
            dim,
            structure: Tensor3::zeros(dim),
            label: format!("abelian({dim})"),
        }
    }

    /// The two-dimensional non-abelian algebra `[e_0, e_1] = e_0`.
    pub fn affine_line() -> Self {
        let mut structure = Tensor3::zeros(2);
        structure.set(0, 0, 1, 1.0);
        structure.set(0, 1, 0, -1.0);
        Self {
            dim: 2,
            structure,
            label: "aff(1)".into(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn structure(&self) -> &Tensor3 {
        &self.structure
    }

    /// `C^c_{ba}`.
    #[inline]
    pub fn constant(&self, c: usize, b: usize, a: usize) -> f64 {
        self.structure.get(c, b, a)
    }

    /// Bracket of two Lie-algebra elements given in the basis `e_a`.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for b in 0..n {
                for a in 0..n {
                    acc += self.constant(c, b, a) * x[b] * y[a];
                }
            }
            *o = acc;
        }
        out
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Symmetric positive-definite form `H^{ab}` on the dual of the algebra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticHamiltonian {
    dim: usize,
    matrix: Vec<Vec<f64>>,
}

impl QuadraticHamiltonian {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let ham = Self::new_unchecked(matrix)?;
        let asym = ham.worst_asymmetry();
        if asym > ALGEBRA_TOL {
            return Err(Error::Domain(format!(
                "hamiltonian matrix is not symmetric (residual {asym:e})"
            )));
        }
        let pivot = ham.smallest_cholesky_pivot();
        if !(pivot > ALGEBRA_TOL) {
            return Err(Error::NotPositiveDefinite(pivot));
        }
        Ok(ham)
    }

    /// Shape and finiteness only; symmetry and definiteness are not checked.
    pub fn new_unchecked(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let dim = matrix.len();
        if dim == 0 {
            return Err(Error::Shape("hamiltonian dimension must be positive".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Shape(format!(
                    "hamiltonian row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("hamiltonian row {i}")));
            }
        }
        Ok(Self { dim, matrix })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(matrix)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.matrix[a][b]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// `H^{ab} x_a y_b`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, row) in self.matrix.iter().enumerate() {
            let mut inner = 0.0;
            for (b, h) in row.iter().enumerate() {
                inner += h * y[b];
            }
            acc += x[a] * inner;
        }
        acc
    }

    /// `H^{ab} y_b`, half the gradient of `H(y)`.
    pub fn contract(&self, y: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.matrix) {
            *o = row.iter().zip(y).map(|(h, v)| h * v).sum();
        }
    }

    /// The norm `sqrt(H(y, y))`.
    pub fn norm(&self, y: &[f64]) -> f64 {
        self.bilinear(y, y).max(0.0).sqrt()
    }

    fn worst_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..self.dim {
            for b in (a + 1)..self.dim {
                worst = worst.max((self.matrix[a][b] - self.matrix[b][a]).abs());
            }
        }
        worst
    }

    /// Smallest pivot of an unpivoted Cholesky factorization, or the first
    /// non-positive one encountered.
    pub fn smallest_cholesky_pivot(&self) -> f64 {
        let n = self.dim;
        let mut l = vec![vec![0.0; n]; n];
        let mut smallest = f64::INFINITY;
        for j in 0..n {
            let mut d = self.matrix[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if !(d > 0.0) {
                return d;
            }
            smallest = smallest.min(d);
            let root = d.sqrt();
            l[j][j] = root;
            for i in (j + 1)..n {
                let mut s = 0.5 * (self.matrix[i][j] + self.matrix[j][i]);
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / root;
            }
        }
        smallest
    }

    /// Extreme eigenvalues `(min, max)` of the symmetric matrix.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let n = self.dim;
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (self.matrix[i][j] + self.matrix[j][i]));
        let eig = SymmetricEigen::new(m).eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }
}

impl<'de> Deserialize<'de> for LieAlgebra {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            structure: Tensor3,
            #[serde(default)]
            label: String,
            dim: Option<usize>,
        }
        let raw = Raw::deserialize(d)?;
        if let Some(dim) = raw.dim.filter(|&d| d != raw.structure.dim()) {
            return Err(serde::de::Error::custom(format!(
                "dim {dim} does not match structure constants of dimension {}",
                raw.structure.dim()
            )));
        }
        LieAlgebra::new(raw.label, raw.structure).map_err(serde::de::Error::custom)
    }
}

impl<'de> Deserialize<'de> for QuadraticHamiltonian {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            matrix: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(d)?;
        QuadraticHamiltonian::new(raw.matrix).map_err(serde::de::Error::custom)
    }
}

/// Coordinates `y_a` of a covector at the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DualVector(pub Vec<f64>);

impl DualVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DualVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub worst_residual: f64,
    /// Index tuple of the worst residual: `(c, b, a)` for antisymmetry,
    /// `(a, b, c, d)` for Jacobi.
    pub worst_at: Option<Vec<usize>>,
    pub violations: usize,
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub tolerance: f64,
    pub antisymmetry: IdentityCheck,
    pub jacobi: IdentityCheck,
}

impl AlgebraReport {
    pub fn is_ok(&self) -> bool {
        self.antisymmetry.holds() && self.jacobi.holds()
    }
}

/// Checks antisymmetry in the lower index pair and the Jacobi identity.
pub fn validate_algebra(alg: &LieAlgebra) -> AlgebraReport {
    let n = alg.dim;
    let c = |i, j, k| alg.constant(i, j, k);

    let mut antisymmetry = IdentityCheck {
        worst_residual: 0.0,
        worst_at: None,
        violations: 0,
    };
    for top in 0..n {
        for b in 0..n {
            for a in b..n {
                let r = (c(top, b, a) + c(top, a, b)).abs();
                if r > ALGEBRA_TOL {
                    antisymmetry.violations += 1;
                }
                if r > antisymmetry.worst_residual {
                    antisymmetry.worst_residual = r;
                    antisymmetry.worst_at = Some(vec![top, b, a]);
                }
            }
        }
    }

    let mut jacobi = IdentityCheck {
        worst_residual: 0.0,
        worst_at: None,
        violations: 0,
    };
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    let mut sum = 0.0;
                    for e in 0..n {
                        sum += c(e, a, b) * c(d, e, cc)
                            + c(e, b, cc) * c(d, e, a)
                            + c(e, cc, a) * c(d, e, b);
                    }
                    let r = sum.abs();
                    if r > ALGEBRA_TOL {
                        jacobi.violations += 1;
                    }
                    if r > jacobi.worst_residual {
                        jacobi.worst_residual = r;
                        jacobi.worst_at = Some(vec![a, b, cc, d]);
                    }
                }
            }
        }
    }

    AlgebraReport {
        tolerance: ALGEBRA_TOL,
        antisymmetry,
        jacobi,
    }
}

/// `E[a][c][d] = k * sum_b C^c_{ba} H^{bd}`, so that `dy_a/ds = E[a][c][d] y_c y_d`.
pub fn euler_coefficients(alg: &LieAlgebra, ham: &QuadraticHamiltonian, factor: f64) -> Result<Tensor3> {
    check_dim(alg.dim(), ham.dim())?;
    let n = alg.dim();
    Ok(Tensor3::from_fn(n, |a, c, d| {
        factor
            * (0..n)
                .map(|b| alg.constant(c, b, a) * ham.entry(b, d))
                .sum::<f64>()
    }))
}

/// Euler vector field with the default factor.
pub fn euler_rhs(alg: &LieAlgebra, ham: &QuadraticHamiltonian, y: &DualVector) -> Result<DualVector> {
    euler_rhs_scaled(alg, ham, y, DEFAULT_EULER_FACTOR)
}

pub fn euler_rhs_scaled(
    alg: &LieAlgebra,
    ham: &QuadraticHamiltonian,
    y: &DualVector,
    factor: f64,
) -> Result<DualVector> {
    check_dim(alg.dim(), ham.dim())?;
    check_dim(alg.dim(), y.len())?;
    let n = alg.dim();
    let mut w = vec![0.0; n];
    ham.contract(y.as_slice(), &mut w);
    let mut out = vec![0.0; n];
    for (a, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in 0..n {
            if w[b] == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for c in 0..n {
                inner += alg.constant(c, b, a) * y.0[c];
            }
            acc += inner * w[b];
        }
        *o = factor * acc;
    }
    Ok(DualVector(out))
}

pub fn hamiltonian_value(ham: &QuadraticHamiltonian, y: &DualVector) -> Result<f64> {
    check_dim(ham.dim(), y.len())?;
    Ok(ham.bilinear(y.as_slice(), y.as_slice()).max(0.0))
}

/// Free rigid body with principal moments `inertia`: so(3) and
/// `H = diag(1 / (2 I_a))` in momentum coordinates `y_a = I_a w_a`.
pub fn rigid_body(i1: f64, i2: f64, i3: f64) -> Result<(LieAlgebra, QuadraticHamiltonian)> {
    for (k, i) in [i1, i2, i3].into_iter().enumerate() {
        if !(i > 0.0) || !i.is_finite() {
            return Err(Error::Domain(format!(
                "moment of inertia I{} must be positive and finite, got {i}",
                k + 1
            )));
        }
    }
    let mut alg = LieAlgebra::so3();
    alg.label = format!("rigid_body({i1}, {i2}, {i3})");
    let ham = QuadraticHamiltonian::diagonal(&[0.5 / i1, 0.5 / i2, 0.5 / i3])?;
    Ok((alg, ham))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Classical Euler equations written out by hand, in momentum variables.
    fn rigid_body_by_hand(i: [f64; 3], y: [f64; 3]) -> [f64; 3] {
        [
            (1.0 / i[2] - 1.0 / i[1]) * y[1] * y[2],
            (1.0 / i[0] - 1.0 / i[2]) * y[2] * y[0],
            (1.0 / i[1] - 1.0 / i[0]) * y[0] * y[1],
        ]
    }

    /// Brute-force Jacobi residual built from the bracket itself.
    fn jacobi_by_brackets(alg: &LieAlgebra) -> f64 {
        let n = alg.dim();
        let basis = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        let mut worst = 0.0_f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let (x, y, z) = (basis(a), basis(b), basis(c));
                    let t1 = alg.bracket(&alg.bracket(&x, &y), &z);
                    let t2 = alg.bracket(&alg.bracket(&y, &z), &x);
                    let t3 = alg.bracket(&alg.bracket(&z, &x), &y);
                    for d in 0..n {
                        worst = worst.max((t1[d] + t2[d] + t3[d]).abs());
                    }
                }
            }
        }
        worst
    }

    fn so3_plus_center() -> LieAlgebra {
        let so3 = LieAlgebra::so3();
        let s = Tensor3::from_fn(4, |c, b, a| {
            if c < 3 && b < 3 && a < 3 {
                so3.constant(c, b, a)
            } else {
                0.0
            }
        });
        LieAlgebra::new("so(3)+R", s).unwrap()
    }

    #[test]
    fn algebra_json_round_trip_and_checks() {
        let so3 = LieAlgebra::so3();
        let text = serde_json::to_string(&so3).unwrap();
        let back: LieAlgebra = serde_json::from_str(&text).unwrap();
        assert_eq!(back, so3);
        let bare: LieAlgebra = serde_json::from_str(r#"{"structure": [[[0,0],[0,0]],[[0,0],[0,0]]]}"#).unwrap();
        assert_eq!(bare.dim(), 2);
        let wrong = serde_json::from_str::<LieAlgebra>(r#"{"dim": 3, "structure": [[[0]]]}"#);
        assert!(wrong.is_err());
    }

    #[test]
    fn so3_and_affine_line_validate() {
        assert!(validate_algebra(&LieAlgebra::so3()).is_ok());
        assert!(validate_algebra(&LieAlgebra::affine_line()).is_ok());
        assert!(validate_algebra(&LieAlgebra::abelian(5)).is_ok());
        assert!(validate_algebra(&so3_plus_center()).is_ok());
    }

    #[test]
    fn so3_bracket_is_cross_product() {
        let alg = LieAlgebra::so3();
        assert_eq!(alg.bracket(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn single_entry_antisymmetry_violation_is_located() {
        let mut s = Tensor3::zeros(3);
        s.set(1, 1, 2, 1.0);
        let alg = LieAlgebra::new("broken", s).unwrap();
        let report = validate_algebra(&alg);
        assert!(!report.antisymmetry.holds());
        assert_eq!(report.antisymmetry.worst_at, Some(vec![1, 1, 2]));
        assert_eq!(report.antisymmetry.worst_residual, 1.0);
    }

    #[test]
    fn corruptions_of_valid_algebras_are_rejected() {
        for alg in [LieAlgebra::so3(), LieAlgebra::affine_line()] {
            let mut s = alg.structure().clone();
            let v = s.get(0, 0, 1);
            s.set(0, 0, 1, v + 0.5);
            let broken = LieAlgebra::new("corrupt", s).unwrap();
            assert!(!validate_algebra(&broken).is_ok());
        }
    }

    #[test]
    fn jacobi_perturbation_residual_matches_direct_evaluation() {
        // [e0, e1] = e2 + 1e-6 e0 keeps antisymmetry but breaks Jacobi.
        let base = so3_plus_center();
        let mut s = base.structure().clone();
        s.set(0, 0, 1, 1e-6);
        s.set(0, 1, 0, -1e-6);
        let alg = LieAlgebra::new("perturbed", s).unwrap();
        let report = validate_algebra(&alg);
        assert!(report.antisymmetry.holds());
        assert!(!report.jacobi.holds());
        let oracle = jacobi_by_brackets(&alg);
        assert!((report.jacobi.worst_residual - oracle).abs() < 1e-18);
        assert!((report.jacobi.worst_residual - 1e-6).abs() < 1e-9, "{}", report.jacobi.worst_residual);
    }

    #[test]
    fn rigid_body_rhs_at_reference_point() {
        let (alg, ham) = rigid_body(1.0, 2.0, 3.0).unwrap();
        let dy = euler_rhs(&alg, &ham, &DualVector(vec![0.0, 1.0, 1.0])).unwrap();
        assert!((dy.0[0] + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(dy.0[1], 0.0);
        assert_eq!(dy.0[2], 0.0);
    }

    #[test]
    fn rigid_body_reproduces_classical_euler_equations() {
        let i = [1.3, 2.1, 0.7];
        let (alg, ham) = rigid_body(i[0], i[1], i[2]).unwrap();
        let y = [0.3, -0.8, 1.7];
        let dy = euler_rhs(&alg, &ham, &DualVector(y.to_vec())).unwrap();
        let expected = rigid_body_by_hand(i, y);
        for a in 0..3 {
            assert!((dy.0[a] - expected[a]).abs() < 1e-14);
        }
        // I_1 w_1' = (I_2 - I_3) w_2 w_3 in angular velocities
        let w: Vec<f64> = (0..3).map(|a| y[a] / i[a]).collect();
        assert!((dy.0[0] - (i[1] - i[2]) * w[1] * w[2]).abs() < 1e-14);
    }

    #[test]
    fn symmetric_top_has_trivial_flow() {
        let (alg, ham) = rigid_body(1.0, 1.0, 1.0).unwrap();
        let dy = euler_rhs(&alg, &ham, &DualVector(vec![0.4, -1.1, 2.5])).unwrap();
        assert!(dy.0.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn zero_and_abelian_give_zero_field() {
        let (alg, ham) = rigid_body(1.0, 2.0, 3.0).unwrap();
        assert!(euler_rhs(&alg, &ham, &DualVector::zeros(3)).unwrap().0.iter().all(|x| *x == 0.0));
        let ab = LieAlgebra::abelian(3);
        let dy = euler_rhs(&ab, &ham, &DualVector(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(dy.0.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn hamiltonian_values() {
        let ham = QuadraticHamiltonian::diagonal(&[0.5, 1.0, 1.5]).unwrap();
        assert_eq!(hamiltonian_value(&ham, &DualVector(vec![1.0, 0.0, 0.0])).unwrap(), 0.5);
        assert_eq!(hamiltonian_value(&ham, &DualVector::zeros(3)).unwrap(), 0.0);
        let (_, rb) = rigid_body(1.0, 2.0, 3.0).unwrap();
        let h = hamiltonian_value(&rb, &DualVector(vec![0.1, 0.2, 0.3])).unwrap();
        let oracle = 0.1f64.powi(2) / 2.0 + 0.2f64.powi(2) / 4.0 + 0.3f64.powi(2) / 6.0;
        assert!((h - oracle).abs() < 1e-16);
        assert!((h - 0.03).abs() < 1e-15);
    }

    #[test]
    fn dimension_and_domain_errors() {
        let (alg, ham) = rigid_body(1.0, 2.0, 3.0).unwrap();
        assert!(matches!(
            euler_rhs(&alg, &ham, &DualVector::zeros(2)),
            Err(Error::Dimension { .. })
        ));
        let ham2 = QuadraticHamiltonian::diagonal(&[1.0, 1.0]).unwrap();
        assert!(euler_rhs(&alg, &ham2, &DualVector::zeros(3)).is_err());
        assert!(hamiltonian_value(&ham, &DualVector::zeros(4)).is_err());
        assert!(matches!(rigid_body(0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(rigid_body(1.0, -2.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            QuadraticHamiltonian::new(vec![vec![1.0, 0.0], vec![0.0, -1.0]]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(QuadraticHamiltonian::new(vec![vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn eigen_bounds_of_rigid_body_form() {
        let (_, ham) = rigid_body(1.0, 2.0, 3.0).unwrap();
        let (lo, hi) = ham.eigen_bounds();
        assert!((lo - 1.0 / 6.0).abs() < 1e-14);
        assert!((hi - 0.5).abs() < 1e-14);
    }

    fn random_spd(n: usize, seed: &[f64]) -> QuadraticHamiltonian {
        // M = B B^T + n I
        let b: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| seed[(i * n + j) % seed.len()]).collect()).collect();
        let m = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                    .collect()
            })
            .collect();
        QuadraticHamiltonian::new(m).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn euler_field_is_tangent_to_level_sets(
            y in proptest::collection::vec(-3.0f64..3.0, 3),
            inertia in proptest::collection::vec(0.2f64..5.0, 3),
        ) {
            let (alg, ham) = rigid_body(inertia[0], inertia[1], inertia[2]).unwrap();
            let dy = euler_rhs(&alg, &ham, &DualVector(y.clone())).unwrap();
            let rate = 2.0 * ham.bilinear(&dy.0, &y);
            let size = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(rate.abs() <= 1e-12 * (1.0 + size.powi(3)));
        }

        #[test]
        fn conservation_holds_for_general_forms(
            y in proptest::collection::vec(-2.0f64..2.0, 3),
            seed in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let ham = random_spd(3, &seed);
            let alg = LieAlgebra::so3();
            let dy = euler_rhs(&alg, &ham, &DualVector(y.clone())).unwrap();
            let rate = 2.0 * ham.bilinear(&dy.0, &y);
            let size = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(rate.abs() <= 1e-12 * (1.0 + size.powi(3)));
        }

        #[test]
        fn euler_field_is_quadratic(
            y in proptest::collection::vec(-2.0f64..2.0, 2),
            lambda in -4.0f64..4.0,
        ) {
            let alg = LieAlgebra::affine_line();
            let ham = QuadraticHamiltonian::new(vec![vec![1.0, 0.3], vec![0.3, 2.0]]).unwrap();
            let base = euler_rhs(&alg, &ham, &DualVector(y.clone())).unwrap();
            let scaled_y: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let scaled = euler_rhs(&alg, &ham, &DualVector(scaled_y)).unwrap();
            for a in 0..2 {
                prop_assert!((scaled.0[a] - lambda * lambda * base.0[a]).abs() <= 1e-12 * (1.0 + base.0[a].abs() * lambda * lambda));
            }
        }
    }
}
