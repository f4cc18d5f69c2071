//! Scenario configuration files.
//!
//! A scenario is a single JSON object; see the README for the schema.
//! Parse errors carry a JSON pointer to the offending field.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use weaknull::system::Provenance;
use weaknull::{
    asymptotic_system, catalogue, catalogue_hamiltonian, hamiltonian_asymptotic_system,
    AsymptoticSystem, LieAlgebra, QuadraticHamiltonian, WaveSystemSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Asymptotic,
    Classify,
    Condition1,
    Wave,
    Trace,
    FullPipeline,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Asymptotic => "asymptotic",
            Action::Classify => "classify",
            Action::Condition1 => "condition1",
            Action::Wave => "wave",
            Action::Trace => "trace",
            Action::FullPipeline => "full_pipeline",
        }
    }
}

/// How a scenario names its system.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SystemRef {
    /// `"john"` or `["rigid_body", 1, 2, 3]`.
    Catalogue { name: String, params: Vec<f64> },
    /// `{"algebra": {...}, "hamiltonian": {...}}`.
    Hamiltonian {
        algebra: LieAlgebra,
        hamiltonian: QuadraticHamiltonian,
    },
    /// A raw wave system.
    Inline(WaveSystemSpec),
}

impl<'de> Deserialize<'de> for SystemRef {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = Value::deserialize(de)?;
        match v {
            Value::String(name) => Ok(SystemRef::Catalogue { name, params: Vec::new() }),
            Value::Array(items) => {
                let (first, rest) = items
                    .split_first()
                    .ok_or_else(|| D::Error::custom("system array must start with a catalogue name"))?;
                let name = first
                    .as_str()
                    .ok_or_else(|| D::Error::custom("system array must start with a catalogue name"))?
                    .to_string();
                let params = rest
                    .iter()
                    .map(|p| p.as_f64().ok_or_else(|| D::Error::custom(format!("parameter {p} is not a number"))))
                    .collect::<std::result::Result<_, _>>()?;
                Ok(SystemRef::Catalogue { name, params })
            }
            Value::Object(ref map) if map.contains_key("name") => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct Named {
                    name: String,
                    #[serde(default)]
                    params: Vec<f64>,
                }
                let n: Named = serde_json::from_value(v).map_err(D::Error::custom)?;
                Ok(SystemRef::Catalogue { name: n.name, params: n.params })
            }
            Value::Object(ref map) if map.contains_key("algebra") => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct Ham {
                    algebra: LieAlgebra,
                    hamiltonian: QuadraticHamiltonian,
                }
                let h: Ham = serde_json::from_value(v).map_err(D::Error::custom)?;
                Ok(SystemRef::Hamiltonian {
                    algebra: h.algebra,
                    hamiltonian: h.hamiltonian,
                })
            }
            Value::Object(_) => serde_json::from_value(v).map(SystemRef::Inline).map_err(D::Error::custom),
            other => Err(D::Error::custom(format!(
                "system must be a name, a [name, params...] array or an object, got {other}"
            ))),
        }
    }
}

/// A system with everything the actions need.
#[derive(Debug, Clone)]
pub struct ResolvedSystem {
    pub label: String,
    pub spec: WaveSystemSpec,
    pub asymptotic: AsymptoticSystem,
}

impl ResolvedSystem {
    pub fn hamiltonian(&self) -> Option<(&LieAlgebra, &QuadraticHamiltonian)> {
        self.asymptotic.hamiltonian()
    }
}

impl SystemRef {
    pub fn resolve(&self) -> Result<ResolvedSystem> {
        match self {
            SystemRef::Catalogue { name, params } => {
                let spec = catalogue(name, params)?;
                let asymptotic = match catalogue_hamiltonian(name, params)? {
                    Some((alg, ham)) => hamiltonian_asymptotic_system(&alg, &ham)?,
                    None => asymptotic_system(&spec),
                };
                let label = if params.is_empty() {
                    name.clone()
                } else {
                    let p: Vec<String> = params.iter().map(|x| format!("{x}")).collect();
                    format!("{name}({})", p.join(","))
                };
                Ok(ResolvedSystem { label, spec, asymptotic })
            }
            SystemRef::Hamiltonian { algebra, hamiltonian } => {
                let spec = weaknull::from_hamiltonian(algebra, hamiltonian)?;
                let asymptotic = hamiltonian_asymptotic_system(algebra, hamiltonian)?;
                Ok(ResolvedSystem {
                    label: spec.label.clone(),
                    spec,
                    asymptotic,
                })
            }
            SystemRef::Inline(spec) => {
                let asymptotic = asymptotic_system(spec);
                debug_assert!(matches!(asymptotic.provenance, Provenance::WaveSystem { .. }));
                Ok(ResolvedSystem {
                    label: if spec.label.is_empty() { "inline".into() } else { spec.label.clone() },
                    spec: spec.clone(),
                    asymptotic,
                })
            }
        }
    }
}

fn default_delta() -> f64 {
    0.5
}
fn default_c() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-10
}
fn default_fail_threshold() -> f64 {
    100.0
}

/// Grid and trace parameters for the `wave`, `trace` and `full_pipeline`
/// actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveConfig {
    pub u_range: [f64; 2],
    pub v_range: [f64; 2],
    pub h: f64,
    /// Bump amplitude per field; defaults cycle through `[1.0, -0.7, 0.5]`.
    pub amplitudes: Option<Vec<f64>>,
    /// Bump centre; defaults to the middle of the u range.
    pub center: Option<f64>,
    pub width: f64,
    /// Outgoing rays to trace; defaults to the ray 40% into the u range.
    pub u_fixed: Option<Vec<f64>>,
    /// Start of the trace/ODE comparison; defaults to one decade of r
    /// before the end of the trace.
    pub s_start: Option<f64>,
    /// Also run at `h / 2` and report the refinement ratios.
    pub refine: bool,
    pub blowup_threshold: f64,
    /// Write the full grid as CSV (can be large).
    pub export_grid: bool,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            u_range: [0.0, 10.0],
            v_range: [20.0, 1020.0],
            h: 0.25,
            amplitudes: None,
            center: None,
            width: 2.0,
            u_fixed: None,
            s_start: None,
            refine: false,
            blowup_threshold: 1e6,
            export_grid: false,
        }
    }
}

impl WaveConfig {
    pub fn amplitudes_for(&self, n: usize) -> Vec<f64> {
        match &self.amplitudes {
            Some(a) => a.clone(),
            None => (0..n).map(|k| [1.0, -0.7, 0.5][k % 3]).collect(),
        }
    }

    pub fn center(&self) -> f64 {
        self.center.unwrap_or(0.5 * (self.u_range[0] + self.u_range[1]))
    }

    pub fn u_fixed(&self) -> Vec<f64> {
        self.u_fixed
            .clone()
            .unwrap_or_else(|| vec![self.u_range[0] + 0.4 * (self.u_range[1] - self.u_range[0])])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: SystemRef,
    pub action: Action,
    /// Data size.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c", alias = "C")]
    pub c: f64,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub s_max: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Initial datum for `asymptotic`; defaults to `eps` in every component.
    #[serde(default)]
    pub phi0: Option<Vec<f64>>,
    #[serde(default = "default_fail_threshold")]
    pub fail_threshold: f64,
    #[serde(default)]
    pub wave: WaveConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_EPS: f64 = 0.1;

impl ScenarioConfig {
    pub fn eps(&self) -> f64 {
        self.eps.unwrap_or(DEFAULT_EPS)
    }

    pub fn s_max(&self) -> f64 {
        self.s_max.unwrap_or(100.0)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.action {
            Action::Classify => 16,
            _ => 200,
        })
    }

    /// Range checks that serde cannot express. Errors name the field by
    /// JSON pointer.
    pub fn validate(&self) -> Result<ResolvedSystem> {
        let sys = self.system.resolve().map_err(|e| anyhow!("/system: {e}"))?;
        let positive = |ptr: &str, x: f64| -> Result<()> {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                bail!("{ptr}: must be positive and finite, got {x}")
            }
        };
        let eps = self.eps();
        positive("/eps", eps)?;
        if self.action == Action::Classify && eps > 0.5 {
            bail!("/eps: classification needs eps <= 0.5, got {eps}");
        }
        positive("/delta", self.delta)?;
        positive("/c", self.c)?;
        positive("/s_max", self.s_max())?;
        positive("/fail_threshold", self.fail_threshold)?;
        if !(self.tol > 1e-14 && self.tol < 1e-3) {
            bail!("/tol: must lie in (1e-14, 1e-3), got {}", self.tol);
        }
        let trials = self.trials();
        if trials == 0 || trials > 1_000_000 {
            bail!("/trials: must lie in [1, 1000000], got {trials}");
        }
        if let Some(phi0) = &self.phi0 {
            if phi0.len() != sys.spec.n_fields {
                bail!("/phi0: expected {} components, got {}", sys.spec.n_fields, phi0.len());
            }
            if phi0.iter().any(|x| !x.is_finite()) {
                bail!("/phi0: components must be finite");
            }
        }
        if matches!(self.action, Action::Wave | Action::Trace | Action::FullPipeline) {
            let w = &self.wave;
            positive("/wave/h", w.h)?;
            positive("/wave/width", w.width)?;
            positive("/wave/blowup_threshold", w.blowup_threshold)?;
            if !(w.u_range[1] > w.u_range[0]) {
                bail!("/wave/u_range: must be increasing");
            }
            if !(w.v_range[1] > w.v_range[0]) {
                bail!("/wave/v_range: must be increasing");
            }
            if !(w.v_range[0] > w.u_range[1]) {
                bail!("/wave/v_range: v0 must exceed u1 so that r stays positive");
            }
            let cells = |len: f64| (len / w.h).round();
            if cells(w.u_range[1] - w.u_range[0]) > 20_000.0 || cells(w.v_range[1] - w.v_range[0]) > 20_000.0 {
                bail!("/wave/h: grid would exceed 20000 cells along an axis");
            }
            let amps = w.amplitudes_for(sys.spec.n_fields);
            if amps.len() != sys.spec.n_fields {
                bail!("/wave/amplitudes: expected {} entries, got {}", sys.spec.n_fields, amps.len());
            }
            for (k, u) in w.u_fixed().iter().enumerate() {
                if !(*u >= w.u_range[0] && *u <= w.u_range[1]) {
                    bail!("/wave/u_fixed/{k}: {u} lies outside the u range");
                }
            }
        }
        Ok(sys)
    }
}

/// Parses a scenario, reporting the JSON pointer of the first bad field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        use serde_path_to_error::Segment;
        let mut pointer = String::new();
        for seg in e.path().iter() {
            match seg {
                Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
                Segment::Map { key } => pointer.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
                Segment::Enum { variant } => pointer.push_str(&format!("/{variant}")),
                Segment::Unknown => pointer.push_str("/?"),
            }
        }
        if pointer.is_empty() {
            pointer.push('/');
        }
        anyhow!("{pointer}: {}", e.into_inner())
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_forms() {
        let c = parse_config(r#"{"system": "john", "action": "classify", "eps": 0.1, "s_max": 100}"#).unwrap();
        assert_eq!(c.system, SystemRef::Catalogue { name: "john".into(), params: vec![] });
        let c = parse_config(r#"{"system": ["rigid_body", 1, 2, 3], "action": "full_pipeline"}"#).unwrap();
        let sys = c.validate().unwrap();
        assert!(sys.hamiltonian().is_some());
        assert_eq!(sys.label, "rigid_body(1,2,3)");
        let c = parse_config(r#"{"system": {"name": "free", "params": [2]}, "action": "wave"}"#).unwrap();
        assert_eq!(c.validate().unwrap().spec.n_fields, 2);
    }

    #[test]
    fn inline_and_hamiltonian_forms() {
        let c = parse_config(
            r#"{"system": {"n_fields": 1, "bad_coeffs": [[[2.0]]]}, "action": "asymptotic"}"#,
        )
        .unwrap();
        let sys = c.validate().unwrap();
        assert_eq!(sys.asymptotic.rhs(&[1.0]).unwrap(), vec![0.5]);

        let c = parse_config(
            r#"{"system": {"algebra": {"label": "ab", "structure": [[[0,0],[0,0]],[[0,0],[0,0]]]},
                          "hamiltonian": {"matrix": [[1,0],[0,2]]}},
                "action": "condition1"}"#,
        )
        .unwrap();
        assert!(c.validate().unwrap().hamiltonian().is_some());
    }

    #[test]
    fn errors_carry_json_pointers() {
        let err = parse_config(r#"{"system": "john", "action": "classify", "wave": {"h": "x"}}"#).unwrap_err();
        assert!(err.to_string().starts_with("/wave/h:"), "{err}");
        let err = parse_config(r#"{"system": "john", "action": "fly"}"#).unwrap_err();
        assert!(err.to_string().starts_with("/action:"), "{err}");
        let err = parse_config(r#"{"system": "john", "action": "wave", "bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let c = parse_config(r#"{"system": "nope", "action": "wave"}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().starts_with("/system:"));
        let c = parse_config(r#"{"system": "john", "action": "classify", "eps": 0.9}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().starts_with("/eps:"));
        let c = parse_config(r#"{"system": "john", "action": "wave", "wave": {"v_range": [5, 50]}}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().starts_with("/wave/v_range:"));
        let c = parse_config(r#"{"system": "john", "action": "asymptotic", "phi0": [1, 2]}"#).unwrap();
        assert!(c.validate().unwrap_err().to_string().starts_with("/phi0:"));
    }

    #[test]
    fn defaults() {
        let c = parse_config(r#"{"system": "john", "action": "condition1"}"#).unwrap();
        assert_eq!(c.eps(), DEFAULT_EPS);
        assert_eq!(c.trials(), 200);
        assert_eq!(c.delta, 0.5);
        assert_eq!(c.wave.amplitudes_for(4), vec![1.0, -0.7, 0.5, 1.0]);
        assert_eq!(c.wave.u_fixed(), vec![4.0]);
        let c = parse_config(r#"{"system": "john", "action": "classify", "C": 2}"#).unwrap();
        assert_eq!(c.c, 2.0);
        assert_eq!(c.trials(), 16);
    }
}
