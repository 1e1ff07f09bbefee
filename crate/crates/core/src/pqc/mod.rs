//! Parameterised quantum circuits described as data.
//!
//! A [`CircuitTemplate`] is one layer of gates (the base layer) repeated
//! `layers` times. Rotation gates refer to parameter slots; every repetition
//! binds a fresh block of slots, so a template with `s` distinct slots in its
//! base layer consumes `s * layers` parameters.
//!
//! Qubit `q` corresponds to bit `q` of a basis-state index (little-endian).

mod haar;
mod sim;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub use haar::{haar_fidelity_cdf, haar_fidelity_pdf, haar_state, haar_unitary};
pub use sim::{evolve, fidelity, simulate, StateVector};

/// Width cap used when `QKEXT_MAX_QUBITS` is unset.
pub const DEFAULT_MAX_QUBITS: usize = 6;
/// Environment variable overriding the width cap.
pub const MAX_QUBITS_ENV: &str = "QKEXT_MAX_QUBITS";
const HARD_MAX_QUBITS: usize = 24;

/// Current statevector width cap.
pub fn max_qubits() -> usize {
    std::env::var(MAX_QUBITS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .map(|w| w.min(HARD_MAX_QUBITS))
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

pub(crate) fn check_width(width: usize) -> Result<()> {
    if width == 0 {
        return Err(Error::validation("circuit width must be at least 1"));
    }
    let max = max_qubits();
    if width > max {
        return Err(Error::Capacity {
            requested: width,
            max,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    Cx,
    Cz,
    Crx,
    Cry,
    Crz,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::H,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Crx,
        GateKind::Cry,
        GateKind::Crz,
    ];

    /// Whether the gate carries a rotation angle.
    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::Rx
                | GateKind::Ry
                | GateKind::Rz
                | GateKind::Crx
                | GateKind::Cry
                | GateKind::Crz
        )
    }

    pub fn is_controlled(self) -> bool {
        matches!(
            self,
            GateKind::Cx | GateKind::Cz | GateKind::Crx | GateKind::Cry | GateKind::Crz
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Cx => "CX",
            GateKind::Cz => "CZ",
            GateKind::Crx => "CRX",
            GateKind::Cry => "CRY",
            GateKind::Crz => "CRZ",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown gate kind `{s}`")))
    }
}

impl<'de> Deserialize<'de> for GateKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param_slot: Option<usize>,
}

impl Gate {
    pub fn fixed(kind: GateKind, target: usize) -> Self {
        Gate {
            kind,
            target,
            control: None,
            param_slot: None,
        }
    }

    pub fn rotation(kind: GateKind, target: usize, slot: usize) -> Self {
        Gate {
            kind,
            target,
            control: None,
            param_slot: Some(slot),
        }
    }

    pub fn controlled(kind: GateKind, control: usize, target: usize, slot: Option<usize>) -> Self {
        Gate {
            kind,
            target,
            control: Some(control),
            param_slot: slot,
        }
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        if self.target >= width {
            return Err(Error::validation(format!(
                "{} target qubit {} out of range for width {width}",
                self.kind, self.target
            )));
        }
        match (self.kind.is_controlled(), self.control) {
            (true, None) => {
                return Err(Error::validation(format!(
                    "{} gate requires a control qubit",
                    self.kind
                )))
            }
            (false, Some(_)) => {
                return Err(Error::validation(format!(
                    "{} gate takes no control qubit",
                    self.kind
                )))
            }
            (true, Some(c)) if c >= width || c == self.target => {
                return Err(Error::validation(format!(
                    "{} control qubit {c} invalid (target {}, width {width})",
                    self.kind, self.target
                )))
            }
            _ => {}
        }
        if self.kind.is_rotation() != self.param_slot.is_some() {
            return Err(Error::validation(format!(
                "{} gate: parameter slot must be present exactly for rotation gates",
                self.kind
            )));
        }
        Ok(())
    }
}

/// On-disk template description.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateFile {
    id: String,
    width: usize,
    layers: usize,
    gates: Vec<Gate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemplateFile", into = "TemplateFile")]
pub struct CircuitTemplate {
    id: String,
    width: usize,
    base_layer: Vec<Gate>,
    layers: usize,
    slots_per_layer: usize,
}

impl TryFrom<TemplateFile> for CircuitTemplate {
    type Error = Error;

    fn try_from(f: TemplateFile) -> Result<Self> {
        CircuitTemplate::new(f.id, f.width, f.gates, f.layers)
    }
}

impl From<CircuitTemplate> for TemplateFile {
    fn from(t: CircuitTemplate) -> Self {
        TemplateFile {
            id: t.id,
            width: t.width,
            layers: t.layers,
            gates: t.base_layer,
        }
    }
}

impl CircuitTemplate {
    /// Builds and validates a template. The parameter slots used by the base
    /// layer must be exactly `0..s` for some `s` (slots may be shared).
    pub fn new(
        id: impl Into<String>,
        width: usize,
        base_layer: Vec<Gate>,
        layers: usize,
    ) -> Result<Self> {
        check_width(width)?;
        if layers == 0 {
            return Err(Error::validation("layer count must be at least 1"));
        }
        for gate in &base_layer {
            gate.validate(width)?;
        }
        let mut used: Vec<usize> = base_layer.iter().filter_map(|g| g.param_slot).collect();
        used.sort_unstable();
        used.dedup();
        if let Some(i) = used.iter().enumerate().position(|(i, &s)| i != s) {
            return Err(Error::validation(format!(
                "parameter slots must be contiguous from 0; slot {i} is unused"
            )));
        }
        Ok(CircuitTemplate {
            id: id.into(),
            width,
            base_layer,
            layers,
            slots_per_layer: used.len(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn base_layer(&self) -> &[Gate] {
        &self.base_layer
    }

    pub fn slots_per_layer(&self) -> usize {
        self.slots_per_layer
    }

    /// Total number of parameters, `slots_per_layer * layers`.
    pub fn param_count(&self) -> usize {
        self.slots_per_layer * self.layers
    }

    /// Same base layer with a different repetition count.
    pub fn with_layers(&self, layers: usize) -> Result<Self> {
        CircuitTemplate::new(self.id.clone(), self.width, self.base_layer.clone(), layers)
    }

    /// Gates of every layer in application order, with slots already offset.
    pub fn unrolled(&self) -> impl Iterator<Item = Gate> + '_ {
        (0..self.layers).flat_map(move |layer| {
            let offset = layer * self.slots_per_layer;
            self.base_layer.iter().map(move |g| Gate {
                param_slot: g.param_slot.map(|s| s + offset),
                ..*g
            })
        })
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ParameterArity {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("parameter {i} is not finite")));
        }
        Ok(())
    }
}

/// Identifiers of the built-in templates.
pub const BUILTIN_IDS: [&str; 4] = ["rx_rz", "ry_cx_chain", "ry_cz_ring", "ry_rz_crx_all"];

/// Built-in templates:
///
/// * `rx_rz`: RX then RZ on every qubit, no entanglement.
/// * `ry_cx_chain`: RY on every qubit, then CX(q, q+1) along a line.
/// * `ry_cz_ring`: RY on every qubit, then CZ(q, q+1 mod w) around a ring.
/// * `ry_rz_crx_all`: RY and RZ on every qubit, then CRX over all ordered pairs.
pub fn builtin(id: &str, width: usize, layers: usize) -> Result<CircuitTemplate> {
    use GateKind::*;
    let mut gates = Vec::new();
    let mut slot = 0usize;
    let mut next = || {
        slot += 1;
        slot - 1
    };
    match id {
        "rx_rz" => {
            for q in 0..width {
                gates.push(Gate::rotation(Rx, q, next()));
                gates.push(Gate::rotation(Rz, q, next()));
            }
        }
        "ry_cx_chain" => {
            for q in 0..width {
                gates.push(Gate::rotation(Ry, q, next()));
            }
            for q in 1..width {
                gates.push(Gate::controlled(Cx, q - 1, q, None));
            }
        }
        "ry_cz_ring" => {
            for q in 0..width {
                gates.push(Gate::rotation(Ry, q, next()));
            }
            // a ring on two qubits is a single edge
            let edges = match width {
                1 => 0,
                2 => 1,
                w => w,
            };
            for q in 0..edges {
                gates.push(Gate::controlled(Cz, q, (q + 1) % width, None));
            }
        }
        "ry_rz_crx_all" => {
            for q in 0..width {
                gates.push(Gate::rotation(Ry, q, next()));
                gates.push(Gate::rotation(Rz, q, next()));
            }
            for c in 0..width {
                for t in 0..width {
                    if c != t {
                        gates.push(Gate::controlled(Crx, c, t, Some(next())));
                    }
                }
            }
        }
        other => {
            return Err(Error::validation(format!(
                "unknown built-in template `{other}` (known: {})",
                BUILTIN_IDS.join(", ")
            )))
        }
    }
    CircuitTemplate::new(id, width, gates, layers)
}

/// Resolves a template reference: an existing JSON file path, or a built-in id.
/// Built-ins use the given width and layer count; a file's layer count is
/// replaced by `layers` when one is supplied.
pub fn resolve(reference: &str, width: usize, layers: Option<usize>) -> Result<CircuitTemplate> {
    let path = Path::new(reference);
    if path.is_file() {
        let t = CircuitTemplate::load(path)?;
        return match layers {
            Some(l) if l != t.layers() => t.with_layers(l),
            _ => Ok(t),
        };
    }
    builtin(reference, width, layers.unwrap_or(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_kind_parses_case_insensitively() {
        assert_eq!("crx".parse::<GateKind>().unwrap(), GateKind::Crx);
        assert_eq!("CX".parse::<GateKind>().unwrap(), GateKind::Cx);
        assert!("swap".parse::<GateKind>().is_err());
    }

    #[test]
    fn template_json_round_trip() {
        let text = r#"{"id":"t","width":2,"layers":3,
            "gates":[{"kind":"ry","target":0,"param_slot":0},
                     {"kind":"Ry","target":1,"param_slot":1},
                     {"kind":"cx","target":1,"control":0}]}"#;
        let t = CircuitTemplate::from_json(text).unwrap();
        assert_eq!(t.param_count(), 6);
        let back = CircuitTemplate::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn invalid_gates_are_rejected() {
        let bad = [
            Gate::rotation(GateKind::Rx, 2, 0),
            Gate::fixed(GateKind::Rx, 0),
            Gate::controlled(GateKind::Cx, 0, 0, None),
            Gate::controlled(GateKind::Cz, 0, 1, Some(0)),
            Gate::fixed(GateKind::Cx, 1),
            Gate {
                param_slot: Some(0),
                ..Gate::fixed(GateKind::H, 0)
            },
        ];
        for g in bad {
            assert!(CircuitTemplate::new("x", 2, vec![g], 1).is_err(), "{g:?}");
        }
    }

    #[test]
    fn slot_gaps_are_rejected() {
        let gates = vec![Gate::rotation(GateKind::Rx, 0, 1)];
        assert!(CircuitTemplate::new("x", 1, gates, 1).is_err());
    }

    #[test]
    fn fresh_slots_per_layer() {
        let t = builtin("rx_rz", 2, 3).unwrap();
        assert_eq!(t.slots_per_layer(), 4);
        assert_eq!(t.param_count(), 12);
        let slots: Vec<usize> = t.unrolled().filter_map(|g| g.param_slot).collect();
        assert_eq!(slots, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn builtins_have_expected_arity() {
        assert_eq!(builtin("ry_cx_chain", 3, 1).unwrap().param_count(), 3);
        assert_eq!(builtin("ry_cz_ring", 3, 2).unwrap().param_count(), 6);
        assert_eq!(builtin("ry_rz_crx_all", 3, 1).unwrap().param_count(), 6 + 6);
        assert_eq!(builtin("ry_cz_ring", 1, 1).unwrap().base_layer().len(), 1);
        assert!(builtin("nope", 2, 1).is_err());
    }

    #[test]
    fn width_cap_is_enforced() {
        let err = builtin("rx_rz", DEFAULT_MAX_QUBITS + 30, 1).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(CircuitTemplate::new("x", 0, vec![], 1).is_err());
        assert!(CircuitTemplate::new("x", 1, vec![], 0).is_err());
    }
}
