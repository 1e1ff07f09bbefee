use nalgebra::Complex;

use super::{check_width, CircuitTemplate, Gate, GateKind};
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// |0...0> on `width` qubits.
    pub fn zero(width: usize) -> Result<Self> {
        check_width(width)?;
        let mut amplitudes = vec![ZERO; 1 << width];
        amplitudes[0] = ONE;
        Ok(StateVector { amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the
    /// vector must be normalised within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_power_of_two() || amplitudes.len() < 2 {
            return Err(Error::validation(
                "amplitude count must be a power of two >= 2",
            ));
        }
        let s = StateVector { amplitudes };
        if (s.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::validation("state vector is not normalised"));
        }
        Ok(s)
    }

    pub fn width(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |<self|other>|^2
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    fn apply(&mut self, m: &Mat2, target: usize, control: Option<usize>) {
        let tbit = 1usize << target;
        let cmask = control.map_or(0, |c| 1usize << c);
        for i in 0..self.amplitudes.len() {
            if i & tbit != 0 || i & cmask != cmask {
                continue;
            }
            let j = i | tbit;
            let (a0, a1) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

fn rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(0.0, -s)],
        [C64::new(0.0, -s), C64::new(c, 0.0)],
    ]
}

fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ]
}

fn rz(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]]
}

fn gate_matrix(gate: &Gate, params: &[f64]) -> Mat2 {
    let angle = || params[gate.param_slot.expect("validated rotation gate")];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match gate.kind {
        GateKind::Rx | GateKind::Crx => rx(angle()),
        GateKind::Ry | GateKind::Cry => ry(angle()),
        GateKind::Rz | GateKind::Crz => rz(angle()),
        GateKind::H => [
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            [C64::new(h, 0.0), C64::new(-h, 0.0)],
        ],
        GateKind::Cx => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Cz => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Applies `template` (all layers) to an existing state.
pub fn evolve(state: &mut StateVector, template: &CircuitTemplate, params: &[f64]) -> Result<()> {
    template.check_params(params)?;
    if state.width() != template.width() {
        return Err(Error::validation(format!(
            "state has {} qubits, template expects {}",
            state.width(),
            template.width()
        )));
    }
    for gate in template.unrolled() {
        let m = gate_matrix(&gate, params);
        state.apply(&m, gate.target, gate.control);
    }
    Ok(())
}

/// U(params)|0...0>.
pub fn simulate(template: &CircuitTemplate, params: &[f64]) -> Result<StateVector> {
    template.check_params(params)?;
    let mut state = StateVector::zero(template.width())?;
    evolve(&mut state, template, params)?;
    Ok(state)
}

/// |<0|U(a)^dagger U(b)|0>|^2, computed from a single overlap.
pub fn fidelity(template: &CircuitTemplate, params_a: &[f64], params_b: &[f64]) -> Result<f64> {
    let a = simulate(template, params_a)?;
    let b = simulate(template, params_b)?;
    Ok(a.overlap(&b).min(1.0))
}
