//! Teleportation of one qubit over a shared `|φ₀₀⟩` pair.
//!
//! Register layout is `input ⊗ alice_half ⊗ bob_half`. Alice measures the first two
//! qubits in the Bell basis, announces the outcome index and Bob applies the
//! matching Pauli correction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hilbert::{self, OperatorMatrix, ProjectiveMeasurement, StateVector};
use crate::inequalities::ChshScenario;
use crate::numeric::Tolerances;
use crate::{Error, Result};

/// Normalized input qubit `a|0⟩ + b|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleportInput {
    a: Complex64,
    b: Complex64,
}

impl TeleportInput {
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let norm_sq = a.norm_sqr() + b.norm_sqr();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > Tolerances::DEFAULT.normalization {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { a, b })
    }

    /// Draws a random input from normalized complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let mut g = || {
                let v: f64 = rng.sample(rand_distr::StandardNormal);
                v
            };
            let (a, b) = (Complex64::new(g(), g()), Complex64::new(g(), g()));
            let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if n > 1e-6 {
                return Self { a: a / n, b: b / n };
            }
        }
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn b(&self) -> Complex64 {
        self.b
    }

    pub fn state(&self) -> StateVector {
        StateVector::new(vec![self.a, self.b]).expect("validated at construction")
    }
}

/// Bob's correction, listed in Bell-outcome order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliCorrection {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "X")]
    X,
    /// `σ_z σ_x`: first `σ_x`, then `σ_z`.
    #[serde(rename = "ZX")]
    ZX,
}

impl PauliCorrection {
    pub const ALL: [PauliCorrection; 4] = [
        PauliCorrection::Identity,
        PauliCorrection::Z,
        PauliCorrection::X,
        PauliCorrection::ZX,
    ];

    pub fn for_outcome(outcome: usize) -> Result<Self> {
        Self::ALL
            .get(outcome)
            .copied()
            .ok_or_else(|| Error::input("forced_outcome", format!("{outcome} is not in 0..=3")))
    }

    pub fn label(self) -> &'static str {
        match self {
            PauliCorrection::Identity => "I",
            PauliCorrection::Z => "Z",
            PauliCorrection::X => "X",
            PauliCorrection::ZX => "ZX",
        }
    }

    pub fn matrix(self) -> OperatorMatrix {
        match self {
            PauliCorrection::Identity => OperatorMatrix::identity(2),
            PauliCorrection::Z => OperatorMatrix::pauli_z(),
            PauliCorrection::X => OperatorMatrix::pauli_x(),
            PauliCorrection::ZX => OperatorMatrix::pauli_z()
                .matmul(&OperatorMatrix::pauli_x())
                .expect("2x2"),
        }
    }
}

/// Record of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportTranscript {
    pub outcome_index: usize,
    pub outcome_probability: f64,
    pub correction_applied: PauliCorrection,
    #[serde(with = "crate::io::amplitudes")]
    pub bob_final: Vec<Complex64>,
    pub fidelity: f64,
}

/// How many measurement choices a scenario offers each measuring party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingReport {
    pub scenario: String,
    /// Largest number of alternative measurements any party chooses between.
    pub measurement_count: usize,
    pub per_party: Vec<usize>,
}

pub trait SettingChoice {
    fn setting_report(&self) -> SettingReport;
}

/// The protocol object: one fixed Bell-basis measurement on Alice's side.
#[derive(Debug, Clone)]
pub struct TeleportProtocol {
    bell_measurement: ProjectiveMeasurement,
}

impl Default for TeleportProtocol {
    fn default() -> Self {
        Self::new()
    }
}

impl TeleportProtocol {
    pub fn new() -> Self {
        let id = OperatorMatrix::identity(2);
        let projectors = hilbert::bell_states()
            .iter()
            .map(|b| OperatorMatrix::projector(b).kron(&id))
            .collect();
        Self {
            bell_measurement: ProjectiveMeasurement::new(projectors).expect("Bell basis"),
        }
    }

    /// Alice's measurement choices. There is exactly one.
    pub fn measurements(&self) -> &[ProjectiveMeasurement] {
        std::slice::from_ref(&self.bell_measurement)
    }

    /// The full register `|ψ⟩ ⊗ |φ₀₀⟩`.
    pub fn register(&self, input: &TeleportInput) -> StateVector {
        hilbert::tensor(&input.state(), &hilbert::phi00()).expect("dimension 8")
    }

    /// Outcome probabilities of the Bell measurement on the register.
    pub fn outcome_probabilities(&self, input: &TeleportInput) -> Result<Vec<f64>> {
        hilbert::born_probabilities(&self.bell_measurement, &self.register(input))
    }

    /// Bob's (normalized) qubit after Alice obtains `outcome`.
    pub fn bob_branch(&self, input: &TeleportInput, outcome: usize) -> Result<StateVector> {
        let bell = hilbert::bell_states();
        let bra = bell
            .get(outcome)
            .ok_or_else(|| Error::input("outcome", format!("{outcome} is not in 0..=3")))?;
        let register = self.register(input);
        let amps = register.amplitudes();
        // Contract the first two qubits against the Bell bra.
        let bob: Vec<Complex64> = (0..2)
            .map(|j| {
                bra.amplitudes()
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b.conj() * amps[i * 2 + j])
                    .sum()
            })
            .collect();
        StateVector::normalized(bob)
    }

    /// Runs the protocol with the caller's random stream.
    pub fn run_with_rng<R: Rng + ?Sized>(
        &self,
        input: &TeleportInput,
        forced_outcome: Option<usize>,
        rng: &mut R,
    ) -> Result<TeleportTranscript> {
        let probabilities = self.outcome_probabilities(input)?;
        let outcome = match forced_outcome {
            Some(k) if k < 4 => k,
            Some(k) => {
                return Err(Error::input("forced_outcome", format!("{k} is not in 0..=3")));
            }
            None => sample_index(&probabilities, rng.random::<f64>()),
        };
        let correction = PauliCorrection::for_outcome(outcome)?;
        let branch = self.bob_branch(input, outcome)?;
        let bob_final = hilbert::apply(&correction.matrix(), &branch)?.into_state()?;
        let fidelity = input.state().fidelity(&bob_final)?;
        Ok(TeleportTranscript {
            outcome_index: outcome,
            outcome_probability: probabilities[outcome],
            correction_applied: correction,
            bob_final: bob_final.amplitudes().to_vec(),
            fidelity,
        })
    }
}

impl SettingChoice for TeleportProtocol {
    fn setting_report(&self) -> SettingReport {
        let count = self.measurements().len();
        SettingReport {
            scenario: "teleportation".into(),
            measurement_count: count,
            per_party: vec![count],
        }
    }
}

impl SettingChoice for ChshScenario {
    fn setting_report(&self) -> SettingReport {
        let per_party = vec![self.alice_observables().len(), self.bob_observables().len()];
        SettingReport {
            scenario: "chsh".into(),
            measurement_count: per_party.iter().copied().max().unwrap_or(0),
            per_party,
        }
    }
}

/// One teleportation run, seeded explicitly.
pub fn run_teleportation(
    input: &TeleportInput,
    forced_outcome: Option<usize>,
    seed: u64,
) -> Result<TeleportTranscript> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TeleportProtocol::new().run_with_rng(input, forced_outcome, &mut rng)
}

/// Structural report for the teleportation protocol: a single measurement, no
/// setting choice.
pub fn verify_no_setting_choice() -> SettingReport {
    TeleportProtocol::new().setting_report()
}

fn sample_index(probabilities: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probabilities.len() - 1
}
