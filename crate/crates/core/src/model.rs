//! Operators and states of the probe + register construction.
//!
//! Tensor order is probe (most significant), ancilla, then the `n` system
//! qubits, so a total-space basis index is
//! `probe * 2^(n+1) + ancilla * 2^n + system_index`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::operators::{
    c, hadamard_gate, kron, kron_power, pauli, ComplexMatrix, ComplexVector, Pauli, HERMITIAN_TOL,
};

/// Reference energy used by the worked example; `E_0 = alpha`.
pub const DEFAULT_ALPHA: f64 = -100.0;
pub const DEFAULT_COUPLING: f64 = 0.002;
pub const DEFAULT_TAU: f64 = 1200.0;

/// Hermitian Hamiltonian of the physical system on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemHamiltonian {
    n: usize,
    matrix: ComplexMatrix,
}

impl SystemHamiltonian {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let dim = matrix.rows();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::BadDimension(dim));
        }
        let defect = matrix.hermitian_defect();
        if defect > HERMITIAN_TOL * matrix.max_abs() {
            return Err(Error::NotHermitian { asymmetry: defect });
        }
        Ok(Self {
            n: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn from_real_symmetric(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real(dim, dim, entries))
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbeParameters {
    pub omega: f64,
    pub c: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl Default for ProbeParameters {
    fn default() -> Self {
        Self {
            omega: 0.0,
            c: DEFAULT_COUPLING,
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
        }
    }
}

impl ProbeParameters {
    pub fn new(omega: f64, c: f64, alpha: f64, tau: f64) -> Result<Self> {
        let p = Self {
            omega,
            c,
            alpha,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero coupling and zero time are accepted: both are useful limits.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("c", self.c),
            ("alpha", self.alpha),
            ("tau", self.tau),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.c < 0.0 {
            return Err(Error::InvalidParameter("c must be non-negative".into()));
        }
        if self.tau < 0.0 {
            return Err(Error::InvalidParameter("tau must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_omega(self, omega: f64) -> Self {
        Self { omega, ..self }
    }

    /// Raised when the coupling is not small against the probe frequency.
    pub fn weak_coupling_advisory(&self) -> bool {
        self.c >= 0.01 * self.omega.abs()
    }

    /// `c * tau`, reported as a diagnostic.
    pub fn coupling_time_product(&self) -> f64 {
        self.c * self.tau
    }
}

/// Total Hamiltonian of probe + register together with its three addends.
#[derive(Clone, Debug)]
pub struct CompositeModel {
    pub system: SystemHamiltonian,
    pub params: ProbeParameters,
    pub total: ComplexMatrix,
    pub term_probe: ComplexMatrix,
    pub term_register: ComplexMatrix,
    pub term_interaction: ComplexMatrix,
}

impl CompositeModel {
    pub fn qubits(&self) -> usize {
        self.system.qubits() + 2
    }

    pub fn dim(&self) -> usize {
        self.total.rows()
    }
}

/// Probe energy operator with the excited state `|1>` at `+1`: `diag(-1, +1) = -sigma_z`.
pub fn probe_energy_operator() -> ComplexMatrix {
    pauli(Pauli::Z).scale_real(-1.0)
}

/// `alpha |0><0| ⊗ I_N + |1><1| ⊗ H_S`.
pub fn build_register_hamiltonian(sys: &SystemHamiltonian, alpha: f64) -> ComplexMatrix {
    let n_dim = sys.dim();
    let mut out = ComplexMatrix::zeros(2 * n_dim, 2 * n_dim);
    for i in 0..n_dim {
        out[(i, i)] = c(alpha, 0.0);
        for j in 0..n_dim {
            out[(n_dim + i, n_dim + j)] = sys.matrix()[(i, j)];
        }
    }
    out
}

/// `(I + sigma_x) / sqrt(2)`.
fn plus_factor() -> ComplexMatrix {
    ComplexMatrix::from_real(2, 2, &[FRAC_1_SQRT_2; 4])
}

/// Excitation operator `sigma_x ⊗ [(I + sigma_x)/sqrt(2)]^{⊗n}` on the register.
pub fn build_excitation_operator(n: usize) -> ComplexMatrix {
    assert!(n >= 1, "system needs at least one qubit");
    kron(&pauli(Pauli::X), &kron_power(&plus_factor(), n))
}

pub fn build_total_hamiltonian(
    sys: &SystemHamiltonian,
    params: &ProbeParameters,
) -> Result<CompositeModel> {
    params.validate()?;
    let n = sys.qubits();
    let reg_dim = 1usize << (n + 1);

    let term_probe = kron(
        &probe_energy_operator().scale_real(0.5 * params.omega),
        &ComplexMatrix::identity(reg_dim),
    );
    let term_register = kron(
        &ComplexMatrix::identity(2),
        &build_register_hamiltonian(sys, params.alpha),
    );
    let term_interaction = interaction_term(n, params.c);
    let total = &(&term_probe + &term_register) + &term_interaction;

    Ok(CompositeModel {
        system: sys.clone(),
        params: *params,
        total,
        term_probe,
        term_register,
        term_interaction,
    })
}

/// `c sigma_x ⊗ A` on the full probe + register space.
pub fn interaction_term(n: usize, coupling: f64) -> ComplexMatrix {
    kron(
        &pauli(Pauli::X).scale_real(coupling),
        &build_excitation_operator(n),
    )
}

/// Uniform reference state `|0>_a ⊗ N^{-1/2} sum_k |k>` on the register.
pub fn reference_state(n: usize) -> ComplexVector {
    let ancilla0 = ComplexVector::basis(2, 0);
    ancilla0.kron(&uniform_superposition(n))
}

/// `H_d^{⊗n} |0...0>`.
pub fn uniform_superposition(n: usize) -> ComplexVector {
    let h = kron_power(&hadamard_gate(), n);
    h.column(0)
}

/// Probe excited, register in the reference state: `|1>_p |0>_a |+...+>`.
pub fn prepare_initial_state(n: usize) -> ComplexVector {
    assert!(n >= 1, "system needs at least one qubit");
    ComplexVector::basis(2, 1).kron(&reference_state(n))
}

/// Register state `|1>_a ⊗ |lambda>` for a system vector `lambda`.
pub fn excited_register_state(system_state: &ComplexVector) -> ComplexVector {
    ComplexVector::basis(2, 1).kron(system_state)
}

/// Total-space state `|0>_p |1>_a |lambda>`: the probe has decayed and the
/// system sits in `lambda`.
pub fn decayed_state(system_state: &ComplexVector) -> ComplexVector {
    ComplexVector::basis(2, 0).kron(&excited_register_state(system_state))
}
