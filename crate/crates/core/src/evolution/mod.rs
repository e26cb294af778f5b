//! Time evolution under the composite Hamiltonian: exact, Trotterized, and
//! Trotterized with the gate-level interaction factor.

pub mod circuit;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{prepare_initial_state, CompositeModel};
use crate::operators::{apply, c, eigh, expm_hermitian, kron, ComplexMatrix, ComplexVector, C64};

pub use circuit::{elementary_gate_count, interaction_exponential_circuit, Gate, GateKind, GateList};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    Trotter(usize),
    Circuit(usize),
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Trotter(l) => write!(f, "trotter({l})"),
            Method::Circuit(l) => write!(f, "circuit({l})"),
        }
    }
}

/// One Trotter slice `e^{-i H_p dt} e^{-i H_r dt} e^{-i H_int dt}` repeated `slices` times.
#[derive(Clone, Debug)]
pub struct TrotterPlan {
    pub slices: usize,
    pub tau: f64,
    /// Probe, register and interaction factors, in that (left-to-right) order.
    pub factors: [ComplexMatrix; 3],
}

impl TrotterPlan {
    pub fn new(model: &CompositeModel, tau: f64, slices: usize) -> Result<Self> {
        assert!(slices >= 1, "Trotter slice count must be at least 1");
        let dt = tau / slices as f64;
        Ok(Self {
            slices,
            tau,
            factors: [
                probe_factor(model, dt),
                register_factor(model, dt)?,
                expm_hermitian(&model.term_interaction, dt)?,
            ],
        })
    }

    /// Same plan with the interaction factor built from its gate circuit.
    pub fn with_circuit(model: &CompositeModel, tau: f64, slices: usize) -> Result<Self> {
        assert!(slices >= 1, "Trotter slice count must be at least 1");
        let dt = tau / slices as f64;
        let gates = interaction_exponential_circuit(model.system.qubits(), model.params.c, dt);
        Ok(Self {
            slices,
            tau,
            factors: [
                probe_factor(model, dt),
                register_factor(model, dt)?,
                gates.decompose().to_unitary(),
            ],
        })
    }

    pub fn slice(&self) -> ComplexMatrix {
        self.factors[0]
            .matmul(&self.factors[1])
            .matmul(&self.factors[2])
    }

    pub fn propagator(&self) -> ComplexMatrix {
        self.slice().pow(self.slices as u64)
    }

    /// Applies the slice `slices` times in sequence.
    pub fn evolve(&self, state: &ComplexVector) -> Result<ComplexVector> {
        let slice = self.slice();
        let mut psi = state.clone();
        for _ in 0..self.slices {
            psi = apply(&slice, &psi)?;
        }
        Ok(psi)
    }
}

/// Diagonal probe factor.
fn probe_factor(model: &CompositeModel, dt: f64) -> ComplexMatrix {
    let diag: Vec<C64> = model
        .term_probe
        .diagonal()
        .into_iter()
        .map(|e| C64::from_polar(1.0, -e.re * dt))
        .collect();
    ComplexMatrix::from_diagonal(&diag)
}

/// `I_2 ⊗ [e^{-i alpha dt} I_N ⊕ e^{-i H_S dt}]`: the controlled system evolution.
fn register_factor(model: &CompositeModel, dt: f64) -> Result<ComplexMatrix> {
    let n_dim = model.system.dim();
    let sys_u = expm_hermitian(model.system.matrix(), dt)?;
    let ref_phase = C64::from_polar(1.0, -model.params.alpha * dt);
    let mut reg = ComplexMatrix::zeros(2 * n_dim, 2 * n_dim);
    for i in 0..n_dim {
        reg[(i, i)] = ref_phase;
        for j in 0..n_dim {
            reg[(n_dim + i, n_dim + j)] = sys_u[(i, j)];
        }
    }
    Ok(kron(&ComplexMatrix::identity(2), &reg))
}

pub fn exact_propagator(model: &CompositeModel, tau: f64) -> Result<ComplexMatrix> {
    expm_hermitian(&model.total, tau)
}

pub fn trotter_propagator(model: &CompositeModel, tau: f64, slices: usize) -> Result<ComplexMatrix> {
    Ok(TrotterPlan::new(model, tau, slices)?.propagator())
}

pub fn circuit_propagator(model: &CompositeModel, tau: f64, slices: usize) -> Result<ComplexMatrix> {
    Ok(TrotterPlan::with_circuit(model, tau, slices)?.propagator())
}

/// `exp(-i H tau) |psi>` through the eigenbasis of `H`, without forming the propagator.
pub fn evolve_exact(model: &CompositeModel, tau: f64, state: &ComplexVector) -> Result<ComplexVector> {
    let eig = eigh(&model.total)?;
    let v = &eig.eigenvectors;
    let dim = eig.dim();
    let mut coeffs = vec![c(0.0, 0.0); dim];
    for (k, coeff) in coeffs.iter_mut().enumerate() {
        let mut acc = c(0.0, 0.0);
        for i in 0..dim {
            acc += v[(i, k)].conj() * state[i];
        }
        *coeff = acc * C64::from_polar(1.0, -eig.eigenvalues[k] * tau);
    }
    let mut out = vec![c(0.0, 0.0); dim];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..dim).map(|k| v[(i, k)] * coeffs[k]).sum();
    }
    Ok(ComplexVector::from_vec(out))
}

/// Prepares the initial state and evolves it for `tau` with the chosen method.
pub fn run_protocol_step(model: &CompositeModel, tau: f64, method: Method) -> Result<ComplexVector> {
    let psi0 = prepare_initial_state(model.system.qubits());
    if tau == 0.0 {
        return Ok(psi0);
    }
    match method {
        Method::Exact => evolve_exact(model, tau, &psi0),
        Method::Trotter(l) => TrotterPlan::new(model, tau, l)?.evolve(&psi0),
        Method::Circuit(l) => TrotterPlan::with_circuit(model, tau, l)?.evolve(&psi0),
    }
}

/// Probability of finding the probe in `|0>` (the probe has decayed).
pub fn probe_ground_population(state: &ComplexVector) -> f64 {
    let half = state.dim() / 2;
    state.amplitudes()[..half].iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_total_hamiltonian, ProbeParameters, SystemHamiltonian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded_model(seed: u64, n: usize, params: ProbeParameters) -> CompositeModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 << n;
        let raw: Vec<C64> = (0..dim * dim)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let m = ComplexMatrix::from_vec(dim, dim, raw);
        let sys = SystemHamiltonian::new((&m + &m.adjoint()).scale_real(0.5)).unwrap();
        build_total_hamiltonian(&sys, &params).unwrap()
    }

    fn small_params() -> ProbeParameters {
        ProbeParameters::new(1.0, 0.5, -1.0, 1.0).unwrap()
    }

    /// Scaled-and-squared Taylor series; shares nothing with `eigh`.
    fn taylor_expm(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let x = h.scale(c(0.0, -t));
        let mut s = 0;
        while x.frobenius_norm() / f64::powi(2.0, s) > 0.5 {
            s += 1;
        }
        let y = x.scale_real(1.0 / f64::powi(2.0, s));
        let dim = h.rows();
        let mut term = ComplexMatrix::identity(dim);
        let mut sum = ComplexMatrix::identity(dim);
        for k in 1..=60 {
            term = term.matmul(&y).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..s {
            sum = sum.matmul(&sum);
        }
        sum
    }

    #[test]
    fn exact_propagator_basics() {
        let model = seeded_model(1, 2, small_params());
        let u0 = exact_propagator(&model, 0.0).unwrap();
        assert!(u0.max_abs_diff(&ComplexMatrix::identity(16)) <= 1e-12);
        let u = exact_propagator(&model, 1.0).unwrap();
        assert!(u.unitarity_defect() <= 1e-9);
        assert!(u.max_abs_diff(&taylor_expm(&model.total, 1.0)) <= 1e-9);
    }

    #[test]
    fn no_coupling_means_no_decay() {
        let params = ProbeParameters::new(17.0, 0.0, -100.0, 1200.0).unwrap();
        let model = seeded_model(2, 2, params);
        let psi = run_protocol_step(&model, 1200.0, Method::Exact).unwrap();
        assert!(probe_ground_population(&psi) <= 1e-20);
        let psi = run_protocol_step(&model, 1200.0, Method::Trotter(3)).unwrap();
        assert_eq!(probe_ground_population(&psi), 0.0);
    }

    #[test]
    fn trotter_without_coupling_is_exact() {
        let params = ProbeParameters::new(1.3, 0.0, -2.0, 1.0).unwrap();
        let model = seeded_model(3, 2, params);
        let exact = exact_propagator(&model, 1.7).unwrap();
        for l in [1, 2, 7] {
            let tr = trotter_propagator(&model, 1.7, l).unwrap();
            assert!(tr.max_abs_diff(&exact) <= 1e-12, "L = {l}");
        }
    }

    #[test]
    fn single_slice_is_product_of_factors() {
        let model = seeded_model(4, 1, small_params());
        let plan = TrotterPlan::new(&model, 0.8, 1).unwrap();
        let expected = expm_hermitian(&model.term_probe, 0.8)
            .unwrap()
            .matmul(&expm_hermitian(&model.term_register, 0.8).unwrap())
            .matmul(&expm_hermitian(&model.term_interaction, 0.8).unwrap());
        assert!(plan.propagator().max_abs_diff(&expected) <= 1e-12);
        for f in &plan.factors {
            assert!(f.unitarity_defect() <= 1e-9);
        }
    }

    #[test]
    fn trotter_error_is_first_order() {
        let model = seeded_model(5, 2, small_params());
        let exact = exact_propagator(&model, 1.0).unwrap();
        let errs: Vec<f64> = [8, 16, 32, 64, 128]
            .iter()
            .map(|&l| (&trotter_propagator(&model, 1.0, l).unwrap() - &exact).operator_norm())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[1] / w[0];
            assert!((0.4..=0.6).contains(&ratio), "ratio {ratio} from {errs:?}");
        }
    }

    #[test]
    fn circuit_and_trotter_agree() {
        let model = seeded_model(6, 2, small_params());
        for l in [1, 4, 16] {
            let a = trotter_propagator(&model, 1.0, l).unwrap();
            let b = circuit_propagator(&model, 1.0, l).unwrap();
            assert!(a.max_abs_diff(&b) <= 1e-9);
            let sa = run_protocol_step(&model, 1.0, Method::Trotter(l)).unwrap();
            let sb = run_protocol_step(&model, 1.0, Method::Circuit(l)).unwrap();
            assert!(sa.max_abs_diff(&sb) <= 1e-9);
        }
    }

    #[test]
    fn exact_and_fine_trotter_states_agree() {
        let model = seeded_model(7, 2, small_params());
        let a = run_protocol_step(&model, 1.0, Method::Exact).unwrap();
        let b = run_protocol_step(&model, 1.0, Method::Trotter(4096)).unwrap();
        let fidelity = a.inner(&b).norm_sqr();
        assert!(fidelity >= 1.0 - 1e-4);
        assert!((a.norm() - 1.0).abs() <= 1e-9 && (b.norm() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn zero_time_returns_initial_state() {
        let model = seeded_model(8, 2, small_params());
        for m in [Method::Exact, Method::Trotter(5), Method::Circuit(5)] {
            let psi = run_protocol_step(&model, 0.0, m).unwrap();
            assert_eq!(psi, prepare_initial_state(2));
        }
    }

    #[test]
    fn exact_state_matches_dense_propagator() {
        let model = seeded_model(9, 2, small_params());
        let psi0 = prepare_initial_state(2);
        let via_u = apply(&exact_propagator(&model, 2.3).unwrap(), &psi0).unwrap();
        let direct = evolve_exact(&model, 2.3, &psi0).unwrap();
        assert!(via_u.max_abs_diff(&direct) <= 1e-12);
    }
}
