//! Round trips through the text formats.

use proptest::prelude::*;

use probespec::evolution::{interaction_exponential_circuit, GateList};
use probespec::io::{parse_dense_hamiltonian, parse_pauli_sum, parse_sweep_csv, write_atomic, write_dense_hamiltonian};
use probespec::model::{ProbeParameters, SystemHamiltonian};
use probespec::operators::{kron, pauli, ComplexMatrix, Pauli};
use probespec::spectroscopy::{make_grid, Measurement, SweepConfig, SweepResult};
use probespec::systems::random_hermitian;
use probespec::evolution::Method;

fn letter(p: Pauli) -> char {
    match p {
        Pauli::I => 'I',
        Pauli::X => 'X',
        Pauli::Y => 'Y',
        Pauli::Z => 'Z',
    }
}

fn pauli_strategy() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dense_hamiltonian_round_trip(log_dim in 1usize..6, seed in 0u64..10_000, scale in -1e6f64..1e6) {
        let m = random_hermitian(1 << log_dim, seed).scale_real(scale);
        let sys = SystemHamiltonian::new(m).unwrap();
        let back = parse_dense_hamiltonian(&write_dense_hamiltonian(&sys)).unwrap();
        prop_assert!(back.matrix().max_abs_diff(sys.matrix()) <= 1e-15 * sys.matrix().max_abs().max(1.0));
    }

    #[test]
    fn pauli_sum_matches_kronecker_products(
        terms in prop::collection::vec((-5.0f64..5.0, prop::collection::vec(pauli_strategy(), 3)), 1..6)
    ) {
        let text: String = terms
            .iter()
            .map(|(coef, word)| format!("{coef:?} {}\n", word.iter().map(|&p| letter(p)).collect::<String>()))
            .collect();
        let sys = parse_pauli_sum(&text).unwrap();
        let mut want = ComplexMatrix::zeros(8, 8);
        for (coef, word) in &terms {
            let term = kron(&kron(&pauli(word[0]), &pauli(word[1])), &pauli(word[2])).scale_real(*coef);
            want = &want + &term;
        }
        prop_assert!(sys.matrix().max_abs_diff(&want) <= 1e-12);
        prop_assert!(sys.matrix().hermitian_defect() <= 1e-12);
    }

    #[test]
    fn sweep_csv_round_trip(
        lo in 10.0f64..20.0,
        span in 0.1f64..5.0,
        decay in prop::collection::vec(0.0f64..=1.0, 2..200),
        with_shots: bool,
    ) {
        let m = decay.len();
        let grid = make_grid(lo, lo + span, m).unwrap();
        let params = ProbeParameters::new(0.0, 0.002, -100.0, 1200.0).unwrap();
        let measurement = if with_shots { Measurement::Shots { count: 100, seed: 1 } } else { Measurement::ExactMarginal };
        let config = SweepConfig::new(params, Method::Exact, measurement).unwrap();
        let successes = with_shots.then(|| decay.iter().map(|p| (p * 100.0).round() as u64).collect());
        let result = SweepResult { grid, decay: decay.clone(), config, system_dim: 16, successes };
        let table = parse_sweep_csv(&result.to_csv()).unwrap();
        prop_assert_eq!(table.omegas.len(), m);
        for (a, b) in table.decay.iter().zip(&decay) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert_eq!(table.shots.is_some(), with_shots);
        let back = table.grid(grid.delta()).unwrap();
        prop_assert_eq!(back.intervals, m);
        prop_assert!((back.delta() - grid.delta()).abs() <= 1e-9);
        prop_assert!((back.omega_min - grid.omega_min).abs() <= 1e-8);
    }
}

#[test]
fn gate_file_round_trip() {
    for n in 1..=3 {
        let list = interaction_exponential_circuit(n, 0.002, 0.1).decompose();
        let back = GateList::parse_text(&list.to_text()).unwrap();
        assert_eq!(back.len(), list.len());
        assert!(back.to_unitary().max_abs_diff(&list.to_unitary()) <= 1e-12);
    }
}

#[test]
fn atomic_write_leaves_only_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("out.csv");
    write_atomic(&path, "a,b\n1,2\n").unwrap();
    write_atomic(&path, "a,b\n3,4\n").unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n3,4\n");
    let names: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("out.csv")]);
}

#[test]
fn malformed_inputs_are_rejected_with_line_numbers() {
    let err = parse_dense_hamiltonian("2\n1 0 0 0\n0 0 1\n").unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
    assert!(parse_dense_hamiltonian("3\n").is_err());
    assert!(parse_dense_hamiltonian("2\n1 0 0 1\n0 0 1 0\n").is_err(), "non-Hermitian accepted");
    assert!(parse_pauli_sum("1.0 XY\n0.5 Z\n").is_err());
    assert!(parse_pauli_sum("1.0 XQ\n").is_err());
    assert!(parse_sweep_csv("omega,p\n1,2\n").is_err());
    assert!(parse_sweep_csv("omega,p_decay\n").is_err());
}
