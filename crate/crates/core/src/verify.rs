//! Self-checks run by the `verify` subcommand.

use serde::Serialize;

use crate::analytic::{off_resonant_error_bound, rabi_decay_probability, transition_table};
use crate::error::Result;
use crate::evolution::{
    circuit_propagator, elementary_gate_count, exact_propagator, interaction_exponential_circuit, run_protocol_step,
    trotter_propagator, Method,
};
use crate::model::{
    build_excitation_operator, build_total_hamiltonian, excited_register_state, prepare_initial_state,
    reference_state, ProbeParameters, SystemHamiltonian,
};
use crate::operators::{apply, eigh, expm_hermitian, kron, pauli, Pauli};
use crate::oracle::diagonalize_system;
use crate::spectroscopy::extract_collapsed_eigenstate;
use crate::systems::random_hermitian;

/// Largest system (in qubits) for which the dynamics checks run.
pub const MAX_SIMULATED_QUBITS: usize = 4;
/// Coupling used by the two-level and error-bound checks.
pub const WEAK_COUPLING: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

pub fn render_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        out.push_str(&format!(
            "{:<width$}  {}  {}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    out
}

/// Least-squares fit `y = a n^2 + b n + c`; returns `(coefficients, ||r|| / ||y||)`.
pub fn quadratic_fit(ns: &[f64], ys: &[f64]) -> ([f64; 3], f64) {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&n, &y) in ns.iter().zip(ys) {
        let row = [n * n, n, 1.0];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve3(ata, aty);
    let (mut rr, mut yy) = (0.0, 0.0);
    for (&n, &y) in ns.iter().zip(ys) {
        let r = y - (coef[0] * n * n + coef[1] * n + coef[2]);
        rr += r * r;
        yy += y * y;
    }
    (coef, (rr / yy).sqrt())
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for k in col..3 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Operator-norm Trotter errors for `L = 8, 16, ..., 128` on a seeded two-qubit model.
pub fn trotter_errors(seed: u64) -> Result<Vec<(usize, f64)>> {
    let sys = SystemHamiltonian::new(random_hermitian(4, seed))?;
    let model = build_total_hamiltonian(&sys, &ProbeParameters::new(1.0, 0.5, -1.0, 1.0)?)?;
    let exact = exact_propagator(&model, 1.0)?;
    [8, 16, 32, 64, 128]
        .iter()
        .map(|&l| Ok((l, (&trotter_propagator(&model, 1.0, l)? - &exact).operator_norm())))
        .collect()
}

fn check_eigh(sys: &SystemHamiltonian) -> Result<Check> {
    let eig = eigh(sys.matrix())?;
    let err = eig.reconstruct().max_abs_diff(sys.matrix());
    let tol = 1e-9 * sys.matrix().max_abs().max(1.0);
    Ok(Check::new("eigendecomposition", err <= tol, format!("reconstruction error {err:.2e}")))
}

fn check_excitation_element(sys: &SystemHamiltonian, c: f64) -> Result<Check> {
    let n = sys.qubits();
    let a = build_excitation_operator(n);
    let psi0 = reference_state(n);
    let a_psi0 = apply(&a, &psi0)?;
    let oracle = diagonalize_system(sys, 0.0)?;
    let table = transition_table(sys, c, 0.0)?;
    let mut worst: f64 = 0.0;
    for j in 0..oracle.len() {
        let psi_j = excited_register_state(&oracle.eigenvector(j));
        let dense = 2.0 * c * psi_j.inner(&a_psi0).norm();
        worst = worst.max((dense - table.rows[j].q).abs());
    }
    Ok(Check::new(
        "coupling element = 2c|sum d|",
        worst <= 1e-10,
        format!("max deviation {worst:.2e}"),
    ))
}

fn check_trotter() -> Result<Vec<Check>> {
    let errs = trotter_errors(7)?;
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[1].1 / w[0].1).collect();
    let ok = ratios.iter().all(|r| (0.4..=0.6).contains(r));
    let conv = Check::new(
        "trotter error halves per doubling",
        ok,
        format!(
            "ratios {}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" ")
        ),
    );
    let sys = SystemHamiltonian::new(random_hermitian(4, 7))?;
    let model = build_total_hamiltonian(&sys, &ProbeParameters::new(1.0, 0.5, -1.0, 1.0)?)?;
    let mut worst: f64 = 0.0;
    for l in [1, 4, 16] {
        let d = trotter_propagator(&model, 1.0, l)?.max_abs_diff(&circuit_propagator(&model, 1.0, l)?);
        worst = worst.max(d);
    }
    let eq = Check::new("trotter = circuit propagator", worst <= 1e-9, format!("max deviation {worst:.2e}"));
    Ok(vec![conv, eq])
}

fn check_circuit(c: f64) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        let circuit = interaction_exponential_circuit(n, c, 0.1).decompose().to_unitary();
        let h = kron(&pauli(Pauli::X), &build_excitation_operator(n)).scale_real(c);
        worst = worst.max(circuit.max_abs_diff(&expm_hermitian(&h, 0.1)?));
    }
    let identity = Check::new(
        "interaction circuit = exp(-i c sx A t)",
        worst <= 1e-10,
        format!("max deviation {worst:.2e} for n = 1..4"),
    );
    let ns: Vec<f64> = (2..=8).map(|n| n as f64).collect();
    let counts: Vec<f64> = (2..=8).map(|n| elementary_gate_count(n) as f64).collect();
    let (coef, resid) = quadratic_fit(&ns, &counts);
    let growth = Check::new(
        "gate count is quadratic in n",
        resid < 0.1 && coef[0] > 0.0,
        format!("fit {:.1} n^2 + {:.1} n + {:.1}, residual {:.2e}", coef[0], coef[1], coef[2], resid),
    );
    Ok(vec![identity, growth])
}

/// Index of the transition whose coupling most exceeds the second-order level
/// shift induced by all other transitions.
fn most_isolated(energies: &[f64], qs: &[f64]) -> Option<usize> {
    (0..energies.len())
        .filter(|&j| qs[j] > 0.0)
        .map(|j| {
            let shift: f64 = (0..energies.len())
                .filter(|&i| i != j)
                .map(|i| qs[i] * qs[i] / (energies[i] - energies[j]).abs())
                .sum();
            (j, qs[j] / shift)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
}

fn check_dynamics(sys: &SystemHamiltonian, alpha: f64) -> Result<Vec<Check>> {
    let oracle = diagonalize_system(sys, alpha)?;
    let table = oracle.transition_table(WEAK_COUPLING);
    let qs: Vec<f64> = table.rows.iter().map(|r| r.q).collect();
    let mut checks = Vec::new();

    match most_isolated(&oracle.eigenvalues, &qs) {
        Some(j) => {
            let row = &table.rows[j];
            let bound: f64 = table
                .rows
                .iter()
                .filter(|r| r.j != row.j)
                .map(|r| r.q * r.q / (r.energy - row.energy).powi(2))
                .sum();
            let tol = bound.max(5e-3);
            let tau = std::f64::consts::PI / row.q;
            let mut worst: f64 = 0.0;
            for detuning in [0.0, row.q, 3.0 * row.q] {
                let omega = row.transition_freq - detuning;
                let model = build_total_hamiltonian(sys, &ProbeParameters::new(omega, WEAK_COUPLING, alpha, tau)?)?;
                let state = run_protocol_step(&model, tau, Method::Exact)?;
                let got = crate::evolution::probe_ground_population(&state);
                let want = rabi_decay_probability(row.q, row.energy, alpha, omega, tau)?;
                worst = worst.max((got - want).abs());
                if detuning == 0.0 {
                    let (_, psi) = extract_collapsed_eigenstate(&state)?;
                    let fid = oracle.eigenvector(j).inner(&psi).norm_sqr();
                    checks.push(Check::new(
                        "collapsed state is the eigenvector",
                        fid >= 0.99,
                        format!("level {}, fidelity {fid:.6}", row.j),
                    ));
                }
            }
            checks.push(Check::new(
                "two-level decay formula",
                worst <= tol,
                format!("level {}, max deviation {worst:.2e} (tolerance {tol:.2e})", row.j),
            ));
        }
        None => checks.push(Check::new("two-level decay formula", false, "no coupled transition".into())),
    }

    let first = &table.rows[0];
    match off_resonant_error_bound(&table, WEAK_COUPLING) {
        Ok(bound) if first.q > 0.0 => {
            let tau = std::f64::consts::PI / first.q;
            let model = build_total_hamiltonian(
                sys,
                &ProbeParameters::new(first.transition_freq, WEAK_COUPLING, alpha, tau)?,
            )?;
            let state = run_protocol_step(&model, tau, Method::Exact)?;
            let spurious: f64 = (1..oracle.len())
                .map(|j| crate::model::decayed_state(&oracle.eigenvector(j)).inner(&state).norm_sqr())
                .sum();
            checks.push(Check::new(
                "off-resonant decay within bound",
                spurious <= bound,
                format!("spurious {spurious:.3e} <= bound {bound:.3e}"),
            ));
        }
        Ok(_) => checks.push(Check::new(
            "off-resonant decay within bound",
            true,
            "skipped: lowest level does not couple".into(),
        )),
        Err(e) => checks.push(Check::new("off-resonant decay within bound", true, format!("skipped: {e}"))),
    }
    Ok(checks)
}

fn check_initial_state(n: usize) -> Check {
    let psi = prepare_initial_state(n);
    let dim = psi.dim();
    let overlap = 1.0 / ((1usize << n) as f64).sqrt();
    let ok = psi.is_normalized()
        && (0..(1usize << n)).all(|k| (psi[dim / 2 + k].re - overlap).abs() < 1e-12);
    Check::new("initial state", ok, format!("{} amplitudes of 1/sqrt(N)", 1usize << n))
}

/// Runs every check for `sys` at coupling `c` and reference energy `alpha`.
pub fn run_verification(sys: &SystemHamiltonian, c: f64, alpha: f64) -> Result<Vec<Check>> {
    let mut checks = vec![check_eigh(sys)?, check_initial_state(sys.qubits())];
    checks.push(check_excitation_element(sys, c.max(WEAK_COUPLING))?);
    checks.extend(check_trotter()?);
    checks.extend(check_circuit(if c > 0.0 { c } else { 0.002 })?);
    if sys.qubits() <= MAX_SIMULATED_QUBITS {
        checks.extend(check_dynamics(sys, alpha)?);
    } else {
        checks.push(Check::new(
            "dynamics checks",
            true,
            format!("skipped: more than {MAX_SIMULATED_QUBITS} system qubits"),
        ));
    }
    Ok(checks)
}

/// Trotter error table and gate counts for `trotter-bench`.
#[derive(Clone, Debug, Serialize)]
pub struct TrotterBench {
    pub errors: Vec<(usize, f64)>,
    pub gate_counts: Vec<(usize, usize)>,
    pub fit: [f64; 3],
    pub fit_residual: f64,
}

/// Error of `Trotter(L)` against the exact propagator for `model` at each `L`.
pub fn trotter_error_table(
    sys: &SystemHamiltonian,
    params: &ProbeParameters,
    slices: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let model = build_total_hamiltonian(sys, params)?;
    let exact = exact_propagator(&model, params.tau)?;
    slices
        .iter()
        .map(|&l| Ok((l, (&trotter_propagator(&model, params.tau, l)? - &exact).operator_norm())))
        .collect()
}

pub fn gate_count_table(max_n: usize) -> (Vec<(usize, usize)>, [f64; 3], f64) {
    let counts: Vec<(usize, usize)> = (1..=max_n).map(|n| (n, elementary_gate_count(n))).collect();
    let fit_pts: Vec<&(usize, usize)> = counts.iter().filter(|(n, _)| *n >= 2).collect();
    let ns: Vec<f64> = fit_pts.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = fit_pts.iter().map(|(_, g)| *g as f64).collect();
    let (fit, resid) = if ns.len() >= 3 { quadratic_fit(&ns, &ys) } else { ([0.0; 3], 0.0) };
    (counts, fit, resid)
}
