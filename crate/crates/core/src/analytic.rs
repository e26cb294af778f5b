//! Closed-form two-level predictions: transition strengths, the Rabi decay
//! lineshape, and the bound on spurious decay into off-resonant levels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemHamiltonian;
use crate::operators::{eigh, C64};
use crate::spectroscopy::FrequencyGrid;

/// Half-width of `sinc^2(x/2)` at half maximum, in units of `1/tau`.
const SINC_HALF_WIDTH: f64 = 2.783_115_5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionRow {
    /// 1-based level index, ascending in energy.
    pub j: usize,
    pub energy: f64,
    /// Sum of the eigenvector's computational-basis components.
    pub sum_d: C64,
    /// `2 c |sum_d|`.
    pub q: f64,
    /// `E_j - alpha`, the resonant probe frequency.
    pub transition_freq: f64,
}

impl TransitionRow {
    pub fn sum_abs(&self) -> f64 {
        self.sum_d.norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionTable {
    pub c: f64,
    pub alpha: f64,
    pub rows: Vec<TransitionRow>,
}

impl TransitionTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with header `j,E_j,re_sum_d,im_sum_d,Q,transition_freq`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,E_j,re_sum_d,im_sum_d,Q,transition_freq\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.12},{:.12},{:.12},{:.12e},{:.12}\n",
                r.j, r.energy, r.sum_d.re, r.sum_d.im, r.q, r.transition_freq
            ));
        }
        s
    }
}

pub fn transition_table(sys: &SystemHamiltonian, c: f64, alpha: f64) -> Result<TransitionTable> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter("coupling must be non-negative".into()));
    }
    let eig = eigh(sys.matrix())?;
    let rows = (0..eig.dim())
        .map(|j| {
            let v = eig.eigenvector(j);
            let sum_d: C64 = v.amplitudes().iter().sum();
            TransitionRow {
                j: j + 1,
                energy: eig.eigenvalues[j],
                sum_d,
                q: 2.0 * c * sum_d.norm(),
                transition_freq: eig.eigenvalues[j] - alpha,
            }
        })
        .collect();
    Ok(TransitionTable { c, alpha, rows })
}

/// `Omega = sqrt(Q^2 + detuning^2)` with `detuning = E_j - E_0 - omega_k`.
pub fn rabi_frequency(q: f64, e_j: f64, e_0: f64, omega_k: f64) -> f64 {
    q.hypot(e_j - e_0 - omega_k)
}

/// `sin^2(Omega tau / 2) Q^2 / (Q^2 + detuning^2)`.
///
/// Returns [`Error::DegenerateInput`] for `Q = 0` at zero detuning, where the
/// ratio is undefined; callers treat that case as no decay.
pub fn rabi_decay_probability(q: f64, e_j: f64, e_0: f64, omega_k: f64, tau: f64) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::InvalidParameter("tau must be non-negative".into()));
    }
    let detuning = e_j - e_0 - omega_k;
    let omega_sq = q * q + detuning * detuning;
    if omega_sq == 0.0 {
        return Err(Error::DegenerateInput);
    }
    let s = (0.5 * omega_sq.sqrt() * tau).sin();
    Ok(s * s * q * q / omega_sq)
}

/// Decay at exact resonance, `sin^2(Q tau / 2)`.
pub fn resonant_decay(q: f64, tau: f64) -> f64 {
    (0.5 * q * tau).sin().powi(2)
}

/// Shape of a single two-level line as a function of detuning.
///
/// The line is even in the detuning; offsets are reported as non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineProfile {
    /// Detuning of the highest point. Nonzero once the resonance falls near a
    /// Rabi node and the line splits into a doublet.
    pub peak_offset: f64,
    pub peak_value: f64,
    /// Full width of the lobe holding the highest point, above half its value.
    pub width: f64,
}

/// Samples per Rabi fringe when locating the half-height edges.
const SAMPLES_PER_FRINGE: f64 = 64.0;
const MAX_PROFILE_SAMPLES: f64 = 4.0e6;

/// Numerical profile of the line `Q^2/(Q^2+D^2) sin^2(sqrt(Q^2+D^2) tau / 2)`.
///
/// Tends to `2 * 2.7831/tau` for `Q tau -> 0` and to about `1.6 Q` at `Q tau = pi`.
pub fn line_profile(q: f64, tau: f64) -> LineProfile {
    if tau <= 0.0 {
        return LineProfile {
            peak_offset: 0.0,
            peak_value: 0.0,
            width: f64::INFINITY,
        };
    }
    if q <= 0.0 {
        return LineProfile {
            peak_offset: 0.0,
            peak_value: 0.0,
            width: 2.0 * SINC_HALF_WIDTH / tau,
        };
    }
    let line = |d: f64| {
        let w2 = q * q + d * d;
        q * q / w2 * (0.5 * w2.sqrt() * tau).sin().powi(2)
    };
    let reach = 4.0 * q + 40.0 / tau;
    let fringe = 2.0 * std::f64::consts::PI / tau;
    let steps = (reach / fringe * SAMPLES_PER_FRINGE).clamp(8000.0, MAX_PROFILE_SAMPLES) as usize;
    let h = reach / steps as f64;
    let samples: Vec<f64> = (0..=steps).map(|i| line(i as f64 * h)).collect();
    let (top, peak_value) = samples
        .iter()
        .enumerate()
        .fold((0, samples[0]), |best, (i, &p)| if p > best.1 + 1e-12 { (i, p) } else { best });
    let half = 0.5 * peak_value;
    // linear interpolation of the crossing between samples i and i + 1
    let crossing = |i: usize| {
        let (a, b) = (samples[i], samples[i + 1]);
        (i as f64 + (a - half) / (a - b)) * h
    };
    let mut hi = top;
    while hi < steps && samples[hi + 1] >= half {
        hi += 1;
    }
    let right = if hi < steps { crossing(hi) } else { reach };
    let mut lo = top;
    while lo > 0 && samples[lo - 1] >= half {
        lo -= 1;
    }
    let width = if lo == 0 {
        // the lobe runs through zero detuning into its mirror image
        2.0 * right
    } else {
        let (a, b) = (samples[lo - 1], samples[lo]);
        right - ((lo - 1) as f64 + (half - a) / (b - a)) * h
    };
    LineProfile {
        peak_offset: top as f64 * h,
        peak_value,
        width,
    }
}

/// Full width at half height of the line's main lobe; see [`line_profile`].
pub fn lineshape_width(q: f64, tau: f64) -> f64 {
    line_profile(q, tau).width
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictedSweep {
    pub omegas: Vec<f64>,
    pub decay: Vec<f64>,
    /// Grid points where the summed lineshapes exceeded 1 and were clipped.
    pub clipped: Vec<bool>,
}

impl PredictedSweep {
    pub fn any_clipped(&self) -> bool {
        self.clipped.iter().any(|&c| c)
    }
}

/// Sum of independent two-level lineshapes over the grid; first-order only.
pub fn predicted_sweep(table: &TransitionTable, grid: &FrequencyGrid, tau: f64) -> PredictedSweep {
    let omegas = grid.centers();
    let mut decay = Vec::with_capacity(omegas.len());
    let mut clipped = Vec::with_capacity(omegas.len());
    for &w in &omegas {
        let total: f64 = table
            .rows
            .iter()
            .map(|r| rabi_decay_probability(r.q, r.energy, table.alpha, w, tau).unwrap_or(0.0))
            .sum();
        clipped.push(total > 1.0);
        decay.push(total.clamp(0.0, 1.0));
    }
    PredictedSweep {
        omegas,
        decay,
        clipped,
    }
}

/// `4 c^2 sum_{j>=2} |sum_d_j|^2 / (E_j - E_1)^2`, the bound on decay into
/// other levels while the probe is resonant with the lowest one.
pub fn off_resonant_error_bound(table: &TransitionTable, c: f64) -> Result<f64> {
    let first = table
        .rows
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty transition table".into()))?;
    let mut bound = 0.0;
    for r in &table.rows[1..] {
        let gap = r.energy - first.energy;
        if gap.abs() <= 1e-12 {
            return Err(Error::DegenerateGap { level: r.j });
        }
        bound += r.sum_d.norm_sqr() / (gap * gap);
    }
    Ok(4.0 * c * c * bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ComplexMatrix;
    use crate::spectroscopy::make_grid;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    #[test]
    fn uniform_eigenvector_has_maximal_strength() {
        // J (all-ones) has the uniform vector as its top eigenvector.
        let n = 4;
        let sys = SystemHamiltonian::new(ComplexMatrix::from_real(n, n, &[1.0; 16])).unwrap();
        let table = transition_table(&sys, 0.01, 0.0).unwrap();
        let top = table.rows.last().unwrap();
        assert!((top.q - 2.0 * 0.01 * 2.0).abs() <= 1e-12);
        for r in &table.rows[..n - 1] {
            assert!(r.q <= 1e-12);
        }
    }

    #[test]
    fn antisymmetric_eigenvector_is_invisible() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let table = transition_table(&sys, 0.002, -100.0).unwrap();
        // Ground state of sigma_x is (1, -1)/sqrt 2.
        assert!(table.rows[0].q <= 1e-15);
        assert!((table.rows[1].sum_abs() - 2.0 * FRAC_1_SQRT_2).abs() <= 1e-12);
        assert!((table.rows[1].transition_freq - 101.0).abs() <= 1e-12);
    }

    #[test]
    fn small_sum_strength_matches_reported_value() {
        let q: f64 = 2.0 * 0.001 * 0.0305153;
        assert!((q - 6.10306e-5).abs() < 1e-10);
    }

    #[test]
    fn rabi_formula_limits() {
        let q = 0.004;
        let p = rabi_decay_probability(q, -82.0, -100.0, 18.0, PI / q).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(rabi_decay_probability(q, -82.0, -100.0, 18.0, 0.0).unwrap(), 0.0);
        for tau in [1.0, 77.0, 1200.0, 5e4] {
            let p = rabi_decay_probability(q, -82.0, -100.0, 18.0 - 3.0 * q, tau).unwrap();
            assert!(p <= 0.1 + 1e-15);
        }
        assert_eq!(
            rabi_decay_probability(0.0, 1.0, 0.0, 1.0, 5.0),
            Err(Error::DegenerateInput)
        );
        assert_eq!(rabi_decay_probability(0.0, 1.0, 0.0, 2.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn predicted_sweep_single_resonance() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.0, 0.0, 3.0]).unwrap();
        let table = transition_table(&sys, 0.01, 0.0).unwrap();
        // centers 0.5, 1.0, 1.5 -> middle one sits on the E=1 transition
        let grid = make_grid(0.25, 1.75, 3).unwrap();
        let pred = predicted_sweep(&table, &grid, 50.0);
        let expected = resonant_decay(table.rows[0].q, 50.0);
        assert!((pred.decay[1] - expected).abs() < 1e-3);
        assert!(!pred.any_clipped());
    }

    #[test]
    fn predicted_sweep_two_levels_has_two_maxima() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.05, 0.05, 2.0]).unwrap();
        let table = transition_table(&sys, 0.005, 0.0).unwrap();
        // weak drive: side lobes stay near 4.7% of the main line
        let tau = 1.0 / table.rows[0].q.max(table.rows[1].q);
        let grid = make_grid(0.5, 2.5, 2000).unwrap();
        let pred = predicted_sweep(&table, &grid, tau);
        let top = pred.decay.iter().copied().fold(0.0, f64::max);
        let maxima: Vec<usize> = (1..pred.decay.len() - 1)
            .filter(|&k| pred.decay[k] > pred.decay[k - 1] && pred.decay[k] > pred.decay[k + 1])
            .filter(|&k| pred.decay[k] > 0.1 * top)
            .collect();
        assert_eq!(maxima.len(), 2, "{maxima:?}");
        for (k, r) in maxima.iter().zip(&table.rows) {
            assert!((grid.center(*k) - r.transition_freq).abs() <= grid.delta());
        }
    }

    #[test]
    fn zero_coupling_predicts_nothing() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.2, 0.2, 2.0]).unwrap();
        let table = transition_table(&sys, 0.0, 0.0).unwrap();
        let pred = predicted_sweep(&table, &make_grid(0.0, 3.0, 300).unwrap(), 100.0);
        assert!(pred.decay.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn error_bound_two_level_closed_form() {
        // [[0, b], [b, 1]]: eigenvalues (1 ∓ r)/2 with r = sqrt(1 + 4b^2).
        let b = 0.1;
        let sys = SystemHamiltonian::from_real_symmetric(2, &[0.0, b, b, 1.0]).unwrap();
        let table = transition_table(&sys, 0.003, 0.0).unwrap();
        let r = (1.0 + 4.0 * b * b).sqrt();
        let (e1, e2) = ((1.0 - r) / 2.0, (1.0 + r) / 2.0);
        // Upper eigenvector ∝ (b, e2), normalized.
        let norm = (b * b + e2 * e2).sqrt();
        let sum2 = (b + e2) / norm;
        let expected = 4.0 * 0.003f64.powi(2) * sum2 * sum2 / (e2 - e1).powi(2);
        let got = off_resonant_error_bound(&table, 0.003).unwrap();
        assert!((got - expected).abs() <= 1e-15, "{got} vs {expected}");
        assert_eq!(off_resonant_error_bound(&table, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn error_bound_rejects_degenerate_first_level() {
        let sys = SystemHamiltonian::new(ComplexMatrix::identity(2)).unwrap();
        let table = transition_table(&sys, 0.001, 0.0).unwrap();
        assert!(matches!(
            off_resonant_error_bound(&table, 0.001),
            Err(Error::DegenerateGap { level: 2 })
        ));
    }

    #[test]
    fn scaling_in_coupling() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[0.0, 0.3, 0.3, 1.0]).unwrap();
        let t1 = transition_table(&sys, 0.001, 0.0).unwrap();
        let t3 = transition_table(&sys, 0.003, 0.0).unwrap();
        for (a, b) in t1.rows.iter().zip(&t3.rows) {
            assert!((3.0 * a.q - b.q).abs() <= 1e-18);
        }
        let b1 = off_resonant_error_bound(&t1, 0.001).unwrap();
        let b3 = off_resonant_error_bound(&t1, 0.003).unwrap();
        assert!((9.0 * b1 - b3).abs() <= 1e-15 * b3);
    }

    #[test]
    fn lineshape_width_limits() {
        let weak = lineshape_width(1e-9, 1000.0);
        assert!((weak - 5.566231 / 1000.0).abs() < 1e-8, "{weak}");
        // Q tau = pi: bisect sin^2(pi/2 sqrt(1+x^2)) / (1+x^2) = 1/2 for x = D/Q
        let f = |x: f64| (FRAC_PI_2 * (1.0 + x * x).sqrt()).sin().powi(2) / (1.0 + x * x) - 0.5;
        let (mut a, mut b) = (0.0, 2.0);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let q = 0.01;
        let w = lineshape_width(q, PI / q);
        assert!((w - 2.0 * a * q).abs() < 1e-7, "{w} vs {}", 2.0 * a * q);
        assert_eq!(line_profile(q, PI / q).peak_offset, 0.0);
    }

    #[test]
    fn resonance_near_a_node_splits_the_line() {
        let q = 0.01;
        let p = line_profile(q, 1.9 * PI / q);
        assert!(p.peak_offset > 0.3 * q, "{p:?}");
        assert!(p.peak_value > resonant_decay(q, 1.9 * PI / q));
    }

    #[test]
    fn csv_export_header() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[3.0, 0.0, 0.0, 5.0]).unwrap();
        let csv = transition_table(&sys, 0.002, -100.0).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("j,E_j,re_sum_d,im_sum_d,Q,transition_freq"));
        assert_eq!(lines.count(), 2);
    }
}
