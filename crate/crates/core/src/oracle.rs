//! Ground truth by dense diagonalization and comparison of detected peaks
//! against it, including a cause for every transition the sweep missed.

use serde::Serialize;

use crate::analytic::{line_profile, rabi_decay_probability, resonant_decay, TransitionRow, TransitionTable};
use crate::error::Result;
use crate::model::SystemHamiltonian;
use crate::operators::{eigh, ComplexMatrix, ComplexVector, C64};
use crate::spectroscopy::{lobe_envelope, FrequencyGrid, Peak};

/// Component sums below this are treated as zero.
pub const ZERO_SUM_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct OracleSpectrum {
    pub alpha: f64,
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: ComplexMatrix,
    pub component_sums: Vec<C64>,
    /// `E_j - alpha`.
    pub transitions: Vec<f64>,
}

pub fn diagonalize_system(sys: &SystemHamiltonian, alpha: f64) -> Result<OracleSpectrum> {
    let eig = eigh(sys.matrix())?;
    let component_sums = (0..eig.dim())
        .map(|j| eig.eigenvector(j).amplitudes().iter().sum())
        .collect();
    let transitions = eig.eigenvalues.iter().map(|e| e - alpha).collect();
    Ok(OracleSpectrum {
        alpha,
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        component_sums,
        transitions,
    })
}

impl OracleSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, j: usize) -> ComplexVector {
        self.eigenvectors.column(j)
    }

    /// Same content as `analytic::transition_table`, without re-diagonalizing.
    pub fn transition_table(&self, c: f64) -> TransitionTable {
        let rows = (0..self.len())
            .map(|j| TransitionRow {
                j: j + 1,
                energy: self.eigenvalues[j],
                sum_d: self.component_sums[j],
                q: 2.0 * c * self.component_sums[j].norm(),
                transition_freq: self.transitions[j],
            })
            .collect();
        TransitionTable {
            c,
            alpha: self.alpha,
            rows,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchedPeak {
    pub peak_index: usize,
    /// 1-based oracle level.
    pub level: usize,
    pub omega_peak: f64,
    pub height: f64,
    pub transition: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MissingTransition {
    pub level: usize,
    pub transition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpuriousPeak {
    pub peak_index: usize,
    pub omega_peak: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub tolerance: f64,
    pub matched: Vec<MatchedPeak>,
    pub missing: Vec<MissingTransition>,
    pub spurious: Vec<SpuriousPeak>,
    pub max_abs_error: f64,
}

/// Greedy matching by ascending `|omega_peak - transition|`, ties to the
/// lower level; each peak and each transition is used at most once.
pub fn compare_spectrum(peaks: &[Peak], oracle: &OracleSpectrum, tol: f64) -> ComparisonReport {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (j, &t) in oracle.transitions.iter().enumerate() {
        for (p, peak) in peaks.iter().enumerate() {
            let e = (peak.omega_peak - t).abs();
            if e <= tol {
                pairs.push((e, j, p));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut level_used = vec![false; oracle.len()];
    let mut peak_used = vec![false; peaks.len()];
    let mut matched = Vec::new();
    for (e, j, p) in pairs {
        if level_used[j] || peak_used[p] {
            continue;
        }
        level_used[j] = true;
        peak_used[p] = true;
        matched.push(MatchedPeak {
            peak_index: p,
            level: j + 1,
            omega_peak: peaks[p].omega_peak,
            height: peaks[p].height,
            transition: oracle.transitions[j],
            error: e,
        });
    }
    matched.sort_by_key(|m| m.level);
    let missing = (0..oracle.len())
        .filter(|&j| !level_used[j])
        .map(|j| MissingTransition {
            level: j + 1,
            transition: oracle.transitions[j],
        })
        .collect();
    let spurious = (0..peaks.len())
        .filter(|&p| !peak_used[p])
        .map(|p| SpuriousPeak {
            peak_index: p,
            omega_peak: peaks[p].omega_peak,
            height: peaks[p].height,
        })
        .collect();
    let max_abs_error = matched.iter().map(|m| m.error).fold(0.0, f64::max);
    ComparisonReport {
        tolerance: tol,
        matched,
        missing,
        spurious,
        max_abs_error,
    }
}

impl ComparisonReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.spurious.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table, one row per oracle level then one per spurious peak.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(usize, String)> = Vec::new();
        for m in &self.matched {
            rows.push((
                m.level,
                format!(
                    "{:>5}  {:>12.6}  {:>12.6}  {:>10.2e}  matched",
                    m.level, m.transition, m.omega_peak, m.error
                ),
            ));
        }
        for m in &self.missing {
            rows.push((
                m.level,
                format!("{:>5}  {:>12.6}  {:>12}  {:>10}  missing", m.level, m.transition, "-", "-"),
            ));
        }
        rows.sort_by_key(|r| r.0);
        let mut out = format!(
            "{:>5}  {:>12}  {:>12}  {:>10}  status\n",
            "level", "transition", "peak", "error"
        );
        for (_, r) in rows {
            out.push_str(&r);
            out.push('\n');
        }
        for s in &self.spurious {
            out.push_str(&format!(
                "{:>5}  {:>12}  {:>12.6}  {:>10}  spurious (height {:.4})\n",
                "-", "-", s.omega_peak, "-", s.height
            ));
        }
        out.push_str(&format!(
            "matched {} / missing {} / spurious {}; max |error| {:.3e} (tolerance {:.3e})\n",
            self.matched.len(),
            self.missing.len(),
            self.spurious.len(),
            self.max_abs_error,
            self.tolerance
        ));
        out
    }
}

/// Conditions under which a sweep was taken, needed to explain misses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionContext {
    pub c: f64,
    pub tau: f64,
    pub grid: FrequencyGrid,
    /// Absolute peak threshold that was applied.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "cause")]
pub enum MissCause {
    /// `|sum_d|` is zero: the transition does not couple to the reference state.
    ZeroComponentSum { sum_abs: f64 },
    /// `sin^2(Q tau / 2)` is below the threshold even at exact resonance.
    WeakRabiAmplitude { resonant_decay: f64 },
    /// The line is narrower than the grid spacing.
    UnderResolved { width: f64, delta_omega: f64 },
    /// No grid point samples the line above threshold.
    MissedByGrid { best_on_grid: f64 },
    /// The line sits under the side-lobe envelope of a stronger neighbor.
    Shadowed { by_level: usize, separation: f64 },
    /// The line's maximum sits `offset` away from the transition, farther than
    /// half a grid step, because the resonance falls near a Rabi node.
    SplitLine { offset: f64 },
    /// More than one full Rabi cycle at resonance: the line is a comb of fringes
    /// spaced about `2 pi / tau`, finer than the grid, so the sampled maximum can
    /// sit on a fringe away from the center.
    Overdriven { rabi_angle: f64, fringe_spacing: f64 },
    /// The transition is not strictly between the first and last grid centers.
    OutsideWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MissExplanation {
    pub level: usize,
    pub transition: f64,
    pub causes: Vec<MissCause>,
}

impl MissExplanation {
    pub fn is_explained(&self) -> bool {
        !self.causes.is_empty()
    }
}

/// Largest single-line decay over the grid centers.
fn best_on_grid(row: &TransitionRow, alpha: f64, ctx: &DetectionContext) -> f64 {
    ctx.grid
        .centers()
        .iter()
        .map(|&w| rabi_decay_probability(row.q, row.energy, alpha, w, ctx.tau).unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// Lists, for every missing transition, the reasons the sweep could not show it.
///
/// An empty cause list means the miss is not accounted for by the model.
pub fn explain_misses(report: &ComparisonReport, oracle: &OracleSpectrum, ctx: &DetectionContext) -> Vec<MissExplanation> {
    let table = oracle.transition_table(ctx.c);
    let q_max = 2.0 * ctx.c * (oracle.len() as f64).sqrt();
    let grid_best: Vec<f64> = table.rows.iter().map(|r| best_on_grid(r, oracle.alpha, ctx)).collect();
    let first = ctx.grid.center(0);
    let last = ctx.grid.center(ctx.grid.intervals - 1);
    let detected: Vec<(f64, f64)> = report
        .matched
        .iter()
        .map(|p| (p.omega_peak, p.height))
        .chain(report.spurious.iter().map(|p| (p.omega_peak, p.height)))
        .collect();
    report
        .missing
        .iter()
        .map(|m| {
            let j = m.level - 1;
            let row = &table.rows[j];
            let mut causes = Vec::new();
            let sum_abs = row.sum_abs();
            if sum_abs < ZERO_SUM_THRESHOLD {
                causes.push(MissCause::ZeroComponentSum { sum_abs });
            }
            let res = resonant_decay(row.q, ctx.tau);
            if res < ctx.threshold {
                causes.push(MissCause::WeakRabiAmplitude { resonant_decay: res });
            }
            let profile = line_profile(row.q, ctx.tau);
            let width = profile.width;
            if width < ctx.grid.delta() {
                causes.push(MissCause::UnderResolved {
                    width,
                    delta_omega: ctx.grid.delta(),
                });
            }
            if grid_best[j] < ctx.threshold {
                causes.push(MissCause::MissedByGrid {
                    best_on_grid: grid_best[j],
                });
            }
            if profile.peak_offset > 0.5 * ctx.grid.delta() {
                causes.push(MissCause::SplitLine {
                    offset: profile.peak_offset,
                });
            }
            let rabi_angle = row.q * ctx.tau;
            let fringe_spacing = 2.0 * std::f64::consts::PI / ctx.tau;
            if rabi_angle > 2.0 * std::f64::consts::PI && fringe_spacing < ctx.grid.delta() {
                causes.push(MissCause::Overdriven {
                    rabi_angle,
                    fringe_spacing,
                });
            }
            if m.transition <= first || m.transition >= last {
                causes.push(MissCause::OutsideWindow);
            }
            // mirrors the detector: summed envelopes of every taller line
            let taller: Vec<(usize, f64)> = (0..table.len())
                .filter(|&i| i != j && grid_best[i] > grid_best[j])
                .map(|i| (i, (table.rows[i].transition_freq - m.transition).abs()))
                .collect();
            let line_shadow: f64 = taller.iter().map(|&(_, sep)| lobe_envelope(q_max, sep)).sum();
            let peak_shadow: f64 = detected
                .iter()
                .filter(|&&(_, h)| h > grid_best[j])
                .map(|&(w, _)| lobe_envelope(q_max, w - m.transition))
                .sum();
            let shadow = line_shadow.max(peak_shadow);
            let nearest = taller.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, separation)) = nearest {
                if grid_best[j] <= shadow || separation <= ctx.grid.delta() {
                    causes.push(MissCause::Shadowed {
                        by_level: i + 1,
                        separation,
                    });
                }
            }
            MissExplanation {
                level: m.level,
                transition: m.transition,
                causes,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::c;
    use std::f64::consts::SQRT_2;

    fn peak_at(omega: f64) -> Peak {
        Peak {
            k_max: 0,
            omega_peak: omega,
            height: 0.5,
            estimated_energy: omega - 100.0,
            half_width: 0.01,
        }
    }

    #[test]
    fn diagonal_transitions() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[3.0, 0.0, 0.0, 5.0]).unwrap();
        let o = diagonalize_system(&sys, -100.0).unwrap();
        assert_eq!(o.transitions, vec![103.0, 105.0]);
    }

    #[test]
    fn sigma_x_component_sums() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let o = diagonalize_system(&sys, 0.0).unwrap();
        assert!(o.component_sums[0].norm() < 1e-15);
        assert!((o.component_sums[1].norm() - SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn exact_peaks_match_everything() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.1, 0.1, 2.0]).unwrap();
        let o = diagonalize_system(&sys, 0.0).unwrap();
        let peaks: Vec<Peak> = o.transitions.iter().map(|&t| peak_at(t)).collect();
        let r = compare_spectrum(&peaks, &o, 0.01);
        assert!(r.is_complete());
        assert_eq!(r.max_abs_error, 0.0);
        assert_eq!(r.matched.len(), 2);
    }

    #[test]
    fn no_peaks_means_all_missing() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.1, 0.1, 2.0]).unwrap();
        let o = diagonalize_system(&sys, 0.0).unwrap();
        let r = compare_spectrum(&[], &o, 0.01);
        assert_eq!(r.missing.len(), 2);
        assert!(r.matched.is_empty() && r.spurious.is_empty());
    }

    #[test]
    fn greedy_prefers_closest_pair() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.0, 0.0, 1.05]).unwrap();
        let o = diagonalize_system(&sys, 0.0).unwrap();
        // one peak between both transitions, slightly closer to the upper one
        let r = compare_spectrum(&[peak_at(1.03)], &o, 0.1);
        assert_eq!(r.matched.len(), 1);
        assert_eq!(r.matched[0].level, 2);
        assert_eq!(r.missing[0].level, 1);
        // exact tie goes to the lower level
        let r = compare_spectrum(&[peak_at(1.025)], &o, 0.1);
        assert_eq!(r.matched[0].level, 1);
    }

    #[test]
    fn spurious_peaks_reported() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[1.0, 0.0, 0.0, 2.0]).unwrap();
        let o = diagonalize_system(&sys, 0.0).unwrap();
        let r = compare_spectrum(&[peak_at(1.0), peak_at(1.5), peak_at(2.001)], &o, 0.01);
        assert_eq!(r.spurious.len(), 1);
        assert_eq!(r.spurious[0].peak_index, 1);
        assert!((r.max_abs_error - 0.001).abs() < 1e-12);
        assert!(r.to_table().contains("spurious"));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["matched"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn zero_sum_miss_is_explained() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let o = diagonalize_system(&sys, -10.0).unwrap();
        let r = compare_spectrum(&[peak_at(11.0)], &o, 0.01);
        let grid = crate::spectroscopy::make_grid(8.0, 12.0, 200).unwrap();
        let ex = explain_misses(
            &r,
            &o,
            &DetectionContext {
                c: 0.002,
                tau: 1200.0,
                grid,
                threshold: 0.05,
            },
        );
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].level, 1);
        assert!(matches!(ex[0].causes[0], MissCause::ZeroComponentSum { .. }));
    }

    #[test]
    fn transition_table_agrees_with_analytic() {
        let sys = SystemHamiltonian::new(ComplexMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(0.2, 0.3), c(0.2, -0.3), c(-0.5, 0.0)],
        ))
        .unwrap();
        let o = diagonalize_system(&sys, -3.0).unwrap();
        let a = crate::analytic::transition_table(&sys, 0.004, -3.0).unwrap();
        assert_eq!(o.transition_table(0.004), a);
    }
}
