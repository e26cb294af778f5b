//! Frequency sweeps over the probe, peak detection, refinement planning and
//! post-measurement state extraction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{probe_ground_population, run_protocol_step, Method};
use crate::model::{build_total_hamiltonian, ProbeParameters, SystemHamiltonian};
use crate::operators::ComplexVector;

/// Below this decayed-branch weight there is nothing to renormalize.
pub const MIN_DECAY_SUPPORT: f64 = 1e-12;
/// Required share of the decayed branch carried by ancilla `|1>`.
pub const MIN_ANCILLA_WEIGHT: f64 = 0.99;
/// Default detection threshold, relative to the sweep maximum.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 0.05;
/// Absolute floor on the detection threshold.
pub const DEFAULT_THRESHOLD_FLOOR: f64 = 0.01;
/// Upper bound on interval counts proposed by the refinement planner.
pub const MAX_REFINEMENT_INTERVALS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub intervals: usize,
}

pub fn make_grid(omega_min: f64, omega_max: f64, intervals: usize) -> Result<FrequencyGrid> {
    if !(omega_min.is_finite() && omega_max.is_finite() && omega_max > omega_min) || intervals == 0 {
        return Err(Error::EmptyRange {
            min: omega_min,
            max: omega_max,
            intervals,
        });
    }
    Ok(FrequencyGrid {
        omega_min,
        omega_max,
        intervals,
    })
}

impl FrequencyGrid {
    pub fn delta(&self) -> f64 {
        (self.omega_max - self.omega_min) / self.intervals as f64
    }

    /// `omega_min + (k + 1/2) delta`.
    pub fn center(&self, k: usize) -> f64 {
        self.omega_min + (k as f64 + 0.5) * self.delta()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.intervals).map(|k| self.center(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals == 0
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.omega_min && omega <= self.omega_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measurement {
    /// The exact probe-ground marginal, i.e. the infinite-shot limit.
    ExactMarginal,
    Shots { count: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub params: ProbeParameters,
    pub method: Method,
    pub measurement: Measurement,
}

impl SweepConfig {
    pub fn new(params: ProbeParameters, method: Method, measurement: Measurement) -> Result<Self> {
        let cfg = Self {
            params,
            method,
            measurement,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn exact(params: ProbeParameters) -> Self {
        Self {
            params,
            method: Method::Exact,
            measurement: Measurement::ExactMarginal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if let Measurement::Shots { count: 0, .. } = self.measurement {
            return Err(Error::InvalidParameter("shot count must be at least 1".into()));
        }
        match self.method {
            Method::Trotter(0) | Method::Circuit(0) => {
                Err(Error::InvalidParameter("trotter slices must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn with_coupling_and_time(self, c: f64, tau: f64) -> Self {
        Self {
            params: ProbeParameters { c, tau, ..self.params },
            ..self
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayMeasurement {
    /// Reported decay probability: the marginal, or the shot estimate.
    pub probability: f64,
    pub marginal: f64,
    pub successes: Option<u64>,
    pub final_state: ComplexVector,
}

/// Bernoulli draws of `p` on the stream `(seed, stream)`; independent of call order.
pub fn sample_shots(p: f64, count: u64, seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let p = p.clamp(0.0, 1.0);
    (0..count).filter(|_| rng.random::<f64>() < p).count() as u64
}

fn measure(sys: &SystemHamiltonian, config: &SweepConfig, omega_k: f64, stream: u64) -> Result<DecayMeasurement> {
    let model = build_total_hamiltonian(sys, &config.params.with_omega(omega_k))?;
    let final_state = run_protocol_step(&model, config.params.tau, config.method)?;
    let marginal = probe_ground_population(&final_state).clamp(0.0, 1.0);
    let (probability, successes) = match config.measurement {
        Measurement::ExactMarginal => (marginal, None),
        Measurement::Shots { count, seed } => {
            let hits = sample_shots(marginal, count, seed, stream);
            (hits as f64 / count as f64, Some(hits))
        }
    };
    Ok(DecayMeasurement {
        probability,
        marginal,
        successes,
        final_state,
    })
}

/// Runs the protocol once at `omega_k`. Shot sampling uses stream 0.
pub fn decay_probability_at(sys: &SystemHamiltonian, config: &SweepConfig, omega_k: f64) -> Result<DecayMeasurement> {
    config.validate()?;
    measure(sys, config, omega_k, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: FrequencyGrid,
    pub decay: Vec<f64>,
    pub config: SweepConfig,
    /// Dimension `N` of the swept system.
    pub system_dim: usize,
    /// Successes per grid point when shots were sampled.
    pub successes: Option<Vec<u64>>,
}

impl SweepResult {
    pub fn max_decay(&self) -> f64 {
        self.decay.iter().copied().fold(0.0, f64::max)
    }

    pub fn shot_count(&self) -> Option<u64> {
        match self.config.measurement {
            Measurement::Shots { count, .. } => Some(count),
            Measurement::ExactMarginal => None,
        }
    }

    /// `omega,p_decay[,shots,successes]`, fixed precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let shots = self.shot_count().zip(self.successes.as_ref());
        out.push_str(if shots.is_some() {
            "omega,p_decay,shots,successes\n"
        } else {
            "omega,p_decay\n"
        });
        for (k, p) in self.decay.iter().enumerate() {
            let w = self.grid.center(k);
            match shots {
                Some((count, hits)) => out.push_str(&format!("{w:.10},{p:.10},{count},{}\n", hits[k])),
                None => out.push_str(&format!("{w:.10},{p:.10}\n")),
            }
        }
        out
    }
}

/// Evaluates every grid point on the current rayon pool; output is ordered by `k`.
pub fn run_sweep(sys: &SystemHamiltonian, grid: &FrequencyGrid, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let points: Vec<(f64, Option<u64>)> = (0..grid.intervals)
        .into_par_iter()
        .map(|k| measure(sys, config, grid.center(k), k as u64).map(|m| (m.probability, m.successes)))
        .collect::<Result<_>>()?;
    let decay = points.iter().map(|p| p.0).collect();
    let successes = match config.measurement {
        Measurement::Shots { .. } => Some(points.iter().map(|p| p.1.unwrap_or(0)).collect()),
        Measurement::ExactMarginal => None,
    };
    Ok(SweepResult {
        grid: *grid,
        decay,
        config: *config,
        system_dim: sys.dim(),
        successes,
    })
}

/// Runs [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(
    sys: &SystemHamiltonian,
    grid: &FrequencyGrid,
    config: &SweepConfig,
    threads: usize,
) -> Result<SweepResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_sweep(sys, grid, config))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    #[serde(skip)]
    pub k_max: usize,
    pub omega_peak: f64,
    pub height: f64,
    pub estimated_energy: f64,
    /// Half the extent of the contiguous region above half height.
    pub half_width: f64,
}

/// `max(relative * max_decay, floor)`.
pub fn effective_threshold(result: &SweepResult, relative: f64, floor: f64) -> f64 {
    (relative * result.max_decay()).max(floor)
}

/// Largest coupling element any line of this sweep can have, `2 c sqrt(N)`.
pub fn max_coupling_element(result: &SweepResult) -> f64 {
    2.0 * result.config.params.c * (result.system_dim as f64).sqrt()
}

/// Upper bound on the decay a single line of strength at most `q_max`
/// produces at detuning `delta`: its Lorentzian envelope.
pub fn lobe_envelope(q_max: f64, delta: f64) -> f64 {
    if q_max == 0.0 {
        return 0.0;
    }
    q_max * q_max / (q_max * q_max + delta * delta)
}

/// Strict interior local maxima at or above `threshold`, with tied plateaus
/// counted once.
///
/// A maximum that fits under the summed envelopes of taller ones is
/// indistinguishable from Rabi side lobes of those lines and is dropped, unless
/// the two nearest taller ones are the matched lobes of a line split around it.
pub fn detect_peaks(result: &SweepResult, threshold: f64) -> Vec<Peak> {
    detect_peaks_with_lobe_bound(result, threshold, max_coupling_element(result))
}

pub fn detect_peaks_with_lobe_bound(result: &SweepResult, threshold: f64, q_max: f64) -> Vec<Peak> {
    let d = &result.decay;
    let grid = &result.grid;
    let m = d.len();
    let mut candidates = Vec::new();
    let mut k = 0;
    while k < m {
        let start = k;
        while k + 1 < m && d[k + 1] == d[start] {
            k += 1;
        }
        let end = k;
        let h = d[start];
        let rises = start > 0 && d[start - 1] < h;
        let falls = end + 1 < m && d[end + 1] < h;
        if rises && falls && h >= threshold && h > 0.0 {
            let mut lo = start;
            while lo > 0 && d[lo - 1] >= 0.5 * h {
                lo -= 1;
            }
            let mut hi = end;
            while hi + 1 < m && d[hi + 1] >= 0.5 * h {
                hi += 1;
            }
            let omega_peak = 0.5 * (grid.center(start) + grid.center(end));
            candidates.push(Peak {
                k_max: (start + end) / 2,
                omega_peak,
                height: h,
                estimated_energy: result.config.params.alpha + omega_peak,
                half_width: 0.5 * (hi - lo + 1) as f64 * grid.delta(),
            });
        }
        k += 1;
    }
    candidates.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.k_max.cmp(&b.k_max)));
    let reach = split_lobe_reach(q_max, result.config.params.tau);
    let mut kept: Vec<Peak> = Vec::new();
    for (i, p) in candidates.iter().enumerate() {
        let pair = split_flanks(&candidates, i, grid.delta(), reach);
        let shadow: f64 = kept
            .iter()
            .filter(|q| pair.is_none_or(|(l, r)| q.k_max != l && q.k_max != r))
            .map(|q| lobe_envelope(q_max, q.omega_peak - p.omega_peak))
            .sum();
        if p.height > shadow {
            kept.push(p.clone());
        }
    }
    kept.sort_by_key(|p| p.k_max);
    kept
}

/// Farthest a first lobe maximum of a line with coupling at most `q_max` sits
/// from resonance: the next `sin^2` crest lies within `pi` of `Q tau / 2`.
fn split_lobe_reach(q_max: f64, tau: f64) -> f64 {
    let x = 0.5 * q_max * tau;
    2.0 / tau * (2.0 * PI * x + PI * PI).sqrt()
}
/// Relative height mismatch tolerated between the two lobes of one split line.
const SPLIT_LOBE_BALANCE: f64 = 0.1;
/// Tolerated `|d_left - d_right|` in grid steps: sampling alone contributes up to two.
const SPLIT_LOBE_SKEW: f64 = 3.0;

/// Grid indices of the maxima nearest to candidate `i` on either side if they
/// look like the two lobes of a single line resonant there: equal height,
/// equidistant, and within `reach`. Sampling decides which lobes come out
/// taller than the center, so all candidates are considered.
fn split_flanks(candidates: &[Peak], i: usize, delta: f64, reach: f64) -> Option<(usize, usize)> {
    let p = &candidates[i];
    let nearest = |left: bool| {
        candidates
            .iter()
            .filter(|q| if left { q.omega_peak < p.omega_peak } else { q.omega_peak > p.omega_peak })
            .min_by(|a, b| (a.omega_peak - p.omega_peak).abs().total_cmp(&(b.omega_peak - p.omega_peak).abs()))
    };
    let (ql, qr) = (nearest(true)?, nearest(false)?);
    let (dl, dr) = (p.omega_peak - ql.omega_peak, qr.omega_peak - p.omega_peak);
    let balanced = (ql.height - qr.height).abs() <= SPLIT_LOBE_BALANCE * ql.height.max(qr.height);
    (balanced && (dl - dr).abs() <= SPLIT_LOBE_SKEW * delta && dl.max(dr) <= reach).then_some((ql.k_max, qr.k_max))
}

/// What the refinement planner knows about the expected spectrum.
#[derive(Clone, Debug, PartialEq)]
pub enum Expected {
    Count(usize),
    /// Known transition frequencies, e.g. from the diagonalization oracle.
    Transitions(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementStage {
    /// Twice the grid density, same coupling and time.
    DenserGrid,
    /// Half the coupling, twice the time.
    WeakerLonger,
    /// Coupling of the previous stage, ten times its time.
    LongerEvolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementJob {
    /// Jobs sharing a gap escalate in order; later ones run only if earlier ones fail.
    pub gap: usize,
    pub stage: RefinementStage,
    pub omega_min: f64,
    pub omega_max: f64,
    pub intervals: usize,
    pub c: f64,
    pub tau: f64,
    /// Transitions this gap is expected to contain, when known.
    pub targets: Vec<f64>,
}

impl RefinementJob {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        make_grid(self.omega_min, self.omega_max, self.intervals)
    }
}

/// Greedy nearest matching; returns, per target, whether some peak lies within `tol`.
pub(crate) fn matched_targets(peak_omegas: &[f64], targets: &[f64], tol: f64) -> Vec<bool> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (j, &t) in targets.iter().enumerate() {
        for (p, &w) in peak_omegas.iter().enumerate() {
            let e = (w - t).abs();
            if e <= tol {
                pairs.push((e, j, p));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut hit = vec![false; targets.len()];
    let mut used = vec![false; peak_omegas.len()];
    for (_, j, p) in pairs {
        if !hit[j] && !used[p] {
            hit[j] = true;
            used[p] = true;
        }
    }
    hit
}

/// Escalation ladder for gaps between detected peaks that should hold more.
///
/// Gaps are the intervals between consecutive peaks (and the grid edges).
/// Each gap gets three jobs: denser grid, then `(c/2, 2 tau)`, then `(c/2, 20 tau)`
/// with the grid fine enough to resolve a `1/tau`-wide line.
pub fn plan_refinement(result: &SweepResult, peaks: &[Peak], expected: &Expected) -> Vec<RefinementJob> {
    let grid = &result.grid;
    let delta = grid.delta();
    let mut bounds: Vec<f64> = peaks.iter().map(|p| p.omega_peak).collect();
    bounds.sort_by(f64::total_cmp);
    bounds.insert(0, grid.omega_min);
    bounds.push(grid.omega_max);

    // (gap index, targets) for every gap that needs refining
    let mut gaps: Vec<(usize, Vec<f64>)> = Vec::new();
    match expected {
        Expected::Transitions(ts) => {
            let omegas: Vec<f64> = peaks.iter().map(|p| p.omega_peak).collect();
            let hit = matched_targets(&omegas, ts, delta);
            for (&t, _) in ts.iter().zip(&hit).filter(|(_, &h)| !h) {
                if !grid.contains(t) {
                    continue;
                }
                let g = bounds.windows(2).position(|w| t >= w[0] && t <= w[1]).unwrap_or(0);
                match gaps.iter_mut().find(|(i, _)| *i == g) {
                    Some((_, v)) => v.push(t),
                    None => gaps.push((g, vec![t])),
                }
            }
        }
        Expected::Count(n) => {
            let missing = n.saturating_sub(peaks.len());
            let mut order: Vec<usize> = (0..bounds.len() - 1).collect();
            order.sort_by(|&a, &b| {
                let wa = bounds[a + 1] - bounds[a];
                let wb = bounds[b + 1] - bounds[b];
                wb.total_cmp(&wa).then(a.cmp(&b))
            });
            gaps = order.into_iter().take(missing).map(|g| (g, Vec::new())).collect();
        }
    }
    gaps.sort_by_key(|g| g.0);

    let c = result.config.params.c;
    let tau = result.config.params.tau;
    let mut jobs = Vec::new();
    for (gap, targets) in gaps {
        let (lo, hi) = (bounds[gap], bounds[gap + 1]);
        let m_sub = (((hi - lo) / delta).round() as usize).max(1);
        let dense = (2 * m_sub).min(MAX_REFINEMENT_INTERVALS);
        jobs.push(RefinementJob {
            gap,
            stage: RefinementStage::DenserGrid,
            omega_min: lo,
            omega_max: hi,
            intervals: dense,
            c,
            tau,
            targets: targets.clone(),
        });
        jobs.push(RefinementJob {
            gap,
            stage: RefinementStage::WeakerLonger,
            omega_min: lo,
            omega_max: hi,
            intervals: dense,
            c: 0.5 * c,
            tau: 2.0 * tau,
            targets: targets.clone(),
        });
        let long_tau = 20.0 * tau;
        let (wlo, whi) = match (targets.first(), targets.last()) {
            (Some(&a), Some(&b)) => ((a - 5.0 * delta).max(lo), (b + 5.0 * delta).min(hi)),
            _ => (lo, hi),
        };
        let resolving = ((whi - wlo) * long_tau / 4.0).ceil() as usize;
        jobs.push(RefinementJob {
            gap,
            stage: RefinementStage::LongerEvolution,
            omega_min: wlo,
            omega_max: whi,
            intervals: dense.max(resolving).min(MAX_REFINEMENT_INTERVALS),
            c: 0.5 * c,
            tau: long_tau,
            targets,
        });
    }
    jobs
}

#[derive(Clone, Debug)]
pub struct RefinementOutcome {
    pub job: RefinementJob,
    pub result: SweepResult,
    pub peaks: Vec<Peak>,
    pub resolved: bool,
}

/// Runs each gap's jobs in order, stopping at the first stage that resolves it.
///
/// A gap with targets is resolved once every target has a peak within
/// `tol`; a gap without targets once any peak appears.
pub fn execute_refinement(
    sys: &SystemHamiltonian,
    base: &SweepConfig,
    jobs: &[RefinementJob],
    relative_threshold: f64,
    tol: f64,
) -> Result<Vec<RefinementOutcome>> {
    let mut outcomes: Vec<RefinementOutcome> = Vec::new();
    for job in jobs {
        if outcomes.iter().any(|o| o.job.gap == job.gap && o.resolved) {
            continue;
        }
        let config = base.with_coupling_and_time(job.c, job.tau);
        let result = run_sweep(sys, &job.grid()?, &config)?;
        let threshold = effective_threshold(&result, relative_threshold, DEFAULT_THRESHOLD_FLOOR);
        let peaks = detect_peaks(&result, threshold);
        let resolved = if job.targets.is_empty() {
            !peaks.is_empty()
        } else {
            let omegas: Vec<f64> = peaks.iter().map(|p| p.omega_peak).collect();
            matched_targets(&omegas, &job.targets, tol).iter().all(|&h| h)
        };
        outcomes.push(RefinementOutcome {
            job: job.clone(),
            result,
            peaks,
            resolved,
        });
    }
    Ok(outcomes)
}

/// Projects onto the decayed probe branch and returns its system register.
///
/// Returns the branch probability and the renormalized `|0>_p |1>_a` block.
pub fn extract_collapsed_eigenstate(final_state: &ComplexVector) -> Result<(f64, ComplexVector)> {
    let dim = final_state.dim();
    if dim < 8 || !dim.is_power_of_two() {
        return Err(Error::BadDimension(dim));
    }
    let half = dim / 2;
    let quarter = dim / 4;
    let amps = final_state.amplitudes();
    let probability: f64 = amps[..half].iter().map(|z| z.norm_sqr()).sum();
    if probability < MIN_DECAY_SUPPORT {
        return Err(Error::NoDecaySupport { probability });
    }
    let excited = &amps[quarter..half];
    let weight = excited.iter().map(|z| z.norm_sqr()).sum::<f64>() / probability;
    if weight < MIN_ANCILLA_WEIGHT {
        return Err(Error::AncillaLeakage { weight });
    }
    Ok((probability, ComplexVector::from_vec(excited.to_vec()).normalized()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{predicted_sweep, rabi_decay_probability, transition_table};
    use crate::model::{decayed_state, prepare_initial_state};
    use crate::operators::{c, eigh};

    fn sweep_of(decay: Vec<f64>, grid: FrequencyGrid) -> SweepResult {
        sweep_with_coupling(decay, grid, 0.002, 1200.0)
    }

    fn sweep_with_coupling(decay: Vec<f64>, grid: FrequencyGrid, cp: f64, tau: f64) -> SweepResult {
        SweepResult {
            grid,
            decay,
            config: SweepConfig::exact(ProbeParameters::new(0.0, cp, -100.0, tau).unwrap()),
            system_dim: 2,
            successes: None,
        }
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(15.8, 19.2, 170).unwrap();
        assert!((g.delta() - 0.02).abs() < 1e-14);
        assert!((g.center(0) - 15.81).abs() < 1e-12);
        assert!((g.center(169) - 19.19).abs() < 1e-12);
        assert_eq!(make_grid(0.0, 1.0, 1).unwrap().centers(), vec![0.5]);
        assert!((make_grid(17.4, 17.6, 400).unwrap().delta() - 5e-4).abs() < 1e-15);
        assert!(matches!(make_grid(1.0, 1.0, 4), Err(Error::EmptyRange { .. })));
        assert!(matches!(make_grid(0.0, 1.0, 0), Err(Error::EmptyRange { .. })));
    }

    #[test]
    fn centers_strictly_inside() {
        let g = make_grid(-3.0, 7.5, 33).unwrap();
        for w in g.centers() {
            assert!(w > g.omega_min && w < g.omega_max);
        }
    }

    #[test]
    fn trivial_peak_cases() {
        let g = make_grid(0.0, 3.0, 3).unwrap();
        let peaks = detect_peaks(&sweep_of(vec![0.0, 0.9, 0.0], g), 0.05);
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].k_max, 1);
        assert!((peaks[0].omega_peak - 1.5).abs() < 1e-15);
        assert!((peaks[0].estimated_energy - (-98.5)).abs() < 1e-12);
        assert!(detect_peaks(&sweep_of(vec![0.0; 3], g), 0.05).is_empty());
    }

    #[test]
    fn plateau_merges_and_edges_are_ignored() {
        let g = make_grid(0.0, 6.0, 6).unwrap();
        let peaks = detect_peaks(&sweep_of(vec![0.0, 0.4, 0.4, 0.1, 0.2, 0.9], g), 0.05);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].omega_peak - 2.0).abs() < 1e-15);
        assert!((peaks[0].half_width - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_synthetic_lineshapes() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[17.0, 0.0, 0.0, 17.2]).unwrap();
        // diagonal system: each eigenvector has component sum 1
        let table = transition_table(&sys, 0.002, 0.0).unwrap();
        let grid = make_grid(16.9, 17.3, 200).unwrap();
        assert!((0.2 / grid.delta() - 100.0).abs() < 1e-9);
        let tau = 1200.0;
        let pred = predicted_sweep(&table, &grid, tau);
        let result = sweep_with_coupling(pred.decay, grid, 0.002, tau);
        let peaks = detect_peaks(&result, effective_threshold(&result, 0.05, 0.01));
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        for (p, r) in peaks.iter().zip(&table.rows) {
            assert!((p.omega_peak - r.transition_freq).abs() <= grid.delta() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn spacing_ten_intervals_resolves_two_lines() {
        let grid = make_grid(0.0, 1.0, 100).unwrap();
        let (t1, t2) = (grid.center(40), grid.center(50));
        let cp = 0.005;
        let q = 2.0 * cp;
        let tau = std::f64::consts::PI / q;
        let decay: Vec<f64> = grid
            .centers()
            .iter()
            .map(|&w| {
                rabi_decay_probability(q, t1, 0.0, w, tau).unwrap()
                    + rabi_decay_probability(q, t2, 0.0, w, tau).unwrap()
            })
            .collect();
        let peaks = detect_peaks(&sweep_with_coupling(decay, grid, cp, tau), 0.05);
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        assert!((peaks[0].omega_peak - t1).abs() <= grid.delta() / 2.0);
        assert!((peaks[1].omega_peak - t2).abs() <= grid.delta() / 2.0);
    }

    fn diag_system() -> SystemHamiltonian {
        SystemHamiltonian::from_real_symmetric(2, &[0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn zero_coupling_and_zero_time_give_no_decay() {
        let sys = diag_system();
        let cfg = SweepConfig::exact(ProbeParameters::new(0.0, 0.0, -1.0, 50.0).unwrap());
        assert_eq!(decay_probability_at(&sys, &cfg, 1.0).unwrap().probability, 0.0);
        let cfg = SweepConfig::exact(ProbeParameters::new(0.0, 0.01, -1.0, 0.0).unwrap());
        assert_eq!(decay_probability_at(&sys, &cfg, 1.0).unwrap().probability, 0.0);
        let grid = make_grid(0.0, 3.0, 15).unwrap();
        let cfg = SweepConfig::exact(ProbeParameters::new(0.0, 0.0, -1.0, 80.0).unwrap());
        assert!(run_sweep(&sys, &grid, &cfg).unwrap().decay.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn resonant_decay_follows_rabi_formula() {
        let sys = diag_system();
        let cp = 0.01;
        let q = 2.0 * cp; // component sum of a basis vector is 1
        let tau = std::f64::consts::PI / q;
        let cfg = SweepConfig::exact(ProbeParameters::new(0.0, cp, -1.0, tau).unwrap());
        // transitions at 1.0 and 2.0, 1.0 apart
        let m = decay_probability_at(&sys, &cfg, 1.0).unwrap();
        assert!((m.probability - 1.0).abs() < 5e-3, "{}", m.probability);
    }

    #[test]
    fn shots_are_deterministic_and_order_free() {
        let sys = diag_system();
        let params = ProbeParameters::new(0.0, 0.01, -1.0, 100.0).unwrap();
        let cfg = SweepConfig::new(params, Method::Exact, Measurement::Shots { count: 500, seed: 9 }).unwrap();
        let grid = make_grid(0.9, 1.1, 8).unwrap();
        let a = run_sweep_with_threads(&sys, &grid, &cfg, 1).unwrap();
        let b = run_sweep_with_threads(&sys, &grid, &cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("omega,p_decay,shots,successes\n"));
        let exact = run_sweep(&sys, &grid, &SweepConfig::exact(params)).unwrap();
        for (s, e) in a.decay.iter().zip(&exact.decay) {
            assert!((s - e).abs() < 0.1);
        }
    }

    #[test]
    fn shot_sampling_edge_probabilities() {
        assert_eq!(sample_shots(0.0, 100, 1, 3), 0);
        assert_eq!(sample_shots(1.0, 100, 1, 3), 100);
        assert_eq!(sample_shots(0.3, 1000, 5, 2), sample_shots(0.3, 1000, 5, 2));
    }

    #[test]
    fn config_validation() {
        let p = ProbeParameters::default();
        assert!(SweepConfig::new(p, Method::Exact, Measurement::Shots { count: 0, seed: 1 }).is_err());
        assert!(SweepConfig::new(p, Method::Trotter(0), Measurement::ExactMarginal).is_err());
        assert!(SweepConfig::new(p, Method::Circuit(3), Measurement::ExactMarginal).is_ok());
    }

    #[test]
    fn refinement_empty_when_all_found() {
        let g = make_grid(0.0, 3.0, 3).unwrap();
        let r = sweep_of(vec![0.0, 0.9, 0.0], g);
        let peaks = detect_peaks(&r, 0.05);
        assert!(plan_refinement(&r, &peaks, &Expected::Count(1)).is_empty());
        assert!(plan_refinement(&r, &peaks, &Expected::Transitions(vec![1.5])).is_empty());
    }

    #[test]
    fn refinement_ladder_for_one_missing_transition() {
        let grid = make_grid(15.8, 19.2, 170).unwrap();
        let mut decay = vec![0.0; 170];
        let k = 100; // 17.81
        decay[k] = 0.8;
        decay[k - 1] = 0.3;
        decay[k + 1] = 0.3;
        let r = sweep_of(decay, grid);
        let peaks = detect_peaks(&r, 0.05);
        let jobs = plan_refinement(&r, &peaks, &Expected::Transitions(vec![grid.center(k), 18.6]));
        assert_eq!(jobs.len(), 3);
        let (a, b, c3) = (&jobs[0], &jobs[1], &jobs[2]);
        assert_eq!(a.stage, RefinementStage::DenserGrid);
        assert!((a.omega_min - grid.center(k)).abs() < 1e-12 && a.omega_max == 19.2);
        let m_sub = ((a.omega_max - a.omega_min) / grid.delta()).round() as usize;
        assert_eq!(a.intervals, 2 * m_sub);
        assert_eq!((b.c, b.tau), (0.001, 2400.0));
        assert_eq!(b.intervals, a.intervals);
        assert_eq!(c3.c, b.c);
        assert_eq!(c3.tau, 10.0 * b.tau);
        assert!(c3.omega_min <= 18.6 && c3.omega_max >= 18.6);
        assert!(c3.grid().unwrap().delta() <= 4.0 / c3.tau + 1e-12);
        assert_eq!(c3.targets, vec![18.6]);
    }

    #[test]
    fn refinement_by_count_targets_widest_gaps() {
        let grid = make_grid(0.0, 10.0, 100).unwrap();
        let mut decay = vec![0.0; 100];
        decay[20] = 0.5;
        let r = sweep_of(decay, grid);
        let peaks = detect_peaks(&r, 0.05);
        let jobs = plan_refinement(&r, &peaks, &Expected::Count(2));
        assert_eq!(jobs.len(), 3);
        assert!((jobs[0].omega_min - 2.05).abs() < 1e-12 && jobs[0].omega_max == 10.0);
    }

    #[test]
    fn collapsed_state_of_exact_decayed_state() {
        let lambda = ComplexVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let (p, got) = extract_collapsed_eigenstate(&decayed_state(&lambda)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(got.max_abs_diff(&lambda) < 1e-15);
    }

    #[test]
    fn collapsed_state_errors() {
        assert!(matches!(
            extract_collapsed_eigenstate(&prepare_initial_state(2)),
            Err(Error::NoDecaySupport { .. })
        ));
        // decayed probe with the ancilla still in |0>
        let mut v = vec![c(0.0, 0.0); 8];
        v[0] = c(1.0, 0.0);
        assert!(matches!(
            extract_collapsed_eigenstate(&ComplexVector::from_vec(v)),
            Err(Error::AncillaLeakage { .. })
        ));
    }

    #[test]
    fn collapsed_state_after_resonant_evolution() {
        let sys = SystemHamiltonian::from_real_symmetric(2, &[0.0, 0.3, 0.3, 1.0]).unwrap();
        let eig = eigh(sys.matrix()).unwrap();
        let table = transition_table(&sys, 0.002, -1.0).unwrap();
        let row = &table.rows[1];
        let tau = std::f64::consts::PI / row.q;
        let cfg = SweepConfig::exact(ProbeParameters::new(0.0, 0.002, -1.0, tau).unwrap());
        let m = decay_probability_at(&sys, &cfg, row.transition_freq).unwrap();
        let (_, psi) = extract_collapsed_eigenstate(&m.final_state).unwrap();
        let fid = eig.eigenvector(1).inner(&psi).norm_sqr();
        assert!(fid >= 0.99, "{fid}");
    }
}
