//! Seeded test systems: generic random Hermitian matrices and surrogates with
//! prescribed spectra and prescribed eigenvector component sums.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{SystemHamiltonian, DEFAULT_ALPHA};
use crate::operators::{c, ComplexMatrix, C64};

/// Eigenvalue window of the default surrogate: transitions fall in `[15.8, 19.2]`
/// for the default reference energy.
pub const DEFAULT_WINDOW: (f64, f64) = (DEFAULT_ALPHA + 15.8, DEFAULT_ALPHA + 19.2);
/// Log-normal spread of the surrogate's component-sum profile.
pub const SUM_PROFILE_SIGMA: f64 = 0.8;
/// Eigenvalue jitter as a fraction of the stratification slot.
pub const ENERGY_JITTER: f64 = 0.3;

/// Dense Hermitian matrix with entries uniform in the unit square, symmetrized.
pub fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = c(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..dim {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Haar-like random orthogonal matrix from Gram-Schmidt on Gaussian columns.
pub fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        // two passes keep the basis orthogonal to rounding
        for _ in 0..2 {
            for q in &cols {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    cols
}

/// Real symmetric `H = V diag(E) V^T` whose `j`-th eigenvector has component
/// sum `sums[j]`.
///
/// Requires `sum_j sums[j]^2 = N`, which holds for any orthonormal basis.
pub fn engineered_system(energies: &[f64], sums: &[f64], seed: u64) -> Result<SystemHamiltonian> {
    let n = energies.len();
    if sums.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sums.len(),
        });
    }
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::BadDimension(n));
    }
    let total: f64 = sums.iter().map(|s| s * s).sum();
    if (total - n as f64).abs() > 1e-9 * n as f64 {
        return Err(Error::InvalidParameter(format!(
            "squared component sums add to {total}, expected {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q0 = random_orthogonal(n, &mut rng);
    // t = sums / sqrt(N) is a unit vector; u = Q0 t.
    let root_n = (n as f64).sqrt();
    let t: Vec<f64> = sums.iter().map(|s| s / root_n).collect();
    let u: Vec<f64> = (0..n).map(|i| (0..n).map(|k| q0[k][i] * t[k]).sum()).collect();
    // Householder reflection P with P u = e = (1, ..., 1) / sqrt(N).
    let e = 1.0 / root_n;
    let w: Vec<f64> = u.iter().map(|x| x - e).collect();
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let reflect = |x: &[f64]| -> Vec<f64> {
        if ww < 1e-30 {
            return x.to_vec();
        }
        let d: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        x.iter().zip(&w).map(|(xi, wi)| xi - 2.0 * d / ww * wi).collect()
    };
    // Columns of V = P Q0; V t = e, so column j sums to sqrt(N) t_j.
    let v: Vec<Vec<f64>> = q0.iter().map(|col| reflect(col)).collect();
    let mut m = vec![0.0; n * n];
    for (j, col) in v.iter().enumerate() {
        for a in 0..n {
            for b in 0..n {
                m[a * n + b] += energies[j] * col[a] * col[b];
            }
        }
    }
    // exact symmetry
    for a in 0..n {
        for b in a + 1..n {
            let s = 0.5 * (m[a * n + b] + m[b * n + a]);
            m[a * n + b] = s;
            m[b * n + a] = s;
        }
    }
    SystemHamiltonian::from_real_symmetric(n, &m)
}

/// Recipe for a surrogate system with transitions in a chosen window.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateSpec {
    pub qubits: usize,
    pub seed: u64,
    /// Eigenvalue window `(E_min, E_max)`.
    pub window: (f64, f64),
    /// `(level, component sum)` overrides, levels 1-based in ascending energy.
    pub overrides: Vec<(usize, f64)>,
}

impl SurrogateSpec {
    pub fn new(qubits: usize, seed: u64) -> Self {
        Self {
            qubits,
            seed,
            window: DEFAULT_WINDOW,
            overrides: Vec::new(),
        }
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = (lo, hi);
        self
    }

    pub fn with_component_sum(mut self, level: usize, sum: f64) -> Self {
        self.overrides.push((level, sum));
        self
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    /// Stratified eigenvalues: one per slot of the window, jittered inside it.
    pub fn energies(&self) -> Vec<f64> {
        let n = self.dim();
        let (lo, hi) = self.window;
        let slot = (hi - lo) / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..n)
            .map(|j| lo + (j as f64 + 0.5 + rng.random_range(-ENERGY_JITTER..ENERGY_JITTER)) * slot)
            .collect()
    }

    /// Log-normal magnitudes with random signs, scaled so the squares add to `N`
    /// after the overrides are placed.
    pub fn component_sums(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x0005_eed5_u64);
        let normal = Normal::new(0.0, SUM_PROFILE_SIGMA).expect("positive sigma");
        let mut sums: Vec<f64> = (0..n)
            .map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * normal.sample(&mut rng).exp()
            })
            .collect();
        let mut fixed = vec![false; n];
        let mut fixed_weight = 0.0;
        for &(level, s) in &self.overrides {
            if level == 0 || level > n {
                return Err(Error::InvalidParameter(format!("level {level} outside 1..={n}")));
            }
            sums[level - 1] = s;
            fixed[level - 1] = true;
            fixed_weight += s * s;
        }
        let free_weight: f64 = (0..n).filter(|&j| !fixed[j]).map(|j| sums[j] * sums[j]).sum();
        let target = n as f64 - fixed_weight;
        if target <= 0.0 || free_weight == 0.0 {
            return Err(Error::InvalidParameter(
                "component-sum overrides leave no weight for the other levels".into(),
            ));
        }
        let scale = (target / free_weight).sqrt();
        for j in (0..n).filter(|&j| !fixed[j]) {
            sums[j] *= scale;
        }
        Ok(sums)
    }

    pub fn build(&self) -> Result<SystemHamiltonian> {
        if self.qubits == 0 {
            return Err(Error::BadDimension(1));
        }
        let (lo, hi) = self.window;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter("surrogate window must be a finite, non-empty range".into()));
        }
        engineered_system(&self.energies(), &self.component_sums()?, self.seed)
    }
}

/// Default surrogate on `n` qubits with eigenvalues inside `window`.
pub fn seeded_surrogate(n: usize, seed: u64, window: (f64, f64)) -> Result<SystemHamiltonian> {
    SurrogateSpec::new(n, seed).with_window(window.0, window.1).build()
}

/// Converts a real matrix into complex storage.
pub fn complexify(m: &[f64]) -> Vec<C64> {
    m.iter().map(|&x| c(x, 0.0)).collect()
}
