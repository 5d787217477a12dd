//! Q-Wiener noise on the truncated domain.
//!
//! The covariance is diagonal in the sine basis
//! `e_k(x) = √(1/L)·sin(kπ(x+L)/(2L))`, which is exactly orthonormal under the
//! rectangle-rule inner product on the grid. Paths are stored as mode
//! coefficients; fields are synthesized on demand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Mode count, eigenvalues `λ_k = λ₀ k^{-p}` and the sampled basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub n_modes: usize,
    pub lambda0: f64,
    pub decay_exponent: f64,
    pub eigenvalues: Vec<f64>,
    /// `basis[k·N + i] = e_{k+1}(x_i)`
    #[serde(skip)]
    basis: Vec<f64>,
    n: usize,
}

impl NoiseSpec {
    pub fn new(g: &Grid, n_modes: usize, lambda0: f64, decay_exponent: f64) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Config("noise.n_modes must be positive".into()));
        }
        if n_modes > g.n() / 4 {
            return Err(Error::Config(format!(
                "noise.n_modes = {n_modes} aliases on a grid of {} points (at most N/4 modes)",
                g.n()
            )));
        }
        if !(lambda0.is_finite() && lambda0 >= 0.0) {
            return Err(Error::Config(format!("noise.lambda0 must be nonnegative, got {lambda0}")));
        }
        if !(decay_exponent.is_finite() && decay_exponent > 1.0) {
            return Err(Error::Config(format!(
                "noise.decay_exponent must exceed 1 for a trace-class covariance, got {decay_exponent}"
            )));
        }
        let eigenvalues = (1..=n_modes).map(|k| lambda0 * (k as f64).powf(-decay_exponent)).collect();
        Ok(Self { n_modes, lambda0, decay_exponent, eigenvalues, basis: Self::build_basis(g, n_modes), n: g.n() })
    }

    fn build_basis(g: &Grid, n_modes: usize) -> Vec<f64> {
        let n = g.n();
        let amp = (1.0 / g.half_width()).sqrt();
        let m = (n - 1) as f64;
        let mut basis = vec![0.0; n_modes * n];
        for k in 0..n_modes {
            let kk = (k + 1) as f64;
            for i in 1..n - 1 {
                basis[k * n + i] = amp * (kk * std::f64::consts::PI * i as f64 / m).sin();
            }
        }
        basis
    }

    /// Restores the basis after deserialization.
    pub fn rehydrate(mut self, g: &Grid) -> Self {
        if self.basis.is_empty() {
            self.basis = Self::build_basis(g, self.n_modes);
            self.n = g.n();
        }
        self
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Values of `e_{k+1}` on the grid.
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.basis[k * self.n..(k + 1) * self.n]
    }

    /// Writes `Σ_k a_k e_k` into `out`.
    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (k, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(self.mode(k)) {
                *o += a * e;
            }
        }
    }
}

/// Identifies a path inside a reproducible ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathKey {
    pub base_seed: u64,
    pub path: u64,
}

/// A sampled Q-Wiener trajectory on the time grid `t_n = n·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePath {
    pub key: PathKey,
    pub dt: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    /// `increments[n·K + k]`: coefficient of `e_k` in `W_{t_{n+1}} - W_{t_n}`
    pub increments: Vec<f64>,
    /// `cumulative[n·K + k]`: coefficient of `e_k` in `W_{t_n}`, `n = 0..=n_steps`
    pub cumulative: Vec<f64>,
}

/// Number of steps `T/dt`, requiring `T` to be an integer multiple of `dt`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {t_end}")));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!("horizon {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Draws a path. Step `n` reads from the ChaCha stream `key.path` at word
/// offset `n·2²⁰`, so the coefficients are a pure function of
/// `(base_seed, path, step, mode)` regardless of scheduling.
pub fn sample_path(spec: &NoiseSpec, t_end: f64, dt: f64, key: PathKey) -> Result<NoisePath> {
    let n_steps = step_count(t_end, dt)?;
    let k = spec.n_modes;
    let scale: Vec<f64> = spec.eigenvalues.iter().map(|l| (l * dt).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(key.base_seed);
    rng.set_stream(key.path);
    let mut increments = vec![0.0; n_steps * k];
    for n in 0..n_steps {
        rng.set_word_pos((n as u128) << 20);
        for j in 0..k {
            let g: f64 = StandardNormal.sample(&mut rng);
            increments[n * k + j] = scale[j] * g;
        }
    }
    Ok(NoisePath::from_increments(key, dt, k, increments))
}

impl NoisePath {
    pub fn from_increments(key: PathKey, dt: f64, n_modes: usize, increments: Vec<f64>) -> Self {
        let n_steps = increments.len() / n_modes;
        let mut cumulative = vec![0.0; (n_steps + 1) * n_modes];
        for n in 0..n_steps {
            for j in 0..n_modes {
                cumulative[(n + 1) * n_modes + j] = cumulative[n * n_modes + j] + increments[n * n_modes + j];
            }
        }
        Self { key, dt, n_steps, n_modes, increments, cumulative }
    }

    pub fn t_end(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn increment(&self, n: usize) -> &[f64] {
        &self.increments[n * self.n_modes..(n + 1) * self.n_modes]
    }

    /// Mode coefficients of `W_{t_n}`.
    pub fn value(&self, n: usize) -> &[f64] {
        &self.cumulative[n * self.n_modes..(n + 1) * self.n_modes]
    }

    /// The same Brownian path observed on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(Error::Interface(format!("cannot coarsen {} steps by {factor}", self.n_steps)));
        }
        let k = self.n_modes;
        let m = self.n_steps / factor;
        let mut inc = vec![0.0; m * k];
        for n in 0..m {
            for j in 0..k {
                inc[n * k + j] = self.cumulative[(n + 1) * factor * k + j] - self.cumulative[n * factor * k + j];
            }
        }
        Ok(NoisePath::from_increments(self.key, self.dt * factor as f64, k, inc))
    }

    /// Writes `t` and the cumulative mode coefficients of `W_t` as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(w, "t")?;
        for k in 1..=self.n_modes {
            write!(w, ",w{k}")?;
        }
        writeln!(w)?;
        for n in 0..=self.n_steps {
            write!(w, "{:.16e}", n as f64 * self.dt)?;
            for a in self.value(n) {
                write!(w, ",{a:.16e}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discrete Hölder seminorm estimate
/// `max_{ℓ ∈ {1,2,4,…}} max_n ‖W_{t_{n+ℓ}} - W_{t_n}‖ / (ℓ·dt)^η`.
///
/// Norms are taken in mode space, which equals the grid L² norm because the
/// basis is discretely orthonormal.
pub fn holder_norm(path: &NoisePath, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::Domain(format!("Hölder exponent must lie in (0, 1/2), got {eta}")));
    }
    let k = path.n_modes;
    let mut best = 0.0f64;
    let mut lag = 1;
    while lag <= path.n_steps {
        let denom = (lag as f64 * path.dt).powf(eta);
        let mut worst = 0.0f64;
        for n in 0..=path.n_steps - lag {
            let a = path.value(n + lag);
            let b = path.value(n);
            let mut s = 0.0;
            for j in 0..k {
                let d = a[j] - b[j];
                s += d * d;
            }
            worst = worst.max(s);
        }
        best = best.max(worst.sqrt() / denom);
        lag *= 2;
    }
    Ok(best)
}
