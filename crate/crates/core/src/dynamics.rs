//! Stochastic field equation around the front, coupled with the phase ODE.
//!
//! `u_t = û(·-ct) + v_t` with
//! `dv = B(t, v) dt + √ε dW`, `B(t, v) = -v + w∗(F(v + û_t) - F(û_t))`, and the
//! phase follows `Ċ = -m⟨û_x(·-ct-C), u - û(·-ct-C)⟩`. The field is advanced
//! by Euler–Maruyama, the phase by Heun using the freshly updated field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::WaveProfile;
use crate::grid::{dot, norm, ConvScratch, Convolver, Field};
use crate::noise::{NoisePath, NoiseSpec};
use crate::linops::PhaseTrajectory;

/// Divergence threshold on `‖v‖`.
pub const BLOWUP_TOL: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub epsilon: f64,
    pub m: f64,
    /// Initial perturbation; `None` means `v₀ = 0`.
    pub v0: Option<Field>,
}

/// Which full-field series to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storage {
    /// Keep every `stride`-th field snapshot (0 keeps none).
    pub stride: usize,
    /// Also keep `v` (the rescaled fluctuation `ṽ^ε` is always kept when `stride > 0`).
    pub keep_v: bool,
}

impl Storage {
    pub const NONE: Storage = Storage { stride: 0, keep_v: false };
    pub const FULL: Storage = Storage { stride: 1, keep_v: false };
}

/// Time series produced by [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub dt: f64,
    pub n_steps: usize,
    pub epsilon: f64,
    pub m: f64,
    pub speed: f64,
    pub n: usize,
    /// `C(t_n)`, `n = 0..=n_steps`
    pub phase: Vec<f64>,
    pub norm_v: Vec<f64>,
    pub norm_tilde_v: Vec<f64>,
    pub norm_tilde_v_eps: Vec<f64>,
    pub stride: usize,
    /// `ṽ^ε` at steps `0, stride, 2·stride, …`, row-major
    pub tilde_v_eps: Vec<f64>,
    /// `v` at the same steps when requested
    pub v: Vec<f64>,
    pub v0: Vec<f64>,
    pub v_final: Vec<f64>,
    /// Left-rectangle sum `Σ dt·B(t_n, v_n)`
    pub drift_integral: Vec<f64>,
    /// `max_n max_i |(û(·-ct_n) + v_n) - (û(·-ct_n-C_n) + ṽ_n)|`
    pub reconstruction_defect: f64,
}

impl PathRecord {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |n| n as f64 * self.dt)
    }

    /// Stored `ṽ^ε` snapshot `j` (step `j·stride`).
    pub fn tilde_v_eps_at(&self, j: usize) -> &[f64] {
        &self.tilde_v_eps[j * self.n..(j + 1) * self.n]
    }

    pub fn v_at(&self, j: usize) -> &[f64] {
        &self.v[j * self.n..(j + 1) * self.n]
    }

    /// The phase trajectory `C(t_n)` with the front speed.
    pub fn trajectory(&self) -> PhaseTrajectory {
        PhaseTrajectory { speed: self.speed, dt: self.dt, phase: self.phase.clone() }
    }

    pub fn snapshot_count(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.tilde_v_eps.len() / self.n
        }
    }

    /// Strong-solution identity defect `‖v_N - v_0 - I - √ε W_T‖` for a
    /// given drift integral `I` (e.g. one computed on a finer run).
    pub fn identity_defect(&self, drift_integral: &[f64], noise_t: &[f64], dx: f64) -> f64 {
        let se = self.epsilon.sqrt();
        let d: Vec<f64> = (0..self.n)
            .map(|i| self.v_final[i] - self.v0[i] - drift_integral[i] - se * noise_t[i])
            .collect();
        norm(&d, dx)
    }
}

/// Reusable buffers for evaluating the drift.
pub struct DriftWork {
    conv: Convolver,
    scratch: ConvScratch,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DriftWork {
    pub fn new(p: &WaveProfile) -> Self {
        let conv = Convolver::new(&p.grid, &p.model.kernel);
        let n = p.grid.n();
        Self { scratch: conv.scratch(), conv, a: vec![0.0; n], b: vec![0.0; n] }
    }

    /// `B(t, v)` given the moving front `û_t` on the grid.
    pub fn drift_into(&mut self, p: &WaveProfile, u_t: &[f64], v: &[f64], out: &mut [f64]) {
        let f = &p.model.firing;
        for i in 0..v.len() {
            self.a[i] = f.value(v[i] + u_t[i]) - f.value(u_t[i]);
        }
        self.conv.convolve_into(&self.a, 0.0, 0.0, &mut self.b, &mut self.scratch);
        for i in 0..v.len() {
            out[i] = -v[i] + self.b[i];
        }
    }
}

/// `B(t, v) = -v + w∗(F(v + û(·-ct)) - F(û(·-ct)))`.
pub fn drift_b(t: f64, v: &Field, p: &WaveProfile) -> Result<Field> {
    let u_t = p.shifted(p.speed * t)?;
    let mut w = DriftWork::new(p);
    let mut out = vec![0.0; v.len()];
    w.drift_into(p, &u_t.values, &v.values, &mut out);
    Ok(Field::l2(out))
}

/// `-m⟨û_x(·-ct-C), u - û(·-ct-C)⟩` for the full state `u`.
pub fn phase_rhs(t: f64, c_phase: f64, u: &Field, p: &WaveProfile, m: f64) -> Result<f64> {
    let shift = p.speed * t + c_phase;
    let ut = p.shifted(shift)?;
    let uxt = p.shifted_x(shift)?;
    let diff: Vec<f64> = u.values.iter().zip(&ut.values).map(|(a, b)| a - b).collect();
    Ok(-m * dot(&uxt.values, &diff, p.grid.dx()))
}

/// Largest stable step `0.5 / (1 + ‖F'‖_∞ + m‖û_x‖²)`.
pub fn dt_max(p: &WaveProfile, m: f64) -> f64 {
    0.5 / (1.0 + p.model.firing.sup_first() + m * p.norm_ux_sq)
}

/// Front positions `û(·-s)` and `û_x(·-s)` at one shift.
pub(crate) struct Frame {
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Self { u: vec![0.0; n], ux: vec![0.0; n] }
    }

    pub fn set(&mut self, p: &WaveProfile, shift: f64) -> Result<()> {
        p.shifted_into(shift, &mut self.u)?;
        p.shifted_x_into(shift, &mut self.ux)
    }
}

fn check_window(p: &WaveProfile, shift: f64) -> Result<()> {
    let half = 0.5 * p.grid.half_width();
    if !shift.is_finite() || shift.abs() > half {
        return Err(Error::Truncation(format!("front position {shift:.4} left the window |s| ≤ {half}")));
    }
    Ok(())
}

fn validate(cfg: &SimConfig, p: &WaveProfile, path: &NoisePath) -> Result<()> {
    let mut errs = Vec::new();
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        errs.push(format!("sim.epsilon must be positive, got {}", cfg.epsilon));
    }
    if !(cfg.m > 0.0 && cfg.m.is_finite()) {
        errs.push(format!("sim.m must be positive, got {}", cfg.m));
    }
    let limit = dt_max(p, cfg.m);
    if !(cfg.dt > 0.0 && cfg.dt <= limit) {
        errs.push(format!("sim.dt = {} outside (0, {limit:.4e}]", cfg.dt));
    }
    if (path.dt - cfg.dt).abs() > 1e-12 * cfg.dt {
        errs.push(format!("noise path step {} differs from sim.dt {}", path.dt, cfg.dt));
    }
    if let Some(v0) = &cfg.v0 {
        if v0.len() != p.grid.n() || !v0.is_l2() {
            errs.push("sim.v0 must be a zero-asymptotic field on the simulation grid".into());
        }
    }
    match errs.len() {
        0 => Ok(()),
        1 => Err(Error::Config(errs.pop().unwrap_or_default())),
        _ => Err(Error::ConfigList(errs)),
    }
}

/// Integrates the coupled system along one noise path.
pub fn simulate(cfg: &SimConfig, p: &WaveProfile, spec: &NoiseSpec, path: &NoisePath, storage: Storage) -> Result<PathRecord> {
    validate(cfg, p, path)?;
    let n = p.grid.n();
    let dx = p.grid.dx();
    let dt = cfg.dt;
    let steps = path.n_steps;
    let se = cfg.epsilon.sqrt();
    let c = p.speed;
    let m = cfg.m;

    let mut v = cfg.v0.as_ref().map(|f| f.values.clone()).unwrap_or_else(|| vec![0.0; n]);
    let v0 = v.clone();
    let mut v_next = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut integral = vec![0.0; n];
    let mut dw = vec![0.0; n];
    let mut tv = vec![0.0; n];
    let mut work = DriftWork::new(p);
    let mut front = vec![0.0; n]; // û(·-ct_n)
    let mut frame = Frame::new(n); // û(·-ct_n-C_n)
    let mut trial = Frame::new(n);

    let mut rec = PathRecord {
        dt,
        n_steps: steps,
        epsilon: cfg.epsilon,
        m,
        speed: c,
        n,
        phase: Vec::with_capacity(steps + 1),
        norm_v: Vec::with_capacity(steps + 1),
        norm_tilde_v: Vec::with_capacity(steps + 1),
        norm_tilde_v_eps: Vec::with_capacity(steps + 1),
        stride: storage.stride,
        tilde_v_eps: Vec::new(),
        v: Vec::new(),
        v0: v0.clone(),
        v_final: Vec::new(),
        drift_integral: Vec::new(),
        reconstruction_defect: 0.0,
    };
    if storage.stride > 0 {
        let snaps = steps / storage.stride + 1;
        rec.tilde_v_eps.reserve(snaps * n);
        if storage.keep_v {
            rec.v.reserve(snaps * n);
        }
    }

    let mut cp = 0.0;
    p.shifted_into(0.0, &mut front)?;
    frame.set(p, cp)?;

    // ṽ = v + û(·-ct) - û(·-ct-C), with the record's bookkeeping
    let record = |step: usize, cp: f64, v: &[f64], front: &[f64], frame: &Frame, tv: &mut [f64], rec: &mut PathRecord| {
        let mut defect = 0.0f64;
        for i in 0..n {
            tv[i] = v[i] + (front[i] - frame.u[i]);
            let lhs = front[i] + v[i];
            let rhs = frame.u[i] + tv[i];
            defect = defect.max((lhs - rhs).abs());
        }
        rec.reconstruction_defect = rec.reconstruction_defect.max(defect);
        rec.phase.push(cp);
        rec.norm_v.push(norm(v, dx));
        let ntv = norm(tv, dx);
        rec.norm_tilde_v.push(ntv);
        rec.norm_tilde_v_eps.push(ntv / se);
        if storage.stride > 0 && step % storage.stride == 0 {
            rec.tilde_v_eps.extend(tv.iter().map(|x| x / se));
            if storage.keep_v {
                rec.v.extend_from_slice(v);
            }
        }
    };
    record(0, cp, &v, &front, &frame, &mut tv, &mut rec);

    for step in 0..steps {
        let t = step as f64 * dt;
        let t1 = t + dt;
        // Euler–Maruyama for v
        work.drift_into(p, &front, &v, &mut drift);
        spec.synthesize_into(path.increment(step), &mut dw);
        for i in 0..n {
            v_next[i] = v[i] + dt * drift[i] + se * dw[i];
            integral[i] += dt * drift[i];
        }
        // Heun for C: the residual u - û(·-ct-C) is ṽ
        let rhs0 = -m * dot(&frame.ux, &tv, dx);
        let pred = cp + dt * rhs0;
        let s_new = c * t1;
        p.shifted_into(s_new, &mut front)?;
        check_window(p, s_new + pred)?;
        trial.set(p, s_new + pred)?;
        let mut acc = 0.0;
        for i in 0..n {
            acc += trial.ux[i] * (v_next[i] + front[i] - trial.u[i]);
        }
        let rhs1 = -m * acc * dx;
        cp += 0.5 * dt * (rhs0 + rhs1);
        check_window(p, s_new + cp)?;
        frame.set(p, s_new + cp)?;
        std::mem::swap(&mut v, &mut v_next);

        let nv = norm(&v, dx);
        if !(nv <= BLOWUP_TOL) {
            return Err(Error::Divergence { step: step + 1, norm: nv, limit: BLOWUP_TOL });
        }
        record(step + 1, cp, &v, &front, &frame, &mut tv, &mut rec);
    }
    rec.v_final = v;
    rec.drift_integral = integral;
    Ok(rec)
}
