//! Linearization around the shifted front.
//!
//! With `ũ_t = û(·-ct-C(t))`:
//! `A⁰(t)z = -z + w∗(F'(ũ_t) z)` and
//! `A(t)z = A⁰(t)z - m⟨ũ_x(t), z⟩ ũ_x(t)`.
//! The gap certificate works with the symmetric part of the grid matrix of
//! `A⁰`; on a uniform grid the L² form is `dx` times the Euclidean form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::WaveProfile;
use crate::grid::{dot, norm, ConvScratch, Convolver, Field, Grid};
use crate::model::KernelSpec;

/// Grid matrix of `A⁰` at one front position, plus the tangent direction.
#[derive(Debug, Clone)]
pub struct OperatorSnapshot {
    pub shift: f64,
    pub dx: f64,
    /// `M_ij = -δ_ij + W_{i-j} F'(ũ_j)`
    pub matrix: DMatrix<f64>,
    /// `ũ_x` on the grid
    pub rank_one: Vec<f64>,
    pub fprime: Vec<f64>,
    /// Contributions of unit asymptotes beyond the grid, left and right,
    /// already weighted by `F'` at the front's asymptotic states.
    pub tail_left: Vec<f64>,
    pub tail_right: Vec<f64>,
}

impl OperatorSnapshot {
    /// Builds the snapshot from `F'(ũ)` on the grid and its asymptotic values.
    pub fn from_parts(
        g: &Grid,
        kernel: &KernelSpec,
        fprime: Vec<f64>,
        fprime_asymptotes: (f64, f64),
        rank_one: Vec<f64>,
        shift: f64,
    ) -> Self {
        let n = g.n();
        let conv = Convolver::new(g, kernel);
        let matrix = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { -1.0 } else { 0.0 };
            d + conv.weight(i as isize - j as isize) * fprime[j]
        });
        let zero = Field::zeros(n);
        let left = conv.convolve(&Field::new(zero.values.clone(), 1.0, 0.0));
        let right = conv.convolve(&Field::new(zero.values, 0.0, 1.0));
        Self {
            shift,
            dx: g.dx(),
            matrix,
            rank_one,
            fprime,
            tail_left: left.values.iter().map(|v| fprime_asymptotes.0 * v).collect(),
            tail_right: right.values.iter().map(|v| fprime_asymptotes.1 * v).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.rank_one.len()
    }

    /// `A⁰ z` for zero-asymptotic `z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(z)).as_slice().to_vec()
    }

    /// `A⁰ z` for a field with asymptotes `left`, `right`.
    pub fn apply_extended(&self, z: &Field) -> Vec<f64> {
        let mut out = self.apply(&z.values);
        for (i, o) in out.iter_mut().enumerate() {
            *o += z.left * self.tail_left[i] + z.right * self.tail_right[i];
        }
        out
    }

    /// `(M + Mᵀ)/2`
    pub fn symmetric_part(&self) -> DMatrix<f64> {
        (&self.matrix + self.matrix.transpose()) * 0.5
    }

    /// `⟨A⁰z, z⟩` in L².
    pub fn quadratic_form(&self, z: &[f64]) -> f64 {
        dot(&self.apply(z), z, self.dx)
    }
}

/// Assembles `A⁰` at front position `shift`.
pub fn assemble_a0(p: &WaveProfile, shift: f64) -> Result<OperatorSnapshot> {
    let f = &p.model.firing;
    let u = p.shifted(shift)?;
    let ux = p.shifted_x(shift)?;
    let fprime = u.values.iter().map(|&v| f.first(v)).collect();
    Ok(OperatorSnapshot::from_parts(
        &p.grid,
        &p.model.kernel,
        fprime,
        (f.first(u.left), f.first(u.right)),
        ux.values,
        shift,
    ))
}

/// `A(t)` with the front position frozen, applied matrix-free.
#[derive(Debug, Clone)]
pub struct FrozenOperator {
    pub shift: f64,
    pub m: f64,
    pub fprime: Vec<f64>,
    pub ux: Vec<f64>,
    /// `û̃` itself, kept for the nonlinear remainder
    pub u: Vec<f64>,
}

/// Buffers for applying [`FrozenOperator`]s.
pub struct OpWork {
    pub(crate) conv: Convolver,
    pub(crate) scratch: ConvScratch,
    tmp: Vec<f64>,
    tmp2: Vec<f64>,
    dx: f64,
}

impl OpWork {
    pub fn new(p: &WaveProfile) -> Self {
        let conv = Convolver::new(&p.grid, &p.model.kernel);
        let n = p.grid.n();
        Self { scratch: conv.scratch(), conv, tmp: vec![0.0; n], tmp2: vec![0.0; n], dx: p.grid.dx() }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
}

impl FrozenOperator {
    pub fn new(n: usize, m: f64) -> Self {
        Self { shift: f64::NAN, m, fprime: vec![0.0; n], ux: vec![0.0; n], u: vec![0.0; n] }
    }

    pub fn at(p: &WaveProfile, shift: f64, m: f64) -> Result<Self> {
        let mut op = Self::new(p.grid.n(), m);
        op.set(p, shift)?;
        Ok(op)
    }

    /// Re-targets the operator to front position `shift`.
    pub fn set(&mut self, p: &WaveProfile, shift: f64) -> Result<()> {
        if self.shift == shift {
            return Ok(());
        }
        p.shifted_into(shift, &mut self.u)?;
        p.shifted_x_into(shift, &mut self.ux)?;
        let f = &p.model.firing;
        for (fp, &u) in self.fprime.iter_mut().zip(&self.u) {
            *fp = f.first(u);
        }
        self.shift = shift;
        Ok(())
    }

    /// `out = A z`
    pub fn apply_into(&self, w: &mut OpWork, z: &[f64], out: &mut [f64]) {
        for i in 0..z.len() {
            w.tmp[i] = self.fprime[i] * z[i];
        }
        w.conv.convolve_into(&w.tmp, 0.0, 0.0, &mut w.tmp2, &mut w.scratch);
        let proj = self.m * dot(&self.ux, z, w.dx);
        for i in 0..z.len() {
            out[i] = -z[i] + w.tmp2[i] - proj * self.ux[i];
        }
    }

    /// `out = Aᵀ z` (the convolution is self-adjoint, the multiplication moves to the left).
    pub fn apply_transpose_into(&self, w: &mut OpWork, z: &[f64], out: &mut [f64]) {
        w.conv.convolve_into(z, 0.0, 0.0, &mut w.tmp2, &mut w.scratch);
        let proj = self.m * dot(&self.ux, z, w.dx);
        for i in 0..z.len() {
            out[i] = -z[i] + self.fprime[i] * w.tmp2[i] - proj * self.ux[i];
        }
    }
}

/// Phase `C` on the simulation time grid together with the front speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrajectory {
    pub speed: f64,
    pub dt: f64,
    pub phase: Vec<f64>,
}

impl PhaseTrajectory {
    /// `C ≡ 0` over `n_steps` steps.
    pub fn frozen(speed: f64, dt: f64, n_steps: usize) -> Self {
        Self { speed, dt, phase: vec![0.0; n_steps + 1] }
    }

    pub fn t_end(&self) -> f64 {
        (self.phase.len() - 1) as f64 * self.dt
    }

    /// `C(t)` by linear interpolation between grid times.
    pub fn phase_at(&self, t: f64) -> f64 {
        let q = t / self.dt;
        let last = self.phase.len() - 1;
        if q <= 0.0 {
            return self.phase[0];
        }
        let k = q.floor() as usize;
        if k >= last {
            return self.phase[last];
        }
        let r = q - k as f64;
        if r == 0.0 {
            self.phase[k]
        } else {
            self.phase[k] + r * (self.phase[k + 1] - self.phase[k])
        }
    }

    /// Front position `c·t + C(t)`.
    pub fn shift(&self, t: f64) -> f64 {
        self.speed * t + self.phase_at(t)
    }

    /// Position at grid time `t_n` without interpolation.
    pub fn shift_at_step(&self, n: usize) -> f64 {
        self.speed * (n as f64 * self.dt) + self.phase[n]
    }
}

/// `A(t) z` with `t` on the phase trajectory.
pub fn apply_a(t: f64, traj: &PhaseTrajectory, z: &Field, p: &WaveProfile, m: f64) -> Result<Field> {
    let op = FrozenOperator::at(p, traj.shift(t), m)?;
    let mut w = OpWork::new(p);
    let mut out = vec![0.0; z.len()];
    op.apply_into(&mut w, &z.values, &mut out);
    Ok(Field::l2(out))
}

/// Certified constants of the spectral gap assumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGapCert {
    pub kappa_star: f64,
    #[serde(rename = "C_star")]
    pub c_star: f64,
    pub m: f64,
    /// `-max_s λ_max(Sym A⁰(s) + κ*I - C*·b̃b̃ᵀ)` at the certified constants
    pub margin: f64,
    pub shifts: Vec<f64>,
    /// `-λ_max` of `Sym A⁰` on the complement of the tangent direction, per shift
    pub kappa_candidates: Vec<f64>,
    /// Bisection result for `C*` per shift
    pub c_candidates: Vec<f64>,
    /// `1/(b̃ᵀ(S + κ*I)⁻¹b̃)` per shift (0 when `S + κ*I` is negative definite)
    pub c_closed_form: Vec<f64>,
}

/// Eigen-data of `Sym A⁰` at one shift, with the tangent vector in the eigenbasis.
struct GapData {
    /// ascending eigenvalues
    lambda: Vec<f64>,
    /// `Qᵀ b̃`, `b̃ = √dx·ũ_x`
    beta: Vec<f64>,
}

impl GapData {
    fn new(snap: &OperatorSnapshot) -> Self {
        let s = snap.symmetric_part();
        let eig = SymmetricEigen::new(s);
        let n = snap.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let b = DVector::from_iterator(n, snap.rank_one.iter().map(|v| v * snap.dx.sqrt()));
        let proj = eig.eigenvectors.transpose() * b;
        Self {
            lambda: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
            beta: order.iter().map(|&i| proj[i]).collect(),
        }
    }

    fn top(&self) -> (f64, f64) {
        let n = self.lambda.len();
        (self.lambda[n - 2], self.lambda[n - 1])
    }

    /// Largest eigenvalue of `S` restricted to `b̃^⊥`: the root of
    /// `Σ β_i²/(λ_i - μ) = 0` between the two largest eigenvalues.
    fn restricted_max(&self) -> f64 {
        let (mut lo, mut hi) = self.top();
        let g = |mu: f64| -> f64 { self.lambda.iter().zip(&self.beta).map(|(l, b)| b * b / (l - mu)).sum() };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// `λ_max(S - C b̃b̃ᵀ)`: root of `1 - C Σ β_i²/(λ_i - μ)` below the top eigenvalue.
    fn downdated_max(&self, c: f64) -> f64 {
        let (mut lo, mut hi) = self.top();
        if c == 0.0 {
            return hi;
        }
        let h = |mu: f64| -> f64 { 1.0 - c * self.lambda.iter().zip(&self.beta).map(|(l, b)| b * b / (l - mu)).sum::<f64>() };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Smallest `C ≥ 0` with `λ_max(S + κI - C b̃b̃ᵀ) ≤ 0`, by bisection on `C`.
    fn c_star(&self, kappa: f64) -> Result<f64> {
        let f = |c: f64| kappa + self.downdated_max(c);
        if f(0.0) <= 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        let mut tries = 0;
        while f(hi) > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::NoGap { lambda: -kappa });
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    fn c_closed_form(&self, kappa: f64) -> f64 {
        let (_, top) = self.top();
        if top + kappa < 0.0 {
            return 0.0;
        }
        let phi: f64 = self.lambda.iter().zip(&self.beta).map(|(l, b)| b * b / (l + kappa)).sum();
        if phi > 0.0 {
            1.0 / phi
        } else {
            f64::INFINITY
        }
    }
}

/// Safety factor applied to the measured decay rate.
pub const KAPPA_MARGIN: f64 = 0.9;

/// Certifies the gap assumption on the given snapshots; see [`certify_gap`].
pub fn certify_snapshots(snaps: &[OperatorSnapshot], m: f64) -> Result<SpectralGapCert> {
    if snaps.is_empty() {
        return Err(Error::Config("gap certification needs at least one shift".into()));
    }
    let data: Vec<GapData> = snaps.iter().map(GapData::new).collect();
    let kappa_candidates: Vec<f64> = data.iter().map(|d| -d.restricted_max()).collect();
    let worst = kappa_candidates.iter().copied().fold(f64::INFINITY, f64::min);
    if !(worst > 0.0) {
        return Err(Error::NoGap { lambda: -worst });
    }
    let kappa_star = KAPPA_MARGIN * worst;
    let c_candidates: Vec<f64> = data.iter().map(|d| d.c_star(kappa_star)).collect::<Result<_>>()?;
    let c_closed_form = data.iter().map(|d| d.c_closed_form(kappa_star)).collect();
    let c_star = c_candidates.iter().copied().fold(0.0, f64::max);
    let margin = data
        .iter()
        .map(|d| -(kappa_star + d.downdated_max(c_star)))
        .fold(f64::INFINITY, f64::min);
    let cert = SpectralGapCert {
        kappa_star,
        c_star,
        m,
        margin,
        shifts: snaps.iter().map(|s| s.shift).collect(),
        kappa_candidates,
        c_candidates,
        c_closed_form,
    };
    if !(m > c_star) {
        return Err(Error::RelaxationTooSmall { m, c_star });
    }
    Ok(cert)
}

/// Computes `κ*` and `C*` from the symmetric part of `A⁰` at the given shifts
/// (worst case over shifts, `κ*` reduced by [`KAPPA_MARGIN`]) and checks `m > C*`.
pub fn certify_gap(p: &WaveProfile, shifts: &[f64], m: f64) -> Result<SpectralGapCert> {
    let snaps: Vec<OperatorSnapshot> = shifts.iter().map(|&s| assemble_a0(p, s)).collect::<Result<_>>()?;
    certify_snapshots(&snaps, m)
}

/// A time-dependent linear operator `t ↦ A(t)` acting on grid vectors.
pub trait Generator {
    fn dim(&self) -> usize;
    /// Grid spacing of the L² inner product.
    fn dx(&self) -> f64;
    /// `out = A(t) z`
    fn apply_at(&mut self, t: f64, z: &[f64], out: &mut [f64]) -> Result<()>;
}

/// `A(t)` along a phase trajectory, with a small cache of frozen operators.
///
/// Grid times use the stored phase exactly; other times interpolate `C`
/// linearly.
pub struct MovingOperator<'a> {
    p: &'a WaveProfile,
    traj: &'a PhaseTrajectory,
    m: f64,
    work: OpWork,
    cache: Vec<FrozenOperator>,
    next: usize,
}

const CACHE_SLOTS: usize = 3;

impl<'a> MovingOperator<'a> {
    pub fn new(p: &'a WaveProfile, traj: &'a PhaseTrajectory, m: f64) -> Self {
        let n = p.grid.n();
        Self {
            p,
            traj,
            m,
            work: OpWork::new(p),
            cache: (0..CACHE_SLOTS).map(|_| FrozenOperator::new(n, m)).collect(),
            next: 0,
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn position(&self, t: f64) -> f64 {
        let q = t / self.traj.dt;
        let r = q.round();
        if (q - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < self.traj.phase.len() {
            self.traj.shift_at_step(r as usize)
        } else {
            self.traj.shift(t)
        }
    }

    fn slot(&mut self, t: f64) -> Result<usize> {
        let s = self.position(t);
        if let Some(i) = self.cache.iter().position(|op| op.shift == s) {
            return Ok(i);
        }
        let i = self.next;
        self.next = (self.next + 1) % CACHE_SLOTS;
        self.cache[i].set(self.p, s)?;
        Ok(i)
    }

    /// The frozen operator at time `t`.
    pub fn frozen_at(&mut self, t: f64) -> Result<&FrozenOperator> {
        let i = self.slot(t)?;
        Ok(&self.cache[i])
    }
}

impl Generator for MovingOperator<'_> {
    fn dim(&self) -> usize {
        self.p.grid.n()
    }

    fn dx(&self) -> f64 {
        self.work.dx
    }

    fn apply_at(&mut self, t: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
        let i = self.slot(t)?;
        self.cache[i].apply_into(&mut self.work, z, out);
        Ok(())
    }
}

/// A time-independent operator.
pub struct FixedOperator {
    pub op: FrozenOperator,
    work: OpWork,
}

impl FixedOperator {
    pub fn new(op: FrozenOperator, work: OpWork) -> Self {
        Self { op, work }
    }

    /// `A = -I`: `F' ≡ 0` and no rank-one term.
    pub fn pure_decay(p: &WaveProfile) -> Self {
        let n = p.grid.n();
        let mut op = FrozenOperator::new(n, 0.0);
        op.shift = 0.0;
        Self { op, work: OpWork::new(p) }
    }
}

impl Generator for FixedOperator {
    fn dim(&self) -> usize {
        self.op.ux.len()
    }

    fn dx(&self) -> f64 {
        self.work.dx
    }

    fn apply_at(&mut self, _t: f64, z: &[f64], out: &mut [f64]) -> Result<()> {
        self.op.apply_into(&mut self.work, z, out);
        Ok(())
    }
}

/// Classical RK4 for `ż = A(t) z`, with `A` evaluated at the stage times
/// `t`, `t + h/2`, `t + h`.
pub struct Propagator<G> {
    pub gen: G,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl<G: Generator> Propagator<G> {
    pub fn new(gen: G) -> Self {
        let n = gen.dim();
        Self { gen, k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]], stage: vec![0.0; n] }
    }

    /// One RK4 step of size `h` from `t`, in place.
    pub fn step(&mut self, t: f64, h: f64, z: &mut [f64]) -> Result<()> {
        let n = z.len();
        let [k1, k2, k3, k4] = &mut self.k;
        self.gen.apply_at(t, z, k1)?;
        for i in 0..n {
            self.stage[i] = z[i] + 0.5 * h * k1[i];
        }
        self.gen.apply_at(t + 0.5 * h, &self.stage, k2)?;
        for i in 0..n {
            self.stage[i] = z[i] + 0.5 * h * k2[i];
        }
        self.gen.apply_at(t + 0.5 * h, &self.stage, k3)?;
        for i in 0..n {
            self.stage[i] = z[i] + h * k3[i];
        }
        self.gen.apply_at(t + h, &self.stage, k4)?;
        for i in 0..n {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    /// `z ← P(t1, t0) z` with uniform sub-steps no larger than `dt`.
    pub fn propagate(&mut self, t0: f64, t1: f64, z: &mut [f64], dt: f64) -> Result<()> {
        if t1 < t0 {
            return Err(Error::Domain(format!("propagation backwards in time: {t0} > {t1}")));
        }
        if t1 == t0 {
            return Ok(());
        }
        let steps = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / steps as f64;
        for j in 0..steps {
            self.step(t0 + j as f64 * h, h, z)?;
        }
        Ok(())
    }
}

/// `P(t1, t0) z` along the trajectory.
pub fn propagate(t0: f64, t1: f64, z: &Field, traj: &PhaseTrajectory, p: &WaveProfile, m: f64, dt: f64) -> Result<Field> {
    let mut v = z.values.clone();
    Propagator::new(MovingOperator::new(p, traj, m)).propagate(t0, t1, &mut v, dt)?;
    Ok(Field::l2(v))
}

/// Estimates of `‖A(t) - A(s)‖` against `|t - s|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub pairs: Vec<(f64, f64)>,
    /// power-iteration estimate of `‖A(t) - A(s)‖` per pair
    pub norms: Vec<f64>,
    /// `max norms / |t - s|`
    pub k_measured: f64,
    /// `(‖F''‖_∞‖û_x‖_∞ + 2m‖û_x‖‖û_xx‖)·(|c| + sup|Ċ|)`
    pub k_structural: f64,
}

/// Estimates the operator Lipschitz constant in time by power iteration on
/// `DᵀD`, `D = A(t) - A(s)`, and compares it with the structural bound.
pub fn check_operator_lipschitz(
    pairs: &[(f64, f64)],
    traj: &PhaseTrajectory,
    p: &WaveProfile,
    m: f64,
) -> Result<LipschitzEstimate> {
    let n = p.grid.n();
    let dx = p.grid.dx();
    let mut w = OpWork::new(p);
    let (mut x, mut y, mut a, mut b) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut norms = Vec::with_capacity(pairs.len());
    let mut k_measured = 0.0f64;
    for &(t, s) in pairs {
        let ot = FrozenOperator::at(p, traj.shift(t), m)?;
        let os = FrozenOperator::at(p, traj.shift(s), m)?;
        // deterministic smooth start vector
        for (i, xi) in x.iter_mut().enumerate() {
            let xx = p.grid.x(i);
            *xi = (-(xx - 0.3).powi(2) / 8.0).exp() * (1.0 + 0.3 * (0.7 * xx).sin());
        }
        let mut est = 0.0;
        for _ in 0..60 {
            let nx = norm(&x, dx);
            if nx == 0.0 {
                break;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            ot.apply_into(&mut w, &x, &mut a);
            os.apply_into(&mut w, &x, &mut b);
            for i in 0..n {
                y[i] = a[i] - b[i];
            }
            est = norm(&y, dx);
            if est == 0.0 {
                break;
            }
            ot.apply_transpose_into(&mut w, &y, &mut a);
            os.apply_transpose_into(&mut w, &y, &mut b);
            for i in 0..n {
                x[i] = a[i] - b[i];
            }
        }
        norms.push(est);
        let gap = (t - s).abs();
        if gap > 0.0 {
            k_measured = k_measured.max(est / gap);
        }
    }
    let uxx = crate::grid::gradient(&p.grid, &p.u_hat_x);
    let c_dot = traj.phase.windows(2).map(|w| ((w[1] - w[0]) / traj.dt).abs()).fold(0.0, f64::max);
    let k_structural = (p.model.firing.sup_second() * p.u_hat_x.sup_abs()
        + 2.0 * m * p.norm_ux() * norm(&uxx.values, dx))
        * (p.speed.abs() + c_dot);
    for (&(t, s), &est) in pairs.iter().zip(&norms) {
        if est > 1.05 * k_structural * (t - s).abs() + 1e-12 {
            return Err(Error::LemmaViolation(format!(
                "‖A({t}) - A({s})‖ ≈ {est:.4e} exceeds the structural bound {:.4e}",
                k_structural * (t - s).abs()
            )));
        }
    }
    Ok(LipschitzEstimate { pairs: pairs.to_vec(), norms, k_measured, k_structural })
}

/// Operator-norm bound `1 + ‖F'‖_∞ + m‖û_x‖²`.
pub fn operator_norm_bound(p: &WaveProfile, m: f64) -> f64 {
    1.0 + p.model.firing.sup_first() + m * p.norm_ux_sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::front::{solve_front, FrontOptions};
    use crate::model::FiringRate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile(n: usize, theta: f64) -> WaveProfile {
        let g = Grid::new(40.0, n).unwrap();
        solve_front(&g, &KernelSpec::gaussian(2.0).unwrap(), &FiringRate::new(8.0, theta).unwrap(), &FrontOptions::default())
            .unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, g: &Grid) -> Vec<f64> {
        let n = g.n();
        // mixture of white noise and localized bumps
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..3 {
            let c: f64 = rng.random_range(-15.0..15.0);
            let a: f64 = rng.random_range(-5.0..5.0);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += a * (-(g.x(i) - c).powi(2) / 4.0).exp();
            }
        }
        let nv = norm(&v, g.dx());
        v.iter().map(|x| x / nv).collect()
    }

    #[test]
    fn zero_derivative_gives_minus_identity() {
        let g = Grid::new(20.0, 64).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        let ux: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
        let snap = OperatorSnapshot::from_parts(&g, &k, vec![0.0; 64], (0.0, 0.0), ux, 0.0);
        assert_eq!(snap.matrix, -DMatrix::<f64>::identity(64, 64));
        let cert = certify_snapshots(&[snap], 1.0).unwrap();
        assert!((cert.kappa_star - 0.9).abs() < 1e-12);
        assert_eq!(cert.c_star, 0.0);
        assert_eq!(cert.c_closed_form[0], 0.0);
    }

    #[test]
    fn matrix_action_matches_convolution() {
        let p = profile(256, 0.4);
        let g = &p.grid;
        let snap = assemble_a0(&p, 0.7).unwrap();
        let op = FrozenOperator::at(&p, 0.7, 0.0).unwrap();
        let mut w = OpWork::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut out = vec![0.0; g.n()];
        for _ in 0..50 {
            let z = random_vec(&mut rng, g);
            let a = snap.apply(&z);
            op.apply_into(&mut w, &z, &mut out);
            let err = a.iter().zip(&out).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(err < 1e-8 * scale, "{err}");
        }
        // constant-one extension
        let one = Field::new(vec![1.0; g.n()], 1.0, 1.0);
        let lhs = snap.apply_extended(&one);
        let f = &p.model.firing;
        let fp = Field::new(op.fprime.clone(), f.first(0.0), f.first(1.0));
        let wfp = Convolver::new(g, &p.model.kernel).convolve(&fp);
        for i in 0..g.n() {
            assert!((lhs[i] - (-1.0 + wfp.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_norm_and_rank_one_term() {
        let p = profile(256, 0.4);
        let g = &p.grid;
        let m = 15.0;
        let traj = PhaseTrajectory::frozen(p.speed, 0.01, 100);
        let bound = operator_norm_bound(&p, m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let z = Field::l2(random_vec(&mut rng, g));
            let az = apply_a(0.3, &traj, &z, &p, m).unwrap();
            assert!(norm(&az.values, g.dx()) <= bound);
        }
        // z = ũ_x: the rank-one part contributes -m‖û_x‖²·ũ_x
        let s = traj.shift(0.3);
        let ux = p.shifted_x(s).unwrap();
        let full = apply_a(0.3, &traj, &ux, &p, m).unwrap();
        let bare = apply_a(0.3, &traj, &ux, &p, 0.0).unwrap();
        let nn = dot(&ux.values, &ux.values, g.dx());
        for i in 0..g.n() {
            assert!((full.values[i] - bare.values[i] + m * nn * ux.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn secular_evaluation_matches_dense_eigensolver() {
        let p = profile(128, 0.4);
        let snap = assemble_a0(&p, 0.0).unwrap();
        let d = GapData::new(&snap);
        let n = snap.n();
        let s = snap.symmetric_part();
        let b = DVector::from_iterator(n, snap.rank_one.iter().map(|v| v * snap.dx.sqrt()));
        let bn = &b / b.norm();
        let proj = DMatrix::identity(n, n) - &bn * bn.transpose();
        let deflated = &proj * &s * &proj - (&bn * bn.transpose()) * 1e3;
        let top = SymmetricEigen::new(deflated).eigenvalues.max();
        assert!((d.restricted_max() - top).abs() < 1e-10, "{} vs {top}", d.restricted_max());
        for c in [0.5, 3.0, 20.0] {
            let dense = SymmetricEigen::new(&s - (&b * b.transpose()) * c).eigenvalues.max();
            assert!((d.downdated_max(c) - dense).abs() < 1e-10);
        }
    }

    #[test]
    fn certificate_on_default_model() {
        let p = profile(512, 0.4);
        let m = 15.0;
        let shifts = [-5.0, -2.5, 0.0, 2.5, 5.0];
        let cert = certify_gap(&p, &shifts, m).unwrap();
        assert!(cert.kappa_star > 0.0 && cert.c_star > 0.0 && cert.c_star < m);
        assert!(cert.margin >= 0.0);
        // shift invariance of the spectrum
        let spread = cert.kappa_candidates.iter().fold(0.0f64, |a, &k| a.max((k - cert.kappa_candidates[2]).abs()));
        assert!(spread < 1e-4, "{:?}", cert.kappa_candidates);
        for (b, c) in cert.c_candidates.iter().zip(&cert.c_closed_form) {
            assert!((b - c).abs() < 1e-8 * c);
        }
        // quadratic-form tests, matrix-free
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut w = OpWork::new(&p);
        let g = &p.grid;
        let mut out = vec![0.0; g.n()];
        for &s in &shifts {
            let a0 = FrozenOperator::at(&p, s, 0.0).unwrap();
            let a = FrozenOperator::at(&p, s, m).unwrap();
            for _ in 0..500 {
                let z = random_vec(&mut rng, g);
                a0.apply_into(&mut w, &z, &mut out);
                let q0 = dot(&out, &z, g.dx());
                let proj = dot(&a0.ux, &z, g.dx());
                assert!(q0 <= -cert.kappa_star + cert.c_star * proj * proj + 1e-12);
                a.apply_into(&mut w, &z, &mut out);
                assert!(dot(&out, &z, g.dx()) <= -cert.kappa_star + 1e-12);
            }
        }
        assert!(matches!(certify_gap(&p, &shifts, 0.5 * cert.c_star), Err(Error::RelaxationTooSmall { .. })));
    }

    #[test]
    fn propagator_basics() {
        let p = profile(256, 0.4);
        let g = &p.grid;
        let m = 15.0;
        let traj = PhaseTrajectory::frozen(p.speed, 0.01, 500);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = Field::l2(random_vec(&mut rng, g));
        assert_eq!(propagate(1.0, 1.0, &z, &traj, &p, m, 0.01).unwrap(), z);
        // cocycle defect shrinks at fourth order on a smooth trajectory
        let defect = |dt: f64| {
            let a = propagate(0.5, 1.37, &z, &traj, &p, m, dt).unwrap();
            let b = propagate(1.37, 3.1, &a, &traj, &p, m, dt).unwrap();
            let c = propagate(0.5, 3.1, &z, &traj, &p, m, dt).unwrap();
            norm(&b.lincomb(1.0, &c, -1.0).values, g.dx())
        };
        let (d1, d2) = (defect(0.2), defect(0.1));
        assert!(d1 / d2 > 10.0, "{d1} {d2}");
    }

    #[test]
    fn stationary_operator_is_time_independent() {
        let p = profile(256, 0.5);
        let traj = PhaseTrajectory::frozen(0.0, 0.01, 100);
        let r = check_operator_lipschitz(&[(0.2, 0.7), (0.0, 1.0)], &traj, &p, 15.0).unwrap();
        assert!(r.norms.iter().all(|&x| x < 1e-10));
    }

    #[test]
    fn operator_lipschitz_is_linear_in_gap() {
        let p = profile(256, 0.4);
        let traj = PhaseTrajectory::frozen(p.speed, 0.01, 300);
        let r = check_operator_lipschitz(&[(1.0, 1.0), (1.0, 1.2), (1.0, 1.1)], &traj, &p, 15.0).unwrap();
        assert_eq!(r.norms[0], 0.0);
        let ratio = r.norms[2] / r.norms[1];
        assert!((0.4..=0.6).contains(&ratio), "{ratio}");
        assert!(r.k_measured <= r.k_structural);
    }
}
