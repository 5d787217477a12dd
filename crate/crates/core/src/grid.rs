//! Uniform grid on `[-L, L]`, fields with declared asymptotes, L² inner
//! products, nonlocal convolution and profile shifting.
//!
//! Fields carry the values they approach beyond the truncation boundary. The
//! convolution removes the asymptotic ramp `a₋ + (a₊ - a₋)Φ(x)` before the FFT
//! and adds back its exact convolution, so constants are reproduced exactly and
//! front-type fields see no artificial boundary.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::KernelSpec;

/// Uniform grid with nodes `x_i = -L + i·dx`, `dx = 2L/(N-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n: usize,
    dx: f64,
    #[serde(skip)]
    x: Vec<f64>,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Config(format!("grid.L must be positive, got {half_width}")));
        }
        if n < 16 {
            return Err(Error::Config(format!("grid.N must be at least 16, got {n}")));
        }
        let dx = 2.0 * half_width / (n - 1) as f64;
        // symmetric node placement: x_{N-1-i} = -x_i exactly
        let x = (0..n)
            .map(|i| {
                let j = n - 1 - i;
                if i <= j {
                    -half_width + i as f64 * dx
                } else {
                    half_width - j as f64 * dx
                }
            })
            .collect();
        Ok(Self { half_width, n, dx, x })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x[i]
    }

    /// Field sampled from a closed-form function.
    pub fn sample(&self, f: impl Fn(f64) -> f64, left: f64, right: f64) -> Field {
        Field::new(self.x.iter().map(|&x| f(x)).collect(), left, right)
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.n)
    }
}

/// Grid values together with the limits at `-∞` and `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub values: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

impl Field {
    pub fn new(values: Vec<f64>, left: f64, right: f64) -> Self {
        Self { values, left, right }
    }

    /// Zero-asymptotic field with the given values.
    pub fn l2(values: Vec<f64>) -> Self {
        Self { values, left: 0.0, right: 0.0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self::l2(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_l2(&self) -> bool {
        self.left == 0.0 && self.right == 0.0
    }

    /// Largest absolute value over the outermost 5% of nodes on either side,
    /// measured relative to the declared asymptotes.
    pub fn boundary_excess(&self) -> f64 {
        let n = self.values.len();
        let k = (n / 20).max(1);
        let l = self.values[..k].iter().map(|v| (v - self.left).abs());
        let r = self.values[n - k..].iter().map(|v| (v - self.right).abs());
        l.chain(r).fold(0.0, f64::max)
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field::new(self.values.iter().map(|v| a * v).collect(), a * self.left, a * self.right)
    }

    /// `a·self + b·other`
    pub fn lincomb(&self, a: f64, other: &Field, b: f64) -> Field {
        Field::new(
            self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            a * self.left + b * other.left,
            a * self.right + b * other.right,
        )
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Rectangle-rule inner product `dx·Σ f_i h_i`; the product must decay at both ends.
pub fn inner(g: &Grid, f: &Field, h: &Field) -> Result<f64> {
    if f.values.len() != g.n() || h.values.len() != g.n() {
        return Err(Error::Domain("field length does not match the grid".into()));
    }
    if f.left * h.left != 0.0 || f.right * h.right != 0.0 {
        return Err(Error::Domain("product of fields does not decay; inner product undefined".into()));
    }
    Ok(dot(&f.values, &h.values, g.dx()))
}

/// `dx·Σ a_i b_i` on raw slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s * dx
}

/// Squared L² norm on raw slices.
#[inline]
pub fn norm_sq(a: &[f64], dx: f64) -> f64 {
    dot(a, a, dx)
}

#[inline]
pub fn norm(a: &[f64], dx: f64) -> f64 {
    norm_sq(a, dx).sqrt()
}

/// FFT-based convolution with a fixed kernel on a fixed grid.
///
/// The plan and kernel spectrum are immutable and shareable across threads;
/// each caller supplies its own [`ConvScratch`].
#[derive(Clone)]
pub struct Convolver {
    n: usize,
    kernel: KernelSpec,
    spectrum: Arc<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `Φ(x_i)` of the kernel
    cdf: Arc<Vec<f64>>,
    /// `Φ₂(x_i)` of `w∗w`
    cdf2: Arc<Vec<f64>>,
    /// quadrature weights `W_k`, `k = 0..N-1` (symmetric in k)
    weights: Arc<Vec<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver").field("n", &self.n).field("kernel", &self.kernel).finish()
    }
}

/// Per-worker buffers for [`Convolver`].
pub struct ConvScratch {
    buf: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl Convolver {
    pub fn new(g: &Grid, kernel: &KernelSpec) -> Self {
        let n = g.n();
        let p = 2 * n;
        let dx = g.dx();
        let mut weights: Vec<f64> = (0..n).map(|k| dx * kernel.eval(k as f64 * dx)).collect();
        // trapezoid correction for a kink of w at the origin
        weights[0] += dx * dx / 12.0 * kernel.derivative_jump_at_origin();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); p];
        spectrum[0].re = weights[0];
        for m in 1..n {
            spectrum[m].re = weights[m];
            spectrum[p - m].re = weights[m];
        }
        forward.process(&mut spectrum);
        let scale = 1.0 / p as f64;
        for s in spectrum.iter_mut() {
            *s *= scale;
        }
        let cdf = g.nodes().iter().map(|&x| kernel.cdf(x)).collect();
        let cdf2 = g.nodes().iter().map(|&x| kernel.self_convolution_cdf(x)).collect();
        Self {
            n,
            kernel: *kernel,
            spectrum: Arc::new(spectrum),
            forward,
            inverse,
            cdf: Arc::new(cdf),
            cdf2: Arc::new(cdf2),
            weights: Arc::new(weights),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Quadrature weight `W_k` for offset `k` (in grid cells).
    pub fn weight(&self, k: isize) -> f64 {
        let k = k.unsigned_abs();
        if k < self.n {
            self.weights[k]
        } else {
            0.0
        }
    }

    /// Kernel CDF at the grid nodes.
    pub fn kernel_cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// CDF of `w∗w` at the grid nodes.
    pub fn self_convolution_cdf(&self) -> &[f64] {
        &self.cdf2
    }

    pub fn scratch(&self) -> ConvScratch {
        let p = 2 * self.n;
        let len = self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len());
        ConvScratch {
            buf: vec![Complex64::new(0.0, 0.0); p],
            fft: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn load(&self, f: &[f64], left: f64, right: f64, slot: Slot, buf: &mut [Complex64]) {
        let jump = right - left;
        for j in 0..self.n {
            let r = if jump == 0.0 { left } else { left + jump * self.cdf[j] };
            let v = f[j] - r;
            match slot {
                Slot::Re => buf[j] = Complex64::new(v, 0.0),
                Slot::Im => buf[j].im = v,
            }
        }
    }

    fn unload(&self, left: f64, right: f64, parts: impl Fn(Complex64) -> f64, buf: &[Complex64], out: &mut [f64]) {
        let jump = right - left;
        for i in 0..self.n {
            let ramp = if jump == 0.0 { left } else { left + jump * self.cdf2[i] };
            out[i] = ramp + parts(buf[i]);
        }
    }

    fn transform(&self, s: &mut ConvScratch) {
        self.forward.process_with_scratch(&mut s.buf, &mut s.fft);
        for (b, k) in s.buf.iter_mut().zip(self.spectrum.iter()) {
            *b *= k.re;
        }
        self.inverse.process_with_scratch(&mut s.buf, &mut s.fft);
    }

    /// `(w∗f)(x_i)` for grid values `f` with asymptotes `left`, `right`.
    pub fn convolve_into(&self, f: &[f64], left: f64, right: f64, out: &mut [f64], s: &mut ConvScratch) {
        debug_assert_eq!(f.len(), self.n);
        s.buf[self.n..].fill(Complex64::new(0.0, 0.0));
        self.load(f, left, right, Slot::Re, &mut s.buf);
        self.transform(s);
        self.unload(left, right, |c| c.re, &s.buf, out);
    }

    /// Two convolutions for the price of one: the kernel is real, so the real
    /// and imaginary channels do not mix.
    #[allow(clippy::too_many_arguments)]
    pub fn convolve_pair_into(
        &self,
        f: (&[f64], f64, f64),
        h: (&[f64], f64, f64),
        out_f: &mut [f64],
        out_h: &mut [f64],
        s: &mut ConvScratch,
    ) {
        s.buf[self.n..].fill(Complex64::new(0.0, 0.0));
        self.load(f.0, f.1, f.2, Slot::Re, &mut s.buf);
        self.load(h.0, h.1, h.2, Slot::Im, &mut s.buf);
        self.transform(s);
        self.unload(f.1, f.2, |c| c.re, &s.buf, out_f);
        self.unload(h.1, h.2, |c| c.im, &s.buf, out_h);
    }

    pub fn convolve(&self, f: &Field) -> Field {
        let mut s = self.scratch();
        let mut out = vec![0.0; self.n];
        self.convolve_into(&f.values, f.left, f.right, &mut out, &mut s);
        Field::new(out, f.left, f.right)
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Re,
    Im,
}

/// `w∗f` on the grid.
pub fn convolve(g: &Grid, k: &KernelSpec, f: &Field) -> Field {
    Convolver::new(g, k).convolve(f)
}

/// Fourth-order central derivative with asymptote ghost nodes.
pub fn gradient_into(dx: f64, f: &[f64], left: f64, right: f64, out: &mut [f64]) {
    let n = f.len();
    let at = |i: isize| -> f64 {
        if i < 0 {
            left
        } else if i as usize >= n {
            right
        } else {
            f[i as usize]
        }
    };
    let c = 1.0 / (12.0 * dx);
    for i in 0..n {
        let j = i as isize;
        out[i] = (at(j - 2) - 8.0 * at(j - 1) + 8.0 * at(j + 1) - at(j + 2)) * c;
    }
}

/// Spatial derivative of a field; the result is zero-asymptotic.
pub fn gradient(g: &Grid, f: &Field) -> Field {
    let mut out = vec![0.0; g.n()];
    gradient_into(g.dx(), &f.values, f.left, f.right, &mut out);
    Field::l2(out)
}

/// Cubic Hermite interpolant on the grid, extended by the asymptotes.
///
/// Slopes come from the fourth-order gradient. For monotone data they are
/// limited (Fritsch–Carlson) so that shifted profiles never overshoot.
#[derive(Debug, Clone)]
pub struct Interpolant {
    values: Vec<f64>,
    slopes: Vec<f64>,
    left: f64,
    right: f64,
    dx: f64,
    half_width: f64,
}

impl Interpolant {
    /// Unlimited cubic Hermite interpolant (for fields with zero asymptotes).
    pub fn smooth(g: &Grid, f: &Field) -> Self {
        let mut slopes = vec![0.0; g.n()];
        gradient_into(g.dx(), &f.values, f.left, f.right, &mut slopes);
        for s in slopes.iter_mut() {
            *s *= g.dx();
        }
        Self {
            values: f.values.clone(),
            slopes,
            left: f.left,
            right: f.right,
            dx: g.dx(),
            half_width: g.half_width(),
        }
    }

    /// Monotonicity-preserving cubic Hermite interpolant.
    pub fn monotone(g: &Grid, f: &Field) -> Self {
        let mut it = Self::smooth(g, f);
        let n = it.values.len();
        let v = &it.values;
        let secant = |k: usize| v[k + 1] - v[k];
        let m = &mut it.slopes;
        for i in 0..n {
            let dl = if i == 0 { v[0] - it.left } else { secant(i - 1) };
            let dr = if i + 1 == n { it.right - v[n - 1] } else { secant(i) };
            if dl * dr <= 0.0 || m[i] * dr < 0.0 {
                m[i] = 0.0;
            }
        }
        for k in 0..n - 1 {
            let d = secant(k);
            if d == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let a = m[k] / d;
            let b = m[k + 1] / d;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                m[k] = t * a * d;
                m[k + 1] = t * b * d;
            }
        }
        it
    }

    #[inline]
    fn node(&self, i: isize) -> (f64, f64) {
        if i < 0 {
            (self.left, 0.0)
        } else if i as usize >= self.values.len() {
            (self.right, 0.0)
        } else {
            (self.values[i as usize], self.slopes[i as usize])
        }
    }

    /// Writes `p(x_i - delta)` into `out`.
    pub fn shift_into(&self, delta: f64, out: &mut [f64]) -> Result<()> {
        if !delta.is_finite() || delta.abs() > 0.5 * self.half_width {
            return Err(Error::Truncation(format!(
                "shift {delta:.4} exceeds half of the window half-width {}",
                self.half_width
            )));
        }
        let n = self.values.len();
        if delta == 0.0 {
            out.copy_from_slice(&self.values);
            return Ok(());
        }
        // x_i - delta = x_{i-k-1} + t·dx
        let q = delta / self.dx;
        let k = q.floor();
        let theta = q - k;
        let k = k as isize;
        if theta == 0.0 {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.node(i as isize - k).0;
            }
            return Ok(());
        }
        let t = 1.0 - theta;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let a = i as isize - k - 1;
            let (p0, m0) = self.node(a);
            let (p1, m1) = self.node(a + 1);
            *o = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
        }
        Ok(())
    }

    /// Interpolated value and derivative at an arbitrary point.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let q = (x + self.half_width) / self.dx;
        let a = q.floor();
        let t = q - a;
        let a = a as isize;
        let (p0, m0) = self.node(a);
        let (p1, m1) = self.node(a + 1);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1;
        let d = (6.0 * t2 - 6.0 * t) * p0 + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (-6.0 * t2 + 6.0 * t) * p1 + (3.0 * t2 - 2.0 * t) * m1;
        (v, d / self.dx)
    }

    pub fn shift(&self, delta: f64) -> Result<Field> {
        let mut out = vec![0.0; self.values.len()];
        self.shift_into(delta, &mut out)?;
        Ok(Field::new(out, self.left, self.right))
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }
}

/// `p(x_i - delta)` for a monotone front-type profile.
pub fn shift_profile(g: &Grid, p: &Field, delta: f64) -> Result<Field> {
    Interpolant::monotone(g, p).shift(delta)
}

/// `f(x_i - delta)` for a smooth field without monotonicity limiting.
pub fn shift_field(g: &Grid, f: &Field, delta: f64) -> Result<Field> {
    Interpolant::smooth(g, f).shift(delta)
}

/// Writes a field as CSV with columns `x,value`; the first line records the asymptotes.
pub fn write_field_csv(path: &Path, g: &Grid, f: &Field) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# left_asymptote={:.16e} right_asymptote={:.16e}", f.left, f.right)?;
    writeln!(w, "x,value")?;
    for (x, v) in g.nodes().iter().zip(&f.values) {
        writeln!(w, "{x:.16e},{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`], returning node coordinates and the field.
pub fn read_field_csv(path: &Path) -> Result<(Vec<f64>, Field)> {
    let r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines();
    let bad = |m: &str| Error::Interface(format!("{}: {m}", path.display()));
    let head = lines.next().ok_or_else(|| bad("empty file"))??;
    let mut left = None;
    let mut right = None;
    for tok in head.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("left_asymptote=") {
            left = v.parse::<f64>().ok();
        } else if let Some(v) = tok.strip_prefix("right_asymptote=") {
            right = v.parse::<f64>().ok();
        }
    }
    let (left, right) = left.zip(right).ok_or_else(|| bad("missing asymptote header"))?;
    lines.next().ok_or_else(|| bad("missing column header"))??;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| bad("malformed row"))?;
        xs.push(a.trim().parse::<f64>().map_err(|_| bad("bad x"))?);
        vs.push(b.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
    }
    Ok((xs, Field::new(vs, left, right)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Direct O(N²) quadrature: trapezoid sum over the whole line, with the
    /// field extended by its asymptotes onto ghost nodes far beyond ±L.
    fn direct_convolution(g: &Grid, k: &KernelSpec, f: &Field) -> Vec<f64> {
        let n = g.n() as isize;
        let dx = g.dx();
        let pad = (60.0 * k.sigma / dx).ceil() as isize;
        let value = |j: isize| {
            if j < 0 {
                f.left
            } else if j >= n {
                f.right
            } else {
                f.values[j as usize]
            }
        };
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in -pad..n + pad {
                    s += dx * k.eval((i - j) as f64 * dx) * value(j);
                }
                s + dx * dx / 12.0 * k.derivative_jump_at_origin() * value(i)
            })
            .collect()
    }

    fn front(g: &Grid, width: f64) -> Field {
        g.sample(|x| 0.5 * (1.0 + (x / width).tanh()), 0.0, 1.0)
    }

    #[test]
    fn grid_nodes_symmetric() {
        let g = Grid::new(40.0, 513).unwrap();
        assert_eq!(g.x(0), -40.0);
        assert_eq!(g.x(512), 40.0);
        assert_eq!(g.x(256), 0.0);
        for i in 0..513 {
            assert_eq!(g.x(i), -g.x(512 - i));
        }
        assert!(Grid::new(40.0, 8).is_err());
        assert!(Grid::new(0.0, 64).is_err());
    }

    #[test]
    fn inner_examples() {
        // bump of height 1 on [-1, 1]
        let mut prev = f64::INFINITY;
        for n in [1025, 4097, 16385] {
            let g = Grid::new(40.0, n).unwrap();
            let b = g.sample(|x| if x.abs() <= 1.0 { 1.0 } else { 0.0 }, 0.0, 0.0);
            let err = (inner(&g, &b, &b).unwrap() - 2.0).abs();
            assert!(err <= 1.01 * g.dx());
            assert!(err <= prev);
            prev = err;
        }
        let g = Grid::new(40.0, 2048).unwrap();
        let f = g.sample(|x| (-x * x).exp(), 0.0, 0.0);
        assert_eq!(inner(&g, &f, &g.zeros()).unwrap(), 0.0);
        assert!((inner(&g, &f, &f).unwrap() - (PI_2).sqrt()).abs() < 1e-8);
        let u = front(&g, 1.0);
        assert!(matches!(inner(&g, &u, &u), Err(Error::Domain(_))));
        assert!(inner(&g, &u, &f).is_ok());
    }

    const PI_2: f64 = std::f64::consts::FRAC_PI_2;

    #[test]
    fn convolution_of_constants_is_exact() {
        let g = Grid::new(40.0, 512).unwrap();
        for k in [KernelSpec::exponential(1.0).unwrap(), KernelSpec::gaussian(2.0).unwrap()] {
            let one = Field::new(vec![1.0; 512], 1.0, 1.0);
            let r = convolve(&g, &k, &one);
            assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
            let z = convolve(&g, &k, &g.zeros());
            assert!(z.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn convolution_of_step_at_origin() {
        let g = Grid::new(40.0, 1025).unwrap();
        let k = KernelSpec::exponential(1.0).unwrap();
        let step = g.sample(|x| if x > 0.0 { 1.0 } else if x == 0.0 { 0.5 } else { 0.0 }, 0.0, 1.0);
        let r = convolve(&g, &k, &step);
        assert!((r.values[512] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn convolution_matches_direct_quadrature() {
        let g = Grid::new(40.0, 256).unwrap();
        for k in [KernelSpec::gaussian(1.0).unwrap(), KernelSpec::gaussian(2.0).unwrap()] {
            for f in [
                front(&g, 2.0),
                g.sample(|x| (-(x - 3.0).powi(2) / 8.0).exp() * (0.7 * x).sin(), 0.0, 0.0),
                g.sample(|x| 1.0 - 0.5 * (1.0 + (x / 3.0).tanh()), 1.0, 0.0),
            ] {
                let fast = convolve(&g, &k, &f);
                let slow = direct_convolution(&g, &k, &f);
                for (a, b) in fast.values.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
                }
            }
        }
        // the exponential kernel's kink limits the rule to fourth order in dx;
        // on a smooth, well-resolved field the two quadratures agree to 1e-7
        let g = Grid::new(40.0, 2048).unwrap();
        let k = KernelSpec::exponential(1.0).unwrap();
        let f = front(&g, 2.0);
        let fast = convolve(&g, &k, &f);
        let slow = direct_convolution(&g, &k, &f);
        for (a, b) in fast.values.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn pair_convolution_matches_single() {
        let g = Grid::new(20.0, 128).unwrap();
        let c = Convolver::new(&g, &KernelSpec::gaussian(1.5).unwrap());
        let a = front(&g, 1.0);
        let b = g.sample(|x| (-x * x).exp(), 0.0, 0.0);
        let mut s = c.scratch();
        let (mut oa, mut ob) = (vec![0.0; 128], vec![0.0; 128]);
        c.convolve_pair_into((&a.values, 0.0, 1.0), (&b.values, 0.0, 0.0), &mut oa, &mut ob, &mut s);
        let ra = c.convolve(&a);
        let rb = c.convolve(&b);
        for i in 0..128 {
            assert!((oa[i] - ra.values[i]).abs() < 1e-14);
            assert!((ob[i] - rb.values[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_examples() {
        let g = Grid::new(40.0, 4096).unwrap();
        let c = Field::new(vec![3.0; 4096], 3.0, 3.0);
        assert!(gradient(&g, &c).values.iter().all(|&v| v == 0.0));
        let g = Grid::new(40.0, 4097).unwrap();
        let t = g.sample(f64::tanh, -1.0, 1.0);
        let d = gradient(&g, &t);
        assert!((d.values[2048] - 1.0).abs() < 1e-6);
        assert!(d.is_l2());
    }

    #[test]
    fn gradient_commutes_with_shift() {
        let g = Grid::new(40.0, 2048).unwrap();
        let f = front(&g, 1.5);
        for delta in [0.013, 0.37, -2.21] {
            let a = gradient(&g, &shift_profile(&g, &f, delta).unwrap());
            let b = shift_field(&g, &gradient(&g, &f), delta).unwrap();
            let err = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-6, "delta {delta}: {err}");
        }
    }

    #[test]
    fn shift_examples() {
        let g = Grid::new(40.0, 2048).unwrap();
        let f = front(&g, 1.5);
        assert_eq!(shift_profile(&g, &f, 0.0).unwrap(), f);
        for delta in [0.01, 0.1, 0.777, -3.3] {
            let back = shift_profile(&g, &shift_profile(&g, &f, delta).unwrap(), -delta).unwrap();
            let err = back.values.iter().zip(&f.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-8, "delta {delta}: {err}");
        }
        // exact shift agrees with the closed form
        let s = shift_profile(&g, &f, 0.4321).unwrap();
        let exact = g.sample(|x| 0.5 * (1.0 + ((x - 0.4321) / 1.5).tanh()), 0.0, 1.0);
        let err = s.values.iter().zip(&exact.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-8, "{err}");
        assert!(matches!(shift_profile(&g, &f, 20.5), Err(Error::Truncation(_))));
    }

    #[test]
    fn shift_is_lipschitz_with_gradient_norm() {
        let g = Grid::new(40.0, 2048).unwrap();
        let f = front(&g, 1.0);
        let fx = gradient(&g, &f);
        let lip = norm(&fx.values, g.dx());
        for delta in [0.01, 0.1] {
            let s = shift_profile(&g, &f, delta).unwrap();
            let d = s.lincomb(1.0, &f, -1.0);
            assert!(norm(&d.values, g.dx()) <= lip * delta);
        }
    }

    #[test]
    fn monotone_shift_does_not_overshoot() {
        let g = Grid::new(10.0, 64).unwrap();
        // steep front, badly resolved
        let f = g.sample(|x| 0.5 * (1.0 + (x / 0.05).tanh()), 0.0, 1.0);
        for delta in [0.03, 0.11, -0.07] {
            let s = shift_profile(&g, &f, delta).unwrap();
            assert!(s.values.iter().all(|&v| (-1e-15..=1.0 + 1e-15).contains(&v)));
            assert!(s.values.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        }
    }

    #[test]
    fn field_csv_roundtrip() {
        let g = Grid::new(5.0, 32).unwrap();
        let f = front(&g, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &g, &f).unwrap();
        let (xs, back) = read_field_csv(&p).unwrap();
        assert_eq!(xs, g.nodes());
        assert_eq!(back, f);
    }

    #[test]
    fn boundary_excess_of_front() {
        let g = Grid::new(40.0, 512).unwrap();
        let f = front(&g, 1.0);
        assert!(f.boundary_excess() < 1e-20_f64.max(1e-12));
        assert_relative_eq!(f.scaled(2.0).right, 2.0);
    }

    fn random_field(n: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = Grid::new(40.0, n).unwrap();
        // random smooth-ish bumps away from the boundary
        let mut v = vec![0.0; n];
        for _ in 0..8 {
            let c: f64 = r.random_range(-25.0..25.0);
            let a: f64 = r.random_range(-1.0..1.0);
            let s: f64 = r.random_range(0.2..3.0);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += a * (-(g.x(i) - c).powi(2) / (2.0 * s * s)).exp();
            }
        }
        for vi in v.iter_mut() {
            *vi += 0.01 * r.random_range(-1.0..1.0);
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn convolution_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = Grid::new(40.0, 256).unwrap();
            let c = Convolver::new(&g, &KernelSpec::gaussian(1.0).unwrap());
            let f = Field::l2(random_field(256, seed));
            let h = Field::new(random_field(256, seed + 7919), 0.3, -1.2);
            let lhs = c.convolve(&f.lincomb(a, &h, b));
            let rhs = c.convolve(&f).lincomb(a, &c.convolve(&h), b);
            for (x, y) in lhs.values.iter().zip(&rhs.values) {
                prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn convolution_is_l2_contractive(seed in 0u64..10_000) {
            let g = Grid::new(40.0, 512).unwrap();
            for k in [KernelSpec::gaussian(1.0).unwrap(), KernelSpec::exponential(0.5).unwrap()] {
                let f = Field::l2(random_field(512, seed));
                let r = convolve(&g, &k, &f);
                prop_assert!(norm(&r.values, g.dx()) <= norm(&f.values, g.dx()));
            }
        }
    }
}
