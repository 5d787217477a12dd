//! Model ingredients: the synaptic weight kernel `w` and the firing rate `F`.
//!
//! Kernels are probability densities with closed-form CDFs (needed for the
//! boundary-tail corrections of the truncated convolution). The firing rate is
//! a logistic sigmoid rescaled so that `F(0) = 0` and `F(1) = 1` exactly,
//! which makes 0 and 1 fixed points of the deterministic dynamics.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `w(x) = exp(-|x|/σ) / (2σ)`
    Exponential,
    /// `w(x) = exp(-x²/(2σ²)) / (σ√(2π))`
    Gaussian,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" => Ok(KernelFamily::Exponential),
            "gaussian" => Ok(KernelFamily::Gaussian),
            other => Err(Error::Config(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A symmetric synaptic weight kernel with unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("kernel.sigma must be positive, got {sigma}")));
        }
        Ok(Self { family, sigma })
    }

    pub fn exponential(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, sigma)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    /// Kernel value `w(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.sigma;
        match self.family {
            KernelFamily::Exponential => (-(x.abs()) / s).exp() / (2.0 * s),
            KernelFamily::Gaussian => (-x * x / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt()),
        }
    }

    /// Derivative `w'(x)`; at the exponential kernel's kink the value 0 is returned.
    pub fn derivative(&self, x: f64) -> f64 {
        let s = self.sigma;
        match self.family {
            KernelFamily::Exponential => -x.signum() * self.eval(x) / s,
            KernelFamily::Gaussian => -x / (s * s) * self.eval(x),
        }
    }

    /// Cumulative distribution `∫_{-∞}^x w`.
    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.sigma;
        match self.family {
            KernelFamily::Exponential => {
                if x < 0.0 {
                    0.5 * (x / s).exp()
                } else {
                    1.0 - 0.5 * (-x / s).exp()
                }
            }
            KernelFamily::Gaussian => 0.5 * erfc(-x / (s * SQRT_2)),
        }
    }

    /// Cumulative distribution of the self-convolution `w∗w`.
    ///
    /// This is the exact convolution of `w` with its own CDF, which the grid
    /// convolution uses to handle the non-decaying ramp of front-type fields.
    pub fn self_convolution_cdf(&self, x: f64) -> f64 {
        let s = self.sigma;
        match self.family {
            KernelFamily::Exponential => {
                let r = x.abs() / s;
                let lower = 0.25 * (2.0 + r) * (-r).exp();
                if x <= 0.0 {
                    lower
                } else {
                    1.0 - lower
                }
            }
            // w∗w is Gaussian with standard deviation σ√2
            KernelFamily::Gaussian => 0.5 * erfc(-x / (2.0 * s)),
        }
    }

    /// `‖w‖_∞ = w(0)`.
    pub fn sup_norm(&self) -> f64 {
        self.eval(0.0)
    }

    /// `∫ w² dx`, which equals `sup_{y,ỹ} ∫ w(x-y) w(x-ỹ) dx` (attained at `y = ỹ`).
    pub fn l2_norm_sq(&self) -> f64 {
        let s = self.sigma;
        match self.family {
            KernelFamily::Exponential => 1.0 / (4.0 * s),
            KernelFamily::Gaussian => 1.0 / (2.0 * s * PI.sqrt()),
        }
    }

    /// Jump of `w'` across the origin, `w'(0+) - w'(0-)`. Zero for smooth kernels.
    pub fn derivative_jump_at_origin(&self) -> f64 {
        match self.family {
            KernelFamily::Exponential => -1.0 / (self.sigma * self.sigma),
            KernelFamily::Gaussian => 0.0,
        }
    }
}

/// Integrals entering the weight-kernel assumption: total mass and `∫ w_x²/w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelAssumptionReport {
    pub integral_w: f64,
    pub grad_integral: f64,
}

/// Evaluates `∫ w` and `∫ w_x² / w` in closed form. For both supported families
/// `w_x²/w` is a multiple of a density with second moment `σ²`, giving `1/σ²`.
pub fn check_assumption_w(k: &KernelSpec) -> Result<KernelAssumptionReport> {
    let grad_integral = match k.family {
        KernelFamily::Exponential | KernelFamily::Gaussian => 1.0 / (k.sigma * k.sigma),
    };
    if !grad_integral.is_finite() {
        return Err(Error::Assumption("∫ w_x²/w diverges".into()));
    }
    Ok(KernelAssumptionReport { integral_w: 1.0, grad_integral })
}

/// Logistic sigmoid `S(u) = 1/(1+exp(-β(u-θ)))`, rescaled to
/// `F(u) = (S(u) - S(0)) / (S(1) - S(0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiringRate {
    pub beta: f64,
    pub theta: f64,
    s0: f64,
    scale: f64,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl FiringRate {
    /// Builds the rescaled sigmoid and checks that 0 and 1 are stable fixed
    /// points (`F'(0) < 1`, `F'(1) < 1`).
    pub fn new(beta: f64, theta: f64) -> Result<Self> {
        let f = Self::unchecked(beta, theta)?;
        let (d0, d1) = (f.eval(0.0, 1), f.eval(1.0, 1));
        if d0 >= 1.0 || d1 >= 1.0 {
            return Err(Error::Assumption(format!(
                "fixed points 0 and 1 must be stable: F'(0) = {d0:.4}, F'(1) = {d1:.4}"
            )));
        }
        Ok(f)
    }

    /// Builds the rescaled sigmoid without the fixed-point stability check.
    pub fn unchecked(beta: f64, theta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Config(format!("firing.beta must be positive, got {beta}")));
        }
        if !theta.is_finite() {
            return Err(Error::Config("firing.theta must be finite".into()));
        }
        let s0 = logistic(-beta * theta);
        let s1 = logistic(beta * (1.0 - theta));
        Ok(Self { beta, theta, s0, scale: s1 - s0 })
    }

    fn raw(&self, u: f64) -> f64 {
        logistic(self.beta * (u - self.theta))
    }

    /// `F(u)`, `F'(u)` or `F''(u)` for `order` 0, 1, 2. Higher orders return NaN.
    pub fn eval(&self, u: f64, order: u8) -> f64 {
        let s = self.raw(u);
        let b = self.beta;
        match order {
            0 => (s - self.s0) / self.scale,
            1 => b * s * (1.0 - s) / self.scale,
            2 => b * b * s * (1.0 - s) * (1.0 - 2.0 * s) / self.scale,
            _ => f64::NAN,
        }
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.eval(u, 0)
    }

    #[inline]
    pub fn first(&self, u: f64) -> f64 {
        self.eval(u, 1)
    }

    #[inline]
    pub fn second(&self, u: f64) -> f64 {
        self.eval(u, 2)
    }

    /// `‖F'‖_∞ = (β/4) / (S(1) - S(0))`.
    pub fn sup_first(&self) -> f64 {
        self.beta / 4.0 / self.scale
    }

    /// `‖F''‖_∞ = β²/(6√3) / (S(1) - S(0))`, attained where `S = (3 - √3)/6`.
    pub fn sup_second(&self) -> f64 {
        self.beta * self.beta / (6.0 * 3f64.sqrt()) / self.scale
    }

    /// `S(1) - S(0)`.
    pub fn normalization(&self) -> f64 {
        self.scale
    }
}

/// The remainder constant `c = ½‖F''‖_∞ (∫w²)^{1/2}` together with the coarser
/// bound `½‖F''‖_∞ ‖w‖_∞^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderConstant {
    pub refined: f64,
    pub coarse: f64,
}

pub fn remainder_constant(k: &KernelSpec, f: &FiringRate) -> RemainderConstant {
    remainder_constant_from(k, f.sup_second())
}

pub(crate) fn remainder_constant_from(k: &KernelSpec, sup_f2: f64) -> RemainderConstant {
    let refined = 0.5 * sup_f2 * k.l2_norm_sq().sqrt();
    let coarse = 0.5 * sup_f2 * k.sup_norm().sqrt();
    debug_assert!(refined <= coarse * (1.0 + 1e-12));
    RemainderConstant { refined, coarse }
}

/// Sup-norm constants of the model used throughout the stability analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub sup_f1: f64,
    pub sup_f2: f64,
    pub sup_w: f64,
    pub c_r: f64,
    pub c_r_coarse: f64,
    pub w_grad_integral: f64,
}

impl ModelConstants {
    pub fn new(k: &KernelSpec, f: &FiringRate) -> Result<Self> {
        let rc = remainder_constant(k, f);
        let a = check_assumption_w(k)?;
        Ok(Self {
            sup_f1: f.sup_first(),
            sup_f2: f.sup_second(),
            sup_w: k.sup_norm(),
            c_r: rc.refined,
            c_r_coarse: rc.coarse,
            w_grad_integral: a.grad_integral,
        })
    }
}

/// Kernel and firing rate bundled together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kernel: KernelSpec,
    pub firing: FiringRate,
}

impl Model {
    pub fn new(kernel: KernelSpec, firing: FiringRate) -> Self {
        Self { kernel, firing }
    }

    pub fn constants(&self) -> Result<ModelConstants> {
        ModelConstants::new(&self.kernel, &self.firing)
    }
}
