//! Parametric model class for one-dimensional jump diffusions whose squared
//! diffusion coefficient and drift are linear in the parameters:
//!
//! ```text
//! dX_t = sqrt(A(X_t)' alpha) dw_t + B(X_t)' beta dt + c(X_{t-}) dJ_t
//! ```
//!
//! `A` and `B` are vectors of known basis functions, `c` is the jump
//! coefficient, and `J` is a compound Poisson process. Models are registry
//! entries supplied as code, not parsed expressions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported parameter dimension (shared with the dense solver).
pub const MAX_DIM: usize = 16;

/// Jump-size law of the compound Poisson driver.
///
/// `Gamma` is parameterized shape-rate, so `Gamma(4, 1)` has mean 4.
/// `BilateralIg` is the difference of two independent inverse Gaussian
/// variables; `IG(delta, gamma)` here has density
/// `(delta e^{delta gamma} / sqrt(2 pi)) x^{-3/2} exp(-(delta^2/x + gamma^2 x)/2)`,
/// mean `delta/gamma` and variance `delta/gamma^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpKind {
    Gamma {
        shape: f64,
        rate: f64,
    },
    BilateralIg {
        delta1: f64,
        gamma1: f64,
        delta2: f64,
        gamma2: f64,
    },
    None,
}

/// Jump-size law together with the Poisson intensity per unit time.
///
/// `intensity = 0` simply means the jump term never fires; it does not force
/// `kind = None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLaw {
    #[serde(flatten)]
    pub kind: JumpKind,
    pub intensity: f64,
}

impl JumpLaw {
    pub fn none() -> Self {
        JumpLaw {
            kind: JumpKind::None,
            intensity: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.intensity.is_finite() || self.intensity < 0.0 {
            return Err(Error::invalid("intensity", "must be finite and >= 0"));
        }
        match self.kind {
            JumpKind::Gamma { shape, rate } => {
                if shape <= 0.0 || rate <= 0.0 {
                    return Err(Error::invalid(
                        "jump_law",
                        "gamma shape and rate must be > 0",
                    ));
                }
            }
            JumpKind::BilateralIg {
                delta1,
                gamma1,
                delta2,
                gamma2,
            } => {
                if delta1 <= 0.0 || gamma1 <= 0.0 || delta2 <= 0.0 || gamma2 <= 0.0 {
                    return Err(Error::invalid(
                        "jump_law",
                        "bilateral IG parameters must all be > 0",
                    ));
                }
            }
            JumpKind::None => {}
        }
        Ok(())
    }
}

/// Axis-aligned box of admissible diffusion parameters.
///
/// Membership requires `lo < alpha <= hi` componentwise. The box does not
/// prove positivity of `A(x)' alpha`; that is checked lazily at every
/// evaluation (see [`ModelSpec::diffusion_sq`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AlphaDomain {
    /// Positive orthant in `dim` dimensions.
    pub fn positive(dim: usize) -> Self {
        AlphaDomain {
            lo: vec![0.0; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn contains(&self, alpha: &[f64]) -> bool {
        alpha.len() == self.lo.len()
            && alpha
                .iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(a, (lo, hi))| a.is_finite() && *a > *lo && *a <= *hi)
    }
}

/// True parameter value used by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaTrue {
    pub alpha0: Vec<f64>,
    pub beta0: Vec<f64>,
}

type BasisFn = fn(f64, &mut [f64]);

/// A registered model: basis functions, their derivatives, the jump
/// coefficient, the admissible parameter box, and the jump law.
///
/// All evaluations are pure; a `ModelSpec` is immutable after construction
/// and safe to share across threads.
#[derive(Clone)]
pub struct ModelSpec {
    pub name: &'static str,
    pub p_alpha: usize,
    pub p_beta: usize,
    a: BasisFn,
    da: BasisFn,
    b: BasisFn,
    c: fn(f64) -> f64,
    pub alpha_domain: AlphaDomain,
    pub jump_law: JumpLaw,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("p_alpha", &self.p_alpha)
            .field("p_beta", &self.p_beta)
            .field("jump_law", &self.jump_law)
            .finish()
    }
}

impl ModelSpec {
    /// Build a model from raw parts. Intended for tests and registry entries;
    /// CLI users go through [`builtin_model`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &'static str,
        p_alpha: usize,
        p_beta: usize,
        a: BasisFn,
        da: BasisFn,
        b: BasisFn,
        c: fn(f64) -> f64,
        alpha_domain: AlphaDomain,
        jump_law: JumpLaw,
    ) -> Self {
        assert!((1..=MAX_DIM).contains(&p_alpha), "p_alpha out of range");
        assert!((1..=MAX_DIM).contains(&p_beta), "p_beta out of range");
        ModelSpec {
            name,
            p_alpha,
            p_beta,
            a,
            da,
            b,
            c,
            alpha_domain,
            jump_law,
        }
    }

    /// Write the diffusion basis vector `A(x)` into `out`.
    pub fn eval_a(&self, x: f64, out: &mut [f64]) {
        (self.a)(x, &mut out[..self.p_alpha]);
    }

    /// Write the componentwise derivative `dA/dx` into `out`.
    pub fn eval_da(&self, x: f64, out: &mut [f64]) {
        (self.da)(x, &mut out[..self.p_alpha]);
    }

    /// Write the drift basis vector `B(x)` into `out`.
    pub fn eval_b(&self, x: f64, out: &mut [f64]) {
        (self.b)(x, &mut out[..self.p_beta]);
    }

    /// Jump coefficient `c(x)`.
    pub fn eval_c(&self, x: f64) -> f64 {
        (self.c)(x)
    }

    /// Allocating convenience wrappers, mostly for tests.
    pub fn a_vec(&self, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.p_alpha];
        self.eval_a(x, &mut v);
        v
    }

    pub fn da_vec(&self, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.p_alpha];
        self.eval_da(x, &mut v);
        v
    }

    pub fn b_vec(&self, x: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.p_beta];
        self.eval_b(x, &mut v);
        v
    }

    /// Squared diffusion coefficient `A(x)' alpha`.
    ///
    /// Errors with [`Error::NonPositiveDiffusion`] when the result is not
    /// strictly positive, signalling a parameter outside the admissible
    /// region at this state.
    pub fn diffusion_sq(&self, x: f64, alpha: &[f64]) -> Result<f64> {
        let mut buf = [0.0; MAX_DIM];
        self.eval_a(x, &mut buf[..self.p_alpha]);
        let v: f64 = buf[..self.p_alpha]
            .iter()
            .zip(alpha.iter())
            .map(|(a, al)| a * al)
            .sum();
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NonPositiveDiffusion {
                x,
                alpha: alpha.to_vec(),
                value: v,
                interval: None,
            })
        }
    }

    /// Drift coefficient `B(x)' beta`.
    pub fn drift(&self, x: f64, beta: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        self.eval_b(x, &mut buf[..self.p_beta]);
        buf[..self.p_beta]
            .iter()
            .zip(beta.iter())
            .map(|(b, be)| b * be)
            .sum()
    }
}

fn sine_vol_a(x: f64, out: &mut [f64]) {
    let s = x.sin();
    out[0] = 1.0 / (1.0 + s * s);
}

fn sine_vol_da(x: f64, out: &mut [f64]) {
    let s = x.sin();
    let d = 1.0 + s * s;
    out[0] = -(2.0 * x).sin() / (d * d);
}

fn neg_x(x: f64, out: &mut [f64]) {
    out[0] = -x;
}

fn const_one(_x: f64, out: &mut [f64]) {
    out[0] = 1.0;
}

fn const_zero(_x: f64, out: &mut [f64]) {
    out[0] = 0.0;
}

fn unit_jump(_x: f64) -> f64 {
    1.0
}

const REGISTRY: &[&str] = &["sine-vol-ou", "const-ou"];

/// Look up a registered model by name. The jump law defaults to `None`
/// (the CLI layer populates it separately).
///
/// Registered models:
/// - `sine-vol-ou`: `A(x) = (1/(1+sin^2 x))`, `B(x) = (-x)`, `c = 1`
/// - `const-ou`: `A(x) = (1)`, `B(x) = (-x)`, `c = 1`
pub fn builtin_model(name: &str) -> Result<ModelSpec> {
    match name {
        "sine-vol-ou" => Ok(ModelSpec::new(
            "sine-vol-ou",
            1,
            1,
            sine_vol_a,
            sine_vol_da,
            neg_x,
            unit_jump,
            AlphaDomain::positive(1),
            JumpLaw::none(),
        )),
        "const-ou" => Ok(ModelSpec::new(
            "const-ou",
            1,
            1,
            const_one,
            const_zero,
            neg_x,
            unit_jump,
            AlphaDomain::positive(1),
            JumpLaw::none(),
        )),
        _ => Err(Error::UnknownModel {
            name: name.to_string(),
            registry: REGISTRY.join(", "),
        }),
    }
}

/// Names of all registered models, for CLI help and error messages.
pub fn registry_names() -> &'static [&'static str] {
    REGISTRY
}
