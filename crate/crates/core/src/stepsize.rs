//! Theoretical step-size bounds and certification of a configured step-size.
//!
//! The seventeen bounds and their constants are evaluated exactly as
//! printed, including their dependence on `||V^-1||`, which itself depends on
//! the candidate step-size. Certification is therefore a predicate on the
//! candidate `gamma`: the bounds are evaluated at `gamma` and compared
//! against it.

use nalgebra::{Complex, Matrix3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{RunConfig, Variant};
use crate::graph::{spectral_quantities, SpectralInfo, Topology};
use crate::problems::{ProblemInstance, SmoothnessEstimate};

/// Blocks of `V` with a larger condition number are rejected.
pub const MAX_BLOCK_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepsizeError {
    #[error("gamma * |lambda~_min| * rho * tau = {product} is outside (0, 2); bound 1 is already violated")]
    PreconditionViolated { product: f64 },
    #[error("eigenvector block for Laplacian eigenvalue {eigenvalue} is ill-conditioned (condition number {condition:e})")]
    IllConditioned { eigenvalue: f64, condition: f64 },
    #[error("invalid bound context: {0}")]
    InvalidContext(String),
}

type C64 = Complex<f64>;

/// Eigenvector matrix of the 3x3 consensus block for one nonzero Laplacian
/// eigenvalue `lambda` (so `lambda~ = -lambda`).
pub fn eigenvector_block(lambda: f64, rho: f64, tau: usize, gamma: f64) -> Matrix3<C64> {
    let lt = -lambda;
    let gt = gamma * tau as f64;
    let s = gamma * lt * rho * tau as f64;
    let root = C64::new(s * (s + 2.0), 0.0).sqrt();
    let d12 = C64::new(-gt, 0.0) + root / (lt * rho);
    let d13 = C64::new(-gt, 0.0) - root / (lt * rho);
    let d22 = d12 * (lt * rho) - 1.0;
    let d23 = d13 * (lt * rho) - 1.0;
    let one = C64::new(1.0, 0.0);
    Matrix3::new(C64::new(-gt, 0.0), d12, d13, one, d22, d23, one, one, one)
}

/// `||V^-1||`: the largest inverse-block spectral norm over all nonzero
/// Laplacian eigenvalues.
pub fn build_v_hat_inverse_norm(spectral: &SpectralInfo, rho: f64, tau: usize, gamma: f64) -> Result<f64, StepsizeError> {
    let product = gamma * spectral.lambda_tilde_min_abs * rho * tau as f64;
    let smallest = gamma * spectral.lambda_tilde_max_abs * rho * tau as f64;
    if !(product < 2.0 && smallest > 0.0) {
        return Err(StepsizeError::PreconditionViolated { product });
    }
    let mut worst: f64 = 0.0;
    for &lambda in &spectral.nonzero_eigenvalues {
        let block = eigenvector_block(lambda, rho, tau, gamma);
        let sv = block.singular_values();
        let (max, min) = (sv.max(), sv.min());
        let condition = max / min;
        if !condition.is_finite() || condition > MAX_BLOCK_CONDITION {
            return Err(StepsizeError::IllConditioned { eigenvalue: lambda, condition });
        }
        worst = worst.max(1.0 / min);
    }
    Ok(worst)
}

/// Everything the bounds depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    pub lipschitz: f64,
    pub rho: f64,
    pub tau: usize,
    pub gamma_candidate: f64,
    pub max_degree: f64,
    pub lambda_tilde_min_abs: f64,
    pub lambda_tilde_max_abs: f64,
    pub laplacian_norm: f64,
    pub m_l: f64,
    pub m_u: f64,
    pub n_agents: f64,
    /// `||V^-1||` at `gamma_candidate`.
    pub v_inv_norm: f64,
}

impl BoundContext {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        spectral: &SpectralInfo,
        lipschitz: f64,
        rho: f64,
        tau: usize,
        gamma: f64,
        m_l: usize,
        m_u: usize,
        n_agents: usize,
    ) -> Result<Self, StepsizeError> {
        let v_inv_norm = build_v_hat_inverse_norm(spectral, rho, tau, gamma)?;
        let ctx = Self {
            lipschitz,
            rho,
            tau,
            gamma_candidate: gamma,
            max_degree: spectral.max_degree as f64,
            lambda_tilde_min_abs: spectral.lambda_tilde_min_abs,
            lambda_tilde_max_abs: spectral.lambda_tilde_max_abs,
            laplacian_norm: spectral.laplacian_norm,
            m_l: m_l as f64,
            m_u: m_u as f64,
            n_agents: n_agents as f64,
            v_inv_norm,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), StepsizeError> {
        let positive = [
            self.lipschitz,
            self.rho,
            self.tau as f64,
            self.gamma_candidate,
            self.max_degree,
            self.lambda_tilde_min_abs,
            self.lambda_tilde_max_abs,
            self.laplacian_norm,
            self.m_l,
            self.m_u,
            self.n_agents,
            self.v_inv_norm,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(StepsizeError::InvalidContext("all quantities must be positive and finite".into()));
        }
        if self.m_l > self.m_u {
            return Err(StepsizeError::InvalidContext("m_l exceeds m_u".into()));
        }
        Ok(())
    }
}

/// Auxiliary constants shared by the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub beta_0: f64,
    pub beta_1: f64,
    pub kappa_1: f64,
    pub kappa_4: f64,
    pub s_tilde_0: f64,
    pub s_tilde_1: f64,
    pub s_tilde_2: f64,
    pub beta_tilde_0: f64,
    pub beta_tilde_1: f64,
    pub beta_tilde_3: f64,
    pub alpha_0: f64,
    pub alpha_1: f64,
    pub alpha_5: f64,
    pub mu: f64,
}

impl BoundConstants {
    pub fn new(c: &BoundContext) -> Self {
        let (l, rho, tau, du, n) = (c.lipschitz, c.rho, c.tau as f64, c.max_degree, c.n_agents);
        let lmax = c.lambda_tilde_max_abs;
        let v2 = c.v_inv_norm * c.v_inv_norm;
        let (l2, rho2, du2) = (l * l, rho * rho, du * du);
        let lap = 1.0 + 2.0 * rho2 * c.laplacian_norm * c.laplacian_norm;
        let ratio = c.m_u / c.m_l;

        let beta_0 = 4.0 * lap * v2 * (l2 + rho2 * du2) + 12.0 * l2 * v2 * rho2 * du2;
        let beta_1 = lap * v2 * tau * rho * du2 * 72.0 / lmax + l2 * v2 * 18.0 * rho * du2 * tau * 216.0 / lmax;
        let inner = 18.0 + 36.0 * tau * rho2 * du2 / (lmax * rho);
        let kappa_1 = 72.0 * tau / (lmax * rho) + inner * 16.0 * tau * tau;
        let kappa_4 = 8.0 / n
            * (kappa_1 * (l2 / 2.0 + 2.0 * l * rho2 * du2 * tau + 2.0 * rho2 * du2)
                + 2.0 * tau / (lmax * rho) * (18.0 * rho2 * du2 + 18.0 * rho2 * du2 * tau * l));
        let s_tilde_0 = 36.0 * c.m_u / (lmax * rho) + 16.0 * ratio * inner;
        let s_tilde_1 = kappa_1 * 4.0 * ratio;
        let s_tilde_2 = 64.0 * ratio * tau * tau * n + 16.0 * ratio * n;
        let beta_tilde_0 = lap * v2 * 4.0 * (3.0 * l2 + rho2 * du2) + 6.0 * l2 * v2 * (2.0 * rho2 * du2 + 4.0 * l2);
        let beta_tilde_1 = beta_1;
        let beta_tilde_3 = lap * v2 * 8.0 * l2 + 6.0 * l2 * v2 * 4.0 * l2;
        let alpha_0 = l2 / (2.0 * n) + (2.0 * l * rho2 * du2 * tau + 2.0 * rho2 * du2 + 4.0 * tau * l2 * l) / n;
        let alpha_1 = 72.0 * tau * tau / (lmax * rho) + inner * 16.0 * tau * tau * tau;
        let alpha_5 = (36.0 * rho * du2 * tau * tau + 36.0 * rho * du2 * tau * tau * tau * l) / (n * lmax);
        let mu = 32.0
            * (alpha_5
                + alpha_0 * alpha_1
                + 2.0 * (48.0 * tau * tau * l2 * alpha_0 + 4.0 * tau * l2 * l / n) * (s_tilde_0 + s_tilde_1));
        Self {
            beta_0,
            beta_1,
            kappa_1,
            kappa_4,
            s_tilde_0,
            s_tilde_1,
            s_tilde_2,
            beta_tilde_0,
            beta_tilde_1,
            beta_tilde_3,
            alpha_0,
            alpha_1,
            alpha_5,
            mu,
        }
    }
}

/// Indices (1-based) entering the SGD bound.
pub const SGD_BOUNDS: [usize; 7] = [1, 2, 3, 4, 5, 6, 7];
/// Indices (1-based) entering the variance-reduced bound.
pub const SARAH_BOUNDS: [usize; 11] = [1, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub context: BoundContext,
    pub constants: BoundConstants,
    /// `bounds[i - 1]` is bound `i`. With `tau = 1`, bounds 2 and 11 are
    /// infinite (serialized as `null`).
    pub bounds: Vec<f64>,
    pub gamma_bar_sgd: f64,
    pub gamma_bar_sarah: f64,
    pub binding_sgd: usize,
    pub binding_sarah: usize,
    pub satisfied_sgd: bool,
    pub satisfied_sarah: bool,
    pub notes: Vec<String>,
}

fn min_over(bounds: &[f64], indices: &[usize]) -> (f64, usize) {
    indices
        .iter()
        .map(|&i| (bounds[i - 1], i))
        .fold((f64::INFINITY, indices[0]), |best, cur| if cur.0 < best.0 { cur } else { best })
}

pub fn evaluate_bounds(context: &BoundContext) -> Result<BoundReport, StepsizeError> {
    context.validate()?;
    let c = BoundConstants::new(context);
    let (l, rho, tau, du, n) = (context.lipschitz, context.rho, context.tau as f64, context.max_degree, context.n_agents);
    let (l2, rho2, du2) = (l * l, rho * rho, du * du);
    let lmax2 = context.lambda_tilde_max_abs * context.lambda_tilde_max_abs;
    let v2 = context.v_inv_norm * context.v_inv_norm;
    let (m_l, m_u) = (context.m_l, context.m_u);

    let vr_tail = c.beta_tilde_0 * c.kappa_1
        + c.beta_tilde_1
        + (96.0 * tau * tau * l2 * c.beta_tilde_0 + 2.0 * c.beta_tilde_3) * (c.s_tilde_0 + c.s_tilde_1);
    let bounds = vec![
        (2.0 / (context.lambda_tilde_min_abs * rho * tau)).min(1.0),
        1.0 / (4.0 * (tau * (tau - 1.0) * (l2 + rho2 * du2)).sqrt()),
        3.0 / (16.0 * l * tau),
        1.0 / (8.0 * tau * (l2 + 4.0 * l * rho2 * du2 * tau + 4.0 * rho2 * du2).sqrt()),
        lmax2 * rho2 / (4.0 * (c.beta_0 * c.kappa_1 + c.beta_1)),
        lmax2 * rho2 / (8.0 * (c.beta_0 * c.kappa_1 + c.beta_1)),
        f64::max(
            lmax2 * rho2 / (256.0 * c.kappa_4 * tau * tau * n * c.beta_0),
            lmax2 * rho2 * tau * tau / (48.0 * l2 * v2 * n),
        ),
        m_l / (8.0 * l2 * m_u),
        (1.0 / (2.0 * (4.0 * l2 + 2.0 * rho2 * du2))).min(0.5),
        m_l.sqrt() / (tau * l * (384.0 * m_u).sqrt()),
        1.0 / (2.0 * (6.0 * tau * (tau - 1.0) * (3.0 * l2 + rho2 * du2)).sqrt()),
        1.0 / (8.0 * (2.0 * c.alpha_0 * tau * tau * n + (12.0 * c.alpha_0 * tau * l2 + l2 * l / n) * c.s_tilde_2).sqrt()),
        3.0 / (16.0 * l * tau),
        lmax2 * rho2 / (4.0 * vr_tail),
        lmax2 * rho2 / (8.0 * vr_tail),
        24.0 * l2 * v2 * n
            / (32.0 * tau * tau * n * c.beta_tilde_0 + 192.0 * c.s_tilde_2 * tau * tau * l2 * c.beta_tilde_0 + 4.0 * c.s_tilde_2 * c.beta_tilde_3),
        lmax2 * rho / (48.0 * c.mu * l2 * v2 * n),
    ];
    let (gamma_bar_sgd, binding_sgd) = min_over(&bounds, &SGD_BOUNDS);
    let (gamma_bar_sarah, binding_sarah) = min_over(&bounds, &SARAH_BOUNDS);
    let gamma = context.gamma_candidate;
    Ok(BoundReport {
        context: context.clone(),
        constants: c,
        bounds,
        gamma_bar_sgd,
        gamma_bar_sarah,
        binding_sgd,
        binding_sarah,
        satisfied_sgd: gamma < gamma_bar_sgd,
        satisfied_sarah: gamma < gamma_bar_sarah,
        notes: vec![
            "bound 7 takes the maximum of its two terms, as printed".into(),
            "bound 12 mixes L^3/N with dimensionless terms under the square root, as printed".into(),
            "bounds 5-7 and 14-17 depend on gamma through ||V^-1|| and are evaluated at the candidate".into(),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Sgd,
    Sarah,
}

impl Regime {
    pub fn for_variant(variant: Variant) -> Self {
        if variant.uses_saga() {
            Regime::Sarah
        } else {
            Regime::Sgd
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub variant: Variant,
    pub regime: Regime,
    pub gamma: f64,
    pub smoothness: SmoothnessEstimate,
    pub spectral: SpectralInfo,
    pub certified: bool,
    pub binding_bound: Option<usize>,
    pub report: Option<BoundReport>,
    /// Approximate largest certified step-size found by a grid scan refined
    /// by bisection, if any grid point certifies.
    pub threshold_estimate: Option<f64>,
    pub findings: Vec<String>,
}

fn certify_at(spectral: &SpectralInfo, lipschitz: f64, instance: &ProblemInstance, rho: f64, tau: usize, gamma: f64, regime: Regime) -> bool {
    BoundContext::from_parts(spectral, lipschitz, rho, tau, gamma, instance.min_points(), instance.max_points(), instance.num_agents())
        .and_then(|ctx| evaluate_bounds(&ctx))
        .map(|r| match regime {
            Regime::Sgd => r.satisfied_sgd,
            Regime::Sarah => r.satisfied_sarah,
        })
        .unwrap_or(false)
}

/// Scans `gamma` geometrically below bound 1 and refines the largest
/// certified grid point by bisection. Certification need not be monotone in
/// `gamma`, so the result is approximate.
pub fn certification_threshold(
    spectral: &SpectralInfo,
    lipschitz: f64,
    instance: &ProblemInstance,
    rho: f64,
    tau: usize,
    regime: Regime,
) -> Option<f64> {
    let upper = (2.0 / (spectral.lambda_tilde_min_abs * rho * tau as f64)).min(1.0);
    let points = 240;
    let decades = 12.0;
    let grid = |k: usize| upper * 10f64.powf(-decades * k as f64 / points as f64);
    let ok = |g: f64| certify_at(spectral, lipschitz, instance, rho, tau, g, regime);
    let k = (1..=points).find(|&k| ok(grid(k)))?;
    let (mut lo, mut hi) = (grid(k), grid(k - 1));
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Computes smoothness and spectrum, evaluates every bound at the configured
/// step-size and reports whether it is theoretically certified.
pub fn certified_run_check(instance: &ProblemInstance, topology: &Topology, config: &RunConfig) -> CertificationReport {
    let smoothness = instance.smoothness_constant();
    let spectral = spectral_quantities(topology);
    let regime = Regime::for_variant(config.variant);
    let mut findings = Vec::new();
    if config.variant == Variant::LtAdmmVrV2 {
        findings.push("lt_admm_vr_v2 has no step-size theory; the variance-reduced bounds are reported for reference".into());
    }
    let report = BoundContext::from_parts(
        &spectral,
        smoothness.lipschitz,
        config.rho,
        config.tau,
        config.gamma,
        instance.min_points(),
        instance.max_points(),
        instance.num_agents(),
    )
    .and_then(|ctx| evaluate_bounds(&ctx));
    let (certified, binding_bound, report) = match report {
        Ok(r) => {
            let (ok, binding) = match regime {
                Regime::Sgd => (r.satisfied_sgd, r.binding_sgd),
                Regime::Sarah => (r.satisfied_sarah, r.binding_sarah),
            };
            (ok, Some(binding), Some(r))
        }
        Err(e) => {
            findings.push(e.to_string());
            let binding = matches!(e, StepsizeError::PreconditionViolated { .. }).then_some(1);
            (false, binding, None)
        }
    };
    if !certified {
        findings.push("the bounds are conservative; an uncertified step-size may still converge".into());
    }
    let threshold_estimate = certification_threshold(&spectral, smoothness.lipschitz, instance, config.rho, config.tau, regime);
    if threshold_estimate.is_none() {
        findings.push("no certified step-size found on the scanned grid".into());
    }
    CertificationReport {
        variant: config.variant,
        regime,
        gamma: config.gamma,
        smoothness,
        spectral,
        certified,
        binding_bound,
        report,
        threshold_estimate,
        findings,
    }
}
