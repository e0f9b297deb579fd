//! Physical parameters, regime classification, and the pointwise kernel/entropy functions.

use crate::error::{Error, Result};

/// Tolerance on m + k - 1 inside which a parameter pair counts as fair competition.
pub const FAIR_TOL: f64 = 1e-12;

/// Choice of variables: the original flow (no confinement) or the self-similar
/// rescaled flow (unit quadratic confinement).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Original,
    Rescaled,
}

impl Frame {
    /// Confinement strength attached to the frame: 0 in original variables, 1 rescaled.
    pub fn confinement(self) -> f64 {
        match self {
            Frame::Original => 0.0,
            Frame::Rescaled => 1.0,
        }
    }
}

/// Sign of (m - 1) + k, which decides whether diffusion or attraction wins under dilations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// (m - 1) + k = 0: both terms scale identically.
    FairCompetition,
    /// (m - 1) + k > 0: diffusion dominates, mass spreads.
    DiffusionDominated,
    /// (m - 1) + k < 0: attraction dominates, mass concentrates.
    AttractionDominated,
}

/// Sub-case of the fair-competition line m = 1 - k, decided by the sign of k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// k < 0, m > 1: porous-medium diffusion against a singular kernel.
    PorousMedium,
    /// k = 0, m = 1: logarithmic kernel against linear diffusion.
    Logarithmic,
    /// k > 0, m < 1: fast diffusion against a growing kernel.
    FastDiffusion,
    /// Not on the fair-competition line.
    NotApplicable,
}

/// Model parameters of the free energy: diffusion exponent m, interaction
/// exponent k, interaction strength chi, and the working frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    pub m: f64,
    pub k: f64,
    pub chi: f64,
    pub frame: Frame,
}

impl PhysParams {
    /// Validates the admissible domain: m > 0, k in (-1, 1), chi > 0.
    pub fn new(m: f64, k: f64, chi: f64, frame: Frame) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusion exponent m must be positive and finite, got {m}"
            )));
        }
        if !(k.is_finite() && k > -1.0 && k < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "interaction exponent k must lie in (-1, 1), got {k}"
            )));
        }
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "interaction strength chi must be positive and finite, got {chi}"
            )));
        }
        Ok(PhysParams { m, k, chi, frame })
    }

    /// Confinement strength r implied by the frame.
    pub fn confinement(&self) -> f64 {
        self.frame.confinement()
    }

    /// True when (m - 1) + k vanishes within [`FAIR_TOL`].
    pub fn is_fair_competition(&self) -> bool {
        (self.m - 1.0 + self.k).abs() <= FAIR_TOL
    }
}

/// Classifies the parameter pair by the sign of (m - 1) + k, tagging the
/// fair-competition sub-case by the sign of k.
pub fn classify_regime(p: &PhysParams) -> (Regime, CaseTag) {
    let s = p.m - 1.0 + p.k;
    if s.abs() <= FAIR_TOL {
        let tag = if p.k.abs() <= FAIR_TOL {
            CaseTag::Logarithmic
        } else if p.k < 0.0 {
            CaseTag::PorousMedium
        } else {
            CaseTag::FastDiffusion
        };
        (Regime::FairCompetition, tag)
    } else if s > 0.0 {
        (Regime::DiffusionDominated, CaseTag::NotApplicable)
    } else {
        (Regime::AttractionDominated, CaseTag::NotApplicable)
    }
}

/// Interaction kernel at separation x: x^k / k for k != 0, log x for k = 0.
/// The origin is regular (value 0) only for k > 0.
pub fn kernel_value(k: f64, x: f64) -> Result<f64> {
    if !(k.is_finite() && k > -1.0 && k < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "interaction exponent k must lie in (-1, 1), got {k}"
        )));
    }
    let d = x.abs();
    if d == 0.0 {
        return if k > 0.0 {
            Ok(0.0)
        } else {
            Err(Error::Singular(
                "kernel is singular at zero separation for k <= 0".into(),
            ))
        };
    }
    if k == 0.0 {
        Ok(d.ln())
    } else {
        Ok(d.powf(k) / k)
    }
}

/// Entropy density at value rho: rho^m / (m - 1) for m != 1, rho log rho for
/// m = 1 (with the continuous extension 0 at rho = 0).
pub fn entropy_value(m: f64, rho: f64) -> Result<f64> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diffusion exponent m must be positive and finite, got {m}"
        )));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "density value must be nonnegative and finite, got {rho}"
        )));
    }
    if m == 1.0 {
        if rho == 0.0 {
            Ok(0.0)
        } else {
            Ok(rho * rho.ln())
        }
    } else {
        Ok(rho.powf(m) / (m - 1.0))
    }
}
