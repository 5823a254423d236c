//! Radially symmetric, non-increasing kernel families and their marginals.
//!
//! Every kernel is `c * shape(|r|)`. For the indicator and gaussian families
//! the shape has unit mass, so the default `c = 1` gives a probability
//! density. The truncated fractional shape is `|r|^{-(n+2s)}` restricted to
//! `r_min <= |r| <= r_max`; its default `c` is chosen so the total mass is one
//! whenever the cutoffs make that possible.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::quad;

/// Ratio of peak density below which the gaussian tail is dropped.
pub const GAUSSIAN_TAIL_RATIO: f64 = 1e-16;

const QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Indicator,
    Gaussian,
    FractionalTruncated,
}

impl KernelFamily {
    pub const NAMES: [&'static str; 3] = ["indicator", "gaussian", "fractional"];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "indicator" => Some(Self::Indicator),
            "gaussian" => Some(Self::Gaussian),
            "fractional" | "fractional-truncated" => Some(Self::FractionalTruncated),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Indicator => "indicator",
            Self::Gaussian => "gaussian",
            Self::FractionalTruncated => "fractional",
        }
    }
}

/// Common interface of radial kernels that can be assembled into a
/// discrete operator.
pub trait RadialProfile: Sync {
    /// Spatial dimension the density lives in.
    fn dim(&self) -> usize;
    /// Density at distance `r >= 0`.
    fn profile(&self, r: f64) -> f64;
    /// Radius beyond which the density vanishes, if any.
    fn reach(&self) -> Option<f64>;
    /// Mass in the half space `{z_1 > d}`, `d >= 0`.
    fn half_space_mass(&self, d: f64) -> f64;
    /// Smallest length scale a grid must resolve.
    fn resolution_scale(&self) -> Option<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialKernel {
    family: KernelFamily,
    dim: usize,
    support_radius: f64,
    width: f64,
    order: f64,
    inner_cutoff: Option<f64>,
    outer_cutoff: Option<f64>,
    explicit_norm: Option<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("kernel dimension {dim}; only 1 and 2 are supported")))
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}

impl RadialKernel {
    /// `c/(2δ)` on `[-δ, δ]` in 1D, `c/(πδ²)` on the disk of radius `δ` in 2D.
    pub fn indicator(dim: usize, delta: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::raw(KernelFamily::Indicator, dim, positive("delta", delta)?, 0.0, 0.0, None, None))
    }

    pub fn gaussian(dim: usize, sigma: f64) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::raw(KernelFamily::Gaussian, dim, 0.0, positive("sigma", sigma)?, 0.0, None, None))
    }

    /// `c |r|^{-(n+2s)}` on `r_min <= |r| <= r_max`.
    ///
    /// `r_min` may be left unset here; operator assembly then regularizes the
    /// kernel at one grid spacing.
    pub fn fractional(dim: usize, order: f64, inner_cutoff: Option<f64>, outer_cutoff: Option<f64>) -> Result<Self> {
        check_dim(dim)?;
        if !(order > 0.0 && order < 1.0) {
            return Err(Error::param("s", format!("order must lie in (0,1), got {order}")));
        }
        if let Some(r) = inner_cutoff {
            positive("rmin", r)?;
        }
        if let Some(r) = outer_cutoff {
            positive("rmax", r)?;
            if let Some(rmin) = inner_cutoff {
                if r <= rmin {
                    return Err(Error::param("rmax", format!("outer cutoff {r} must exceed inner cutoff {rmin}")));
                }
            }
        }
        Ok(Self::raw(KernelFamily::FractionalTruncated, dim, 0.0, 0.0, order, inner_cutoff, outer_cutoff))
    }

    fn raw(
        family: KernelFamily,
        dim: usize,
        support_radius: f64,
        width: f64,
        order: f64,
        inner_cutoff: Option<f64>,
        outer_cutoff: Option<f64>,
    ) -> Self {
        Self { family, dim, support_radius, width, order, inner_cutoff, outer_cutoff, explicit_norm: None }
    }

    /// Overrides the unit-mass default of `c`.
    pub fn with_normalization(mut self, c: f64) -> Result<Self> {
        self.explicit_norm = Some(positive("c", c)?);
        Ok(self)
    }

    /// Sets the inner cutoff of a fractional kernel if it has none.
    pub fn with_default_inner_cutoff(mut self, r_min: f64) -> Self {
        if self.family == KernelFamily::FractionalTruncated && self.inner_cutoff.is_none() {
            self.inner_cutoff = Some(r_min);
        }
        self
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn inner_cutoff(&self) -> Option<f64> {
        self.inner_cutoff
    }

    pub fn outer_cutoff(&self) -> Option<f64> {
        self.outer_cutoff
    }

    /// Effective multiplicative constant `c`.
    pub fn normalization(&self) -> f64 {
        if let Some(c) = self.explicit_norm {
            return c;
        }
        match self.family {
            KernelFamily::Indicator | KernelFamily::Gaussian => 1.0,
            KernelFamily::FractionalTruncated => match self.fractional_shape_mass() {
                Some(m) => 1.0 / m,
                None => 1.0,
            },
        }
    }

    fn gaussian_reach(&self) -> f64 {
        self.width * (2.0 * (1.0 / GAUSSIAN_TAIL_RATIO).ln()).sqrt()
    }

    /// Mass of `|r|^{-(n+2s)}` over the annulus, `None` without an inner cutoff.
    fn fractional_shape_mass(&self) -> Option<f64> {
        let r_min = self.inner_cutoff?;
        let two_s = 2.0 * self.order;
        let outer = self.outer_cutoff.map_or(0.0, |r| r.powf(-two_s));
        let radial = (r_min.powf(-two_s) - outer) / two_s;
        // surface measure of the unit sphere: 2 in 1D, 2π in 2D
        let sphere = if self.dim == 1 { 2.0 } else { 2.0 * PI };
        Some(sphere * radial)
    }

    /// Density at the point `r` (length must equal the dimension).
    pub fn eval(&self, r: &[f64]) -> f64 {
        debug_assert_eq!(r.len(), self.dim);
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.profile_at(norm)
    }

    fn profile_at(&self, r: f64) -> f64 {
        let c = self.normalization();
        match self.family {
            KernelFamily::Indicator => {
                // relative slack so lattice offsets k*h that equal δ in exact
                // arithmetic stay inside the support
                if r <= self.support_radius * (1.0 + 1e-12) {
                    let volume = if self.dim == 1 { 2.0 * self.support_radius } else { PI * self.support_radius.powi(2) };
                    c / volume
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => {
                if r > self.gaussian_reach() {
                    return 0.0;
                }
                let var = self.width * self.width;
                let lead = if self.dim == 1 { (2.0 * PI * var).sqrt() } else { 2.0 * PI * var };
                c * (-r * r / (2.0 * var)).exp() / lead
            }
            KernelFamily::FractionalTruncated => {
                if self.inner_cutoff.is_some_and(|rm| r < rm) || self.outer_cutoff.is_some_and(|rm| r > rm) {
                    return 0.0;
                }
                c * r.powf(-(self.dim as f64 + 2.0 * self.order))
            }
        }
    }

    /// Total mass over the support.
    pub fn mass(&self) -> Result<f64> {
        match self.family {
            KernelFamily::Indicator | KernelFamily::Gaussian => Ok(self.normalization()),
            KernelFamily::FractionalTruncated => match self.fractional_shape_mass() {
                Some(m) => Ok(self.normalization() * m),
                None => Err(Error::NonIntegrable(format!(
                    "fractional kernel of order {} without inner cutoff has infinite mass at the origin",
                    self.order
                ))),
            },
        }
    }

    /// Integral of the 2D density along the transverse line at offset `w`,
    /// restricted to `|p| <= slice` when given.
    fn line_integral_2d(&self, w: f64, slice: Option<f64>) -> f64 {
        let w = w.abs();
        let c = self.normalization();
        match self.family {
            KernelFamily::Indicator => {
                let d = self.support_radius;
                if w > d {
                    return 0.0;
                }
                let half = (d * d - w * w).sqrt();
                let half = slice.map_or(half, |a| a.min(half));
                2.0 * half * c / (PI * d * d)
            }
            KernelFamily::Gaussian => {
                if w > self.gaussian_reach() {
                    return 0.0;
                }
                let s = self.width;
                let frac = slice.map_or(1.0, |a| libm::erf(a / (s * SQRT_2)));
                c * (-w * w / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s) * frac
            }
            KernelFamily::FractionalTruncated => self.fractional_line_integral(w, slice),
        }
    }

    fn fractional_line_integral(&self, w: f64, slice: Option<f64>) -> f64 {
        let c = self.normalization();
        let expo = -(1.0 + self.order);
        let r_min = self.inner_cutoff.unwrap_or(0.0);
        if let Some(r_max) = self.outer_cutoff {
            if w > r_max {
                return 0.0;
            }
        }
        let p_lo = if w < r_min { (r_min * r_min - w * w).sqrt() } else { 0.0 };
        let mut p_hi = self.outer_cutoff.map_or(f64::INFINITY, |r| (r * r - w * w).max(0.0).sqrt());
        if let Some(a) = slice {
            p_hi = p_hi.min(a);
        }
        if p_hi <= p_lo {
            return 0.0;
        }
        let f = |p: f64| (w * w + p * p).powf(expo);
        let finite = |hi: f64| quad::integrate(&f, p_lo, hi, QUAD_TOL);
        let half = if p_hi.is_finite() {
            finite(p_hi)
        } else {
            // split at P and map the tail [P, ∞) to (0, 1/P] via p = 1/u
            let p_split = p_lo.max(w).max(r_min).max(1e-12);
            let tail = |u: f64| {
                if u <= 0.0 {
                    0.0
                } else {
                    (w * w * u * u + 1.0).powf(expo) * u.powf(2.0 * self.order)
                }
            };
            finite(p_split) + quad::integrate(&tail, 0.0, 1.0 / p_split, QUAD_TOL)
        };
        2.0 * c * half
    }
}

impl RadialProfile for RadialKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn profile(&self, r: f64) -> f64 {
        self.profile_at(r)
    }

    fn reach(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Indicator => Some(self.support_radius),
            KernelFamily::Gaussian => Some(self.gaussian_reach()),
            KernelFamily::FractionalTruncated => self.outer_cutoff,
        }
    }

    fn half_space_mass(&self, d: f64) -> f64 {
        let d = d.max(0.0);
        let c = self.normalization();
        match (self.family, self.dim) {
            (KernelFamily::Indicator, 1) => c * (self.support_radius - d).max(0.0) / (2.0 * self.support_radius),
            (KernelFamily::Indicator, _) => {
                let r = self.support_radius;
                if d >= r {
                    return 0.0;
                }
                let segment = r * r * (d / r).acos() - d * (r * r - d * d).sqrt();
                c * segment / (PI * r * r)
            }
            (KernelFamily::Gaussian, _) => c * 0.5 * libm::erfc(d / (self.width * SQRT_2)),
            (KernelFamily::FractionalTruncated, 1) => {
                let lo = self.inner_cutoff.map_or(d, |rm| rm.max(d));
                let two_s = 2.0 * self.order;
                if lo == 0.0 {
                    return f64::INFINITY;
                }
                let outer = self.outer_cutoff.map_or(0.0, |r| r.powf(-two_s));
                c * ((lo.powf(-two_s) - outer) / two_s).max(0.0)
            }
            (KernelFamily::FractionalTruncated, _) => {
                if self.inner_cutoff.is_none() && d == 0.0 {
                    return f64::INFINITY;
                }
                let f = |w: f64| self.line_integral_2d(w, None);
                let r_min = self.inner_cutoff.unwrap_or(0.0);
                match self.outer_cutoff {
                    Some(r_max) => quad::integrate_with_breaks(&f, d, r_max.max(d), &[r_min], 1e-11),
                    None => {
                        // beyond w >= r_min every transverse line misses the hole:
                        // ∫ (w²+p²)^{-1-s} dp = C_s w^{-1-2s}
                        let split = d.max(r_min);
                        let s = self.order;
                        let cs = PI.sqrt() * libm::tgamma(s + 0.5) / libm::tgamma(s + 1.0);
                        let near = quad::integrate(&f, d, split, 1e-11);
                        near + c * cs * split.powf(-2.0 * s) / (2.0 * s)
                    }
                }
            }
        }
    }

    fn resolution_scale(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Indicator => Some(self.support_radius),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum MarginalRepr {
    Identity,
    ClosedForm,
    Table { spacing: f64, values: Vec<f64> },
}

/// One-dimensional kernel obtained by integrating a radial kernel over its
/// transverse coordinates, optionally only over `|p| <= slice_half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalKernel1D {
    source: RadialKernel,
    slice_half_width: Option<f64>,
    repr: MarginalRepr,
}

/// Integrates `kernel` over the transverse coordinates.
///
/// `table_spacing` is the node spacing used when no closed form exists
/// (2D fractional kernels); values between nodes are interpolated linearly.
pub fn marginal_1d(kernel: &RadialKernel, slice_half_width: Option<f64>, table_spacing: f64) -> Result<MarginalKernel1D> {
    if let Some(a) = slice_half_width {
        positive("slice_half_width", a)?;
    }
    check_dim(kernel.dim)?;
    if kernel.dim == 1 {
        return Ok(MarginalKernel1D { source: kernel.clone(), slice_half_width: None, repr: MarginalRepr::Identity });
    }
    let repr = match kernel.family {
        KernelFamily::Indicator | KernelFamily::Gaussian => MarginalRepr::ClosedForm,
        KernelFamily::FractionalTruncated => {
            positive("table_spacing", table_spacing)?;
            if kernel.inner_cutoff.is_none() {
                return Err(Error::NonIntegrable("marginal of a fractional kernel needs an inner cutoff".into()));
            }
            let Some(r_max) = kernel.outer_cutoff else {
                return Err(Error::Unsupported("marginal of a 2D fractional kernel needs an outer cutoff".into()));
            };
            // resolve the cusp of the marginal at w = r_min
            let r_min = kernel.inner_cutoff.unwrap_or(r_max);
            let table_spacing = table_spacing.min(r_min / 32.0);
            let count = (r_max / table_spacing).ceil() as usize + 1;
            // not monotone: the marginal rises on [0, r_min] where the hole shrinks
            let values: Vec<f64> =
                (0..count).map(|k| kernel.line_integral_2d(k as f64 * table_spacing, slice_half_width)).collect();
            MarginalRepr::Table { spacing: table_spacing, values }
        }
    };
    Ok(MarginalKernel1D { source: kernel.clone(), slice_half_width, repr })
}

impl MarginalKernel1D {
    pub fn source(&self) -> &RadialKernel {
        &self.source
    }

    pub fn slice_half_width(&self) -> Option<f64> {
        self.slice_half_width
    }

    /// Table node spacing, when the profile is tabulated.
    pub fn table_spacing(&self) -> Option<f64> {
        match &self.repr {
            MarginalRepr::Table { spacing, .. } => Some(*spacing),
            _ => None,
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        let w = w.abs();
        match &self.repr {
            MarginalRepr::Identity => self.source.profile_at(w),
            MarginalRepr::ClosedForm => self.source.line_integral_2d(w, self.slice_half_width),
            MarginalRepr::Table { spacing, values } => {
                let x = w / spacing;
                let k = x.floor() as usize;
                if k + 1 >= values.len() {
                    return if k + 1 == values.len() && x == k as f64 { values[k] } else { 0.0 };
                }
                let frac = x - k as f64;
                values[k] * (1.0 - frac) + values[k + 1] * frac
            }
        }
    }

    pub fn mass(&self) -> Result<f64> {
        match &self.repr {
            MarginalRepr::Identity => self.source.mass(),
            MarginalRepr::ClosedForm => match (self.source.family, self.slice_half_width) {
                (_, None) => self.source.mass(),
                (KernelFamily::Gaussian, Some(a)) => {
                    Ok(self.source.normalization() * libm::erf(a / (self.source.width * SQRT_2)))
                }
                (_, Some(a)) => {
                    let d = self.source.support_radius;
                    let f = |w: f64| self.eval(w);
                    let kink = (d * d - a * a).max(0.0).sqrt();
                    Ok(2.0 * quad::integrate_with_breaks(&f, 0.0, d, &[kink], 1e-13))
                }
            },
            MarginalRepr::Table { spacing, values } => {
                // exact integral of the piecewise-linear interpolant
                let inner: f64 = values.windows(2).map(|p| 0.5 * (p[0] + p[1]) * spacing).sum();
                Ok(2.0 * inner)
            }
        }
    }
}

impl RadialProfile for MarginalKernel1D {
    fn dim(&self) -> usize {
        1
    }

    fn profile(&self, r: f64) -> f64 {
        self.eval(r)
    }

    fn reach(&self) -> Option<f64> {
        match &self.repr {
            MarginalRepr::Table { spacing, values } => Some(spacing * (values.len() - 1) as f64),
            _ => self.source.reach(),
        }
    }

    fn half_space_mass(&self, d: f64) -> f64 {
        match &self.repr {
            MarginalRepr::Identity => self.source.half_space_mass(d),
            MarginalRepr::ClosedForm if self.slice_half_width.is_none() => self.source.half_space_mass(d),
            _ => {
                let reach = self.reach().unwrap_or(d);
                if d >= reach {
                    return 0.0;
                }
                let f = |w: f64| self.eval(w);
                quad::integrate(&f, d.max(0.0), reach, 1e-13)
            }
        }
    }

    fn resolution_scale(&self) -> Option<f64> {
        self.source.resolution_scale()
    }
}
