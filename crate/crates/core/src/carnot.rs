//! Heisenberg group algebra and homogeneous constants.
//!
//! Points of `ℍ^{2n+1}` are stored as `(z, t)` with `z ∈ ℂⁿ` kept as
//! interleaved real and imaginary parts. The group law is
//! `(z,t)(z',t') = (z + z', t + t' + 2 Im⟨z, z'⟩)` with `⟨z, z'⟩ = Σ z_i conj(z'_i)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergPoint {
    z: Vec<f64>,
    pub t: f64,
}

impl HeisenbergPoint {
    /// `z` holds `2n` reals: `re(z_1), im(z_1), …`.
    pub fn new(z: Vec<f64>, t: f64) -> Result<Self> {
        if z.is_empty() || z.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!("coordinate array of length {} is not 2n, n ≥ 1", z.len())));
        }
        Ok(Self { z, t })
    }

    pub fn identity(n: usize) -> Self {
        Self { z: vec![0.0; 2 * n.max(1)], t: 0.0 }
    }

    /// Complex dimension `n`.
    pub fn n(&self) -> usize {
        self.z.len() / 2
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Euclidean norm `|z|`.
    pub fn z_norm(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn same_dim(p: &HeisenbergPoint, q: &HeisenbergPoint) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DimensionMismatch { left: p.n(), right: q.n() });
    }
    Ok(())
}

/// `Im⟨z, z'⟩ = Σ (b_i c_i − a_i d_i)` for `z_i = a_i + i b_i`, `z'_i = c_i + i d_i`.
fn im_hermitian(z: &[f64], w: &[f64]) -> f64 {
    z.chunks_exact(2).zip(w.chunks_exact(2)).map(|(a, b)| a[1] * b[0] - a[0] * b[1]).sum()
}

pub fn h_mul(p: &HeisenbergPoint, q: &HeisenbergPoint) -> Result<HeisenbergPoint> {
    same_dim(p, q)?;
    let z = p.z.iter().zip(&q.z).map(|(a, b)| a + b).collect();
    let t = p.t + q.t + 2.0 * im_hermitian(&p.z, &q.z);
    Ok(HeisenbergPoint { z, t })
}

pub fn h_inv(p: &HeisenbergPoint) -> HeisenbergPoint {
    HeisenbergPoint { z: p.z.iter().map(|v| -v).collect(), t: -p.t }
}

/// Homogeneous norm `N(z, t) = max{|z|, |t|^{1/2}}`.
pub fn homogeneous_norm(p: &HeisenbergPoint) -> f64 {
    p.z_norm().max(p.t.abs().sqrt())
}

/// `d∞(p, q) = N(p⁻¹ q)`.
pub fn d_infty(p: &HeisenbergPoint, q: &HeisenbergPoint) -> Result<f64> {
    Ok(homogeneous_norm(&h_mul(&h_inv(p), q)?))
}

/// `δ_r(z, t) = (r z, r² t)`.
pub fn dilate(r: f64, p: &HeisenbergPoint) -> Result<HeisenbergPoint> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("dilation factor {r} must be positive")));
    }
    Ok(HeisenbergPoint { z: p.z.iter().map(|v| r * v).collect(), t: r * r * p.t })
}

/// Dimensions of the strata `V_1 ⊕ … ⊕ V_s` of a Carnot algebra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CarnotSpec {
    strata_dims: Vec<usize>,
}

impl CarnotSpec {
    pub fn new(strata_dims: Vec<usize>) -> Result<Self> {
        if strata_dims.is_empty() || strata_dims.contains(&0) {
            return Err(Error::InvalidArgument("strata dimensions must be positive and s ≥ 1".into()));
        }
        Ok(Self { strata_dims })
    }

    /// `ℍ^{2n+1}`: strata `(2n, 1)`.
    pub fn heisenberg(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("Heisenberg group needs n ≥ 1".into()));
        }
        Self::new(vec![2 * n, 1])
    }

    pub fn step(&self) -> usize {
        self.strata_dims.len()
    }

    pub fn strata_dims(&self) -> &[usize] {
        &self.strata_dims
    }
}

/// `Q = Σ_j j · dim V_j`.
pub fn homogeneous_dimension(c: &CarnotSpec) -> usize {
    c.strata_dims.iter().enumerate().map(|(j, m)| (j + 1) * m).sum()
}

/// `Γ(k/2)` for a positive integer `k`, by the half-integer recurrence.
fn gamma_half(k: u32) -> f64 {
    let (mut g, mut arg2) = if k % 2 == 0 { (1.0, 2) } else { (PI.sqrt(), 1) };
    while arg2 < k {
        g *= arg2 as f64 / 2.0;
        arg2 += 2;
    }
    g
}

/// Volume of the Euclidean unit ball, `ω_a = π^{a/2} / Γ(1 + a/2)`, for
/// integer `a ≥ 0` (so that `Γ` is taken at a half-integer).
pub fn unit_ball_volume(a: f64) -> Result<f64> {
    if !(a >= 0.0) || a.fract() != 0.0 || a > 1000.0 {
        return Err(Error::Unsupported(format!("ω_a needs a non-negative integer a, got {a}")));
    }
    let k = a as u32;
    Ok(PI.powf(a / 2.0) / gamma_half(k + 2))
}

/// `α_{Q−1} = 2 ω_{2n−1} / ω_{Q−1}` for `ℍ^{2n+1}` (`Q = 2n + 2`).
pub fn hausdorff_constant_heisenberg(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("Heisenberg group needs n ≥ 1".into()));
    }
    let q = homogeneous_dimension(&CarnotSpec::heisenberg(n)?);
    Ok(2.0 * unit_ball_volume((2 * n - 1) as f64)? / unit_ball_volume((q - 1) as f64)?)
}
