//! Uniform radial grids with quadrature weights for the measure xi^{d-1} dxi.
//!
//! Nodes are evenly spaced and include the origin. Integration weights are
//! composite Simpson (with a 3/8 closure when the interval count is odd),
//! with the xi^{d-1} factor folded in and Euler-Maclaurin h^4 end corrections
//! applied at both boundaries. The corrections keep polynomial exactness and
//! push the boundary error of smooth decaying integrands to O(h^6).

use crate::error::{Error, Result};
use crate::stencil;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Spatial dimension tag for radial problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    D2,
    D3,
}

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        match d {
            2 => Ok(Dim::D2),
            3 => Ok(Dim::D3),
            other => Err(Error::InvalidDimension(other)),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Dim::D2 => 2,
            Dim::D3 => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.as_usize() as f64
    }
}

/// Discretized radial coordinate with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub d: Dim,
    pub r_max: f64,
    pub n: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub type GridRef = Arc<RadialGrid>;

/// Relative tail weight |p(r_max)| r_max^{d-1} above which an integral is
/// flagged as potentially under-truncated.
pub const TAIL_TOLERANCE: f64 = 1e-8;

impl RadialGrid {
    /// Build a grid with `n` nodes on [0, r_max].
    pub fn new(d: usize, r_max: f64, n: usize) -> Result<GridRef> {
        let d = Dim::new(d)?;
        if !(r_max > 0.0) {
            return Err(Error::NonPositiveRadius(r_max));
        }
        if n < 16 {
            return Err(Error::GridTooSmall(n));
        }
        let h = r_max / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let weights = quadrature_weights(&nodes, h, d);
        Ok(Arc::new(RadialGrid {
            d,
            r_max,
            n,
            nodes,
            weights,
        }))
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / (self.n - 1) as f64
    }

    /// Integral of `values` against xi^{d-1} dxi over [0, r_max].
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.n);
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// True when the integrand still carries weight at the outer boundary.
    pub fn tail_warning(&self, values: &[f64]) -> bool {
        let v = values[self.n - 1].abs();
        v * self.r_max.powi(self.d.as_usize() as i32 - 1) > TAIL_TOLERANCE
    }
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let m = n - 1; // interval count
    let mut w = vec![0.0; n];
    let add_simpson = |w: &mut [f64], lo: usize, hi: usize, h: f64| {
        // composite Simpson over an even number of intervals [lo, hi]
        w[lo] += h / 3.0;
        w[hi] += h / 3.0;
        let mut i = lo + 1;
        while i < hi {
            w[i] += if (i - lo) % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
            i += 1;
        }
    };
    if m % 2 == 0 {
        add_simpson(&mut w, 0, m, h);
    } else {
        let k = m - 3;
        if k > 0 {
            add_simpson(&mut w, 0, k, h);
        }
        // 3/8 rule on the last three intervals
        w[k] += 3.0 * h / 8.0;
        w[k + 1] += 9.0 * h / 8.0;
        w[k + 2] += 9.0 * h / 8.0;
        w[k + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Simpson x xi^{d-1} with h^4 boundary corrections.
///
/// For F = xi^{d-1} p the composite rule satisfies
/// S = I + (h^4/180)[F'''(b) - F'''(0)] + O(h^6); both boundary terms are
/// removed. At the origin F'''(0) = 3 p''(0) for d = 2 (even p) and vanishes
/// for d = 3; at the outer end F''' is taken from a one-sided stencil.
fn quadrature_weights(nodes: &[f64], h: f64, d: Dim) -> Vec<f64> {
    let n = nodes.len();
    let dm1 = d.as_usize() as i32 - 1;
    let mut w: Vec<f64> = simpson_weights(n, h)
        .into_iter()
        .zip(nodes)
        .map(|(s, &x)| s * x.powi(dm1))
        .collect();
    let c4 = h.powi(4) / 180.0;
    if d == Dim::D2 {
        // +c4 * 3 p''(0), using the folded even-parity stencil for p''(0)
        let s = 3.0 * c4 / (12.0 * h * h);
        w[0] += s * -30.0;
        w[1] += s * 32.0;
        w[2] += s * -2.0;
    }
    // -c4 * F'''(r_max) via a 7-point one-sided stencil on F = xi^{d-1} p
    let xs: Vec<f64> = (0..7).map(|k| nodes[n - 7 + k]).collect();
    let wf = stencil::fornberg(3, nodes[n - 1], &xs);
    for (k, cf) in wf.iter().enumerate() {
        let j = n - 7 + k;
        w[j] -= c4 * cf * nodes[j].powi(dm1);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_reproduce_constant_moment() {
        // (2, 1.0, 64) -> r_max^2/2 ; (3, 2.0, 128) -> r_max^3/3
        let g = RadialGrid::new(2, 1.0, 64).unwrap();
        assert_relative_eq!(g.weights.iter().sum::<f64>(), 0.5, max_relative = 1e-12);
        let g = RadialGrid::new(3, 2.0, 128).unwrap();
        assert_relative_eq!(g.weights.iter().sum::<f64>(), 8.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_integral_to_1e10() {
        // int_0^30 e^{-2 xi^2} xi dxi = 1/4
        let g = RadialGrid::new(2, 30.0, 2048).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|&x| (-2.0 * x * x).exp()).collect();
        assert!((g.integrate(&f) - 0.25).abs() < 1e-10);
    }

    #[test]
    fn polynomial_exactness() {
        // d=2: p = xi^4 integrates xi^5 exactly; d=3: p = xi^3 likewise
        let g = RadialGrid::new(2, 2.0, 101).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|&x| x.powi(4)).collect();
        assert_relative_eq!(g.integrate(&f), 64.0 / 6.0, max_relative = 1e-12);
        let g = RadialGrid::new(3, 2.0, 101).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|&x| x.powi(3)).collect();
        assert_relative_eq!(g.integrate(&f), 64.0 / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn odd_interval_count_still_exact() {
        let g = RadialGrid::new(2, 1.0, 64).unwrap(); // 63 intervals
        let f: Vec<f64> = g.nodes.iter().map(|&x| x * x).collect();
        assert_relative_eq!(g.integrate(&f), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(RadialGrid::new(4, 1.0, 64).is_err());
        assert!(RadialGrid::new(2, -1.0, 64).is_err());
        assert!(RadialGrid::new(2, 1.0, 8).is_err());
    }

    #[test]
    fn tail_warning_fires_on_undertruncated_domain() {
        let g = RadialGrid::new(2, 3.0, 64).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|&x| (-x).exp()).collect();
        assert!(g.tail_warning(&f));
        let g = RadialGrid::new(2, 30.0, 256).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|&x| (-x).exp()).collect();
        assert!(!g.tail_warning(&f));
    }
}
