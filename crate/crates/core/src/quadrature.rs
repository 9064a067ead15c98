//! Gauss-Hermite and Gauss-Legendre rules, and a piecewise rule for
//! expectations of functions of a normal variable that may have kinks.
//!
//! Gauss-Hermite is spectrally accurate only for smooth integrands. For
//! kernels such as `|x - y|` the real line is split at the kinks and each
//! piece is integrated with Gauss-Legendre against the normal density.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights for `int f(x) exp(-x^2) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// Shared order-64 rule.
    pub fn order64() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(64))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// `E f(N)` for standard normal `N`.
    pub fn expect_standard_normal<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        self.integrate(|x| f(s2 * x)) / PI.sqrt()
    }
}

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn order32() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(32))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// Piecewise Gauss-Legendre rule for `E f(mean + sd * Z)`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct NormalQuadrature {
    /// Integration range in standard deviations.
    pub half_width: f64,
    /// Maximum panel width in standard deviations.
    pub panel: f64,
    /// Geometric refinement levels next to each kink, for integrands whose
    /// derivative is unbounded there.
    pub grade_levels: u32,
}

impl Default for NormalQuadrature {
    fn default() -> Self {
        Self {
            half_width: 14.0,
            panel: 1.0,
            grade_levels: 0,
        }
    }
}

impl NormalQuadrature {
    pub fn graded(levels: u32) -> Self {
        Self {
            grade_levels: levels,
            ..Self::default()
        }
    }

    fn breakpoints(&self, kinks_z: &[f64]) -> Vec<f64> {
        let h = self.half_width;
        let steps = (2.0 * h / self.panel).ceil() as usize;
        let mut pts: Vec<f64> = (0..=steps).map(|k| -h + 2.0 * h * k as f64 / steps as f64).collect();
        for &k in kinks_z {
            if k > -h && k < h {
                pts.push(k);
                let mut d = self.panel / 2.0;
                for _ in 0..self.grade_levels {
                    for p in [k - d, k + d] {
                        if p > -h && p < h {
                            pts.push(p);
                        }
                    }
                    d /= 2.0;
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }

    /// `E f(mean + sd * Z)`; `kinks` are given in the original scale.
    pub fn expect<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, kinks: &[f64], f: F) -> f64 {
        if sd == 0.0 {
            return f(mean);
        }
        let kinks_z: Vec<f64> = kinks.iter().map(|k| (k - mean) / sd).collect();
        let pts = self.breakpoints(&kinks_z);
        let rule = GaussLegendre::order32();
        let norm = 1.0 / (2.0 * PI).sqrt();
        pts.windows(2)
            .map(|w| rule.integrate(w[0], w[1], |z| norm * (-0.5 * z * z).exp() * f(mean + sd * z)))
            .sum()
    }
}
