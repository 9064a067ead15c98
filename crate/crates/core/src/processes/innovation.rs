//! Innovation laws. Every draw consumes exactly one `(u64, u64)` pair from
//! a [`CounterRng`], so index `u` always maps to the same value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{box_muller, unit_open, CounterRng};

fn default_max_k() -> u32 {
    30
}

/// Law of the i.i.d. innovations `eps_u`. All variants are symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    Normal { sd: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    Laplace { scale: f64 },
    /// `+-1` with equal probability.
    Rademacher,
    /// `P(X^2 = exp(-exp(exp k))) = 2^-k`, random sign, with the mass of
    /// `k >= max_k` folded into `k = max_k`.
    Counterexample {
        #[serde(default = "default_max_k")]
        max_k: u32,
    },
}

impl Default for Innovation {
    fn default() -> Self {
        Innovation::Normal { sd: 1.0 }
    }
}

/// Squared atom `exp(-exp(exp k))` in log space: returns `-exp(exp k)`.
pub fn counterexample_log_atom(k: u32) -> f64 {
    -(k as f64).exp().exp()
}

/// Probabilities of the atoms `k = 1..=max_k`.
pub fn counterexample_probs(max_k: u32) -> Vec<f64> {
    (1..=max_k)
        .map(|k| if k < max_k { 0.5f64.powi(k as i32) } else { 0.5f64.powi(max_k as i32 - 1) })
        .collect()
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidCoefficients(format!("{what} must be positive, got {v}")));
        match *self {
            Innovation::Normal { sd } if !(sd > 0.0) => bad("normal sd", sd),
            Innovation::Uniform { half_width } if !(half_width > 0.0) => bad("uniform half_width", half_width),
            Innovation::Laplace { scale } if !(scale > 0.0) => bad("laplace scale", scale),
            Innovation::Counterexample { max_k } if max_k == 0 => bad("max_k", 0.0),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn from_draw(&self, (a, b): (u64, u64)) -> f64 {
        match *self {
            Innovation::Normal { sd } => sd * box_muller(a, b),
            Innovation::Uniform { half_width } => half_width * (2.0 * unit_open(a) - 1.0),
            Innovation::Laplace { scale } => {
                let e = -unit_open(a).ln();
                if b >> 63 == 0 {
                    scale * e
                } else {
                    -scale * e
                }
            }
            Innovation::Rademacher => {
                if a >> 63 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Innovation::Counterexample { max_k } => {
                let k = (a.leading_zeros() + 1).min(max_k);
                let magnitude = (0.5 * counterexample_log_atom(k)).exp();
                if b >> 63 == 0 {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        self.from_draw(rng.next_draw())
    }

    /// `E eps^r` in closed form.
    pub fn raw_moment(&self, r: u32) -> f64 {
        if r == 0 {
            return 1.0;
        }
        if r % 2 == 1 {
            return 0.0;
        }
        match *self {
            Innovation::Normal { sd } => {
                let double_factorial: f64 = (1..r).step_by(2).map(f64::from).product();
                sd.powi(r as i32) * double_factorial
            }
            Innovation::Uniform { half_width } => half_width.powi(r as i32) / f64::from(r + 1),
            Innovation::Laplace { scale } => {
                let fact: f64 = (1..=r).map(f64::from).product();
                fact * scale.powi(r as i32)
            }
            Innovation::Rademacher => 1.0,
            Innovation::Counterexample { max_k } => {
                let half = f64::from(r / 2);
                counterexample_probs(max_k)
                    .iter()
                    .zip(1..=max_k)
                    .map(|(p, k)| p * (half * counterexample_log_atom(k)).exp())
                    .sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        self.raw_moment(2)
    }

    /// Cumulants 2..=4 (odd cumulants vanish by symmetry).
    pub fn cumulant(&self, r: u32) -> f64 {
        match r {
            1 | 3 => 0.0,
            2 => self.raw_moment(2),
            4 => self.raw_moment(4) - 3.0 * self.raw_moment(2).powi(2),
            _ => panic!("cumulant of order {r} not provided"),
        }
    }

    /// `||eps - eps'||_p` for an independent copy, when available in closed form.
    pub fn coupling_norm(&self, p: f64) -> Option<f64> {
        match *self {
            _ if p == 2.0 => Some((2.0 * self.variance()).sqrt()),
            Innovation::Normal { sd } => {
                // eps - eps' ~ N(0, 2 sd^2); E|N|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
                let s = sd * std::f64::consts::SQRT_2;
                let abs_moment = 2f64.powf(p / 2.0) * statrs::function::gamma::gamma((p + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt();
                Some(s * abs_moment.powf(1.0 / p))
            }
            Innovation::Rademacher => Some(2.0 * 0.5f64.powf(1.0 / p)),
            _ => None,
        }
    }
}
