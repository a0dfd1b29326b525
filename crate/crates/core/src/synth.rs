//! Planted instances drawn from the latent-summand noise models, and the
//! loss weighting under which each model's maximum likelihood estimate is an
//! SSNMF minimizer.
//!
//! Each observed entry is `X_γτ = Σ_i x_γiτ` with independent summands of
//! mean `A_γi S_iτ` (likewise for `Y` with `B`). Gaussian summands take the
//! model's `σ` as their variance.

use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, NonnegMatrix};
use crate::solver::LossPair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Summands `N(mean, sigma)` with `sigma` the variance.
    Gaussian {
        sigma: f64,
    },
    Poisson,
}

impl Noise {
    fn code(self) -> char {
        match self {
            Noise::Gaussian { .. } => 'g',
            Noise::Poisson => 'p',
        }
    }

    fn sample(self, mean: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Noise::Gaussian { sigma } => {
                Normal::new(mean, libm::sqrt(sigma)).expect("valid gaussian parameters").sample(rng)
            }
            Noise::Poisson => {
                if mean > 0.0 {
                    Poisson::new(mean).expect("positive intensity").sample(rng)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub data: Noise,
    pub labels: Noise,
    pub rank: usize,
}

impl NoiseModel {
    pub fn new(data: Noise, labels: Noise, rank: usize) -> Result<Self> {
        for noise in [data, labels] {
            if let Noise::Gaussian { sigma } = noise {
                if !sigma.is_finite() || sigma <= 0.0 {
                    return Err(Error::InvalidParameter { name: "sigma", reason: "must be positive" });
                }
            }
        }
        if rank == 0 {
            return Err(Error::InvalidParameter { name: "rank", reason: "must be at least 1" });
        }
        Ok(NoiseModel { data, labels, rank })
    }

    /// Builds a model from a two-letter code (`gg`, `gp`, `pg`, `pp`); the
    /// sigma of a Poisson block is ignored.
    pub fn from_code(code: &str, sigma1: f64, sigma2: f64, rank: usize) -> Result<Self> {
        let pick = |c: u8, sigma: f64| match c {
            b'g' => Ok(Noise::Gaussian { sigma }),
            b'p' => Ok(Noise::Poisson),
            _ => Err(Error::InvalidParameter { name: "noise", reason: "expected one of gg, gp, pg, pp" }),
        };
        match code.as_bytes() {
            [d, l] => Self::new(pick(*d, sigma1)?, pick(*l, sigma2)?, rank),
            _ => Err(Error::InvalidParameter { name: "noise", reason: "expected one of gg, gp, pg, pp" }),
        }
    }

    /// The noise model whose likelihood the given loss pair maximizes.
    pub fn matched_to(loss: LossPair, sigma1: f64, sigma2: f64, rank: usize) -> Result<Self> {
        let code = match loss {
            LossPair::FF => "gg",
            LossPair::FD => "gp",
            LossPair::DF => "pg",
            LossPair::DD => "pp",
        };
        Self::from_code(code, sigma1, sigma2, rank)
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.data.code(), self.labels.code())
    }
}

impl FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "poisson" {
            return Ok(Noise::Poisson);
        }
        s.strip_prefix("gaussian:")
            .and_then(|v| v.parse().ok())
            .map(|sigma| Noise::Gaussian { sigma })
            .ok_or(Error::InvalidParameter { name: "noise", reason: "expected `poisson` or `gaussian:<sigma>`" })
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Noise::Poisson => f.write_str("poisson"),
        }
    }
}

/// Supervision weight and loss pair of the maximum likelihood estimator:
///
/// | data / labels       | loss | λ            |
/// |---------------------|------|--------------|
/// | Gaussian / Gaussian | FF   | σ1 / σ2      |
/// | Gaussian / Poisson  | FD   | 2 r σ1       |
/// | Poisson / Gaussian  | DF   | 1 / (2 r σ2) |
/// | Poisson / Poisson   | DD   | 1            |
pub fn mle_lambda(noise: &NoiseModel) -> (f64, LossPair) {
    let r = noise.rank as f64;
    match (noise.data, noise.labels) {
        (Noise::Gaussian { sigma: s1 }, Noise::Gaussian { sigma: s2 }) => (s1 / s2, LossPair::FF),
        (Noise::Gaussian { sigma: s1 }, Noise::Poisson) => (2.0 * r * s1, LossPair::FD),
        (Noise::Poisson, Noise::Gaussian { sigma: s2 }) => (1.0 / (2.0 * r * s2), LossPair::DF),
        (Noise::Poisson, Noise::Poisson) => (1.0, LossPair::DD),
    }
}

pub const FACTOR_RANGE: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub a: NonnegMatrix,
    pub b: NonnegMatrix,
    pub s: NonnegMatrix,
    pub x: NonnegMatrix,
    pub y: NonnegMatrix,
    pub noise: NoiseModel,
    pub seed: u64,
}

fn uniform_factor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> NonnegMatrix {
    let (lo, hi) = FACTOR_RANGE;
    NonnegMatrix::new(Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..=hi))).expect("positive factor")
}

/// Sums `rank` independent summands per entry; Gaussian sums are clipped at 0.
fn observe(left: &NonnegMatrix, s: &NonnegMatrix, noise: Noise, rng: &mut ChaCha8Rng) -> NonnegMatrix {
    let m = Matrix::from_fn(left.rows(), s.cols(), |row, col| {
        let total: f64 = (0..left.cols()).map(|i| noise.sample(left.get(row, i) * s.get(i, col), rng)).sum();
        total.max(0.0)
    });
    NonnegMatrix::new(m).expect("clipped observations")
}

const STREAM_FACTORS: u64 = 0;
const STREAM_DATA: u64 = 1;
const STREAM_LABELS: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws ground-truth factors uniform on [0.5, 1.5] and observations from
/// the noise model.
pub fn generate(noise: &NoiseModel, n1: usize, k: usize, n2: usize, seed: u64) -> Result<PlantedInstance> {
    if n1 == 0 || k == 0 || n2 == 0 {
        return Err(Error::InvalidParameter { name: "dims", reason: "must be at least 1" });
    }
    let r = noise.rank;
    let mut rng = stream(seed, STREAM_FACTORS);
    let a = uniform_factor(n1, r, &mut rng);
    let b = uniform_factor(k, r, &mut rng);
    let s = uniform_factor(r, n2, &mut rng);
    let mut inst = PlantedInstance { x: a.clone(), y: b.clone(), a, b, s, noise: *noise, seed };
    inst.redraw_in_place(seed);
    Ok(inst)
}

impl PlantedInstance {
    /// Fresh observations of the same ground truth.
    pub fn redraw(&self, seed: u64) -> PlantedInstance {
        let mut out = self.clone();
        out.redraw_in_place(seed);
        out
    }

    fn redraw_in_place(&mut self, seed: u64) {
        self.x = observe(&self.a, &self.s, self.noise.data, &mut stream(seed, STREAM_DATA));
        self.y = observe(&self.b, &self.s, self.noise.labels, &mut stream(seed, STREAM_LABELS));
        self.seed = seed;
    }

    pub fn data_mean(&self) -> NonnegMatrix {
        self.a.product(&self.s)
    }

    pub fn label_mean(&self) -> NonnegMatrix {
        self.b.product(&self.s)
    }
}

/// Central differences `(F(Θ + h E_ij) − F(Θ − h E_ij)) / 2h`.
pub fn finite_diff_grad(f: impl Fn(&Matrix) -> f64, theta: &Matrix, step: f64) -> Matrix {
    let mut probe = theta.clone();
    Matrix::from_fn(theta.rows(), theta.cols(), |i, j| {
        let v = theta.get(i, j);
        probe.set(i, j, v + step);
        let up = f(&probe);
        probe.set(i, j, v - step);
        let down = f(&probe);
        probe.set(i, j, v);
        (up - down) / (2.0 * step)
    })
}
