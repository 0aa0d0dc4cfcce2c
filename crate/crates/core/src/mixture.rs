//! The gamma mixture model GM(θ).
//!
//! θ = (π₁..π_m, α₁..α_m, λ): `m` gamma components with weights π, shapes
//! α, and one shared rate λ. Besides the usual density/CDF/mean/sampling
//! surface, this module provides the two derived objects the Gini
//! formulas are built on:
//!
//! * the length-biased companion θ* (weights π*ⱼ ∝ πⱼαⱼ, shapes α+1,
//!   same rate), the law of `X*` obtained by reweighting by `t/E(X)`;
//! * the CDF of the independent ratio `X/(X+X*)`, a mixture of
//!   Beta(αᵢ, αⱼ+1) laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{self, SeriesControl};

/// Weight-sum slack accepted on input; weights are renormalized to sum 1.
const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Validated parameters of a gamma mixture.
///
/// Serializes as `{"weights": [...], "shapes": [...], "rate": r}`;
/// deserialization runs the same validation as [`MixtureParams::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixtureParams")]
pub struct MixtureParams {
    weights: Vec<f64>,
    shapes: Vec<f64>,
    rate: f64,
}

#[derive(Deserialize)]
struct RawMixtureParams {
    weights: Vec<f64>,
    shapes: Vec<f64>,
    rate: f64,
}

impl TryFrom<RawMixtureParams> for MixtureParams {
    type Error = Error;

    fn try_from(raw: RawMixtureParams) -> Result<Self> {
        MixtureParams::new(raw.weights, raw.shapes, raw.rate)
    }
}

impl MixtureParams {
    /// Validates and normalizes raw parameters.
    ///
    /// Requires m ≥ 1 components, matching weight/shape lengths, strictly
    /// positive weights, shapes, and rate, and a weight sum within 1e-9 of
    /// one. Weights are renormalized to sum exactly one. Duplicate or
    /// equal-shape components are accepted as-is, never merged.
    pub fn new(weights: Vec<f64>, shapes: Vec<f64>, rate: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("mixture needs at least one component"));
        }
        if weights.len() != shapes.len() {
            return Err(Error::domain(format!(
                "got {} weights but {} shapes",
                weights.len(),
                shapes.len()
            )));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::domain(format!("weight {i} must be positive, got {w}")));
            }
        }
        for (i, &a) in shapes.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::domain(format!("shape {i} must be positive, got {a}")));
            }
        }
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::domain(format!("rate must be positive, got {rate}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!(
                "weights must sum to 1 within {WEIGHT_SUM_TOL:e}, got {sum}"
            )));
        }
        let weights = weights.iter().map(|w| w / sum).collect();
        Ok(MixtureParams {
            weights,
            shapes,
            rate,
        })
    }

    /// Parses the JSON parameter-file format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::domain(format!("invalid parameter JSON: {e}")))
    }

    /// Number of components.
    pub fn m(&self) -> usize {
        self.weights.len()
    }

    /// Mixing proportions (sum to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Component shape parameters.
    pub fn shapes(&self) -> &[f64] {
        &self.shapes
    }

    /// Shared rate parameter.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Log-density at `x > 0`, via log-sum-exp over components.
    pub(crate) fn ln_pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::domain(format!("pdf requires x > 0, got {x}")));
        }
        let mut terms = Vec::with_capacity(self.m());
        for (&w, &a) in self.weights.iter().zip(&self.shapes) {
            let ln_g = a * self.rate.ln() - specfun::ln_gamma(a)? + (a - 1.0) * x.ln()
                - self.rate * x;
            terms.push(w.ln() + ln_g);
        }
        Ok(log_sum_exp(&terms))
    }

    /// Mixture density Σᵢ πᵢ g(x; αᵢ, λ) at `x > 0`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    /// Mixture CDF Σᵢ πᵢ P(αᵢ, λx) at `x ≥ 0`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::domain(format!("cdf requires x >= 0, got {x}")));
        }
        let ctl = SeriesControl::default();
        let mut acc = 0.0;
        for (&w, &a) in self.weights.iter().zip(&self.shapes) {
            acc += w * specfun::reg_inc_gamma_lower(a, self.rate * x, &ctl)?;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    /// Mean E(X) = Σᵢ πᵢαᵢ/λ.
    pub fn mean(&self) -> f64 {
        self.weighted_shape_sum() / self.rate
    }

    /// Σᵢ πᵢαᵢ (the mean in rate units).
    pub(crate) fn weighted_shape_sum(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.shapes)
            .map(|(w, a)| w * a)
            .sum()
    }

    /// Draws `n` i.i.d. variates, deterministically in `seed`.
    ///
    /// The stream is a ChaCha8 generator seeded with `seed`; labels come
    /// from inverse-CDF on the cumulative weights, gamma variates from the
    /// Marsaglia–Tsang method (with the `draw(α+1)·U^(1/α)` boost for
    /// shapes below one). Every returned value is strictly positive.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let k = self.draw_label(&mut rng);
            loop {
                let x = sample_gamma(&mut rng, self.shapes[k]) / self.rate;
                if x > 0.0 && x.is_finite() {
                    out.push(x);
                    break;
                }
            }
        }
        out
    }

    fn draw_label<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.len() - 1
    }

    /// The length-biased companion θ*: weights π*ⱼ = πⱼαⱼ / Σₖπₖαₖ,
    /// shapes αⱼ + 1, same rate.
    pub fn length_biased(&self) -> LengthBiasedParams {
        let total = self.weighted_shape_sum();
        let weights: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.shapes)
            .map(|(w, a)| w * a / total)
            .collect();
        let shapes: Vec<f64> = self.shapes.iter().map(|a| a + 1.0).collect();
        let params = MixtureParams::new(weights, shapes, self.rate)
            .expect("length-biased parameters are valid by construction");
        LengthBiasedParams(params)
    }

    /// CDF of the independent ratio X/(X+X*) at `z ∈ [0, 1]`:
    /// Σᵢⱼ πᵢ π*ⱼ I_z(αᵢ, αⱼ+1).
    pub fn ratio_cdf(&self, z: f64) -> Result<f64> {
        if !z.is_finite() || !(0.0..=1.0).contains(&z) {
            return Err(Error::domain(format!(
                "ratio_cdf requires z in [0, 1], got {z}"
            )));
        }
        let ctl = SeriesControl::default();
        let star = self.length_biased();
        let mut acc = 0.0;
        for (&wi, &ai) in self.weights.iter().zip(&self.shapes) {
            for (&wj, &aj) in star.params().weights.iter().zip(&self.shapes) {
                acc += wi * wj * specfun::reg_inc_beta(z, ai, aj + 1.0, &ctl)?;
            }
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    /// Laplace transform E[e^(−xX)] = Σᵢ πᵢ (λ/(x+λ))^(αᵢ), for `x ≥ 0`.
    pub fn laplace_transform(&self, x: f64) -> f64 {
        assert!(
            x.is_finite() && x >= 0.0,
            "laplace_transform requires x >= 0, got {x}"
        );
        self.weights
            .iter()
            .zip(&self.shapes)
            .map(|(w, a)| w * (self.rate / (x + self.rate)).powf(*a))
            .sum()
    }
}

/// Parameters of the length-biased companion distribution.
///
/// Same layout as [`MixtureParams`]; the shapes are the originals plus one
/// and the weights are proportional to πⱼαⱼ.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthBiasedParams(MixtureParams);

impl LengthBiasedParams {
    /// The underlying mixture parameters of X*.
    pub fn params(&self) -> &MixtureParams {
        &self.0
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// One standard normal variate by the Marsaglia polar method.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Gamma(shape, 1) variate. Marsaglia–Tsang for shape ≥ 1, boosted draw
/// for shape < 1.
fn sample_gamma<R: Rng>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let boosted = sample_gamma_mt(rng, shape + 1.0);
        let u = loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        };
        return boosted * u.powf(1.0 / shape);
    }
    sample_gamma_mt(rng, shape)
}

fn sample_gamma_mt<R: Rng>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape >= 1.0);
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.gen();
        // squeeze, then the exact acceptance check
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v;
        }
        if u > 0.0 && u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Parses the data-file format: one positive decimal per line.
pub fn parse_data(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 = line
            .parse()
            .map_err(|_| Error::domain(format!("line {}: not a number: {line:?}", lineno + 1)))?;
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::domain(format!(
                "line {}: observations must be positive, got {x}",
                lineno + 1
            )));
        }
        out.push(x);
    }
    Ok(out)
}
