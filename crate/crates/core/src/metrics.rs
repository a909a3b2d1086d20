//! Creativity statistics over before/after-learning energy samples.
//!
//! The before-learning (BL) energies are summarised by a shifted Poisson
//! model: `E ≈ μ_BL + (X - λ)` with `X ~ Poisson(λ)` and `λ = σ_BL²`. An
//! energy maps onto the Poisson axis through `k(E) = E - μ_BL + λ`, so the BL
//! mean sits at the mode.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::network::Fingerprint;
use crate::so::Stage;

/// One final energy, keyed by where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub stage: Stage,
    pub alpha: f64,
    pub seed: u64,
    pub reset: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    #[serde(rename = "mu_BL")]
    pub mu: f64,
    #[serde(rename = "sigma_BL")]
    pub sigma: f64,
    pub lambda: f64,
    pub sample_count: usize,
    pub min: f64,
    pub max: f64,
}

impl BaselineFit {
    /// Position of `energy` on the Poisson axis.
    #[inline]
    pub fn k(&self, energy: f64) -> f64 {
        energy - self.mu + self.lambda
    }
}

pub(crate) fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Sample mean and (n-1) standard deviation of the BL energies.
pub fn fit_baseline(energies: &[f64]) -> Result<BaselineFit> {
    if energies.len() < 2 {
        return Err(Error::Degenerate(format!(
            "baseline needs at least 2 samples, got {}",
            energies.len()
        )));
    }
    if let Some(bad) = energies.iter().find(|e| !e.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite energy {bad}")));
    }
    let (mu, sigma) = mean_and_sd(energies);
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("baseline energies have zero variance".into()));
    }
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BaselineFit {
        mu,
        sigma,
        lambda: sigma * sigma,
        sample_count: energies.len(),
        min,
        max,
    })
}

/// `λ^k e^{-λ} / Γ(k+1)`, extended to real `k`; zero for `k ≤ -1`.
pub fn poisson_pmf(k: f64, lambda: f64) -> f64 {
    if k <= -1.0 {
        return 0.0;
    }
    (k * lambda.ln() - lambda - ln_gamma(k + 1.0)).exp()
}

/// `P(X > ⌊k⌋)` for `X ~ Poisson(λ)`; 1 for negative `k`.
///
/// Equals `1 - Γ(⌊k⌋+1, λ)/⌊k⌋!`, evaluated as the regularized lower
/// incomplete gamma function to avoid cancellation.
pub fn poisson_upper_tail(k: f64, lambda: f64) -> f64 {
    if k < 0.0 {
        return 1.0;
    }
    gamma_lr(k.floor() + 1.0, lambda)
}

/// How ties on the Poisson lattice are credited by [`value_of_energy_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueConvention {
    /// `P(X ≥ ⌊k + ½⌋)`: the lattice point nearest to `k` counts as not
    /// better than `E`. Puts the BL mean at ≈0.5.
    #[default]
    AtLeastAsGood,
    /// `P(X > ⌊k⌋)`: the floor of `k` itself counts as better than `E`.
    StrictlyBetter,
}

/// Which factor multiplies convergence in the appropriateness score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppropriatenessRule {
    #[default]
    ValueTimesConvergence,
    NoveltyTimesConvergence,
}

/// `1 - Pois(k(E))/η`, with `η` the pmf at the BL mean; clamped to `[0, 1]`.
pub fn novelty_of_energy(energy: f64, fit: &BaselineFit) -> f64 {
    let eta = poisson_pmf(fit.lambda, fit.lambda);
    (1.0 - poisson_pmf(fit.k(energy), fit.lambda) / eta).clamp(0.0, 1.0)
}

/// Probability that a BL outcome is no better than `energy`.
pub fn value_of_energy(energy: f64, fit: &BaselineFit) -> f64 {
    value_of_energy_with(energy, fit, ValueConvention::default())
}

pub fn value_of_energy_with(energy: f64, fit: &BaselineFit, convention: ValueConvention) -> f64 {
    let k = fit.k(energy);
    match convention {
        ValueConvention::AtLeastAsGood => poisson_upper_tail(k - 0.5, fit.lambda),
        ValueConvention::StrictlyBetter => poisson_upper_tail(k, fit.lambda),
    }
}

/// Mean novelty and value over all AL samples of one learning rate.
pub fn aggregate_scores(energies: &[f64], fit: &BaselineFit, convention: ValueConvention) -> Result<(f64, f64)> {
    if energies.is_empty() {
        return Err(Error::Degenerate("no AL samples to aggregate".into()));
    }
    let n = energies.len() as f64;
    let novelty = energies.iter().map(|&e| novelty_of_energy(e, fit)).sum::<f64>() / n;
    let value = energies
        .iter()
        .map(|&e| value_of_energy_with(e, fit, convention))
        .sum::<f64>()
        / n;
    Ok((novelty, value))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    /// `1 - σ_AL/σ_BL`, clamped to `[0, 1]`.
    pub score: f64,
    /// Seed-averaged standard deviation of the AL energies.
    pub sigma_al: f64,
    pub clamped: bool,
}

/// `σ_AL` is the mean over seeds of the per-seed AL standard deviation.
pub fn convergence_score<S: AsRef<[f64]>>(groups: &[S], fit: &BaselineFit) -> Result<Convergence> {
    if groups.is_empty() || groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(Error::Degenerate("every seed needs at least one AL sample".into()));
    }
    let sigma_al = groups.iter().map(|g| mean_and_sd(g.as_ref()).1).sum::<f64>() / groups.len() as f64;
    let raw = 1.0 - sigma_al / fit.sigma;
    let clamped = !(0.0..=1.0).contains(&raw);
    if clamped {
        log::warn!("convergence {raw:.4} clamped (sigma_AL={sigma_al:.3}, sigma_BL={:.3})", fit.sigma);
    }
    Ok(Convergence {
        score: raw.clamp(0.0, 1.0),
        sigma_al,
        clamped,
    })
}

pub fn appropriateness_score(value: f64, convergence: f64) -> f64 {
    value * convergence
}

/// Fraction of energies strictly below `μ_BL - ε`.
pub fn above_chance(energies: &[f64], fit: &BaselineFit, epsilon: f64) -> Result<f64> {
    if energies.is_empty() {
        return Err(Error::Degenerate("no samples for above-chance probability".into()));
    }
    let cut = fit.mu - epsilon;
    Ok(energies.iter().filter(|&&e| e < cut).count() as f64 / energies.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    NotNovelNotAppropriate,
    NovelNotAppropriate,
    AppropriateNotNovel,
    NovelAndAppropriate,
}

impl Regime {
    pub fn from_flags(novel: bool, appropriate: bool) -> Self {
        match (novel, appropriate) {
            (false, false) => Regime::NotNovelNotAppropriate,
            (true, false) => Regime::NovelNotAppropriate,
            (false, true) => Regime::AppropriateNotNovel,
            (true, true) => Regime::NovelAndAppropriate,
        }
    }

    pub fn is_novel(self) -> bool {
        matches!(self, Regime::NovelNotAppropriate | Regime::NovelAndAppropriate)
    }

    pub fn is_appropriate(self) -> bool {
        matches!(self, Regime::AppropriateNotNovel | Regime::NovelAndAppropriate)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NotNovelNotAppropriate => "NotNovelNotAppropriate",
            Regime::NovelNotAppropriate => "NovelNotAppropriate",
            Regime::AppropriateNotNovel => "AppropriateNotNovel",
            Regime::NovelAndAppropriate => "NovelAndAppropriate",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Regime::NotNovelNotAppropriate,
            Regime::NovelNotAppropriate,
            Regime::AppropriateNotNovel,
            Regime::NovelAndAppropriate,
        ]
        .into_iter()
        .find(|r| r.to_string() == s)
        .ok_or_else(|| Error::config(format!("unknown regime {s:?}")))
    }
}

/// Thresholds used by [`classify_regime`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeRule {
    /// Minimum `c(α)` for an outcome to count as converged.
    pub min_convergence: f64,
    /// Minimum AL share of the dominant attractor for it to count as the product.
    pub min_share: f64,
    /// Lower edge of the BL distribution, in `σ_BL` below `μ_BL`.
    pub band_sigmas: f64,
}

impl Default for RegimeRule {
    fn default() -> Self {
        RegimeRule {
            min_convergence: 0.9,
            min_share: 0.5,
            band_sigmas: 2.0,
        }
    }
}

/// What the classifier looks at for one learning rate.
#[derive(Debug, Clone)]
pub struct RegimeEvidence<'a> {
    pub convergence: f64,
    pub mean_al_energy: f64,
    /// Most frequent AL final state and its share of AL resets.
    pub dominant: Option<(&'a Fingerprint, f64)>,
    /// Fixed-point BL final states.
    pub bl_attractors: &'a BTreeSet<Fingerprint>,
}

/// Four-way label for one learning rate.
///
/// Appropriate: converged, and the mean AL energy is below `μ_BL`.
///
/// Novel: when a dominant AL attractor exists it must be absent from the BL
/// set; on top of that, an outcome below the BL mean is novel only when it
/// lies beneath the BL distribution (`μ_BL - band_sigmas·σ_BL`). Without a
/// dominant attractor the outcome is novel only if its mean energy leaves
/// `[min BL, max BL]`.
pub fn classify_regime(evidence: &RegimeEvidence<'_>, fit: &BaselineFit, rule: &RegimeRule) -> Regime {
    let e = evidence.mean_al_energy;
    let converged = evidence.convergence >= rule.min_convergence;
    let appropriate = converged && e < fit.mu;
    let product = evidence.dominant.filter(|(_, share)| *share >= rule.min_share);
    let novel = match product {
        Some((fp, _)) => {
            let unvisited = !evidence.bl_attractors.contains(fp);
            let below_band = e < fit.mu - rule.band_sigmas * fit.sigma;
            unvisited && (e >= fit.mu || below_band)
        }
        None => e < fit.min || e > fit.max,
    };
    Regime::from_flags(novel, appropriate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::StateVector;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Poisson};

    fn fit_for(mu: f64, lambda: f64) -> BaselineFit {
        BaselineFit {
            mu,
            sigma: lambda.sqrt(),
            lambda,
            sample_count: 1000,
            min: mu - 4.0 * lambda.sqrt(),
            max: mu + 4.0 * lambda.sqrt(),
        }
    }

    fn cdf_by_summation(k: u64, lambda: f64) -> f64 {
        let mut term = (-lambda).exp();
        let mut sum = term;
        for i in 1..=k {
            term *= lambda / i as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn upper_tail_matches_summation() {
        for &lambda in &[9.0, 49.0, 100.0] {
            for k in 0..=200u64 {
                let want = 1.0 - cdf_by_summation(k, lambda);
                let got = poisson_upper_tail(k as f64 + 0.3, lambda);
                assert!((got - want).abs() < 1e-10, "k={k} λ={lambda}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn pmf_matches_integer_formula() {
        let lambda: f64 = 49.0;
        let mut p = (-lambda).exp();
        for k in 0..150u32 {
            if k > 0 {
                p *= lambda / k as f64;
            }
            assert!((poisson_pmf(k as f64, lambda) - p).abs() < 1e-12 * p.max(1e-300) + 1e-300);
        }
        assert_eq!(poisson_pmf(-1.0, lambda), 0.0);
    }

    #[test]
    fn novelty_zero_at_mean_and_high_in_tails() {
        let fit = fit_for(-127.2, 49.0);
        assert_eq!(novelty_of_energy(fit.mu, &fit), 0.0);
        assert!(novelty_of_energy(fit.mu + 10.0 * fit.sigma, &fit) >= 0.999);
        assert!(novelty_of_energy(fit.mu - 10.0 * fit.sigma, &fit) >= 0.999);
        assert!(novelty_of_energy(fit.mu + 500.0, &fit) <= 1.0);
    }

    #[test]
    fn value_near_half_at_mean() {
        let fit = fit_for(-127.2, 49.0);
        let v = value_of_energy(fit.mu, &fit);
        assert!((0.47..=0.53).contains(&v), "{v}");
        assert!(value_of_energy(fit.mu - 10.0 * fit.sigma, &fit) >= 0.999);
        assert!(value_of_energy(fit.mu + 10.0 * fit.sigma, &fit) <= 0.001);
    }

    #[test]
    fn value_non_increasing_in_energy() {
        let fit = fit_for(-127.2, 49.0);
        for conv in [ValueConvention::AtLeastAsGood, ValueConvention::StrictlyBetter] {
            let mut prev = f64::INFINITY;
            for i in 0..1000 {
                let e = fit.mu - 60.0 + 120.0 * i as f64 / 999.0;
                let v = value_of_energy_with(e, &fit, conv);
                assert!(v <= prev, "{conv:?} at {e}");
                prev = v;
            }
        }
    }

    #[test]
    fn baseline_round_trip_on_shifted_poisson() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pois = Poisson::new(49.0).unwrap();
        let energies: Vec<f64> = (0..1_000_000).map(|_| pois.sample(&mut rng) - 200.0).collect();
        let fit = fit_baseline(&energies).unwrap();
        assert!((fit.mu - (49.0 - 200.0)).abs() < 0.05, "{}", fit.mu);
        assert!((fit.lambda - 49.0).abs() < 0.5, "{}", fit.lambda);
    }

    #[test]
    fn baseline_rejects_degenerate_input() {
        assert!(fit_baseline(&[1.0]).is_err());
        assert!(fit_baseline(&[2.0, 2.0, 2.0]).is_err());
        assert!(fit_baseline(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn convergence_clamps_wide_samples() {
        let fit = fit_for(0.0, 4.0);
        let wide = vec![vec![-10.0, 10.0, -10.0, 10.0]];
        let c = convergence_score(&wide, &fit).unwrap();
        assert_eq!(c.score, 0.0);
        assert!(c.clamped);
        let tight = vec![vec![-3.0; 5], vec![-4.0; 5]];
        let c = convergence_score(&tight, &fit).unwrap();
        assert_eq!(c.score, 1.0);
        assert!(!c.clamped);
    }

    #[test]
    fn above_chance_is_monotone_in_epsilon() {
        let fit = fit_for(0.0, 4.0);
        let energies: Vec<f64> = (0..200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let mut prev = 1.0;
        for i in 0..50 {
            let p = above_chance(&energies, &fit, 0.2 * i as f64).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn regime_names_round_trip() {
        for r in [
            Regime::NotNovelNotAppropriate,
            Regime::NovelNotAppropriate,
            Regime::AppropriateNotNovel,
            Regime::NovelAndAppropriate,
        ] {
            assert_eq!(r.to_string().parse::<Regime>().unwrap(), r);
            assert_eq!(Regime::from_flags(r.is_novel(), r.is_appropriate()), r);
        }
    }

    #[test]
    fn classifier_quadrants() {
        let fit = fit_for(-128.0, 30.0);
        let rule = RegimeRule::default();
        let seen = StateVector::new(vec![1, -1, 1, 1]).unwrap().fingerprint();
        let fresh = StateVector::new(vec![1, 1, 1, 1]).unwrap().fingerprint();
        let bl: BTreeSet<_> = [seen.clone()].into_iter().collect();
        fn ev<'a>(c: f64, e: f64, fp: Option<&'a Fingerprint>, bl: &'a BTreeSet<Fingerprint>) -> RegimeEvidence<'a> {
            RegimeEvidence {
                convergence: c,
                mean_al_energy: e,
                dominant: fp.map(|f| (f, 1.0)),
                bl_attractors: bl,
            }
        }
        let low = fit.mu - 3.0 * fit.sigma;
        let mid = fit.mu - 1.0 * fit.sigma;
        let high = fit.mu + 1.0 * fit.sigma;
        assert_eq!(classify_regime(&ev(0.1, fit.mu, None, &bl), &fit, &rule), Regime::NotNovelNotAppropriate);
        assert_eq!(classify_regime(&ev(1.0, low, Some(&fresh), &bl), &fit, &rule), Regime::NovelAndAppropriate);
        assert_eq!(classify_regime(&ev(1.0, mid, Some(&fresh), &bl), &fit, &rule), Regime::AppropriateNotNovel);
        assert_eq!(classify_regime(&ev(1.0, low, Some(&seen), &bl), &fit, &rule), Regime::AppropriateNotNovel);
        assert_eq!(classify_regime(&ev(1.0, high, Some(&fresh), &bl), &fit, &rule), Regime::NovelNotAppropriate);
        assert_eq!(classify_regime(&ev(1.0, high, Some(&seen), &bl), &fit, &rule), Regime::NotNovelNotAppropriate);
    }

    #[test]
    fn unlearned_input_never_appropriate_not_novel() {
        let fit = fit_for(-128.0, 30.0);
        let bl = BTreeSet::new();
        let ev = RegimeEvidence {
            convergence: 0.0,
            mean_al_energy: fit.mu,
            dominant: None,
            bl_attractors: &bl,
        };
        assert_eq!(classify_regime(&ev, &fit, &RegimeRule::default()), Regime::NotNovelNotAppropriate);
    }
}
