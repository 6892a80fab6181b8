//! Distribution-independent construction: game-value priors mixed over `ℓ ≤ L`,
//! the rejection sampler over the mixture, and its Rényi certificates.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dimensions::{game_value_lp, verify_game_result, GameValueResult};
use crate::dist::TruncatedHarmonicMixture;
use crate::divergences::{renyi, Alpha, DivergenceValue};
use crate::error::{Error, Result};
use crate::exact::LogSum;
use crate::learners::{ordered_samples, rejection_sampler, LearningRule, RejectionSampler};
use crate::prob::{format_rational, Rational};
use crate::types::{consistent_mass, HypothesisClass, LabeledSample};
use crate::{FiniteDistribution, Hypothesis};

/// `P = (1/z_L) Σ_{ℓ≤L} P_ℓ/ℓ²` with `P_ℓ` an optimal prior of the size-`ℓ` game.
#[derive(Debug, Clone)]
pub struct DiMixturePrior {
    pub class: HypothesisClass,
    pub games: Vec<GameValueResult>,
    pub mixture: TruncatedHarmonicMixture<Hypothesis>,
    pub prior: FiniteDistribution<Hypothesis>,
}

impl DiMixturePrior {
    pub fn build(class: &HypothesisClass, truncation: usize, budget: u128) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidParameter("truncation L must be at least 1".into()));
        }
        let mut games = Vec::with_capacity(truncation);
        for ell in 1..=truncation {
            let g = game_value_lp(class, ell, budget)?;
            verify_game_result(class, &g, budget)?;
            games.push(g);
        }
        let mixture = TruncatedHarmonicMixture::new(games.iter().map(|g| g.optimal_prior.clone()).collect())?;
        let prior = mixture.flatten();
        Ok(DiMixturePrior { class: class.clone(), games, mixture, prior })
    }

    pub fn truncation(&self) -> usize {
        self.games.len()
    }

    /// `C_m`.
    pub fn clique_number(&self, m: usize) -> Result<&Rational> {
        self.game(m).map(|g| &g.clique_number)
    }

    fn game(&self, m: usize) -> Result<&GameValueResult> {
        if m == 0 || m > self.truncation() {
            return Err(Error::InvalidParameter(format!("m = {m} outside 1..={}", self.truncation())));
        }
        Ok(&self.games[m - 1])
    }

    /// `q(m) = z_L m² C_m`; every realizable size-`m` sample has `P(cons S) ≥ 1/q(m)`.
    pub fn cap_ratio(&self, m: usize) -> Result<Rational> {
        let c = self.clique_number(m)?;
        let mm = Rational::from_integer(BigInt::from(m));
        Ok(self.mixture.z_l() * &mm * &mm * c)
    }

    /// `ln q(m)`.
    pub fn kl_cap(&self, m: usize) -> Result<LogSum> {
        Ok(LogSum::ln(&self.cap_ratio(m)?))
    }

    /// Rejection sampler over `P`; its draw cap uses `q(L)`.
    pub fn sampler(&self) -> Result<RejectionSampler> {
        let floor = self.cap_ratio(self.truncation())?.recip();
        rejection_sampler(self.prior.clone())?
            .with_name(&format!("rejection:di-mixture:L={}", self.truncation()))
            .with_consistency_floor(floor)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenyiCertificate {
    pub m: usize,
    /// Realizable ordered samples checked.
    pub samples: u64,
    /// `ln q(m)` and the largest observed `ln(1/P(cons S))`.
    pub cap: LogSum,
    pub worst: LogSum,
    pub worst_sample: Option<LabeledSample>,
    pub worst_ratio: String,
    /// Samples whose `R_∞(Q_S‖P)` exceeds the cap.
    pub violations: u64,
    /// Samples where `R_∞(Q_S‖P) ≠ ln(1/P(cons S))`.
    pub identity_mismatches: u64,
}

impl RenyiCertificate {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.identity_mismatches == 0
    }
}

/// Checks `R_∞(Q_S‖P) = ln(1/P(cons S)) ≤ ln q(m)` exactly for every
/// class-realizable ordered sample of size `m`.
pub fn certify_renyi(di: &DiMixturePrior, m: usize, budget: u128) -> Result<RenyiCertificate> {
    let cap_ratio = di.cap_ratio(m)?;
    let cap = LogSum::ln(&cap_ratio);
    let rule = di.sampler()?;
    let realizable: Vec<LabeledSample> = ordered_samples(di.class.domain(), m, budget)?
        .into_iter()
        .filter(|s| di.class.members().iter().any(|h| s.is_consistent_with(h)))
        .collect();
    let mut cert = RenyiCertificate {
        m,
        samples: realizable.len() as u64,
        cap: cap.clone(),
        worst: LogSum::zero(),
        worst_sample: None,
        worst_ratio: "1".into(),
        violations: 0,
        identity_mismatches: 0,
    };
    let mut worst_ratio = Rational::one();
    for s in realizable {
        let mass = consistent_mass(&di.prior, &s);
        if mass.is_zero() {
            cert.violations += 1;
            continue;
        }
        let ratio = mass.recip();
        if ratio > cap_ratio {
            cert.violations += 1;
        }
        let q = rule.posterior(&s)?;
        let expected = LogSum::ln(&ratio);
        match renyi(&Alpha::Infinity, &q, &di.prior)? {
            DivergenceValue::Exact(l) if l.compare(&expected) == Some(Ordering::Equal) => {}
            _ => cert.identity_mismatches += 1,
        }
        if ratio > worst_ratio {
            worst_ratio = ratio;
            cert.worst = expected;
            cert.worst_sample = Some(s);
        }
    }
    cert.worst_ratio = format_rational(&worst_ratio);
    Ok(cert)
}
