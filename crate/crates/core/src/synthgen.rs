//! Synthetic matches from a latent-skill model.
//!
//! Every player has a latent skill `s ~ N(0, 1)` on their champion. Observed
//! features are noisy views of it:
//!
//! * win rate `~ Beta(k * sigmoid(s), k * (1 - sigmoid(s)))` with `k` the
//!   win-rate concentration (imputed 0.5 when the player has no season games),
//! * mastery points log-normal with log-scale correlation
//!   `mastery_skill_correlation` to `s`,
//! * season games negative-binomial (Poisson with exponential rate) and recent
//!   games binomial within the last-20 window, both independent of skill.
//!
//! Team A wins with probability `sigmoid(skill_weight * (sum_a s - sum_b s) / noise_scale)`.
//! Because the outcome depends only on the latent skills, the accuracy of the
//! predictor that knows them is a ceiling for any model trained on the
//! observed features; [`bayes_accuracy`] estimates it by Monte Carlo.

use rand::Rng as _;
use rand_distr::{Beta, Binomial, Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, MatchRecord, Outcome, PlayerChampionRecord, Provenance, RECENT_WINDOW, TEAM_SIZE};
use crate::rng::{self, Rng};

/// Observed mean mastery the default log-normal is centred on.
pub const TARGET_MEAN_MASTERY: f64 = 122_368.44;
/// Observed mean season games on the played champion.
pub const TARGET_MEAN_GAMES: f64 = 58.95;

const DEFAULT_MASTERY_LOG_STD: f64 = 1.2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_matches: usize,
    pub skill_weight: f64,
    pub noise_scale: f64,
    pub mastery_log_mean: f64,
    pub mastery_log_std: f64,
    pub mastery_skill_correlation: f64,
    pub games_mean: f64,
    pub winrate_concentration: f64,
}

impl Default for GenConfig {
    /// Calibrated so the latent-skill predictor is right about 75% of the time.
    fn default() -> Self {
        Self {
            n_matches: 5000,
            skill_weight: 0.525,
            noise_scale: 1.0,
            mastery_log_mean: TARGET_MEAN_MASTERY.ln() - 0.5 * DEFAULT_MASTERY_LOG_STD * DEFAULT_MASTERY_LOG_STD,
            mastery_log_std: DEFAULT_MASTERY_LOG_STD,
            mastery_skill_correlation: 0.9,
            games_mean: TARGET_MEAN_GAMES,
            winrate_concentration: 1000.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: &str| Err(SynthError::InvalidConfig(msg.to_string()));
        if self.n_matches < 1 {
            return bad("n_matches must be at least 1");
        }
        if !(self.skill_weight.is_finite() && self.skill_weight >= 0.0) {
            return bad("skill_weight must be a non-negative real");
        }
        for (name, v) in [
            ("noise_scale", self.noise_scale),
            ("mastery_log_std", self.mastery_log_std),
            ("games_mean", self.games_mean),
            ("winrate_concentration", self.winrate_concentration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::InvalidConfig(format!("{name} must be strictly positive")));
            }
        }
        if !self.mastery_log_mean.is_finite() {
            return bad("mastery_log_mean must be finite");
        }
        if !(-1.0..=1.0).contains(&self.mastery_skill_correlation) {
            return bad("mastery_skill_correlation must lie in [-1, 1]");
        }
        Ok(())
    }

    /// Probability that team A wins given the latent skill difference.
    pub fn win_probability(&self, skill_diff: f64) -> f64 {
        sigmoid(self.skill_weight * skill_diff / self.noise_scale)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn draw_player(cfg: &GenConfig, rng: &mut Rng) -> (f64, PlayerChampionRecord) {
    let skill: f64 = rng.sample(StandardNormal);
    let centre = sigmoid(skill);
    let k = cfg.winrate_concentration;
    let observed = Beta::new(k * centre, k * (1.0 - centre))
        .expect("positive shape parameters")
        .sample(rng);

    let rate = Exp::new(1.0 / cfg.games_mean).expect("positive games_mean").sample(rng);
    let season_games = if rate > 0.0 {
        Poisson::new(rate).expect("positive rate").sample(rng) as u32
    } else {
        0
    };
    let window = season_games.min(RECENT_WINDOW);
    let recent_share: f64 = rng.random();
    let recent_games = Binomial::new(u64::from(window), recent_share).expect("p in [0,1]").sample(rng) as u32;

    let noise: f64 = rng.sample(StandardNormal);
    let rho = cfg.mastery_skill_correlation;
    let log_mastery = cfg.mastery_log_mean + cfg.mastery_log_std * (rho * skill + (1.0 - rho * rho).sqrt() * noise);
    let mastery_points = log_mastery.exp().round() as u64;

    let record = if season_games == 0 {
        PlayerChampionRecord::imputed(mastery_points, recent_games)
    } else {
        PlayerChampionRecord {
            mastery_points,
            win_rate: observed,
            season_games,
            recent_games,
            win_rate_imputed: false,
        }
    };
    (skill, record)
}

/// One match drawn from its own substream; also returns the latent skill difference.
pub fn generate_match(cfg: &GenConfig, seed: u64, index: u64) -> (MatchRecord, f64) {
    let mut rng = rng::substream(seed, "synth-match", index);
    let mut team_a = Vec::with_capacity(TEAM_SIZE);
    let mut team_b = Vec::with_capacity(TEAM_SIZE);
    let mut diff = 0.0;
    for _ in 0..TEAM_SIZE {
        let (s, p) = draw_player(cfg, &mut rng);
        diff += s;
        team_a.push(p);
    }
    for _ in 0..TEAM_SIZE {
        let (s, p) = draw_player(cfg, &mut rng);
        diff -= s;
        team_b.push(p);
    }
    let u: f64 = rng.random();
    let outcome = if u < cfg.win_probability(diff) { Outcome::TeamA } else { Outcome::TeamB };
    let m = MatchRecord { match_id: format!("S{index:07}"), team_a, team_b, outcome };
    (m, diff)
}

pub fn generate_dataset(cfg: &GenConfig, seed: u64) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let matches = (0..cfg.n_matches as u64).map(|i| generate_match(cfg, seed, i).0).collect();
    Ok(Dataset::new(matches, Provenance::Synthetic, Some(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesEstimate {
    pub accuracy: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Monte-Carlo accuracy of the predictor that sees latent skills:
/// the mean of `max(p, 1 - p)` over sampled matches.
pub fn bayes_accuracy(cfg: &GenConfig, n_mc: usize, seed: u64) -> Result<BayesEstimate, SynthError> {
    cfg.validate()?;
    if n_mc < 1000 {
        return Err(SynthError::InvalidConfig("n_mc must be at least 1000".into()));
    }
    let mut rng = rng::substream(seed, "bayes", 0);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_mc {
        let mut diff = 0.0;
        for i in 0..2 * TEAM_SIZE {
            let s: f64 = rng.sample(StandardNormal);
            diff += if i < TEAM_SIZE { s } else { -s };
        }
        let p = cfg.win_probability(diff);
        let a = p.max(1.0 - p);
        sum += a;
        sum_sq += a * a;
    }
    let n = n_mc as f64;
    let accuracy = sum / n;
    let var = ((sum_sq - n * accuracy * accuracy) / (n - 1.0)).max(0.0);
    Ok(BayesEstimate { accuracy, std_error: (var / n).sqrt(), n_samples: n_mc })
}
