//! Point-biserial screening of the four raw per-player features.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::FeatureError;
use crate::dataset::{Dataset, PlayerChampionRecord};

pub const DEFAULT_ALPHA: f64 = 0.05;
const MIN_MATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawFeature {
    WinRate,
    MasteryPoints,
    SeasonGames,
    RecentGames,
}

impl RawFeature {
    pub const ALL: [RawFeature; 4] =
        [RawFeature::WinRate, RawFeature::MasteryPoints, RawFeature::SeasonGames, RawFeature::RecentGames];

    pub fn name(self) -> &'static str {
        match self {
            RawFeature::WinRate => "win_rate",
            RawFeature::MasteryPoints => "mastery_points",
            RawFeature::SeasonGames => "season_games",
            RawFeature::RecentGames => "recent_games",
        }
    }

    pub fn value(self, p: &PlayerChampionRecord) -> f64 {
        match self {
            RawFeature::WinRate => p.win_rate,
            RawFeature::MasteryPoints => p.mastery_points as f64,
            RawFeature::SeasonGames => f64::from(p.season_games),
            RawFeature::RecentGames => f64::from(p.recent_games),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedFeature {
    pub feature: RawFeature,
    pub r: f64,
    pub p_value: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub alpha: f64,
    pub n_matches: usize,
    pub features: Vec<ScreenedFeature>,
}

impl ScreeningReport {
    pub fn is_selected(&self, f: RawFeature) -> bool {
        self.features.iter().any(|s| s.feature == f && s.selected)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| Feature | r | p-value | Selected (alpha = {}) |\n|---|---:|---:|:---:|\n", self.alpha);
        for f in &self.features {
            out.push_str(&format!(
                "| {} | {:.4} | {:.4e} | {} |\n",
                f.feature.name(),
                f.r,
                f.p_value,
                if f.selected { "yes" } else { "no" }
            ));
        }
        out
    }
}

/// Pearson correlation of `x` with binary `y`, and its two-sided p-value from
/// the t statistic with `n - 2` degrees of freedom.
pub fn point_biserial(x: &[f64], y: &[u8]) -> Result<(f64, f64), FeatureError> {
    if x.len() != y.len() {
        return Err(FeatureError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(FeatureError::UndefinedCorrelation("need at least 3 observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = f64::from(b) - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(FeatureError::UndefinedCorrelation("constant feature"));
    }
    if syy == 0.0 {
        return Err(FeatureError::UndefinedCorrelation("single-class labels"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = n - 2.0;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok((r, p))
}

/// Correlate each raw feature with the outcome. Both sides are pooled with
/// sign alignment: team A players against `outcome`, team B players against
/// `1 - outcome`.
pub fn screen_features(d: &Dataset, alpha: f64) -> Result<ScreeningReport, FeatureError> {
    if d.len() < MIN_MATCHES {
        return Err(FeatureError::TooFew { need: MIN_MATCHES, got: d.len() });
    }
    let mut features = Vec::with_capacity(RawFeature::ALL.len());
    for f in RawFeature::ALL {
        let mut x = Vec::with_capacity(d.len() * 10);
        let mut y = Vec::with_capacity(d.len() * 10);
        for m in &d.matches {
            let won = m.outcome.label();
            for p in &m.team_a {
                x.push(f.value(p));
                y.push(won);
            }
            for p in &m.team_b {
                x.push(f.value(p));
                y.push(1 - won);
            }
        }
        let (r, p_value) = point_biserial(&x, &y)?;
        features.push(ScreenedFeature { feature: f, r, p_value, selected: p_value < alpha });
    }
    Ok(ScreeningReport { alpha, n_matches: d.len(), features })
}
