//! Domain types for matches and the dataset container.
//!
//! A [`MatchRecord`] holds two teams of five [`PlayerChampionRecord`]s and the
//! outcome label (`1` when `team_a` won). The CSV layout is one row per match:
//! `match_id, outcome`, then four columns per player for `p1..p10`, where
//! `p1..p5` belong to `team_a` and `p6..p10` to `team_b`.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const TEAM_SIZE: usize = 5;
pub const PLAYERS_PER_MATCH: usize = 2 * TEAM_SIZE;
/// Length of the recent-games window.
pub const RECENT_WINDOW: u32 = 20;
/// Win rate assigned when a player has no season games on the champion.
pub const IMPUTED_WIN_RATE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("empty dataset")]
    Empty,
    #[error("dataset too small: need at least {need} matches, got {got}")]
    TooSmall { need: usize, got: usize },
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("bad header: {0}")]
    Header(String),
    #[error("duplicate match_id {0:?}")]
    DuplicateId(String),
}

/// One player's experience on the champion they picked for a match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerChampionRecord {
    pub mastery_points: u64,
    pub win_rate: f64,
    pub season_games: u32,
    pub recent_games: u32,
    pub win_rate_imputed: bool,
}

impl PlayerChampionRecord {
    /// Build a record from raw counts. With no season games the win rate is
    /// imputed as [`IMPUTED_WIN_RATE`].
    pub fn from_counts(mastery_points: u64, season_wins: u32, season_games: u32, recent_games: u32) -> Self {
        if season_games == 0 {
            Self::imputed(mastery_points, recent_games)
        } else {
            Self {
                mastery_points,
                win_rate: f64::from(season_wins) / f64::from(season_games),
                season_games,
                recent_games,
                win_rate_imputed: false,
            }
        }
    }

    pub fn imputed(mastery_points: u64, recent_games: u32) -> Self {
        Self {
            mastery_points,
            win_rate: IMPUTED_WIN_RATE,
            season_games: 0,
            recent_games,
            win_rate_imputed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    TeamA,
    TeamB,
}

impl Outcome {
    /// Binary label: 1 when team A won.
    pub fn label(self) -> u8 {
        match self {
            Outcome::TeamA => 1,
            Outcome::TeamB => 0,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            1 => Some(Outcome::TeamA),
            0 => Some(Outcome::TeamB),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::TeamA => Outcome::TeamB,
            Outcome::TeamB => Outcome::TeamA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: String,
    pub team_a: Vec<PlayerChampionRecord>,
    pub team_b: Vec<PlayerChampionRecord>,
    pub outcome: Outcome,
}

impl MatchRecord {
    /// Players in column order: team A first, then team B.
    pub fn players(&self) -> impl Iterator<Item = &PlayerChampionRecord> {
        self.team_a.iter().chain(self.team_b.iter())
    }

    /// The same match seen from the other side.
    pub fn swapped(&self) -> Self {
        Self {
            match_id: self.match_id.clone(),
            team_a: self.team_b.clone(),
            team_b: self.team_a.clone(),
            outcome: self.outcome.flipped(),
        }
    }
}

/// A broken invariant in a match record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> Violation {
    Violation { field: field.into(), rule: rule.into() }
}

/// Check every type invariant of a match. An empty list means the match is valid.
pub fn validate_match(m: &MatchRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.match_id.is_empty() {
        out.push(violation("match_id", "must not be empty"));
    }
    for (name, team) in [("team_a", &m.team_a), ("team_b", &m.team_b)] {
        if team.len() != TEAM_SIZE {
            out.push(violation(name, format!("expected {TEAM_SIZE} players, got {}", team.len())));
        }
        for (i, p) in team.iter().enumerate() {
            let field = |f: &str| format!("{name}[{i}].{f}");
            if !(0.0..=1.0).contains(&p.win_rate) {
                out.push(violation(field("win_rate"), "win_rate out of [0,1]"));
            }
            if p.recent_games > RECENT_WINDOW {
                out.push(violation(field("recent_games"), format!("recent_games out of [0,{RECENT_WINDOW}]")));
            }
            if p.win_rate_imputed && p.season_games != 0 {
                out.push(violation(field("win_rate_imputed"), "imputed win rate requires season_games = 0"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Ingested,
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub matches: Vec<MatchRecord>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(matches: Vec<MatchRecord>, provenance: Provenance, seed: Option<u64>) -> Self {
        Self { matches, provenance, seed }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Number of matches won by team A.
    pub fn wins(&self) -> usize {
        self.matches.iter().filter(|m| m.outcome == Outcome::TeamA).count()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.matches.iter().map(|m| m.outcome.label()).collect()
    }

    fn with_matches(&self, matches: Vec<MatchRecord>) -> Self {
        Self { matches, provenance: self.provenance, seed: self.seed }
    }

    /// Every violation in the dataset, prefixed by match position, plus
    /// duplicate ids.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (i, m) in self.matches.iter().enumerate() {
            for v in validate_match(m) {
                out.push(format!("match {i} ({}): {v}", m.match_id));
            }
            if !seen.insert(m.match_id.as_str()) {
                out.push(format!("match {i}: duplicate match_id {:?}", m.match_id));
            }
        }
        out
    }
}

/// Keep the first occurrence of every match id, preserving order.
pub fn dedup(d: &Dataset) -> Dataset {
    let mut seen = HashSet::new();
    let kept = d
        .matches
        .iter()
        .filter(|m| seen.insert(m.match_id.clone()))
        .cloned()
        .collect();
    d.with_matches(kept)
}

/// Test-partition size for `n` rows: `test_fraction * n` rounded half up,
/// clamped so neither side is empty.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    let raw = (test_fraction * n as f64 + 0.5).floor() as usize;
    raw.clamp(1, n - 1)
}

/// Seeded train/test partition of `0..n`; both index lists ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    if n < 2 {
        return Err(DatasetError::TooSmall { need: 2, got: n });
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::BadFraction(test_fraction));
    }
    let n_test = test_size(n, test_fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, "split", 0));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    Ok((0..n).partition(|&i| !is_test[i]))
}

/// Seeded random train/test split. Both halves keep the input order.
pub fn split_train_test(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    let (train, test) = split_indices(d.len(), test_fraction, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| d.matches[i].clone()).collect();
    Ok((d.with_matches(pick(&train)), d.with_matches(pick(&test))))
}

const PLAYER_FIELDS: [&str; 4] = ["winrate", "mastery", "season_games", "recent_games"];

/// Header of the dataset CSV.
pub fn csv_header() -> Vec<String> {
    let mut h = vec!["match_id".to_string(), "outcome".to_string()];
    for p in 1..=PLAYERS_PER_MATCH {
        for f in PLAYER_FIELDS {
            h.push(format!("p{p}_{f}"));
        }
    }
    h
}

pub fn write_csv<W: Write>(d: &Dataset, w: W) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(csv_header())?;
    for m in &d.matches {
        let mut row = vec![m.match_id.clone(), m.outcome.label().to_string()];
        for p in m.players() {
            row.push(p.win_rate.to_string());
            row.push(p.mastery_points.to_string());
            row.push(p.season_games.to_string());
            row.push(p.recent_games.to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, header: &[String], line: u64) -> Result<T, DatasetError> {
    let raw = rec.get(idx).unwrap_or("");
    raw.trim().parse().map_err(|_| DatasetError::Parse {
        line,
        msg: format!("column {}: cannot parse {raw:?}", header[idx]),
    })
}

/// Read a dataset CSV. Rows are validated and duplicate ids rejected.
pub fn read_csv<R: Read>(r: R) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = csv_header();
    let got: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != header {
        return Err(DatasetError::Header(format!("expected {} columns starting match_id,outcome,p1_winrate,...", header.len())));
    }
    let mut matches = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let match_id = rec.get(0).unwrap_or("").to_string();
        let label: u8 = parse_field(&rec, 1, &header, line)?;
        let outcome = Outcome::from_label(label).ok_or_else(|| DatasetError::Parse {
            line,
            msg: format!("outcome must be 0 or 1, got {label}"),
        })?;
        let mut players = Vec::with_capacity(PLAYERS_PER_MATCH);
        for p in 0..PLAYERS_PER_MATCH {
            let base = 2 + 4 * p;
            let season_games: u32 = parse_field(&rec, base + 2, &header, line)?;
            players.push(PlayerChampionRecord {
                win_rate: parse_field(&rec, base, &header, line)?,
                mastery_points: parse_field(&rec, base + 1, &header, line)?,
                season_games,
                recent_games: parse_field(&rec, base + 3, &header, line)?,
                win_rate_imputed: season_games == 0,
            });
        }
        let team_b = players.split_off(TEAM_SIZE);
        let m = MatchRecord { match_id, team_a: players, team_b, outcome };
        let violations = validate_match(&m);
        if !violations.is_empty() {
            let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(DatasetError::Parse { line, msg });
        }
        if !seen.insert(m.match_id.clone()) {
            return Err(DatasetError::DuplicateId(m.match_id));
        }
        matches.push(m);
    }
    Ok(Dataset::new(matches, Provenance::File, None))
}
