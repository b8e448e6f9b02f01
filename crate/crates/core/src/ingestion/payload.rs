use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::dataset::{PlayerChampionRecord, PLAYERS_PER_MATCH, RECENT_WINDOW, TEAM_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Team {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participant {
    pub player_id: String,
    pub champion_id: u32,
    pub team: Team,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMatchPayload {
    pub match_id: String,
    pub participants: Vec<Participant>,
    pub winner: Team,
}

impl RawMatchPayload {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.match_id.is_empty() {
            return Err(IngestError::Malformed("match_id: empty".into()));
        }
        if self.participants.len() != PLAYERS_PER_MATCH {
            return Err(IngestError::Malformed(format!(
                "participants: expected {PLAYERS_PER_MATCH}, got {}",
                self.participants.len()
            )));
        }
        for (i, p) in self.participants.iter().enumerate() {
            if p.player_id.is_empty() {
                return Err(IngestError::Malformed(format!("participants[{i}].player_id: empty")));
            }
        }
        for team in [Team::A, Team::B] {
            let n = self.participants.iter().filter(|p| p.team == team).count();
            if n != TEAM_SIZE {
                return Err(IngestError::Malformed(format!("participants: team {team:?} has {n} players, expected {TEAM_SIZE}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMasteryPayload {
    pub player_id: String,
    pub champion_id: u32,
    pub mastery_points: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryEntry {
    pub champion_id: u32,
    pub win: bool,
}

/// Season-scoped ranked history, most recent game first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHistoryPayload {
    pub player_id: String,
    pub entries: Vec<HistoryEntry>,
}

/// Count season games, wins and recent games on `champion_id`. The recent
/// window is the first [`RECENT_WINDOW`] entries, or all of them if fewer.
pub fn build_player_record(
    mastery: &RawMasteryPayload,
    history: &RawHistoryPayload,
    champion_id: u32,
) -> Result<PlayerChampionRecord, IngestError> {
    if mastery.champion_id != champion_id {
        return Err(IngestError::Malformed(format!(
            "champion_id: mastery payload is for {}, expected {champion_id}",
            mastery.champion_id
        )));
    }
    if mastery.player_id != history.player_id {
        return Err(IngestError::Malformed(format!(
            "player_id: mastery payload is for {:?}, history for {:?}",
            mastery.player_id, history.player_id
        )));
    }
    let (mut games, mut wins, mut recent) = (0u32, 0u32, 0u32);
    for (i, e) in history.entries.iter().enumerate() {
        if e.champion_id != champion_id {
            continue;
        }
        games += 1;
        wins += u32::from(e.win);
        if i < RECENT_WINDOW as usize {
            recent += 1;
        }
    }
    Ok(PlayerChampionRecord::from_counts(mastery.mastery_points, wins, games, recent))
}

pub(crate) fn parse<T: serde::de::DeserializeOwned>(what: &str, body: &[u8]) -> Result<T, IngestError> {
    serde_json::from_slice(body).map_err(|e| IngestError::Malformed(format!("{what}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(entries: &[(u32, bool)]) -> RawHistoryPayload {
        RawHistoryPayload {
            player_id: "p".into(),
            entries: entries.iter().map(|&(champion_id, win)| HistoryEntry { champion_id, win }).collect(),
        }
    }

    fn mastery(champion_id: u32) -> RawMasteryPayload {
        RawMasteryPayload { player_id: "p".into(), champion_id, mastery_points: 4321 }
    }

    #[test]
    fn thirty_entry_history() {
        // 7 games on champion 9 in the first 20 entries (5 wins), 5 more later (3 wins)
        let mut e = Vec::new();
        for i in 0..20 {
            e.push(if i < 7 { (9, i < 5) } else { (1, true) });
        }
        for i in 0..10 {
            e.push(if i < 5 { (9, i < 3) } else { (2, false) });
        }
        let r = build_player_record(&mastery(9), &history(&e), 9).unwrap();
        assert_eq!((r.season_games, r.recent_games, r.mastery_points), (12, 7, 4321));
        assert!((r.win_rate - 8.0 / 12.0).abs() < 1e-12);
        assert!(!r.win_rate_imputed);
    }

    #[test]
    fn no_games_imputes() {
        let r = build_player_record(&mastery(9), &history(&[(1, true), (2, false)]), 9).unwrap();
        assert_eq!((r.win_rate, r.season_games, r.recent_games, r.win_rate_imputed), (0.5, 0, 0, true));
    }

    #[test]
    fn all_recent_wins() {
        let r = build_player_record(&mastery(9), &history(&[(9, true); 20]), 9).unwrap();
        assert_eq!((r.win_rate, r.season_games, r.recent_games), (1.0, 20, 20));
    }

    #[test]
    fn champion_mismatch() {
        assert!(matches!(build_player_record(&mastery(3), &history(&[]), 9), Err(IngestError::Malformed(_))));
    }

    #[test]
    fn nine_participants() {
        let p = |i: usize| Participant { player_id: format!("p{i}"), champion_id: 1, team: if i < 5 { Team::A } else { Team::B } };
        let m = RawMatchPayload { match_id: "m".into(), participants: (0..9).map(p).collect(), winner: Team::A };
        match m.validate() {
            Err(IngestError::Malformed(msg)) => assert_eq!(msg, "participants: expected 10, got 9"),
            other => panic!("{other:?}"),
        }
    }
}
