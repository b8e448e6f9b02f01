//! Rate-limited client for the match / mastery / history endpoints, and the
//! driver that assembles a dataset from them.
//!
//! Endpoints, relative to the API root:
//! `match/{id}`, `mastery/{player}/{champion}`, `history/{player}` and
//! `candidates` (a JSON list of match ids to sample from). A fixture
//! directory uses the same paths with a `.json` suffix.

mod limiter;
mod payload;
mod transport;

use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use limiter::{Clock, RateLimiter, SystemClock, VirtualClock};
pub use payload::{build_player_record, HistoryEntry, Participant, RawHistoryPayload, RawMasteryPayload, RawMatchPayload, Team};
pub use transport::{FixtureTransport, HttpTransport, Response, Transport};

use crate::dataset::{validate_match, Dataset, MatchRecord, Outcome, Provenance};
use crate::rng;

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "CHAMP_OUTCOME_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rate limited on {path} after {attempts} attempts")]
    RateLimited { path: String, attempts: u32 },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("source exhausted after {got} of {wanted} matches")]
    Exhausted { wanted: usize, got: usize },
    #[error("invalid api config: {0}")]
    Config(String),
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiConfig {
    pub base_url: String,
    /// Read from [`API_KEY_ENV`], never from config files.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub requests_per_second: f64,
    pub requests_per_two_minutes: usize,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First retry delay after a 429; doubles on every further attempt.
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".into(),
            api_key: None,
            requests_per_second: 20.0,
            requests_per_two_minutes: 100,
            max_retries: 3,
            max_in_flight: 4,
            backoff_base_ms: 500,
            timeout_secs: 10,
        }
    }
}

impl fmt::Debug for ApiConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApiConfig")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("requests_per_second", &self.requests_per_second)
            .field("requests_per_two_minutes", &self.requests_per_two_minutes)
            .field("max_retries", &self.max_retries)
            .field("max_in_flight", &self.max_in_flight)
            .field("backoff_base_ms", &self.backoff_base_ms)
            .field("timeout_secs", &self.timeout_secs)
            .finish()
    }
}

impl ApiConfig {
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.requests_per_second >= 1.0) || !self.requests_per_second.is_finite() {
            return Err(IngestError::Config("requests_per_second must be at least 1".into()));
        }
        if self.requests_per_two_minutes == 0 {
            return Err(IngestError::Config("requests_per_two_minutes must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(IngestError::Config("max_in_flight must be positive".into()));
        }
        if self.max_retries > 16 {
            return Err(IngestError::Config("max_retries must be at most 16".into()));
        }
        Ok(())
    }

    /// Per-second budget rounded down to whole requests.
    pub fn limits(&self) -> [(usize, Duration); 2] {
        [
            (self.requests_per_second.floor() as usize, Duration::from_secs(1)),
            (self.requests_per_two_minutes, Duration::from_secs(120)),
        ]
    }
}

pub struct ApiClient {
    cfg: ApiConfig,
    transport: Box<dyn Transport>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    retries: AtomicUsize,
    requests: AtomicUsize,
}

fn encode(segment: &str) -> String {
    let mut out = String::with_capacity(segment.len());
    for b in segment.bytes() {
        if b.is_ascii_alphanumeric() || b"-_.~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

impl ApiClient {
    pub fn new(cfg: ApiConfig, transport: Box<dyn Transport>, clock: Arc<dyn Clock>) -> Result<Self, IngestError> {
        cfg.validate()?;
        let limiter = RateLimiter::new(&cfg.limits());
        Ok(Self { cfg, transport, limiter, clock, retries: AtomicUsize::new(0), requests: AtomicUsize::new(0) })
    }

    pub fn http(cfg: ApiConfig) -> Result<Self, IngestError> {
        let t = HttpTransport::new(&cfg.base_url, cfg.api_key.clone(), Duration::from_secs(cfg.timeout_secs))?;
        Self::new(cfg, Box::new(t), Arc::new(SystemClock::new()))
    }

    pub fn fixtures(cfg: ApiConfig, dir: impl Into<std::path::PathBuf>) -> Result<Self, IngestError> {
        Self::new(cfg, Box::new(FixtureTransport::new(dir)), Arc::new(SystemClock::new()))
    }

    /// 429 responses that were retried.
    pub fn retries(&self) -> usize {
        self.retries.load(Ordering::Relaxed)
    }

    /// Requests admitted by the rate limiter, retries included.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    fn get<T: serde::de::DeserializeOwned>(&self, path: &str) -> Result<T, IngestError> {
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire(self.clock.as_ref());
            self.requests.fetch_add(1, Ordering::Relaxed);
            let resp = self.transport.get(path)?;
            match resp.status {
                200 => return payload::parse(path, &resp.body),
                404 => return Err(IngestError::NotFound(path.to_string())),
                429 => {
                    if attempt >= self.cfg.max_retries {
                        return Err(IngestError::RateLimited { path: path.to_string(), attempts: attempt + 1 });
                    }
                    let backoff = Duration::from_millis(self.cfg.backoff_base_ms.saturating_mul(1 << attempt));
                    let wait = resp.retry_after.map_or(backoff, |r| r.max(backoff));
                    log::debug!("429 on {path}; retrying in {wait:?}");
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    self.clock.sleep(wait);
                    attempt += 1;
                }
                s => return Err(IngestError::Transport(format!("{path}: HTTP {s}"))),
            }
        }
    }

    pub fn fetch_match(&self, id: &str) -> Result<RawMatchPayload, IngestError> {
        if id.is_empty() {
            return Err(IngestError::NotFound("match id is empty".into()));
        }
        let m: RawMatchPayload = self.get(&format!("match/{}", encode(id)))?;
        m.validate()?;
        if m.match_id != id {
            return Err(IngestError::Malformed(format!("match_id: requested {id:?}, got {:?}", m.match_id)));
        }
        Ok(m)
    }

    pub fn fetch_mastery(&self, player: &str, champion_id: u32) -> Result<RawMasteryPayload, IngestError> {
        self.get(&format!("mastery/{}/{champion_id}", encode(player)))
    }

    pub fn fetch_history(&self, player: &str) -> Result<RawHistoryPayload, IngestError> {
        let h: RawHistoryPayload = self.get(&format!("history/{}", encode(player)))?;
        if h.player_id != player {
            return Err(IngestError::Malformed(format!("player_id: requested {player:?}, got {:?}", h.player_id)));
        }
        Ok(h)
    }

    pub fn fetch_candidates(&self) -> Result<Vec<String>, IngestError> {
        self.get("candidates")
    }

    /// Fetch a match and every participant's mastery and history.
    pub fn assemble_match(&self, id: &str) -> Result<MatchRecord, IngestError> {
        let raw = self.fetch_match(id)?;
        let (mut team_a, mut team_b) = (Vec::new(), Vec::new());
        for p in &raw.participants {
            let mastery = self.fetch_mastery(&p.player_id, p.champion_id)?;
            let history = self.fetch_history(&p.player_id)?;
            let rec = build_player_record(&mastery, &history, p.champion_id)?;
            match p.team {
                Team::A => team_a.push(rec),
                Team::B => team_b.push(rec),
            }
        }
        let outcome = match raw.winner {
            Team::A => Outcome::TeamA,
            Team::B => Outcome::TeamB,
        };
        let m = MatchRecord { match_id: raw.match_id, team_a, team_b, outcome };
        let violations = validate_match(&m);
        if let Some(v) = violations.first() {
            return Err(IngestError::Malformed(v.to_string()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// Sorted by match id.
    pub dataset: Dataset,
    /// Candidates dropped as missing or malformed, with the reason.
    pub skipped: Vec<(String, String)>,
    /// Set when the candidates ran out before `n` matches were collected.
    pub shortfall: Option<IngestError>,
}

/// Collect `n` unique matches from the candidate list in seeded random
/// order. Candidates are processed in waves sized to the remaining need, so
/// the chosen set depends only on the seed, never on completion order.
/// Missing or malformed candidates are skipped; rate-limit and transport
/// failures abort.
pub fn ingest_random_matches(client: &ApiClient, n: usize, seed: u64) -> Result<Ingested, IngestError> {
    if n == 0 {
        return Err(IngestError::Config("n must be at least 1".into()));
    }
    let mut candidates = client.fetch_candidates()?;
    candidates.shuffle(&mut rng::substream(seed, "ingest-candidates", 0));

    let mut seen: HashSet<String> = HashSet::new();
    let mut queue = candidates.into_iter().filter(|id| seen.insert(id.clone()));
    let mut got: Vec<MatchRecord> = Vec::with_capacity(n);
    let mut ids: HashSet<String> = HashSet::new();
    let mut skipped = Vec::new();

    while got.len() < n {
        let wave: Vec<String> = queue.by_ref().take(n - got.len()).collect();
        if wave.is_empty() {
            break;
        }
        let slots: Vec<Mutex<Option<Result<MatchRecord, IngestError>>>> = wave.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..client.cfg.max_in_flight.min(wave.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= wave.len() {
                        break;
                    }
                    let r = client.assemble_match(&wave[i]);
                    *slots[i].lock().unwrap() = Some(r);
                });
            }
        });
        for (id, slot) in wave.iter().zip(slots) {
            match slot.into_inner().unwrap().expect("every slot filled") {
                Ok(m) => {
                    if ids.insert(m.match_id.clone()) {
                        got.push(m);
                    } else {
                        skipped.push((id.clone(), "duplicate match id".into()));
                    }
                }
                Err(e @ (IngestError::NotFound(_) | IngestError::Malformed(_))) => {
                    log::warn!("skipping match {id}: {e}");
                    skipped.push((id.clone(), e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    got.sort_by(|a, b| a.match_id.cmp(&b.match_id));
    let shortfall = (got.len() < n).then_some(IngestError::Exhausted { wanted: n, got: got.len() });
    Ok(Ingested { dataset: Dataset::new(got, Provenance::Ingested, Some(seed)), skipped, shortfall })
}
