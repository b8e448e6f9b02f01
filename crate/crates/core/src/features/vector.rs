use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::Array2;

use super::stats::{summary_stats, SUMMARY_COLUMNS};
use super::FeatureError;
use crate::dataset::{validate_match, MatchRecord, PLAYERS_PER_MATCH, TEAM_SIZE};

pub const N_FEATURES: usize = 44;
/// First aggregate column (after the 20 per-player columns).
pub const AGGREGATE_OFFSET: usize = 2 * PLAYERS_PER_MATCH;
const TEAM_BLOCK: usize = 2 * SUMMARY_COLUMNS.len();
pub const TEAM_A_MEAN_WIN_RATE: usize = AGGREGATE_OFFSET;
pub const TEAM_B_MEAN_WIN_RATE: usize = AGGREGATE_OFFSET + TEAM_BLOCK;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
    pub outcome: u8,
}

/// Map a validated match onto the fixed 44-column layout:
/// `(win_rate, mastery)` for p1..p10, then team A's win-rate and mastery
/// summaries, then team B's.
pub fn build_feature_vector(m: &MatchRecord) -> Result<FeatureVector, FeatureError> {
    let violations = validate_match(m);
    if !violations.is_empty() {
        return Err(FeatureError::InvalidMatch {
            id: m.match_id.clone(),
            violations: violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        });
    }
    let mut values = [0.0; N_FEATURES];
    for (i, p) in m.players().enumerate() {
        values[2 * i] = p.win_rate;
        values[2 * i + 1] = p.mastery_points as f64;
    }
    let mut col = AGGREGATE_OFFSET;
    for team in [&m.team_a, &m.team_b] {
        let win_rates: Vec<f64> = team.iter().map(|p| p.win_rate).collect();
        let mastery: Vec<f64> = team.iter().map(|p| p.mastery_points as f64).collect();
        for series in [win_rates, mastery] {
            for v in summary_stats(&series)?.columns() {
                values[col] = v;
                col += 1;
            }
        }
    }
    debug_assert_eq!(col, N_FEATURES);
    Ok(FeatureVector { values, outcome: m.outcome.label() })
}

/// Row-major feature matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            x: self.x.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }
}

pub fn featurize(matches: &[MatchRecord]) -> Result<FeatureMatrix, FeatureError> {
    let mut x = Array2::zeros((matches.len(), N_FEATURES));
    let mut y = Vec::with_capacity(matches.len());
    for (i, m) in matches.iter().enumerate() {
        let fv = build_feature_vector(m)?;
        x.row_mut(i).iter_mut().zip(fv.values).for_each(|(dst, v)| *dst = v);
        y.push(fv.outcome);
    }
    Ok(FeatureMatrix { x, y })
}

/// `f01` .. `f44`.
pub fn column_names() -> Vec<String> {
    (1..=N_FEATURES).map(|i| format!("f{i:02}")).collect()
}

/// Human-readable meaning of every column, keyed by column name.
pub fn column_descriptions() -> BTreeMap<String, String> {
    let mut desc = Vec::with_capacity(N_FEATURES);
    for p in 1..=PLAYERS_PER_MATCH {
        let team = if p <= TEAM_SIZE { "team_a" } else { "team_b" };
        desc.push(format!("p{p} ({team}) champion win rate"));
        desc.push(format!("p{p} ({team}) champion mastery points"));
    }
    for team in ["team_a", "team_b"] {
        for series in ["champion win rate", "champion mastery points"] {
            for stat in SUMMARY_COLUMNS {
                desc.push(format!("{team} {stat} of {series}"));
            }
        }
    }
    column_names().into_iter().zip(desc).collect()
}

pub fn write_feature_csv<W: Write>(fm: &FeatureMatrix, w: W) -> Result<(), FeatureError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = column_names();
    header.push("outcome".into());
    wtr.write_record(&header)?;
    for (row, y) in fm.x.rows().into_iter().zip(&fm.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read a feature CSV: any number of numeric columns followed by `outcome`.
/// Prediction inputs may omit the `outcome` column.
pub fn read_feature_csv<R: Read>(r: R) -> Result<(Vec<String>, FeatureMatrix), FeatureError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut names: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let has_outcome = names.last().is_some_and(|n| n == "outcome");
    if has_outcome {
        names.pop();
    }
    if names.is_empty() {
        return Err(FeatureError::Header("no feature columns".into()));
    }
    let width = names.len();
    let mut data = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        for (j, raw) in rec.iter().take(width).enumerate() {
            let v: f64 = raw.trim().parse().map_err(|_| FeatureError::Parse {
                line,
                msg: format!("column {}: cannot parse {raw:?}", names[j]),
            })?;
            if !v.is_finite() {
                return Err(FeatureError::Parse { line, msg: format!("column {}: non-finite value", names[j]) });
            }
            data.push(v);
        }
        if has_outcome {
            let raw = rec.get(width).unwrap_or("").trim();
            match raw {
                "0" => y.push(0),
                "1" => y.push(1),
                _ => return Err(FeatureError::Parse { line, msg: format!("outcome must be 0 or 1, got {raw:?}") }),
            }
        } else {
            y.push(0);
        }
    }
    let rows = data.len() / width;
    let x = Array2::from_shape_vec((rows, width), data).expect("row width checked by csv reader");
    Ok((names, FeatureMatrix { x, y }))
}
