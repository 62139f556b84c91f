//! Playlists drawn from the user's own listening history.
//!
//! A song's quadrant is the majority quadrant of its reports. Songs are
//! identified by title.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{EmotionQuadrant, SessionLog, Song, Trial};
use crate::error::{Error, Result};

/// Majority quadrant over one song's reports. When several quadrants share
/// the top count, the one reported most recently wins.
pub fn song_quadrant(reports: &[&Trial]) -> Result<EmotionQuadrant> {
    if reports.is_empty() {
        return Err(Error::NoData("song has no reports".into()));
    }
    // quadrant -> (count, latest play_ts)
    let mut tally: BTreeMap<EmotionQuadrant, (usize, f64)> = BTreeMap::new();
    for t in reports {
        let e = tally.entry(t.quadrant()).or_insert((0, f64::NEG_INFINITY));
        e.0 += 1;
        e.1 = e.1.max(t.play_ts);
    }
    let (q, _) = tally
        .into_iter()
        .max_by(|(qa, a), (qb, b)| {
            a.0.cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                // same count and same instant: fixed quadrant order
                .then(qb.cmp(qa))
        })
        .expect("non-empty tally");
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaylistEntry {
    pub song: Song,
    pub quadrant: EmotionQuadrant,
    pub listen_count: usize,
    pub last_played_ts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Notice {
    /// No song in the history matches the requested quadrant.
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playlist {
    pub desired: EmotionQuadrant,
    pub songs: Vec<PlaylistEntry>,
    pub notice: Option<Notice>,
}

/// Every listened song with its quadrant and listening stats. Song metadata
/// comes from the latest listen.
pub fn song_history(sessions: &[SessionLog]) -> Vec<PlaylistEntry> {
    let mut by_title: BTreeMap<&str, Vec<(&str, usize, &Trial)>> = BTreeMap::new();
    for s in sessions {
        for (i, t) in s.trials.iter().enumerate() {
            by_title
                .entry(t.song.title.as_str())
                .or_default()
                .push((s.session_id.as_str(), i, t));
        }
    }
    by_title
        .into_values()
        .map(|listens| {
            let latest = listens
                .iter()
                .max_by(|a, b| {
                    a.2.play_ts
                        .total_cmp(&b.2.play_ts)
                        .then_with(|| a.0.cmp(b.0))
                        .then(a.1.cmp(&b.1))
                })
                .expect("at least one listen");
            let trials: Vec<&Trial> = listens.iter().map(|l| l.2).collect();
            PlaylistEntry {
                song: latest.2.song.clone(),
                quadrant: song_quadrant(&trials).expect("at least one report"),
                listen_count: listens.len(),
                last_played_ts: latest.2.play_ts,
            }
        })
        .collect()
}

fn rank(a: &PlaylistEntry, b: &PlaylistEntry) -> Ordering {
    b.listen_count
        .cmp(&a.listen_count)
        .then(b.last_played_ts.total_cmp(&a.last_played_ts))
        .then_with(|| a.song.title.cmp(&b.song.title))
}

/// Songs whose quadrant is `desired`, most listened first, then most
/// recently played, then by title.
pub fn recommend_playlist(desired: EmotionQuadrant, sessions: &[SessionLog], limit: usize) -> Result<Playlist> {
    if limit == 0 {
        return Err(Error::InvalidInput("limit must be at least 1".into()));
    }
    let mut songs: Vec<PlaylistEntry> = song_history(sessions)
        .into_iter()
        .filter(|e| e.quadrant == desired)
        .collect();
    songs.sort_by(rank);
    songs.truncate(limit);
    let notice = songs.is_empty().then_some(Notice::NoMatch);
    Ok(Playlist {
        desired,
        songs,
        notice,
    })
}
