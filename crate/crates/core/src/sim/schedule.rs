//! Contact-schedule analysis.

use serde::{Deserialize, Serialize};

/// A maximal run of identical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

fn runs(flags: impl Iterator<Item = bool>, wanted: bool) -> Vec<Run> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut n = 0;
    for (i, f) in flags.enumerate() {
        n = i + 1;
        match (f == wanted, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                out.push(Run { start: s, len: i - s });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push(Run { start: s, len: n - s });
    }
    out
}

/// Runs of `leg` being airborne. Runs touching either end of the trace are
/// included; callers usually drop them with [`interior`].
pub fn swing_runs(contacts: &[[bool; 4]], leg: usize) -> Vec<Run> {
    runs(contacts.iter().map(|c| c[leg]), false)
}

/// Runs with all four feet on the ground.
pub fn full_support_runs(contacts: &[[bool; 4]]) -> Vec<Run> {
    runs(contacts.iter().map(|c| c.iter().all(|&x| x)), true)
}

/// Drop runs that touch the start or end of a trace of length `len`.
pub fn interior(runs: &[Run], len: usize) -> Vec<Run> {
    runs.iter().copied().filter(|r| r.start > 0 && r.start + r.len < len).collect()
}

/// Ticks at which `leg` leaves the ground.
pub fn liftoffs(contacts: &[[bool; 4]], leg: usize) -> Vec<usize> {
    contacts.windows(2).enumerate().filter(|(_, w)| w[0][leg] && !w[1][leg]).map(|(i, _)| i + 1).collect()
}

/// Number of swing starts of either diagonal pair in `[from, to)`, counted on
/// the front legs (each pair contains exactly one).
pub fn steps_between(contacts: &[[bool; 4]], from: usize, to: usize) -> usize {
    (0..2).map(|leg| liftoffs(contacts, leg).into_iter().filter(|&t| t >= from && t < to).count()).sum()
}
