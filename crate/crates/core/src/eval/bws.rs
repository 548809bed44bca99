use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One annotator's pick of best and worst output for an item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BWSJudgment {
    pub item_id: String,
    pub system_best: String,
    pub system_worst: String,
    pub annotator_id: String,
    #[serde(default)]
    pub tie: bool,
    /// Every system shown for the item. When absent, the best and worst
    /// systems are taken as the ones shown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub systems: Option<Vec<String>>,
}

impl BWSJudgment {
    pub fn shown(&self) -> Vec<&str> {
        let mut v: Vec<&str> = match &self.systems {
            Some(s) => s.iter().map(String::as_str).collect(),
            None => vec![self.system_best.as_str(), self.system_worst.as_str()],
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BwsTally {
    pub appearances: usize,
    pub best: usize,
    pub worst: usize,
}

impl BwsTally {
    pub fn score(&self) -> f64 {
        (self.best as f64 - self.worst as f64) / self.appearances as f64
    }
}

/// Per-system counts. Ties count as an appearance for every shown system
/// and credit neither best nor worst.
pub fn bws_tallies(judgments: &[BWSJudgment]) -> BTreeMap<String, BwsTally> {
    let mut out: BTreeMap<String, BwsTally> = BTreeMap::new();
    for j in judgments {
        for s in j.shown() {
            out.entry(s.to_string()).or_default().appearances += 1;
        }
        if !j.tie {
            out.entry(j.system_best.clone()).or_default().best += 1;
            out.entry(j.system_worst.clone()).or_default().worst += 1;
        }
    }
    out
}

/// Best percentage minus worst percentage, in `[-1, 1]`. Systems named in
/// `systems` that never appear are left out with a warning.
pub fn bws_scores(judgments: &[BWSJudgment], systems: &[String]) -> BTreeMap<String, f64> {
    let tallies = bws_tallies(judgments);
    for s in systems {
        if tallies.get(s).is_none_or(|t| t.appearances == 0) {
            log::warn!("system `{s}` appears in no judgment and gets no score");
        }
    }
    tallies
        .into_iter()
        .filter(|(_, t)| t.appearances > 0)
        .map(|(s, t)| (s, t.score()))
        .collect()
}
