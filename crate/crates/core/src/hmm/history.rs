use crate::error::{Error, Result};

use super::ModelKind;

/// First and last in-season week of the year for three-state data.
pub const FIRST_WEEK: u32 = 18;
pub const LAST_WEEK: u32 = 43;

/// Position of one capture occasion. Two-state data use a single season (0)
/// and a plain occasion number in `week`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occasion {
    pub season: u32,
    pub week: u32,
}

impl Occasion {
    pub fn new(season: u32, week: u32) -> Self {
        Occasion { season, week }
    }
}

/// How the chain moves into occasion `t` from occasion `t - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Weekly { season: u32 },
    Boundary,
}

/// One individual's sighting series, starting at its first sighting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureHistory {
    id: String,
    seen: Vec<bool>,
    occasions: Vec<Occasion>,
}

impl CaptureHistory {
    /// Builds a history that must already start at a sighting.
    ///
    /// Occasions must advance one week at a time within a season, or move to
    /// the next season.
    pub fn new(id: impl Into<String>, seen: Vec<bool>, occasions: Vec<Occasion>) -> Result<Self> {
        let id = id.into();
        if seen.is_empty() {
            return Err(Error::domain(format!("history `{id}` is empty")));
        }
        if seen.len() != occasions.len() {
            return Err(Error::domain(format!(
                "history `{id}`: {} observations but {} occasions",
                seen.len(),
                occasions.len()
            )));
        }
        if !seen[0] {
            return Err(Error::domain(format!(
                "history `{id}` must start at its first sighting"
            )));
        }
        for (t, w) in occasions.windows(2).enumerate() {
            let (prev, next) = (w[0], w[1]);
            let ok = if next.season == prev.season {
                next.week == prev.week + 1
            } else {
                next.season == prev.season + 1
            };
            if !ok {
                return Err(Error::domain(format!(
                    "history `{id}`: occasion {} ({}, {}) does not follow ({}, {})",
                    t + 1,
                    next.season,
                    next.week,
                    prev.season,
                    prev.week
                )));
            }
        }
        Ok(CaptureHistory { id, seen, occasions })
    }

    /// Drops everything before the first sighting.
    pub fn trimmed(id: impl Into<String>, seen: Vec<bool>, occasions: Vec<Occasion>) -> Result<Self> {
        let id = id.into();
        let Some(first) = seen.iter().position(|&s| s) else {
            return Err(Error::domain(format!("individual `{id}` is never sighted")));
        };
        CaptureHistory::new(id, seen[first..].to_vec(), occasions[first..].to_vec())
    }

    /// Two-state history indexed by consecutive occasions starting at 0.
    pub fn two_state(id: impl Into<String>, seen: Vec<bool>) -> Result<Self> {
        let occasions = (0..seen.len() as u32).map(|w| Occasion::new(0, w)).collect();
        CaptureHistory::new(id, seen, occasions)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seen(&self) -> &[bool] {
        &self.seen
    }

    pub fn occasions(&self) -> &[Occasion] {
        &self.occasions
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn sightings(&self) -> usize {
        self.seen.iter().filter(|&&s| s).count()
    }

    /// Transition kind into occasion `t` (`t >= 1`).
    #[inline]
    pub fn step(&self, t: usize) -> Step {
        let (prev, next) = (self.occasions[t - 1], self.occasions[t]);
        if prev.season == next.season {
            Step::Weekly {
                season: next.season,
            }
        } else {
            Step::Boundary
        }
    }

    fn validate_for(&self, model: ModelKind) -> Result<()> {
        match model {
            ModelKind::TwoState => {
                if self.occasions.iter().any(|o| o.season != self.occasions[0].season) {
                    return Err(Error::domain(format!(
                        "individual `{}` spans several seasons; the two-state model has none",
                        self.id
                    )));
                }
            }
            ModelKind::ThreeState => {
                if let Some(o) = self
                    .occasions
                    .iter()
                    .find(|o| !(FIRST_WEEK..=LAST_WEEK).contains(&o.week))
                {
                    return Err(Error::domain(format!(
                        "individual `{}`: week {} of season {} is outside [{FIRST_WEEK}, {LAST_WEEK}]",
                        self.id, o.week, o.season
                    )));
                }
                for w in self.occasions.windows(2) {
                    if w[0].season != w[1].season && (w[0].week != LAST_WEEK || w[1].week != FIRST_WEEK) {
                        return Err(Error::domain(format!(
                            "individual `{}`: season {} must end at week {LAST_WEEK} and season {} begin at week {FIRST_WEEK}",
                            self.id, w[0].season, w[1].season
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Contiguous range of seasons spanned by a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonLayout {
    pub first: u32,
    pub count: usize,
}

impl SeasonLayout {
    pub fn single() -> Self {
        SeasonLayout { first: 0, count: 1 }
    }

    #[inline]
    pub fn index(&self, season: u32) -> usize {
        (season - self.first) as usize
    }

    pub fn seasons(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.count as u32).map(move |k| self.first + k)
    }
}

/// Validated collection of histories for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    model: ModelKind,
    histories: Vec<CaptureHistory>,
    layout: SeasonLayout,
}

impl Dataset {
    pub fn new(model: ModelKind, histories: Vec<CaptureHistory>) -> Result<Self> {
        if histories.is_empty() {
            return Err(Error::domain("dataset has no individuals"));
        }
        let mut ids = std::collections::HashSet::new();
        for h in &histories {
            if !ids.insert(h.id()) {
                return Err(Error::domain(format!("duplicate individual id `{}`", h.id())));
            }
            h.validate_for(model)?;
        }
        let layout = match model {
            ModelKind::TwoState => SeasonLayout {
                first: histories[0].occasions[0].season,
                count: 1,
            },
            ModelKind::ThreeState => {
                let first = histories.iter().map(|h| h.occasions[0].season).min().unwrap();
                let last = histories
                    .iter()
                    .map(|h| h.occasions.last().unwrap().season)
                    .max()
                    .unwrap();
                SeasonLayout {
                    first,
                    count: (last - first + 1) as usize,
                }
            }
        };
        if model == ModelKind::TwoState
            && histories.iter().any(|h| h.occasions[0].season != layout.first)
        {
            return Err(Error::domain("two-state histories must share one season"));
        }
        Ok(Dataset {
            model,
            histories,
            layout,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn histories(&self) -> &[CaptureHistory] {
        &self.histories
    }

    pub fn layout(&self) -> SeasonLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.histories.iter().map(|h| h.id().to_string()).collect()
    }
}
