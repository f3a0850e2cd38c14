use crate::error::{Error, Result};

use super::history::{CaptureHistory, SeasonLayout, Step};
use super::{State, StatePath};

/// Binomial success/trial pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Count {
    pub successes: u32,
    pub trials: u32,
}

impl Count {
    pub fn new(successes: u32, trials: u32) -> Self {
        debug_assert!(successes <= trials);
        Count { successes, trials }
    }

    pub fn failures(&self) -> u32 {
        self.trials - self.successes
    }

    #[inline]
    fn record(&mut self, success: bool) {
        self.trials += 1;
        self.successes += u32::from(success);
    }

    /// Log of the Binomial kernel `p^s (1 - p)^f`; the binomial coefficient
    /// is constant in `p` and omitted.
    #[inline]
    pub fn log_kernel(&self, p: f64) -> f64 {
        let mut l = 0.0;
        if self.successes > 0 {
            l += self.successes as f64 * p.ln();
        }
        let f = self.failures();
        if f > 0 {
            l += f as f64 * (1.0 - p).ln();
        }
        l
    }
}

impl std::ops::AddAssign for Count {
    fn add_assign(&mut self, rhs: Count) {
        self.successes += rhs.successes;
        self.trials += rhs.trials;
    }
}

impl std::iter::Sum for Count {
    fn sum<I: Iterator<Item = Count>>(iter: I) -> Count {
        let mut acc = Count::default();
        for c in iter {
            acc += c;
        }
        acc
    }
}

/// Transition counts that inform the population-level survival and
/// season-start parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SurvivalCounts {
    /// In-season weeks survived by an animal alive at the start of the week.
    pub weekly_survived: u32,
    pub weekly_died: u32,
    /// Alive animals entering a new season in each state.
    pub boundary_here: u32,
    pub boundary_away: u32,
    pub boundary_died: u32,
}

impl std::ops::AddAssign for SurvivalCounts {
    fn add_assign(&mut self, r: SurvivalCounts) {
        self.weekly_survived += r.weekly_survived;
        self.weekly_died += r.weekly_died;
        self.boundary_here += r.boundary_here;
        self.boundary_away += r.boundary_away;
        self.boundary_died += r.boundary_died;
    }
}

/// Per-individual counts extracted from one sampled path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SufficientStats {
    /// Detections among occasions spent Here.
    pub obs: Count,
    /// Here-to-Here persistence, one entry per season of the layout.
    pub hh: Vec<Count>,
    /// Away-to-Away persistence.
    pub aa: Count,
    pub survival: SurvivalCounts,
}

impl SufficientStats {
    pub fn hh_total(&self) -> Count {
        self.hh.iter().copied().sum()
    }
}

/// Counts trials and successes along a sampled path.
///
/// Persistence trials pair consecutive weeks of the same season only, and
/// only when the animal survives the week; season-boundary moves and deaths
/// are tallied in [`SurvivalCounts`] instead.
pub fn sufficient_stats(
    path: &StatePath,
    history: &CaptureHistory,
    layout: SeasonLayout,
) -> Result<SufficientStats> {
    let states = path.states();
    if states.len() != history.len() {
        return Err(Error::domain(format!(
            "path of length {} for history `{}` of length {}",
            states.len(),
            history.id(),
            history.len()
        )));
    }
    let mut stats = SufficientStats {
        obs: Count::default(),
        hh: vec![Count::default(); layout.count],
        aa: Count::default(),
        survival: SurvivalCounts::default(),
    };
    for (t, (&s, &seen)) in states.iter().zip(history.seen()).enumerate() {
        match s {
            State::Here => stats.obs.record(seen),
            _ if seen => {
                return Err(Error::domain(format!(
                    "individual `{}` seen at occasion {t} while {s:?}",
                    history.id()
                )))
            }
            _ => {}
        }
    }
    for t in 1..states.len() {
        let (from, to) = (states[t - 1], states[t]);
        if from == State::Dead {
            if to != State::Dead {
                return Err(Error::domain(format!(
                    "individual `{}` leaves Dead at occasion {t}",
                    history.id()
                )));
            }
            continue;
        }
        match history.step(t) {
            Step::Weekly { season } => {
                if season < layout.first || layout.index(season) >= layout.count {
                    return Err(Error::domain(format!(
                        "season {season} outside the dataset layout"
                    )));
                }
                if to == State::Dead {
                    stats.survival.weekly_died += 1;
                    continue;
                }
                stats.survival.weekly_survived += 1;
                match from {
                    State::Here => stats.hh[layout.index(season)].record(to == State::Here),
                    State::Away => stats.aa.record(to == State::Away),
                    State::Dead => unreachable!(),
                }
            }
            Step::Boundary => match to {
                State::Here => stats.survival.boundary_here += 1,
                State::Away => stats.survival.boundary_away += 1,
                State::Dead => stats.survival.boundary_died += 1,
            },
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::Occasion;
    use proptest::prelude::*;

    fn parse(path: &str) -> Vec<State> {
        path.chars()
            .map(|c| match c {
                'H' => State::Here,
                'A' => State::Away,
                _ => State::Dead,
            })
            .collect()
    }

    fn two_state(bits: &str) -> CaptureHistory {
        CaptureHistory::two_state("i", bits.chars().map(|c| c == '1').collect()).unwrap()
    }

    #[test]
    fn hand_counted_path() {
        let h = two_state("1101");
        let p = StatePath::from_unchecked(parse("HHAH"));
        let s = sufficient_stats(&p, &h, SeasonLayout::single()).unwrap();
        assert_eq!(s.obs, Count::new(3, 3));
        assert_eq!(s.hh_total(), Count::new(1, 2));
        assert_eq!(s.aa, Count::new(0, 1));
    }

    #[test]
    fn all_here_path() {
        let h = two_state("11111");
        let p = StatePath::from_unchecked(parse("HHHHH"));
        let s = sufficient_stats(&p, &h, SeasonLayout::single()).unwrap();
        assert_eq!(s.obs, Count::new(5, 5));
        assert_eq!(s.hh_total(), Count::new(4, 4));
        assert_eq!(s.aa, Count::new(0, 0));
    }

    #[test]
    fn away_while_seen_rejected() {
        let h = two_state("1011");
        let p = StatePath::from_unchecked(parse("HHAH"));
        assert!(sufficient_stats(&p, &h, SeasonLayout::single()).is_err());
        assert!(StatePath::new(parse("HHAH"), &h).is_err());
    }

    #[test]
    fn boundary_and_death_are_not_persistence_trials() {
        let occ = vec![
            Occasion::new(1, 42),
            Occasion::new(1, 43),
            Occasion::new(2, 18),
            Occasion::new(2, 19),
            Occasion::new(2, 20),
        ];
        let h = CaptureHistory::new("b", vec![true, false, false, false, false], occ).unwrap();
        let layout = SeasonLayout { first: 1, count: 2 };
        let p = StatePath::new(parse("HHAAD"), &h).unwrap();
        let s = sufficient_stats(&p, &h, layout).unwrap();
        assert_eq!(s.obs, Count::new(1, 2));
        assert_eq!(s.hh, vec![Count::new(1, 1), Count::new(0, 0)]);
        assert_eq!(s.aa, Count::new(1, 1));
        assert_eq!(s.survival.boundary_away, 1);
        assert_eq!(s.survival.weekly_survived, 2);
        assert_eq!(s.survival.weekly_died, 1);
    }

    proptest! {
        #[test]
        fn counts_are_consistent(raw in proptest::collection::vec(0u8..3, 1..40)) {
            // Build a valid two-state path/history pair from random symbols.
            let mut states = vec![State::Here];
            let mut seen = vec![true];
            for &r in &raw {
                let s = if r == 0 { State::Away } else { State::Here };
                seen.push(s == State::Here && r == 2);
                states.push(s);
            }
            let h = CaptureHistory::two_state("p", seen).unwrap();
            let p = StatePath::new(states.clone(), &h).unwrap();
            let s = sufficient_stats(&p, &h, SeasonLayout::single()).unwrap();
            prop_assert!(s.obs.successes <= s.obs.trials);
            prop_assert!(s.obs.trials as usize >= h.sightings());
            prop_assert_eq!(s.obs.successes as usize, h.sightings());
            let hh = s.hh_total();
            prop_assert!(hh.successes <= hh.trials && s.aa.successes <= s.aa.trials);
            prop_assert_eq!((hh.trials + s.aa.trials) as usize, states.len() - 1);
        }
    }
}
