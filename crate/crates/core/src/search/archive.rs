//! The MIO archive: one bounded population per target.
//!
//! Members are kept best-first by `(h desc, size asc, discovery asc)`. Once a
//! target is covered its population collapses to the single smallest covering
//! test, which is only ever replaced by a strictly smaller one.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::fitness::{EvaluatedIndividual, TargetId};

#[derive(Debug, Clone)]
pub struct Member {
    pub ev: Arc<EvaluatedIndividual>,
    pub h: f64,
    /// Evaluation order, for tie-breaking.
    pub discovered: u64,
}

impl Member {
    fn better_than(&self, other: &Member) -> bool {
        (other.h, self.ev.size, self.discovered) < (self.h, other.ev.size, other.discovered)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TargetPopulation {
    pub covered: bool,
    pub members: Vec<Member>,
}

impl TargetPopulation {
    pub fn best(&self) -> Option<&Member> {
        self.members.first()
    }

    fn insert(&mut self, m: Member, limit: usize) {
        let at = self.members.iter().position(|x| m.better_than(x)).unwrap_or(self.members.len());
        self.members.insert(at, m);
        self.members.truncate(limit);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArchiveDelta {
    pub newly_covered: Vec<TargetId>,
    /// Covered targets whose test was replaced by a smaller one.
    pub shrunk: Vec<TargetId>,
    /// Targets whose (uncovered) population admitted the individual.
    pub inserted: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Archive {
    populations: BTreeMap<TargetId, TargetPopulation>,
    seen: BTreeSet<TargetId>,
    evaluations: u64,
    limit: Option<usize>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `ev` under the population cap `limit` (current `n`).
    pub fn update(&mut self, ev: Arc<EvaluatedIndividual>, limit: usize) -> ArchiveDelta {
        let limit = limit.max(1);
        if self.limit.is_none_or(|l| limit < l) {
            for p in self.populations.values_mut().filter(|p| !p.covered) {
                p.members.truncate(limit);
            }
        }
        self.limit = Some(limit);
        let discovered = self.evaluations;
        self.evaluations += 1;

        let mut delta = ArchiveDelta::default();
        for (target, h) in ev.fitness.iter() {
            self.seen.insert(target.clone());
            if h <= 0.0 {
                continue;
            }
            let member = Member { ev: Arc::clone(&ev), h, discovered };
            let pop = self.populations.entry(target.clone()).or_default();
            if pop.covered {
                if h >= 1.0 && ev.size < pop.members[0].ev.size {
                    pop.members[0] = member;
                    delta.shrunk.push(target.clone());
                }
            } else if h >= 1.0 {
                pop.covered = true;
                pop.members = vec![member];
                delta.newly_covered.push(target.clone());
            } else {
                pop.insert(member, limit);
                if pop.members.iter().any(|m| m.discovered == discovered) {
                    delta.inserted += 1;
                }
            }
        }
        delta
    }

    pub fn population(&self, target: &TargetId) -> Option<&TargetPopulation> {
        self.populations.get(target)
    }

    pub fn populations(&self) -> impl Iterator<Item = (&TargetId, &TargetPopulation)> {
        self.populations.iter()
    }

    pub fn is_covered(&self, target: &TargetId) -> bool {
        self.populations.get(target).is_some_and(|p| p.covered)
    }

    pub fn covered(&self) -> impl Iterator<Item = &TargetId> {
        self.populations.iter().filter(|(_, p)| p.covered).map(|(t, _)| t)
    }

    pub fn covered_count(&self) -> usize {
        self.covered().count()
    }

    /// Every target seen in any fitness value, scored or not.
    pub fn total_targets(&self) -> usize {
        self.seen.len()
    }

    /// Uncovered targets that have at least one member, in target order.
    pub fn uncovered_with_population(&self) -> Vec<&TargetId> {
        self.populations
            .iter()
            .filter(|(_, p)| !p.covered && !p.members.is_empty())
            .map(|(t, _)| t)
            .collect()
    }

    /// Checks the archive invariants against the cap `limit`.
    pub fn check_invariants(&self, limit: usize) -> Result<(), String> {
        for (t, p) in &self.populations {
            if p.covered && p.members.len() != 1 {
                return Err(format!("covered target {t} has {} members", p.members.len()));
            }
            if !p.covered && p.members.len() > limit.max(1) {
                return Err(format!("target {t} has {} members over cap {limit}", p.members.len()));
            }
            if let Some(m) = p.members.iter().find(|m| m.h <= 0.0 || m.ev.fitness.get(t) != m.h) {
                return Err(format!("target {t} stores a member with h = {}", m.h));
            }
            if p.covered && p.members[0].h < 1.0 {
                return Err(format!("covered target {t} stores h = {}", p.members[0].h));
            }
            if p.members.windows(2).any(|w| w[1].better_than(&w[0])) {
                return Err(format!("target {t} population is out of order"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::{FitnessValue, TargetKind};
    use crate::genome::Individual;

    fn ev(scores: &[(&str, f64)], size: usize) -> Arc<EvaluatedIndividual> {
        let mut fitness = FitnessValue::new();
        for (n, h) in scores {
            fitness.set(TargetId::new(TargetKind::Branch, *n), *h);
        }
        Arc::new(EvaluatedIndividual {
            individual: Individual { actions: vec![], auth_index: None },
            fitness,
            results: vec![],
            calls: vec![],
            size,
        })
    }

    fn t(n: &str) -> TargetId {
        TargetId::new(TargetKind::Branch, n)
    }

    fn hs(a: &Archive, n: &str) -> Vec<f64> {
        a.population(&t(n)).map(|p| p.members.iter().map(|m| m.h).collect()).unwrap_or_default()
    }

    #[test]
    fn zero_score_is_ignored() {
        let mut a = Archive::new();
        a.update(ev(&[("T", 0.0)], 1), 10);
        assert!(a.population(&t("T")).is_none());
        assert_eq!(a.total_targets(), 1);
    }

    #[test]
    fn eviction_at_cap() {
        let mut a = Archive::new();
        a.update(ev(&[("T", 0.4)], 1), 2);
        a.update(ev(&[("T", 0.6)], 1), 2);
        a.update(ev(&[("T", 0.5)], 1), 2);
        assert_eq!(hs(&a, "T"), vec![0.6, 0.5]);
    }

    #[test]
    fn covering_collapses_and_shrinks_strictly() {
        let mut a = Archive::new();
        a.update(ev(&[("T", 0.3)], 1), 10);
        let d = a.update(ev(&[("T", 1.0)], 3), 10);
        assert_eq!(d.newly_covered, vec![t("T")]);
        assert_eq!(a.population(&t("T")).unwrap().members.len(), 1);
        // Same size does not replace.
        let d = a.update(ev(&[("T", 1.0)], 3), 10);
        assert!(d.shrunk.is_empty());
        let d = a.update(ev(&[("T", 1.0)], 2), 10);
        assert_eq!(d.shrunk, vec![t("T")]);
        assert_eq!(a.population(&t("T")).unwrap().members[0].ev.size, 2);
        // Partial scores never touch a covered target.
        a.update(ev(&[("T", 0.9)], 1), 10);
        assert_eq!(a.population(&t("T")).unwrap().members[0].ev.size, 2);
        a.check_invariants(10).unwrap();
    }

    #[test]
    fn ties_prefer_smaller_then_earlier() {
        let mut a = Archive::new();
        a.update(ev(&[("T", 0.5)], 3), 2);
        a.update(ev(&[("T", 0.5)], 2), 2);
        a.update(ev(&[("T", 0.5)], 2), 2);
        let p = a.population(&t("T")).unwrap();
        let order: Vec<(usize, u64)> = p.members.iter().map(|m| (m.ev.size, m.discovered)).collect();
        assert_eq!(order, vec![(2, 1), (2, 2)]);
    }

    #[test]
    fn shrinking_cap_trims_populations() {
        let mut a = Archive::new();
        for h in [0.1, 0.2, 0.3, 0.4] {
            a.update(ev(&[("T", h)], 1), 4);
        }
        a.update(ev(&[("U", 0.5)], 1), 1);
        assert_eq!(hs(&a, "T"), vec![0.4]);
        a.check_invariants(1).unwrap();
    }
}
