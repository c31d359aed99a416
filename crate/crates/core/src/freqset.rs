//! Resolution-tolerant algebra over finite sets of angular frequencies.
//!
//! Two frequencies are considered equal when they differ by strictly less
//! than the resolution `delta`. That relation is not transitive, so every
//! set is kept self-resolved: sorted, with consecutive members at least
//! `delta` apart.

use std::collections::BTreeMap;

use crate::error::{invalid, Result};

pub fn delta_equal(w1: f64, w2: f64, delta: f64) -> bool {
    (w1 - w2).abs() < delta
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    omegas: Vec<f64>,
    delta: f64,
}

impl FrequencySet {
    /// Sorts `values` and resolves clusters greedily in ascending order: a
    /// value is kept only if it is at least `delta` above the last kept one.
    pub fn new(mut values: Vec<f64>, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if let Some(bad) = values.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(invalid(format!("frequencies must be positive and finite, got {bad}")));
        }
        values.sort_by(f64::total_cmp);
        let mut omegas: Vec<f64> = Vec::with_capacity(values.len());
        for w in values {
            match omegas.last() {
                Some(&last) if delta_equal(last, w, delta) => {}
                _ => omegas.push(w),
            }
        }
        Ok(FrequencySet { omegas, delta })
    }

    pub fn empty(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(FrequencySet {
            omegas: Vec::new(),
            delta,
        })
    }

    /// Builds from members already known to be sorted and resolved.
    fn from_resolved(omegas: Vec<f64>, delta: f64) -> Self {
        debug_assert!(omegas.windows(2).all(|w| w[1] - w[0] >= delta));
        FrequencySet { omegas, delta }
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Whether some member is within `delta` of `omega`.
    pub fn contains(&self, omega: f64) -> bool {
        self.partner(omega).is_some()
    }

    /// The member closest to `omega`, if it is within `delta`.
    pub fn partner(&self, omega: f64) -> Option<f64> {
        let idx = self.omegas.partition_point(|&w| w < omega);
        let below = idx.checked_sub(1).map(|i| self.omegas[i]);
        let above = self.omegas.get(idx).copied();
        [below, above]
            .into_iter()
            .flatten()
            .filter(|&w| delta_equal(w, omega, self.delta))
            .min_by(|a, b| (a - omega).abs().total_cmp(&(b - omega).abs()))
    }

    fn filter(&self, keep: impl Fn(f64) -> bool) -> FrequencySet {
        FrequencySet::from_resolved(self.omegas.iter().copied().filter(|&w| keep(w)).collect(), self.delta)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    Ok(())
}

fn same_delta(a: &FrequencySet, b: &FrequencySet) -> Result<()> {
    if a.delta != b.delta {
        return Err(invalid(format!(
            "frequency sets have different resolutions ({} vs {})",
            a.delta, b.delta
        )));
    }
    Ok(())
}

/// Members of `a` that have a partner in `b`; values are taken from `a`.
pub fn intersect(a: &FrequencySet, b: &FrequencySet) -> Result<FrequencySet> {
    same_delta(a, b)?;
    Ok(a.filter(|w| b.contains(w)))
}

/// Members of either set with no partner in the other.
pub fn symmetric_difference(a: &FrequencySet, b: &FrequencySet) -> Result<FrequencySet> {
    same_delta(a, b)?;
    let mut omegas: Vec<f64> = a
        .omegas
        .iter()
        .copied()
        .filter(|&w| !b.contains(w))
        .chain(b.omegas.iter().copied().filter(|&w| !a.contains(w)))
        .collect();
    omegas.sort_by(f64::total_cmp);
    Ok(FrequencySet::from_resolved(omegas, a.delta))
}

/// `a` together with the members of `b` that have no partner in `a`.
pub fn union(a: &FrequencySet, b: &FrequencySet) -> Result<FrequencySet> {
    same_delta(a, b)?;
    let mut omegas: Vec<f64> = a
        .omegas
        .iter()
        .copied()
        .chain(b.omegas.iter().copied().filter(|&w| !a.contains(w)))
        .collect();
    omegas.sort_by(f64::total_cmp);
    FrequencySet::new(omegas, a.delta)
}

/// Labeled frequency sets sharing one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySystem {
    sets: BTreeMap<String, FrequencySet>,
    delta: f64,
}

impl FrequencySystem {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(FrequencySystem {
            sets: BTreeMap::new(),
            delta,
        })
    }

    pub fn from_sets<I, S>(sets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, FrequencySet)>,
        S: Into<String>,
    {
        let mut iter = sets.into_iter().peekable();
        let delta = match iter.peek() {
            Some((_, s)) => s.delta,
            None => return Err(invalid("a frequency system needs at least one set")),
        };
        let mut system = FrequencySystem::new(delta)?;
        for (label, set) in iter {
            system.insert(label, set)?;
        }
        Ok(system)
    }

    pub fn insert(&mut self, label: impl Into<String>, set: FrequencySet) -> Result<()> {
        if set.delta != self.delta {
            return Err(invalid("all sets of a system must share delta"));
        }
        self.sets.insert(label.into(), set);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&FrequencySet> {
        self.sets.get(label)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FrequencySet)> {
        self.sets.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Drops from every set each frequency that has a partner in any other set,
/// leaving only the components unique to each member.
pub fn prune_shared(system: &FrequencySystem) -> Result<FrequencySystem> {
    if system.len() < 2 {
        return Err(invalid("pruning needs at least two frequency sets"));
    }
    let mut out = FrequencySystem::new(system.delta)?;
    for (label, set) in &system.sets {
        let pruned = set.filter(|w| !system.sets.iter().any(|(other, s)| other != label && s.contains(w)));
        out.sets.insert(label.clone(), pruned);
    }
    Ok(out)
}

/// True when no two members of distinct sets are `delta`-equal.
pub fn is_disjoint_system(system: &FrequencySystem) -> bool {
    let sets: Vec<&FrequencySet> = system.sets.values().collect();
    sets.iter()
        .enumerate()
        .all(|(i, a)| sets[i + 1..].iter().all(|b| a.omegas.iter().all(|&w| !b.contains(w))))
}
