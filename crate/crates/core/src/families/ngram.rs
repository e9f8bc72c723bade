//! Character n-gram models with a restricted transition set.
//!
//! A model generates a string one character at a time, conditioning on the
//! previous `order` characters (padded with a start marker). Transitions
//! observed in the training strings are allowed, plus ending the string
//! from any observed context; probabilities are add-one smoothed counts
//! over the allowed set. Generation stops at `max_len` characters.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore};
use serde::Serialize;

use super::{GmnOracle, NegativeSet};
use crate::distribution::Generative;
use crate::error::{Error, Result};
use crate::loss::{empirical_loss_bag, LossFunction, PointBag};
use crate::point::Point;

/// Start-of-string padding character; never part of the alphabet.
pub const START: char = '\u{2}';

/// Enumeration cap for [`Generative::support`].
const MAX_ENUMERATED: usize = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Next {
    End,
    Char(char),
}

type Counts = BTreeMap<String, BTreeMap<Next, usize>>;

#[derive(Clone, Debug, Serialize)]
pub struct NgramModel {
    pub order: usize,
    pub alphabet: Vec<char>,
    pub max_len: usize,
    table: BTreeMap<String, Vec<(Next, f64)>>,
    removed: BTreeSet<(String, char)>,
}

fn start_context(order: usize) -> String {
    std::iter::repeat_n(START, order).collect()
}

fn advance(ctx: &str, ch: char, order: usize) -> String {
    if order == 0 {
        return String::new();
    }
    let mut s: String = ctx.chars().skip(1).collect();
    s.push(ch);
    s
}

/// `(context, char)` steps of a string, in order.
fn path(s: &str, order: usize) -> Vec<(String, char)> {
    let mut ctx = start_context(order);
    let mut out = Vec::with_capacity(s.len());
    for ch in s.chars() {
        let next = advance(&ctx, ch, order);
        out.push((std::mem::replace(&mut ctx, next), ch));
    }
    out
}

fn fit(xp: &PointBag, order: usize, alphabet: &[char]) -> Result<Counts> {
    let mut counts: Counts = BTreeMap::new();
    for (x, c) in xp.distinct() {
        let s = x
            .as_token()
            .ok_or_else(|| Error::Precondition(format!("n-gram positives must be tokens, got {x}")))?;
        if let Some(bad) = s.chars().find(|ch| !alphabet.contains(ch)) {
            return Err(Error::Precondition(format!("character {bad:?} is not in the alphabet")));
        }
        let mut ctx = start_context(order);
        for ch in s.chars() {
            *counts.entry(ctx.clone()).or_default().entry(Next::Char(ch)).or_insert(0) += c;
            ctx = advance(&ctx, ch, order);
        }
        *counts.entry(ctx).or_default().entry(Next::End).or_insert(0) += c;
    }
    Ok(counts)
}

impl NgramModel {
    fn build(order: usize, alphabet: &[char], max_len: usize, counts: &Counts, removed: &BTreeSet<(String, char)>) -> Self {
        let mut table = BTreeMap::new();
        for (ctx, row) in counts {
            let mut allowed: BTreeMap<Next, usize> = BTreeMap::new();
            allowed.insert(Next::End, row.get(&Next::End).copied().unwrap_or(0));
            for (&next, &c) in row {
                if let Next::Char(ch) = next {
                    if !removed.contains(&(ctx.clone(), ch)) {
                        allowed.insert(next, c);
                    }
                }
            }
            let total: f64 = allowed.values().map(|&c| c as f64 + 1.0).sum();
            let probs = allowed.into_iter().map(|(n, c)| (n, (c as f64 + 1.0) / total)).collect();
            table.insert(ctx.clone(), probs);
        }
        Self {
            order,
            alphabet: alphabet.to_vec(),
            max_len,
            table,
            removed: removed.clone(),
        }
    }

    /// Model with every observed transition allowed.
    pub fn fit(xp: &PointBag, order: usize, alphabet: &[char], max_len: usize) -> Result<Self> {
        let counts = fit(xp, order, alphabet)?;
        Ok(Self::build(order, alphabet, max_len, &counts, &BTreeSet::new()))
    }

    pub fn removed(&self) -> &BTreeSet<(String, char)> {
        &self.removed
    }

    pub fn allows(&self, ctx: &str, next: Next) -> bool {
        self.prob(ctx, next) > 0.0
    }

    fn prob(&self, ctx: &str, next: Next) -> f64 {
        self.table
            .get(ctx)
            .and_then(|row| row.iter().find(|(n, _)| *n == next))
            .map_or(0.0, |(_, p)| *p)
    }

    fn string_prob(&self, s: &str) -> f64 {
        let len = s.chars().count();
        if len > self.max_len {
            return 0.0;
        }
        let mut ctx = start_context(self.order);
        let mut prob = 1.0;
        for ch in s.chars() {
            prob *= self.prob(&ctx, Next::Char(ch));
            if prob == 0.0 {
                return 0.0;
            }
            ctx = advance(&ctx, ch, self.order);
        }
        if len < self.max_len {
            prob *= self.prob(&ctx, Next::End);
        }
        prob
    }

    fn enumerate(&self, ctx: &str, prefix: &mut String, len: usize, mass: f64, out: &mut Vec<(Point, f64)>) -> bool {
        if out.len() > MAX_ENUMERATED {
            return false;
        }
        if len == self.max_len {
            out.push((Point::Token(prefix.clone()), mass));
            return true;
        }
        let Some(row) = self.table.get(ctx) else {
            return true;
        };
        for &(next, p) in row {
            match next {
                Next::End => out.push((Point::Token(prefix.clone()), mass * p)),
                Next::Char(ch) => {
                    prefix.push(ch);
                    let nctx = advance(ctx, ch, self.order);
                    let ok = self.enumerate(&nctx, prefix, len + 1, mass * p, out);
                    prefix.pop();
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl Generative for NgramModel {
    fn sample(&self, rng: &mut dyn RngCore) -> Point {
        let mut ctx = start_context(self.order);
        let mut s = String::new();
        let mut len = 0;
        while len < self.max_len {
            let Some(row) = self.table.get(&ctx) else { break };
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = row.last().map(|(n, _)| *n).unwrap_or(Next::End);
            for &(n, p) in row {
                acc += p;
                if u < acc {
                    pick = n;
                    break;
                }
            }
            match pick {
                Next::End => break,
                Next::Char(ch) => {
                    s.push(ch);
                    ctx = advance(&ctx, ch, self.order);
                    len += 1;
                }
            }
        }
        Point::Token(s)
    }

    fn density(&self, x: &Point) -> f64 {
        x.as_token().map_or(0.0, |s| self.string_prob(s))
    }

    fn in_support(&self, x: &Point) -> bool {
        self.density(x) > 0.0
    }

    fn support(&self) -> Option<Vec<(Point, f64)>> {
        let mut out = Vec::new();
        let mut prefix = String::new();
        if !self.enumerate(&start_context(self.order), &mut prefix, 0, 1.0, &mut out) {
            return None;
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Some(out)
    }
}

/// Greedy stand-in for the constrained minimizer over n-gram models.
///
/// Fits all observed transitions, then while some negative string is still
/// generable, removes the character transition on its path whose removal
/// gives the lowest empirical loss on the positives (first on the path
/// wins ties). End-of-string transitions are never removed. No optimality
/// claim.
pub fn ngram_gmn_greedy(
    xp: &PointBag,
    xn: &NegativeSet,
    order: usize,
    alphabet: &[char],
    max_len: usize,
    loss: LossFunction,
) -> Result<NgramModel> {
    if xp.is_empty() {
        return Err(Error::Precondition("oracle needs at least one positive".into()));
    }
    let counts = fit(xp, order, alphabet)?;
    let mut removed = BTreeSet::new();
    let mut model = NgramModel::build(order, alphabet, max_len, &counts, &removed);
    while let Some(bad) = xn.iter().find(|x| model.in_support(x)) {
        let s = bad.as_token().unwrap_or_default();
        let mut candidates: Vec<(String, char)> = Vec::new();
        for step in path(s, order) {
            if !candidates.contains(&step) {
                candidates.push(step);
            }
        }
        let mut best: Option<((String, char), f64, NgramModel)> = None;
        for cand in candidates {
            let mut trial_removed = removed.clone();
            trial_removed.insert(cand.clone());
            let trial = NgramModel::build(order, alphabet, max_len, &counts, &trial_removed);
            let l = empirical_loss_bag(&trial, xp, loss)?;
            if best.as_ref().is_none_or(|(_, bl, _)| l < *bl) {
                best = Some((cand, l, trial));
            }
        }
        let Some((cand, _, trial)) = best else {
            return Err(Error::NoFeasibleDistribution {
                negatives: xn.iter().cloned().collect(),
            });
        };
        removed.insert(cand);
        model = trial;
    }
    Ok(model)
}

#[derive(Clone, Debug)]
pub struct NgramOracle {
    pub order: usize,
    pub alphabet: Vec<char>,
    pub max_len: usize,
    pub loss: LossFunction,
}

impl GmnOracle for NgramOracle {
    type Output = NgramModel;

    fn solve(&self, xp: &PointBag, xn: &NegativeSet) -> Result<NgramModel> {
        ngram_gmn_greedy(xp, xn, self.order, &self.alphabet, self.max_len, self.loss)
    }

    fn loss(&self) -> LossFunction {
        self.loss
    }

    /// Subsets of the possible character transitions.
    fn family_size(&self) -> f64 {
        let k = self.alphabet.len() as f64;
        let contexts = (k + 1.0).powi(self.order as i32);
        2f64.powf(contexts * k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALPHA: [char; 3] = ['{', '}', 'a'];
    const L: LossFunction = LossFunction::CappedLog { m: 5.0 };

    fn bag(xs: &[&str]) -> PointBag {
        PointBag::from_owned(xs.iter().map(|s| Point::token(*s)))
    }

    fn neg(xs: &[&str]) -> NegativeSet {
        xs.iter().map(|s| Point::token(*s)).collect()
    }

    #[test]
    fn observed_strings_are_supported() {
        let xp = bag(&["{}", "{a}"]);
        let m = ngram_gmn_greedy(&xp, &NegativeSet::new(), 1, &ALPHA, 6, L).unwrap();
        assert!(m.removed().is_empty());
        assert!(m.in_support(&Point::token("{}")));
        assert!(m.in_support(&Point::token("{a}")));
        let total: f64 = m.support().unwrap().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unreachable_negative_needs_no_removal() {
        let xp = bag(&["{}", "{a}"]);
        // '}' -> '{' never observed
        let m = ngram_gmn_greedy(&xp, &neg(&["{}{}"]), 1, &ALPHA, 6, L).unwrap();
        assert!(m.removed().is_empty());
    }

    #[test]
    fn removes_cheapest_transition() {
        let xp = bag(&["{}", "{a}", "{{}}"]);
        let before = NgramModel::fit(&xp, 1, &ALPHA, 6).unwrap();
        assert!(before.in_support(&Point::token("{{")));
        let m = ngram_gmn_greedy(&xp, &neg(&["{{"]), 1, &ALPHA, 6, L).unwrap();
        let expected: BTreeSet<(String, char)> = [("{".to_string(), '{')].into_iter().collect();
        assert_eq!(m.removed(), &expected);
        assert!(!m.in_support(&Point::token("{{")));
        assert!(m.in_support(&Point::token("{a}")));
    }

    #[test]
    fn empty_negative_is_infeasible() {
        let xp = bag(&["{}"]);
        assert!(matches!(
            ngram_gmn_greedy(&xp, &neg(&[""]), 1, &ALPHA, 6, L),
            Err(Error::NoFeasibleDistribution { .. })
        ));
    }

    #[test]
    fn samples_use_allowed_transitions_only() {
        let xp = bag(&["{}", "{a}", "{{}}", "a"]);
        let m = ngram_gmn_greedy(&xp, &neg(&["{{"]), 2, &ALPHA, 8, L).unwrap();
        let mut rng = crate::rng::stream_rng(3, 0);
        for _ in 0..2000 {
            let x = m.sample(&mut rng);
            let s = x.as_token().unwrap();
            assert!(s.chars().count() <= 8);
            let mut ctx = start_context(2);
            for ch in s.chars() {
                assert!(m.allows(&ctx, Next::Char(ch)), "{s}");
                ctx = advance(&ctx, ch, 2);
            }
            assert!(m.density(&x) > 0.0);
        }
    }

    #[test]
    fn forced_stop_at_max_len() {
        let xp = bag(&["aaaa"]);
        let m = NgramModel::fit(&xp, 1, &ALPHA, 2).unwrap();
        let total: f64 = m.support().unwrap().iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(!m.in_support(&Point::token("aaa")));
        assert!(m.in_support(&Point::token("aa")));
    }
}
