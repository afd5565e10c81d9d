//! Evaluation: linking, identification, and extraction accuracy with
//! binomial confidence intervals.
//!
//! A pair is correctly linked @n when any of its top-n answer hypotheses
//! contains the gold entity. Identification accuracy conditions on correct
//! top-1 linking; extraction accuracy is the end-to-end ratio over all
//! pairs, so extraction = identification x linking@1 holds exactly on the
//! underlying counts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kb::EntityId;

/// Per-pair evaluation input: gold label, ranked answer-hypothesis entity
/// sets from the linker, and the identifier's choice on the top-1
/// hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairOutcome {
    pub gold: EntityId,
    /// Entity ids linked in each answer hypothesis, best first.
    pub answer_nbest: Vec<Vec<EntityId>>,
    /// Identifier output on the top-1 hypothesis, if any.
    pub identified: Option<EntityId>,
}

impl PairOutcome {
    pub fn linked_at(&self, n: usize) -> bool {
        self.answer_nbest
            .iter()
            .take(n)
            .any(|links| links.contains(&self.gold))
    }

    pub fn identified_correctly(&self) -> bool {
        self.linked_at(1) && self.identified.as_ref() == Some(&self.gold)
    }
}

/// Fraction of pairs whose top-n hypotheses contain the gold entity.
pub fn linking_accuracy(outcomes: &[PairOutcome], n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("@n requires n >= 1".into()));
    }
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("no pairs to evaluate".into()));
    }
    let correct = outcomes.iter().filter(|o| o.linked_at(n)).count();
    Ok(correct as f64 / outcomes.len() as f64)
}

/// Fraction of correctly linked (@1) pairs whose identified entity equals
/// gold. Returns `(accuracy, denominator_was_zero)`.
pub fn identification_accuracy(outcomes: &[PairOutcome]) -> (f64, bool) {
    let linked = outcomes.iter().filter(|o| o.linked_at(1)).count();
    if linked == 0 {
        return (0.0, true);
    }
    let correct = outcomes.iter().filter(|o| o.identified_correctly()).count();
    (correct as f64 / linked as f64, false)
}

/// End-to-end fraction of pairs with a correctly identified denotation.
pub fn extraction_accuracy(outcomes: &[PairOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("no pairs to evaluate".into()));
    }
    let correct = outcomes.iter().filter(|o| o.identified_correctly()).count();
    Ok(correct as f64 / outcomes.len() as f64)
}

/// Half-width of the 95% binomial confidence interval under the normal
/// approximation: `1.96 * sqrt(p (1 - p) / n)`.
pub fn binomial_ci_halfwidth(p: f64, n: usize) -> f64 {
    debug_assert!(n >= 1);
    debug_assert!((0.0..=1.0).contains(&p));
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Exact Clopper-Pearson 95% interval, for diagnostics. Bounds solve the
/// binomial tail equations by bisection.
pub fn clopper_pearson_interval(successes: usize, n: usize) -> (f64, f64) {
    assert!(n >= 1 && successes <= n);
    let alpha = 0.05;
    let k = successes;

    // P(X >= k | p) and P(X <= k | p) via log-space binomial pmf sums
    let log_choose = |n: usize, k: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..k {
            acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        acc
    };
    let pmf = |i: usize, p: f64| -> f64 {
        if p <= 0.0 {
            return if i == 0 { 1.0 } else { 0.0 };
        }
        if p >= 1.0 {
            return if i == n { 1.0 } else { 0.0 };
        }
        (log_choose(n, i) + (i as f64) * p.ln() + ((n - i) as f64) * (1.0 - p).ln()).exp()
    };
    let tail_ge = |p: f64| -> f64 { (k..=n).map(|i| pmf(i, p)).sum() };
    let tail_le = |p: f64| -> f64 { (0..=k).map(|i| pmf(i, p)).sum() };

    let bisect = |f: &dyn Fn(f64) -> f64, target: f64, increasing: bool| -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let v = f(mid);
            let go_right = if increasing { v < target } else { v > target };
            if go_right {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let lower = if k == 0 {
        0.0
    } else {
        // P(X >= k | p) increases with p; lower bound where it equals alpha/2
        bisect(&|p| tail_ge(p), alpha / 2.0, true)
    };
    let upper = if k == n {
        1.0
    } else {
        // P(X <= k | p) decreases with p; upper bound where it equals alpha/2
        bisect(&|p| tail_le(p), alpha / 2.0, false)
    };
    (lower, upper)
}

/// Aggregated evaluation report. Stores counts; all ratios are derived, so
/// text serialization round-trips exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalReport {
    pub total_pairs: usize,
    /// n -> number of pairs correctly linked @n.
    pub correctly_linked: BTreeMap<usize, usize>,
    pub correctly_identified: usize,
    pub identification_denominator_zero: bool,
}

impl EvalReport {
    /// Builds the report from per-pair outcomes, reporting linking @n for
    /// each requested n.
    pub fn from_outcomes(outcomes: &[PairOutcome], at_ns: &[usize]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptyInput("no pairs to evaluate".into()));
        }
        let mut ns: Vec<usize> = at_ns.to_vec();
        if !ns.contains(&1) {
            ns.push(1);
        }
        ns.sort_unstable();
        ns.dedup();
        if ns[0] < 1 {
            return Err(Error::InvalidArgument("@n requires n >= 1".into()));
        }
        let mut correctly_linked = BTreeMap::new();
        for &n in &ns {
            correctly_linked.insert(n, outcomes.iter().filter(|o| o.linked_at(n)).count());
        }
        let correctly_identified = outcomes.iter().filter(|o| o.identified_correctly()).count();
        let linked1 = correctly_linked[&1];
        Ok(EvalReport {
            total_pairs: outcomes.len(),
            correctly_linked,
            correctly_identified,
            identification_denominator_zero: linked1 == 0,
        })
    }

    pub fn linking_accuracy(&self, n: usize) -> Option<f64> {
        self.correctly_linked
            .get(&n)
            .map(|&c| c as f64 / self.total_pairs as f64)
    }

    pub fn identification_accuracy(&self) -> f64 {
        let linked1 = self.correctly_linked[&1];
        if linked1 == 0 {
            0.0
        } else {
            self.correctly_identified as f64 / linked1 as f64
        }
    }

    pub fn extraction_accuracy(&self) -> f64 {
        self.correctly_identified as f64 / self.total_pairs as f64
    }

    pub fn linking_ci(&self, n: usize) -> Option<f64> {
        self.linking_accuracy(n)
            .map(|p| binomial_ci_halfwidth(p, self.total_pairs))
    }

    pub fn identification_ci(&self) -> f64 {
        let linked1 = self.correctly_linked[&1];
        if linked1 == 0 {
            0.0
        } else {
            binomial_ci_halfwidth(self.identification_accuracy(), linked1)
        }
    }

    pub fn extraction_ci(&self) -> f64 {
        binomial_ci_halfwidth(self.extraction_accuracy(), self.total_pairs)
    }

    /// Key:value text form. Counts carry the state; ratios are informative.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("total_pairs: {}\n", self.total_pairs));
        for (n, c) in &self.correctly_linked {
            out.push_str(&format!("correctly_linked@{n}: {c}\n"));
        }
        out.push_str(&format!("correctly_identified: {}\n", self.correctly_identified));
        for n in self.correctly_linked.keys() {
            out.push_str(&format!(
                "linking_accuracy@{n}: {:.4}\n",
                self.linking_accuracy(*n).unwrap()
            ));
            out.push_str(&format!(
                "linking_ci@{n}: {:.4}\n",
                self.linking_ci(*n).unwrap()
            ));
        }
        out.push_str(&format!(
            "identification_accuracy: {:.4}\n",
            self.identification_accuracy()
        ));
        out.push_str(&format!("identification_ci: {:.4}\n", self.identification_ci()));
        if self.identification_denominator_zero {
            out.push_str("identification_denominator_zero: true\n");
        }
        out.push_str(&format!(
            "extraction_accuracy: {:.4}\n",
            self.extraction_accuracy()
        ));
        out.push_str(&format!("extraction_ci: {:.4}\n", self.extraction_ci()));
        out
    }

    /// Parses the output of [`to_text`](Self::to_text); only the count lines
    /// matter, ratios are recomputed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut total_pairs = None;
        let mut correctly_linked = BTreeMap::new();
        let mut correctly_identified = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let Some((key, value)) = line.split_once(':') else {
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            if key == "total_pairs" {
                total_pairs = Some(value.parse::<usize>().map_err(|_| {
                    Error::parse("report", lineno, "bad total_pairs")
                })?);
            } else if let Some(n) = key.strip_prefix("correctly_linked@") {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::parse("report", lineno, "bad @n key"))?;
                let c: usize = value
                    .parse()
                    .map_err(|_| Error::parse("report", lineno, "bad linked count"))?;
                correctly_linked.insert(n, c);
            } else if key == "correctly_identified" {
                correctly_identified = Some(value.parse::<usize>().map_err(|_| {
                    Error::parse("report", lineno, "bad correctly_identified")
                })?);
            }
        }
        let total_pairs =
            total_pairs.ok_or_else(|| Error::parse("report", 0, "missing total_pairs"))?;
        let correctly_identified = correctly_identified
            .ok_or_else(|| Error::parse("report", 0, "missing correctly_identified"))?;
        if !correctly_linked.contains_key(&1) {
            return Err(Error::parse("report", 0, "missing correctly_linked@1"));
        }
        let linked1 = correctly_linked[&1];
        Ok(EvalReport {
            total_pairs,
            correctly_linked,
            correctly_identified,
            identification_denominator_zero: linked1 == 0,
        })
    }

    /// Compact table: one `metric | accuracy | ci` row per measure.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<26} {:>8} {:>8}\n", "metric", "acc", "ci"));
        for n in self.correctly_linked.keys() {
            out.push_str(&format!(
                "{:<26} {:>8.4} {:>8.4}\n",
                format!("linking accuracy @{n}"),
                self.linking_accuracy(*n).unwrap(),
                self.linking_ci(*n).unwrap()
            ));
        }
        out.push_str(&format!(
            "{:<26} {:>8.4} {:>8.4}\n",
            "identification accuracy",
            self.identification_accuracy(),
            self.identification_ci()
        ));
        out.push_str(&format!(
            "{:<26} {:>8.4} {:>8.4}\n",
            "extraction accuracy",
            self.extraction_accuracy(),
            self.extraction_ci()
        ));
        out
    }
}
