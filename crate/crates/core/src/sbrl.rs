//! Bayesian rule-list learning by MCMC over a pre-mined antecedent pool.
//!
//! The posterior of a list `d = (a_1, ..., a_m, default)` is
//!
//! ```text
//! log p(d | X, Y) = log Poisson_trunc(m; lambda, 0..=M)
//!                 + sum_j [ log Poisson_trunc(|a_j|; eta, cardinalities in pool)
//!                           - log #(pool members with cardinality |a_j|) ]
//!                 + sum_rules log DirichletMultinomial(captured label counts; alpha)
//! ```
//!
//! where `M = min(|pool|, max_length)`. Chains start from the empty list and
//! propose inserting a pool member, removing a rule, or swapping two rules;
//! moves are accepted by Metropolis-Hastings on a temperature that anneals
//! from `initial_temperature` down to 1 over the first half of each chain.
//! The highest-posterior list visited by any chain is returned.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::dataset::Instances;
use crate::error::{Error, Result};
use crate::math;
use crate::rulelist::{CandidateAntecedent, Priors, Rule, RuleList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub chains: usize,
    pub seed: u64,
    /// Proposal probabilities for insert / remove / swap.
    pub proposal: [f64; 3],
    pub initial_temperature: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { iterations: 50_000, chains: 3, seed: 0, proposal: [0.4, 0.3, 0.3], initial_temperature: 2.0 }
    }
}

/// Precomputed posterior over lists of pool indices.
pub struct RuleListPosterior {
    satisfied: Vec<Bitset>,
    class_masks: Vec<Bitset>,
    n: usize,
    classes: usize,
    max_len: usize,
    ln_lambda: f64,
    ln_length_norm: f64,
    /// Indexed by pool member: cardinality prior minus log pool-group size.
    antecedent_prior: Vec<f64>,
    /// `lnΓ(k + alpha)` for k in 0..=n
    ln_gamma_alpha: Vec<f64>,
    /// `lnΓ(k + C alpha)` for k in 0..=n
    ln_gamma_c_alpha: Vec<f64>,
    ln_gamma_alpha0: f64,
    ln_gamma_c_alpha0: f64,
}

impl RuleListPosterior {
    pub fn new(
        rows: &Instances,
        labels: &[usize],
        classes: usize,
        pool: &[CandidateAntecedent],
        priors: &Priors,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        if rows.is_empty() || labels.is_empty() {
            return Err(Error::NoData);
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(alloc::format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        if !(priors.lambda > 0.0 && priors.eta > 0.0 && priors.alpha > 0.0) {
            return Err(Error::InvalidArgument("lambda, eta and alpha must be positive".into()));
        }
        if classes == 0 || labels.iter().any(|&y| y >= classes) {
            return Err(Error::InvalidArgument("label out of range".into()));
        }
        let n = rows.len();
        let satisfied: Vec<Bitset> = pool
            .iter()
            .map(|a| {
                let mut s = Bitset::empty(n);
                for (i, x) in rows.rows().enumerate() {
                    if a.matches(x) {
                        s.insert(i);
                    }
                }
                s
            })
            .collect();
        let mut class_masks = vec![Bitset::empty(n); classes];
        for (i, &y) in labels.iter().enumerate() {
            class_masks[y].insert(i);
        }

        let max_len = priors.max_length.map_or(pool.len(), |m| m.min(pool.len()));
        let ln_lambda = math::ln(priors.lambda);
        let terms: Vec<f64> = (0..=max_len).map(|j| j as f64 * ln_lambda - math::ln_gamma(j as f64 + 1.0)).collect();
        let ln_length_norm = math::log_sum_exp(&terms);

        let max_card = pool.iter().map(|a| a.cardinality()).max().unwrap_or(0);
        let mut group_size = vec![0usize; max_card + 1];
        for a in pool {
            group_size[a.cardinality()] += 1;
        }
        let ln_eta = math::ln(priors.eta);
        let card_term = |c: usize| c as f64 * ln_eta - math::ln_gamma(c as f64 + 1.0);
        let avail: Vec<f64> = (0..=max_card).filter(|&c| group_size[c] > 0).map(card_term).collect();
        let ln_card_norm = math::log_sum_exp(&avail);
        let antecedent_prior = pool
            .iter()
            .map(|a| {
                let c = a.cardinality();
                card_term(c) - ln_card_norm - math::ln(group_size[c] as f64)
            })
            .collect();

        let alpha = priors.alpha;
        let c_alpha = classes as f64 * alpha;
        Ok(RuleListPosterior {
            satisfied,
            class_masks,
            n,
            classes,
            max_len,
            ln_lambda,
            ln_length_norm,
            antecedent_prior,
            ln_gamma_alpha: (0..=n).map(|k| math::ln_gamma(k as f64 + alpha)).collect(),
            ln_gamma_c_alpha: (0..=n).map(|k| math::ln_gamma(k as f64 + c_alpha)).collect(),
            ln_gamma_alpha0: math::ln_gamma(alpha),
            ln_gamma_c_alpha0: math::ln_gamma(c_alpha),
        })
    }

    pub fn pool_len(&self) -> usize {
        self.satisfied.len()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn log_prior(&self, list: &[usize]) -> f64 {
        let m = list.len();
        let length = m as f64 * self.ln_lambda - math::ln_gamma(m as f64 + 1.0) - self.ln_length_norm;
        length + list.iter().map(|&a| self.antecedent_prior[a]).sum::<f64>()
    }

    fn rule_log_likelihood(&self, counts: &[usize]) -> f64 {
        let total: usize = counts.iter().sum();
        let mut ll = self.ln_gamma_c_alpha0 - self.ln_gamma_c_alpha[total];
        for &k in counts {
            ll += self.ln_gamma_alpha[k] - self.ln_gamma_alpha0;
        }
        ll
    }

    /// Per-rule captured class counts, default rule last.
    pub fn captured_counts(&self, list: &[usize]) -> Vec<Vec<usize>> {
        let mut remaining = Bitset::full(self.n);
        let mut out = Vec::with_capacity(list.len() + 1);
        let mut counts = vec![0usize; self.classes];
        for &a in list {
            self.capture(&mut remaining, Some(a), &mut counts);
            out.push(counts.clone());
        }
        self.capture(&mut remaining, None, &mut counts);
        out.push(counts);
        out
    }

    /// Counts the classes of `remaining ∩ sat(a)` into `counts` and removes
    /// them from `remaining`. `None` captures everything left.
    fn capture(&self, remaining: &mut Bitset, antecedent: Option<usize>, counts: &mut [usize]) {
        counts.iter_mut().for_each(|c| *c = 0);
        let last = self.classes - 1;
        let mut total = 0usize;
        let sat = antecedent.map(|a| self.satisfied[a].words());
        let rem = remaining.words_mut();
        for w in 0..rem.len() {
            let cap = match sat {
                Some(s) => rem[w] & s[w],
                None => rem[w],
            };
            if cap == 0 {
                continue;
            }
            total += cap.count_ones() as usize;
            for (c, mask) in self.class_masks[..last].iter().enumerate() {
                counts[c] += (cap & mask.words()[w]).count_ones() as usize;
            }
            rem[w] &= !cap;
        }
        let others: usize = counts[..last].iter().sum();
        counts[last] = total - others;
    }

    pub fn log_likelihood(&self, list: &[usize]) -> f64 {
        self.captured_counts(list).iter().map(|c| self.rule_log_likelihood(c)).sum()
    }

    pub fn log_posterior(&self, list: &[usize]) -> f64 {
        self.log_prior(list) + self.log_likelihood(list)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub best: Vec<usize>,
    pub best_log_posterior: f64,
    pub accepted: usize,
}

struct ChainScratch {
    full: Bitset,
    remaining: Bitset,
    counts: Vec<usize>,
}

impl RuleListPosterior {
    fn eval(&self, list: &[usize], s: &mut ChainScratch) -> f64 {
        s.remaining.copy_from(&s.full);
        let mut ll = 0.0;
        for &a in list {
            self.capture(&mut s.remaining, Some(a), &mut s.counts);
            ll += self.rule_log_likelihood(&s.counts);
        }
        self.capture(&mut s.remaining, None, &mut s.counts);
        ll += self.rule_log_likelihood(&s.counts);
        self.log_prior(list) + ll
    }

    /// Runs one chain. `progress` receives the number of iterations done.
    pub fn run_chain(&self, config: &McmcConfig, chain: usize, progress: &mut dyn FnMut(usize)) -> ChainResult {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(chain as u64));
        let mut scratch =
            ChainScratch { full: Bitset::full(self.n), remaining: Bitset::full(self.n), counts: vec![0; self.classes] };
        let pool = self.pool_len();
        let [p_ins, p_rem, p_swap] = config.proposal;
        let norm = p_ins + p_rem + p_swap;
        let (p_ins, p_rem) = (p_ins / norm, p_rem / norm);
        let (ln_ins, ln_rem) = (math::ln(p_ins), math::ln(p_rem));

        let mut current: Vec<usize> = Vec::new();
        let mut in_list = vec![false; pool];
        let mut current_lp = self.eval(&current, &mut scratch);
        let mut best = (current_lp, current.clone());
        let mut accepted = 0;
        let anneal_until = (config.iterations / 2).max(1);
        let mut proposal: Vec<usize> = Vec::new();

        for it in 0..config.iterations {
            if it % 1000 == 0 {
                progress(it);
            }
            let temperature = if it < anneal_until {
                config.initial_temperature + (1.0 - config.initial_temperature) * it as f64 / anneal_until as f64
            } else {
                1.0
            };
            let m = current.len();
            let u: f64 = rng.random();
            proposal.clear();
            proposal.extend_from_slice(&current);
            let (log_q, changed) = if u < p_ins {
                if m >= self.max_len || m >= pool {
                    continue;
                }
                let a = loop {
                    let a = rng.random_range(0..pool);
                    if !in_list[a] {
                        break a;
                    }
                };
                let pos = rng.random_range(0..=m);
                proposal.insert(pos, a);
                (ln_rem + math::ln((pool - m) as f64) - ln_ins, (Some(a), None))
            } else if u < p_ins + p_rem {
                if m == 0 {
                    continue;
                }
                let pos = rng.random_range(0..m);
                let a = proposal.remove(pos);
                (ln_ins - math::ln((pool - m + 1) as f64) - ln_rem, (None, Some(a)))
            } else {
                if m < 2 {
                    continue;
                }
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                proposal.swap(i, j);
                (0.0, (None, None))
            };
            let lp = self.eval(&proposal, &mut scratch);
            let log_accept = (lp - current_lp) / temperature + log_q;
            let draw: f64 = rng.random();
            if log_accept >= 0.0 || math::ln(draw) < log_accept {
                core::mem::swap(&mut current, &mut proposal);
                current_lp = lp;
                accepted += 1;
                if let Some(a) = changed.0 {
                    in_list[a] = true;
                }
                if let Some(a) = changed.1 {
                    in_list[a] = false;
                }
                if lp > best.0 {
                    best = (lp, current.clone());
                }
            }
        }
        progress(config.iterations);
        ChainResult { best: best.1, best_log_posterior: best.0, accepted }
    }

    /// Materializes a list of pool indices as a [`RuleList`], computing each
    /// rule's smoothed output `(n_c + alpha) / (n + C alpha)`.
    pub fn build_rule_list(
        &self,
        pool: &[CandidateAntecedent],
        list: &[usize],
        priors: &Priors,
    ) -> Result<RuleList> {
        let counts = self.captured_counts(list);
        let c_alpha = self.classes as f64 * priors.alpha;
        let make = |clauses, counts: &Vec<usize>| {
            let n: usize = counts.iter().sum();
            Rule {
                clauses,
                output: counts.iter().map(|&k| (k as f64 + priors.alpha) / (n as f64 + c_alpha)).collect(),
                capture_count: n,
            }
        };
        let mut rules: Vec<Rule> = list.iter().zip(&counts).map(|(&a, c)| make(pool[a].clauses.clone(), c)).collect();
        rules.push(make(Vec::new(), counts.last().expect("default rule counts")));
        RuleList::new(rules, priors.clone(), self.log_posterior(list))
    }
}

/// Trains a rule list; chains run one after another.
pub fn train_rule_list(
    rows: &Instances,
    labels: &[usize],
    classes: usize,
    pool: &[CandidateAntecedent],
    priors: &Priors,
    mcmc: &McmcConfig,
) -> Result<RuleList> {
    train_rule_list_with_progress(rows, labels, classes, pool, priors, mcmc, &mut |_| {})
}

/// As [`train_rule_list`], reporting overall progress in `[0, 1]`.
pub fn train_rule_list_with_progress(
    rows: &Instances,
    labels: &[usize],
    classes: usize,
    pool: &[CandidateAntecedent],
    priors: &Priors,
    mcmc: &McmcConfig,
    progress: &mut dyn FnMut(f64),
) -> Result<RuleList> {
    let posterior = RuleListPosterior::new(rows, labels, classes, pool, priors)?;
    let chains = mcmc.chains.max(1);
    let total = (chains * mcmc.iterations).max(1) as f64;
    let mut best: Option<ChainResult> = None;
    for chain in 0..chains {
        let done = (chain * mcmc.iterations) as f64;
        let result = posterior.run_chain(mcmc, chain, &mut |it| progress((done + it as f64) / total));
        if best.as_ref().is_none_or(|b| result.best_log_posterior > b.best_log_posterior) {
            best = Some(result);
        }
    }
    let best = best.expect("at least one chain");
    posterior.build_rule_list(pool, &best.best, priors)
}
