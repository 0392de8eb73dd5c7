//! Port selection: sequential strongest-port initialization, the MM-S
//! baseline, GS-JPS and an exhaustive reference for tiny instances.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::analytic::{AnalyticModel, Score, UserTerms};
use crate::error::{Error, Result, SelectionError};
use crate::rng::{stream, Domain};
use crate::scenario::ScenarioStatistics;
use crate::selection::PortSelection;

/// Default enumeration limit of [`exhaustive_oracle`].
pub const MAX_SPACE: u128 = 1_000_000;

fn check_counts(stats: &ScenarioStatistics, counts: &[usize]) -> Result<()> {
    if counts.len() != stats.n_bs {
        return Err(Error::Dimension { expected: stats.n_bs, got: counts.len() });
    }
    for (b, &t) in counts.iter().enumerate() {
        if t * stats.n_users > stats.n_antennas {
            return Err(SelectionError::Infeasible { bs: b, needed: t * stats.n_users, available: stats.n_antennas }.into());
        }
    }
    Ok(())
}

/// Ports of `candidates` sorted by descending `β̄_{b,u}`, ties to the lower index.
fn strongest(stats: &ScenarioStatistics, b: usize, u: usize, mut candidates: Vec<usize>) -> Vec<usize> {
    candidates.sort_by(|&i, &j| stats.beta(b, u, j).total_cmp(&stats.beta(b, u, i)).then(i.cmp(&j)));
    candidates
}

/// Users in `order` take, at every BS, the `counts[b]` strongest ports still free.
pub fn init_sequential_strongest(stats: &ScenarioStatistics, counts: &[usize], order: &[usize]) -> Result<PortSelection> {
    check_counts(stats, counts)?;
    let mut sel = PortSelection::empty(stats.n_bs, stats.n_antennas, stats.n_users);
    for (b, &t) in counts.iter().enumerate() {
        let mut free = vec![true; stats.n_antennas];
        for &u in order {
            let avail: Vec<usize> = (0..stats.n_antennas).filter(|&m| free[m]).collect();
            let mut pick = strongest(stats, b, u, avail);
            pick.truncate(t);
            for &m in &pick {
                free[m] = false;
            }
            sel.set(b, u, pick);
        }
    }
    Ok(sel)
}

/// Maximum-magnitude selection: the initialization with users in index order.
pub fn mm_s_baseline(stats: &ScenarioStatistics, counts: &[usize]) -> Result<PortSelection> {
    let order: Vec<usize> = (0..stats.n_users).collect();
    init_sequential_strongest(stats, counts, &order)
}

/// Outcome of one GS-JPS round.
#[derive(Debug, Clone)]
pub struct RoundResult {
    pub order: Vec<usize>,
    pub init_rate: f64,
    pub final_rate: f64,
    pub selection: PortSelection,
    pub swaps: usize,
}

#[derive(Debug, Clone)]
pub struct GsJpsResult {
    pub selection: PortSelection,
    pub sum_rate: f64,
    pub best_round: usize,
    /// Per-round results in round order (rounds with equal permutations share one).
    pub rounds: Vec<RoundResult>,
}

fn score_with(model: &AnalyticModel, terms: &[UserTerms], u: usize, t: &UserTerms) -> Score {
    let mut tmp = terms.to_vec();
    tmp[u] = t.clone();
    model.score_terms(&tmp)
}

/// Initialization for the given user permutation followed by up to `sweeps`
/// swap sweeps, stopping early after a sweep with no accepted swap.
/// A swap is kept when it raises the sum rate without lowering the
/// number of served users.
pub fn gs_jps_round(model: &AnalyticModel, counts: &[usize], order: &[usize], sweeps: usize) -> Result<RoundResult> {
    let st = model.stats;
    let mut sel = init_sequential_strongest(st, counts, order)?;
    let mut terms = model.all_terms(&sel)?;
    let ev = model.evaluate_terms(&terms);
    let init_rate: f64 = ev.rates.iter().sum();
    let mut best = model.score_terms(&terms);
    let mut users: Vec<usize> = (0..st.n_users).collect();
    users.sort_by(|&a, &b| ev.rates[b].total_cmp(&ev.rates[a]).then(a.cmp(&b)));
    let mut swaps = 0;
    for _ in 0..sweeps.max(1) {
        let before = swaps;
        for &u in &users {
            let mut bs: Vec<usize> = (0..st.n_bs).collect();
            bs.sort_by(|&a, &b| st.link_gain(b, u).total_cmp(&st.link_gain(a, u)).then(a.cmp(&b)));
            for &b in &bs {
                let ports = strongest(st, b, u, sel.get(b, u).to_vec());
                for &p in &ports {
                    let owners = sel.owners();
                    let mut best_l: Option<(usize, Score, UserTerms)> = None;
                    let mut zero_seen = false;
                    for l in (0..st.n_antennas).filter(|&l| owners[b * st.n_antennas + l].is_none()) {
                        // every zero-power candidate yields the same terms
                        if st.beta(b, u, l) == 0.0 {
                            if zero_seen {
                                continue;
                            }
                            zero_seen = true;
                        }
                        let mut trial = sel.clone();
                        let mut set: Vec<usize> = trial.get(b, u).iter().copied().filter(|&x| x != p).collect();
                        set.push(l);
                        trial.set(b, u, set);
                        let t = model.terms_for_ports(u, &trial.user_ports(u))?;
                        let r = score_with(model, &terms, u, &t);
                        if r.served < best.served {
                            continue;
                        }
                        if best_l.as_ref().is_none_or(|(_, br, _)| r.sum_rate > br.sum_rate) {
                            best_l = Some((l, r, t));
                        }
                    }
                    if let Some((l, r, t)) = best_l {
                        if r.sum_rate > best.sum_rate {
                            let mut set: Vec<usize> = sel.get(b, u).iter().copied().filter(|&x| x != p).collect();
                            set.push(l);
                            sel.set(b, u, set);
                            terms[u] = t;
                            best = r;
                            swaps += 1;
                        }
                    }
                }
            }
        }
        if swaps == before {
            break;
        }
    }
    Ok(RoundResult { order: order.to_vec(), init_rate, final_rate: best.sum_rate, selection: sel, swaps })
}

/// Greedy-search joint port selection over `n_rand` random user orders.
/// Rounds with the same permutation are evaluated once; the best round wins,
/// ties going to the lowest round index.
pub fn gs_jps(model: &AnalyticModel, counts: &[usize], n_rand: usize, sweeps: usize, seed: u64) -> Result<GsJpsResult> {
    let st = model.stats;
    check_counts(st, counts)?;
    let mut rng = stream(seed, Domain::Selection, 0);
    let perms: Vec<Vec<usize>> = (0..n_rand.max(1))
        .map(|_| {
            let mut p: Vec<usize> = (0..st.n_users).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let mut distinct: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<Vec<usize>, usize> = HashMap::new();
    let index: Vec<usize> = perms
        .iter()
        .map(|p| {
            *slot.entry(p.clone()).or_insert_with(|| {
                distinct.push(p.clone());
                distinct.len() - 1
            })
        })
        .collect();
    let results: Vec<Result<RoundResult>> = distinct.par_iter().map(|p| gs_jps_round(model, counts, p, sweeps)).collect();
    let mut done = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let round = index.iter().position(|&k| k == i).unwrap_or(0);
        done.push(r.map_err(|e| Error::Round { round, source: Box::new(e) })?);
    }
    let rounds: Vec<RoundResult> = index.iter().map(|&k| done[k].clone()).collect();
    let mut best_round = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, r) in rounds.iter().enumerate() {
        if r.final_rate > best {
            best = r.final_rate;
            best_round = i;
        }
    }
    Ok(GsJpsResult { selection: rounds[best_round].selection.clone(), sum_rate: best, best_round, rounds })
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Number of no-sharing selections with the given per-BS counts.
pub fn search_space(stats: &ScenarioStatistics, counts: &[usize]) -> u128 {
    let mut total: u128 = 1;
    for &t in counts {
        for u in 0..stats.n_users {
            total = total.saturating_mul(binom(stats.n_antennas - (u * t).min(stats.n_antennas), t));
        }
    }
    total
}

fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(pool: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < k - cur.len() {
                break;
            }
            cur.push(pool[i]);
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(pool, k, 0, &mut cur, &mut out);
    out
}

/// All ordered assignments of disjoint `t`-subsets of `0..m` to `n_users` users.
fn bs_assignments(m: usize, t: usize, n_users: usize) -> Vec<Vec<Vec<usize>>> {
    let mut acc: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for _ in 0..n_users {
        let mut next = Vec::new();
        for partial in &acc {
            let used: Vec<usize> = partial.iter().flatten().copied().collect();
            let pool: Vec<usize> = (0..m).filter(|x| !used.contains(x)).collect();
            for c in combinations(&pool, t) {
                let mut p = partial.clone();
                p.push(c);
                next.push(p);
            }
        }
        acc = next;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub selection: PortSelection,
    pub sum_rate: f64,
    pub evaluated: u128,
}

/// Exhaustive maximization over all no-sharing selections of the served
/// user count, then the sum rate; the first maximizer in lexicographic
/// order wins.
pub fn exhaustive_oracle(model: &AnalyticModel, counts: &[usize], max_space: u128) -> Result<OracleResult> {
    let st = model.stats;
    check_counts(st, counts)?;
    let size = search_space(st, counts);
    if size > max_space {
        return Err(Error::SearchSpace { size, limit: max_space });
    }
    let per_bs: Vec<Vec<Vec<Vec<usize>>>> = counts.iter().map(|&t| bs_assignments(st.n_antennas, t, st.n_users)).collect();
    let mut cache: Vec<HashMap<Vec<(usize, usize)>, UserTerms>> = vec![HashMap::new(); st.n_users];
    let mut idx = vec![0usize; st.n_bs];
    let mut best: Option<(Score, Vec<usize>)> = None;
    let mut evaluated: u128 = 0;
    loop {
        let mut terms = Vec::with_capacity(st.n_users);
        for (u, c) in cache.iter_mut().enumerate() {
            let ports: Vec<(usize, usize)> = (0..st.n_bs).flat_map(|b| per_bs[b][idx[b]][u].iter().map(move |&m| (b, m))).collect();
            if !c.contains_key(&ports) {
                let t = model.terms_for_ports(u, &ports)?;
                c.insert(ports.clone(), t);
            }
            terms.push(c[&ports].clone());
        }
        let r = model.score_terms(&terms);
        evaluated += 1;
        if best.as_ref().is_none_or(|(br, _)| r > *br) {
            best = Some((r, idx.clone()));
        }
        // odometer, last BS fastest
        let mut b = st.n_bs;
        loop {
            if b == 0 {
                let (score, bi) = best.expect("at least one candidate");
                let mut sel = PortSelection::empty(st.n_bs, st.n_antennas, st.n_users);
                for (bb, &i) in bi.iter().enumerate() {
                    for (u, set) in per_bs[bb][i].iter().enumerate() {
                        sel.set(bb, u, set.clone());
                    }
                }
                return Ok(OracleResult { selection: sel, sum_rate: score.sum_rate, evaluated });
            }
            b -= 1;
            idx[b] += 1;
            if idx[b] < per_bs[b].len() {
                break;
            }
            idx[b] = 0;
        }
    }
}
