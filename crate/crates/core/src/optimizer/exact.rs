//! Exact per-video solver.
//!
//! Demands are grouped by quality; a group's placements and assignments
//! interact with other groups only through the shared delay budget. Each
//! group is expanded item by item into labels `(cost, delay, tie key, open
//! sites)`, keeping per open-site set only the labels not dominated in
//! (cost, delay). The group frontiers are then combined under the delay
//! budget and the cheapest combination wins.
//!
//! Pruning uses an incumbent from a drop heuristic, per-group cost lower
//! bounds (cheapest serving site per item, plus one opening when the group
//! has no forced site) and per-item minimum delays. Sites dominated in
//! opening price, serving price and delay to every demanding region are
//! removed up front.

use std::cmp::Ordering;

use crate::model::{AllocationPlan, LiveVideo, Quality, RegionId};
use crate::num::Scalar;
use crate::pricing::CloudModel;

use super::{OptimizerConfig, OptimizerError, TieKey};

const ROOT: u32 = u32::MAX;

struct Item {
    viewer: RegionId,
    viewers: u64,
}

struct Group<S> {
    quality: Quality,
    items: Vec<Item>,
    sites: Vec<RegionId>,
    forced: Option<RegionId>,
    /// `serve[item][site_idx] = (cost, delay-weight)`
    serve: Vec<Vec<(S, S)>>,
    cost_suffix: Vec<S>,
    lat_suffix: Vec<S>,
    base_cost: S,
    base_key: TieKey,
    base_mask: u32,
    lb_cost: S,
    min_lat: S,
}

#[derive(Clone, Copy)]
struct Label<S> {
    cost: S,
    lat: S,
    key: TieKey,
    mask: u32,
    node: u32,
}

#[derive(Clone, Copy)]
struct Comb<S> {
    cost: S,
    lat: S,
    key: TieKey,
    prev: u32,
    pick: u32,
}

struct Budget {
    nodes: u64,
    limit: u64,
}

impl Budget {
    fn spend(&mut self, k: u64) -> bool {
        self.nodes += k;
        self.nodes <= self.limit
    }
}

fn cmp<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

fn bit(r: RegionId) -> u32 {
    1u32 << r.0
}

pub(super) fn solve<S: Scalar>(
    video: &LiveVideo,
    cloud: &CloudModel<S>,
    cfg: &OptimizerConfig<S>,
) -> Result<AllocationPlan, OptimizerError> {
    let meta = &video.meta;
    let (qb, rb) = (meta.original_quality, meta.broadcast_region);
    let total = video.total_viewers();

    if total == 0 {
        let mut plan = AllocationPlan::new();
        plan.place(qb, rb);
        return Ok(plan);
    }

    let tol = cfg.tolerance;
    let budget_lat = (cfg.delay_threshold + tol) * S::from_count(total);
    let groups = build_groups(video, cloud);

    let min_lat: S = groups.iter().map(|g| g.min_lat).sum();
    if min_lat > budget_lat {
        return Err(OptimizerError::Infeasible {
            video: meta.id,
            threshold_ms: cfg.delay_threshold.as_f64(),
            min_latency_ms: (min_lat / S::from_count(total)).as_f64(),
        });
    }

    let open_cost = opening_costs(video, cloud);
    let (ub_cost, ub_plan) = incumbent(&groups, &open_cost, budget_lat, tol);
    let mut budget = Budget {
        nodes: 0,
        limit: cfg.node_limit,
    };
    let bail = |plan: AllocationPlan| OptimizerError::NodeLimitExceeded {
        video: meta.id,
        limit: cfg.node_limit,
        best: Some(Box::new(plan)),
    };

    // Fast path: the cost-only optimum, if it happens to meet the budget.
    let mut free = Vec::with_capacity(groups.len());
    for (gi, g) in groups.iter().enumerate() {
        let others = Others::new(&groups, gi);
        match expand_group(g, &open_cost, &others, ub_cost, budget_lat, tol, true, &mut budget) {
            Some(f) => free.push(f),
            None => return Err(bail(ub_plan)),
        }
    }
    let picks: Vec<usize> = free.iter().map(|f| best_index(&f.points, tol)).collect();
    let lat: S = picks.iter().zip(&free).map(|(&i, f)| f.points[i].lat).sum();
    if lat <= budget_lat {
        let chosen: Vec<(&Frontier<S>, usize)> = free.iter().zip(picks).collect();
        return Ok(assemble(&groups, &chosen));
    }

    let mut fronts = Vec::with_capacity(groups.len());
    for (gi, g) in groups.iter().enumerate() {
        let others = Others::new(&groups, gi);
        match expand_group(g, &open_cost, &others, ub_cost, budget_lat, tol, false, &mut budget) {
            Some(f) => fronts.push(f),
            None => return Err(bail(ub_plan)),
        }
    }

    // Combine group frontiers under the shared delay budget.
    let mut levels: Vec<Vec<Comb<S>>> = Vec::with_capacity(fronts.len());
    for (gi, f) in fronts.iter().enumerate() {
        let rest_cost: S = groups[gi + 1..].iter().map(|g| g.lb_cost).sum();
        let rest_lat: S = groups[gi + 1..].iter().map(|g| g.min_lat).sum();
        let prev: Vec<Comb<S>> = match levels.last() {
            Some(l) => l.clone(),
            None => vec![Comb {
                cost: S::zero(),
                lat: S::zero(),
                key: TieKey::default(),
                prev: ROOT,
                pick: ROOT,
            }],
        };
        let mut next = Vec::new();
        for (ci, c) in prev.iter().enumerate() {
            for (pi, p) in f.points.iter().enumerate() {
                let cost = c.cost + p.cost;
                let lat = c.lat + p.lat;
                if lat + rest_lat > budget_lat || cost + rest_cost > ub_cost + tol {
                    continue;
                }
                next.push(Comb {
                    cost,
                    lat,
                    key: c.key + p.key,
                    prev: ci as u32,
                    pick: pi as u32,
                });
            }
        }
        if !budget.spend(next.len() as u64) {
            return Err(bail(ub_plan));
        }
        pareto(&mut next, tol, false, |c| (c.cost, c.lat, c.key));
        levels.push(next);
    }

    let last = levels.last().expect("at least one group");
    if last.is_empty() {
        // Every combination was pruned against the incumbent, so the
        // incumbent is optimal.
        return Ok(ub_plan);
    }
    let best = best_index_by(last, tol, |c| (c.cost, c.key));
    if last[best].cost > ub_cost + tol {
        return Ok(ub_plan);
    }
    let mut picks = vec![0usize; levels.len()];
    let mut idx = best;
    for li in (0..levels.len()).rev() {
        let c = levels[li][idx];
        picks[li] = c.pick as usize;
        idx = c.prev as usize;
    }
    let chosen: Vec<(&Frontier<S>, usize)> = fronts.iter().zip(picks).collect();
    Ok(assemble(&groups, &chosen))
}

fn opening_costs<S: Scalar>(video: &LiveVideo, cloud: &CloudModel<S>) -> Vec<S> {
    let mig = cloud.prices.eta(video.meta.broadcast_region) * cloud.ladder.kappa(video.meta.original_quality);
    cloud.rtt.regions().map(|r| cloud.prices.zeta(r) + mig).collect()
}

fn build_groups<S: Scalar>(video: &LiveVideo, cloud: &CloudModel<S>) -> Vec<Group<S>> {
    let (qb, rb) = (video.meta.original_quality, video.meta.broadcast_region);
    let open_cost = opening_costs(video, cloud);
    let mut qualities = video.demand.qualities();
    qualities.insert(qb);

    qualities
        .into_iter()
        .map(|q| {
            let mut items: Vec<Item> = video
                .demand
                .iter()
                .filter(|&(_, dq, _)| dq == q)
                .map(|(w, _, p)| Item { viewer: w, viewers: p })
                .collect();
            items.sort_by(|a, b| b.viewers.cmp(&a.viewers).then(a.viewer.cmp(&b.viewer)));
            let forced = (q == qb).then_some(rb);
            let sites = undominated_sites(cloud, &open_cost, &items, forced);
            let kappa = cloud.ladder.kappa(q);
            let serve: Vec<Vec<(S, S)>> = items
                .iter()
                .map(|it| {
                    let p = S::from_count(it.viewers);
                    sites
                        .iter()
                        .map(|&s| (cloud.prices.omega(s) * kappa * p, p * cloud.rtt.get(s, it.viewer)))
                        .collect()
                })
                .collect();

            let k = items.len();
            let mut cost_suffix = vec![S::zero(); k + 1];
            let mut lat_suffix = vec![S::zero(); k + 1];
            for j in (0..k).rev() {
                let mc = serve[j].iter().map(|x| x.0).fold(S::infinity(), S::min);
                let ml = serve[j].iter().map(|x| x.1).fold(S::infinity(), S::min);
                cost_suffix[j] = cost_suffix[j + 1] + mc;
                lat_suffix[j] = lat_suffix[j + 1] + ml;
            }
            let (base_cost, base_key, base_mask) = match forced {
                Some(r) => (open_cost[r.0], TieKey::of_placement(q, r), bit(r)),
                None => (S::zero(), TieKey::default(), 0),
            };
            let min_open = if forced.is_none() && k > 0 {
                sites.iter().map(|s| open_cost[s.0]).fold(S::infinity(), S::min)
            } else {
                S::zero()
            };
            Group {
                quality: q,
                lb_cost: base_cost + cost_suffix[0] + min_open,
                min_lat: lat_suffix[0],
                items,
                sites,
                forced,
                serve,
                cost_suffix,
                lat_suffix,
                base_cost,
                base_key,
                base_mask,
            }
        })
        .collect()
}

/// Drops sites that another site beats (or ties) on opening price, serving
/// price and delay to every demanding region of the group. A forced site is
/// already paid for, so it only has to match serving price and delays.
fn undominated_sites<S: Scalar>(
    cloud: &CloudModel<S>,
    open_cost: &[S],
    items: &[Item],
    forced: Option<RegionId>,
) -> Vec<RegionId> {
    let all: Vec<RegionId> = cloud.rtt.regions().collect();
    if items.is_empty() {
        return forced.into_iter().collect();
    }
    let beats = |a: RegionId, b: RegionId| {
        cloud.prices.omega(a) <= cloud.prices.omega(b)
            && items.iter().all(|it| cloud.rtt.get(a, it.viewer) <= cloud.rtt.get(b, it.viewer))
    };
    all.iter()
        .copied()
        .filter(|&s| {
            if Some(s) == forced {
                return true;
            }
            let by_forced = forced.is_some_and(|f| beats(f, s));
            let by_lower = all
                .iter()
                .any(|&t| t < s && open_cost[t.0] <= open_cost[s.0] && beats(t, s));
            !(by_forced || by_lower)
        })
        .collect()
}

/// Lower bounds contributed by every group other than the current one.
struct Others<S> {
    cost: S,
    lat: S,
}

impl<S: Scalar> Others<S> {
    fn new(groups: &[Group<S>], skip: usize) -> Self {
        let mut cost = S::zero();
        let mut lat = S::zero();
        for (i, g) in groups.iter().enumerate() {
            if i != skip {
                cost += g.lb_cost;
                lat += g.min_lat;
            }
        }
        Self { cost, lat }
    }
}

struct Frontier<S> {
    points: Vec<Label<S>>,
    /// `(parent, site)` per expanded node.
    nodes: Vec<(u32, RegionId)>,
}

impl<S: Scalar> Frontier<S> {
    fn sites_of(&self, point: usize, n_items: usize) -> Vec<RegionId> {
        let mut out = vec![RegionId(0); n_items];
        let mut node = self.points[point].node;
        for j in (0..n_items).rev() {
            let (parent, site) = self.nodes[node as usize];
            out[j] = site;
            node = parent;
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn expand_group<S: Scalar>(
    g: &Group<S>,
    open_cost: &[S],
    others: &Others<S>,
    ub_cost: S,
    budget_lat: S,
    tol: S,
    ignore_lat: bool,
    budget: &mut Budget,
) -> Option<Frontier<S>> {
    let mut nodes: Vec<(u32, RegionId)> = Vec::new();
    let mut labels = vec![Label {
        cost: g.base_cost,
        lat: S::zero(),
        key: g.base_key,
        mask: g.base_mask,
        node: ROOT,
    }];

    for (j, row) in g.serve.iter().enumerate() {
        let mut next = Vec::with_capacity(labels.len() * g.sites.len());
        for l in &labels {
            for (si, &s) in g.sites.iter().enumerate() {
                let fresh = l.mask & bit(s) == 0;
                let (c, d) = row[si];
                let cost = l.cost + c + if fresh { open_cost[s.0] } else { S::zero() };
                let lat = l.lat + d;
                if cost + g.cost_suffix[j + 1] + others.cost > ub_cost + tol {
                    continue;
                }
                if !ignore_lat && lat + g.lat_suffix[j + 1] + others.lat > budget_lat {
                    continue;
                }
                nodes.push((l.node, s));
                next.push(Label {
                    cost,
                    lat,
                    key: if fresh { l.key + TieKey::of_placement(g.quality, s) } else { l.key },
                    mask: l.mask | bit(s),
                    node: (nodes.len() - 1) as u32,
                });
            }
        }
        if !budget.spend(next.len() as u64) {
            return None;
        }
        // Same open set means identical futures, so dominance is exact.
        next.sort_by(|a, b| a.mask.cmp(&b.mask));
        let mut kept = Vec::with_capacity(next.len());
        let mut start = 0;
        while start < next.len() {
            let mask = next[start].mask;
            let end = start + next[start..].iter().take_while(|l| l.mask == mask).count();
            let mut run = next[start..end].to_vec();
            pareto(&mut run, tol, ignore_lat, |l| (l.cost, l.lat, l.key));
            kept.extend(run);
            start = end;
        }
        labels = kept;
    }

    pareto(&mut labels, tol, ignore_lat, |l| (l.cost, l.lat, l.key));
    Some(Frontier { points: labels, nodes })
}

/// In-place dominance filter. `a` dominates `b` when it is no slower and
/// either cheaper beyond `tol`, or equally cheap within `tol` with a
/// smaller-or-equal tie key. With `ignore_lat` delays are not compared.
fn pareto<T: Copy, S: Scalar>(v: &mut Vec<T>, tol: S, ignore_lat: bool, f: impl Fn(&T) -> (S, S, TieKey)) {
    v.sort_by(|a, b| {
        let (ca, la, ka) = f(a);
        let (cb, lb, kb) = f(b);
        let primary = if ignore_lat { Ordering::Equal } else { cmp(la, lb) };
        primary.then(cmp(ca, cb)).then(ka.cmp(&kb))
    });
    let mut kept: Vec<T> = Vec::with_capacity(v.len());
    let mut min_cost = S::infinity();
    for &x in v.iter() {
        let (c, _, k) = f(&x);
        if min_cost < c - tol {
            continue;
        }
        let dominated = kept.iter().any(|y| {
            let (cy, _, ky) = f(y);
            cy <= c + tol && ky <= k
        });
        if !dominated {
            min_cost = min_cost.min(c);
            kept.push(x);
        }
    }
    *v = kept;
}

fn best_index<S: Scalar>(points: &[Label<S>], tol: S) -> usize {
    best_index_by(points, tol, |l| (l.cost, l.key))
}

/// Cheapest entry; among entries within `tol` of it, the smallest tie key.
fn best_index_by<T, S: Scalar>(v: &[T], tol: S, f: impl Fn(&T) -> (S, TieKey)) -> usize {
    let min = v.iter().map(|x| f(x).0).fold(S::infinity(), S::min);
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        let (c, k) = f(x);
        if c <= min + tol && best.is_none_or(|b| k < f(&v[b]).1) {
            best = Some(i);
        }
    }
    best.expect("non-empty candidate list")
}

fn assemble<S: Scalar>(groups: &[Group<S>], chosen: &[(&Frontier<S>, usize)]) -> AllocationPlan {
    let mut plan = AllocationPlan::new();
    for (g, (front, idx)) in groups.iter().zip(chosen) {
        if let Some(r) = g.forced {
            plan.place(g.quality, r);
        }
        let sites = front.sites_of(*idx, g.items.len());
        for (it, s) in g.items.iter().zip(sites) {
            plan.place(g.quality, s);
            plan.assign(g.quality, it.viewer, s);
        }
    }
    plan
}

/// Feasible starting plan: each demand served from its fastest candidate
/// site, then sites are closed greedily while the delay budget allows and
/// the cost drops.
fn incumbent<S: Scalar>(groups: &[Group<S>], open_cost: &[S], budget_lat: S, tol: S) -> (S, AllocationPlan) {
    // per group: chosen site index per item
    let mut choice: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            g.serve
                .iter()
                .map(|row| {
                    (0..row.len())
                        .min_by(|&a, &b| cmp(row[a].1, row[b].1).then(cmp(row[a].0, row[b].0)))
                        .expect("candidate site")
                })
                .collect()
        })
        .collect();

    let eval = |choice: &[Vec<usize>]| -> (S, S) {
        let mut cost = S::zero();
        let mut lat = S::zero();
        for (g, ch) in groups.iter().zip(choice) {
            let mut mask = g.base_mask;
            cost += g.base_cost;
            for (j, &si) in ch.iter().enumerate() {
                let s = g.sites[si];
                if mask & bit(s) == 0 {
                    cost += open_cost[s.0];
                    mask |= bit(s);
                }
                cost += g.serve[j][si].0;
                lat += g.serve[j][si].1;
            }
        }
        (cost, lat)
    };

    let (mut cost, _) = eval(&choice);
    loop {
        let mut best: Option<(S, Vec<Vec<usize>>)> = None;
        for (gi, g) in groups.iter().enumerate() {
            let used: Vec<usize> = {
                let mut u: Vec<usize> = choice[gi].clone();
                u.sort_unstable();
                u.dedup();
                u
            };
            for &close in &used {
                if Some(g.sites[close]) == g.forced {
                    continue;
                }
                let mut open: Vec<usize> = used.iter().copied().filter(|&s| s != close).collect();
                if let Some(f) = g.forced {
                    if let Some(fi) = g.sites.iter().position(|&s| s == f) {
                        if !open.contains(&fi) {
                            open.push(fi);
                        }
                    }
                }
                if open.is_empty() {
                    continue;
                }
                let mut trial = choice.clone();
                for (j, si) in trial[gi].iter_mut().enumerate() {
                    if *si == close {
                        *si = *open
                            .iter()
                            .min_by(|&&a, &&b| cmp(g.serve[j][a].0, g.serve[j][b].0).then(cmp(g.serve[j][a].1, g.serve[j][b].1)))
                            .expect("open site");
                    }
                }
                let (c, l) = eval(&trial);
                if l <= budget_lat && c < cost - tol && best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    best = Some((c, trial));
                }
            }
        }
        match best {
            Some((c, t)) => {
                cost = c;
                choice = t;
            }
            None => break,
        }
    }

    let mut plan = AllocationPlan::new();
    for (g, ch) in groups.iter().zip(&choice) {
        if let Some(r) = g.forced {
            plan.place(g.quality, r);
        }
        for (it, &si) in g.items.iter().zip(ch) {
            plan.place(g.quality, g.sites[si]);
            plan.assign(g.quality, it.viewer, g.sites[si]);
        }
    }
    (cost, plan)
}
