//! Stateless operator kernels.
//!
//! Random draws happen in a fixed order so that an independent
//! implementation consuming the same stream reproduces the results:
//! row-major over individuals, then dimensions.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;
use crate::space::{BoundaryOp, CrossoverOp, InitOp, MutationOp, NichingOp, ReductionOp, SelectionOp};

pub type Mat = Vec<Vec<f64>>;

/// Named parameter values for one operator application.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub Vec<(&'static str, f64)>);

impl Params {
    pub fn get(&self, name: &str) -> f64 {
        self.0
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("parameter {name} missing"))
    }

    pub fn get_or(&self, name: &str, default: f64) -> f64 {
        self.0.iter().find(|(n, _)| *n == name).map_or(default, |(_, v)| *v)
    }
}

#[inline]
pub(crate) fn unit(rng: &mut Rng) -> f64 {
    rng.random::<f64>()
}

/// Uniform draw in (0, 1].
#[inline]
pub(crate) fn unit_open0(rng: &mut Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn argmin(f: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..f.len() {
        if f[i] < f[best] {
            best = i;
        }
    }
    best
}

/// Indices sorted by ascending objective (ties by index).
pub fn ranking(f: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..f.len()).collect();
    idx.sort_by(|&a, &b| f[a].total_cmp(&f[b]).then(a.cmp(&b)));
    idx
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

const PRIMES: [u32; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307,
    311,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

/// `np` points in `[lb, ub]^d`.
pub fn initialize(op: InitOp, np: usize, d: usize, lb: f64, ub: f64, rng: &mut Rng) -> Mat {
    let w = ub - lb;
    match op {
        InitOp::Uniform => (0..np).map(|_| (0..d).map(|_| lb + w * unit(rng)).collect()).collect(),
        InitOp::Sobol if d <= 256 => {
            let seed: u32 = rng.random();
            (0..np)
                .map(|i| {
                    (0..d)
                        .map(|j| lb + w * sobol_burley::sample(i as u32, j as u32, seed) as f64)
                        .collect()
                })
                .collect()
        }
        InitOp::Sobol => initialize(InitOp::Uniform, np, d, lb, ub, rng),
        InitOp::Lhs => {
            let mut x = vec![vec![0.0; d]; np];
            for j in 0..d {
                let mut perm: Vec<usize> = (0..np).collect();
                perm.shuffle(rng);
                for i in 0..np {
                    x[i][j] = lb + w * (perm[i] as f64 + unit(rng)) / np as f64;
                }
            }
            x
        }
        InitOp::Halton => {
            let offset: u64 = rng.random_range(0..10_000);
            (0..np)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let base = PRIMES[j % PRIMES.len()] as u64;
                            lb + w * radical_inverse(offset + i as u64 + 1, base)
                        })
                        .collect()
                })
                .collect()
        }
        InitOp::Normal => {
            let mean = 0.5 * (ub + lb);
            let sd = w / 6.0;
            (0..np)
                .map(|_| {
                    (0..d)
                        .map(|_| (mean + sd * rng.sample::<f64, _>(StandardNormal)).clamp(lb, ub))
                        .collect()
                })
                .collect()
        }
    }
}

/// Draws `k` indices from `0..n`, each distinct from `avoid` and from each
/// other, by rejection. When `n` is too small the draws fall back to plain
/// sampling with replacement and `degenerate` is set.
pub fn draw_distinct(rng: &mut Rng, n: usize, avoid: &[usize], k: usize, degenerate: &mut bool) -> Vec<usize> {
    let feasible = n >= avoid.len() + k;
    if !feasible {
        *degenerate = true;
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        loop {
            let r = rng.random_range(0..n);
            if !feasible || (!avoid.contains(&r) && !out.contains(&r)) {
                out.push(r);
                break;
            }
        }
    }
    out
}

/// Population view handed to mutation and crossover.
pub struct PopView<'a> {
    pub x: &'a [Vec<f64>],
    pub f: &'a [f64],
    pub archive: &'a [Vec<f64>],
    pub archive_f: &'a [f64],
    pub lb: f64,
    pub ub: f64,
}

impl PopView<'_> {
    fn union(&self, k: usize) -> &[f64] {
        if k < self.x.len() {
            &self.x[k]
        } else {
            &self.archive[k - self.x.len()]
        }
    }

    fn top_count(&self, p: f64, n: usize) -> usize {
        ((p * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// One trial vector per individual.
pub fn mutate(op: MutationOp, pop: &PopView, params: &Params, rng: &mut Rng, degenerate: &mut bool) -> Mat {
    use MutationOp::*;
    let np = pop.x.len();
    let d = pop.x[0].len();
    let x = pop.x;
    let best = argmin(pop.f);
    let order = ranking(pop.f);
    let mut out = Vec::with_capacity(np);
    for i in 0..np {
        let xi = &x[i];
        let v = match op {
            Rand1 => {
                let r = draw_distinct(rng, np, &[i], 3, degenerate);
                let f1 = params.get("F1");
                let (a, b, c) = (&x[r[0]], &x[r[1]], &x[r[2]]);
                (0..d).map(|j| a[j] + f1 * (b[j] - c[j])).collect()
            }
            Rand2 => {
                let r = draw_distinct(rng, np, &[i], 5, degenerate);
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let [a, b, c, e, g] = [r[0], r[1], r[2], r[3], r[4]].map(|k| &x[k]);
                (0..d).map(|j| a[j] + f1 * (b[j] - c[j]) + f2 * (e[j] - g[j])).collect()
            }
            Best1 => {
                let r = draw_distinct(rng, np, &[i], 2, degenerate);
                let f1 = params.get("F1");
                let (xb, a, b) = (&x[best], &x[r[0]], &x[r[1]]);
                (0..d).map(|j| xb[j] + f1 * (a[j] - b[j])).collect()
            }
            Best2 => {
                let r = draw_distinct(rng, np, &[i], 4, degenerate);
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let xb = &x[best];
                let [a, b, c, e] = [r[0], r[1], r[2], r[3]].map(|k| &x[k]);
                (0..d).map(|j| xb[j] + f1 * (a[j] - b[j]) + f2 * (c[j] - e[j])).collect()
            }
            CurrentToBest1 => {
                let r = draw_distinct(rng, np, &[i], 2, degenerate);
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let (xb, a, b) = (&x[best], &x[r[0]], &x[r[1]]);
                (0..d).map(|j| xi[j] + f1 * (xb[j] - xi[j]) + f2 * (a[j] - b[j])).collect()
            }
            CurrentToRand1 => {
                let r = draw_distinct(rng, np, &[i], 3, degenerate);
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let (a, b, c) = (&x[r[0]], &x[r[1]], &x[r[2]]);
                (0..d).map(|j| xi[j] + f1 * (a[j] - xi[j]) + f2 * (b[j] - c[j])).collect()
            }
            RandToBest1 => {
                let r = draw_distinct(rng, np, &[i], 2, degenerate);
                let f1 = params.get("F1");
                let (xb, a, b) = (&x[best], &x[r[0]], &x[r[1]]);
                (0..d).map(|j| a[j] + f1 * (xb[j] - b[j])).collect()
            }
            CurrentToPbest1 | CurrentToPbest1Archive => {
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let top = pop.top_count(params.get("p"), np);
                let pbest = order[rng.random_range(0..top)];
                let r1 = draw_distinct(rng, np, &[i], 1, degenerate)[0];
                let r2 = if op == CurrentToPbest1Archive {
                    draw_distinct(rng, np + pop.archive.len(), &[i, r1], 1, degenerate)[0]
                } else {
                    draw_distinct(rng, np, &[i, r1], 1, degenerate)[0]
                };
                let (xp, a, b) = (&x[pbest], &x[r1], pop.union(r2));
                (0..d).map(|j| xi[j] + f1 * (xp[j] - xi[j]) + f2 * (a[j] - b[j])).collect()
            }
            WeightedRandToPbest1 => {
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let top = pop.top_count(params.get("p"), np);
                let pbest = order[rng.random_range(0..top)];
                let r = draw_distinct(rng, np, &[i], 2, degenerate);
                let (xp, a, b) = (&x[pbest], &x[r[0]], &x[r[1]]);
                (0..d).map(|j| f1 * a[j] + f1 * f2 * (xp[j] - b[j])).collect()
            }
            CurrentToRand1Archive => {
                let (f1, f2) = (params.get("F1"), params.get("F2"));
                let r = draw_distinct(rng, np, &[i], 2, degenerate);
                let r3 = draw_distinct(rng, np + pop.archive.len(), &[i, r[0], r[1]], 1, degenerate)[0];
                let (a, b, c) = (&x[r[0]], &x[r[1]], pop.union(r3));
                (0..d).map(|j| xi[j] + f1 * (a[j] - xi[j]) + f2 * (b[j] - c[j])).collect()
            }
            Gaussian => {
                let sd = params.get("sigma") * (pop.ub - pop.lb);
                (0..d).map(|j| x[i][j] + sd * rng.sample::<f64, _>(StandardNormal)).collect()
            }
            Polynomial => {
                let eta = params.get("eta_m");
                (0..d)
                    .map(|j| {
                        let u = unit(rng);
                        let xi = x[i][j];
                        if u <= 0.5 {
                            xi + ((2.0 * u).powf(1.0 / (1.0 + eta)) - 1.0) * (xi - pop.lb)
                        } else {
                            xi + (1.0 - (2.0 - 2.0 * u).powf(1.0 / (1.0 + eta))) * (pop.ub - xi)
                        }
                    })
                    .collect()
            }
        };
        out.push(v);
    }
    out
}

/// Offspring from parents and (for DE styles) trial vectors.
pub fn crossover(op: CrossoverOp, pop: &PopView, trials: Option<&Mat>, params: &Params, rng: &mut Rng) -> Mat {
    use CrossoverOp::*;
    let np = pop.x.len();
    let d = pop.x[0].len();
    let x = pop.x;
    let binomial = |base: &[f64], v: &[f64], cr: f64, rng: &mut Rng| -> Vec<f64> {
        let jrand = rng.random_range(0..d);
        (0..d).map(|j| if unit(rng) < cr || j == jrand { v[j] } else { base[j] }).collect()
    };
    match op {
        Binomial | Exponential | QbestBinomial | QbestBinomialArchive => {
            let trials = trials.unwrap_or_else(|| panic!("DE crossover needs trial vectors"));
            let cr = params.get("Cr");
            let pool: Vec<(f64, &[f64])> = match op {
                QbestBinomial => x.iter().zip(pop.f).map(|(v, &f)| (f, v.as_slice())).collect(),
                QbestBinomialArchive => x
                    .iter()
                    .zip(pop.f)
                    .chain(pop.archive.iter().zip(pop.archive_f))
                    .map(|(v, &f)| (f, v.as_slice()))
                    .collect(),
                _ => Vec::new(),
            };
            let mut pool_order: Vec<usize> = (0..pool.len()).collect();
            pool_order.sort_by(|&a, &b| pool[a].0.total_cmp(&pool[b].0).then(a.cmp(&b)));
            (0..np)
                .map(|i| match op {
                    Binomial => binomial(&x[i], &trials[i], cr, rng),
                    Exponential => {
                        let k = rng.random_range(0..d);
                        let mut u = x[i].clone();
                        let mut j = k;
                        loop {
                            u[j] = trials[i][j];
                            j += 1;
                            if j >= d || unit(rng) >= cr {
                                break;
                            }
                        }
                        u
                    }
                    _ => {
                        let top = pop.top_count(params.get("p"), pool.len());
                        let q = pool_order[rng.random_range(0..top)];
                        binomial(pool[q].1, &trials[i], cr, rng)
                    }
                })
                .collect()
        }
        Sbx => {
            let eta = params.get("eta_c");
            (0..np)
                .map(|_| {
                    let p1 = rng.random_range(0..np);
                    let p2 = rng.random_range(0..np);
                    (0..d)
                        .map(|j| {
                            let u = unit(rng);
                            let beta = if u <= 0.5 {
                                (2.0 * u).powf(1.0 / (1.0 + eta))
                            } else {
                                (1.0 / (2.0 - 2.0 * u)).powf(1.0 / (1.0 + eta))
                            };
                            0.5 * ((1.0 + beta) * x[p1][j] + (1.0 - beta) * x[p2][j])
                        })
                        .collect()
                })
                .collect()
        }
        Arithmetic => {
            let a = params.get("alpha");
            (0..np)
                .map(|_| {
                    let p1 = rng.random_range(0..np);
                    let p2 = rng.random_range(0..np);
                    (0..d).map(|j| (1.0 - a) * x[p1][j] + a * x[p2][j]).collect()
                })
                .collect()
        }
    }
}

/// Repairs out-of-bound coordinates. `parents` supplies the in-bound anchor
/// used by halving.
pub fn repair(op: BoundaryOp, x: &mut Mat, parents: &[Vec<f64>], lb: f64, ub: f64, rng: &mut Rng) {
    let w = ub - lb;
    for (i, row) in x.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if (lb..=ub).contains(v) {
                continue;
            }
            *v = match op {
                BoundaryOp::Clip => v.clamp(lb, ub),
                BoundaryOp::Random => lb + w * unit(rng),
                BoundaryOp::Periodic => lb + (*v - ub).rem_euclid(w),
                BoundaryOp::Reflect => {
                    let t = (*v - lb).rem_euclid(2.0 * w);
                    lb + if t > w { 2.0 * w - t } else { t }
                }
                BoundaryOp::Halving => {
                    let anchor = parents.get(i).map_or(0.5 * (lb + ub), |p| p[j].clamp(lb, ub));
                    let bound = if *v > ub { ub } else { lb };
                    0.5 * (anchor + bound)
                }
            };
            // guard the rounding edge of the modular forms
            *v = v.clamp(lb, ub);
        }
    }
}

/// Where a survivor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Parent(usize),
    Offspring(usize),
}

/// Linear ranking probabilities with the worst individual ranked 1,
/// renormalized to sum to one.
pub fn ranking_probabilities(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    if n == 1 {
        return vec![1.0];
    }
    let (p_plus, p_minus) = (2.0 / n as f64, 0.0);
    let order = ranking(f);
    let mut p = vec![0.0; n];
    for (pos, &idx) in order.iter().enumerate() {
        let rank = n - pos; // best gets rank n
        p[idx] = (p_minus + (p_plus - p_minus) * (rank - 1) as f64 / (n - 1) as f64) / n as f64;
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|v| v / s).collect()
}

/// Minimization-to-fitness transform `max f - f_i + 1e-12`.
pub fn fitness_transform(f: &[f64]) -> Vec<f64> {
    let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    f.iter().map(|v| max - v + 1e-12).collect()
}

/// Fitness-proportional probabilities.
pub fn roulette_probabilities(fitness: &[f64]) -> Vec<f64> {
    let s: f64 = fitness.iter().sum();
    fitness.iter().map(|v| v / s).collect()
}

fn sample_index(p: &[f64], rng: &mut Rng) -> usize {
    let u = unit(rng);
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Chooses the next population. Only the first `off_f.len()` offspring were
/// evaluated; the rest take no part. Returns the source of every survivor
/// slot, `np` slots in total.
pub fn select(
    op: SelectionOp,
    parents: &[Vec<f64>],
    parent_f: &[f64],
    offspring: &[Vec<f64>],
    off_f: &[f64],
    rng: &mut Rng,
) -> Vec<Source> {
    let np = parents.len();
    let k = off_f.len();
    let mut out: Vec<Source> = (0..np).map(Source::Parent).collect();
    let union_f = || -> Vec<f64> { parent_f.iter().chain(off_f).copied().collect() };
    let from_union = |u: usize| if u < np { Source::Parent(u) } else { Source::Offspring(u - np) };
    match op {
        SelectionOp::DeLike => {
            for i in 0..k {
                if off_f[i] <= parent_f[i] {
                    out[i] = Source::Offspring(i);
                }
            }
        }
        SelectionOp::Crowding => {
            let mut cur_f = parent_f.to_vec();
            for i in 0..k {
                let mut near = 0;
                let mut nd = f64::INFINITY;
                for (j, p) in parents.iter().enumerate() {
                    let dd = dist(&offspring[i], p);
                    if dd < nd {
                        nd = dd;
                        near = j;
                    }
                }
                if off_f[i] <= cur_f[near] {
                    out[near] = Source::Offspring(i);
                    cur_f[near] = off_f[i];
                }
            }
        }
        SelectionOp::PsoLike => {
            for (i, slot) in out.iter_mut().enumerate().take(k) {
                *slot = Source::Offspring(i);
            }
        }
        SelectionOp::Ranking | SelectionOp::Roulette => {
            let uf = union_f();
            let p = if op == SelectionOp::Ranking {
                ranking_probabilities(&uf)
            } else {
                roulette_probabilities(&fitness_transform(&uf))
            };
            for slot in out.iter_mut() {
                *slot = from_union(sample_index(&p, rng));
            }
        }
        SelectionOp::Tournament => {
            let uf = union_f();
            for slot in out.iter_mut() {
                let a = rng.random_range(0..uf.len());
                let b = rng.random_range(0..uf.len());
                *slot = from_union(if uf[b] < uf[a] { b } else { a });
            }
        }
    }
    out
}

/// Partitions indices `0..f.len()` into `n` groups.
pub fn niche(op: NichingOp, x: &[Vec<f64>], f: &[f64], n: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let np = f.len();
    let split = |order: Vec<usize>| -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); n];
        let base = np / n;
        let extra = np % n;
        let mut it = order.into_iter();
        for (g, group) in groups.iter_mut().enumerate() {
            let size = base + usize::from(g < extra);
            group.extend(it.by_ref().take(size));
        }
        groups
    };
    match op {
        NichingOp::Random => {
            let mut order: Vec<usize> = (0..np).collect();
            order.shuffle(rng);
            split(order)
        }
        NichingOp::Ranking => split(ranking(f)),
        NichingOp::Distance => {
            let size = np / n;
            let mut unassigned: Vec<usize> = (0..np).collect();
            let mut groups: Vec<Vec<usize>> = Vec::with_capacity(n);
            while groups.len() < n && !unassigned.is_empty() {
                let seed = unassigned[rng.random_range(0..unassigned.len())];
                let mut by_dist: Vec<usize> = unassigned.clone();
                by_dist.sort_by(|&a, &b| dist(&x[a], &x[seed]).total_cmp(&dist(&x[b], &x[seed])).then(a.cmp(&b)));
                // the seed itself sorts first at distance zero unless a duplicate precedes it
                let pos = by_dist.iter().position(|&v| v == seed).unwrap();
                by_dist.remove(pos);
                by_dist.insert(0, seed);
                let group: Vec<usize> = by_dist.into_iter().take(size).collect();
                unassigned.retain(|v| !group.contains(v));
                groups.push(group);
            }
            // leftovers from the integer division join the last group
            groups.last_mut().unwrap().extend(unassigned);
            groups
        }
    }
}

/// Target population size after reduction. `progress` is the consumed
/// fraction of the budget.
pub fn reduced_size(op: ReductionOp, np_max: usize, np_min: usize, progress: f64) -> usize {
    let g = progress.clamp(0.0, 1.0);
    let (lo, hi) = (np_min as f64, np_max as f64);
    let v = match op {
        ReductionOp::Linear => ((lo - hi) * g).round() + hi,
        ReductionOp::NonLinear => ((lo - hi) * g.powf(1.0 - g) + hi).round(),
    };
    (v as usize).clamp(np_min.min(np_max), np_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> Rng {
        Rng::seed_from_u64(3)
    }

    fn view<'a>(x: &'a [Vec<f64>], f: &'a [f64]) -> PopView<'a> {
        PopView { x, f, archive: &[], archive_f: &[], lb: -10.0, ub: 10.0 }
    }

    fn params(v: &[(&'static str, f64)]) -> Params {
        Params(v.to_vec())
    }

    #[test]
    fn init_in_box_and_normal_mean() {
        let mut r = rng();
        for op in [InitOp::Uniform, InitOp::Sobol, InitOp::Lhs, InitOp::Halton, InitOp::Normal] {
            let x = initialize(op, 64, 7, -3.0, 5.0, &mut r);
            assert_eq!(x.len(), 64);
            assert!(x.iter().flatten().all(|v| (-3.0..=5.0).contains(v)), "{op:?}");
        }
        let x = initialize(InitOp::Normal, 10_000, 1, -6.0, 6.0, &mut r);
        let mean = x.iter().map(|v| v[0]).sum::<f64>() / 10_000.0;
        // std (ub-lb)/6 = 2, standard error 0.02
        assert!(mean.abs() < 5.0 * 0.02, "{mean}");
    }

    #[test]
    fn lhs_strata() {
        let x = initialize(InitOp::Lhs, 10, 2, 0.0, 1.0, &mut rng());
        for j in 0..2 {
            let mut counts = [0; 10];
            for row in &x {
                counts[((row[j] * 10.0).floor() as usize).min(9)] += 1;
            }
            assert_eq!(counts, [1; 10]);
        }
    }

    #[test]
    fn de_formula_examples() {
        let x = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 0.0], vec![5.0, 5.0], vec![1.0, 1.0], vec![3.0, 3.0], vec![4.0, 4.0]];
        let f = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut deg = false;
        // F1 = 0 collapses DE/rand/1 to x_r1
        let mut r1 = rng();
        let v = mutate(MutationOp::Rand1, &view(&x, &f), &params(&[("F1", 0.0)]), &mut r1, &mut deg);
        let mut r2 = rng();
        for (i, vi) in v.iter().enumerate() {
            let r = draw_distinct(&mut r2, 7, &[i], 3, &mut deg);
            assert_eq!(vi, &x[r[0]]);
        }
        // Gaussian with sigma 0 is the identity
        let v = mutate(MutationOp::Gaussian, &view(&x, &f), &params(&[("sigma", 0.0)]), &mut rng(), &mut deg);
        assert_eq!(v, x);
        assert!(!deg);
    }

    #[test]
    fn best1_hand_value() {
        // best (0,0); the other two points are (2,0) and (0,0), so every
        // trial is (1,0) or (-1,0) depending on the draw order
        let x = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 0.0]];
        let f = vec![0.0, 1.0, 2.0];
        let mut deg = false;
        let mut r = rng();
        let v = mutate(MutationOp::Best1, &view(&x, &f), &params(&[("F1", 0.5)]), &mut r, &mut deg);
        let mut r2 = rng();
        for (i, vi) in v.iter().enumerate() {
            let p = draw_distinct(&mut r2, 3, &[i], 2, &mut deg);
            let want = if x[p[0]][0] == 2.0 { vec![1.0, 0.0] } else if x[p[1]][0] == 2.0 { vec![-1.0, 0.0] } else { vec![0.0, 0.0] };
            assert_eq!(vi, &want);
        }
    }

    #[test]
    fn small_population_falls_back() {
        let mut deg = false;
        let r = draw_distinct(&mut rng(), 4, &[0], 5, &mut deg);
        assert!(deg);
        assert_eq!(r.len(), 5);
    }

    #[test]
    fn binomial_extremes() {
        let x = vec![vec![0.0; 5]; 3];
        let t = vec![vec![1.0; 5]; 3];
        let f = vec![0.0; 3];
        let u = crossover(CrossoverOp::Binomial, &view(&x, &f), Some(&t), &params(&[("Cr", 1.0)]), &mut rng());
        assert_eq!(u, t);
        let u = crossover(CrossoverOp::Binomial, &view(&x, &f), Some(&t), &params(&[("Cr", 0.0)]), &mut rng());
        for row in u {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn arithmetic_hand_value() {
        // a single-individual pool makes both parents index 0; use two
        // identical draws through a two-point pool with alpha 0.5 instead
        let x = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        let f = vec![0.0, 0.0];
        let mut r = rng();
        let u = crossover(CrossoverOp::Arithmetic, &view(&x, &f), None, &params(&[("alpha", 0.5)]), &mut r);
        let mut r2 = rng();
        for row in u {
            let p1 = r2.random_range(0..2);
            let p2 = r2.random_range(0..2);
            let want: Vec<f64> = (0..2).map(|j| 0.5 * x[p1][j] + 0.5 * x[p2][j]).collect();
            assert_eq!(row, want);
            if p1 != p2 {
                assert_eq!(row, vec![1.0, 1.0]);
            }
        }
    }

    #[test]
    fn boundary_examples() {
        let mut r = rng();
        let fix = |op, v: f64, r: &mut Rng| {
            let mut x = vec![vec![v]];
            repair(op, &mut x, &[vec![0.0]], -10.0, 10.0, r);
            x[0][0]
        };
        assert_eq!(fix(BoundaryOp::Clip, 12.0, &mut r), 10.0);
        assert_eq!(fix(BoundaryOp::Periodic, 12.0, &mut r), -8.0);
        assert_eq!(fix(BoundaryOp::Reflect, 12.0, &mut r), 8.0);
        assert_eq!(fix(BoundaryOp::Halving, 12.0, &mut r), 5.0);
        assert_eq!(fix(BoundaryOp::Reflect, -3.0, &mut r), -3.0);
    }

    #[test]
    fn selection_examples() {
        let p = vec![vec![0.0], vec![1.0]];
        let o = vec![vec![5.0], vec![6.0]];
        let s = select(SelectionOp::DeLike, &p, &[1.0, 1.0], &o, &[2.0, 0.5], &mut rng());
        assert_eq!(s, vec![Source::Parent(0), Source::Offspring(1)]);
        let s = select(SelectionOp::PsoLike, &p, &[0.0, 0.0], &o, &[9.0, 9.0], &mut rng());
        assert_eq!(s, vec![Source::Offspring(0), Source::Offspring(1)]);
        // truncated budget: unevaluated offspring never survive
        let s = select(SelectionOp::PsoLike, &p, &[0.0, 0.0], &o, &[9.0], &mut rng());
        assert_eq!(s, vec![Source::Offspring(0), Source::Parent(1)]);
        let pr = roulette_probabilities(&[2.0, 1.0]);
        assert!((pr[0] - 2.0 / 3.0).abs() < 1e-12 && (pr[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn roulette_through_transform() {
        // objectives (0, 1, 2) become fitness (2, 1, 0) plus epsilon
        let p = roulette_probabilities(&fitness_transform(&[0.0, 1.0, 2.0]));
        assert!((p[0] / p[1] - 2.0).abs() < 1e-9);
        assert!(p[2] < 1e-12);
    }

    #[test]
    fn ranking_probabilities_sum_to_one() {
        let p = ranking_probabilities(&[3.0, 1.0, 2.0, 4.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[1] > p[2] && p[2] > p[0] && p[0] > p[3]);
        assert_eq!(p[3], 0.0);
    }

    #[test]
    fn niching_examples() {
        let x: Mat = (0..12).map(|i| vec![i as f64]).collect();
        let f: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let g = niche(NichingOp::Random, &x, &f, 3, &mut rng());
        assert_eq!(g.iter().map(|v| v.len()).collect::<Vec<_>>(), vec![4, 4, 4]);

        let f = vec![3.0, 1.0, 4.0, 2.0];
        let g = niche(NichingOp::Ranking, &x[..4], &f, 2, &mut rng());
        assert_eq!(g, vec![vec![1, 3], vec![0, 2]]);

        let mut pts: Mat = (0..5).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
        pts.extend((0..5).map(|i| vec![100.0 + i as f64 * 0.1, 0.0]));
        let f = vec![0.0; 10];
        for s in 0..20 {
            let g = niche(NichingOp::Distance, &pts, &f, 2, &mut Rng::seed_from_u64(s));
            let mut sets: Vec<Vec<usize>> = g.into_iter().map(|mut v| { v.sort(); v }).collect();
            sets.sort();
            assert_eq!(sets, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
        }
    }

    #[test]
    fn reduction_sizes() {
        assert_eq!(reduced_size(ReductionOp::Linear, 100, 4, 0.0), 100);
        assert_eq!(reduced_size(ReductionOp::Linear, 100, 4, 1.0), 4);
        assert_eq!(reduced_size(ReductionOp::Linear, 100, 4, 0.5), 52);
        assert_eq!(reduced_size(ReductionOp::NonLinear, 100, 4, 0.0), 100);
        assert_eq!(reduced_size(ReductionOp::NonLinear, 100, 4, 1.0), 4);
        let mut prev = 100;
        for k in 0..=100 {
            let s = reduced_size(ReductionOp::NonLinear, 100, 4, k as f64 / 100.0);
            assert!(s <= prev);
            prev = s;
        }
    }
}
