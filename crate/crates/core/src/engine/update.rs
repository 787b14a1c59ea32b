//! Swarm and distribution-based position updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::ops::{argmin, ranking, unit, unit_open0, Mat, Params};
use crate::rng::Rng;
use crate::space::UpdateOp;

/// Velocities and personal bests of one swarm.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub vel: Mat,
    pub pbest: Mat,
    pub pbest_f: Vec<f64>,
}

impl SwarmState {
    /// Zero velocity, personal bests at the current positions.
    pub fn fresh(x: &[Vec<f64>], f: &[f64]) -> Self {
        Self { vel: vec![vec![0.0; x[0].len()]; x.len()], pbest: x.to_vec(), pbest_f: f.to_vec() }
    }

    /// Folds a newly evaluated population into the personal bests.
    pub fn record(&mut self, x: &[Vec<f64>], f: &[f64]) {
        for i in 0..x.len() {
            if f[i] < self.pbest_f[i] {
                self.pbest[i].clone_from(&x[i]);
                self.pbest_f[i] = f[i];
            }
        }
    }
}

/// The fitness-distance-ratio neighbour of individual `i`, coordinate-wise.
pub fn fdr_nbest(x: &[Vec<f64>], f: &[f64], i: usize) -> Vec<f64> {
    let d = x[i].len();
    (0..d)
        .map(|j| {
            let mut best = f64::NEG_INFINITY;
            let mut pick = x[i][j];
            for p in 0..x.len() {
                let gap = (x[p][j] - x[i][j]).abs();
                if p == i || gap == 0.0 {
                    continue;
                }
                let ratio = (f[i] - f[p]) / gap;
                if ratio > best {
                    best = ratio;
                    pick = x[p][j];
                }
            }
            pick
        })
        .collect()
}

fn clpso_learning_prob(i: usize, np: usize) -> f64 {
    if np < 2 {
        return 0.05;
    }
    0.05 + 0.45 * ((10.0 * i as f64 / (np - 1) as f64).exp() - 1.0) / (10f64.exp() - 1.0)
}

/// New positions `x + vel` for a PSO-family update; velocities are stored
/// in `state`.
pub fn swarm_step(op: UpdateOp, x: &[Vec<f64>], f: &[f64], state: &mut SwarmState, params: &Params, rng: &mut Rng) -> Mat {
    let np = x.len();
    let d = x[0].len();
    let w = params.get("w");
    let c1 = params.get("c1");
    let c2 = params.get("c2");
    let gbest = state.pbest[argmin(&state.pbest_f)].clone();
    let mut out = Vec::with_capacity(np);
    for i in 0..np {
        let guide: Vec<f64> = match op {
            UpdateOp::Clpso => {
                let pc = clpso_learning_prob(i, np);
                (0..d)
                    .map(|j| {
                        if unit(rng) > pc {
                            state.pbest[i][j]
                        } else {
                            let a = rng.random_range(0..np);
                            let b = rng.random_range(0..np);
                            let r = if state.pbest_f[b] < state.pbest_f[a] { b } else { a };
                            state.pbest[r][j]
                        }
                    })
                    .collect()
            }
            _ => state.pbest[i].clone(),
        };
        let nbest = (op == UpdateOp::FdrPso).then(|| fdr_nbest(x, f, i));
        let c3 = params.get_or("c3", 0.0);
        let mut xi = x[i].clone();
        for j in 0..d {
            let mut v = w * state.vel[i][j]
                + c1 * unit_open0(rng) * (guide[j] - x[i][j])
                + c2 * unit_open0(rng) * (gbest[j] - x[i][j]);
            if let Some(nb) = &nbest {
                v += c3 * unit_open0(rng) * (nb[j] - x[i][j]);
            }
            state.vel[i][j] = v;
            xi[j] += v;
        }
        out.push(xi);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsKind {
    Full,
    Separable,
    Mixture,
}

/// Search distribution of one evolution-strategy subpopulation.
#[derive(Debug, Clone)]
pub struct EsState {
    pub kind: EsKind,
    pub mean: DVector<f64>,
    pub sigma: f64,
    /// Full covariance (Full) or diagonal in column 0 (Separable); unused
    /// by Mixture.
    pub cov: DMatrix<f64>,
    pub pc: DVector<f64>,
    pub ps: DVector<f64>,
    /// Archived evolution paths for mixture sampling.
    pub paths: Vec<DVector<f64>>,
    pub generation: usize,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
}

struct Weights {
    w: Vec<f64>,
    mu_eff: f64,
}

fn recombination_weights(lambda: usize) -> Weights {
    let mu = (lambda / 2).max(1);
    let raw: Vec<f64> = (1..=mu).map(|i| ((mu as f64) + 0.5).ln() - (i as f64).ln()).collect();
    let s: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let mu_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    Weights { w, mu_eff }
}

fn chi_n(n: f64) -> f64 {
    n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
}

impl EsState {
    pub fn new(kind: EsKind, mean: Vec<f64>, sigma: f64) -> Self {
        let n = mean.len();
        let cov = match kind {
            EsKind::Separable => DMatrix::from_element(n, 1, 1.0),
            _ => DMatrix::identity(n, n),
        };
        Self {
            kind,
            mean: DVector::from_vec(mean),
            sigma,
            cov,
            pc: DVector::zeros(n),
            ps: DVector::zeros(n),
            paths: Vec::new(),
            generation: 0,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
        }
    }

    pub fn kind_of(op: UpdateOp) -> Option<EsKind> {
        match op {
            UpdateOp::CmaEs => Some(EsKind::Full),
            UpdateOp::SepCmaEs => Some(EsKind::Separable),
            UpdateOp::Mmes => Some(EsKind::Mixture),
            _ => None,
        }
    }

    fn path_capacity(n: usize) -> usize {
        2 * (n as f64).sqrt().ceil() as usize
    }

    /// Applies `C^{-1/2}` to `v`.
    fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            EsKind::Full => {
                let t = self.basis.transpose() * v;
                let t = t.component_div(&self.scales);
                &self.basis * t
            }
            EsKind::Separable => v.component_div(&self.cov.column(0).map(f64::sqrt)),
            EsKind::Mixture => v.clone(),
        }
    }

    /// One update from an evaluated population; `cc` and `cs` scale the
    /// default learning rates of the two evolution paths.
    pub fn update(&mut self, x: &[Vec<f64>], f: &[f64], cc: f64, cs: f64, max_sigma: f64) {
        let n = self.mean.len();
        let nf = n as f64;
        let Weights { w, mu_eff } = recombination_weights(x.len());
        let order = ranking(f);
        let old = self.mean.clone();
        let ys: Vec<DVector<f64>> = order
            .iter()
            .take(w.len())
            .map(|&i| (DVector::from_column_slice(&x[i]) - &old) / self.sigma)
            .collect();
        let mut ybar = DVector::zeros(n);
        for (wi, y) in w.iter().zip(&ys) {
            ybar += y * *wi;
        }
        self.mean = &old + &ybar * self.sigma;

        let c_s = cs * (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let c_c = cc * (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let d_s = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_s;
        self.ps = &self.ps * (1.0 - c_s) + self.whiten(&ybar) * (c_s * (2.0 - c_s) * mu_eff).sqrt();
        self.generation += 1;
        let norm_ps = self.ps.norm();
        let denom = (1.0 - (1.0 - c_s).powi(2 * self.generation as i32)).sqrt().max(1e-300);
        let hsig = if norm_ps / denom / chi_n(nf) < 1.4 + 2.0 / (nf + 1.0) { 1.0 } else { 0.0 };
        self.pc = &self.pc * (1.0 - c_c) + &ybar * (hsig * (c_c * (2.0 - c_c) * mu_eff).sqrt());

        let mut c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let mut cmu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff)).min(1.0 - c1);
        match self.kind {
            EsKind::Full => {
                let mut rank_mu = DMatrix::zeros(n, n);
                for (wi, y) in w.iter().zip(&ys) {
                    rank_mu += y * y.transpose() * *wi;
                }
                let rank_one = &self.pc * self.pc.transpose();
                let keep = 1.0 - c1 - cmu + c1 * (1.0 - hsig) * c_c * (2.0 - c_c);
                self.cov = &self.cov * keep + rank_one * c1 + rank_mu * cmu;
                self.refresh_eigen();
            }
            EsKind::Separable => {
                let scale = (nf + 2.0) / 3.0;
                c1 = (c1 * scale).min(1.0);
                cmu = (cmu * scale).min(1.0 - c1);
                let keep = 1.0 - c1 - cmu + c1 * (1.0 - hsig) * c_c * (2.0 - c_c);
                for k in 0..n {
                    let rm: f64 = w.iter().zip(&ys).map(|(wi, y)| wi * y[k] * y[k]).sum();
                    let v = self.cov[(k, 0)] * keep + c1 * self.pc[k] * self.pc[k] + cmu * rm;
                    self.cov[(k, 0)] = v.max(1e-300);
                }
            }
            EsKind::Mixture => {
                let every = (n / Self::path_capacity(n)).max(1);
                if self.generation % every == 0 {
                    if self.paths.len() == Self::path_capacity(n) {
                        self.paths.remove(0);
                    }
                    self.paths.push(self.pc.clone());
                }
            }
        }
        self.sigma = (self.sigma * ((c_s / d_s) * (norm_ps / chi_n(nf) - 1.0)).exp()).min(max_sigma);
    }

    fn refresh_eigen(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        self.scales = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        self.basis = eig.eigenvectors;
    }

    /// Draws `np` candidates from the current distribution.
    pub fn sample(&self, np: usize, rng: &mut Rng) -> Mat {
        let n = self.mean.len();
        let c_mix = 1.0 / (3.0 * (n as f64).sqrt() + 5.0);
        let mixes = ((n as f64).log2().ceil() as usize).max(1);
        (0..np)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let step = match self.kind {
                    EsKind::Full => &self.basis * z.component_mul(&self.scales),
                    EsKind::Separable => z.component_mul(&self.cov.column(0).map(f64::sqrt)),
                    EsKind::Mixture => {
                        let mut v = z;
                        if !self.paths.is_empty() {
                            for _ in 0..mixes {
                                let k = rng.random_range(0..self.paths.len());
                                let r: f64 = rng.sample(StandardNormal);
                                v = v * (1.0 - c_mix).sqrt() + &self.paths[k] * (c_mix.sqrt() * r);
                            }
                        }
                        v
                    }
                };
                (&self.mean + step * self.sigma).iter().copied().collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn pso_params(w: f64, c1: f64, c2: f64) -> Params {
        Params(vec![("w", w), ("c1", c1), ("c2", c2)])
    }

    #[test]
    fn zero_velocity_is_identity() {
        let x = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 3.0]];
        let f = vec![1.0, 2.0, 3.0];
        let mut s = SwarmState::fresh(&x, &f);
        let y = swarm_step(UpdateOp::VanillaPso, &x, &f, &mut s, &pso_params(0.0, 0.0, 0.0), &mut Rng::seed_from_u64(1));
        assert_eq!(y, x);
    }

    #[test]
    fn fdr_two_points() {
        let x = vec![vec![0.0, 1.0, 2.0], vec![5.0, -1.0, 7.0]];
        let f = vec![3.0, 1.0];
        assert_eq!(fdr_nbest(&x, &f, 0), x[1]);
        assert_eq!(fdr_nbest(&x, &f, 1), x[0]);
    }

    #[test]
    fn pbest_only_improves() {
        let x = vec![vec![0.0], vec![1.0]];
        let mut s = SwarmState::fresh(&x, &[1.0, 1.0]);
        s.record(&[vec![5.0], vec![6.0]], &[0.5, 2.0]);
        assert_eq!(s.pbest, vec![vec![5.0], vec![1.0]]);
        assert_eq!(s.pbest_f, vec![0.5, 1.0]);
    }

    #[test]
    fn tiny_sigma_concentrates() {
        let st = EsState::new(EsKind::Full, vec![1.0; 4], 1e-8);
        let xs = st.sample(200, &mut Rng::seed_from_u64(2));
        for j in 0..4 {
            let m = xs.iter().map(|v| v[j]).sum::<f64>() / 200.0;
            let sd = (xs.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / 200.0).sqrt();
            assert!(sd < 1e-6 * 10.0);
            assert!((m - 1.0).abs() < 1e-6);
        }
    }

    fn run_sphere(kind: EsKind, gens: usize) -> (f64, f64) {
        let mut rng = Rng::seed_from_u64(5);
        let o = [1.0, -2.0, 0.5, 3.0, -1.5];
        let sphere = |v: &[f64]| v.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut st = EsState::new(kind, vec![0.0; 5], 3.0);
        let start = st.mean.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let mut x = st.sample(12, &mut rng);
        for _ in 0..gens {
            let f: Vec<f64> = x.iter().map(|v| sphere(v)).collect();
            st.update(&x, &f, 1.0, 1.0, 20.0);
            x = st.sample(12, &mut rng);
        }
        let end = st.mean.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        (start, end)
    }

    #[test]
    fn cma_converges_on_sphere() {
        for kind in [EsKind::Full, EsKind::Separable, EsKind::Mixture] {
            let (start, end) = run_sphere(kind, 200);
            assert!(end * 10.0 <= start, "{kind:?}: {start} -> {end}");
        }
    }
}
