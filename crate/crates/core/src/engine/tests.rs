use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::problem::{generate_instance, BasicFunction, GenOptions};

fn sphere(dim: usize, seed: u64, budget: usize) -> ProblemInstance {
    generate_instance(0, seed, &GenOptions::single(BasicFunction::Sphere, dim, 5.0, budget)).unwrap()
}

/// Standalone DE/rand/1/bin with clipping and greedy selection, drawing
/// from the engine stream in the documented order.
fn oracle_de(inst: &ProblemInstance, seed: u64, np: usize, gens: usize) -> Vec<(Mat, Vec<f64>)> {
    let mut rng = rng::stream(seed, tag::ENGINE);
    let (d, lb, ub) = (inst.dim(), inst.lb(), inst.ub());
    let (f1, cr) = (0.5, 0.9);
    let mut fes = 0;
    let mut x: Mat = (0..np).map(|_| (0..d).map(|_| lb + (ub - lb) * rng.random::<f64>()).collect()).collect();
    let mut f: Vec<f64> = x.iter().map(|v| inst.eval(v)).collect();
    fes += np;
    let mut out = Vec::new();
    for _ in 0..gens {
        let mut v = Vec::new();
        for i in 0..np {
            let mut r: Vec<usize> = Vec::new();
            while r.len() < 3 {
                let c = rng.random_range(0..np);
                if c != i && !r.contains(&c) {
                    r.push(c);
                }
            }
            v.push((0..d).map(|j| x[r[0]][j] + f1 * (x[r[1]][j] - x[r[2]][j])).collect::<Vec<f64>>());
        }
        let mut u = Vec::new();
        for i in 0..np {
            let jrand = rng.random_range(0..d);
            let row: Vec<f64> = (0..d)
                .map(|j| if rng.random::<f64>() < cr || j == jrand { v[i][j] } else { x[i][j] })
                .map(|c: f64| c.clamp(lb, ub))
                .collect();
            u.push(row);
        }
        let k = np.min(inst.max_fes() - fes);
        for i in 0..k {
            let fu = inst.eval(&u[i]);
            fes += 1;
            if fu <= f[i] {
                x[i].clone_from(&u[i]);
                f[i] = fu;
            }
        }
        out.push((x.clone(), f.clone()));
    }
    out
}

#[test]
fn interpreter_matches_monolithic_de() {
    let opts = GenOptions { dims: vec![5, 10], budgets: vec![10_000], ..Default::default() };
    let wf = canonical_de();
    for id in 0..3 {
        let inst = generate_instance(id, 100 + id as u64, &opts).unwrap();
        let seed = 7 + id as u64;
        let oracle = oracle_de(&inst, seed, 50, 50);
        let mut ep = Episode::new(&wf, &inst, seed, &EngineOptions { np_init: Some(50) }).unwrap();
        let cfg = ConfigAssignment::defaults(&wf, &mut rng::from_seed(0));
        for (g, (x, f)) in oracle.iter().enumerate() {
            ep.step(&cfg).unwrap();
            let sp = &ep.state().subpops[0];
            assert_eq!(&sp.x, x, "instance {id} generation {g}");
            assert_eq!(&sp.f, f, "instance {id} generation {g}");
        }
    }
}

/// Regression bound from reference runs: every seed lands within 3e-7.
#[test]
fn canonical_de_converges_on_sphere() {
    let wf = canonical_de();
    for seed in 0..10 {
        let inst = sphere(10, seed, 10_000);
        let tr = run_episode(&wf, &inst, &mut DefaultController, seed, &EngineOptions { np_init: Some(50) }).unwrap();
        let gap = tr.final_best - inst.f_star();
        assert!(gap <= 3e-7, "seed {seed}: {gap:e}");
        assert_eq!(tr.fes, 10_000);
    }
}

#[test]
fn equal_seeds_give_identical_trajectories() {
    let inst = sphere(5, 3, 3000);
    let mut r = rng::from_seed(4);
    for _ in 0..5 {
        let wf = Workflow::random(&mut r);
        let a = run_episode(&wf, &inst, &mut DefaultController, 9, &EngineOptions::default()).unwrap();
        let b = run_episode(&wf, &inst, &mut DefaultController, 9, &EngineOptions::default()).unwrap();
        assert_eq!(a, b, "{}", wf.names().join(" "));
        assert_eq!(a.to_json_lines(), b.to_json_lines());
    }
}

#[test]
fn configs_are_checked() {
    let inst = sphere(5, 0, 1000);
    let wf = canonical_de();
    let mut ep = Episode::new(&wf, &inst, 0, &EngineOptions::default()).unwrap();
    assert!(matches!(ep.step(&ConfigAssignment(vec![vec![0.5]])), Err(Error::Contract(_))));
    assert!(matches!(ep.step(&ConfigAssignment(vec![vec![0.5], vec![1.5]])), Err(Error::Contract(_))));
    assert!(ep.step(&ConfigAssignment(vec![vec![0.5], vec![0.9]])).is_ok());
}

#[test]
fn observation_after_initialization() {
    let inst = sphere(5, 0, 1000);
    let wf = canonical_de();
    let ep = Episode::new(&wf, &inst, 0, &EngineOptions::default()).unwrap();
    let obs = ep.observation();
    assert_eq!(obs.per_module.len(), 2);
    assert!((obs.global[8] - (1.0 - 100.0 / 1000.0)).abs() < 1e-15);
    assert_eq!(ep.state().fes, 100);
}

#[test]
fn finished_episode_refuses_steps() {
    let inst = sphere(5, 0, 150);
    let wf = canonical_de();
    let mut ep = Episode::new(&wf, &inst, 0, &EngineOptions::default()).unwrap();
    let cfg = ConfigAssignment::defaults(&wf, &mut rng::from_seed(0));
    assert!(ep.step(&cfg).unwrap().done);
    assert_eq!(ep.state().fes, 150);
    assert_eq!(ep.step(&cfg), Err(Error::EpisodeFinished));
}

#[test]
fn reward_normalization() {
    let inst = sphere(5, 0, 1000);
    let tr = run_episode(&canonical_de(), &inst, &mut DefaultController, 1, &EngineOptions::default()).unwrap();
    let gap = tr.f0 - tr.f_star;
    for w in tr.steps.windows(2) {
        let want = (w[0].f_best - w[1].f_best) / gap;
        assert!((w[1].r_t - want).abs() < 1e-15);
        if w[0].f_best == w[1].f_best {
            assert_eq!(w[1].r_t, 0.0);
        }
    }
}

fn subpop(x: Mat, f: Vec<f64>) -> Subpop {
    Subpop::new(x, f)
}

#[test]
fn restart_triggers() {
    let same = subpop(vec![vec![1.0, 1.0]; 6], vec![2.0; 6]);
    for op in [RestartOp::Stagnation, RestartOp::ObjConvergence, RestartOp::SolutionConvergence, RestartOp::ObjSolutionConvergence] {
        assert!(!restart_triggered(op, &same, 10.0), "{op:?} on a fresh population");
    }
    let mut aged = same.clone();
    aged.since_start = 3;
    assert!(restart_triggered(RestartOp::SolutionConvergence, &aged, 10.0));
    assert!(restart_triggered(RestartOp::ObjConvergence, &aged, 10.0));
    assert!(!restart_triggered(RestartOp::Stagnation, &aged, 10.0));
    aged.stagnation = 100;
    assert!(restart_triggered(RestartOp::Stagnation, &aged, 10.0));
    let mut spread = subpop((0..6).map(|i| vec![i as f64, 0.0]).collect(), (0..6).map(|i| i as f64).collect());
    spread.since_start = 5;
    for op in [RestartOp::ObjConvergence, RestartOp::SolutionConvergence, RestartOp::ObjSolutionConvergence] {
        assert!(!restart_triggered(op, &spread, 10.0));
    }
}

#[test]
fn sharing_replaces_worst() {
    let a = subpop(vec![vec![0.0], vec![1.0], vec![2.0]], vec![3.0, 9.0, 4.0]);
    let b = subpop(vec![vec![5.0], vec![6.0]], vec![0.0, 7.0]);
    let mut s = vec![a, b];
    share_best(&mut s, 0, 1);
    assert_eq!(s[0].f, vec![3.0, 0.0, 4.0]);
    assert_eq!(s[0].x[1], vec![5.0]);
    assert_eq!(s[1].f, vec![0.0, 7.0]);
    // self-targeting copies the own best over the own worst
    share_best(&mut s, 1, 1);
    assert_eq!(s[1].f, vec![0.0, 0.0]);
}

#[test]
fn quantized_selector() {
    assert_eq!(quantize(0.0, 3), 0);
    assert_eq!(quantize(0.34, 3), 1);
    assert_eq!(quantize(1.0, 3), 2);
}

#[test]
fn population_size_rule() {
    assert_eq!(initial_population_size(5), 100);
    assert_eq!(initial_population_size(20), 100);
    assert_eq!(initial_population_size(50), 121);
}

fn check_run(wf: &Workflow, inst: &ProblemInstance, seed: u64) -> std::result::Result<(), TestCaseError> {
    let tr = run_episode(wf, inst, &mut DefaultController, seed, &EngineOptions::default()).unwrap();
    let gap = tr.f0 - tr.f_star;
    prop_assert!(tr.fes <= inst.max_fes());
    prop_assert!(tr.steps.len() <= inst.max_fes() / NP_MIN);
    let mut prev = tr.f0;
    for s in &tr.steps {
        prop_assert!(s.r_t >= 0.0);
        prop_assert!(s.f_best <= prev);
        prev = s.f_best;
        for o in s.obs.per_module.iter().chain(std::iter::once(&s.obs.global)) {
            prop_assert!(o.iter().all(|v| v.is_finite()));
            prop_assert!((0.0..=1.0).contains(&o[3]) && (0.0..=1.0).contains(&o[8]));
        }
    }
    let total: f64 = tr.rewards().iter().sum();
    let want = if gap > 1e-12 { (tr.f0 - tr.final_best) / gap } else { 0.0 };
    prop_assert!((total - want).abs() <= 1e-9 * want.abs().max(1.0), "{total} vs {want}");
    prop_assert!(total <= 1.0 + 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn random_workflows_respect_budget_and_rewards(wseed in any::<u64>(), iseed in 0u64..1000) {
        let wf = Workflow::random(&mut rng::from_seed(wseed));
        let opts = GenOptions { dims: vec![5], budgets: vec![2000], ..Default::default() };
        let inst = generate_instance(0, iseed, &opts).unwrap();
        check_run(&wf, &inst, wseed ^ iseed)?;
    }

    #[test]
    fn repair_is_complete(op_idx in 0usize..5, xs in prop::collection::vec(-200.0f64..200.0, 1..40)) {
        use crate::space::BoundaryOp::*;
        let op = [Clip, Random, Periodic, Reflect, Halving][op_idx];
        let mut x = vec![xs.clone()];
        let parent = vec![vec![0.3; xs.len()]];
        ops::repair(op, &mut x, &parent, -10.0, 10.0, &mut rng::from_seed(1));
        prop_assert!(x[0].iter().all(|v| (-10.0..=10.0).contains(v)));
        for (a, b) in xs.iter().zip(&x[0]) {
            if (-10.0..=10.0).contains(a) {
                prop_assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn every_module_kind_runs() {
    // exercise each variant at least once through sampled workflows
    let mut seen = std::collections::HashSet::new();
    let mut r = rng::from_seed(11);
    let opts = GenOptions { dims: vec![5], budgets: vec![1500], ..Default::default() };
    let inst = generate_instance(0, 5, &opts).unwrap();
    let mut runs = 0;
    while seen.len() < registry().len() && runs < 2000 {
        let wf = Workflow::random(&mut r);
        seen.extend(wf.tokens().iter().copied());
        check_run(&wf, &inst, runs).unwrap();
        runs += 1;
    }
    assert_eq!(seen.len(), registry().len(), "after {runs} workflows");
}

#[test]
fn optimum_hit_at_initialization_earns_nothing() {
    let wf = Workflow::random(&mut rng::from_seed(103069782463123575));
    let opts = GenOptions { dims: vec![5], budgets: vec![2000], ..Default::default() };
    let inst = generate_instance(0, 459, &opts).unwrap();
    let tr = run_episode(&wf, &inst, &mut DefaultController, 103069782463123575 ^ 459, &EngineOptions::default()).unwrap();
    assert!(tr.f0 - tr.f_star <= 1e-12, "{} {}", tr.f0, tr.f_star);
    assert!(tr.rewards().iter().all(|r| *r == 0.0));
    check_run(&wf, &inst, 103069782463123575 ^ 459).unwrap();
}
