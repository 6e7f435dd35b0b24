mod common;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use common::{config, covers, endpoint, local_run, schema_of, spec, statement};
use evorest::clock::StepClock;
use evorest::driver::SutDriver;
use evorest::fitness::{EvaluatedIndividual, FitnessValue};
use evorest::genome::Sampler;
use evorest::schema::Verb;
use evorest::search::{
    extract_solution, run_search, sample_next, Algorithm, Archive, SampleOrigin, SearchConfig, SearchHooks,
    SearchTarget,
};
use evorest::sim::{by_name, local_pair, SimSpec, SimSut, Step};
use evorest::suite::render_neutral;
use evorest::{parse_schema, Individual, TargetId, TargetKind};

fn answering(label: &str, path: &str) -> evorest::sim::SimEndpoint {
    let mut e = endpoint(label, Verb::Get, path);
    e.program = vec![Step::new(format!("{label}_ok")).respond(200, json!({"ok": true}))];
    e
}

fn ping_spec() -> SimSpec {
    spec("ping", vec![answering("ping", "/ping")])
}

#[test]
fn zero_budget_gives_an_empty_suite() {
    let (out, sim) = local_run(ping_spec(), &config(1, 0, Algorithm::Mio));
    assert!(out.suite.is_empty());
    assert_eq!(out.stats.evaluations, 0);
    assert!(sim.borrow().call_log().is_empty());
    assert!(out.aborted.is_none());
}

#[test]
fn one_always_hit_target_gives_one_single_call_test() {
    let (out, _) = local_run(ping_spec(), &config(1, 300, Algorithm::Mio));
    assert_eq!(out.suite.len(), 1);
    assert_eq!(out.suite[0].size, 1);
    assert!(covers(&out, &statement("ping_ok")));
    assert_eq!(out.stats.evaluations, 300);
}

#[test]
fn three_independent_endpoints_give_three_tests() {
    let s = spec("three", vec![answering("a", "/a"), answering("b", "/b"), answering("c", "/c")]);
    let (out, _) = local_run(s, &config(2, 2000, Algorithm::Mio));
    assert_eq!(out.suite.len(), 3, "{}", render_neutral(&out.suite));
    for label in ["a_ok", "b_ok", "c_ok"] {
        assert!(covers(&out, &statement(label)));
    }
    assert!(out.suite.iter().all(|ev| ev.size == 1));
}

#[test]
fn same_seed_same_suite_and_stats() {
    let run = |seed| {
        let (out, _) = local_run(by_name("crud-chain").unwrap(), &config(seed, 1500, Algorithm::Mio));
        (render_neutral(&out.suite), out.stats.to_json())
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7).0, run(8).0);
}

#[test]
fn covered_count_never_drops_during_a_run() {
    let sim = SimSut::new(by_name("crud-chain").unwrap()).unwrap();
    let (shared, mut driver, mut transport) = local_pair(sim);
    let base_url = driver.start_sut().unwrap();
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).unwrap());
    let target = SearchTarget { schema, base_url, credentials: driver.get_info().unwrap().auth_info };
    let history = RefCell::new(vec![]);
    let hooks = SearchHooks {
        stop: None,
        on_progress: Some(Box::new(|p: &evorest::search::Progress| history.borrow_mut().push(p.covered_targets))),
    };
    run_search(&target, &config(3, 800, Algorithm::Mio), &mut driver, &mut transport, &StepClock::new(1), hooks)
        .unwrap();
    let h = history.into_inner();
    assert_eq!(h.len(), 800);
    assert!(h.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn stop_flag_ends_the_run_early_with_results() {
    let sim = SimSut::new(ping_spec()).unwrap();
    let (shared, mut driver, mut transport) = local_pair(sim);
    let base_url = driver.start_sut().unwrap();
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).unwrap());
    let target = SearchTarget { schema, base_url, credentials: vec![] };
    let stop = AtomicBool::new(false);
    let hooks = SearchHooks {
        stop: Some(&stop),
        on_progress: Some(Box::new(|p: &evorest::search::Progress| {
            if p.evaluations == 10 {
                stop.store(true, std::sync::atomic::Ordering::SeqCst);
            }
        })),
    };
    let out = run_search(&target, &config(1, 1000, Algorithm::Mio), &mut driver, &mut transport, &StepClock::new(1), hooks)
        .unwrap();
    assert_eq!(out.stats.evaluations, 10);
    assert_eq!(out.suite.len(), 1);
}

#[test]
fn wall_clock_style_budget_uses_time_when_no_evaluation_cap() {
    let sim = SimSut::new(ping_spec()).unwrap();
    let (shared, mut driver, mut transport) = local_pair(sim);
    let base_url = driver.start_sut().unwrap();
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).unwrap());
    let target = SearchTarget { schema, base_url, credentials: vec![] };
    let cfg = SearchConfig { max_time_seconds: 1, seed: 1, ..SearchConfig::default() };
    let out = run_search(&target, &cfg, &mut driver, &mut transport, &StepClock::new(10), SearchHooks::default())
        .unwrap();
    assert!(out.stats.evaluations > 0);
    assert!(out.stats.elapsed_ms >= 1000);
}

#[test]
fn sut_going_down_aborts_with_partial_results() {
    let sim = SimSut::new(ping_spec()).unwrap();
    let (shared, mut driver, transport) = local_pair(sim);
    let base_url = driver.start_sut().unwrap();
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).unwrap());
    let target = SearchTarget { schema, base_url, credentials: vec![] };
    let down = RefCell::new(false);
    let hooks = SearchHooks {
        stop: None,
        on_progress: Some(Box::new(|p: &evorest::search::Progress| {
            if p.evaluations == 5 {
                *down.borrow_mut() = true;
            }
        })),
    };
    struct Flaky<'a> {
        inner: evorest::sim::LocalTransport,
        down: &'a RefCell<bool>,
    }
    impl evorest::Transport for Flaky<'_> {
        fn send(
            &mut self,
            r: &evorest::executor::HttpRequest,
            t: std::time::Duration,
        ) -> Result<evorest::executor::HttpResponse, evorest::TransportError> {
            if *self.down.borrow() {
                return Err(evorest::TransportError::Refused("gone".into()));
            }
            self.inner.send(r, t)
        }
    }
    let mut flaky = Flaky { inner: transport, down: &down };
    let out = run_search(&target, &config(1, 100, Algorithm::Mio), &mut driver, &mut flaky, &StepClock::new(1), hooks)
        .unwrap();
    assert!(out.aborted.as_deref().unwrap().contains("SUT is down"));
    assert_eq!(out.stats.evaluations, 5);
    assert_eq!(out.suite.len(), 1);
}

#[test]
fn invalid_config_is_rejected() {
    let sim = SimSut::new(ping_spec()).unwrap();
    let (shared, mut driver, mut transport) = local_pair(sim);
    let base_url = driver.start_sut().unwrap();
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).unwrap());
    let target = SearchTarget { schema, base_url, credentials: vec![] };
    let cfg = SearchConfig { p_random_start: 1.5, ..config(1, 10, Algorithm::Mio) };
    assert!(run_search(&target, &cfg, &mut driver, &mut transport, &StepClock::new(1), SearchHooks::default()).is_err());
}

fn ping_sampler() -> Sampler {
    Sampler::new(schema_of(&ping_spec()), 0, 4).unwrap()
}

fn evaluated(ind: Individual, scores: &[(&str, f64)]) -> Arc<EvaluatedIndividual> {
    let mut fitness = FitnessValue::new();
    for (name, h) in scores {
        fitness.set(TargetId::new(TargetKind::Branch, *name), *h);
    }
    let size = ind.len();
    Arc::new(EvaluatedIndividual { individual: ind, fitness, results: vec![], calls: vec![], size })
}

fn seeded_archive(sampler: &Sampler) -> Archive {
    let mut archive = Archive::new();
    let ind = sampler.sample_individual(&mut ChaCha8Rng::seed_from_u64(0));
    archive.update(evaluated(ind, &[("T", 0.5)]), 10);
    archive
}

#[test]
fn fresh_sampling_at_start_is_half() {
    let sampler = ping_sampler();
    let archive = seeded_archive(&sampler);
    let cfg = SearchConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(42);
    let fresh = (0..10_000)
        .filter(|_| sample_next(&archive, &sampler, &cfg, 0.0, &mut r).1 == SampleOrigin::Fresh)
        .count();
    let freq = fresh as f64 / 10_000.0;
    assert!((0.45..=0.55).contains(&freq), "fresh frequency {freq}");
}

#[test]
fn focused_phase_only_mutates() {
    let sampler = ping_sampler();
    let archive = seeded_archive(&sampler);
    let cfg = SearchConfig::default();
    assert_eq!(cfg.random_sampling_probability(0.5), 0.0);
    assert_eq!(cfg.random_sampling_probability(0.9), 0.0);
    assert_eq!(cfg.population_limit(0.7), 1);
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for t in [0.5, 0.75, 1.0] {
        for _ in 0..200 {
            assert_eq!(sample_next(&archive, &sampler, &cfg, t, &mut r).1, SampleOrigin::Mutant);
        }
    }
}

#[test]
fn empty_archive_always_samples_fresh() {
    let sampler = ping_sampler();
    let cfg = SearchConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for t in [0.0, 0.3, 0.6, 1.0] {
        for _ in 0..100 {
            assert_eq!(sample_next(&Archive::new(), &sampler, &cfg, t, &mut r).1, SampleOrigin::Fresh);
        }
    }
}

#[test]
fn random_baseline_ignores_the_archive() {
    let sampler = Sampler::new(schema_of(&by_name("crud-chain").unwrap()), 1, 10).unwrap();
    let full = seeded_archive(&sampler);
    let cfg = SearchConfig { algorithm: Algorithm::Random, ..SearchConfig::default() };
    let stream = |archive: &Archive| {
        let mut r = ChaCha8Rng::seed_from_u64(9);
        (0..200).map(|i| sample_next(archive, &sampler, &cfg, i as f64 / 200.0, &mut r).0).collect::<Vec<_>>()
    };
    assert_eq!(stream(&Archive::new()), stream(&full));
}

#[test]
fn archive_update_rules() {
    let sampler = ping_sampler();
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let of_size = |n: usize, r: &mut ChaCha8Rng| loop {
        let i = sampler.sample_individual(r);
        if i.len() == n {
            break i;
        }
    };
    let t = TargetId::new(TargetKind::Branch, "T");

    let mut a = Archive::new();
    a.update(evaluated(of_size(1, &mut r), &[("T", 0.0)]), 10);
    assert!(a.population(&t).is_none_or(|p| p.members.is_empty()));

    let mut a = Archive::new();
    a.update(evaluated(of_size(3, &mut r), &[("T", 1.0)]), 10);
    a.update(evaluated(of_size(3, &mut r), &[("T", 1.0)]), 10);
    assert_eq!(a.population(&t).unwrap().best().unwrap().ev.size, 3);
    a.update(evaluated(of_size(2, &mut r), &[("T", 1.0)]), 10);
    let pop = a.population(&t).unwrap();
    assert_eq!(pop.members.len(), 1);
    assert_eq!(pop.best().unwrap().ev.size, 2);

    let mut a = Archive::new();
    a.update(evaluated(of_size(1, &mut r), &[("T", 0.4)]), 2);
    a.update(evaluated(of_size(1, &mut r), &[("T", 0.6)]), 2);
    a.update(evaluated(of_size(1, &mut r), &[("T", 0.5)]), 2);
    let hs: Vec<f64> = a.population(&t).unwrap().members.iter().map(|m| m.h).collect();
    assert_eq!(hs, vec![0.6, 0.5]);
}

#[test]
fn shared_cover_is_one_test_and_nothing_scored_is_empty() {
    let sampler = ping_sampler();
    let ind = sampler.sample_individual(&mut ChaCha8Rng::seed_from_u64(0));
    let mut a = Archive::new();
    assert!(extract_solution(&a).is_empty());
    a.update(evaluated(ind, &[("A", 1.0), ("B", 1.0)]), 10);
    assert_eq!(extract_solution(&a).len(), 1);
}

#[derive(Debug, Clone)]
struct Update {
    size: usize,
    scores: Vec<(u8, u8)>,
    t: f64,
}

fn update() -> impl Strategy<Value = Update> {
    (1usize..5, proptest::collection::vec((0u8..6, 0u8..=10), 0..6), 0.0f64..=1.0)
        .prop_map(|(size, scores, t)| Update { size, scores, t })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn archive_invariants_hold_over_update_sequences(seq in proptest::collection::vec(update(), 1..150)) {
        let sampler = ping_sampler();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let cfg = SearchConfig::default();
        let mut pool: BTreeMap<usize, Individual> = BTreeMap::new();
        while pool.len() < 4 {
            let i = sampler.sample_individual(&mut r);
            pool.entry(i.len()).or_insert(i);
        }
        let mut archive = Archive::new();
        let mut covered_sizes: BTreeMap<TargetId, usize> = BTreeMap::new();
        for u in seq {
            let names: Vec<(String, f64)> =
                u.scores.iter().map(|(t, h)| (format!("T{t}"), f64::from(*h) / 10.0)).collect();
            let refs: Vec<(&str, f64)> = names.iter().map(|(n, h)| (n.as_str(), *h)).collect();
            let limit = cfg.population_limit(u.t);
            archive.update(evaluated(pool[&u.size].clone(), &refs), limit);
            prop_assert!(archive.check_invariants(limit).is_ok(), "{:?}", archive.check_invariants(limit));
            for (t, size) in &covered_sizes {
                prop_assert!(archive.is_covered(t));
                let now = archive.population(t).unwrap().best().unwrap().ev.size;
                prop_assert!(now <= *size);
            }
            for t in archive.covered() {
                let size = archive.population(t).unwrap().best().unwrap().ev.size;
                covered_sizes.insert(t.clone(), size);
            }
            for (_, pop) in archive.populations() {
                prop_assert!(pop.members.iter().all(|m| m.h > 0.0));
            }
        }
    }
}
