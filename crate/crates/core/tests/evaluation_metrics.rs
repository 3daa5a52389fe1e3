mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use common::*;
use finalign::alignment::KgSettings;
use finalign::data::TxType;
use finalign::evaluation::{
    build_test_set, evaluate, hits_at_k, instance_id, EvalError, Metric, MetricResult, OracleRecommender,
    PopularityBaseline, RandomBaseline, Recommender, ResponsesRecommender, TestInstance, TestSetConfig,
};
use finalign::schedule::Schedule;
use finalign::Dataset;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn fixture() -> &'static (Dataset, Vec<TestInstance>) {
    static CELL: OnceLock<(Dataset, Vec<TestInstance>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let ds = desk_dataset(SYNTH_SEED);
        let cfg = TestSetConfig {
            kg: KgSettings {
                triple_cap: 200,
                ..KgSettings::default()
            },
            ..TestSetConfig::default()
        };
        let instances = build_test_set(&ds, &cfg, None).unwrap();
        (ds, instances)
    })
}

#[test]
fn instance_count_matches_direct_enumeration() {
    let (ds, instances) = fixture();
    let ticks = Schedule::test().ticks();
    assert_eq!(ticks.len(), 14);
    let mut expected = Vec::new();
    for p in ds.profiles() {
        for t in &ticks {
            let horizon_end = *t + chrono::Duration::days(180);
            if ds.prices().iter().any(|b| b.date >= *t && b.date <= horizon_end) {
                expected.push(instance_id(&p.customer_id, *t));
            }
        }
    }
    let got: Vec<&str> = instances.iter().map(|i| i.instance_id.as_str()).collect();
    assert_eq!(got, expected);
    assert_eq!(got.len(), 50 * 14);
    for inst in instances {
        assert!(ticks.contains(&inst.prompt.recommendation_date));
    }

    let cfg = TestSetConfig {
        kg: KgSettings {
            triple_cap: 50,
            ..KgSettings::default()
        },
        ..TestSetConfig::default()
    };
    let keep = |p: &finalign::CustomerProfile| p.customer_id.ends_with('3');
    let filtered = build_test_set(ds, &cfg, Some(&keep)).unwrap();
    let n = ds.profiles().iter().filter(|p| keep(p)).count();
    assert_eq!(filtered.len(), n * 14);
}

#[test]
fn hits_at_k_cases() {
    let t = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(hits_at_k(&["A", "B", "C"], &t(&["C"]), 3), 1);
    assert_eq!(hits_at_k(&["A", "B", "C", "D"], &t(&["D"]), 3), 0);
    assert_eq!(hits_at_k::<&str>(&[], &t(&["A"]), 3), 0);
    assert_eq!(hits_at_k(&["A"], &t(&[]), 3), 0);
}

#[test]
fn stderr_formula_is_exact() {
    let r = MetricResult::from_hits(Metric::Pref, 50, 100, 7);
    assert_eq!((r.mean, r.n, r.excluded), (0.5, 100, 7));
    assert!((r.stderr - 0.05).abs() < 1e-12);
    for (hits, n) in [(0, 10), (10, 10), (3, 7), (1234, 5000), (1, 1)] {
        let r = MetricResult::from_hits(Metric::Comb, hits, n, 0);
        let p = hits as f64 / n as f64;
        assert!((r.stderr - (p * (1.0 - p) / n as f64).sqrt()).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&r.mean));
    }
    let empty = MetricResult::from_hits(Metric::Prof, 0, 0, 4);
    assert_eq!((empty.mean, empty.stderr), (0.0, 0.0));
}

#[test]
fn oracle_is_perfect_and_comb_implies_both() {
    let (_, instances) = fixture();
    let eval = evaluate(&OracleRecommender, instances);
    let comb = eval.metric(Metric::Comb);
    assert!(comb.n > 0);
    assert_eq!((comb.mean, comb.stderr), (1.0, 0.0));
    for m in Metric::ALL {
        assert_eq!(eval.metric(m).mean, 1.0, "{}", m.label());
    }
    for e in [&eval, &evaluate(&RandomBaseline::new(&fixture().0.isins(), 2).unwrap(), instances)] {
        for (s, inst) in e.instances.iter().zip(instances) {
            assert_eq!(s.instance_id, inst.instance_id);
            if s.hits[Metric::Comb as usize] == Some(1) {
                assert_eq!(s.hits[Metric::Pref as usize], Some(1));
                assert_eq!(s.hits[Metric::Prof as usize], Some(1));
            }
            for m in Metric::ALL {
                assert_eq!(s.hits[m as usize].is_none(), m.target(&inst.outcomes).is_empty());
            }
        }
        for m in e.metrics.iter() {
            assert_eq!(m.n + m.excluded, instances.len());
        }
    }
}

fn choose(n: usize, k: usize) -> f64 {
    binomial(n as u64, k as u64)
}

#[test]
fn random_baseline_matches_hypergeometric() {
    let (ds, instances) = fixture();
    let universe = ds.isins();
    let u = universe.len();
    for seed in [1, 2, 3] {
        let eval = evaluate(&RandomBaseline::new(&universe, seed).unwrap(), instances);
        for m in Metric::ALL {
            let targets: Vec<usize> = instances
                .iter()
                .map(|i| m.target(&i.outcomes).len())
                .filter(|t| *t > 0)
                .collect();
            let expected =
                targets.iter().map(|t| 1.0 - choose(u - t, 3) / choose(u, 3)).sum::<f64>() / targets.len() as f64;
            let r = eval.metric(m);
            assert_eq!(r.n, targets.len());
            assert!(
                (r.mean - expected).abs() <= 3.0 * r.stderr,
                "seed {seed} {}: {} vs {expected} (se {})",
                m.label(),
                r.mean,
                r.stderr
            );
        }
    }
}

#[test]
fn random_picks_are_uniform_and_seeded() {
    let universe: BTreeSet<String> = (0..100).map(|i| format!("GR{i:010}")).collect();
    let rb = RandomBaseline::new(&universe, 42).unwrap();
    let mut freq: BTreeMap<&str, usize> = universe.iter().map(|s| (s.as_str(), 0)).collect();
    for i in 0..10_000 {
        let picks = rb.pick(&format!("inst{i}"));
        assert_eq!(picks.iter().collect::<BTreeSet<_>>().len(), 3);
        picks.iter().for_each(|p| *freq.get_mut(p).unwrap() += 1);
    }
    let expected = 30_000.0 / 100.0;
    let stat: f64 = freq.values().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(99.0).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi2 {stat} >= {critical}");

    assert_eq!(rb.pick("x"), RandomBaseline::new(&universe, 42).unwrap().pick("x"));
    let three: BTreeSet<String> = ["A", "B", "C"].map(String::from).into();
    let small = RandomBaseline::new(&three, 1).unwrap();
    assert_eq!(small.pick("q").into_iter().collect::<BTreeSet<_>>().len(), 3);
    let two: BTreeSet<String> = ["A", "B"].map(String::from).into();
    assert!(matches!(RandomBaseline::new(&two, 1), Err(EvalError::UniverseTooSmall(2))));
}

#[test]
fn popularity_matches_counting_oracle() {
    let (ds, _) = fixture();
    let pop = PopularityBaseline::new(ds, true);
    for tick in Schedule::test().ticks().into_iter().chain(Schedule::training().ticks()) {
        let mut counts: Vec<(usize, &str)> = ds
            .assets()
            .iter()
            .map(|a| {
                let n = ds
                    .transactions()
                    .iter()
                    .filter(|t| t.isin == a.isin && t.tx_type == TxType::Buy && t.timestamp < tick)
                    .count();
                (n, a.isin.as_str())
            })
            .collect();
        counts.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(y.1)));
        let want: Vec<&str> = counts.iter().take(3).map(|c| c.1).collect();
        assert_eq!(pop.top(tick, 3), want, "{tick}");
    }
}

#[test]
fn popularity_tie_rule_and_leader() {
    let mut ds = trade_dataset();
    let extra = [
        asset("GRB000000002", "Bond", "Government", "Sovereign"),
        asset("GRA000000001", "Stock", "Energy", "Oil"),
    ];
    let mut tx = trade_transaction();
    tx.isin = "GRB000000002".into();
    let mut tx2 = trade_transaction();
    tx2.isin = "GRA000000001".into();
    let mut assets = ds.assets().to_vec();
    assets.extend(extra);
    let mut txs = ds.transactions().to_vec();
    txs.push(tx);
    txs.push(tx2);
    ds = Dataset::new(txs, ds.prices().to_vec(), assets, ds.profiles().to_vec()).unwrap();
    let pop = PopularityBaseline::new(&ds, true);
    // All three assets have one Buy on the same day: ISIN order decides.
    assert_eq!(pop.top(d(2021, 1, 1), 3), ["GRA000000001", "GRB000000002", TRADE_ISIN]);
    assert_eq!(pop.top(d(2020, 3, 27), 2), ["GRA000000001", "GRB000000002"], "same-day buys are not yet visible");
    let everything = PopularityBaseline::new(&ds, false);
    assert_eq!(everything.top(d(2000, 1, 1), 1), ["GRA000000001"]);
}

struct Fixed(&'static str);

impl Recommender for Fixed {
    fn name(&self) -> String {
        "fixed".into()
    }
    fn respond(&self, _: &TestInstance) -> String {
        self.0.to_string()
    }
}

#[test]
fn unparseable_responses_score_zero() {
    let (_, instances) = fixture();
    for text in ["", "I cannot help with that.", "1. GRS000000000\n2. GRS000000001", "{\"isins\": []}"] {
        let e = evaluate(&Fixed(text), instances);
        for m in e.metrics.iter() {
            assert_eq!(m.mean, 0.0, "{text:?}");
            assert!(m.n > 0);
        }
    }
    let missing = ResponsesRecommender::new("partial", BTreeMap::new());
    assert!(evaluate(&missing, instances).metrics.iter().all(|m| m.mean == 0.0));
}

#[test]
fn evaluation_is_order_invariant() {
    let (ds, instances) = fixture();
    let rb = RandomBaseline::new(&ds.isins(), 9).unwrap();
    let forward = evaluate(&rb, instances);
    let mut reversed_input = instances.clone();
    reversed_input.reverse();
    let backward = evaluate(&rb, &reversed_input);
    assert_eq!(forward.metrics, backward.metrics);
    let mut a = forward.instances.clone();
    let mut b = backward.instances.clone();
    a.sort_by(|x, y| x.instance_id.cmp(&y.instance_id));
    b.sort_by(|x, y| x.instance_id.cmp(&y.instance_id));
    assert_eq!(a, b);
}

#[test]
fn only_the_first_three_recommendations_count() {
    let (_, instances) = fixture();
    let inst = instances.iter().find(|i| i.outcomes.desirable.len() == 1).expect("a single-target instance");
    let target = inst.outcomes.desirable.iter().next().unwrap();
    let others: Vec<String> = fixture()
        .0
        .isins()
        .into_iter()
        .filter(|x| !inst.outcomes.purchased.contains(x))
        .take(3)
        .collect();
    let text = format!("Top picks:\n- {}\n- {}\n- {}\n- {target}", others[0], others[1], others[2]);
    let responses = BTreeMap::from([(inst.instance_id.clone(), text)]);
    let e = evaluate(&ResponsesRecommender::new("late", responses), std::slice::from_ref(inst));
    assert_eq!(e.metric(Metric::Comb).mean, 0.0);
    assert_eq!(e.instances[0].recommended.len(), 3);
}
