use std::collections::BTreeSet;

use num_rational::Rational64;
use proptest::prelude::*;
use vaguelie::analysis::{classify_subjects, emit_csv, ingest_csv, length_cdf, summarize, SubjectType};
use vaguelie::equilibrium::{posterior_beliefs, StrategyProfile, TGrid};
use vaguelie::message_space::ovm_threshold;
use vaguelie::simulation::{paired_session, simulate_population, ReportRecord, SimConfig};
use vaguelie::{
    best_lie, classify_message, ovm, ovm_bruteforce, Anonymity, CostSpec, Environment, ExactParams, Message,
    MessageKind, ModelParams, Params, Restriction, StateSpace, TypeDistribution,
};

fn message_in(n: usize) -> impl Strategy<Value = Message> {
    let states = StateSpace::new(n).unwrap();
    (1u64..(1u64 << n)).prop_map(move |bits| Message::from_bits(bits, states).unwrap())
}

fn sized_message() -> impl Strategy<Value = (usize, Message)> {
    (2usize..=12).prop_flat_map(|n| (Just(n), message_in(n)))
}

fn record() -> impl Strategy<Value = ReportRecord> {
    (0usize..8, any::<bool>(), any::<bool>(), proptest::option::of(1usize..=10), message_in(10), any::<bool>())
        .prop_map(|(id, anon, restricted, state, message, paid)| ReportRecord {
            subject_id: format!("s{id}"),
            anonymity: if anon { Anonymity::Anonymous } else { Anonymity::NonAnonymous },
            stage: if restricted { Restriction::Restricted } else { Restriction::Unrestricted },
            true_state: state,
            message,
            realized_payoff: paid.then(|| message.lowest()),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mean_lies_between_extremes((_, m) in sized_message()) {
        let mean: Rational64 = m.expected_payoff();
        prop_assert!(Rational64::from_integer(m.lowest() as i64) <= mean);
        prop_assert!(mean <= Rational64::from_integer(m.highest() as i64));
    }

    #[test]
    fn utility_decomposes_exactly(
        (n, m) in sized_message(),
        gamma in 0i64..6,
        rho_num in 0i64..=20,
        t_num in 0i64..100,
        i_seed in 0usize..64,
    ) {
        let p = ExactParams::with_defaults(n, Rational64::from_integer(gamma)).unwrap();
        let i = 1 + i_seed % n;
        let rho = Rational64::new(rho_num, 20);
        let t = Rational64::new(t_num, 10);
        let gamma = Rational64::from_integer(gamma);
        prop_assert_eq!(p.utility(i, &m, t, rho), p.utility_anonymous(i, &m, t) + gamma * rho);
        if m.contains(i) {
            prop_assert_eq!(p.utility(i, &m, t, rho), p.utility(i, &m, Rational64::from_integer(0), rho));
        }
    }

    #[test]
    fn infeasible_aversion_support_rejected(n in 2usize..=12, gamma in 0.0f64..10.0, slack in 0.0f64..5.0) {
        let t_max = n as f64 + gamma - slack;
        let dist = TypeDistribution::uniform(t_max.max(1e-3));
        if let Ok(dist) = dist {
            let states = StateSpace::new(n).unwrap();
            prop_assert!(ModelParams::new(states, gamma, CostSpec::linear(0.1), dist).is_err());
        }
    }

    #[test]
    fn ovm_shape(n in 2usize..=12, i_seed in 0usize..64) {
        let states = StateSpace::new(n).unwrap();
        let i = 1 + i_seed % n;
        let m = ovm(i, states);
        prop_assert!(m.contains(i));
        let x = ovm_threshold(i, states);
        for k in (i + 1)..x {
            prop_assert!(!m.contains(k), "{} contains {} below the tail start {}", m, k, x);
        }
        let (best, maximizers) = ovm_bruteforce::<Rational64>(i, states).unwrap();
        prop_assert_eq!(m.expected_payoff::<Rational64>(), best);
        prop_assert!(maximizers.contains(&m));
    }

    #[test]
    fn best_lie_excludes_state(n in 2usize..=10, i_seed in 0usize..64, gamma in 0.0f64..4.0) {
        let p = Params::with_defaults(n, gamma).unwrap();
        let i = 1 + i_seed % n;
        let (lie, _) = best_lie(i, &p).unwrap();
        prop_assert!(!lie.contains(i));
    }

    #[test]
    fn classification_is_total_and_consistent((n, m) in sized_message(), state in proptest::option::of(1usize..=12)) {
        let states = StateSpace::new(n).unwrap();
        let state = state.filter(|s| *s <= n);
        let label = classify_message(&m, state, states);
        prop_assert_eq!(label.kind.is_vague(), m.is_vague());
        prop_assert_eq!(label.interval_flag, m.is_vague() && m.is_interval());
        if let Some(i) = state {
            prop_assert_eq!(label.kind == MessageKind::PreciseLie, m.is_precise() && !m.contains(i));
        }
    }

    #[test]
    fn csv_round_trip(records in proptest::collection::vec(record(), 1..30)) {
        let mut buf = Vec::new();
        emit_csv(&records, &mut buf).unwrap();
        let back = ingest_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &records);
        let mut again = Vec::new();
        emit_csv(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn summary_is_permutation_invariant(records in proptest::collection::vec(record(), 1..40), seed in any::<u64>()) {
        let mut shuffled = records.clone();
        let len = shuffled.len();
        let mut s = seed;
        for k in (1..len).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(k, (s >> 33) as usize % (k + 1));
        }
        prop_assert_eq!(summarize(&records).unwrap(), summarize(&shuffled).unwrap());
    }

    #[test]
    fn length_cdf_is_a_cdf(records in proptest::collection::vec(record(), 1..40)) {
        match length_cdf(&records) {
            Ok(cdf) => {
                prop_assert!(cdf.windows(2).all(|w| w[0].1 <= w[1].1 && w[1].0 == w[0].0 + 1));
                prop_assert_eq!(cdf[0].0, 1);
                prop_assert_eq!(cdf.last().unwrap().1, 1.0);
            }
            Err(_) => prop_assert!(records.iter().all(|r| r.stage == Restriction::Restricted)),
        }
    }

    #[test]
    fn typology_partitions_subjects(states in proptest::collection::vec((proptest::option::of(1usize..=10), message_in(10), proptest::option::of(1usize..=10), message_in(10)), 1..20)) {
        let records: Vec<ReportRecord> = states
            .iter()
            .enumerate()
            .flat_map(|(k, (sr, mr, su, mu))| {
                let make = |stage, state, message| ReportRecord {
                    subject_id: format!("s{k}"),
                    anonymity: Anonymity::Anonymous,
                    stage,
                    true_state: state,
                    message,
                    realized_payoff: None,
                };
                [make(Restriction::Restricted, *sr, *mr), make(Restriction::Unrestricted, *su, *mu)]
            })
            .collect();
        let t = classify_subjects(&records).unwrap();
        prop_assert_eq!(t.subjects.len(), states.len());
        prop_assert_eq!(SubjectType::ALL.iter().map(|l| t.count(*l)).sum::<usize>(), states.len());
    }

    #[test]
    fn posterior_beliefs_are_probabilities(weights in proptest::collection::vec(proptest::collection::vec(0u32..5, 4), 4 * 6)) {
        let states = StateSpace::new(4).unwrap();
        let grid = TGrid::midpoint(&TypeDistribution::uniform(8.0).unwrap(), 6).unwrap();
        let rows: Vec<Vec<(Message, f64)>> = weights
            .iter()
            .map(|w| {
                let total: u32 = w.iter().sum::<u32>().max(1);
                let mut row: Vec<(Message, f64)> = (1..=4)
                    .zip(w)
                    .filter(|(_, x)| **x > 0)
                    .map(|(j, x)| (Message::singleton(j), *x as f64 / total as f64))
                    .collect();
                if row.is_empty() {
                    row.push((Message::singleton(4), 1.0));
                }
                row
            })
            .collect();
        let profile = StrategyProfile::new(Environment::NA_R, states, 6, rows).unwrap();
        let beliefs = posterior_beliefs(&profile, &grid, 0.0).unwrap();
        for (m, rho) in beliefs.iter() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&rho), "rho({}) = {}", m, rho);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_payoffs_are_members(seed in any::<u64>(), gamma in 0.0f64..3.0) {
        let p = Params::with_defaults(10, gamma).unwrap();
        let g = TGrid::midpoint(&p.dist, 50).unwrap();
        let u = vaguelie::equilibrium::solve_anonymous_unrestricted(&p, &g).unwrap();
        let r = vaguelie::equilibrium::solve_anonymous_restricted(&p, &g).unwrap();
        let out = simulate_population(&u, &p, &g, &SimConfig::new(200, seed, Environment::A_UR).unwrap()).unwrap();
        for rec in &out.records {
            prop_assert!(rec.message.contains(rec.realized_payoff.unwrap()));
        }
        let paired = paired_session(&r, &u, &p, &g, &SimConfig::new(100, seed, Environment::A_R).unwrap()).unwrap();
        let ids: BTreeSet<&str> = paired.sidecar.iter().map(|a| a.subject_id.as_str()).collect();
        prop_assert_eq!(ids.len(), 100);
        for pair in paired.sidecar.chunks(2) {
            prop_assert_eq!(&pair[0].subject_id, &pair[1].subject_id);
            prop_assert_eq!(pair[0].aversion, pair[1].aversion);
            prop_assert!(pair[0].stage != pair[1].stage);
        }
    }
}

#[test]
fn linear_cost_valid_iff_kappa_below_one() {
    for n in 2..=12 {
        let states = StateSpace::new(n).unwrap();
        for k in [0.0, 0.1, 0.5, 0.9, 0.999, 1.0, 1.2, 3.0] {
            let passed = CostSpec::linear(k).validate(states).passed();
            assert_eq!(passed, k < 1.0, "N={n} kappa={k}");
        }
    }
}
