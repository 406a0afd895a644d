use contract_design::detsolve::{best_response_set, equilibrium_set, solve_deterministic};
use contract_design::format::{parse_bayesian, parse_instance, serialize_bayesian, serialize_instance};
use contract_design::generators::{random_bayesian, random_instance, RandomBayesSpec, RandomSpec};
use contract_design::randsolve::verify_randomized;
use contract_design::reduction::{split_payment, welfare_report};
use contract_design::{ProfileSpace, RandomizedContract, IC_TOL};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = RandomSpec> {
    (any::<u64>(), 1usize..=3, 1usize..=3, 1usize..=4, 0.0f64..=1.0).prop_map(
        |(seed, agents, actions, outcomes, cost_scale)| RandomSpec {
            seed,
            agents,
            actions,
            outcomes,
            cost_scale,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_index_round_trips(sizes in prop::collection::vec(1usize..5, 1..5)) {
        let space = ProfileSpace::new(sizes);
        for k in 0..space.len() {
            prop_assert_eq!(space.index(&space.profile(k).0), k);
        }
    }

    #[test]
    fn instance_documents_round_trip(s in spec()) {
        let inst = random_instance(&s).unwrap();
        prop_assert_eq!(parse_instance(&serialize_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn bayesian_documents_round_trip(seed in any::<u64>(), types in 1usize..=3, ti in any::<bool>()) {
        let inst = random_bayesian(&RandomBayesSpec {
            seed,
            agents: 2,
            actions: 2,
            outcomes: 3,
            types,
            cost_scale: 0.5,
            type_independent: ti,
        })
        .unwrap();
        prop_assert_eq!(parse_bayesian(&serialize_bayesian(&inst)).unwrap(), inst);
    }

    #[test]
    fn split_shares_sum_back(p in prop::collection::vec(0.0f64..10.0, 1..5), n in 1usize..6) {
        let shares = split_payment(&p, n).unwrap();
        prop_assert_eq!(shares.len(), n);
        for (w, x) in p.iter().enumerate() {
            let total: f64 = shares.iter().map(|s| s[w]).sum();
            prop_assert!((total - x).abs() <= 1e-12 * (1.0 + x));
        }
    }

    #[test]
    fn best_responses_survive_splitting(s in spec(), p in prop::collection::vec(0.0f64..3.0, 4)) {
        let inst = random_instance(&s).unwrap();
        let payment = &p[..inst.n_outcomes()];
        let n = inst.n_agents();
        let br = best_response_set(&inst, payment, n as f64).unwrap();
        let eq = equilibrium_set(&inst, &split_payment(payment, n).unwrap()).unwrap();
        for a in &br.profiles {
            prop_assert!(eq.contains(a), "{a} is a best response but not an equilibrium");
        }
    }

    #[test]
    fn virtual_welfare_is_nonincreasing(s in spec()) {
        let inst = random_instance(&s).unwrap();
        let w = welfare_report(&inst, &[0.0, 0.5, 1.0, 2.0, 4.0]).unwrap();
        for pair in w.vsw.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn deterministic_optimum_is_obedient_as_a_point_mass(s in spec()) {
        let inst = random_instance(&s).unwrap();
        let d = solve_deterministic(&inst).unwrap();
        let space = inst.profile_space();
        let k = space.index(&d.contract.profile.0);
        let mut c = RandomizedContract::point_mass(&inst, k);
        for (i, p) in d.contract.payments.iter().enumerate() {
            c.pi[i][k] = p.clone();
        }
        let audit = verify_randomized(&inst, &c, IC_TOL).unwrap();
        prop_assert!(audit.ic_ok);
        prop_assert!((audit.value - d.value).abs() < 1e-9);
    }
}
