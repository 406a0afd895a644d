mod common;

use common::{exact_randomized_value, exact_vsw, min_payment_oracle, opt_d_oracle, opt_s_oracle, q, to_f64};
use contract_design::bayes::{self, BayesianInstance};
use contract_design::detsolve::{min_payment_lp, solve_deterministic, solve_single_agent};
use contract_design::generators::{self, RandomBayesSpec, RandomSpec};
use contract_design::randsolve::{solve_randomized, verify_randomized, RandLpConfig};
use contract_design::reduction::welfare_report;
use contract_design::{Instance, IC_TOL};
use num::BigRational;

fn random(seed: u64, agents: usize, actions: usize, outcomes: usize) -> Instance {
    generators::random_instance(&RandomSpec {
        seed,
        agents,
        actions,
        outcomes,
        cost_scale: 0.4,
    })
    .unwrap()
}

#[test]
fn deterministic_optimum_seed_seven() {
    let inst = random(7, 2, 2, 3);
    let s = solve_deterministic(&inst).unwrap();
    assert!((s.value - opt_d_oracle(&inst)).abs() < 1e-9);
    assert!((s.contract.principal_value(&inst) - s.value).abs() < 1e-9);
}

#[test]
fn single_agent_seed_eleven_alpha_two() {
    let inst = random(11, 2, 2, 3);
    let s = solve_single_agent(&inst, 2.0).unwrap();
    assert!((s.value - opt_s_oracle(&inst, 2.0)).abs() < 1e-9);
}

#[test]
fn min_payments_seed_thirteen() {
    let inst = random(13, 2, 3, 2);
    for p in inst.profile_space().iter() {
        let ours = min_payment_lp(&inst, &p).unwrap().map(|m| m.expected_payment);
        let oracle = min_payment_oracle(&inst, &p);
        match (ours, oracle) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{p}: {a} vs {b}"),
            (None, None) => {}
            other => panic!("{p}: {other:?}"),
        }
    }
}

#[test]
fn deterministic_and_single_agent_on_many_instances() {
    for seed in 100..160 {
        let n = 1 + (seed as usize % 2);
        let inst = random(seed, n, 2 + (seed as usize % 2), 2 + (seed as usize % 3));
        let d = solve_deterministic(&inst).unwrap();
        assert!((d.value - opt_d_oracle(&inst)).abs() < 1e-8, "seed {seed}");
        for alpha in [0.5, 1.0, 2.0] {
            let s = solve_single_agent(&inst, alpha).unwrap();
            assert!((s.value - opt_s_oracle(&inst, alpha)).abs() < 1e-8, "seed {seed} alpha {alpha}");
        }
    }
}

#[test]
fn gap_contract_value_is_exactly_one_fifteenth() {
    let inst = generators::gap();
    let c = generators::gap_contract();
    let exact = exact_randomized_value(&inst, &c);
    let fifteenth = BigRational::new(1.into(), 15.into());
    assert!(to_f64(&(exact - fifteenth)).abs() < 1e-15);
    let audit = verify_randomized(&inst, &c, IC_TOL).unwrap();
    assert!((audit.value - 1.0 / 15.0).abs() < 1e-12);
}

#[test]
fn randomized_relaxation_is_sandwiched() {
    for seed in 200..230 {
        let inst = random(seed, 2, 2, 3);
        let opt_d = opt_d_oracle(&inst);
        let sw = welfare_report(&inst, &[]).unwrap().sw;
        let r = solve_randomized(&inst, &RandLpConfig::new(1e3)).unwrap();
        assert!(r.m >= r.det_max_payment, "cap too small for the chain at seed {seed}");
        assert!(r.lp_value >= opt_d - 1e-7, "seed {seed}: {} < {opt_d}", r.lp_value);
        assert!(r.lp_value <= sw + 1e-7, "seed {seed}: {} > {sw}", r.lp_value);
        assert!(r.audit.ic_ok && r.audit.min_slack >= -1e-7, "seed {seed}");
        let exact = to_f64(&exact_randomized_value(&inst, &r.contract));
        assert!((exact - r.lp_value).abs() < 1e-6, "seed {seed}");
    }
}

fn random_bayes(seed: u64, type_independent: bool) -> BayesianInstance {
    generators::random_bayesian(&RandomBayesSpec {
        seed,
        agents: 2,
        actions: 2,
        outcomes: 3,
        types: 2,
        cost_scale: 0.5,
        type_independent,
    })
    .unwrap()
}

#[test]
fn bayes_welfare_seed_twenty_three_is_exact() {
    let inst = random_bayes(23, false);
    let scales = [0.5, 1.0, 2.0, 3.0];
    let w = bayes::bayes_welfare(&inst, &scales).unwrap();
    let (tspace, space) = (inst.type_space(), inst.profile_space());
    let rewards = inst.rewards();
    for (s, &alpha) in scales.iter().enumerate() {
        let mut expected = q(0.0);
        for l in 0..tspace.len() {
            if inst.prior[l] == 0.0 {
                continue;
            }
            let v = exact_vsw(
                |k| inst.dist(l, k).to_vec(),
                |k| {
                    let p = space.profile(k);
                    (0..inst.n_agents())
                        .map(|i| inst.cost(i, tspace.component(l, i), p.0[i]))
                        .collect()
                },
                &rewards,
                space.len(),
                alpha,
            );
            let per = w.per_type.iter().find(|t| t.type_profile == l).unwrap();
            assert!((per.vsw[s] - to_f64(&v)).abs() < 1e-12);
            expected += q(inst.prior[l]) * v;
        }
        assert!((w.expected[s] - to_f64(&expected)).abs() < 1e-12);
    }
}

#[test]
fn single_type_brute_force_matches_deterministic_oracle() {
    for seed in 300..310 {
        let inst = random(seed, 2, 2, 2);
        let b = BayesianInstance::from_instance(&inst);
        let bf = bayes::brute_force_bayes_deterministic(&b, true, 1 << 10).unwrap();
        assert!((bf.value - opt_d_oracle(&inst)).abs() < 1e-8, "seed {seed}");
    }
}

#[test]
fn affine_audit_agrees_with_hand_computed_value() {
    let inst = random_bayes(29, true);
    let c = bayes::affine_contract(&inst, 1.0).unwrap();
    let audit = bayes::verify_bayes_deterministic(&inst, &c, &bayes::AuditOptions::new(false)).unwrap();
    let rewards = inst.rewards();
    let space = inst.profile_space();
    let mut value = q(0.0);
    for (l, e) in c.entries.iter().enumerate() {
        let f = inst.dist(l, space.index(&e.profile.0));
        for (w, r) in rewards.iter().enumerate() {
            let mut net = q(*r);
            for p in &e.payments {
                net -= q(p[w]);
            }
            value += q(inst.prior[l]) * q(f[w]) * net;
        }
    }
    assert!((audit.value - to_f64(&value)).abs() < 1e-12);
}
