//! Independent oracles shared by the integration tests.
//!
//! LPs are solved by enumerating basic solutions with nalgebra, and values
//! that only need arithmetic are recomputed exactly with big rationals.

#![allow(dead_code)]

use contract_design::lp::Relation;
use contract_design::{ActionProfile, Instance, RandomizedContract};
use nalgebra::{DMatrix, DVector};
use num::{BigRational, ToPrimitive, Zero};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

/// `maximize c·x` subject to `rows` and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct SmallLp {
    pub maximize: bool,
    pub c: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

/// Rows as `a·x ≤ b`, including the sign constraints.
fn le_rows(n: usize, rows: &[(Vec<f64>, Relation, f64)]) -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    for (a, rel, b) in rows {
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        match rel {
            Relation::Le => out.push((a.clone(), *b)),
            Relation::Ge => out.push((neg, -b)),
            Relation::Eq => {
                out.push((a.clone(), *b));
                out.push((neg, -b));
            }
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        out.push((e, 0.0));
    }
    out
}

fn combinations(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best `c·x` over every basic feasible solution of `{a·x ≤ b}`; `None` if there is none.
fn best_vertex(n: usize, rows: &[(Vec<f64>, f64)], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(rows.len(), n, |pick| {
        let a = DMatrix::from_fn(n, n, |r, j| rows[pick[r]].0[j]);
        let b = DVector::from_fn(n, |r, _| rows[pick[r]].1);
        let svd = a.clone().svd(false, false);
        let smin = svd.singular_values.min();
        let smax = svd.singular_values.max();
        if smin <= 1e-10 * smax.max(1.0) {
            return;
        }
        let Some(x) = a.lu().solve(&b) else { return };
        let feasible = rows.iter().all(|(row, rhs)| {
            let lhs: f64 = row.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            lhs <= rhs + 1e-9 * (1.0 + rhs.abs())
        });
        if feasible {
            let v: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, x.iter().copied().collect()));
            }
        }
    });
    best
}

pub fn vertex_oracle(lp: &SmallLp) -> Oracle {
    let n = lp.c.len();
    let c: Vec<f64> = if lp.maximize {
        lp.c.clone()
    } else {
        lp.c.iter().map(|x| -x).collect()
    };
    let rows = le_rows(n, &lp.rows);
    let Some((v, _)) = best_vertex(n, &rows, &c) else {
        return Oracle::Infeasible;
    };
    // A recession direction d ≥ 0 with A d ≤ 0 and c·d > 0 means unbounded.
    // Normalizing with Σd ≤ 1 keeps the search to one extra row.
    let mut cone: Vec<(Vec<f64>, f64)> = rows.iter().map(|(a, _)| (a.clone(), 0.0)).collect();
    cone.push((vec![1.0; n], 1.0));
    let (ray, _) = best_vertex(n, &cone, &c).expect("the origin is a vertex of the normalized cone");
    if ray > 1e-9 {
        return Oracle::Unbounded;
    }
    Oracle::Optimal(if lp.maximize { v } else { -v })
}

/// Cheapest nonnegative payments making `profile` an equilibrium, by vertex enumeration.
pub fn min_payment_oracle(inst: &Instance, profile: &ActionProfile) -> Option<f64> {
    let space = inst.profile_space();
    let (n, m) = (inst.n_agents(), inst.n_outcomes());
    let k = space.index(&profile.0);
    let fa = &inst.distributions[k];
    let mut rows = Vec::new();
    for i in 0..n {
        let ai = profile.0[i];
        for d in 0..inst.agents[i].actions.len() {
            if d == ai {
                continue;
            }
            let fd = &inst.distributions[space.with_component(k, i, d)];
            let mut a = vec![0.0; n * m];
            for w in 0..m {
                a[i * m + w] = fa[w] - fd[w];
            }
            rows.push((a, Relation::Ge, inst.cost(i, ai) - inst.cost(i, d)));
        }
    }
    let c: Vec<f64> = (0..n * m).map(|j| fa[j % m]).collect();
    match vertex_oracle(&SmallLp {
        maximize: false,
        c,
        rows,
    }) {
        Oracle::Optimal(v) => Some(v),
        Oracle::Infeasible => None,
        Oracle::Unbounded => unreachable!("payments are bounded below by zero"),
    }
}

/// `max_a R(a) − minpay(a)` over inducible profiles.
pub fn opt_d_oracle(inst: &Instance) -> f64 {
    let space = inst.profile_space();
    (0..space.len())
        .filter_map(|k| {
            let p = space.profile(k);
            min_payment_oracle(inst, &p).map(|pay| inst.expected_reward(k) - pay)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Single agent choosing whole profiles at cost `alpha·Σ c_i`.
pub fn opt_s_oracle(inst: &Instance, alpha: f64) -> f64 {
    let space = inst.profile_space();
    let m = inst.n_outcomes();
    let mut best = f64::NEG_INFINITY;
    for k in 0..space.len() {
        let fa = &inst.distributions[k];
        let ca = alpha * inst.profile_cost(&space, k);
        let rows = (0..space.len())
            .filter(|&d| d != k)
            .map(|d| {
                let fd = &inst.distributions[d];
                let a: Vec<f64> = (0..m).map(|w| fa[w] - fd[w]).collect();
                (a, Relation::Ge, ca - alpha * inst.profile_cost(&space, d))
            })
            .collect();
        if let Oracle::Optimal(pay) = vertex_oracle(&SmallLp {
            maximize: false,
            c: fa.clone(),
            rows,
        }) {
            best = best.max(inst.expected_reward(k) - pay);
        }
    }
    best
}

pub fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

/// Exact principal value of a randomized contract.
pub fn exact_randomized_value(inst: &Instance, c: &RandomizedContract) -> BigRational {
    let mut total = BigRational::zero();
    for (k, mu) in c.mu.iter().enumerate() {
        if *mu == 0.0 {
            continue;
        }
        let f = &inst.distributions[k];
        for (w, o) in inst.outcomes.iter().enumerate() {
            let mut net = q(o.reward);
            for p in &c.pi {
                net -= q(p[k][w]);
            }
            total += q(*mu) * q(f[w]) * net;
        }
    }
    total
}

/// Exact `max_a [F_a·r − α·c(a)]` for one cost table.
pub fn exact_vsw(
    dist: impl Fn(usize) -> Vec<f64>,
    costs: impl Fn(usize) -> Vec<f64>,
    rewards: &[f64],
    profiles: usize,
    alpha: f64,
) -> BigRational {
    (0..profiles)
        .map(|k| {
            let f = dist(k);
            let mut v = BigRational::zero();
            for (w, r) in rewards.iter().enumerate() {
                v += q(f[w]) * q(*r);
            }
            let mut c = BigRational::zero();
            for x in costs(k) {
                c += q(x);
            }
            v - q(alpha) * c
        })
        .max()
        .expect("nonempty")
}
