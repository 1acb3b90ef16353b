//! Shared fixtures and independent oracles for the integration suites.

use budget_tree::data::{Dataset, Sensor, SensorSpec};
use budget_tree::simplex::{LinearProgram, Rel, Row, VarDef};
use budget_tree::tree::TreeSpec;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Two-sensor cascade data over five classes. 80% of examples are easy:
/// classes 0 and 1 separated by a wide sign margin in column 0. The
/// remaining 20% sit at x0 = 0 exactly, an even mix of all five classes,
/// so any classifier reading only sensor 0 is wrong on four fifths of
/// them no matter what it predicts there; column 1 (the expensive sensor,
/// five clean levels) resolves them. The hard cluster separates from the
/// easy clusters in x0^2, which is what a quadratic decision basis at the
/// root of a cascade reads.
pub fn planted_cascade(n: usize, seed: u64) -> (Dataset, SensorSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let hard = rng.random::<f64>() < 0.2;
        if hard {
            let label = rng.random_range(0..5usize);
            x[[i, 0]] = 0.0;
            x[[i, 1]] = [-3.0, -1.5, 0.0, 1.5, 3.0][label] + rng.random_range(-0.05..0.05);
            labels.push(label);
        } else {
            let label = usize::from(rng.random::<bool>());
            x[[i, 0]] = (if label == 1 { 1.5 } else { -1.5 }) + rng.random_range(-0.02..0.02);
            x[[i, 1]] = rng.random_range(-0.3..0.3);
            labels.push(label);
        }
    }
    let dataset = Dataset::new(
        x,
        labels,
        vec!["x0".into(), "x1".into()],
        (0..5).map(|c| format!("c{c}")).collect(),
    )
    .unwrap();
    let sensors = SensorSpec {
        sensors: vec![
            Sensor { name: "cheap".into(), cost: 1.0, columns: vec![0] },
            Sensor { name: "rich".into(), cost: 4.0, columns: vec![1] },
        ],
    };
    (dataset, sensors)
}

/// The fixed cascade structure over the two sensors: stop with sensor 0
/// or acquire sensor 1 as well.
pub fn cascade_spec() -> TreeSpec {
    TreeSpec::node(TreeSpec::leaf([0]), TreeSpec::leaf([0, 1]))
}

/// Single leaf owning every sensor: the full-feature reference system.
pub fn full_leaf_spec() -> TreeSpec {
    TreeSpec::leaf([0, 1])
}

/// Multi-sensor noise-channel data for greedy-vs-exhaustive comparisons.
/// Column a carries signal-plus-noise (its sign alone classifies most
/// examples), column b measures the noise itself: worthless alone,
/// but jointly x_a - x_b recovers the clean signal. The refinement is
/// therefore genuinely nested; remaining columns are pure noise.
pub fn planted_multi(l: usize, n: usize, seed: u64) -> (Array2<f64>, Vec<usize>, SensorSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random_range(0..l);
    let mut b = rng.random_range(0..l);
    while b == a {
        b = rng.random_range(0..l);
    }
    let mut x = Array2::zeros((n, l));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let magnitude = rng.random_range(0.3..1.0);
        let label = usize::from(rng.random::<bool>());
        let signal = if label == 1 { magnitude } else { -magnitude };
        let channel_noise = rng.random_range(-0.7..0.7);
        x[[i, a]] = signal + channel_noise;
        x[[i, b]] = channel_noise;
        labels.push(label);
        for m in 0..l {
            if m != a && m != b {
                x[[i, m]] = rng.random_range(-1.0..1.0);
            }
        }
    }
    let sensors = SensorSpec {
        sensors: (0..l)
            .map(|m| Sensor {
                name: format!("s{m}"),
                cost: 1.0,
                columns: vec![m],
            })
            .collect(),
    };
    (x, labels, sensors)
}

// Gaussian elimination with partial pivoting; None when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        for r in (k + 1)..n {
            if a[r][k].abs() > a[p][k].abs() {
                p = r;
            }
        }
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for r in (k + 1)..n {
            let f = a[r][k] / a[k][k];
            if f != 0.0 {
                for c in k..n {
                    a[r][c] -= f * a[k][c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut v = b[k];
        for c in (k + 1)..n {
            v -= a[k][c] * b[c];
        }
        b[k] = v / a[k][k];
    }
    Some(b)
}

/// Brute-force LP optimum by vertex enumeration: every choice of n active
/// constraints (rows as equalities plus variable bounds) is solved and
/// checked for feasibility. Returns the best objective, or None if no
/// feasible vertex exists.
pub fn enumerate_lp_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    // Constraint pool as (coeffs, rhs): each can be made active.
    let mut pool: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut dense = vec![0.0; n];
        for &(j, a) in &row.coeffs {
            dense[j] += a;
        }
        pool.push((dense, row.rhs));
    }
    for (j, v) in lp.vars.iter().enumerate() {
        let mut lower = vec![0.0; n];
        lower[j] = 1.0;
        pool.push((lower.clone(), v.lower));
        if let Some(u) = v.upper {
            pool.push((lower, u));
        }
    }
    let m = pool.len();
    if m < n {
        return None;
    }

    let feasible = |x: &[f64]| -> bool {
        for row in &lp.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            match row.rel {
                Rel::Le => {
                    if act > row.rhs + 1e-7 {
                        return false;
                    }
                }
                Rel::Eq => {
                    if (act - row.rhs).abs() > 1e-7 {
                        return false;
                    }
                }
            }
        }
        for (j, v) in lp.vars.iter().enumerate() {
            if x[j] < v.lower - 1e-7 {
                return false;
            }
            if let Some(u) = v.upper {
                if x[j] > u + 1e-7 {
                    return false;
                }
            }
        }
        true
    };

    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = choice.iter().map(|&c| pool[c].0.clone()).collect();
        let b: Vec<f64> = choice.iter().map(|&c| pool[c].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // Next combination of n indices out of m.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] != i + m - n {
                choice[i] += 1;
                for k in (i + 1)..n {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Random feasible bounded LP with integer data: box bounds on every
/// variable plus rows satisfied by a planted integer point.
pub fn random_boxed_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(2..=4usize);
    let m = rng.random_range(1..=5usize);
    let uppers: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
    let anchor: Vec<f64> = uppers
        .iter()
        .map(|&u| rng.random_range(0..=u as i64) as f64)
        .collect();
    let vars: Vec<VarDef> = uppers
        .iter()
        .enumerate()
        .map(|(j, &u)| VarDef {
            name: format!("x{j}"),
            lower: 0.0,
            upper: Some(u),
        })
        .collect();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .map(|j| (j, rng.random_range(-3..=3) as f64))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
        let eq = rng.random_range(0..5) == 0;
        if eq {
            rows.push(Row {
                coeffs,
                rel: Rel::Eq,
                rhs: act,
            });
        } else {
            rows.push(Row {
                coeffs,
                rel: Rel::Le,
                rhs: act + rng.random_range(0..=3) as f64,
            });
        }
    }
    let objective: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
    LinearProgram {
        vars,
        objective,
        rows,
    }
}
