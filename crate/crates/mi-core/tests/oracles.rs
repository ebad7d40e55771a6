//! Independent test-side oracles for the hand-rolled numerics.
//!
//! Each oracle recomputes the target quantity from its definition with a
//! deliberately different algorithm (quadratic pair scans, explicit O/E/w
//! matrices, grid search) so implementation and test cannot share a bug.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mi_core::lexical;
use mi_core::stats;
use mi_core::strategy;

/// O(n^2) tau-b straight from the pair-counting definition.
fn brute_force_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap();
            let dy = y[i].partial_cmp(&y[j]).unwrap();
            if dx.is_eq() || dy.is_eq() {
                continue;
            }
            if dx == dy {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let tie_pairs = |v: &[f64]| -> i64 {
        let mut t = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                if v[i] == v[j] {
                    t += 1;
                }
            }
        }
        t
    };
    let n0 = (n * (n - 1) / 2) as i64;
    let n1 = tie_pairs(x);
    let n2 = tie_pairs(y);
    if n0 == n1 || n0 == n2 {
        return None;
    }
    let dx = (n0 - n1) as f64;
    let dy = (n0 - n2) as f64;
    Some((concordant - discordant) as f64 / (dx * dy).sqrt())
}

#[test]
fn kendall_tau_b_matches_brute_force_on_1000_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b656e64);
    let mut compared = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=8);
        // Small integer values force plenty of ties.
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
        match (stats::kendall_tau_b(&x, &y), brute_force_tau_b(&x, &y)) {
            (Ok(fast), Some(brute)) => {
                assert_eq!(fast, brute, "x={x:?} y={y:?}");
                compared += 1;
            }
            (Err(_), None) => {}
            (fast, brute) => panic!("divergent degeneracy: {fast:?} vs {brute:?} x={x:?} y={y:?}"),
        }
    }
    assert!(compared > 500, "too few non-degenerate draws: {compared}");
}

/// Weighted kappa from explicit O, E, and w matrices.
fn matrix_kappa(a: &[i64], b: &[i64], min: i64, max: i64) -> (f64, bool) {
    let k = (max - min + 1) as usize;
    let n = a.len() as f64;
    let mut o = vec![vec![0.0; k]; k];
    for (&ai, &bi) in a.iter().zip(b) {
        o[(ai - min) as usize][(bi - min) as usize] += 1.0;
    }
    let row: Vec<f64> = (0..k).map(|i| o[i].iter().sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| (0..k).map(|i| o[i][j]).sum()).collect();
    let mut w = vec![vec![0.0; k]; k];
    for (i, wi) in w.iter_mut().enumerate() {
        for (j, wij) in wi.iter_mut().enumerate() {
            let d = i as f64 - j as f64;
            *wij = d * d / ((k - 1) * (k - 1)) as f64;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            num += w[i][j] * o[i][j];
            den += w[i][j] * row[i] * col[j] / n;
        }
    }
    if den == 0.0 {
        (1.0, true)
    } else {
        (1.0 - num / den, false)
    }
}

#[test]
fn weighted_kappa_matches_matrix_oracle_on_1000_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b617070);
    for _ in 0..1000 {
        let n = rng.gen_range(2..=50);
        let a: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
        let b: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=5)).collect();
        let fast = stats::quadratic_weighted_kappa(&a, &b, 1, 5).unwrap();
        let (oracle, degenerate) = matrix_kappa(&a, &b, 1, 5);
        assert_eq!(fast.degenerate, degenerate, "a={a:?} b={b:?}");
        assert!((fast.kappa - oracle).abs() < 1e-12, "a={a:?} b={b:?}");
    }
}

/// Textbook BLEU-4 with add-one smoothing, written over explicit n-gram maps.
fn textbook_bleu4(candidate: &[String], refs: &[&[String]]) -> f64 {
    use std::collections::HashMap;
    let grams = |tokens: &[String], n: usize| -> HashMap<Vec<String>, usize> {
        let mut m = HashMap::new();
        if tokens.len() >= n {
            for w in tokens.windows(n) {
                *m.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
        m
    };
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cand = grams(candidate, n);
        let total: usize = cand.values().sum();
        let mut clipped = 0usize;
        for (g, &c) in &cand {
            let best = refs
                .iter()
                .map(|r| grams(r, n).get(g).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += c.min(best);
        }
        log_sum += (((clipped + 1) as f64) / ((total + 1) as f64)).ln();
    }
    let c_len = candidate.len() as f64;
    let r_len = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| {
            let diff = (l as i64 - candidate.len() as i64).abs();
            (diff, l)
        })
        .unwrap() as f64;
    let bp = if c_len > r_len { 1.0 } else { (1.0 - r_len / c_len).exp() };
    bp * (log_sum / 4.0).exp()
}

#[test]
fn self_bleu_matches_textbook_oracle_on_100_sessions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x626c6575);
    let alphabet = ["a", "b", "c", "up", "down", "well"];
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let session: Vec<String> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=8);
                (0..len)
                    .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let refs: Vec<&str> = session.iter().map(|s| s.as_str()).collect();
        let fast = lexical::self_bleu(&refs).unwrap();

        let tokenized: Vec<Vec<String>> = session
            .iter()
            .map(|s| s.split_whitespace().map(|w| w.to_string()).collect())
            .collect();
        let mut sum = 0.0;
        for (i, cand) in tokenized.iter().enumerate() {
            let others: Vec<&[String]> = tokenized
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, t)| t.as_slice())
                .collect();
            sum += textbook_bleu4(cand, &others);
        }
        let oracle = sum / tokenized.len() as f64;
        assert!((fast - oracle).abs() < 1e-9, "session={session:?}");
    }
}

#[test]
fn adherence_grid_search_peaks_at_the_ideal_mix() {
    // Every distribution on the 0.01 grid over 4 categories; the maximum must
    // sit exactly on [0.50, 0.25, 0.20, 0.05].
    let mut best = f64::NEG_INFINITY;
    let mut best_point = [0.0; 4];
    for i in 0..=100u32 {
        for j in 0..=(100 - i) {
            for k in 0..=(100 - i - j) {
                let l = 100 - i - j - k;
                let p = [
                    i as f64 / 100.0,
                    j as f64 / 100.0,
                    k as f64 / 100.0,
                    l as f64 / 100.0,
                ];
                let a = strategy::adherence_of_distribution(&p).unwrap();
                if a > best {
                    best = a;
                    best_point = p;
                }
            }
        }
    }
    assert_eq!(best_point, [0.50, 0.25, 0.20, 0.05]);
    assert!(best > 0.999, "peak adherence {best} unexpectedly low");
}

/// Adaptive Simpson integration to a fixed tolerance.
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(lm) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(rm) + f(b));
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, tol / 2.0, depth - 1) + simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

#[test]
fn student_t_tail_matches_quadrature_oracle() {
    // Unnormalized density; the normalizing constant cancels in the ratio,
    // so the oracle shares no special-function code with the implementation.
    // The tail integral substitutes x = t/u, turning [t, inf) into (0, 1]
    // where the integrand vanishes smoothly at u = 0 (order u^(df-1)).
    for df in [2.0f64, 4.0, 5.0, 9.0, 14.0, 29.0, 40.0] {
        let pdf = move |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        for t in [0.1f64, 0.5, 1.0, 1.8, 2.5, 3.2, 5.0] {
            let tail_integrand = move |u: f64| {
                if u == 0.0 {
                    0.0
                } else {
                    pdf(t / u) * t / (u * u)
                }
            };
            let central = simpson(&pdf, -t, t, 1e-14, 48);
            let tail = simpson(&tail_integrand, 0.0, 1.0, 1e-14, 48);
            let oracle = (2.0 * tail / (central + 2.0 * tail)).clamp(0.0, 1.0);
            let fast = mi_core::stats::student_t_two_sided_p(t, df);
            assert!(
                (fast - oracle).abs() < 1e-9,
                "t={t} df={df}: {fast} vs {oracle}"
            );
        }
    }
}
