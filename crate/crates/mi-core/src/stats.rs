//! Agreement and correlation statistics for judge/human rating comparison.
//!
//! Quadratic-weighted kappa over integer rating pairs, Pearson/Spearman/
//! Kendall tau-b correlations with two-sided p-values, and a paired t-test.
//! The t and incomplete-beta machinery is hand-rolled (Lanczos ln-gamma,
//! Lentz continued fraction) and good to ~1e-9; the normal tail used for
//! tau's p-value uses a rational erfc approximation good to ~1e-7.

use crate::error::StatsError;

/// Quadratic-weighted kappa outcome. `degenerate` flags the case where the
/// expected disagreement is zero (both raters constant on one category), in
/// which kappa is reported as 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResult {
    pub kappa: f64,
    pub degenerate: bool,
}

/// Cohen's kappa with quadratic weights w_ij = (i-j)^2 / (k-1)^2 over the
/// category range `min..=max`.
pub fn quadratic_weighted_kappa(
    a: &[i64],
    b: &[i64],
    min: i64,
    max: i64,
) -> Result<KappaResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    for &v in a.iter().chain(b) {
        if v < min || v > max {
            return Err(StatsError::OutOfRange { value: v as f64, min, max });
        }
    }
    let k = (max - min + 1) as usize;
    if k < 2 {
        return Ok(KappaResult { kappa: 1.0, degenerate: true });
    }
    let n = a.len() as f64;
    let mut observed = vec![vec![0.0f64; k]; k];
    let mut marg_a = vec![0.0f64; k];
    let mut marg_b = vec![0.0f64; k];
    for (&ra, &rb) in a.iter().zip(b) {
        let i = (ra - min) as usize;
        let j = (rb - min) as usize;
        observed[i][j] += 1.0;
        marg_a[i] += 1.0;
        marg_b[j] += 1.0;
    }
    let denom = ((k - 1) * (k - 1)) as f64;
    let weight = |i: usize, j: usize| {
        let d = i as f64 - j as f64;
        d * d / denom
    };
    let mut w_obs = 0.0;
    let mut w_exp = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = weight(i, j);
            w_obs += w * observed[i][j];
            w_exp += w * marg_a[i] * marg_b[j] / n;
        }
    }
    if w_exp == 0.0 {
        return Ok(KappaResult { kappa: 1.0, degenerate: true });
    }
    Ok(KappaResult { kappa: 1.0 - w_obs / w_exp, degenerate: false })
}

fn validate_paired(x: &[f64], y: &[f64], needed: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < needed {
        return Err(StatsError::TooFewObservations { needed, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    validate_paired(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("y"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Ranks with ties sharing the average of their positions (1-based).
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    validate_paired(x, y, 2)?;
    pearson_r(&average_ranks(x), &average_ranks(y))
}

struct KendallCounts {
    /// Concordant minus discordant pairs.
    num: i128,
    tot: u128,
    /// Pairs tied on x / on y.
    n1: u128,
    n2: u128,
    x_runs: Vec<u64>,
    y_runs: Vec<u64>,
}

fn tie_runs(sorted: &[f64]) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let len = (j - i + 1) as u64;
        if len > 1 {
            runs.push(len);
        }
        i = j + 1;
    }
    runs
}

fn pairs_of(runs: &[u64]) -> u128 {
    runs.iter().map(|&t| t as u128 * (t as u128 - 1) / 2).sum()
}

fn count_inversions(a: &mut [f64], buf: &mut [f64]) -> u128 {
    let n = a.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = a.split_at_mut(mid);
        count_inversions(left, buf) + count_inversions(right, buf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if a[j] < a[i] {
            inv += (mid - i) as u128;
            buf[k] = a[j];
            j += 1;
        } else {
            buf[k] = a[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = a[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = a[j];
        j += 1;
        k += 1;
    }
    a.copy_from_slice(&buf[..n]);
    inv
}

/// Knight's O(n log n) accounting: sort by (x, y), count tie runs, then count
/// y-inversions (exactly the discordant pairs) with a merge sort.
fn kendall_counts(x: &[f64], y: &[f64]) -> KendallCounts {
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_runs = tie_runs(&xs);
    let n1 = pairs_of(&x_runs);

    let mut n3: u128 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pairs[j + 1] == pairs[i] {
            j += 1;
        }
        let len = (j - i + 1) as u128;
        n3 += len * (len - 1) / 2;
        i = j + 1;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let q = count_inversions(&mut ys, &mut buf);
    // ys is now sorted; reuse it for y tie runs.
    let y_runs = tie_runs(&ys);
    let n2 = pairs_of(&y_runs);

    let tot = n as u128 * (n as u128 - 1) / 2;
    let num = tot as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * q as i128;
    KendallCounts { num, tot, n1, n2, x_runs, y_runs }
}

/// Kendall's tau-b with tie correction in the denominator.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    validate_paired(x, y, 2)?;
    let c = kendall_counts(x, y);
    let dx = (c.tot - c.n1) as f64;
    let dy = (c.tot - c.n2) as f64;
    if dx == 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    if dy == 0.0 {
        return Err(StatsError::ZeroVariance("y"));
    }
    Ok(c.num as f64 / (dx * dy).sqrt())
}

/// Tau-b plus the normal-approximation z and two-sided p, with the standard
/// tie-corrected variance of the concordant-minus-discordant count.
pub fn kendall_tau_b_with_p(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), StatsError> {
    validate_paired(x, y, 3)?;
    let tau = kendall_tau_b(x, y)?;
    let c = kendall_counts(x, y);
    let n = x.len() as f64;

    let run_sum = |runs: &[u64], f: &dyn Fn(f64) -> f64| -> f64 {
        runs.iter().map(|&t| f(t as f64)).sum()
    };
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = run_sum(&c.x_runs, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = run_sum(&c.y_runs, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let t1 = run_sum(&c.x_runs, &|t| t * (t - 1.0));
    let u1 = run_sum(&c.y_runs, &|t| t * (t - 1.0));
    let t2 = run_sum(&c.x_runs, &|t| t * (t - 1.0) * (t - 2.0));
    let u2 = run_sum(&c.y_runs, &|t| t * (t - 1.0) * (t - 2.0));
    let var = (v0 - vt - vu) / 18.0
        + t1 * u1 / (2.0 * n * (n - 1.0))
        + t2 * u2 / (9.0 * n * (n - 1.0) * (n - 2.0));
    if var <= 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    let z = c.num as f64 / var.sqrt();
    let p = normal_two_sided_p(z);
    Ok((tau, z, p))
}

/// Paired two-sided t-test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedT {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-sided paired t-test on matched samples.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<PairedT, StatsError> {
    validate_paired(x, y, 2)?;
    let n = x.len() as f64;
    let diffs: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(StatsError::DegenerateTest);
    }
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    Ok(PairedT { t, df, p: student_t_two_sided_p(t, df) })
}

/// Two-sided p for a t statistic: I_{df/(df+t^2)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x)
}

/// Two-sided p for a correlation r on n pairs via the exact t transform with
/// n-2 degrees of freedom. |r| = 1 collapses to p = 0.
pub fn correlation_two_sided_p(r: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooFewObservations { needed: 3, got: n });
    }
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(StatsError::NonFinite);
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok(student_t_two_sided_p(t, df))
}

/// Significance stars under the strict p < threshold convention.
pub fn significance_stars(p: f64) -> &'static str {
    if !(p >= 0.0) {
        return "";
    }
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// ln Gamma(x) for x > 0, Lanczos series.
pub fn ln_gamma(x: f64) -> f64 {
    const COF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-15;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// erfc by the rational approximation of Numerical-Recipes pedigree;
/// fractional error under 1.2e-7 on the whole line.
pub fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Two-sided normal tail probability for a z statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc_approx(z.abs() / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_perfect_and_inverted() {
        let k = quadratic_weighted_kappa(&[1, 2, 3, 4, 5], &[1, 2, 3, 4, 5], 1, 5).unwrap();
        assert_eq!(k.kappa, 1.0);
        assert!(!k.degenerate);
        // Two categories, perfectly swapped.
        let k = quadratic_weighted_kappa(&[1, 1, 2, 2], &[2, 2, 1, 1], 1, 2).unwrap();
        assert!((k.kappa + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_hand_computed_example() {
        // O: (1,1) (1,2) (2,2) (3,3) with min=1 max=3, w = d^2/4.
        // w_obs = 0.25; marginals a = [2,1,1], b = [1,2,1]; w_exp = 5/4;
        // kappa = 1 - 0.25/1.25 = 0.8 (matches sklearn's quadratic kappa).
        let k = quadratic_weighted_kappa(&[1, 1, 2, 3], &[1, 2, 2, 3], 1, 3).unwrap();
        assert!((k.kappa - 0.8).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_constant_raters() {
        let k = quadratic_weighted_kappa(&[3, 3, 3], &[3, 3, 3], 1, 5).unwrap();
        assert_eq!(k.kappa, 1.0);
        assert!(k.degenerate);
    }

    #[test]
    fn kappa_validation() {
        assert_eq!(
            quadratic_weighted_kappa(&[1, 2], &[1], 1, 5),
            Err(StatsError::LengthMismatch(2, 1))
        );
        assert!(matches!(
            quadratic_weighted_kappa(&[0], &[1], 1, 5),
            Err(StatsError::OutOfRange { .. })
        ));
    }

    #[test]
    fn pearson_known_values() {
        let r = pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = pearson_r(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        assert_eq!(
            pearson_r(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::ZeroVariance("x"))
        );
    }

    #[test]
    fn ranks_average_over_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_is_rank_pearson() {
        // Monotone but nonlinear: rho = 1.
        let rho = spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        // Tied case, hand-computed: 4.5 / sqrt(22.5).
        let rho = spearman_rho(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kendall_simple_and_tied() {
        let tau = kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((tau - 1.0).abs() < 1e-12);
        let tau = kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((tau + 1.0).abs() < 1e-12);
        // One x tie: num 2, denom sqrt(2 * 3).
        let tau = kendall_tau_b(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((tau - 2.0 / 6.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            kendall_tau_b(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::ZeroVariance("x"))
        );
    }

    #[test]
    fn t_test_output_matches_reference() {
        // scipy.stats.ttest_rel([1,2,3,4,5], [2,3,5,4,7]):
        // t = -3.2071349029490923, p = 0.032677923336803014.
        let out = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 5.0, 4.0, 7.0]).unwrap();
        assert!((out.t + 3.2071349029490923).abs() < 1e-12);
        assert_eq!(out.df, 4.0);
        assert!((out.p - 0.032677923336803).abs() < 1e-9, "p = {}", out.p);
        assert_eq!(
            paired_t_test(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::DegenerateTest)
        );
    }

    #[test]
    fn t_p_edge_values() {
        assert!((student_t_two_sided_p(0.0, 7.0) - 1.0).abs() < 1e-12);
        // Large |t| drives p to zero.
        assert!(student_t_two_sided_p(50.0, 7.0) < 1e-8);
        // df = 1 is the Cauchy case: p(t=1) = 0.5.
        assert!((student_t_two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        for x in [0.1, 0.25, 0.5, 0.75, 0.9] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x) - x).abs() < 1e-12);
            let expected = 3.0 * x * x - 2.0 * x * x * x;
            assert!((regularized_incomplete_beta(2.0, 2.0, x) - expected).abs() < 1e-12);
        }
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-10);
        assert!((ln_gamma(2.0)).abs() < 1e-10);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-10);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn normal_tail_matches_known_quantiles() {
        assert!((erfc_approx(0.0) - 1.0).abs() < 1e-7);
        assert!((normal_two_sided_p(1.959963985) - 0.05).abs() < 1e-6);
        assert!((normal_two_sided_p(2.5758293) - 0.01).abs() < 1e-6);
    }

    #[test]
    fn correlation_p_behaves() {
        assert_eq!(correlation_two_sided_p(0.999999, 20).map(|p| p < 0.001), Ok(true));
        assert_eq!(correlation_two_sided_p(1.0, 20), Ok(0.0));
        assert!((correlation_two_sided_p(0.0, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!(correlation_two_sided_p(0.5, 2).is_err());
    }

    #[test]
    fn stars_are_strict() {
        assert_eq!(significance_stars(0.0009), "***");
        assert_eq!(significance_stars(0.001), "**");
        assert_eq!(significance_stars(0.009), "**");
        assert_eq!(significance_stars(0.01), "*");
        assert_eq!(significance_stars(0.049), "*");
        assert_eq!(significance_stars(0.05), "");
        assert_eq!(significance_stars(0.9), "");
        assert_eq!(significance_stars(f64::NAN), "");
    }

    #[test]
    fn kendall_p_on_clear_trend() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 2.0 + 1.0).collect();
        let (tau, z, p) = kendall_tau_b_with_p(&x, &y).unwrap();
        assert!((tau - 1.0).abs() < 1e-12);
        assert!(z > 5.0);
        assert!(p < 1e-6);
    }
}
