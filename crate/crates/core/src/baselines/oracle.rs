// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force references. Each recomputes its statistic from scratch at every
//! time step and shares no state or code with the online detectors.

use crate::error::{ensure_finite, FocusError};

/// `P(n) = max_{1 <= w <= n} |x_{n-w+1} + ... + x_n| / sqrt(w)` for every `n`.
/// O(n^2).
pub fn page_cusum_oracle(data: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len());
    for n in 1..=data.len() {
        let mut sum = 0.0;
        let mut best: f64 = 0.0;
        for w in 1..=n {
            sum += data[n - w];
            best = best.max(sum.abs() / (w as f64).sqrt());
        }
        out.push(best);
    }
    out
}

/// Half the unknown-pre-change-mean likelihood ratio, maximized over
/// `1 <= tau < n`, for every `n`. The first entry is 0. O(n^2).
///
/// Uses the textbook three-term form
/// `tau (s/tau)^2 + (n-tau) ((S-s)/(n-tau))^2 - n (S/n)^2`.
pub fn yu_oracle(data: &[f64]) -> Result<Vec<f64>, FocusError> {
    if data.len() < 2 {
        return Err(FocusError::input("the likelihood-ratio oracle needs at least 2 observations"));
    }
    let mut prefix = vec![0.0; data.len() + 1];
    for (i, &x) in data.iter().enumerate() {
        prefix[i + 1] = prefix[i] + ensure_finite(x)?;
    }
    let mut out = vec![0.0];
    for n in 2..=data.len() {
        let big_s = prefix[n];
        let nf = n as f64;
        let mut best: f64 = 0.0;
        for (tau, &s) in prefix.iter().enumerate().take(n).skip(1) {
            let t = tau as f64;
            let lr = t * (s / t).powi(2) + (nf - t) * ((big_s - s) / (nf - t)).powi(2) - nf * (big_s / nf).powi(2);
            best = best.max(lr);
        }
        out.push(best / 2.0);
    }
    Ok(out)
}

/// Best fit of a constant mean under the capped square loss:
/// `max_mu -sum min{(x - mu)^2, cap}`, by a sweep over sorted breakpoints.
fn capped_fit(sorted_events: &[(f64, i8, f64)], m: usize, cap: f64) -> f64 {
    let mut best = -cap * m as f64;
    let (mut cnt, mut sum, mut sumsq) = (0usize, 0.0, 0.0);
    for (k, &(at, kind, x)) in sorted_events.iter().enumerate() {
        if kind > 0 {
            cnt += 1;
            sum += x;
            sumsq += x * x;
        } else {
            cnt -= 1;
            sum -= x;
            sumsq -= x * x;
        }
        if cnt == 0 {
            continue;
        }
        let hi = sorted_events.get(k + 1).map_or(f64::INFINITY, |e| e.0);
        let c = cnt as f64;
        let mu = (sum / c).clamp(at, hi);
        let inside = c * mu * mu - 2.0 * sum * mu + sumsq;
        best = best.max(-inside - cap * (m - cnt) as f64);
    }
    best
}

/// Robust change statistic for every `n`:
/// `(max_{0 <= tau <= n} [M(1..tau) + M(tau+1..n)] - M(1..n)) / 2`, where `M` is
/// the best constant fit under the capped loss and `M` of an empty segment is 0.
/// O(n^3); intended for streams of a few hundred points.
pub fn robust_oracle(data: &[f64], cap: f64) -> Result<Vec<f64>, FocusError> {
    if !(cap > 0.0) {
        return Err(FocusError::config(format!("cap must be > 0, got {cap}")));
    }
    for &x in data {
        ensure_finite(x)?;
    }
    let n = data.len();
    // fit[i][j - i] = M(x_{i+1..j}), 0 <= i <= j <= n
    let mut fit: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![0.0];
        let mut events: Vec<(f64, i8, f64)> = Vec::new();
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for j in i + 1..=n {
            let x = data[j - 1];
            let m = j - i;
            if cap.is_infinite() {
                sum += x;
                sumsq += x * x;
                let mean = sum / m as f64;
                row.push(-(sumsq - 2.0 * mean * sum + m as f64 * mean * mean));
                continue;
            }
            let r = cap.sqrt();
            for e in [(x - r, 1i8, x), (x + r, -1i8, x)] {
                // exits sort before entries at the same point
                let pos = events.partition_point(|p| (p.0, p.1) <= (e.0, e.1));
                events.insert(pos, e);
            }
            row.push(capped_fit(&events, m, cap));
        }
        fit.push(row);
    }
    let mut out = Vec::with_capacity(n);
    for end in 1..=n {
        let null = fit[0][end];
        let best = (0..=end).map(|tau| fit[0][tau] + fit[tau][end - tau]).fold(f64::NEG_INFINITY, f64::max);
        out.push(((best - null) / 2.0).max(0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn page_oracle_examples() {
        let p = page_cusum_oracle(&[1.0, 1.0]);
        assert_eq!(p[0], 1.0);
        assert!((p[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(page_cusum_oracle(&[0.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn yu_oracle_examples() {
        let y = yu_oracle(&[0.0, 0.0, 3.0]).unwrap();
        assert!((y[2] - 3.0).abs() < 1e-12);
        assert!(yu_oracle(&[2.5; 9]).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(yu_oracle(&[1.0]).is_err());
    }

    #[test]
    fn capped_fit_matches_grid_search() {
        let data = [0.0, 0.3, 5.0, 5.2, -1.0, 9.0];
        let cap = 2.0;
        let got = robust_oracle(&data, cap).unwrap();
        assert_eq!(got.len(), data.len());
        let mut events = Vec::new();
        for &x in &data {
            let r = cap.sqrt();
            events.push((x - r, 1i8, x));
            events.push((x + r, -1i8, x));
        }
        events.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
        let sweep = capped_fit(&events, data.len(), cap);
        let grid = (0..200_000)
            .map(|i| -5.0 + i as f64 * 1e-4)
            .map(|mu| -data.iter().map(|&x| ((x - mu) * (x - mu)).min(cap)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(sweep >= grid - 1e-12);
        assert!(sweep - grid < 1e-6);
    }

    #[test]
    fn robust_oracle_two_level_example() {
        let got = robust_oracle(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], 1.0).unwrap();
        // null: best constant fits one level, pays K on the other three -> -3
        // split at 3 fits both exactly -> 0
        assert!((got[5] - 1.5).abs() < 1e-12);
        assert_eq!(&got[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn robust_oracle_infinite_cap_is_gaussian() {
        let data = [0.2, -0.7, 1.9, 2.4, 2.0];
        let a = robust_oracle(&data, f64::INFINITY).unwrap();
        let b = yu_oracle(&data).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
