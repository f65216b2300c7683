//! Small fitting helpers for convergence and scaling diagnostics.

/// Least-squares fit of log y = slope * log x + intercept.
///
/// Panics if fewer than two samples are given or any sample is nonpositive:
/// scaling data that hits zero means the experiment itself failed.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two samples for a slope");
    let n = xs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        assert!(x > 0.0 && y > 0.0, "log-log fit needs positive data, got ({x}, {y})");
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    assert!(denom.abs() > 1e-300, "degenerate abscissae for log-log fit");
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Kendall rank correlation in [-1, 1]; +1 means strictly concordant pairs.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    assert!(n >= 2);
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (xs[j] - xs[i]) * (ys[j] - ys[i]);
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    (concordant - discordant) as f64 / pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let xs = [0.5, 0.25, 0.125, 0.0625];
        let ys: Vec<f64> = xs.iter().map(|&x: &f64| 3.0 * x.powf(1.5)).collect();
        let (slope, intercept) = fit_loglog(&xs, &ys);
        assert!((slope - 1.5).abs() < 1e-12);
        assert!((intercept.exp() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tau_detects_monotonicity() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&xs, &[2.0, 3.0, 5.0, 9.0]), 1.0);
        assert_eq!(kendall_tau(&xs, &[9.0, 5.0, 3.0, 2.0]), -1.0);
        let mixed = kendall_tau(&xs, &[1.0, 3.0, 2.0, 4.0]);
        assert!(mixed > 0.0 && mixed < 1.0);
    }
}
