//! Log-factorials and binomial weights shared by the state constructors and
//! the damping maps.

/// `ln(k!)` for `k = 0..len`, built by cumulative summation.
pub(crate) fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len.max(1));
    out.push(0.0);
    for k in 1..len {
        let prev = out[k - 1];
        out.push(prev + (k as f64).ln());
    }
    out
}

pub(crate) fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// Exact binomial coefficient as a float (exact below 2^53).
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

/// Vacuum-bath Kraus amplitudes
/// `c[n][k] = sqrt( (n+k)!/(n! k!) e^{-n gT} (1-e^{-gT})^k )` for `n + k <= n_max`.
///
/// Evaluated in log space; row `n` has length `n_max - n + 1`.
#[derive(Debug, Clone)]
pub(crate) struct DampingWeights {
    c: Vec<Vec<f64>>,
}

impl DampingWeights {
    pub(crate) fn new(gamma_t: f64, n_max: usize) -> Self {
        let lnf = ln_factorials(n_max + 2);
        let ln_loss = if gamma_t > 0.0 {
            (-(-gamma_t).exp_m1()).ln()
        } else {
            f64::NEG_INFINITY
        };
        let c = (0..=n_max)
            .map(|n| {
                (0..=(n_max - n))
                    .map(|k| {
                        if k == 0 {
                            return (-0.5 * n as f64 * gamma_t).exp();
                        }
                        let ln_w = lnf[n + k] - lnf[n] - lnf[k] - n as f64 * gamma_t
                            + k as f64 * ln_loss;
                        (0.5 * ln_w).exp()
                    })
                    .collect()
            })
            .collect();
        Self { c }
    }

    /// `c_{n,k}`; zero outside the truncated basis.
    #[inline]
    pub(crate) fn get(&self, n: usize, k: usize) -> f64 {
        self.c
            .get(n)
            .and_then(|row| row.get(k))
            .copied()
            .unwrap_or(0.0)
    }
}
