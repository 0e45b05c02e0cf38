//! Exact 1-D total-variation denoising (Condat's direct algorithm).

/// `argmin_u ½‖u − signal‖² + weight·Σ|u_{i+1} − u_i|`.
pub fn tv_denoise(signal: &[f64], weight: f64) -> Vec<f64> {
    assert!(weight >= 0.0, "TV weight must be non-negative");
    let n = signal.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if weight == 0.0 {
        out.copy_from_slice(signal);
        return out;
    }
    let lambda = weight;
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let (mut umin, mut umax) = (lambda, -lambda);
    let (mut vmin, mut vmax) = (signal[0] - lambda, signal[0] + lambda);
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = signal[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = signal[k0];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    out[k0] = vmin;
                    k0 += 1;
                }
                return out;
            }
        }
        umin += signal[k + 1] - vmin;
        if umin < -lambda {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = signal[k0];
            vmax = vmin + 2.0 * lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += signal[k + 1] - vmax;
        if umax > lambda {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = signal[k0];
            vmin = vmax - 2.0 * lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= -lambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = -lambda;
        }
    }
}

/// `½‖u − signal‖² + weight·TV(u)`.
pub fn tv_objective(u: &[f64], signal: &[f64], weight: f64) -> f64 {
    let fid: f64 = u.iter().zip(signal).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * 0.5;
    fid + weight * total_variation(u)
}

pub fn total_variation(u: &[f64]) -> f64 {
    u.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Projected gradient (FISTA) on the dual `min_{|z|≤w} ½‖s − Dᵀz‖²`,
    /// with `u = s − Dᵀz`.
    fn dual_oracle(s: &[f64], w: f64, iters: usize) -> Vec<f64> {
        let n = s.len();
        let dt = |z: &[f64]| -> Vec<f64> {
            let mut u = vec![0.0; n];
            for (i, zi) in z.iter().enumerate() {
                u[i] -= zi;
                u[i + 1] += zi;
            }
            u
        };
        let mut z = vec![0.0; n - 1];
        let mut y = z.clone();
        let mut t = 1.0f64;
        let step = 0.25;
        for _ in 0..iters {
            let dty = dt(&y);
            let u: Vec<f64> = s.iter().zip(&dty).map(|(a, b)| a - b).collect();
            let znew: Vec<f64> = (0..n - 1)
                .map(|i| (y[i] + step * (u[i + 1] - u[i])).clamp(-w, w))
                .collect();
            let tnew = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = znew
                .iter()
                .zip(&z)
                .map(|(a, b)| a + (t - 1.0) / tnew * (a - b))
                .collect();
            z = znew;
            t = tnew;
        }
        let dtz = dt(&z);
        s.iter().zip(&dtz).map(|(a, b)| a - b).collect()
    }

    #[test]
    fn zero_weight_and_huge_weight() {
        let s = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(tv_denoise(&s, 0.0), s.to_vec());
        let mean = s.iter().sum::<f64>() / 4.0;
        for v in tv_denoise(&s, 1e6) {
            assert!((v - mean).abs() < 1e-9);
        }
        assert!(tv_denoise(&[], 1.0).is_empty());
        assert_eq!(tv_denoise(&[4.0], 1.0), vec![4.0]);
    }

    #[test]
    fn step_signal() {
        // two-level step: each plateau moves toward the other by w / length
        let s = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let u = tv_denoise(&s, 0.3);
        for v in &u[..3] {
            assert!((v - 0.1).abs() < 1e-12);
        }
        for v in &u[3..] {
            assert!((v - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dual_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..5 {
            let s: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w = 0.2 + 0.3 * trial as f64;
            let u = tv_denoise(&s, w);
            let o = dual_oracle(&s, w, 200_000);
            let diff = u.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-4, "trial {trial}: {diff}");
        }
    }

    proptest! {
        #[test]
        fn reduces_variation_and_objective(
            s in proptest::collection::vec(-10.0f64..10.0, 2..80),
            w in 0.0f64..5.0,
        ) {
            let u = tv_denoise(&s, w);
            prop_assert!(total_variation(&u) <= total_variation(&s) + 1e-9);
            prop_assert!(tv_objective(&u, &s, w) <= tv_objective(&s, &s, w) + 1e-9);
            // mean is preserved by the TV prox
            let (ms, mu) = (s.iter().sum::<f64>(), u.iter().sum::<f64>());
            prop_assert!((ms - mu).abs() < 1e-8 * (1.0 + ms.abs()));
        }
    }
}
