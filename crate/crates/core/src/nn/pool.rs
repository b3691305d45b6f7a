//! Global average pooling over the whole time axis.

use super::{Matrix, Tensor3};

/// Mean over time: `(N, T, C)` to `(N, C)`.
pub fn global_avg_pool(x: &Tensor3) -> Matrix {
    let (n, t, c) = x.dims();
    let mut y = Matrix::zeros(n, c);
    for b in 0..n {
        let y_row = y.row_mut(b);
        for s in 0..t {
            for (ch, v) in x.row(b, s).iter().enumerate() {
                y_row[ch] += v;
            }
        }
        for v in y_row.iter_mut() {
            *v /= t as f64;
        }
    }
    y
}

/// Spread the pooled gradient uniformly over time: each time step receives
/// `grad / T`.
pub fn global_avg_pool_backward(grad_out: &Matrix, t: usize) -> Tensor3 {
    let (n, c) = (grad_out.rows(), grad_out.cols());
    let mut g = Tensor3::zeros(n, t, c);
    for b in 0..n {
        let src = grad_out.row(b);
        for s in 0..t {
            let dst = g.row_mut(b, s);
            for ch in 0..c {
                dst[ch] = src[ch] / t as f64;
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pools_to_the_temporal_mean() {
        let x = Tensor3::from_vec(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = global_avg_pool(&x);
        assert_eq!(y.data(), &[2.0, 3.0]);
    }

    #[test]
    fn single_step_squeezes() {
        let x = Tensor3::from_vec(2, 1, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = global_avg_pool(&x);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::SeedRng::seed_from_u64(9);
        let (n, t, c) = (2, 4, 3);
        let data: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = Tensor3::from_vec(n, t, c, data).unwrap();
        let probe: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe = Matrix::from_vec(n, c, probe).unwrap();
        let loss = |x: &Tensor3| -> f64 {
            global_avg_pool(x)
                .data()
                .iter()
                .zip(probe.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let g = global_avg_pool_backward(&probe, t);
        let step = 1e-6;
        let mut xp = x.clone();
        for idx in 0..x.data().len() {
            let orig = xp.data()[idx];
            xp.data_mut()[idx] = orig + step;
            let up = loss(&xp);
            xp.data_mut()[idx] = orig - step;
            let down = loss(&xp);
            xp.data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            assert!((numeric - g.data()[idx]).abs() < 1e-6);
        }
    }
}
