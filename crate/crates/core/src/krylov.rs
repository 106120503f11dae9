//! Preconditioned MINRES for symmetric (possibly indefinite) systems with a
//! symmetric positive definite preconditioner.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinresReport {
    pub iterations: usize,
    /// Preconditioned residual norm relative to the initial one.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0`. `apply` computes `A z`, `precond` computes
/// `M⁻¹ v`; both must be symmetric in the Euclidean inner product.
pub fn minres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> (Vec<f64>, MinresReport) {
    let len = b.len();
    let mut x = vec![0.0; len];
    let mut v_prev = vec![0.0; len];
    let mut v = b.to_vec();
    let mut z = precond(&v);
    let mut gamma = dot(&z, &v).max(0.0).sqrt();
    let gamma0 = gamma;
    if gamma0 == 0.0 {
        return (x, MinresReport { iterations: 0, relative_residual: 0.0 });
    }
    let mut gamma_prev = 1.0;
    let mut eta = gamma;
    let (mut s_prev, mut s) = (0.0_f64, 0.0_f64);
    let (mut c_prev, mut c) = (1.0_f64, 1.0_f64);
    let mut w_prev = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        let az = apply(&z);
        let delta = dot(&az, &z);
        let mut v_next = vec![0.0; len];
        for i in 0..len {
            v_next[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i];
        }
        let z_next = precond(&v_next);
        let gamma_next = dot(&z_next, &v_next).max(0.0).sqrt();

        let a0 = c * delta - c_prev * s * gamma;
        let a1 = (a0 * a0 + gamma_next * gamma_next).sqrt();
        let a2 = s * delta + c_prev * c * gamma;
        let a3 = s_prev * gamma;
        if a1 == 0.0 {
            break;
        }
        let c_next = a0 / a1;
        let s_next = gamma_next / a1;
        let mut w_next = vec![0.0; len];
        for i in 0..len {
            w_next[i] = (z[i] - a3 * w_prev[i] - a2 * w[i]) / a1;
            x[i] += c_next * eta * w_next[i];
        }
        eta = -s_next * eta;

        w_prev = std::mem::replace(&mut w, w_next);
        v_prev = std::mem::replace(&mut v, v_next);
        z = z_next;
        gamma_prev = gamma;
        gamma = gamma_next;
        s_prev = s;
        s = s_next;
        c_prev = c;
        c = c_next;
        if eta.abs() <= rtol * gamma0 || gamma == 0.0 {
            break;
        }
    }
    (x, MinresReport { iterations, relative_residual: eta.abs() / gamma0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    #[test]
    fn solves_indefinite_system() {
        let n = 40;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            (i as f64) - 10.5
                        } else if (i as i64 - j as i64).abs() == 1 {
                            0.7
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = matvec(&a, &x_true);
        let (x, rep) = minres(|z| matvec(&a, z), |v| v.to_vec(), &b, 1e-12, 200);
        assert!(rep.relative_residual < 1e-12);
        let err = x.iter().zip(&x_true).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn diagonal_preconditioner_converges_fast() {
        let n = 100;
        let diag: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 + i as f64 } else { -(2.0 + i as f64) }).collect();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
        let (x, rep) = minres(
            |z| z.iter().zip(&diag).map(|(a, d)| a * d).collect(),
            |v| v.iter().zip(&diag).map(|(a, d)| a / d.abs()).collect(),
            &b,
            1e-13,
            50,
        );
        assert!(rep.iterations <= 4, "{}", rep.iterations);
        for i in 0..n {
            assert!((x[i] * diag[i] - b[i]).abs() < 1e-10);
        }
    }
}
