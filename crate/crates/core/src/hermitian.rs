//! Eigenvalues of small complex Hermitian matrices by cyclic Jacobi
//! rotations. The decoy LPs need spectra of (n_cut+1)-dimensional
//! differences of Fock density matrices, so dimensions stay below ~12 and
//! the quadratically convergent Jacobi sweep is both simple and exact
//! enough.

use num_complex::Complex64;

/// Eigenvalues (ascending) of a Hermitian matrix given row-major. Only the
/// Hermitian part is read: entries below the diagonal are taken as the
/// conjugates of those above.
pub fn hermitian_eigenvalues(elems: &[Complex64], dim: usize) -> Vec<f64> {
    assert_eq!(elems.len(), dim * dim, "matrix shape mismatch");
    let mut a = elems.to_vec();
    // symmetrize against rounding in the input
    for p in 0..dim {
        a[p * dim + p] = Complex64::new(a[p * dim + p].re, 0.0);
        for q in (p + 1)..dim {
            let m = 0.5 * (a[p * dim + q] + a[q * dim + p].conj());
            a[p * dim + q] = m;
            a[q * dim + p] = m.conj();
        }
    }
    let scale: f64 = a
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let tol = 1e-30 * scale * scale;

    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a[p * dim + q].norm_sqr();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[p * dim + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag; // e^{i alpha}
                let app = a[p * dim + p].re;
                let aqq = a[q * dim + q].re;
                let tau = (aqq - app) / (2.0 * mag);
                // smaller-magnitude root of t^2 - 2 tau t - 1 = 0
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // columns: col_p' = c col_p + s e^{-ia} col_q ; col_q' = -s e^{ia} col_p + c col_q
                for r in 0..dim {
                    let arp = a[r * dim + p];
                    let arq = a[r * dim + q];
                    a[r * dim + p] = c * arp + s * phase.conj() * arq;
                    a[r * dim + q] = -s * phase * arp + c * arq;
                }
                // rows: row_p' = c row_p + s e^{ia} row_q ; row_q' = -s e^{-ia} row_p + c row_q
                for rcol in 0..dim {
                    let apr = a[p * dim + rcol];
                    let aqr = a[q * dim + rcol];
                    a[p * dim + rcol] = c * apr + s * phase * aqr;
                    a[q * dim + rcol] = -s * phase.conj() * apr + c * aqr;
                }
                a[p * dim + q] = Complex64::new(0.0, 0.0);
                a[q * dim + p] = Complex64::new(0.0, 0.0);
                a[p * dim + p] = Complex64::new(a[p * dim + p].re, 0.0);
                a[q * dim + q] = Complex64::new(a[q * dim + q].re, 0.0);
            }
        }
    }
    let mut evs: Vec<f64> = (0..dim).map(|i| a[i * dim + i].re).collect();
    evs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    evs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn known_complex_two_by_two() {
        // [[1, i], [-i, 1]] has eigenvalues {0, 2}
        let m = vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)];
        let ev = hermitian_eigenvalues(&m, 2);
        assert!((ev[0] - 0.0).abs() < 1e-13);
        assert!((ev[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn diagonal_passthrough() {
        let m = vec![
            c(3.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(-1.5, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.25, 0.0),
        ];
        let ev = hermitian_eigenvalues(&m, 3);
        assert_eq!(ev.len(), 3);
        assert!((ev[0] + 1.5).abs() < 1e-14);
        assert!((ev[1] - 0.25).abs() < 1e-14);
        assert!((ev[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_moments_match() {
        // trace(A^k) = sum lambda^k for k = 1..3 is an implementation-independent check
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for dim in [2usize, 4, 7, 9] {
            let mut m = vec![c(0.0, 0.0); dim * dim];
            for i in 0..dim {
                m[i * dim + i] = c(rng.gen_range(-1.0..1.0), 0.0);
                for j in (i + 1)..dim {
                    let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    m[i * dim + j] = z;
                    m[j * dim + i] = z.conj();
                }
            }
            let ev = hermitian_eigenvalues(&m, dim);
            let matpow = |k: usize| -> f64 {
                // trace of m^k via repeated multiplication
                let mut acc = m.clone();
                for _ in 1..k {
                    let mut next = vec![c(0.0, 0.0); dim * dim];
                    for i in 0..dim {
                        for l in 0..dim {
                            let mut s = c(0.0, 0.0);
                            for j in 0..dim {
                                s += acc[i * dim + j] * m[j * dim + l];
                            }
                            next[i * dim + l] = s;
                        }
                    }
                    acc = next;
                }
                (0..dim).map(|i| acc[i * dim + i].re).sum()
            };
            for k in 1..=3 {
                let lhs = matpow(k);
                let rhs: f64 = ev.iter().map(|l| l.powi(k as i32)).sum();
                assert!(
                    (lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()),
                    "dim {dim} k {k}: {lhs} vs {rhs}"
                );
            }
        }
    }
}
