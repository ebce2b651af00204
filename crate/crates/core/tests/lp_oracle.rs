//! Independent oracles for the decoy LPs and the Hermitian eigensolver:
//! brute-force vertex enumeration on tiny instances, and nalgebra's
//! symmetric eigendecomposition on the real embedding of complex Hermitian
//! matrices.

use fprfi_core::decoy::{
    error_yield_lp, trace_distance, yield_lp, DecoyScenario, LpStatus, TraceDistanceConvention,
};
use fprfi_core::hermitian::hermitian_eigenvalues;
use fprfi_core::source::{poisson_weight, Basis, FockDensityMatrix};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact min/max of c·x over {rows·x ≤ rhs, 0 ≤ x ≤ 1} by enumerating all
/// vertices (every choice of n active constraints).
fn enumerate_lp(n: usize, rows: &[(Vec<f64>, f64)], c: &[f64]) -> Option<(f64, f64)> {
    let mut all_rows: Vec<(Vec<f64>, f64)> = rows.to_vec();
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = -1.0;
        all_rows.push((r, 0.0)); // -x_j <= 0
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        all_rows.push((r, 1.0)); // x_j <= 1
    }
    let m = all_rows.len();
    let mut best: Option<(f64, f64)> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    loop {
        // solve the active set as equalities
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (i, &row_idx) in choice.iter().enumerate() {
            for j in 0..n {
                a[(i, j)] = all_rows[row_idx].0[j];
            }
            b[i] = all_rows[row_idx].1;
        }
        if let Some(x) = a.lu().solve(&b) {
            let feasible = all_rows.iter().all(|(row, rhs)| {
                row.iter().zip(x.iter()).map(|(r, v)| r * v).sum::<f64>() <= rhs + 1e-8
            });
            if feasible {
                let obj: f64 = c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum();
                best = Some(match best {
                    None => (obj, obj),
                    Some((lo, hi)) => (lo.min(obj), hi.max(obj)),
                });
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] != i + m - n {
                choice[i] += 1;
                for k in i + 1..n {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Rebuild the yield-LP constraint rows exactly as the solver states them.
fn yield_rows(s: &DecoyScenario) -> (usize, Vec<(Vec<f64>, f64)>) {
    let n_cut = s.n_cut;
    let nv = 2 + 3 * (n_cut - 1);
    let idx = |n: usize, j: usize| -> usize {
        if n < 2 {
            n
        } else {
            2 + (n - 2) * 3 + j
        }
    };
    let mut rows = Vec::new();
    for j in 0..3 {
        let mut row = vec![0.0; nv];
        let mut total = 0.0;
        for n in 0..=n_cut {
            row[idx(n, j)] += s.poisson[j][n];
            total += s.poisson[j][n];
        }
        rows.push((row.clone(), s.gain_hi[j]));
        rows.push((
            row.iter().map(|v| -v).collect(),
            -(s.gain_lo[j] - (1.0 - total)),
        ));
    }
    for (pair_idx, (bi, bj)) in fprfi_core::decoy::BIN_PAIRS.iter().enumerate() {
        for n in 2..=n_cut {
            let d = s.dist_yield[pair_idx][n];
            let mut row = vec![0.0; nv];
            row[idx(n, *bi)] = 1.0;
            row[idx(n, *bj)] = -1.0;
            rows.push((row.clone(), d));
            rows.push((row.iter().map(|v| -v).collect(), d));
        }
    }
    (nv, rows)
}

fn error_rows(s: &DecoyScenario) -> (usize, Vec<(Vec<f64>, f64)>) {
    let n_cut = s.n_cut;
    let nv = 1 + 3 * n_cut;
    let idx = |n: usize, j: usize| -> usize {
        if n == 0 {
            0
        } else {
            1 + (n - 1) * 3 + j
        }
    };
    let mut rows = Vec::new();
    for j in 0..3 {
        let mut row = vec![0.0; nv];
        let mut total = 0.0;
        for n in 0..=n_cut {
            row[idx(n, j)] += s.poisson[j][n];
            total += s.poisson[j][n];
        }
        rows.push((row.clone(), s.err_gain_hi[j]));
        rows.push((
            row.iter().map(|v| -v).collect(),
            -(s.err_gain_lo[j] - (1.0 - total)),
        ));
    }
    for (pair_idx, (bi, bj)) in fprfi_core::decoy::BIN_PAIRS.iter().enumerate() {
        for n in 1..=n_cut {
            let d = s.dist_error[pair_idx][n];
            let mut row = vec![0.0; nv];
            row[idx(n, *bi)] = 1.0;
            row[idx(n, *bj)] = -1.0;
            rows.push((row.clone(), d));
            rows.push((row.iter().map(|v| -v).collect(), d));
        }
    }
    (nv, rows)
}

fn tiny_scenario(seed: u64) -> DecoyScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cut = 2;
    let mus = [0.06, 0.12, 0.9];
    let mut poisson: [Vec<f64>; 3] = Default::default();
    let mut gain_lo = [0.0; 3];
    let mut gain_hi = [0.0; 3];
    let mut err_lo = [0.0; 3];
    let mut err_hi = [0.0; 3];
    let yn = [2e-5, 1.1e-2, 2.2e-2];
    let wn = [1e-5, 1.6e-4, 3.4e-4];
    for j in 0..3 {
        poisson[j] = (0..=n_cut).map(|n| poisson_weight(mus[j], n)).collect();
        let q: f64 = poisson[j].iter().zip(&yn).map(|(p, y)| p * y).sum();
        let w: f64 = poisson[j].iter().zip(&wn).map(|(p, y)| p * y).sum();
        let slack = 1.0 + 0.2 * rng.gen::<f64>();
        gain_lo[j] = q / slack;
        gain_hi[j] = q * slack;
        err_lo[j] = w / slack;
        err_hi[j] = w * slack;
    }
    let dist = |scale: f64| -> [Vec<f64>; 3] {
        [
            vec![0.0, scale * 0.01, scale * 0.06],
            vec![0.0, scale * 0.02, scale * 0.30],
            vec![0.0, scale * 0.015, scale * 0.25],
        ]
    };
    DecoyScenario {
        basis_alice: Basis::Z,
        basis_bob: Basis::Z,
        n_cut,
        poisson,
        gain_lo,
        gain_hi,
        err_gain_lo: err_lo,
        err_gain_hi: err_hi,
        dist_yield: dist(1.0),
        dist_error: dist(1.3),
    }
}

#[test]
fn yield_lp_matches_vertex_enumeration() {
    for seed in 0..6u64 {
        let s = tiny_scenario(seed);
        let bounds = yield_lp(&s).unwrap();
        assert_eq!(bounds.status, LpStatus::Optimal, "seed {seed}");
        let (nv, rows) = yield_rows(&s);
        let mut c = vec![0.0; nv];
        c[1] = 1.0;
        let (lo, hi) = enumerate_lp(nv, &rows, &c).expect("feasible");
        assert!(
            (bounds.lower - lo).abs() < 1e-9,
            "seed {seed}: {} vs {}",
            bounds.lower,
            lo
        );
        assert!(
            (bounds.upper - hi).abs() < 1e-9,
            "seed {seed}: {} vs {}",
            bounds.upper,
            hi
        );
    }
}

#[test]
fn error_lp_matches_vertex_enumeration() {
    for seed in 0..4u64 {
        let mut s = tiny_scenario(seed);
        s.n_cut = 1;
        for j in 0..3 {
            s.poisson[j].truncate(2);
            s.dist_yield[j].truncate(2);
            s.dist_error[j].truncate(2);
        }
        let bounds = error_yield_lp(&s).unwrap();
        assert_eq!(bounds.status, LpStatus::Optimal);
        let (nv, rows) = error_rows(&s);
        // objective: the signal-bin n = 1 variable
        let mut c = vec![0.0; nv];
        c[1 + 2] = 1.0;
        let (lo, hi) = enumerate_lp(nv, &rows, &c).expect("feasible");
        assert!(
            (bounds.lower - lo).abs() < 1e-9,
            "seed {seed}: {} vs {}",
            bounds.lower,
            lo
        );
        assert!(
            (bounds.upper - hi).abs() < 1e-9,
            "seed {seed}: {} vs {}",
            bounds.upper,
            hi
        );
    }
}

#[test]
fn lp_bounds_invariant_under_bin_reordering() {
    // swapping the vac and decoy bins everywhere must not move the bounds
    let s = tiny_scenario(3);
    let base_y = yield_lp(&s).unwrap();
    let base_w = error_yield_lp(&s).unwrap();
    let mut swapped = s.clone();
    swapped.poisson.swap(0, 1);
    swapped.gain_lo.swap(0, 1);
    swapped.gain_hi.swap(0, 1);
    swapped.err_gain_lo.swap(0, 1);
    swapped.err_gain_hi.swap(0, 1);
    // pairs (0,1),(0,2),(1,2): swapping bins 0,1 maps pair (0,2)<->(1,2) and
    // fixes (0,1) (distances are symmetric)
    swapped.dist_yield.swap(1, 2);
    swapped.dist_error.swap(1, 2);
    let y = yield_lp(&swapped).unwrap();
    let w = error_yield_lp(&swapped).unwrap();
    assert!((y.lower - base_y.lower).abs() < 1e-10);
    assert!((y.upper - base_y.upper).abs() < 1e-10);
    assert!((w.lower - base_w.lower).abs() < 1e-10);
    assert!((w.upper - base_w.upper).abs() < 1e-10);
}

/// nalgebra oracle: embed the complex Hermitian H = A + iB as the real
/// symmetric [[A, -B], [B, A]], whose spectrum is each eigenvalue doubled.
fn nalgebra_eigenvalues(elems: &[Complex64], dim: usize) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(2 * dim, 2 * dim);
    for i in 0..dim {
        for j in 0..dim {
            let z = elems[i * dim + j];
            m[(i, j)] = z.re;
            m[(i + dim, j + dim)] = z.re;
            m[(i, j + dim)] = -z.im;
            m[(i + dim, j)] = z.im;
        }
    }
    let mut evs: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // every eigenvalue appears twice; keep one of each pair
    evs.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

#[test]
fn jacobi_eigenvalues_match_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for dim in [2usize, 4, 6, 9] {
        for _ in 0..5 {
            let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
            for i in 0..dim {
                elems[i * dim + i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
                for j in i + 1..dim {
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    elems[i * dim + j] = z;
                    elems[j * dim + i] = z.conj();
                }
            }
            let mine = hermitian_eigenvalues(&elems, dim);
            let theirs = nalgebra_eigenvalues(&elems, dim);
            for (a, b) in mine.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-9, "dim {dim}: {mine:?} vs {theirs:?}");
            }
        }
    }
}

#[test]
fn trace_distance_matches_nalgebra_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    // random 4x4 Hermitian unit-trace pair (n = 3 photon subspace)
    let dim = 4;
    let random_density = |rng: &mut ChaCha8Rng| -> FockDensityMatrix {
        let mut elems = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mut tr = 0.0;
        for i in 0..dim {
            let v: f64 = rng.gen_range(0.1..1.0);
            elems[i * dim + i] = Complex64::new(v, 0.0);
            tr += v;
            for j in i + 1..dim {
                let z = Complex64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                elems[i * dim + j] = z;
                elems[j * dim + i] = z.conj();
            }
        }
        for e in &mut elems {
            *e /= tr;
        }
        FockDensityMatrix { n: dim - 1, elems }
    };
    for _ in 0..10 {
        let a = random_density(&mut rng);
        let b = random_density(&mut rng);
        let mine = trace_distance(&a, &b, TraceDistanceConvention::SumAbs).unwrap();
        let diff: Vec<Complex64> = a.elems.iter().zip(&b.elems).map(|(x, y)| x - y).collect();
        let oracle: f64 = nalgebra_eigenvalues(&diff, dim)
            .iter()
            .map(|l| l.abs())
            .sum();
        assert!((mine - oracle).abs() < 1e-9, "{mine} vs {oracle}");
    }
}
