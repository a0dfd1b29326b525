use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssnmf_core::solver::kkt_residual;
use ssnmf_core::*;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> NonnegMatrix {
    NonnegMatrix::new(Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))).unwrap()
}

struct Planted {
    x: NonnegMatrix,
    y: NonnegMatrix,
    w: Mask,
    l: Mask,
}

fn planted(n1: usize, k: usize, n2: usize, r: usize, seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random(n1, r, &mut rng);
    let b = random(k, r, &mut rng);
    let s = random(r, n2, &mut rng);
    Planted { x: a.product(&s), y: b.product(&s), w: Mask::ones(n1, n2), l: Mask::ones(k, n2) }
}

#[test]
fn planted_factorization_is_recovered() {
    let p = planted(30, 4, 40, 3, 7);
    let obs = Observations::new(&p.x, &p.w, &p.y, &p.l).unwrap();
    for loss in LossPair::ALL {
        let best = (0..5)
            .map(|seed| {
                let cfg = SsnmfConfig { rank: 3, lambda: 1.0, max_iters: 500, tol: 0.0, eps: DEFAULT_EPS, seed };
                let (m, _) = fit(&obs, loss, &cfg).unwrap();
                p.x.sub(&m.reconstruction()).frobenius_norm() / p.x.frobenius_norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-2, "{loss}: residual {best}");
    }
}

#[test]
fn stationary_point_has_small_kkt_residual() {
    let p = planted(10, 3, 8, 2, 1);
    let obs = Observations::new(&p.x, &p.w, &p.y, &p.l).unwrap();
    for loss in LossPair::ALL {
        let cfg = SsnmfConfig { rank: 2, lambda: 1.0, max_iters: 200_000, tol: 1e-10, eps: DEFAULT_EPS, seed: 4 };
        let (m, report) = fit(&obs, loss, &cfg).unwrap();
        assert_eq!(report.stop_reason, StopReason::TolReached);
        for (name, r) in ["A", "B", "S"].iter().zip(kkt_residual(&m, &obs).unwrap()) {
            assert!(r < 1e-5, "{loss} {name}: {r}");
        }
    }
}

#[test]
fn missing_entries_are_ignored_by_training() {
    // Corrupting masked-out entries must not change the fit.
    let p = planted(12, 3, 10, 2, 3);
    let w = Mask::from_fn(12, 10, |i, j| (i + 2 * j) % 5 != 0);
    let mut corrupted = p.x.as_matrix().clone();
    for i in 0..12 {
        for j in 0..10 {
            if !w.is_set(i, j) {
                corrupted.set(i, j, 50.0);
            }
        }
    }
    let corrupted = NonnegMatrix::new(corrupted).unwrap();
    let cfg = SsnmfConfig { rank: 2, lambda: 0.5, max_iters: 60, tol: 0.0, eps: DEFAULT_EPS, seed: 2 };
    for loss in LossPair::ALL {
        let clean = fit(&Observations::new(&p.x, &w, &p.y, &p.l).unwrap(), loss, &cfg).unwrap();
        let dirty = fit(&Observations::new(&corrupted, &w, &p.y, &p.l).unwrap(), loss, &cfg).unwrap();
        assert_eq!(clean.1.objective_trace, dirty.1.objective_trace, "{loss}");
        assert_eq!(clean.0.a, dirty.0.a);
    }
}

#[test]
fn unlabeled_columns_do_not_see_their_labels() {
    let p = planted(12, 3, 10, 2, 5);
    let l = Mask::from_fn(3, 10, |_, j| j < 6);
    let mut flipped = p.y.as_matrix().clone();
    for i in 0..3 {
        for j in 6..10 {
            flipped.set(i, j, 9.0);
        }
    }
    let flipped = NonnegMatrix::new(flipped).unwrap();
    let cfg = SsnmfConfig { rank: 2, lambda: 2.0, max_iters: 40, tol: 0.0, eps: DEFAULT_EPS, seed: 8 };
    for loss in LossPair::ALL {
        let a = fit(&Observations::new(&p.x, &p.w, &p.y, &l).unwrap(), loss, &cfg).unwrap();
        let b = fit(&Observations::new(&p.x, &p.w, &flipped, &l).unwrap(), loss, &cfg).unwrap();
        assert_eq!(a, b, "{loss}");
    }
}
