//! Dense convex QP over the probability simplex, solved by a primal
//! active-set method. Sizes here are a few dozen at most.

use nalgebra::{DMatrix, DVector};

/// `argmin_{a in simplex} 1/2 a'Qa - c'a` for symmetric PSD `Q`.
pub(crate) fn simplex_qp(q: &DMatrix<f64>, c: &DVector<f64>) -> DVector<f64> {
    let n = c.len();
    assert!(n > 0 && q.nrows() == n && q.ncols() == n);
    let scale = 1.0 + q.amax() + c.amax();
    let tol = 1e-13 * scale;

    let start = (0..n)
        .min_by(|&i, &j| {
            let fi = 0.5 * q[(i, i)] - c[i];
            let fj = 0.5 * q[(j, j)] - c[j];
            fi.total_cmp(&fj)
        })
        .unwrap();
    let mut alpha = DVector::zeros(n);
    alpha[start] = 1.0;
    let mut support = vec![start];

    for _ in 0..(50 * n + 50) {
        minimize_on_face(q, c, &mut alpha, &mut support, tol);
        let grad = q * &alpha - c;
        let theta: f64 = support.iter().map(|&i| alpha[i] * grad[i]).sum();
        let entering = (0..n)
            .filter(|i| !support.contains(i))
            .filter(|&i| grad[i] < theta - tol)
            .min_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        match entering {
            Some(i) => support.push(i),
            None => break,
        }
    }
    alpha
}

fn minimize_on_face(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    alpha: &mut DVector<f64>,
    support: &mut Vec<usize>,
    tol: f64,
) {
    for _ in 0..(4 * c.len() + 4) {
        let m = support.len();
        let mut k = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                k[(a, b)] = q[(i, j)];
            }
            k[(a, m)] = 1.0;
            k[(m, a)] = 1.0;
            rhs[a] = c[i];
        }
        rhs[m] = 1.0;
        let svd = k.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        let mut beta = svd.solve(&rhs, eps).expect("svd computed with u and v");
        for _ in 0..3 {
            let r = &rhs - &k * &beta;
            beta += svd.solve(&r, eps).expect("svd computed with u and v");
        }
        let resid = (&k * &beta - &rhs).amax();

        let step: Vec<f64> = if resid <= 1e-9 * (1.0 + rhs.amax()) {
            let target: Vec<f64> = (0..m).map(|a| beta[a]).collect();
            if target.iter().all(|b| *b >= 0.0) {
                for (a, &i) in support.iter().enumerate() {
                    alpha[i] = target[a];
                }
                return;
            }
            support
                .iter()
                .enumerate()
                .map(|(a, &i)| target[a] - alpha[i])
                .collect()
        } else {
            match unbounded_direction(q, c, support, tol) {
                Some(p) => p,
                None => return,
            }
        };

        // ratio test along `step`; at least one coordinate must block
        let mut t = f64::INFINITY;
        for (a, &i) in support.iter().enumerate() {
            if step[a] < 0.0 {
                t = t.min(alpha[i] / -step[a]);
            }
        }
        if !t.is_finite() {
            return;
        }
        let t = t.min(1.0);
        for (a, &i) in support.iter().enumerate() {
            alpha[i] = (alpha[i] + t * step[a]).max(0.0);
        }
        let before = support.len();
        support.retain(|&i| alpha[i] > 1e-15);
        if support.len() == before {
            // blocked by rounding; drop the smallest weight
            let (pos, _) = support
                .iter()
                .enumerate()
                .min_by(|a, b| alpha[*a.1].total_cmp(&alpha[*b.1]))
                .unwrap();
            let i = support.remove(pos);
            alpha[i] = 0.0;
        }
        let s: f64 = support.iter().map(|&i| alpha[i]).sum();
        for &i in support.iter() {
            alpha[i] /= s;
        }
    }
}

/// Direction `p` with `Q_SS p = 0`, `1'p = 0`, `c_S'p > 0`, if any.
fn unbounded_direction(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    support: &[usize],
    tol: f64,
) -> Option<Vec<f64>> {
    let m = support.len();
    let mut a = DMatrix::zeros(m + 1, m);
    for (r, &i) in support.iter().enumerate() {
        for (s, &j) in support.iter().enumerate() {
            a[(r, s)] = q[(i, j)];
        }
        a[(m, r)] = 1.0;
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.as_ref().unwrap();
    let smax = svd.singular_values.max().max(1.0);
    let cs = DVector::from_iterator(m, support.iter().map(|&i| c[i]));
    let mut p = DVector::zeros(m);
    let mut null_rows = Vec::new();
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s <= 1e-10 * smax {
            null_rows.push(vt.row(r).transpose());
        }
    }
    for v in &null_rows {
        p += v * v.dot(&cs);
    }
    if p.dot(&cs) > tol {
        Some(p.iter().copied().collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(q: &DMatrix<f64>, c: &DVector<f64>, a: &DVector<f64>) -> f64 {
        0.5 * a.dot(&(q * a)) - c.dot(a)
    }

    #[test]
    fn vertex_solution() {
        let q = DMatrix::identity(3, 3) * 0.0;
        let c = DVector::from_vec(vec![0.1, 0.5, 0.2]);
        let a = simplex_qp(&q, &c);
        assert!((a[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interior_solution_of_identity() {
        let q = DMatrix::identity(4, 4);
        let c = DVector::zeros(4);
        let a = simplex_qp(&q, &c);
        for i in 0..4 {
            assert!((a[i] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_generators_with_different_offsets() {
        // two identical gradients: only the larger offset may carry weight
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, -1.0, 0.0, 0.0, 0.0]);
        let q = g.transpose() * &g;
        let c = DVector::from_vec(vec![0.0, 0.3, 0.1]);
        let a = simplex_qp(&q, &c);
        assert!(a[0] < 1e-12);
        // compare with a fine grid over the simplex
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=(200 - i) {
                let x = DVector::from_vec(vec![
                    i as f64 / 200.0,
                    j as f64 / 200.0,
                    (200 - i - j) as f64 / 200.0,
                ]);
                best = best.min(objective(&q, &c, &x));
            }
        }
        assert!(objective(&q, &c, &a) <= best + 1e-12);
    }

    #[test]
    fn kkt_on_random_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let d = rng.random_range(1..6);
            let g = DMatrix::from_fn(d, n, |_, _| rng.random::<f64>() - 0.5);
            let q = g.transpose() * &g * 0.01;
            let c = DVector::from_fn(n, |_, _| rng.random::<f64>() * 0.1);
            let a = simplex_qp(&q, &c);
            assert!((a.sum() - 1.0).abs() < 1e-12);
            assert!(a.iter().all(|v| *v >= 0.0));
            let grad = &q * &a - &c;
            let theta = a.dot(&grad);
            for i in 0..n {
                assert!(grad[i] >= theta - 1e-10, "kkt violated");
            }
        }
    }
}
