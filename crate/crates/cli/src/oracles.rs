//! Classical reference computations for permutation actions on `C^N` with the uniform
//! state. They use plain real matrices over points and share no code with the library's
//! operator implementations.

use nalgebra::{DMatrix, DVector};

/// The generators in the library's index order `−d, …, −1, 1, …, d`, as point maps
/// `k ↦ π(k)` with `(σx)(k) = x(π(k))`.
fn signed_perms(perms: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let inverse = |p: &Vec<usize>| {
        let mut q = vec![0; p.len()];
        for (k, &v) in p.iter().enumerate() {
            q[v] = k;
        }
        q
    };
    let mut out: Vec<Vec<usize>> = perms.iter().rev().map(inverse).collect();
    out.extend(perms.iter().cloned());
    out
}

/// The non-backtracking walk on `(letter, point)` pairs: row `(i, k)` moves to
/// `(j, π_i(k))` with probability `1/(2d−1)` for `j ≠ −i`.
pub fn bufetov_matrix(perms: &[Vec<usize>]) -> DMatrix<f64> {
    let d = perms.len();
    let m = 2 * d;
    let n = perms[0].len();
    let signed = signed_perms(perms);
    let mut out = DMatrix::zeros(m * n, m * n);
    let w = 1.0 / (m - 1) as f64;
    for i in 0..m {
        for k in 0..n {
            for j in 0..m {
                if j != m - 1 - i {
                    out[(i * n + k, j * n + signed[i][k])] += w;
                }
            }
        }
    }
    out
}

/// `M^N (Mᵀ)^N b` by `2N` matrix-vector products, where `M` is [`bufetov_matrix`] and `b`
/// lists the tuple components one after another. With the uniform measure on pairs the
/// adjoint of `M` is its transpose.
pub fn rota_iterate(perms: &[Vec<usize>], b: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    let m = bufetov_matrix(perms);
    let mt = m.transpose();
    let mut v = DVector::from_iterator(m.nrows(), b.iter().flatten().copied());
    for _ in 0..steps {
        v = &mt * v;
    }
    for _ in 0..steps {
        v = &m * v;
    }
    let n = perms[0].len();
    v.as_slice().chunks(n).map(|c| c.to_vec()).collect()
}

/// Average of `x` over the orbits of the group generated by `maps` acting on points.
pub fn orbit_average(maps: &[Vec<usize>], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut label: Vec<usize> = (0..n).collect();
    // Union of k and π(k), iterated to a fixed point.
    loop {
        let mut changed = false;
        for p in maps {
            for k in 0..n {
                let (a, b) = (label[k], label[p[k]]);
                if a != b {
                    let lo = a.min(b);
                    for l in label.iter_mut() {
                        if *l == a || *l == b {
                            *l = lo;
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n)
        .map(|k| {
            let members: Vec<usize> = (0..n).filter(|&j| label[j] == label[k]).collect();
            members.iter().map(|&j| x[j]).sum::<f64>() / members.len() as f64
        })
        .collect()
}

/// Point maps generating the even subgroup: `π_j∘π_i` for `j ≠ −i`.
pub fn even_generators(perms: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let signed = signed_perms(perms);
    let m = signed.len();
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if j != m - 1 - i {
                // (σ_i σ_j x)(k) = (σ_j x)(π_i(k)) = x(π_j(π_i(k))).
                out.push(signed[i].iter().map(|&k| signed[j][k]).collect());
            }
        }
    }
    out
}

/// Orbit averages for the free group (`F_d`) and for its even subgroup.
pub fn invariant_averages(perms: &[Vec<usize>], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (orbit_average(perms, x), orbit_average(&even_generators(perms), x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_is_doubly_stochastic() {
        let m = bufetov_matrix(&[vec![1, 2, 3, 0], vec![1, 0, 3, 2]]);
        for i in 0..m.nrows() {
            assert!((m.row(i).sum() - 1.0).abs() < 1e-15);
            assert!((m.column(i).sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cyclic_orbits() {
        let perms = vec![vec![1, 2, 3, 0], vec![1, 2, 3, 0]];
        let (full, even) = invariant_averages(&perms, &[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(full, vec![0.625; 4]);
        assert_eq!(even, vec![0.75, 0.5, 0.75, 0.5]);
    }

    #[test]
    fn rota_iterate_of_constants() {
        let perms = vec![vec![1, 2, 0], vec![0, 2, 1]];
        let b = vec![vec![2.0; 3]; 4];
        let l = rota_iterate(&perms, &b, 100);
        assert!(l.iter().flatten().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn rota_iterate_settles() {
        let perms = vec![vec![1, 2, 3, 0], vec![1, 0, 3, 2]];
        let b: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|k| ((i * 4 + k) as f64).sin()).collect())
            .collect();
        let a = rota_iterate(&perms, &b, 2000);
        let c = rota_iterate(&perms, &b, 4000);
        let gap = a
            .iter()
            .flatten()
            .zip(c.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-12, "{gap}");
    }
}
