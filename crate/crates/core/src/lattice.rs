//! Integer matrices: Smith and Hermite normal forms, saturated kernels and
//! linear systems over `Z/NZ`.

use num_integer::Integer;

pub type IntMatrix = Vec<Vec<i64>>;

/// `U·A·V = D` with `U`, `V` unimodular and `D` diagonal, each diagonal entry
/// dividing the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smith {
    pub u: IntMatrix,
    pub v: IntMatrix,
    pub diag: Vec<i64>,
    pub rank: usize,
}

pub fn identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

pub fn mat_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(a: &IntMatrix, cols: usize) -> IntMatrix {
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn swap_cols(m: &mut IntMatrix, i: usize, j: usize) {
    for row in m.iter_mut() {
        row.swap(i, j);
    }
}

/// Adds `k` times column `src` to column `dst`.
fn add_col(m: &mut IntMatrix, src: usize, dst: usize, k: i64) {
    for row in m.iter_mut() {
        row[dst] += k * row[src];
    }
}

fn add_row(m: &mut IntMatrix, src: usize, dst: usize, k: i64) {
    let s = m[src].clone();
    for (d, x) in m[dst].iter_mut().zip(s) {
        *d += k * x;
    }
}

fn negate_row(m: &mut IntMatrix, r: usize) {
    for x in m[r].iter_mut() {
        *x = -*x;
    }
}

/// Smith normal form of an `rows × cols` matrix.
pub fn smith(a: &IntMatrix, cols: usize) -> Smith {
    let rows = a.len();
    let mut d = a.clone();
    let mut u = identity(rows);
    let mut v = identity(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: smallest nonzero absolute value in the trailing block
        let pivot = (t..rows)
            .flat_map(|i| (t..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| d[i][j] != 0)
            .min_by_key(|&(i, j)| d[i][j].abs());
        let Some((pi, pj)) = pivot else { break };
        d.swap(t, pi);
        u.swap(t, pi);
        swap_cols(&mut d, t, pj);
        swap_cols(&mut v, t, pj);
        loop {
            let mut done = true;
            for i in t + 1..rows {
                if d[i][t] != 0 {
                    let q = Integer::div_floor(&d[i][t], &d[t][t]);
                    add_row(&mut d, t, i, -q);
                    add_row(&mut u, t, i, -q);
                    if d[i][t] != 0 {
                        done = false;
                    }
                }
            }
            for j in t + 1..cols {
                if d[t][j] != 0 {
                    let q = Integer::div_floor(&d[t][j], &d[t][t]);
                    add_col(&mut d, t, j, -q);
                    add_col(&mut v, t, j, -q);
                    if d[t][j] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                // divisibility of the trailing block
                let bad = (t + 1..rows)
                    .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                    .find(|&(i, j)| d[i][j] % d[t][t] != 0);
                match bad {
                    None => break,
                    Some((i, _)) => {
                        add_row(&mut d, i, t, 1);
                        add_row(&mut u, i, t, 1);
                        continue;
                    }
                }
            }
            // move the smallest remaining entry of row/column t to the pivot
            let best = (t..rows)
                .map(|i| (i, t))
                .chain((t..cols).map(|j| (t, j)))
                .filter(|&(i, j)| d[i][j] != 0)
                .min_by_key(|&(i, j)| d[i][j].abs())
                .expect("pivot row or column is nonzero");
            if best.0 != t {
                d.swap(t, best.0);
                u.swap(t, best.0);
            } else if best.1 != t {
                swap_cols(&mut d, t, best.1);
                swap_cols(&mut v, t, best.1);
            }
        }
        if d[t][t] < 0 {
            negate_row(&mut d, t);
            negate_row(&mut u, t);
        }
        t += 1;
    }
    let diag: Vec<i64> = (0..rows.min(cols)).map(|i| d[i][i]).collect();
    let rank = diag.iter().take_while(|&&x| x != 0).count();
    Smith { u, v, diag, rank }
}

/// Basis (as rows) of the integer kernel `{x ∈ Z^cols : A·x = 0}`. The kernel
/// returned is saturated since it is read off a unimodular transform.
pub fn integer_kernel(a: &IntMatrix, cols: usize) -> Vec<Vec<i64>> {
    let s = smith(a, cols);
    (s.rank..cols)
        .map(|j| (0..cols).map(|i| s.v[i][j]).collect())
        .collect()
}

/// Row-style Hermite normal form of a full-row-rank integer basis: upper
/// echelon with positive pivots and reduced entries above each pivot.
pub fn hermite_rows(basis: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut m: Vec<Vec<i64>> = basis.to_vec();
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        // Euclid on column c among rows r..
        loop {
            let nonzero: Vec<usize> = (r..rows).filter(|&i| m[i][c] != 0).collect();
            if nonzero.is_empty() {
                break;
            }
            let piv = *nonzero.iter().min_by_key(|&&i| m[i][c].abs()).unwrap();
            m.swap(r, piv);
            let mut clean = true;
            for i in r + 1..rows {
                if m[i][c] != 0 {
                    let q = Integer::div_floor(&m[i][c], &m[r][c]);
                    add_row(&mut m, r, i, -q);
                    if m[i][c] != 0 {
                        clean = false;
                    }
                }
            }
            if clean {
                break;
            }
        }
        if m[r][c] == 0 {
            continue;
        }
        if m[r][c] < 0 {
            negate_row(&mut m, r);
        }
        for i in 0..r {
            let q = Integer::div_floor(&m[i][c], &m[r][c]);
            add_row(&mut m, r, i, -q);
        }
        r += 1;
    }
    m.truncate(r);
    m
}

/// True when the rows generate a saturated lattice (all invariant factors 1).
pub fn is_saturated(rows: &[Vec<i64>]) -> bool {
    let cols = rows.first().map_or(0, Vec::len);
    let s = smith(&rows.to_vec(), cols);
    s.rank == rows.len() && s.diag.iter().take(s.rank).all(|&d| d == 1)
}

fn mod_inverse(a: i64, n: i64) -> Option<i64> {
    let e = a.rem_euclid(n).extended_gcd(&n);
    (e.gcd == 1).then(|| e.x.rem_euclid(n))
}

/// Solves `A·x ≡ c (mod n)` for `A` of shape `rows × cols`. Returns one
/// solution reduced into `[0, n)`, or `None` when the system is inconsistent.
pub fn solve_mod(a: &IntMatrix, cols: usize, c: &[i64], n: i64) -> Option<Vec<i64>> {
    assert!(n >= 1);
    let rows = a.len();
    let s = smith(a, cols);
    let uc: Vec<i64> = (0..rows)
        .map(|i| {
            (0..rows)
                .map(|j| (s.u[i][j] as i128 * c[j] as i128).rem_euclid(n as i128))
                .sum::<i128>()
                .rem_euclid(n as i128) as i64
        })
        .collect();
    let mut f = vec![0i64; cols];
    for i in 0..rows {
        let d = if i < s.diag.len() { s.diag[i] } else { 0 };
        let target = uc[i];
        if d == 0 {
            if target != 0 {
                return None;
            }
            continue;
        }
        let g = d.gcd(&n);
        if target % g != 0 {
            return None;
        }
        let m = n / g;
        let inv = if m == 1 { 0 } else { mod_inverse(d / g, m)? };
        f[i] = ((target / g) as i128 * inv as i128).rem_euclid(m as i128) as i64;
    }
    let x = (0..cols)
        .map(|i| {
            (0..cols)
                .map(|j| (s.v[i][j] as i128 * f[j] as i128).rem_euclid(n as i128))
                .sum::<i128>()
                .rem_euclid(n as i128) as i64
        })
        .collect();
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_smith(a: &IntMatrix, cols: usize) -> Smith {
        let s = smith(a, cols);
        let d = mat_mul(&mat_mul(&s.u, a), &s.v);
        for (i, row) in d.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if i == j {
                    assert_eq!(x, s.diag[i]);
                } else {
                    assert_eq!(x, 0, "off-diagonal entry in {d:?}");
                }
            }
        }
        for w in s.diag.windows(2) {
            if w[1] != 0 {
                assert_eq!(w[1] % w[0], 0);
            }
        }
        s
    }

    #[test]
    fn smith_of_known_matrices() {
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let s = check_smith(&a, 3);
        assert_eq!(s.diag, vec![2, 6, 12]);
        let b = vec![vec![1, 2, -3, 0], vec![0, 0, 3, -3]];
        let s = check_smith(&b, 4);
        assert_eq!(s.diag, vec![1, 3]);
        let z = vec![vec![0, 0], vec![0, 0]];
        assert_eq!(check_smith(&z, 2).rank, 0);
    }

    #[test]
    fn kernel_of_trinomial_constraints() {
        // a_x + 2a_y - 3a_z = 0, 3a_z - 3a_s = 0
        let a = vec![vec![1, 2, -3, 0], vec![0, 0, 3, -3]];
        let k = integer_kernel(&a, 4);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_eq!(v[0] + 2 * v[1] - 3 * v[2], 0);
            assert_eq!(v[2], v[3]);
        }
        assert!(is_saturated(&k));
        let h = hermite_rows(&k);
        assert!(is_saturated(&h));
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn saturation_detects_index() {
        assert!(!is_saturated(&[vec![2, 0], vec![0, 1]]));
        assert!(is_saturated(&[vec![2, 1], vec![1, 1]]));
    }

    #[test]
    fn modular_systems() {
        // 2x ≡ 4 (mod 6) has solutions; 2x ≡ 3 (mod 6) does not
        let a = vec![vec![2]];
        let x = solve_mod(&a, 1, &[4], 6).unwrap();
        assert_eq!((2 * x[0]).rem_euclid(6), 4);
        assert!(solve_mod(&a, 1, &[3], 6).is_none());
        let a = vec![vec![1, 1], vec![3, 0]];
        let x = solve_mod(&a, 2, &[5, 9], 12).unwrap();
        assert_eq!((x[0] + x[1]).rem_euclid(12), 5);
        assert_eq!((3 * x[0]).rem_euclid(12), 9);
    }
}
