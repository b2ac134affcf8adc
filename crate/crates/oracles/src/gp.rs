//! GP posterior in function space with an explicitly inverted Gram matrix.

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    let pivot_row = m[col].clone();
                    for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn kern(sigma0_sq: f64, a: &[f64], b: &[f64]) -> f64 {
    sigma0_sq + a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Mean and standard deviation at `x` for `k(a,b) = σ₀² + a·b + σ_w²[a = b]`.
pub fn posterior(xs: &[Vec<f64>], ys: &[f64], sigma0_sq: f64, noise: f64, x: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kern(sigma0_sq, &xs[i], &xs[j]) + if i == j { noise } else { 0.0 }).collect())
        .collect();
    let kinv = invert(&k);
    let ks: Vec<f64> = xs.iter().map(|xi| kern(sigma0_sq, xi, x) + if xi.as_slice() == x { noise } else { 0.0 }).collect();
    let kss = kern(sigma0_sq, x, x) + noise;
    let mut mean = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            mean += ks[i] * kinv[i][j] * ys[j];
            quad += ks[i] * kinv[i][j] * ks[j];
        }
    }
    (mean, (kss - quad).max(0.0).sqrt())
}
