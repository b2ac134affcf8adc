//! Least-squares polynomial regression of degree 1 or 2 (with cross terms).

use super::linalg::{dot, Cholesky, Matrix};
use super::{Dataset, RegressError, Surrogate};

/// Ridge added to the normal equations.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PolySurrogate {
    degree: u32,
    dim: usize,
    coefficients: Vec<f64>,
    train_size: usize,
}

/// Monomials `1, θ_i, θ_i θ_j (i <= j)` up to `degree`.
pub fn features(theta: &[f64], degree: u32) -> Vec<f64> {
    let k = theta.len();
    let mut f = Vec::with_capacity(1 + k + if degree >= 2 { k * (k + 1) / 2 } else { 0 });
    f.push(1.0);
    f.extend_from_slice(theta);
    if degree >= 2 {
        for i in 0..k {
            for j in i..k {
                f.push(theta[i] * theta[j]);
            }
        }
    }
    f
}

pub fn fit(data: &Dataset, degree: u32) -> Result<PolySurrogate, RegressError> {
    if !(1..=2).contains(&degree) {
        return Err(RegressError::InvalidConfig(format!("polynomial degree {degree} not in 1..=2")));
    }
    let rows: Vec<Vec<f64>> = data.thetas().iter().map(|t| features(t, degree)).collect();
    let design = Matrix::from_rows(&rows);
    let mut normal = design.gram();
    normal.add_diagonal(RIDGE);
    let rhs = design.transpose_mul_vec(data.rhos());
    let chol = Cholesky::new(&normal)
        .ok_or_else(|| RegressError::DegenerateData("normal equations not positive definite".into()))?;
    let coefficients = chol.solve(&rhs);
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(RegressError::NonFinite("polynomial coefficients".into()));
    }
    Ok(PolySurrogate { degree, dim: data.dim(), coefficients, train_size: data.len() })
}

impl PolySurrogate {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    /// Labels aligned with [`Self::coefficients`], e.g. `1`, `x0`, `x0*x1`.
    pub fn monomial_names(&self) -> Vec<String> {
        let mut names = vec!["1".to_string()];
        names.extend((0..self.dim).map(|i| format!("x{i}")));
        if self.degree >= 2 {
            for i in 0..self.dim {
                for j in i..self.dim {
                    names.push(format!("x{i}*x{j}"));
                }
            }
        }
        names
    }
}

impl Surrogate for PolySurrogate {
    fn predict(&self, theta: &[f64]) -> f64 {
        dot(&features(theta, self.degree), &self.coefficients)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data_from(f: impl Fn(&[f64]) -> f64, n: usize, k: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas: Vec<Vec<f64>> =
            (0..n).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let rhos = thetas.iter().map(|t| f(t)).collect();
        Dataset::new(thetas, rhos).unwrap()
    }

    #[test]
    fn reproduces_affine_data() {
        let d = data_from(|t| 3.0 + 2.0 * t[0], 10, 1, 1);
        let p = fit(&d, 1).unwrap();
        for (t, y) in d.thetas().iter().zip(d.rhos()) {
            assert!((p.predict(t) - y).abs() < 1e-6);
        }
    }

    #[test]
    fn recovers_square_coefficient() {
        let d = data_from(|t| t[0] * t[0], 20, 2, 2);
        let p = fit(&d, 2).unwrap();
        let names = p.monomial_names();
        let idx = names.iter().position(|n| n == "x0*x0").unwrap();
        assert!((p.coefficients()[idx] - 1.0).abs() < 1e-6);
        assert_eq!(names.len(), p.coefficients().len());
    }

    /// Independent normal-equations solve by Gaussian elimination with
    /// partial pivoting.
    fn normal_equations_oracle(rows: &[Vec<f64>], y: &[f64], ridge: f64) -> Vec<f64> {
        let p = rows[0].len();
        let mut a = vec![vec![0.0; p + 1]; p];
        for (r, yi) in rows.iter().zip(y) {
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += r[i] * r[j];
                }
                a[i][p] += r[i] * yi;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += ridge;
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for j in c..=p {
                        a[r][j] -= f * a[c][j];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    #[test]
    fn noisy_fit_matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = data_from(|t| 1.0 - 0.5 * t[0] + 2.0 * t[1], 40, 2, 3);
        let noisy: Vec<f64> = d.rhos().iter().map(|y| y + rng.random_range(-0.1..0.1)).collect();
        let d = Dataset::new(d.thetas().to_vec(), noisy).unwrap();
        for degree in [1, 2] {
            let p = fit(&d, degree).unwrap();
            let rows: Vec<Vec<f64>> = d.thetas().iter().map(|t| features(t, degree)).collect();
            let oracle = normal_equations_oracle(&rows, d.rhos(), RIDGE);
            for (c, o) in p.coefficients().iter().zip(&oracle) {
                assert!((c - o).abs() < 1e-9, "{c} vs {o}");
            }
        }
    }

    #[test]
    fn rank_deficient_data_is_handled_by_ridge() {
        // two points cannot determine six quadratic coefficients
        let d = Dataset::new(vec![vec![0.1, 0.2], vec![0.3, -0.4]], vec![1.0, 2.0]).unwrap();
        let p = fit(&d, 2).unwrap();
        assert!(p.predict(&[0.1, 0.2]).is_finite());
    }

    #[test]
    fn bad_degree_is_rejected() {
        let d = data_from(|t| t[0], 5, 1, 4);
        assert!(matches!(fit(&d, 3), Err(RegressError::InvalidConfig(_))));
    }
}
