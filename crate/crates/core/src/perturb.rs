//! Dual-domain collaborative embedding perturbation.
//!
//! A noise row is `sign(target_row) * |x| / |x|_2` where `x` is a row of a
//! row-shuffled source matrix (collaborative mode) or a standard-normal draw
//! (random mode). Taking `|x|` before applying the sign keeps the noise in the
//! target's hyperoctant, and row normalization makes every perturbed row move
//! by exactly `epsilon`. Noise is a constant with respect to the gradient.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbMode {
    #[default]
    Collaborative,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub epsilon: f64,
    pub mode: PerturbMode,
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon >= 0.0 && self.epsilon.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)))
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Write `sign(target) * |raw| / |raw|_2` into `out`. A zero `raw` row gives a zero row.
fn sign_matched_row(target: &[f64], raw: &[f64], out: &mut [f64]) {
    let n = norm(raw);
    if n == 0.0 {
        out.fill(0.0);
        return;
    }
    for ((o, &t), &r) in out.iter_mut().zip(target).zip(raw) {
        *o = sign(t) * r.abs() / n;
    }
}

pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Noise whose row `r` is built from `source[permutation[r]]`.
pub fn collaborative_noise(target: &Matrix, source: &Matrix, permutation: &[usize]) -> Result<Matrix> {
    if target.shape() != source.shape() {
        return Err(Error::Shape(format!(
            "target {:?} and source {:?} differ",
            target.shape(),
            source.shape()
        )));
    }
    if permutation.len() != target.rows() {
        return Err(Error::Shape(format!(
            "permutation of {} rows for a {}-row matrix",
            permutation.len(),
            target.rows()
        )));
    }
    let mut seen = vec![false; permutation.len()];
    for &p in permutation {
        if p >= seen.len() || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Shape("row permutation is not a bijection".into()));
        }
    }
    let mut out = Matrix::zeros(target.rows(), target.cols());
    for (r, &src) in permutation.iter().enumerate() {
        sign_matched_row(target.row(r), source.row(src), out.row_mut(r));
    }
    Ok(out)
}

/// Noise built from per-component standard-normal draws.
pub fn gaussian_noise<R: Rng + ?Sized>(target: &Matrix, rng: &mut R) -> Matrix {
    let mut out = Matrix::zeros(target.rows(), target.cols());
    let mut raw = vec![0.0; target.cols()];
    for r in 0..target.rows() {
        raw.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        sign_matched_row(target.row(r), &raw, out.row_mut(r));
    }
    out
}

fn draw_noise<R: Rng + ?Sized>(
    target: &Matrix,
    source: &Matrix,
    mode: PerturbMode,
    rng: &mut R,
) -> Result<Matrix> {
    match mode {
        PerturbMode::Collaborative => {
            let perm = random_permutation(target.rows(), rng);
            collaborative_noise(target, source, &perm)
        }
        PerturbMode::Random => Ok(gaussian_noise(target, rng)),
    }
}

/// `base - epsilon * noise`
pub fn apply_noise(base: &Matrix, noise: &Matrix, epsilon: f64) -> Matrix {
    let mut out = base.clone();
    out.add_scaled(-epsilon, noise);
    out
}

/// Two independent noise draws for each embedding family.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationNoise {
    pub user_social: [Matrix; 2],
    pub user_interaction: [Matrix; 2],
    pub item: [Matrix; 2],
}

impl PerturbationNoise {
    /// Social user noise comes from the interaction-domain user matrix and
    /// vice versa; item noise comes from the item matrix itself.
    pub fn sample<R: Rng + ?Sized>(
        user_interaction: &Matrix,
        user_social: &Matrix,
        items: &Matrix,
        mode: PerturbMode,
        rng: &mut R,
    ) -> Result<Self> {
        let s1 = draw_noise(user_social, user_interaction, mode, rng)?;
        let s2 = draw_noise(user_social, user_interaction, mode, rng)?;
        let r1 = draw_noise(user_interaction, user_social, mode, rng)?;
        let r2 = draw_noise(user_interaction, user_social, mode, rng)?;
        let i1 = draw_noise(items, items, mode, rng)?;
        let i2 = draw_noise(items, items, mode, rng)?;
        Ok(PerturbationNoise {
            user_social: [s1, s2],
            user_interaction: [r1, r2],
            item: [i1, i2],
        })
    }
}

fn two_views<R: Rng + ?Sized>(
    target: &Matrix,
    source: &Matrix,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> Result<(Matrix, Matrix)> {
    cfg.validate()?;
    let first = draw_noise(target, source, cfg.mode, rng)?;
    let second = draw_noise(target, source, cfg.mode, rng)?;
    Ok((
        apply_noise(target, &first, cfg.epsilon),
        apply_noise(target, &second, cfg.epsilon),
    ))
}

/// Two views of the social-domain user embeddings, perturbed with
/// interaction-domain noise.
pub fn perturb_user_social<R: Rng + ?Sized>(
    p_social: &Matrix,
    p_interaction: &Matrix,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> Result<(Matrix, Matrix)> {
    two_views(p_social, p_interaction, cfg, rng)
}

/// Two views of the interaction-domain user embeddings, perturbed with
/// social-domain noise.
pub fn perturb_user_interaction<R: Rng + ?Sized>(
    p_interaction: &Matrix,
    p_social: &Matrix,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> Result<(Matrix, Matrix)> {
    two_views(p_interaction, p_social, cfg, rng)
}

pub fn perturb_item<R: Rng + ?Sized>(
    p_items: &Matrix,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> Result<(Matrix, Matrix)> {
    two_views(p_items, p_items, cfg, rng)
}

/// Random-perturbation ablation: Gaussian noise, same sign matching and scale.
pub fn random_noise_variant<R: Rng + ?Sized>(
    p: &Matrix,
    cfg: &PerturbationConfig,
    rng: &mut R,
) -> Result<(Matrix, Matrix)> {
    let cfg = PerturbationConfig {
        mode: PerturbMode::Random,
        ..*cfg
    };
    two_views(p, p, &cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cp(epsilon: f64) -> PerturbationConfig {
        PerturbationConfig {
            epsilon,
            mode: PerturbMode::Collaborative,
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn positive_target_gives_nonnegative_noise() {
        let target = Matrix::from_rows(&[vec![1.0, 2.0, 0.5]]).unwrap();
        let source = Matrix::from_rows(&[vec![-3.0, 0.0, 4.0]]).unwrap();
        let noise = collaborative_noise(&target, &source, &[0]).unwrap();
        assert_eq!(noise.row(0), &[0.6, 0.0, 0.8]);
    }

    #[test]
    fn zero_target_component_gives_zero_noise() {
        let target = Matrix::from_rows(&[vec![0.0, -2.0]]).unwrap();
        let source = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let noise = collaborative_noise(&target, &source, &[0]).unwrap();
        assert_eq!(noise.row(0), &[0.0, -0.8]);
    }

    #[test]
    fn constant_source_ignores_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let target = random_matrix(5, 3, &mut rng);
        let source = Matrix::from_rows(&vec![vec![0.2, -0.7, 1.1]; 5]).unwrap();
        let a = collaborative_noise(&target, &source, &[0, 1, 2, 3, 4]).unwrap();
        let b = collaborative_noise(&target, &source, &[3, 0, 4, 2, 1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(2, 2);
        assert!(collaborative_noise(&a, &Matrix::zeros(3, 2), &[0, 1]).is_err());
        assert!(collaborative_noise(&a, &a, &[0, 0]).is_err());
        assert!(collaborative_noise(&a, &a, &[0]).is_err());
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ps = random_matrix(6, 4, &mut rng);
        let pr = random_matrix(6, 4, &mut rng);
        let (a, b) = perturb_user_social(&ps, &pr, &cp(0.0), &mut rng).unwrap();
        assert_eq!((&a, &b), (&ps, &ps));
        let (a, b) = perturb_user_interaction(&pr, &ps, &cp(0.0), &mut rng).unwrap();
        assert_eq!((&a, &b), (&pr, &pr));
        let (a, _) = perturb_item(&pr, &cp(0.0), &mut rng).unwrap();
        assert_eq!(a, pr);
        let (a, _) = random_noise_variant(&pr, &cp(0.0), &mut rng).unwrap();
        assert_eq!(a, pr);
    }

    #[test]
    fn hand_evaluated_single_user() {
        let ps = Matrix::from_rows(&[vec![2.0, -1.0]]).unwrap();
        let pr = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let noise = collaborative_noise(&ps, &pr, &[0]).unwrap();
        assert_eq!(noise.row(0), &[0.6, -0.8]);
        let eps = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (v1, v2) = perturb_user_social(&ps, &pr, &cp(eps), &mut rng).unwrap();
        for v in [&v1, &v2] {
            assert!((v[(0, 0)] - (2.0 - 0.6 * eps)).abs() < 1e-15);
            assert!((v[(0, 1)] - (-1.0 + 0.8 * eps)).abs() < 1e-15);
        }
        // Roles swapped: target (3,4) all positive, source |(2,-1)|/sqrt5.
        let (v, _) = perturb_user_interaction(&pr, &ps, &cp(eps), &mut rng).unwrap();
        let s5 = 5f64.sqrt();
        assert!((v[(0, 0)] - (3.0 - eps * 2.0 / s5)).abs() < 1e-15);
        assert!((v[(0, 1)] - (4.0 - eps * 1.0 / s5)).abs() < 1e-15);
    }

    #[test]
    fn single_item_scales_toward_origin() {
        let p = Matrix::from_rows(&[vec![1.0, -2.0, 2.0]]).unwrap();
        let eps = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (v, _) = perturb_item(&p, &cp(eps), &mut rng).unwrap();
        let factor = 1.0 - eps / 3.0;
        for c in 0..3 {
            assert!((v[(0, c)] - factor * p[(0, c)]).abs() < 1e-15);
        }
    }

    #[test]
    fn displacement_and_hyperoctant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ps = random_matrix(40, 6, &mut rng);
        let pr = random_matrix(40, 6, &mut rng);
        let eps = 0.37;
        for mode in [PerturbMode::Collaborative, PerturbMode::Random] {
            let cfg = PerturbationConfig { epsilon: eps, mode };
            let (v1, v2) = perturb_user_social(&ps, &pr, &cfg, &mut rng).unwrap();
            for v in [&v1, &v2] {
                for r in 0..40 {
                    let diff: Vec<f64> = ps.row(r).iter().zip(v.row(r)).map(|(a, b)| a - b).collect();
                    assert!((norm(&diff) - eps).abs() < 1e-12);
                    for (d, t) in diff.iter().zip(ps.row(r)) {
                        assert!(d * t >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn views_are_independent_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ps = random_matrix(30, 4, &mut rng);
        let pr = random_matrix(30, 4, &mut rng);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            perturb_user_social(&ps, &pr, &cp(0.5), &mut rng).unwrap()
        };
        let (a1, b1) = run(3);
        let (a2, b2) = run(3);
        assert_eq!((&a1, &b1), (&a2, &b2));
        assert_ne!(a1, b1);
        let g = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_noise_variant(&ps, &cp(0.5), &mut rng).unwrap()
        };
        assert_eq!(g(5), g(5));
    }
}
