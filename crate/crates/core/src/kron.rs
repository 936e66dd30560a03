//! Kronecker products and column stacking.

use nalgebra::DMatrix;

/// `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

/// `wᵀ ⊗ H` for a weight vector `w`: block `j` of the result is `w_j·H`.
pub fn kron_weights(w: &[f64], h: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = h.shape();
    let mut out = DMatrix::zeros(r, w.len() * c);
    for (j, &wj) in w.iter().enumerate() {
        if wj != 0.0 {
            out.view_mut((0, j * c), (r, c)).copy_from(&(h * wj));
        }
    }
    out
}

/// Column-stacked copy of a matrix.
pub fn vec(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn kron_small() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 5.0]);
        let k = kron(&a, &b);
        let expected = DMatrix::from_row_slice(2, 4, &[0.0, 5.0, 0.0, 10.0, 0.0, 15.0, 0.0, 20.0]);
        assert_eq!(k, expected);
    }

    #[test]
    fn weight_kron_matches_general_kron() {
        let w = [0.5, -1.0, 2.0];
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let wt = DMatrix::from_row_slice(1, 3, &w);
        assert_eq!(kron_weights(&w, &h), kron(&wt, &h));
    }

    #[test]
    fn vec_identity_small() {
        let h = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -2.0, 0.0, 3.0, 1.0]);
        let delta = DMatrix::from_fn(3, 4, |r, c| (r as f64 - c as f64) * 0.3 + 0.1);
        let w = DVector::from_vec(vec![0.2, -0.1, 0.7, 0.2]);
        let lhs = &h * &delta * &w;
        let rhs = kron_weights(w.as_slice(), &h) * vec(&delta);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn weighted_product_matches_vec_identity(
            r in 1usize..6, c in 1usize..6, m in 1usize..8, seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut next = move || rng.random_range(-0.5..0.5);
            let h = DMatrix::from_fn(r, c, |_, _| next());
            let delta = DMatrix::from_fn(c, m, |_, _| next());
            let w = DVector::from_fn(m, |_, _| next());
            let direct = &h * &delta * &w;
            let structured = kron_weights(w.as_slice(), &h) * vec(&delta);
            prop_assert!((direct - &structured).amax() < 1e-12);
            let general = kron(&DMatrix::from_row_slice(1, m, w.as_slice()), &h) * vec(&delta);
            prop_assert!((general - structured).amax() < 1e-14);
        }
    }
}
