use approx::assert_relative_eq;
use nlunmix_core::{rmse, rmse_with, Matrix, RmseConvention};
use proptest::prelude::*;

fn matrix(v: Vec<f64>) -> Matrix {
    Matrix::from_vec(3, 4, v).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 12)
}

proptest! {
    #[test]
    fn rmse_is_a_metric(a in entries(), b in entries(), c in entries()) {
        let (a, b, c) = (matrix(a), matrix(b), matrix(c));
        prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        let ab = rmse(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= rmse(&a, &c).unwrap() + rmse(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn conventions_differ_by_root_count(a in entries(), b in entries()) {
        let (a, b) = (matrix(a), matrix(b));
        let root = rmse_with(&a, &b, RmseConvention::RootMean).unwrap();
        let lit = rmse_with(&a, &b, RmseConvention::Literal).unwrap();
        assert_relative_eq!(lit * 12f64.sqrt(), root, max_relative = 1e-12);
    }
}

#[test]
fn rmse_rejects_mismatched_shapes() {
    assert!(rmse(&Matrix::zeros(2, 3), &Matrix::zeros(3, 2)).is_err());
    assert!(rmse(&Matrix::zeros(0, 0), &Matrix::zeros(0, 0)).is_err());
}
