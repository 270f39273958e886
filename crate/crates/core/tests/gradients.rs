mod common;

use common::*;
use pkgc_core::kg::Triple;
use pkgc_core::kge::{EmbeddingModel, ModelFamily};
use pkgc_core::train::{loss, regularizer, Objective, RegKind};

#[test]
fn analytic_gradients_match_central_differences() {
    for family in ModelFamily::ALL {
        for reg in [RegKind::F2, RegKind::Dura] {
            for dim in [1, 3] {
                let m = random_model(family, dim, 5, 2, 11 + dim as u64);
                let err = max_gradient_error(&m, &toy_batch(2), reg, 0.05, None);
                assert!(err <= FD_TOL, "{family} {reg} dim {dim}: max rel err {err:e}");
            }
        }
    }
}

#[test]
fn drift_gradient_matches_central_differences() {
    for family in ModelFamily::ALL {
        let m = random_model(family, 2, 5, 2, 3);
        let snapshot = random_model(family, 2, 5, 2, 4).entities().to_owned();
        let err = max_gradient_error(&m, &toy_batch(2), RegKind::F2, 0.01, Some((0.5, &snapshot)));
        assert!(err <= FD_TOL, "{family}: max rel err {err:e}");
    }
}

#[test]
fn zero_model_loss_is_log_entities() {
    for family in ModelFamily::ALL {
        let m = EmbeddingModel::<f64>::zeros(family, 3, 7, 2).unwrap();
        let (v, _) = loss(&m, &[Triple::new(0, 1, 4)], &Objective::plain(RegKind::F2, 0.0)).unwrap();
        assert!((v.total - 7f64.ln()).abs() < 1e-12, "{family}: {}", v.total);
    }
}

#[test]
fn regularizer_enters_linearly() {
    let m = random_model(ModelFamily::ComplEx, 3, 5, 2, 9);
    let batch = toy_batch(2);
    for kind in [RegKind::F2, RegKind::Dura] {
        let (base, _) = loss(&m, &batch, &Objective::plain(kind, 0.0)).unwrap();
        let (with, _) = loss(&m, &batch, &Objective::plain(kind, 0.3)).unwrap();
        let mean_reg: f64 = batch.iter().map(|f| regularizer(&m, f, kind)).sum::<f64>() / batch.len() as f64;
        assert!((with.total - base.total - 0.3 * mean_reg).abs() < 1e-12);
    }
}

#[test]
fn regularizers_on_hand_values() {
    let zero = EmbeddingModel::<f64>::zeros(ModelFamily::Cp, 2, 2, 1).unwrap();
    let f = Triple::new(0, 0, 1);
    assert_eq!(regularizer(&zero, &f, RegKind::F2), 0.0);
    assert_eq!(regularizer(&zero, &f, RegKind::Dura), 0.0);

    // unit-norm rows
    let mut m = EmbeddingModel::<f64>::zeros(ModelFamily::TransE, 2, 2, 1).unwrap();
    m.entities_mut()[(0, 0)] = 1.0;
    m.entities_mut()[(1, 1)] = 1.0;
    m.relations_mut()[(0, 0)] = 0.6;
    m.relations_mut()[(0, 1)] = 0.8;
    assert!((regularizer(&m, &f, RegKind::F2) - 3.0).abs() < 1e-12);

    // ComplEx, one complex coordinate: h = a, r = b, r' = c, t = d
    let (a, b, c, d) = ((0.3, -1.2), (0.7, 0.4), (-0.5, 2.0), (1.1, 0.9));
    let mut m = EmbeddingModel::<f64>::zeros(ModelFamily::ComplEx, 1, 2, 1).unwrap();
    m.entities_mut().row_mut(0).assign(&ndarray::arr1(&[a.0, a.1]));
    m.entities_mut().row_mut(1).assign(&ndarray::arr1(&[d.0, d.1]));
    m.relations_mut().row_mut(0).assign(&ndarray::arr1(&[b.0, b.1]));
    m.relations_mut().row_mut(1).assign(&ndarray::arr1(&[c.0, c.1]));
    let abs2 = |z: (f64, f64)| z.0 * z.0 + z.1 * z.1;
    let expected = abs2(a) * abs2(b) + abs2(d) + abs2(d) * abs2(c) + abs2(a);
    assert!((regularizer(&m, &f, RegKind::Dura) - expected).abs() < 1e-12);
}
