#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::DMatrix;
use osfield::{ExponentSpec, FieldModel, JordanBlock};

/// Named exponents covering diagonal, Jordan, rotation and sheared cases.
pub fn fixture_specs() -> Vec<(&'static str, ExponentSpec)> {
    let shear = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    vec![
        ("diag(1.5,2.5)", ExponentSpec::diagonal(&[1.5, 2.5]).unwrap()),
        (
            "cell(2,2)",
            ExponentSpec::new(vec![JordanBlock::cell(2.0, 2)], None).unwrap(),
        ),
        (
            "rot(1.8,1)",
            ExponentSpec::new(vec![JordanBlock::rotation(1.8, 1.0, 2)], None).unwrap(),
        ),
        (
            "sheared diag(1.4,2.2)",
            ExponentSpec::new(vec![JordanBlock::cell(1.4, 1), JordanBlock::cell(2.2, 1)], Some(shear)).unwrap(),
        ),
        ("E=[2]", ExponentSpec::diagonal(&[2.0]).unwrap()),
    ]
}

pub fn fixture_models() -> &'static [(&'static str, FieldModel)] {
    static MODELS: OnceLock<Vec<(&'static str, FieldModel)>> = OnceLock::new();
    MODELS.get_or_init(|| {
        fixture_specs()
            .into_iter()
            .map(|(name, e)| (name, FieldModel::tau_dual(e).unwrap()))
            .collect()
    })
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
