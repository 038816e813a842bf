//! Serializable description of a field model.

use serde::{Deserialize, Serialize};

use crate::covariance::{FieldModel, QuadratureProfile};
use crate::error::Result;
use crate::exponent::ExponentSpec;
use crate::psi::{HomogeneousPsi, PsiConfig};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub exponent: ExponentSpec,
    #[serde(default)]
    pub psi: PsiConfig,
    #[serde(default)]
    pub quadrature: QuadratureProfile,
}

impl ModelConfig {
    pub fn new(exponent: ExponentSpec) -> Self {
        Self {
            exponent,
            psi: PsiConfig::default(),
            quadrature: QuadratureProfile::default(),
        }
    }

    pub fn build(&self) -> Result<FieldModel> {
        let psi = HomogeneousPsi::from_config(&self.psi, &self.exponent);
        FieldModel::with_profile(self.exponent.clone(), psi, self.quadrature.clone())
    }
}
