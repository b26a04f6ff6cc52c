//! Plant models: Brachistochrone bead, planar differential-drive robot, and
//! longitudinal fixed-wing aircraft.

pub mod aircraft;
pub mod brachistochrone;
pub mod robot;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("altitude {altitude} m outside the supported envelope [0, 11000] m")]
    OutOfEnvelope { altitude: f64 },
    #[error("trim solve failed: {0}")]
    TrimFailed(String),
    #[error("parameter file error: {0}")]
    ParameterFile(String),
}

/// Parse a flat key-value JSON parameter document, rejecting unknown keys.
pub fn params_from_json<T: serde::de::DeserializeOwned>(json: &str) -> Result<T, ModelError> {
    serde_json::from_str(json).map_err(|e| ModelError::ParameterFile(e.to_string()))
}
