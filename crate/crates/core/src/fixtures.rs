//! Bundled engine data: the three published equilibrium linearizations,
//! published Lyapunov matrices and ready-made scenarios.

use crate::error::{Error, Result};
use crate::lpv_model::{PlantFamily, SubsystemFamily};
use crate::numerics::DenseMatrix;

pub const ENGINE_FAMILY: &str = include_str!("../fixtures/engine_family.json");
pub const ENGINE_SUBSYSTEMS: &str = include_str!("../fixtures/engine_subsystems.json");
pub const PUBLISHED_P: &str = include_str!("../fixtures/published_p.json");
pub const P_CO: &str = include_str!("../fixtures/p_co.json");
pub const P_PR: &str = include_str!("../fixtures/p_pr.json");

/// Directory holding the fixture files on disk, for scenario paths.
pub const FIXTURE_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn engine_family() -> PlantFamily<f64> {
    PlantFamily::from_json_str(ENGINE_FAMILY).expect("bundled engine family is valid")
}

pub fn engine_subsystems() -> SubsystemFamily<f64> {
    SubsystemFamily::from_json_str(ENGINE_SUBSYSTEMS).expect("bundled subsystem family is valid")
}

pub fn parse_matrix(s: &str, what: &str) -> Result<DenseMatrix<f64>> {
    serde_json::from_str(s).map_err(|e| Error::Json {
        context: what.to_string(),
        source: e,
    })
}

pub fn published_p() -> DenseMatrix<f64> {
    parse_matrix(PUBLISHED_P, "published_p").expect("bundled P parses")
}

pub fn p_co() -> DenseMatrix<f64> {
    parse_matrix(P_CO, "p_co").expect("bundled P_Co parses")
}

pub fn p_pr() -> DenseMatrix<f64> {
    parse_matrix(P_PR, "p_pr").expect("bundled P_Pr parses")
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(FIXTURE_DIR).join("scenarios").join(format!("{name}.json"))
}
