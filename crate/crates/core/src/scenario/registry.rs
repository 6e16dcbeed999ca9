//! Built-in scenarios, named after the figures they reproduce.

use crate::error::{Error, Result};
use crate::free_space::RetrievalDirection;
use crate::optimizer::AscentConfig;
use crate::scenario::config::{
    CompareConfig, CribSettings, GridSettings, InitScale, InputShape, Method, ModelKind, ProfileKind, ScenarioConfig,
    ScenarioFile, Sweep, SweepAxis, SweepValues, WidthSearch, SCHEMA_VERSION,
};

pub const NAMES: [&str; 9] = ["fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "fig5", "fig6", "fig7"];

fn base(name: &str, description: &str, model: ModelKind, strengths: Vec<f64>, sweep: Sweep) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        description: description.into(),
        model,
        strengths,
        sweep,
        input: InputShape::GaussianLike,
        methods: Vec::new(),
        optimizer: AscentConfig { step_growth: 1.5, max_iters: 3000, ..AscentConfig::default() },
        init_scale: InitScale::InverseSqrtDuration,
        init_jitter: 0.0,
        grid: GridSettings::default(),
        crib: CribSettings::default(),
        retrieval: RetrievalDirection::Backward,
        waveforms: false,
        output_dir: None,
        seed: 0,
    }
}

fn controls(name: &str, description: &str, model: ModelKind, strength: f64, duration: f64, inits: &[f64]) -> ScenarioConfig {
    let mut c = base(
        name,
        description,
        model,
        vec![strength],
        Sweep { axis: SweepAxis::Duration, values: SweepValues::List(vec![duration]) },
    );
    c.init_scale = InitScale::Absolute;
    c.optimizer.multi_start = inits.to_vec();
    c.optimizer.max_iters = 5000;
    c.optimizer.tol = 1e-8;
    c.waveforms = true;
    if model == ModelKind::FreeSpace {
        c.grid.nodes_per_unit_time = 50.0;
        c.grid.space_nodes = 101;
    }
    c
}

fn log_sweep(from: f64, to: f64, per_decade: usize) -> Sweep {
    Sweep { axis: SweepAxis::ScaledDuration, values: SweepValues::Log { from, to, per_decade } }
}

/// The built-in scenario `name`.
pub fn scenario(name: &str) -> Result<ScenarioFile> {
    let f = match name {
        "fig2a" => ScenarioFile::Single(controls(
            "fig2a",
            "cavity, C=10, T=50: optimal storage controls from four constant starts",
            ModelKind::Cavity,
            10.0,
            50.0,
            &[0.2, 1.0, 2.0, 3.0],
        )),
        "fig2b" => ScenarioFile::Single(controls(
            "fig2b",
            "cavity, C=10, T=0.5: optimal storage controls from four constant starts",
            ModelKind::Cavity,
            10.0,
            0.5,
            &[2.0, 5.0, 8.0, 11.0],
        )),
        "fig3a" | "fig3b" => {
            let square = name == "fig3b";
            let mut c = base(
                name,
                if square {
                    "cavity, C=1,10,100, square input: optimal total efficiency vs TC gamma"
                } else {
                    "cavity, C=1,10,100, Gaussian-like input: optimal total efficiency vs TC gamma"
                },
                ModelKind::Cavity,
                vec![1.0, 10.0, 100.0],
                log_sweep(0.1, 1000.0, 12),
            );
            if square {
                c.input = InputShape::Square;
            }
            ScenarioFile::Single(c)
        }
        "fig4a" => ScenarioFile::Single(controls(
            "fig4a",
            "free space, d=10, T=50: optimal controls for storage plus backward retrieval",
            ModelKind::FreeSpace,
            10.0,
            50.0,
            &[0.2, 0.5, 1.0, 1.5],
        )),
        "fig4b" => ScenarioFile::Single(controls(
            "fig4b",
            "free space, d=10, T=0.5: optimal controls for storage plus backward retrieval",
            ModelKind::FreeSpace,
            10.0,
            0.5,
            &[1.0, 3.0, 5.0, 7.0],
        )),
        "fig5" => {
            let mut c = base(
                "fig5",
                "free space, d=1,10,100: optimal storage plus backward retrieval vs Td gamma",
                ModelKind::FreeSpace,
                vec![1.0, 10.0, 100.0],
                log_sweep(0.1, 1000.0, 12),
            );
            c.optimizer.max_iters = 300;
            ScenarioFile::Single(c)
        }
        "fig6" => {
            let mut c = base(
                "fig6",
                "cavity, C=50: fast homogeneous, two-class CRIB and optimal homogeneous vs TC gamma",
                ModelKind::CribCavity,
                vec![50.0],
                log_sweep(0.1, 10.0, 12),
            );
            c.methods = vec![Method::Fast, Method::Crib, Method::Optimal];
            ScenarioFile::Single(c)
        }
        "fig7" => {
            let sweep = log_sweep(1.0, 1000.0, 4);
            let crib = |sub: &str, profile: ProfileKind| {
                let mut c = base(sub, "", ModelKind::CribFree, vec![100.0], sweep.clone());
                c.methods = vec![Method::Crib];
                c.crib = CribSettings {
                    profile,
                    classes: 32,
                    width_search: WidthSearch::Scan { multipliers: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0] },
                };
                c.grid.space_nodes = 101;
                c
            };
            let mut homog = base("homogeneous", "", ModelKind::FreeSpace, vec![100.0], sweep.clone());
            homog.methods = vec![Method::Fast, Method::Optimal];
            homog.grid.space_nodes = 101;
            homog.optimizer.max_iters = 300;
            ScenarioFile::Compare(CompareConfig {
                schema_version: SCHEMA_VERSION,
                name: "fig7".into(),
                description: "free space, d=100: Gaussian and Lorentzian CRIB vs fast and optimal homogeneous storage".into(),
                compare: vec![crib("gaussian", ProfileKind::Gaussian), crib("lorentzian", ProfileKind::Lorentzian), homog],
                output_dir: None,
            })
        }
        other => {
            return Err(Error::Config(format!(
                "unknown scenario {other:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    f.validate()?;
    Ok(f)
}

pub fn all() -> Vec<ScenarioFile> {
    NAMES.iter().map(|n| scenario(n).expect("built-in scenarios are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates_and_round_trips() {
        for f in all() {
            let text = f.to_json().unwrap();
            assert_eq!(ScenarioFile::from_json(&text).unwrap(), f);
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(scenario("fig9").is_err());
    }
}
