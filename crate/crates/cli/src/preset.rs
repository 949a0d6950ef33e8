//! Named scenarios matching the published figures. All share `alpha1 = 1.5`,
//! `alpha2 = 10`, `eta(0) = 0.2`, `upsilon(0) = 0`, `rho(0) = 0.5` and run to
//! `tau = 50`.

use std::path::PathBuf;

use moneyflow_core::dynamics::Closure;
use moneyflow_core::Variant;

use crate::config::ScenarioConfig;

pub const PRESETS: &[(&str, &str)] = &[
    ("fig-erratum", "erratum equations (alpha1 replaced by 1 in upsilon'), C0 = 0"),
    ("fig-correct", "corrected equations, C0 = 0"),
    ("fig-alpha1-zero", "corrected equations, alpha1 = 0, C0 = 0"),
    ("fig-c0-positive", "corrected equations, C0 = 0.1"),
    ("fig-c0-negative", "corrected equations, C0 = -0.1"),
    ("fig-volume-return", "corrected equations, C0 = 0; volume, return and volume indices"),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    match name {
        "fig-erratum" => cfg.model.variant = Variant::IlinskiErratum,
        "fig-correct" | "fig-volume-return" => {}
        "fig-alpha1-zero" => cfg.model.alpha1 = 0.0,
        "fig-c0-positive" => cfg.initial.closure = Closure::C0(0.1),
        "fig-c0-negative" => cfg.initial.closure = Closure::C0(-0.1),
        _ => return None,
    }
    cfg.preset = Some(name.to_string());
    cfg.output.dir = PathBuf::from("out").join(name);
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves_and_validates() {
        for name in names() {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert!(cfg.overrides.is_empty());
            assert_eq!(cfg.integrator.t_end, 50.0);
        }
        assert!(preset("fig-7").is_none());
    }

    #[test]
    fn erratum_preset_matches_caption() {
        let cfg = preset("fig-erratum").unwrap();
        assert_eq!(cfg.model.variant, Variant::IlinskiErratum);
        assert_eq!((cfg.model.alpha1, cfg.model.alpha2), (1.5, 10.0));
        assert_eq!(cfg.initial.closure, Closure::C0(0.0));
        let s = cfg.initial.state0;
        assert_eq!((s.eta, s.upsilon, s.rho), (0.2, 0.0, 0.5));
    }
}
