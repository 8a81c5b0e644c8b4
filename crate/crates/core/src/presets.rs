//! Tuned hyperparameters for the benchmark designs, and the TOML overlay
//! used by `linforest train --config`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::forest::HyperParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub mtry: usize,
    pub nodesize_spl: usize,
    pub lambda: f64,
    /// Natural log of the minimum split gain.
    pub log_min_split_gain: f64,
    pub sample_fraction: f64,
}

macro_rules! presets {
    ($($name:literal, $mtry:literal, $node:literal, $lambda:literal, $log:literal, $frac:literal;)*) => {
        pub const PRESETS: &[Preset] = &[$(Preset {
            name: $name,
            mtry: $mtry,
            nodesize_spl: $node,
            lambda: $lambda,
            log_min_split_gain: $log,
            sample_fraction: $frac,
        }),*];
    };
}

presets! {
    "Friedman 1", 9, 16, 0.23, -3.86, 0.91;
    "Friedman 2", 3, 195, 0.43, -5.07, 0.89;
    "Friedman 3", 4, 11, 6.65, -3.16, 0.65;
    "Boston Housing fold1", 10, 7, 0.28, -7.86, 0.95;
    "Boston Housing fold2", 4, 13, 3.06, -4.81, 0.99;
    "Boston Housing fold3", 3, 12, 0.19, -4.94, 0.94;
    "Boston Housing fold4", 5, 13, 0.77, -9.12, 0.91;
    "Boston Housing fold5", 2, 11, 0.25, -13.71, 0.99;
    "Ozone fold1", 2, 19, 9.47, -6.41, 0.5;
    "Ozone fold2", 3, 12, 3.06, -4.81, 0.99;
    "Ozone fold3", 1, 20, 7.4, -10.41, 0.9;
    "Ozone fold4", 3, 19, 9.36, -4.76, 0.92;
    "Ozone fold5", 2, 3, 8.51, -7.12, 0.88;
    "Servo fold1", 12, 5, 0.31, -2.83, 0.89;
    "Servo fold2", 9, 16, 0.11, -6.78, 0.97;
    "Servo fold3", 11, 2, 0.87, -8.84, 0.97;
    "Servo fold4", 11, 34, 0.12, -3.22, 0.87;
    "Servo fold5", 11, 33, 0.12, -3.22, 0.87;
    "Abalone", 1, 150, 0.13, -6.25, 0.92;
    "autos", 5, 18, 0.8, -8.44, 0.92;
    "bike", 8, 23, 0.11, -6.78, 0.97;
    "artificial LM 128", 2, 17, 9.47, -6.41, 0.5;
    "artificial LM 256", 3, 50, 5.57, -8.71, 0.52;
    "artificial LM 512", 2, 16, 0.19, -2.78, 0.51;
    "artificial LM 1024", 4, 3, 0.18, -2.82, 0.63;
    "artificial LM 2048", 9, 17, 0.23, -3.86, 0.91;
    "Step 128", 8, 9, 9.29, -8.39, 0.92;
    "Step 256", 9, 30, 0.3, -7.36, 0.77;
    "Step 512", 8, 47, 0.28, -12.75, 0.89;
    "Step 1024", 5, 27, 0.31, -18.42, 0.73;
    "StepLinear 128", 10, 5, 0.31, -2.83, 0.89;
    "StepLinear 256", 10, 10, 8.74, -3.0, 0.92;
    "StepLinear 512", 10, 11, 8.74, -3.0, 0.92;
    "StepLinear 1024", 10, 12, 8.74, -3.0, 0.92;
}

/// Looks a preset up by name, ignoring case and repeated whitespace.
pub fn preset(name: &str) -> Option<&'static Preset> {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    let want = norm(name);
    PRESETS.iter().find(|p| norm(p.name) == want)
}

impl Preset {
    pub fn min_split_gain(&self) -> f64 {
        self.log_min_split_gain.exp()
    }

    /// `base` with this preset's five tuned values.
    pub fn apply(&self, base: &HyperParams) -> HyperParams {
        HyperParams {
            mtry: Some(self.mtry),
            nodesize_spl: self.nodesize_spl,
            lambda: self.lambda,
            min_split_gain: self.min_split_gain(),
            sample_fraction: self.sample_fraction,
            ..base.clone()
        }
    }
}

/// Partial hyperparameters, as read from a TOML file or the command line.
/// Unset fields leave the target untouched.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub preset: Option<String>,
    pub ntree: Option<usize>,
    pub mtry: Option<usize>,
    pub lambda: Option<f64>,
    pub min_split_gain: Option<f64>,
    /// Natural log of `min_split_gain`.
    pub log_min_split_gain: Option<f64>,
    pub folds: Option<usize>,
    pub nodesize_spl: Option<usize>,
    pub sample_fraction: Option<f64>,
    pub splitratio: Option<f64>,
    pub honest: Option<bool>,
    pub lin: Option<Vec<String>>,
    pub seed: Option<u64>,
}

impl ParamOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `later` win.
    pub fn merge(mut self, later: ParamOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $(if later.$f.is_some() { self.$f = later.$f; })* };
        }
        take!(preset, ntree, mtry, lambda, folds, nodesize_spl, sample_fraction, splitratio, honest, lin, seed);
        // the two gain spellings replace each other
        if later.min_split_gain.is_some() || later.log_min_split_gain.is_some() {
            self.min_split_gain = later.min_split_gain;
            self.log_min_split_gain = later.log_min_split_gain;
        }
        self
    }

    /// Preset first, then the explicit fields.
    pub fn apply(&self, base: &HyperParams) -> Result<HyperParams> {
        let mut p = match &self.preset {
            Some(name) => preset(name)
                .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?
                .apply(base),
            None => base.clone(),
        };
        if self.min_split_gain.is_some() && self.log_min_split_gain.is_some() {
            return Err(Error::Config(
                "give either min_split_gain or log_min_split_gain, not both".into(),
            ));
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { p.$f = v; })* };
        }
        set!(ntree, lambda, min_split_gain, folds, nodesize_spl, sample_fraction, splitratio, honest, seed);
        if let Some(m) = self.mtry {
            p.mtry = Some(m);
        }
        if let Some(l) = &self.lin {
            p.lin = Some(l.clone());
        }
        if let Some(l) = self.log_min_split_gain {
            p.min_split_gain = l.exp();
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let lm = preset("artificial LM 1024").unwrap();
        assert_eq!((lm.mtry, lm.nodesize_spl, lm.lambda, lm.log_min_split_gain, lm.sample_fraction), (4, 3, 0.18, -2.82, 0.63));
        let step = preset("step  1024").unwrap();
        assert_eq!((step.mtry, step.nodesize_spl, step.lambda, step.log_min_split_gain, step.sample_fraction), (5, 27, 0.31, -18.42, 0.73));
        assert_eq!(PRESETS.len(), 34);
        assert!(preset("nope").is_none());
    }

    #[test]
    fn natural_log_gain() {
        let lm = preset("artificial LM 1024").unwrap();
        assert!((lm.min_split_gain() - (-2.82f64).exp()).abs() < 1e-15);
        assert!((lm.min_split_gain() - 0.059_606).abs() < 1e-6);
    }

    #[test]
    fn overrides_layer_on_preset() {
        let o = ParamOverrides::from_toml("preset = \"Step 1024\"\nntree = 7\nlambda = 2.0\n").unwrap();
        let p = o.apply(&HyperParams::default()).unwrap();
        assert_eq!((p.ntree, p.lambda, p.mtry, p.nodesize_spl), (7, 2.0, Some(5), 27));
        assert!((p.min_split_gain - (-18.42f64).exp()).abs() < 1e-20);
    }

    #[test]
    fn rejects_conflicts_and_unknown_keys() {
        assert!(ParamOverrides::from_toml("bogus = 1").is_err());
        let both = ParamOverrides {
            min_split_gain: Some(0.1),
            log_min_split_gain: Some(-2.0),
            ..Default::default()
        };
        assert!(both.apply(&HyperParams::default()).unwrap_err().is_config());
        let later = ParamOverrides {
            min_split_gain: Some(0.1),
            ..Default::default()
        };
        let merged = ParamOverrides {
            log_min_split_gain: Some(-2.0),
            ..Default::default()
        }
        .merge(later);
        assert_eq!(merged.apply(&HyperParams::default()).unwrap().min_split_gain, 0.1);
    }
}
