//! Flat `key=value` configuration covering every tunable default.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nbv_core::net::TrainConfig;
use nbv_core::oracle::ReconstructionConfig;
use nbv_core::persistence::Manifest;
use nbv_core::scene::DEFAULT_OBJECT_SCALE;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub view_radius: f64,
    pub hemisphere: bool,
    /// Size of the class set (and of the default search space).
    pub classes: usize,
    pub object_scale: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig { view_radius: 0.4, hemisphere: true, classes: 14, object_scale: DEFAULT_OBJECT_SCALE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Config {
    pub scene: SceneConfig,
    pub recon: ReconstructionConfig,
    pub train: TrainConfig,
}

pub const KEYS: &[&str] = &[
    "scene.view_radius",
    "scene.hemisphere",
    "scene.classes",
    "scene.object_scale",
    "camera.width",
    "camera.height",
    "camera.fov_y",
    "recon.s_cov",
    "recon.max_iter",
    "recon.plateau_eps",
    "recon.grid_edge",
    "recon.surface_spacing",
    "recon.initial_views",
    "metric.gap",
    "metric.min_overlap",
    "metric.min_features",
    "metric.leaf",
    "metric.curvature_tau",
    "metric.feature_radius",
    "sensor.p_hit",
    "sensor.p_miss",
    "sensor.p_min",
    "sensor.p_max",
    "sensor.epsilon",
    "train.learning_rate",
    "train.batch_size",
    "train.epochs",
    "train.keep_prob",
    "train.beta1",
    "train.beta2",
    "train.eps",
    "train.split",
    "train.seed",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| anyhow::anyhow!("bad value {v:?} for {key}"))
}

impl Config {
    pub fn get(&self, key: &str) -> Option<String> {
        let (s, r, t) = (&self.scene, &self.recon, &self.train);
        Some(match key {
            "scene.view_radius" => s.view_radius.to_string(),
            "scene.hemisphere" => s.hemisphere.to_string(),
            "scene.classes" => s.classes.to_string(),
            "scene.object_scale" => s.object_scale.to_string(),
            "camera.width" => r.camera.width.to_string(),
            "camera.height" => r.camera.height.to_string(),
            "camera.fov_y" => r.camera.fov_y.to_string(),
            "recon.s_cov" => r.s_cov.to_string(),
            "recon.max_iter" => r.max_iter.to_string(),
            "recon.plateau_eps" => r.plateau_eps.to_string(),
            "recon.grid_edge" => r.grid_edge.to_string(),
            "recon.surface_spacing" => r.surface_spacing.to_string(),
            "recon.initial_views" => r.initial_views.to_string(),
            "metric.gap" => r.metric.gap.to_string(),
            "metric.min_overlap" => r.metric.min_overlap.to_string(),
            "metric.min_features" => r.metric.min_features.to_string(),
            "metric.leaf" => r.metric.leaf.to_string(),
            "metric.curvature_tau" => r.metric.curvature_tau.to_string(),
            "metric.feature_radius" => r.metric.feature_radius.to_string(),
            "sensor.p_hit" => r.sensor.p_hit.to_string(),
            "sensor.p_miss" => r.sensor.p_miss.to_string(),
            "sensor.p_min" => r.sensor.p_min.to_string(),
            "sensor.p_max" => r.sensor.p_max.to_string(),
            "sensor.epsilon" => r.sensor.epsilon.to_string(),
            "train.learning_rate" => t.learning_rate.to_string(),
            "train.batch_size" => t.batch_size.to_string(),
            "train.epochs" => t.epochs.to_string(),
            "train.keep_prob" => t.keep_prob.to_string(),
            "train.beta1" => t.beta1.to_string(),
            "train.beta2" => t.beta2.to_string(),
            "train.eps" => t.eps.to_string(),
            "train.split" => t.split.to_string(),
            "train.seed" => t.seed.to_string(),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let (s, r, t) = (&mut self.scene, &mut self.recon, &mut self.train);
        match key {
            "scene.view_radius" => s.view_radius = num(key, v)?,
            "scene.hemisphere" => s.hemisphere = num(key, v)?,
            "scene.classes" => s.classes = num(key, v)?,
            "scene.object_scale" => s.object_scale = num(key, v)?,
            "camera.width" => r.camera.width = num(key, v)?,
            "camera.height" => r.camera.height = num(key, v)?,
            "camera.fov_y" => r.camera.fov_y = num(key, v)?,
            "recon.s_cov" => r.s_cov = num(key, v)?,
            "recon.max_iter" => r.max_iter = num(key, v)?,
            "recon.plateau_eps" => r.plateau_eps = num(key, v)?,
            "recon.grid_edge" => r.grid_edge = num(key, v)?,
            "recon.surface_spacing" => r.surface_spacing = num(key, v)?,
            "recon.initial_views" => r.initial_views = num(key, v)?,
            "metric.gap" => r.metric.gap = num(key, v)?,
            "metric.min_overlap" => r.metric.min_overlap = num(key, v)?,
            "metric.min_features" => r.metric.min_features = num(key, v)?,
            "metric.leaf" => r.metric.leaf = num(key, v)?,
            "metric.curvature_tau" => r.metric.curvature_tau = num(key, v)?,
            "metric.feature_radius" => r.metric.feature_radius = num(key, v)?,
            "sensor.p_hit" => r.sensor.p_hit = num(key, v)?,
            "sensor.p_miss" => r.sensor.p_miss = num(key, v)?,
            "sensor.p_min" => r.sensor.p_min = num(key, v)?,
            "sensor.p_max" => r.sensor.p_max = num(key, v)?,
            "sensor.epsilon" => r.sensor.epsilon = num(key, v)?,
            "train.learning_rate" => t.learning_rate = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.epochs" => t.epochs = num(key, v)?,
            "train.keep_prob" => t.keep_prob = num(key, v)?,
            "train.beta1" => t.beta1 = num(key, v)?,
            "train.beta2" => t.beta2 = num(key, v)?,
            "train.eps" => t.eps = num(key, v)?,
            "train.split" => t.split = num(key, v)?,
            "train.seed" => t.seed = num(key, v)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scene;
        if !(s.view_radius > 0.0 && s.view_radius.is_finite()) {
            bail!("scene.view_radius must be > 0");
        }
        if s.classes == 0 || s.classes > 256 {
            bail!("scene.classes must be in 1..=256");
        }
        if !(s.object_scale > 0.0 && s.object_scale < s.view_radius) {
            bail!("scene.object_scale must be in (0, view_radius)");
        }
        self.recon.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Applies every entry of a config file; unknown keys are errors.
    pub fn apply_manifest(&mut self, m: &Manifest, allow_foreign: bool) -> Result<()> {
        for (k, v) in m.entries() {
            if KEYS.contains(&k.as_str()) {
                self.set(k, v)?;
            } else if !allow_foreign {
                bail!("unknown config key {k:?}");
            }
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>) -> Result<Config> {
        let mut c = Config::default();
        if let Some(p) = path {
            let m = Manifest::read(p).with_context(|| format!("reading config {}", p.display()))?;
            c.apply_manifest(&m, false)?;
        }
        Ok(c)
    }

    pub fn echo(&self, m: &mut Manifest) {
        for k in KEYS {
            m.set(k, self.get(k).expect("every listed key has a getter"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let c = Config::default();
        let mut m = Manifest::new();
        c.echo(&mut m);
        assert_eq!(m.entries().len(), KEYS.len());
        let mut d = Config::default();
        d.train.seed = 99;
        d.recon.s_cov = 0.1;
        d.apply_manifest(&m, false).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let m = Manifest::parse("metric.gapp=0.1\n").unwrap();
        assert!(Config::default().apply_manifest(&m, false).is_err());
        assert!(Config::default().set("train.epochs", "many").is_err());
    }

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }
}
