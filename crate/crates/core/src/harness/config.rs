use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamnet::{BeamNetConfig, TrainConfig};
use crate::channel::{build_codebook, AntennaArray, Codebook, NoiseModel, Sector};
use crate::error::{invalid, Error, Result};
use crate::geometry::RegionVariant;
use crate::identify::{IdConfig, IdTrainConfig, ProposalConfig};
use crate::scene::{Camera, Lane, StreetConfig, VisualMode};
use crate::track::TrackerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub focal_px: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub height_m: f64,
    pub pitch_down_deg: f64,
    pub yaw_deg: f64,
}

impl CameraConfig {
    pub fn camera(&self) -> Result<Camera> {
        Camera::new(
            self.focal_px,
            self.width_px,
            self.height_px,
            self.height_m,
            self.pitch_down_deg.to_radians(),
            self.yaw_deg.to_radians(),
        )
    }
}

/// One camera and street setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub camera: CameraConfig,
    pub street: StreetConfig,
    pub sequences: usize,
    pub frames: usize,
    /// Seconds between frames.
    pub dt: f64,
    pub noise_std: f64,
    pub background: [u8; 3],
}

impl ScenarioConfig {
    pub fn scenario_a() -> Self {
        Self {
            name: "a".into(),
            camera: CameraConfig {
                focal_px: 160.0,
                width_px: 320,
                height_px: 240,
                height_m: 6.0,
                pitch_down_deg: 12.0,
                yaw_deg: 0.0,
            },
            street: StreetConfig::default(),
            sequences: 108,
            frames: 16,
            dt: 0.1,
            noise_std: 6.0,
            background: [28, 30, 36],
        }
    }

    /// Transfer setup: higher mount, steeper tilt, shifted lanes.
    pub fn scenario_b() -> Self {
        let mut s = Self::scenario_a();
        s.name = "b".into();
        s.camera.height_m = 7.0;
        s.camera.pitch_down_deg = 14.0;
        s.street.lanes = vec![
            Lane {
                depth_m: 33.0,
                direction: -1.0,
            },
            Lane {
                depth_m: 38.0,
                direction: 1.0,
            },
        ];
        s.street.pole_x_m = vec![-30.0, -12.0, 4.0, 20.0];
        s.street.pole_depth_m = 44.0;
        s.sequences = 40;
        s.noise_std = 9.0;
        s.background = [22, 24, 28];
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.camera()?;
        if self.frames == 0 || self.sequences == 0 {
            return invalid(format!("scenario {}: need sequences and frames", self.name));
        }
        if !(self.dt > 0.0) || !(self.noise_std >= 0.0) {
            return invalid(format!("scenario {}: dt must be positive and noise non-negative", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub m_ant: usize,
    pub spacing_wavelengths: f64,
    pub q: usize,
    /// Codebook sector half-width.
    pub sector_half_deg: f64,
    pub subcarriers: usize,
    /// Amplitude of the facade reflection relative to the LOS path.
    pub reflection_amplitude: f64,
    /// Depth of the reflecting facade behind the street.
    pub facade_depth_m: f64,
    pub noise: NoiseModel,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            m_ant: 64,
            spacing_wavelengths: 0.5,
            q: 64,
            sector_half_deg: 45.0,
            subcarriers: 4,
            reflection_amplitude: 0.2,
            facade_depth_m: 55.0,
            noise: NoiseModel {
                sigma_sq: 0.0,
                signal_power: 1.0,
            },
        }
    }
}

impl ChannelConfig {
    pub fn array(&self) -> Result<AntennaArray> {
        AntennaArray::new(self.m_ant, self.spacing_wavelengths)
    }

    pub fn codebook(&self) -> Result<Codebook> {
        build_codebook(&self.array()?, self.q, Sector::symmetric(self.sector_half_deg.to_radians())?)
    }

    pub fn validate(&self) -> Result<()> {
        self.codebook()?;
        if self.subcarriers == 0 {
            return invalid("need at least one subcarrier");
        }
        if !(self.reflection_amplitude >= 0.0) || !(self.noise.sigma_sq >= 0.0) || !(self.noise.signal_power > 0.0) {
            return invalid("channel amplitudes and noise must be non-negative");
        }
        Ok(())
    }
}

/// Everything one experiment needs; serialized as the `--config` JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario_a: ScenarioConfig,
    pub scenario_b: ScenarioConfig,
    pub channel: ChannelConfig,
    pub visual_mode: VisualMode,
    pub proposals: ProposalConfig,
    pub id: IdConfig,
    pub id_train: IdTrainConfig,
    /// Held-out short sequences used to score identification.
    pub id_eval_sequences: usize,
    pub tracker: TrackerConfig,
    pub region_variant: RegionVariant,
    pub net: BeamNetConfig,
    pub train: TrainConfig,
    pub train_fraction: f64,
    /// Exact number of training samples; overrides `train_fraction` when set.
    pub train_samples: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 2024,
            scenario_a: ScenarioConfig::scenario_a(),
            scenario_b: ScenarioConfig::scenario_b(),
            channel: ChannelConfig::default(),
            visual_mode: VisualMode::Method1,
            proposals: ProposalConfig::default(),
            id: IdConfig::default(),
            id_train: IdTrainConfig::default(),
            id_eval_sequences: 200,
            tracker: TrackerConfig::default(),
            region_variant: RegionVariant::Fan,
            net: BeamNetConfig::default(),
            train: TrainConfig::default(),
            train_fraction: 0.7,
            train_samples: Some(1204),
        }
    }
}

impl ExperimentConfig {
    /// A scaled-down configuration for smoke tests and determinism checks.
    pub fn small() -> Self {
        let mut c = Self::default();
        c.scenario_a.sequences = 12;
        c.scenario_a.frames = 10;
        c.scenario_b.sequences = 4;
        c.scenario_b.frames = 10;
        c.id_eval_sequences = 10;
        c.id_train.epochs = 2;
        c.train.epochs = 2;
        c.train_samples = None;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported config schema {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.scenario_a.validate()?;
        self.scenario_b.validate()?;
        self.channel.validate()?;
        self.id.validate()?;
        self.tracker.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        if self.net.num_beams != self.channel.q {
            return invalid("network output size must equal the codebook size");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid("train fraction must lie in (0, 1)");
        }
        let total = self.scenario_a.sequences * self.scenario_a.frames;
        if let Some(n) = self.train_samples {
            if n == 0 || n >= total {
                return invalid(format!("cannot take {n} training samples from {total} frames"));
            }
        }
        if self.scenario_a.street.separation_frames + 1 < self.id.m_id.max(5) {
            return invalid("identification window exceeds the separated frames");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
