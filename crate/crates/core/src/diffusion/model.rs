use std::fs;
use std::path::Path;

use ndarray::ArrayViewMut1;
use serde::{Deserialize, Serialize};

use super::schedule::{time_embedding, NoiseSchedule};
use crate::belief::StateImage;
use crate::env::{FovPreset, Grid};
use crate::error::{Error, Result};
use crate::nn::{self, Network};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJECTORY_FILE: &str = "trajectory.model";
pub const RETURN_FILE: &str = "return.model";
pub const DISTANCE_FILE: &str = "distance.model";

/// Shapes shared by the three networks.
///
/// Conditioned inputs are `[tau (H*n), mean (n), var / sigma^2 (n), emb(t)]`;
/// the distance network sees `tau` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelLayout {
    pub grid: Grid,
    pub horizon: usize,
    pub embed_dim: usize,
    /// Observation noise the models were trained for; the variance channel
    /// is divided by `sigma^2` before entering a network.
    pub sigma: f64,
}

impl ModelLayout {
    pub fn new(grid: Grid, horizon: usize, embed_dim: usize, sigma: f64) -> Result<Self> {
        if horizon == 0 || embed_dim == 0 || embed_dim % 2 != 0 || !(sigma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad model layout: horizon {horizon}, embed_dim {embed_dim}, sigma {sigma}"
            )));
        }
        Ok(Self {
            grid,
            horizon,
            embed_dim,
            sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.cells()
    }

    pub fn frame_len(&self) -> usize {
        self.horizon * self.n()
    }

    pub fn state_len(&self) -> usize {
        2 * self.n()
    }

    pub fn conditioned_len(&self) -> usize {
        self.frame_len() + self.state_len() + self.embed_dim
    }

    /// Network-ready state features from a raw state image.
    pub fn state_features(&self, state: &StateImage) -> Result<Vec<f64>> {
        self.features_from_raw(&state.data)
    }

    pub fn features_from_raw(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.state_len() {
            return Err(Error::DimensionMismatch {
                context: "state image",
                expected: self.state_len(),
                got: raw.len(),
            });
        }
        let n = self.n();
        let s2 = self.sigma * self.sigma;
        let mut out = raw.to_vec();
        out[n..].iter_mut().for_each(|v| *v /= s2);
        Ok(out)
    }

    /// Writes one conditioned input row.
    pub fn fill_row(&self, mut row: ArrayViewMut1<'_, f64>, tau: &[f64], features: &[f64], emb: &[f64]) {
        let (f, s) = (self.frame_len(), self.state_len());
        let row = row.as_slice_mut().expect("contiguous row");
        row[..f].copy_from_slice(tau);
        row[f..f + s].copy_from_slice(features);
        row[f + s..].copy_from_slice(emb);
    }

    pub fn embedding(&self, t: usize) -> Vec<f64> {
        time_embedding(t, self.embed_dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub layout: ModelLayout,
    pub t_diff: usize,
    pub schedule: String,
    /// Frame coding; always `"pm1"` (unsensed -1, sensed +1).
    pub coding: String,
    pub fov: FovPreset,
    pub return_noising: bool,
    pub gamma: f64,
    pub model_format_version: u32,
}

/// The trajectory, return and distance networks with their metadata.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub manifest: BundleManifest,
    pub schedule: NoiseSchedule,
    pub trajectory: Network,
    pub returns: Network,
    pub distance: Network,
}

impl ModelBundle {
    pub fn new(
        manifest: BundleManifest,
        trajectory: Network,
        returns: Network,
        distance: Network,
    ) -> Result<Self> {
        let schedule = NoiseSchedule::cosine(manifest.t_diff)?;
        let bundle = Self {
            manifest,
            schedule,
            trajectory,
            returns,
            distance,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn layout(&self) -> &ModelLayout {
        &self.manifest.layout
    }

    fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::format(
                "model bundle",
                format!("unsupported format version {}", m.format_version),
            ));
        }
        if m.schedule != "cosine" || m.coding != "pm1" {
            return Err(Error::format(
                "model bundle",
                format!("unsupported schedule/coding {}/{}", m.schedule, m.coding),
            ));
        }
        let l = &m.layout;
        let checks = [
            ("trajectory input", &self.trajectory, l.conditioned_len(), l.frame_len()),
            ("return input", &self.returns, l.conditioned_len(), 1),
            ("distance input", &self.distance, l.frame_len(), 1),
        ];
        for (context, net, input, output) in checks {
            if net.input_dim() != input || net.output_dim() != output {
                return Err(Error::format(
                    "model bundle",
                    format!(
                        "{context}: network is {}->{}, layout needs {input}->{output}",
                        net.input_dim(),
                        net.output_dim()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::format("model bundle", e.to_string()))?;
        fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
        nn::save_model(&self.trajectory, &dir.join(TRAJECTORY_FILE))?;
        nn::save_model(&self.returns, &dir.join(RETURN_FILE))?;
        nn::save_model(&self.distance, &dir.join(DISTANCE_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: BundleManifest = serde_json::from_str(&text)
            .map_err(|e| Error::format("model bundle manifest", e.to_string()))?;
        Self::new(
            manifest,
            nn::load_model(&dir.join(TRAJECTORY_FILE))?,
            nn::load_model(&dir.join(RETURN_FILE))?,
            nn::load_model(&dir.join(DISTANCE_FILE))?,
        )
    }
}
