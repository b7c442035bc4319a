use serde::{Deserialize, Serialize};

use crate::error::{LfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Spatial super-resolution by `scale`.
    Ssr,
    /// Angular super-resolution from `a_in × a_in` corner views to
    /// `a_out × a_out`.
    Asr,
}

/// Architecture hyper-parameters; stored in checkpoints so a network can be
/// rebuilt from the file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub task: Task,
    /// Feature width of the trunk.
    pub channels: usize,
    /// Image channels in and out (1 for luma).
    pub image_channels: usize,
    /// Angular size of the SSR input and output.
    pub angular: usize,
    pub scale: usize,
    pub a_in: usize,
    pub a_out: usize,
    /// Angular sampling stride between the ASR input views.
    pub stride: usize,
    pub n_c42: usize,
    pub n_epix: usize,
    pub heads: usize,
    /// Maximum admitted EPI slope; `None` = unbounded.
    pub d_max: Option<f64>,
    /// Include the two virtual-slit branches in every C42 block.
    pub use_vsi: bool,
    /// SSR: add the per-view bicubic upsample of the input to the head.
    pub bicubic_skip: bool,
    /// ASR: overwrite the input positions of the output with the inputs.
    pub copy_inputs: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::ssr(2, 5)
    }
}

impl NetworkConfig {
    /// Full-size spatial network.
    pub fn ssr(scale: usize, angular: usize) -> Self {
        Self {
            task: Task::Ssr,
            channels: 64,
            image_channels: 1,
            angular,
            scale,
            a_in: 2,
            a_out: 7,
            stride: 6,
            n_c42: 6,
            n_epix: 6,
            heads: 4,
            d_max: Some(2.0),
            use_vsi: true,
            bicubic_skip: true,
            copy_inputs: false,
        }
    }

    /// Full-size angular network; `synthetic` selects the wider slope bound.
    pub fn asr(synthetic: bool) -> Self {
        Self {
            task: Task::Asr,
            d_max: Some(if synthetic { 18.0 } else { 6.0 }),
            ..Self::ssr(2, 2)
        }
    }

    /// Shrinks width and depth for quick experiments.
    pub fn toy(mut self, channels: usize, n_c42: usize, n_epix: usize) -> Self {
        self.channels = channels;
        self.n_c42 = n_c42;
        self.n_epix = n_epix;
        self.heads = self.heads.min(channels).max(1);
        while channels % self.heads != 0 {
            self.heads -= 1;
        }
        self
    }

    /// Angular size the trunk runs at.
    pub fn trunk_angular(&self) -> usize {
        match self.task {
            Task::Ssr => self.angular,
            Task::Asr => self.a_in,
        }
    }

    pub fn output_angular(&self) -> usize {
        match self.task {
            Task::Ssr => self.angular,
            Task::Asr => self.a_out,
        }
    }

    pub fn output_scale(&self) -> usize {
        match self.task {
            Task::Ssr => self.scale,
            Task::Asr => 1,
        }
    }

    pub fn d_max_value(&self) -> f64 {
        self.d_max.unwrap_or(f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LfError::config(m));
        if self.channels == 0 || self.image_channels == 0 || self.heads == 0 {
            return bad("channels, image_channels and heads must be positive".into());
        }
        if self.channels % self.heads != 0 {
            return bad(format!(
                "channels ({}) must be divisible by heads ({})",
                self.channels, self.heads
            ));
        }
        if let Some(d) = self.d_max {
            if !(d > 0.0) {
                return bad(format!("d_max must be positive, got {d}"));
            }
        }
        match self.task {
            Task::Ssr => {
                if !matches!(self.scale, 2 | 4) {
                    return bad(format!("scale must be 2 or 4, got {}", self.scale));
                }
                if self.angular == 0 {
                    return bad("angular must be positive".into());
                }
            }
            Task::Asr => {
                if self.a_in < 2 || self.a_out <= self.a_in {
                    return bad(format!(
                        "need 2 ≤ a_in < a_out, got {} and {}",
                        self.a_in, self.a_out
                    ));
                }
                if self.stride == 0 || (self.a_in - 1) * self.stride != self.a_out - 1 {
                    return bad(format!(
                        "input views at stride {} do not span {} output views",
                        self.stride, self.a_out
                    ));
                }
            }
        }
        Ok(())
    }
}
