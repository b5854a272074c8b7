use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a projector head: a linear map, optionally followed by a
/// normalization and non-linearity. Only the widths matter here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub batch_norm: bool,
    pub relu: bool,
}

/// Declared layer widths of the high-dimensional projector head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectorShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl Default for ProjectorShape {
    /// 2048 -> 4096 -> 8192 with BN + ReLU between the linear maps.
    fn default() -> Self {
        ProjectorShape {
            in_dim: 2048,
            out_dim: 8192,
            layers: vec![
                LayerSpec { in_dim: 2048, out_dim: 4096, batch_norm: true, relu: true },
                LayerSpec { in_dim: 4096, out_dim: 8192, batch_norm: true, relu: false },
            ],
        }
    }
}

impl ProjectorShape {
    /// Checks that the layers chain from `in_dim` to `out_dim` and that the
    /// head expands the feature.
    pub fn validate(&self) -> Result<()> {
        if self.in_dim >= self.out_dim {
            return Err(Error::Config(format!(
                "projector must expand: {} -> {}",
                self.in_dim, self.out_dim
            )));
        }
        let first = self.layers.first().ok_or_else(|| Error::Config("projector has no layers".into()))?;
        if first.in_dim != self.in_dim {
            return Err(Error::Config(format!(
                "first layer takes {} but projector input is {}",
                first.in_dim, self.in_dim
            )));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Config(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        let last = self.layers.last().expect("non-empty");
        if last.out_dim != self.out_dim {
            return Err(Error::Config(format!(
                "last layer emits {} but projector output is {}",
                last.out_dim, self.out_dim
            )));
        }
        Ok(())
    }

    /// Output width for an input of width `dim`.
    pub fn output_dim_for(&self, dim: usize) -> Result<usize> {
        self.validate()?;
        if dim != self.in_dim {
            return Err(Error::Config(format!(
                "projector expects {}-dim input, got {dim}",
                self.in_dim
            )));
        }
        Ok(self.out_dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_maps_2048_to_8192() {
        let p = ProjectorShape::default();
        assert_eq!(p.output_dim_for(2048).unwrap(), 8192);
        assert!(p.output_dim_for(1024).is_err());
    }

    #[test]
    fn broken_chains_are_rejected() {
        let mut p = ProjectorShape::default();
        p.layers[1].in_dim = 1000;
        assert!(p.validate().is_err());
        let shrink = ProjectorShape {
            in_dim: 8192,
            out_dim: 2048,
            layers: vec![LayerSpec { in_dim: 8192, out_dim: 2048, batch_norm: false, relu: false }],
        };
        assert!(shrink.validate().is_err());
    }
}
