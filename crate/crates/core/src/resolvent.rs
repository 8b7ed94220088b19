use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::BoxBounds;
use crate::point::Point;

/// Resolvent `(id + γA)⁻¹` of the maximally monotone part `A`.
///
/// `Identity` corresponds to `A ≡ 0`; `Box` to the normal cone of a box, whose
/// resolvent is the projection for every `γ > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResolventMap {
    Identity,
    Box(BoxBounds),
}

impl ResolventMap {
    pub fn is_identity(&self) -> bool {
        matches!(self, ResolventMap::Identity)
    }

    pub fn bounds(&self) -> Option<&BoxBounds> {
        match self {
            ResolventMap::Identity => None,
            ResolventMap::Box(b) => Some(b),
        }
    }

    pub fn apply(&self, gamma: f64, z: &Point) -> Result<Point> {
        if !(gamma > 0.0) {
            return Err(Error::param(format!("resolvent stepsize must be > 0, got {gamma}")));
        }
        if let ResolventMap::Box(b) = self {
            z.ensure_dim(b.dim())?;
        }
        Ok(self.apply_unchecked(z))
    }

    /// Applies the map without validating `γ` or the dimension.
    pub(crate) fn apply_unchecked(&self, z: &Point) -> Point {
        match self {
            ResolventMap::Identity => z.clone(),
            ResolventMap::Box(b) => b.clamp(z),
        }
    }
}

/// Resolvent application as a free function.
pub fn resolvent_apply(map: &ResolventMap, gamma: f64, z: &Point) -> Result<Point> {
    map.apply(gamma, z)
}
