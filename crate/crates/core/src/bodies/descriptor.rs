//! Serializable description of a body, sufficient to rebuild it bit-for-bit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    EuclideanBall, EvalMode, IntersectionBody, PolytopeHull, ScaledCrossPolytope, Stage, SupportBody,
    SymmetrizedBody,
};
use crate::linalg::{OrthogonalBasis, UnitVector};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyDescriptor {
    Ball {
        n: usize,
        radius: f64,
    },
    Hull {
        n: usize,
        vertices: Vec<Vec<f64>>,
    },
    CrossPolytope {
        n: usize,
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        frame: Option<OrthogonalBasis>,
    },
    Intersection {
        n: usize,
        t: f64,
    },
    Symmetrized {
        n: usize,
        base: Box<BodyDescriptor>,
        stages: Vec<StageDescriptor>,
        mode: EvalMode,
        exact_cap: usize,
        exact_tail: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StageDescriptor {
    Frame { basis: OrthogonalBasis, active: usize },
    Reflection { direction: UnitVector },
}

fn same_dim(declared: usize, actual: usize) -> Result<()> {
    if declared == actual {
        Ok(())
    } else {
        Err(Error::Descriptor(format!("declared dimension {declared}, contents have {actual}")))
    }
}

impl BodyDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            BodyDescriptor::Ball { n, .. }
            | BodyDescriptor::Hull { n, .. }
            | BodyDescriptor::CrossPolytope { n, .. }
            | BodyDescriptor::Intersection { n, .. }
            | BodyDescriptor::Symmetrized { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn SupportBody>> {
        Ok(match self {
            BodyDescriptor::Symmetrized { .. } => Arc::new(self.build_symmetrized()?),
            BodyDescriptor::Ball { n, radius } => Arc::new(EuclideanBall::new(*n, *radius)?),
            BodyDescriptor::Hull { n, vertices } => {
                let hull = PolytopeHull::new(vertices)?;
                same_dim(*n, hull.dim())?;
                Arc::new(hull)
            }
            BodyDescriptor::CrossPolytope { n, scale, frame } => {
                Arc::new(ScaledCrossPolytope::new(*n, *scale, frame.clone())?)
            }
            BodyDescriptor::Intersection { n, t } => Arc::new(IntersectionBody::new(*n, *t)?),
        })
    }

    /// Rebuilds a symmetrization stack; any other body becomes an empty stack.
    pub fn build_symmetrized(&self) -> Result<SymmetrizedBody> {
        match self {
            BodyDescriptor::Symmetrized {
                n,
                base,
                stages,
                mode,
                exact_cap,
                exact_tail,
            } => {
                let base = base.build()?;
                same_dim(*n, base.dim())?;
                let stages = stages
                    .iter()
                    .map(|s| match s {
                        StageDescriptor::Frame { basis, active } => Stage::Frame {
                            basis: Arc::new(basis.clone()),
                            active: *active,
                        },
                        StageDescriptor::Reflection { direction } => Stage::Reflection(direction.clone()),
                    })
                    .collect();
                SymmetrizedBody::new(base, *mode)?
                    .with_exact_cap(*exact_cap)?
                    .with_exact_tail(*exact_tail)?
                    .replace_stages(stages)
            }
            other => SymmetrizedBody::new(other.build()?, EvalMode::Exact),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Descriptor(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Descriptor(e.to_string()))
    }
}
