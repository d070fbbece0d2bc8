//! Gauss-Legendre rules mapped onto `[t, T]`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{domain, Result};

pub const DEFAULT_QUAD_NODES: usize = 32;

#[derive(Debug, Clone)]
pub struct Quadrature {
    pairs: Box<[(f64, f64)]>,
}

impl Quadrature {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return domain(format!("quadrature needs at least 2 nodes, got {nodes}"));
        }
        let rule = GaussLegendre::new(NonZeroUsize::new(nodes).expect("checked above"));
        Ok(Self { pairs: rule.into_node_weight_pairs() })
    }

    /// Shared 32-node rule.
    pub fn standard() -> &'static Self {
        static RULE: OnceLock<Quadrature> = OnceLock::new();
        RULE.get_or_init(|| Self::new(DEFAULT_QUAD_NODES).expect("default node count is valid"))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Nodes and weights transported from `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}
