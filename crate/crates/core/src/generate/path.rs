use serde::{Deserialize, Serialize};

use crate::dataset::ConditionVector;
use crate::error::{Error, Result};

/// Piecewise-linear condition trajectory over normalized time `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, ConditionVector)>", into = "Vec<(f64, ConditionVector)>")]
pub struct ConditionPath {
    knots: Vec<(f64, ConditionVector)>,
}

impl ConditionPath {
    /// Knot times must rise strictly from 0 to 1.
    pub fn new(knots: Vec<(f64, ConditionVector)>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidInput(format!("condition path: {m}")));
        if knots.len() < 2 {
            return bad(format!("needs at least 2 knots, got {}", knots.len()));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return bad("first knot must be at 0 and last at 1".into());
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return bad("knot times must be strictly increasing".into());
        }
        if knots.iter().any(|(_, c)| c.0.iter().any(|v| !v.is_finite())) {
            return bad("conditions must be finite".into());
        }
        Ok(ConditionPath { knots })
    }

    pub fn constant(c: ConditionVector) -> Self {
        ConditionPath { knots: vec![(0.0, c), (1.0, c)] }
    }

    pub fn linear(a: ConditionVector, b: ConditionVector) -> Self {
        ConditionPath { knots: vec![(0.0, a), (1.0, b)] }
    }

    pub fn knots(&self) -> &[(f64, ConditionVector)] {
        &self.knots
    }

    /// Conditions at fraction `t`, clamped to `[0, 1]`. Knot times return the
    /// knot exactly.
    pub fn at(&self, t: f64) -> ConditionVector {
        let t = t.clamp(0.0, 1.0);
        let k = self.knots.partition_point(|(kt, _)| *kt <= t);
        if k == 0 {
            return self.knots[0].1;
        }
        let (t0, c0) = self.knots[k - 1];
        if t0 == t || k == self.knots.len() {
            return c0;
        }
        let (t1, c1) = self.knots[k];
        c0.lerp(&c1, (t - t0) / (t1 - t0))
    }
}

impl TryFrom<Vec<(f64, ConditionVector)>> for ConditionPath {
    type Error = Error;

    fn try_from(k: Vec<(f64, ConditionVector)>) -> Result<Self> {
        ConditionPath::new(k)
    }
}

impl From<ConditionPath> for Vec<(f64, ConditionVector)> {
    fn from(p: ConditionPath) -> Self {
        p.knots
    }
}
