use std::sync::Arc;

use crate::meanfield::FeedbackLaw;

/// A control of the form `slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Feedback control affine in the own state. `mean` is the population
/// average the controller observes: the empirical average in the finite
/// game, the deterministic mean path in the representative problem.
pub trait FeedbackStrategy: Send + Sync {
    fn affine(&self, t: f64, mean: f64) -> Affine;

    fn control(&self, t: f64, x: f64, mean: f64) -> f64 {
        self.affine(t, mean).eval(x)
    }

    fn label(&self) -> String;
}

pub type SharedStrategy = Arc<dyn FeedbackStrategy>;

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroControl;

impl FeedbackStrategy for ZeroControl {
    fn affine(&self, _t: f64, _mean: f64) -> Affine {
        Affine {
            slope: 0.0,
            intercept: 0.0,
        }
    }

    fn label(&self) -> String {
        "zero".into()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantControl(pub f64);

impl FeedbackStrategy for ConstantControl {
    fn affine(&self, _t: f64, _mean: f64) -> Affine {
        Affine {
            slope: 0.0,
            intercept: self.0,
        }
    }

    fn label(&self) -> String {
        format!("constant({})", self.0)
    }
}

impl FeedbackStrategy for FeedbackLaw {
    fn affine(&self, t: f64, _mean: f64) -> Affine {
        let (slope, intercept) = FeedbackLaw::affine(self, t);
        Affine { slope, intercept }
    }

    fn label(&self) -> String {
        "theta_star".into()
    }
}

/// `factor * inner`.
#[derive(Clone)]
pub struct Scaled {
    pub inner: SharedStrategy,
    pub factor: f64,
}

impl FeedbackStrategy for Scaled {
    fn affine(&self, t: f64, mean: f64) -> Affine {
        let a = self.inner.affine(t, mean);
        Affine {
            slope: self.factor * a.slope,
            intercept: self.factor * a.intercept,
        }
    }

    fn label(&self) -> String {
        format!("{}*{}", self.factor, self.inner.label())
    }
}

/// `inner + shift`.
#[derive(Clone)]
pub struct Shifted {
    pub inner: SharedStrategy,
    pub shift: f64,
}

impl FeedbackStrategy for Shifted {
    fn affine(&self, t: f64, mean: f64) -> Affine {
        let a = self.inner.affine(t, mean);
        Affine {
            slope: a.slope,
            intercept: a.intercept + self.shift,
        }
    }

    fn label(&self) -> String {
        format!("{}{:+}", self.inner.label(), self.shift)
    }
}

/// The equilibrium law re-centred on the observed average instead of the
/// deterministic mean path.
#[derive(Debug, Clone)]
pub struct Retargeted(pub FeedbackLaw);

impl FeedbackStrategy for Retargeted {
    fn affine(&self, t: f64, mean: f64) -> Affine {
        let law = &self.0;
        let slope = -law.c * law.a.eval(t) - 0.5 * law.rho;
        Affine {
            slope,
            intercept: -slope * mean - 0.5 * law.c * law.b.eval(t),
        }
    }

    fn label(&self) -> String {
        "retargeted".into()
    }
}
