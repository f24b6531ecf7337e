//! The black-box oracle, the indicator that characterizes the domain of
//! interest, and the four built-in test functions.

use crate::error::{Error, Result};

/// Value returned by the oracle. `Undefined` stands for an exit flag
/// (a crash, NaN or infinity) and is treated as `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalResult {
    Finite(f64),
    Undefined,
}

impl EvalResult {
    /// Maps any non-finite float to `Undefined`.
    pub fn from_value(v: f64) -> Self {
        if v.is_finite() {
            EvalResult::Finite(v)
        } else {
            EvalResult::Undefined
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            EvalResult::Finite(v) => Some(v),
            EvalResult::Undefined => None,
        }
    }
}

/// Indicator `Q(v) = 1` iff `lower <= v < upper` (or `<= upper` when the
/// upper bound is closed); undefined values are never accepted.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Indicator {
    pub lower: f64,
    pub upper: f64,
    pub upper_closed: bool,
}

impl Indicator {
    /// Half-open interval `[lower, upper)`.
    pub fn half_open(lower: f64, upper: f64) -> Result<Self> {
        Self::checked(lower, upper, false)
    }

    pub fn closed(lower: f64, upper: f64) -> Result<Self> {
        Self::checked(lower, upper, true)
    }

    /// Accepts every finite value.
    pub fn finite() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            upper_closed: false,
        }
    }

    fn checked(lower: f64, upper: f64, upper_closed: bool) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidInput(format!("indicator needs lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Self {
            lower,
            upper,
            upper_closed,
        })
    }

    pub fn accepts_value(&self, v: f64) -> bool {
        v.is_finite() && v >= self.lower && (v < self.upper || (self.upper_closed && v <= self.upper))
    }

    pub fn accepts(&self, v: EvalResult) -> bool {
        match v {
            EvalResult::Finite(x) => self.accepts_value(x),
            EvalResult::Undefined => false,
        }
    }
}

/// A function `[-1, 1]^d -> R ∪ {+inf}` that can only be evaluated
/// pointwise.
///
/// Implement this to plug an external simulator into the driver. Closures
/// `Fn(&[f64]) -> EvalResult` implement it directly.
pub trait BlackBox: Send + Sync {
    fn eval(&self, y: &[f64]) -> EvalResult;
}

impl<F> BlackBox for F
where
    F: Fn(&[f64]) -> EvalResult + Send + Sync,
{
    fn eval(&self, y: &[f64]) -> EvalResult {
        self(y)
    }
}

/// One of the built-in test functions `f_1 .. f_4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestFunction {
    id: u32,
    dim: usize,
}

impl TestFunction {
    pub fn new(id: u32, dim: usize) -> Result<Self> {
        if !(1..=4).contains(&id) {
            return Err(Error::UnknownFunction(id));
        }
        if dim == 0 || (id == 1 && dim < 2) {
            return Err(Error::InvalidInput(format!("f{id} is not defined for d = {dim}")));
        }
        Ok(Self { id, dim })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indicator(&self) -> Indicator {
        indicator_for(self.id).expect("id validated at construction")
    }
}

impl BlackBox for TestFunction {
    fn eval(&self, y: &[f64]) -> EvalResult {
        EvalResult::from_value(raw_value(self.id, y))
    }
}

fn raw_value(id: u32, y: &[f64]) -> f64 {
    let d = y.len() as f64;
    let sq: f64 = y.iter().map(|v| v * v).sum();
    match id {
        1 => {
            let r2 = y[0] * y[0] + y[1] * y[1];
            let s: f64 = y.iter().sum();
            ((10.0f64 / 7.0).powi(2) - 1.0 / r2) * (-s / (2.0 * d)).exp()
        }
        2 => (8.0 * sq).ln() - 2.0 * sq,
        3 => {
            let scale = 1.0 - (d - 2.0) / 100.0 * (d * d - 10.0 * d + 29.0);
            scale * (16.0 / d * sq).ln() - 4.0 / d * sq
        }
        4 => y
            .iter()
            .enumerate()
            .map(|(i, &yi)| {
                // 1-based coordinate number i + 1.
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let shift = sign / (i as f64 + 2.0);
                (d / 4.0) / (d / 4.0 + (yi + shift).powi(2))
            })
            .product(),
        _ => unreachable!("validated id"),
    }
}

/// Evaluates test function `id` at `y`, which must have length `d`.
pub fn eval_test_function(id: u32, y: &[f64], d: usize) -> Result<EvalResult> {
    let f = TestFunction::new(id, d)?;
    if y.len() != d {
        return Err(Error::InvalidInput(format!("point of length {} for d = {d}", y.len())));
    }
    Ok(f.eval(y))
}

/// Indicator of the domain of interest of test function `id`:
/// `[0, +inf)` for ids 1-3 and the closed interval `[0.18, 0.72]` for id 4.
pub fn indicator_for(id: u32) -> Result<Indicator> {
    match id {
        1..=3 => Indicator::half_open(0.0, f64::INFINITY),
        4 => Indicator::closed(0.18, 0.72),
        other => Err(Error::UnknownFunction(other)),
    }
}

/// An oracle bound to an indicator, counting every evaluation.
pub struct Problem<'a> {
    oracle: &'a dyn BlackBox,
    indicator: Indicator,
    evaluations: u64,
}

impl<'a> Problem<'a> {
    pub fn new(oracle: &'a dyn BlackBox, indicator: Indicator) -> Self {
        Self {
            oracle,
            indicator,
            evaluations: 0,
        }
    }

    pub fn evaluate(&mut self, y: &[f64]) -> EvalResult {
        self.evaluations += 1;
        self.oracle.eval(y)
    }

    pub fn indicator(&self) -> &Indicator {
        &self.indicator
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }
}
