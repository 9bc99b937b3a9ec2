use serde::{Deserialize, Serialize};

/// A real number stored as sign and log-magnitude.
///
/// Evidence quantities overflow `f64` for moderate `n`, so every special
/// function in this crate reports its result in this form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub log_magnitude: f64,
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };

    pub const ONE: LogValue = LogValue {
        log_magnitude: 0.0,
        sign: 1,
    };

    pub fn positive(log_magnitude: f64) -> Self {
        if log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue {
                log_magnitude,
                sign: 1,
            }
        }
    }

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Natural log of a positive value; `-inf` for zero.
    ///
    /// Panics on negative values, which no routine in this crate produces
    /// for a quantity whose log is taken.
    pub fn ln(&self) -> f64 {
        match self.sign {
            0 => f64::NEG_INFINITY,
            1 => self.log_magnitude,
            _ => panic!("log of a negative LogValue"),
        }
    }

    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    pub fn mul(self, other: LogValue) -> LogValue {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        LogValue {
            log_magnitude: self.log_magnitude + other.log_magnitude,
            sign: self.sign * other.sign,
        }
    }

    pub fn div(self, other: LogValue) -> LogValue {
        assert!(!other.is_zero(), "division by a zero LogValue");
        if self.is_zero() {
            return Self::ZERO;
        }
        LogValue {
            log_magnitude: self.log_magnitude - other.log_magnitude,
            sign: self.sign * other.sign,
        }
    }
}

/// `log(sum(exp(xs)))` with max-shift; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 / (1 + exp(-x)))`.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}
