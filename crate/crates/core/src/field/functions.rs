//! Analytic test functions used by the studies.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    /// Gaussian bump centred at (10, 10) on [5, 15]^2.
    U1,
    /// Sharp tanh front on [-1, 1]^2.
    U2,
    /// Wide Gaussian plus small-scale sine waves on [5, 15]^2.
    U3,
}

impl TestFunction {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            TestFunction::U1 => (-1.5 * ((x - 10.0).powi(2) + (y - 10.0).powi(2))).exp(),
            TestFunction::U2 => (100.0 * (y + 0.3 * (-2.0 * x).sin())).tanh(),
            TestFunction::U3 => {
                12.0 * (-0.3 * ((x - 10.0).powi(2) + (y - 10.0).powi(2))).exp() + (2.0 * x).sin() * (2.0 * y).sin()
            }
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            TestFunction::U1 | TestFunction::U3 => Domain::square(5.0, 15.0),
            TestFunction::U2 => Domain::square(-1.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::U1 => "u1",
            TestFunction::U2 => "u2",
            TestFunction::U3 => "u3",
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "u1" => Ok(TestFunction::U1),
            "u2" => Ok(TestFunction::U2),
            "u3" => Ok(TestFunction::U3),
            other => Err(Error::Config(format!("unknown test function `{other}`"))),
        }
    }
}

/// Closed form and domain for a function name.
pub fn test_function(name: &str) -> Result<(impl Fn(f64, f64) -> f64, Domain)> {
    let f: TestFunction = name.parse()?;
    Ok((move |x, y| f.eval(x, y), f.domain()))
}
