use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::WorkingCorrelation;
use crate::error::Error;
use crate::lmm::{RandomEffectsSpec, SlopeCorrelation};

/// Screening procedures available to the benchmark and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ls-intercept")]
    LsIntercept,
    #[serde(rename = "ls-slope")]
    LsSlope,
    #[serde(rename = "sis")]
    Sis,
    #[serde(rename = "gees-cs")]
    GeesCs,
    #[serde(rename = "gees-ar1")]
    GeesAr1,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LsIntercept,
        Method::LsSlope,
        Method::Sis,
        Method::GeesCs,
        Method::GeesAr1,
    ];

    /// Name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            Method::LsIntercept => "ls-intercept",
            Method::LsSlope => "ls-slope",
            Method::Sis => "sis",
            Method::GeesCs => "gees-cs",
            Method::GeesAr1 => "gees-ar1",
        }
    }

    /// Random-effects structure of the likelihood methods.
    pub fn random_effects(self) -> Option<RandomEffectsSpec> {
        match self {
            Method::LsIntercept => Some(RandomEffectsSpec::Intercept),
            Method::LsSlope => Some(RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal)),
            _ => None,
        }
    }

    /// Working correlation of the GEES methods.
    pub fn working_correlation(self) -> Option<WorkingCorrelation> {
        match self {
            Method::Sis => Some(WorkingCorrelation::Independence),
            Method::GeesCs => Some(WorkingCorrelation::CompoundSymmetry),
            Method::GeesAr1 => Some(WorkingCorrelation::Ar1),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}
