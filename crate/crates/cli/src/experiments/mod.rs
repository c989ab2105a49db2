//! The six experiments. Each takes a concrete configuration, built from
//! [`Settings`] by `from_settings`, and returns an [`ExperimentReport`].

pub mod euler;
pub mod exact;
pub mod girsanov;
pub mod negativity;
pub mod operator_check;
pub mod simulate;

use crate::config::Settings;
use crate::report::ExperimentReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    ExactVsChaos,
    EulerStudy,
    Negativity,
    GirsanovCheck,
    OperatorCheck,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::ExactVsChaos => "exact-vs-chaos",
            Self::EulerStudy => "euler-study",
            Self::Negativity => "negativity",
            Self::GirsanovCheck => "girsanov-check",
            Self::OperatorCheck => "operator-check",
        }
    }

    pub fn run(self, s: &Settings) -> anyhow::Result<ExperimentReport> {
        match self {
            Self::Simulate => simulate::run(&simulate::SimulateConfig::from_settings(s)),
            Self::ExactVsChaos => exact::run(&exact::ExactConfig::from_settings(s)),
            Self::EulerStudy => euler::run(&euler::EulerConfig::from_settings(s)?),
            Self::Negativity => negativity::run(&negativity::NegativityConfig::from_settings(s)),
            Self::GirsanovCheck => girsanov::run(&girsanov::GirsanovConfig::from_settings(s)),
            Self::OperatorCheck => operator_check::run(&operator_check::OperatorCheckConfig::from_settings(s)),
        }
    }
}
