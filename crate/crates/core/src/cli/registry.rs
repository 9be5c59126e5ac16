// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioId {
    Fig1Splitter,
    Fig2Arrangements,
    Fig3Interferometer,
    Fig4Open,
    Fig4Absorber,
    SpinMemory,
    Undo,
    Steering,
    Bet,
    Decoherence,
    BohmCrossing,
    BohmBubble,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 12] = [
        ScenarioId::Fig1Splitter,
        ScenarioId::Fig2Arrangements,
        ScenarioId::Fig3Interferometer,
        ScenarioId::Fig4Open,
        ScenarioId::Fig4Absorber,
        ScenarioId::SpinMemory,
        ScenarioId::Undo,
        ScenarioId::Steering,
        ScenarioId::Bet,
        ScenarioId::Decoherence,
        ScenarioId::BohmCrossing,
        ScenarioId::BohmBubble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Fig1Splitter => "fig1_splitter",
            ScenarioId::Fig2Arrangements => "fig2_arrangements",
            ScenarioId::Fig3Interferometer => "fig3_interferometer",
            ScenarioId::Fig4Open => "fig4_open",
            ScenarioId::Fig4Absorber => "fig4_absorber",
            ScenarioId::SpinMemory => "spin_memory",
            ScenarioId::Undo => "undo",
            ScenarioId::Steering => "steering",
            ScenarioId::Bet => "bet",
            ScenarioId::Decoherence => "decoherence",
            ScenarioId::BohmCrossing => "bohm_crossing",
            ScenarioId::BohmBubble => "bohm_bubble",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioId::Fig1Splitter => "single splitter with two detectors and an observer",
            ScenarioId::Fig2Arrangements => "one output escapes, the other is split again",
            ScenarioId::Fig3Interferometer => "closed interferometer, all neutrons at D1",
            ScenarioId::Fig4Open => "second splitter removed",
            ScenarioId::Fig4Absorber => "second splitter removed, screen on either arm",
            ScenarioId::SpinMemory => "path marked in the spin, kept and erased",
            ScenarioId::Undo => "measurement followed by its time reversal",
            ScenarioId::Steering => "range of detection probabilities an adversary world can reach",
            ScenarioId::Bet => "accept or reject an offered bet under worst-case steering",
            ScenarioId::Decoherence => "local and nonlocal records coupled to environment bits",
            ScenarioId::BohmCrossing => "pilot-wave trajectory through the crossing region",
            ScenarioId::BohmBubble => "pilot-wave trajectory with slow bubble-chamber markers",
        }
    }

    /// Scenarios built on a tracked circuit with a detection stage.
    pub fn is_interferometer(self) -> bool {
        matches!(
            self,
            ScenarioId::Fig1Splitter
                | ScenarioId::Fig2Arrangements
                | ScenarioId::Fig3Interferometer
                | ScenarioId::Fig4Open
                | ScenarioId::Fig4Absorber
                | ScenarioId::SpinMemory
        )
    }

    pub fn is_bohm(self) -> bool {
        matches!(self, ScenarioId::BohmCrossing | ScenarioId::BohmBubble)
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| CliError::UnknownScenario(s.to_string()))
    }
}

impl Serialize for ScenarioId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}
