use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Phase {
    Background = 1,
    LoadData = 2,
    Coding = 3,
    Review = 4,
    Themes = 5,
    Report = 6,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Background,
        Phase::LoadData,
        Phase::Coding,
        Phase::Review,
        Phase::Themes,
        Phase::Report,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Result<Phase> {
        Phase::ALL
            .get(usize::from(n).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no phase {n}; phases are 1 to 6")))
    }

    fn index(self) -> usize {
        self as usize - 1
    }

    pub fn upstream(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| *p < self)
    }

    pub fn downstream(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| *p > self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Background => "background_research",
            Phase::LoadData => "loading_data",
            Phase::Coding => "coding",
            Phase::Review => "reviewing_codes",
            Phase::Themes => "generating_themes",
            Phase::Report => "report",
        }
    }
}

impl From<Phase> for u8 {
    fn from(p: Phase) -> u8 {
        p.number()
    }
}

impl TryFrom<u8> for Phase {
    type Error = Error;

    fn try_from(n: u8) -> Result<Phase> {
        Phase::from_number(n)
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Reported status. `Stale` is never stored; it is derived from the flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseStatus {
    Empty,
    MachineProposed,
    HumanEdited,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Machine,
    Human,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseState {
    pub phase: Phase,
    /// Stored status, one of empty / machine_proposed / human_edited.
    pub status: PhaseStatus,
    pub stale: bool,
    pub produced_by: Option<Provenance>,
    pub updated_at: Option<i64>,
}

impl PhaseState {
    pub fn empty(phase: Phase) -> Self {
        PhaseState {
            phase,
            status: PhaseStatus::Empty,
            stale: false,
            produced_by: None,
            updated_at: None,
        }
    }

    pub fn effective_status(&self) -> PhaseStatus {
        if self.stale {
            PhaseStatus::Stale
        } else {
            self.status
        }
    }

    pub fn is_empty(&self) -> bool {
        self.status == PhaseStatus::Empty
    }

    pub(crate) fn machine_produced(&mut self, at: i64) {
        self.status = PhaseStatus::MachineProposed;
        self.stale = false;
        self.produced_by = Some(Provenance::Machine);
        self.updated_at = Some(at);
    }

    pub(crate) fn human_edited(&mut self, at: i64) {
        self.status = PhaseStatus::HumanEdited;
        self.produced_by = Some(match self.produced_by {
            None | Some(Provenance::Human) => Provenance::Human,
            Some(_) => Provenance::Mixed,
        });
        self.updated_at = Some(at);
    }
}

/// Fixed-size table of per-phase states, indexed by [`Phase`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PhaseState>", into = "Vec<PhaseState>")]
pub struct PhaseTable([PhaseState; 6]);

impl Default for PhaseTable {
    fn default() -> Self {
        PhaseTable(Phase::ALL.map(PhaseState::empty))
    }
}

impl PhaseTable {
    pub fn get(&self, p: Phase) -> &PhaseState {
        &self.0[p.index()]
    }

    pub(crate) fn get_mut(&mut self, p: Phase) -> &mut PhaseState {
        &mut self.0[p.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PhaseState> {
        self.0.iter()
    }

    /// Marks every later phase that holds a payload stale and returns the
    /// ones that were not stale before.
    pub fn propagate_forward(&mut self, changed: Phase) -> Vec<Phase> {
        let mut newly = Vec::new();
        for q in changed.downstream() {
            let s = self.get_mut(q);
            if !s.is_empty() && !s.stale {
                s.stale = true;
                newly.push(q);
            }
        }
        newly
    }

    pub fn stale_phases(&self) -> Vec<Phase> {
        self.0.iter().filter(|s| s.stale).map(|s| s.phase).collect()
    }
}

impl From<PhaseTable> for Vec<PhaseState> {
    fn from(t: PhaseTable) -> Self {
        t.0.to_vec()
    }
}

impl TryFrom<Vec<PhaseState>> for PhaseTable {
    type Error = String;

    fn try_from(v: Vec<PhaseState>) -> std::result::Result<Self, String> {
        let arr: [PhaseState; 6] = v
            .try_into()
            .map_err(|v: Vec<PhaseState>| format!("expected 6 phase states, found {}", v.len()))?;
        for (i, s) in arr.iter().enumerate() {
            if s.phase.index() != i {
                return Err(format!("phase state {} out of order", s.phase));
            }
            if s.status == PhaseStatus::Stale {
                return Err("stored status must not be `stale`".into());
            }
        }
        Ok(PhaseTable(arr))
    }
}
