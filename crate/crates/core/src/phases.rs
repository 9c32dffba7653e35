//! Hooks for attributing training-step time to algorithm phases.
//!
//! The core crate has no clock; the caller supplies one through [`PhaseTimer`].

/// Phases of a training step, following the structure of the update loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Forward,
    Loss,
    ZoPerturb,
    ZoUpdate,
    BpBackward,
}

impl Phase {
    pub const ALL: [Phase; 5] =
        [Phase::Forward, Phase::Loss, Phase::ZoPerturb, Phase::ZoUpdate, Phase::BpBackward];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Forward => "forward",
            Phase::Loss => "loss",
            Phase::ZoPerturb => "zo_perturb",
            Phase::ZoUpdate => "zo_update",
            Phase::BpBackward => "bp_backward",
        }
    }
}

pub trait PhaseTimer {
    fn begin(&mut self, phase: Phase);
    fn end(&mut self, phase: Phase);
}

/// Timer that records nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTimer;

impl PhaseTimer for NoTimer {
    fn begin(&mut self, _: Phase) {}
    fn end(&mut self, _: Phase) {}
}

/// Runs `f` between `begin(phase)` and `end(phase)`.
pub(crate) fn timed<T>(timer: &mut dyn PhaseTimer, phase: Phase, f: impl FnOnce() -> T) -> T {
    timer.begin(phase);
    let out = f();
    timer.end(phase);
    out
}
