//! The timed transition function and its delay sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::structure::{BoxId, Location, LocationKind, CALL_ACTION, RETURN_ACTION};
use crate::valuation::Valuation;

use super::constraint::{DelaySet, Interval};
use super::RhaModel;

/// A pending call: the box and the full valuation when it was entered.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub boxed: BoxId,
    pub valuation: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RhaConfiguration {
    pub context: Vec<Frame>,
    pub location: Location,
    pub valuation: Valuation,
}

impl RhaConfiguration {
    pub fn top(location: Location, valuation: Valuation) -> Self {
        RhaConfiguration {
            context: Vec::new(),
            location,
            valuation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimedAction {
    pub delay: Rational,
    pub action: String,
}

impl TimedAction {
    pub fn new(delay: Rational, action: impl Into<String>) -> Self {
        TimedAction {
            delay,
            action: action.into(),
        }
    }

    pub fn instant(action: impl Into<String>) -> Self {
        Self::new(Rational::zero(), action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("invariant of {location} violated {when}: {atom}")]
    InvariantViolation {
        location: String,
        when: &'static str,
        atom: String,
    },
    #[error("guard of {action} at {location} unsatisfied after the delay: {atom}")]
    GuardUnsatisfied {
        location: String,
        action: String,
        atom: String,
    },
    #[error("{location} is terminal: exit with empty context")]
    Terminal { location: String },
    #[error("no transition {action} at {location}")]
    NoMove { location: String, action: String },
    #[error("moves at {location} must take zero time")]
    NonZeroDelay { location: String },
    #[error("negative delay")]
    NegativeDelay,
}

/// Actions with a successor at `config`, ignoring timing.
pub fn available_actions(model: &RhaModel, config: &RhaConfiguration) -> Vec<String> {
    let s = model.structure();
    match s.kind(config.location) {
        LocationKind::CallPort => vec![CALL_ACTION.to_string()],
        LocationKind::Exit if config.context.is_empty() => Vec::new(),
        LocationKind::Exit => vec![RETURN_ACTION.to_string()],
        LocationKind::Internal => s
            .outgoing(config.location)
            .iter()
            .map(|&t| s.transition(t).action.clone())
            .collect(),
    }
}

/// One timed transition.
///
/// The invariant along `[0, t]` is checked at the two endpoints only, which
/// is exact because rectangular sets are convex and flows are constant in a
/// location. The successor must satisfy its own invariant.
pub fn timed_step(
    model: &RhaModel,
    config: &RhaConfiguration,
    mv: &TimedAction,
) -> Result<RhaConfiguration, StepError> {
    let s = model.structure();
    let names = model.variables();
    let loc_name = || s.location_name(config.location);
    if mv.delay.is_negative() {
        return Err(StepError::NegativeDelay);
    }
    let next = match s.kind(config.location) {
        LocationKind::CallPort => {
            let Location::Call(b, en) = config.location else { unreachable!() };
            if mv.action != CALL_ACTION {
                return Err(StepError::NoMove {
                    location: loc_name(),
                    action: mv.action.clone(),
                });
            }
            if !mv.delay.is_zero() {
                return Err(StepError::NonZeroDelay { location: loc_name() });
            }
            let mut context = config.context.clone();
            context.push(Frame {
                boxed: b,
                valuation: config.valuation.clone(),
            });
            RhaConfiguration {
                context,
                location: Location::Node(en),
                valuation: config.valuation.clone(),
            }
        }
        LocationKind::Exit => {
            let Location::Node(ex) = config.location else { unreachable!() };
            let Some((frame, rest)) = config.context.split_last() else {
                return Err(StepError::Terminal { location: loc_name() });
            };
            if mv.action != RETURN_ACTION {
                return Err(StepError::NoMove {
                    location: loc_name(),
                    action: mv.action.clone(),
                });
            }
            if !mv.delay.is_zero() {
                return Err(StepError::NonZeroDelay { location: loc_name() });
            }
            let mut valuation = config.valuation.clone();
            valuation.overwrite_from(model.pass_by_value(frame.boxed), &frame.valuation);
            RhaConfiguration {
                context: rest.to_vec(),
                location: Location::Ret(frame.boxed, ex),
                valuation,
            }
        }
        LocationKind::Internal => {
            let Some(t) = s.find_transition(config.location, &mv.action) else {
                return Err(StepError::NoMove {
                    location: loc_name(),
                    action: mv.action.clone(),
                });
            };
            let inv = model.invariant(config.location);
            if let Some(v) = inv.first_violation(&config.valuation) {
                return Err(StepError::InvariantViolation {
                    location: loc_name(),
                    when: "before the delay",
                    atom: v.describe(names),
                });
            }
            let after = config.valuation.advance(&model.flow(config.location), &mv.delay);
            if let Some(v) = inv.first_violation(&after) {
                return Err(StepError::InvariantViolation {
                    location: loc_name(),
                    when: "during the delay",
                    atom: v.describe(names),
                });
            }
            if let Some(v) = model.guard(t).first_violation(&after) {
                return Err(StepError::GuardUnsatisfied {
                    location: loc_name(),
                    action: mv.action.clone(),
                    atom: v.describe(names),
                });
            }
            let mut valuation = after;
            valuation.reset(model.reset(t));
            RhaConfiguration {
                context: config.context.clone(),
                location: s.transition(t).to,
                valuation,
            }
        }
    };
    if let Some(v) = model.invariant(next.location).first_violation(&next.valuation) {
        return Err(StepError::InvariantViolation {
            location: s.location_name(next.location),
            when: "on arrival",
            atom: v.describe(names),
        });
    }
    Ok(next)
}

/// `{ t >= 0 : timed_step(config, (t, action)) succeeds }`.
pub fn enabled_delays(model: &RhaModel, config: &RhaConfiguration, action: &str) -> DelaySet {
    let s = model.structure();
    let instant = |ok: bool| {
        if ok {
            DelaySet::from_interval(Interval::point(Rational::zero()))
        } else {
            DelaySet::empty()
        }
    };
    match s.kind(config.location) {
        LocationKind::CallPort | LocationKind::Exit => {
            instant(timed_step(model, config, &TimedAction::instant(action)).is_ok())
        }
        LocationKind::Internal => {
            let Some(t) = s.find_transition(config.location, action) else {
                return DelaySet::empty();
            };
            let inv = model.invariant(config.location);
            if !inv.holds(&config.valuation) {
                return DelaySet::empty();
            }
            let rates = model.flow(config.location);
            let reset = model.reset(t);
            // The target invariant sees reset variables as constant 0.
            let mut reset_base = config.valuation.clone();
            reset_base.reset(reset);
            let mut reset_rates = rates.clone();
            for i in reset.iter() {
                reset_rates[i] = Rational::zero();
            }
            let iv = inv
                .delay_interval(&config.valuation, &rates)
                .intersect(&model.guard(t).delay_interval(&config.valuation, &rates))
                .intersect(
                    &model
                        .invariant(s.transition(t).to)
                        .delay_interval(&reset_base, &reset_rates),
                );
            DelaySet::from_interval(iv)
        }
    }
}

/// A finite timed run `c0 (t1,a1) c1 ... (tn,an) cn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedRun {
    pub start: RhaConfiguration,
    pub steps: Vec<(TimedAction, RhaConfiguration)>,
}

impl TimedRun {
    pub fn new(start: RhaConfiguration) -> Self {
        TimedRun {
            start,
            steps: Vec::new(),
        }
    }

    pub fn last(&self) -> &RhaConfiguration {
        self.steps.last().map(|(_, c)| c).unwrap_or(&self.start)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn configurations(&self) -> impl Iterator<Item = &RhaConfiguration> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|(_, c)| c))
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(mut self, other: TimedRun) -> TimedRun {
        debug_assert_eq!(self.last(), &other.start);
        self.steps.extend(other.steps);
        self
    }
}

/// `Time(r)`: the sum of the delays.
pub fn run_duration(run: &TimedRun) -> Rational {
    run.steps.iter().map(|(m, _)| &m.delay).sum()
}
