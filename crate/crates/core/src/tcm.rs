//! Two-counter (Minsky) machines.
//!
//! Text format, one instruction per line, labels numbered in order:
//!
//! ```text
//! L0: INC c1 GOTO L1
//! L1: IFZ c1 THEN L3 ELSE L2
//! L2: DEC c1 GOTO L1
//! L3: HALT
//! ```
//!
//! Counters are written `c1`/`c2` (or `c`/`d`); `#` starts a comment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Counter {
    #[serde(rename = "c1", alias = "c")]
    C1,
    #[serde(rename = "c2", alias = "d")]
    C2,
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Counter::C1 => "c1",
            Counter::C2 => "c2",
        })
    }
}

impl FromStr for Counter {
    type Err = TcmError;
    fn from_str(s: &str) -> Result<Self, TcmError> {
        match s.to_ascii_lowercase().as_str() {
            "c1" | "c" => Ok(Counter::C1),
            "c2" | "d" => Ok(Counter::C2),
            _ => Err(TcmError::Parse {
                line: 0,
                message: format!("unknown counter {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Instruction {
    Inc { counter: Counter, next: usize },
    Dec { counter: Counter, next: usize },
    #[serde(rename = "ifz", rename_all = "camelCase")]
    ZeroCheck {
        counter: Counter,
        if_zero: usize,
        if_positive: usize,
    },
    Halt,
}

impl Instruction {
    pub fn counter(&self) -> Option<Counter> {
        match *self {
            Instruction::Inc { counter, .. } | Instruction::Dec { counter, .. } | Instruction::ZeroCheck { counter, .. } => {
                Some(counter)
            }
            Instruction::Halt => None,
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Instruction::Inc { next, .. } | Instruction::Dec { next, .. } => vec![next],
            Instruction::ZeroCheck {
                if_zero, if_positive, ..
            } => vec![if_zero, if_positive],
            Instruction::Halt => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TcmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid machine: {0}")]
    Invalid(String),
    #[error("decrement of zero counter {counter} at L{index}")]
    DecrementOnZero { index: usize, counter: Counter },
}

/// Instructions `ℓ0 .. ℓn` with the single `HALT` at `ℓn`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MachineDoc", into = "MachineDoc")]
pub struct TwoCounterMachine {
    instructions: Vec<Instruction>,
}

#[derive(Serialize, Deserialize)]
struct MachineDoc {
    instructions: Vec<Instruction>,
}

impl TryFrom<MachineDoc> for TwoCounterMachine {
    type Error = TcmError;
    fn try_from(doc: MachineDoc) -> Result<Self, TcmError> {
        TwoCounterMachine::new(doc.instructions)
    }
}

impl From<TwoCounterMachine> for MachineDoc {
    fn from(m: TwoCounterMachine) -> Self {
        MachineDoc {
            instructions: m.instructions,
        }
    }
}

impl TwoCounterMachine {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self, TcmError> {
        let n = instructions.len();
        if n == 0 {
            return Err(TcmError::Invalid("no instructions".into()));
        }
        let halts: Vec<usize> = (0..n).filter(|&i| instructions[i] == Instruction::Halt).collect();
        if halts != [n - 1] {
            return Err(TcmError::Invalid(format!(
                "exactly one HALT, as the last instruction, is required (found at {halts:?})"
            )));
        }
        for (i, ins) in instructions.iter().enumerate() {
            if let Some(&t) = ins.targets().iter().find(|&&t| t >= n) {
                return Err(TcmError::Invalid(format!("L{i} jumps to L{t}, out of range")));
            }
        }
        Ok(TwoCounterMachine { instructions })
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn halt_index(&self) -> usize {
        self.instructions.len() - 1
    }

    /// Parses the text format, or the JSON mirror if the input starts with `{`.
    pub fn parse(text: &str) -> Result<Self, TcmError> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| TcmError::Parse {
                line: e.line(),
                message: e.to_string(),
            });
        }
        let mut instructions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| TcmError::Parse {
                line: lineno + 1,
                message,
            };
            let (label, body) = line
                .split_once(':')
                .ok_or_else(|| err(format!("expected `Li: ...`, got {line:?}")))?;
            let index = parse_label(label.trim()).ok_or_else(|| err(format!("bad label {label:?}")))?;
            if index != instructions.len() {
                return Err(err(format!("label L{index} out of order, expected L{}", instructions.len())));
            }
            let words: Vec<String> = body.split_whitespace().map(|w| w.to_ascii_uppercase()).collect();
            let w: Vec<&str> = words.iter().map(String::as_str).collect();
            let counter = |s: &str| s.parse::<Counter>().map_err(|_| err(format!("unknown counter {s:?}")));
            let target = |s: &str| parse_label(s).ok_or_else(|| err(format!("bad target {s:?}")));
            let ins = match w.as_slice() {
                ["INC", c, "GOTO", k] => Instruction::Inc {
                    counter: counter(c)?,
                    next: target(k)?,
                },
                ["DEC", c, "GOTO", k] => Instruction::Dec {
                    counter: counter(c)?,
                    next: target(k)?,
                },
                ["IFZ", c, "THEN", m, "ELSE", k] => Instruction::ZeroCheck {
                    counter: counter(c)?,
                    if_zero: target(m)?,
                    if_positive: target(k)?,
                },
                ["HALT"] => Instruction::Halt,
                _ => return Err(err(format!("unrecognised instruction {:?}", body.trim()))),
            };
            instructions.push(ins);
        }
        TwoCounterMachine::new(instructions)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn parse_label(s: &str) -> Option<usize> {
    let digits = s.strip_prefix('L').or_else(|| s.strip_prefix('l'))?;
    digits.parse().ok()
}

impl fmt::Display for TwoCounterMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ins) in self.instructions.iter().enumerate() {
            match *ins {
                Instruction::Inc { counter, next } => writeln!(f, "L{i}: INC {counter} GOTO L{next}")?,
                Instruction::Dec { counter, next } => writeln!(f, "L{i}: DEC {counter} GOTO L{next}")?,
                Instruction::ZeroCheck {
                    counter,
                    if_zero,
                    if_positive,
                } => writeln!(f, "L{i}: IFZ {counter} THEN L{if_zero} ELSE L{if_positive}")?,
                Instruction::Halt => writeln!(f, "L{i}: HALT")?,
            }
        }
        Ok(())
    }
}

/// `(ℓ, c, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MachineConfig {
    pub index: usize,
    pub c1: u64,
    pub c2: u64,
}

impl MachineConfig {
    pub fn get(&self, c: Counter) -> u64 {
        match c {
            Counter::C1 => self.c1,
            Counter::C2 => self.c2,
        }
    }

    fn with(mut self, c: Counter, value: u64, index: usize) -> Self {
        match c {
            Counter::C1 => self.c1 = value,
            Counter::C2 => self.c2 = value,
        }
        self.index = index;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Next(MachineConfig),
    Halted,
}

pub fn tcm_step(machine: &TwoCounterMachine, config: &MachineConfig) -> Result<StepOutcome, TcmError> {
    let ins = machine
        .instructions
        .get(config.index)
        .ok_or_else(|| TcmError::Invalid(format!("no instruction L{}", config.index)))?;
    Ok(match *ins {
        Instruction::Inc { counter, next } => StepOutcome::Next(config.with(counter, config.get(counter) + 1, next)),
        Instruction::Dec { counter, next } => {
            let v = config.get(counter);
            if v == 0 {
                return Err(TcmError::DecrementOnZero {
                    index: config.index,
                    counter,
                });
            }
            StepOutcome::Next(config.with(counter, v - 1, next))
        }
        Instruction::ZeroCheck {
            counter,
            if_zero,
            if_positive,
        } => {
            let next = if config.get(counter) == 0 { if_zero } else { if_positive };
            StepOutcome::Next(MachineConfig { index: next, ..*config })
        }
        Instruction::Halt => StepOutcome::Halted,
    })
}

/// The run from `(ℓ0, 0, 0)`. `trace[0]` is the initial configuration and
/// `trace.len() - 1` the number of steps taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcmRun {
    pub trace: Vec<MachineConfig>,
    pub halted: bool,
}

impl TcmRun {
    pub fn steps(&self) -> usize {
        self.trace.len() - 1
    }

    pub fn last(&self) -> &MachineConfig {
        self.trace.last().expect("trace has the initial configuration")
    }
}

pub fn tcm_run(machine: &TwoCounterMachine, max_steps: usize) -> Result<TcmRun, TcmError> {
    let mut trace = vec![MachineConfig::default()];
    loop {
        let cur = *trace.last().unwrap();
        if machine.instructions[cur.index] == Instruction::Halt {
            return Ok(TcmRun { trace, halted: true });
        }
        if trace.len() > max_steps {
            return Ok(TcmRun { trace, halted: false });
        }
        match tcm_step(machine, &cur)? {
            StepOutcome::Next(n) => trace.push(n),
            StepOutcome::Halted => unreachable!(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(text: &str) -> TwoCounterMachine {
        TwoCounterMachine::parse(text).unwrap()
    }

    #[test]
    fn inc_then_halt() {
        let r = tcm_run(&m("L0: INC c1 GOTO L1\nL1: HALT"), 10).unwrap();
        assert!(r.halted);
        assert_eq!(r.steps(), 1);
        assert_eq!(*r.last(), MachineConfig { index: 1, c1: 1, c2: 0 });
    }

    #[test]
    fn self_loop_exhausts() {
        let r = tcm_run(&m("L0: IFZ c1 THEN L0 ELSE L0\nL1: HALT"), 7).unwrap();
        assert!(!r.halted);
        assert_eq!(r.steps(), 7);
    }

    #[test]
    fn inc_dec_halt() {
        let r = tcm_run(&m("L0: INC c1 GOTO L1\nL1: DEC c1 GOTO L2\nL2: HALT"), 10).unwrap();
        assert!(r.halted);
        assert_eq!((r.last().c1, r.last().c2), (0, 0));
    }

    #[test]
    fn step_cases() {
        let mach = m("L0: IFZ d THEN L1 ELSE L0\nL1: HALT");
        let s = tcm_step(&mach, &MachineConfig::default()).unwrap();
        assert_eq!(s, StepOutcome::Next(MachineConfig { index: 1, c1: 0, c2: 0 }));
        assert_eq!(
            tcm_step(&mach, &MachineConfig { index: 1, c1: 0, c2: 0 }).unwrap(),
            StepOutcome::Halted
        );
    }

    #[test]
    fn decrement_on_zero_is_an_error() {
        let mach = m("L0: DEC c2 GOTO L1\nL1: HALT");
        assert!(matches!(tcm_run(&mach, 5), Err(TcmError::DecrementOnZero { index: 0, .. })));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(TwoCounterMachine::parse("L0: JUMP L1"), Err(TcmError::Parse { line: 1, .. })));
        assert!(TwoCounterMachine::parse("L0: INC c1 GOTO L5\nL1: HALT").is_err());
        assert!(TwoCounterMachine::parse("L0: HALT\nL1: HALT").is_err());
        assert!(TwoCounterMachine::parse("L1: HALT").is_err());
        assert!(TwoCounterMachine::parse("").is_err());
    }

    #[test]
    fn text_and_json_round_trip() {
        let mach = m("L0: INC c GOTO L1 # comment\nL1: IFZ c THEN L3 ELSE L2\nL2: DEC c1 GOTO L1\nL3: HALT\n");
        assert_eq!(m(&mach.to_text()), mach);
        let json = serde_json::to_string(&mach).unwrap();
        assert!(json.contains("\"op\":\"ifz\""), "{json}");
        assert_eq!(TwoCounterMachine::parse(&json).unwrap(), mach);
    }
}
