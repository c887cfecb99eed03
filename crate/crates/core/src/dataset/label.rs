use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Place,
    Give,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Middle,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Left, Direction::Middle, Direction::Right];

    /// Position in the left-to-right ordering, used to index per-direction arrays.
    pub fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Middle => 1,
            Direction::Right => 2,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::Left => 'L',
            Direction::Middle => 'M',
            Direction::Right => 'R',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'L' => Some(Direction::Left),
            'M' => Some(Direction::Middle),
            'R' => Some(Direction::Right),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Place => "Place",
            Action::Give => "Give",
        })
    }
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Place, Action::Give];

    pub fn index(self) -> usize {
        match self {
            Action::Place => 0,
            Action::Give => 1,
        }
    }
}

/// One of the six action-configurations: {Place, Give} x {Left, Middle, Right}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionLabel {
    pub action: Action,
    pub direction: Direction,
}

impl ActionLabel {
    /// Canonical order: P_L, P_M, P_R, G_L, G_M, G_R.
    pub const ALL: [ActionLabel; 6] = [
        ActionLabel::new(Action::Place, Direction::Left),
        ActionLabel::new(Action::Place, Direction::Middle),
        ActionLabel::new(Action::Place, Direction::Right),
        ActionLabel::new(Action::Give, Direction::Left),
        ActionLabel::new(Action::Give, Direction::Middle),
        ActionLabel::new(Action::Give, Direction::Right),
    ];

    pub const fn new(action: Action, direction: Direction) -> Self {
        Self { action, direction }
    }

    /// Index into [`ActionLabel::ALL`].
    pub fn index(self) -> usize {
        self.action.index() * 3 + self.direction.index()
    }

    pub fn token(self) -> &'static str {
        match (self.action, self.direction) {
            (Action::Place, Direction::Left) => "P_L",
            (Action::Place, Direction::Middle) => "P_M",
            (Action::Place, Direction::Right) => "P_R",
            (Action::Give, Direction::Left) => "G_L",
            (Action::Give, Direction::Middle) => "G_M",
            (Action::Give, Direction::Right) => "G_R",
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ActionLabel {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionLabel::ALL
            .into_iter()
            .find(|l| l.token() == s.trim())
            .ok_or_else(|| DatasetError::Label(s.trim().to_string()))
    }
}

impl Serialize for ActionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for ActionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-label trial counts, indexed in [`ActionLabel::ALL`] order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts(pub [usize; 6]);

impl LabelCounts {
    /// The trial tally of the recorded dataset (P_L, P_M, P_R, G_L, G_M, G_R).
    pub const RECORDED_TALLY: LabelCounts = LabelCounts([20, 23, 17, 17, 19, 24]);

    pub fn get(&self, label: ActionLabel) -> usize {
        self.0[label.index()]
    }

    pub fn increment(&mut self, label: ActionLabel) {
        self.0[label.index()] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn missing(&self) -> Vec<ActionLabel> {
        ActionLabel::ALL
            .into_iter()
            .filter(|l| self.get(*l) == 0)
            .collect()
    }

    /// Parses `a,b,c,d,e,f` in canonical label order.
    pub fn parse_list(s: &str) -> Result<Self, DatasetError> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 {
            return Err(DatasetError::Parameter(format!(
                "expected 6 comma-separated counts, got {}",
                parts.len()
            )));
        }
        let mut out = [0usize; 6];
        for (slot, p) in out.iter_mut().zip(parts) {
            *slot = p
                .parse()
                .map_err(|_| DatasetError::Parameter(format!("invalid count '{p}'")))?;
        }
        Ok(LabelCounts(out))
    }
}
