//! Discrete time. The whole system runs on one global integer clock; a
//! "minute" is purely a display convention (`ticks_per_minute` in scenario
//! files).

use std::fmt;
use std::iter::Sum;
use std::ops::Add;

/// Absolute time on the global clock, in ticks.
pub type Tick = u64;

/// A non-negative span of ticks (road weights, waits, delays).
///
/// Addition saturates instead of wrapping so that "loose" deadlines built
/// from huge tolerances stay well-defined.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Duration(u64);

impl Duration {
    pub const ZERO: Duration = Duration(0);
    pub const MAX: Duration = Duration(u64::MAX);

    pub const fn new(ticks: u64) -> Duration {
        Duration(ticks)
    }

    pub fn ticks(self) -> u64 {
        self.0
    }
}

impl Add for Duration {
    type Output = Duration;

    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0.saturating_add(rhs.0))
    }
}

impl Add<Duration> for u64 {
    type Output = Tick;

    fn add(self, rhs: Duration) -> Tick {
        self.saturating_add(rhs.0)
    }
}

impl Sum for Duration {
    fn sum<I: Iterator<Item = Duration>>(iter: I) -> Duration {
        iter.fold(Duration::ZERO, Add::add)
    }
}

impl From<u64> for Duration {
    fn from(ticks: u64) -> Duration {
        Duration(ticks)
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
