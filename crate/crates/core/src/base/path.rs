use serde::Serialize;

/// One event of a simulated trajectory: when it happened, what happened,
/// and the state right after it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEvent<K, S> {
    pub time: f64,
    pub kind: K,
    pub state: S,
}

/// Event list of a forward or ancestral simulation, ordered by time.
/// `horizon` is infinite for runs that stop at absorption.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord<K, S> {
    pub start: S,
    pub horizon: f64,
    pub events: Vec<PathEvent<K, S>>,
}

impl<K, S> PathRecord<K, S> {
    pub fn new(start: S, horizon: f64) -> Self {
        Self {
            start,
            horizon,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, kind: K, state: S) {
        debug_assert!(self.events.last().is_none_or(|e| e.time <= time));
        self.events.push(PathEvent { time, kind, state });
    }

    /// Post-event state of the last event at or before `t`.
    pub fn state_at(&self, t: f64) -> &S {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            &self.start
        } else {
            &self.events[k - 1].state
        }
    }

    pub fn final_state(&self) -> &S {
        self.events.last().map_or(&self.start, |e| &e.state)
    }

    /// Number of events at or before `t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_lookup() {
        let mut p = PathRecord::new(5u32, 10.0);
        p.push(1.0, 'a', 4);
        p.push(2.5, 'b', 1);
        assert_eq!(*p.state_at(0.5), 5);
        assert_eq!(*p.state_at(1.0), 4);
        assert_eq!(*p.state_at(3.0), 1);
        assert_eq!(*p.final_state(), 1);
        assert_eq!(p.count_until(2.0), 1);
    }
}
