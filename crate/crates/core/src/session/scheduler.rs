//! Stimulus scheduler: turns contact events into stimulus commands under
//! the maximum-duration and refractory rules.
//!
//! Time is driven entirely by message timestamps and explicit ticks, so a
//! replayed stream produces identical output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::protocol::{EventKind, ProtocolError, SessionEvent};
use crate::types::{Material, StimulusLabel};

pub const MAX_STIMULUS_MS: u64 = 5000;
pub const EXPERIMENT_REFRACTORY_MS: u64 = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Physical material touched → stimulus rendered on contact.
    pub mapping: BTreeMap<Material, StimulusLabel>,
    #[serde(default = "default_max_stimulus")]
    pub max_stimulus_ms: u64,
    /// Reset period after every stop. 0 in MR-bridge use.
    #[serde(default)]
    pub refractory_ms: u64,
}

fn default_max_stimulus() -> u64 {
    MAX_STIMULUS_MS
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            mapping: BTreeMap::new(),
            max_stimulus_ms: MAX_STIMULUS_MS,
            refractory_ms: 0,
        }
    }
}

impl SchedulerConfig {
    /// Settings of the rating experiment: 5 s on, 5 s reset.
    pub fn experiment() -> Self {
        SchedulerConfig {
            refractory_ms: EXPERIMENT_REFRACTORY_MS,
            ..Self::default()
        }
    }

    pub fn with_mapping(mut self, material: Material, stimulus: StimulusLabel) -> Self {
        self.mapping.insert(material, stimulus);
        self
    }
}

/// Why an Error event was emitted. Not part of the wire format.
#[derive(Debug, Clone, PartialEq)]
pub enum Fault {
    OutOfOrder { seq: u64, last: u64 },
    Malformed(ProtocolError),
    UnexpectedKind(EventKind),
    Dropped(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Active {
    stimulus: StimulusLabel,
    material: Option<Material>,
    started: u64,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    config: SchedulerConfig,
    last_in_seq: Option<u64>,
    out_seq: u64,
    now: u64,
    active: Option<Active>,
    /// Stimulus waiting for the refractory period to end.
    pending: Option<(StimulusLabel, Option<Material>)>,
    refractory_until: u64,
    faults: Vec<(u64, Fault)>,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig) -> Self {
        Scheduler {
            config,
            last_in_seq: None,
            out_seq: 0,
            now: 0,
            active: None,
            pending: None,
            refractory_until: 0,
            faults: Vec::new(),
        }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    /// Stimulus currently driven, if any.
    pub fn active(&self) -> Option<StimulusLabel> {
        self.active.map(|a| a.stimulus)
    }

    pub fn now_ms(&self) -> u64 {
        self.now
    }

    /// Reasons for every Error event so far, keyed by the outbound seq.
    pub fn faults(&self) -> &[(u64, Fault)] {
        &self.faults
    }

    fn emit<'o>(
        &mut self,
        out: &'o mut Vec<SessionEvent>,
        t_ms: u64,
        kind: EventKind,
    ) -> &'o mut SessionEvent {
        self.out_seq += 1;
        out.push(SessionEvent::new(self.out_seq, t_ms, kind));
        out.last_mut().expect("just pushed")
    }

    fn fault(&mut self, out: &mut Vec<SessionEvent>, t_ms: u64, fault: Fault) {
        self.emit(out, t_ms, EventKind::Error);
        self.faults.push((self.out_seq, fault));
    }

    fn stop(&mut self, out: &mut Vec<SessionEvent>, at: u64) {
        if let Some(a) = self.active.take() {
            let ev = self.emit(out, at, EventKind::StimulusCmd);
            ev.stimulus = Some(StimulusLabel::N);
            ev.material = a.material;
            self.refractory_until = at + self.config.refractory_ms;
        }
    }

    fn start(
        &mut self,
        out: &mut Vec<SessionEvent>,
        at: u64,
        stimulus: StimulusLabel,
        material: Option<Material>,
    ) {
        let ev = self.emit(out, at, EventKind::StimulusCmd);
        ev.stimulus = Some(stimulus);
        ev.material = material;
        self.active = Some(Active {
            stimulus,
            material,
            started: at,
        });
    }

    /// Processes timeouts and deferred starts due at or before `t_ms`, in
    /// time order, stamped with the time they were due.
    pub fn tick(&mut self, t_ms: u64, out: &mut Vec<SessionEvent>) {
        loop {
            let timeout = self.active.map(|a| a.started + self.config.max_stimulus_ms);
            let deferred = self.pending.map(|_| self.refractory_until);
            match (timeout, deferred) {
                (Some(due), _) if due <= t_ms => {
                    self.now = self.now.max(due);
                    self.stop(out, due);
                }
                (None, Some(due)) if due <= t_ms => {
                    self.now = self.now.max(due);
                    let (s, m) = self.pending.take().expect("pending");
                    self.start(out, due, s, m);
                }
                _ => break,
            }
        }
        self.now = self.now.max(t_ms);
    }

    /// Flushes everything still scheduled: a running stimulus gets its
    /// timeout stop so nothing is left actuated.
    pub fn finish(&mut self, out: &mut Vec<SessionEvent>) {
        self.pending = None;
        if let Some(a) = self.active {
            self.tick(a.started + self.config.max_stimulus_ms, out);
        }
    }

    /// Reports a line that failed to decode.
    pub fn malformed(&mut self, err: ProtocolError, out: &mut Vec<SessionEvent>) {
        let t = self.now;
        self.fault(out, t, Fault::Malformed(err));
    }

    /// Reports messages lost to a full intake queue.
    pub fn dropped(&mut self, count: u64, out: &mut Vec<SessionEvent>) {
        let t = self.now;
        self.fault(out, t, Fault::Dropped(count));
    }

    /// Handles one inbound message, appending responses to `out`.
    pub fn handle(&mut self, ev: &SessionEvent, out: &mut Vec<SessionEvent>) {
        if let Some(last) = self.last_in_seq {
            if ev.seq <= last {
                let t = self.now;
                self.fault(out, t, Fault::OutOfOrder { seq: ev.seq, last });
                return;
            }
        }
        self.last_in_seq = Some(ev.seq);
        if let Err(e) = ev.check() {
            let t = self.now;
            self.fault(out, t, Fault::Malformed(e));
            return;
        }
        // Ordering is by seq; a timestamp that runs backwards is treated as
        // arriving now.
        let t = ev.t_ms.max(self.now);
        self.tick(t, out);

        match ev.kind {
            EventKind::ContactBegin => {
                let material = ev.material.expect("checked");
                let stimulus = self.config.mapping.get(&material).copied();
                self.request(t, stimulus.unwrap_or(StimulusLabel::N), Some(material), out);
            }
            EventKind::StimulusCmd => {
                let stimulus = ev.stimulus.expect("checked");
                self.request(t, stimulus, ev.material, out);
            }
            EventKind::ContactEnd => {
                self.pending = None;
                if self.active.is_some() {
                    self.stop(out, t);
                } else {
                    self.emit(out, t, EventKind::Ack);
                }
            }
            kind @ (EventKind::Ack | EventKind::Error) => {
                self.fault(out, t, Fault::UnexpectedKind(kind));
            }
        }
    }

    fn request(
        &mut self,
        t: u64,
        stimulus: StimulusLabel,
        material: Option<Material>,
        out: &mut Vec<SessionEvent>,
    ) {
        if stimulus == StimulusLabel::N {
            self.pending = None;
            if self.active.is_some() {
                self.stop(out, t);
            } else {
                let ev = self.emit(out, t, EventKind::Ack);
                ev.material = material;
            }
            return;
        }
        // One stimulus at a time: a new request ends the running one.
        self.stop(out, t);
        if t < self.refractory_until {
            self.pending = Some((stimulus, material));
            let ev = self.emit(out, t, EventKind::Ack);
            ev.material = material;
            ev.stimulus = Some(stimulus);
        } else {
            self.start(out, t, stimulus, material);
        }
    }

    /// Convenience: runs a whole inbound stream and flushes.
    pub fn run<'a, I>(&mut self, events: I) -> Vec<SessionEvent>
    where
        I: IntoIterator<Item = &'a SessionEvent>,
    {
        let mut out = Vec::new();
        for ev in events {
            self.handle(ev, &mut out);
        }
        self.finish(&mut out);
        out
    }
}

/// Stimulus-on intervals `(start, stop, label)` in a command stream.
pub fn stimulus_intervals(events: &[SessionEvent]) -> Vec<(u64, Option<u64>, StimulusLabel)> {
    let mut spans: Vec<(u64, Option<u64>, StimulusLabel)> = Vec::new();
    for ev in events.iter().filter(|e| e.kind == EventKind::StimulusCmd) {
        let label = ev.stimulus.unwrap_or(StimulusLabel::N);
        if let Some(open) = spans.last_mut().filter(|s| s.1.is_none()) {
            open.1 = Some(ev.t_ms);
        }
        if label != StimulusLabel::N {
            spans.push((ev.t_ms, None, label));
        }
    }
    spans
}
