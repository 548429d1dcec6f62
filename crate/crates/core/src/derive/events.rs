use serde::{Deserialize, Serialize};

/// One observable step of a derivation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// Residue and non-residue generation for the blinded test.
    BlindingSetup {
        draws: u32,
    },
    IterationStart {
        counter: u32,
    },
    KdfCall {
        counter: u32,
    },
    RandomCall,
    QrTest,
    SuccessBlock {
        counter: u32,
    },
}

/// [`Event`] with its payload removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BlindingSetup,
    IterationStart,
    KdfCall,
    RandomCall,
    QrTest,
    SuccessBlock,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::BlindingSetup { .. } => EventKind::BlindingSetup,
            Event::IterationStart { .. } => EventKind::IterationStart,
            Event::KdfCall { .. } => EventKind::KdfCall,
            Event::RandomCall => EventKind::RandomCall,
            Event::QrTest => EventKind::QrTest,
            Event::SuccessBlock { .. } => EventKind::SuccessBlock,
        }
    }
}

/// Receiver of derivation events, in execution order.
pub trait EventSink {
    fn record(&mut self, event: Event);
}

impl EventSink for Vec<Event> {
    fn record(&mut self, event: Event) {
        self.push(event);
    }
}

/// Discards everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullSink;

impl EventSink for NullSink {
    fn record(&mut self, _event: Event) {}
}

impl<S: EventSink + ?Sized> EventSink for &mut S {
    fn record(&mut self, event: Event) {
        (**self).record(event);
    }
}
