//! Event intake: a bounded queue between the byte-stream reader and the
//! scheduler thread, plus the file-replay and local TCP front ends.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{write_event, EventReader, ProtocolError, SessionEvent};
use super::scheduler::{Scheduler, SchedulerConfig};

pub const QUEUE_CAPACITY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overflow {
    /// Producer waits for room.
    #[default]
    Block,
    /// Message is discarded; the scheduler reports it as an Error event.
    Drop,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Event(SessionEvent),
    Malformed(ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disconnected;

/// Producer half of the intake queue.
#[derive(Clone)]
pub struct Intake {
    tx: SyncSender<Inbound>,
    dropped: Arc<AtomicU64>,
    policy: Overflow,
}

impl Intake {
    pub fn push(&self, item: Inbound) -> Result<(), Disconnected> {
        match self.policy {
            Overflow::Block => self.tx.send(item).map_err(|_| Disconnected),
            Overflow::Drop => match self.tx.try_send(item) {
                Ok(()) => Ok(()),
                Err(TrySendError::Full(_)) => {
                    self.dropped.fetch_add(1, Ordering::Relaxed);
                    Ok(())
                }
                Err(TrySendError::Disconnected(_)) => Err(Disconnected),
            },
        }
    }
}

/// Consumer half of the intake queue.
pub struct Outlet {
    rx: Receiver<Inbound>,
    dropped: Arc<AtomicU64>,
    reported: u64,
}

pub fn queue(capacity: usize, policy: Overflow) -> (Intake, Outlet) {
    let (tx, rx) = mpsc::sync_channel(capacity);
    let dropped = Arc::new(AtomicU64::new(0));
    (
        Intake {
            tx,
            dropped: dropped.clone(),
            policy,
        },
        Outlet {
            rx,
            dropped,
            reported: 0,
        },
    )
}

impl Outlet {
    fn take_dropped(&mut self) -> u64 {
        let total = self.dropped.load(Ordering::Relaxed);
        let new = total - self.reported;
        self.reported = total;
        new
    }
}

fn apply(s: &mut Scheduler, item: Inbound, out: &mut Vec<SessionEvent>) {
    match item {
        Inbound::Event(ev) => s.handle(&ev, out),
        Inbound::Malformed(e) => s.malformed(e, out),
    }
}

/// Scheduler loop. With `clock`, pending timeouts are also driven by
/// elapsed wall time; without it, only by message timestamps. Returns once
/// every producer has hung up and the schedule is flushed.
pub fn drive<F>(
    mut outlet: Outlet,
    scheduler: &mut Scheduler,
    clock: Option<Instant>,
    mut sink: F,
) -> std::io::Result<()>
where
    F: FnMut(&SessionEvent) -> std::io::Result<()>,
{
    let mut out = Vec::new();
    loop {
        let item = match clock {
            None => outlet.rx.recv().map_err(|_| RecvTimeoutError::Disconnected),
            Some(_) => outlet.rx.recv_timeout(Duration::from_millis(2)),
        };
        let lost = outlet.take_dropped();
        if lost > 0 {
            scheduler.dropped(lost, &mut out);
        }
        match item {
            Ok(item) => apply(scheduler, item, &mut out),
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if let Some(start) = clock {
            scheduler.tick(start.elapsed().as_millis() as u64, &mut out);
        }
        for ev in out.drain(..) {
            sink(&ev)?;
        }
    }
    scheduler.finish(&mut out);
    for ev in out.drain(..) {
        sink(&ev)?;
    }
    Ok(())
}

fn pump<R: BufRead>(reader: R, intake: Intake) -> std::io::Result<()> {
    for item in EventReader::new(reader) {
        let item = match item? {
            Ok(ev) => Inbound::Event(ev),
            Err(e) => Inbound::Malformed(e),
        };
        if intake.push(item).is_err() {
            break;
        }
    }
    Ok(())
}

/// Replays a recorded NDJSON stream through a fresh scheduler, writing the
/// responses. Output depends only on the input bytes and `config`.
pub fn replay<R, W>(
    reader: R,
    mut writer: W,
    config: SchedulerConfig,
) -> std::io::Result<Vec<SessionEvent>>
where
    R: BufRead + Send,
    W: Write,
{
    let (intake, outlet) = queue(QUEUE_CAPACITY, Overflow::Block);
    let mut scheduler = Scheduler::new(config);
    let mut all = Vec::new();
    thread::scope(|s| {
        let producer = s.spawn(move || pump(reader, intake));
        let res = drive(outlet, &mut scheduler, None, |ev| {
            all.push(ev.clone());
            write_event(&mut writer, ev)
        });
        let produced = producer.join().expect("reader thread panicked");
        res.and(produced)
    })?;
    writer.flush()?;
    Ok(all)
}

/// Serves one connection: events in, responses out on the same socket.
pub fn serve_connection(
    stream: TcpStream,
    config: SchedulerConfig,
    policy: Overflow,
) -> std::io::Result<()> {
    let start = Instant::now();
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let (intake, outlet) = queue(QUEUE_CAPACITY, policy);
    let mut scheduler = Scheduler::new(config);
    let producer = thread::spawn(move || pump(reader, intake));
    drive(outlet, &mut scheduler, Some(start), |ev| {
        write_event(&mut writer, ev)?;
        writer.flush()
    })?;
    producer.join().expect("reader thread panicked")
}

/// Accepts connections one at a time, each with its own session state.
/// Stops after `max_connections` when given.
pub fn serve(
    listener: TcpListener,
    config: SchedulerConfig,
    policy: Overflow,
    max_connections: Option<usize>,
) -> std::io::Result<()> {
    for (n, stream) in listener.incoming().enumerate() {
        serve_connection(stream?, config.clone(), policy)?;
        if max_connections.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    Ok(())
}
