//! Frame streams over TCP, one connection per tag.

use std::collections::{BTreeMap, HashMap};
use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::pubsub::{ranging_topic, Bus, Message};
use super::wire::{StreamDecoder, WireFrame};
use crate::error::{Error, Result};
use crate::geometry::NodeId;
use crate::twr::{MeasurementSink, RangeMeasurement};

pub const DEFAULT_HEARTBEAT: Duration = Duration::from_secs(5);

const POLL_INTERVAL: Duration = Duration::from_millis(5);
const READ_TIMEOUT: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerConfig {
    /// Interval of the `waiting` status event while no client is connected.
    pub heartbeat: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            heartbeat: DEFAULT_HEARTBEAT,
        }
    }
}

#[derive(Debug, Default)]
pub struct ServerStats {
    pub connections: AtomicU64,
    pub active: AtomicU64,
    pub frames: AtomicU64,
    pub measurements: AtomicU64,
    pub integrity_errors: AtomicU64,
    pub resync_bytes: AtomicU64,
}

/// Per-tag frame counters; a frame's counter becomes the `sequence` of the
/// measurements it carries.
type FrameCounters = Arc<Mutex<HashMap<u16, u64>>>;

pub struct StreamServer {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    stats: Arc<ServerStats>,
    accept_thread: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for StreamServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamServer")
            .field("local_addr", &self.local_addr)
            .field("stats", &self.stats)
            .finish()
    }
}

/// Listens for frame streams and republishes every decoded measurement on
/// `ranging/tag<N>`.
///
/// Connection events (`connected`, `disconnected`, `integrity-error`,
/// `waiting`) go to the status topic. Losing a client never stops the
/// server.
pub fn serve_stream(addr: impl ToSocketAddrs, bus: Bus, config: ServerConfig) -> Result<StreamServer> {
    let listener =
        TcpListener::bind(addr).map_err(|e| Error::Transport(format!("bind failed: {e}")))?;
    let local_addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;

    let stop = Arc::new(AtomicBool::new(false));
    let stats = Arc::new(ServerStats::default());
    let accept_thread = {
        let stop = Arc::clone(&stop);
        let stats = Arc::clone(&stats);
        thread::Builder::new()
            .name("coloc-accept".into())
            .spawn(move || accept_loop(listener, bus, config, stop, stats))?
    };
    log::info!("listening on {local_addr}");
    Ok(StreamServer {
        local_addr,
        stop,
        stats,
        accept_thread: Some(accept_thread),
    })
}

fn accept_loop(
    listener: TcpListener,
    bus: Bus,
    config: ServerConfig,
    stop: Arc<AtomicBool>,
    stats: Arc<ServerStats>,
) {
    let counters: FrameCounters = Arc::default();
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    let mut idle_since = Instant::now();

    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                stats.connections.fetch_add(1, Ordering::Relaxed);
                stats.active.fetch_add(1, Ordering::Relaxed);
                bus.publish_status(format!("connected {peer}"));
                let (bus, stop, stats, counters) = (
                    bus.clone(),
                    Arc::clone(&stop),
                    Arc::clone(&stats),
                    Arc::clone(&counters),
                );
                let spawned = thread::Builder::new()
                    .name(format!("coloc-conn-{peer}"))
                    .spawn(move || {
                        connection_loop(stream, &bus, &stop, &stats, &counters);
                        stats.active.fetch_sub(1, Ordering::Relaxed);
                        bus.publish_status(format!("disconnected {peer}"));
                    });
                match spawned {
                    Ok(handle) => workers.push(handle),
                    Err(e) => log::error!("cannot serve {peer}: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                if stats.active.load(Ordering::Relaxed) > 0 {
                    idle_since = Instant::now();
                } else if idle_since.elapsed() >= config.heartbeat {
                    bus.publish_status("waiting");
                    idle_since = Instant::now();
                }
                thread::sleep(POLL_INTERVAL);
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL_INTERVAL);
            }
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

fn connection_loop(
    mut stream: TcpStream,
    bus: &Bus,
    stop: &AtomicBool,
    stats: &ServerStats,
    counters: &Mutex<HashMap<u16, u64>>,
) {
    if let Err(e) = stream
        .set_nonblocking(false)
        .and_then(|_| stream.set_read_timeout(Some(READ_TIMEOUT)))
    {
        log::warn!("socket setup failed: {e}");
        return;
    }
    let mut decoder = StreamDecoder::new();
    let mut buf = [0u8; 4096];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                continue;
            }
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => {
                log::warn!("connection lost: {e}");
                break;
            }
        };
        decoder.push(&buf[..n]);
        let resync_before = decoder.resync_bytes;
        loop {
            match decoder.next_frame() {
                Ok(Some(frame)) => {
                    stats.frames.fetch_add(1, Ordering::Relaxed);
                    publish_frame(bus, stats, counters, &frame);
                }
                Ok(None) => break,
                Err(e) => {
                    stats.integrity_errors.fetch_add(1, Ordering::Relaxed);
                    bus.publish_status(format!("integrity-error {e}"));
                }
            }
        }
        stats
            .resync_bytes
            .fetch_add(decoder.resync_bytes - resync_before, Ordering::Relaxed);
    }
}

fn publish_frame(bus: &Bus, stats: &ServerStats, counters: &Mutex<HashMap<u16, u64>>, frame: &WireFrame) {
    let sequence = {
        let mut c = counters.lock().unwrap_or_else(|e| e.into_inner());
        let slot = c.entry(frame.tag_id).or_insert(0);
        let s = *slot;
        *slot += 1;
        s
    };
    let topic = ranging_topic(NodeId(frame.tag_id));
    for m in frame.to_measurements(sequence) {
        stats.measurements.fetch_add(1, Ordering::Relaxed);
        if let Err(e) = bus.publish(&topic, Message::Range(m)) {
            log::warn!("{e}");
        }
    }
}

impl StreamServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stats(&self) -> &ServerStats {
        &self.stats
    }

    /// Stops accepting, closes open connections and joins all threads.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

#[derive(Debug)]
pub struct StreamClient {
    stream: TcpStream,
}

pub fn connect_stream(addr: impl ToSocketAddrs) -> Result<StreamClient> {
    let stream =
        TcpStream::connect(addr).map_err(|e| Error::Transport(format!("connect failed: {e}")))?;
    stream.set_nodelay(true)?;
    Ok(StreamClient { stream })
}

impl StreamClient {
    pub fn send_frame(&mut self, frame: &WireFrame) -> Result<()> {
        let bytes = frame.encode()?;
        self.send_raw(&bytes)
    }

    /// Sends one tag's measurements for one epoch as a single frame.
    pub fn send_bundle(&mut self, tag: NodeId, timestamp: f64, bundle: &[RangeMeasurement]) -> Result<()> {
        self.send_frame(&WireFrame::from_measurements(tag, timestamp, bundle)?)
    }

    /// Writes bytes verbatim; useful for injecting corrupt input.
    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<()> {
        self.stream
            .write_all(bytes)
            .map_err(|e| Error::Transport(format!("send failed: {e}")))
    }

    pub fn close(self) -> Result<()> {
        match self.stream.shutdown(Shutdown::Both) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == ErrorKind::NotConnected => Ok(()),
            Err(e) => Err(e.into()),
        }
    }
}

/// Measurement sink that ships engine output to a stream server.
///
/// Consecutive measurements of one tag with the same sequence form a
/// bundle; each tag gets its own connection, opened on first use.
#[derive(Debug)]
pub struct FrameSink {
    addr: SocketAddr,
    clients: BTreeMap<NodeId, StreamClient>,
    pending: BTreeMap<NodeId, Vec<RangeMeasurement>>,
    pub frames_sent: u64,
    pub measurements_sent: u64,
}

impl FrameSink {
    pub fn new(addr: SocketAddr) -> Self {
        FrameSink {
            addr,
            clients: BTreeMap::new(),
            pending: BTreeMap::new(),
            frames_sent: 0,
            measurements_sent: 0,
        }
    }

    fn flush_tag(&mut self, tag: NodeId) -> Result<()> {
        let Some(bundle) = self.pending.remove(&tag).filter(|b| !b.is_empty()) else {
            return Ok(());
        };
        let client = match self.clients.entry(tag) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(connect_stream(self.addr)?),
        };
        for chunk in bundle.chunks(super::wire::MAX_ENTRIES) {
            client.send_bundle(tag, chunk[0].timestamp, chunk)?;
            self.frames_sent += 1;
        }
        self.measurements_sent += bundle.len() as u64;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        let tags: Vec<NodeId> = self.pending.keys().copied().collect();
        for tag in tags {
            self.flush_tag(tag)?;
        }
        Ok(())
    }
}

impl MeasurementSink for FrameSink {
    fn accept(&mut self, m: &RangeMeasurement) -> Result<()> {
        let tag = m.pair.tag;
        let starts_new = self
            .pending
            .get(&tag)
            .and_then(|b| b.first())
            .is_some_and(|first| first.sequence != m.sequence);
        if starts_new {
            self.flush_tag(tag)?;
        }
        self.pending.entry(tag).or_default().push(*m);
        Ok(())
    }

    /// Sends what is pending and closes every connection.
    fn finish(&mut self) -> Result<()> {
        self.flush()?;
        for (_, client) in std::mem::take(&mut self.clients) {
            client.close()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::pubsub::STATUS_TOPIC;
    use crate::geometry::{canonical_geometry, NetworkTopology, Shape};
    use crate::twr::RangingEngine;

    fn loopback_server(bus: &Bus, heartbeat: Duration) -> StreamServer {
        serve_stream("127.0.0.1:0", bus.clone(), ServerConfig { heartbeat }).unwrap()
    }

    fn status_texts(sub: &crate::bus::Subscription, wait: Duration) -> Vec<String> {
        let deadline = Instant::now() + wait;
        let mut out = Vec::new();
        while let Some(m) = sub.recv_timeout(deadline.saturating_duration_since(Instant::now())) {
            if let Message::Status(s) = &*m {
                out.push(s.clone());
            }
        }
        out
    }

    #[test]
    fn waiting_heartbeat_without_clients() {
        let bus = Bus::new();
        let status = bus.subscribe(STATUS_TOPIC);
        let server = loopback_server(&bus, Duration::from_millis(40));
        let first = status.recv_timeout(Duration::from_secs(2)).expect("heartbeat");
        assert_eq!(*first, Message::Status("waiting".into()));
        server.shutdown();
    }

    #[test]
    fn loopback_delivers_engine_output_in_order() {
        let bus = Bus::new();
        let topology = NetworkTopology::canonical();
        let positions = canonical_geometry(Shape::Square, 2.0).unwrap();
        let engine = RangingEngine::default();
        let subs: Vec<_> = (1..=3)
            .map(|t| bus.subscribe_with_capacity(&ranging_topic(NodeId(t)), 10_000))
            .collect();
        let server = loopback_server(&bus, DEFAULT_HEARTBEAT);

        let mut sent = Vec::new();
        engine
            .run_ranging_schedule(&topology, &positions, 10.0, 5.0, &mut sent)
            .unwrap();
        let mut sink = FrameSink::new(server.local_addr());
        for m in &sent {
            sink.accept(m).unwrap();
        }
        sink.finish().unwrap();
        assert_eq!(sink.measurements_sent, sent.len() as u64);
        assert_eq!(sink.frames_sent, 150);

        for (i, sub) in subs.iter().enumerate() {
            let tag = NodeId(i as u16 + 1);
            let expected: Vec<_> = sent.iter().filter(|m| m.pair.tag == tag).collect();
            let mut got = Vec::new();
            while got.len() < expected.len() {
                let m = sub.recv_timeout(Duration::from_secs(5)).expect("measurement");
                let Message::Range(r) = *m else { panic!() };
                got.push(r);
            }
            for (g, e) in got.iter().zip(&expected) {
                assert_eq!(g.pair, e.pair);
                assert_eq!(g.sequence, e.sequence);
                assert_eq!(g.timestamp, e.timestamp);
                assert_eq!(g.quality, e.quality);
                assert!((g.distance - e.distance).abs() <= 0.0005 + 1e-12);
            }
        }
        assert_eq!(server.stats().frames.load(Ordering::Relaxed), 150);
        server.shutdown();
    }

    #[test]
    fn corrupt_frame_reported_and_stream_continues() {
        let bus = Bus::new();
        let status = bus.subscribe(STATUS_TOPIC);
        let ranges = bus.subscribe(&ranging_topic(NodeId(2)));
        let server = loopback_server(&bus, DEFAULT_HEARTBEAT);

        let frame = |mm| WireFrame {
            tag_id: 2,
            epoch_micros: 0,
            entries: vec![super::super::wire::WireEntry {
                anchor_id: 0,
                distance_mm: mm,
                quality: 100,
            }],
        };
        let mut client = connect_stream(server.local_addr()).unwrap();
        let mut bad = frame(1234).encode().unwrap();
        bad[17] ^= 0x40;
        client.send_raw(&bad).unwrap();
        client.send_frame(&frame(2828)).unwrap();
        client.close().unwrap();

        let got = ranges.recv_timeout(Duration::from_secs(5)).expect("good frame");
        let Message::Range(r) = *got else { panic!() };
        assert_eq!(r.distance, 2.828);
        assert_eq!(r.sequence, 0);

        let events = status_texts(&status, Duration::from_millis(500));
        assert!(events.iter().any(|e| e.starts_with("connected")), "{events:?}");
        assert!(events.iter().any(|e| e.starts_with("integrity-error")), "{events:?}");
        assert!(events.iter().any(|e| e.starts_with("disconnected")), "{events:?}");
        server.shutdown();
    }

    #[test]
    fn two_tags_on_two_connections() {
        let bus = Bus::new();
        let s1 = bus.subscribe(&ranging_topic(NodeId(1)));
        let s3 = bus.subscribe(&ranging_topic(NodeId(3)));
        let server = loopback_server(&bus, DEFAULT_HEARTBEAT);
        let addr = server.local_addr();

        let senders: Vec<_> = [1u16, 3]
            .into_iter()
            .map(|tag| {
                thread::spawn(move || {
                    let mut c = connect_stream(addr).unwrap();
                    for k in 0..50u32 {
                        let m = RangeMeasurement {
                            pair: crate::geometry::RangingPair::new(tag, 0),
                            distance: 1.0 + f64::from(k) / 1000.0,
                            timestamp: f64::from(k) / 10.0,
                            sequence: u64::from(k),
                            quality: 100,
                        };
                        c.send_bundle(NodeId(tag), m.timestamp, &[m]).unwrap();
                    }
                    c.close().unwrap();
                })
            })
            .collect();
        for s in senders {
            s.join().unwrap();
        }
        for sub in [&s1, &s3] {
            let seqs: Vec<u64> = (0..50)
                .map(|_| match *sub.recv_timeout(Duration::from_secs(5)).expect("range") {
                    Message::Range(r) => r.sequence,
                    _ => panic!(),
                })
                .collect();
            assert_eq!(seqs, (0..50).collect::<Vec<_>>());
        }
        server.shutdown();
    }

    #[test]
    fn startup_errors_are_transport_errors() {
        let bus = Bus::new();
        let server = loopback_server(&bus, DEFAULT_HEARTBEAT);
        let taken = server.local_addr();
        assert!(matches!(
            serve_stream(taken, bus.clone(), ServerConfig::default()),
            Err(Error::Transport(_))
        ));
        server.shutdown();
        // nothing listens on the released port any more
        assert!(matches!(connect_stream(taken), Err(Error::Transport(_))));
    }
}
