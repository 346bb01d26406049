//! Stream a ranging schedule over TCP into the bus and read it back.

use std::time::Duration;

use coloc::bus::{ranging_topic, serve_stream, Bus, FrameSink, Message, ServerConfig, STATUS_TOPIC};
use coloc::geometry::{canonical_geometry, NetworkTopology, Shape, NODE_2};
use coloc::twr::RangingEngine;

fn main() -> coloc::Result<()> {
    let bus = Bus::new();
    let status = bus.subscribe(STATUS_TOPIC);
    let ranges = bus.subscribe(&ranging_topic(NODE_2));
    let server = serve_stream("127.0.0.1:0", bus.clone(), ServerConfig::default())?;

    let positions = canonical_geometry(Shape::Square, 2.0)?;
    let mut sink = FrameSink::new(server.local_addr());
    RangingEngine::default().run_ranging_schedule(&NetworkTopology::canonical(), &positions, 10.0, 1.0, &mut sink)?;
    println!("sent {} frames, {} measurements", sink.frames_sent, sink.measurements_sent);

    for _ in 0..20 {
        match ranges.recv_timeout(Duration::from_secs(2)).as_deref() {
            Some(Message::Range(m)) => println!("{} seq {} t {:.1} s: {:.3} m", m.pair, m.sequence, m.timestamp, m.distance),
            _ => break,
        }
    }
    server.shutdown();
    while let Some(event) = status.try_recv() {
        if let Message::Status(text) = &*event {
            println!("status: {text}");
        }
    }
    Ok(())
}
