//! Acquisition path: binary frames, TCP streams per tag, and a topic bus.

mod pubsub;
mod transport;
mod wire;

pub use pubsub::{
    ranging_topic, Bus, Message, PayloadKind, Subscription, Topic, DEFAULT_QUEUE_CAPACITY,
    POSE_TOPIC, STATUS_TOPIC,
};
pub use transport::{
    connect_stream, serve_stream, FrameSink, ServerConfig, ServerStats, StreamClient,
    StreamServer, DEFAULT_HEARTBEAT,
};
pub use wire::{
    crc16_ccitt_false, decode_frame, encode_frame, frame_len, meters_to_mm, seconds_to_micros,
    DecodeError, IntegrityError, StreamDecoder, WireEntry, WireFrame, CRC_LEN, ENTRY_LEN,
    HEADER_LEN, MAGIC, MAX_ENTRIES, VERSION,
};
