//! Encode a frame, corrupt the stream and watch the decoder resynchronize.

use coloc::bus::{StreamDecoder, WireEntry, WireFrame};

fn main() -> coloc::Result<()> {
    let frame = WireFrame {
        tag_id: 2,
        epoch_micros: 1_250_000,
        entries: vec![
            WireEntry { anchor_id: 0, distance_mm: 2829, quality: 100 },
            WireEntry { anchor_id: 1, distance_mm: 2003, quality: 100 },
        ],
    };
    let bytes = frame.encode()?;
    println!("{} bytes: {:02x?}", bytes.len(), bytes);

    let mut corrupted = bytes.clone();
    corrupted[20] ^= 0x10;
    let mut stream = b"noise".to_vec();
    stream.extend_from_slice(&corrupted);
    stream.extend_from_slice(&bytes);

    let mut decoder = StreamDecoder::new();
    decoder.push(&stream);
    loop {
        match decoder.next_frame() {
            Ok(Some(f)) => println!("frame: tag {} at {} s, {:?}", f.tag_id, f.timestamp(), f.entries),
            Ok(None) => break,
            Err(e) => println!("rejected: {e}"),
        }
    }
    println!(
        "frames {}, integrity errors {}, resync bytes {}",
        decoder.frames, decoder.integrity_errors, decoder.resync_bytes
    );
    Ok(())
}
