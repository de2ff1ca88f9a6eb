use std::io::Write;
use std::sync::Arc;
use std::thread;

use memmaze::rng::mix64;
use memmaze::server::protocol::{read_frame, write_frame, MAX_PAYLOAD, OP_CONNECT, OP_RESET, OP_STEP};
use memmaze::server::{BatchedEnv, Client, ClientMessage, LaneResult, Server, ServerConfig, ServerMessage, Session};
use memmaze::{CameraParams, EnvConfig, Preset};

fn random_payload(k: &mut u64) -> Vec<u8> {
    let mut next = || {
        *k = mix64(*k);
        *k
    };
    let len = (next() % 24) as usize;
    let mut p: Vec<u8> = (0..len).map(|_| next() as u8).collect();
    // Mostly valid opcodes, so decoding gets past the first byte.
    if !p.is_empty() && next() % 4 != 0 {
        p[0] = [OP_CONNECT, OP_STEP, OP_RESET][(next() % 3) as usize];
    }
    if p.len() == 11 && p[0] == OP_CONNECT && next() % 2 == 0 {
        p[1] = [9, 11, 13, 15][(next() % 4) as usize];
    }
    p
}

/// Fuzzed CONNECTs may request paced play mode; skip the pacing.
fn fast() -> ServerConfig {
    ServerConfig { play_tick: std::time::Duration::ZERO, ..Default::default() }
}

#[test]
fn fuzzed_messages_always_get_one_decodable_reply() {
    let mut session = Session::new(Arc::new(fast()));
    let mut k = 1;
    let mut frames = 0;
    for _ in 0..100_000 {
        let reply = session.handle(&random_payload(&mut k));
        let bytes = reply.encode();
        assert_eq!(ServerMessage::decode(&bytes).unwrap(), reply);
        frames += matches!(reply, ServerMessage::Frame(_)) as usize;
    }
    assert!(frames > 1000, "only {frames} frames; fuzz never got past decoding");
}

#[test]
fn fuzzed_stream_keeps_server_alive() {
    let (addr, _) = Server::bind("127.0.0.1:0", fast()).unwrap().spawn().unwrap();
    let mut client = Client::connect(addr).unwrap();
    let mut k = 2;
    for _ in 0..5_000 {
        client.request_raw(&random_payload(&mut k)).unwrap();
    }
    // Garbage that is not even a valid length prefix only ends that connection.
    let mut raw = std::net::TcpStream::connect(addr).unwrap();
    raw.write_all(&[0xFF; 64]).unwrap();
    let reply = read_frame(&mut raw, MAX_PAYLOAD).unwrap().unwrap();
    assert!(matches!(ServerMessage::decode(&reply).unwrap(), ServerMessage::Error { .. }));
    drop(raw);
    let mut fresh = Client::connect(addr).unwrap();
    assert!(matches!(fresh.request(ClientMessage::Connect { size: 9, seed: 0, mode: 0 }).unwrap(), ServerMessage::Frame(_)));
}

fn script(seed: u64) -> Vec<ClientMessage> {
    let mut msgs = vec![ClientMessage::Connect { size: 11, seed, mode: 0 }];
    msgs.extend((0..200).map(|i| ClientMessage::Step { action: (mix64(seed + i) % 6) as u8 }));
    msgs.push(ClientMessage::Reset { seed: seed + 1 });
    msgs.extend((0..50).map(|i| ClientMessage::Step { action: (mix64(seed * 3 + i) % 6) as u8 }));
    msgs
}

#[test]
fn concurrent_equal_seed_sessions_stream_identically() {
    let (addr, _) = Server::bind("127.0.0.1:0", ServerConfig::default()).unwrap().spawn().unwrap();
    let run = move || {
        let mut c = Client::connect(addr).unwrap();
        script(21).into_iter().map(|m| c.request(m).unwrap()).collect::<Vec<_>>()
    };
    let handles: Vec<_> = (0..4).map(|_| thread::spawn(run)).collect();
    let streams: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert!(streams.iter().all(|s| s == &streams[0]));
}

#[test]
fn other_connections_do_not_disturb_a_session() {
    let (addr, _) = Server::bind("127.0.0.1:0", fast()).unwrap().spawn().unwrap();
    let mut solo = Client::connect(addr).unwrap();
    let alone: Vec<_> = script(5).into_iter().map(|m| solo.request(m).unwrap()).collect();

    let mut a = Client::connect(addr).unwrap();
    let mut b = Client::connect(addr).unwrap();
    b.request(ClientMessage::Connect { size: 11, seed: 5, mode: 0 }).unwrap();
    let mut k = 9;
    let mut mixed = Vec::new();
    for m in script(5) {
        mixed.push(a.request(m).unwrap());
        b.request_raw(&random_payload(&mut k)).unwrap();
        b.request(ClientMessage::Step { action: (k % 6) as u8 }).unwrap();
    }
    drop(b);
    assert_eq!(mixed, alone);
}

#[test]
fn batched_rollouts_repeat_bit_for_bit() {
    let run = |parallel| {
        let mut config = EnvConfig::preset(Preset::Maze9x9);
        config.maze.episode_length = 150;
        let mut env = BatchedEnv::new(config, 16, 99, Some(CameraParams::default())).unwrap().with_parallel(parallel);
        let mut log: Vec<LaneResult> = Vec::new();
        let mut frames = Vec::new();
        let mut digest = 0u64;
        for t in 0..400u64 {
            let actions: Vec<u8> = (0..16).map(|i| (mix64(t * 16 + i) % 6) as u8).collect();
            log.extend(env.batch_step(&actions).unwrap());
            env.frames_into(&mut frames);
            digest = frames.iter().fold(digest, |h, &b| mix64(h ^ b as u64));
        }
        (log, digest)
    };
    let first = run(false);
    assert_eq!(first, run(false));
    assert_eq!(first, run(true));
    assert!(first.0.iter().filter(|r| r.done).count() == 16 * 2);
}

#[test]
fn write_frame_then_read_frame_round_trips() {
    let mut buf = Vec::new();
    for p in [&b""[..], b"\x02\x01", &[7u8; 1000]] {
        write_frame(&mut buf, p).unwrap();
    }
    let mut r = &buf[..];
    assert_eq!(read_frame(&mut r, MAX_PAYLOAD).unwrap().unwrap(), b"");
    assert_eq!(read_frame(&mut r, MAX_PAYLOAD).unwrap().unwrap(), b"\x02\x01");
    assert_eq!(read_frame(&mut r, MAX_PAYLOAD).unwrap().unwrap(), vec![7u8; 1000]);
    assert!(read_frame(&mut r, MAX_PAYLOAD).unwrap().is_none());
}
