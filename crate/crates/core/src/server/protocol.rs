//! Session wire format. Every message is a payload whose first byte is an
//! opcode; on TCP each payload is preceded by its length as a `u32`, on
//! WebSocket each binary message is one payload. Integers are little-endian.
//!
//! Client to server:
//! - `CONNECT 0x01`: size `u8`, seed `u64`, mode `u8`
//! - `STEP 0x02`: action `u8`
//! - `RESET 0x03`: seed `u64`
//!
//! Server to client:
//! - `FRAME 0x10`: reward `f32`, done `u8`, score `u32`, step `u32`,
//!   12288 RGB bytes, top-down length `u32`, then if non-zero: width `u16`,
//!   height `u16`, RGB bytes
//! - `ERROR 0x7F`: code `u8`, UTF-8 message

use std::io::{self, Read, Write};

use crate::render::FRAME_BYTES;

pub const OP_CONNECT: u8 = 0x01;
pub const OP_STEP: u8 = 0x02;
pub const OP_RESET: u8 = 0x03;
pub const OP_FRAME: u8 = 0x10;
pub const OP_ERROR: u8 = 0x7F;

/// Mode bit: paced human play with episode recording.
pub const MODE_PLAY: u8 = 0b01;
/// Mode bit: attach a top-down map to every frame.
pub const MODE_TOP_DOWN: u8 = 0b10;

/// Largest payload either side accepts.
pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    Malformed = 1,
    UnknownOpcode = 2,
    NotConnected = 3,
    BadAction = 4,
    BadSize = 5,
    EpisodeDone = 6,
    Internal = 7,
}

impl ErrorCode {
    pub fn from_u8(v: u8) -> Option<Self> {
        use ErrorCode::*;
        [Malformed, UnknownOpcode, NotConnected, BadAction, BadSize, EpisodeDone, Internal].into_iter().find(|c| *c as u8 == v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClientMessage {
    Connect { size: u8, seed: u64, mode: u8 },
    Step { action: u8 },
    Reset { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopDown {
    pub width: u16,
    pub height: u16,
    pub rgb: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMessage {
    pub reward: f32,
    pub done: bool,
    pub score: u32,
    pub step: u32,
    pub rgb: Vec<u8>,
    pub top_down: Option<TopDown>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServerMessage {
    Frame(FrameMessage),
    Error { code: ErrorCode, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeError {
    pub code: ErrorCode,
    pub message: String,
}

fn malformed(message: String) -> DecodeError {
    DecodeError { code: ErrorCode::Malformed, message }
}

fn take<const N: usize>(bytes: &[u8], at: usize) -> Option<[u8; N]> {
    bytes.get(at..at + N).map(|s| s.try_into().unwrap())
}

impl ClientMessage {
    pub fn encode(&self) -> Vec<u8> {
        match *self {
            ClientMessage::Connect { size, seed, mode } => {
                let mut out = vec![OP_CONNECT, size];
                out.extend_from_slice(&seed.to_le_bytes());
                out.push(mode);
                out
            }
            ClientMessage::Step { action } => vec![OP_STEP, action],
            ClientMessage::Reset { seed } => {
                let mut out = vec![OP_RESET];
                out.extend_from_slice(&seed.to_le_bytes());
                out
            }
        }
    }

    pub fn decode(payload: &[u8]) -> Result<Self, DecodeError> {
        let (&op, body) = payload.split_first().ok_or_else(|| malformed("empty message".into()))?;
        let expect = |len: usize, name: &str| {
            if body.len() == len {
                Ok(())
            } else {
                Err(malformed(format!("{name} body is {} bytes, expected {len}", body.len())))
            }
        };
        match op {
            OP_CONNECT => {
                expect(10, "CONNECT")?;
                Ok(ClientMessage::Connect { size: body[0], seed: u64::from_le_bytes(take(body, 1).unwrap()), mode: body[9] })
            }
            OP_STEP => {
                expect(1, "STEP")?;
                Ok(ClientMessage::Step { action: body[0] })
            }
            OP_RESET => {
                expect(8, "RESET")?;
                Ok(ClientMessage::Reset { seed: u64::from_le_bytes(take(body, 0).unwrap()) })
            }
            other => Err(DecodeError { code: ErrorCode::UnknownOpcode, message: format!("unknown opcode 0x{other:02x}") }),
        }
    }
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error { code, message: message.into() }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            ServerMessage::Frame(f) => {
                let td_len = f.top_down.as_ref().map_or(0, |t| 4 + t.rgb.len());
                let mut out = Vec::with_capacity(1 + 13 + f.rgb.len() + 4 + td_len);
                out.push(OP_FRAME);
                out.extend_from_slice(&f.reward.to_le_bytes());
                out.push(f.done as u8);
                out.extend_from_slice(&f.score.to_le_bytes());
                out.extend_from_slice(&f.step.to_le_bytes());
                out.extend_from_slice(&f.rgb);
                out.extend_from_slice(&(td_len as u32).to_le_bytes());
                if let Some(t) = &f.top_down {
                    out.extend_from_slice(&t.width.to_le_bytes());
                    out.extend_from_slice(&t.height.to_le_bytes());
                    out.extend_from_slice(&t.rgb);
                }
                out
            }
            ServerMessage::Error { code, message } => {
                let mut out = vec![OP_ERROR, *code as u8];
                out.extend_from_slice(message.as_bytes());
                out
            }
        }
    }

    pub fn decode(payload: &[u8]) -> Result<Self, DecodeError> {
        let (&op, body) = payload.split_first().ok_or_else(|| malformed("empty message".into()))?;
        match op {
            OP_FRAME => {
                let short = || malformed("truncated FRAME".into());
                let reward = f32::from_le_bytes(take(body, 0).ok_or_else(short)?);
                let done = *body.get(4).ok_or_else(short)? != 0;
                let score = u32::from_le_bytes(take(body, 5).ok_or_else(short)?);
                let step = u32::from_le_bytes(take(body, 9).ok_or_else(short)?);
                let rgb = body.get(13..13 + FRAME_BYTES).ok_or_else(short)?.to_vec();
                let at = 13 + FRAME_BYTES;
                let td_len = u32::from_le_bytes(take(body, at).ok_or_else(short)?) as usize;
                let rest = &body[at + 4..];
                if rest.len() != td_len {
                    return Err(malformed(format!("top-down length {td_len}, {} bytes follow", rest.len())));
                }
                let top_down = if td_len == 0 {
                    None
                } else {
                    let width = u16::from_le_bytes(take(rest, 0).ok_or_else(short)?);
                    let height = u16::from_le_bytes(take(rest, 2).ok_or_else(short)?);
                    if rest.len() != 4 + 3 * width as usize * height as usize {
                        return Err(malformed("top-down size disagrees with its dimensions".into()));
                    }
                    Some(TopDown { width, height, rgb: rest[4..].to_vec() })
                };
                Ok(ServerMessage::Frame(FrameMessage { reward, done, score, step, rgb, top_down }))
            }
            OP_ERROR => {
                let code = body.first().and_then(|&c| ErrorCode::from_u8(c)).ok_or_else(|| malformed("bad ERROR code".into()))?;
                Ok(ServerMessage::Error { code, message: String::from_utf8_lossy(&body[1..]).into_owned() })
            }
            other => Err(DecodeError { code: ErrorCode::UnknownOpcode, message: format!("unknown opcode 0x{other:02x}") }),
        }
    }
}

/// Reads one length-prefixed payload. `Ok(None)` on a clean end of stream
/// before the length prefix.
pub fn read_frame<R: Read>(r: &mut R, max_len: usize) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..])? {
            0 if got == 0 => return Ok(None),
            0 => return Err(io::ErrorKind::UnexpectedEof.into()),
            n => got += n,
        }
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > max_len {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds {max_len}")));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(payload))
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_round_trip() {
        for m in [
            ClientMessage::Connect { size: 9, seed: u64::MAX - 3, mode: MODE_PLAY | MODE_TOP_DOWN },
            ClientMessage::Step { action: 5 },
            ClientMessage::Reset { seed: 42 },
        ] {
            assert_eq!(ClientMessage::decode(&m.encode()), Ok(m));
        }
        let connect = ClientMessage::Connect { size: 9, seed: 1, mode: 0 }.encode();
        assert_eq!(connect, [1, 9, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn server_messages_round_trip() {
        let frame = FrameMessage {
            reward: 1.0,
            done: true,
            score: 7,
            step: 1000,
            rgb: (0..FRAME_BYTES).map(|i| i as u8).collect(),
            top_down: Some(TopDown { width: 2, height: 1, rgb: vec![1, 2, 3, 4, 5, 6] }),
        };
        let m = ServerMessage::Frame(frame.clone());
        assert_eq!(ServerMessage::decode(&m.encode()), Ok(m));
        let plain = ServerMessage::Frame(FrameMessage { top_down: None, ..frame });
        assert_eq!(plain.encode().len(), 1 + 13 + FRAME_BYTES + 4);
        assert_eq!(ServerMessage::decode(&plain.encode()), Ok(plain));
        let e = ServerMessage::error(ErrorCode::BadAction, "action 9");
        assert_eq!(ServerMessage::decode(&e.encode()), Ok(e));
    }

    #[test]
    fn malformed_client_messages() {
        assert_eq!(ClientMessage::decode(&[]).unwrap_err().code, ErrorCode::Malformed);
        assert_eq!(ClientMessage::decode(&[OP_STEP]).unwrap_err().code, ErrorCode::Malformed);
        assert_eq!(ClientMessage::decode(&[OP_STEP, 1, 2]).unwrap_err().code, ErrorCode::Malformed);
        assert_eq!(ClientMessage::decode(&[0x55, 0]).unwrap_err().code, ErrorCode::UnknownOpcode);
    }

    #[test]
    fn frame_io() {
        let mut buf = Vec::new();
        write_frame(&mut buf, &[OP_STEP, 3]).unwrap();
        assert_eq!(buf, [2, 0, 0, 0, OP_STEP, 3]);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r, 16).unwrap(), Some(vec![OP_STEP, 3]));
        assert_eq!(read_frame(&mut r, 16).unwrap(), None);
        let mut r = &buf[..];
        assert!(read_frame(&mut r, 1).is_err());
        let mut r = &buf[..3];
        assert!(read_frame(&mut r, 16).is_err());
    }
}
