use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use tungstenite::Message;

use super::protocol::{read_frame, write_frame, ErrorCode, ServerMessage, MAX_PAYLOAD};
use super::session::{ServerConfig, Session};

/// Page served at `/` for browser play.
pub const PLAY_PAGE: &str = include_str!("play.html");

/// Listening socket. Each connection gets its own thread and session.
/// Raw TCP clients and browsers share the port: a connection whose first
/// bytes are `GET ` is treated as HTTP (WebSocket upgrade or the play page),
/// which is unambiguous because that prefix would be an oversized length.
pub struct Server {
    listener: TcpListener,
    config: Arc<ServerConfig>,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: ServerConfig) -> io::Result<Self> {
        Ok(Server { listener: TcpListener::bind(addr)?, config: Arc::new(config) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            let config = Arc::clone(&self.config);
            thread::spawn(move || {
                // A failing connection only ends its own session.
                let _ = handle_connection(stream, config);
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<(SocketAddr, thread::JoinHandle<io::Result<()>>)> {
        let addr = self.local_addr()?;
        Ok((addr, thread::spawn(move || self.run())))
    }
}

fn handle_connection(stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut head = [0u8; 4];
    let n = peek_at_least(&stream, &mut head, Duration::from_secs(10))?;
    if n == 4 && &head == b"GET " {
        serve_http(stream, config)
    } else {
        serve_tcp(stream, config)
    }
}

/// Peeks until `buf` is full, the peer closes, or `timeout` passes.
fn peek_at_least(stream: &TcpStream, buf: &mut [u8], timeout: Duration) -> io::Result<usize> {
    let start = Instant::now();
    loop {
        let n = stream.peek(buf)?;
        if n == buf.len() || n == 0 || start.elapsed() > timeout {
            return Ok(n);
        }
        thread::sleep(Duration::from_millis(2));
    }
}

/// Length-prefixed session loop.
pub fn serve_tcp(mut stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    let mut session = Session::new(config);
    let mut reader = stream.try_clone()?;
    loop {
        match read_frame(&mut reader, MAX_PAYLOAD) {
            Ok(Some(payload)) => write_frame(&mut stream, &session.handle(&payload).encode())?,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                // Oversized length: the stream cannot be resynchronized.
                let _ = write_frame(&mut stream, &ServerMessage::error(ErrorCode::Malformed, e.to_string()).encode());
                return Ok(());
            }
            Err(e) => return Err(e),
        }
    }
}

fn serve_http(mut stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    let mut buf = vec![0u8; 8192];
    let start = Instant::now();
    let head_len = loop {
        let n = stream.peek(&mut buf)?;
        if let Some(i) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            break i + 4;
        }
        if n == buf.len() || n == 0 || start.elapsed() > Duration::from_secs(10) {
            return Ok(());
        }
        thread::sleep(Duration::from_millis(2));
    };
    let head = String::from_utf8_lossy(&buf[..head_len]).to_ascii_lowercase();
    if head.lines().any(|l| l.starts_with("upgrade:") && l.contains("websocket")) {
        return serve_websocket(stream, config);
    }
    io::Read::read_exact(&mut stream, &mut buf[..head_len])?;
    let path = head.split_whitespace().nth(1).unwrap_or("/").to_string();
    let response = if config.serve_page && (path == "/" || path == "/index.html") {
        format!(
            "HTTP/1.1 200 OK\r\nContent-Type: text/html; charset=utf-8\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            PLAY_PAGE.len(),
            PLAY_PAGE
        )
    } else {
        "HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_string()
    };
    stream.write_all(response.as_bytes())?;
    stream.flush()
}

/// One session per WebSocket; each binary message is one payload.
fn serve_websocket(stream: TcpStream, config: Arc<ServerConfig>) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    let mut session = Session::new(config);
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(io::Error::other(e.to_string())),
        };
        let reply = match msg {
            Message::Binary(payload) => session.handle(&payload),
            Message::Close(_) => return Ok(()),
            Message::Text(_) => ServerMessage::error(ErrorCode::Malformed, "binary messages only"),
            _ => continue,
        };
        ws.send(Message::Binary(reply.encode().into())).map_err(|e| io::Error::other(e.to_string()))?;
    }
}

/// Blocking client for the length-prefixed protocol.
pub struct Client {
    stream: TcpStream,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client { stream })
    }

    /// Sends one payload and waits for the reply.
    pub fn request_raw(&mut self, payload: &[u8]) -> io::Result<ServerMessage> {
        write_frame(&mut self.stream, payload)?;
        let reply = read_frame(&mut self.stream, MAX_PAYLOAD)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
        ServerMessage::decode(&reply).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.message))
    }

    pub fn request(&mut self, msg: super::protocol::ClientMessage) -> io::Result<ServerMessage> {
        self.request_raw(&msg.encode())
    }

    pub fn stream_mut(&mut self) -> &mut TcpStream {
        &mut self.stream
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::server::protocol::{ClientMessage, OP_STEP};
    use std::io::Read;

    fn spawn() -> SocketAddr {
        Server::bind("127.0.0.1:0", ServerConfig::default()).unwrap().spawn().unwrap().0
    }

    fn frame(msg: ServerMessage) -> super::super::protocol::FrameMessage {
        match msg {
            ServerMessage::Frame(f) => f,
            other => panic!("expected FRAME, got {other:?}"),
        }
    }

    #[test]
    fn scripted_client_gets_one_frame_per_step() {
        let mut c = Client::connect(spawn()).unwrap();
        assert_eq!(frame(c.request(ClientMessage::Connect { size: 9, seed: 3, mode: 0 }).unwrap()).step, 0);
        for i in 1..=10 {
            assert_eq!(frame(c.request(ClientMessage::Step { action: 1 }).unwrap()).step, i);
        }
        match c.request_raw(&[0x55]).unwrap() {
            ServerMessage::Error { code: ErrorCode::UnknownOpcode, .. } => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(frame(c.request_raw(&[OP_STEP, 0]).unwrap()).step, 11);
    }

    #[test]
    fn oversized_length_gets_error_then_close() {
        let mut c = Client::connect(spawn()).unwrap();
        let s = c.stream_mut();
        s.write_all(&(MAX_PAYLOAD as u32 + 1).to_le_bytes()).unwrap();
        let reply = read_frame(s, MAX_PAYLOAD).unwrap().unwrap();
        assert!(matches!(ServerMessage::decode(&reply).unwrap(), ServerMessage::Error { code: ErrorCode::Malformed, .. }));
        assert!(read_frame(s, MAX_PAYLOAD).unwrap().is_none());
    }

    #[test]
    fn http_serves_play_page_and_404() {
        let addr = spawn();
        let get = |path: &str| {
            let mut s = TcpStream::connect(addr).unwrap();
            write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\n\r\n").unwrap();
            let mut body = String::new();
            s.read_to_string(&mut body).unwrap();
            body
        };
        let page = get("/");
        assert!(page.starts_with("HTTP/1.1 200"));
        assert!(page.ends_with(PLAY_PAGE));
        assert!(get("/nope").starts_with("HTTP/1.1 404"));
    }

    #[test]
    fn websocket_carries_the_same_messages() {
        let addr = spawn();
        let (mut ws, _) = tungstenite::connect(format!("ws://{addr}/session")).unwrap();
        let mut exchange = |m: ClientMessage| {
            ws.send(Message::Binary(m.encode().into())).unwrap();
            match ws.read().unwrap() {
                Message::Binary(b) => ServerMessage::decode(&b).unwrap(),
                other => panic!("{other:?}"),
            }
        };
        let first = frame(exchange(ClientMessage::Connect { size: 9, seed: 3, mode: super::super::protocol::MODE_TOP_DOWN }));
        assert!(first.top_down.is_some());
        let over_ws = frame(exchange(ClientMessage::Step { action: 1 }));

        let mut c = Client::connect(addr).unwrap();
        c.request(ClientMessage::Connect { size: 9, seed: 3, mode: super::super::protocol::MODE_TOP_DOWN }).unwrap();
        assert_eq!(frame(c.request(ClientMessage::Step { action: 1 }).unwrap()), over_ws);
    }
}
