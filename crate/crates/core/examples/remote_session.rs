//! Starts the session server on a free port and drives it over TCP:
//! connect, step, send a bad message, reset.
//!
//! `cargo run --release --example remote_session`

use memmaze::server::{Client, ClientMessage, Server, ServerConfig, ServerMessage};

fn show(m: &ServerMessage) -> String {
    match m {
        ServerMessage::Frame(f) => format!("FRAME step {} reward {} score {} done {}", f.step, f.reward, f.score, f.done),
        ServerMessage::Error { code, message } => format!("ERROR {code:?}: {message}"),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (addr, _) = Server::bind("127.0.0.1:0", ServerConfig::default())?.spawn()?;
    println!("server on {addr}");
    let mut client = Client::connect(addr)?;
    println!("{}", show(&client.request(ClientMessage::Connect { size: 9, seed: 1, mode: 0 })?));
    for action in [1, 1, 4, 1, 5] {
        println!("{}", show(&client.request(ClientMessage::Step { action })?));
    }
    println!("{}", show(&client.request(ClientMessage::Step { action: 9 })?));
    println!("{}", show(&client.request_raw(&[0xEE])?));
    println!("{}", show(&client.request(ClientMessage::Reset { seed: 2 })?));
    Ok(())
}
