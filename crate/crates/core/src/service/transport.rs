//! WebSocket host: one reader/writer thread per client around the session loop.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{Receiver, Sender, TryRecvError};
use tungstenite::{Message, WebSocket};

use crate::error::{Error, Result};
use crate::service::session::{run_session_loop, LoopOptions, LoopSummary, Session, TelemetryHub};
use crate::service::wire::{decode_command, encode, OperatorCommand, ServerMessage};

const POLL: Duration = Duration::from_millis(5);

/// Accept clients on `listener` and run `session` until `shutdown` is raised
/// or the planner fails.
pub fn serve(
    listener: TcpListener,
    mut session: Session,
    telemetry_hz: f64,
    client_queue: usize,
    shutdown: Arc<AtomicBool>,
) -> Result<LoopSummary> {
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or_default();
    listener.set_nonblocking(true).map_err(|e| Error::io(&local, e))?;
    let hub = Arc::new(TelemetryHub::new(client_queue));
    let (tx, rx) = crossbeam_channel::unbounded::<OperatorCommand>();
    let hello = encode(&ServerMessage::Hello { control_hz: session.control_hz(), telemetry_hz });

    let acceptor = {
        let hub = hub.clone();
        let shutdown = shutdown.clone();
        std::thread::spawn(move || accept_clients(listener, hub, tx, hello, shutdown))
    };
    let options = LoopOptions::decimated(session.control_hz(), telemetry_hz);
    let result = run_session_loop(&mut session, &rx, &hub, &shutdown, options);
    shutdown.store(true, Ordering::Release);
    let clients = acceptor.join().unwrap_or_default();
    for client in clients {
        let _ = client.join();
    }
    result
}

fn accept_clients(
    listener: TcpListener,
    hub: Arc<TelemetryHub>,
    commands: Sender<OperatorCommand>,
    hello: String,
    shutdown: Arc<AtomicBool>,
) -> Vec<JoinHandle<()>> {
    let mut clients = Vec::new();
    while !shutdown.load(Ordering::Acquire) {
        match listener.accept() {
            Ok((stream, _)) => {
                let frames = hub.subscribe();
                let commands = commands.clone();
                let hello = hello.clone();
                let shutdown = shutdown.clone();
                clients.push(std::thread::spawn(move || {
                    let _ = run_client(stream, frames, commands, hello, shutdown);
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL * 4),
            Err(_) => std::thread::sleep(POLL * 4),
        }
    }
    clients
}

fn run_client(
    stream: TcpStream,
    frames: Receiver<Arc<str>>,
    commands: Sender<OperatorCommand>,
    hello: String,
    shutdown: Arc<AtomicBool>,
) -> tungstenite::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(Duration::from_secs(1)))?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::Io(ErrorKind::WouldBlock.into()),
    })?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    ws.send(Message::text(hello))?;
    loop {
        if shutdown.load(Ordering::Acquire) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        loop {
            match frames.try_recv() {
                Ok(text) => ws.write(Message::text(&*text))?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        ws.flush()?;
        match ws.read() {
            Ok(Message::Text(text)) => handle_text(&mut ws, text.as_str(), &commands)?,
            Ok(Message::Binary(bytes)) => handle_text(&mut ws, &String::from_utf8_lossy(&bytes), &commands)?,
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
    }
}

fn handle_text(
    ws: &mut WebSocket<TcpStream>,
    text: &str,
    commands: &Sender<OperatorCommand>,
) -> tungstenite::Result<()> {
    match decode_command(text) {
        Ok(cmd) => {
            let _ = commands.send(cmd);
        }
        Err(e) => ws.send(Message::text(encode(&ServerMessage::Error { message: e.to_string() })))?,
    }
    Ok(())
}
