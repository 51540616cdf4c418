use std::collections::VecDeque;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::PipelineConfig;
use super::control::{parse_inbound, Control, Inbound, Reply, PROTOCOL_VERSION};
use super::session::SessionWriter;
use super::stages::ModelFile;
use super::Decoder;
use crate::command::IntegratorParams;
use crate::error::Result;

#[derive(Default)]
struct OutState {
    control: VecDeque<String>,
    ticks: VecDeque<String>,
    dropped_ticks: u64,
    closed: bool,
}

/// Per-client outbound queues. Ticks are bounded and lose their oldest
/// entries; control replies are never dropped.
struct Outbox {
    state: Mutex<OutState>,
    ready: Condvar,
    tick_cap: usize,
}

impl Outbox {
    fn new(tick_cap: usize) -> Self {
        Self { state: Mutex::default(), ready: Condvar::new(), tick_cap: tick_cap.max(1) }
    }

    fn push_control(&self, line: String) {
        self.state.lock().unwrap().control.push_back(line);
        self.ready.notify_one();
    }

    fn push_tick(&self, line: String) {
        let mut s = self.state.lock().unwrap();
        if s.ticks.len() == self.tick_cap {
            s.ticks.pop_front();
            s.dropped_ticks += 1;
        }
        s.ticks.push_back(line);
        drop(s);
        self.ready.notify_one();
    }

    fn close(&self) {
        self.state.lock().unwrap().closed = true;
        self.ready.notify_all();
    }

    fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    /// Block until there is something to send; control lines come first.
    fn take(&self) -> Option<Vec<String>> {
        let mut s = self.state.lock().unwrap();
        while s.control.is_empty() && s.ticks.is_empty() && !s.closed {
            s = self.ready.wait(s).unwrap();
        }
        if s.closed {
            return None;
        }
        let mut out: Vec<String> = s.control.drain(..).collect();
        out.extend(s.ticks.drain(..));
        Some(out)
    }
}

enum Cmd {
    Connect { outbox: Arc<Outbox>, stream: TcpStream },
    Message { outbox: Arc<Outbox>, inbound: Inbound },
}

#[derive(Serialize)]
#[serde(tag = "type", rename = "hello")]
struct Hello<'a> {
    v: u32,
    next_tick: u64,
    hop_ms: u64,
    paused: bool,
    tick_buffer: usize,
    params: &'a IntegratorParams,
}

/// Running service. Dropping the handle does not stop it; call [`stop`].
///
/// [`stop`]: ServiceHandle::stop
pub struct ServiceHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn stop(self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Block until the service exits.
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

/// Start the control service on 127.0.0.1:`port` (0 picks a free port).
pub fn serve(cfg: PipelineConfig, model: ModelFile, port: u16) -> Result<ServiceHandle> {
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let log = match &cfg.serve.log_path {
        Some(p) => Some(SessionWriter::create(p, &cfg, &model)?),
        None => None,
    };
    let tick_cap = cfg.serve.tick_buffer;
    let decoder = Decoder::new(cfg, model.weights)?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();

    let acceptor = {
        let stop = stop.clone();
        thread::spawn(move || accept_loop(listener, tx, tick_cap, stop))
    };
    let decode = {
        let stop = stop.clone();
        thread::spawn(move || decode_loop(decoder, rx, log, stop))
    };
    Ok(ServiceHandle { addr, stop, threads: vec![acceptor, decode] })
}

fn accept_loop(listener: TcpListener, tx: Sender<Cmd>, tick_cap: usize, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                let _ = stream.set_nodelay(true);
                let outbox = Arc::new(Outbox::new(tick_cap));
                let (Ok(read_half), Ok(write_half)) = (stream.try_clone(), stream.try_clone())
                else {
                    continue;
                };
                spawn_writer(write_half, outbox.clone());
                spawn_reader(read_half, outbox.clone(), tx.clone());
                if tx.send(Cmd::Connect { outbox, stream }).is_err() {
                    return;
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
}

fn spawn_writer(mut stream: TcpStream, outbox: Arc<Outbox>) {
    thread::spawn(move || {
        while let Some(lines) = outbox.take() {
            let mut buf = String::new();
            for l in lines {
                buf.push_str(&l);
                buf.push('\n');
            }
            if stream.write_all(buf.as_bytes()).is_err() {
                outbox.close();
                break;
            }
        }
    });
}

fn spawn_reader(stream: TcpStream, outbox: Arc<Outbox>, tx: Sender<Cmd>) {
    thread::spawn(move || {
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            match parse_inbound(&line) {
                Ok(inbound) => {
                    if tx.send(Cmd::Message { outbox: outbox.clone(), inbound }).is_err() {
                        break;
                    }
                }
                Err((seq, reason)) => outbox.push_control(to_line(&Reply::err(seq, reason))),
            }
        }
        outbox.close();
    });
}

fn to_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("message serializes")
}

struct Client {
    outbox: Arc<Outbox>,
    stream: TcpStream,
}

fn decode_loop(
    mut dec: Decoder,
    rx: Receiver<Cmd>,
    mut log: Option<SessionWriter>,
    stop: Arc<AtomicBool>,
) {
    let mut clients: Vec<Client> = Vec::new();
    let pace = Duration::from_millis(dec.config().serve.pace_ms);
    let idle_poll = Duration::from_millis(20);
    let mut exhausted = false;
    let mut next_hop = Instant::now();

    while !stop.load(Ordering::SeqCst) {
        // Commands are handled until the next hop is due.
        loop {
            let running = !dec.is_paused() && !exhausted;
            let wait = if running {
                next_hop.saturating_duration_since(Instant::now())
            } else {
                idle_poll
            };
            let cmd = if running && wait.is_zero() {
                match rx.try_recv() {
                    Ok(c) => c,
                    Err(_) => break,
                }
            } else {
                match rx.recv_timeout(wait) {
                    Ok(c) => c,
                    Err(RecvTimeoutError::Timeout) => {
                        if running || stop.load(Ordering::SeqCst) {
                            break;
                        }
                        continue;
                    }
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            };
            match cmd {
                Cmd::Connect { outbox, stream } => {
                    outbox.push_control(to_line(&Hello {
                        v: PROTOCOL_VERSION,
                        next_tick: dec.next_tick(),
                        hop_ms: dec.config().hop_ms,
                        paused: dec.is_paused(),
                        tick_buffer: outbox.tick_cap,
                        params: &dec.config().integrator,
                    }));
                    clients.push(Client { outbox, stream });
                }
                Cmd::Message { outbox, inbound } => {
                    let tick = dec.next_tick();
                    let reply = match dec.apply(&inbound.msg) {
                        Ok(()) => {
                            if let Some(w) = log.as_mut() {
                                let _ = w.control(tick, &inbound.msg);
                            }
                            if matches!(inbound.msg, Control::SetSource { .. }) {
                                exhausted = false;
                            }
                            Reply::ack(inbound.seq)
                        }
                        Err(e) => Reply::err(Some(inbound.seq), e.to_string()),
                    };
                    outbox.push_control(to_line(&reply));
                }
            }
            if stop.load(Ordering::SeqCst) {
                break;
            }
        }
        if stop.load(Ordering::SeqCst) {
            break;
        }
        if dec.is_paused() || exhausted {
            continue;
        }

        clients.retain(|c| !c.outbox.is_closed());
        match dec.hop() {
            Ok(Some(report)) => {
                let line = to_line(&report);
                for c in &clients {
                    c.outbox.push_tick(line.clone());
                }
                if let Some(w) = log.as_mut() {
                    let _ = w.tick(&report).and_then(|_| w.flush());
                }
            }
            Ok(None) => exhausted = true,
            Err(e) => {
                let _ = dec.apply(&Control::Pause);
                let line = to_line(&Reply::err(None, format!("decode stopped: {e}")));
                for c in &clients {
                    c.outbox.push_control(line.clone());
                }
            }
        }
        next_hop += pace;
        let now = Instant::now();
        if next_hop < now {
            next_hop = now;
        }
    }

    if let Some(w) = log.as_mut() {
        let _ = w.flush();
    }
    for c in clients {
        c.outbox.close();
        let _ = c.stream.shutdown(Shutdown::Both);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_drop_oldest_replies_kept() {
        let o = Outbox::new(3);
        for i in 0..10 {
            o.push_tick(format!("t{i}"));
            if i % 4 == 0 {
                o.push_control(format!("c{i}"));
            }
        }
        let got = o.take().unwrap();
        assert_eq!(got, vec!["c0", "c4", "c8", "t7", "t8", "t9"]);
        assert_eq!(o.state.lock().unwrap().dropped_ticks, 7);
        o.close();
        assert!(o.take().is_none());
    }
}
