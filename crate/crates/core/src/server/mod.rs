//! Newline-delimited JSON over TCP. One connection is one session.
//!
//! Request: `{"id":u64,"op":string,"args":[...]}`.
//! Response: `{"id":u64,"ok":bool,...}` with `version`, `value`, `parent`,
//! `vertices` or `error` as the op requires. Values are unsigned 64-bit
//! integers; `18446744073709551615` means unreached.
//!
//! Write ops go through the epoch loop. Reads go to the history store.
//! Responses leave in request order. A line that is not a valid request gets
//! an error response and the connection is closed.

mod client;

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::Receiver;
use serde_json::{json, Value as Json};

use crate::ccontrol::{Coordinator, Reply, Session, Update};
use crate::error::Error;

pub use client::Client;

pub const WRITE_OPS: [&str; 5] = [
    "ins_edge",
    "del_edge",
    "ins_vertex",
    "del_vertex",
    "txn_updates",
];

/// A request that failed before reaching the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolError(pub String);

#[derive(Debug)]
pub struct Request {
    pub id: u64,
    pub op: String,
    pub args: Vec<Json>,
}

pub fn parse_request(line: &str) -> Result<Request, ProtocolError> {
    let v: Json =
        serde_json::from_str(line).map_err(|e| ProtocolError(format!("invalid json: {e}")))?;
    let obj = v
        .as_object()
        .ok_or_else(|| ProtocolError("request must be an object".into()))?;
    let id = match obj.get("id") {
        None => 0,
        Some(x) => x
            .as_u64()
            .ok_or_else(|| ProtocolError("id must be an unsigned integer".into()))?,
    };
    let op = obj
        .get("op")
        .and_then(Json::as_str)
        .ok_or_else(|| ProtocolError("missing op".into()))?
        .to_string();
    let args = match obj.get("args") {
        None => Vec::new(),
        Some(Json::Array(a)) => a.clone(),
        Some(_) => return Err(ProtocolError("args must be an array".into())),
    };
    Ok(Request { id, op, args })
}

fn arg_u64(args: &[Json], i: usize, name: &str) -> Result<u64, ProtocolError> {
    args.get(i)
        .and_then(Json::as_u64)
        .ok_or_else(|| ProtocolError(format!("argument {i} ({name}) must be an unsigned integer")))
}

fn arg_opt_u64(args: &[Json], i: usize, name: &str) -> Result<Option<u64>, ProtocolError> {
    match args.get(i) {
        None => Ok(None),
        Some(_) => arg_u64(args, i, name).map(Some),
    }
}

fn arity(args: &[Json], min: usize, max: usize) -> Result<(), ProtocolError> {
    if args.len() < min || args.len() > max {
        return Err(ProtocolError(format!(
            "expected {min}..={max} arguments, got {}",
            args.len()
        )));
    }
    Ok(())
}

/// Parses a write op. Edge ops take `[src, dst]` or `[src, dst, weight]`;
/// the weight defaults to 0.
pub fn parse_update(op: &str, args: &[Json]) -> Result<Update, ProtocolError> {
    let edge = |args: &[Json]| -> Result<(u64, u64, i64), ProtocolError> {
        arity(args, 2, 3)?;
        let w = match args.get(2) {
            None => 0,
            Some(x) => x
                .as_i64()
                .ok_or_else(|| ProtocolError("weight must be a signed integer".into()))?,
        };
        Ok((arg_u64(args, 0, "src")?, arg_u64(args, 1, "dst")?, w))
    };
    match op {
        "ins_edge" => edge(args).map(|(s, d, w)| Update::ins(s, d, w)),
        "del_edge" => edge(args).map(|(s, d, w)| Update::del(s, d, w)),
        "ins_vertex" => arity(args, 0, 0).map(|_| Update::InsVertex),
        "del_vertex" => {
            arity(args, 1, 1)?;
            Ok(Update::DelVertex(arg_u64(args, 0, "vertex")?))
        }
        "txn_updates" => {
            let ops = args
                .iter()
                .map(|item| {
                    let a = item
                        .as_array()
                        .ok_or_else(|| ProtocolError("txn items must be arrays".into()))?;
                    let name = a
                        .first()
                        .and_then(Json::as_str)
                        .ok_or_else(|| ProtocolError("txn item needs an op name".into()))?;
                    if name == "txn_updates" {
                        return Err(ProtocolError(Error::NestedTxn.to_string()));
                    }
                    parse_update(name, &a[1..])
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Update::Txn(ops))
        }
        other => Err(ProtocolError(format!("unknown op '{other}'"))),
    }
}

pub fn error_response(id: u64, msg: &str) -> Json {
    json!({"id": id, "ok": false, "error": msg})
}

fn write_response(id: u64, reply: Reply) -> Json {
    match reply.result {
        Ok(a) => {
            let mut r = json!({"id": id, "ok": true, "version": a.version});
            if !a.new_vertices.is_empty() {
                r["vertices"] = json!(a.new_vertices);
            }
            r
        }
        Err(e) => error_response(id, &e.to_string()),
    }
}

/// Answers a read op against the history store.
pub fn read_response(session: &Session, req: &Request) -> Result<Json, ProtocolError> {
    let args = &req.args;
    let id = req.id;
    let algo_at = |i: usize| arg_opt_u64(args, i, "algorithm").map(|a| a.unwrap_or(0) as usize);
    let engine_err = |e: Error| error_response(id, &e.to_string());
    Ok(match req.op.as_str() {
        "get_current_version" => {
            arity(args, 0, 0)?;
            json!({"id": id, "ok": true, "version": session.current_version()})
        }
        "get_value" => {
            arity(args, 2, 3)?;
            let (ver, v, algo) = (
                arg_u64(args, 0, "version")?,
                arg_u64(args, 1, "vertex")?,
                algo_at(2)?,
            );
            match session.get_value(ver, algo, v) {
                Ok(x) => json!({"id": id, "ok": true, "value": x}),
                Err(e) => engine_err(e),
            }
        }
        "get_parent" => {
            arity(args, 2, 3)?;
            let (ver, v, algo) = (
                arg_u64(args, 0, "version")?,
                arg_u64(args, 1, "vertex")?,
                algo_at(2)?,
            );
            match session.get_parent(ver, algo, v) {
                Ok(p) => {
                    json!({"id": id, "ok": true, "parent": p.map(|p| json!([p.src, p.weight]))})
                }
                Err(e) => engine_err(e),
            }
        }
        "get_modified_vertices" => {
            arity(args, 1, 2)?;
            let (ver, algo) = (arg_u64(args, 0, "version")?, algo_at(1)?);
            match session.get_modified_vertices(ver, algo) {
                Ok(vs) => json!({"id": id, "ok": true, "vertices": vs}),
                Err(e) => engine_err(e),
            }
        }
        "release_history" => {
            arity(args, 1, 1)?;
            match session.release_history(arg_u64(args, 0, "version")?) {
                Ok(()) => json!({"id": id, "ok": true}),
                Err(e) => engine_err(e),
            }
        }
        other => return Err(ProtocolError(format!("unknown op '{other}'"))),
    })
}

enum Pending {
    Ready(Json),
    Write(u64, Receiver<Reply>),
    Close(Json),
}

fn handle_connection(stream: TcpStream, session: Session) {
    let peer = stream.peer_addr().ok();
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let (ptx, prx) = crossbeam_channel::unbounded::<Pending>();
    let writer = std::thread::spawn(move || {
        let mut out = BufWriter::new(write_half);
        for p in prx {
            let (line, close) = match p {
                Pending::Ready(v) => (v, false),
                Pending::Close(v) => (v, true),
                Pending::Write(id, rx) => match rx.recv() {
                    Ok(reply) => (write_response(id, reply), false),
                    Err(_) => (error_response(id, &Error::Shutdown.to_string()), false),
                },
            };
            if writeln!(out, "{line}").and_then(|_| out.flush()).is_err() {
                break;
            }
            if close {
                let _ = out.get_ref().shutdown(std::net::Shutdown::Both);
                break;
            }
        }
    });
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let pending = match parse_request(&line) {
            Err(ProtocolError(msg)) => Pending::Close(error_response(0, &msg)),
            Ok(req) if WRITE_OPS.contains(&req.op.as_str()) => {
                match parse_update(&req.op, &req.args) {
                    Ok(u) => match session.submit(u) {
                        Ok(rx) => Pending::Write(req.id, rx),
                        Err(e) => Pending::Ready(error_response(req.id, &e.to_string())),
                    },
                    Err(ProtocolError(msg)) => Pending::Close(error_response(req.id, &msg)),
                }
            }
            Ok(req) => match read_response(&session, &req) {
                Ok(v) => Pending::Ready(v),
                Err(ProtocolError(msg)) => Pending::Close(error_response(req.id, &msg)),
            },
        };
        let close = matches!(pending, Pending::Close(_));
        if ptx.send(pending).is_err() || close {
            break;
        }
    }
    drop(ptx);
    let _ = writer.join();
    tracing::debug!(?peer, session = session.id(), "connection closed");
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections. Open connections run until closed.
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(h) = self.acceptor.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            let _ = h.join();
        }
    }

    /// Blocks until the acceptor exits.
    pub fn join(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Binds `addr` and accepts connections on a background thread.
pub fn spawn(
    coordinator: Arc<Coordinator>,
    addr: impl ToSocketAddrs,
) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let acceptor = std::thread::Builder::new()
        .name("incgraph-accept".into())
        .spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                match conn {
                    Ok(stream) => {
                        let _ = stream.set_nodelay(true);
                        let session = coordinator.open_session();
                        std::thread::spawn(move || handle_connection(stream, session));
                    }
                    Err(e) => tracing::warn!(error = %e, "accept failed"),
                }
            }
        })?;
    Ok(ServerHandle {
        addr,
        stop,
        acceptor: Some(acceptor),
    })
}
