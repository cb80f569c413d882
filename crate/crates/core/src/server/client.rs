use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde_json::{json, Value as Json};

/// Blocking client for the line protocol.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            next_id: 1,
        })
    }

    /// Sends one request and waits for its response.
    pub fn request(&mut self, op: &str, args: Vec<Json>) -> io::Result<Json> {
        let id = self.next_id;
        self.next_id += 1;
        self.send_raw(&json!({"id": id, "op": op, "args": args}).to_string())?;
        self.read_response()
    }

    pub fn send_raw(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }

    pub fn read_response(&mut self) -> io::Result<Json> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "connection closed",
            ));
        }
        serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Sends a write op; returns the version or the server's error text.
    pub fn write(&mut self, op: &str, args: Vec<Json>) -> io::Result<Result<u64, String>> {
        let r = self.request(op, args)?;
        Ok(if r["ok"] == json!(true) {
            Ok(r["version"].as_u64().unwrap_or(0))
        } else {
            Err(r["error"].as_str().unwrap_or("").to_string())
        })
    }
}
