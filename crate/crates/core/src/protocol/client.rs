use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde_json::{json, Value};

/// Blocking line-oriented client for the environment server.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Client> {
        let writer = TcpStream::connect(addr)?;
        writer.set_nodelay(true)?;
        let reader = BufReader::new(writer.try_clone()?);
        Ok(Client { reader, writer })
    }

    /// Sends one raw line and returns the raw response line without its newline.
    pub fn send_line(&mut self, line: &str) -> io::Result<String> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        let mut resp = String::new();
        if self.reader.read_line(&mut resp)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the connection"));
        }
        Ok(resp.trim_end_matches(['\r', '\n']).to_string())
    }

    pub fn request(&mut self, kind: &str, env_id: Option<&str>, payload: Value) -> io::Result<Value> {
        let line = json!({"type": kind, "env_id": env_id, "payload": payload}).to_string();
        let resp = self.send_line(&line)?;
        serde_json::from_str(&resp).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn hello(&mut self) -> io::Result<Value> {
        self.request("hello", None, json!({"version": super::VERSION}))
    }

    pub fn reset(&mut self, env_id: &str, scene: Option<&str>, seed: u64) -> io::Result<Value> {
        self.request("reset", Some(env_id), json!({"scene": scene, "seed": seed}))
    }

    pub fn step(&mut self, env_id: &str, action: [f64; 3], lookat: [f64; 3]) -> io::Result<Value> {
        self.request("step", Some(env_id), json!({"action": action, "lookat": lookat}))
    }

    pub fn close(&mut self, env_id: &str) -> io::Result<Value> {
        self.request("close", Some(env_id), json!({}))
    }
}
