//! Planner living in another process. Each decision is one JSON line out,
//! one JSON line back:
//!
//! ```text
//! -> {"type":"plan","step":3,"height_cap":10.0,"vector":[...6],"pose":{...},
//!     "grid":"<base64 grid snapshot>","object_center":[x,y,z],"scene_size":20.0}
//! <- {"action":[ax,ay,az],"lookat":[x,y,z]}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{PlanContext, Planner, PlannerDecision, PlannerError};
use crate::protocol::encode_bytes;
use crate::Point;

const TIMEOUT: Duration = Duration::from_secs(60);

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

pub struct ExternPlanner {
    addr: String,
    conn: Option<Conn>,
    seed: u64,
}

#[derive(Deserialize)]
struct Reply {
    action: [f64; 3],
    lookat: [f64; 3],
}

fn ext<E: std::fmt::Display>(e: E) -> PlannerError {
    PlannerError::External(e.to_string())
}

impl ExternPlanner {
    /// Connects lazily on the first decision.
    pub fn new(addr: &str) -> Self {
        ExternPlanner {
            addr: addr.to_string(),
            conn: None,
            seed: 0,
        }
    }

    fn conn(&mut self) -> Result<&mut Conn, PlannerError> {
        if self.conn.is_none() {
            let s = TcpStream::connect(&self.addr).map_err(ext)?;
            s.set_read_timeout(Some(TIMEOUT)).map_err(ext)?;
            s.set_nodelay(true).map_err(ext)?;
            let reader = BufReader::new(s.try_clone().map_err(ext)?);
            self.conn = Some(Conn { reader, writer: s });
        }
        Ok(self.conn.as_mut().expect("just connected"))
    }
}

impl Planner for ExternPlanner {
    fn name(&self) -> String {
        format!("extern:{}", self.addr)
    }

    fn reset(&mut self, seed: u64) {
        self.seed = seed;
    }

    fn plan(&mut self, ctx: &PlanContext) -> Result<PlannerDecision, PlannerError> {
        let p = ctx.pose.position;
        let c = ctx.scene.object_aabb_center();
        let msg = json!({
            "type": "plan",
            "seed": self.seed,
            "step": ctx.step,
            "height_cap": ctx.height_cap,
            "vector": [p.x, p.y, p.z, ctx.pose.pitch, ctx.pose.yaw, ctx.height_cap],
            "pose": {"position": [p.x, p.y, p.z], "yaw": ctx.pose.yaw, "pitch": ctx.pose.pitch},
            "grid": encode_bytes(&ctx.grid.to_bytes()),
            "object_center": [c.x, c.y, c.z],
            "scene_size": ctx.cfg.scene_size,
        })
        .to_string();
        let result = (|| {
            let conn = self.conn()?;
            conn.writer.write_all(msg.as_bytes()).map_err(ext)?;
            conn.writer.write_all(b"\n").map_err(ext)?;
            conn.writer.flush().map_err(ext)?;
            let mut line = String::new();
            if conn.reader.read_line(&mut line).map_err(ext)? == 0 {
                return Err(PlannerError::External("planner closed the connection".into()));
            }
            let r: Reply = serde_json::from_str(&line).map_err(ext)?;
            Ok(PlannerDecision {
                action: r.action,
                lookat: Point::new(r.lookat[0], r.lookat[1], r.lookat[2]),
                fallback: false,
                debug: None,
            })
        })();
        if result.is_err() {
            self.conn = None;
        }
        result
    }
}
