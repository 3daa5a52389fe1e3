//! Reference protocol server: one response line per request line.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use serde::{Deserialize, Serialize};

use super::flat::{load_adapter, save_adapter};
use super::mock::{examples_to_consume, mock_train};
use super::{output_path, TrainRequest, TrainResponse, TrainerError};
use crate::alignment::read_labels;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServeMode {
    /// Return the input adapter unchanged.
    Echo,
    /// Apply the mock update rule with the given step size.
    Mock { eta: f64 },
}

fn echo(request: &TrainRequest) -> Result<TrainResponse, TrainerError> {
    let adapter = load_adapter(&request.adapter_in)?;
    let seen = read_labels(&request.corpus)
        .map(|l| examples_to_consume(request.epoch_fraction, l.len()))
        .unwrap_or(0);
    let out = output_path(request);
    save_adapter(&adapter, &out)?;
    let mut stats = serde_json::Map::new();
    stats.insert("trainer".into(), "echo".into());
    Ok(TrainResponse {
        adapter_out: out,
        examples_seen: seen,
        trainer_stats: stats,
    })
}

/// Answer one request line. Never fails: errors become `{"error": ..}`.
pub fn handle_line(mode: ServeMode, line: &str) -> String {
    let result = serde_json::from_str::<TrainRequest>(line)
        .map_err(|e| TrainerError::InvalidRequest(e.to_string()))
        .and_then(|req| match mode {
            ServeMode::Echo => echo(&req),
            ServeMode::Mock { eta } => mock_train(&req, eta),
        });
    match result {
        Ok(resp) => serde_json::to_string(&resp).expect("response serialises"),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

/// Serve requests from `input` until end of stream.
pub fn serve(mode: ServeMode, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", handle_line(mode, &line))?;
        output.flush()?;
    }
    Ok(())
}

/// Serve each accepted connection in turn until the listener fails.
pub fn serve_tcp(mode: ServeMode, listener: TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let reader = BufReader::new(stream.try_clone()?);
        if let Err(e) = serve(mode, reader, stream) {
            log::warn!("connection ended: {e}");
        }
    }
    Ok(())
}
