//! Utterance files for batch transcript runs: one `{"t_s": .., "text": ..}`
//! object per line, sorted by time.

use serde::Deserialize;

use crate::runner::Utterance;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    t_s: f64,
    text: String,
}

/// Parses an utterance file. Errors name the 1-based line.
pub fn parse_utterances(text: &str, duration_s: f64) -> Result<Vec<Utterance>, String> {
    let mut out: Vec<Utterance> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| format!("line {n}: {e}"))?;
        if !(line.t_s >= 0.0) {
            return Err(format!("line {n}: t_s must be non-negative"));
        }
        if line.t_s > duration_s {
            return Err(format!("line {n}: t_s {} is beyond the scenario duration of {duration_s} s", line.t_s));
        }
        if line.t_s < last_t {
            return Err(format!("line {n}: utterances are not sorted by t_s"));
        }
        last_t = line.t_s;
        out.push(Utterance { t_ms: (line.t_s * 1000.0).round() as u64, text: line.text });
    }
    Ok(out)
}

/// One reply per line, each terminated by a newline.
pub fn render_replies(replies: &[String]) -> String {
    replies.iter().map(|r| format!("{}\n", r.replace('\n', " "))).collect()
}
