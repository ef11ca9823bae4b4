//! Replay provider: serves responses recorded for exact message
//! histories, and fails loudly on a miss rather than falling through to
//! anything remote.

use super::{cache_key, Message, Provider, ProviderError, Role};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// One recorded exchange. The digest is computed at load time from the
/// full history, so fixture files stay human-readable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub messages: Vec<RecordMessage>,
    pub response: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordMessage {
    pub role: String,
    pub content: String,
}

pub struct ReplayProvider {
    model_id: String,
    temperature: f64,
    map: HashMap<String, String>,
}

impl ReplayProvider {
    pub fn from_records(
        records: &[ReplayRecord],
        model_id: &str,
        temperature: f64,
    ) -> Result<Self, String> {
        let mut map = HashMap::new();
        for (i, rec) in records.iter().enumerate() {
            let history = rec
                .messages
                .iter()
                .map(|m| {
                    let role = match m.role.as_str() {
                        "user" => Role::User,
                        "assistant" => Role::Assistant,
                        other => return Err(format!("record {i}: unknown role `{other}`")),
                    };
                    Ok(Message {
                        role,
                        content: m.content.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            map.insert(cache_key(model_id, temperature, &history), rec.response.clone());
        }
        Ok(Self {
            model_id: model_id.to_string(),
            temperature,
            map,
        })
    }

    /// Loads a JSONL fixture, one record per line.
    pub fn load(path: &Path, model_id: &str, temperature: f64) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read replay fixture {}: {e}", path.display()))?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(line)
                .map_err(|e| format!("replay fixture line {}: {e}", lineno + 1))?;
            records.push(rec);
        }
        Self::from_records(&records, model_id, temperature)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn complete(&self, history: &[Message]) -> Result<String, ProviderError> {
        let key = cache_key(&self.model_id, self.temperature, history);
        self.map.get(&key).cloned().ok_or_else(|| {
            let tail = history
                .last()
                .map(|m| m.content.chars().take(80).collect::<String>())
                .unwrap_or_default();
            ProviderError::Fatal(format!(
                "no replay record for history of {} message(s) (key {key}, last message starts: {tail:?})",
                history.len()
            ))
        })
    }
}
