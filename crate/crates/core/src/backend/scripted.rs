//! Deterministic rule-based provider: the offline oracle backend.
//!
//! The rule is a pure function of (session history, message), so repeated
//! runs are byte-identical and end-to-end outcomes can be computed in
//! closed form by replaying the rule over a corpus.

use super::{Message, Provider, ProviderError, Role};

/// Marker planted in synthetic rumor comments.
pub const RUMOR_MARKER: &str = "[[RUMOR]]";
/// Marker planted in synthetic news the backend should claim no knowledge
/// about when probed without a reasoning directive.
pub const UNKNOWN_MARKER: &str = "[[UNKNOWN]]";

pub const FAKE_ANSWER: &str = "Therefore, the answer is: A. Fake.";
pub const REAL_ANSWER: &str = "Therefore, the answer is: B. Real.";
pub const REFUSAL_TEXT: &str = "I cannot verify the credibility of real-time or specific news events as my training only includes information up until January 2022, and I do not have the capability to access the internet for real-time updates.";

/// Reasoning directives put this sentence in front of the option list;
/// vanilla probes do not. Its absence is how the rule recognizes a probe
/// it may refuse.
const DIRECTIVE_SENTINEL: &str = "Based on above results";

/// If the current message or any earlier user message in the session
/// carries the rumor marker, answer fake (session memory); a probe
/// carrying the unknown marker with no reasoning directive gets the
/// refusal; everything else is real.
pub fn scripted_rule_response(prior_history: &[Message], message: &str) -> String {
    let rumor_seen = message.contains(RUMOR_MARKER)
        || prior_history
            .iter()
            .any(|m| m.role == Role::User && m.content.contains(RUMOR_MARKER));
    if rumor_seen {
        FAKE_ANSWER.to_string()
    } else if message.contains(UNKNOWN_MARKER) && !message.contains(DIRECTIVE_SENTINEL) {
        REFUSAL_TEXT.to_string()
    } else {
        REAL_ANSWER.to_string()
    }
}

pub struct ScriptedProvider;

impl Provider for ScriptedProvider {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn complete(&self, history: &[Message]) -> Result<String, ProviderError> {
        let (last, prior) = history
            .split_last()
            .ok_or_else(|| ProviderError::Fatal("empty history".into()))?;
        Ok(scripted_rule_response(prior, &last.content))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_in_later_step() {
        let prior = vec![
            Message::user("step one, nothing here"),
            Message::assistant(REAL_ANSWER),
        ];
        assert_eq!(
            scripted_rule_response(&prior, "step two [[RUMOR]] Based on above results"),
            FAKE_ANSWER
        );
    }

    #[test]
    fn session_memory_keeps_fake() {
        let prior = vec![
            Message::user("step one [[RUMOR]]"),
            Message::assistant(FAKE_ANSWER),
        ];
        assert_eq!(scripted_rule_response(&prior, "clean step two"), FAKE_ANSWER);
    }

    #[test]
    fn unknown_probe_refuses_without_directive() {
        assert_eq!(
            scripted_rule_response(&[], "vanilla probe [[UNKNOWN]] Please choose"),
            REFUSAL_TEXT
        );
        assert_eq!(
            scripted_rule_response(&[], "probe [[UNKNOWN]] Based on above results, please choose"),
            REAL_ANSWER
        );
    }

    #[test]
    fn clean_input_is_real() {
        assert_eq!(scripted_rule_response(&[], "nothing special"), REAL_ANSWER);
    }
}
