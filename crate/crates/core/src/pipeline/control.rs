use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{ScheduleEntry, SourceConfig};

pub const PROTOCOL_VERSION: u32 = 1;

/// Inbound control message body. Applied between hops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Control {
    SetParams {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refractory: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        combo_window: Option<u64>,
    },
    Inject {
        class_id: u8,
        hold_hops: u64,
    },
    Pause,
    Resume,
    SetSource {
        source: SourceConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schedule: Option<Vec<ScheduleEntry>>,
    },
}

/// A parsed inbound line.
#[derive(Debug, Clone, PartialEq)]
pub struct Inbound {
    pub seq: u64,
    pub msg: Control,
}

/// Parse one inbound line. On failure returns the `seq` if it could be read
/// and a reason.
pub fn parse_inbound(line: &str) -> Result<Inbound, (Option<u64>, String)> {
    let mut v: Value = serde_json::from_str(line).map_err(|e| (None, format!("invalid JSON: {e}")))?;
    let obj = v.as_object_mut().ok_or((None, "message must be a JSON object".to_string()))?;
    let seq = obj.remove("seq").and_then(|s| s.as_u64());
    let Some(seq) = seq else {
        return Err((None, "missing or non-integer \"seq\"".into()));
    };
    match obj.remove("v").and_then(|v| v.as_u64()) {
        Some(1) => {}
        Some(other) => return Err((Some(seq), format!("unsupported protocol version {other}"))),
        None => return Err((Some(seq), "missing \"v\"".into())),
    }
    // deny_unknown_fields does not cover unit variants of a tagged enum
    let extra = obj.keys().find(|k| *k != "type").cloned();
    let msg: Control = serde_json::from_value(v).map_err(|e| (Some(seq), e.to_string()))?;
    if let (Control::Pause | Control::Resume, Some(k)) = (&msg, extra) {
        return Err((Some(seq), format!("unknown field `{k}`")));
    }
    Ok(Inbound { seq, msg })
}

/// Reply to an inbound message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ack { v: u32, seq: u64 },
    Err { v: u32, seq: Option<u64>, reason: String },
}

impl Reply {
    pub fn ack(seq: u64) -> Self {
        Reply::Ack { v: PROTOCOL_VERSION, seq }
    }

    pub fn err(seq: Option<u64>, reason: impl Into<String>) -> Self {
        Reply::Err { v: PROTOCOL_VERSION, seq, reason: reason.into() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        let cases = [
            (r#"{"v":1,"seq":1,"type":"set_params","theta":1000}"#, Control::SetParams {
                lambda: None,
                theta: Some(1000.0),
                refractory: None,
                combo_window: None,
            }),
            (r#"{"v":1,"seq":1,"type":"inject","class_id":3,"hold_hops":12}"#, Control::Inject {
                class_id: 3,
                hold_hops: 12,
            }),
            (r#"{"v":1,"seq":1,"type":"pause"}"#, Control::Pause),
            (r#"{"v":1,"seq":1,"type":"resume"}"#, Control::Resume),
            (
                r#"{"v":1,"seq":1,"type":"set_source","source":{"kind":"synth","seed":4}}"#,
                Control::SetSource { source: SourceConfig::Synth { seed: 4 }, schedule: None },
            ),
        ];
        for (line, want) in cases {
            assert_eq!(parse_inbound(line).unwrap(), Inbound { seq: 1, msg: want });
        }
    }

    #[test]
    fn malformed() {
        assert_eq!(parse_inbound("{").unwrap_err().0, None);
        assert_eq!(parse_inbound(r#"{"v":1,"type":"pause"}"#).unwrap_err().0, None);
        assert_eq!(parse_inbound(r#"{"v":2,"seq":5,"type":"pause"}"#).unwrap_err().0, Some(5));
        assert_eq!(parse_inbound(r#"{"seq":5,"type":"pause"}"#).unwrap_err().0, Some(5));
        assert!(parse_inbound(r#"{"v":1,"seq":5,"type":"dance"}"#).is_err());
        assert!(parse_inbound(r#"{"v":1,"seq":5,"type":"inject","class_id":3}"#).is_err());
        assert!(parse_inbound(r#"{"v":1,"seq":5,"type":"pause","extra":1}"#).is_err());
    }

    #[test]
    fn reply_shape() {
        assert_eq!(serde_json::to_string(&Reply::ack(3)).unwrap(), r#"{"type":"ack","v":1,"seq":3}"#);
        assert_eq!(
            serde_json::to_string(&Reply::err(None, "x")).unwrap(),
            r#"{"type":"err","v":1,"seq":null,"reason":"x"}"#
        );
    }
}
