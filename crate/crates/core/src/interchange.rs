//! Lossless instance and transcript files: JSON documents with a format tag
//! and version.

use serde::{Deserialize, Serialize};

use crate::model::Instance;
use crate::sim::Transcript;
use crate::Error;

pub const FORMAT: &str = "mtplan-instance";
pub const VERSION: u32 = 1;
pub const TRANSCRIPT_FORMAT: &str = "mtplan-transcript";

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    instance: Instance,
}

pub fn instance_to_string(instance: &Instance) -> String {
    let envelope = Envelope {
        format: FORMAT.to_string(),
        version: VERSION,
        instance: instance.clone(),
    };
    serde_json::to_string_pretty(&envelope).expect("instance serializes") + "\n"
}

/// Reads an instance file and validates the result.
pub fn instance_from_str(text: &str) -> Result<Instance, Error> {
    let envelope: Envelope =
        serde_json::from_str(text).map_err(|e| Error::Interchange(e.to_string()))?;
    if envelope.format != FORMAT {
        return Err(Error::Interchange(format!(
            "unexpected format tag {:?}",
            envelope.format
        )));
    }
    if envelope.version != VERSION {
        return Err(Error::Interchange(format!(
            "unsupported version {}",
            envelope.version
        )));
    }
    envelope.instance.validate()?;
    Ok(envelope.instance)
}

#[derive(Serialize, Deserialize)]
struct TranscriptEnvelope {
    format: String,
    version: u32,
    transcript: Transcript,
}

pub fn transcript_to_string(transcript: &Transcript) -> String {
    let envelope = TranscriptEnvelope {
        format: TRANSCRIPT_FORMAT.to_string(),
        version: VERSION,
        transcript: transcript.clone(),
    };
    serde_json::to_string_pretty(&envelope).expect("transcript serializes") + "\n"
}

pub fn transcript_from_str(text: &str) -> Result<Transcript, Error> {
    let envelope: TranscriptEnvelope =
        serde_json::from_str(text).map_err(|e| Error::Interchange(e.to_string()))?;
    if envelope.format != TRANSCRIPT_FORMAT || envelope.version != VERSION {
        return Err(Error::Interchange(format!(
            "expected {TRANSCRIPT_FORMAT} version {VERSION}, found {} version {}",
            envelope.format, envelope.version
        )));
    }
    Ok(envelope.transcript)
}
