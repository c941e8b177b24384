//! Content hashing: record ids, prompt digests, cache keys, file digests.
//!
//! Every digest is SHA-256 over a domain-separated byte string, so ids are
//! stable across runs and platforms and never collide across record kinds.

use sha2::{Digest, Sha256};

/// Unit separator between fields of a digest input.
const FIELD_SEP: u8 = 0x1f;
/// Record separator between repeated groups (e.g. chat messages).
const GROUP_SEP: u8 = 0x1e;

fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// SHA-256 of a domain tag plus a sequence of fields, hex-encoded.
pub fn tagged_digest(domain: &str, fields: &[&str]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    for field in fields {
        hasher.update([FIELD_SEP]);
        hasher.update(field.as_bytes());
    }
    hex(&hasher.finalize())
}

/// Like [`tagged_digest`] but over (role, content) groups, for chat prompts.
pub fn transcript_digest(domain: &str, messages: &[(&str, &str)]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    for (role, content) in messages {
        hasher.update([GROUP_SEP]);
        hasher.update(role.as_bytes());
        hasher.update([FIELD_SEP]);
        hasher.update(content.as_bytes());
    }
    hex(&hasher.finalize())
}

/// SHA-256 of raw bytes (file contents, serialized indexes), hex-encoded.
pub fn bytes_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Stable id for an instruction: hash of (source, text), truncated to 128 bits.
pub fn instruction_id(text: &str, source: &str) -> String {
    tagged_digest("instruction.v1", &[source, text])[..32].to_string()
}

/// Stable id for a response.
///
/// The sample index participates so that identical texts sampled at different
/// indices stay distinct records.
pub fn response_id(instruction_id: &str, origin: &str, sample_index: u32, text: &str) -> String {
    let idx = sample_index.to_string();
    tagged_digest("response.v1", &[instruction_id, origin, &idx, text])[..32].to_string()
}
