#![allow(dead_code)]

//! Scripted protocol session with its golden responses. `<ts>` stands for
//! any unix-millisecond timestamp.
//!
//! Preconditions: manual mode, a freshly started simulator (counter 0) onto
//! which the roll (1000, 820, 564) has been loaded, so the counter is 1.

pub const GOLDEN: &[(&str, &str)] = &[
    ("READ db1,w2", "OK 1000 GOOD <ts>"),
    ("READ db1,w4", "OK 820 GOOD <ts>"),
    ("READ db1,w6", "OK 564 GOOD <ts>"),
    ("READ db1,w8", "OK 1 GOOD <ts>"),
    ("READ db1,w12", "OK 0 GOOD <ts>"),
    ("WRITE db1,w12 70", "OK"),
    ("READ db1,w12", "OK 70 GOOD <ts>"),
    ("WRITE db1,w2 65535", "OK"),
    ("READ db1,w2", "OK 65535 GOOD <ts>"),
    ("WRITE db1,w2 0", "OK"),
    ("READ db1,w2", "OK 0 GOOD <ts>"),
    ("READ db9,w0", "ERR UNKNOWN_TAG db9,w0"),
    ("READ db1,w10", "ERR UNKNOWN_TAG db1,w10"),
    ("WRITE db2,w2 5", "ERR UNKNOWN_TAG db2,w2"),
    ("READ db1,w3", "ERR BAD_SYNTAX malformed address db1,w3"),
    ("READ dbx,w2", "ERR BAD_SYNTAX malformed address dbx,w2"),
    ("READ db1", "ERR BAD_SYNTAX malformed address db1"),
    ("READ", "ERR BAD_SYNTAX wrong argument count for READ"),
    ("READ db1,w2 db1,w4", "ERR BAD_SYNTAX wrong argument count for READ"),
    ("WRITE db1,w12", "ERR BAD_SYNTAX wrong argument count for WRITE"),
    ("WRITE db1,w12 seventy", "ERR BAD_SYNTAX not an integer: seventy"),
    ("WRITE db1,w12 65536", "ERR RANGE 65536 outside 0..=65535"),
    ("WRITE db1,w12 -1", "ERR RANGE -1 outside 0..=65535"),
    ("WRITE db1,w8 7", "ERR RANGE db1,w8 is read-only"),
    ("read db1,w2", "ERR BAD_SYNTAX unknown command read"),
    ("PING", "ERR BAD_SYNTAX unknown command PING"),
    ("", "ERR BAD_SYNTAX empty request"),
    ("ADVANCE 2", "ERR BAD_SYNTAX wrong argument count for ADVANCE"),
    ("READ db1,w12", "OK 70 GOOD <ts>"),
    ("ADVANCE", "OK 2"),
    ("READ db1,w8", "OK 2 GOOD <ts>"),
    ("READ db1,w12", "OK 0 GOOD <ts>"),
    ("ADVANCE", "OK 3"),
    ("READ db1,w8", "OK 3 GOOD <ts>"),
];

/// Replaces the trailing timestamp of a READ response with `<ts>`.
pub fn mask(resp: &str) -> String {
    let parts: Vec<&str> = resp.split(' ').collect();
    match parts.as_slice() {
        ["OK", v, q @ ("GOOD" | "BAD"), t] if t.bytes().all(|b| b.is_ascii_digit()) => {
            format!("OK {v} {q} <ts>")
        }
        _ => resp.to_string(),
    }
}

/// First mismatch between a session's responses and the golden ones.
pub fn diff(responses: &[String]) -> Option<String> {
    if responses.len() != GOLDEN.len() {
        return Some(format!("{} responses for {} requests", responses.len(), GOLDEN.len()));
    }
    GOLDEN.iter().zip(responses).find_map(|((req, want), got)| {
        let got = mask(got);
        (got != *want).then(|| format!("{req:?}: want {want:?}, got {got:?}"))
    })
}
