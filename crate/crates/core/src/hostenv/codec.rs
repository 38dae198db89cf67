//! String codecs exposed to scripts: `escape`/`unescape`, the URI functions
//! and base64. All operate on UTF-16 code units.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

fn hex_val(u: u16) -> Option<u16> {
    match u {
        0x30..=0x39 => Some(u - 0x30),
        0x41..=0x46 => Some(u - 0x41 + 10),
        0x61..=0x66 => Some(u - 0x61 + 10),
        _ => None,
    }
}

fn hex_run(units: &[u16], at: usize, n: usize) -> Option<u16> {
    let slice = units.get(at..at + n)?;
    slice
        .iter()
        .try_fold(0u16, |acc, &u| Some(acc * 16 + hex_val(u)?))
}

/// `unescape`: decodes `%XX` and `%uXXXX` sequences, leaving malformed ones.
pub fn unescape(units: &[u16]) -> Vec<u16> {
    let mut out = Vec::with_capacity(units.len());
    let mut i = 0;
    while i < units.len() {
        let u = units[i];
        if u == b'%' as u16 {
            if units.get(i + 1) == Some(&(b'u' as u16)) {
                if let Some(v) = hex_run(units, i + 2, 4) {
                    out.push(v);
                    i += 6;
                    continue;
                }
            }
            if let Some(v) = hex_run(units, i + 1, 2) {
                out.push(v);
                i += 3;
                continue;
            }
        }
        out.push(u);
        i += 1;
    }
    out
}

/// `escape`.
pub fn escape(units: &[u16]) -> Vec<u16> {
    const KEEP: &[u8] = b"@*_+-./";
    let mut out = Vec::with_capacity(units.len());
    for &u in units {
        if u < 128 && ((u as u8).is_ascii_alphanumeric() || KEEP.contains(&(u as u8))) {
            out.push(u);
        } else if u < 256 {
            out.extend(format!("%{u:02X}").encode_utf16());
        } else {
            out.extend(format!("%u{u:04X}").encode_utf16());
        }
    }
    out
}

/// Longest run of back-to-back `%uXXXX` or `\uXXXX` escapes in `units`.
pub fn longest_unicode_escape_run(units: &[u16]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut i = 0;
    while i < units.len() {
        let is_escape = (units[i] == b'%' as u16 || units[i] == b'\\' as u16)
            && units.get(i + 1) == Some(&(b'u' as u16))
            && hex_run(units, i + 2, 4).is_some();
        if is_escape {
            run += 1;
            best = best.max(run);
            i += 6;
        } else {
            run = 0;
            i += 1;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UriError;

/// `encodeURIComponent` (`component = true`) and `encodeURI`.
pub fn encode_uri(units: &[u16], component: bool) -> Result<String, UriError> {
    const MARK: &[u8] = b"-_.!~*'()";
    const RESERVED: &[u8] = b";/?:@&=+$,#";
    let mut out = String::with_capacity(units.len());
    for r in char::decode_utf16(units.iter().copied()) {
        let c = r.map_err(|_| UriError)?;
        let kept = c.is_ascii()
            && (MARK.contains(&(c as u8)) || (!component && RESERVED.contains(&(c as u8))));
        if c.is_ascii_alphanumeric() || kept {
            out.push(c);
        } else {
            let mut buf = [0u8; 4];
            for b in c.encode_utf8(&mut buf).bytes() {
                out.push_str(&format!("%{b:02X}"));
            }
        }
    }
    Ok(out)
}

/// `decodeURIComponent` (`component = true`) and `decodeURI`.
pub fn decode_uri(units: &[u16], component: bool) -> Result<Vec<u16>, UriError> {
    const RESERVED: &[u8] = b";/?:@&=+$,#";
    let mut out = Vec::with_capacity(units.len());
    let mut i = 0;
    while i < units.len() {
        if units[i] != b'%' as u16 {
            out.push(units[i]);
            i += 1;
            continue;
        }
        let mut bytes = Vec::new();
        let start = i;
        let first = hex_run(units, i + 1, 2).ok_or(UriError)? as u8;
        bytes.push(first);
        i += 3;
        let extra = match first {
            0x00..=0x7f => 0,
            0xc0..=0xdf => 1,
            0xe0..=0xef => 2,
            0xf0..=0xf7 => 3,
            _ => return Err(UriError),
        };
        for _ in 0..extra {
            if units.get(i) != Some(&(b'%' as u16)) {
                return Err(UriError);
            }
            bytes.push(hex_run(units, i + 1, 2).ok_or(UriError)? as u8);
            i += 3;
        }
        let s = std::str::from_utf8(&bytes).map_err(|_| UriError)?;
        if !component && bytes.len() == 1 && RESERVED.contains(&bytes[0]) {
            out.extend_from_slice(&units[start..i]);
        } else {
            out.extend(s.encode_utf16());
        }
    }
    Ok(out)
}

/// `atob`: forgiving base64 decode into Latin-1 code units.
pub fn atob(units: &[u16]) -> Option<Vec<u16>> {
    let mut text: String = String::with_capacity(units.len());
    for &u in units {
        let c = char::from_u32(u as u32)?;
        if c.is_ascii_whitespace() {
            continue;
        }
        text.push(c);
    }
    let trimmed = text.trim_end_matches('=');
    let mut padded = trimmed.to_string();
    while !padded.len().is_multiple_of(4) {
        padded.push('=');
    }
    let bytes = STANDARD.decode(padded.as_bytes()).ok()?;
    Some(bytes.into_iter().map(u16::from).collect())
}

/// `btoa`; `None` if a code unit is outside Latin-1.
pub fn btoa(units: &[u16]) -> Option<String> {
    let bytes: Option<Vec<u8>> = units.iter().map(|&u| u8::try_from(u).ok()).collect();
    Some(STANDARD.encode(bytes?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> Vec<u16> {
        s.encode_utf16().collect()
    }

    #[test]
    fn unescape_handles_both_forms() {
        assert_eq!(unescape(&u("%u9090%41")), vec![0x9090, 0x41]);
        assert_eq!(unescape(&u("%zz%u12")), u("%zz%u12"));
    }

    #[test]
    fn escape_roundtrip() {
        let s = u("a b\u{e9}\u{263a}/");
        assert_eq!(String::from_utf16(&escape(&s)).unwrap(), "a%20b%E9%u263A/");
        assert_eq!(unescape(&escape(&s)), s);
    }

    #[test]
    fn escape_runs() {
        let mut s = "x".to_string();
        for _ in 0..40 {
            s.push_str("%u4141");
        }
        s.push_str("\\u4141");
        assert_eq!(longest_unicode_escape_run(&u(&s)), 41);
        assert_eq!(longest_unicode_escape_run(&u("%u41 %u4141")), 1);
    }

    #[test]
    fn uri_functions() {
        assert_eq!(encode_uri(&u("a b/é"), true).unwrap(), "a%20b%2F%C3%A9");
        assert_eq!(encode_uri(&u("a b/é"), false).unwrap(), "a%20b/%C3%A9");
        assert_eq!(decode_uri(&u("a%20b%2F%C3%A9"), true).unwrap(), u("a b/é"));
        assert_eq!(decode_uri(&u("%2F"), false).unwrap(), u("%2F"));
        assert!(decode_uri(&u("%E0%A4"), true).is_err());
    }

    #[test]
    fn base64() {
        assert_eq!(btoa(&u("hello")).unwrap(), "aGVsbG8=");
        assert_eq!(atob(&u("aGVsbG8")).unwrap(), u("hello"));
        assert!(atob(&u("!!")).is_none());
        assert!(btoa(&[0x263a]).is_none());
    }
}
