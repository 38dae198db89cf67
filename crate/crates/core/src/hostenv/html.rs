//! Script extraction from HTML, at regex level.

use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedScript {
    /// `script@<offset>` or `<handler>@<offset>`, e.g. `onload@120`.
    pub name: String,
    pub offset: usize,
    pub text: String,
    /// Set for `<script src=...>`; such scripts are reported, not fetched.
    pub src: Option<String>,
}

fn script_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?is)<script\b([^>]*)>(.*?)(?:</script\s*>|\z)").expect("valid regex")
    })
}

fn handler_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?is)<[a-z][^>]*?\s(on(?:click|load|error))\s*=\s*(?:"([^"]*)"|'([^']*)')"#)
            .expect("valid regex")
    })
}

fn src_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?is)\bsrc\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]+))"#).expect("valid regex")
    })
}

fn decode_entities(s: &str) -> String {
    s.replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

/// Inline `<script>` bodies and `onclick`/`onload`/`onerror` handler bodies,
/// in document order. Scripts with a `src` attribute are returned with empty
/// text and the source URL.
pub fn extract_scripts(html: &str) -> Vec<ExtractedScript> {
    let mut out = Vec::new();
    let mut script_spans = Vec::new();
    for cap in script_re().captures_iter(html) {
        let whole = cap.get(0).expect("match");
        script_spans.push(whole.range());
        let attrs = cap.get(1).map_or("", |m| m.as_str());
        let src = src_re()
            .captures(attrs)
            .and_then(|c| c.get(1).or(c.get(2)).or(c.get(3)))
            .map(|m| m.as_str().to_string());
        let body = cap.get(2).map_or("", |m| m.as_str());
        let offset = whole.start();
        match src {
            Some(src) => out.push(ExtractedScript {
                name: format!("script@{offset}"),
                offset,
                text: String::new(),
                src: Some(src),
            }),
            None if !body.trim().is_empty() => out.push(ExtractedScript {
                name: format!("script@{offset}"),
                offset,
                text: body.to_string(),
                src: None,
            }),
            None => {}
        }
    }
    for cap in handler_re().captures_iter(html) {
        let attr = cap.get(1).expect("attribute");
        if script_spans.iter().any(|r| r.contains(&attr.start())) {
            continue;
        }
        let body = cap.get(2).or(cap.get(3)).map_or("", |m| m.as_str());
        if body.trim().is_empty() {
            continue;
        }
        let offset = attr.start();
        out.push(ExtractedScript {
            name: format!("{}@{offset}", attr.as_str().to_ascii_lowercase()),
            offset,
            text: decode_entities(body),
            src: None,
        });
    }
    out.sort_by_key(|s| s.offset);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_script() {
        let s = extract_scripts("<html><script>var a=1;</script></html>");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "var a=1;");
        assert_eq!(s[0].name, "script@6");
    }

    #[test]
    fn handlers_and_order() {
        let s = extract_scripts("<body onload=\"f()\"><script type='text/javascript'>g()</script><img onerror='h(&quot;x&quot;)'>");
        let texts: Vec<&str> = s.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, vec!["f()", "g()", "h(\"x\")"]);
        assert!(s[0].name.starts_with("onload@"));
    }

    #[test]
    fn no_scripts() {
        assert!(extract_scripts("<p>hello</p>").is_empty());
    }

    #[test]
    fn external_scripts_are_reported() {
        let s = extract_scripts("<script src=\"http://x/y.js\"></script>");
        assert_eq!(s[0].src.as_deref(), Some("http://x/y.js"));
        assert!(s[0].text.is_empty());
    }

    #[test]
    fn unterminated_script_runs_to_end() {
        let s = extract_scripts("<script>document.write(1)");
        assert_eq!(s[0].text, "document.write(1)");
    }
}
