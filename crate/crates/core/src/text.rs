//! Helpers for pulling structured regions out of model responses.

/// A fenced region (```lang ... ```) found in a response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fenced<'a> {
    pub info: &'a str,
    pub body: &'a str,
}

/// All fenced regions, in order. An unterminated final fence runs to the end.
pub fn fenced_regions(text: &str) -> Vec<Fenced<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = find_fence(rest) {
        let after_ticks = open + 3;
        let line_end = rest[after_ticks..]
            .find('\n')
            .map(|i| after_ticks + i)
            .unwrap_or(rest.len());
        let info = rest[after_ticks..line_end].trim();
        let body_start = (line_end + 1).min(rest.len());
        let (body_end, next) = match find_fence(&rest[body_start..]) {
            Some(close) => {
                let close = body_start + close;
                let skip = rest[close..].find('\n').map(|i| close + i + 1).unwrap_or(rest.len());
                (close, skip)
            }
            None => (rest.len(), rest.len()),
        };
        let body = rest[body_start..body_end].trim_end_matches(['\n', '\r']);
        out.push(Fenced { info, body });
        rest = &rest[next..];
    }
    out
}

/// Position of a line-leading ``` in `s`.
fn find_fence(s: &str) -> Option<usize> {
    let mut pos = 0;
    for line in s.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            return Some(pos + (line.len() - trimmed.len()));
        }
        pos += line.len();
    }
    None
}

/// The largest fenced region by body length; earliest wins on ties.
pub fn largest_code_region(text: &str) -> Option<&str> {
    let mut best: Option<&str> = None;
    for region in fenced_regions(text) {
        if best.is_none_or(|b| region.body.len() > b.len()) {
            best = Some(region.body);
        }
    }
    best.filter(|b| !b.trim().is_empty())
}
