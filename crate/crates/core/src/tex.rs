//! Low-level scanning helpers shared by every stage.
//!
//! All positions are byte offsets. The characters that matter to the
//! scanners (`\`, `{`, `}`, `[`, `]`, `%`, `$`) are ASCII, so an offset produced
//! here is always a char boundary.

/// An unbalanced group or bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unbalanced;

/// The extent of a `{...}` or `[...]` group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group {
    /// Offset of the first byte inside the delimiters.
    pub start: usize,
    /// Offset of the closing delimiter.
    pub end: usize,
    /// Offset just past the closing delimiter.
    pub next: usize,
}

impl Group {
    pub fn inner<'a>(&self, s: &'a str) -> &'a str {
        &s[self.start..self.end]
    }
}

/// A control sequence found at some offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Command<'a> {
    /// Name without the backslash; a single character for control symbols.
    pub name: &'a str,
    /// Offset just past the name.
    pub next: usize,
}

impl Command<'_> {
    pub fn is_word(&self) -> bool {
        self.name.bytes().all(|b| b.is_ascii_alphabetic())
    }
}

/// Reads the control sequence starting at `i` (which must hold a backslash).
pub fn command_at(s: &str, i: usize) -> Option<Command<'_>> {
    let bytes = s.as_bytes();
    if bytes.get(i) != Some(&b'\\') {
        return None;
    }
    let start = i + 1;
    let mut j = start;
    while j < bytes.len() && bytes[j].is_ascii_alphabetic() {
        j += 1;
    }
    if j > start {
        return Some(Command {
            name: &s[start..j],
            next: j,
        });
    }
    let ch = s[start..].chars().next()?;
    let next = start + ch.len_utf8();
    Some(Command {
        name: &s[start..next],
        next,
    })
}

pub fn skip_ws(s: &str, mut i: usize) -> usize {
    let bytes = s.as_bytes();
    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

/// Skips spaces and tabs but stops at a newline.
pub fn skip_inline_ws(s: &str, mut i: usize) -> usize {
    let bytes = s.as_bytes();
    while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
        i += 1;
    }
    i
}

/// Reads a brace group starting exactly at `i`.
pub fn read_group(s: &str, i: usize) -> Result<Group, Unbalanced> {
    read_delimited(s, i, b'{', b'}')
}

/// Reads an optional `[...]` argument starting exactly at `i`. Braces inside
/// the brackets hide any `]` they contain.
pub fn read_bracket(s: &str, i: usize) -> Result<Group, Unbalanced> {
    let bytes = s.as_bytes();
    if bytes.get(i) != Some(&b'[') {
        return Err(Unbalanced);
    }
    let mut depth = 0usize;
    let mut j = i + 1;
    while j < bytes.len() {
        match bytes[j] {
            b'\\' => {
                j += 2;
                continue;
            }
            b'{' => depth += 1,
            b'}' => depth = depth.saturating_sub(1),
            b']' if depth == 0 => {
                return Ok(Group {
                    start: i + 1,
                    end: j,
                    next: j + 1,
                })
            }
            _ => {}
        }
        j += 1;
    }
    Err(Unbalanced)
}

fn read_delimited(s: &str, i: usize, open: u8, close: u8) -> Result<Group, Unbalanced> {
    let bytes = s.as_bytes();
    if bytes.get(i) != Some(&open) {
        return Err(Unbalanced);
    }
    let mut depth = 0usize;
    let mut j = i;
    while j < bytes.len() {
        let b = bytes[j];
        if b == b'\\' {
            j += 2;
            continue;
        }
        if b == open {
            depth += 1;
        } else if b == close {
            depth -= 1;
            if depth == 0 {
                return Ok(Group {
                    start: i + 1,
                    end: j,
                    next: j + 1,
                });
            }
        }
        j += 1;
    }
    Err(Unbalanced)
}

/// Skips whitespace, then reads a brace group.
pub fn read_arg(s: &str, i: usize) -> Result<Group, Unbalanced> {
    read_group(s, skip_ws(s, i))
}

/// Skips whitespace, then reads an optional bracket argument if present.
/// Returns the group (if any) and the offset after it.
pub fn read_optional(s: &str, i: usize) -> Result<(Option<Group>, usize), Unbalanced> {
    let j = skip_ws(s, i);
    if s.as_bytes().get(j) == Some(&b'[') {
        let g = read_bracket(s, j)?;
        Ok((Some(g), g.next))
    } else {
        Ok((None, i))
    }
}

/// If `i` starts a `\verb` (or `\verb*`) span, returns its content range and
/// the offset after the closing delimiter.
pub fn verb_span(s: &str, i: usize) -> Option<(usize, usize, usize)> {
    let cmd = command_at(s, i)?;
    if cmd.name != "verb" {
        return None;
    }
    let mut j = cmd.next;
    if s.as_bytes().get(j) == Some(&b'*') {
        j += 1;
    }
    let delim = s[j..].chars().next()?;
    if delim.is_ascii_alphabetic() || delim.is_whitespace() {
        return None;
    }
    let start = j + delim.len_utf8();
    let end = start + s[start..].find(delim)?;
    Some((start, end, end + delim.len_utf8()))
}

/// If `i` holds `\begin{name}`, returns the environment name and the offset
/// after the closing brace.
pub fn begin_env_at(s: &str, i: usize) -> Option<(&str, usize)> {
    env_marker_at(s, i, "begin")
}

pub fn end_env_at(s: &str, i: usize) -> Option<(&str, usize)> {
    env_marker_at(s, i, "end")
}

fn env_marker_at<'a>(s: &'a str, i: usize, which: &str) -> Option<(&'a str, usize)> {
    let cmd = command_at(s, i)?;
    if cmd.name != which {
        return None;
    }
    let g = read_group(s, skip_inline_ws(s, cmd.next)).ok()?;
    let name = g.inner(s).trim();
    if name.is_empty() {
        return None;
    }
    Some((name, g.next))
}

/// Finds the `\end{env}` matching an environment whose body starts at `from`,
/// honoring nested environments of the same name. Returns the offset of the
/// backslash of `\end` and the offset after its closing brace.
pub fn find_env_end(s: &str, from: usize, env: &str) -> Option<(usize, usize)> {
    let mut depth = 1usize;
    let mut i = from;
    let bytes = s.as_bytes();
    while i < bytes.len() {
        if bytes[i] != b'\\' {
            i += 1;
            continue;
        }
        if let Some((_, _, after)) = verb_span(s, i) {
            i = after;
            continue;
        }
        if let Some((name, after)) = begin_env_at(s, i) {
            if name == env {
                depth += 1;
            }
            i = after;
            continue;
        }
        if let Some((name, after)) = end_env_at(s, i) {
            if name == env {
                depth -= 1;
                if depth == 0 {
                    return Some((i, after));
                }
            }
            i = after;
            continue;
        }
        i += command_at(s, i).map(|c| c.next - i).unwrap_or(1);
    }
    None
}

/// Iterates over every control word or symbol in `s`, skipping `\verb` spans.
/// Yields `(offset, command)`.
pub fn commands(s: &str) -> impl Iterator<Item = (usize, Command<'_>)> {
    let mut i = 0;
    std::iter::from_fn(move || {
        let bytes = s.as_bytes();
        while i < bytes.len() {
            if bytes[i] != b'\\' {
                i += 1;
                continue;
            }
            if let Some((_, _, after)) = verb_span(s, i) {
                i = after;
                continue;
            }
            let at = i;
            let cmd = command_at(s, i)?;
            i = cmd.next;
            return Some((at, cmd));
        }
        None
    })
}

/// Returns true when the braces of `s` (ignoring escaped ones) never close
/// more than they open and end balanced.
pub fn braces_balanced(s: &str) -> bool {
    brace_depth(s) == Some(0)
}

/// Net brace depth of `s`, or `None` when a closing brace has no opener.
pub fn brace_depth(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                i += 2;
                continue;
            }
            b'{' => depth += 1,
            b'}' => depth = depth.checked_sub(1)?,
            _ => {}
        }
        i += 1;
    }
    Some(depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_words_and_symbols() {
        let s = r"\section{A}\%\\";
        let c = command_at(s, 0).unwrap();
        assert_eq!(c.name, "section");
        assert!(c.is_word());
        assert_eq!(command_at(s, 11).unwrap().name, "%");
        assert_eq!(command_at(s, 13).unwrap().name, "\\");
    }

    #[test]
    fn nested_groups() {
        let s = r"{a{b}\}c}rest";
        let g = read_group(s, 0).unwrap();
        assert_eq!(g.inner(s), r"a{b}\}c");
        assert_eq!(&s[g.next..], "rest");
        assert_eq!(read_group("{open", 0), Err(Unbalanced));
    }

    #[test]
    fn brackets_hide_inner_braces() {
        let s = "[a={x]y}]z";
        let g = read_bracket(s, 0).unwrap();
        assert_eq!(g.inner(s), "a={x]y}");
    }

    #[test]
    fn verb_spans() {
        let s = r"x \verb|a%b| y";
        let (a, b, next) = verb_span(s, 2).unwrap();
        assert_eq!(&s[a..b], "a%b");
        assert_eq!(&s[next..], " y");
        assert!(verb_span(r"\verbatim", 0).is_none());
    }

    #[test]
    fn env_end_matching_is_nested() {
        let s = r"\begin{a}x\begin{a}y\end{a}z\end{a}tail";
        let (_, after) = begin_env_at(s, 0).unwrap();
        let (at, next) = find_env_end(s, after, "a").unwrap();
        assert_eq!(&s[at..next], r"\end{a}");
        assert_eq!(&s[next..], "tail");
    }

    #[test]
    fn depth_tracking() {
        assert_eq!(brace_depth("{{}"), Some(1));
        assert_eq!(brace_depth("}"), None);
        assert!(braces_balanced(r"{\{}"));
    }
}
