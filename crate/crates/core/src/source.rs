//! Reading and flattening the `.tex` tree.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::Diagnostics;
use crate::error::{Error, Result};
use crate::tex;

/// Environments whose interior is passed through untouched.
pub const VERBATIM_ENVS: [&str; 4] = ["verbatim", "Verbatim", "lstlisting", "minted"];

/// Ordering key of a line in the flattened document. `part` orders the pieces
/// of a physical line that a later stage split apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinePos {
    pub index: usize,
    pub part: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    /// Path relative to the main file's directory.
    pub file: String,
    /// 1-based line number in `file`.
    pub line_no: usize,
    /// Comment-stripped text, or the raw text inside verbatim environments.
    pub text: String,
    pub in_verbatim: bool,
    pub pos: LinePos,
}

impl SourceLine {
    pub fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceDocument {
    pub lines: Vec<SourceLine>,
    pub main_file: String,
    pub included_files: BTreeSet<String>,
}

/// Removes everything from the first unescaped `%` to the end of the line.
/// `\%` stays, and so does a `%` inside an inline `\verb` span.
pub fn strip_comment(raw: &str, in_verbatim: bool) -> String {
    if in_verbatim {
        return raw.to_string();
    }
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' => return raw[..i].to_string(),
            b'\\' => {
                if let Some((_, _, after)) = tex::verb_span(raw, i) {
                    i = after;
                } else {
                    // skip the escaped character, which may be multi-byte
                    i += 1 + raw[i + 1..].chars().next().map_or(0, char::len_utf8);
                }
            }
            _ => i += 1,
        }
    }
    raw.to_string()
}

/// Loads `main_tex_path`, inlining every reachable `\input`/`\include`.
pub fn load_document(main_tex_path: &Path, diags: &mut Diagnostics) -> Result<SourceDocument> {
    let content = fs::read(main_tex_path).map_err(|source| Error::MissingInput {
        path: main_tex_path.to_path_buf(),
        source,
    })?;
    let root = main_tex_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let main_file = main_tex_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut loader = Loader {
        root: Some(root),
        lines: Vec::new(),
        included: BTreeSet::new(),
        stack: Vec::new(),
        diags,
    };
    let canonical = fs::canonicalize(main_tex_path).unwrap_or_else(|_| main_tex_path.into());
    loader.included.insert(main_file.clone());
    loader.stack.push(canonical);
    let text = decode(&content, &main_file, loader.diags);
    loader.process(&main_file, &text);
    Ok(SourceDocument {
        lines: loader.lines,
        main_file,
        included_files: loader.included,
    })
}

impl SourceDocument {
    /// Builds a document from in-memory text. Inclusion commands are kept as
    /// text and not followed.
    pub fn from_text(file: &str, text: &str) -> Self {
        let mut diags = Diagnostics::new();
        let mut loader = Loader {
            root: None,
            lines: Vec::new(),
            included: BTreeSet::from([file.to_string()]),
            stack: Vec::new(),
            diags: &mut diags,
        };
        loader.process(file, text);
        SourceDocument {
            lines: loader.lines,
            main_file: file.to_string(),
            included_files: loader.included,
        }
    }

    /// Splits off the preamble. Returns the preamble lines and a document
    /// holding only the lines between `\begin{document}` and `\end{document}`.
    /// Without a `\begin{document}` the whole document is body.
    pub fn split_body(&self) -> (Vec<SourceLine>, SourceDocument) {
        let begin = self.lines.iter().enumerate().find_map(|(i, l)| {
            (!l.in_verbatim)
                .then(|| find_marker(&l.text, "begin", "document").map(|(_, after)| (i, after)))
                .flatten()
        });
        let Some((bi, after)) = begin else {
            return (Vec::new(), self.clone());
        };
        let preamble = self.lines[..bi].to_vec();
        let mut body = Vec::new();
        let first = &self.lines[bi];
        let rest = &first.text[after..];
        if !rest.trim().is_empty() {
            body.push(SourceLine {
                text: rest.to_string(),
                pos: LinePos {
                    part: first.pos.part + 1,
                    ..first.pos
                },
                ..first.clone()
            });
        }
        for line in &self.lines[bi + 1..] {
            if !line.in_verbatim {
                if let Some((at, _)) = find_marker(&line.text, "end", "document") {
                    let head = &line.text[..at];
                    if !head.trim().is_empty() {
                        body.push(SourceLine {
                            text: head.to_string(),
                            ..line.clone()
                        });
                    }
                    break;
                }
            }
            body.push(line.clone());
        }
        let body = SourceDocument {
            lines: body,
            main_file: self.main_file.clone(),
            included_files: self.included_files.clone(),
        };
        (preamble, body)
    }
}

fn find_marker(text: &str, which: &str, env: &str) -> Option<(usize, usize)> {
    tex::commands(text).find_map(|(at, cmd)| {
        if cmd.name != which {
            return None;
        }
        let (name, after) = if which == "begin" {
            tex::begin_env_at(text, at)?
        } else {
            tex::end_env_at(text, at)?
        };
        (name == env).then_some((at, after))
    })
}

fn decode(bytes: &[u8], file: &str, diags: &mut Diagnostics) -> String {
    match String::from_utf8(bytes.to_vec()) {
        Ok(s) => s,
        Err(_) => {
            diags.warn(format!("{file} is not valid UTF-8; invalid bytes replaced"));
            String::from_utf8_lossy(bytes).into_owned()
        }
    }
}

struct Loader<'d> {
    /// Directory inclusions resolve against; `None` disables inclusion.
    root: Option<PathBuf>,
    lines: Vec<SourceLine>,
    included: BTreeSet<String>,
    /// Canonical paths of the files currently being read.
    stack: Vec<PathBuf>,
    diags: &'d mut Diagnostics,
}

enum Target {
    Found { rel: String, abs: PathBuf },
    Missing(String),
}

impl Loader<'_> {
    fn push(&mut self, file: &str, line_no: usize, text: String, in_verbatim: bool) {
        let index = self.lines.len();
        self.lines.push(SourceLine {
            file: file.to_string(),
            line_no,
            text,
            in_verbatim,
            pos: LinePos { index, part: 0 },
        });
    }

    fn process(&mut self, file: &str, content: &str) {
        let mut verbatim: Option<String> = None;
        for (n, raw) in content.lines().enumerate() {
            let line_no = n + 1;
            if let Some(env) = verbatim.clone() {
                match find_marker(raw, "end", &env) {
                    Some((_, after)) => {
                        let text = format!("{}{}", &raw[..after], strip_comment(&raw[after..], false));
                        self.push(file, line_no, text, false);
                        verbatim = None;
                    }
                    None => self.push(file, line_no, raw.to_string(), true),
                }
                continue;
            }
            let text = strip_comment(raw, false);
            if text.trim().is_empty() && !raw.trim().is_empty() {
                // comment-only line
                continue;
            }
            if let Some(env) = opens_verbatim(&text) {
                verbatim = Some(env);
                self.push(file, line_no, text, false);
                continue;
            }
            self.process_line(file, line_no, text);
        }
        if let Some(env) = verbatim {
            self.diags
                .warn(format!("{file}: verbatim environment {env} is never closed"));
        }
    }

    /// Emits one line, inlining any inclusion commands it contains.
    fn process_line(&mut self, file: &str, line_no: usize, text: String) {
        if self.root.is_none() {
            self.push(file, line_no, text, false);
            return;
        }
        let mut cursor = 0;
        let mut pending = String::new();
        let mut any = false;
        for (at, cmd) in tex::commands(&text) {
            if at < cursor || !(cmd.name == "input" || cmd.name == "include") {
                continue;
            }
            let Some((target, next)) = inclusion_arg(&text, cmd.name, cmd.next) else {
                continue;
            };
            match self.resolve(&target) {
                Target::Missing(shown) => {
                    self.diags.warn_at(
                        file,
                        line_no,
                        format!("cannot find included file {shown}; command left in place"),
                    );
                }
                Target::Found { rel, abs } => {
                    pending.push_str(&text[cursor..at]);
                    cursor = next;
                    any = true;
                    let canonical = fs::canonicalize(&abs).unwrap_or_else(|_| abs.clone());
                    if self.stack.contains(&canonical) {
                        self.diags.warn_at(
                            file,
                            line_no,
                            format!("inclusion cycle: {rel} is already being read; skipped"),
                        );
                        continue;
                    }
                    let content = match fs::read(&abs) {
                        Ok(bytes) => decode(&bytes, &rel, self.diags),
                        Err(e) => {
                            self.diags
                                .warn_at(file, line_no, format!("cannot read {rel}: {e}"));
                            continue;
                        }
                    };
                    if !pending.trim().is_empty() {
                        self.push(file, line_no, std::mem::take(&mut pending), false);
                    }
                    pending.clear();
                    self.included.insert(rel.clone());
                    self.stack.push(canonical);
                    self.process(&rel, &content);
                    self.stack.pop();
                }
            }
        }
        if !any {
            self.push(file, line_no, text, false);
            return;
        }
        pending.push_str(&text[cursor..]);
        if !pending.trim().is_empty() {
            self.push(file, line_no, pending, false);
        }
    }

    fn resolve(&self, target: &str) -> Target {
        let root = self.root.as_deref().unwrap_or(Path::new(""));
        let trimmed = target.trim_start_matches("./");
        let mut candidates = Vec::new();
        if Path::new(trimmed).extension().is_none() {
            candidates.push(format!("{trimmed}.tex"));
        } else {
            candidates.push(trimmed.to_string());
            candidates.push(format!("{trimmed}.tex"));
        }
        for rel in &candidates {
            let abs = root.join(rel);
            if abs.is_file() {
                return Target::Found {
                    rel: rel.replace('\\', "/"),
                    abs,
                };
            }
        }
        Target::Missing(candidates.swap_remove(0))
    }
}

/// Reads the file argument of `\input`/`\include`: a brace group, or for
/// `\input` the primitive space-delimited form.
fn inclusion_arg(text: &str, name: &str, after: usize) -> Option<(String, usize)> {
    let j = tex::skip_inline_ws(text, after);
    if text.as_bytes().get(j) == Some(&b'{') {
        let g = tex::read_group(text, j).ok()?;
        let target = g.inner(text).trim();
        return (!target.is_empty()).then(|| (target.to_string(), g.next));
    }
    if name != "input" || j == after {
        return None;
    }
    let end = text[j..]
        .find(|c: char| c.is_whitespace() || c == '\\' || c == '{' || c == '}')
        .map_or(text.len(), |k| j + k);
    (end > j).then(|| (text[j..end].to_string(), end))
}

/// Returns the verbatim environment opened (and not closed) on this line.
fn opens_verbatim(text: &str) -> Option<String> {
    for (at, cmd) in tex::commands(text) {
        if cmd.name != "begin" {
            continue;
        }
        let Some((name, after)) = tex::begin_env_at(text, at) else {
            continue;
        };
        if VERBATIM_ENVS.contains(&name) && find_marker(&text[after..], "end", name).is_none() {
            return Some(name.to_string());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn strips_basic_comment() {
        assert_eq!(strip_comment("foo % note", false), "foo ");
    }

    #[test]
    fn keeps_escaped_percent() {
        assert_eq!(strip_comment(r"50\% done % note", false), r"50\% done ");
        // a doubled backslash does not escape the percent sign
        assert_eq!(strip_comment(r"a\\% c", false), r"a\\");
    }

    #[test]
    fn verbatim_line_unchanged() {
        assert_eq!(strip_comment("x = y % mod", true), "x = y % mod");
    }

    #[test]
    fn verb_protects_percent() {
        assert_eq!(strip_comment(r"use \verb|%d| here % c", false), r"use \verb|%d| here ");
    }

    #[test]
    fn single_file_identity() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "main.tex", "alpha\n\nbeta\n");
        let mut d = Diagnostics::new();
        let doc = load_document(&dir.path().join("main.tex"), &mut d).unwrap();
        let texts: Vec<&str> = doc.lines.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, ["alpha", "", "beta"]);
        assert_eq!(doc.main_file, "main.tex");
        assert!(doc.included_files.contains("main.tex"));
        assert!(d.is_empty());
    }

    #[test]
    fn input_is_inlined_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "book.tex", "before\n\\input{chapter4}\nafter\n");
        write(dir.path(), "chapter4.tex", "c1\nc2\n");
        let mut d = Diagnostics::new();
        let doc = load_document(&dir.path().join("book.tex"), &mut d).unwrap();
        let got: Vec<(&str, usize, &str)> = doc
            .lines
            .iter()
            .map(|l| (l.file.as_str(), l.line_no, l.text.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                ("book.tex", 1, "before"),
                ("chapter4.tex", 1, "c1"),
                ("chapter4.tex", 2, "c2"),
                ("book.tex", 3, "after"),
            ]
        );
        assert!(doc.included_files.contains("chapter4.tex"));
    }

    #[test]
    fn include_and_primitive_input_forms() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "m.tex", "\\include{a}\n\\input b.tex\n");
        write(dir.path(), "a.tex", "A\n");
        write(dir.path(), "b.tex", "B\n");
        let mut d = Diagnostics::new();
        let doc = load_document(&dir.path().join("m.tex"), &mut d).unwrap();
        let texts: Vec<&str> = doc.lines.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, ["A", "B"]);
    }

    #[test]
    fn includegraphics_is_not_an_include() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "m.tex", "\\includegraphics{fig}\n");
        let mut d = Diagnostics::new();
        let doc = load_document(&dir.path().join("m.tex"), &mut d).unwrap();
        assert_eq!(doc.lines[0].text, "\\includegraphics{fig}");
        assert!(d.is_empty());
    }

    #[test]
    fn missing_include_warns_and_keeps_line() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "m.tex", "x \\input{nowhere} y\n");
        let mut d = Diagnostics::new();
        let doc = load_document(&dir.path().join("m.tex"), &mut d).unwrap();
        assert_eq!(doc.lines[0].text, "x \\input{nowhere} y");
        assert_eq!(d.count_matching("nowhere.tex"), 1);
    }

    #[test]
    fn missing_main_is_fatal() {
        let mut d = Diagnostics::new();
        let err = load_document(Path::new("/nonexistent/book.tex"), &mut d).unwrap_err();
        assert!(err.to_string().contains("book.tex"));
    }

    // Hand trace: a.tex = [A1, \input{b}, A3], b.tex = [B1, \input{a}, B3].
    // Reading a: A1, then b: B1, cycle on a (skipped, warning), B3, then A3.
    #[test]
    fn inclusion_cycle_visits_once() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.tex", "A1\n\\input{b}\nA3\n");
        write(dir.path(), "b.tex", "B1\n\\input{a}\nB3\n");
        let mut d = Diagnostics::new();
        let doc = load_document(&dir.path().join("a.tex"), &mut d).unwrap();
        let texts: Vec<&str> = doc.lines.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, ["A1", "B1", "B3", "A3"]);
        assert_eq!(d.count_matching("cycle"), 1);
    }

    #[test]
    fn verbatim_interior_is_untouched() {
        let doc = SourceDocument::from_text(
            "m.tex",
            "a % c\n\\begin{verbatim}\nx = y % mod\n\\input{z}\n\\end{verbatim} % gone\nb\n",
        );
        let got: Vec<(&str, bool)> = doc
            .lines
            .iter()
            .map(|l| (l.text.as_str(), l.in_verbatim))
            .collect();
        assert_eq!(
            got,
            [
                ("a ", false),
                ("\\begin{verbatim}", false),
                ("x = y % mod", true),
                ("\\input{z}", true),
                ("\\end{verbatim} ", false),
                ("b", false),
            ]
        );
    }

    #[test]
    fn comment_only_lines_are_dropped() {
        let doc = SourceDocument::from_text("m.tex", "a\n% whole line\nb\n");
        let nos: Vec<usize> = doc.lines.iter().map(|l| l.line_no).collect();
        assert_eq!(nos, [1, 3]);
    }

    #[test]
    fn body_split() {
        let doc = SourceDocument::from_text(
            "m.tex",
            "\\documentclass{book}\n\\begin{document}\nhello\n\\end{document}\nignored\n",
        );
        let (pre, body) = doc.split_body();
        assert_eq!(pre.len(), 1);
        let texts: Vec<&str> = body.lines.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, ["hello"]);
    }
}
