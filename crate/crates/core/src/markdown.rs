//! LaTeX to Markdown conversion of the line stream left after figures and
//! structural blocks have been pulled out.

use std::collections::BTreeSet;

use unicode_normalization::UnicodeNormalization;

use crate::annotations::MacroRegistry;
use crate::diagnostics::Diagnostics;
use crate::labels::{LabelTable, NounTable};
use crate::refs::{self, RefOutcome};
use crate::source::{LinePos, SourceLine, VERBATIM_ENVS};
use crate::structure::{FIGURE_ENVS, STRUCTURAL_ENVS};
use crate::tex;

const SECTIONING: [(&str, u8); 7] = [
    ("part", 0),
    ("chapter", 1),
    ("section", 2),
    ("subsection", 3),
    ("subsubsection", 4),
    ("paragraph", 5),
    ("subparagraph", 6),
];

const LIST_ENVS: [&str; 3] = ["itemize", "enumerate", "description"];
const QUOTE_ENVS: [&str; 3] = ["quote", "quotation", "verse"];
const TABLE_ENVS: [&str; 6] = ["table", "table*", "tabular", "tabular*", "tabularx", "longtable"];
const MATH_ENVS: [&str; 16] = [
    "equation", "equation*", "align", "align*", "gather", "gather*", "multline", "multline*",
    "eqnarray", "eqnarray*", "flalign", "flalign*", "alignat", "alignat*", "displaymath", "math",
];
const TRANSPARENT_ENVS: [&str; 9] = [
    "center", "flushleft", "flushright", "minipage", "abstract", "document", "multicols", "small",
    "footnotesize",
];

/// Stands in for `\\` until the paragraph is tidied.
const HARD_BREAK: char = '\u{2028}';

/// Commands dropped together with their arguments: `(name, optional, required)`.
const DROPPED: &[(&str, usize, usize)] = &[
    ("vspace", 0, 1),
    ("hspace", 0, 1),
    ("index", 0, 1),
    ("pagestyle", 0, 1),
    ("thispagestyle", 0, 1),
    ("pagenumbering", 0, 1),
    ("bibliographystyle", 0, 1),
    ("bibliography", 0, 1),
    ("enlargethispage", 0, 1),
    ("stepcounter", 0, 1),
    ("refstepcounter", 0, 1),
    ("hypersetup", 0, 1),
    ("geometry", 0, 1),
    ("title", 1, 1),
    ("author", 1, 1),
    ("date", 0, 1),
    ("includeonly", 0, 1),
    ("setlength", 0, 2),
    ("addtolength", 0, 2),
    ("setcounter", 0, 2),
    ("addtocounter", 0, 2),
    ("crefname", 0, 3),
    ("Crefname", 0, 3),
    ("addcontentsline", 0, 3),
    ("AIDeclareNotation", 0, 3),
    ("usepackage", 1, 1),
    ("RequirePackage", 1, 1),
    ("documentclass", 1, 1),
    ("DeclareMathOperator", 0, 2),
    ("newtheorem", 1, 2),
];

const DROPPED_BARE: &[&str] = &[
    "centering", "raggedright", "raggedleft", "noindent", "indent", "par", "newpage", "clearpage",
    "cleardoublepage", "pagebreak", "linebreak", "nolinebreak", "nopagebreak", "smallskip",
    "medskip", "bigskip", "maketitle", "tableofcontents", "listoffigures", "listoftables",
    "appendix", "frontmatter", "mainmatter", "backmatter", "protect", "relax", "small",
    "footnotesize", "scriptsize", "tiny", "large", "Large", "LARGE", "huge", "Huge", "normalsize",
    "normalfont", "rmfamily", "sffamily", "ttfamily", "bfseries", "itshape", "mdseries", "upshape",
    "slshape", "scshape", "em", "bf", "it", "tt", "sl", "selectfont", "null", "vfill", "makeatletter",
    "makeatother", "nobreak", "allowbreak", "sloppy", "fussy", "onecolumn", "twocolumn",
    "phantomsection", "hline", "AIChunkBreak", "printbibliography", "item",
];

const DEFINITIONS: &[&str] = &[
    "newcommand", "renewcommand", "providecommand", "newenvironment", "renewenvironment", "def",
    "gdef", "edef", "let",
];

const CONTENT_ONLY: &[&str] = &[
    "textrm", "textsf", "textnormal", "textup", "textmd", "mbox", "hbox", "makebox", "fbox",
    "underline", "uline", "textsc", "text", "caption", "textcolor",
];

const SYMBOLS: &[(&str, &str)] = &[
    ("ldots", "\u{2026}"),
    ("dots", "\u{2026}"),
    ("textellipsis", "\u{2026}"),
    ("textendash", "\u{2013}"),
    ("textemdash", "\u{2014}"),
    ("S", "\u{a7}"),
    ("copyright", "\u{a9}"),
    ("textregistered", "\u{ae}"),
    ("texttrademark", "\u{2122}"),
    ("LaTeX", "LaTeX"),
    ("LaTeXe", "LaTeX2e"),
    ("TeX", "TeX"),
    ("ss", "\u{df}"),
    ("ae", "\u{e6}"),
    ("AE", "\u{c6}"),
    ("oe", "\u{153}"),
    ("OE", "\u{152}"),
    ("o", "\u{f8}"),
    ("O", "\u{d8}"),
    ("aa", "\u{e5}"),
    ("AA", "\u{c5}"),
    ("l", "\u{142}"),
    ("L", "\u{141}"),
    ("i", "\u{131}"),
    ("quad", " "),
    ("qquad", " "),
    ("enspace", " "),
    ("thinspace", " "),
    ("hfill", " "),
    ("newline", "\u{2028}"),
];

fn combining_accent(name: &str) -> Option<char> {
    Some(match name {
        "'" => '\u{301}',
        "`" => '\u{300}',
        "^" => '\u{302}',
        "\"" => '\u{308}',
        "~" => '\u{303}',
        "=" => '\u{304}',
        "." => '\u{307}',
        "c" => '\u{327}',
        "v" => '\u{30c}',
        "u" => '\u{306}',
        "H" => '\u{30b}',
        "r" => '\u{30a}',
        "k" => '\u{328}',
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadingEvent {
    /// Markdown level, 1 to 6.
    pub level: u8,
    /// Sectioning depth: part 0, chapter 1, section 2, and so on.
    pub depth: u8,
    pub command: String,
    /// Resolved number, empty when unnumbered or unresolved.
    pub number: String,
    /// Converted title text.
    pub title: String,
    pub label: Option<String>,
    pub file: String,
    pub line: usize,
}

impl HeadingEvent {
    /// Breadcrumb entry: "Chapter 4" for numbered chapters, the title otherwise.
    pub fn crumb(&self) -> String {
        match self.command.as_str() {
            "chapter" if !self.number.is_empty() => format!("Chapter {}", self.number),
            "part" if !self.number.is_empty() => format!("Part {}", self.number),
            _ => self.title.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Heading,
    Paragraph,
    Code,
    Math,
    List,
    Quote,
    Table,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub markdown: String,
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
    pub pos: LinePos,
    pub labels: Vec<String>,
    /// `\AINote` texts, kept out of the Markdown.
    pub notes: Vec<String>,
    pub heading: Option<HeadingEvent>,
}

/// Converted inline text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fragment {
    pub markdown: String,
    pub labels: Vec<String>,
    pub notes: Vec<String>,
}

/// Joins non-empty block Markdown with blank lines.
pub fn render(blocks: &[Block]) -> String {
    blocks
        .iter()
        .map(|b| b.markdown.as_str())
        .filter(|m| !m.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn heading_events(blocks: &[Block]) -> Vec<HeadingEvent> {
    blocks.iter().filter_map(|b| b.heading.clone()).collect()
}

pub struct Converter<'a> {
    registry: &'a MacroRegistry,
    labels: &'a LabelTable,
    nouns: &'a NounTable,
    warned: BTreeSet<String>,
}

impl<'a> Converter<'a> {
    pub fn new(registry: &'a MacroRegistry, labels: &'a LabelTable, nouns: &'a NounTable) -> Self {
        Converter {
            registry,
            labels,
            nouns,
            warned: BTreeSet::new(),
        }
    }

    /// Converts a short piece of LaTeX, such as a caption, to one line of
    /// Markdown.
    pub fn convert_fragment(&mut self, text: &str, file: &str, line: usize, diags: &mut Diagnostics) -> Fragment {
        let map = [(0usize, file, line)];
        let mut inline = Inline::new(self, diags, text, &map);
        let raw = inline.run(0, text.len());
        Fragment {
            markdown: tidy(&raw),
            labels: inline.labels,
            notes: inline.notes,
        }
    }

    /// Converts a run of source lines to Markdown blocks.
    pub fn convert_block(&mut self, input: &[SourceLine], diags: &mut Diagnostics) -> Vec<Block> {
        let mut lines = input.to_vec();
        let mut out = Vec::new();
        let mut para: Vec<SourceLine> = Vec::new();
        let mut i = 0;
        while i < lines.len() {
            if lines[i].in_verbatim {
                self.flush(&mut para, &mut out, diags);
                i = self.orphan_verbatim(&mut lines, i, &mut out);
                continue;
            }
            if lines[i].is_blank() {
                self.flush(&mut para, &mut out, diags);
                i += 1;
                continue;
            }
            if para.last().is_some_and(|p| p.file != lines[i].file) {
                self.flush(&mut para, &mut out, diags);
            }
            let text = lines[i].text.clone();
            let lead = text.len() - text.trim_start().len();
            let rest = &text[lead..];
            if rest.starts_with('\\') || rest.starts_with("$$") {
                if let Some((block, next)) = self.try_heading(&mut lines, i, lead, diags) {
                    self.flush(&mut para, &mut out, diags);
                    out.push(block);
                    i = next;
                    continue;
                }
                if let Some((blocks, next)) = self.try_environment(&mut lines, i, lead, diags) {
                    self.flush(&mut para, &mut out, diags);
                    out.extend(blocks);
                    i = next;
                    continue;
                }
                if let Some(after) = self.transparent_marker(&text, lead, &lines[i], diags) {
                    self.flush(&mut para, &mut out, diags);
                    let tail = text[after..].to_string();
                    if tail.trim().is_empty() {
                        i += 1;
                    } else {
                        lines[i].text = tail;
                    }
                    continue;
                }
            }
            para.push(lines[i].clone());
            i += 1;
        }
        self.flush(&mut para, &mut out, diags);
        out
    }

    fn flush(&mut self, para: &mut Vec<SourceLine>, out: &mut Vec<Block>, diags: &mut Diagnostics) {
        if para.is_empty() {
            return;
        }
        let lines = std::mem::take(para);
        let (joined, map) = join_lines(&lines);
        let mut inline = Inline::new(self, diags, &joined, &map);
        let raw = inline.run(0, joined.len());
        let (labels, notes) = (inline.labels, inline.notes);
        let markdown = tidy(&raw);
        if markdown.is_empty() && labels.is_empty() && notes.is_empty() {
            return;
        }
        out.push(block_of(BlockKind::Paragraph, markdown, &lines, labels, notes));
    }

    /// Verbatim lines whose opening marker was not at the start of a line.
    fn orphan_verbatim(&mut self, lines: &mut [SourceLine], i: usize, out: &mut Vec<Block>) -> usize {
        let mut j = i;
        while j < lines.len() && lines[j].in_verbatim {
            j += 1;
        }
        let interior: Vec<&str> = lines[i..j].iter().map(|l| l.text.as_str()).collect();
        out.push(block_of(BlockKind::Code, fence(&interior, ""), &lines[i..j], vec![], vec![]));
        if j < lines.len() {
            if let Some(after) = find_any_end(&lines[j].text, &VERBATIM_ENVS) {
                let tail = lines[j].text[after..].to_string();
                if tail.trim().is_empty() {
                    return j + 1;
                }
                lines[j].text = tail;
            }
        }
        j
    }

    fn try_heading(&mut self, lines: &mut [SourceLine], i: usize, lead: usize, diags: &mut Diagnostics) -> Option<(Block, usize)> {
        let cmd = tex::command_at(&lines[i].text, lead)?;
        let &(command, depth) = SECTIONING.iter().find(|(n, _)| *n == cmd.name)?;
        let name_end = cmd.next;
        let mut j = i;
        let mut joined = lines[i].text.clone();
        let (starred, title, mut after) = loop {
            if let Some(parsed) = parse_heading_args(&joined, name_end) {
                break parsed;
            }
            if j + 1 >= lines.len() || lines[j + 1].in_verbatim || j - i >= 10 {
                return None;
            }
            j += 1;
            joined.push('\n');
            joined.push_str(&lines[j].text);
        };
        let mut label = None;
        let k = tex::skip_inline_ws(&joined, after);
        if let Some(g) = label_at(&joined, k) {
            label = Some(g.inner(&joined).trim().to_string());
            after = g.next;
        }
        let mut tail = joined[after..].to_string();
        if label.is_none() && tail.trim().is_empty() && j + 1 < lines.len() && !lines[j + 1].in_verbatim {
            let next = &lines[j + 1].text;
            let k = next.len() - next.trim_start().len();
            if let Some(g) = label_at(next, k) {
                label = Some(g.inner(next).trim().to_string());
                tail = next[g.next..].to_string();
                j += 1;
            }
        }
        let span = &lines[i..=j];
        let (_, map) = join_lines(span);
        let mut inline = Inline::new(self, diags, &joined, &map);
        let raw_title = inline.run(title.start, title.end);
        let (title_labels, notes) = (inline.labels, inline.notes);
        let title_md = tidy(&raw_title).replace('\n', " ");
        let number = match (&label, starred) {
            (Some(l), false) => self.labels.get(l).map(|e| e.reference.clone()).unwrap_or_default(),
            _ => String::new(),
        };
        let level = depth.clamp(1, 6);
        let event = HeadingEvent {
            level,
            depth,
            command: command.to_string(),
            number,
            title: title_md.clone(),
            label: label.clone(),
            file: lines[i].file.clone(),
            line: lines[i].line_no,
        };
        let mut labels: Vec<String> = label.into_iter().collect();
        labels.extend(title_labels);
        let markdown = format!("{} {}", "#".repeat(level as usize), title_md);
        let mut block = block_of(BlockKind::Heading, markdown, span, labels, notes);
        block.heading = Some(event);
        let next = if tail.trim().is_empty() {
            j + 1
        } else {
            lines[j].text = tail;
            j
        };
        Some((block, next))
    }

    fn try_environment(&mut self, lines: &mut [SourceLine], i: usize, lead: usize, diags: &mut Diagnostics) -> Option<(Vec<Block>, usize)> {
        let text = lines[i].text.clone();
        if text[lead..].starts_with("\\[") || text[lead..].starts_with("$$") {
            return self.display_math(lines, i, lead, diags);
        }
        let (name, after_begin) = tex::begin_env_at(&text, lead)?;
        let name = name.to_string();
        if VERBATIM_ENVS.contains(&name.as_str()) {
            return Some(self.verbatim(lines, i, &name, after_begin));
        }
        let category = if LIST_ENVS.contains(&name.as_str()) {
            BlockKind::List
        } else if QUOTE_ENVS.contains(&name.as_str()) {
            BlockKind::Quote
        } else if TABLE_ENVS.contains(&name.as_str()) {
            BlockKind::Table
        } else if MATH_ENVS.contains(&name.as_str()) {
            BlockKind::Math
        } else {
            return None;
        };
        let j = region_end(lines, i, &name)?;
        let span = &lines[i..=j];
        let (joined, map) = join_lines(span);
        let (end_at, after_end) = tex::find_env_end(&joined, after_begin, &name)?;
        let mut inline = Inline::new(self, diags, &joined, &map);
        let markdown = match category {
            BlockKind::List => inline.list(&name, after_begin, end_at, 0),
            BlockKind::Quote => inline.quote(after_begin, end_at),
            BlockKind::Table => inline.table(lead, after_end),
            _ => inline.math_env(&name, after_begin, end_at),
        };
        let (labels, notes) = (inline.labels, inline.notes);
        let block = block_of(category, markdown, span, labels, notes);
        let tail = joined[after_end..].to_string();
        let next = if tail.trim().is_empty() {
            j + 1
        } else {
            lines[j].text = tail;
            j
        };
        Some((vec![block], next))
    }

    fn display_math(&mut self, lines: &mut [SourceLine], i: usize, lead: usize, diags: &mut Diagnostics) -> Option<(Vec<Block>, usize)> {
        let close = if lines[i].text[lead..].starts_with("$$") { "$$" } else { "\\]" };
        let open_end = lead + 2;
        let mut j = i;
        let mut joined = lines[i].text.clone();
        let close_at = loop {
            if let Some(k) = joined[open_end..].find(close) {
                break open_end + k;
            }
            if j + 1 >= lines.len() || lines[j + 1].in_verbatim || lines[j + 1].is_blank() {
                return None;
            }
            j += 1;
            joined.push('\n');
            joined.push_str(&lines[j].text);
        };
        let span = &lines[i..=j];
        let (_, map) = join_lines(span);
        let mut inline = Inline::new(self, diags, &joined, &map);
        let body = inline.math_body(open_end, close_at, false);
        let (labels, notes) = (inline.labels, inline.notes);
        let block = block_of(BlockKind::Math, format!("$$\n{body}\n$$"), span, labels, notes);
        let tail = joined[close_at + close.len()..].to_string();
        let next = if tail.trim().is_empty() {
            j + 1
        } else {
            lines[j].text = tail;
            j
        };
        Some((vec![block], next))
    }

    fn verbatim(&mut self, lines: &mut [SourceLine], i: usize, name: &str, after_begin: usize) -> (Vec<Block>, usize) {
        let begin_text = lines[i].text.clone();
        let lang = code_language(name, &begin_text[after_begin..]);
        let mut j = i + 1;
        while j < lines.len() && lines[j].in_verbatim {
            j += 1;
        }
        let interior: Vec<&str> = lines[i + 1..j].iter().map(|l| l.text.as_str()).collect();
        let markdown = fence(&interior, &lang);
        let last = j.min(lines.len() - 1);
        let block = block_of(BlockKind::Code, markdown, &lines[i..=last], vec![], vec![]);
        if j >= lines.len() {
            return (vec![block], j);
        }
        let end_text = lines[j].text.clone();
        let tail = find_any_end(&end_text, &[name]).map(|a| end_text[a..].to_string()).unwrap_or_default();
        if tail.trim().is_empty() {
            (vec![block], j + 1)
        } else {
            lines[j].text = tail;
            (vec![block], j)
        }
    }

    /// For a `\begin{env}` or `\end{env}` of a transparent or unknown
    /// environment at `lead`, returns the offset after the marker.
    fn transparent_marker(&mut self, text: &str, lead: usize, line: &SourceLine, diags: &mut Diagnostics) -> Option<usize> {
        let (name, after, begin) = match tex::begin_env_at(text, lead) {
            Some((n, a)) => (n, a, true),
            None => {
                let (n, a) = tex::end_env_at(text, lead)?;
                (n, a, false)
            }
        };
        if begin {
            self.check_environment(name, &line.file, line.line_no, diags);
        }
        let mut after = after;
        if begin && name == "minipage" {
            after = skip_args(text, after, 1, 1);
        } else if begin && name == "multicols" {
            after = skip_args(text, after, 0, 1);
        }
        Some(after)
    }

    fn check_environment(&mut self, name: &str, file: &str, line: usize, diags: &mut Diagnostics) {
        let known = TRANSPARENT_ENVS.contains(&name)
            || VERBATIM_ENVS.contains(&name)
            || LIST_ENVS.contains(&name)
            || QUOTE_ENVS.contains(&name)
            || TABLE_ENVS.contains(&name)
            || MATH_ENVS.contains(&name)
            || FIGURE_ENVS.contains(&name)
            || STRUCTURAL_ENVS.contains(&name);
        if known || self.registry.is_suppressed(name) {
            return;
        }
        if self.warned.insert(format!("env:{name}")) {
            diags.warn_at(file, line, format!("unknown environment {name}"));
        }
    }
}

fn block_of(kind: BlockKind, markdown: String, lines: &[SourceLine], labels: Vec<String>, notes: Vec<String>) -> Block {
    let first = &lines[0];
    let end_line = lines
        .iter()
        .filter(|l| l.file == first.file)
        .map(|l| l.line_no)
        .max()
        .unwrap_or(first.line_no);
    Block {
        kind,
        markdown,
        file: first.file.clone(),
        start_line: first.line_no,
        end_line,
        pos: first.pos,
        labels,
        notes,
        heading: None,
    }
}

fn join_lines(lines: &[SourceLine]) -> (String, Vec<(usize, &str, usize)>) {
    let mut joined = String::new();
    let mut map = Vec::with_capacity(lines.len());
    for (k, l) in lines.iter().enumerate() {
        if k > 0 {
            joined.push('\n');
        }
        map.push((joined.len(), l.file.as_str(), l.line_no));
        joined.push_str(&l.text);
    }
    (joined, map)
}

/// Parses `*[short]{title}` after a sectioning command.
fn parse_heading_args(s: &str, mut i: usize) -> Option<(bool, tex::Group, usize)> {
    let starred = s.as_bytes().get(i) == Some(&b'*');
    if starred {
        i += 1;
    }
    let (_, i) = tex::read_optional(s, i).ok()?;
    let g = tex::read_arg(s, i).ok()?;
    Some((starred, g, g.next))
}

fn label_at(s: &str, i: usize) -> Option<tex::Group> {
    let cmd = tex::command_at(s, i)?;
    if cmd.name != "label" {
        return None;
    }
    tex::read_arg(s, cmd.next).ok()
}

/// Index of the line holding the `\end{name}` that closes the environment
/// opened on line `i`.
fn region_end(lines: &[SourceLine], i: usize, name: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (j, line) in lines.iter().enumerate().skip(i) {
        if line.in_verbatim {
            continue;
        }
        for (at, cmd) in tex::commands(&line.text) {
            match cmd.name {
                "begin" if tex::begin_env_at(&line.text, at).is_some_and(|(n, _)| n == name) => depth += 1,
                "end" if tex::end_env_at(&line.text, at).is_some_and(|(n, _)| n == name) => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return Some(j);
                    }
                }
                _ => {}
            }
        }
    }
    None
}

fn find_any_end(text: &str, names: &[&str]) -> Option<usize> {
    tex::commands(text).find_map(|(at, cmd)| {
        if cmd.name != "end" {
            return None;
        }
        tex::end_env_at(text, at).filter(|(n, _)| names.contains(n)).map(|(_, a)| a)
    })
}

fn skip_args(s: &str, mut i: usize, optional: usize, required: usize) -> usize {
    for _ in 0..optional {
        match tex::read_optional(s, i) {
            Ok((_, next)) => i = next,
            Err(_) => return i,
        }
    }
    for _ in 0..required {
        match tex::read_arg(s, i) {
            Ok(g) => i = g.next,
            Err(_) => return i,
        }
    }
    i
}

fn code_language(env: &str, after_begin: &str) -> String {
    match env {
        "minted" => {
            let rest = after_begin.trim_start();
            let rest = match tex::read_optional(rest, 0) {
                Ok((_, next)) => &rest[next..],
                Err(_) => rest,
            };
            tex::read_arg(rest, 0).map(|g| g.inner(rest).trim().to_string()).unwrap_or_default()
        }
        "lstlisting" => {
            let rest = after_begin.trim_start();
            let Ok((Some(g), _)) = tex::read_optional(rest, 0) else {
                return String::new();
            };
            g.inner(rest)
                .split(',')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| k.trim() == "language")
                .map(|(_, v)| v.trim().trim_matches(['{', '}']).to_lowercase())
                .unwrap_or_default()
        }
        _ => String::new(),
    }
}

/// Fenced code block around `interior`, with a fence longer than any
/// backtick run inside.
pub fn fence(interior: &[&str], lang: &str) -> String {
    let longest = interior
        .iter()
        .flat_map(|l| l.split(|c| c != '`'))
        .map(str::len)
        .max()
        .unwrap_or(0);
    let ticks = "`".repeat(longest.max(2) + 1);
    let mut out = format!("{ticks}{lang}\n");
    for line in interior {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&ticks);
    out
}

fn code_span(content: &str) -> String {
    let content = content.trim();
    if content.is_empty() {
        String::new()
    } else if content.contains('`') {
        format!("`` {content} ``")
    } else {
        format!("`{content}`")
    }
}

/// Wraps `inner` in `marker`, keeping surrounding spaces outside.
fn wrap(marker: &str, inner: &str) -> String {
    let trimmed = inner.trim();
    if trimmed.is_empty() {
        return inner.to_string();
    }
    let lead = &inner[..inner.len() - inner.trim_start().len()];
    let trail = &inner[inner.trim_end().len()..];
    format!("{lead}{marker}{trimmed}{marker}{trail}")
}

/// Collapses whitespace to single spaces, one line per paragraph, turning
/// hard-break markers into Markdown hard breaks.
pub fn tidy(raw: &str) -> String {
    let pieces: Vec<String> = raw
        .split(HARD_BREAK)
        .map(|piece| piece.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect();
    // breaks at either end of a paragraph render as nothing
    let start = pieces.iter().position(|p| !p.is_empty()).unwrap_or(pieces.len());
    let end = pieces.iter().rposition(|p| !p.is_empty()).map_or(start, |e| e + 1);
    pieces[start..end].join("\\\n")
}

fn dedent(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let kept: Vec<&str> = lines
        .iter()
        .map(|l| if l.len() >= indent { l[indent..].trim_end() } else { l.trim() })
        .collect();
    let start = kept.iter().position(|l| !l.is_empty()).unwrap_or(kept.len());
    let end = kept.iter().rposition(|l| !l.is_empty()).map_or(start, |e| e + 1);
    kept[start..end].join("\n")
}

/// Inline conversion over one source string. All offsets are absolute.
struct Inline<'c, 'a> {
    conv: &'c mut Converter<'a>,
    diags: &'c mut Diagnostics,
    src: &'c str,
    map: &'c [(usize, &'c str, usize)],
    labels: Vec<String>,
    notes: Vec<String>,
}

impl<'c, 'a> Inline<'c, 'a> {
    fn new(conv: &'c mut Converter<'a>, diags: &'c mut Diagnostics, src: &'c str, map: &'c [(usize, &'c str, usize)]) -> Self {
        Inline {
            conv,
            diags,
            src,
            map,
            labels: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn location(&self, offset: usize) -> (&'c str, usize) {
        let k = self.map.partition_point(|(start, _, _)| *start <= offset).saturating_sub(1);
        let (_, file, line) = self.map[k];
        (file, line)
    }

    fn warn(&mut self, offset: usize, message: String) {
        let (file, line) = self.location(offset);
        self.diags.warn_at(file, line, message);
    }

    fn warn_unknown(&mut self, offset: usize, name: &str) {
        if self.conv.registry.is_suppressed(name) {
            return;
        }
        if self.conv.warned.insert(format!("macro:{name}")) {
            self.warn(offset, format!("unknown macro \\{name}"));
        }
    }

    /// Raw copy of `src[start..end]` with references resolved.
    fn raw(&mut self, start: usize, end: usize) -> String {
        let piece = &self.src[start..end];
        let (out, warnings) = refs::resolve_references(piece, self.conv.labels, self.conv.nouns);
        for w in warnings {
            self.warn(start + w.offset, w.message);
        }
        out
    }

    fn run(&mut self, start: usize, end: usize) -> String {
        let s = self.src;
        let b = s.as_bytes();
        let mut out = String::new();
        let mut i = start;
        while i < end {
            match b[i] {
                b'\\' => i = self.command(i, end, &mut out),
                b'$' => i = self.dollar_math(i, end, &mut out),
                b'{' => match tex::read_group(s, i) {
                    Ok(g) if g.next <= end => {
                        let inner = self.group(g.start, g.end);
                        out.push_str(&inner);
                        i = g.next;
                    }
                    _ => i += 1,
                },
                b'}' => i += 1,
                b'~' => {
                    out.push(' ');
                    i += 1;
                }
                b'-' if s[i..end].starts_with("---") => {
                    out.push('\u{2014}');
                    i += 3;
                }
                b'-' if s[i..end].starts_with("--") => {
                    out.push('\u{2013}');
                    i += 2;
                }
                b'`' if s[i..end].starts_with("``") => {
                    out.push('"');
                    i += 2;
                }
                b'\'' if s[i..end].starts_with("''") => {
                    out.push('"');
                    i += 2;
                }
                _ => {
                    let ch = s[i..].chars().next().unwrap_or(' ');
                    out.push(ch);
                    i += ch.len_utf8();
                }
            }
        }
        out
    }

    /// A brace group, honoring `{\bf ...}` style declarations.
    fn group(&mut self, start: usize, end: usize) -> String {
        let k = tex::skip_ws(self.src, start);
        if let Some(cmd) = tex::command_at(self.src, k).filter(|c| c.next <= end) {
            let marker = match cmd.name {
                "bf" | "bfseries" => Some("**"),
                "it" | "itshape" | "em" | "sl" | "slshape" => Some("*"),
                _ => None,
            };
            if let Some(marker) = marker {
                let inner = self.run(cmd.next, end);
                return wrap(marker, &inner);
            }
            if matches!(cmd.name, "tt" | "ttfamily") {
                return code_span(&self.code_text(cmd.next, end));
            }
        }
        self.run(start, end)
    }

    /// Text of a `\texttt` argument: escapes become literal characters.
    fn code_text(&mut self, start: usize, end: usize) -> String {
        let s = self.src;
        let mut out = String::new();
        let mut i = start;
        while i < end {
            let ch = s[i..].chars().next().unwrap_or(' ');
            match ch {
                '\\' => {
                    let Some(cmd) = tex::command_at(s, i) else {
                        i += 1;
                        continue;
                    };
                    match cmd.name {
                        "_" | "%" | "&" | "#" | "$" | "{" | "}" => out.push_str(cmd.name),
                        "textbackslash" => out.push('\\'),
                        "textasciitilde" => out.push('~'),
                        "textasciicircum" => out.push('^'),
                        "textunderscore" => out.push('_'),
                        "\\" => out.push(' '),
                        _ => out.push_str(&s[i..cmd.next]),
                    }
                    i = cmd.next;
                    if cmd.is_word() && s[i..end].starts_with("{}") {
                        i += 2;
                    }
                }
                '{' | '}' => i += 1,
                '~' => {
                    out.push(' ');
                    i += 1;
                }
                _ => {
                    out.push(ch);
                    i += ch.len_utf8();
                }
            }
        }
        out
    }

    fn dollar_math(&mut self, i: usize, end: usize, out: &mut String) -> usize {
        let s = self.src;
        let display = s[i..end].starts_with("$$");
        let delim = if display { "$$" } else { "$" };
        let body_start = i + delim.len();
        let mut k = body_start;
        while k < end {
            if s.as_bytes()[k] == b'\\' {
                k += 2;
                continue;
            }
            if s[k..end].starts_with(delim) {
                let body = self.math_body(body_start, k, true);
                out.push_str(delim);
                out.push_str(&body);
                out.push_str(delim);
                return k + delim.len();
            }
            k += 1;
        }
        out.push('$');
        i + 1
    }

    /// Math source between `start` and `end`: labels removed and recorded,
    /// references resolved. Inline bodies are kept on one line.
    fn math_body(&mut self, start: usize, end: usize, inline: bool) -> String {
        let s = self.src;
        let mut out = String::new();
        let mut cursor = start;
        let mut i = start;
        while i < end {
            if s.as_bytes()[i] != b'\\' {
                i += 1;
                continue;
            }
            let Some(cmd) = tex::command_at(s, i) else {
                i += 1;
                continue;
            };
            let drop_to = match cmd.name {
                "label" => tex::read_arg(s, cmd.next).ok().filter(|g| g.next <= end).map(|g| {
                    self.labels.push(g.inner(s).trim().to_string());
                    g.next
                }),
                "nonumber" | "notag" => Some(cmd.next),
                _ => None,
            };
            match drop_to {
                Some(next) => {
                    out.push_str(&self.raw(cursor, i));
                    cursor = next;
                    i = next;
                }
                None => i = cmd.next.max(i + 1),
            }
        }
        out.push_str(&self.raw(cursor, end));
        if inline {
            out
        } else {
            dedent(&out)
        }
    }

    fn math_env(&mut self, name: &str, start: usize, end: usize) -> String {
        let before = self.labels.len();
        let body = self.math_body(start, end, false);
        let base = name.trim_end_matches('*');
        let inner = match base {
            "align" | "flalign" | "eqnarray" => format!("\\begin{{aligned}}\n{body}\n\\end{{aligned}}"),
            "alignat" => format!("\\begin{{alignedat}}{body}\n\\end{{alignedat}}"),
            "gather" => format!("\\begin{{gathered}}\n{body}\n\\end{{gathered}}"),
            _ => body,
        };
        let numbered = !name.ends_with('*') && matches!(base, "equation" | "multline");
        let new_labels = &self.labels[before..];
        let tag = match new_labels {
            [one] if numbered => self.conv.labels.get(one).map(|e| e.reference.clone()),
            _ => None,
        };
        match tag {
            Some(n) => format!("$$\n{inner} \\tag{{{n}}}\n$$"),
            None => format!("$$\n{inner}\n$$"),
        }
    }

    fn quote(&mut self, start: usize, end: usize) -> String {
        let paragraphs: Vec<String> = paragraph_ranges(self.src, start, end)
            .into_iter()
            .map(|(a, b)| tidy(&self.run(a, b)))
            .filter(|p| !p.is_empty())
            .collect();
        paragraphs
            .iter()
            .map(|p| p.lines().map(|l| format!("> {l}")).collect::<Vec<_>>().join("\n"))
            .collect::<Vec<_>>()
            .join("\n>\n")
    }

    fn table(&mut self, start: usize, end: usize) -> String {
        let s = self.src;
        let mut caption = None;
        for (_, cmd) in tex::commands(&s[start..end]) {
            match cmd.name {
                "label" => {
                    if let Ok(g) = tex::read_arg(s, start + cmd.next) {
                        self.labels.push(g.inner(s).trim().to_string());
                    }
                }
                "caption" if caption.is_none() => {
                    let after = skip_args(s, start + cmd.next, 1, 0);
                    if let Ok(g) = tex::read_arg(s, after) {
                        caption = Some((g.start, g.end));
                    }
                }
                _ => {}
            }
        }
        let raw = dedent(&self.raw(start, end));
        let lines: Vec<&str> = raw.lines().collect();
        let body = fence(&lines, "latex");
        match caption {
            Some((a, b)) => {
                let text = tidy(&self.run(a, b));
                let number = self
                    .labels
                    .iter()
                    .find_map(|l| self.conv.labels.get(l))
                    .map(|e| format!(" {}", e.reference))
                    .unwrap_or_default();
                format!("**Table{number}.** {text}\n\n{body}")
            }
            None => body,
        }
    }

    /// Renders a list environment body; nested lists are indented.
    fn list(&mut self, env: &str, start: usize, end: usize, indent: usize) -> String {
        let s = self.src;
        let mut items = Vec::new();
        let mut depth = 0usize;
        for (at, cmd) in tex::commands(&s[start..end]) {
            let at = start + at;
            match cmd.name {
                "begin" if tex::begin_env_at(s, at).is_some_and(|(n, _)| LIST_ENVS.contains(&n)) => depth += 1,
                "end" if tex::end_env_at(s, at).is_some_and(|(n, _)| LIST_ENVS.contains(&n)) => {
                    depth = depth.saturating_sub(1)
                }
                "item" if depth == 0 => items.push((at, start + cmd.next)),
                _ => {}
            }
        }
        let mut lines = Vec::new();
        for (k, &(_, after)) in items.iter().enumerate() {
            let item_end = items.get(k + 1).map_or(end, |&(next_at, _)| next_at);
            let (opt, body_start) = match tex::read_optional(s, after) {
                Ok((Some(g), next)) if next <= item_end => (Some((g.start, g.end)), next),
                _ => (None, after),
            };
            let mut marker = match env {
                "enumerate" => format!("{}. ", k + 1),
                _ => "- ".to_string(),
            };
            if let Some((a, b)) = opt {
                let term = tidy(&self.run(a, b));
                match env {
                    "description" => marker.push_str(&format!("**{term}** ")),
                    _ => marker = format!("- {term} "),
                }
            }
            let width = if env == "enumerate" { marker.len() } else { 2 };
            let content = self.list_item(body_start, item_end, indent + width);
            let first_line = content.first().cloned().unwrap_or_default();
            lines.push(format!("{}{}{}", " ".repeat(indent), marker, first_line).trim_end().to_string());
            lines.extend(content.into_iter().skip(1));
        }
        lines.join("\n")
    }

    /// Item body as lines; the first line carries no indentation.
    fn list_item(&mut self, start: usize, end: usize, indent: usize) -> Vec<String> {
        let s = self.src;
        let mut out: Vec<String> = Vec::new();
        let mut cursor = start;
        let mut i = start;
        while i < end {
            if s.as_bytes()[i] != b'\\' {
                i += 1;
                continue;
            }
            let Some((name, after)) = tex::begin_env_at(s, i).filter(|(n, _)| LIST_ENVS.contains(n)) else {
                i += tex::command_at(s, i).map_or(1, |c| c.next - i);
                continue;
            };
            let name = name.to_string();
            let Some((end_at, after_end)) = tex::find_env_end(s, after, &name).filter(|(_, a)| *a <= end) else {
                break;
            };
            let text = tidy(&self.run(cursor, i));
            push_item_text(&mut out, text, indent);
            out.push(self.list(&name, after, end_at, indent));
            cursor = after_end;
            i = after_end;
        }
        let text = tidy(&self.run(cursor, end));
        push_item_text(&mut out, text, indent);
        out
    }

    fn command(&mut self, i: usize, end: usize, out: &mut String) -> usize {
        let s = self.src;
        let Some(cmd) = tex::command_at(s, i) else {
            out.push('\\');
            return i + 1;
        };
        if cmd.next > end {
            out.push_str(&s[i..end]);
            return end;
        }
        if !cmd.is_word() {
            return self.control_symbol(i, cmd, end, out);
        }
        if let Some((a, b, next)) = tex::verb_span(s, i) {
            out.push_str(&code_span(&s[a..b]));
            return next;
        }
        let name = cmd.name;
        if refs::is_ref_command(name) {
            return match refs::resolve_command(s, i, self.conv.labels, self.conv.nouns) {
                Some(RefOutcome::Resolved { text, next }) if next <= end => {
                    out.push_str(&text);
                    next
                }
                Some(RefOutcome::Unresolved { next, missing }) if next <= end => {
                    let message = refs::unresolved_message(&s[i..next], &missing);
                    self.warn(i, message);
                    out.push_str(&s[i..next]);
                    next
                }
                _ => {
                    out.push_str(&s[i..cmd.next]);
                    cmd.next
                }
            };
        }
        let mut j = cmd.next;
        let starred = s.as_bytes().get(j) == Some(&b'*');
        if starred && j < end {
            j += 1;
        }
        let arg = |j: usize| tex::read_arg(s, j).ok().filter(|g| g.next <= end);

        if let Some(&(_, opt, req)) = DROPPED.iter().find(|(n, _, _)| *n == name) {
            return skip_args(s, j, opt, req).min(end);
        }
        if DROPPED_BARE.contains(&name) {
            if name == "item" {
                return skip_args(s, j, 1, 0).min(end);
            }
            return j;
        }
        if DEFINITIONS.contains(&name) {
            return self.skip_definition(name, j, end);
        }
        if let Some(&(_, text)) = SYMBOLS.iter().find(|(n, _)| *n == name) {
            out.push_str(text);
            return if s[j..end].starts_with("{}") { j + 2 } else { j };
        }
        if let Some(accent) = combining_accent(name) {
            return self.accent(accent, j, end, out).unwrap_or_else(|| {
                out.push_str(&s[i..j]);
                j
            });
        }
        match name {
            "label" => {
                if let Some(g) = arg(j) {
                    self.labels.push(g.inner(s).trim().to_string());
                    return g.next;
                }
            }
            "AINote" | "AIDescription" => {
                if let Some(g) = arg(j) {
                    let note = tidy(&self.run(g.start, g.end));
                    if !note.is_empty() {
                        self.notes.push(note);
                    }
                    return g.next;
                }
            }
            "input" | "include" => {
                let next = arg(j).map_or(j, |g| g.next);
                out.push_str(&s[i..next]);
                return next;
            }
            "texttt" | "code" => {
                if let Some(g) = arg(j) {
                    let text = self.code_text(g.start, g.end);
                    out.push_str(&code_span(&tidy(&text)));
                    return g.next;
                }
            }
            "emph" | "textit" | "textsl" => {
                if let Some(g) = arg(j) {
                    let inner = self.run(g.start, g.end);
                    out.push_str(&wrap("*", &inner));
                    return g.next;
                }
            }
            "textbf" => {
                if let Some(g) = arg(j) {
                    let inner = self.run(g.start, g.end);
                    out.push_str(&wrap("**", &inner));
                    return g.next;
                }
            }
            "footnote" => {
                let j = skip_args(s, j, 1, 0);
                if let Some(g) = arg(j) {
                    let inner = tidy(&self.run(g.start, g.end));
                    if !out.ends_with(char::is_whitespace) {
                        out.push(' ');
                    }
                    out.push_str(&format!("({inner})"));
                    return g.next;
                }
            }
            "href" => {
                if let Some(g1) = arg(j) {
                    if let Some(g2) = arg(g1.next) {
                        let text = tidy(&self.run(g2.start, g2.end));
                        out.push_str(&format!("[{text}]({})", g1.inner(s).trim()));
                        return g2.next;
                    }
                }
            }
            "includegraphics" => {
                let j = skip_args(s, j, 1, 0);
                if let Some(g) = arg(j) {
                    out.push_str(&format!("![]({})", g.inner(s).trim()));
                    return g.next;
                }
            }
            "textcolor" => {
                if let Some(g1) = arg(j) {
                    if let Some(g2) = arg(g1.next) {
                        out.push_str(&self.run(g2.start, g2.end));
                        return g2.next;
                    }
                }
            }
            "begin" | "end" => return self.inline_environment(i, end, out),
            _ => {}
        }
        if CONTENT_ONLY.contains(&name) {
            let j = skip_args(s, j, 1, 0);
            if let Some(g) = arg(j) {
                out.push_str(&self.run(g.start, g.end));
                return g.next;
            }
            return j;
        }
        if !self.conv.registry.is_registered(name) {
            self.warn_unknown(i, name);
        }
        let next = raw_args_end(s, j, end);
        let raw = self.raw(i, next);
        out.push_str(&raw);
        next
    }

    fn control_symbol(&mut self, i: usize, cmd: tex::Command<'_>, end: usize, out: &mut String) -> usize {
        let s = self.src;
        match cmd.name {
            "\\" => {
                out.push(HARD_BREAK);
                let mut j = cmd.next;
                if s.as_bytes().get(j) == Some(&b'*') {
                    j += 1;
                }
                match tex::read_optional(s, j) {
                    Ok((Some(_), next)) if next <= end => next,
                    _ => j,
                }
            }
            "\n" => {
                out.push(HARD_BREAK);
                cmd.next
            }
            "," | ";" | ":" | " " | ">" | "\t" => {
                out.push(' ');
                cmd.next
            }
            "!" | "/" | "@" | "-" => cmd.next,
            "%" | "&" => {
                out.push_str(cmd.name);
                cmd.next
            }
            "(" | "[" => {
                let close = if cmd.name == "(" { "\\)" } else { "\\]" };
                let delim = if cmd.name == "(" { "$" } else { "$$" };
                match s[cmd.next..end].find(close) {
                    Some(k) => {
                        let body = self.math_body(cmd.next, cmd.next + k, true);
                        out.push_str(delim);
                        out.push_str(body.trim());
                        out.push_str(delim);
                        cmd.next + k + 2
                    }
                    None => {
                        out.push_str(&s[i..cmd.next]);
                        cmd.next
                    }
                }
            }
            name => {
                if let Some(accent) = combining_accent(name) {
                    if let Some(next) = self.accent(accent, cmd.next, end, out) {
                        return next;
                    }
                }
                out.push_str(&s[i..cmd.next]);
                cmd.next
            }
        }
    }

    /// Applies a combining accent to the next character or one-character
    /// group.
    fn accent(&mut self, accent: char, j: usize, end: usize, out: &mut String) -> Option<usize> {
        let s = self.src;
        let k = tex::skip_inline_ws(s, j);
        let (base, next) = if s.as_bytes().get(k) == Some(&b'{') {
            let g = tex::read_group(s, k).ok().filter(|g| g.next <= end)?;
            let inner = g.inner(s).trim();
            let base = match inner {
                "\\i" => 'i',
                "\\j" => 'j',
                _ => {
                    let mut chars = inner.chars();
                    let c = chars.next()?;
                    if chars.next().is_some() {
                        return None;
                    }
                    c
                }
            };
            (base, g.next)
        } else if s[k..].starts_with("\\i") && !s[k + 2..].starts_with(|c: char| c.is_ascii_alphabetic()) {
            ('i', k + 2)
        } else {
            let c = s[k..end].chars().next().filter(|c| c.is_alphabetic())?;
            (c, k + c.len_utf8())
        };
        out.extend([base, accent].iter().collect::<String>().nfc());
        Some(next)
    }

    fn skip_definition(&mut self, name: &str, mut j: usize, end: usize) -> usize {
        let s = self.src;
        let k = tex::skip_ws(s, j);
        match name {
            "def" | "gdef" | "edef" => {
                let Some(target) = tex::command_at(s, k) else { return j };
                j = target.next;
                while j < end && s.as_bytes()[j] != b'{' {
                    j += 1;
                }
                tex::read_group(s, j).map_or(j, |g| g.next).min(end)
            }
            "let" => {
                let Some(a) = tex::command_at(s, k) else { return j };
                let mut m = tex::skip_ws(s, a.next);
                if s.as_bytes().get(m) == Some(&b'=') {
                    m = tex::skip_ws(s, m + 1);
                }
                tex::command_at(s, m).map_or(m, |c| c.next).min(end)
            }
            _ => {
                j = if s.as_bytes().get(k) == Some(&b'{') {
                    tex::read_group(s, k).map_or(k, |g| g.next)
                } else {
                    tex::command_at(s, k).map_or(k, |c| c.next)
                };
                let env = name.ends_with("environment");
                j = skip_args(s, j, 2, if env { 2 } else { 1 });
                j.min(end)
            }
        }
    }

    fn inline_environment(&mut self, i: usize, end: usize, out: &mut String) -> usize {
        let s = self.src;
        if let Some((name, after)) = tex::begin_env_at(s, i).filter(|(_, a)| *a <= end) {
            if MATH_ENVS.contains(&name) {
                if let Some((end_at, after_end)) = tex::find_env_end(s, after, name).filter(|(_, a)| *a <= end) {
                    let body = self.math_body(after, end_at, true);
                    out.push_str("$$");
                    out.push_str(body.trim());
                    out.push_str("$$");
                    return after_end;
                }
            }
            let (file, line) = self.location(i);
            self.conv.check_environment(name, file, line, self.diags);
            return after;
        }
        if let Some((_, after)) = tex::end_env_at(s, i).filter(|(_, a)| *a <= end) {
            return after;
        }
        let cmd_next = tex::command_at(s, i).map_or(i + 1, |c| c.next);
        out.push_str(&s[i..cmd_next]);
        cmd_next
    }
}

fn push_item_text(out: &mut Vec<String>, text: String, indent: usize) {
    if text.is_empty() {
        return;
    }
    if out.is_empty() {
        out.push(text);
    } else {
        out.push(format!("{}{}", " ".repeat(indent), text));
    }
}

/// End of the bracket and brace groups directly following a command.
fn raw_args_end(s: &str, mut j: usize, end: usize) -> usize {
    loop {
        let k = tex::skip_inline_ws(s, j);
        let group = match s.as_bytes().get(k) {
            Some(b'{') => tex::read_group(s, k),
            Some(b'[') => tex::read_bracket(s, k),
            _ => return j,
        };
        match group {
            Ok(g) if g.next <= end => j = g.next,
            _ => return j,
        }
    }
}

/// Splits `s[start..end]` at blank lines into trimmed ranges.
fn paragraph_ranges(s: &str, start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut para_start = start;
    let mut offset = start;
    for line in s[start..end].split_inclusive('\n') {
        if line.trim().is_empty() && offset > para_start {
            ranges.push((para_start, offset));
            para_start = offset + line.len();
        } else if line.trim().is_empty() {
            para_start = offset + line.len();
        }
        offset += line.len();
    }
    if para_start < end {
        ranges.push((para_start, end));
    }
    ranges
}
