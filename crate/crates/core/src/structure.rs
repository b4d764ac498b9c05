//! Pulls figures, structural environments, and explicit chunk breaks out of
//! the line stream before Markdown conversion.

use crate::diagnostics::Diagnostics;
use crate::source::{LinePos, SourceDocument, SourceLine};
use crate::tex;

pub const FIGURE_ENVS: [&str; 2] = ["figure", "figure*"];

pub const STRUCTURAL_ENVS: [&str; 8] = [
    "exercise",
    "solution",
    "definition",
    "theorem",
    "lemma",
    "proof",
    "example",
    "remark",
];

const TIKZ_ENVS: [&str; 2] = ["tikzpicture", "tikzcd"];

/// Where a block came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub file: String,
    pub start_line: usize,
    pub end_line: usize,
}

impl Span {
    fn of(lines: &[SourceLine]) -> Span {
        let first = &lines[0];
        let end_line = lines
            .iter()
            .filter(|l| l.file == first.file)
            .map(|l| l.line_no)
            .max()
            .unwrap_or(first.line_no);
        Span {
            file: first.file.clone(),
            start_line: first.line_no,
            end_line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureBlock {
    pub label: String,
    /// Raw LaTeX of the caption.
    pub caption: String,
    pub image_file: Option<String>,
    pub tikz_source: Option<String>,
    pub ai_description: Option<String>,
    /// Filled in by the chunker from the heading structure.
    pub context_heading_path: Vec<String>,
    pub span: Span,
    pub pos: LinePos,
    /// The captured lines, markers included.
    pub source_lines: Vec<SourceLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralBlock {
    pub environment: String,
    pub label: Option<String>,
    /// Optional argument, as in `\begin{theorem}[Zorn]`.
    pub title: Option<String>,
    /// Explicit number given by the `\Exercise{4.3}{...}` macro form.
    pub number: Option<String>,
    /// Interior lines with provenance, markers removed.
    pub body_lines: Vec<SourceLine>,
    pub span: Span,
    pub pos: LinePos,
    pub source_lines: Vec<SourceLine>,
}

impl StructuralBlock {
    pub fn body(&self) -> String {
        join_text(&self.body_lines)
    }
}

fn join_text(lines: &[SourceLine]) -> String {
    lines
        .iter()
        .map(|l| l.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

fn is_marker_env(name: &str) -> bool {
    FIGURE_ENVS.contains(&name) || STRUCTURAL_ENVS.contains(&name)
}

/// Cut points that put every block marker at the start of its own piece.
fn cut_points(text: &str) -> Vec<usize> {
    let mut cuts = Vec::new();
    let nonblank_before = |at: usize| !text[..at].trim().is_empty();
    let nonblank_after = |at: usize| !text[at..].trim().is_empty();
    for (at, cmd) in tex::commands(text) {
        match cmd.name {
            "begin" => {
                if let Some((name, _)) = tex::begin_env_at(text, at) {
                    if is_marker_env(name) && nonblank_before(at) {
                        cuts.push(at);
                    }
                }
            }
            "end" => {
                if let Some((name, after)) = tex::end_env_at(text, at) {
                    if is_marker_env(name) && nonblank_after(after) {
                        cuts.push(after);
                    }
                }
            }
            "AIChunkBreak" => {
                let mut after = cmd.next;
                if text[after..].starts_with("{}") {
                    after += 2;
                }
                if nonblank_before(at) {
                    cuts.push(at);
                }
                if nonblank_after(after) {
                    cuts.push(after);
                }
            }
            _ => {}
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

/// Splits lines so that figure and structural markers and `\AIChunkBreak`
/// each start a piece of their own. Idempotent.
pub fn split_markers(lines: &[SourceLine]) -> Vec<SourceLine> {
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        let cuts = if line.in_verbatim { Vec::new() } else { cut_points(&line.text) };
        if cuts.is_empty() {
            out.push(line.clone());
            continue;
        }
        let mut bounds = vec![0];
        bounds.extend(cuts);
        bounds.push(line.text.len());
        let mut k = 0u32;
        for w in bounds.windows(2) {
            let piece = &line.text[w[0]..w[1]];
            if piece.trim().is_empty() {
                continue;
            }
            out.push(SourceLine {
                text: piece.to_string(),
                pos: LinePos {
                    index: line.pos.index,
                    part: line.pos.part * 64 + k,
                },
                ..line.clone()
            });
            k += 1;
        }
    }
    out
}

/// If `line` starts with `\begin{env}` for one of `envs`, returns `env`.
fn starts_env<'a>(line: &'a SourceLine, envs: &[&str]) -> Option<&'a str> {
    if line.in_verbatim {
        return None;
    }
    let t = line.text.trim_start();
    let (name, _) = tex::begin_env_at(t, 0)?;
    envs.contains(&name).then_some(name)
}

/// Joined text of `lines` with the byte offset where each line starts.
fn joined(lines: &[SourceLine]) -> (String, Vec<usize>) {
    let mut text = String::new();
    let mut starts = Vec::with_capacity(lines.len());
    for l in lines {
        starts.push(text.len());
        text.push_str(&l.text);
        text.push('\n');
    }
    (text, starts)
}

/// The pieces of `lines` covering `range` of their joined text.
fn slice_lines(lines: &[SourceLine], starts: &[usize], range: std::ops::Range<usize>) -> Vec<SourceLine> {
    let mut out = Vec::new();
    for (l, &s) in lines.iter().zip(starts) {
        let e = s + l.text.len();
        let a = range.start.max(s);
        let b = range.end.min(e);
        if a > b || (a == b && !(l.text.is_empty() && range.start <= s && e <= range.end)) {
            continue;
        }
        out.push(SourceLine {
            text: l.text[a - s..b - s].to_string(),
            ..l.clone()
        });
    }
    // drop marker-only remnants at either end
    while out.first().is_some_and(|l| l.text.trim().is_empty()) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.text.trim().is_empty()) {
        out.pop();
    }
    out
}

/// A located `\begin{env}...\end{env}` region over whole lines.
struct Region {
    first: usize,
    last: usize,
    text: String,
    starts: Vec<usize>,
    /// Offset in `text` just after `\begin{env}`.
    body_start: usize,
    /// Offset in `text` of `\end{env}`.
    body_end: usize,
    nested_same: bool,
}

fn find_region(lines: &[SourceLine], first: usize, env: &str) -> Option<Region> {
    let mut depth = 0usize;
    let mut nested_same = false;
    for last in first..lines.len() {
        let l = &lines[last];
        if l.in_verbatim {
            continue;
        }
        for (at, cmd) in tex::commands(&l.text) {
            if cmd.name == "begin" && tex::begin_env_at(&l.text, at).is_some_and(|(n, _)| n == env) {
                depth += 1;
                if depth > 1 {
                    nested_same = true;
                }
            } else if cmd.name == "end" && tex::end_env_at(&l.text, at).is_some_and(|(n, _)| n == env) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    let (text, starts) = joined(&lines[first..=last]);
                    let lead = text.len() - text.trim_start().len();
                    let (_, body_start) = tex::begin_env_at(&text, lead)?;
                    let (body_end, _) = tex::find_env_end(&text, body_start, env)?;
                    return Some(Region {
                        first,
                        last,
                        text,
                        starts,
                        body_start,
                        body_end,
                        nested_same,
                    });
                }
            }
        }
    }
    None
}

fn first_command_arg<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    tex::commands(text).find_map(|(_, cmd)| {
        if cmd.name != name {
            return None;
        }
        let (_, after) = tex::read_optional(text, cmd.next).ok()?;
        tex::read_arg(text, after).ok().map(|g| g.inner(text))
    })
}

fn dedent(s: &str) -> String {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn tikz_source(body: &str) -> Option<String> {
    for (at, cmd) in tex::commands(body) {
        if cmd.name != "begin" {
            continue;
        }
        let Some((name, after)) = tex::begin_env_at(body, at) else { continue };
        if TIKZ_ENVS.contains(&name) {
            let (_, end) = tex::find_env_end(body, after, name)?;
            return Some(body[at..end].to_string());
        }
    }
    None
}

/// Removes every figure environment and captures its parts.
pub fn extract_figures(doc: &SourceDocument, diags: &mut Diagnostics) -> (SourceDocument, Vec<FigureBlock>) {
    let lines = split_markers(&doc.lines);
    let mut kept = Vec::with_capacity(lines.len());
    let mut figures = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(env) = starts_env(&lines[i], &FIGURE_ENVS) else {
            kept.push(lines[i].clone());
            i += 1;
            continue;
        };
        let Some(region) = find_region(&lines, i, env) else {
            diags.warn_at(
                &lines[i].file,
                lines[i].line_no,
                format!("unbalanced {env} environment left in place"),
            );
            kept.push(lines[i].clone());
            i += 1;
            continue;
        };
        let captured = lines[region.first..=region.last].to_vec();
        let (_, after_opt) = tex::read_optional(&region.text, region.body_start).unwrap_or((None, region.body_start));
        let body = &region.text[after_opt..region.body_end];
        let caption = first_command_arg(body, "caption").map(|c| dedent(c).replace('\n', " "));
        let span = Span::of(&captured);
        if caption.is_none() {
            diags.warn_at(&span.file, span.start_line, "figure without caption");
        }
        let image_file = first_command_arg(body, "includegraphics").map(|f| f.trim().to_string());
        let tikz = tikz_source(body);
        if image_file.is_none() && tikz.is_none() {
            diags.warn_at(&span.file, span.start_line, "figure has neither an image nor TikZ source");
        }
        figures.push(FigureBlock {
            label: first_command_arg(body, "label").map(|l| l.trim().to_string()).unwrap_or_default(),
            caption: caption.unwrap_or_default(),
            image_file,
            tikz_source: tikz,
            ai_description: first_command_arg(body, "AIDescription").map(dedent).filter(|d| !d.is_empty()),
            context_heading_path: Vec::new(),
            span,
            pos: captured[0].pos,
            source_lines: captured,
        });
        i = region.last + 1;
    }
    (
        SourceDocument {
            lines: kept,
            ..doc.clone()
        },
        figures,
    )
}

/// `\Exercise{number}{text}` at the start of line `i`.
fn exercise_macro(lines: &[SourceLine], i: usize) -> Option<(usize, StructuralBlock)> {
    let l = &lines[i];
    if l.in_verbatim {
        return None;
    }
    let t = l.text.trim_start();
    let cmd = tex::command_at(t, 0)?;
    if cmd.name != "Exercise" {
        return None;
    }
    // extend until both arguments close
    for last in i..lines.len().min(i + 200) {
        if lines[last].in_verbatim {
            return None;
        }
        let (text, starts) = joined(&lines[i..=last]);
        let lead = text.len() - text.trim_start().len();
        let cmd = tex::command_at(&text, lead)?;
        let Ok(g1) = tex::read_arg(&text, cmd.next) else { continue };
        let Ok(g2) = tex::read_arg(&text, g1.next) else { continue };
        let source_lines = lines[i..=last].to_vec();
        let mut body_lines = slice_lines(&source_lines, &starts, g2.start..g2.end);
        let tail = text[g2.next..].trim();
        if !tail.is_empty() {
            let last_line = source_lines.last().expect("non-empty");
            body_lines.push(SourceLine {
                text: tail.to_string(),
                ..last_line.clone()
            });
        }
        let number = g1.inner(&text).trim().to_string();
        return Some((
            last,
            StructuralBlock {
                environment: "exercise".into(),
                label: first_command_arg(g2.inner(&text), "label").map(|s| s.trim().to_string()),
                title: None,
                number: (!number.is_empty()).then_some(number),
                body_lines,
                span: Span::of(&source_lines),
                pos: source_lines[0].pos,
                source_lines,
            },
        ));
    }
    None
}

/// Removes the recognized structural environments and captures their bodies.
pub fn extract_structural(doc: &SourceDocument, diags: &mut Diagnostics) -> (SourceDocument, Vec<StructuralBlock>) {
    let lines = split_markers(&doc.lines);
    let mut kept = Vec::with_capacity(lines.len());
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if let Some((last, block)) = exercise_macro(&lines, i) {
            blocks.push(block);
            i = last + 1;
            continue;
        }
        let Some(env) = starts_env(&lines[i], &STRUCTURAL_ENVS) else {
            kept.push(lines[i].clone());
            i += 1;
            continue;
        };
        let Some(region) = find_region(&lines, i, env) else {
            diags.warn_at(
                &lines[i].file,
                lines[i].line_no,
                format!("unbalanced {env} environment left in place"),
            );
            kept.push(lines[i].clone());
            i += 1;
            continue;
        };
        let source_lines = lines[region.first..=region.last].to_vec();
        if region.nested_same {
            diags.warn_at(
                &source_lines[0].file,
                source_lines[0].line_no,
                format!("nested {env} environments; the outermost one is kept as the block"),
            );
        }
        let (title, body_start) = match tex::read_optional(&region.text, region.body_start) {
            Ok((Some(g), next)) => (Some(dedent(g.inner(&region.text)).replace('\n', " ")), next),
            _ => (None, region.body_start),
        };
        let body_lines = slice_lines(&source_lines, &region.starts, body_start..region.body_end);
        let body = &region.text[body_start..region.body_end];
        blocks.push(StructuralBlock {
            environment: env.to_string(),
            label: first_command_arg(body, "label").map(|s| s.trim().to_string()),
            title,
            number: None,
            body_lines,
            span: Span::of(&source_lines),
            pos: source_lines[0].pos,
            source_lines,
        });
        i = region.last + 1;
    }
    (
        SourceDocument {
            lines: kept,
            ..doc.clone()
        },
        blocks,
    )
}

fn is_break_marker(line: &SourceLine) -> bool {
    if line.in_verbatim {
        return false;
    }
    let t = line.text.trim();
    let t = t.strip_suffix("{}").unwrap_or(t);
    t == "\\AIChunkBreak"
}

/// Removes `\AIChunkBreak` markers, returning the position of each.
pub fn find_chunk_breaks(doc: &SourceDocument) -> (SourceDocument, Vec<LinePos>) {
    let lines = split_markers(&doc.lines);
    let mut breaks = Vec::new();
    // the marker becomes a blank line so that it also ends a paragraph
    let kept = lines
        .into_iter()
        .map(|mut l| {
            if is_break_marker(&l) {
                breaks.push(l.pos);
                l.text.clear();
            }
            l
        })
        .collect();
    (
        SourceDocument {
            lines: kept,
            ..doc.clone()
        },
        breaks,
    )
}
