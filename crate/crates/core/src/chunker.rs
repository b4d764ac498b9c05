//! Groups converted blocks into retrieval chunks and builds their embedding
//! text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annotations::MacroRegistry;
use crate::diagnostics::Diagnostics;
use crate::labels::LabelTable;
use crate::markdown::{render, Block, BlockKind};
use crate::source::LinePos;
use crate::structure::{FigureBlock, StructuralBlock};

const EXCERPT_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub kind: String,
    pub heading_path: Vec<String>,
    pub source_file: String,
    pub start_line: usize,
    pub end_line: usize,
    pub labels: Vec<String>,
    pub markdown: String,
    pub embedding_text: String,
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkOptions {
    pub max_tokens: usize,
    pub min_heading_level: u8,
}

impl Default for ChunkOptions {
    fn default() -> Self {
        ChunkOptions {
            max_tokens: 900,
            min_heading_level: 1,
        }
    }
}

/// Character count divided by four, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// A figure with its caption already converted to Markdown.
#[derive(Debug, Clone)]
pub struct ConvertedFigure {
    pub figure: FigureBlock,
    pub caption: String,
}

/// A structural block with its body converted.
#[derive(Debug, Clone)]
pub struct ConvertedStructural {
    pub block: StructuralBlock,
    pub title: Option<String>,
    pub body: Vec<Block>,
}

/// Everything the chunker consumes.
#[derive(Debug, Clone, Default)]
pub struct DocumentParts {
    pub blocks: Vec<Block>,
    pub breaks: Vec<LinePos>,
    pub figures: Vec<ConvertedFigure>,
    pub structurals: Vec<ConvertedStructural>,
}

enum Item<'p> {
    Block(&'p Block),
    Break,
    Figure(&'p ConvertedFigure),
    Structural(&'p ConvertedStructural),
}

#[derive(Clone)]
struct Crumb {
    depth: u8,
    text: String,
    number: String,
}

struct Draft {
    heading_path: Vec<String>,
    section: Option<String>,
    file: String,
    start_line: usize,
    end_line: usize,
    pos: LinePos,
    parts: Vec<String>,
    chars: usize,
    labels: Vec<String>,
    notes: Vec<String>,
    body_blocks: usize,
}

impl Draft {
    fn new(block: &Block, path: Vec<String>, section: Option<String>) -> Self {
        Draft {
            heading_path: path,
            section,
            file: block.file.clone(),
            start_line: block.start_line,
            end_line: block.end_line,
            pos: block.pos,
            parts: Vec::new(),
            chars: 0,
            labels: Vec::new(),
            notes: Vec::new(),
            body_blocks: 0,
        }
    }

    fn tokens_with(&self, extra: &str) -> usize {
        let sep = if self.parts.is_empty() { 0 } else { 2 };
        (self.chars + sep + extra.chars().count()).div_ceil(4)
    }

    fn push(&mut self, block: &Block) {
        if !block.markdown.is_empty() {
            if !self.parts.is_empty() {
                self.chars += 2;
            }
            self.chars += block.markdown.chars().count();
            self.parts.push(block.markdown.clone());
            if block.kind != BlockKind::Heading {
                self.body_blocks += 1;
            }
        }
        self.end_line = self.end_line.max(block.end_line);
        self.labels.extend(block.labels.iter().cloned());
        self.notes.extend(block.notes.iter().cloned());
    }
}

struct Builder<'r> {
    registry: &'r MacroRegistry,
    labels: &'r LabelTable,
    opts: ChunkOptions,
    crumbs: Vec<Crumb>,
    draft: Option<Draft>,
    out: Vec<(LinePos, Chunk)>,
    last_exercise: Option<String>,
}

impl Builder<'_> {
    fn path(&self) -> Vec<String> {
        self.crumbs.iter().map(|c| c.text.clone()).collect()
    }

    fn section(&self) -> Option<String> {
        self.crumbs.iter().rev().find(|c| !c.number.is_empty()).map(|c| c.number.clone())
    }

    fn flush(&mut self, diags: &mut Diagnostics) {
        let Some(d) = self.draft.take() else { return };
        if d.parts.is_empty() {
            return;
        }
        let markdown = d.parts.join("\n\n");
        let tokens = estimate_tokens(&markdown);
        if tokens > self.opts.max_tokens {
            diags.warn_at(
                &d.file,
                d.start_line,
                format!(
                    "chunk of {tokens} estimated tokens exceeds the budget of {}; a single paragraph is kept whole",
                    self.opts.max_tokens
                ),
            );
        }
        let mut metadata = page_metadata(&d.labels, self.labels);
        if let Some(section) = d.section {
            metadata.insert("section".into(), Value::String(section));
        }
        let chunk = Chunk {
            id: String::new(),
            kind: "text".into(),
            embedding_text: embedding_text(&d.heading_path, &markdown),
            heading_path: d.heading_path,
            source_file: d.file,
            start_line: d.start_line,
            end_line: d.end_line,
            labels: dedup(d.labels),
            markdown,
            metadata,
        };
        self.out.push((d.pos, with_notes(chunk, self.registry, &d.notes)));
    }

    fn heading(&mut self, block: &Block, diags: &mut Diagnostics) {
        let h = block.heading.as_ref().expect("heading block");
        self.crumbs.retain(|c| c.depth < h.depth);
        self.crumbs.push(Crumb {
            depth: h.depth,
            text: h.crumb(),
            number: h.number.clone(),
        });
        let path = self.path();
        let section = self.section();
        let splits = h.level >= self.opts.min_heading_level;
        match &mut self.draft {
            Some(d) if d.body_blocks == 0 && d.file == block.file => {
                d.heading_path = path;
                d.section = section;
                d.push(block);
            }
            Some(d) if !splits && d.file == block.file => d.push(block),
            _ => {
                self.flush(diags);
                let mut d = Draft::new(block, path, section);
                d.push(block);
                self.draft = Some(d);
            }
        }
    }

    fn body(&mut self, block: &Block, diags: &mut Diagnostics) {
        let fits = match &self.draft {
            Some(d) => {
                d.file == block.file
                    && (d.body_blocks == 0
                        || block.markdown.is_empty()
                        || d.tokens_with(&block.markdown) <= self.opts.max_tokens)
            }
            None => false,
        };
        if !fits {
            self.flush(diags);
            self.draft = Some(Draft::new(block, self.path(), self.section()));
        }
        if let Some(d) = &mut self.draft {
            d.push(block);
        }
    }

    fn structural(&mut self, s: &ConvertedStructural) {
        let b = &s.block;
        let env = b.environment.as_str();
        let (_, number) = structural_heading(s, self.labels);
        let markdown = structural_markdown(s, self.labels);
        let mut labels: Vec<String> = b.label.iter().cloned().collect();
        let mut notes = Vec::new();
        for block in &s.body {
            labels.extend(block.labels.iter().cloned());
            notes.extend(block.notes.iter().cloned());
        }
        let mut metadata = page_metadata(&labels, self.labels);
        if let Some(section) = self.section() {
            metadata.insert("section".into(), Value::String(section));
        }
        let exercise_id = match env {
            "exercise" => {
                self.last_exercise = number.clone();
                number.clone()
            }
            "solution" => number.clone().or_else(|| self.last_exercise.clone()),
            _ => None,
        };
        if let Some(id) = exercise_id {
            metadata.insert("exercise_id".into(), Value::String(id));
        }
        let path = self.path();
        let chunk = Chunk {
            id: String::new(),
            kind: env.to_string(),
            embedding_text: embedding_text(&path, &markdown),
            heading_path: path,
            source_file: b.span.file.clone(),
            start_line: b.span.start_line,
            end_line: b.span.end_line,
            labels: dedup(labels),
            markdown,
            metadata,
        };
        self.out.push((b.pos, with_notes(chunk, self.registry, &notes)));
    }

    fn figure(&mut self, f: &ConvertedFigure, excerpt: &str, diags: &mut Diagnostics) {
        let fig = &f.figure;
        let entry = (!fig.label.is_empty()).then(|| self.labels.get(&fig.label)).flatten();
        let markdown = figure_markdown(f, self.labels);

        let path = self.path();
        let mut metadata = BTreeMap::new();
        if !fig.label.is_empty() {
            metadata.insert("label".into(), Value::String(fig.label.clone()));
        }
        metadata.insert("caption".into(), Value::String(plain_text(&f.caption, &[])));
        if let Some(image) = &fig.image_file {
            metadata.insert("image_file".into(), Value::String(image.clone()));
        }
        if fig.tikz_source.is_some() {
            metadata.insert("tikz".into(), Value::Bool(true));
        }
        if let Some(section) = self.section() {
            metadata.insert("section".into(), Value::String(section));
        }
        if let Some(page) = entry.map(|e| e.page.as_str()).filter(|p| !p.is_empty()) {
            metadata.insert("page".into(), page_value(page));
        }

        let caption = plain_text(&f.caption, &[]);
        let description = fig.ai_description.clone().unwrap_or_default();
        if caption.is_empty() && description.is_empty() {
            diags.warn_at(
                &fig.span.file,
                fig.span.start_line,
                "figure has neither a caption nor an \\AIDescription; embedding falls back to its context",
            );
        }
        let mut pieces = Vec::new();
        if !caption.is_empty() {
            pieces.push(format!("Figure: {caption}"));
        }
        if !description.is_empty() {
            pieces.push(description);
        }
        if !path.is_empty() {
            pieces.push(format!("Location: {}", path.join(" > ")));
        }
        if !excerpt.is_empty() {
            pieces.push(excerpt.to_string());
        }
        let chunk = Chunk {
            id: String::new(),
            kind: "figure".into(),
            embedding_text: pieces.join("\n\n"),
            heading_path: path,
            source_file: fig.span.file.clone(),
            start_line: fig.span.start_line,
            end_line: fig.span.end_line,
            labels: if fig.label.is_empty() { vec![] } else { vec![fig.label.clone()] },
            markdown,
            metadata,
        };
        self.out.push((fig.pos, chunk));
    }
}

/// "### Exercise 4.3 (Title)" and the resolved number, if any.
pub fn structural_heading(s: &ConvertedStructural, labels: &LabelTable) -> (String, Option<String>) {
    let b = &s.block;
    let number = b
        .number
        .clone()
        .or_else(|| b.label.as_ref().and_then(|l| labels.get(l)).map(|e| e.reference.clone()));
    let mut heading = format!("### {}", capitalize(&b.environment));
    if let Some(n) = &number {
        heading.push(' ');
        heading.push_str(n);
    }
    if let Some(t) = s.title.as_deref().filter(|t| !t.is_empty()) {
        heading.push_str(&format!(" ({t})"));
    }
    (heading, number)
}

pub fn structural_markdown(s: &ConvertedStructural, labels: &LabelTable) -> String {
    let (heading, _) = structural_heading(s, labels);
    let body = render(&s.body);
    if body.is_empty() {
        heading
    } else {
        format!("{heading}\n\n{body}")
    }
}

/// Caption line followed by the image link or the TikZ source.
pub fn figure_markdown(f: &ConvertedFigure, labels: &LabelTable) -> String {
    let fig = &f.figure;
    let title = match (!fig.label.is_empty()).then(|| labels.get(&fig.label)).flatten() {
        Some(e) => format!("**Figure {}.**", e.reference),
        None => "**Figure.**".to_string(),
    };
    let mut parts = vec![if f.caption.is_empty() { title } else { format!("{title} {}", f.caption) }];
    if let Some(image) = &fig.image_file {
        parts.push(format!("![{}]({image})", f.caption));
    }
    if let Some(tikz) = &fig.tikz_source {
        let lines: Vec<&str> = tikz.lines().collect();
        parts.push(crate::markdown::fence(&lines, "latex"));
    }
    parts.join("\n\n")
}

/// Splits the document into chunks. Text and structural chunks share the
/// `chunk-` id sequence; figures and the glossary have their own.
pub fn chunk_document(
    parts: &DocumentParts,
    registry: &MacroRegistry,
    labels: &LabelTable,
    opts: ChunkOptions,
    main_file: &str,
    diags: &mut Diagnostics,
) -> Vec<Chunk> {
    let mut items: Vec<(LinePos, Item<'_>)> = Vec::new();
    items.extend(parts.blocks.iter().map(|b| (b.pos, Item::Block(b))));
    items.extend(parts.breaks.iter().map(|&p| (p, Item::Break)));
    items.extend(parts.figures.iter().map(|f| (f.figure.pos, Item::Figure(f))));
    items.extend(parts.structurals.iter().map(|s| (s.block.pos, Item::Structural(s))));
    items.sort_by_key(|(pos, _)| *pos);

    let mut b = Builder {
        registry,
        labels,
        opts,
        crumbs: Vec::new(),
        draft: None,
        out: Vec::new(),
        last_exercise: None,
    };
    for (k, (_, item)) in items.iter().enumerate() {
        match item {
            Item::Block(block) if block.heading.is_some() => b.heading(block, diags),
            Item::Block(block) => b.body(block, diags),
            Item::Break => b.flush(diags),
            Item::Structural(s) => {
                b.flush(diags);
                b.structural(s);
            }
            Item::Figure(f) => {
                let excerpt = items[k + 1..]
                    .iter()
                    .find_map(|(_, it)| match it {
                        Item::Block(bl) if bl.kind == BlockKind::Paragraph && !bl.markdown.is_empty() => {
                            Some(truncate_chars(&plain_text(&bl.markdown, &[]), EXCERPT_CHARS))
                        }
                        _ => None,
                    })
                    .unwrap_or_default();
                b.figure(f, &excerpt, diags);
            }
        }
    }
    b.flush(diags);

    let mut chunks: Vec<(LinePos, Chunk)> = b.out;
    chunks.sort_by_key(|(pos, _)| *pos);
    let mut chunks: Vec<Chunk> = chunks.into_iter().map(|(_, c)| c).collect();
    for chunk in &mut chunks {
        if let Some(access) = registry.visibility_for(&chunk.kind) {
            chunk.metadata.insert("visibility".into(), Value::String(access.to_string()));
        }
    }
    let (mut text_n, mut fig_n) = (0, 0);
    for chunk in &mut chunks {
        chunk.id = if chunk.kind == "figure" {
            fig_n += 1;
            format!("figure-{fig_n:05}")
        } else {
            text_n += 1;
            format!("chunk-{text_n:05}")
        };
    }
    if let Some(mut glossary) = make_glossary_chunk(registry, main_file) {
        if let Some(access) = registry.visibility_for("glossary") {
            glossary.metadata.insert("visibility".into(), Value::String(access.to_string()));
        }
        chunks.push(glossary);
    }
    chunks
}

/// The notation glossary, or `None` when no macro is active.
pub fn make_glossary_chunk(registry: &MacroRegistry, main_file: &str) -> Option<Chunk> {
    let active: Vec<_> = registry.active().collect();
    if active.is_empty() {
        return None;
    }
    let mut sections = vec!["# Notation glossary".to_string()];
    for a in &active {
        let mut parts = vec![format!("## \\{}: {}", a.macro_name, a.name)];
        if !a.aliases.is_empty() {
            parts.push(format!("Aliases: {}.", a.aliases.join(", ")));
        }
        if let Some(meaning) = a.meaning.as_deref().filter(|m| !m.is_empty()) {
            parts.push(meaning.to_string());
        }
        if let Some(display) = a.display.as_deref().filter(|d| !d.is_empty()) {
            parts.push(format!("Rendered as: ${display}$"));
        }
        if let Some(example) = a.example_text.as_deref().or(a.example_latex.as_deref()).filter(|e| !e.is_empty()) {
            parts.push(format!("Example: {example}"));
        }
        sections.push(parts.join("\n\n"));
    }
    let markdown = sections.join("\n\n");
    let path = vec!["Notation glossary".to_string()];
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "macros".into(),
        Value::Array(active.iter().map(|a| Value::String(a.macro_name.clone())).collect()),
    );
    Some(Chunk {
        id: "glossary-00001".into(),
        kind: "glossary".into(),
        embedding_text: embedding_text(&path, &markdown),
        heading_path: path,
        source_file: main_file.to_string(),
        start_line: 1,
        end_line: 1,
        labels: vec![],
        markdown,
        metadata,
    })
}

/// True when `\name` occurs in `text` as a whole control word.
fn mentions_macro(text: &str, name: &str) -> bool {
    let needle = format!("\\{name}");
    text.match_indices(&needle).any(|(at, _)| {
        !text[at + needle.len()..].starts_with(|c: char| c.is_ascii_alphabetic())
    })
}

fn notation_note(a: &crate::annotations::MacroAnnotation) -> String {
    let mut note = format!("Notation note: \\{} means \"{}\".", a.macro_name, a.name);
    if let Some(meaning) = a.meaning.as_deref().filter(|m| !m.is_empty()) {
        note.push(' ');
        note.push_str(meaning);
    }
    if !a.aliases.is_empty() {
        note.push_str(&format!(" Also known as: {}.", a.aliases.join(", ")));
    }
    note
}

/// Appends one notation note per active macro used in the Markdown.
pub fn enrich_embedding_text(mut chunk: Chunk, registry: &MacroRegistry) -> Chunk {
    for a in registry.active() {
        if mentions_macro(&chunk.markdown, &a.macro_name) {
            chunk.embedding_text.push_str("\n\n");
            chunk.embedding_text.push_str(&notation_note(a));
        }
    }
    chunk
}

fn with_notes(chunk: Chunk, registry: &MacroRegistry, notes: &[String]) -> Chunk {
    let mut chunk = enrich_embedding_text(chunk, registry);
    for note in notes {
        chunk.embedding_text.push_str("\n\n");
        chunk.embedding_text.push_str(note);
    }
    chunk
}

/// "Location: A > B" followed by the plain text of the Markdown.
pub fn embedding_text(heading_path: &[String], markdown: &str) -> String {
    let body = plain_text(markdown, heading_path);
    if heading_path.is_empty() {
        body
    } else if body.is_empty() {
        format!("Location: {}", heading_path.join(" > "))
    } else {
        format!("Location: {}\n\n{body}", heading_path.join(" > "))
    }
}

/// Markdown with markup characters removed. Heading lines that repeat an
/// entry of `crumbs` are dropped.
fn plain_text(markdown: &str, crumbs: &[String]) -> String {
    let mut lines = Vec::new();
    for line in markdown.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            continue;
        }
        let line = if trimmed.starts_with('#') {
            let text = trimmed.trim_start_matches('#').trim();
            if crumbs.iter().any(|c| c == text) {
                continue;
            }
            text
        } else if let Some(rest) = trimmed.strip_prefix('>') {
            rest.trim_start()
        } else {
            line
        };
        lines.push(line.replace("**", "").replace('`', ""));
    }
    let text = lines.join("\n");
    let mut out = String::new();
    for para in text.split("\n\n") {
        let para = para.trim_matches('\n');
        if para.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push_str("\n\n");
        }
        out.push_str(para);
    }
    out
}

fn truncate_chars(s: &str, n: usize) -> String {
    match s.char_indices().nth(n) {
        Some((at, _)) => s[..at].trim_end().to_string(),
        None => s.to_string(),
    }
}

fn page_value(page: &str) -> Value {
    page.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::String(page.to_string()))
}

fn page_metadata(labels: &[String], table: &LabelTable) -> BTreeMap<String, Value> {
    let pages: Vec<&str> = labels
        .iter()
        .filter_map(|l| table.get(l))
        .map(|e| e.page.as_str())
        .filter(|p| !p.is_empty())
        .collect();
    let mut metadata = BTreeMap::new();
    if let (Some(first), Some(last)) = (pages.first(), pages.last()) {
        metadata.insert("page_start".into(), page_value(first));
        metadata.insert("page_end".into(), page_value(last));
    }
    metadata
}

fn dedup(labels: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    labels.into_iter().filter(|l| seen.insert(l.clone())).collect()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
