//! The end-to-end run: load, resolve, convert, chunk, write.

use std::path::PathBuf;

use crate::annotations::{self, MacroRegistry, YamlAnnotations};
use crate::chunker::{self, Chunk, ChunkOptions, ConvertedFigure, ConvertedStructural, DocumentParts};
use crate::diagnostics::Diagnostics;
use crate::emit::{self, OutputSet};
use crate::error::{Error, Result};
use crate::labels::{self, LabelTable, NounTable};
use crate::markdown::Converter;
use crate::source::{self, LinePos, SourceDocument};
use crate::structure;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub tex_path: PathBuf,
    /// Defaults to the `.tex` path with extension `.aux`.
    pub aux_path: Option<PathBuf>,
    /// Defaults to the `.tex` path with extension `.rag.yaml`.
    pub yaml_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub chunk: ChunkOptions,
}

impl Config {
    pub fn new(tex_path: impl Into<PathBuf>) -> Self {
        Config {
            tex_path: tex_path.into(),
            aux_path: None,
            yaml_path: None,
            out_dir: PathBuf::from("rag_out"),
            chunk: ChunkOptions::default(),
        }
    }

    pub fn aux_path(&self) -> PathBuf {
        self.aux_path.clone().unwrap_or_else(|| self.tex_path.with_extension("aux"))
    }

    pub fn yaml_path(&self) -> PathBuf {
        self.yaml_path.clone().unwrap_or_else(|| self.tex_path.with_extension("rag.yaml"))
    }

    pub fn stem(&self) -> String {
        self.tex_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "document".into())
    }
}

/// Result of processing a document in memory.
#[derive(Debug, Clone)]
pub struct Processed {
    pub chunks: Vec<Chunk>,
    pub labels: LabelTable,
    pub registry: MacroRegistry,
    /// The full Markdown rendering.
    pub markdown: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Summary {
    pub text_chunks: usize,
    pub structural_chunks: usize,
    pub figure_chunks: usize,
    pub glossary_chunks: usize,
    pub warnings: usize,
}

impl Summary {
    pub fn of(chunks: &[Chunk], warnings: usize) -> Self {
        let count = |pred: &dyn Fn(&str) -> bool| chunks.iter().filter(|c| pred(&c.kind)).count();
        Summary {
            text_chunks: count(&|k| k == "text"),
            structural_chunks: count(&|k| !matches!(k, "text" | "figure" | "glossary")),
            figure_chunks: count(&|k| k == "figure"),
            glossary_chunks: count(&|k| k == "glossary"),
            warnings,
        }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} text chunks, {} structural chunks, {} figure chunks, {} glossary chunks, {} warnings",
            self.text_chunks, self.structural_chunks, self.figure_chunks, self.glossary_chunks, self.warnings
        )
    }
}

/// Runs every stage after loading on an already flattened document.
pub fn process(doc: &SourceDocument, labels: LabelTable, yaml: YamlAnnotations, opts: ChunkOptions, diags: &mut Diagnostics) -> Result<Processed> {
    if opts.max_tokens == 0 {
        return Err(Error::InvalidOption("--max-tokens must be at least 1".into()));
    }
    labels.check_consistency(diags);
    let mut nouns = NounTable::default();
    nouns.apply_declarations(&doc.lines);

    let in_source = annotations::scan_declarations(doc, diags);
    let registry = annotations::merge_registry(in_source, yaml.macros, yaml.suppressed, yaml.visibility_rules);

    let (_, body) = doc.split_body();
    let (body, figures) = structure::extract_figures(&body, diags);
    let (body, structurals) = structure::extract_structural(&body, diags);
    let (body, breaks) = structure::find_chunk_breaks(&body);

    let mut conv = Converter::new(&registry, &labels, &nouns);
    let blocks = conv.convert_block(&body.lines, diags);
    let figures: Vec<ConvertedFigure> = figures
        .into_iter()
        .map(|figure| {
            let caption = conv
                .convert_fragment(&figure.caption, &figure.span.file, figure.span.start_line, diags)
                .markdown;
            ConvertedFigure { figure, caption }
        })
        .collect();
    let structurals: Vec<ConvertedStructural> = structurals
        .into_iter()
        .map(|block| {
            let title = block
                .title
                .as_ref()
                .map(|t| conv.convert_fragment(t, &block.span.file, block.span.start_line, diags).markdown);
            let body = conv.convert_block(&block.body_lines, diags);
            ConvertedStructural { block, title, body }
        })
        .collect();
    drop(conv);

    let parts = DocumentParts {
        blocks,
        breaks,
        figures,
        structurals,
    };
    let markdown = render_document(&parts, &labels);
    let chunks = chunker::chunk_document(&parts, &registry, &labels, opts, &doc.main_file, diags);
    Ok(Processed {
        chunks,
        labels,
        registry,
        markdown,
    })
}

/// Blocks, figures, and structural blocks in document order.
pub fn render_document(parts: &DocumentParts, labels: &LabelTable) -> String {
    let mut pieces: Vec<(LinePos, String)> = Vec::new();
    pieces.extend(parts.blocks.iter().map(|b| (b.pos, b.markdown.clone())));
    pieces.extend(parts.figures.iter().map(|f| (f.figure.pos, chunker::figure_markdown(f, labels))));
    pieces.extend(parts.structurals.iter().map(|s| (s.block.pos, chunker::structural_markdown(s, labels))));
    pieces.sort_by_key(|(pos, _)| *pos);
    pieces
        .into_iter()
        .map(|(_, md)| md)
        .filter(|md| !md.is_empty())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Loads every input named by `config`, processes it, and writes the three
/// output files.
pub fn run(config: &Config, diags: &mut Diagnostics) -> Result<(Summary, OutputSet)> {
    let processed = load_and_process(config, diags)?;
    let outputs = emit::write_outputs(&processed.chunks, &processed.labels, &processed.markdown, &config.out_dir, &config.stem())?;
    Ok((Summary::of(&processed.chunks, diags.len()), outputs))
}

pub fn load_and_process(config: &Config, diags: &mut Diagnostics) -> Result<Processed> {
    let doc = source::load_document(&config.tex_path, diags)?;
    let labels = labels::load_aux(&config.aux_path(), diags);
    let yaml = annotations::load_yaml_annotations(&config.yaml_path())?;
    process(&doc, labels, yaml, config.chunk, diags)
}

/// Processes LaTeX text held in memory, with no `.aux` and no YAML.
pub fn process_text(file: &str, text: &str, opts: ChunkOptions, diags: &mut Diagnostics) -> Result<Processed> {
    let doc = SourceDocument::from_text(file, text);
    process(&doc, LabelTable::default(), YamlAnnotations::default(), opts, diags)
}
