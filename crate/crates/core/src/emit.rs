//! Writes `chunks.jsonl`, `labels.json`, and the Markdown rendering.

use std::fs;
use std::path::{Path, PathBuf};

use crate::chunker::Chunk;
use crate::error::{Error, Result};
use crate::labels::LabelTable;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSet {
    pub chunks_path: PathBuf,
    pub labels_path: PathBuf,
    pub markdown_path: PathBuf,
}

/// One compact JSON object per line, keys in struct order.
pub fn chunks_to_jsonl(chunks: &[Chunk]) -> String {
    let mut out = String::new();
    for chunk in chunks {
        out.push_str(&serde_json::to_string(chunk).expect("chunk serializes"));
        out.push('\n');
    }
    out
}

/// Parses a `chunks.jsonl` file back into chunks.
pub fn parse_jsonl(text: &str) -> serde_json::Result<Vec<Chunk>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub fn labels_to_json(table: &LabelTable) -> String {
    let mut out = serde_json::to_string_pretty(&table.entries).expect("labels serialize");
    out.push('\n');
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_outputs(chunks: &[Chunk], labels: &LabelTable, markdown: &str, out_dir: &Path, stem: &str) -> Result<OutputSet> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let set = OutputSet {
        chunks_path: out_dir.join("chunks.jsonl"),
        labels_path: out_dir.join("labels.json"),
        markdown_path: out_dir.join(format!("{stem}.rag.md")),
    };
    write(&set.chunks_path, &chunks_to_jsonl(chunks))?;
    write(&set.labels_path, &labels_to_json(labels))?;
    let mut md = markdown.to_string();
    if !md.is_empty() && !md.ends_with('\n') {
        md.push('\n');
    }
    write(&set.markdown_path, &md)?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Diagnostics;
    use std::collections::BTreeMap;

    fn chunk(id: &str, markdown: &str) -> Chunk {
        Chunk {
            id: id.into(),
            kind: "text".into(),
            heading_path: vec!["A".into()],
            source_file: "main.tex".into(),
            start_line: 1,
            end_line: 2,
            labels: vec![],
            markdown: markdown.into(),
            embedding_text: markdown.into(),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn three_chunks_three_lines() {
        let chunks = vec![chunk("chunk-00001", "a\nb"), chunk("chunk-00002", "c"), chunk("chunk-00003", "d")];
        let text = chunks_to_jsonl(&chunks);
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.is_object());
        }
        assert!(text.contains(r#""markdown":"a\nb""#));
    }

    #[test]
    fn key_order_is_fixed() {
        let line = chunks_to_jsonl(&[chunk("chunk-00001", "x")]);
        let keys = ["id", "kind", "heading_path", "source_file", "start_line", "end_line", "labels", "markdown", "embedding_text", "metadata"];
        let positions: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\":")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_label_table() {
        assert_eq!(labels_to_json(&LabelTable::default()), "{}\n");
    }

    #[test]
    fn label_json_shape() {
        let t = LabelTable::parse_str(r"\newlabel{sec:while-loops}{{4.3}{71}{While-loops}{section.4.3}{}}", &mut Diagnostics::new());
        let v: serde_json::Value = serde_json::from_str(&labels_to_json(&t)).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"sec:while-loops": {"ref": "4.3", "page": "71", "title": "While-loops", "anchor": "section.4.3"}})
        );
    }

    #[test]
    fn round_trip_is_stable() {
        let chunks = vec![chunk("chunk-00001", "a \"q\" \u{2013} b"), chunk("chunk-00002", "c")];
        let text = chunks_to_jsonl(&chunks);
        assert_eq!(chunks_to_jsonl(&parse_jsonl(&text).unwrap()), text);
    }

    #[test]
    fn writes_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let set = write_outputs(&[chunk("chunk-00001", "x")], &LabelTable::default(), "# T", dir.path(), "book").unwrap();
        assert!(set.chunks_path.exists() && set.labels_path.exists());
        assert_eq!(fs::read_to_string(&set.markdown_path).unwrap(), "# T\n");
        assert!(set.markdown_path.ends_with("book.rag.md"));
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "").unwrap();
        let err = write_outputs(&[], &LabelTable::default(), "", &blocker.join("out"), "x").unwrap_err();
        assert!(matches!(err, Error::Write { .. }));
    }
}
