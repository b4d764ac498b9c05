//! Semantic macro annotations from `\AIDeclareNotation` and the YAML file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::diagnostics::Diagnostics;
use crate::error::{Error, Result};
use crate::source::SourceDocument;
use crate::tex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationSource {
    InSource,
    Yaml,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroAnnotation {
    /// Macro name without the backslash.
    pub macro_name: String,
    pub name: String,
    pub meaning: Option<String>,
    pub aliases: Vec<String>,
    pub example_latex: Option<String>,
    pub example_text: Option<String>,
    pub display: Option<String>,
    /// Free-form classification; stored, never interpreted.
    pub kind: Option<String>,
    pub source: AnnotationSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct VisibilityRule {
    pub environment: String,
    pub access: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MacroRegistry {
    pub annotations: BTreeMap<String, MacroAnnotation>,
    pub suppressed: BTreeSet<String>,
    pub visibility_rules: Vec<VisibilityRule>,
}

impl MacroRegistry {
    pub fn is_suppressed(&self, macro_name: &str) -> bool {
        self.suppressed.contains(macro_name)
    }

    pub fn is_registered(&self, macro_name: &str) -> bool {
        self.annotations.contains_key(macro_name)
    }

    /// Registered annotations that are not suppressed, in macro-name order.
    pub fn active(&self) -> impl Iterator<Item = &MacroAnnotation> {
        self.annotations
            .values()
            .filter(|a| !self.suppressed.contains(&a.macro_name))
    }

    /// Access level for chunks of the given kind, if a rule matches.
    pub fn visibility_for(&self, kind: &str) -> Option<&str> {
        self.visibility_rules
            .iter()
            .find(|r| r.environment == kind)
            .map(|r| r.access.as_str())
    }
}

/// Normalizes a declared macro name: drops one leading backslash and
/// surrounding whitespace. Rejects names that still contain a backslash or a
/// brace.
fn normalize_macro_name(raw: &str) -> Option<String> {
    let t = raw.trim();
    let t = t.strip_prefix('\\').unwrap_or(t).trim();
    (!t.is_empty() && !t.contains(['\\', '{', '}'])).then(|| t.to_string())
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Finds every `\AIDeclareNotation{\m}{name}{meaning}` outside verbatim
/// regions. Declarations may span lines.
pub fn scan_declarations(doc: &SourceDocument, diags: &mut Diagnostics) -> Vec<MacroAnnotation> {
    let mut out = Vec::new();
    // contiguous non-verbatim runs, so that no scan crosses a verbatim block
    let mut runs: Vec<Vec<&crate::source::SourceLine>> = vec![Vec::new()];
    for line in &doc.lines {
        if line.in_verbatim {
            runs.push(Vec::new());
        } else {
            runs.last_mut().expect("non-empty").push(line);
        }
    }
    for run in runs.iter().filter(|r| !r.is_empty()) {
        let mut text = String::new();
        let mut starts = Vec::with_capacity(run.len());
        for line in run {
            starts.push(text.len());
            text.push_str(&line.text);
            text.push('\n');
        }
        let line_of = |offset: usize| {
            let idx = starts.partition_point(|&s| s <= offset).saturating_sub(1);
            run[idx]
        };
        for (at, cmd) in tex::commands(&text) {
            if cmd.name != "AIDeclareNotation" {
                continue;
            }
            let src = line_of(at);
            let args = tex::read_arg(&text, cmd.next).and_then(|g1| {
                let g2 = tex::read_arg(&text, g1.next)?;
                let g3 = tex::read_arg(&text, g2.next)?;
                Ok((g1, g2, g3))
            });
            let Ok((g1, g2, g3)) = args else {
                diags.warn_at(
                    &src.file,
                    src.line_no,
                    "\\AIDeclareNotation with unbalanced or missing arguments skipped",
                );
                continue;
            };
            let Some(macro_name) = normalize_macro_name(g1.inner(&text)) else {
                diags.warn_at(
                    &src.file,
                    src.line_no,
                    format!("\\AIDeclareNotation: invalid macro {:?} skipped", g1.inner(&text)),
                );
                continue;
            };
            let name = collapse_ws(g2.inner(&text));
            if name.is_empty() {
                diags.warn_at(
                    &src.file,
                    src.line_no,
                    format!("\\AIDeclareNotation for \\{macro_name} has an empty name; skipped"),
                );
                continue;
            }
            let meaning = collapse_ws(g3.inner(&text));
            out.push(MacroAnnotation {
                macro_name,
                name,
                meaning: (!meaning.is_empty()).then_some(meaning),
                aliases: Vec::new(),
                example_latex: None,
                example_text: None,
                display: None,
                kind: None,
                source: AnnotationSource::InSource,
            });
        }
    }
    out
}

#[derive(Debug, Default, Deserialize)]
struct YamlFile {
    #[serde(default)]
    macros: BTreeMap<String, YamlMacro>,
    #[serde(default)]
    pedagogy: Option<YamlPedagogy>,
    #[serde(default)]
    suppress_macros: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct YamlMacro {
    name: String,
    #[serde(default)]
    meaning: Option<String>,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    example_latex: Option<String>,
    #[serde(default)]
    example_text: Option<String>,
    #[serde(default)]
    display: Option<String>,
    #[serde(default)]
    kind: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct YamlPedagogy {
    #[serde(default)]
    visibility: Vec<VisibilityRule>,
}

/// Contents of an annotation file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct YamlAnnotations {
    pub macros: Vec<MacroAnnotation>,
    pub suppressed: BTreeSet<String>,
    pub visibility_rules: Vec<VisibilityRule>,
}

fn trimmed(s: Option<String>) -> Option<String> {
    s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

/// Parses annotation YAML. `origin` names the file in error messages.
pub fn parse_yaml_annotations(text: &str, origin: &Path) -> Result<YamlAnnotations> {
    let yaml_err = |e: serde_yaml::Error| Error::Yaml {
        path: origin.to_path_buf(),
        line: e.location().map(|l| l.line()),
        message: e.to_string(),
    };
    let file: Option<YamlFile> = serde_yaml::from_str(text).map_err(yaml_err)?;
    let file = file.unwrap_or_default();
    let mut macros = Vec::new();
    for (key, m) in file.macros {
        let macro_name = normalize_macro_name(&key).ok_or_else(|| Error::Yaml {
            path: origin.to_path_buf(),
            line: None,
            message: format!("invalid macro name {key:?}"),
        })?;
        let name = m.name.trim().to_string();
        if name.is_empty() {
            return Err(Error::Yaml {
                path: origin.to_path_buf(),
                line: None,
                message: format!("macro {key:?} has an empty name"),
            });
        }
        macros.push(MacroAnnotation {
            macro_name,
            name,
            meaning: trimmed(m.meaning),
            aliases: m.aliases.into_iter().map(|a| a.trim().to_string()).collect(),
            example_latex: trimmed(m.example_latex),
            example_text: trimmed(m.example_text),
            display: trimmed(m.display),
            kind: trimmed(m.kind),
            source: AnnotationSource::Yaml,
        });
    }
    let suppressed = file
        .suppress_macros
        .iter()
        .filter_map(|m| normalize_macro_name(m))
        .collect();
    Ok(YamlAnnotations {
        macros,
        suppressed,
        visibility_rules: file.pedagogy.map(|p| p.visibility).unwrap_or_default(),
    })
}

/// Loads the annotation file. A missing file is silently treated as empty.
pub fn load_yaml_annotations(yaml_path: &Path) -> Result<YamlAnnotations> {
    if !yaml_path.exists() {
        return Ok(YamlAnnotations::default());
    }
    let text = fs::read_to_string(yaml_path).map_err(|source| Error::Read {
        path: yaml_path.to_path_buf(),
        source,
    })?;
    parse_yaml_annotations(&text, yaml_path)
}

/// Merges in-source declarations with YAML annotations. A YAML record
/// replaces the in-source record for the same macro as a whole.
pub fn merge_registry(
    in_source: Vec<MacroAnnotation>,
    yaml: Vec<MacroAnnotation>,
    suppressed: BTreeSet<String>,
    visibility_rules: Vec<VisibilityRule>,
) -> MacroRegistry {
    let mut annotations = BTreeMap::new();
    for a in in_source.into_iter().chain(yaml) {
        match annotations.get(&a.macro_name) {
            Some(MacroAnnotation {
                source: AnnotationSource::Yaml,
                ..
            }) if a.source == AnnotationSource::InSource => {}
            _ => {
                annotations.insert(a.macro_name.clone(), a);
            }
        }
    }
    MacroRegistry {
        annotations,
        suppressed,
        visibility_rules,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPLT_YAML: &str = r#"
macros:
  splt:
    name: "split combinator"
    meaning: >
      Combines two functions with the same input into a pair-valued function.
    aliases:
      - split
      - triangle operator
    example_latex: "f \\splt g"
    example_text: "f \\splt g maps x to (f x, g x)."

pedagogy:
  visibility:
    - environment: solution
      access: teacher_only
"#;

    fn ann(name: &str, meaning: &str, source: AnnotationSource) -> MacroAnnotation {
        MacroAnnotation {
            macro_name: name.into(),
            name: format!("{name} name"),
            meaning: Some(meaning.into()),
            aliases: vec![],
            example_latex: None,
            example_text: None,
            display: None,
            kind: None,
            source,
        }
    }

    #[test]
    fn declaration_single_line() {
        let doc = SourceDocument::from_text(
            "m.tex",
            r"\AIDeclareNotation{\splt}{split combinator}{Combines two functions with the same input into a pair-valued function.}",
        );
        let mut d = Diagnostics::new();
        let got = scan_declarations(&doc, &mut d);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].macro_name, "splt");
        assert_eq!(got[0].name, "split combinator");
        assert_eq!(
            got[0].meaning.as_deref(),
            Some("Combines two functions with the same input into a pair-valued function.")
        );
        assert_eq!(got[0].source, AnnotationSource::InSource);
    }

    #[test]
    fn declaration_spanning_lines_matches_single_line() {
        let one = SourceDocument::from_text("m.tex", r"\AIDeclareNotation{\splt}{split combinator}{Pairs.}");
        let three = SourceDocument::from_text(
            "m.tex",
            "\\AIDeclareNotation\n  {\\splt}\n  {split combinator}\n  {Pairs.}\n",
        );
        let mut d = Diagnostics::new();
        assert_eq!(scan_declarations(&one, &mut d), scan_declarations(&three, &mut d));
        assert!(d.is_empty());
    }

    #[test]
    fn no_declarations_and_verbatim_ignored() {
        let doc = SourceDocument::from_text(
            "m.tex",
            "plain text\n\\begin{verbatim}\n\\AIDeclareNotation{\\x}{y}{z}\n\\end{verbatim}\n",
        );
        let mut d = Diagnostics::new();
        assert!(scan_declarations(&doc, &mut d).is_empty());
    }

    #[test]
    fn unbalanced_declaration_warns() {
        let doc = SourceDocument::from_text("m.tex", "\\AIDeclareNotation{\\x}{y}{z\n");
        let mut d = Diagnostics::new();
        assert!(scan_declarations(&doc, &mut d).is_empty());
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn yaml_example_file() {
        let y = parse_yaml_annotations(SPLT_YAML, Path::new("book.rag.yaml")).unwrap();
        assert_eq!(y.macros.len(), 1);
        let s = &y.macros[0];
        assert_eq!(s.macro_name, "splt");
        assert_eq!(s.aliases, ["split", "triangle operator"]);
        assert_eq!(
            s.meaning.as_deref(),
            Some("Combines two functions with the same input into a pair-valued function.")
        );
        assert_eq!(s.example_text.as_deref(), Some(r"f \splt g maps x to (f x, g x)."));
        assert_eq!(
            y.visibility_rules,
            [VisibilityRule {
                environment: "solution".into(),
                access: "teacher_only".into()
            }]
        );
    }

    #[test]
    fn yaml_suppress_list() {
        let y = parse_yaml_annotations(
            "suppress_macros: [graphicspath, usetikzlibrary, cite, url]\n",
            Path::new("x.yaml"),
        )
        .unwrap();
        assert_eq!(y.suppressed.len(), 4);
        assert!(y.suppressed.contains("cite"));
    }

    #[test]
    fn yaml_empty_and_comment_only() {
        for text in ["", "   \n", "# nothing here\n"] {
            let y = parse_yaml_annotations(text, Path::new("x.yaml")).unwrap();
            assert_eq!(y, YamlAnnotations::default());
        }
    }

    #[test]
    fn yaml_name_is_required() {
        let err = parse_yaml_annotations("macros:\n  foo:\n    meaning: x\n", Path::new("x.yaml"))
            .unwrap_err();
        assert!(err.to_string().contains("x.yaml"));
    }

    #[test]
    fn yaml_invalid_reports_line() {
        let err = parse_yaml_annotations("macros:\n  a: [\n", Path::new("bad.yaml")).unwrap_err();
        match err {
            Error::Yaml { line, .. } => assert!(line.is_some()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_yaml_file_is_empty() {
        let y = load_yaml_annotations(Path::new("/nonexistent/book.rag.yaml")).unwrap();
        assert_eq!(y, YamlAnnotations::default());
    }

    #[test]
    fn yaml_wins_on_conflict() {
        let r = merge_registry(
            vec![ann("splt", "in-source meaning", AnnotationSource::InSource)],
            vec![ann("splt", "yaml meaning", AnnotationSource::Yaml)],
            BTreeSet::new(),
            vec![],
        );
        let a = &r.annotations["splt"];
        assert_eq!(a.meaning.as_deref(), Some("yaml meaning"));
        assert_eq!(a.source, AnnotationSource::Yaml);
    }

    #[test]
    fn single_source_and_disjoint_union() {
        let only = merge_registry(
            vec![ann("a", "m", AnnotationSource::InSource)],
            vec![],
            BTreeSet::new(),
            vec![],
        );
        assert_eq!(only.annotations["a"].source, AnnotationSource::InSource);
        let both = merge_registry(
            vec![ann("a", "m", AnnotationSource::InSource)],
            vec![ann("b", "m", AnnotationSource::Yaml)],
            BTreeSet::new(),
            vec![],
        );
        let keys: Vec<&str> = both.annotations.keys().map(String::as_str).collect();
        assert_eq!(keys, ["a", "b"]);
    }

    #[test]
    fn suppressed_excluded_from_active() {
        let r = merge_registry(
            vec![ann("a", "m", AnnotationSource::InSource), ann("b", "m", AnnotationSource::InSource)],
            vec![],
            BTreeSet::from(["b".to_string()]),
            vec![],
        );
        let active: Vec<&str> = r.active().map(|a| a.macro_name.as_str()).collect();
        assert_eq!(active, ["a"]);
    }
}
