use std::path::Path;

use latex_rag::annotations::{parse_yaml_annotations, YamlAnnotations};
use latex_rag::chunker::{Chunk, ChunkOptions};
use latex_rag::emit::{chunks_to_jsonl, parse_jsonl};
use latex_rag::labels::{parse_newlabel, LabelTable};
use latex_rag::pipeline::{self, Processed};
use latex_rag::source::{strip_comment, SourceDocument};
use latex_rag::Diagnostics;
use proptest::prelude::*;

const AUX: &str = r"\newlabel{sec:a}{{1.2}{4}{Alpha}{section.1.2}{}}
\newlabel{sec:a@cref}{{[section][2][1]1.2}{[1][4][]4}}
\newlabel{fig:b}{{3}{9}{}{figure.3}{}}
\newlabel{fig:b@cref}{{[figure][3][]3}{[1][9][]9}}
\newlabel{eq:c}{{5}{11}{}{equation.5}{}}
\newlabel{eq:c@cref}{{[equation][5][]5}{[1][11][]11}}";

const KNOWN: [&str; 3] = ["sec:a", "fig:b", "eq:c"];

const SPLT_YAML: &str = r#"macros:
  splt:
    name: split combinator
    meaning: Pairs two functions.
pedagogy:
  visibility:
    - environment: solution
      access: teacher_only
"#;

fn run_with(tex: &str, yaml: &str, opts: ChunkOptions) -> (Processed, Diagnostics) {
    let mut diags = Diagnostics::new();
    let labels = LabelTable::parse_str(AUX, &mut diags);
    let yaml = if yaml.is_empty() {
        YamlAnnotations::default()
    } else {
        parse_yaml_annotations(yaml, Path::new("main.rag.yaml")).unwrap()
    };
    let doc = SourceDocument::from_text("main.tex", tex);
    let p = pipeline::process(&doc, labels, yaml, opts, &mut diags).unwrap();
    (p, diags)
}

fn word() -> impl Strategy<Value = String> + Clone {
    "[a-z]{1,8}"
}

/// Inline LaTeX built from the constructs the converter rewrites.
fn inline_piece() -> impl Strategy<Value = String> {
    prop_oneof![
        word(),
        word().prop_map(|w| format!("\\emph{{{w}}}")),
        word().prop_map(|w| format!("\\textbf{{{w}}}")),
        word().prop_map(|w| format!("\\texttt{{{w}}}")),
        word().prop_map(|w| format!("``{w}''")),
        word().prop_map(|w| format!("${w}^2$")),
        Just("--".to_string()),
        Just("---".to_string()),
        Just("a~b".to_string()),
        Just("\\\\".to_string()),
        Just("\\&".to_string()),
        prop::sample::select(KNOWN.to_vec()).prop_map(|l| format!("\\ref{{{l}}}")),
        prop::sample::select(KNOWN.to_vec()).prop_map(|l| format!("\\cref{{{l}}}")),
        Just("\\ref{unknown:x}".to_string()),
    ]
}

fn inline_text() -> impl Strategy<Value = String> {
    prop::collection::vec(inline_piece(), 1..25).prop_map(|p| p.join(" "))
}

fn ref_command() -> impl Strategy<Value = String> {
    let cmd = prop::sample::select(vec!["ref", "pageref", "cref", "Cref", "eqref", "autoref"]);
    let list = prop::sample::subsequence(KNOWN.to_vec(), 1..=3).prop_shuffle();
    (cmd, list).prop_map(|(c, l)| {
        let arg = if matches!(c, "cref" | "Cref") { l.join(",") } else { l[0].to_string() };
        format!("\\{c}{{{arg}}}")
    })
}

/// Random documents of sections, paragraphs, exercises and solutions.
fn document() -> impl Strategy<Value = String> {
    let para = prop::collection::vec(word(), 1..120).prop_map(|w| w.join(" ")).boxed();
    let item = prop_oneof![
        4 => para.clone(),
        1 => word().prop_map(|w| format!("\\section{{{w}}}")),
        1 => word().prop_map(|w| format!("\\subsection{{{w}}}")),
        1 => para.clone().prop_map(|p| format!("\\begin{{exercise}}\n{p}\n\\end{{exercise}}")),
        1 => para.clone().prop_map(|p| format!("\\begin{{solution}}\n{p}\n\\end{{solution}}")),
        1 => Just("Using $f \\splt g$ here.".to_string()),
        1 => Just("\\AIChunkBreak".to_string()),
    ];
    prop::collection::vec(item, 1..20).prop_map(|v| v.join("\n\n"))
}

fn opts(max_tokens: usize) -> ChunkOptions {
    ChunkOptions { max_tokens, min_heading_level: 1 }
}

fn id_number(c: &Chunk) -> u32 {
    c.id.rsplit('-').next().unwrap().parse().unwrap()
}

proptest! {
    #[test]
    fn conversion_is_idempotent(text in inline_text()) {
        let (once, _) = run_with(&text, "", opts(900));
        let (twice, _) = run_with(&once.markdown, "", opts(900));
        prop_assert_eq!(once.markdown, twice.markdown);
    }

    #[test]
    fn resolvable_references_never_survive(refs in prop::collection::vec(ref_command(), 1..8)) {
        let (p, diags) = run_with(&format!("See {}.", refs.join(" and ")), "", opts(900));
        for needle in ["\\ref{", "\\pageref{", "\\cref{", "\\Cref{", "\\eqref{", "\\autoref{"] {
            prop_assert!(!p.markdown.contains(needle), "{} left in {}", needle, p.markdown);
        }
        prop_assert_eq!(diags.len(), 0);
    }

    #[test]
    fn each_unknown_macro_warns_once(
        uses in prop::collection::vec(prop::sample::select(vec!["zqa", "zqb", "zqc", "zqd"]), 1..15),
        suppressed in prop::sample::subsequence(vec!["zqa", "zqb", "zqc", "zqd"], 0..=4),
    ) {
        let tex: Vec<String> = uses.iter().enumerate().map(|(i, m)| format!("Line {i} \\{m}{{x}}.\n")).collect();
        let yaml = format!("suppress_macros: [{}]\n", suppressed.join(", "));
        let (_, diags) = run_with(&tex.join("\n"), &yaml, opts(900));
        for name in ["zqa", "zqb", "zqc", "zqd"] {
            let expected = usize::from(uses.contains(&name) && !suppressed.contains(&name));
            prop_assert_eq!(diags.count_matching(&format!("unknown macro \\{name}")), expected);
        }
    }

    #[test]
    fn verbatim_is_fenced_byte_identical(lines in prop::collection::vec("[ -~]{0,40}", 1..10)) {
        prop_assume!(lines.iter().all(|l| !l.contains("\\end{verbatim}")));
        let interior = lines.join("\n");
        let tex = format!("Before.\n\n\\begin{{verbatim}}\n{interior}\n\\end{{verbatim}}\n\nAfter.");
        let (p, _) = run_with(&tex, "", opts(900));
        let fenced = p.markdown.lines().position(|l| l.starts_with("```")).unwrap();
        let body: Vec<&str> = p.markdown.lines().skip(fenced + 1).take(lines.len()).collect();
        prop_assert_eq!(body.join("\n"), interior);
    }

    #[test]
    fn chunk_invariants_hold(doc in document(), max_tokens in 30usize..600) {
        let (p, _) = run_with(&doc, SPLT_YAML, opts(max_tokens));
        let mut last: std::collections::HashMap<String, u32> = Default::default();
        let mut text_end = 0;
        for c in &p.chunks {
            let family = c.id.rsplit_once('-').unwrap().0.to_string();
            let n = id_number(c);
            prop_assert!(last.get(&family).is_none_or(|&prev| n > prev), "{} out of order", c.id);
            last.insert(family, n);
            prop_assert!(c.start_line <= c.end_line);
            prop_assert!(c.markdown.is_empty() || !c.embedding_text.is_empty());
            if c.kind == "text" {
                prop_assert!(c.start_line > text_end, "{} overlaps the previous text chunk", c.id);
                text_end = c.end_line;
            }
            let note = c.embedding_text.contains("Notation note: \\splt");
            if c.kind != "glossary" {
                prop_assert_eq!(note, c.markdown.contains("\\splt"), "note mismatch in {}", &c.id);
            }
            let teacher = c.metadata.get("visibility") == Some(&serde_json::json!("teacher_only"));
            prop_assert_eq!(teacher, c.kind == "solution");
        }
    }

    #[test]
    fn processing_is_deterministic(doc in document()) {
        let (a, _) = run_with(&doc, SPLT_YAML, opts(200));
        let (b, _) = run_with(&doc, SPLT_YAML, opts(200));
        prop_assert_eq!(chunks_to_jsonl(&a.chunks), chunks_to_jsonl(&b.chunks));
        prop_assert_eq!(a.markdown, b.markdown);
    }

    #[test]
    fn jsonl_round_trips(doc in document()) {
        let (p, _) = run_with(&doc, SPLT_YAML, opts(200));
        prop_assert_eq!(parse_jsonl(&chunks_to_jsonl(&p.chunks)).unwrap(), p.chunks);
    }

    #[test]
    fn comment_free_lines_are_untouched(line in "[^%\n]{0,60}") {
        prop_assert_eq!(strip_comment(&line, false), line);
    }

    #[test]
    fn newlabel_fields_round_trip(
        label in "[a-z]{1,6}:[a-z][a-z-]{0,9}",
        number in "[0-9]{1,2}(\\.[0-9]{1,2}){0,2}",
        page in "[0-9]{1,3}",
        title in "([A-Za-z]([A-Za-z ]{0,18}[A-Za-z])?)?",
    ) {
        let anchor = format!("section.{number}");
        let line = format!("\\newlabel{{{label}}}{{{{{number}}}{{{page}}}{{{title}}}{{{anchor}}}{{}}}}");
        let (name, entry) = parse_newlabel(&line).unwrap().unwrap();
        prop_assert_eq!(name, label);
        prop_assert_eq!(entry.reference, number);
        prop_assert_eq!(entry.page, page);
        prop_assert_eq!(entry.title, title);
        prop_assert_eq!(entry.anchor, anchor);
    }
}
