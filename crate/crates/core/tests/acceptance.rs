//! One line per acceptance criterion. Exits non-zero if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use latex_rag::annotations::{parse_yaml_annotations, YamlAnnotations};
use latex_rag::chunker::{estimate_tokens, Chunk, ChunkOptions};
use latex_rag::emit::{labels_to_json, parse_jsonl};
use latex_rag::labels::LabelTable;
use latex_rag::pipeline::{self, Config};
use latex_rag::source::SourceDocument;
use latex_rag::Diagnostics;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestCaseError, TestRunner};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sample/main.tex")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn process(tex: &str, aux: &str, yaml: &str) -> Result<(pipeline::Processed, Diagnostics), String> {
    let mut diags = Diagnostics::new();
    let labels = LabelTable::parse_str(aux, &mut diags);
    let yaml = if yaml.is_empty() {
        YamlAnnotations::default()
    } else {
        parse_yaml_annotations(yaml, Path::new("inline.rag.yaml")).map_err(|e| e.to_string())?
    };
    let doc = SourceDocument::from_text("main.tex", tex);
    let out = pipeline::process(&doc, labels, yaml, ChunkOptions::default(), &mut diags).map_err(|e| e.to_string())?;
    Ok((out, diags))
}

fn run_fixture(out_dir: &Path) -> Result<(Vec<Chunk>, Duration), String> {
    let mut config = Config::new(fixture());
    config.out_dir = out_dir.to_path_buf();
    let start = Instant::now();
    let mut diags = Diagnostics::new();
    let (_, outputs) = pipeline::run(&config, &mut diags).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let text = fs::read_to_string(&outputs.chunks_path).map_err(|e| e.to_string())?;
    let chunks = parse_jsonl(&text).map_err(|e| e.to_string())?;
    Ok((chunks, elapsed))
}

const WHILE_AUX: &str = r"\newlabel{sec:while-loops}{{4.3}{71}{While-loops}{section.4.3}{}}";

fn golden_label_table() -> Check {
    let table = LabelTable::parse_str(WHILE_AUX, &mut Diagnostics::new());
    let got: serde_json::Value = serde_json::from_str(&labels_to_json(&table)).map_err(|e| e.to_string())?;
    let want = serde_json::json!({
        "sec:while-loops": {"ref": "4.3", "page": "71", "title": "While-loops", "anchor": "section.4.3"}
    });
    ensure(got == want, || format!("got {got}"))
}

fn reference_resolution() -> Check {
    let cases = [
        (r"See Section~\ref{sec:while-loops} on page~\pageref{sec:while-loops}.", "See Section 4.3 on page 71."),
        (r"\cref{sec:while-loops}", "section 4.3"),
        (r"\Cref{sec:while-loops}", "Section 4.3"),
    ];
    for (tex, want) in cases {
        let (out, _) = process(tex, WHILE_AUX, "")?;
        ensure(out.markdown == want, || format!("{tex:?} gave {:?}", out.markdown))?;
    }
    Ok(())
}

const REF_COMMANDS: [&str; 6] = ["\\ref{", "\\pageref{", "\\cref{", "\\Cref{", "\\eqref{", "\\crefrange{"];

fn end_to_end_fixture() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (chunks, elapsed) = run_fixture(dir.path())?;
    let count = |kind: &str| chunks.iter().filter(|c| c.kind == kind).count();
    ensure(count("text") >= 4, || format!("{} text chunks", count("text")))?;
    ensure(count("figure") == 1, || format!("{} figure chunks", count("figure")))?;
    let glossary: Vec<&Chunk> = chunks.iter().filter(|c| c.kind == "glossary").collect();
    ensure(glossary.len() == 1 && glossary[0].id == "glossary-00001", || format!("glossary chunks: {}", glossary.len()))?;
    let solution = chunks.iter().find(|c| c.kind == "solution").ok_or("no solution chunk")?;
    ensure(
        solution.metadata.get("visibility") == Some(&serde_json::json!("teacher_only")),
        || format!("solution metadata {:?}", solution.metadata),
    )?;
    ensure(chunks.iter().any(|c| c.kind == "exercise"), || "no exercise chunk".into())?;
    for c in &chunks {
        if let Some(cmd) = REF_COMMANDS.iter().find(|r| c.markdown.contains(*r)) {
            return Err(format!("{} still contains {cmd}", c.id));
        }
    }
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_fixture(a.path())?;
    run_fixture(b.path())?;
    for name in ["chunks.jsonl", "labels.json", "main.rag.md"] {
        let x = fs::read(a.path().join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.path().join(name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(())
}

/// Random documents: sections holding paragraphs of random length.
fn document_strategy() -> impl Strategy<Value = (Vec<Vec<String>>, usize)> {
    let word = "[a-z]{1,12}";
    let paragraph = prop::collection::vec(word, 1..700).prop_map(|w| w.join(" "));
    let section = prop::collection::vec(paragraph, 1..6);
    (prop::collection::vec(section, 1..5), 20usize..900)
}

fn budget_property() -> Check {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 100,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    runner
        .run(&document_strategy(), |(sections, max_tokens)| {
            let mut tex = String::new();
            let mut paragraphs = Vec::new();
            for (k, paras) in sections.iter().enumerate() {
                tex.push_str(&format!("\\section{{Part {k}}}\n\n"));
                for p in paras {
                    // wrap each paragraph over several source lines
                    let words: Vec<&str> = p.split(' ').collect();
                    for line in words.chunks(9) {
                        tex.push_str(&line.join(" "));
                        tex.push('\n');
                    }
                    tex.push('\n');
                    paragraphs.push(p.clone());
                }
            }
            let opts = ChunkOptions {
                max_tokens,
                min_heading_level: 1,
            };
            let mut diags = Diagnostics::new();
            let out = pipeline::process_text("main.tex", &tex, opts, &mut diags).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut seen = Vec::new();
            for c in out.chunks.iter().filter(|c| c.kind == "text") {
                let body: Vec<&str> = c.markdown.split("\n\n").filter(|b| !b.starts_with('#')).collect();
                prop_assert!(
                    estimate_tokens(&c.markdown) <= max_tokens || body.len() == 1,
                    "{} has {} tokens and {} paragraphs",
                    c.id,
                    estimate_tokens(&c.markdown),
                    body.len()
                );
                seen.extend(body.into_iter().map(str::to_string));
            }
            prop_assert_eq!(&seen, &paragraphs);
            // every non-blank source line falls inside some text chunk
            for (i, line) in tex.lines().enumerate() {
                let n = i + 1;
                if !line.trim().is_empty() {
                    prop_assert!(out.chunks.iter().any(|c| c.start_line <= n && n <= c.end_line), "line {} lost", n);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn yaml_precedence() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (chunks, _) = run_fixture(dir.path())?;
    let yaml_meaning = "Combines two functions with the same input into a pair-valued function.";
    let source_meaning = "Written with a triangle between two function names.";
    let glossary = chunks.iter().find(|c| c.kind == "glossary").ok_or("no glossary")?;
    ensure(glossary.markdown.contains(yaml_meaning), || "glossary lacks the YAML meaning".into())?;
    let expected_note = format!(
        "Notation note: \\splt means \"split combinator\". {yaml_meaning} Also known as: split, triangle operator."
    );
    let noted: Vec<&Chunk> = chunks.iter().filter(|c| c.embedding_text.contains("Notation note:")).collect();
    ensure(!noted.is_empty(), || "no notation notes".into())?;
    for c in noted {
        ensure(c.embedding_text.contains(&expected_note), || format!("{} note differs", c.id))?;
    }
    for c in &chunks {
        ensure(!c.embedding_text.contains(source_meaning) && !c.markdown.contains(source_meaning), || {
            format!("{} shows the in-source meaning", c.id)
        })?;
    }
    Ok(())
}

fn suppression() -> Check {
    let tex = r"\AIDeclareNotation{\url}{web address}{A location on the web.}
\AIDeclareNotation{\splt}{split combinator}{Pairs two functions.}
As shown by \cite{knuth} and \cite{lamport}, see \url{https://a.example} or \url{https://b.example}. Also $f \splt g$.";
    let (out, diags) = process(tex, "", "suppress_macros: [cite, url]\n")?;
    let mentions = diags.warnings().iter().filter(|w| w.message.contains("\\cite") || w.message.contains("\\url")).count();
    ensure(mentions == 0, || format!("{mentions} warnings for suppressed macros"))?;
    let glossary = out.chunks.iter().find(|c| c.kind == "glossary").ok_or("no glossary")?;
    ensure(!glossary.markdown.contains("\\url") && !glossary.markdown.contains("\\cite"), || "glossary lists a suppressed macro".into())?;
    ensure(glossary.markdown.contains("## \\splt"), || "glossary lost \\splt".into())?;

    let plain = r"As shown by \cite{knuth} and \cite{lamport}, see \url{https://a.example} or \url{https://b.example}.";
    let (_, diags) = process(plain, "", "")?;
    for name in ["cite", "url"] {
        let n = diags.count_matching(&format!("unknown macro \\{name}"));
        ensure(n == 1, || format!("{n} warnings for \\{name}"))?;
    }
    Ok(())
}

/// Independent rendering of a cleveref list: group by counter in order of
/// first appearance, sort numerically, singular for one label, "A, B and C".
fn cref_oracle(items: &[(&str, &str)], capital: bool) -> String {
    let mut groups: Vec<(&str, Vec<&str>)> = Vec::new();
    for &(counter, number) in items {
        match groups.iter().position(|(c, _)| *c == counter) {
            Some(k) => groups[k].1.push(number),
            None => groups.push((counter, vec![number])),
        }
    }
    let mut out = Vec::new();
    for (k, (counter, mut nums)) in groups.into_iter().enumerate() {
        nums.sort_by_key(|n| n.split('.').map(|p| p.parse::<u32>().unwrap()).collect::<Vec<_>>());
        let mut noun = if nums.len() == 1 { counter.to_string() } else { format!("{counter}s") };
        if capital && k == 0 {
            noun = noun[..1].to_uppercase() + &noun[1..];
        }
        let list = match nums.len() {
            1 => nums[0].to_string(),
            n => format!("{} and {}", nums[..n - 1].join(", "), nums[n - 1]),
        };
        out.push(format!("{noun} {list}"));
    }
    out.join(" and ")
}

fn comma_list_cref() -> Check {
    let aux = r"\newlabel{fig:a}{{5}{20}{}{figure.5}{}}
\newlabel{fig:a@cref}{{[figure][5][]5}{[1][20][]20}}
\newlabel{fig:b}{{3}{18}{}{figure.3}{}}
\newlabel{fig:b@cref}{{[figure][3][]3}{[1][18][]18}}
\newlabel{fig:c}{{7}{25}{}{figure.7}{}}
\newlabel{fig:c@cref}{{[figure][7][]7}{[1][25][]25}}
\newlabel{sec:c}{{2}{9}{C}{section.2}{}}
\newlabel{sec:c@cref}{{[section][2][]2}{[1][9][]9}}";
    let (out, _) = process(r"\Cref{fig:c,fig:a,fig:b}", aux, "")?;
    let want = cref_oracle(&[("figure", "7"), ("figure", "5"), ("figure", "3")], true);
    ensure(want == "Figures 3, 5 and 7", || format!("oracle gave {want}"))?;
    ensure(out.markdown == want, || format!("got {:?}", out.markdown))?;
    let (out, _) = process(r"\cref{fig:a,fig:b,sec:c}", aux, "")?;
    let want = cref_oracle(&[("figure", "5"), ("figure", "3"), ("section", "2")], false);
    ensure(out.markdown == want, || format!("got {:?}, oracle {want:?}", out.markdown))
}

fn main() -> ExitCode {
    let checks: [Criterion; 8] = [
        ("golden label table", golden_label_table),
        ("reference resolution", reference_resolution),
        ("end-to-end fixture", end_to_end_fixture),
        ("determinism", determinism),
        ("budget property (100 random documents)", budget_property),
        ("YAML precedence", yaml_precedence),
        ("suppression", suppression),
        ("comma-list cref", comma_list_cref),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
