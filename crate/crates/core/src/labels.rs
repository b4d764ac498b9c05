//! Label table built from compiled `.aux` files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostics;
use crate::source::SourceLine;
use crate::tex;

/// One plain `\newlabel` entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    #[serde(rename = "ref")]
    pub reference: String,
    pub page: String,
    pub title: String,
    pub anchor: String,
}

/// Counter information from a cleveref `@cref` companion entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrefInfo {
    pub counter: String,
    pub reference: String,
    pub page: String,
}

/// A `\newlabel` whose braces do not balance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedEntry(pub String);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTable {
    pub entries: BTreeMap<String, LabelEntry>,
    pub cref: BTreeMap<String, CrefInfo>,
}

impl LabelTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&LabelEntry> {
        self.entries.get(label)
    }

    pub fn insert(&mut self, label: impl Into<String>, entry: LabelEntry) {
        self.entries.insert(label.into(), entry);
    }

    /// Counter type of `label`: the cleveref entry when present, else the
    /// prefix of the hyperref anchor (`section.4.3` gives `section`).
    pub fn counter(&self, label: &str) -> Option<String> {
        if let Some(info) = self.cref.get(label) {
            return Some(info.counter.clone());
        }
        let anchor = &self.entries.get(label)?.anchor;
        let prefix = anchor.split('.').next().unwrap_or_default();
        let prefix = prefix.trim_end_matches('*');
        (!prefix.is_empty() && prefix.bytes().all(|b| b.is_ascii_alphabetic()))
            .then(|| prefix.to_string())
    }

    /// Parses aux text in memory (no `\@input` following).
    pub fn parse_str(text: &str, diags: &mut Diagnostics) -> Self {
        let mut table = LabelTable::default();
        for line in text.lines() {
            table.absorb_line(line, "<memory>", diags);
        }
        table
    }

    fn absorb_line(&mut self, line: &str, file: &str, diags: &mut Diagnostics) {
        match parse_cref_entry(line) {
            Ok(Some((label, info))) => {
                self.cref.insert(label, info);
                return;
            }
            Ok(None) => {}
            Err(MalformedEntry(l)) => {
                diags.warn(format!("{file}: malformed cleveref entry skipped: {l}"));
                return;
            }
        }
        match parse_newlabel(line) {
            Ok(Some((label, entry))) => {
                self.entries.insert(label, entry);
            }
            Ok(None) => {}
            Err(MalformedEntry(l)) => {
                diags.warn(format!("{file}: malformed label entry skipped: {l}"));
            }
        }
    }

    /// Warns about labels whose plain and cleveref numbers disagree.
    pub fn check_consistency(&self, diags: &mut Diagnostics) {
        for (label, info) in &self.cref {
            if let Some(entry) = self.entries.get(label) {
                if entry.reference != info.reference {
                    diags.warn(format!(
                        "label {label}: number {} disagrees with cleveref number {}",
                        entry.reference, info.reference
                    ));
                }
            }
        }
    }
}

/// Splits `\newlabel{label}{...}` into its label and payload group.
fn newlabel_parts(line: &str) -> Result<Option<(&str, &str)>, MalformedEntry> {
    let t = line.trim();
    let Some(rest) = t.strip_prefix("\\newlabel") else {
        return Ok(None);
    };
    if rest.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return Ok(None);
    }
    let bad = || MalformedEntry(t.to_string());
    let g1 = tex::read_arg(rest, 0).map_err(|_| bad())?;
    let g2 = tex::read_arg(rest, g1.next).map_err(|_| bad())?;
    Ok(Some((g1.inner(rest), g2.inner(rest))))
}

/// Reads successive `{...}` groups out of `s`.
fn groups(s: &str) -> Result<Vec<&str>, tex::Unbalanced> {
    let mut out = Vec::new();
    let mut i = tex::skip_ws(s, 0);
    while i < s.len() {
        let g = tex::read_group(s, i)?;
        out.push(g.inner(s));
        i = tex::skip_ws(s, g.next);
    }
    Ok(out)
}

/// Parses a plain (non-`@cref`) `\newlabel` line.
pub fn parse_newlabel(line: &str) -> Result<Option<(String, LabelEntry)>, MalformedEntry> {
    let Some((label, payload)) = newlabel_parts(line)? else {
        return Ok(None);
    };
    if label.ends_with("@cref") {
        return Ok(None);
    }
    let fields = groups(payload).map_err(|_| MalformedEntry(line.trim().to_string()))?;
    let field = |i: usize| fields.get(i).map(|s| s.trim().to_string()).unwrap_or_default();
    let entry = LabelEntry {
        reference: field(0),
        page: field(1),
        title: field(2),
        anchor: field(3),
    };
    if entry.reference.is_empty() {
        return Err(MalformedEntry(line.trim().to_string()));
    }
    Ok(Some((label.to_string(), entry)))
}

/// Strips leading `[...]` groups, returning them and the trailing text.
fn bracketed(s: &str) -> Option<(Vec<&str>, &str)> {
    let mut words = Vec::new();
    let mut i = 0;
    while s.as_bytes().get(i) == Some(&b'[') {
        let g = tex::read_bracket(s, i).ok()?;
        words.push(g.inner(s));
        i = g.next;
    }
    Some((words, s[i..].trim()))
}

/// Parses a cleveref companion line `\newlabel{x@cref}{{[counter]...ref}{[..]page}}`.
pub fn parse_cref_entry(line: &str) -> Result<Option<(String, CrefInfo)>, MalformedEntry> {
    let Some((label, payload)) = newlabel_parts(line)? else {
        return Ok(None);
    };
    let Some(base) = label.strip_suffix("@cref") else {
        return Ok(None);
    };
    let bad = || MalformedEntry(line.trim().to_string());
    let fields = groups(payload).map_err(|_| bad())?;
    let (words, reference) = bracketed(fields.first().ok_or_else(bad)?).ok_or_else(bad)?;
    let counter = words.first().map(|w| w.trim()).unwrap_or_default();
    if counter.is_empty() {
        return Err(bad());
    }
    let page = match fields.get(1) {
        Some(f) => bracketed(f).ok_or_else(bad)?.1.to_string(),
        None => String::new(),
    };
    Ok(Some((
        base.to_string(),
        CrefInfo {
            counter: counter.to_string(),
            reference: reference.to_string(),
            page,
        },
    )))
}

/// Loads `aux_path` and every `\@input{child.aux}` it names. Later entries
/// override earlier ones. A missing file yields an empty table and a warning.
pub fn load_aux(aux_path: &Path, diags: &mut Diagnostics) -> LabelTable {
    let mut table = LabelTable::default();
    let root = aux_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut visited = BTreeSet::new();
    if !aux_path.is_file() {
        diags.warn(format!(
            "aux file {} not found; references stay unresolved",
            aux_path.display()
        ));
        return table;
    }
    load_aux_into(&mut table, aux_path, &root, &mut visited, diags);
    table.check_consistency(diags);
    table
}

fn load_aux_into(
    table: &mut LabelTable,
    path: &Path,
    root: &Path,
    visited: &mut BTreeSet<PathBuf>,
    diags: &mut Diagnostics,
) {
    let canonical = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    if !visited.insert(canonical) {
        diags.warn(format!("aux cycle at {}; skipped", path.display()));
        return;
    }
    let text = match fs::read(path) {
        Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
        Err(e) => {
            diags.warn(format!("cannot read aux file {}: {e}", path.display()));
            return;
        }
    };
    let shown = path.display().to_string();
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("\\@input") {
            match tex::read_arg(rest, 0) {
                Ok(g) => {
                    let child = root.join(g.inner(rest).trim());
                    if child.is_file() {
                        load_aux_into(table, &child, root, visited, diags);
                    } else {
                        diags.warn(format!("aux file {} not found", child.display()));
                    }
                }
                Err(_) => diags.warn(format!("{shown}: malformed \\@input skipped")),
            }
            continue;
        }
        table.absorb_line(t, &shown, diags);
    }
}

/// Singular and plural noun for one counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Noun {
    pub singular: String,
    pub plural: String,
    /// Explicit capitalized forms from `\Crefname`.
    pub cap_singular: Option<String>,
    pub cap_plural: Option<String>,
}

impl Noun {
    fn new(singular: &str, plural: &str) -> Self {
        Noun {
            singular: singular.to_string(),
            plural: plural.to_string(),
            cap_singular: None,
            cap_plural: None,
        }
    }
}

/// Counter name to human-readable nouns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounTable {
    pub entries: BTreeMap<String, Noun>,
}

const BUILTIN_NOUNS: [(&str, &str, &str); 25] = [
    ("part", "part", "parts"),
    ("chapter", "chapter", "chapters"),
    ("section", "section", "sections"),
    ("subsection", "section", "sections"),
    ("subsubsection", "section", "sections"),
    ("paragraph", "paragraph", "paragraphs"),
    ("figure", "figure", "figures"),
    ("table", "table", "tables"),
    ("equation", "equation", "equations"),
    ("page", "page", "pages"),
    ("item", "item", "items"),
    ("footnote", "footnote", "footnotes"),
    ("theorem", "theorem", "theorems"),
    ("lemma", "lemma", "lemmas"),
    ("corollary", "corollary", "corollaries"),
    ("proposition", "proposition", "propositions"),
    ("definition", "definition", "definitions"),
    ("example", "example", "examples"),
    ("exercise", "exercise", "exercises"),
    ("remark", "remark", "remarks"),
    ("proof", "proof", "proofs"),
    ("algorithm", "algorithm", "algorithms"),
    ("listing", "listing", "listings"),
    ("claim", "claim", "claims"),
    ("conjecture", "conjecture", "conjectures"),
];

impl Default for NounTable {
    fn default() -> Self {
        NounTable {
            entries: BUILTIN_NOUNS
                .iter()
                .map(|&(c, s, p)| (c.to_string(), Noun::new(s, p)))
                .collect(),
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl NounTable {
    /// Merges `\crefname{counter}{singular}{plural}` and `\Crefname`
    /// declarations found in the given lines.
    pub fn apply_declarations(&mut self, lines: &[SourceLine]) {
        let text: String = lines
            .iter()
            .filter(|l| !l.in_verbatim)
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        for (_, cmd) in tex::commands(&text) {
            let capital = match cmd.name {
                "crefname" => false,
                "Crefname" => true,
                _ => continue,
            };
            let Ok(g1) = tex::read_arg(&text, cmd.next) else { continue };
            let Ok(g2) = tex::read_arg(&text, g1.next) else { continue };
            let Ok(g3) = tex::read_arg(&text, g2.next) else { continue };
            let counter = g1.inner(&text).trim().to_string();
            let sing = g2.inner(&text).trim().replace('~', " ");
            let plur = g3.inner(&text).trim().replace('~', " ");
            let entry = self
                .entries
                .entry(counter.clone())
                .or_insert_with(|| Noun::new(&counter, &format!("{counter}s")));
            if capital {
                entry.cap_singular = Some(sing);
                entry.cap_plural = Some(plur);
            } else {
                entry.singular = sing;
                entry.plural = plur;
            }
        }
    }
}

/// Noun for `counter` in the requested form. Unknown counters fall back to
/// the counter name itself.
pub fn cref_noun(counter: &str, capitalized: bool, plural: bool, nouns: &NounTable) -> String {
    match nouns.entries.get(counter) {
        Some(noun) => {
            let explicit = if plural { &noun.cap_plural } else { &noun.cap_singular };
            let base = if plural { &noun.plural } else { &noun.singular };
            match (capitalized, explicit) {
                (true, Some(e)) => e.clone(),
                (true, None) => capitalize(base),
                (false, _) => base.clone(),
            }
        }
        None => {
            let lower = counter.to_lowercase();
            let base = if plural { format!("{lower}s") } else { lower };
            if capitalized {
                capitalize(&base)
            } else {
                base
            }
        }
    }
}
