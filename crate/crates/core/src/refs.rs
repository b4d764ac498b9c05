//! Resolution of `\ref`, `\pageref`, `\eqref`, and the cleveref family.

use std::cmp::Ordering;

use crate::labels::{cref_noun, LabelTable, NounTable};
use crate::tex;

/// An unresolved reference found while resolving a string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefWarning {
    /// Byte offset of the command in the input.
    pub offset: usize,
    pub message: String,
}

/// Result of looking at one reference command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefOutcome {
    Resolved { text: String, next: usize },
    /// The command is kept as written; `missing` names the unknown labels.
    Unresolved { next: usize, missing: Vec<String> },
}

pub const REF_COMMANDS: [&str; 9] = [
    "ref", "eqref", "pageref", "cref", "Cref", "crefrange", "Crefrange", "autoref", "nameref",
];

pub fn is_ref_command(name: &str) -> bool {
    REF_COMMANDS.contains(&name)
}

/// Resolves the reference command starting at `at`, or returns `None` when
/// `at` does not start one (or its arguments are malformed).
pub fn resolve_command(s: &str, at: usize, labels: &LabelTable, nouns: &NounTable) -> Option<RefOutcome> {
    let cmd = tex::command_at(s, at)?;
    if !is_ref_command(cmd.name) {
        return None;
    }
    let mut j = cmd.next;
    if s.as_bytes().get(j) == Some(&b'*') {
        j += 1;
    }
    let g1 = tex::read_arg(s, j).ok()?;
    let arg1 = g1.inner(s).trim();
    let capital = cmd.name.starts_with('C');
    let unresolved = |next: usize, missing: Vec<String>| Some(RefOutcome::Unresolved { next, missing });
    match cmd.name {
        "crefrange" | "Crefrange" => {
            let g2 = tex::read_arg(s, g1.next).ok()?;
            let arg2 = g2.inner(s).trim();
            match format_range(arg1, arg2, capital, labels, nouns) {
                Ok(text) => Some(RefOutcome::Resolved { text, next: g2.next }),
                Err(missing) => unresolved(g2.next, missing),
            }
        }
        "cref" | "Cref" => {
            let list: Vec<&str> = arg1.split(',').map(str::trim).filter(|l| !l.is_empty()).collect();
            match format_list(&list, capital, labels, nouns) {
                Ok(text) => Some(RefOutcome::Resolved { text, next: g1.next }),
                Err(missing) => unresolved(g1.next, missing),
            }
        }
        name => {
            let text = match name {
                "ref" => number_of(arg1, labels),
                "eqref" => number_of(arg1, labels).map(|n| format!("({n})")),
                "pageref" => page_of(arg1, labels),
                "nameref" => labels.get(arg1).map(|e| e.title.clone()).filter(|t| !t.is_empty()),
                "autoref" => labels.counter(arg1).and_then(|c| {
                    number_of(arg1, labels).map(|n| format!("{} {n}", cref_noun(&c, true, false, nouns)))
                }),
                _ => None,
            };
            match text {
                Some(text) => Some(RefOutcome::Resolved { text, next: g1.next }),
                None => unresolved(g1.next, vec![arg1.to_string()]),
            }
        }
    }
}

fn number_of(label: &str, labels: &LabelTable) -> Option<String> {
    labels
        .get(label)
        .map(|e| e.reference.clone())
        .or_else(|| labels.cref.get(label).map(|c| c.reference.clone()))
        .filter(|r| !r.is_empty())
}

fn page_of(label: &str, labels: &LabelTable) -> Option<String> {
    labels
        .get(label)
        .map(|e| e.page.clone())
        .or_else(|| labels.cref.get(label).map(|c| c.page.clone()))
        .filter(|p| !p.is_empty())
}

/// Component-wise order for reference numbers: numeric parts compare as
/// numbers, anything else as text after all numbers.
pub fn compare_refs(a: &str, b: &str) -> Ordering {
    fn key(r: &str) -> Vec<(u8, u64, &str)> {
        r.split('.')
            .map(|p| match p.parse::<u64>() {
                Ok(n) => (0, n, ""),
                Err(_) => (1, 0, p),
            })
            .collect()
    }
    key(a).cmp(&key(b)).then_with(|| a.cmp(b))
}

/// "3", "3 and 5", "3, 5 and 7".
fn join_numbers(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Formats a cleveref label list: grouped by counter in order of first
/// appearance, sorted within each group, groups joined with "and". Only the
/// first noun is capitalized.
pub fn format_list(list: &[&str], capital: bool, labels: &LabelTable, nouns: &NounTable) -> Result<String, Vec<String>> {
    let mut missing = Vec::new();
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for &label in list {
        let (Some(counter), Some(number)) = (labels.counter(label), number_of(label, labels)) else {
            missing.push(label.to_string());
            continue;
        };
        match groups.iter_mut().find(|(c, _)| *c == counter) {
            Some((_, nums)) => nums.push(number),
            None => groups.push((counter, vec![number])),
        }
    }
    if !missing.is_empty() || groups.is_empty() {
        if missing.is_empty() {
            missing.push(String::new());
        }
        return Err(missing);
    }
    let parts: Vec<String> = groups
        .into_iter()
        .enumerate()
        .map(|(i, (counter, mut nums))| {
            nums.sort_by(|a, b| compare_refs(a, b));
            nums.dedup();
            let noun = cref_noun(&counter, capital && i == 0, nums.len() > 1, nouns);
            format!("{noun} {}", join_numbers(&nums))
        })
        .collect();
    Ok(parts.join(" and "))
}

/// Formats `\crefrange{a}{b}` as "sections 3–7".
pub fn format_range(a: &str, b: &str, capital: bool, labels: &LabelTable, nouns: &NounTable) -> Result<String, Vec<String>> {
    let first = labels.counter(a).zip(number_of(a, labels));
    let last = number_of(b, labels);
    match (first, last) {
        (Some((counter, from)), Some(to)) => {
            Ok(format!("{} {from}\u{2013}{to}", cref_noun(&counter, capital, true, nouns)))
        }
        (first, last) => {
            let mut missing = Vec::new();
            if first.is_none() {
                missing.push(a.to_string());
            }
            if last.is_none() {
                missing.push(b.to_string());
            }
            Err(missing)
        }
    }
}

/// Replaces every resolvable reference command in `text`. Unresolved
/// commands stay as written and produce a warning.
pub fn resolve_references(text: &str, labels: &LabelTable, nouns: &NounTable) -> (String, Vec<RefWarning>) {
    let mut out = String::with_capacity(text.len());
    let mut warnings = Vec::new();
    let mut cursor = 0;
    for (at, cmd) in tex::commands(text) {
        if at < cursor || !is_ref_command(cmd.name) {
            continue;
        }
        match resolve_command(text, at, labels, nouns) {
            Some(RefOutcome::Resolved { text: t, next }) => {
                out.push_str(&text[cursor..at]);
                out.push_str(&t);
                cursor = next;
            }
            Some(RefOutcome::Unresolved { next, missing }) => {
                warnings.push(RefWarning {
                    offset: at,
                    message: unresolved_message(&text[at..next], &missing),
                });
                out.push_str(&text[cursor..next]);
                cursor = next;
            }
            None => {}
        }
    }
    out.push_str(&text[cursor..]);
    (out, warnings)
}

pub fn unresolved_message(command: &str, missing: &[String]) -> String {
    let names: Vec<&str> = missing.iter().map(String::as_str).filter(|m| !m.is_empty()).collect();
    if names.is_empty() {
        format!("unresolved reference {command}")
    } else {
        format!("unresolved reference {command} (unknown label {})", names.join(", "))
    }
}
