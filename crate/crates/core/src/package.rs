//! The `ai-annotation` LaTeX package shipped with the preprocessor.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const FILE_NAME: &str = "ai-annotation.sty";

/// Defines `\AIDescription`, `\AIDeclareNotation`, `\AINote`, and
/// `\AIChunkBreak` as no-ops; the `draft` option shows them as margin notes
/// and logs them.
pub const AI_ANNOTATION_STY: &str = include_str!("../tex/ai-annotation.sty");

/// Writes the package into `dir` and returns its path.
pub fn install(dir: &Path) -> io::Result<PathBuf> {
    let path = dir.join(FILE_NAME);
    fs::write(&path, AI_ANNOTATION_STY)?;
    Ok(path)
}

/// A minimal document that uses all four macros.
pub fn sample_document(draft: bool) -> String {
    let option = if draft { "[draft]" } else { "" };
    format!(
        r"\documentclass{{article}}
\usepackage{option}{{ai-annotation}}
\AIDeclareNotation{{\splt}}{{split combinator}}{{Pairs two functions.}}
\begin{{document}}
Some text.\AINote{{Explain pairs first.}}
\AIChunkBreak
\begin{{figure}}
\centering A box.
\caption{{A box.}}
\AIDescription{{A single box with a label.}}
\end{{figure}}
More text.
\end{{document}}
"
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PackageCheck {
    Passed,
    /// No LaTeX toolchain is available.
    Skipped(String),
    Failed(String),
}

/// Compiles the sample document in normal and draft mode inside `work_dir`.
pub fn verify_package(work_dir: &Path) -> PackageCheck {
    if Command::new("pdflatex").arg("--version").output().is_err() {
        return PackageCheck::Skipped("pdflatex not found; package check skipped".into());
    }
    if let Err(e) = install(work_dir) {
        return PackageCheck::Failed(format!("cannot install {FILE_NAME}: {e}"));
    }
    for (name, draft) in [("normal", false), ("draft", true)] {
        let tex = work_dir.join(format!("{name}.tex"));
        if let Err(e) = fs::write(&tex, sample_document(draft)) {
            return PackageCheck::Failed(format!("cannot write {}: {e}", tex.display()));
        }
        let status = Command::new("pdflatex")
            .args(["-interaction=nonstopmode", "-halt-on-error"])
            .arg(format!("{name}.tex"))
            .current_dir(work_dir)
            .output();
        match status {
            Ok(out) if out.status.success() => {}
            Ok(out) => {
                return PackageCheck::Failed(format!(
                    "{name} mode failed to compile:\n{}",
                    String::from_utf8_lossy(&out.stdout)
                ))
            }
            Err(e) => return PackageCheck::Failed(format!("cannot run pdflatex: {e}")),
        }
        let log = fs::read_to_string(work_dir.join(format!("{name}.log"))).unwrap_or_default();
        let logged = log.contains("Package ai-annotation Info");
        if logged != draft {
            return PackageCheck::Failed(format!("{name} mode: unexpected annotation log entries"));
        }
    }
    PackageCheck::Passed
}
