use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use latex_rag::pipeline::{self, Config};
use latex_rag::{ChunkOptions, Diagnostics};

/// Convert a LaTeX project into Markdown, a label table, and JSONL chunks
/// for retrieval-augmented generation.
#[derive(Debug, Parser)]
#[command(name = "latex-rag-preprocessor", version)]
struct Cli {
    /// Main .tex file.
    tex: PathBuf,

    /// Compiled .aux file [default: <tex stem>.aux]
    #[arg(long)]
    aux: Option<PathBuf>,

    /// Annotation file [default: <tex stem>.rag.yaml]
    #[arg(long)]
    yaml: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "rag_out")]
    out: PathBuf,

    /// Approximate token limit per text chunk (characters / 4).
    #[arg(long, default_value_t = 900, value_parser = clap::value_parser!(u64).range(1..))]
    max_tokens: u64,

    /// Headings shallower than this level (1 = chapter, 2 = section, ...)
    /// do not start a new chunk; they still appear in the heading path.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=6))]
    min_heading_level: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = Config {
        tex_path: cli.tex,
        aux_path: cli.aux,
        yaml_path: cli.yaml,
        out_dir: cli.out,
        chunk: ChunkOptions {
            max_tokens: cli.max_tokens as usize,
            min_heading_level: cli.min_heading_level,
        },
    };
    let mut diags = Diagnostics::new();
    let result = pipeline::run(&config, &mut diags);
    for w in diags.warnings() {
        eprintln!("{w}");
    }
    match result {
        Ok((summary, outputs)) => {
            println!("{summary}; wrote {}", outputs.chunks_path.parent().unwrap_or(&config.out_dir).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
