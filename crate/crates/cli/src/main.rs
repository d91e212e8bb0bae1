use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lexiforge_core::{
    align_three_way, detect_ambiguities, devanagari_to_cls, parse_alignment_dump, parse_cmu_dict,
    parse_translit_tsv, select_words, write_lexicon, AlignedWord, ApplyOptions, CoverageReport, EquivalenceSet,
    Lexicon, ParseMode, PhoneSet, PronEntry, RuleEngine, RuleSet,
};
use lexiforge_service::{AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "lexiforge", version, about = "Derive a non-native English lexicon from a CMU-style dictionary")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Phone set config; the built-in one is used when absent.
    #[arg(long, global = true, env = "LEXIFORGE_CONFIG")]
    phoneset: Option<PathBuf>,
    /// Fail on the first malformed input line instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for batch work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct DictArgs {
    /// CMU-format pronunciation dictionary.
    #[arg(long)]
    dict: PathBuf,
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// Rules file; the shipped defaults are used when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Transform every pronunciation variant, not only the first.
    #[arg(long)]
    all_variants: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Tsv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Align letters, CMU phones and transliteration phones; writes an alignment dump.
    Align {
        #[command(flatten)]
        dict: DictArgs,
        /// `WORD <TAB> devanagari` transliterations.
        #[arg(long)]
        translit: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply rules and write the transformed lexicon plus `<out>.matches.tsv`.
    Apply {
        #[command(flatten)]
        dict: DictArgs,
        #[command(flatten)]
        rules: RuleArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report how many words each rule corrects.
    Stats {
        #[command(flatten)]
        dict: DictArgs,
        #[command(flatten)]
        rules: RuleArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Ambiguity clusters as JSON lines, from a dump or from dictionary plus transliterations.
    Clusters {
        /// Alignment dump written by `align`.
        #[arg(long, conflicts_with_all = ["dict", "translit"])]
        alignments: Option<PathBuf>,
        #[arg(long, requires = "translit")]
        dict: Option<PathBuf>,
        #[arg(long, requires = "dict")]
        translit: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dictionary words among the top entries of a frequency list.
    Select {
        #[command(flatten)]
        dict: DictArgs,
        /// One word per line, most frequent first.
        #[arg(long)]
        freq: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        top_k: usize,
        /// Words to leave out, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the workbench API on 127.0.0.1.
    Serve {
        #[command(flatten)]
        dict: DictArgs,
        /// Rules file, rewritten on every accepted change.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        alignments: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn mode(global: &Global) -> ParseMode {
    if global.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_phones(global: &Global) -> Result<PhoneSet> {
    match &global.phoneset {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PhoneSet::from_config(&text).with_context(|| format!("loading phone set {}", p.display()))
        }
        None => Ok(PhoneSet::builtin().clone()),
    }
}

fn load_dict(path: &Path, phones: &PhoneSet, global: &Global) -> Result<Lexicon> {
    let parsed = parse_cmu_dict(open(path)?, phones, mode(global)).with_context(|| format!("parsing {}", path.display()))?;
    for d in parsed.diagnostics.iter().take(5) {
        tracing::warn!(line = d.line, "{}", d.message);
    }
    eprintln!(
        "{}: {} words, {} pronunciations, {} lines skipped",
        path.display(),
        parsed.lexicon.len(),
        parsed.lexicon.variant_count(),
        parsed.diagnostics.len()
    );
    Ok(parsed.lexicon)
}

fn load_rules(path: Option<&Path>, phones: &PhoneSet) -> Result<RuleSet> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RuleSet::parse(&text, phones).with_context(|| format!("parsing rules {}", p.display()))
        }
        None => Ok(RuleSet::parse(RuleSet::default_text(), phones)?),
    }
}

fn apply_options(rules: &RuleArgs, global: &Global) -> ApplyOptions {
    ApplyOptions {
        all_variants: rules.all_variants,
        jobs: global.jobs,
    }
}

fn build_alignments(lexicon: &Lexicon, translit: &Path, equiv: &EquivalenceSet) -> Result<Vec<AlignedWord>> {
    let records = parse_translit_tsv(open(translit)?).with_context(|| format!("parsing {}", translit.display()))?;
    let (mut missing, mut failed) = (0, 0);
    let mut out = Vec::new();
    for rec in &records {
        let Some(cmu) = lexicon.primary(&rec.word) else {
            missing += 1;
            continue;
        };
        let aligned = devanagari_to_cls(&rec.devanagari)
            .and_then(|cls| PronEntry::new(rec.word.clone(), cls))
            .and_then(|cls| align_three_way(&rec.word, cmu, &cls, equiv));
        match aligned {
            Ok(a) => out.push(a),
            Err(e) => {
                failed += 1;
                tracing::warn!(word = %rec.word, "{e}");
            }
        }
    }
    eprintln!(
        "{} transliterations: {} aligned, {} not in dictionary, {} failed",
        records.len(),
        out.len(),
        missing,
        failed
    );
    Ok(out)
}

fn print_report(report: &CoverageReport, format: Format) -> Result<()> {
    let mut out = output(None)?;
    match format {
        Format::Table => out.write_all(report.to_table().as_bytes())?,
        Format::Tsv => report.write_tsv(&mut out)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string(report)?)?,
    }
    out.flush()?;
    Ok(())
}

fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let mut words = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        if let Some(w) = line.split_whitespace().next() {
            words.push(w.to_string());
        }
    }
    Ok(words)
}

fn run(cli: Cli) -> Result<()> {
    let global = &cli.global;
    let phones = load_phones(global)?;
    let equiv = EquivalenceSet::for_phoneset(&phones);
    match cli.command {
        Command::Align { dict, translit, out } => {
            let lexicon = load_dict(&dict.dict, &phones, global)?;
            let aligned = build_alignments(&lexicon, &translit, &equiv)?;
            let mut w = output(out.as_deref())?;
            for a in &aligned {
                writeln!(w, "{}", a.to_dump_line())?;
            }
            w.flush()?;
        }
        Command::Apply { dict, rules, out } => {
            let lexicon = load_dict(&dict.dict, &phones, global)?;
            let set = load_rules(rules.rules.as_deref(), &phones)?;
            let result = RuleEngine::new(&phones, &equiv, &set).apply(&lexicon, apply_options(&rules, global))?;
            write_lexicon(&result.lexicon, output(Some(&out))?)?;
            let mut log_path = out.into_os_string();
            log_path.push(".matches.tsv");
            result.write_match_log(output(Some(Path::new(&log_path)))?)?;
            for w in result.warnings.iter().take(5) {
                tracing::warn!(word = %w.word, "{}", w.message);
            }
            eprintln!(
                "{} words written, {} changed by rules, {} matches, {} warnings",
                result.lexicon.len(),
                result.changed_words().len(),
                result.matches.len(),
                result.warnings.len()
            );
        }
        Command::Stats { dict, rules, format } => {
            let lexicon = load_dict(&dict.dict, &phones, global)?;
            let set = load_rules(rules.rules.as_deref(), &phones)?;
            let result = RuleEngine::new(&phones, &equiv, &set).apply(&lexicon, apply_options(&rules, global))?;
            let report = CoverageReport::from_output(&result, &set, lexicon.len());
            print_report(&report, format)?;
        }
        Command::Clusters {
            alignments,
            dict,
            translit,
            out,
        } => {
            let aligned = match (alignments, dict, translit) {
                (Some(a), _, _) => {
                    let text = fs::read_to_string(&a).with_context(|| format!("reading {}", a.display()))?;
                    parse_alignment_dump(&text, &phones).with_context(|| format!("parsing {}", a.display()))?
                }
                (None, Some(d), Some(t)) => build_alignments(&load_dict(&d, &phones, global)?, &t, &equiv)?,
                _ => bail!("give --alignments, or --dict with --translit"),
            };
            let clusters = detect_ambiguities(&aligned);
            let mut w = output(out.as_deref())?;
            for c in &clusters {
                writeln!(w, "{}", serde_json::to_string(c)?)?;
            }
            w.flush()?;
            eprintln!("{} clusters from {} alignments", clusters.len(), aligned.len());
        }
        Command::Select {
            dict,
            freq,
            top_k,
            exclude,
            out,
        } => {
            let lexicon = load_dict(&dict.dict, &phones, global)?;
            let freq = read_word_list(&freq)?;
            if freq.is_empty() {
                bail!("frequency list is empty");
            }
            let exclude: HashSet<String> = match exclude {
                Some(p) => read_word_list(&p)?.into_iter().collect(),
                None => HashSet::new(),
            };
            let words = select_words(&lexicon, &freq, top_k, &exclude);
            let mut w = output(out.as_deref())?;
            for word in &words {
                writeln!(w, "{word}")?;
            }
            w.flush()?;
            eprintln!("{} words selected", words.len());
        }
        Command::Serve {
            dict,
            rules,
            alignments,
            port,
        } => {
            let lexicon = load_dict(&dict.dict, &phones, global)?;
            let set = load_rules(rules.as_deref(), &phones)?;
            let mut config = ServiceConfig::new(phones.clone(), lexicon).with_options(ApplyOptions {
                all_variants: false,
                jobs: global.jobs,
            });
            if let Some(a) = alignments {
                let text = fs::read_to_string(&a).with_context(|| format!("reading {}", a.display()))?;
                config = config.with_alignments(parse_alignment_dump(&text, &phones)?);
            }
            if let Some(r) = rules {
                config = config.with_rules_path(r);
            }
            let state = AppState::new(config, set)?;
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(lexiforge_service::serve(state, port))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn,lexiforge_service=info".into()),
        )
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
