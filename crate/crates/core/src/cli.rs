//! Command-line driver.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::encoder::{load_encoder, save_encoder};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, run_ablations, run_experiment, split_interactions, standard_arms, AblationRow,
    MetricsReport,
};
use crate::finetune::{init_target_embeddings, train_mf, EmbeddingTable, SourceDomain, TransferMode};
use crate::io::config::{load_domains, LoadedDomains, PipelineConfig};
use crate::io::edges::save_edge_list;
use crate::pretrain::{run_pretrain_with_checkpoints, write_loss_trace};

#[derive(Debug, Parser)]
#[command(name = "xdrec", version, about = "Cross-domain recommendation with pre-trained graph encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse both review files, apply the k-core filter and dump the graphs.
    Ingest(Common),
    /// Generate a synthetic source/target pair and dump the graphs.
    Synth(Common),
    /// Pre-train the encoder on the source graph.
    Pretrain(Common),
    /// Build the initial target embedding table for a transfer mode.
    InitEmb {
        #[command(flatten)]
        common: Common,
        /// Encoder checkpoint (default: <out>/encoder.bin).
        #[arg(long)]
        encoder: Option<PathBuf>,
    },
    /// Fine-tune an initial table on the target training split.
    Finetune {
        #[command(flatten)]
        common: Common,
        /// Initial table (default: <out>/init-<mode>.emb).
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Evaluate a saved table on the target test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Scoring table (default: <out>/embeddings.emb).
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Run every ablation arm for each configured seed.
    Ablate(Common),
    /// Pre-train, transfer, fine-tune and evaluate in one go.
    Pipeline(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<TransferMode>,
    /// Ego-network radius.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    lgcn_layers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.set_seed(s);
            cfg.seeds = vec![s];
        }
        if let Some(m) = self.mode {
            cfg.experiment.transfer.mode = m;
        }
        if let Some(r) = self.r {
            cfg.experiment.sampler.r = r;
        }
        if let Some(l) = self.lgcn_layers {
            cfg.experiment.finetune.lgcn_layers = l;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out_dir)?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let rendered = e.render().to_string();
            if informational {
                let _ = write!(out, "{rendered}");
                return 0;
            }
            let _ = write!(err, "{rendered}");
            return 1;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn write_metrics(report: &MetricsReport, dir: &Path) -> Result<PathBuf> {
    std::fs::write(dir.join("metrics.txt"), report.to_text())?;
    let path = dir.join("metrics.json");
    let mut json = serde_json::to_string_pretty(&report.to_json()).expect("serialisable");
    json.push('\n');
    std::fs::write(&path, json)?;
    Ok(path)
}

fn dump_domains(d: &LoadedDomains, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let src = dir.join("source.tsv");
    let tgt = dir.join("target.tsv");
    save_edge_list(&d.source.graph, &d.source.ids, &src)?;
    save_edge_list(&d.target.graph, &d.target.ids, &tgt)?;
    for (name, dom) in [("source", &d.source), ("target", &d.target)] {
        writeln!(
            out,
            "{name}: {} users, {} items, {} edges ({} rows read, {} skipped)",
            dom.graph.num_users(),
            dom.graph.num_items(),
            dom.graph.edge_count(),
            dom.pairs_read,
            dom.skipped
        )?;
    }
    writeln!(out, "common users: {}", d.alignment.len())?;
    writeln!(out, "{}", src.display())?;
    writeln!(out, "{}", tgt.display())?;
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Ingest(c) | Command::Synth(c) => {
            let cfg = c.load()?;
            let d = load_domains(&cfg.data)?;
            dump_domains(&d, &cfg.out_dir, out)
        }
        Command::Pretrain(c) => {
            let cfg = c.load()?;
            let d = load_domains(&cfg.data)?;
            let exp = cfg.experiment.resolved();
            let res = run_pretrain_with_checkpoints(&d.source.graph, &exp.pretrain, Some(&cfg.out_dir))?;
            let enc = cfg.out_dir.join("encoder.bin");
            save_encoder(&res.encoder, &enc)?;
            let trace = std::fs::File::create(cfg.out_dir.join("pretrain-loss.tsv"))?;
            write_loss_trace(&res.losses, std::io::BufWriter::new(trace))?;
            writeln!(out, "{}", enc.display())?;
            Ok(())
        }
        Command::InitEmb { common, encoder } => {
            let cfg = common.load()?;
            let d = load_domains(&cfg.data)?;
            let exp = cfg.experiment.resolved();
            let enc_path = encoder.unwrap_or_else(|| cfg.out_dir.join("encoder.bin"));
            let enc = load_encoder(&enc_path)?.query;
            let src = SourceDomain { graph: &d.source.graph, alignment: &d.alignment };
            let table = init_target_embeddings(&enc, &d.target.graph, Some(src), &exp.transfer)?;
            let path = cfg.out_dir.join(format!("init-{}.emb", exp.transfer.mode));
            table.save(&path)?;
            writeln!(out, "{}", path.display())?;
            Ok(())
        }
        Command::Finetune { common, init } => {
            let cfg = common.load()?;
            let d = load_domains(&cfg.data)?;
            let exp = cfg.experiment.resolved();
            let init_path = init.unwrap_or_else(|| {
                cfg.out_dir.join(format!("init-{}.emb", exp.transfer.mode))
            });
            let init = EmbeddingTable::load(&init_path)?;
            if !init.matches(&d.target.graph) {
                return Err(Error::Shape("initial table does not match the target graph".into()));
            }
            let split = split_interactions(&d.target.graph, &exp.split)?;
            let scoring = if exp.transfer.mode.fine_tunes() {
                train_mf(&init, &split, &exp.finetune)?.scoring
            } else {
                init
            };
            let path = cfg.out_dir.join("embeddings.emb");
            scoring.save(&path)?;
            let text = std::fs::File::create(cfg.out_dir.join("embeddings.tsv"))?;
            scoring.write_text(&d.target.ids, std::io::BufWriter::new(text))?;
            writeln!(out, "{}", path.display())?;
            Ok(())
        }
        Command::Evaluate { common, embeddings } => {
            let cfg = common.load()?;
            let d = load_domains(&cfg.data)?;
            let exp = cfg.experiment.resolved();
            let path = embeddings.unwrap_or_else(|| cfg.out_dir.join("embeddings.emb"));
            let table = EmbeddingTable::load(&path)?;
            let split = split_interactions(&d.target.graph, &exp.split)?;
            let report = evaluate(&table, &split, &exp.ks, &exp.fingerprint(), exp.seed)?;
            write_metrics(&report, &cfg.out_dir)?;
            write!(out, "{}", report.to_text())?;
            Ok(())
        }
        Command::Ablate(c) => {
            let cfg = c.load()?;
            let arms = standard_arms();
            let mut all: Vec<(u64, Vec<AblationRow>)> = Vec::new();
            for &seed in &cfg.seeds {
                let mut data = cfg.data.clone();
                if data.is_synthetic() {
                    data.synth.seed = seed;
                }
                let d = load_domains(&data)?;
                let rows = run_ablations(&d.domains(), &cfg.experiment.with_seed(seed), &arms)?;
                for r in &rows {
                    let cells: Vec<String> = r
                        .report
                        .ks
                        .iter()
                        .enumerate()
                        .map(|(j, k)| {
                            format!("recall@{k}={:.4} map@{k}={:.4}", r.report.recall[j], r.report.map[j])
                        })
                        .collect();
                    writeln!(out, "seed={seed}\tarm={}\t{}", r.arm, cells.join("\t"))?;
                }
                all.push((seed, rows));
            }
            let doc: Vec<serde_json::Value> = all
                .iter()
                .flat_map(|(seed, rows)| {
                    rows.iter().map(move |r| {
                        serde_json::json!({ "seed": seed, "arm": r.arm, "metrics": r.report.to_json() })
                    })
                })
                .collect();
            let path = cfg.out_dir.join("ablation.json");
            let mut json = serde_json::to_string_pretty(&doc).expect("serialisable");
            json.push('\n');
            std::fs::write(&path, json)?;
            writeln!(out, "{}", path.display())?;
            Ok(())
        }
        Command::Pipeline(c) => {
            let cfg = c.load()?;
            let d = load_domains(&cfg.data)?;
            let report = run_experiment(&d.domains(), &cfg.experiment)?;
            write_metrics(&report, &cfg.out_dir)?;
            write!(out, "{}", report.to_text())?;
            Ok(())
        }
    }
}
