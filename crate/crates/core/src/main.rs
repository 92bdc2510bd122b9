use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wfcompose::compose::{channel_compose, parse_chan, refine_in_composition, Agent, ChannelSpec, ComposeError, ComposedNet};
use wfcompose::conformance::quality;
use wfcompose::discover::discover;
use wfcompose::gwf::{check_soundness, GwfNet};
use wfcompose::log::{project, read_log, write_log, AgentPartition, EventLog, LogFormat};
use wfcompose::morphism::{check_alpha, parse_amap, AlphaMorphism, AmapDocument, MorphismError};
use wfcompose::net::{parse_pnet, print_pnet, Marking, NetDocument, DEFAULT_STATE_CAP};
use wfcompose::pipeline::{run_pipeline, MapSource, PipelineError, PipelineInput};
use wfcompose::simulate::{playout, PlayoutOptions};

#[derive(Parser)]
#[command(name = "wfcompose", version, about = "Compositional discovery and verification of workflow nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural and behavioural checks
    #[command(subcommand)]
    Check(Check),
    /// Channel composition of two nets
    Compose {
        n1: PathBuf,
        n2: PathBuf,
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Replace one component of a composition by a certified refinement
    Refine {
        composed: PathBuf,
        map: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Restrict a log to an alphabet
    Project {
        log: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphabet: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<LogFormat>,
    },
    /// Discover a workflow net from a log
    Discover {
        log: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also print the process tree
        #[arg(long)]
        tree: bool,
    },
    /// Token-replay fitness of a log on a net
    Replay { net: PathBuf, log: PathBuf },
    /// Escaping-edge precision of a net with respect to a log
    Precision { net: PathBuf, log: PathBuf },
    /// Generate a log by random playout
    Playout {
        net: PathBuf,
        #[arg(long)]
        traces: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        unsound_ok: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        format: Option<LogFormat>,
    },
    /// Project, discover per agent, certify, compose and compare with direct discovery
    Pipeline {
        log: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        /// Abstract agent nets and the channel spec between them
        #[arg(long, num_args = 3, value_names = ["ABSTRACT1", "ABSTRACT2", "SPEC"], required = true)]
        protocol: Vec<PathBuf>,
        /// Map from the discovered agent-1 net onto ABSTRACT1 (default: by labels)
        #[arg(long)]
        map1: Option<PathBuf>,
        #[arg(long)]
        map2: Option<PathBuf>,
        /// Where to write the composed net
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Where to write the directly discovered net
        #[arg(long)]
        direct: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Check {
    /// Is the net a generalized workflow net?
    Gwf { net: PathBuf },
    /// Decide soundness by exhaustive exploration
    Soundness {
        net: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        cap: usize,
    },
    /// Certify an α-morphism given as a .amap file
    Morphism { map: PathBuf },
}

/// A failed command: exit code 1 for a violated property, 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

fn input(message: impl Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn violation(message: impl Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

type Outcome = Result<u8, Failure>;

/// Writes to stdout; a closed pipe ends the process quietly.
fn out(text: impl Display) {
    use std::io::Write;
    if let Err(e) = write!(std::io::stdout().lock(), "{text}") {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: stdout: {e}");
        std::process::exit(2);
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            out(text);
            Ok(())
        }
    }
}

fn load_doc(path: &Path) -> Result<NetDocument, Failure> {
    parse_pnet(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_gwf(path: &Path) -> Result<GwfNet, Failure> {
    GwfNet::from_document(&load_doc(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_log(path: &Path) -> Result<EventLog, Failure> {
    read_log(path, LogFormat::from_path(path)).map_err(input)
}

fn load_spec(path: &Path) -> Result<(ChannelSpec, String), Failure> {
    let text = read(path)?;
    let spec = parse_chan(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok((spec, text))
}

/// Line of the first line whose tokens start with `keyword` followed by `id`.
fn line_of(text: &str, keyword: &str, id: &str) -> usize {
    text.lines()
        .position(|l| {
            let mut it = l.split_whitespace();
            it.next() == Some(keyword) && it.next() == Some(id)
        })
        .map_or(1, |i| i + 1)
}

fn compose_failure(e: ComposeError, path: &Path, text: &str) -> Failure {
    let line = match &e {
        ComposeError::InvalidChannelSpec { channel, .. } => line_of(text, "channel", channel),
        ComposeError::UnknownTransition(t) | ComposeError::AmbiguousTransition(t) => text
            .lines()
            .position(|l| l.split_whitespace().any(|w| w == t))
            .map_or(1, |i| i + 1),
        _ => return input(e),
    };
    input(format!("{}: line {line}: {e}", path.display()))
}

/// The declared initial marking, or the source places when none is declared.
fn initial_of(doc: &NetDocument) -> Marking {
    if !doc.initial.is_empty() {
        return doc.initial.clone();
    }
    Marking::from_places(doc.net.source_places().into_iter().map(|p| doc.net.place_id(p).to_string()))
}

/// Loads a `.amap` file and the two nets it names, relative to its directory.
fn load_morphism(path: &Path) -> Result<(AmapDocument, AlphaMorphism), Failure> {
    let doc = parse_amap(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let source = load_doc(&dir.join(&doc.source))?;
    let target = load_doc(&dir.join(&doc.target))?;
    let (m1, m2) = (initial_of(&source), initial_of(&target));
    match check_alpha(&source.net, &m1, &target.net, &m2, &doc.map) {
        Ok(phi) => Ok((doc, phi)),
        Err(MorphismError::MapShape(msg)) => {
            let line = msg
                .split('`')
                .nth(1)
                .and_then(|node| doc.lines.get(node).copied())
                .unwrap_or(1);
            Err(input(format!("{}: line {line}: {}", path.display(), MorphismError::MapShape(msg))))
        }
        Err(e @ MorphismError::NotSmdSafe { .. }) => Err(violation(format!("{}: {e}", path.display()))),
        Err(e) => Err(input(format!("{}: {e}", path.display()))),
    }
}

fn write_log_out(log: &EventLog, output: Option<&Path>, format: Option<LogFormat>) -> Result<(), Failure> {
    let format = format.or_else(|| output.map(LogFormat::from_path)).unwrap_or(LogFormat::Csv);
    emit(&write_log(log, format), output)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Check(Check::Gwf { net }) => {
            let doc = load_doc(&net)?;
            let m0 = (!doc.initial.is_empty()).then_some(&doc.initial);
            let mf = (!doc.final_marking.is_empty()).then_some(&doc.final_marking);
            match wfcompose::gwf::recognize_gwf(doc.net, m0, mf) {
                Ok(g) => {
                    out("gwf: yes\n");
                    out(format!("wf-net: {}\n", if g.is_wf_net() { "yes" } else { "no" }));
                    out(format!("initial: {}\n", g.initial()));
                    out(format!("final: {}\n", g.final_marking()));
                    Ok(0)
                }
                Err(e) => {
                    out("gwf: no\n");
                    Err(violation(format!("{}: {e}", net.display())))
                }
            }
        }
        Command::Check(Check::Soundness { net, cap }) => {
            let g = load_gwf(&net)?;
            let report = check_soundness(&g, cap);
            out(&report);
            Ok(if report.sound { 0 } else { 1 })
        }
        Command::Check(Check::Morphism { map }) => {
            let (_, phi) = load_morphism(&map)?;
            out(phi.certificate());
            Ok(if phi.is_certified() { 0 } else { 1 })
        }
        Command::Compose { n1, n2, spec, output } => {
            let (a, b) = (load_gwf(&n1)?, load_gwf(&n2)?);
            let (s, text) = load_spec(&spec)?;
            let c = channel_compose(&a, &b, &s).map_err(|e| compose_failure(e, &spec, &text))?;
            emit(&print_pnet(&c.to_document()), output.as_deref())?;
            Ok(0)
        }
        Command::Refine { composed, map, output } => {
            let doc = load_doc(&composed)?;
            let c = ComposedNet::from_document(&doc).map_err(|e| input(format!("{}: {e}", composed.display())))?;
            let (_, phi) = load_morphism(&map)?;
            if !phi.is_certified() {
                out(phi.certificate());
                return Err(violation(format!("{}: the morphism is not certified", map.display())));
            }
            let side = [Agent::One, Agent::Two]
                .into_iter()
                .find(|&a| c.component(a).net().same_structure(phi.target()))
                .ok_or_else(|| input(format!("{}: the morphism's target is neither component of {}", map.display(), composed.display())))?;
            let (refined, induced) = refine_in_composition(&c, side, &phi).map_err(input)?;
            emit(&print_pnet(&refined.to_document()), output.as_deref())?;
            if !induced.is_certified() {
                eprint!("{}", induced.certificate());
                return Err(violation("the induced morphism is not certified"));
            }
            Ok(0)
        }
        Command::Project {
            log,
            alphabet,
            output,
            format,
        } => {
            let l = load_log(&log)?;
            let alphabet: BTreeSet<String> = alphabet.into_iter().collect();
            let p = project(&l, &alphabet);
            if p.dropped > 0 {
                eprintln!("warning: {} trace(s) became empty and were dropped", p.dropped);
            }
            write_log_out(&p.log, output.as_deref(), format)?;
            Ok(0)
        }
        Command::Discover { log, output, tree } => {
            let (t, net) = discover(&load_log(&log)?);
            if tree {
                out(format!("{t}\n"));
            }
            if output.is_some() || !tree {
                emit(&print_pnet(&net.to_document()), output.as_deref())?;
            }
            Ok(0)
        }
        Command::Replay { net, log } | Command::Precision { net, log } => {
            let g = load_gwf(&net)?;
            let report = quality(&g, &load_log(&log)?).map_err(|e| input(format!("{}: {e}", net.display())))?;
            out(&report);
            Ok(0)
        }
        Command::Playout {
            net,
            traces,
            seed,
            max_steps,
            unsound_ok,
            output,
            format,
        } => {
            let g = load_gwf(&net)?;
            let p = playout(&g, traces, seed, PlayoutOptions { max_steps, unsound_ok })
                .map_err(|e| violation(format!("{}: {e}", net.display())))?;
            if p.too_long + p.empty + p.deadlocked > 0 {
                eprintln!(
                    "discarded runs: {} too long, {} silent, {} deadlocked",
                    p.too_long, p.empty, p.deadlocked
                );
            }
            write_log_out(&p.log, output.as_deref(), format)?;
            Ok(0)
        }
        Command::Pipeline {
            log,
            partition,
            protocol,
            map1,
            map2,
            output,
            direct,
        } => {
            let l = load_log(&log)?;
            let part: AgentPartition = read(&partition)?
                .parse()
                .map_err(|e| input(format!("{}: {e}", partition.display())))?;
            let (p1, p2) = (load_gwf(&protocol[0])?, load_gwf(&protocol[1])?);
            let (spec, spec_text) = load_spec(&protocol[2])?;
            let map_source = |m: &Option<PathBuf>| -> Result<MapSource, Failure> {
                match m {
                    None => Ok(MapSource::LabelRegions),
                    Some(p) => {
                        let doc = parse_amap(&read(p)?).map_err(|e| input(format!("{}: {e}", p.display())))?;
                        Ok(MapSource::Supplied(doc.map))
                    }
                }
            };
            let maps = [map_source(&map1)?, map_source(&map2)?];
            let report = run_pipeline(&PipelineInput {
                log: &l,
                partition: &part,
                protocol: [&p1, &p2],
                spec: &spec,
                maps,
            })
            .map_err(|e| match e {
                PipelineError::Compose(c) => compose_failure(c, &protocol[2], &spec_text),
                PipelineError::NotCertified { .. } | PipelineError::UnsoundProtocol(_) => violation(e),
                PipelineError::Log(e) => input(format!("{}: {e}", log.display())),
                e => input(e),
            })?;
            let text = print_pnet(&report.composed.to_document());
            match &output {
                Some(p) => emit(&text, Some(p))?,
                None => out(&text),
            }
            if let Some(p) = &direct {
                emit(&print_pnet(&report.direct.to_document()), Some(p))?;
            }
            if output.is_none() {
                out("\n");
            }
            out(&report);
            Ok(if report.soundness.sound { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
