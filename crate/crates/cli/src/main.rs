// Copyright 2026 The mcenoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

mod scenario;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mcenoc::netsim::{self, EventKind, Network, RunConfig};
use mcenoc::propcheck::{
    campaign, check_core, check_network, coverage_report, exhaustive_small, CampaignConfig,
    CheckReport, Legality, Level, Sampling, Stimulus,
};
use mcenoc::routing::{verify_routeset, Permutation, Router};
use mcenoc::tdm::{
    self, all_to_all_schedule, bisection_bandwidth, broadcast_schedule, mesh_emulation_schedule,
    slot_cycles_for, tdm_cycle_time, validate_schedule, TdmSchedule, TimingModel,
};
use mcenoc::topology::{emit_diagram, DiagramFormat, Topology, TopologyFile};

const DEFAULT_FREQ: f64 = 364e6;

#[derive(Parser)]
#[command(
    name = "mcenoc",
    version,
    about = "Beneš network-on-chip modelling toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a network and print its stage plan.
    Topo(TopoCmd),
    /// Emit a TikZ or Graphviz diagram of a network.
    Draw(DrawCmd),
    /// Compute route headers for a permutation.
    Route(RouteCmd),
    /// Simulate a scenario and summarize latencies.
    Sim(SimCmd),
    /// TDM timing model and schedule generation.
    Tdm {
        #[command(subcommand)]
        command: TdmCmd,
    },
    /// Run property-checking campaigns.
    Verify(VerifyCmd),
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Topology JSON written by `mcenoc topo --out`.
    #[arg(long, conflicts_with = "nodes")]
    topology: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Switch size as log2 of its port count.
    #[arg(long, default_value_t = 1)]
    switch_bits: u32,
}

impl NetArgs {
    fn load(&self) -> Result<Topology> {
        match (&self.topology, self.nodes) {
            (Some(path), _) => {
                let text = read(path)?;
                let file: TopologyFile = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                Ok(file.into_topology()?)
            }
            (None, Some(n)) => Ok(Topology::new(n, self.switch_bits)?),
            (None, None) => bail!("give --topology FILE or --nodes N"),
        }
    }
}

#[derive(Args)]
struct TopoCmd {
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    switch_bits: u32,
    /// Write the topology as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run structural checks (and exhaustive routability for N <= 8).
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct DrawCmd {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value = "dot")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteCmd {
    #[command(flatten)]
    net: NetArgs,
    /// JSON array of destinations indexed by source.
    #[arg(long)]
    perm: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimCmd {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    scenario: PathBuf,
    /// Write event records here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record every signal change as a VCD waveform.
    #[arg(long)]
    full_dump: bool,
    /// VCD path; defaults to the trace path with a `.vcd` extension.
    #[arg(long)]
    vcd: Option<PathBuf>,
    #[arg(long, env = "MCENOC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum TdmCmd {
    /// Slot and cycle times for an all-to-all schedule, and bandwidth.
    Model(ModelCmd),
    /// Generate (and optionally validate) a schedule.
    Schedule(ScheduleCmd),
    /// Validate an existing schedule file against a network.
    Validate(ValidateCmd),
}

#[derive(Args)]
struct ModelCmd {
    /// One or more node counts.
    #[arg(long, value_delimiter = ',', required = true)]
    nodes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    switch_bits: u32,
    /// One or more payload efficiencies in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.99")]
    eff: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_FREQ)]
    freq: f64,
    /// Data width in bits per port.
    #[arg(long, default_value_t = 1)]
    width: u32,
    /// Also report bisection bandwidth.
    #[arg(long)]
    bandwidth: bool,
    /// Emit CSV rows instead of text.
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    AllToAll,
    Mesh,
    Broadcast,
}

#[derive(Args)]
struct ScheduleCmd {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    switch_bits: u32,
    #[arg(long, default_value_t = 2)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    source: usize,
    /// Slot length; defaults to the length reaching `--eff`.
    #[arg(long)]
    slot_cycles: Option<u64>,
    #[arg(long, default_value_t = 0.99)]
    eff: f64,
    /// Route and simulate every slot.
    #[arg(long)]
    validate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateCmd {
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    schedule: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Core,
    Network,
}

#[derive(Clone, Copy, ValueEnum)]
enum LegalityArg {
    Legal,
    Unconstrained,
}

#[derive(Args)]
struct VerifyCmd {
    #[arg(long, value_enum, required_unless_present = "config")]
    level: Option<LevelArg>,
    /// Campaign JSON; overrides the other options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    switch_bits: u32,
    #[arg(long)]
    nodes: Option<usize>,
    /// Cycles per seed (core) or random traffic cycles per seed (network).
    #[arg(long, default_value_t = 100_000)]
    cycles: u64,
    #[arg(long, env = "MCENOC_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of seeds, starting at `--seed`, run in parallel.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, value_enum, default_value = "legal")]
    legality: LegalityArg,
    /// Enumerate every permutation and every (source, header) pair.
    #[arg(long)]
    exhaustive: bool,
    /// Random (source, header) pairs per seed.
    #[arg(long)]
    pairs: Option<usize>,
    /// Schedule whose launch order is checked for the priority rule.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Outcome of a command that ran to completion.
enum Verdict {
    Ok,
    Failed,
}

fn plan_summary(topo: &Topology) -> String {
    let plan = topo.plan();
    let s = plan.stage_count();
    let head = if plan.is_uniform() {
        format!("{s} stages of {}-port switches", plan.stages[0].degree())
    } else {
        let parts: Vec<String> = plan
            .stages
            .iter()
            .map(|st| format!("{}-port ×{}", st.degree(), st.switch_count))
            .collect();
        format!("{s} stages: {}", parts.join(", "))
    };
    format!("{head}; P={}", plan.total_header_bits)
}

fn topo(cmd: TopoCmd) -> Result<Verdict> {
    let topo = Topology::new(cmd.nodes, cmd.switch_bits)?;
    let plan = topo.plan();
    println!("{}", plan_summary(&topo));
    println!(
        "S={} switches={} setup bound P+S={} error bound 2P+S={}",
        plan.stage_count(),
        topo.switch_count(),
        plan.setup_bound(),
        plan.error_bound()
    );
    if let Some(out) = &cmd.out {
        let file = TopologyFile::from(&topo);
        write(out, &serde_json::to_string_pretty(&file)?)?;
    }
    if cmd.validate {
        let report = topo.validate();
        for c in &report.checks {
            println!(
                "check {:<28} {}",
                c.name,
                if c.passed { "ok" } else { "FAILED" }
            );
        }
        if let Some(r) = &report.routability {
            println!("routable permutations: {}/{}", r.routable, r.total);
        }
        if !report.passed() {
            return Ok(Verdict::Failed);
        }
    }
    Ok(Verdict::Ok)
}

fn draw(cmd: DrawCmd) -> Result<Verdict> {
    let topo = cmd.net.load()?;
    let format: DiagramFormat = cmd.format.parse()?;
    emit(&cmd.out, &emit_diagram(&topo, format))?;
    Ok(Verdict::Ok)
}

fn route(cmd: RouteCmd) -> Result<Verdict> {
    let topo = cmd.net.load()?;
    let text = read(&cmd.perm)?;
    let mapping: Vec<usize> = serde_json::from_str(&text).context("parsing permutation")?;
    if mapping.len() != topo.nodes() {
        bail!(
            "permutation has {} entries, network has {} nodes",
            mapping.len(),
            topo.nodes()
        );
    }
    let perm = Permutation::new(mapping)?;
    let set = Router::new(&topo).route(&perm)?;
    let report = verify_routeset(&topo, &set)?;
    emit(&cmd.out, &(set.to_json() + "\n"))?;
    eprintln!(
        "{} routes, {} opened, {} rejections: {}",
        report.routes.len(),
        report.opened(),
        report.rejections,
        if report.all_correct() {
            "conflict-free, all destinations correct"
        } else {
            "VERIFICATION FAILED"
        }
    );
    Ok(if report.all_correct() {
        Verdict::Ok
    } else {
        Verdict::Failed
    })
}

fn sim(cmd: SimCmd) -> Result<Verdict> {
    let topo = cmd.net.load()?;
    let file = scenario::parse(&read(&cmd.scenario)?)?;
    let resolved = scenario::resolve(&topo, &file, cmd.seed)?;
    let vcd_path = match (&cmd.vcd, &cmd.trace, cmd.full_dump) {
        (Some(p), _, _) => Some(p.clone()),
        (None, Some(t), true) => Some(t.with_extension("vcd")),
        (None, None, true) => bail!("--full-dump needs --trace or --vcd"),
        _ => None,
    };
    let mut network = Network::new(topo.clone());
    let mut config = RunConfig::new(resolved.max_cycles);
    config.full_dump = vcd_path.is_some();
    let trace = netsim::run(
        &mut network,
        &resolved.initiators,
        &resolved.targets,
        config,
    )?;

    if let Some(path) = &cmd.trace {
        write(path, &trace.events_text())?;
    }
    if let Some(path) = &vcd_path {
        let mut f =
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_vcd(&mut f)?;
        f.flush()?;
    }

    for (node, bits) in &resolved.headers {
        let h: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        println!("n{node} header {h}");
    }
    let plan = topo.plan();
    let start = |node: usize| {
        resolved
            .initiators
            .iter()
            .find(|i| i.node == node)
            .map_or(0, |i| i.start_cycle)
    };
    let mut setup = None::<u64>;
    let mut error = None::<u64>;
    let (mut opened, mut rejected, mut aborted) = (0, 0, 0);
    for e in &trace.events {
        match e.kind {
            EventKind::RouteOpened { source, .. } => {
                opened += 1;
                if let Some(s) = source {
                    let l = e.cycle.saturating_sub(start(s));
                    setup = Some(setup.map_or(l, |m| m.max(l)));
                }
            }
            EventKind::RouteRejected { .. } => rejected += 1,
            EventKind::RouteAborted { .. } => aborted += 1,
            EventKind::ErrAtSource { node } => {
                let l = e.cycle.saturating_sub(start(node));
                error = Some(error.map_or(l, |m| m.max(l)));
            }
            _ => {}
        }
    }
    let s = &trace.summary;
    println!(
        "cycles: {} ({})",
        s.cycles,
        if s.completed {
            "completed".to_string()
        } else {
            format!("pending: {:?}", s.pending)
        }
    );
    println!("routes opened: {opened}, rejected: {rejected}, aborted: {aborted}");
    let delivered = trace.delivered_by_node();
    let per: Vec<String> = delivered
        .iter()
        .map(|(n, c)| format!("n{n}: {c}"))
        .collect();
    println!(
        "bits delivered: {}{}, lost: {}",
        delivered.values().sum::<usize>(),
        if per.is_empty() {
            String::new()
        } else {
            format!(" ({})", per.join(", "))
        },
        trace.lost()
    );
    let mut within = true;
    let mut line = |name: &str, value: Option<u64>, bound: u64, label: &str| match value {
        Some(v) => {
            let ok = v <= bound;
            within &= ok;
            println!(
                "max {name} latency: {v} cycles (bound {label} = {bound}) {}",
                if ok { "ok" } else { "EXCEEDED" }
            );
        }
        None => println!("max {name} latency: - (bound {label} = {bound})"),
    };
    line("setup", setup, plan.setup_bound(), "P+S");
    line("error", error, plan.error_bound(), "2P+S");
    Ok(if within { Verdict::Ok } else { Verdict::Failed })
}

fn seconds(s: f64) -> String {
    if s >= 1.0 {
        format!("{s:.4} s")
    } else if s >= 1e-3 {
        format!("{:.3} ms", s * 1e3)
    } else {
        format!("{:.3} us", s * 1e6)
    }
}

fn tdm_model(cmd: ModelCmd) -> Result<Verdict> {
    let mut models = Vec::new();
    for &n in &cmd.nodes {
        for &e in &cmd.eff {
            models.push(TimingModel {
                f_hz: cmd.freq,
                efficiency: e,
                nodes: n,
                switch_bits: cmd.switch_bits,
            });
        }
    }
    if cmd.csv {
        print!("{}", tdm::model_report_csv(&models)?);
    } else {
        for m in &models {
            let t = tdm_cycle_time(m)?;
            println!(
                "N={} B={} eff={} f={} Hz: overhead {} cycles, slot {} ({:.1} cycles), cycle {}",
                m.nodes,
                1u64 << m.switch_bits,
                m.efficiency,
                m.f_hz,
                t.overhead_cycles,
                seconds(t.slot_seconds),
                t.slot_cycles,
                seconds(t.cycle_seconds)
            );
        }
    }
    if cmd.bandwidth {
        for &n in &cmd.nodes {
            let b = bisection_bandwidth(cmd.freq, cmd.width, n);
            println!(
                "N={n} w={}: bisection bandwidth {:.3} Gbit/s ({:.1} Mbit/s per node per bit)",
                cmd.width,
                b.bisection_bits_per_s / 1e9,
                b.per_node_per_bit / 1e6
            );
        }
    }
    Ok(Verdict::Ok)
}

fn tdm_schedule(cmd: ScheduleCmd) -> Result<Verdict> {
    let slot = match cmd.slot_cycles {
        Some(c) => c,
        None => slot_cycles_for(tdm::setup_overhead(cmd.nodes, cmd.switch_bits)?, cmd.eff)?,
    };
    let schedule = match cmd.kind {
        Kind::AllToAll => all_to_all_schedule(cmd.nodes, slot)?,
        Kind::Mesh => mesh_emulation_schedule(cmd.nodes, cmd.dims, slot)?,
        Kind::Broadcast => broadcast_schedule(cmd.nodes, cmd.source, slot)?,
    };
    emit(&cmd.out, &(schedule.to_json() + "\n"))?;
    eprintln!("{} slots of {slot} cycles", schedule.len());
    if cmd.validate {
        let topo = Topology::new(cmd.nodes, cmd.switch_bits)?;
        return Ok(report_schedule(&topo, &schedule));
    }
    Ok(Verdict::Ok)
}

fn report_schedule(topo: &Topology, schedule: &TdmSchedule) -> Verdict {
    let report = validate_schedule(topo, schedule);
    for c in &report.slots {
        eprintln!(
            "slot {:>3}: {}{}",
            c.slot,
            if c.passed() { "ok" } else { "FAILED" },
            if c.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", c.detail)
            }
        );
        for (a, b) in &c.priority_violations {
            eprintln!(
                "  priority {} launch from n{} at +{} precedes priority {} from n{} at +{}",
                a.priority, a.source, a.at, b.priority, b.source, b.at
            );
        }
    }
    if report.passed() {
        Verdict::Ok
    } else {
        Verdict::Failed
    }
}

fn tdm_validate(cmd: ValidateCmd) -> Result<Verdict> {
    let topo = cmd.net.load()?;
    let schedule = TdmSchedule::from_json(&read(&cmd.schedule)?)?;
    Ok(report_schedule(&topo, &schedule))
}

fn verify(cmd: VerifyCmd) -> Result<Verdict> {
    let config = match &cmd.config {
        Some(path) => CampaignConfig::from_json(&read(path)?)?,
        None => CampaignConfig {
            level: match cmd.level.expect("required by clap") {
                LevelArg::Core => Level::Core,
                LevelArg::Network => Level::Network,
            },
            n: cmd.nodes,
            switch_bits: cmd.switch_bits,
            seeds: (cmd.seed..cmd.seed + cmd.runs.max(1)).collect(),
            cycles: cmd.cycles,
            legality: match cmd.legality {
                LegalityArg::Legal => Legality::Legal,
                LegalityArg::Unconstrained => Legality::Unconstrained,
            },
            exhaustive: cmd.exhaustive,
            pairs: cmd.pairs,
        },
    };
    let report = run_campaign(&config)?;
    let schedule = match &cmd.schedule {
        Some(path) => {
            let n = config.n.context("--schedule needs --nodes")?;
            let topo = Topology::new(n, config.switch_bits)?;
            let s = TdmSchedule::from_json(&read(path)?)?;
            Some(validate_schedule(&topo, &s))
        }
        None => None,
    };
    print!("{}", report.table());
    println!();
    let coverage = coverage_report(std::slice::from_ref(&report), schedule.as_ref());
    print!("{}", coverage.table());
    if let Some(path) = &cmd.json {
        let doc = serde_json::json!({ "report": report, "coverage": coverage });
        write(path, &serde_json::to_string_pretty(&doc)?)?;
    }
    let schedule_failed = schedule
        .as_ref()
        .is_some_and(|s| s.priority_violations() > 0);
    Ok(if report.failed() || schedule_failed {
        Verdict::Failed
    } else {
        Verdict::Ok
    })
}

fn run_campaign(config: &CampaignConfig) -> Result<CheckReport> {
    if config.exhaustive {
        if let Some(n) = config.n {
            if n != 4 && n != 8 {
                bail!(
                    "exhaustive mode is limited to N = 4 or 8 ({} permutations would be needed for N = {n}); \
                     drop --exhaustive and use --pairs/--runs for a randomized campaign",
                    if n <= 20 { format!("{}", (1..=n as u128).product::<u128>()) } else { "too many".into() }
                );
            }
        }
    }
    match config.level {
        Level::Core => Ok(campaign(&config.seeds, |seed| {
            Ok(check_core(
                config.switch_bits,
                &Stimulus::new(seed, config.cycles, config.legality),
            ))
        })?),
        Level::Network if config.exhaustive => {
            let n = config.n.context("network level needs --nodes")?;
            let topo = Topology::new(n, config.switch_bits)?;
            let mut r = exhaustive_small(n, config.switch_bits)?;
            for &seed in &config.seeds {
                r.merge(&check_network(
                    &topo,
                    &Stimulus::new(seed, config.cycles, config.legality),
                    Sampling::Exhaustive,
                )?);
            }
            Ok(r)
        }
        _ => Ok(config.run()?),
    }
}

fn dispatch(cli: Cli) -> Result<Verdict> {
    match cli.command {
        Command::Topo(c) => topo(c),
        Command::Draw(c) => draw(c),
        Command::Route(c) => route(c),
        Command::Sim(c) => sim(c),
        Command::Tdm { command } => match command {
            TdmCmd::Model(c) => tdm_model(c),
            TdmCmd::Schedule(c) => tdm_schedule(c),
            TdmCmd::Validate(c) => tdm_validate(c),
        },
        Command::Verify(c) => verify(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
