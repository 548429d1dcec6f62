use std::cell::OnceCell;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use dragonlab_core::attack::{display_password, prune_dictionary, AttackModel, IterationLaw, Leak, PruneError};
use dragonlab_core::bench::{bench_mitigation, BenchError};
use dragonlab_core::calibrate::{calibrate, evaluate, CalibrateOptions, CalibrationTargets, SearchSpace};
use dragonlab_core::campaign::{run_campaign, synthetic_dictionary, CampaignConfig, CampaignError};
use dragonlab_core::derive::{derive_pwe, scan_high_iteration, DerivationContext, Event, Mode, Profile, Variant};
use dragonlab_core::handshake::{run_handshake, End, HandshakeOptions, Outcome};
use dragonlab_core::identity::parse_bytes;
use dragonlab_core::parallel::{default_shards, map_shards};
use dragonlab_core::parser::{interpret_trace, ParseOutcome, ParserConfig};
use dragonlab_core::seed::{entropy_seed, indexed_stream, stream};
use dragonlab_core::sidechannel::{
    parse_answers, parse_trace_jsonl, parse_trace_text, serialize_answers, serialize_trace_jsonl, serialize_trace_text,
    simulate_trace, ChannelShape, NoiseModel, SimulateError, Trace,
};
use dragonlab_core::Identity;
use rand::Rng;
use serde_json::{json, Value};

use crate::args::*;

/// Bad input that clap could not catch; exits like a usage error.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub enum Output {
    Report {
        json: Value,
        text: String,
    },
    /// Already encoded for the requested format.
    Raw(String),
}

pub struct Done {
    pub output: Output,
    /// Domain failure reported after the output.
    pub failure: Option<String>,
}

impl Done {
    fn report(json: Value, text: String) -> Self {
        Done { output: Output::Report { json, text }, failure: None }
    }

    fn failing(mut self, failure: Option<String>) -> Self {
        self.failure = failure;
        self
    }
}

pub struct Ctx {
    pub format: Format,
    explicit_seed: Option<u64>,
    seed: OnceCell<u64>,
}

impl Ctx {
    pub fn new(format: Format, seed: Option<u64>) -> Self {
        Ctx { format, explicit_seed: seed, seed: OnceCell::new() }
    }

    /// The master seed, announced on stderr when it had to be drawn.
    fn seed(&self) -> u64 {
        *self.seed.get_or_init(|| {
            self.explicit_seed.unwrap_or_else(|| {
                let s = entropy_seed();
                eprintln!("seed: {s}");
                s
            })
        })
    }
}

pub fn run(cmd: Command, ctx: &Ctx) -> Result<Done> {
    match cmd {
        Command::Derive(a) => derive(a, ctx),
        Command::HandshakeDemo(a) => handshake(a, ctx),
        Command::Simulate(a) => simulate(a, ctx),
        Command::ParseTraces(a) => parse_traces(a),
        Command::Prune(a) => prune(a),
        Command::Plan(a) => plan(a),
        Command::Calibrate(a) => calibrate_cmd(a, ctx),
        Command::BenchMitigation(a) => bench(a, ctx),
        Command::Campaign(a) => campaign(a, ctx),
        Command::Scan(a) => scan(a),
        Command::GenDict(a) => gen_dict(a, ctx),
    }
}

fn mode(m: ModeArg) -> Mode {
    match m {
        ModeArg::Vulnerable => Mode::Vulnerable,
        ModeArg::Hardened => Mode::Hardened,
    }
}

fn check_token(profile: &Profile, token: Option<[u8; 4]>) -> Result<()> {
    match (profile.variant, token) {
        (Variant::EapPwd, None) => Err(usage("--token is required for eap-pwd")),
        (Variant::Sae, Some(_)) => Err(usage("--token applies to eap-pwd only")),
        _ => Ok(()),
    }
}

fn shards(n: Option<usize>) -> Result<usize> {
    match n {
        Some(0) => Err(usage("--shards must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(default_shards()),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_noise(spec: &str) -> Result<NoiseModel> {
    let model = match spec {
        "default" => NoiseModel::shipped(),
        "zero" => NoiseModel::zero(),
        path => {
            let text = read(Path::new(path))?;
            serde_json::from_str(&text).with_context(|| format!("parsing noise model {path}"))?
        }
    };
    model.validate()?;
    Ok(model)
}

fn read_dictionary(path: &Path) -> Result<Vec<Vec<u8>>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        out.push(parse_bytes(line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn read_leaks(path: &Path) -> Result<Vec<Leak>> {
    let text = read(path)?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn read_traces(path: &Path) -> Result<Vec<Trace>> {
    let text = read(path)?;
    let traces = if text.trim_start().starts_with('{') { parse_trace_jsonl(&text) } else { parse_trace_text(&text) };
    traces.with_context(|| format!("parsing {}", path.display()))
}

fn hex_point(ctx: &DerivationContext, p: &dragonlab_core::ec::CurvePoint) -> (String, String) {
    let f = ctx.curve.field();
    (hex::encode(f.to_bytes(p.x().expect("finite"))), hex::encode(f.to_bytes(p.y().expect("finite"))))
}

fn derive(a: DeriveArgs, ctx: &Ctx) -> Result<Done> {
    let profile = a.profile.profile;
    check_token(&profile, a.token)?;
    let dctx = DerivationContext::from_profile(&profile, a.id_a, a.id_b, a.token, a.password.0, mode(a.mode));
    let mut rng = stream(ctx.seed(), "derive");
    let mut events = Vec::new();
    let r = derive_pwe(&dctx, &mut rng, &mut events)?;
    let element = r.element.as_ref().map(|p| hex_point(&dctx, p));
    let mut json = json!({
        "profile": profile.name,
        "mode": dctx.mode,
        "success_iteration": r.success_iteration,
        "iterations_executed": r.iterations_executed,
        "element": element.as_ref().map(|(x, y)| json!({ "x": x, "y": y })),
    });
    let mut text = format!(
        "profile             {}\nmode                {}\nsuccess_iteration   {}\niterations_executed {}\n",
        profile.name,
        serde_json::to_value(dctx.mode)?.as_str().unwrap_or_default(),
        r.success_iteration.map_or("none".into(), |k| k.to_string()),
        r.iterations_executed
    );
    if let Some((x, y)) = &element {
        let _ = writeln!(text, "element.x           {x}\nelement.y           {y}");
    }
    if a.events {
        json["events"] = serde_json::to_value(&events)?;
        for e in &events {
            let _ = writeln!(text, "event {}", event_line(e));
        }
    }
    let failure = r
        .success_iteration
        .is_none()
        .then(|| format!("no password element within {} iterations", r.iterations_executed));
    Ok(Done::report(json, text).failing(failure))
}

fn event_line(e: &Event) -> String {
    match e {
        Event::BlindingSetup { draws } => format!("blinding_setup draws={draws}"),
        Event::IterationStart { counter } => format!("iteration_start counter={counter}"),
        Event::KdfCall { counter } => format!("kdf_call counter={counter}"),
        Event::RandomCall => "random_call".into(),
        Event::QrTest => "qr_test".into(),
        Event::SuccessBlock { counter } => format!("success_block counter={counter}"),
    }
}

fn handshake(a: HandshakeArgs, ctx: &Ctx) -> Result<Done> {
    let profile = a.profile.profile;
    let pw_b = a.password_b.unwrap_or_else(|| a.password_a.clone());
    let opts = HandshakeOptions {
        mode: mode(a.mode),
        first: match a.first {
            SideArg::A => End::A,
            SideArg::B => End::B,
        },
    };
    let mut rng = stream(ctx.seed(), "handshake");
    let r = run_handshake(&a.password_a.0, &pw_b.0, &a.id_a, &a.id_b, &profile, &opts, &mut rng)?;
    let json = serde_json::to_value(&r)?;
    let key = |k: &Option<[u8; 32]>| k.map_or("-".to_string(), hex::encode);
    let outcome = match &r.outcome {
        Outcome::Success => "success".to_string(),
        Outcome::Failure { stage, reason } => format!("failure at {stage:?} ({reason})").to_lowercase(),
    };
    let text = format!("outcome {outcome}\nmk_a    {}\nmk_b    {}\n", key(&r.mk_a), key(&r.mk_b));
    let failure = (!r.succeeded()).then(|| format!("handshake {outcome}"));
    Ok(Done::report(json, text).failing(failure))
}

fn random_password<R: Rng>(rng: &mut R) -> Vec<u8> {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let len = rng.gen_range(8..=14);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

fn simulate(a: SimulateArgs, ctx: &Ctx) -> Result<Done> {
    let profile = a.profile.profile;
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    if profile.variant == Variant::EapPwd && a.samples != 1 {
        return Err(usage("eap-pwd captures hold one sample each; use --samples 1"));
    }
    let noise = load_noise(&a.noise)?;
    let shape = ChannelShape::for_variant(profile.variant);
    let seed = ctx.seed();
    let ap = Identity::random_mac(&mut stream(seed, "simulate/ap"));
    let indices: Vec<usize> = (0..a.traces).collect();
    let results: Vec<Result<Option<Trace>, SimulateError>> = map_shards(&indices, default_shards(), |chunk| {
        chunk
            .iter()
            .map(|&i| {
                let mut rng = indexed_stream(seed, "simulate/trace", i as u64);
                let client = Identity::random_mac(&mut rng);
                let token = (profile.variant == Variant::EapPwd).then(|| rng.gen::<[u8; 4]>());
                let pw = a.password.as_ref().map_or_else(|| random_password(&mut rng), |p| p.0.clone());
                let dctx = DerivationContext::from_profile(&profile, client, ap.clone(), token, pw, Mode::Vulnerable);
                match simulate_trace(format!("trace-{:04}", i + 1), &dctx, a.samples, &shape, &noise, &mut rng) {
                    Ok(t) => Ok(Some(t)),
                    Err(SimulateError::NotFound) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let mut traces = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(t) => traces.push(t),
            None => skipped += 1,
        }
    }
    let encoded = match ctx.format {
        Format::Text => serialize_trace_text(&traces),
        Format::Json => serialize_trace_jsonl(&traces),
    };
    if let Some(p) = &a.answers {
        write(p, &serialize_answers(&traces))?;
    }
    let Some(out) = &a.out else {
        return Ok(Done { output: Output::Raw(encoded), failure: None });
    };
    write(out, &encoded)?;
    let samples: usize = traces.iter().map(|t| t.samples.len()).sum();
    let json = json!({ "traces": traces.len(), "samples": samples, "skipped": skipped, "out": out });
    let text = format!("wrote {} traces ({samples} samples) to {}\n", traces.len(), out.display());
    Ok(Done::report(json, text))
}

fn outcome_text(o: &ParseOutcome) -> String {
    match o {
        ParseOutcome::Exact { k, .. } => format!("exact k={k}"),
        ParseOutcome::LowerBound { k_min, candidates } => {
            format!("lower_bound k>{k_min} candidates={},{}", candidates[0], candidates[1])
        }
        ParseOutcome::Warning { reason } => {
            format!(
                "warning {}",
                serde_json::to_value(reason).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            )
        }
    }
}

fn parse_traces(a: ParseArgs) -> Result<Done> {
    let mut cfg = ParserConfig { max_iterations: a.profile.profile.k_max, ..ParserConfig::default() };
    if let Some(m) = a.decision_margin {
        cfg.decision_margin = m;
    }
    if let Some(t) = a.long_delay_threshold {
        cfg.long_delay_threshold = t;
    }
    cfg.validate().map_err(usage)?;
    let mut traces = Vec::new();
    for f in &a.files {
        traces.extend(read_traces(f)?);
    }
    let truth: Option<HashMap<String, u32>> = match &a.answers {
        Some(p) => Some(parse_answers(&read(p)?)?.into_iter().map(|x| (x.trace_id, x.truth_k)).collect()),
        None => None,
    };
    let mut reports = Vec::new();
    let mut leaks = Vec::new();
    let mut text = String::new();
    let (mut usable, mut consistent) = (0usize, 0usize);
    for t in &traces {
        let r = interpret_trace(t, &cfg);
        if r.outcome.is_usable() {
            usable += 1;
            if let Some(k) = truth.as_ref().and_then(|m| m.get(&r.trace_id)) {
                consistent += r.outcome.is_consistent_with(*k) as usize;
            }
        }
        if let Some(l) = r.outcome.to_leak(t) {
            leaks.push(l);
        }
        let _ = writeln!(
            text,
            "{}  {}  samples {}/{}",
            r.trace_id,
            outcome_text(&r.outcome),
            r.samples_used,
            r.samples_total
        );
        reports.push(r);
    }
    let _ = writeln!(text, "usable {usable}/{}  leaks {}", traces.len(), leaks.len());
    let mut json = json!({ "traces": reports, "usable": usable, "leaks": leaks.len() });
    if truth.is_some() {
        let accuracy = if usable == 0 { 0.0 } else { consistent as f64 / usable as f64 };
        json["accuracy"] = json!(accuracy);
        let _ = writeln!(text, "accuracy {accuracy:.4}");
    }
    if let Some(p) = &a.leaks_out {
        let body: String =
            leaks.iter().map(|l| serde_json::to_string(l).map(|s| s + "\n")).collect::<Result<_, _>>()?;
        write(p, &body)?;
    }
    let failure = (usable == 0).then(|| "no trace yielded a usable answer".to_string());
    Ok(Done::report(json, text).failing(failure))
}

fn prune(a: PruneArgs) -> Result<Done> {
    let dict = read_dictionary(&a.dictionary)?;
    let leaks = read_leaks(&a.leaks)?;
    let r = match prune_dictionary(&dict, &leaks, &a.profile.profile, shards(a.shards)?) {
        Ok(r) => r,
        Err(PruneError::NoLeaks) => anyhow::bail!("{} holds no leaks", a.leaks.display()),
    };
    let json = serde_json::to_value(&r)?;
    let mut text = format!(
        "input {}  survivors {}  eliminated per leak {:?}\n",
        r.input_size,
        r.survivors.len(),
        r.eliminated_per_leak
    );
    for s in &r.survivors {
        let _ = writeln!(text, "{}", display_password(s));
    }
    Ok(Done::report(json, text))
}

fn plan(a: PlanArgs) -> Result<Done> {
    let law = match a.law {
        LawArg::Power => IterationLaw::Power,
        LawArg::Geometric => IterationLaw::Geometric,
    };
    let m = AttackModel::new(a.p_s, a.k_max, law).map_err(usage)?;
    let rows: Vec<_> = a.sizes.iter().map(|&l| m.plan_row(l, a.target)).collect();
    let p1 = m.pr_pruned_by_one_trace();
    let json = json!({ "p_pruned_per_trace": p1, "target": a.target, "rows": rows });
    let mut text = format!("pruned per trace {p1:.6}  target {}\n", a.target);
    let _ = writeln!(text, "{:>12} {:>6} {:>9} {:>9} {:>9}", "size", "leak", "leak~exp", "baseline", "base~exp");
    for r in &rows {
        let _ = writeln!(
            text,
            "{:>12.3e} {:>6} {:>9} {:>9} {:>9}",
            r.dictionary_size as f64,
            r.leak_traces,
            r.leak_traces_expected,
            r.baseline_traces,
            r.baseline_traces_expected
        );
    }
    Ok(Done::report(json, text))
}

fn calibrate_cmd(a: CalibrateArgs, ctx: &Ctx) -> Result<Done> {
    if a.traces_per_point == 0 {
        return Err(usage("--traces-per-point must be at least 1"));
    }
    let opts = CalibrateOptions {
        random_candidates: a.random_candidates,
        refine_rounds: a.refine_rounds,
        traces_per_point: a.traces_per_point,
        seed: ctx.seed(),
        ..CalibrateOptions::default()
    };
    let targets = CalibrationTargets::reference();
    let (model, eval, evaluated) = match &a.evaluate {
        Some(spec) => {
            let m = load_noise(spec)?;
            let e = evaluate(&m, &targets, &opts);
            (m, e, 1)
        }
        None => {
            let r = calibrate(&SearchSpace::wide(), &targets, &opts);
            (r.model, r.evaluation, r.candidates_evaluated)
        }
    };
    if let Some(p) = &a.write {
        write(p, &(serde_json::to_string_pretty(&model)? + "\n"))?;
    }
    let json = json!({ "model": model, "evaluation": eval, "candidates_evaluated": evaluated });
    let mut text = String::new();
    for r in &eval.reliability {
        let _ = writeln!(
            text,
            "{:>2} samples/trace  usable {:.3}  accuracy {:.3}",
            r.samples_per_trace, r.usable, r.accuracy
        );
    }
    if let Some(s) = &eval.single_shot {
        let _ = writeln!(
            text,
            "single shot  usable {:.3}  exact {:.3}  within next {:.3}",
            s.usable, s.exact, s.within_next
        );
    }
    let _ = writeln!(text, "distance {:.4}  worst miss {:.4}", eval.distance, eval.worst_miss);
    let _ = writeln!(text, "{}", serde_json::to_string_pretty(&model)?);
    Ok(Done::report(json, text))
}

fn bench(a: BenchArgs, ctx: &Ctx) -> Result<Done> {
    let r = match bench_mitigation(&a.profile.profile, a.runs, ctx.seed()) {
        Err(e @ BenchError::TooFewRuns(_)) => return Err(usage(e.to_string())),
        other => other?,
    };
    let json = serde_json::to_value(&r)?;
    let text = format!(
        "vulnerable mean {:.0} ns median {:.0} ns\nhardened   mean {:.0} ns median {:.0} ns\nratio mean {:.4} median {:.4}\nelements agree {}  hardened fingerprints constant {} ({} distinct)\n",
        r.vulnerable.mean_ns,
        r.vulnerable.median_ns,
        r.hardened.mean_ns,
        r.hardened.median_ns,
        r.mean_ratio,
        r.median_ratio,
        r.elements_agree,
        r.fingerprints_constant,
        r.distinct_hardened_fingerprints
    );
    let failure =
        (!r.fingerprints_constant || !r.elements_agree).then(|| "hardened derivation is not uniform".to_string());
    Ok(Done::report(json, text).failing(failure))
}

fn campaign(a: CampaignArgs, ctx: &Ctx) -> Result<Done> {
    let seed = ctx.seed();
    let dict = match &a.dictionary {
        Some(p) => read_dictionary(p)?,
        None => synthetic_dictionary(a.dict_size, seed),
    };
    let cfg = CampaignConfig {
        noise: load_noise(&a.noise)?,
        seed,
        shards: shards(a.shards)?,
        max_unusable_fraction: a.max_unusable,
        ..CampaignConfig::new(a.profile.profile, a.planted.0, a.identities, a.samples_per_identity)
    };
    let r = match run_campaign(&cfg, &dict) {
        Err(CampaignError::Config(m)) => return Err(usage(m)),
        other => other?,
    };
    let json = serde_json::to_value(&r)?;
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("report.json"), &(serde_json::to_string_pretty(&json)? + "\n"))?;
        let leaks: String =
            r.leaks.iter().map(|l| serde_json::to_string(l).map(|s| s + "\n")).collect::<Result<_, _>>()?;
        write(&dir.join("leaks.jsonl"), &leaks)?;
    }
    let t = &r.totals;
    let mut text = format!(
        "traces {}  samples {}  usable {}  leaks {} ({} wrong)\ndictionary {}  survivors {}  success {}\n",
        t.traces,
        t.samples,
        t.usable_traces,
        t.leaks,
        t.wrong_leaks,
        r.dictionary_size,
        r.survivors.len(),
        r.success
    );
    if r.survivors.len() <= 20 {
        for s in &r.survivors {
            let _ = writeln!(text, "survivor {s}");
        }
    }
    for w in &r.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    let failure = (t.traces > 0 && t.usable_traces == 0).then(|| "no trace yielded a usable answer".to_string());
    Ok(Done::report(json, text).failing(failure))
}

fn scan(a: ScanArgs) -> Result<Done> {
    let profile = a.profile.profile;
    check_token(&profile, a.token)?;
    let dict = read_dictionary(&a.dictionary)?;
    let template = DerivationContext::from_profile(&profile, a.id_a, a.id_b, a.token, Vec::new(), Mode::Vulnerable);
    let hits = scan_high_iteration(&template, &dict, a.threshold, shards(a.shards)?);
    let rows: Vec<Value> =
        hits.iter().map(|h| json!({ "password": display_password(&h.password), "iterations": h.iterations })).collect();
    let json = json!({ "dictionary_size": dict.len(), "threshold": a.threshold, "hits": rows });
    let mut text = format!("{} of {} entries need more than {} iterations\n", hits.len(), dict.len(), a.threshold);
    for h in &hits {
        let k = h.iterations.map_or("none".into(), |k| k.to_string());
        let _ = writeln!(text, "{k:>4}  {}", display_password(&h.password));
    }
    Ok(Done::report(json, text))
}

fn gen_dict(a: GenDictArgs, ctx: &Ctx) -> Result<Done> {
    let seed = ctx.seed();
    let mut dict = synthetic_dictionary(a.size, seed);
    if let Some(p) = &a.plant {
        dict.retain(|w| w != &p.0);
        let at = stream(seed, "gen-dict/plant").gen_range(0..=dict.len());
        dict.insert(at, p.0.clone());
    }
    let encoded = match ctx.format {
        Format::Text => dict.iter().map(|w| display_password(w) + "\n").collect::<String>(),
        Format::Json => serde_json::to_string(&dict.iter().map(|w| display_password(w)).collect::<Vec<_>>())? + "\n",
    };
    let Some(out) = &a.out else {
        return Ok(Done { output: Output::Raw(encoded), failure: None });
    };
    write(out, &encoded)?;
    let json = json!({ "entries": dict.len(), "out": out });
    let text = format!("wrote {} entries to {}\n", dict.len(), out.display());
    Ok(Done::report(json, text))
}
