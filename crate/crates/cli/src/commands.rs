use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use legible::anticipate::{
    classify as classify_obs, derive_events, gate_cuts, observe, run_gated_eval, CueRegistry,
    Gate, GatedReport, Priors,
};
use legible::dataset::{
    load_dataset, synthesize_dataset, validate_dataset, write_dataset, ActionLabel, Dataset,
    LabelCounts, NoiseSpec, TrialRecord, MANIFEST_FILE,
};
use legible::gaze::{eye_head_timeline, generate_script, GazePattern, Sampling};
use legible::streamsync::{align_config, PolicyRegistry};
use legible::trajgmm::{fit_action_models, ActionModels, AXES};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_IO, EXIT_LEAKAGE};
use crate::{
    AlignArgs, ClassifyArgs, EvalArgs, FitArgs, GazeArgs, ReconstructArgs, SynthArgs, ValidateArgs,
};

const TOOL: &str = "legible";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const RUN_RECORD: &str = "run_config.json";

pub struct Context {
    config: Option<PathBuf>,
    sets: Vec<String>,
}

/// Resolved configuration plus the bits of provenance every output carries.
struct Run {
    command: &'static str,
    cfg: RunConfig,
    hash: String,
    args: BTreeMap<String, Value>,
    inputs: BTreeMap<String, String>,
}

impl Context {
    pub fn new(config: Option<PathBuf>, sets: Vec<String>) -> Self {
        Self { config, sets }
    }

    fn run(&self, command: &'static str, flags: Vec<(&str, Value)>) -> Result<Run, CliError> {
        let flags: Vec<(String, Value)> = flags.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        let cfg = RunConfig::resolve(self.config.as_deref(), &self.sets, &flags)?;
        Ok(Run {
            command,
            hash: cfg.hash(),
            cfg,
            args: BTreeMap::new(),
            inputs: BTreeMap::new(),
        })
    }
}

impl Run {
    fn arg(mut self, key: &str, v: impl Serialize) -> Self {
        self.args.insert(key.into(), serde_json::to_value(v).expect("serializable"));
        self
    }

    fn input(&mut self, key: &str, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.insert(key.into(), sha256(&text));
        Ok(text)
    }

    fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::from([
            ("tool".to_string(), TOOL.to_string()),
            ("version".to_string(), VERSION.to_string()),
            ("command".to_string(), self.command.to_string()),
            ("config_hash".to_string(), self.hash.clone()),
        ]);
        for (k, h) in &self.inputs {
            m.insert(format!("input_{k}_sha256"), h.clone());
        }
        m
    }

    fn csv_header(&self) -> String {
        format!("# tool={TOOL} version={VERSION} command={} config_hash={}\n", self.command, self.hash)
    }

    fn with_header(&self, csv: &str) -> String {
        self.csv_header() + csv
    }

    /// JSON with a `meta` block merged into the top-level object.
    fn json<T: Serialize>(&self, v: &T) -> String {
        let mut value = serde_json::to_value(v).expect("serializable");
        if let Value::Object(o) = &mut value {
            o.insert("meta".into(), serde_json::to_value(self.meta()).expect("serializable"));
        }
        serde_json::to_string_pretty(&value).expect("serializable") + "\n"
    }

    fn record(&self) -> String {
        let v = json!({
            "tool": TOOL,
            "version": VERSION,
            "command": self.command,
            "args": self.args,
            "inputs": self.inputs,
            "config_hash": self.hash,
            "config": self.cfg,
        });
        serde_json::to_string_pretty(&v).expect("serializable") + "\n"
    }

    fn write_record_in(&self, dir: &Path) -> Result<(), CliError> {
        write(&dir.join(RUN_RECORD), &self.record())
    }

    fn write_record_beside(&self, file: &Path) -> Result<(), CliError> {
        let mut name = file.file_name().unwrap_or_default().to_os_string();
        name.push(".config.json");
        write(&file.with_file_name(name), &self.record())
    }
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn load(run: &mut Run, dir: &Path) -> Result<Dataset, CliError> {
    let (_, d) = load_dataset(dir)?;
    run.input("manifest", &dir.join(MANIFEST_FILE))?;
    Ok(d)
}

fn load_models(run: &mut Run, path: &Path) -> Result<ActionModels, CliError> {
    let text = run.input("models", path)?;
    Ok(ActionModels::from_json(&text)?)
}

fn find_trial(d: &Dataset, id: u32) -> Result<&TrialRecord, CliError> {
    d.trials
        .iter()
        .find(|t| t.trial_id == id)
        .ok_or_else(|| CliError::new(EXIT_IO, "data", format!("trial {id} not in dataset")))
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    if let Some(c) = &a.counts {
        let counts = LabelCounts::parse_list(c)?;
        flags.push(("synth.counts", serde_json::to_value(counts).expect("serializable")));
    }
    if let Some(s) = a.seed {
        flags.push(("synth.seed", json!(s)));
    }
    if let Some(id) = a.first_trial_id {
        flags.push(("synth.first_trial_id", json!(id)));
    }
    if a.noise_free {
        flags.push(("synth.noise", serde_json::to_value(NoiseSpec::zero()).expect("serializable")));
    }
    let run = ctx.run("synth", flags)?;
    let d = synthesize_dataset(&run.cfg.synth)?;
    write_dataset(&a.out, &d, run.meta())?;
    run.write_record_in(&a.out)?;
    println!("wrote {} trials to {}", d.trials.len(), a.out.display());
    Ok(())
}

pub fn fit(ctx: &Context, a: &FitArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    if let Some(k) = a.components {
        flags.push(("em.components", json!(k)));
    }
    if let Some(s) = a.seed {
        flags.push(("em.seed", json!(s)));
    }
    if a.joint {
        flags.push(("em.joint", json!(true)));
    }
    let mut run = ctx.run("fit", flags)?;
    let d = load(&mut run, &a.data)?;
    let mut models = fit_action_models(&d, &run.cfg.em)?;
    models.meta = run.meta();
    write(&a.out, &models.to_json())?;
    run.write_record_beside(&a.out)?;
    let converged = models
        .models
        .values()
        .flat_map(|m| m.gmms())
        .filter(|g| g.fit_meta.converged)
        .count();
    println!(
        "fitted {} models ({converged} converged) to {}",
        models.model_count(),
        a.out.display()
    );
    Ok(())
}

pub fn reconstruct(ctx: &Context, a: &ReconstructArgs) -> Result<(), CliError> {
    let flags = a.points.map(|p| ("gmr.points", json!(p))).into_iter().collect();
    let mut run = ctx.run("reconstruct", flags)?;
    let models = load_models(&mut run, &a.models)?;
    let gmr = &run.cfg.gmr;
    let mut written = 0;
    for label in ActionLabel::ALL {
        if models.get(label).is_none() {
            continue;
        }
        let r = models.reconstruct(label, gmr.points, gmr.covariance)?;
        write(&a.out.join(format!("{}.csv", label.token())), &run.with_header(&r.to_csv()))?;
        written += 1;
    }
    run.write_record_in(&a.out)?;
    println!("wrote {written} reconstructions ({}) to {}", AXES.join(","), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ScriptSet<'a> {
    scripts: &'a [legible::gaze::GazeScript],
}

pub fn gaze(ctx: &Context, a: &GazeArgs) -> Result<(), CliError> {
    let run = ctx.run("gaze", Vec::new())?.arg("rate", a.rate);
    let synth = &run.cfg.synth;
    let scene = &synth.geometry;
    let mut scripts = Vec::new();
    for label in ActionLabel::ALL {
        for pattern in GazePattern::ALL.into_iter().filter(|p| p.compatible_with(label.action)) {
            let script = generate_script(label, pattern, &synth.gaze, scene)?;
            let last = script.events.last().map_or(0.0, |e| e.t);
            let sampling = Sampling {
                rate: a.rate,
                duration: last + synth.gaze.dwell,
            };
            let tl = eye_head_timeline(&script, &synth.head, scene, &scene.actor_eye, sampling)?;
            let mut csv = String::from("t,target,eye_x,eye_y,eye_z,head_x,head_y,head_z\n");
            for (e, h) in tl.eye.samples.iter().zip(&tl.head.samples) {
                let target = script.target_at(e.t).kind;
                let _ = writeln!(
                    csv,
                    "{},{target:?},{},{},{},{},{},{}",
                    legible::dataset::fmt_time(e.t),
                    e.value[0],
                    e.value[1],
                    e.value[2],
                    h.value[0],
                    h.value[1],
                    h.value[2]
                );
            }
            let name = format!("timeline_{}_{}.csv", label.token(), pattern.name());
            write(&a.out.join(name), &run.with_header(&csv))?;
            scripts.push(script);
        }
    }
    write(&a.out.join("scripts.json"), &run.json(&ScriptSet { scripts: &scripts }))?;
    run.write_record_in(&a.out)?;
    println!("wrote {} gaze scripts to {}", scripts.len(), a.out.display());
    Ok(())
}

pub fn align(ctx: &Context, a: &AlignArgs) -> Result<(), CliError> {
    let flags = a
        .policy
        .as_ref()
        .map(|p| ("align.default_policy", json!(p)))
        .into_iter()
        .collect();
    let mut run = ctx.run("align", flags)?.arg("trial", a.trial);
    let d = load(&mut run, &a.data)?;
    let trial = find_trial(&d, a.trial)?;
    let streams: Vec<_> = trial.streams.values().cloned().collect();
    let bundle = align_config(&streams, &run.cfg.align, &PolicyRegistry::default())?;
    write(&a.out, &run.with_header(&bundle.to_csv()))?;
    run.write_record_beside(&a.out)?;
    for s in &bundle.streams {
        println!(
            "{:<10} policy={:<8} max_alignment_error={:.6}",
            s.name, s.policy, s.max_alignment_error
        );
    }
    Ok(())
}

pub fn validate(ctx: &Context, a: &ValidateArgs) -> Result<(), CliError> {
    let mut run = ctx.run("validate", Vec::new())?;
    let d = load(&mut run, &a.data)?;
    let report = validate_dataset(&d);
    let text = run.json(&report);
    match &a.out {
        Some(path) => {
            write(path, &text)?;
            run.write_record_beside(path)?;
        }
        None => print!("{text}"),
    }
    if !report.violations.is_empty() {
        return Err(CliError::new(
            EXIT_IO,
            "data",
            format!("{} violation(s); first: {}", report.violations.len(), report.violations[0].message),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassifyOutput {
    trial_id: u32,
    label: ActionLabel,
    gate: Gate,
    cut: f64,
    predicted: ActionLabel,
    correct: bool,
    posterior: BTreeMap<ActionLabel, f64>,
}

fn check_leakage(models: &ActionModels, ids: &[u32]) -> Result<(), CliError> {
    let leaked: Vec<u32> = ids
        .iter()
        .copied()
        .filter(|id| models.training_trial_ids.contains(id))
        .collect();
    if leaked.is_empty() {
        return Ok(());
    }
    Err(CliError::new(
        EXIT_LEAKAGE,
        "leakage",
        format!("{} trial(s) also used for training: {leaked:?}", leaked.len()),
    ))
}

pub fn classify(ctx: &Context, a: &ClassifyArgs) -> Result<(), CliError> {
    let gate: Gate = a.gate.parse()?;
    let mut run = ctx.run("classify", Vec::new())?.arg("trial", a.trial).arg("gate", gate);
    let d = load(&mut run, &a.data)?;
    let models = load_models(&mut run, &a.models)?;
    let trial = find_trial(&d, a.trial)?;
    check_leakage(&models, &[trial.trial_id])?;
    let ev = &run.cfg.eval;
    let events = derive_events(trial, &ev.perception, &ev.gates)?;
    let cut = gate_cuts(&events, &ev.gates)
        .into_iter()
        .find(|(g, _)| *g == gate)
        .map(|(_, c)| c)
        .expect("every gate has a cut");
    let obs = observe(trial, gate, cut, &events, &ev.perception, ev.seed);
    let priors = Priors::for_mode(ev.prior_mode, &models)?;
    let cues = CueRegistry::from_config(&ev.cues)?;
    let post = classify_obs(&obs, &models, &priors, &cues)?;
    let predicted = post.argmax();
    let out = ClassifyOutput {
        trial_id: trial.trial_id,
        label: trial.label,
        gate,
        cut,
        predicted,
        correct: predicted == trial.label,
        posterior: post.probs,
    };
    let text = run.json(&out);
    match &a.out {
        Some(path) => {
            write(path, &text)?;
            run.write_record_beside(path)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn summary_table(r: &GatedReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<6} {:>5} {:>9} {:>10} {:>7}", "gate", "n", "accuracy", "direction", "action");
    for g in &r.gates {
        let _ = writeln!(
            s,
            "{:<6} {:>5} {:>9.4} {:>10.4} {:>7.4}",
            g.gate.name(),
            g.n,
            g.accuracy,
            g.direction_accuracy,
            g.action_accuracy
        );
    }
    let _ = writeln!(
        s,
        "{:<6} {:>5} {:>9.4} {:>10.4} {:>7.4}",
        "chance", "", r.chance.overall, r.chance.direction, r.chance.action
    );
    match (&r.anova, &r.anova_note) {
        (Some(t), _) => {
            for (name, e) in [("gate", &t.factor_a), ("action_type", &t.factor_b), ("interaction", &t.interaction)] {
                let _ = writeln!(s, "anova {name:<12} F={:.4} p={:.4e}", e.f, e.p);
            }
        }
        (None, Some(note)) => {
            let _ = writeln!(s, "anova skipped: {note}");
        }
        (None, None) => {}
    }
    s
}

pub fn eval(ctx: &Context, a: &EvalArgs) -> Result<(), CliError> {
    let gates = Gate::parse_list(&a.gates)?;
    let mut flags = Vec::new();
    if let Some(s) = a.seed {
        flags.push(("eval.seed", json!(s)));
    }
    if let Some(p) = &a.priors {
        flags.push(("eval.prior_mode", json!(p)));
    }
    let mut run = ctx.run("eval", flags)?.arg("gates", &gates);
    let d = load(&mut run, &a.data)?;
    let models = load_models(&mut run, &a.models)?;
    let report = run_gated_eval(&d, &models, &gates, &run.cfg.eval)?;
    write(&a.out.join("report.json"), &run.json(&report))?;
    write(&a.out.join("rows.csv"), &run.with_header(&report.rows_csv()))?;
    run.write_record_in(&a.out)?;
    print!("{}", summary_table(&report));
    Ok(())
}
