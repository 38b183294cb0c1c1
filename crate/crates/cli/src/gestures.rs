//! Gesture subcommands.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::args::{CheckArgs, ClassifyArgs, EvalArgs, SynthArgs, TrainArgs, TrainOptions};
use crate::run::{at, read_text, Failure, Run};
use gesture::model::{EvalReport, TrainConfig};
use gesture::sensor::Cover;
use gesture::{
    builtin_templates, check_geometry, classify_on_device, evaluate, parse_stream, parse_strokes, segment,
    synth_corpus, train as fit, write_strokes, EvalConfig, GestureModel, SensorGeometry, Stroke, SynthConfig,
    WindowDesign,
};

fn train_config(run: &Run, opts: &TrainOptions, device: String) -> TrainConfig {
    let mut c = TrainConfig::new(run.seed(), device);
    c.epochs = opts.epochs as usize;
    c.learning_rate = opts.learning_rate;
    c.hidden = opts.hidden.map(|h| h as usize);
    c
}

fn read_strokes(path: &std::path::Path) -> Result<Vec<Stroke>, Failure> {
    parse_strokes(&read_text(path)?).map_err(|e| Failure::new("input", format!("{}: {e}", path.display())))
}

pub fn synth(run: &mut Run, a: &SynthArgs) -> Result<Value, Failure> {
    let mut cfg = SynthConfig::new(a.n as usize, a.sigma, run.seed());
    cfg.users = a.users as usize;
    cfg.device = Some(a.device.clone());
    let corpus = synth_corpus(&builtin_templates(), &cfg).map_err(at("synth"))?;
    run.write("strokes.jsonl", write_strokes(&corpus).as_bytes())?;
    run.say(format!("wrote {} strokes", corpus.len()));
    Ok(json!({
        "strokes": corpus.len(),
        "classes": builtin_templates().iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
    }))
}

pub fn train(run: &mut Run, a: &TrainArgs) -> Result<Value, Failure> {
    let data = read_strokes(&a.strokes)?;
    let device = match &a.device {
        Some(d) => d.clone(),
        None => {
            let tags: BTreeSet<&str> = data.iter().filter_map(|s| s.device.as_deref()).collect();
            match (tags.len(), tags.iter().next()) {
                (1, Some(d)) => d.to_string(),
                _ => {
                    return Err(Failure::new(
                        "train",
                        format!("strokes carry {} device tags; name the device with --device", tags.len()),
                    ))
                }
            }
        }
    };
    if let Some(other) = data.iter().filter_map(|s| s.device.as_deref()).find(|d| *d != device) {
        return Err(Failure::new(
            "train",
            format!("stroke from device {other:?} in a training set for {device:?}"),
        ));
    }
    run.progress(format!("training on {} strokes", data.len()));
    let model = fit(&data, &train_config(run, &a.train, device)).map_err(at("train"))?;
    run.write("model.json", model.to_json().as_bytes())?;
    run.say(format!(
        "training accuracy {:.1}%, final loss {:.4}",
        100.0 * model.training.training_accuracy,
        model.training.final_loss
    ));
    Ok(json!({ "classes": model.classes, "training": model.training }))
}

fn table(r: &EvalReport) -> Vec<String> {
    let mut out = vec!["split  train  test  train-acc  test-acc".to_string()];
    for (i, s) in r.splits.iter().enumerate() {
        out.push(format!(
            "{:>5}  {:>5}  {:>4}  {:>8.1}%  {:>7.1}%",
            i + 1,
            s.train_size,
            s.test_size,
            100.0 * s.training_accuracy,
            100.0 * s.accuracy
        ));
    }
    out.push(format!(
        "mean {:.1}%  std {:.1}  min {:.1}%  max {:.1}%",
        100.0 * r.mean_accuracy,
        100.0 * r.std_accuracy,
        100.0 * r.min_accuracy,
        100.0 * r.max_accuracy
    ));
    for (user, acc) in &r.per_user {
        out.push(format!("  {user}: {:.1}%", 100.0 * acc));
    }
    out
}

pub fn eval(run: &mut Run, a: &EvalArgs) -> Result<Value, Failure> {
    let data = if a.corpus == "synth" {
        let mut cfg = SynthConfig::new(a.n as usize, a.sigma, run.seed());
        cfg.device = Some("synthetic".into());
        synth_corpus(&builtin_templates(), &cfg).map_err(at("synth"))?
    } else {
        read_strokes(std::path::Path::new(&a.corpus))?
    };
    let device = data.iter().find_map(|s| s.device.clone()).unwrap_or_else(|| "unspecified".into());
    let mut cfg = EvalConfig::new(run.seed(), device.clone());
    cfg.splits = a.splits as usize;
    cfg.train_fraction = a.train_fraction;
    cfg.train = train_config(run, &a.train, device);
    run.progress(format!("{} splits over {} strokes", cfg.splits, data.len()));
    let report = evaluate(&data, &cfg).map_err(at("eval"))?;
    for line in table(&report) {
        run.say(line);
    }
    serde_json::to_value(&report).map_err(at("export"))
}

pub fn classify(run: &mut Run, a: &ClassifyArgs) -> Result<Value, Failure> {
    let model = GestureModel::from_json(&read_text(&a.model)?)
        .map_err(|e| Failure::new("input", format!("{}: {e}", a.model.display())))?;
    let strokes = if a.stream {
        let samples = parse_stream(&read_text(&a.strokes)?)
            .map_err(|e| Failure::new("input", format!("{}: {e}", a.strokes.display())))?;
        segment(&samples, a.idle_ms)
    } else {
        read_strokes(&a.strokes)?
    };
    let mut rows = Vec::with_capacity(strokes.len());
    let mut correct = 0;
    let mut labelled = 0;
    for (i, s) in strokes.iter().enumerate() {
        let c = classify_on_device(&model, s, a.device.as_deref()).map_err(at("classify"))?;
        if let Some(l) = &s.label {
            labelled += 1;
            correct += usize::from(*l == c.label);
        }
        run.say(format!("{i:>4}  {:<12} {:.3}", c.label, c.confidence));
        rows.push(json!({
            "index": i,
            "start_ms": s.samples[0].t,
            "label": c.label,
            "confidence": c.confidence,
            "probabilities": c.probabilities,
            "expected": s.label,
        }));
    }
    let accuracy = (labelled > 0).then(|| correct as f64 / labelled as f64);
    if let Some(acc) = accuracy {
        run.say(format!("accuracy on labelled strokes {:.1}%", 100.0 * acc));
    }
    Ok(json!({ "classes": model.classes, "strokes": rows, "accuracy": accuracy }))
}

pub fn check(run: &mut Run, a: &CheckArgs) -> Result<Value, Failure> {
    let sensor = match &a.sensor {
        Some(p) => serde_json::from_str::<SensorGeometry>(&read_text(p)?)
            .map_err(|e| Failure::new("input", format!("{}: {e}", p.display())))?,
        None => SensorGeometry::default(),
    };
    sensor.check().map_err(at("input"))?;
    let design = WindowDesign {
        hole_diameter: a.hole,
        cover: Cover {
            present: a.cover.is_some(),
            thickness: a.cover.unwrap_or(0.0),
        },
        standoff: a.standoff,
    };
    let violations = check_geometry(&design, &sensor);
    for v in &violations {
        run.say(format!("- {}", v.explanation()));
    }
    if violations.is_empty() {
        run.say("design is within the sensor's limits");
        Ok(json!({ "sensor": sensor, "design": design, "violations": violations }))
    } else {
        let detail = json!({
            "sensor": sensor,
            "design": design,
            "violations": serde_json::to_value(&violations).map_err(at("export"))?,
        });
        Err(Failure::new(
            "check",
            violations.iter().map(|v| v.explanation()).collect::<Vec<_>>().join("; "),
        )
        .with_detail(detail))
    }
}
