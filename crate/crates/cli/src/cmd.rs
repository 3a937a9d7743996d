use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use grammage_core::eval::{
    self, compare_learners, cross_validate, evaluate, metrics, render_normalized, stratified_split, ComparisonRow,
};
use grammage_core::learners::{BoostParams, ForestParams, LearnerSpec, TreeParams};
use grammage_core::outliers::filter_outliers;
use grammage_core::persist::{load_model, save_model};
use grammage_core::synthgen::generate_with_log;
use grammage_core::{class_counts, parse_dataset, write_dataset, Dataset, GeneratorConfig, SavedModel};
use grammage_plcsim::{default_addr, now_ms, run_server, ServerConfig, SimState, TagClient, Tick};
use grammage_predictor::{poll_cycle, Cursor, RollRecord, ServiceConfig, Store};
use serde_json::json;

use crate::{
    CompareArgs, Command, CvArgs, EvalArgs, FilterArgs, GenArgs, Learner, LearnerArgs, PredictOnceArgs, ServeArgs,
    SimulateArgs, SplitArgs, TrainArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Filter(a) => filter(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Compare(a) => compare(a),
        Command::Cv(a) => cv(a),
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::PredictOnce(a) => predict_once(a),
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dataset(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_config(path: Option<&Path>) -> Result<GeneratorConfig> {
    match path {
        None => Ok(GeneratorConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GeneratorConfig::from_kv(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn counts_json(ds: &Dataset) -> serde_json::Value {
    class_counts(ds)
        .into_iter()
        .map(|(c, n)| (c.to_string(), json!(n)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg = read_config(a.config.as_deref())?;
    // explicit flags win over the file
    cfg.n_instances = a.n.unwrap_or(cfg.n_instances);
    cfg.outlier_rate = a.outlier_rate.unwrap_or(cfg.outlier_rate);
    cfg.label_noise_rate = a.label_noise.unwrap_or(cfg.label_noise_rate);
    cfg.sensor_noise_sigma = a.sigma.unwrap_or(cfg.sensor_noise_sigma);
    cfg.seed = a.seed;
    let (ds, log): (Dataset, _) = generate_with_log(&cfg)?;
    if let Some(p) = &a.write_config {
        write_file(p, cfg.to_kv())?;
    }
    let summary = json!({
        "rows": ds.len(),
        "outliers": log.outlier_rows.len(),
        "label_noise": log.label_noise_rows.len(),
        "classes": counts_json(&ds),
    });
    match &a.output {
        Some(p) => {
            write_file(p, write_dataset(&ds))?;
            if a.json {
                println!("{summary}");
            } else {
                println!(
                    "wrote {} rows to {} ({} gross faults, {} label flips)",
                    ds.len(),
                    p.display(),
                    log.outlier_rows.len(),
                    log.label_noise_rows.len()
                );
            }
        }
        None => {
            print!("{}", write_dataset(&ds));
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn filter(a: FilterArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let split = filter_outliers(&ds, a.contamination)?;
    write_file(&a.inliers, write_dataset(&split.inliers))?;
    write_file(&a.outliers, write_dataset(&split.outliers))?;
    println!(
        "{}",
        json!({"total": ds.len(), "inliers": split.inliers.len(), "outliers": split.outliers.len()})
    );
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let (train, test) = stratified_split(&ds, a.ratio, a.seed)?;
    write_file(&a.train, write_dataset(&train))?;
    write_file(&a.test, write_dataset(&test))?;
    if a.json {
        println!("{}", json!({"total": ds.len(), "train": train.len(), "test": test.len()}));
    } else {
        println!("total {} train {} test {}", ds.len(), train.len(), test.len());
    }
    Ok(())
}

impl Learner {
    fn name(self) -> &'static str {
        match self {
            Learner::Tree => "tree",
            Learner::Forest => "forest",
            Learner::Adaboost => "adaboost",
            Learner::Knn => "knn",
        }
    }
}

impl LearnerArgs {
    fn spec(&self) -> LearnerSpec {
        match self.learner {
            Learner::Tree => {
                let d = TreeParams::default();
                LearnerSpec::Tree(TreeParams {
                    max_depth: self.depth.unwrap_or(d.max_depth),
                    features_per_split: self.features.unwrap_or(d.features_per_split),
                })
            }
            Learner::Forest => LearnerSpec::Forest(self.forest(ForestParams::default())),
            Learner::Adaboost => LearnerSpec::Adaboost(BoostParams {
                n_stages: self.stages,
                learning_rate: self.lr,
                base: self.forest(ForestParams::boost_base()),
            }),
            Learner::Knn => LearnerSpec::Knn { k: self.k },
        }
    }

    fn forest(&self, d: ForestParams) -> ForestParams {
        ForestParams {
            n_trees: self.trees.unwrap_or(d.n_trees),
            max_depth: self.depth.unwrap_or(d.max_depth),
            features_per_split: self.features.unwrap_or(d.features_per_split),
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let (ds, excluded) = if a.keep_nonstandard {
        (ds, 0)
    } else {
        ds.without_nonstandard()
    };
    let spec = a.learner.spec();
    let model = spec.fit(&ds, a.seed)?;
    let report = metrics(&evaluate(&model, &ds)?)?;
    let warnings = match &model {
        grammage_core::learners::TrainedModel::Boost(b) => b.warnings.clone(),
        _ => Vec::new(),
    };
    let bytes = save_model(&SavedModel {
        model,
        seed: a.seed,
        metrics: Some(report.clone()),
    })?;
    write_file(&a.output, bytes)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if a.json {
        println!(
            "{}",
            json!({
                "learner": spec.name(),
                "rows": ds.len(),
                "excluded_nonstandard": excluded,
                "training_ca": report.accuracy,
                "output": a.output.display().to_string(),
            })
        );
    } else {
        println!(
            "trained {} on {} rows ({} nonstandard rows excluded), training CA {:.4}, saved to {}",
            spec.name(),
            ds.len(),
            excluded,
            report.accuracy,
            a.output.display()
        );
    }
    Ok(())
}

fn load(path: &Path) -> Result<SavedModel> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_model(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let saved = load(&a.model)?;
    let ds = read_dataset(&a.input)?;
    let cm = evaluate(&saved.model, &ds)?;
    let row = ComparisonRow::from_confusion(saved.model.kind(), &cm)?;
    if a.json {
        println!("{}", serde_json::to_string(&row)?);
    } else {
        let table = eval::Comparison {
            classes: cm.classes.clone(),
            train_size: 0,
            test_size: ds.len(),
            rows: vec![row],
            winner_normalized: None,
        };
        print!("{}\n{}", table.render_table(), render_normalized(&cm));
    }
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let names: Vec<&str> = a.learners.iter().map(|l| l.name()).collect();
    let specs: Vec<LearnerSpec> = LearnerSpec::defaults()
        .into_iter()
        .filter(|s| names.contains(&s.name()))
        .collect();
    let c = compare_learners(&ds, &specs, a.seed)?;
    if a.json {
        println!("{}", serde_json::to_string(&c)?);
        return Ok(());
    }
    println!("train {} test {}", c.train_size, c.test_size);
    print!("{}", c.render_table());
    if let Some(best) = c.rows.first().filter(|r| r.error.is_none()) {
        let cm = eval::ConfusionMatrix {
            classes: c.classes.clone(),
            counts: best.confusion.clone(),
        };
        print!("\n{} (column-normalised)\n{}", best.learner, render_normalized(&cm));
    }
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let ds = read_dataset(&a.input)?;
    let spec = a.learner.spec();
    let r = cross_validate(&spec, &ds, a.folds, a.seed)?;
    if a.json {
        println!("{}", serde_json::to_string(&r)?);
    } else {
        for (i, f) in r.folds.iter().enumerate() {
            println!("fold {:>2} CA {:.4}", i + 1, f.accuracy);
        }
        println!("{} {}-fold CA {:.4} ± {:.4}", spec.name(), a.folds, r.mean_ca, r.std_ca);
    }
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn init_logging() {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).with_target(false).try_init();
}

fn simulate(a: SimulateArgs) -> Result<()> {
    init_logging();
    let mut cfg = read_config(a.config.as_deref())?;
    cfg.seed = a.seed;
    let state = SimState::new(cfg, a.fault_rate, now_ms())?;
    let tick = if a.manual { Tick::Manual } else { Tick::Every(a.tick) };
    let listen = a.listen.unwrap_or_else(default_addr);
    runtime()?.block_on(async move {
        let handle = run_server(ServerConfig { listen, tick }, state).await?;
        println!("simulator listening on {}", handle.local_addr());
        tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
        handle.shutdown().await;
        Ok(())
    })
}

fn serve(a: ServeArgs) -> Result<()> {
    init_logging();
    let saved = load(&a.model)?;
    let cfg = ServiceConfig {
        sim_addr: a.sim.unwrap_or_else(default_addr),
        listen: a.listen,
        store_path: Some(a.store),
        poll_ms: a.poll_ms,
    };
    runtime()?.block_on(async move {
        let handle = grammage_predictor::serve(saved.model, cfg).await?;
        println!("predictor listening on http://{}", handle.local_addr());
        tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
        handle.shutdown().await;
        Ok(())
    })
}

pub const PREDICT_HEADER: &str = "diameter width weight predicted_grammage manual_grammage";

fn listing_line(r: &RollRecord) -> String {
    let [d, w, m] = r.measurement.features();
    let predicted = r.predicted.map_or_else(|| "FAULT".to_string(), |c| c.to_string());
    let manual = r.manual.map_or_else(|| "-".to_string(), |c| c.to_string());
    format!("{d} {w} {m} {predicted} {manual}")
}

fn predict_once(a: PredictOnceArgs) -> Result<()> {
    let saved = load(&a.model)?;
    let addr = a.sim.unwrap_or_else(default_addr);
    let record = runtime()?.block_on(async {
        let mut client = TagClient::connect(addr.as_str())
            .await
            .with_context(|| format!("connecting to simulator at {addr}"))?;
        let mut store = Store::in_memory();
        let mut cursor = Cursor::default();
        poll_cycle(&mut client, &saved.model, &mut store, &mut cursor, now_ms())
            .await
            .context("polling the simulator")
    })?;
    let Some(r) = record else {
        bail!("no roll on the tags yet (roll counter is 0)");
    };
    if a.json {
        println!("{}", serde_json::to_string(&r)?);
    } else {
        println!("{PREDICT_HEADER}");
        println!("{}", listing_line(&r));
    }
    Ok(())
}
