use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nbv_core::closed_loop::{evaluate, sig6, NetworkPolicy, OraclePolicy, Policy, RandomPolicy};
use nbv_core::net::{self, EpochStats};
use nbv_core::oracle::{generate_runs, Scenario, VisitedSet};
use nbv_core::persistence::{
    atomic_write, load_weights, read_dataset, read_views, write_dataset, write_views, write_weights, Dataset, Manifest,
};
use nbv_core::scene::{generate_view_sphere, strided_subset, ObjectSpec, PointCloud, ViewSet, ViewSetKind};

use crate::config::Config;
use crate::outputs::Outputs;
use crate::{Common, EvalOracleArgs, GenDatasetArgs, GenViewsArgs, PolicyKind, ReconstructArgs, TrainArgs};

fn base_config(common: &Common, preset: Option<Config>) -> Result<Config> {
    match preset {
        Some(c) => Ok(c),
        None => Config::load(common.config.as_deref()),
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn manifest_for(command: &str, cfg: &Config) -> Manifest {
    let mut m = Manifest::new();
    m.set("toolkit.version", nbv_core::VERSION);
    m.set("command", command);
    cfg.echo(&mut m);
    m
}

fn set_arg(m: &mut Manifest, flag: &str, v: impl std::fmt::Display) {
    m.set(&format!("arg.{flag}"), v);
}

fn set_path(m: &mut Manifest, flag: &str, p: &Path) {
    set_arg(m, flag, p.display());
}

/// A view count (Fibonacci sphere per the scene config) or a views CSV.
fn view_source(spec: Option<&str>, cfg: &Config, kind: ViewSetKind) -> Result<ViewSet> {
    let s = &cfg.scene;
    match spec {
        None => Ok(generate_view_sphere(s.classes, s.view_radius, s.hemisphere)?.with_kind(kind)),
        Some(t) => match t.parse::<usize>() {
            Ok(n) => Ok(generate_view_sphere(n, s.view_radius, s.hemisphere)?.with_kind(kind)),
            Err(_) => Ok(read_views(Path::new(t), kind).with_context(|| format!("reading views {t}"))?),
        },
    }
}

fn objects(list: &str, cfg: &Config) -> Result<Vec<ObjectSpec>> {
    let mut objs = ObjectSpec::parse_list(list)?;
    ensure!(!objs.is_empty(), "no objects given");
    for o in &mut objs {
        o.scale = cfg.scene.object_scale;
    }
    Ok(objs)
}

fn scenario(obj: &ObjectSpec, views: &ViewSet, cfg: &Config) -> Result<Scenario> {
    let mesh = obj.mesh()?;
    Scenario::build(&mesh, views.clone(), &cfg.recon).with_context(|| format!("preparing {obj}"))
}

fn write_manifest(m: &Manifest, path: &Path, out: &mut Outputs) -> Result<()> {
    m.write(path)?;
    out.track(path);
    Ok(())
}

pub fn gen_views(a: &GenViewsArgs, preset: Option<Config>) -> Result<()> {
    let mut cfg = base_config(&a.common, preset)?;
    if let Some(r) = a.radius {
        cfg.scene.view_radius = r;
    }
    cfg.validate()?;
    let views = generate_view_sphere(a.count, cfg.scene.view_radius, a.hemisphere)?;
    let mut out = Outputs::new();
    write_views(&a.out, &views)?;
    out.track(&a.out);

    let mut m = manifest_for("gen-views", &cfg);
    set_arg(&mut m, "count", a.count);
    set_arg(&mut m, "hemisphere", a.hemisphere);
    set_path(&mut m, "out", &a.out);
    let mpath = a.common.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest"));
    write_manifest(&m, &mpath, &mut out)?;
    println!("wrote {} views to {}", views.len(), a.out.display());
    out.commit();
    Ok(())
}

pub fn gen_dataset(a: &GenDatasetArgs, preset: Option<Config>) -> Result<()> {
    let mut cfg = base_config(&a.common, preset)?;
    let r = &mut cfg.recon;
    if let Some(v) = a.scov {
        r.s_cov = v;
    }
    if let Some(v) = a.max_iter {
        r.max_iter = v;
    }
    if let Some(v) = a.gap {
        r.metric.gap = v;
    }
    if let Some(v) = a.overlap {
        r.metric.min_overlap = v;
    }
    if let Some(v) = a.initial_views {
        r.initial_views = v;
    }
    cfg.validate()?;
    let objs = objects(&a.objects, &cfg)?;
    let search = view_source(a.views.as_deref(), &cfg, ViewSetKind::SearchSpace)?;
    let classes = view_source(a.classes.as_deref(), &cfg, ViewSetKind::ClassSet)?;
    let initial = strided_subset(search.len(), cfg.recon.initial_views);

    let mut examples = Vec::new();
    let mut iterations = Vec::new();
    for (id, obj) in objs.iter().enumerate() {
        let sc = scenario(obj, &search, &cfg)?;
        for run in generate_runs(&sc, &classes, id as u32, &initial)? {
            println!(
                "{obj} run {}: {} iterations, coverage {}, {}",
                run.initial_view,
                run.views.len(),
                sig6(run.coverage.last().copied().unwrap_or(0.0)),
                run.end.name()
            );
            iterations.push(run.views.len());
            examples.extend(run.examples);
        }
    }
    let n = examples.len();
    let dataset = Dataset::new(cfg.recon.grid_edge, classes.len(), examples)?;
    let mut out = Outputs::new();
    write_dataset(&a.out, &dataset)?;
    out.track(&a.out);

    let mut m = manifest_for("gen-dataset", &cfg);
    set_arg(&mut m, "objects", &a.objects);
    if let Some(v) = &a.views {
        set_arg(&mut m, "views", v);
    }
    if let Some(v) = &a.classes {
        set_arg(&mut m, "classes", v);
    }
    set_path(&mut m, "out", &a.out);
    for (i, o) in objs.iter().enumerate() {
        m.set(&format!("object.{i}"), o);
    }
    m.set("result.examples", n);
    let mpath = a.common.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest"));
    write_manifest(&m, &mpath, &mut out)?;
    let max = iterations.iter().max().copied().unwrap_or(0);
    println!(
        "{n} examples from {} objects x {} initial views; longest run {max} iterations",
        objs.len(),
        initial.len()
    );
    out.commit();
    Ok(())
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,train_acc,test_acc,loss\n");
    for h in history {
        let _ = writeln!(s, "{},{},{},{}", h.epoch, sig6(h.train_acc), sig6(h.test_acc), sig6(h.loss));
    }
    s
}

pub fn train(a: &TrainArgs, preset: Option<Config>) -> Result<()> {
    let mut cfg = base_config(&a.common, preset)?;
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if let Some(v) = a.batch {
        t.batch_size = v;
    }
    if let Some(v) = a.keep_prob {
        t.keep_prob = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    cfg.validate()?;
    let data = read_dataset(&a.dataset).with_context(|| format!("reading {}", a.dataset.display()))?;
    let outcome = net::train(&data.examples, data.classes, a.arch, &cfg.train, |s| {
        println!("epoch {} train {} test {} loss {}", s.epoch, sig6(s.train_acc), sig6(s.test_acc), sig6(s.loss))
    })?;

    let mut out = Outputs::new();
    write_weights(&a.out, &outcome.params)?;
    out.track(&a.out);
    let hpath = a.history.clone().unwrap_or_else(|| with_suffix(&a.out, ".history.csv"));
    atomic_write(&hpath, history_csv(&outcome.history).as_bytes())?;
    out.track(&hpath);

    let mut m = manifest_for("train", &cfg);
    set_path(&mut m, "dataset", &a.dataset);
    set_arg(&mut m, "arch", a.arch);
    set_path(&mut m, "out", &a.out);
    if let Some(h) = &a.history {
        set_path(&mut m, "history", h);
    }
    m.set("result.examples", data.examples.len());
    m.set("result.test_examples", outcome.test_indices.len());
    m.set("result.best_epoch", outcome.best_epoch.map_or_else(|| "none".to_string(), |e| e.to_string()));
    let mpath = a.common.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest"));
    write_manifest(&m, &mpath, &mut out)?;
    if let Some(e) = outcome.best_epoch {
        println!("best held-out accuracy {} at epoch {e}", sig6(outcome.history[e - 1].test_acc));
    }
    out.commit();
    Ok(())
}

fn file_stem(object: &str) -> String {
    object.replace([':', '/', '\\'], "-")
}

pub fn reconstruct(a: &ReconstructArgs, preset: Option<Config>) -> Result<()> {
    let cfg = base_config(&a.common, preset)?;
    cfg.validate()?;
    let objs = objects(&a.object, &cfg)?;
    let classes = view_source(a.classes.as_deref(), &cfg, ViewSetKind::ClassSet)?;
    let search = match &a.views {
        Some(_) => view_source(a.views.as_deref(), &cfg, ViewSetKind::SearchSpace)?,
        None => classes.clone().with_kind(ViewSetKind::SearchSpace),
    };
    let params = match (a.policy, &a.weights) {
        (PolicyKind::Network, None) => bail!("--weights is required for the network policy"),
        (PolicyKind::Network, Some(w)) => {
            let p = load_weights(w, a.arch).with_context(|| format!("loading {}", w.display()))?;
            let edge = cfg.recon.grid_edge;
            ensure!(
                p.spec().input == [1, edge, edge, edge],
                "weights expect input {:?}, grids are {edge}^3",
                p.spec().input
            );
            ensure!(
                p.classes() == classes.len(),
                "weights predict {} classes, the class set has {}",
                p.classes(),
                classes.len()
            );
            Some(p)
        }
        _ => None,
    };
    let network = params.as_ref().map(|p| NetworkPolicy { params: p });
    let policy: &dyn Policy = match a.policy {
        PolicyKind::Network => network.as_ref().expect("loaded above"),
        PolicyKind::Random => &RandomPolicy,
        PolicyKind::Oracle => &OraclePolicy,
    };

    let scenarios =
        objs.iter().map(|o| Ok((o.to_string(), scenario(o, &search, &cfg)?))).collect::<Result<Vec<_>>>()?;
    let (logs, summary) = evaluate(&scenarios, policy, &classes, a.episodes, a.seed)?;

    let mut out = Outputs::new();
    out.dir(&a.out)?;
    for (i, log) in logs.iter().enumerate() {
        let p = a.out.join(format!("{}_{}_{:03}.csv", a.policy.name(), file_stem(&log.object), i % a.episodes));
        atomic_write(&p, log.to_csv().as_bytes())?;
        out.track(&p);
    }
    let sp = a.out.join(format!("{}_summary.csv", a.policy.name()));
    atomic_write(&sp, summary.to_csv().as_bytes())?;
    out.track(&sp);

    let mut m = manifest_for("reconstruct", &cfg);
    set_arg(&mut m, "object", &a.object);
    if let Some(w) = &a.weights {
        set_path(&mut m, "weights", w);
    }
    set_arg(&mut m, "arch", a.arch);
    set_arg(&mut m, "policy", a.policy.name());
    if let Some(v) = &a.classes {
        set_arg(&mut m, "classes", v);
    }
    if let Some(v) = &a.views {
        set_arg(&mut m, "views", v);
    }
    set_arg(&mut m, "episodes", a.episodes);
    set_arg(&mut m, "seed", a.seed);
    set_path(&mut m, "out", &a.out);
    let violations: usize = logs.iter().map(|l| l.constraint_violations(&cfg.recon.metric)).sum();
    m.set("result.constraint_violations", violations);
    let mpath = a.common.manifest.clone().unwrap_or_else(|| a.out.join(format!("{}_manifest.txt", a.policy.name())));
    write_manifest(&m, &mpath, &mut out)?;
    print!("{}", summary.to_csv());
    out.commit();
    Ok(())
}

fn id_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().with_context(|| format!("bad view id {t:?}")))
        .collect()
}

pub fn eval_oracle(a: &EvalOracleArgs, preset: Option<Config>) -> Result<()> {
    let cfg = base_config(&a.common, preset)?;
    cfg.validate()?;
    let objs = objects(&a.object, &cfg)?;
    ensure!(objs.len() == 1, "eval-oracle takes exactly one object");
    let search = view_source(a.views.as_deref(), &cfg, ViewSetKind::SearchSpace)?;
    let sc = scenario(&objs[0], &search, &cfg)?;
    let ids = id_list(&a.integrated)?;
    ensure!(!ids.is_empty(), "--integrated needs at least one view");

    let mut p_acu = PointCloud::empty();
    let mut grid = sc.fresh_grid();
    let mut visited = VisitedSet::new();
    for &v in &ids {
        sc.perceive(v, &mut p_acu, &mut grid)?;
        visited.insert(v);
    }
    let res = sc.next_best_view(&p_acu, &visited, Some(&grid))?;
    let chosen = res.nbv.map(|v| v.id);
    let mut csv = String::from("view_id,overlap,features,delta,visited,collision,feasible,selected\n");
    for c in &res.per_candidate {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            c.view_id,
            sig6(c.overlap),
            c.features,
            sig6(c.delta),
            c.visited as u8,
            c.collision as u8,
            c.feasible as u8,
            (chosen == Some(c.view_id)) as u8
        );
    }
    let mut out = Outputs::new();
    atomic_write(&a.out, csv.as_bytes())?;
    out.track(&a.out);
    let mut m = manifest_for("eval-oracle", &cfg);
    set_arg(&mut m, "object", &a.object);
    if let Some(v) = &a.views {
        set_arg(&mut m, "views", v);
    }
    set_arg(&mut m, "integrated", &a.integrated);
    set_path(&mut m, "out", &a.out);
    let mpath = a.common.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest"));
    write_manifest(&m, &mpath, &mut out)?;
    match chosen {
        Some(v) => println!("next best view {v}, coverage gain {}", sig6(res.delta)),
        None => println!("no feasible view"),
    }
    out.commit();
    Ok(())
}

/// Removes a file if present; used by tests and callers cleaning up.
pub fn remove_if_exists(p: &Path) -> Result<()> {
    match fs::remove_file(p) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(e.into()),
    }
}
