//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test --release -p gil-cli --test acceptance`;
//! criterion numbers after `--` restrict the run (`-- 1 2 11`).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use gil_core::config::TrainConfig;
use gil_core::data::{
    generate_spring_dataset, hamiltonian, simulate, spring_forces, spring_potential,
    split_dataset, GenerateConfig, Integrator, ParticleSystem, Task,
};
use gil_core::geometry::{add, mat_vec, rotation_from_uniform};
use gil_core::interactions::{
    efficiency_check, equivalence_check, exact_interaction, f_m_curve, mc_interaction_graph,
    mc_interaction_graph_with, normality_test, ModelGame, Sampling, TabulatedGame,
};
use gil_core::isgr::{isgr_step, updated_k, Baseline, IsgrState};
use gil_core::models::{GraphBatch, Mode};
use gil_core::tensor::{Idx, Tape, Tensor, Var};
use gil_core::train::{record_graph, train};
use gil_core::{
    Construction, GeometricGraph, GraphView, Head, Level, Model, ModelConfig,
    StrengthProfile, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use std::rc::Rc;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn random_table(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn game(n: usize, table: Vec<f64>) -> TabulatedGame {
    TabulatedGame::new(n, table).expect("table covers all coalitions")
}

fn swap_members(mask: usize, a: usize, b: usize) -> usize {
    let (ia, ib) = (mask >> a & 1, mask >> b & 1);
    let cleared = mask & !(1 << a) & !(1 << b);
    cleared | ia << b | ib << a
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut lin, mut null, mut comm, mut sym, mut eff) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for n in 4..=8 {
        for _ in 0..10 {
            count += 1;
            let tf = random_table(n, &mut rng);
            let tg = random_table(n, &mut rng);
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let f = game(n, tf.clone());
            let g = game(n, tg.clone());
            let h = game(n, tf.iter().zip(&tg).map(|(x, y)| a * x + b * y).collect());
            let d = rng.random_range(0..n);
            let dummy = game(n, (0..1usize << n).map(|s| tf[s & !(1 << d)]).collect());
            let (p, q) = (0, n - 1);
            let symmetric = game(n, (0..1usize << n).map(|s| tf[s] + tf[swap_members(s, p, q)]).collect());
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for m in 3..=n {
                        let fij = exact_interaction(&f, i, j, m).unwrap();
                        let gij = exact_interaction(&g, i, j, m).unwrap();
                        let hij = exact_interaction(&h, i, j, m).unwrap();
                        lin = lin.max((hij - (a * fij + b * gij)).abs());
                        comm = comm.max((fij - exact_interaction(&f, j, i, m).unwrap()).abs());
                        if i == d {
                            null = null.max(exact_interaction(&dummy, i, j, m).unwrap().abs());
                        }
                        if i == p && j != q {
                            let ip = exact_interaction(&symmetric, p, j, m).unwrap();
                            let iq = exact_interaction(&symmetric, q, j, m).unwrap();
                            sym = sym.max((ip - iq).abs());
                        }
                    }
                }
            }
            eff = eff.max(efficiency_check(&f).unwrap());
        }
    }
    let pass = lin <= 1e-12 && null <= 1e-12 && comm <= 1e-12 && sym <= 1e-12 && eff <= 1e-9;
    Outcome::new(
        pass,
        format!(
            "{count} games: linearity {lin:.1e}, nullity {null:.1e}, commutativity {comm:.1e}, symmetry {sym:.1e}, efficiency {eff:.1e}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 8;
    let mut worst = 0.0f64;
    let mut cells = 0;
    for _ in 0..5 {
        let f = game(n, random_table(n, &mut rng));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for m in 0..=n - 2 {
                    let (excl, incl) = equivalence_check(&f, i, j, m).unwrap();
                    worst = worst.max((excl - incl).abs());
                    cells += 1;
                }
            }
        }
    }
    Outcome::new(worst <= 1e-12, format!("{cells} cells, max |I - I'| = {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let ds = generate_spring_dataset(&GenerateConfig {
        systems: 20,
        steps: 20,
        task: Task::Hamiltonian,
        seed: 3,
        ..GenerateConfig::default()
    })
    .unwrap();
    let records: Vec<_> = ds.records.iter().map(|r| r.to_graph_record()).collect();
    let split = split_dataset(&records, 3);
    let model = Model::new(ModelConfig::egnn(Head::GraphScalar, 2, 3)).unwrap();
    let cfg = TrainConfig { epochs: 30, seed: 3, ..TrainConfig::default() };
    let trained = train(model, &split, &cfg, None).unwrap().model;

    let budget = 256;
    let (mut auto_ok, mut forced_ok, mut total) = (0usize, 0usize, 0usize);
    for (g, rec) in split.test.iter().take(4).enumerate() {
        let graph = record_graph(rec, Construction::Knn(8)).unwrap();
        let f = TabulatedGame::tabulate(&ModelGame::new(&trained, &graph).unwrap()).unwrap();
        let scale = f.table()[1..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let slack = 1e-12 * scale;
        for i in 0..10 {
            for j in i + 1..10 {
                for m in 3..=10 {
                    let exact = exact_interaction(&f, i, j, m).unwrap();
                    let seed = (g * 10_000 + i * 1000 + j * 100 + m) as u64;
                    let auto = mc_interaction_graph(&f, i, j, m, budget, seed).unwrap();
                    let forced =
                        mc_interaction_graph_with(&f, i, j, m, budget, seed, Sampling::Always).unwrap();
                    auto_ok += usize::from((auto.value - exact).abs() <= 3.0 * auto.stderr + slack);
                    forced_ok +=
                        usize::from((forced.value - exact).abs() <= 3.0 * forced.stderr + slack);
                    total += 1;
                }
            }
        }
    }
    let auto_rate = auto_ok as f64 / total as f64;
    let forced_rate = forced_ok as f64 / total as f64;
    Outcome::new(
        auto_rate >= 0.99 && forced_rate >= 0.99,
        format!(
            "{total} cells at budget {budget}: {:.2}% within 3 stderr (exact fallback for small context sets), {:.2}% with forced sampling",
            100.0 * auto_rate,
            100.0 * forced_rate
        ),
    )
}

fn criterion_4() -> Outcome {
    let c10 = f_m_curve(10, false).unwrap();
    let at = |c: &[gil_core::interactions::FmPoint], m: usize| c.iter().find(|p| p.m == m).unwrap().value;
    let e2 = (at(&c10, 2) - 0.1).abs();
    let e10 = (at(&c10, 10) - 1.0 / 90.0).abs();
    let c50 = f_m_curve(50, false).unwrap();
    let min = c50.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    let (lo, hi) = (at(&c50, 2) / min, at(&c50, 50) / min);
    Outcome::new(
        e2 <= 1e-12 && e10 <= 1e-12 && lo > 10.0 && hi > 10.0,
        format!("n=10: |F(2)-0.1| = {e2:.1e}, |F(10)-1/90| = {e10:.1e}; n=50 endpoints / interior min = {lo:.3e}, {hi:.3e}"),
    )
}

fn random_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::from_shape_fn((r, c), |_| rng.random_range(-1.5..1.5))
}

type UnaryOp = dyn for<'t> Fn(&'t Tape, Var<'t>) -> Var<'t>;

/// Worst relative error of d/dx sum(w * op(x)) against central differences.
fn primitive_error(op: &UnaryOp, shape: (usize, usize), seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = random_tensor(&mut rng, shape.0, shape.1);
    let out_shape = {
        let t = Tape::new();
        op(&t, t.leaf(x0.clone())).shape()
    };
    let w = random_tensor(&mut rng, out_shape.0, out_shape.1);
    let eval = |x: &Tensor| {
        let t = Tape::new();
        op(&t, t.leaf(x.clone())).mul(t.constant(w.clone())).sum().item()
    };
    let t = Tape::new();
    let x = t.leaf(x0.clone());
    let g = t.grad(op(&t, x).mul(t.constant(w.clone())).sum(), &[x]).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (idx, an) in g[0].indexed_iter() {
        let mut p = x0.clone();
        p[idx] += h;
        let mut m = x0.clone();
        m[idx] -= h;
        let fd = (eval(&p) - eval(&m)) / (2.0 * h);
        worst = worst.max((an - fd).abs() / fd.abs().max(1e-3));
    }
    worst
}

fn model_loss(m: &Model, params: &[Tensor], batch: &GraphBatch, target: &Tensor) -> f64 {
    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let d = m.forward(&tape, &vars, batch, Mode::Eval).sub(tape.constant(target.clone()));
    d.mul(d).mean().item()
}

fn random_graph(n: usize, k: usize, rng: &mut ChaCha8Rng) -> GeometricGraph {
    let coords: Vec<Vec3> = (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let features = (0..n).map(|_| vec![1.0, rng.random_range(0.0..1.0)]).collect();
    GeometricGraph::from_construction((0..n).collect(), coords, features, Construction::Knn(k)).unwrap()
}

fn criterion_5() -> Outcome {
    let idx: Idx = Rc::new(vec![2, 0, 2, 1, 3]);
    let seg: Idx = Rc::new(vec![0, 0, 1, 1, 1, 2]);
    let fixed = |r: usize, c: usize| Tensor::from_shape_fn((r, c), |(i, j)| (i as f64 - 0.7 * j as f64) * 0.3);
    let ops: Vec<(&str, (usize, usize), Box<UnaryOp>)> = vec![
        ("add", (3, 2), Box::new(|_, x| x.add(x.scale(0.5)))),
        ("sub", (3, 2), Box::new(|_, x| x.sub(x.silu()))),
        ("mul", (3, 3), Box::new(|_, x| x.mul(x))),
        ("scale", (2, 2), Box::new(|_, x| x.scale(-2.5))),
        ("add_row", (1, 3), Box::new(move |t, b| t.constant(fixed(4, 3)).add_row(b))),
        ("mul_col", (4, 1), Box::new(move |t, c| t.constant(fixed(4, 3)).mul_col(c))),
        ("matmul", (3, 4), Box::new(move |t, x| x.matmul(t.constant(fixed(4, 2))))),
        ("silu", (4, 3), Box::new(|_, x| x.silu())),
        ("relu", (4, 3), Box::new(|_, x| x.relu())),
        ("abs", (4, 3), Box::new(|_, x| x.abs())),
        ("exp", (3, 2), Box::new(|_, x| x.exp())),
        ("sum", (3, 4), Box::new(|_, x| x.sum())),
        ("mean", (3, 4), Box::new(|_, x| x.mean())),
        ("row_sum", (5, 3), Box::new(|_, x| x.row_sum())),
        ("row_norm", (5, 3), Box::new(|_, x| x.row_norm())),
        ("gather", (4, 2), Box::new(move |_, x| x.gather(&idx))),
        ("scatter_add", (5, 2), {
            let idx: Idx = Rc::new(vec![2, 0, 2, 1, 3]);
            Box::new(move |_, x| x.scatter_add(&idx, 4))
        }),
        ("concat_cols", (3, 2), Box::new(|_, x| Var::concat_cols(&[x, x.silu()]))),
        ("slice_cols", (3, 5), Box::new(|_, x| x.slice_cols(1, 4))),
        ("slice_rows", (5, 3), Box::new(|_, x| x.slice_rows(1, 4))),
        ("segment_softmax", (6, 3), Box::new(move |_, x| x.segment_softmax(&seg))),
    ];
    let mut worst_prim = (0.0f64, "");
    for (k, (name, shape, op)) in ops.iter().enumerate() {
        let e = primitive_error(op.as_ref(), *shape, k as u64 + 50);
        if e > worst_prim.0 {
            worst_prim = (e, name);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let graphs = [random_graph(7, 4, &mut rng), random_graph(6, 3, &mut rng)];
    let views: Vec<&dyn GraphView> = graphs.iter().map(|g| g as &dyn GraphView).collect();
    let mut worst_model = 0.0f64;
    let mut checked = 0;
    for (head, cfg) in [
        (Head::GraphScalar, ModelConfig::egnn(Head::GraphScalar, 2, 5)),
        (Head::NodeVector, ModelConfig::egnn(Head::NodeVector, 2, 6)),
        (Head::GraphScalar, ModelConfig { dropout: 0.0, ..ModelConfig::attention(Head::GraphScalar, 2, 7) }),
    ] {
        assert_eq!(cfg.depth, 3);
        let m = Model::new(cfg).unwrap();
        let batch = m.batch(&views);
        let shape = if head == Head::GraphScalar { (2, 1) } else { (13, 3) };
        let target = random_tensor(&mut rng, shape.0, shape.1);
        let tape = Tape::new();
        let vars: Vec<_> = m.params().iter().map(|p| tape.leaf(p.clone())).collect();
        let d = m.forward(&tape, &vars, &batch, Mode::Eval).sub(tape.constant(target.clone()));
        let grads = tape.grad(d.mul(d).mean(), &vars).unwrap();
        for _ in 0..60 {
            let p = rng.random_range(0..m.params().len());
            let (r, c) = m.params()[p].dim();
            let (r, c) = (rng.random_range(0..r), rng.random_range(0..c));
            let h = 1e-5;
            let mut plus = m.params().to_vec();
            plus[p][[r, c]] += h;
            let mut minus = m.params().to_vec();
            minus[p][[r, c]] -= h;
            let fd = (model_loss(&m, &plus, &batch, &target) - model_loss(&m, &minus, &batch, &target)) / (2.0 * h);
            let an = grads[p][[r, c]];
            worst_model = worst_model.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            checked += 1;
        }
    }
    Outcome::new(
        worst_prim.0 <= 1e-4 && worst_model <= 1e-4,
        format!(
            "{} primitives, worst rel. error {:.1e} ({}); 3-layer model loss, {checked} entries, worst {worst_model:.1e}",
            ops.len(),
            worst_prim.0,
            worst_prim.1
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = random_graph(10, 6, &mut rng);
    let scalar = Model::new(ModelConfig::egnn(Head::GraphScalar, 2, 6)).unwrap();
    let vector = Model::new(ModelConfig::egnn(Head::NodeVector, 2, 7)).unwrap();
    let y0 = scalar.predict_graph(&g).unwrap();
    let v0 = vector.predict_node(&g).unwrap();
    let (mut inv, mut eqv) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let rot = rotation_from_uniform(rng.random(), rng.random(), rng.random());
        let shift: Vec3 = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let coords: Vec<Vec3> = g.coords().iter().map(|&x| add(mat_vec(&rot, x), shift)).collect();
        let moved = GeometricGraph::from_construction(
            (0..10).collect(),
            coords,
            g.features().to_vec(),
            Construction::Knn(6),
        )
        .unwrap();
        let y = scalar.predict_graph(&moved).unwrap();
        inv = inv.max((y - y0).abs() / y0.abs().max(1e-12));
        let v = vector.predict_node(&moved).unwrap();
        let vmax = v0.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        for (a, b) in v.iter().zip(&v0) {
            let rb = mat_vec(&rot, *b);
            for c in 0..3 {
                eqv = eqv.max((a[c] - rb[c]).abs() / vmax);
            }
        }
    }
    Outcome::new(
        inv <= 1e-5 && eqv <= 1e-5,
        format!("20 rigid motions: scalar rel. change {inv:.1e}, vector rel. deviation {eqv:.1e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut worst_grad = 0.0f64;
    for seed in 0..20 {
        let sys = ParticleSystem::random(10, 2.0, 0.5, seed).unwrap();
        let f = spring_forces(&sys).unwrap();
        for c in 0..3 {
            worst_sum = worst_sum.max(f.iter().map(|v| v[c]).sum::<f64>().abs());
        }
        let h = 1e-6;
        for i in 0..10 {
            for c in 0..3 {
                let mut p = sys.positions.clone();
                p[i][c] += h;
                let mut m = sys.positions.clone();
                m[i][c] -= h;
                let fd = -(spring_potential(&p) - spring_potential(&m)) / (2.0 * h);
                worst_grad = worst_grad.max((fd - f[i][c]).abs() / f[i][c].abs().max(1e-3));
            }
        }
    }
    let two = ParticleSystem::new(
        vec![[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]],
        vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        vec![1.0, 1.0],
    )
    .unwrap();
    let h0 = hamiltonian(&two).unwrap();
    let traj = simulate(&two, 0.001, 10_000, Integrator::VelocityVerlet).unwrap();
    let drift = traj
        .iter()
        .map(|s| (hamiltonian(s).unwrap() - h0).abs() / h0)
        .fold(0.0f64, f64::max);
    Outcome::new(
        worst_sum <= 1e-12 && worst_grad <= 1e-6 && drift <= 1e-3,
        format!("|sum F| {worst_sum:.1e}; force vs -grad U rel. {worst_grad:.1e}; energy drift {drift:.1e} over 1e4 steps"),
    )
}

fn uniform_profile(j: Vec<f64>) -> StrengthProfile {
    let n = j.len() + 1;
    StrengthProfile {
        level: Level::Node,
        n,
        orders: (2..=n).collect(),
        stderr: vec![0.0; j.len()],
        raw: j.clone(),
        j,
        graphs: 1,
        pairs: 1,
    }
}

fn criterion_8() -> Outcome {
    let example = updated_k(8, 12, 20);

    let ds = generate_spring_dataset(&GenerateConfig { systems: 2, steps: 60, seed: 8, ..GenerateConfig::default() }).unwrap();
    let records: Vec<_> = ds.records.iter().map(|r| r.to_graph_record()).collect();
    let split = split_dataset(&records, 8);
    let model = || Model::new(ModelConfig::egnn(Head::NodeVector, 2, 8)).unwrap();
    let base = TrainConfig { epochs: 25, seed: 8, ..TrainConfig::default() };
    let plain = train(model(), &split, &base, None).unwrap();
    let mut off = base.clone();
    off.rewire = gil_core::config::RewireMode::Isgr;
    off.isgr.threshold = f64::INFINITY;
    let disabled = train(model(), &split, &off, None).unwrap();
    let identical = plain.model.params() == disabled.model.params()
        && plain.test_mae.map(f64::to_bits) == disabled.test_mae.map(f64::to_bits)
        && disabled.isgr.as_ref().is_some_and(|s| s.history.iter().all(|r| !r.fired));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bounded = true;
    let mut steps = 0;
    for run in 0..200 {
        let n = rng.random_range(3..=16);
        let baseline = if run % 2 == 0 { Baseline::Previous } else { Baseline::Initial };
        let mut state = IsgrState::new(rng.random_range(1..n), rng.random_range(0.0..0.3), 1);
        state.baseline = baseline;
        for epoch in 0..30 {
            let raw: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let before = state.k;
            let fired = isgr_step(&mut state, uniform_profile(raw.iter().map(|r| r / total).collect()), epoch).unwrap();
            let rec = state.history.last().unwrap();
            bounded &= (1..n).contains(&state.k);
            if fired {
                let m = rec.m_star.unwrap();
                bounded &= state.k.abs_diff(m) <= before.abs_diff(m);
            }
            steps += 1;
        }
    }
    Outcome::new(
        example == 10 && identical && bounded,
        format!(
            "k=8, m*=12 -> {example}; threshold inf run identical to plain run: {identical}; {steps} random controller steps bounded and moving toward m*: {bounded}"
        ),
    )
}

fn gil() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gil"))
}

fn run_ok(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{:?}: {}", out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

#[derive(serde::Deserialize)]
struct Metrics {
    test_mae: Option<f64>,
    final_k: Option<usize>,
}

fn read_metrics(dir: &Path) -> Metrics {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

/// Trains the six desk-scale runs through the CLI, as many at once as there
/// are cores.
fn desk_scale_runs(work: &Path) -> Result<(PathBuf, Vec<PathBuf>, Vec<PathBuf>), String> {
    let data = work.join("spring_newtonian.jsonl");
    run_ok(gil().args(["generate", "--particles", "10", "--systems", "4", "--steps", "500"]).args([
        "--task", "newtonian", "--seed", "42", "--out",
    ]).arg(&data))?;
    let mut jobs = Vec::new();
    for seed in 1..=3 {
        for rewire in ["none", "isgr"] {
            let dir = work.join(format!("{rewire}_{seed}"));
            let mut cmd = gil();
            cmd.args(["train", "--rewire", rewire, "--seed", &seed.to_string(), "--epochs", "200"])
                .arg("--data")
                .arg(&data)
                .arg("--out-dir")
                .arg(&dir);
            if rewire == "isgr" {
                cmd.args(["--isgr-baseline", "initial", "--isgr-threshold", "0.1"]);
            }
            jobs.push((rewire, dir, cmd));
        }
    }
    let width = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let mut queue = jobs.into_iter();
    let (mut none, mut isgr) = (Vec::new(), Vec::new());
    loop {
        let batch: Vec<_> = queue.by_ref().take(width).collect();
        if batch.is_empty() {
            break;
        }
        let handles: Vec<_> = batch
            .into_iter()
            .map(|(rewire, dir, mut cmd)| {
                (rewire, dir, std::thread::spawn(move || run_ok(&mut cmd).map(|_| ())))
            })
            .collect();
        for (rewire, dir, h) in handles {
            h.join().map_err(|_| "training thread panicked".to_string())??;
            if rewire == "none" { none.push(dir) } else { isgr.push(dir) }
        }
    }
    Ok((data, none, isgr))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn criterion_9(runs: &Result<(PathBuf, Vec<PathBuf>, Vec<PathBuf>), String>, elapsed: Duration) -> Outcome {
    let (_, none, isgr) = match runs {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("training failed: {e}")),
    };
    let none_mae: Vec<f64> = none.iter().map(|d| read_metrics(d).test_mae.unwrap()).collect();
    let isgr_m: Vec<Metrics> = isgr.iter().map(|d| read_metrics(d)).collect();
    let isgr_mae: Vec<f64> = isgr_m.iter().map(|m| m.test_mae.unwrap()).collect();
    let ks: Vec<usize> = isgr_m.iter().map(|m| m.final_k.unwrap()).collect();
    let (a, b) = (mean(&isgr_mae), mean(&none_mae));
    let k_up = ks.iter().all(|&k| k > 8);
    let fast = elapsed < Duration::from_secs(30 * 60);
    Outcome::new(
        a <= b && k_up && fast,
        format!(
            "mean test MAE isgr {a:.4} vs none {b:.4}; final k {ks:?}; {:.0} s for 6 runs",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_10(runs: &Result<(PathBuf, Vec<PathBuf>, Vec<PathBuf>), String>, work: &Path) -> Outcome {
    let (data, none, _) = match runs {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("no trained checkpoint: {e}")),
    };
    let out = work.join("analysis");
    let result = run_ok(
        gil()
            .args(["analyze", "--orders", "0.1:1.0:0.1", "--seed", "10"])
            .arg("--checkpoint")
            .arg(none[0].join("model.ckpt"))
            .arg("--data")
            .arg(data)
            .arg("--out-dir")
            .arg(&out),
    );
    if let Err(e) = result {
        return Outcome::new(false, format!("analyze failed: {e}"));
    }
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    let tv = a["tv_distance"].as_f64().unwrap();
    Outcome::new(
        tv > 0.05,
        format!("trained vs random-init profile: TV distance {tv:.4}, max-gap order {}", a["max_gap_order"]),
    )
}

fn criterion_11() -> Outcome {
    let mut calibrated = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        calibrated += usize::from(normality_test(&x).unwrap().p_value > 0.01);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let exp = Exp::new(1.0).unwrap();
    let x: Vec<f64> = (0..5000).map(|_| exp.sample(&mut rng)).collect();
    let p_exp = normality_test(&x).unwrap().p_value;
    Outcome::new(
        calibrated >= 95 && p_exp < 1e-6,
        format!("Gaussian: {calibrated}/100 with p > 0.01; exponential: p = {p_exp:.1e}"),
    )
}

fn report(id: usize, name: &str, started: Instant, o: &Outcome) -> bool {
    println!(
        "criterion {id:>2} {} {name}: {} [{:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.pass
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| selected.is_empty() || selected.contains(&id);
    let work = tempfile::tempdir().expect("temporary directory");
    let mut all = true;
    let quick: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "game-theoretic properties", criterion_1),
        (2, "included/excluded equivalence", criterion_2),
        (3, "Monte-Carlo consistency", criterion_3),
        (4, "F(m) arithmetic", criterion_4),
        (5, "autodiff", criterion_5),
        (6, "equivariance", criterion_6),
        (7, "physics oracle", criterion_7),
        (8, "rewiring controller mechanics", criterion_8),
    ];
    for (id, name, f) in quick {
        if wanted(id) {
            let t = Instant::now();
            all &= report(id, name, t, &f());
        }
    }
    if wanted(9) || wanted(10) {
        let t = Instant::now();
        let runs = desk_scale_runs(work.path());
        let elapsed = t.elapsed();
        if wanted(9) {
            all &= report(9, "desk-scale directional result", t, &criterion_9(&runs, elapsed));
        }
        if wanted(10) {
            let t = Instant::now();
            all &= report(10, "divergence from initialization", t, &criterion_10(&runs, work.path()));
        }
    }
    if wanted(11) {
        let t = Instant::now();
        all &= report(11, "normality test", t, &criterion_11());
    }
    if !all {
        std::process::exit(1);
    }
}
