#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::Instant;

use affattn::eval::{evaluate, spearman, split_half_ceiling, EvalOptions};
use affattn::lattice::{component_of, count_components, hop_distances};
use affattn::roc::{roc_batch, tpr_fpr, RocBatch};
use affattn::spread::{init_segment, spread_step, BatchPredictions};
use affattn::synth::oracle::*;
use affattn::synth::{generate_dataset, LinearRtModel, SynthConfig, SynthDataset};
use affattn::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: usize = 120;

/// Outcome of one checked property: how many instances ran and what broke.
#[derive(Debug, Default)]
pub struct Check {
    pub name: &'static str,
    pub instances: usize,
    pub failures: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            ..Default::default()
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 5 {
            self.failures.push(msg);
        } else if self.failures.len() == 5 {
            self.failures.push("...".into());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty() && self.instances > 0
    }

    pub fn assert_ok(&self) {
        assert!(
            self.ok(),
            "{} failed on {} instances: {:?}",
            self.name,
            self.instances,
            self.failures
        );
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xAFF0_0000 + tag)
}

fn random_grid(r: &mut ChaCha8Rng, constant_rows: bool) -> FeatureGrid {
    let (h, w, dim) = (r.random_range(1..8), r.random_range(1..8), r.random_range(1..9));
    let mut data: Vec<f32> = (0..h * w * dim).map(|_| r.random_range(-2.0f32..2.0)).collect();
    if constant_rows && h * w > 1 {
        data[..dim].fill(0.0);
    }
    FeatureGrid::new("x", GridGeometry::unscaled(h, w, 4), dim, FeatureKind::Key, data).unwrap()
}

pub fn check_affinity() -> Check {
    let mut c = Check::new("affinity");
    let mut r = rng(1);
    for i in 0..INSTANCES {
        let grid = random_grid(&mut r, i % 4 == 0);
        let n = grid.n_patches();
        let want = naive_normalize(&naive_affinity(&grid.data, n, grid.dim), n);
        let got = compute_affinity(&grid).unwrap();
        c.instances += 1;
        let worst = want
            .iter()
            .zip(&got.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if worst > 1e-5 {
            c.fail(format!("instance {i}: max deviation {worst}"));
        }
    }
    c
}

pub fn check_tpr_fpr() -> Check {
    let mut c = Check::new("tpr/fpr counting");
    let mut r = rng(2);
    for i in 0..INSTANCES {
        let (h, w) = (r.random_range(1..9), r.random_range(1..9));
        let n_obj = r.random_range(0..4u16);
        let labels: Vec<u16> = (0..h * w).map(|_| r.random_range(0..=n_obj)).collect();
        let active: Vec<bool> = (0..h * w).map(|_| r.random_bool(0.4)).collect();
        let obj = r.random_range(0..=n_obj + 1);
        let grid = PatchLabelGrid {
            grid_h: h,
            grid_w: w,
            labels: labels.clone(),
        };
        let got = tpr_fpr(&active, &grid, obj).ok();
        let want = naive_tpr_fpr(&active, &labels, obj);
        c.instances += 1;
        if got != want {
            c.fail(format!("instance {i}: {got:?} vs {want:?}"));
        }
    }
    c
}

pub fn check_components() -> Check {
    let mut c = Check::new("connected component");
    let mut r = rng(3);
    for i in 0..INSTANCES {
        let (h, w) = (r.random_range(1..10), r.random_range(1..10));
        let p = r.random_range(0.3..0.8);
        let allowed: Vec<bool> = (0..h * w).map(|_| r.random_bool(p)).collect();
        let seed = r.random_range(0..h * w);
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let got = component_of(&allowed, seed, h, w, conn);
            let want = flood_fill_component(&allowed, seed, w, conn == Connectivity::Eight);
            c.instances += 1;
            if got != want {
                c.fail(format!("instance {i} {conn:?}: masks differ"));
            }
        }
    }
    c
}

fn random_segment(r: &mut ChaCha8Rng, h: usize, w: usize, conn: Connectivity) -> Vec<usize> {
    let target = r.random_range(1..=(h * w).min(12));
    let mut member = vec![false; h * w];
    let start = r.random_range(0..h * w);
    member[start] = true;
    let mut seg = vec![start];
    while seg.len() < target {
        let frontier: Vec<usize> = (0..h * w)
            .filter(|&p| !member[p] && conn.neighbors(p, h, w).any(|q| member[q]))
            .collect();
        if frontier.is_empty() {
            break;
        }
        let p = frontier[r.random_range(0..frontier.len())];
        member[p] = true;
        seg.push(p);
    }
    seg
}

pub fn check_spread_step() -> Check {
    let mut c = Check::new("spread step");
    let mut r = rng(4);
    for i in 0..INSTANCES {
        let grid = random_grid(&mut r, false);
        let aff = compute_affinity(&grid).unwrap();
        let (h, w) = (aff.grid_h(), aff.grid_w());
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let cfg = SpreadConfig {
                connectivity: conn,
                ..SpreadConfig::default()
            };
            let seg = random_segment(&mut r, h, w, conn);
            let threshold = r.random_range(0.0..1.0);
            let mut got = spread_step(&aff, &seg, threshold, &cfg).unwrap();
            let mut want = naive_spread_step(&aff.values, aff.n, w, &seg, threshold, conn == Connectivity::Eight);
            got.sort_unstable();
            want.sort_unstable();
            c.instances += 1;
            if got != want {
                c.fail(format!("instance {i} {conn:?}: {got:?} vs {want:?}"));
            }

            let center = PatchIndex::from_flat(r.random_range(0..aff.n), w);
            let seed = center.flat(w);
            let mut allowed: Vec<bool> = aff.row(seed).iter().map(|&v| v >= cfg.tau).collect();
            allowed[seed] = true;
            let flood = flood_fill_component(&allowed, seed, w, conn == Connectivity::Eight);
            let want: Vec<usize> = (0..aff.n).filter(|&p| flood[p]).collect();
            let got = init_segment(&aff, center, &cfg).unwrap();
            c.instances += 1;
            if got != want {
                c.fail(format!("instance {i} {conn:?}: init {got:?} vs {want:?}"));
            }
        }
    }
    c
}

pub fn check_spearman() -> Check {
    let mut c = Check::new("spearman");
    let mut r = rng(5);
    let mut i = 0;
    while c.instances < INSTANCES {
        i += 1;
        let n = r.random_range(2..30);
        let levels = r.random_range(2..12);
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0f64).round_ties_even()).collect();
        let (Ok(got), want) = (spearman(&x, &y), naive_spearman(&x, &y)) else {
            continue;
        };
        c.instances += 1;
        if (got - want).abs() > 1e-12 {
            c.fail(format!("case {i}: {got} vs {want}"));
        }
    }
    c
}

fn naive_pixel_to_patch(x: f64, y: f64, g: &GridGeometry) -> (usize, usize) {
    let py = y * g.proc_h as f64 / g.img_h as f64;
    let px = x * g.proc_w as f64 / g.img_w as f64;
    let find = |v: f64, cells: usize| {
        (0..cells)
            .find(|&k| v < ((k + 1) * g.patch_px) as f64)
            .unwrap_or(cells - 1)
    };
    (find(py, g.grid_h), find(px, g.grid_w))
}

pub fn check_pixel_to_patch() -> Check {
    let mut c = Check::new("pixel to patch");
    let mut r = rng(6);
    for i in 0..INSTANCES {
        let patch_px = r.random_range(2..17);
        let (gh, gw) = (r.random_range(1..12), r.random_range(1..12));
        let (img_h, img_w) = (r.random_range(10..600), r.random_range(10..600));
        let g = GridGeometry {
            grid_h: gh,
            grid_w: gw,
            img_h,
            img_w,
            proc_h: gh * patch_px,
            proc_w: gw * patch_px,
            patch_px,
        };
        for _ in 0..10 {
            let (x, y) = if r.random_bool(0.3) {
                (r.random_range(0..img_w) as f64, r.random_range(0..img_h) as f64)
            } else {
                (r.random_range(0.0..img_w as f64), r.random_range(0.0..img_h as f64))
            };
            let got = pixel_to_patch(PixelXY::new(x, y), &g).unwrap();
            let want = naive_pixel_to_patch(x, y, &g);
            c.instances += 1;
            if (got.row, got.col) != want {
                c.fail(format!("instance {i} ({x}, {y}): {got:?} vs {want:?}"));
            }
        }
    }
    c
}

fn naive_rasterize(mask: &PixelMask, gh: usize, gw: usize, ph: usize, pw: usize) -> Vec<u16> {
    let mut out = Vec::new();
    for r in 0..gh {
        for c in 0..gw {
            let mut counts = [0usize; 8];
            for y in 0..ph {
                for x in 0..pw {
                    if y * gh / ph != r || x * gw / pw != c {
                        continue;
                    }
                    let sy = (y as f64 * mask.img_h as f64 / ph as f64).floor() as usize;
                    let sx = (x as f64 * mask.img_w as f64 / pw as f64).floor() as usize;
                    counts[mask.labels[sy * mask.img_w + sx] as usize] += 1;
                }
            }
            let best = (0..8).rev().max_by_key(|&l| counts[l]).unwrap();
            out.push(best as u16);
        }
    }
    out
}

pub fn check_rasterize() -> Check {
    let mut c = Check::new("mask rasterization");
    let mut r = rng(7);
    for i in 0..INSTANCES {
        let (img_h, img_w) = (r.random_range(1..40), r.random_range(1..40));
        let labels: Vec<u16> = (0..img_h * img_w).map(|_| r.random_range(0..8)).collect();
        let mask = PixelMask {
            image_id: "m".into(),
            img_h,
            img_w,
            labels,
        };
        let (gh, gw, patch) = (r.random_range(1..6), r.random_range(1..6), r.random_range(1..6));
        let got = rasterize_mask(&mask, gh, gw, gh * patch, gw * patch).unwrap();
        let want = naive_rasterize(&mask, gh, gw, gh * patch, gw * patch);
        c.instances += 1;
        if got.labels != want {
            c.fail(format!("instance {i}: {:?} vs {want:?}", got.labels));
        }
    }
    c
}

pub fn oracle_checks() -> Vec<Check> {
    vec![
        check_affinity(),
        check_tpr_fpr(),
        check_components(),
        check_spread_step(),
        check_spearman(),
        check_pixel_to_patch(),
        check_rasterize(),
    ]
}

/// Runs every oracle comparison and reports the wall time taken.
pub fn timed_oracle_checks() -> (Vec<Check>, f64) {
    let start = Instant::now();
    let checks = oracle_checks();
    (checks, start.elapsed().as_secs_f64())
}

pub fn affinities(ds: &SynthDataset) -> BTreeMap<String, AffinityMatrix> {
    ds.scenes
        .iter()
        .map(|s| (s.spec.image_id.clone(), compute_affinity(&s.features).unwrap()))
        .collect()
}

pub fn labels(ds: &SynthDataset) -> BTreeMap<String, PatchLabelGrid> {
    ds.scenes
        .iter()
        .map(|s| (s.spec.image_id.clone(), s.labels.clone()))
        .collect()
}

pub fn suite(n_scenes: usize, separability: f64, noise_sigma: f64, seed: u64) -> SynthDataset {
    let cfg = SynthConfig {
        n_scenes,
        n_subjects: 8,
        separability,
        noise_sigma,
        seed,
        ..SynthConfig::default()
    };
    generate_dataset(&cfg).unwrap()
}

pub fn roc_of(ds: &SynthDataset) -> RocBatch {
    roc_batch(&affinities(ds), &labels(ds), &ds.manifest).unwrap()
}

/// Counts threshold steps where TPR or FPR decreases as the threshold drops.
pub fn monotonicity_violations(batch: &RocBatch) -> usize {
    batch
        .per_trial
        .iter()
        .map(|(_, pts)| {
            pts.windows(2)
                .filter(|w| w[1].tpr < w[0].tpr || w[1].fpr < w[0].fpr)
                .count()
        })
        .sum()
}

pub struct RocSanity {
    pub ideal_auc: f64,
    pub ideal_trials: usize,
    pub noise_auc: f64,
    pub noise_trials: usize,
    pub violations: usize,
}

impl RocSanity {
    pub fn ok(&self) -> bool {
        self.ideal_auc >= 0.99
            && self.ideal_trials >= 200
            && (0.45..=0.55).contains(&self.noise_auc)
            && self.noise_trials >= 200
            && self.violations == 0
    }
}

pub fn roc_sanity() -> RocSanity {
    let ideal = roc_of(&suite(55, 1.0, 0.0, 11));
    let noise = roc_of(&suite(55, 0.0, 1.0, 12));
    RocSanity {
        ideal_auc: ideal.curve.auc,
        ideal_trials: ideal.curve.n_trials,
        noise_auc: noise.curve.auc,
        noise_trials: noise.curve.n_trials,
        violations: monotonicity_violations(&ideal) + monotonicity_violations(&noise),
    }
}

pub struct SpreadBehavior {
    pub scenes: usize,
    pub means: BTreeMap<Condition, f64>,
    pub ring_violations: usize,
    pub connectivity_violations: usize,
}

impl SpreadBehavior {
    pub fn diff_mean(&self) -> f64 {
        (self.means[&Condition::DiffClose] + self.means[&Condition::DiffFar]) / 2.0
    }

    pub fn ordering_ok(&self) -> bool {
        self.means[&Condition::SameClose] < self.means[&Condition::SameFar]
            && self.means[&Condition::SameFar] < self.diff_mean()
    }

    pub fn ok(&self) -> bool {
        self.scenes >= 50 && self.ordering_ok() && self.ring_violations == 0 && self.connectivity_violations == 0
    }
}

/// Checks every step of every trace: admitted patches sit exactly one hop
/// from the step-start segment, and every segment is a single component.
pub fn trace_violations(batch: &BatchPredictions, conn: Connectivity) -> (usize, usize) {
    let (mut ring, mut connected) = (0, 0);
    for trace in &batch.traces {
        let (h, w) = (trace.grid_h, trace.grid_w);
        let masks = trace.segment_masks();
        let all = vec![true; h * w];
        if count_components(&masks[0], h, w, conn) != 1 || !masks[0][trace.center] {
            connected += 1;
        }
        for (k, step) in trace.steps.iter().enumerate().skip(1) {
            let dist = hop_distances(&masks[k - 1], &all, h, w, conn);
            ring += step.added.iter().filter(|&&p| dist[p] != Some(1)).count();
            if count_components(&masks[k], h, w, conn) != 1 {
                connected += 1;
            }
        }
    }
    (ring, connected)
}

pub fn spread_behavior(n_scenes: usize) -> SpreadBehavior {
    let ds = suite(n_scenes, 1.0, 0.1, 21);
    let cfg = SpreadConfig::default();
    let batch = predict_batch(&affinities(&ds), &ds.manifest, &cfg).unwrap();
    assert!(batch.skipped.is_empty(), "{:?}", batch.skipped);
    let mut sums: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for p in &batch.predictions {
        sums.entry(p.condition).or_default().push(p.prediction as f64);
    }
    let means = sums
        .into_iter()
        .map(|(c, v)| (c, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let (ring_violations, connectivity_violations) = trace_violations(&batch, cfg.connectivity);
    SpreadBehavior {
        scenes: ds.scenes.len(),
        means,
        ring_violations,
        connectivity_violations,
    }
}

/// Seeded random checks of monotone-transform invariance and symmetry.
pub fn spearman_properties() -> Check {
    let mut c = Check::new("spearman invariance/symmetry");
    let mut r = rng(8);
    while c.instances < 500 {
        let n = r.random_range(2..40);
        let x: Vec<f64> = (0..n)
            .map(|_| (r.random_range(-5.0..5.0f64) * 4.0).round() / 4.0)
            .collect();
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let Ok(rho) = spearman(&x, &y) else { continue };
        c.instances += 1;
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let cubed: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let checks = [
            ("exp", spearman(&ex, &y).unwrap()),
            ("cubic", spearman(&x, &cubed).unwrap()),
            ("swap", spearman(&y, &x).unwrap()),
        ];
        for (what, other) in checks {
            if (rho - other).abs() > 1e-12 {
                c.fail(format!("{what}: {rho} vs {other}"));
            }
        }
        if !(-1.0..=1.0).contains(&rho) {
            c.fail(format!("out of range: {rho}"));
        }
    }
    c
}

pub fn responses_suite(n_scenes: usize, rt_noise_ms: f64, rt_model: LinearRtModel, seed: u64) -> SynthDataset {
    let cfg = SynthConfig {
        n_scenes,
        dim: 4,
        grid_h: 16,
        grid_w: 16,
        rt_noise_ms,
        rt_model,
        seed,
        ..SynthConfig::default()
    };
    generate_dataset(&cfg).unwrap()
}

pub fn flat_rt_model() -> LinearRtModel {
    LinearRtModel {
        base_ms: 650.0,
        diff_penalty_ms: 0.0,
        same_ms_per_px: 0.0,
        diff_ms_per_px: 0.0,
    }
}

pub struct EvalCorrectness {
    pub properties: Check,
    pub self_rho: f64,
    pub zero_noise_ceiling: f64,
    pub noise_ceiling: f64,
    pub noise_trials: usize,
}

impl EvalCorrectness {
    pub fn ok(&self) -> bool {
        self.properties.ok()
            && self.self_rho == 1.0
            && self.zero_noise_ceiling == 1.0
            && self.noise_ceiling.abs() < 0.1
            && self.noise_trials >= 255
    }
}

pub fn eval_correctness() -> EvalCorrectness {
    let ds = responses_suite(64, 120.0, LinearRtModel::default(), 31);
    let preds: BTreeMap<String, f64> = ds
        .manifest
        .iter()
        .map(|t| (t.trial_id.clone(), t.mean_rt_ms.unwrap()))
        .collect();
    let report = evaluate(&preds, &ds.manifest, None, &EvalOptions::default()).unwrap();

    let exact = responses_suite(64, 0.0, LinearRtModel::default(), 32);
    let zero = split_half_ceiling(&exact.responses, &exact.manifest, 50, 7, false).unwrap();

    let noisy = responses_suite(64, 120.0, flat_rt_model(), 33);
    let noise = split_half_ceiling(&noisy.responses, &noisy.manifest, 50, 7, false).unwrap();

    EvalCorrectness {
        properties: spearman_properties(),
        self_rho: report.spearman_rho,
        zero_noise_ceiling: zero.rho,
        noise_ceiling: noise.rho,
        noise_trials: noisy.manifest.len(),
    }
}

/// Relative path to contents for every file under `root`.
pub fn read_tree(root: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn run_bin(bin: &str, args: &[&str]) -> std::process::Output {
    std::process::Command::new(bin)
        .args(args)
        .env_remove("AFFATTN_THREADS")
        .output()
        .unwrap()
}

/// Runs every subcommand twice on a small synthetic dataset and lists the
/// subcommands whose output trees or stdout differ between runs.
pub fn cli_determinism(bin: &str) -> (Vec<&'static str>, Vec<String>) {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path();
    let p = |run: usize, what: &str| base.join(format!("{what}{run}")).to_string_lossy().into_owned();
    let mut checked = Vec::new();
    let mut differing = Vec::new();
    let mut compare = |name: &'static str, outs: [(String, std::process::Output); 2]| {
        checked.push(name);
        for (_, o) in &outs {
            if !o.status.success() {
                differing.push(format!(
                    "{name}: exit {:?}: {}",
                    o.status.code(),
                    String::from_utf8_lossy(&o.stderr)
                ));
                return;
            }
        }
        let [(a_dir, a), (b_dir, b)] = outs;
        let (ta, tb) = (read_tree(a_dir.as_ref()), read_tree(b_dir.as_ref()));
        if ta.is_empty() || ta != tb || a.stdout != b.stdout {
            differing.push(name.to_string());
        }
    };

    let synth = |run| {
        let out = p(run, "data");
        let o = run_bin(
            bin,
            &[
                "synth",
                "--out",
                &out,
                "--scenes",
                "12",
                "--subjects",
                "16",
                "--seed",
                "5",
            ],
        );
        (out, o)
    };
    compare("synth", [synth(1), synth(2)]);
    let data = p(1, "data");

    let roc = |run| {
        let out = p(run, "roc");
        (
            out.clone(),
            run_bin(bin, &["roc", "--data", &data, "--out", &out, "--per-trial"]),
        )
    };
    compare("roc", [roc(1), roc(2)]);

    let spread = |run| {
        let out = p(run, "spread");
        (
            out.clone(),
            run_bin(bin, &["spread", "--data", &data, "--out", &out, "--traces", "--pgm"]),
        )
    };
    compare("spread", [spread(1), spread(2)]);

    let preds = format!("{}/predictions.csv", p(1, "spread"));
    let eval = |run| {
        let out = p(run, "eval");
        let args = [
            "eval",
            "--data",
            &data,
            "--predictions",
            &preds,
            "--out",
            &out,
            "--n-splits",
            "20",
            "--seed",
            "5",
        ];
        (out.clone(), run_bin(bin, &args))
    };
    compare("eval", [eval(1), eval(2)]);
    (checked, differing)
}
