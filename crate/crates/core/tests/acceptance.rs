//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ndarray::{Array2, Array3, Array4};
use rand::Rng;
use sha2::{Digest, Sha256};

use countlab::harness::{emit_report, load_existing, run_experiment, ExperimentConfig};
use countlab::intervention::{
    apply_intervention, balance_visual, expand_kv_heads, focus_visual, group_factor, mask_amplify, object_token_set,
    overlap_ratio, scale_visual, AttentionTensor, BalanceMode, InterventionPlan, ModelFamily, ObjectTokens, PatchGrid,
    StrategyKind, StrategyName, VisualSpan,
};
use countlab::metrics::{accuracy, mrce, CountBucket, PredictionRecord};
use countlab::prompt::LadderId;
use countlab::relevance::{attention_iou, compose, gradient_weighted_map, propagate, transition_matrix, LayerCapture};
use countlab::rng::stream;
use countlab::scene::{generate_dataset, DatasetConfig, DatasetIndex, Footprint, SceneManifest, VariationTag};
use countlab::BinaryMask;

/// SHA-256 over every file of the default dataset (master seed 0), see `tree_hash`.
const GOLDEN_DATASET_SHA256: &str = "38d0c3437346f5194be14cc5429b9a47241f99effa1fcc83c4b73848e4218e99";

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn tree_hash(root: &Path) -> (String, usize) {
    fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.push(p);
            }
        }
    }
    let mut files = Vec::new();
    walk(root, &mut files);
    let mut rel: Vec<(String, std::path::PathBuf)> = files
        .into_iter()
        .map(|p| {
            let r = p.strip_prefix(root).unwrap().components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>();
            (r.join("/"), p)
        })
        .collect();
    rel.sort();
    let mut h = Sha256::new();
    for (name, path) in &rel {
        let bytes = fs::read(path).unwrap();
        h.update(name.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    (hex::encode(h.finalize()), rel.len())
}

struct Shared {
    _dir: tempfile::TempDir,
    manifests: Vec<SceneManifest>,
}

fn dataset_determinism(shared: &mut Option<Shared>) -> Outcome {
    let cfg = DatasetConfig::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_dataset(&cfg, a.path()).map_err(|e| e.to_string())?;
    generate_dataset(&cfg, b.path()).map_err(|e| e.to_string())?;
    let (ha, n) = tree_hash(a.path());
    let (hb, _) = tree_hash(b.path());
    let manifests = DatasetIndex::load(a.path()).and_then(|i| i.load_manifests(a.path())).map_err(|e| e.to_string())?;
    *shared = Some(Shared { _dir: a, manifests });
    ensure!(ha == hb, "two runs differ: {ha} vs {hb}");
    ensure!(ha == GOLDEN_DATASET_SHA256, "tree hash {ha} does not match the golden {GOLDEN_DATASET_SHA256}");
    Ok(format!("{n} files, sha256 {}", &ha[..16]))
}

fn baselines(m: &[SceneManifest]) -> Vec<&SceneManifest> {
    let mut b: Vec<_> = m.iter().filter(|m| m.variation_tag == VariationTag::Baseline).collect();
    b.sort_by_key(|m| m.base_index);
    b
}

fn bucket_balance(shared: &Option<Shared>) -> Outcome {
    let m = &shared.as_ref().ok_or("dataset unavailable")?.manifests;
    let base = baselines(m);
    let mut per: BTreeMap<CountBucket, usize> = BTreeMap::new();
    for s in &base {
        ensure!(CountBucket::of(s.true_count) == s.count_bucket, "{} labelled {:?}", s.image_id, s.count_bucket);
        *per.entry(s.count_bucket).or_default() += 1;
    }
    ensure!(
        per.len() == 5 && CountBucket::REPORTED.iter().all(|b| per.get(b) == Some(&10)),
        "bucket sizes {per:?}"
    );
    let mut pairs = 0u64;
    for s in &base {
        let (w, h) = (s.width as i64, s.height as i64);
        let mut cover = vec![0u8; (w * h) as usize];
        for o in &s.objects {
            let f = Footprint::new(o.shape, o.center, o.size);
            let (x0, y0, x1, y1) = f.bounds();
            for y in (y0 as i64).max(0)..=(y1 as i64).min(h - 1) {
                for x in (x0 as i64).max(0)..=(x1 as i64).min(w - 1) {
                    if f.contains(x, y) {
                        let c = &mut cover[(y * w + x) as usize];
                        ensure!(*c == 0, "{}: objects overlap at ({x}, {y})", s.image_id);
                        *c = 1;
                    }
                }
            }
        }
        let covered = cover.iter().filter(|c| **c == 1).count() as u64;
        ensure!(covered == s.object_mask.popcount(), "{}: mask popcount differs from footprints", s.image_id);
        ensure!(s.objects.len() as u32 == s.true_count, "{}: object list and count differ", s.image_id);
        pairs += (s.objects.len() * s.objects.len().saturating_sub(1) / 2) as u64;
    }
    Ok(format!("10 images in each of 5 buckets, {pairs} object pairs disjoint"))
}

fn variation_isolation(shared: &Option<Shared>) -> Outcome {
    let m = &shared.as_ref().ok_or("dataset unavailable")?.manifests;
    let base = baselines(m);
    let mut n = 0;
    for v in m.iter().filter(|m| m.variation_tag != VariationTag::Baseline) {
        let b = base.get(v.base_index).ok_or(format!("{}: no baseline {}", v.image_id, v.base_index))?;
        let geom = |s: &SceneManifest| s.objects.iter().map(|o| (o.center, o.size)).collect::<Vec<_>>();
        ensure!(geom(v) == geom(b), "{} moved objects relative to {}", v.image_id, b.image_id);
        ensure!(v.true_count == b.true_count, "{}: count changed", v.image_id);
        if v.variation_tag != VariationTag::ObjShape {
            ensure!(v.object_mask == b.object_mask, "{}: mask changed", v.image_id);
        }
        n += 1;
    }
    ensure!(n == m.len() - 50, "expected every non-baseline image to be checked");
    Ok(format!("{n} variation images match their baseline layout"))
}

fn mrce_oracle() -> Outcome {
    let mut rng = stream(101);
    let recs: Vec<PredictionRecord> = (0..1000)
        .map(|i| {
            let truth = rng.random_range(0..=60u32);
            let pred = if rng.random_bool(0.1) { None } else { Some(rng.random_range(0..=120u64)) };
            PredictionRecord::for_test(&format!("r{i}"), pred, truth)
        })
        .collect();
    let (mut sum, mut n) = (0.0f64, 0usize);
    for r in &recs {
        if let (Some(p), t) = (r.parsed_count, r.true_count) {
            if t > 0 {
                sum += (p as f64 - t as f64).abs() / t as f64;
                n += 1;
            }
        }
    }
    let brute = sum / n as f64;
    let got = mrce(&recs).ok_or("mrce undefined")?;
    ensure!((got - brute).abs() < 1e-12, "mrce {got} vs brute force {brute}");
    let zeros = recs.iter().filter(|r| r.true_count == 0).count();
    let unparsable = recs.iter().filter(|r| r.parsed_count.is_none()).count();
    ensure!(zeros > 0 && unparsable > 0, "sample did not exercise exclusions");
    let only_excluded = vec![PredictionRecord::for_test("a", Some(3), 0), PredictionRecord::for_test("b", None, 7)];
    ensure!(mrce(&only_excluded).is_none(), "mrce over excluded records should be undefined");
    ensure!(accuracy(&only_excluded) == 0.0, "unparsable should count as wrong");
    let hits = recs.iter().filter(|r| r.parsed_count == Some(r.true_count as u64)).count();
    ensure!(accuracy(&recs) == hits as f64 / 1000.0, "accuracy disagrees with brute force");
    Ok(format!("|d| = {:.1e} over {n} eligible of 1000 ({zeros} zero-count, {unparsable} unparsable)", (got - brute).abs()))
}

fn random_tensor(rng: &mut impl Rng, h: usize, q: usize, k: usize) -> AttentionTensor {
    let mut w = Array3::from_shape_fn((h, q, k), |_| rng.random_range(1e-3..1.0f64));
    for mut row in w.lanes_mut(ndarray::Axis(2)) {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    AttentionTensor::new(w).unwrap()
}

fn random_span(rng: &mut impl Rng, k: usize) -> VisualSpan {
    let start = rng.random_range(1..k - 2);
    let end = rng.random_range(start..k - 1);
    VisualSpan::new(start, end).unwrap()
}

fn rows_stochastic(a: &AttentionTensor) -> f64 {
    a.weights().lanes(ndarray::Axis(2)).into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
}

fn split(row: ndarray::ArrayView1<f64>, span: VisualSpan) -> (f64, f64) {
    let vis: f64 = row.iter().skip(span.start).take(span.len()).sum();
    (vis, row.sum() - vis)
}

fn attention_operators() -> Outcome {
    let mut rng = stream(202);
    let (mut worst_sum, mut worst_ratio, mut worst_mask) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (h, q, k) = (rng.random_range(1..4), rng.random_range(1..6), rng.random_range(4..24));
        let a = random_tensor(&mut rng, h, q, k);
        let span = random_span(&mut rng, k);
        let factor = rng.random_range(0.05..8.0);
        let scaled = scale_visual(&a, span, factor).map_err(|e| e.to_string())?;
        let objs: Vec<usize> = (span.start..=span.end).filter(|_| rng.random_bool(0.4)).collect();
        let objects = ObjectTokens::new(span, objs).map_err(|e| e.to_string())?;
        let outs = [
            scaled.clone(),
            focus_visual(&a, span, 1e-10).map_err(|e| e.to_string())?,
            balance_visual(&a, span, 0.4, BalanceMode::PaperLiteral).map_err(|e| e.to_string())?.0,
            balance_visual(&a, span, 0.4, BalanceMode::Exact).map_err(|e| e.to_string())?.0,
            mask_amplify(&a, span, &objects, 2.0, 0.5).map_err(|e| e.to_string())?,
        ];
        worst_sum = outs.iter().map(rows_stochastic).fold(worst_sum, f64::max);
        for (r0, r1) in a.weights().lanes(ndarray::Axis(2)).into_iter().zip(scaled.weights().lanes(ndarray::Axis(2))) {
            let (v0, t0) = split(r0, span);
            let (v1, t1) = split(r1, span);
            let want = factor * v0 / t0;
            worst_ratio = worst_ratio.max(((v1 / t1) - want).abs() / want.max(1.0));
        }
        let same = mask_amplify(&a, span, &objects, factor, factor).map_err(|e| e.to_string())?;
        let d = same.weights().iter().zip(scaled.weights()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst_mask = worst_mask.max(d);
    }
    ensure!(worst_sum <= 1e-6, "row sum off by {worst_sum}");
    ensure!(worst_ratio <= 1e-9, "ratio law off by {worst_ratio}");
    ensure!(worst_mask <= 1e-12, "mask_amplify differs from scale_visual by {worst_mask}");
    Ok(format!("row sums {worst_sum:.1e}, ratio law {worst_ratio:.1e}, mask vs scale {worst_mask:.1e}"))
}

/// A single row whose visual share is exactly `r` up to rounding.
fn row_with_ratio(rng: &mut impl Rng, k: usize, span: VisualSpan, r: f64) -> AttentionTensor {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let vis: f64 = raw.iter().skip(span.start).take(span.len()).sum();
    let txt: f64 = raw.iter().sum::<f64>() - vis;
    let row: Vec<f64> = raw.iter().enumerate().map(|(j, v)| if span.contains(j) { v / vis * r } else { v / txt * (1.0 - r) }).collect();
    let s: f64 = row.iter().sum();
    AttentionTensor::from_shape_vec(1, 1, k, row.iter().map(|v| v / s).collect()).unwrap()
}

fn balance_modes() -> Outcome {
    let mut rng = stream(303);
    let (mut exact_err, mut literal_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let k = rng.random_range(4..32);
        let span = random_span(&mut rng, k);
        let rc = rng.random_range(0.01..0.99);
        let rt = rng.random_range(0.05..0.95);
        let a = row_with_ratio(&mut rng, k, span, rc);
        let rc = a.visual_ratio(span)[0][0];
        let (ex, passed) = balance_visual(&a, span, rt, BalanceMode::Exact).map_err(|e| e.to_string())?;
        ensure!(passed == 0, "exact mode passed a regular row through");
        exact_err = exact_err.max((ex.visual_ratio(span)[0][0] - rt).abs());
        let (lit, _) = balance_visual(&a, span, rt, BalanceMode::PaperLiteral).map_err(|e| e.to_string())?;
        literal_err = literal_err.max((lit.visual_ratio(span)[0][0] - rt / (rt + 1.0 - rc)).abs());
    }
    ensure!(exact_err <= 1e-6, "exact mode misses the target by {exact_err}");
    ensure!(literal_err <= 1e-9, "literal mode departs from the closed form by {literal_err}");
    Ok(format!("exact {exact_err:.1e}, literal closed form {literal_err:.1e}"))
}

fn overlap_ratio_check() -> Outcome {
    let mut rng = stream(404);
    let sizes = [4u32, 7, 8, 14, 16, 28, 32];
    for t in 0..100 {
        let p = sizes[t % sizes.len()];
        let (w, h) = (p * rng.random_range(1..12u32), p * rng.random_range(1..12u32));
        let density = rng.random_range(0.0..1.0);
        let mask = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density));
        let grid = PatchGrid::new(p, w, h).map_err(|e| e.to_string())?;
        let rho = overlap_ratio(&mask, &grid).map_err(|e| e.to_string())?;
        // rho * p^2 is an integer up to float rounding; compare the recovered counts exactly.
        let mut total = 0u64;
        for r in &rho {
            let scaled = r * (p * p) as f64;
            ensure!((scaled - scaled.round()).abs() < 1e-9, "mask {t}: rho * p^2 = {scaled} is not a pixel count");
            total += scaled.round() as u64;
        }
        ensure!(total == mask.popcount(), "mask {t} ({w}x{h}, p={p}): {total} vs {}", mask.popcount());
    }
    ensure!(object_token_set(&[0.1, 0.100001, 0.05, 1.0], 0.1) == vec![1, 3], "tau boundary is not strict");
    // Ten of a 10x10 patch's hundred pixels sit exactly on the boundary.
    let mask = BinaryMask::from_fn(20, 10, |x, y| (y == 0 && x < 10) || (x >= 10 && y < 2));
    let rho = overlap_ratio(&mask, &PatchGrid::new(10, 20, 10).unwrap()).map_err(|e| e.to_string())?;
    ensure!(rho == vec![0.1, 0.2], "unexpected ratios {rho:?}");
    ensure!(object_token_set(&rho, 0.1) == vec![1], "patch at exactly tau was selected");
    Ok("100 masks sum exactly; 0.1 excluded, 0.100001 included".into())
}

fn gqa_expansion() -> Outcome {
    let mut rng = stream(505);
    ensure!(group_factor(32, 8) == Ok(4), "32 heads over 8 key-value heads should give 4");
    let mut cases = vec![(2, 8, 4, 5, 3)];
    for _ in 0..50 {
        cases.push((rng.random_range(1..3), rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..7), rng.random_range(1..5)));
    }
    for (b, kh, g, l, d) in cases {
        let v = Array4::from_shape_fn((b, kh, l, d), |_| rng.random::<f32>());
        let out = expand_kv_heads(&v, g).map_err(|e| e.to_string())?;
        ensure!(out.dim() == (b, kh * g, l, d), "shape {:?}", out.dim());
        for ((bi, h, li, di), x) in out.indexed_iter() {
            ensure!(*x == v[[bi, h / g, li, di]], "head {h} is not a copy of {}", h / g);
        }
    }
    Ok("51 random shapes including 8 kv heads x 4 = 32".into())
}

fn lpv() -> Outcome {
    let mut rng = stream(606);
    let mut worst_row = 0.0f64;
    let mut worst_prod = 0.0f64;
    for _ in 0..200 {
        let s = rng.random_range(2..12);
        let map = Array2::from_shape_fn((s, s), |_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) });
        let t = transition_matrix(&map).map_err(|e| e.to_string())?;
        worst_row = t.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(worst_row, f64::max);
        let u = transition_matrix(&Array2::from_shape_fn((s, s), |_| rng.random_range(0.0..1.0))).unwrap();
        let c = compose(&[t.clone(), u.clone()], 2).map_err(|e| e.to_string())?;
        let mut direct = Array2::<f64>::zeros((s, s));
        for i in 0..s {
            for j in 0..s {
                direct[[i, j]] = (0..s).map(|m| t[[i, m]] * u[[m, j]]).sum();
            }
        }
        worst_prod = c.iter().zip(direct.iter()).map(|(x, y)| (x - y).abs()).fold(worst_prod, f64::max);
    }
    ensure!(worst_row <= 1e-6, "transition rows off by {worst_row}");
    ensure!(worst_prod <= 1e-10, "compose differs from the direct product by {worst_prod}");

    let s = 6;
    let caps: Vec<LayerCapture> = (0..4)
        .map(|l| {
            let a = random_tensor(&mut rng, 2, s, s).into_weights();
            LayerCapture::new(l, a, Array3::zeros((2, s, s))).unwrap()
        })
        .collect();
    let r = propagate(&caps, 4, &[s - 1]).map_err(|e| e.to_string())?;
    for (i, row) in r.composed.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            ensure!(*v == if i == j { 1.0 } else { 0.0 }, "zero gradients did not give the identity");
        }
    }
    let a = random_tensor(&mut rng, 3, s, s).into_weights();
    let g = Array3::from_shape_fn((3, s, s), |_| -rng.random_range(0.0..2.0));
    ensure!(gradient_weighted_map(&a, &g).unwrap().iter().all(|v| *v == 0.0), "non-positive gradients leaked through");
    Ok(format!("rows {worst_row:.1e}, compose {worst_prod:.1e}, identity and clamp exact"))
}

fn iou_readout() -> Outcome {
    let grid = PatchGrid::new(64, 512, 512).unwrap();
    let patches = [3usize, 10, 11, 42, 63];
    let mask = BinaryMask::from_fn(512, 512, |x, y| patches.contains(&grid.patch_of(x, y)));
    let indicator: Vec<f64> = (0..grid.num_patches()).map(|i| if patches.contains(&i) { 1.0 } else { 0.0 }).collect();
    let s = attention_iou(&indicator, &grid, &mask, 0.5).map_err(|e| e.to_string())?;
    ensure!(s.iou_object == 1.0 && s.iou_background == 0.0, "indicator scored {s:?}");
    let z = attention_iou(&vec![0.0; 64], &grid, &mask, 0.5).map_err(|e| e.to_string())?;
    ensure!((z.iou_object, z.iou_background) == (0.0, 0.0), "zero relevance scored {z:?}");
    Ok("indicator gives (1, 0); zero relevance gives (0, 0)".into())
}

fn end_to_end() -> Outcome {
    let data = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig { axes: vec![], ..DatasetConfig::default() };
    generate_dataset(&cfg, data.path()).map_err(|e| e.to_string())?;
    let manifests = DatasetIndex::load(data.path()).and_then(|i| i.load_manifests(data.path())).map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().unwrap();
    let exp = |backend: &str, file: &str| {
        let mut c = ExperimentConfig::new(data.path(), backend, out.path().join(file));
        c.rungs = vec![LadderId::P1, LadderId::P2, LadderId::P3];
        c
    };

    let oracle = exp("mock-oracle", "oracle.jsonl");
    run_experiment(&oracle).map_err(|e| e.to_string())?;
    let recs = load_existing(&oracle.output).map_err(|e| e.to_string())?;
    ensure!(recs.len() == 150, "oracle wrote {} records", recs.len());
    let rep = emit_report(&recs, &manifests, &[], &out.path().join("oracle")).map_err(|e| e.to_string())?;
    ensure!(rep.accuracy == 1.0 && rep.mrce == Some(0.0), "oracle accuracy {} mrce {:?}", rep.accuracy, rep.mrce);

    let biased = exp("mock-biased:0.8", "biased.jsonl");
    run_experiment(&biased).map_err(|e| e.to_string())?;
    let recs = load_existing(&biased.output).map_err(|e| e.to_string())?;
    let got = mrce(&recs).ok_or("biased mrce undefined")?;
    let terms: Vec<f64> = manifests
        .iter()
        .filter(|m| m.true_count > 0)
        .map(|m| ((m.true_count as f64 * 0.8).round() - m.true_count as f64).abs() / m.true_count as f64)
        .collect();
    let want = terms.iter().sum::<f64>() / terms.len() as f64;
    ensure!((got - want).abs() < 1e-12, "biased mrce {got} but the rounding oracle gives {want}");
    ensure!((0.16..=0.24).contains(&got), "biased mrce {got} outside [0.16, 0.24]");

    let mut part = exp("mock-biased:0.8", "resumed.jsonl");
    part.max_records = Some(37);
    run_experiment(&part).map_err(|e| e.to_string())?;
    part.max_records = None;
    part.resume = true;
    let s = run_experiment(&part).map_err(|e| e.to_string())?;
    ensure!(s.skipped == 37 && s.written == 113, "resume skipped {} wrote {}", s.skipped, s.written);
    ensure!(fs::read(&part.output).unwrap() == fs::read(&biased.output).unwrap(), "resumed JSONL differs");
    Ok(format!("oracle 150/150, biased mrce {got:.4} (oracle {want:.4}), resume identical"))
}

fn all_plans() -> Outcome {
    let mut rng = stream(707);
    let expected = [
        (ModelFamily::Qwen25, 32, [0, 8], [8, 24], [24, 32]),
        (ModelFamily::Kimi, 27, [0, 9], [9, 18], [18, 27]),
    ];
    let (k, span) = (12, VisualSpan::new(2, 9).unwrap());
    let objects = ObjectTokens::new(span, vec![3, 4, 8]).unwrap();
    let mut n = 0;
    for (family, layers, early, middle, late) in expected {
        let g = family.groups();
        ensure!(
            (g.num_layers, g.early, g.middle, g.late) == (layers, early, middle, late),
            "{} groups {g:?}",
            family.name()
        );
        let tensors: Vec<AttentionTensor> = (0..layers).map(|_| random_tensor(&mut rng, 2, 3, k)).collect();
        for name in StrategyName::ALL {
            let plan = InterventionPlan::new(name, family);
            plan.validate().map_err(|e| format!("{}: {e}", name.name()))?;
            let map = plan.layer_map();
            ensure!(map.len() == layers, "{}: {} layers mapped", name.name(), map.len());
            ensure!(plan.lookup(layers).is_err(), "{}: layer {layers} should be out of range", name.name());
            if name == StrategyName::Baseline {
                ensure!(map.iter().all(|c| c.kind == StrategyKind::None), "baseline touches a layer");
            }
            let out = apply_intervention(&tensors, &plan, span, Some(&objects)).map_err(|e| format!("{}: {e}", name.name()))?;
            ensure!(out.layers.len() == layers, "{}: output layer count", name.name());
            let worst = out.layers.iter().map(rows_stochastic).fold(0.0, f64::max);
            ensure!(worst <= 1e-6, "{}: rows off by {worst}", name.name());
            let json = serde_json::to_string(&plan).unwrap();
            ensure!(InterventionPlan::from_json(&json).ok() == Some(plan), "{}: json round trip", name.name());
            n += 1;
        }
    }
    ensure!(StrategyName::ALL.len() == 19, "{} strategies", StrategyName::ALL.len());
    Ok(format!("{n} plans cover every layer of 32- and 27-layer models"))
}

fn main() -> ExitCode {
    let mut shared = None;
    let mut failures = 0;
    let mut check = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failures += 1;
                println!("FAIL {name}: {why} ({secs:.1}s)");
            }
        }
    };
    check("dataset_determinism", &mut || dataset_determinism(&mut shared));
    check("bucket_balance", &mut || bucket_balance(&shared));
    check("variation_isolation", &mut || variation_isolation(&shared));
    check("mrce_oracle", &mut mrce_oracle);
    check("attention_operators", &mut attention_operators);
    check("balance_modes", &mut balance_modes);
    check("overlap_ratio", &mut overlap_ratio_check);
    check("gqa_expansion", &mut gqa_expansion);
    check("relevance_propagation", &mut lpv);
    check("iou_readout", &mut iou_readout);
    check("end_to_end", &mut end_to_end);
    check("strategy_plans", &mut all_plans);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
