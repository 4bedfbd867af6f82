//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Every check uses its own oracle (pair counting, exhaustive sweeps, O(B^2)
//! chord enumeration, closed forms) rather than the library's helpers.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use earsym::alignment::{align, longest_chords, DEFAULT_CHORDS};
use earsym::embedding::{EmbedderSpec, ToyEmbedder};
use earsym::metrics::{auc, eer, fnmr_at_fmr, MetricConfig};
use earsym::pgm::read_image;
use earsym::protocol::{arrange_classes, generate_pairs, ClassMode, Protocol};
use earsym::side::column_skewness;
use earsym::synth::{gen_mask, gen_subjects, protocol_scores, render_ellipse, run_symmetry_experiment, SynthConfig};
use earsym::{
    classify_side_geometric, Embedding, EmbeddingStore, Entry, GrayImage, Manifest, Mask, Side, SkewConvention, Split,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, runtime budget in seconds, check.
type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- metrics

fn auc_oracle(g: &[f64], i: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &x in g {
        for &y in i {
            wins += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (g.len() * i.len()) as f64
}

fn accepted(v: &[f64], t: f64) -> usize {
    v.iter().filter(|&&s| s >= t).count()
}

fn fnmr_oracle(g: &[f64], i: &[f64], target: f64) -> (f64, f64) {
    let mut thresholds: Vec<f64> = i.to_vec();
    thresholds.push(f64::INFINITY);
    thresholds.sort_by(f64::total_cmp);
    let t = thresholds
        .into_iter()
        .find(|&t| accepted(i, t) as f64 / i.len() as f64 <= target)
        .unwrap();
    ((g.len() - accepted(g, t)) as f64 / g.len() as f64, t)
}

fn eer_oracle(g: &[f64], i: &[f64]) -> (f64, f64) {
    let mut thresholds: Vec<f64> = g.iter().chain(i).copied().collect();
    thresholds.extend([f64::NEG_INFINITY, f64::INFINITY]);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let (ng, ni) = (g.len() as i128, i.len() as i128);
    let fm = |t: f64| accepted(i, t) as i128;
    let fnm = |t: f64| ng - accepted(g, t) as i128;
    let best = thresholds
        .iter()
        .copied()
        .min_by_key(|&t| (fm(t) * ng - fnm(t) * ni).abs())
        .unwrap();
    ((fm(best) as f64 / ni as f64 + fnm(best) as f64 / ng as f64) / 2.0, best)
}

fn random_scores(r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = r.random_range(1..=200);
    let tied = r.random_bool(0.5);
    (0..n)
        .map(|_| {
            if tied {
                r.random_range(-10i32..=10) as f64 / 10.0
            } else {
                r.random_range(-1.0..1.0)
            }
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut worst_auc = 0.0f64;
    for case in 0..500 {
        let g = random_scores(&mut r);
        let mut i = random_scores(&mut r);
        if case % 3 == 0 {
            // shift impostors so the classes separate to varying degrees
            let shift = r.random_range(-1.0..1.0);
            i.iter_mut().for_each(|s| *s -= shift);
        }
        let a = auc(&g, &i).map_err(|e| e.to_string())?;
        worst_auc = worst_auc.max((a - auc_oracle(&g, &i)).abs());
        if (a - auc_oracle(&g, &i)).abs() > 1e-12 {
            return Err(format!("case {case}: auc {a} vs {}", auc_oracle(&g, &i)));
        }
        let op = fnmr_at_fmr(&g, &i, 0.01).map_err(|e| e.to_string())?;
        if (op.rate, op.threshold) != fnmr_oracle(&g, &i, 0.01) {
            return Err(format!("case {case}: fnmr {op:?} vs {:?}", fnmr_oracle(&g, &i, 0.01)));
        }
        let op = eer(&g, &i).map_err(|e| e.to_string())?;
        if (op.rate, op.threshold) != eer_oracle(&g, &i) {
            return Err(format!("case {case}: eer {op:?} vs {:?}", eer_oracle(&g, &i)));
        }
    }
    Ok(format!(
        "500 instances, max auc deviation {worst_auc:.1e}, fnmr/eer exact"
    ))
}

// ---------------------------------------------------------------- chords

/// 4-connected boundary of the largest component (earliest pixel wins ties).
fn boundary_oracle(mask: &Mask) -> Vec<(usize, usize)> {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![usize::MAX; w * h];
    let mut best: Option<(usize, usize)> = None;
    for start in 0..w * h {
        if !mask.data()[start] || label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = start;
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (r, c) = (p / w, p % w);
            let mut next = Vec::with_capacity(4);
            if r > 0 {
                next.push(p - w);
            }
            if r + 1 < h {
                next.push(p + w);
            }
            if c > 0 {
                next.push(p - 1);
            }
            if c + 1 < w {
                next.push(p + 1);
            }
            for q in next {
                if mask.data()[q] && label[q] == usize::MAX {
                    label[q] = start;
                    stack.push(q);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((start, size));
        }
    }
    let Some((root, _)) = best else { return Vec::new() };
    let inside = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && label[r as usize * w + c as usize] == root
    };
    let mut out = Vec::new();
    for r in 0..h as isize {
        for c in 0..w as isize {
            if inside(r, c)
                && [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                    .iter()
                    .any(|&(a, b)| !inside(a, b))
            {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

type ChordTuple = ((usize, usize), (usize, usize), u64);

fn chords_oracle(points: &[(usize, usize)], k: usize) -> Vec<ChordTuple> {
    let mut all = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (a, b) = (points[i].min(points[j]), points[i].max(points[j]));
            let (dr, dc) = (a.0 as i64 - b.0 as i64, a.1 as i64 - b.1 as i64);
            all.push((a, b, (dr * dr + dc * dc) as u64));
        }
    }
    all.sort_by(|x, y| y.2.cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    all.truncate(k);
    all
}

fn random_blob(r: &mut ChaCha8Rng) -> Mask {
    let (w, h) = (r.random_range(4..48), r.random_range(4..48));
    if r.random_bool(0.5) {
        let density = r.random_range(0.3..0.95);
        Mask::from_fn(w, h, |_, _| r.random_bool(density)).unwrap()
    } else {
        let mut data = vec![false; w * h];
        for _ in 0..r.random_range(1..=3) {
            let center = (r.random_range(0.0..h as f64), r.random_range(0.0..w as f64));
            let major = r.random_range(2.0..(w.max(h) as f64 / 2.0).max(2.5));
            let e = render_ellipse(
                w,
                h,
                center,
                major,
                major / r.random_range(1.0..3.0),
                r.random_range(-90.0..90.0),
            );
            data.iter_mut().zip(e.data()).for_each(|(d, &s)| *d |= s);
        }
        Mask::from_vec(w, h, data).unwrap()
    }
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let (mut tested, mut longest) = (0, 0);
    while tested < 200 {
        let mask = random_blob(&mut r);
        let boundary = boundary_oracle(&mask);
        if boundary.len() < 2 || boundary.len() > 300 {
            continue;
        }
        let n_pairs = boundary.len() * (boundary.len() - 1) / 2;
        let k = if tested % 2 == 0 {
            DEFAULT_CHORDS.min(n_pairs)
        } else {
            r.random_range(1..=n_pairs)
        };
        let got: Vec<ChordTuple> = longest_chords(&mask, k)
            .map_err(|e| format!("mask {tested}: {e}"))?
            .iter()
            .map(|c| (c.top, c.bottom, c.squared_length()))
            .collect();
        if got != chords_oracle(&boundary, k) {
            return Err(format!(
                "mask {tested} ({}x{}, k={k}) differs from enumeration",
                mask.width(),
                mask.height()
            ));
        }
        tested += 1;
        longest = longest.max(boundary.len());
    }
    Ok(format!("200 masks, up to {longest} boundary pixels"))
}

// ---------------------------------------------------------------- alignment

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut errors = Vec::new();
    for _ in 0..100 {
        let canvas = r.random_range(120..=200);
        let rot = r.random_range(-45.0..=45.0);
        let major = r.random_range(0.3..0.42) * canvas as f64;
        let aspect = r.random_range(1.6..2.4);
        let c = (canvas as f64 - 1.0) / 2.0;
        let mask = render_ellipse(canvas, canvas, (c, c), major, major / aspect, rot);
        let image = GrayImage::from_fn(canvas, canvas, |y, x| ((y * 3 + x * 5) % 256) as u8).unwrap();
        let out = align(&image, &mask, DEFAULT_CHORDS).map_err(|e| e.to_string())?;
        // the recovered correction undoes the applied rotation
        errors.push((out.result.angle_deg + rot).abs());
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().copied().fold(0.0, f64::max);
    ensure(
        mean < 2.0 && max < 5.0,
        format!("mean error {mean:.3} deg, max {max:.3} deg"),
    )
}

// ---------------------------------------------------------------- symmetry experiment

fn earsym() -> Command {
    Command::new(env!("CARGO_BIN_EXE_earsym"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = earsym().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "earsym {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("exp");
    let started = Instant::now();
    run_cli(&[
        "experiment",
        "symmetry",
        "--n-subjects",
        "200",
        "--imgs-per-side",
        "10",
        "--dim",
        "64",
        "--delta",
        "0.4",
        "--epsilon",
        "0.3",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ])?;
    let elapsed = started.elapsed();
    let text = fs::read_to_string(out.join("metrics.json")).map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let num = |k: &str| v[k].as_f64().ok_or_else(|| format!("metrics.json lacks {k}"));
    let gap = num("dprime_gap")?;
    let dg = num("genuine_mean_same")? - num("genuine_mean_opposite")?;
    let di = (num("impostor_mean_same")? - num("impostor_mean_opposite")?).abs();
    let recomputed = v["same_side"]["dprime"].as_f64().unwrap_or(f64::NAN)
        - v["opposite_side"]["dprime"].as_f64().unwrap_or(f64::NAN);
    ensure(
        gap > 0.5 && dg > 0.05 && di < 0.02 && (gap - recomputed).abs() < 1e-12 && elapsed < Duration::from_secs(20),
        format!(
            "d' gap {gap:.3}, genuine shift {dg:.4}, impostor diff {di:.5}, cli {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn full_config(delta: f64, epsilon: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 200,
        imgs_per_side: 10,
        dim: 64,
        delta,
        epsilon,
        seed,
    }
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let report = run_symmetry_experiment(&full_config(0.0, 0.3, seed), &MetricConfig::default())
            .map_err(|e| e.to_string())?;
        worst = worst.max(report.dprime_gap.abs());
    }
    ensure(worst < 0.15, format!("max |d' gap| {worst:.4} over seeds 0-9"))
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for delta in [0.0, 0.2, 0.4] {
        let data = gen_subjects(&full_config(delta, 0.0, 42)).map_err(|e| e.to_string())?;
        let (_, opposite) = protocol_scores(&data.manifest, &data.embeddings).map_err(|e| e.to_string())?;
        let want = (1.0 - delta * delta) / (1.0 + delta * delta);
        for g in opposite.genuine() {
            worst = worst.max((g - want).abs());
            count += 1;
        }
    }
    ensure(
        count > 0 && worst <= 1e-9,
        format!("{count} opposite-side genuine scores, max deviation {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- flip fusion

fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> std::io::Result<()> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes)
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for n in 0..100 {
        let (w, h) = (r.random_range(8..80), r.random_range(8..80));
        let pixels: Vec<u8> = (0..w * h).map(|_| r.random()).collect();
        let mirrored: Vec<u8> = (0..h)
            .flat_map(|y| (0..w).rev().map(move |x| (y, x)))
            .map(|(y, x)| pixels[y * w + x])
            .collect();
        let (a, b) = (
            dir.path().join(format!("{n}.pgm")),
            dir.path().join(format!("{n}_m.pgm")),
        );
        write_pgm(&a, w, h, &pixels).map_err(|e| e.to_string())?;
        write_pgm(&b, w, h, &mirrored).map_err(|e| e.to_string())?;
        let embedder = ToyEmbedder::new(EmbedderSpec::toy(n as u64, 512)).map_err(|e| e.to_string())?;
        let ea = embedder
            .embed_image(&read_image(&a).map_err(|e| e.to_string())?, None, false)
            .map_err(|e| e.to_string())?;
        let eb = embedder
            .embed_image(&read_image(&b).map_err(|e| e.to_string())?, None, false)
            .map_err(|e| e.to_string())?;
        for (x, y) in ea.values().iter().zip(eb.values()) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(
        worst <= 1e-6,
        format!("100 images, max componentwise difference {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- side baseline

fn mirror_mask(m: &Mask) -> Mask {
    Mask::from_fn(m.width(), m.height(), |r, c| m.get(r, m.width() - 1 - c)).unwrap()
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut checked = 0;
    for n in 0..500 {
        let (w, h) = (r.random_range(3..40), r.random_range(3..40));
        let density = r.random_range(0.1..0.9);
        let m = Mask::from_fn(w, h, |_, _| r.random_bool(density)).unwrap();
        if m.count() < 3 || column_skewness(&m).abs() <= 1e-9 {
            continue;
        }
        checked += 1;
        let a = classify_side_geometric(&m, SkewConvention::PositiveRight).map_err(|e| e.to_string())?;
        let b = classify_side_geometric(&mirror_mask(&m), SkewConvention::PositiveRight).map_err(|e| e.to_string())?;
        if a.value == b.value {
            return Err(format!("mask {n} keeps its label under mirroring"));
        }
    }
    let mut correct = 0;
    for n in 0..200u64 {
        let side = if r.random_bool(0.5) { Side::Left } else { Side::Right };
        let (mask, truth) = gen_mask(side, r.random_range(-30.0..=30.0), 128, n).map_err(|e| e.to_string())?;
        let label = classify_side_geometric(&mask, SkewConvention::PositiveRight).map_err(|e| e.to_string())?;
        correct += usize::from(label.value == truth.side && truth.side == side);
    }
    let accuracy = correct as f64 / 200.0;
    ensure(
        checked >= 400 && accuracy >= 0.95,
        format!(
            "antisymmetric on {checked} skewed masks, accuracy {:.1}% on 200 ear masks",
            accuracy * 100.0
        ),
    )
}

// ---------------------------------------------------------------- class arrangement and pairs

fn entry(id: String, subject: String, side: Side, split: Split) -> Entry {
    Entry {
        id,
        subject,
        side: Some(side),
        split,
        pose_deg: None,
    }
}

fn choose2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn criterion_9() -> Outcome {
    let n = 50;
    let mut entries = Vec::new();
    for s in 0..n {
        for side in [Side::Left, Side::Right] {
            for i in 0..2 {
                entries.push(entry(
                    format!("s{s:03}_{}{i}", side.code()),
                    format!("s{s:03}"),
                    side,
                    Split::Train,
                ));
            }
        }
    }
    let m = Manifest::new(entries).map_err(|e| e.to_string())?;
    let single = arrange_classes(&m, ClassMode::Single)
        .map_err(|e| e.to_string())?
        .num_classes;
    let split = arrange_classes(&m, ClassMode::Split)
        .map_err(|e| e.to_string())?
        .num_classes;
    if single != n || split != 2 * n {
        return Err(format!("SINGLE {single}, SPLIT {split} for {n} subjects"));
    }

    let mut r = rng(9);
    for case in 0..100 {
        let mut entries = Vec::new();
        for s in 0..r.random_range(1..15) {
            for side in [Side::Left, Side::Right] {
                for i in 0..r.random_range(0..5) {
                    let split = if r.random_bool(0.2) { Split::Train } else { Split::Test };
                    entries.push(entry(format!("x{s}{}{i}", side.code()), format!("x{s}"), side, split));
                }
            }
        }
        let test: Vec<&Entry> = entries.iter().filter(|e| e.split == Split::Test).collect();
        if test.len() < 2 {
            continue;
        }
        let n_l = test.iter().filter(|e| e.side == Some(Side::Left)).count();
        let n_r = test.len() - n_l;
        let subject: BTreeMap<&str, &str> = test.iter().map(|e| (e.id.as_str(), e.subject.as_str())).collect();
        let m = Manifest::new(entries.clone()).map_err(|e| e.to_string())?;
        let sets: Vec<_> = [Protocol::SameSide, Protocol::OppositeSide, Protocol::All]
            .into_iter()
            .map(|p| generate_pairs(&m, p))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let keys = |k: usize| -> BTreeSet<(String, String)> {
            sets[k]
                .pairs
                .iter()
                .map(|p| {
                    let (a, b) = sets[k].id_pair(p);
                    (a.min(b).to_string(), a.max(b).to_string())
                })
                .collect()
        };
        let (same, opposite, all) = (keys(0), keys(1), keys(2));
        let union: BTreeSet<_> = same.union(&opposite).cloned().collect();
        let genuine_ok = sets.iter().all(|set| {
            set.pairs.iter().all(|p| {
                let (a, b) = set.id_pair(p);
                p.genuine == (subject[a] == subject[b])
            })
        });
        let ok = same.is_disjoint(&opposite)
            && union == all
            && sets[0].len() == choose2(n_l) + choose2(n_r)
            && sets[1].len() == n_l * n_r
            && sets[2].len() == choose2(test.len())
            && same.len() == sets[0].len()
            && genuine_ok;
        if !ok {
            return Err(format!(
                "manifest {case}: partition or counts violated (nL={n_l}, nR={n_r})"
            ));
        }
    }
    Ok(format!(
        "SINGLE {single}, SPLIT {split} for {n} subjects; partition and counts hold on 100 manifests"
    ))
}

// ---------------------------------------------------------------- determinism

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out.remove(Path::new("run.json"));
    out
}

fn store_roundtrip(dir: &Path) -> Outcome {
    let mut r = rng(10);
    let embeddings: Vec<(String, Embedding)> = (0..100)
        .map(|i| {
            let v: Vec<f64> = (0..37)
                .map(|_| r.random_range(-1e3..1e3) * 10f64.powi(r.random_range(-30..30)))
                .collect();
            (format!("e{i:03}"), Embedding::new(v).unwrap())
        })
        .collect();
    let store = EmbeddingStore::from_embeddings(37, embeddings.iter().map(|(id, e)| (id.as_str(), e)))
        .map_err(|e| e.to_string())?;
    let path = dir.join("roundtrip");
    store.save(&path).map_err(|e| e.to_string())?;
    let loaded = EmbeddingStore::load(&path).map_err(|e| e.to_string())?;
    for (id, e) in &embeddings {
        let want: Vec<u32> = e.values().iter().map(|&v| (v as f32).to_bits()).collect();
        let got: Vec<u32> = loaded
            .row(id)
            .ok_or(format!("{id} lost"))?
            .iter()
            .map(|v| v.to_bits())
            .collect();
        if want != got || loaded.ids() != store.ids() {
            return Err(format!("{id} changed in the store round-trip"));
        }
    }
    Ok("store round-trip bit-exact".into())
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let mut summary = vec![store_roundtrip(root)?];

    let p = |name: &str| root.join(name).to_str().unwrap().to_string();
    let synth = p("synth");
    let manifest = format!("{synth}/manifest.csv");
    let (images, masks, store) = (
        format!("{synth}/images"),
        format!("{synth}/masks"),
        format!("{synth}/store"),
    );
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "synth",
            vec![
                "synth",
                "--n-subjects",
                "6",
                "--imgs-per-side",
                "2",
                "--canvas",
                "96",
                "--seed",
                "3",
                "--out",
                synth.as_str(),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "side",
            vec![
                "side".into(),
                "--manifest".into(),
                manifest.clone(),
                "--masks".into(),
                masks.clone(),
                "--out".into(),
                p("side"),
            ],
        ),
        (
            "align",
            vec![
                "align".into(),
                "--images".into(),
                images.clone(),
                "--masks".into(),
                masks.clone(),
                "--out".into(),
                p("align"),
            ],
        ),
        (
            "embed-toy",
            vec![
                "embed".into(),
                "--images".into(),
                images.clone(),
                "--masks".into(),
                masks.clone(),
                "--dim".into(),
                "64".into(),
                "--seed".into(),
                "1".into(),
                "--out".into(),
                p("embed"),
            ],
        ),
        (
            "embed-file",
            vec![
                "embed".into(),
                "--embedder".into(),
                "file".into(),
                "--features".into(),
                store.clone(),
                "--flipped".into(),
                p("embed"),
                "--out".into(),
                p("fused"),
            ],
        ),
        (
            "pairs",
            vec![
                "pairs".into(),
                "--manifest".into(),
                manifest.clone(),
                "--protocol".into(),
                "all".into(),
                "--impostor-limit".into(),
                "40".into(),
                "--seed".into(),
                "2".into(),
                "--out".into(),
                p("pairs"),
            ],
        ),
        (
            "score",
            vec![
                "score".into(),
                "--pairs".into(),
                format!("{}/pairs.csv", p("pairs")),
                "--store".into(),
                store.clone(),
                "--out".into(),
                p("score"),
            ],
        ),
        (
            "metrics",
            vec![
                "metrics".into(),
                "--scores".into(),
                format!("{}/scores.csv", p("score")),
                "--bootstrap".into(),
                "100".into(),
                "--svg".into(),
                "--seed".into(),
                "4".into(),
                "--out".into(),
                p("metrics"),
            ],
        ),
        (
            "arrange",
            vec![
                "arrange".into(),
                "--manifest".into(),
                p("train.csv"),
                "--mode".into(),
                "split".into(),
                "--out".into(),
                p("arrange"),
            ],
        ),
        (
            "experiment",
            vec![
                "experiment".into(),
                "symmetry".into(),
                "--n-subjects".into(),
                "10".into(),
                "--imgs-per-side".into(),
                "3".into(),
                "--bootstrap".into(),
                "100".into(),
                "--svg".into(),
                "--seed".into(),
                "5".into(),
                "--out".into(),
                p("experiment"),
            ],
        ),
        (
            "identify",
            vec![
                "identify".into(),
                "--gallery".into(),
                p("gallery.csv"),
                "--probes".into(),
                p("probes.csv"),
                "--store".into(),
                store.clone(),
                "--k".into(),
                "2".into(),
                "--out".into(),
                p("identify"),
            ],
        ),
    ];
    for (name, args) in &runs {
        if *name == "side" {
            // manifests for arrange and identify, derived from the synthetic one
            let text = fs::read_to_string(&manifest).map_err(|e| e.to_string())?;
            let mut lines = text.lines();
            let header = lines.next().unwrap_or_default();
            let rows: Vec<&str> = lines.collect();
            let select = |keep: &dyn Fn(&str) -> bool| -> String {
                std::iter::once(header)
                    .chain(rows.iter().copied().filter(|l| keep(l)))
                    .map(|l| format!("{l}\n"))
                    .collect()
            };
            let write = |f: &str, s: String| fs::write(root.join(f), s).map_err(|e| e.to_string());
            write("train.csv", select(&|_| true).replace(",test,", ",train,"))?;
            write("gallery.csv", select(&|l| l.contains(",L,")))?;
            write("probes.csv", select(&|l| l.contains(",R,")))?;
        }
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        run_cli(&args)?;
    }
    let mut replayed = 0;
    for (name, args) in &runs {
        let out = PathBuf::from(args.last().unwrap());
        let again = root.join(format!("replay-{name}"));
        run_cli(&[
            "replay",
            "--config",
            out.join("run.json").to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ])?;
        let (a, b) = (tree(&out), tree(&again));
        if a.is_empty() || a != b {
            return Err(format!("replaying {name} changed its outputs"));
        }
        replayed += 1;
    }
    // in place, into the recorded directory
    let before = tree(&root.join("metrics"));
    run_cli(&["replay", "--config", &format!("{}/run.json", p("metrics"))])?;
    if before != tree(&root.join("metrics")) {
        return Err("in-place replay of metrics changed its outputs".into());
    }
    summary.push(format!("{replayed} subcommands replay byte-identically"));
    Ok(summary.join("; "))
}

// ---------------------------------------------------------------- driver

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracles", Some(30), criterion_1),
        ("chord oracle", Some(60), criterion_2),
        ("alignment recovery", Some(60), criterion_3),
        ("same- vs opposite-side separation", None, criterion_4),
        ("null symmetry", None, criterion_5),
        ("closed-form opposite-side cosine", None, criterion_6),
        ("flip-fusion mirror invariance", None, criterion_7),
        ("side baseline", None, criterion_8),
        ("class arrangement and pair partition", None, criterion_9),
        ("determinism and round-trips", None, criterion_10),
    ];
    let mut failed = 0;
    for (n, (name, limit, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        let outcome = match (outcome, limit) {
            (Ok(d), Some(l)) if secs >= l as f64 => Err(format!("{d}; over the {l}s budget")),
            (o, _) => o,
        };
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {:>2} {status} {name}: {detail} [{secs:.1}s]", n + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 10 acceptance criteria passed");
}
