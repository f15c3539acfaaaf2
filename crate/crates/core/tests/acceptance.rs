//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ribsupp::metrics::{
    combined_loss, l1, ms_ssim, psnr, Loss, MetricsReport, DEFAULT_ALPHA, DEFAULT_BETA,
};
use ribsupp::phantom::{generate_phantom, Background, PhantomCase, PhantomSpec};
use ribsupp::st_space::{column_count, compute_depth, forward_st, inverse_st, StField};
use ribsupp::suppression::{
    derivative_s, reintegrate_paired, suppress_all, PipelineOptions, RibParams, SuppressionParams,
};
use ribsupp::tuner::{random_grid_search, supervised_objective, SearchConfig};
use ribsupp::{Contour, Image, Point, SuppressionResult};

mod common;
use common::{clearance, ngon, oracle_depth, rect, reference_ms_ssim, seg_dist, textured};

const MAX: f64 = 4095.0;
const AMPLITUDE: f64 = 0.1 * MAX;

type Outcome = Result<String, String>;

fn phantom(seed: u64, background: Background, vessels: usize, nodules: usize) -> PhantomCase {
    generate_phantom(&PhantomSpec {
        width: 512,
        height: 512,
        max_value: MAX,
        n_ribs: 20,
        rib_amplitude: AMPLITUDE,
        background,
        vessel_count: vessels,
        nodule_count: nodules,
        seed,
        ..PhantomSpec::default()
    })
    .expect("phantom")
}

fn low_frequency() -> Background {
    // wavelength 60 = 4 x default kappa_t
    Background::LowFrequency {
        mean: 1500.0,
        amplitude: 100.0,
        wavelength: 60.0,
    }
}

fn suppress(case: &PhantomCase, p: SuppressionParams) -> SuppressionResult {
    suppress_all(
        &case.raw,
        &case.masks,
        &RibParams::uniform(p),
        &PipelineOptions::default(),
    )
    .expect("suppression")
}

fn masked_rmse(a: &Image, b: &Image, mask: &[bool]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..mask.len() {
        if mask[i] {
            sum += (a.data()[i] - b.data()[i]).powi(2);
            n += 1;
        }
    }
    (sum / n as f64).sqrt()
}

fn criterion_1() -> Outcome {
    let mut worst = [0.0f64; 2];
    for (k, bg) in [Background::Constant { value: 1000.0 }, low_frequency()]
        .into_iter()
        .enumerate()
    {
        for seed in 0..10 {
            let case = phantom(seed, bg.clone(), 0, 0);
            let r = suppress(&case, SuppressionParams::default());
            let e = masked_rmse(&r.soft, &case.gt_soft, &case.masks.union()) / AMPLITUDE;
            worst[k] = worst[k].max(e);
        }
    }
    let msg = format!(
        "worst RMSE/A constant {:.3}% (<= 1%), low-frequency {:.3}% (<= 3%)",
        100.0 * worst[0],
        100.0 * worst[1]
    );
    if worst[0] <= 0.01 && worst[1] <= 0.03 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut min_bone = f64::INFINITY;
    let mut cases = 0;
    let variants = [
        (Background::Constant { value: 1000.0 }, 0, 0),
        (low_frequency(), 0, 0),
        (low_frequency(), 6, 4),
    ];
    for (bg, vessels, nodules) in variants {
        for seed in 0..4 {
            let case = phantom(seed, bg.clone(), vessels, nodules);
            for p in [
                SuppressionParams::default(),
                SuppressionParams {
                    kappa_t: 3.75,
                    k_center: 1,
                    s_b: 4.5,
                    k_border: 9,
                    tau: 1.0,
                },
            ] {
                let r = suppress(&case, p);
                let bone = r.bone_image();
                for i in 0..bone.data().len() {
                    let sum = r.soft_pre_blend.data()[i] + bone.data()[i];
                    worst_sum = worst_sum.max((sum - case.raw.data()[i]).abs());
                }
                for b in &r.bones {
                    for &v in &b.values {
                        min_bone = min_bone.min(v);
                    }
                }
                cases += 1;
            }
        }
    }
    let msg = format!(
        "{cases} runs: max |input - soft_pre_blend - sum bone| = {worst_sum:.2e} (<= 1e-9), min bone {min_bone}"
    );
    if worst_sum <= 1e-9 && min_bone >= 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn blob() -> Contour {
    let n = 48;
    Contour::new(
        (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                let r = 40.0 + 10.0 * (3.0 * a).sin() + 4.0 * (5.0 * a).cos();
                Point::new(64.0 + r * a.cos(), 64.0 + r * a.sin())
            })
            .collect(),
    )
    .unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = Arc::new(blob());
    let n = column_count(&c, 1.0);
    let mut field_err = 0.0f64;
    for _ in 0..100 {
        let depth: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..30.0)).collect();
        let scale = 10f64.powf(rng.random_range(-2.0..4.0));
        let f = StField::from_fn(Arc::clone(&c), 1.0, 1.0, depth, |_, _| {
            scale * rng.random_range(-1.0..1.0)
        })
        .unwrap();
        let r = reintegrate_paired(&derivative_s(&f));
        for t in 0..n {
            let f0 = f.get(t, 0).unwrap();
            for s in 0..f.valid_len(t) {
                field_err =
                    field_err.max((r.get(t, s).unwrap() - (f.get(t, s).unwrap() - f0)).abs());
            }
        }
    }

    let mut point_err = 0.0f64;
    let mut checked = 0;
    let v = c.vertices();
    while checked < 1000 {
        let p = Point::new(rng.random_range(10.0..118.0), rng.random_range(10.0..118.0));
        if !c.contains(p) || clearance(&c, p) < 1e-6 {
            continue;
        }
        let mut d: Vec<f64> = (0..v.len())
            .map(|i| seg_dist(p, v[i], v[(i + 1) % v.len()]))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if d[1] - d[0] < 1e-6 {
            continue;
        }
        let st = forward_st(&c, p).unwrap();
        point_err = point_err.max(inverse_st(&c, st.s, st.t).distance(p));
        checked += 1;
    }
    let msg = format!(
        "100 fields: max error {field_err:.2e}; 1000 points: max round trip {point_err:.2e} px (both <= 1e-9)"
    );
    if field_err <= 1e-9 && point_err <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let ds = 1.0;
    let (r, sides) = (20.0, 64);
    // sagitta of one polygon edge
    let poly_err = r * (1.0 - (PI / sides as f64).cos());
    let circle = ngon(sides, r, 32.0, 32.0);
    let circle_err = compute_depth(&circle, 1.0, ds)
        .iter()
        .map(|d| (d - r).abs())
        .fold(0.0, f64::max);

    let mut rect_err = 0.0f64;
    for c in [rect(5.0, 5.0, 100.0, 10.0), rect(3.0, 4.0, 30.0, 22.0)] {
        let depth = compute_depth(&c, 1.0, ds);
        let step = c.total_length() / depth.len() as f64;
        let cum = c.cum_length();
        for (j, &d) in depth.iter().enumerate() {
            let t = j as f64 * step;
            if cum.iter().any(|&v| (v - t).abs() < 1e-6) {
                continue;
            }
            rect_err = rect_err.max((d - oracle_depth(&c, t)).abs());
        }
    }
    let msg = format!(
        "circle max |depth - R| {circle_err:.3} (<= {:.3}); rectangles max |depth - oracle| {rect_err:.3} (<= {ds})",
        ds + poly_err
    );
    if circle_err <= ds + poly_err && rect_err <= ds {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let mut fails = Vec::new();

    let x = Image::filled(4, 4, 0.5, 1.0);
    let y = Image::filled(4, 4, 0.6, 1.0);
    let p = psnr(&x, &y, 1.0).unwrap().value();
    if (p - 2.0).abs() > 1e-9 {
        fails.push(format!("psnr {p} != 2"));
    }

    let mut ref_err = 0.0f64;
    let mut self_err = 0.0f64;
    for k in 0..20u64 {
        let a = textured(100 + 2 * k, 184, 180, 255.0);
        let b = textured(101 + 2 * k, 184, 180, 255.0);
        let got = ms_ssim(&a, &b, 255.0).unwrap();
        ref_err = ref_err.max((got - reference_ms_ssim(a.data(), b.data(), 184, 180, 255.0)).abs());
        self_err = self_err.max((ms_ssim(&a, &a, 255.0).unwrap() - 1.0).abs());
    }
    if self_err > 1e-9 {
        fails.push(format!("ms_ssim(x, x) off by {self_err:e}"));
    }
    if ref_err > 1e-3 {
        fails.push(format!("ms_ssim vs reference {ref_err:e}"));
    }

    let a = textured(7, 192, 192, MAX);
    let b = textured(8, 192, 192, MAX);
    let l = combined_loss(&a, &b, 1.0, DEFAULT_BETA, MAX).unwrap();
    if l != Loss::Finite(-psnr(&a, &b, MAX).unwrap().value()) {
        fails.push(format!("alpha = 1 loss {l:?}"));
    }
    let expect = -0.75 * psnr(&a, &b, MAX).unwrap().value()
        + 0.25 * (0.25 * (1.0 - ms_ssim(&a, &b, MAX).unwrap()) + 0.75 * l1(&a, &b).unwrap());
    let report = MetricsReport::compute(&a, &b, DEFAULT_ALPHA, DEFAULT_BETA).unwrap();
    let got = report.combined.map(Loss::value).unwrap_or(f64::NAN);
    if DEFAULT_ALPHA != 0.75 || DEFAULT_BETA != 0.25 || (got - expect).abs() > 1e-9 * expect.abs() {
        fails.push(format!("defaults: {got} vs {expect}"));
    }

    let msg = format!(
        "psnr {p}, ms_ssim self {self_err:.1e}, reference diff {ref_err:.1e} over 20 pairs, alpha=1 exact, defaults 0.75/0.25"
    );
    if fails.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}: {}", fails.join("; ")))
    }
}

fn criterion_6() -> Outcome {
    let case = phantom(0, low_frequency(), 6, 4);
    let mut times = Vec::new();
    for threads in [1, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let secs = pool.install(|| {
            let start = Instant::now();
            suppress(&case, SuppressionParams::default());
            start.elapsed().as_secs_f64()
        });
        times.push(secs);
    }
    let msg = format!(
        "512x512, 20 ribs: {:.3} s on 1 thread (< 60), {:.3} s on 8 threads (< 10)",
        times[0], times[1]
    );
    if times[0] < 60.0 && times[1] < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let detuned = SuppressionParams {
        kappa_t: SuppressionParams::default().kappa_t / 4.0,
        ..SuppressionParams::default()
    };
    let mut fails = Vec::new();
    let mut gains = Vec::new();
    for seed in 0..3u64 {
        let case = phantom(seed, low_frequency(), 6, 4);
        let objective = supervised_objective(&case.gt_soft);
        let cfg = SearchConfig {
            budget: 50,
            seed,
            baseline: detuned,
            ..SearchConfig::default()
        };
        let (best, trace) = random_grid_search(&case.raw, &case.masks, &cfg, &objective).unwrap();
        let (again, trace2) = random_grid_search(&case.raw, &case.masks, &cfg, &objective).unwrap();
        if best != again || trace.clone().without_timings() != trace2.without_timings() {
            fails.push(format!("seed {seed}: not deterministic"));
        }
        let base = trace.entries[0].objective.unwrap();
        let found = trace.best_entry().objective.unwrap();
        if found > base {
            fails.push(format!(
                "seed {seed}: best {found} worse than baseline {base}"
            ));
        }

        let plain = SearchConfig {
            baseline: SuppressionParams::default(),
            ..cfg.clone()
        };
        let (_, t) = random_grid_search(&case.raw, &case.masks, &plain, &objective).unwrap();
        if t.best_entry().objective.unwrap() > t.entries[0].objective.unwrap() {
            fails.push(format!("seed {seed}: worse than defaults"));
        }

        let gain = 1.0 - found / base;
        if gain < 0.25 {
            fails.push(format!("seed {seed}: improvement {:.1}%", 100.0 * gain));
        }
        gains.push(format!("{:.1}%", 100.0 * gain));
    }
    let msg = format!(
        "deterministic, never worse than baseline, improvement over kappa_t/4 {} (>= 25%)",
        gains.join(" / ")
    );
    if fails.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}: {}", fails.join("; ")))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("phantom recovery", criterion_1),
        ("conservation", criterion_2),
        ("inverse pairs", criterion_3),
        ("depth oracle", criterion_4),
        ("metrics fixtures", criterion_5),
        ("runtime", criterion_6),
        ("tuner", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(msg) => println!("criterion {} {name}: PASS  {msg}", i + 1),
            Err(msg) => {
                println!("criterion {} {name}: FAIL  {msg}", i + 1);
                failed += 1;
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
