use std::f64::consts::TAU;
use std::sync::Arc;

use proptest::prelude::*;
use ribsupp::phantom::{generate_phantom, PhantomSpec};
use ribsupp::st_space::{column_count, StField};
use ribsupp::suppression::{
    blend_border, centerline_smooth, clamp_nonneg, derivative_s, reintegrate, reintegrate_paired,
    smooth_t, suppress_all, suppress_rib, CenterlineGate, PipelineOptions, RibParams,
    SuppressionParams,
};
use ribsupp::{Contour, Image, Point, RibMask, RibMaskSet};

fn circle(r: f64) -> Arc<Contour> {
    let n = 96;
    Arc::new(
        Contour::new(
            (0..n)
                .map(|i| {
                    let a = TAU * i as f64 / n as f64;
                    Point::new(50.0 + r * a.cos(), 50.0 + r * a.sin())
                })
                .collect(),
        )
        .unwrap(),
    )
}

fn full_field(c: &Arc<Contour>, depth: f64, f: impl FnMut(usize, usize) -> f64) -> StField {
    let n = column_count(c, 1.0);
    StField::from_fn(Arc::clone(c), 1.0, 1.0, vec![depth; n], f).unwrap()
}

fn cyclic_gauss(values: &[f64], sigma: f64) -> Vec<f64> {
    let n = values.len() as i64;
    let r = (4.0 * sigma).ceil() as i64;
    (0..n)
        .map(|j| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for m in -r..=r {
                let w = (-(m * m) as f64 / (2.0 * sigma * sigma)).exp();
                acc += w * values[(j + m).rem_euclid(n) as usize];
                wsum += w;
            }
            acc / wsum
        })
        .collect()
}

#[test]
fn smooth_t_matches_dense_convolution() {
    let c = circle(30.0);
    let f = full_field(&c, 4.0, |t, s| if t == 17 { 1.0 + s as f64 } else { 0.0 });
    for sigma_px in [1.0, 2.5, 6.0] {
        let g = smooth_t(&f, sigma_px).unwrap();
        let sigma = sigma_px / f.dt();
        for s in 0..f.s_count() {
            let row: Vec<f64> = (0..f.t_count()).map(|t| f.get(t, s).unwrap()).collect();
            let expect = cyclic_gauss(&row, sigma);
            for t in 0..f.t_count() {
                assert!((g.get(t, s).unwrap() - expect[t]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn smooth_t_renormalises_over_reaching_columns() {
    let c = circle(30.0);
    let n = column_count(&c, 1.0);
    let depth: Vec<f64> = (0..n).map(|t| if t % 3 == 0 { 1.0 } else { 5.0 }).collect();
    let f = StField::from_fn(Arc::clone(&c), 1.0, 1.0, depth, |_, _| 3.0).unwrap();
    let g = smooth_t(&f, 4.0).unwrap();
    for t in 0..n {
        for s in 0..f.valid_len(t) {
            assert!((g.get(t, s).unwrap() - 3.0).abs() <= 1e-12);
        }
        assert_eq!(g.valid_len(t), f.valid_len(t));
    }
}

#[test]
fn smooth_t_is_shift_equivariant() {
    let c = circle(30.0);
    let n = column_count(&c, 1.0);
    let base = |t: usize, s: usize| ((t * 7 + s * 3) % 13) as f64 - 6.0;
    let f = full_field(&c, 3.0, base);
    for shift in [1, 5, n - 2] {
        let g = full_field(&c, 3.0, |t, s| base((t + shift) % n, s));
        let (sf, sg) = (smooth_t(&f, 5.0).unwrap(), smooth_t(&g, 5.0).unwrap());
        for t in 0..n {
            for s in 0..f.s_count() {
                let a = sg.get(t, s).unwrap();
                let b = sf.get((t + shift) % n, s).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn bare_trapezoid_is_midpoint_average() {
    let c = circle(20.0);
    let f = full_field(&c, 6.0, |t, s| (s * s) as f64 + t as f64);
    let r = reintegrate(&derivative_s(&f));
    for t in 0..f.t_count() {
        for s in 1..f.valid_len(t) {
            let mid =
                0.5 * (f.get(t, s).unwrap() + f.get(t, s - 1).unwrap()) - f.get(t, 0).unwrap();
            assert!((r.get(t, s).unwrap() - mid).abs() <= 1e-12);
        }
    }
}

#[test]
fn centerline_examples() {
    let c = circle(20.0);
    let col = [4.0, 5.0, 1.0, 6.0, 0.0, 2.0];
    let f = full_field(&c, 5.0, |_, s| col[s]);
    let g = centerline_smooth(&f, 0.5, 3, CenterlineGate::KeepAbove).unwrap();
    // ratios: 1.25 keep, 0.2 avg(4,5,1), 6 keep, 0 avg(1,6,0), zero denominator avg(6,0,2)
    let expect = [4.0, 5.0, 10.0 / 3.0, 6.0, 7.0 / 3.0, 8.0 / 3.0];
    for (s, e) in expect.iter().enumerate() {
        assert!((g.get(0, s).unwrap() - e).abs() <= 1e-12, "s={s}");
    }
    let g = centerline_smooth(&f, 0.5, 3, CenterlineGate::KeepBelow).unwrap();
    let expect = [4.0, 4.5, 1.0, 4.0, 0.0, 8.0 / 3.0];
    for (s, e) in expect.iter().enumerate() {
        assert!((g.get(0, s).unwrap() - e).abs() <= 1e-12, "s={s}");
    }
    assert!(centerline_smooth(&f, 0.0, 3, CenterlineGate::KeepAbove).is_err());
    assert!(centerline_smooth(&f, 0.5, 0, CenterlineGate::KeepAbove).is_err());
}

fn rib_image(amplitude: f64, background: f64) -> (Image, RibMask) {
    let c = Contour::new(vec![
        Point::new(12.0, 20.0),
        Point::new(90.0, 14.0),
        Point::new(94.0, 34.0),
        Point::new(14.0, 40.0),
    ])
    .unwrap();
    let mask = RibMask::from_contour(1, 110, 60, c.clone()).unwrap();
    let img = Image::from_fn(110, 60, 4095.0, |x, y| {
        let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
        let d = ribsupp::phantom::distance_to_contour(p, &c);
        if c.contains(p) {
            background + amplitude * ribsupp::phantom::bone_profile((d / 10.0).min(1.0))
        } else {
            background
        }
    });
    (img, mask)
}

#[test]
fn bone_is_linear_in_amplitude_on_flat_background() {
    let p = SuppressionParams::default();
    let o = PipelineOptions::default();
    let (img1, mask) = rib_image(100.0, 800.0);
    let (img3, _) = rib_image(300.0, 800.0);
    let b1 = suppress_rib(&img1, &mask, &p, &o).unwrap().bone;
    let b3 = suppress_rib(&img3, &mask, &p, &o).unwrap().bone;
    for (a, b) in b1.values.iter().zip(&b3.values) {
        assert!((3.0 * a - b).abs() <= 1e-9 * 4095.0);
    }
    assert!(b1.values.iter().any(|&v| v > 10.0));
}

#[test]
fn background_offset_does_not_change_bone() {
    let p = SuppressionParams::default();
    let o = PipelineOptions::default();
    let (a, mask) = rib_image(200.0, 500.0);
    let (b, _) = rib_image(200.0, 1500.0);
    let ba = suppress_rib(&a, &mask, &p, &o).unwrap().bone;
    let bb = suppress_rib(&b, &mask, &p, &o).unwrap().bone;
    for (x, y) in ba.values.iter().zip(&bb.values) {
        assert!((x - y).abs() <= 1e-9 * 4095.0);
    }
}

#[test]
fn single_rib_composition() {
    let (img, mask) = rib_image(200.0, 900.0);
    let params = SuppressionParams {
        s_b: 2.0,
        k_border: 5,
        ..SuppressionParams::default()
    };
    let o = PipelineOptions::default();
    let rib = suppress_rib(&img, &mask, &params, &o).unwrap();
    let set = RibMaskSet::new(110, 60, vec![mask.clone()]).unwrap();
    let all = suppress_all(&img, &set, &RibParams::uniform(params), &o).unwrap();
    assert_eq!(all.soft_pre_blend.data(), rib.soft.data());
    let mut expect = blend_border(&rib.soft, &mask, 2.0, 5);
    expect.clamp_to_range();
    assert_eq!(all.soft.data(), expect.data());
    assert_eq!(all.bones, vec![rib.bone]);
}

#[test]
fn per_label_overrides_apply() {
    let case = generate_phantom(&PhantomSpec {
        width: 256,
        height: 256,
        n_ribs: 4,
        rib_width: 20.0,
        ..PhantomSpec::default()
    })
    .unwrap();
    let o = PipelineOptions::default();
    let base = SuppressionParams::default();
    let alt = SuppressionParams {
        kappa_t: 3.0,
        ..base
    };
    let mut params = RibParams::uniform(base);
    params.overrides.insert(2, alt);
    let r = suppress_all(&case.raw, &case.masks, &params, &o).unwrap();
    let uniform = suppress_all(&case.raw, &case.masks, &RibParams::uniform(base), &o).unwrap();
    assert_eq!(r.bones[0], uniform.bones[0]);
    assert_ne!(r.bones[1], uniform.bones[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn paired_reintegration_inverts_derivative(
        vals in proptest::collection::vec(-1000.0f64..1000.0, 7 * 200),
        depth_seed in 0usize..1000,
    ) {
        let c = circle(20.0);
        let n = column_count(&c, 1.0);
        let depth: Vec<f64> = (0..n).map(|t| ((t * 31 + depth_seed) % 7) as f64).collect();
        let f = StField::from_fn(Arc::clone(&c), 1.0, 1.0, depth, |t, s| vals[(t * 7 + s) % vals.len()]).unwrap();
        let r = reintegrate_paired(&derivative_s(&f));
        for t in 0..n {
            prop_assert_eq!(r.valid_len(t), f.valid_len(t));
            let f0 = f.get(t, 0).unwrap();
            for s in 0..f.valid_len(t) {
                let e = f.get(t, s).unwrap() - f0;
                prop_assert!((r.get(t, s).unwrap() - e).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn smooth_t_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, kappa in 0.5f64..20.0) {
        let c = circle(20.0);
        let f = full_field(&c, 3.0, |t, s| ((t * 5 + s) % 9) as f64);
        let g = full_field(&c, 3.0, |t, s| ((t * t + s) % 4) as f64);
        let h = full_field(&c, 3.0, |t, s| a * ((t * 5 + s) % 9) as f64 + b * ((t * t + s) % 4) as f64);
        let (sf, sg, sh) = (smooth_t(&f, kappa).unwrap(), smooth_t(&g, kappa).unwrap(), smooth_t(&h, kappa).unwrap());
        for i in 0..sf.values().len() {
            let e = a * sf.values()[i] + b * sg.values()[i];
            prop_assert!((sh.values()[i] - e).abs() <= 1e-9);
        }
    }

    #[test]
    fn clamp_and_centerline_keep_geometry(tau in 0.01f64..3.0, k in 1usize..9) {
        let c = circle(20.0);
        let n = column_count(&c, 1.0);
        let depth: Vec<f64> = (0..n).map(|t| (t % 6) as f64).collect();
        let f = StField::from_fn(Arc::clone(&c), 1.0, 1.0, depth, |t, s| ((t * 3 + s * 11) % 17) as f64 - 8.0).unwrap();
        let g = clamp_nonneg(&centerline_smooth(&f, tau, k, CenterlineGate::KeepAbove).unwrap());
        for t in 0..n {
            prop_assert_eq!(g.valid_len(t), f.valid_len(t));
            for s in 0..g.s_count() {
                match g.get(t, s) {
                    Some(v) => prop_assert!(v >= 0.0),
                    None => prop_assert!(!f.is_valid(t, s)),
                }
            }
        }
    }

    #[test]
    fn suppression_conserves_intensity(seed in 0u64..1000, kappa in 2.0f64..40.0, k_center in 1usize..8) {
        let case = generate_phantom(&PhantomSpec {
            width: 200,
            height: 200,
            n_ribs: 4,
            rib_width: 16.0,
            seed,
            ..PhantomSpec::default()
        }).unwrap();
        let params = SuppressionParams { kappa_t: kappa, k_center, ..SuppressionParams::default() };
        let r = suppress_all(&case.raw, &case.masks, &RibParams::uniform(params), &PipelineOptions::default()).unwrap();
        let bone = r.bone_image();
        for i in 0..bone.data().len() {
            let sum = r.soft_pre_blend.data()[i] + bone.data()[i];
            prop_assert!((sum - case.raw.data()[i]).abs() <= 1e-9 * 4095.0);
            prop_assert!(bone.data()[i] >= 0.0);
        }
        for &v in r.soft.data() {
            prop_assert!((0.0..=4095.0).contains(&v));
        }
    }
}
