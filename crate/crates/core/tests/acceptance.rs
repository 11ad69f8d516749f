//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! per checked clause. Tolerances are pinned here, not configurable.

use std::collections::HashMap;
use std::time::Instant;

use mhdd_core::array::{ArrayGeometry, MolecularArray};
use mhdd_core::codec::{program_state, read_level, staircase_metrics, LevelCodec, Polarity};
use mhdd_core::crypto::{
    decrypt_in_situ, encrypt_in_situ, gen_key, read_channels, stats, store_plaintext, xor_word,
    Channel, ChannelMatrix,
};
use mhdd_core::device::{spawn_unit, ModelParams};
use mhdd_core::logic::{
    cascade_eval, mvl_max, mvl_min, mvl_threshold, xor_gate, CascadeExpr, LogicValue, UnitPool,
};
use mhdd_core::protocols;
use mhdd_core::rng::SplitMix64;

struct Checker {
    name: &'static str,
    all_ok: bool,
}

impl Checker {
    fn new(name: &'static str) -> Self {
        Checker { name, all_ok: true }
    }

    fn check(&mut self, label: &str, ok: bool, detail: String) {
        println!("[{}] {:<58} {} ({})", self.name, label, if ok { "PASS" } else { "FAIL" }, detail);
        self.all_ok &= ok;
    }

    fn in_band(&mut self, label: &str, value: f64, target: f64, rel_tol: f64) {
        let ok = (value - target).abs() <= rel_tol * target.abs();
        self.check(label, ok, format!("{value:.4e} vs {target:.4e} +-{:.0}%", rel_tol * 100.0));
    }

    fn finish(self) {
        println!(
            "[{}] criterion {}",
            self.name,
            if self.all_ok { "PASS" } else { "FAIL" }
        );
        assert!(self.all_ok, "criterion {} failed", self.name);
    }
}

fn params() -> ModelParams {
    ModelParams::calibrated()
}

fn single_device_params() -> ModelParams {
    let mut p = params();
    p.sigma_d2d = 0.0;
    p
}

#[test]
fn criterion_01_calibration_regression() {
    let t0 = Instant::now();
    let mut c = Checker::new("C1");
    let r = protocols::sweep_regression(&params()).unwrap();
    c.in_band("G drop at 0.1 V", r.g_fwd_0v1, 1.20e-9, 0.10);
    c.in_band("G drop at 0.5 V", r.g_fwd_0v5, 0.24e-9, 0.10);
    c.in_band("G at 3.0 V", r.g_fwd_3v0, 0.06e-9, 0.25);
    let crossing = r.crossing_v.unwrap_or(f64::NAN);
    c.check(
        "back-branch sign reversal at 2.9 +- 0.2 V",
        (2.7..=3.1).contains(&crossing),
        format!("{crossing:.3} V"),
    );
    c.in_band("window at +0.5 V", r.window_pos, 640e-12, 0.15);
    c.in_band("window at -0.5 V", r.window_neg, 660e-12, 0.15);
    let endpoint_checks: [(&str, f64, f64); 4] = [
        ("pristine zero-bias reading", r.g_pristine, 14.5e-9),
        ("post-positive-cycle zero-bias reading", r.g_end_positive, -36.18e-9),
        ("negative-cycle start reading", r.g_start_negative, 22.14e-9),
        ("negative-cycle end reading", r.g_end_negative, -23.47e-9),
    ];
    for (label, value, expected) in endpoint_checks {
        let sign_ok = value.signum() == expected.signum();
        let ratio = value.abs() / expected.abs();
        c.check(
            &format!("{label}: sign and factor-3 magnitude"),
            sign_ok && (1.0 / 3.0..=3.0).contains(&ratio),
            format!("{value:.3e} vs {expected:.3e}"),
        );
    }
    let dt = t0.elapsed().as_secs_f64();
    c.check("runtime < 5 s", dt < 5.0, format!("{dt:.2} s"));
    c.finish();
}

#[test]
fn criterion_02_window_family() {
    let t0 = Instant::now();
    let mut c = Checker::new("C2");
    let family = protocols::window_family(&params(), &[0.5, 5.5, 10.0]).unwrap();
    let targets = [222e-12, 1697e-12, 2907e-12];
    for ((stop, w), target) in family.iter().zip(targets) {
        c.in_band(&format!("window at stop {stop} V"), *w, target, 0.15);
    }
    c.check(
        "windows strictly increasing with stop voltage",
        family[0].1 < family[1].1 && family[1].1 < family[2].1,
        format!("{:.1} / {:.1} / {:.1} pS", family[0].1 * 1e12, family[1].1 * 1e12, family[2].1 * 1e12),
    );
    let dt = t0.elapsed().as_secs_f64();
    c.check("runtime < 10 s", dt < 10.0, format!("{dt:.2} s"));
    c.finish();
}

#[test]
fn criterion_03_peak_power() {
    let mut c = Checker::new("C3");
    let r = protocols::sweep_regression(&params()).unwrap();
    let pw = r.peak_power_w * 1e12;
    c.check("peak power in [550, 830] pW", (550.0..=830.0).contains(&pw), format!("{pw:.1} pW"));
    let per = r.peak_power_w / 235.0;
    c.check(
        "per-molecule figure is peak / 235",
        (r.peak_per_molecule_w - per).abs() < 1e-18,
        format!("{:.3} pW", r.peak_per_molecule_w * 1e12),
    );
    c.finish();
}

#[test]
fn criterion_04_staircase() {
    let mut c = Checker::new("C4");
    let p = single_device_params();
    let codec = LevelCodec::default();
    let mut unit = spawn_unit(&p, 1);
    let mut readings = Vec::new();
    for k in 0..codec.n_states {
        let rep = program_state(&unit, k, &codec, &p).unwrap();
        unit = rep.state;
        let noise = SplitMix64::new(0xACC4 + k as u64).next_u64();
        let r = read_level(&unit, &codec, &p, Some(noise));
        readings.push((k, r.g_measured.abs()));
    }
    c.in_band("staircase bottom (state 0)", readings[0].1, 0.4e-9, 0.10);
    c.in_band("staircase top (state 95)", readings[95].1, 7.3e-9, 0.10);
    let (r2, _) = staircase_metrics(&readings).unwrap();
    c.check("linear-fit r2 >= 0.98 with noise on", r2 >= 0.98, format!("r2 = {r2:.5}"));
    c.finish();
}

#[test]
fn criterion_05_uniformity() {
    let mut c = Checker::new("C5");
    let p = params();
    let c2c = protocols::cycle_uniformity_pct(&p, 3, 0xC2C).unwrap();
    c.check(
        "cycle-to-cycle uniformity 98.59 +- 0.5 %",
        (98.09..=99.09).contains(&c2c),
        format!("{c2c:.2}%"),
    );
    let d2d = protocols::device_uniformity_pct(&p, 5, 400, 0xD2D).unwrap();
    c.check(
        "device-to-device uniformity 96.95 +- 1.0 %",
        (95.95..=97.95).contains(&d2d),
        format!("{d2d:.2}%"),
    );
    c.finish();
}

#[test]
fn criterion_06_retention() {
    let mut c = Checker::new("C6");
    let p = params();
    let curves = protocols::retention_run(&p, 1e4, 0x7E7E).unwrap();
    let fluct = protocols::retention_max_fluctuation_pct(&curves);
    c.check("max fluctuation <= 15.2 %", fluct <= 15.2, format!("{fluct:.3}%"));
    let distinct = protocols::retention_states_distinguishable(&curves);
    c.check("10 states remain pairwise distinguishable", distinct, format!("{} states", curves.len()));
    c.finish();
}

#[test]
fn criterion_07_xor() {
    let mut c = Checker::new("C7");
    let p = single_device_params();
    let u = spawn_unit(&p, 3);
    let mut g_one_pos = 0.0;
    let mut g_one_neg = 0.0;
    for (pi, qi, want) in [(false, false, 0u8), (false, true, 1), (true, false, 1), (true, true, 0)] {
        let out = xor_gate(&u, pi, qi, &p).unwrap();
        c.check(
            &format!("truth table row ({}, {})", pi as u8, qi as u8),
            out.output == want,
            format!("output {} (G {:.3e})", out.output, out.g_final),
        );
        c.check(
            &format!("one programming waveform for ({}, {})", pi as u8, qi as u8),
            out.waveforms.len() == 1,
            format!("{} waveforms", out.waveforms.len()),
        );
        if (pi, qi) == (true, false) {
            g_one_pos = out.g_final;
        }
        if (pi, qi) == (false, true) {
            g_one_neg = out.g_final;
        }
    }
    c.in_band("(1,0) conductance magnitude vs 63.8 pS", g_one_pos.abs(), 63.8e-12, 0.20);
    c.in_band("(0,1) conductance magnitude vs 92.8 pS", g_one_neg.abs(), 92.8e-12, 0.20);
    c.finish();
}

#[test]
fn criterion_08_multivalued_logic() {
    let mut c = Checker::new("C8");
    let p = single_device_params();
    let codec = LevelCodec::default();

    for radix in [3u8, 4] {
        let mut max_ok = true;
        let mut min_ok = true;
        for a in 0..radix {
            for b in 0..radix {
                let va = LogicValue::new(radix, a).unwrap();
                let vb = LogicValue::new(radix, b).unwrap();
                let u = spawn_unit(&p, (radix as u64) << 8 | (a * radix + b) as u64);
                max_ok &= mvl_max(&u, va, vb, &codec, &p).unwrap().0.value == a.max(b);
                min_ok &= mvl_min(&u, va, vb, &codec, &p).unwrap().0.value == a.min(b);
            }
        }
        c.check(
            &format!("radix-{radix} MAX table ({} rows)", radix * radix),
            max_ok,
            "vs arithmetic max".into(),
        );
        c.check(
            &format!("radix-{radix} MIN table ({} rows)", radix * radix),
            min_ok,
            "vs arithmetic min".into(),
        );
    }

    let mut thr_ok = true;
    for x in 0..3u8 {
        for k in 0..3u8 {
            let u = spawn_unit(&p, 0x788 + (x * 3 + k) as u64);
            let out = mvl_threshold(
                &u,
                LogicValue::new(3, x).unwrap(),
                LogicValue::new(3, k).unwrap(),
                &codec,
                &p,
            )
            .unwrap();
            thr_ok &= out.0.value == if x == k { 2 } else { 0 };
        }
    }
    c.check("ternary threshold table (9 pairs)", thr_ok, "vs comparison rule".into());

    // 100 random ternary expressions of depth <= 4
    let mut rng = SplitMix64::new(0xCAFE);
    let mut cascade_ok = 0;
    for _ in 0..100 {
        let expr = random_expr(&mut rng, 0);
        let vars: HashMap<String, u8> = [
            ("p".to_string(), (rng.next_u64() % 3) as u8),
            ("q".to_string(), (rng.next_u64() % 3) as u8),
        ]
        .into();
        let arith = expr.eval_arith(3, &vars).unwrap();
        let mut pool = UnitPool::new(64, &p, rng.next_u64());
        let dev = cascade_eval(&expr, &vars, 3, &mut pool, &codec, &p).unwrap();
        if dev.value == arith {
            cascade_ok += 1;
        }
    }
    c.check("100 random depth-<=4 cascades", cascade_ok == 100, format!("{cascade_ok}/100 match"));
    c.finish();
}

fn random_expr(rng: &mut SplitMix64, depth: u32) -> CascadeExpr {
    let leaf = depth >= 4 || rng.next_u64() % 4 == 0;
    if leaf {
        match rng.next_u64() % 3 {
            0 => CascadeExpr::Const((rng.next_u64() % 3) as u8),
            1 => CascadeExpr::Var("p".into()),
            _ => CascadeExpr::Var("q".into()),
        }
    } else {
        match rng.next_u64() % 3 {
            0 => CascadeExpr::Max(Box::new(random_expr(rng, depth + 1)), Box::new(random_expr(rng, depth + 1))),
            1 => CascadeExpr::Min(Box::new(random_expr(rng, depth + 1)), Box::new(random_expr(rng, depth + 1))),
            _ => CascadeExpr::Threshold((rng.next_u64() % 3) as u8, Box::new(random_expr(rng, depth + 1))),
        }
    }
}

#[test]
fn criterion_09_encryption_fixtures() {
    let mut c = Checker::new("C9");
    let p = single_device_params();
    let codec = LevelCodec::default();

    // Fig. 5c first-pixel triplets: (plain, key, cipher) per channel
    let fixtures = [
        (Channel::R, 0b110101u8, 0b010110u8, 0b100011u8),
        (Channel::G, 0b000100, 0b110010, 0b110110),
        (Channel::B, 0b001000, 0b010000, 0b011000),
    ];

    let geometry = ArrayGeometry::new(1, 1).unwrap();
    let mk = |w: u8, tag| {
        let mut m = ChannelMatrix::new(1, 1, tag).unwrap();
        m.words[0] = w;
        m
    };
    let mut array = MolecularArray::allocate(geometry, p.clone(), codec.clone(), 9).unwrap();
    store_plaintext(
        &mut array,
        &mk(fixtures[0].1, Channel::R),
        &mk(fixtures[1].1, Channel::G),
        &mk(fixtures[2].1, Channel::B),
    )
    .unwrap();

    // force the key words to the published values
    let mut key = gen_key(0, 1, 1).unwrap();
    key.r.words[0] = fixtures[0].2;
    key.g.words[0] = fixtures[1].2;
    key.b.words[0] = fixtures[2].2;

    encrypt_in_situ(&mut array, &key, None).unwrap();
    let [r, g, b] = read_channels(&array, None).unwrap();
    for ((_, plain, key_w, cipher), m) in fixtures.iter().zip([&r, &g, &b]) {
        c.check(
            &format!("first-pixel cipher {:06b} ^ {:06b}", plain, key_w),
            m.words[0] == *cipher,
            format!("device {:06b} vs {cipher:06b}", m.words[0]),
        );
    }

    // polarity audit: the R channel reprogram (53 -> 35) is a back-scan write
    let mut audit = MolecularArray::allocate(geometry, p.clone(), codec.clone(), 10).unwrap();
    audit.write_word(0, 0, 0, fixtures[0].1).unwrap();
    let cipher_r = xor_word(fixtures[0].1, fixtures[0].2).unwrap();
    let rep = audit.write_word(0, 0, 0, cipher_r).unwrap();
    c.check(
        "R reprogram polarity is negative-branch (back scan)",
        rep.polarity == Some(Polarity::Negative)
            && rep.waveforms.iter().all(|w| w.is_single_polarity(false)),
        format!("{:?}", rep.polarity),
    );

    let v_r = codec.level_to_voltage(cipher_r).unwrap();
    let v_b = codec.level_to_voltage(xor_word(fixtures[2].1, fixtures[2].2).unwrap()).unwrap();
    c.check("R cipher maps to 4.0 V exactly", v_r == 4.0, format!("{v_r} V"));
    c.check("B cipher maps to 2.9 V exactly", (v_b - 2.9).abs() < 1e-12, format!("{v_b} V"));
    c.finish();
}

#[test]
fn criterion_10_end_to_end() {
    let t0 = Instant::now();
    let mut c = Checker::new("C10");
    let p = params();
    let codec = LevelCodec::default();
    let geometry = ArrayGeometry::new(128, 128).unwrap();

    // synthetic plaintext standing in for the quantized mural channels
    let mut img_rng = SplitMix64::new(0x1Aa6e);
    let mut mk = |tag| {
        let mut m = ChannelMatrix::new(128, 128, tag).unwrap();
        for w in m.words.iter_mut() {
            // smooth-ish image statistics rather than uniform noise
            *w = (((img_rng.next_u64() % 32) + (img_rng.next_u64() % 32)) / 2) as u8 + 8;
        }
        m
    };
    let (r, g, b) = (mk(Channel::R), mk(Channel::G), mk(Channel::B));

    let mut array = MolecularArray::allocate(geometry, p, codec, 0xA11A).unwrap();
    store_plaintext(&mut array, &r, &g, &b).unwrap();
    let key = gen_key(42, 128, 128).unwrap();

    encrypt_in_situ(&mut array, &key, Some(0xE0C1)).unwrap();
    let [cr, cg, cb] = read_channels(&array, None).unwrap();

    // cipher statistics
    let mut all_cipher = Vec::with_capacity(3 * 16384);
    all_cipher.extend_from_slice(&cr.words);
    all_cipher.extend_from_slice(&cg.words);
    all_cipher.extend_from_slice(&cb.words);
    let chi2_r = stats::chi2_uniform(&stats::word_histogram(&cr.words));
    let chi2_g = stats::chi2_uniform(&stats::word_histogram(&cg.words));
    let chi2_b = stats::chi2_uniform(&stats::word_histogram(&cb.words));
    c.check(
        "cipher-word histograms uniform at the 99% chi2 bound",
        chi2_r < stats::CHI2_99_DOF63 && chi2_g < stats::CHI2_99_DOF63 && chi2_b < stats::CHI2_99_DOF63,
        format!("chi2 {chi2_r:.1} / {chi2_g:.1} / {chi2_b:.1} vs {:.1}", stats::CHI2_99_DOF63),
    );
    let plain_f: Vec<f64> = r.words.iter().chain(&g.words).chain(&b.words).map(|w| *w as f64).collect();
    let cipher_f: Vec<f64> = all_cipher.iter().map(|w| *w as f64).collect();
    let corr = stats::pearson(&plain_f, &cipher_f);
    c.check("|plain-cipher correlation| < 0.05", corr.abs() < 0.05, format!("r = {corr:+.4}"));

    decrypt_in_situ(&mut array, &key, Some(0xDEC1)).unwrap();
    let [dr, dg, db] = read_channels(&array, None).unwrap();
    let mut errors = 0usize;
    for (want, got) in [(&r, &dr), (&g, &dg), (&b, &db)] {
        errors += want.words.iter().zip(&got.words).filter(|(a, b)| a != b).count();
    }
    c.check("store -> encrypt -> decrypt recovers all 49152 words", errors == 0, format!("{errors} errors"));

    let dt = t0.elapsed().as_secs_f64();
    c.check("runtime < 120 s", dt < 120.0, format!("{dt:.1} s"));
    c.finish();
}

#[test]
fn criterion_11_persistence() {
    let mut c = Checker::new("C11");
    let p = single_device_params();
    let codec = LevelCodec::default();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disk.mhdd");

    let mut array = MolecularArray::allocate(ArrayGeometry::new(3, 3).unwrap(), p.clone(), codec.clone(), 5).unwrap();
    let mut rng = SplitMix64::new(77);
    for row in 0..3 {
        for col in 0..3 {
            for ch in 0..3 {
                array.write_word(row, col, ch, (rng.next_u64() % 64) as u8).unwrap();
            }
        }
    }
    let before: Vec<u8> = array.read_all(None).unwrap();
    array.save(&path).unwrap();
    let loaded = MolecularArray::load(&path, p.clone(), codec.clone()).unwrap();
    let after: Vec<u8> = loaded.read_all(None).unwrap();
    c.check("save/load round trip reads bit-identically", before == after, format!("{} words", before.len()));
    let state_ok = array
        .units
        .iter()
        .zip(&loaded.units)
        .all(|(a, b)| a.x == b.x && a.c == b.c && a.device_factor == b.device_factor);
    c.check("unit state round-trips exactly", state_ok, "x, c, device_factor".into());

    let text = std::fs::read_to_string(&path).unwrap();
    let truncated = &text[..text.len() - 40];
    std::fs::write(dir.path().join("trunc.mhdd"), truncated).unwrap();
    let rejected = MolecularArray::load(&dir.path().join("trunc.mhdd"), p, codec).is_err();
    c.check("truncated file rejected atomically", rejected, "checksum / format error".into());
    c.finish();
}
