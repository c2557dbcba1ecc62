//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see every line.

use std::time::Instant;

use ccalink::config::{Receiver, SimConfig, SweepAxis};
use ccalink::grid::{self, PatternKind};
use ccalink::harness::{self, ResultRow};
use ccalink::la::{CMatrix, CVector};
use ccalink::rx_cca::{self, ViewPair};
use ccalink::txchain::qpsk_symbol;
use ccalink::C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn randc(rng: &mut StdRng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn random_qpsk(rng: &mut StdRng, n: usize) -> Vec<C64> {
    (0..n).map(|_| qpsk_symbol(rng.random_range(0..4u8))).collect()
}

/// Views drawn from the two-view model: a shared block plus independent
/// interfering layers per view, noiseless.
fn synthetic_views(rng: &mut StdRng, n_r: usize, n_layers: usize, n_bar: usize) -> (Vec<C64>, ViewPair) {
    let x_c = random_qpsk(rng, n_bar);
    let mut make_view = |common: &[C64]| -> CMatrix {
        let mut y = CMatrix::zeros(n_r, n_bar);
        for layer in 0..n_layers {
            let h = CVector::from_fn(n_r, |_, _| randc(rng));
            let x: Vec<C64> = if layer == 0 {
                common.to_vec()
            } else {
                random_qpsk(rng, n_bar)
            };
            for (k, &xk) in x.iter().enumerate() {
                for r in 0..n_r {
                    y[(r, k)] += h[r] * xk;
                }
            }
        }
        y
    };
    let y1 = make_view(&x_c);
    let y2 = make_view(&x_c);
    (x_c, ViewPair { y1, y2 })
}

/// One-sided sign test at 95%: is `wins` of `n` significantly above half?
/// Computes the exact binomial tail P(X >= wins | n, 1/2).
fn sign_test_significant(wins: usize, n: usize) -> bool {
    if n == 0 || wins > n {
        return false;
    }
    let mut tail = 0.0f64;
    for k in wins..=n {
        let mut log_c = 0.0f64;
        for i in 0..k {
            log_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        tail += (log_c - n as f64 * std::f64::consts::LN_2).exp();
    }
    tail < 0.05
}

/// SER of the first row matching (receiver, point substring).
fn ser_of(rows: &[ResultRow], receiver: Receiver, point: &str, layer: usize) -> f64 {
    rows.iter()
        .find(|r| r.receiver == receiver && r.point == point && r.layer == layer)
        .unwrap_or_else(|| panic!("no row for {receiver:?} {point} layer {layer}"))
        .ser()
}

/// Run a config once per master seed (seeds=1 inside), so sweep points stay
/// paired within each master while masters provide independent repetitions.
fn per_master_rows(base: &SimConfig, masters: std::ops::Range<u64>) -> Vec<Vec<ResultRow>> {
    masters
        .map(|m| {
            let mut cfg = base.clone();
            cfg.master_seed = m;
            cfg.seeds = 1;
            harness::sweep(&cfg).expect("sweep")
        })
        .collect()
}

#[test]
fn criterion_1_exact_recovery() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xACC1);
    let mut max_err = 0.0f64;
    let mut done = 0;
    for &n_r in &[2usize, 4] {
        for &n_layers in &[1usize, 2] {
            for _ in 0..25 {
                let (x_c, views) = synthetic_views(&mut rng, n_r, n_layers, 16);
                let sol = rx_cca::cca_two_view(&views, None).expect("cca");
                let fixed = rx_cca::resolve_phase(&sol, x_c[0], 0).expect("phase");
                let scale = (x_c.len() as f64).sqrt();
                for (k, &x) in x_c.iter().enumerate() {
                    max_err = max_err.max((fixed.g[k] * scale - x).norm());
                }
                done += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = max_err < 1e-6 && elapsed < 10.0 && done == 100;
    println!(
        "criterion 1 (exact recovery, 100 noiseless instances): {} — max entrywise error {max_err:.3e}, {elapsed:.2}s",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "max error {max_err:.3e}, elapsed {elapsed:.2}s");
}

#[test]
fn criterion_2_solver_equivalence() {
    let mut rng = StdRng::seed_from_u64(0xACC2);
    let mut min_overlap = 1.0f64;
    for _ in 0..50 {
        let y1 = CMatrix::from_fn(2, 16, |_, _| randc(&mut rng));
        let y2 = CMatrix::from_fn(2, 16, |_, _| randc(&mut rng));
        let views = ViewPair { y1, y2 };
        let sol = rx_cca::cca_two_view(&views, Some(0.0)).expect("cca");
        let g_mv = rx_cca::maxvar_projector_common(&views, Some(0.0)).expect("maxvar");
        min_overlap = min_overlap.min(sol.g.dotc(&g_mv).norm());
    }
    let ok = min_overlap >= 1.0 - 1e-8;
    println!(
        "criterion 2 (reduced solver vs projector-sum, 50 instances): {} — min |inner| {min_overlap:.12}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "min overlap {min_overlap}");
}

#[test]
fn criterion_3_end_to_end_zero_error() {
    let start = Instant::now();
    let cfg = SimConfig {
        n_rb: 12,
        n_layers: 2,
        n_taps: 1,
        speed: 0.0,
        seeds: 5,
        frames_per_seed: 5,
        receivers: vec![Receiver::Cca],
        sweep: SweepAxis::SnrDb(vec![f64::INFINITY]),
        ..SimConfig::default()
    };
    let rows = harness::sweep(&cfg).expect("sweep");
    let errs: u64 = rows.iter().map(|r| r.err_count).sum();
    let res: u64 = rows.iter().map(|r| r.re_count).sum();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = errs == 0 && res > 0 && elapsed < 30.0;
    println!(
        "criterion 3 (noiseless flat 2-layer end-to-end): {} — {errs} errors over {res} REs, {elapsed:.2}s",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{errs} errors, elapsed {elapsed:.2}s");
}

#[test]
fn criterion_4_interference_robustness() {
    let start = Instant::now();
    let cfg = SimConfig {
        n_rb: 12,
        n_layers: 2,
        delay_spread: 30e-9,
        speed: 5.0 / 3.6,
        seeds: 20,
        frames_per_seed: 5,
        snr_db: f64::INFINITY,
        receivers: vec![Receiver::Cca, Receiver::Pilot],
        sweep: SweepAxis::SirDb(vec![-10.0, -5.0, 0.0, 5.0, 10.0]),
        ..SimConfig::default()
    };
    let rows = harness::sweep(&cfg).expect("sweep");
    let cca_max = rows
        .iter()
        .filter(|r| r.receiver == Receiver::Cca)
        .map(|r| r.ser())
        .fold(0.0f64, f64::max);
    let pilot_low = ser_of(&rows, Receiver::Pilot, "-10", 0);
    let pilot_high = ser_of(&rows, Receiver::Pilot, "10", 0);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = cca_max < 1e-3 && pilot_low >= 10.0 * pilot_high && elapsed < 300.0;
    println!(
        "criterion 4 (SIR robustness): {} — max CCA SER {cca_max:.3e}; pilot {pilot_low:.3e} @-10dB vs {pilot_high:.3e} @+10dB ({:.1}x), {elapsed:.1}s",
        if ok { "PASS" } else { "FAIL" },
        pilot_low / pilot_high.max(1e-300)
    );
    assert!(ok);
}

#[test]
fn criterion_5_subgrid_trend() {
    let start = Instant::now();
    let base = SimConfig {
        n_rb: 50,
        n_layers: 1,
        delay_spread: 300e-9,
        speed: 3.0 / 3.6,
        scs: 30e3,
        pattern_kind: PatternKind::FrequencyRepetition,
        n_per_rb: 8,
        snr_db: 15.0,
        frames_per_seed: 5,
        receivers: vec![Receiver::Cca],
        sweep: SweepAxis::NBsg(vec![1, 5, 50]),
        ..SimConfig::default()
    };
    let per_master = per_master_rows(&base, 2000..2020);
    let mut wins_vs_50 = 0;
    let mut n_vs_50 = 0;
    let mut wins_vs_1 = 0;
    let mut n_vs_1 = 0;
    for rows in &per_master {
        let s1 = ser_of(rows, Receiver::Cca, "1", 0);
        let s5 = ser_of(rows, Receiver::Cca, "5", 0);
        let s50 = ser_of(rows, Receiver::Cca, "50", 0);
        if s5 != s50 {
            n_vs_50 += 1;
            if s5 < s50 {
                wins_vs_50 += 1;
            }
        }
        if s5 != s1 {
            n_vs_1 += 1;
            if s5 < s1 {
                wins_vs_1 += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass_50 = sign_test_significant(wins_vs_50, n_vs_50);
    let pass_1 = sign_test_significant(wins_vs_1, n_vs_1);
    let ok = pass_50 && pass_1 && elapsed < 900.0;
    println!(
        "criterion 5 (sub-grid trend at 300 ns): {} — SER(5)<SER(50): {wins_vs_50}/{n_vs_50} ({}), SER(5)<SER(1): {wins_vs_1}/{n_vs_1} ({}), {elapsed:.1}s",
        if ok { "PASS" } else { "FAIL" },
        if pass_50 { "significant" } else { "not significant" },
        if pass_1 { "significant" } else { "not significant" },
    );
    assert!(
        ok,
        "SER(5)<SER(50): {wins_vs_50}/{n_vs_50}, SER(5)<SER(1): {wins_vs_1}/{n_vs_1}"
    );
}

/// Companion to criterion 5: with the delay spread that keeps a 5-RB
/// sub-grid inside the coherence bandwidth (30 ns) and an SNR where the
/// short-view penalty of 1-RB sub-grids is visible, the U-shaped trend
/// holds with a large margin.
#[test]
fn subgrid_trend_at_short_delay_spread() {
    let base = SimConfig {
        n_rb: 50,
        n_layers: 1,
        delay_spread: 30e-9,
        speed: 3.0 / 3.6,
        scs: 30e3,
        pattern_kind: PatternKind::FrequencyRepetition,
        n_per_rb: 8,
        snr_db: 3.0,
        frames_per_seed: 5,
        receivers: vec![Receiver::Cca],
        sweep: SweepAxis::NBsg(vec![1, 5, 50]),
        ..SimConfig::default()
    };
    let per_master = per_master_rows(&base, 2100..2120);
    let mut wins_vs_50 = 0;
    let mut wins_vs_1 = 0;
    let mut n = 0;
    for rows in &per_master {
        let s1 = ser_of(rows, Receiver::Cca, "1", 0);
        let s5 = ser_of(rows, Receiver::Cca, "5", 0);
        let s50 = ser_of(rows, Receiver::Cca, "50", 0);
        n += 1;
        if s5 < s50 {
            wins_vs_50 += 1;
        }
        if s5 < s1 {
            wins_vs_1 += 1;
        }
    }
    println!(
        "companion (sub-grid U-shape at 30 ns, 3 dB): SER(5)<SER(50) {wins_vs_50}/{n}, SER(5)<SER(1) {wins_vs_1}/{n}"
    );
    assert!(sign_test_significant(wins_vs_50, n));
    assert!(sign_test_significant(wins_vs_1, n));
}

#[test]
fn criterion_6_pattern_orientation_trend() {
    let start = Instant::now();
    // Setup A: small delay spread, fast user. The time pattern's copies sit
    // a near-full slot apart, so its noisy inter-view alignment degrades;
    // run in the noise-limited regime where that matters.
    let setup_a = SimConfig {
        n_rb: 50,
        n_layers: 1,
        delay_spread: 30e-9,
        speed: 60.0 / 3.6,
        scs: 15e3,
        n_per_rb: 8,
        n_bsg: 5,
        snr_db: 0.0,
        frames_per_seed: 20,
        receivers: vec![Receiver::Cca],
        sweep: SweepAxis::Pattern(vec![
            PatternKind::TimeRepetition,
            PatternKind::FrequencyRepetition,
        ]),
        ..SimConfig::default()
    };
    // Setup B: large delay spread, slow user. Wide sub-grids put the
    // frequency pattern's clustered view outside the coherence bandwidth.
    let setup_b = SimConfig {
        delay_spread: 300e-9,
        speed: 1.0 / 3.6,
        scs: 30e3,
        snr_db: 15.0,
        ..setup_a.clone()
    };
    let count_wins = |base: &SimConfig, masters: std::ops::Range<u64>, freq_wins: bool| {
        let mut wins = 0;
        let mut n = 0;
        for rows in per_master_rows(base, masters) {
            let t = ser_of(&rows, Receiver::Cca, "time-repetition", 0);
            let f = ser_of(&rows, Receiver::Cca, "frequency-repetition", 0);
            if t != f {
                n += 1;
                let won = if freq_wins { f < t } else { t < f };
                if won {
                    wins += 1;
                }
            }
        }
        (wins, n)
    };
    let (wins_a, n_a) = count_wins(&setup_a, 1000..1020, true);
    let (wins_b, n_b) = count_wins(&setup_b, 1000..1020, false);
    let pass_a = sign_test_significant(wins_a, n_a);
    let pass_b = sign_test_significant(wins_b, n_b);

    // The coherence selector must recommend the winning orientation.
    let dims = grid::GridDims::new(50, 14, 1).unwrap();
    let block_a = grid::coherence_block(15e3, 30e-9, 60.0 / 3.6, 4e9).unwrap();
    let block_b = grid::coherence_block(30e3, 300e-9, 1.0 / 3.6, 4e9).unwrap();
    let rec_a = grid::select_pattern_kind(&block_a, &dims);
    let rec_b = grid::select_pattern_kind(&block_b, &dims);
    let rec_ok = rec_a == PatternKind::FrequencyRepetition && rec_b == PatternKind::TimeRepetition;

    let elapsed = start.elapsed().as_secs_f64();
    let ok = pass_a && pass_b && rec_ok && elapsed < 900.0;
    println!(
        "criterion 6 (pattern orientation): {} — setup A freq<time {wins_a}/{n_a} ({}), setup B time<freq {wins_b}/{n_b} ({}), recommendations {}/{}, {elapsed:.1}s",
        if ok { "PASS" } else { "FAIL" },
        if pass_a { "significant" } else { "not significant" },
        if pass_b { "significant" } else { "not significant" },
        rec_a,
        rec_b,
    );
    assert!(ok, "setup A {wins_a}/{n_a}, setup B {wins_b}/{n_b}, rec {rec_a}/{rec_b}");
}

#[test]
fn criterion_7_baseline_sanity() {
    let cfg = SimConfig {
        n_rb: 12,
        n_layers: 1,
        seeds: 10,
        frames_per_seed: 5,
        receivers: vec![Receiver::Pilot, Receiver::Pchan],
        sweep: SweepAxis::SnrDb(vec![0.0, 5.0, 10.0, 15.0, 20.0, f64::INFINITY]),
        ..SimConfig::default()
    };
    let rows = harness::sweep(&cfg).expect("sweep");
    let points: Vec<String> = {
        let mut p: Vec<String> = rows.iter().map(|r| r.point.clone()).collect();
        p.dedup();
        p
    };
    let mut holds = 0;
    for p in &points {
        let pchan = ser_of(&rows, Receiver::Pchan, p, 0);
        let pilot = ser_of(&rows, Receiver::Pilot, p, 0);
        if pchan <= pilot {
            holds += 1;
        }
    }
    let frac = holds as f64 / points.len() as f64;
    let noiseless_pchan = ser_of(&rows, Receiver::Pchan, "inf", 0);
    // Two layers, noiseless: still exactly zero for L <= N_r.
    let cfg2 = SimConfig {
        n_layers: 2,
        receivers: vec![Receiver::Pchan],
        sweep: SweepAxis::SnrDb(vec![f64::INFINITY]),
        seeds: 5,
        frames_per_seed: 5,
        ..cfg.clone()
    };
    let rows2 = harness::sweep(&cfg2).expect("sweep");
    let noiseless_l2: u64 = rows2.iter().map(|r| r.err_count).sum();
    let ok = frac >= 0.95 && noiseless_pchan == 0.0 && noiseless_l2 == 0;
    println!(
        "criterion 7 (baseline sanity): {} — PCHAN<=pilot at {holds}/{} points, noiseless PCHAN SER {noiseless_pchan:.1e} (L=1) and {noiseless_l2} errors (L=2)",
        if ok { "PASS" } else { "FAIL" },
        points.len()
    );
    assert!(ok);
}

#[test]
fn criterion_8_determinism() {
    let cfg = SimConfig {
        n_rb: 12,
        n_layers: 1,
        seeds: 4,
        frames_per_seed: 3,
        receivers: vec![Receiver::Cca, Receiver::Pilot, Receiver::Pchan],
        sweep: SweepAxis::SnrDb(vec![0.0, 10.0]),
        ..SimConfig::default()
    };
    let run_with = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool");
        let rows = pool.install(|| harness::sweep(&cfg)).expect("sweep");
        harness::csv_string(&rows, false)
    };
    let serial = run_with(1);
    let parallel = run_with(8);
    let repeat = run_with(8);
    let ok = serial == parallel && parallel == repeat;
    println!(
        "criterion 8 (byte-identical CSV across parallelism): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

#[test]
fn criterion_9_numerics_suite() {
    use ccalink::la;
    use ccalink::txchain::{qpsk_demap, qpsk_map};

    let mut rng = StdRng::seed_from_u64(0xACC9);
    let mut worst_eig = 0.0f64;
    let mut worst_svd = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let b = CMatrix::from_fn(n, n, |_, _| randc(&mut rng));
        let a = &b * b.adjoint();
        let scale = la::frobenius(&a);
        let out = la::hermitian_dominant_eig(&a, 1e-10).expect("eig");
        let resid = (&a * &out.pair.vector - out.pair.vector.scale(out.pair.value)).norm();
        worst_eig = worst_eig.max(resid / scale);

        let m = CMatrix::from_fn(rng.random_range(2..=6), rng.random_range(2..=8), |_, _| {
            randc(&mut rng)
        });
        let dec = la::svd(&m).expect("svd");
        let k = dec.sigma.len();
        let mut recon = CMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..k {
            recon += (dec.u.column(i) * dec.v.column(i).adjoint()).scale(dec.sigma[i]);
        }
        worst_svd = worst_svd.max(la::frobenius(&(&m - recon)) / la::frobenius(&m));
    }

    let bits: Vec<u8> = (0..20_000).map(|_| rng.random_range(0..2u8)).collect();
    let round_trip = qpsk_demap(&qpsk_map(&bits).expect("map")) == bits;

    let n_rb = 50;
    let n_sym = 14;
    let mut seen = vec![false; 12 * n_rb * n_sym];
    let mut bijective = true;
    for sym in 0..n_sym {
        for sc in 0..12 * n_rb {
            let idx = grid::re_index(sc, sym, n_rb).expect("index");
            if idx < 1 || idx > seen.len() || seen[idx - 1] {
                bijective = false;
            } else {
                seen[idx - 1] = true;
                if grid::re_coords(idx, n_rb) != (sc, sym) {
                    bijective = false;
                }
            }
        }
    }
    bijective &= seen.iter().all(|&s| s);

    let ok = worst_eig <= 1e-10 && worst_svd <= 1e-10 && round_trip && bijective;
    println!(
        "criterion 9 (numerics): {} — eig residual {worst_eig:.2e}, svd residual {worst_svd:.2e}, qpsk round-trip {round_trip}, index bijection {bijective}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}
