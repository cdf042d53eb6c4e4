//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Each check carries its runtime budget; exceeding it is a failure.

use std::path::Path;
use std::time::{Duration, Instant};

use gasforge::bench::{
    emit_report, full_grid, parse_report, prepare, render_markdown, run_matrix, synthetic_period, write_period,
    ExperimentSpec, ReportFormat, ReportRow, SyntheticPeriodSpec,
};
use gasforge::features::{
    align_sentiment, build_windows, export_dataset, import_dataset, AlignedDataset, DatasetLayout, SentimentFlags,
};
use gasforge::fee::{
    block_load, gas_target, gen_synthetic_demand, next_base_fee, normalized_load, shift_by_one_holds,
    simulate_proactive, simulate_reactive, DemandKind, MechanismParams, PerfectForesight,
};
use gasforge::ingest::{export_blocks, import_blocks, BlockRecord, BlockSequence, FileFormat, IngestSource, Wei};
use gasforge::matrix::Matrix;
use gasforge::models::{
    alpha_chain, fit_linear, fit_nam_monotonic, gradcheck_kind, monotonic_violation, mse, AuditContexts, ModelKind,
    Regressor, TrainConfig,
};
use gasforge::sentiment::{
    aggregate, export_scores, import_scores, score_message, Interval, LexiconScorer, SentimentScore, SIMPLEX_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const GWEI: Wei = 1_000_000_000;

/// Block-number-contiguous run with random spacing, gas and fees.
fn random_sequence(r: &mut ChaCha8Rng, n: usize) -> BlockSequence {
    let mut ts = 1_679_356_800 + r.random_range(0..86_400);
    let start = r.random_range(1_000..20_000_000);
    let blocks = (0..n)
        .map(|i| {
            ts += r.random_range(1..30);
            let gas_limit = r.random_range(2..60_000_000u64);
            BlockRecord::new(
                ts,
                start + i as u64,
                gas_limit,
                r.random_range(0..=gas_limit),
                r.random_range(1..500 * GWEI),
            )
            .unwrap()
        })
        .collect();
    BlockSequence::new(blocks).unwrap()
}

fn random_score(r: &mut ChaCha8Rng) -> SentimentScore {
    let w: [f64; 3] = [r.random(), r.random(), r.random::<f64>() + 1e-9];
    let s: f64 = w.iter().sum();
    SentimentScore::new(w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s).unwrap()
}

// 1
fn range_law() -> Outcome {
    let params = MechanismParams::default();
    let mut r = rng(1);
    for _ in 0..10_000 {
        let limit = r.random_range(2..100_000_000u64);
        let used = r.random_range(0..=limit);
        let target = gas_target(limit, &params).map_err(|e| e.to_string())?;
        let y = block_load(used, limit, &params).map_err(|e| e.to_string())?;
        ensure((-1.0..=1.0).contains(&y), || format!("load {y} for {used}/{limit}"))?;
        if used <= 2 * target {
            let direct = normalized_load(used, target).map_err(|e| e.to_string())?;
            ensure(direct == y, || format!("{direct} vs {y}"))?;
            let oracle = (used as f64 - target as f64) / target as f64;
            ensure((y - oracle).abs() <= 1e-12, || format!("{y} vs {oracle}"))?;
        }
        let at_target = block_load(target, limit, &params).map_err(|e| e.to_string())?;
        ensure(at_target == 0.0, || format!("{at_target} at target of {limit}"))?;
    }
    Ok("10000 pairs in [-1, 1], zero at target".into())
}

/// Reference integer update (EIP-1559 style), written independently of the
/// library: `delta = fee * |used - target| / target / 8`.
fn reference_fee(fee: Wei, used: u64, target: u64) -> Wei {
    let (fee, used, target) = (fee as u128, used as u128, target as u128);
    let next = if used > target {
        fee + fee * (used - target) / target / 8
    } else {
        fee - fee * (target - used) / target / 8
    };
    (next as Wei).max(7)
}

// 2
fn fee_dynamics() -> Outcome {
    let params = MechanismParams::default();
    let limit = 30_000_000;
    for (used, label) in [(limit, "full"), (0, "empty"), (limit / 2, "on-target")] {
        let blocks: Vec<BlockRecord> = (0..101)
            .map(|i| BlockRecord::new(1_000 + 12 * i, i as u64, limit, used, 1).unwrap())
            .collect();
        let traj = simulate_reactive(&BlockSequence::new(blocks).unwrap(), &params, GWEI).map_err(|e| e.to_string())?;
        let fees = traj.fees();
        let mut oracle = GWEI;
        for (n, &fee) in fees.iter().enumerate() {
            ensure(fee == oracle, || {
                format!("{label} step {n}: {fee} vs reference {oracle}")
            })?;
            oracle = reference_fee(oracle, used, limit / 2);
        }
        for w in fees.windows(2) {
            let expected = match label {
                "full" => w[0] + w[0] / 8,
                "empty" => w[0] - w[0] / 8,
                _ => w[0],
            };
            ensure(w[1] == expected, || format!("{label}: {} -> {}", w[0], w[1]))?;
        }
    }
    let fixed = next_base_fee(GWEI, 0.0, &params).map_err(|e| e.to_string())?;
    ensure(fixed == GWEI, || format!("y = 0 moved the fee to {fixed}"))?;
    Ok("100 steps match the reference rule; +12.5%, -12.5%, fixed point".into())
}

// 3
fn shift_by_one() -> Outcome {
    let params = MechanismParams::default();
    let kinds = [DemandKind::Sinusoidal, DemandKind::Autoregressive, DemandKind::Spike];
    for seed in 0..20u64 {
        let demand = gen_synthetic_demand(kinds[seed as usize % 3], seed, 200, 0.6).map_err(|e| e.to_string())?;
        let oracle = PerfectForesight::new(&demand, params, GWEI);
        let run = simulate_proactive(&demand, &oracle, &params, 200, GWEI).map_err(|e| e.to_string())?;
        // Replay the reactive rule by hand over the realized gas.
        let mut fee = GWEI;
        let mut reactive = vec![fee];
        for s in &run.steps {
            let y = block_load(s.realized_gas_used, demand.gas_limit, &params).map_err(|e| e.to_string())?;
            ensure(y.to_bits() == s.normalized_load.to_bits(), || {
                format!("seed {seed}: load mismatch")
            })?;
            fee = next_base_fee(fee, y, &params).map_err(|e| e.to_string())?;
            reactive.push(fee);
        }
        for (n, s) in run.steps.iter().enumerate() {
            ensure(s.base_fee == reactive[n + 1], || {
                format!(
                    "seed {seed} block {n}: proactive {} vs reactive {}",
                    s.base_fee,
                    reactive[n + 1]
                )
            })?;
        }
        ensure(
            shift_by_one_holds(&run, &demand, &params, GWEI).map_err(|e| e.to_string())?,
            || format!("seed {seed}: library check disagrees"),
        )?;
    }
    Ok("20 paths of 200 blocks equal reactive shifted by one".into())
}

// 4
fn window_oracle() -> Outcome {
    let params = MechanismParams::default();
    let mut r = rng(4);
    for case in 0..200 {
        let n = r.random_range(1..=50);
        let seq = random_sequence(&mut r, n);
        let b = seq.records();
        for k in 1..=3 {
            let built = build_windows(&seq, k, &params);
            if n < k + 1 {
                ensure(built.is_err(), || {
                    format!("case {case}: {n} blocks with k = {k} should fail")
                })?;
                continue;
            }
            let built = built.map_err(|e| e.to_string())?;
            ensure(built.len() == n - k, || format!("case {case}: {} windows", built.len()))?;
            for (i, w) in built.windows().iter().enumerate() {
                let alphas: Vec<f64> = (i..i + k)
                    .map(|j| b[j].gas_used as f64 / b[j].gas_limit as f64)
                    .collect();
                let betas: Vec<Wei> = (i..i + k).map(|j| b[j].base_fee).collect();
                let t = &b[i + k];
                let target = (t.gas_limit / 2) as f64;
                let y = ((t.gas_used as f64 - target) / target).clamp(-1.0, 1.0);
                ensure(w.alphas == alphas && w.betas == betas, || {
                    format!("case {case} k {k} window {i}")
                })?;
                ensure((w.target_y - y).abs() <= 1e-12, || {
                    format!("case {case} target {} vs {y}", w.target_y)
                })?;
                ensure(
                    w.target_block == t.block_number && w.last_timestamp == b[i + k - 1].timestamp,
                    || format!("case {case} k {k} window {i} bookkeeping"),
                )?;
            }
        }
    }
    Ok("200 sequences x k in {1,2,3} match brute force".into())
}

fn features_of(d: &AlignedDataset, target_block: u64) -> Option<Vec<u64>> {
    d.windows().iter().find(|w| w.target_block == target_block).map(|w| {
        let mut bits: Vec<u64> = w.alphas.iter().map(|a| a.to_bits()).collect();
        bits.extend(&w.betas);
        for g in [w.gamma_hour, w.gamma_day].into_iter().flatten() {
            bits.extend(g.as_array().map(f64::to_bits));
        }
        bits
    })
}

// 5
fn leak_freedom() -> Outcome {
    let params = MechanismParams::default();
    let period = synthetic_period(&SyntheticPeriodSpec::new("leak", DemandKind::Spike, 5, 1_500), &params)
        .map_err(|e| e.to_string())?;
    let flags = SentimentFlags::ALL[0];
    let build = |blocks: &BlockSequence, messages: &[(i64, SentimentScore)]| -> Result<AlignedDataset, String> {
        let w = build_windows(blocks, 3, &params).map_err(|e| e.to_string())?;
        let (h, d) = (aggregate(messages, Interval::Hour), aggregate(messages, Interval::Day));
        Ok(align_sentiment(&w, Some(&h), Some(&d), flags)
            .map_err(|e| e.to_string())?
            .dataset)
    };
    let base = build(&period.blocks, &period.messages)?;
    let mut r = rng(5);
    for trial in 0..100 {
        let w = &base.windows()[r.random_range(0..base.len())];
        let cutoff = w.last_timestamp;
        let mut blocks = period.blocks.records().to_vec();
        let later: Vec<usize> = (0..blocks.len()).filter(|&i| blocks[i].timestamp > cutoff).collect();
        for _ in 0..r.random_range(1..=5).min(later.len()) {
            let b = &mut blocks[later[r.random_range(0..later.len())]];
            b.gas_used = r.random_range(0..=b.gas_limit);
            b.base_fee = r.random_range(1..1_000 * GWEI);
        }
        let mut messages = period.messages.clone();
        let late: Vec<usize> = (0..messages.len()).filter(|&i| messages[i].0 > cutoff).collect();
        for _ in 0..r.random_range(1..=20).min(late.len()) {
            messages[late[r.random_range(0..late.len())]].1 = random_score(&mut r);
        }
        messages.push((cutoff + r.random_range(1..7_200), random_score(&mut r)));
        let perturbed = build(&BlockSequence::new(blocks).unwrap(), &messages)?;
        let (before, after) = (
            features_of(&base, w.target_block),
            features_of(&perturbed, w.target_block),
        );
        ensure(before.is_some() && before == after, || {
            format!("trial {trial}: window for block {} changed", w.target_block)
        })?;
    }
    Ok("100 perturbations after the cutoff leave features bit-identical".into())
}

fn random_xy(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Matrix, Vec<f64>) {
    let data: Vec<f64> = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
    let y = (0..rows).map(|_| r.random_range(-1.0..1.0)).collect();
    (Matrix::from_vec(rows, cols, data), y)
}

// 6
fn gradient_checks() -> Outcome {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::Linear, ModelKind::Mlp, ModelKind::Nam] {
        for case in 0..20u64 {
            let cols = r.random_range(1..=4);
            let rows = r.random_range(3..=12);
            let (x, y) = random_xy(&mut r, rows, cols);
            let hidden = (0..r.random_range(1..=2)).map(|_| r.random_range(2..=5)).collect();
            let config = TrainConfig {
                seed: case,
                hidden,
                ..Default::default()
            };
            let err = gradcheck_kind(kind, &x, &y, &config).map_err(|e| e.to_string())?;
            worst = worst.max(err);
            ensure(err <= 1e-4, || format!("{kind} case {case}: relative error {err:e}"))?;
        }
    }
    Ok(format!("60 instances, worst relative error {worst:.1e}"))
}

// 7
fn monotonic_training() -> Outcome {
    let params = MechanismParams::default();
    let period = synthetic_period(
        &SyntheticPeriodSpec::new("mono", DemandKind::Autoregressive, 7, 5_003),
        &params,
    )
    .map_err(|e| e.to_string())?;
    let data = build_windows(&period.blocks, 3, &params).map_err(|e| e.to_string())?;
    ensure(data.len() == 5_000, || format!("{} windows", data.len()))?;
    let prepared = prepare(&data, 0.8).map_err(|e| e.to_string())?;
    let constraints = alpha_chain(&prepared.layout);
    ensure(constraints.len() == 3, || "k = 3 chain has three pairs".into())?;
    let (mut plain, mut constrained) = (Vec::new(), Vec::new());
    for trial in 0..5u64 {
        let config = TrainConfig {
            seed: trial,
            hidden: vec![16, 16],
            grid_points: 101,
            step: 0.01,
            contexts: 64,
            ..Default::default()
        };
        let fit = fit_nam_monotonic(&prepared.x_train, &prepared.y_train, &config, &constraints)
            .map_err(|e| e.to_string())?;
        // Fresh audit contexts, independent of the ones used in training.
        let contexts = AuditContexts::sample(&prepared.x_train, 101, 64, 1_000 + trial).map_err(|e| e.to_string())?;
        for &c in &constraints {
            let v = monotonic_violation(&fit.model, c, 101, 0.01, &contexts).map_err(|e| e.to_string())?;
            ensure(v == 0.0, || format!("trial {trial}: violation {v:e} on {c:?}"))?;
        }
        let test = |m: &dyn Regressor| -> Result<f64, String> {
            let p = m.predict(&prepared.x_test).map_err(|e| e.to_string())?;
            mse(&p, &prepared.y_test).map_err(|e| e.to_string())
        };
        plain.push(test(&fit.unconstrained.model)?);
        constrained.push(test(&fit.model)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (p, c) = (mean(&plain), mean(&constrained));
    ensure(c <= 1.05 * p, || {
        format!("constrained mse {c:.6} vs unconstrained {p:.6}")
    })?;
    Ok(format!(
        "violation 0 on 5 seeds, test mse {c:.6} vs unconstrained {p:.6} ({:+.2}%)",
        100.0 * (c / p - 1.0)
    ))
}

// 8
fn linear_recovery() -> Outcome {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let cols = r.random_range(1..=8);
        let (x, _) = random_xy(&mut r, 100, cols);
        let w: Vec<f64> = (0..cols).map(|_| r.random_range(-3.0..3.0)).collect();
        let b = r.random_range(-1.0..1.0);
        let y: Vec<f64> = x
            .iter_rows()
            .map(|row| b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let fit = fit_linear(&x, &y).map_err(|e| e.to_string())?;
        let err = fit
            .weights()
            .iter()
            .zip(&w)
            .map(|(a, c)| (a - c).abs())
            .fold((fit.bias() - b).abs(), f64::max);
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("case {case}: weight error {err:e}"))?;
    }
    Ok(format!("20 fits, worst weight error {worst:.1e}"))
}

// 9
fn matrix_shape(dir: &Path) -> Outcome {
    let params = MechanismParams::default();
    let mut periods = Vec::new();
    for (i, (label, kind)) in [
        ("Period 1", DemandKind::Spike),
        ("Period 2", DemandKind::Autoregressive),
    ]
    .into_iter()
    .enumerate()
    {
        let p = synthetic_period(&SyntheticPeriodSpec::new(label, kind, 90 + i as u64, 2_000), &params)
            .map_err(|e| e.to_string())?;
        periods.push((
            label.to_owned(),
            write_period(&p, dir, &format!("p{i}")).map_err(|e| e.to_string())?,
        ));
    }
    let template = ExperimentSpec {
        trials: 2,
        train: TrainConfig {
            learning_rate: 0.01,
            epochs: 15,
            hidden: vec![8],
            ..Default::default()
        },
        ..ExperimentSpec::from_files("t", &periods[0].1, 1, SentimentFlags::ONCHAIN_ONLY)
    };
    let specs = full_grid(&periods, &template);
    let outcome = run_matrix(&specs).map_err(|e| e.to_string())?;
    if let Some(cell) = outcome.failures().next() {
        return Err(format!("{:?}", cell.result.as_ref().unwrap_err()));
    }
    let rows = outcome.rows();
    ensure(rows.len() == 24, || format!("{} rows", rows.len()))?;
    let mut expected = Vec::new();
    for p in ["Period 1", "Period 2"] {
        for k in [3, 2, 1] {
            for flags in SentimentFlags::ALL {
                expected.push((p.to_owned(), k, flags.to_string()));
            }
        }
    }
    let got: Vec<_> = rows
        .iter()
        .map(|r| (r.period.clone(), r.k, r.setting.to_string()))
        .collect();
    ensure(got == expected, || format!("row order {got:?}"))?;
    let md = render_markdown(&rows).map_err(|e| e.to_string())?;
    ensure(
        md.matches("\n## ").count() + usize::from(md.starts_with("## ")) == 2,
        || md.clone(),
    )?;
    let body: Vec<&str> = md
        .lines()
        .filter(|l| l.starts_with("| ") && !l.starts_with("| k "))
        .collect();
    ensure(body.len() == 6, || md.clone())?;
    for (line, k) in body.iter().zip([3, 2, 1, 3, 2, 1]) {
        ensure(
            line.starts_with(&format!("| {k} |")) && line.matches('|').count() == 6,
            || line.to_string(),
        )?;
    }
    Ok("24 rows: 2 periods x k = 3, 2, 1 x 4 settings; markdown 2 sections x 3 rows x 4 columns".into())
}

// 10
fn sentiment_simplex() -> Outcome {
    let mut r = rng(10);
    let scorer = LexiconScorer::default();
    let words = [
        "gas", "moon", "scam", "not", "great", "bad", "airdrop", "love", "dump", "no", "ok", "fees", "high",
    ];
    let check = |s: &SentimentScore| {
        (s.sum() - 1.0).abs() <= SIMPLEX_TOLERANCE && s.as_array().iter().all(|p| *p >= -SIMPLEX_TOLERANCE)
    };
    let mut pool: Vec<(i64, SentimentScore)> = Vec::new();
    for op in 0..10_000 {
        if op % 2 == 0 {
            let text: Vec<&str> = (0..r.random_range(1..12))
                .map(|_| words[r.random_range(0..words.len())])
                .collect();
            let s = score_message(&text.join(" "), &scorer).map_err(|e| e.to_string())?;
            ensure(check(&s), || format!("score {s:?}"))?;
            pool.push((r.random_range(0..5 * 86_400), s));
        } else {
            pool.push((r.random_range(0..5 * 86_400), random_score(&mut r)));
            let interval = if r.random() { Interval::Hour } else { Interval::Day };
            let start = r.random_range(0..pool.len());
            let series = aggregate(&pool[start..], interval);
            for b in series.buckets() {
                ensure(check(&b.mean), || format!("bucket {b:?}"))?;
            }
        }
    }
    let chunk = [
        (3_600, SentimentScore::new(0.6, 0.2, 0.2).unwrap()),
        (5_000, SentimentScore::new(0.2, 0.6, 0.2).unwrap()),
    ];
    let mean = aggregate(&chunk, Interval::Hour).buckets()[0].mean.as_array();
    let expected = [0.4, 0.4, 0.2];
    ensure(mean.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12), || {
        format!("{mean:?}")
    })?;
    Ok("10000 operations on the simplex; 2-message mean (0.4, 0.4, 0.2)".into())
}

// 11
fn round_trips(dir: &Path) -> Outcome {
    let mut r = rng(11);
    let err = |e: &dyn std::fmt::Display| e.to_string();
    for case in 0..20 {
        let n = r.random_range(1..200);
        let seq = random_sequence(&mut r, n);
        for (name, format) in [("b.csv", FileFormat::Csv), ("b.jsonl", FileFormat::Jsonl)] {
            let path = dir.join(name);
            export_blocks(&seq, &path, format).map_err(|e| err(&e))?;
            let back = import_blocks(&IngestSource::infer(&path.to_string_lossy()).unwrap()).map_err(|e| err(&e))?;
            ensure(back == seq, || format!("case {case}: {name} differs"))?;
        }

        let k = r.random_range(1..=3);
        if seq.len() > k {
            let windows = build_windows(&seq, k, &MechanismParams::default()).map_err(|e| err(&e))?;
            let messages: Vec<(i64, SentimentScore)> = (0..300)
                .map(|_| {
                    (
                        seq.records()[0].timestamp - 86_400 * 2 + r.random_range(0..3 * 86_400),
                        random_score(&mut r),
                    )
                })
                .collect();
            let flags = SentimentFlags::ALL[r.random_range(0..4)];
            let aligned = align_sentiment(
                &windows,
                Some(&aggregate(&messages, Interval::Hour)),
                Some(&aggregate(&messages, Interval::Day)),
                flags,
            )
            .map_err(|e| err(&e))?
            .dataset;
            let path = dir.join("d.csv");
            if !aligned.is_empty() {
                export_dataset(&aligned, &path).map_err(|e| err(&e))?;
                let back = import_dataset(&path).map_err(|e| err(&e))?;
                ensure(back == aligned, || format!("case {case}: dataset differs"))?;
                ensure(back.layout() == DatasetLayout { k, flags }, || "layout".into())?;
            }
        }

        let mut scores: Vec<(i64, SentimentScore)> = (0..r.random_range(1..100))
            .map(|_| (r.random_range(0..10_000_000), random_score(&mut r)))
            .collect();
        scores.sort_by_key(|s| s.0);
        let path = dir.join("s.csv");
        export_scores(&scores, &path).map_err(|e| err(&e))?;
        ensure(import_scores(&path).map_err(|e| err(&e))? == scores, || {
            format!("case {case}: scores differ")
        })?;

        let rows: Vec<ReportRow> = (0..r.random_range(1..30))
            .map(|i| ReportRow {
                period: format!("period \"{i}\", x"),
                k: r.random_range(1..5),
                setting: SentimentFlags::ALL[r.random_range(0..4)],
                model: ["linear", "mlp", "nam", "nam-monotonic"][r.random_range(0..4)].into(),
                mse: r.random::<f64>() * 10f64.powi(r.random_range(-8..2)),
                variance: r.random::<f64>() * 1e-3,
                trials: r.random_range(1..10),
            })
            .collect();
        for (name, format) in [("r.csv", ReportFormat::Csv), ("r.json", ReportFormat::Json)] {
            let path = dir.join(name);
            emit_report(&rows, &path, format).map_err(|e| err(&e))?;
            ensure(parse_report(&path, format).map_err(|e| err(&e))? == rows, || {
                format!("case {case}: {name}")
            })?;
        }
    }
    Ok("blocks csv/jsonl, dataset, scores, report csv/json: 20 random cases each".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let secs = Duration::from_secs;
    let criteria: Vec<Criterion> = vec![
        ("range law", secs(1), Box::new(range_law)),
        ("fee dynamics", secs(1), Box::new(fee_dynamics)),
        ("shift-by-one equivalence", secs(5), Box::new(shift_by_one)),
        ("window oracle", secs(5), Box::new(window_oracle)),
        ("leak-freedom", secs(5), Box::new(leak_freedom)),
        ("gradient checks", secs(30), Box::new(gradient_checks)),
        ("monotonicity result", secs(300), Box::new(monotonic_training)),
        ("linear exact recovery", secs(1), Box::new(linear_recovery)),
        ("matrix shape", secs(600), Box::new(|| matrix_shape(dir.path()))),
        ("sentiment simplex", secs(1), Box::new(sentiment_simplex)),
        ("format round-trips", secs(5), Box::new(|| round_trips(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(msg) if elapsed > *budget => Err(format!("{msg}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} ({elapsed:.2?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
