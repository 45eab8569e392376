mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xferlab::corpus::{build_fld, build_wld, split, Dataset, Polarity};
use xferlab::eval::{
    evaluate, format_accuracy, format_f1, parse_csv_report, render_report, transfer_matrix, Cell,
    CellMetrics, ReportFormat, ReportMetadata, TransferReport,
};
use xferlab::featurize::Encoder;
use xferlab::model::{Architecture, ModelParams};
use xferlab::synth::{self, SynthConfig};
use xferlab::trainer::{Convergence, StageConfig, Trainer, TwoStagePlan};

fn polarity(b: bool) -> Polarity {
    if b {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

/// Confusion counts by explicit enumeration of the four cases.
fn brute_force(gold: &[Polarity], pred: &[Polarity]) -> (f64, f64) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u32, 0u32, 0u32, 0u32);
    for (g, p) in gold.iter().zip(pred) {
        match (g, p) {
            (Polarity::Positive, Polarity::Positive) => tp += 1,
            (Polarity::Negative, Polarity::Positive) => fp += 1,
            (Polarity::Negative, Polarity::Negative) => tn += 1,
            (Polarity::Positive, Polarity::Negative) => fn_ += 1,
        }
    }
    let acc = f64::from(tp + tn) / gold.len() as f64;
    let denom = 2 * tp + fp + fn_;
    let f1 = if denom == 0 {
        0.0
    } else {
        f64::from(2 * tp) / f64::from(denom)
    };
    (acc, f1)
}

#[test]
fn evaluate_matches_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let bias = rng.gen_range(0.0..1.0);
        let gold: Vec<Polarity> = (0..n).map(|_| polarity(rng.gen_bool(bias))).collect();
        let pred: Vec<Polarity> = (0..n).map(|_| polarity(rng.gen_bool(bias))).collect();
        let scripted: Vec<Option<Polarity>> = pred.iter().copied().map(Some).collect();
        let (params, enc, ds) = common::scripted_predictions(&gold, &scripted);
        let (counts, m) = evaluate(&params, &enc, &ds).unwrap();
        assert_eq!(counts.total(), n);
        assert_eq!((m.accuracy, m.f1), brute_force(&gold, &pred));
    }
}

#[test]
fn ties_predict_negative() {
    let gold = [Polarity::Positive, Polarity::Negative];
    let (params, enc, ds) = common::scripted_predictions(&gold, &[None, None]);
    let (counts, m) = evaluate(&params, &enc, &ds).unwrap();
    assert_eq!((counts.tp, counts.fp, counts.tn, counts.fn_), (0, 0, 1, 1));
    assert_eq!((m.accuracy, m.f1), (0.5, 0.0));
}

#[test]
fn evaluate_rejects_bad_inputs() {
    let gold = [Polarity::Positive];
    let (params, enc, ds) = common::scripted_predictions(&gold, &[Some(Polarity::Positive)]);
    let wide = ModelParams::init(&Architecture::new(3, vec![]), 0).unwrap();
    let msg = evaluate(&wide, &enc, &ds).unwrap_err().to_string();
    assert!(msg.contains('3') && msg.contains('1'), "{msg}");
    let (_, _, empty) = common::scripted_predictions(&[], &[]);
    assert!(evaluate(&params, &enc, &empty).is_err());
}

struct Fixture {
    encoder: Encoder,
    runs: Vec<(String, ModelParams)>,
    targets: Vec<(String, Dataset)>,
}

fn fixture() -> Fixture {
    let cfg = SynthConfig {
        wld_size: 800,
        source_fld_size: 200,
        target_fld_size: 300,
        ..SynthConfig::default()
    };
    let f = synth::generate(&cfg, 4);
    let wld = build_wld(&f.source_wld, "A").unwrap();
    let (a_train, a_test) = split(
        &build_fld(&f.source_fld, "A").unwrap(),
        "0.85".parse().unwrap(),
        4,
    )
    .unwrap();
    let (_, b_test) = split(
        &build_fld(&f.target_fld, "B").unwrap(),
        "0.85".parse().unwrap(),
        4,
    )
    .unwrap();
    let encoder = Encoder::hashed(1 << 12, 2).unwrap();
    let plan = TwoStagePlan::new(
        Some(StageConfig::new(0.01, 1)),
        StageConfig::new(0.03, 30),
        Convergence::default(),
    )
    .unwrap();
    let mut t = Trainer::new(&encoder);
    let two = t
        .run_two_stage(&plan, &[], Some(&wld), &a_train, 1)
        .unwrap()
        .params;
    let fld = t
        .run_two_stage(&plan.without_pretrain(), &[], None, &a_train, 1)
        .unwrap()
        .params;
    let wo = t
        .run_baseline_wld_only(&wld, plan.train(), plan.convergence(), &[], 1)
        .unwrap()
        .params;
    Fixture {
        encoder,
        runs: vec![
            ("A".into(), fld),
            ("AWLD".into(), wo),
            ("A-AWLD".into(), two),
        ],
        targets: vec![("A".into(), a_test), ("B".into(), b_test)],
    }
}

fn refs<T>(items: &[(String, T)]) -> Vec<(String, &T)> {
    items.iter().map(|(l, v)| (l.clone(), v)).collect()
}

#[test]
fn transfer_matrix_cells_are_pure() {
    let fx = fixture();
    let full = transfer_matrix(&refs(&fx.runs), &refs(&fx.targets), &fx.encoder).unwrap();
    assert_eq!(full.cells.iter().flatten().count(), 6);
    assert_eq!(full.failed_cells(), 0);

    let diag = evaluate(&fx.runs[0].1, &fx.encoder, &fx.targets[0].1)
        .unwrap()
        .0;
    assert_eq!(full.cell(0, 0), &Cell::Ok(CellMetrics::from(diag)));

    for (r, run) in fx.runs.iter().enumerate() {
        for (t, target) in fx.targets.iter().enumerate() {
            let single = transfer_matrix(
                &[(run.0.clone(), &run.1)],
                &[(target.0.clone(), &target.1)],
                &fx.encoder,
            )
            .unwrap();
            assert_eq!(single.cell(0, 0), full.cell(r, t));
        }
    }
    let reversed: Vec<_> = refs(&fx.runs).into_iter().rev().collect();
    let rev = transfer_matrix(&reversed, &refs(&fx.targets), &fx.encoder).unwrap();
    assert_eq!(rev.cells[0], full.cells[2]);
}

#[test]
fn failing_cells_do_not_abort_the_matrix() {
    let fx = fixture();
    let wrong = ModelParams::init(&Architecture::new(8, vec![]), 0).unwrap();
    let runs = vec![
        (fx.runs[0].0.clone(), &fx.runs[0].1),
        ("wrong".to_string(), &wrong),
    ];
    let report = transfer_matrix(&runs, &refs(&fx.targets), &fx.encoder).unwrap();
    assert_eq!(report.failed_cells(), 2);
    assert!(matches!(report.cell(1, 0), Cell::Failed(m) if m.contains("dimension")));
    assert!(matches!(report.cell(0, 1), Cell::Ok(_)));
    let csv = render_report(&report, ReportFormat::Csv);
    assert!(
        csv.lines()
            .nth(2)
            .unwrap()
            .starts_with("wrong,ERR,ERR,ERR,ERR"),
        "{csv}"
    );
}

fn random_report(seed: u64, rows: usize, cols: usize) -> TransferReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        Cell::Failed("boom".into())
                    } else {
                        // Coarse grid so ties in the printed values are common.
                        let acc = f64::from(rng.gen_range(0..40u32)) / 40.0;
                        Cell::Ok(CellMetrics {
                            accuracy: acc,
                            f1: rng.gen_range(0.0..1.0),
                            macro_f1: rng.gen_range(0.0..1.0),
                        })
                    }
                })
                .collect()
        })
        .collect();
    TransferReport::new(
        (0..rows).map(|r| format!("run{r}")).collect(),
        (0..cols).map(|c| format!("t{c}")).collect(),
        cells,
        ReportMetadata::default(),
    )
    .unwrap()
}

#[test]
fn markdown_markers_match_sorted_columns() {
    for seed in 0..200 {
        let report = random_report(seed, 1 + (seed as usize % 6), 1 + (seed as usize % 3));
        let md = render_report(&report, ReportFormat::Markdown);
        let lines: Vec<&str> = md.lines().skip(2).collect();
        for t in 0..report.targets.len() {
            let mut printed: Vec<f64> = report
                .cells
                .iter()
                .filter_map(|row| row[t].metrics())
                .map(|m| format_accuracy(m.accuracy).parse().unwrap())
                .collect();
            printed.sort_by(|a, b| b.partial_cmp(a).unwrap());
            printed.dedup();
            for (s, line) in lines.iter().enumerate() {
                let field = line.split('|').map(str::trim).nth(2 + 2 * t).unwrap();
                let expected = match report.cell(s, t).metrics() {
                    None => "ERR".to_string(),
                    Some(m) => {
                        let acc = format_accuracy(m.accuracy);
                        let v: f64 = acc.parse().unwrap();
                        if Some(&v) == printed.first() {
                            format!("**{acc}**")
                        } else if Some(&v) == printed.get(1) {
                            format!("*{acc}*")
                        } else {
                            acc
                        }
                    }
                };
                assert_eq!(field, expected, "seed {seed} row {s} col {t}\n{md}");
            }
        }
    }
}

proptest! {
    #[test]
    fn csv_round_trips_at_printed_precision(seed in any::<u64>(), rows in 0usize..5, cols in 0usize..4) {
        let report = random_report(seed, rows, cols);
        let parsed = parse_csv_report(&render_report(&report, ReportFormat::Csv)).unwrap();
        prop_assert_eq!(&parsed.targets, &report.targets);
        prop_assert_eq!(parsed.rows.len(), rows);
        for ((label, cells), (src, row)) in parsed.rows.iter().zip(report.sources.iter().zip(&report.cells)) {
            prop_assert_eq!(label, src);
            for (got, want) in cells.iter().zip(row) {
                match (got, want.metrics()) {
                    (None, None) => {}
                    (Some(g), Some(w)) => {
                        prop_assert_eq!(format_accuracy(g.accuracy), format_accuracy(w.accuracy));
                        prop_assert_eq!(format_f1(g.f1), format_f1(w.f1));
                        prop_assert_eq!(format_f1(g.macro_f1), format_f1(w.macro_f1));
                    }
                    _ => prop_assert!(false, "failed-cell mismatch"),
                }
            }
        }
    }
}

#[test]
fn printed_precision() {
    assert_eq!(format_accuracy(0.825), "82.50");
    assert_eq!(format_f1(0.809), "0.809");
    assert_eq!(format_accuracy(1.0), "100.00");
    assert_eq!(format_f1(0.0), "0.000");
}
