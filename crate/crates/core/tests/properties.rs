//! Randomized invariants over the fuzzy layer, the bucketizer, the tuner and
//! the suppression state.

use fuzzydiag::alerting::{decide, Gate, SuppressionState};
use fuzzydiag::fuzzy::{LinguisticVariable, RuleBase, TNorm, TsRule};
use fuzzydiag::ingest::{Bucketizer, FlowRecord, Proto};
use fuzzydiag::rulebook::{
    build_rulebase, default_intensity_variable, default_time_variable, ActionLevel, ModuleKind,
};
use fuzzydiag::tuner::{online_tune_step, SampleLabel, TunerConfig, TunerState};
use proptest::prelude::*;

fn arb_module() -> impl Strategy<Value = ModuleKind> {
    prop_oneof![
        Just(ModuleKind::IpCount),
        Just(ModuleKind::IpxCount),
        Just(ModuleKind::Utilization),
        Just(ModuleKind::BytesPerSec),
    ]
}

/// A random strictly increasing peak list inside [min, max].
fn arb_peaks(min: f64, max: f64, n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(move |gaps: Vec<f64>| {
        let total: f64 = gaps.iter().sum();
        let span = max - min;
        let mut peaks = Vec::with_capacity(gaps.len());
        let mut acc = 0.0;
        for g in &gaps {
            peaks.push(min + acc / total * span * 0.9 + span * 0.05);
            acc += g;
        }
        peaks
    })
}

/// Random circular peaks on a jittered grid, keeping every gap (including
/// the wrap) under half the domain as the Ruspini layout requires.
fn arb_circular_peaks(len: f64, n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..0.8, n).prop_map(move |jitter| {
        jitter
            .iter()
            .enumerate()
            .map(|(i, j)| (i as f64 + j) * len / n as f64)
            .collect()
    })
}

fn ruspini_var(min: f64, max: f64, circular: bool, peaks: &[f64]) -> LinguisticVariable {
    let names: Vec<String> = (0..peaks.len()).map(|i| format!("t{i}")).collect();
    let spec: Vec<(&str, f64)> =
        names.iter().map(String::as_str).zip(peaks.iter().copied()).collect();
    LinguisticVariable::ruspini("v", min, max, circular, &spec).unwrap()
}

proptest! {
    /// Ruspini partitions sum to one everywhere on the domain.
    #[test]
    fn ruspini_partition_sums_to_one(peaks in arb_peaks(0.0, 5.0, 4), x in 0.0f64..5.0) {
        let v = ruspini_var(0.0, 5.0, false, &peaks);
        let sum: f64 = v.fuzzify(x).iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum {sum} at x={x}");
    }

    /// Same for circular partitions, including the wrap region.
    #[test]
    fn circular_partition_sums_to_one(peaks in arb_circular_peaks(24.0, 5), x in 0.0f64..24.0) {
        let v = ruspini_var(0.0, 24.0, true, &peaks);
        let sum: f64 = v.fuzzify(x).iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum {sum} at x={x}");
    }

    /// Circular membership is invariant under whole-domain shifts.
    #[test]
    fn circular_wraps_a_full_day(x in -24.0f64..48.0) {
        let v = default_time_variable();
        let a = v.fuzzify(v.project(x));
        let b = v.fuzzify(v.project(x + 24.0));
        for (ma, mb) in a.iter().zip(&b) {
            prop_assert!((ma - mb).abs() < 1e-9);
        }
    }

    /// Defuzzified output stays inside the hull of fired rule outputs.
    #[test]
    fn output_is_convex_combination(ratio in -1.0f64..4.0, tod in -10.0f64..40.0) {
        let rb = build_rulebase(ModuleKind::IpCount);
        let result = rb.evaluate(&[ratio, tod]).unwrap();
        let fired: Vec<f64> = rb
            .rules()
            .iter()
            .zip(&result.per_rule_weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(r, _)| r.coeffs[0])
            .collect();
        prop_assert!(!fired.is_empty());
        let lo = fired.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fired.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(result.output >= lo - 1e-9 && result.output <= hi + 1e-9);
    }

    /// Product and Min agree whenever at most one antecedent degree is
    /// fractional, which holds at every membership peak.
    #[test]
    fn tnorms_agree_on_peak_inputs(ti in 0usize..5, ratio in 0.0f64..2.0) {
        let intensity = default_intensity_variable();
        let time = default_time_variable();
        let tod = time.terms()[ti % time.terms().len()].mf.peak();
        let rules: Vec<TsRule> = build_rulebase(ModuleKind::IpCount).rules().to_vec();
        let product = RuleBase::new(
            vec![intensity.clone(), time.clone()],
            rules.clone(),
            TNorm::Product,
        )
        .unwrap();
        let min = RuleBase::new(vec![intensity, time], rules, TNorm::Min).unwrap();
        let yp = product.evaluate(&[ratio, tod]).unwrap().output;
        let ym = min.evaluate(&[ratio, tod]).unwrap().output;
        prop_assert!((yp - ym).abs() < 1e-9, "product {yp} vs min {ym}");
    }

    /// The tuner never reorders peaks, whatever the stream throws at it.
    #[test]
    fn tuner_preserves_peak_order(
        xs in prop::collection::vec(-0.5f64..3.0, 1..60),
        eta in 0.01f64..1.0,
    ) {
        let mut v = default_intensity_variable();
        let mut state = TunerState::for_variable(&v);
        let cfg = TunerConfig { eta, ..TunerConfig::default() };
        for &x in &xs {
            online_tune_step(&mut v, &mut state, x, ActionLevel::Log, SampleLabel::Normal, &cfg)
                .unwrap();
            let peaks: Vec<f64> = v.terms().iter().map(|t| t.mf.peak()).collect();
            for w in peaks.windows(2) {
                prop_assert!(w[0] < w[1], "peaks out of order: {peaks:?}");
            }
        }
    }

    /// Cumulative displacement never exceeds the configured budget.
    #[test]
    fn tuner_respects_displacement_budget(
        xs in prop::collection::vec(-0.5f64..3.0, 1..60),
        eta in 0.01f64..1.0,
        budget in 0.01f64..0.2,
    ) {
        let mut v = default_intensity_variable();
        let mut state = TunerState::for_variable(&v);
        let cfg = TunerConfig { eta, max_total_disp: budget, ..TunerConfig::default() };
        for &x in &xs {
            online_tune_step(&mut v, &mut state, x, ActionLevel::Log, SampleLabel::Normal, &cfg)
                .unwrap();
        }
        for &d in &state.cumulative {
            prop_assert!(d.abs() <= budget + 1e-12, "displacement {d} over budget {budget}");
        }
    }

    /// Bucketizing conserves packet and byte totals for in-order streams and
    /// splits counts by protocol correctly.
    #[test]
    fn bucketize_conserves_totals(
        deltas in prop::collection::vec(0.0f64..30.0, 1..200),
        protos in prop::collection::vec(any::<bool>(), 200),
        sizes in prop::collection::vec(64u64..1500, 200),
    ) {
        let mut ts = 0.0;
        let mut records = Vec::new();
        for (i, d) in deltas.iter().enumerate() {
            ts += d;
            let proto = if protos[i % protos.len()] { Proto::Ip } else { Proto::Ipx };
            records.push(FlowRecord { ts, proto, bytes: sizes[i % sizes.len()] });
        }
        let mut bz = Bucketizer::new(60.0, 0.0).unwrap();
        let mut buckets = Vec::new();
        for r in &records {
            buckets.extend(bz.push(r));
        }
        buckets.extend(bz.finish());
        let bytes: u64 = buckets.iter().map(|b| b.total_bytes).sum();
        let ip: u64 = buckets.iter().map(|b| b.ip_count).sum();
        let ipx: u64 = buckets.iter().map(|b| b.ipx_count).sum();
        prop_assert_eq!(bytes, records.iter().map(|r| r.bytes).sum::<u64>());
        prop_assert_eq!(ip, records.iter().filter(|r| r.proto == Proto::Ip).count() as u64);
        prop_assert_eq!(ipx, records.iter().filter(|r| r.proto == Proto::Ipx).count() as u64);
        // half-open windows: each record lands in exactly one bucket
        prop_assert_eq!(ip + ipx, records.len() as u64);
    }

    /// Every suppressed decision is eventually accounted for: dispatches plus
    /// carried counters plus still-pending counters equals the event total.
    #[test]
    fn suppression_conserves_events(
        steps in prop::collection::vec((arb_module(), 0.51f64..3.0, 1.0f64..400.0), 1..100),
        cooldown in 10.0f64..600.0,
    ) {
        let mut state = SuppressionState::new(cooldown);
        let mut ts = 0.0;
        let mut total = 0u64;
        let mut dispatched = 0u64;
        let mut carried = 0u64;
        for (module, severity, dt) in steps {
            ts += dt;
            let event = decide(module, ts, severity, 1.0, 12.0).unwrap().unwrap();
            total += 1;
            match state.rate_limit(&event) {
                Gate::Dispatch(e) => {
                    dispatched += 1;
                    carried += e.suppressed_count;
                }
                Gate::Suppress => {}
            }
        }
        let pending: u64 = state.pending().values().sum();
        prop_assert_eq!(dispatched + carried + pending, total);
    }
}
