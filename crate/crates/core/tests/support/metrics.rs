use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulematrix_core::metrics::{
    compute_metrics, feature_importance, filter_data, filter_rules, probe, DataFilter, MetricsReport, RuleFlow, RuleMetrics, ViewRow,
};
use rulematrix_core::oracle::FnOracle;
use rulematrix_core::rulelist::Priors;
use rulematrix_core::{Clause, DataTable, DatasetSchema, FeatureSpec, Instances, RuleList};
use serde_json::Value;

use super::learner::{rule, three_rule_list};
use super::{close, Check};

/// First-match routing over the JSON form of a rule list, read field by
/// field.
pub fn json_fire(rules: &Value, x: &[f64]) -> usize {
    let rules = rules["rules"].as_array().expect("rules array");
    for (i, r) in rules.iter().enumerate() {
        let clauses = r["clauses"].as_array().expect("clauses array");
        let all = clauses.iter().all(|c| {
            let v = x[c["feature"].as_u64().unwrap() as usize];
            match c["type"].as_str().unwrap() {
                "interval" => c["lo"].as_f64().is_none_or(|lo| v >= lo) && c["hi"].as_f64().is_none_or(|hi| v < hi),
                "category" => v as u64 == c["index"].as_u64().unwrap(),
                other => panic!("unknown clause type {other}"),
            }
        });
        if all {
            return i;
        }
    }
    rules.len() - 1
}

/// Structural invariants of a metrics report: support totals, evidence
/// totals, per-class flow conservation, the fidelity decomposition and the
/// confidence range.
pub fn check_report(list: &RuleList, report: &MetricsReport, n: usize) -> Check {
    ensure!(report.overall.n == n, "report covers {} rows, expected {n}", report.overall.n);
    check_per_rule(list, &report.per_rule, n, report.overall.fidelity)
}

/// As [`check_report`] for the per-rule metrics stored in a bundle.
pub fn check_per_rule(list: &RuleList, per: &[RuleMetrics], n: usize, fidelity: f64) -> Check {
    ensure!(per.len() == list.len(), "{} metrics for {} rules", per.len(), list.len());
    ensure!(per.iter().map(|m| m.support_count).sum::<usize>() == n, "supports do not sum to {n}");
    let classes = list.class_count();
    for (i, m) in per.iter().enumerate() {
        let ev: usize = m.evidence.iter().map(|e| e.correct + e.wrong).sum();
        ensure!(ev == m.support_count, "rule {i}: evidence {ev} vs support {}", m.support_count);
        ensure!(m.flow.captured.iter().sum::<usize>() == m.support_count, "rule {i}: captured flow vs support");
        for c in 0..classes {
            let next = per.get(i + 1).map_or(0, |nx| nx.flow.inflow[c]);
            ensure!(m.flow.inflow[c] == m.flow.captured[c] + next, "rule {i}, class {c}: inflow {} != captured {} + next {next}", m.flow.inflow[c], m.flow.captured[c]);
        }
        ensure!(m.confidence >= 1.0 / classes as f64 && m.confidence <= 1.0, "rule {i}: confidence {}", m.confidence);
        ensure!(m.empty == (m.support_count == 0), "rule {i}: empty flag");
    }
    ensure!(per[0].flow.inflow.iter().sum::<usize>() == n, "first inflow is not |data|");
    let last = per.last().unwrap();
    ensure!(last.flow.inflow == last.flow.captured, "default rule does not capture everything left");
    let decomposed: f64 = per.iter().map(|m| m.support_fraction * m.rule_fidelity).sum();
    ensure!(close(fidelity, decomposed, 1e-9), "fidelity {fidelity} vs decomposition {decomposed}");
    Ok(())
}

pub fn grid_table(n: usize, seed: u64) -> DataTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = DatasetSchema::new(
        vec![FeatureSpec::continuous("x0"), FeatureSpec::continuous("x1")],
        FeatureSpec::categorical("y", ["a", "b"]),
    )
    .unwrap();
    let rows: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)]).collect();
    let labels = rows.iter().map(|r| usize::from(r[0] + r[1] > 4.0) ^ usize::from(rng.random_bool(0.15))).collect();
    DataTable::new(schema, Instances::from_rows(2, &rows).unwrap(), labels).unwrap()
}

fn teacher() -> FnOracle<fn(&[f64]) -> usize> {
    FnOracle { classes: 2, features: 2, f: |x: &[f64]| usize::from(x[0] * 0.8 + x[1] > 3.5) }
}

/// Per-rule evidence and support against a confusion count over subsets
/// routed by the JSON chain.
pub fn evidence_matches_brute_force() -> Check {
    let list = three_rule_list();
    let json = serde_json::to_value(&list).unwrap();
    let oracle = teacher();
    for seed in 0..5 {
        let data = grid_table(300, seed);
        let report = compute_metrics(&list, &data, &oracle).map_err(|e| e.to_string())?;
        check_report(&list, &report, data.len())?;
        let mut confusion = vec![[[0usize; 2]; 2]; list.len()];
        for (x, &y) in data.instances().rows().zip(data.labels()) {
            let t = (oracle.f)(x);
            confusion[json_fire(&json, x)][t][usize::from(t == y)] += 1;
        }
        for (i, m) in report.per_rule.iter().enumerate() {
            for t in 0..2 {
                let (wrong, correct) = (confusion[i][t][0], confusion[i][t][1]);
                ensure!(m.evidence[t].correct == correct && m.evidence[t].wrong == wrong, "rule {i}, class {t}: {:?} vs ({correct}, {wrong})", m.evidence[t]);
            }
        }
    }
    Ok(())
}

pub fn single_instance() -> Check {
    let data = grid_table(1, 3);
    let list = three_rule_list();
    let report = compute_metrics(&list, &data, &teacher()).map_err(|e| e.to_string())?;
    let supports: Vec<usize> = report.per_rule.iter().map(|m| m.support_count).collect();
    ensure!(supports.iter().filter(|&&s| s == 1).count() == 1 && supports.iter().sum::<usize>() == 1, "supports {supports:?}");
    check_report(&list, &report, 1)
}

/// Five rules over three features; importance is the hand-summed support of
/// the rules using each feature.
pub fn importance_hand_sums() -> Check {
    let schema = DatasetSchema::new(
        vec![FeatureSpec::continuous("p"), FeatureSpec::continuous("q"), FeatureSpec::continuous("r"), FeatureSpec::continuous("unused")],
        FeatureSpec::categorical("y", ["a", "b"]),
    )
    .unwrap();
    let list = RuleList::new(
        vec![
            rule(vec![Clause::interval(0, None, Some(1.0))], vec![0.9, 0.1]),
            rule(vec![Clause::interval(1, Some(2.0), None), Clause::interval(2, None, Some(1.0))], vec![0.2, 0.8]),
            rule(vec![Clause::interval(0, Some(3.0), None)], vec![0.3, 0.7]),
            rule(vec![Clause::interval(2, Some(2.0), None), Clause::interval(0, Some(2.0), None)], vec![0.6, 0.4]),
            rule(vec![], vec![0.5, 0.5]),
        ],
        Priors::default(),
        0.0,
    )
    .unwrap();
    // rows engineered to land 3, 5, 2, 4, 6 in rules 0..5
    let mut rows = Vec::new();
    rows.extend((0..3).map(|_| [0.5, 0.0, 0.0, 0.0]));
    rows.extend((0..5).map(|_| [1.5, 2.5, 0.5, 0.0]));
    rows.extend((0..2).map(|_| [3.5, 0.0, 0.0, 0.0]));
    rows.extend((0..4).map(|_| [2.5, 0.0, 2.5, 0.0]));
    rows.extend((0..6).map(|_| [1.5, 0.0, 0.0, 9.0]));
    let labels = vec![0; rows.len()];
    let data = DataTable::new(schema, Instances::from_rows(4, &rows).unwrap(), labels).unwrap();
    let oracle = FnOracle { classes: 2, features: 4, f: |_: &[f64]| 0 };
    let report = compute_metrics(&list, &data, &oracle).map_err(|e| e.to_string())?;
    let supports: Vec<usize> = report.per_rule.iter().map(|m| m.support_count).collect();
    ensure!(supports == vec![3, 5, 2, 4, 6], "fixture routing {supports:?}");
    let got = feature_importance(&list, &report.per_rule, 4);
    // p: 3 + 2 + 4, q: 5, r: 5 + 4, unused: 0; p and r tie at 9
    let want = vec![(0, 9), (2, 9), (1, 5), (3, 0)];
    ensure!(got == want, "importance {got:?}, hand sums {want:?}");
    Ok(())
}

fn collapsed_set(rows: &[ViewRow]) -> Vec<usize> {
    rows.iter()
        .flat_map(|r| match *r {
            ViewRow::Collapsed { start, end, .. } => (start..=end).collect(),
            ViewRow::Rule { .. } => Vec::new(),
        })
        .collect()
}

/// Raising either threshold never un-collapses a rule; (0, 0) is the
/// identity; kept rules and groups cover every rule in order.
pub fn filter_monotone_and_ordered() -> Check {
    let list = three_rule_list();
    let data = grid_table(200, 8);
    let report = compute_metrics(&list, &data, &teacher()).map_err(|e| e.to_string())?;
    let per = &report.per_rule;
    let identity = filter_rules(per, 0.0, 0.0);
    ensure!(identity.kept == (0..per.len()).collect::<Vec<_>>(), "identity filter collapsed something");
    let grid = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.1];
    for &c in &[0.0, 0.6, 0.7, 0.8] {
        let mut previous: Vec<usize> = Vec::new();
        for &s in &grid {
            let view = filter_rules(per, s, c);
            let collapsed = collapsed_set(&view.rows);
            ensure!(previous.iter().all(|r| collapsed.contains(r)), "support {s}: rule un-collapsed");
            ensure!(!collapsed.contains(&(per.len() - 1)), "default rule collapsed");
            let mut order: Vec<usize> = view
                .rows
                .iter()
                .flat_map(|r| match *r {
                    ViewRow::Rule { index } => vec![index],
                    ViewRow::Collapsed { start, end, .. } => (start..=end).collect(),
                })
                .collect();
            let covered = order.clone();
            order.sort_unstable();
            ensure!(covered == order && covered == (0..per.len()).collect::<Vec<_>>(), "rows do not cover rules in order");
            previous = collapsed;
        }
    }
    let all = filter_rules(per, 1.1, 0.0);
    ensure!(all.kept == vec![per.len() - 1] && all.collapsed_groups().count() == 1, "(1.1, 0) should leave one group and the default");
    Ok(())
}

pub fn identity_data_filter_is_pure() -> Check {
    let list = three_rule_list();
    let data = grid_table(150, 2);
    let oracle = teacher();
    let plain = compute_metrics(&list, &data, &oracle).map_err(|e| e.to_string())?;
    let filtered = filter_data(&list, &DataFilter::default(), &data, &oracle).map_err(|e| e.to_string())?;
    ensure!(filtered.report == plain, "identity filter changed the metrics");
    let wide = DataFilter::default().range(0, Some(-1e9), Some(1e9));
    ensure!(filter_data(&list, &wide, &data, &oracle).map_err(|e| e.to_string())?.report == plain, "all-matching filter changed the metrics");
    let none = DataFilter::default().range(0, Some(100.0), None);
    ensure!(filter_data(&list, &none, &data, &oracle).is_err(), "empty selection not reported");
    Ok(())
}

/// 50 random probes: the fired rule matches the JSON chain and the routing
/// of compute_metrics; a list used as its own teacher always agrees.
pub fn probe_consistency() -> Check {
    let list = three_rule_list();
    let json = serde_json::to_value(&list).unwrap();
    let data = grid_table(50, 12);
    let schema = data.schema.clone();
    let report = compute_metrics(&list, &data, &teacher()).map_err(|e| e.to_string())?;
    let self_teacher = FnOracle { classes: 2, features: 2, f: move |x: &[f64]| three_rule_list().predict(x).0 };
    for (i, x) in data.instances().rows().enumerate() {
        let p = probe(&list, &teacher(), &schema, x).map_err(|e| e.to_string())?;
        ensure!(p.fired_rule == json_fire(&json, x), "probe {i}: fired {} vs chain {}", p.fired_rule, json_fire(&json, x));
        ensure!(p.fired_rule == report.fired[i], "probe {i}: fired rule differs from metrics routing");
        let sat_rule = p.satisfied_clauses.iter().position(|c| !c.is_empty() && c.iter().all(|&s| s)).unwrap_or(list.len() - 1);
        ensure!(sat_rule == p.fired_rule, "probe {i}: clause map disagrees with fired rule");
        let own = probe(&list, &self_teacher, &schema, x).map_err(|e| e.to_string())?;
        ensure!(own.teacher_class == own.rule_class, "probe {i}: self-teacher disagrees");
    }
    Ok(())
}

/// Twelve rules over 1000 rows where rules 2, 3, 5, 6, 7, 9 and 10 each hold
/// under 1.4% of the data: min-support 0.014 collapses exactly those seven,
/// as three runs.
pub fn twelve_rule_collapse() -> Check {
    let supports = [300, 250, 5, 13, 200, 4, 9, 1, 120, 10, 8, 80];
    let n: usize = supports.iter().sum();
    ensure!(n == 1000, "fixture sums to {n}");
    let per: Vec<RuleMetrics> = supports
        .iter()
        .map(|&s| RuleMetrics {
            support_count: s,
            support_fraction: s as f64 / n as f64,
            confidence: 0.9,
            rule_fidelity: 1.0,
            empty: s == 0,
            evidence: vec![Default::default(); 2],
            flow: RuleFlow { inflow: vec![s, 0], captured: vec![s, 0] },
        })
        .collect();
    let view = filter_rules(&per, 0.014, 0.0);
    let mut collapsed = collapsed_set(&view.rows);
    collapsed.sort_unstable();
    ensure!(collapsed == vec![2, 3, 5, 6, 7, 9, 10], "collapsed {collapsed:?}");
    let groups: Vec<(usize, usize)> = view.collapsed_groups().collect();
    ensure!(groups == vec![(2, 3), (5, 7), (9, 10)], "groups {groups:?}");
    ensure!(view.kept == vec![0, 1, 4, 8, 11], "kept {:?}", view.kept);
    Ok(())
}

pub fn fidelity_levels() -> Check {
    use rulematrix_core::matrix::FidelityLevel::{self, High, Low, Medium};
    for (f, want) in [(1.0, High), (0.8000001, High), (0.8, Medium), (0.5, Medium), (0.4999999, Low), (0.0, Low)] {
        ensure!(FidelityLevel::of(f) == want, "fidelity {f} -> {:?}, want {want:?}", FidelityLevel::of(f));
    }
    Ok(())
}

pub fn suite() -> Check {
    super::all(&[
        ("evidence vs confusion", evidence_matches_brute_force),
        ("single instance", single_instance),
        ("feature importance", importance_hand_sums),
        ("filter monotonicity", filter_monotone_and_ordered),
        ("identity data filter", identity_data_filter_is_pure),
        ("probe consistency", probe_consistency),
        ("12-rule collapse", twelve_rule_collapse),
        ("fidelity levels", fidelity_levels),
    ])
}
