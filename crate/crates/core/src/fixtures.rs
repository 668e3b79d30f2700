//! Bundled sample programs: LaTeX sources paired with the reference
//! modeling-script label each should emit.  The test-problem fixtures live
//! in [`crate::problems`]; these are the free-form samples.

pub const SAMPLE_COUNT: usize = 7;

const SAMPLES: [(&str, &str); SAMPLE_COUNT] = [
    (
        include_str!("../fixtures/sample1.tex"),
        include_str!("../fixtures/sample1.label.txt"),
    ),
    (
        include_str!("../fixtures/sample2.tex"),
        include_str!("../fixtures/sample2.label.txt"),
    ),
    (
        include_str!("../fixtures/sample3.tex"),
        include_str!("../fixtures/sample3.label.txt"),
    ),
    (
        include_str!("../fixtures/sample4.tex"),
        include_str!("../fixtures/sample4.label.txt"),
    ),
    (
        include_str!("../fixtures/sample5.tex"),
        include_str!("../fixtures/sample5.label.txt"),
    ),
    (
        include_str!("../fixtures/sample6.tex"),
        include_str!("../fixtures/sample6.label.txt"),
    ),
    (
        include_str!("../fixtures/sample7.tex"),
        include_str!("../fixtures/sample7.label.txt"),
    ),
];

/// LaTeX source of sample `i` (1-based).
pub fn sample_latex(i: usize) -> Option<&'static str> {
    SAMPLES.get(i.checked_sub(1)?).map(|s| s.0)
}

/// Reference modeling-script label of sample `i` (1-based).
pub fn sample_label(i: usize) -> Option<&'static str> {
    SAMPLES.get(i.checked_sub(1)?).map(|s| s.1)
}
