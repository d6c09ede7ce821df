mod common;

use common::{fixture, fixture_text, seeded_violations, FIXTURES};
use gridcase::case::validate_case;
use gridcase::{parse_case, serialize_case};

#[test]
fn fixtures_are_clean() {
    for name in FIXTURES {
        let diagnostics = validate_case(&fixture(name));
        assert!(diagnostics.is_empty(), "{name}: {diagnostics:?}");
    }
}

#[test]
fn fixtures_round_trip() {
    for name in FIXTURES {
        let case = parse_case(&fixture_text(name)).unwrap();
        let text = serialize_case(&case);
        assert_eq!(parse_case(&text).unwrap(), case, "{name}");
        assert_eq!(serialize_case(&parse_case(&text).unwrap()), text, "{name}");
    }
}

#[test]
fn every_seeded_violation_is_reported() {
    let seeded = seeded_violations();
    assert_eq!(seeded.len(), 30);
    for (rule, case) in seeded {
        let diagnostics = validate_case(&case);
        assert!(diagnostics.iter().any(|d| d.rule == rule), "{rule:?} not reported: {diagnostics:?}");
    }
}
