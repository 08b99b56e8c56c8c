//! Scenarios shipped inside the binary.

const SCENARIOS: &[(&str, &str)] = &[
    ("poisson_example", include_str!("../scenarios/poisson_example.toml")),
    ("contact_example", include_str!("../scenarios/contact_example.toml")),
];

/// Names of the builtin scenarios.
pub fn names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

/// Source text of a builtin scenario.
pub fn source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
