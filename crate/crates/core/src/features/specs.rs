//! Named feature lists for the phase, distance and path networks.

use super::StatKind::{self, Energy, Mode, Mom3, Skn, Std, Var};
use super::{Band, Channel, FeatureSpec};
use crate::error::Result;
use crate::netmodel::FaultType;
use crate::registry::Registry;

/// Bumped whenever a list below changes order or membership.
pub const SPEC_VERSION: u32 = 1;

const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const V0: usize = 3;
const V1: usize = 4;
const V2: usize = 5;

fn t(s: usize) -> Channel {
    Channel::new(s, Band::Time)
}
fn cd(s: usize) -> Channel {
    Channel::new(s, Band::Detail)
}
fn ca(s: usize) -> Channel {
    Channel::new(s, Band::Approximation)
}

/// Appends `stat` of `band(sig)` for every signal in order.
fn push(v: &mut Vec<(StatKind, Channel)>, stat: StatKind, band: fn(usize) -> Channel, sigs: &[usize]) {
    v.extend(sigs.iter().map(|&s| (stat, band(s))));
}

fn phase_items() -> Vec<(StatKind, Channel)> {
    let mut v = Vec::new();
    push(&mut v, Std, t, &[A, B, C]);
    push(&mut v, Std, cd, &[A, B, C]);
    push(&mut v, Std, ca, &[A, B, C]);
    push(&mut v, Energy, cd, &[A, B, C]);
    push(&mut v, Energy, ca, &[A, B, C]);
    v
}

fn distance_single(i: usize) -> Vec<(StatKind, Channel)> {
    vec![
        (Var, t(i)),
        (Var, cd(i)),
        (Skn, t(i)),
        (Skn, cd(i)),
        (Skn, ca(i)),
        (Mom3, t(i)),
        (Mom3, cd(i)),
        (Mom3, ca(i)),
        (Energy, cd(i)),
    ]
}

fn distance_pair(i: usize, j: usize) -> Vec<(StatKind, Channel)> {
    let p = [i, j];
    let mut v = Vec::new();
    push(&mut v, Var, cd, &p);
    push(&mut v, Skn, t, &p);
    push(&mut v, Skn, ca, &p);
    push(&mut v, Mom3, t, &p);
    push(&mut v, Mom3, cd, &p);
    push(&mut v, Mom3, ca, &p);
    push(&mut v, Mode, cd, &p);
    push(&mut v, Energy, cd, &p);
    v
}

fn distance_three() -> Vec<(StatKind, Channel)> {
    let abc = [A, B, C];
    let mut v = Vec::new();
    push(&mut v, Var, cd, &[A, B, C, V1, V2]);
    push(&mut v, Var, ca, &[V1, V2]);
    push(&mut v, Skn, t, &[A, B, C, V1]);
    push(&mut v, Skn, ca, &[A, B, C, V1, V2]);
    push(&mut v, Mom3, t, &[A, B, C, V1]);
    push(&mut v, Mom3, cd, &abc);
    push(&mut v, Mom3, ca, &abc);
    push(&mut v, Mom3, cd, &[V1, V2]);
    push(&mut v, Mode, cd, &abc);
    push(&mut v, Mode, ca, &[A, B, C, V2]);
    push(&mut v, Energy, cd, &abc);
    push(&mut v, Energy, ca, &abc);
    push(&mut v, Energy, cd, &[V1, V2]);
    push(&mut v, Energy, ca, &[V1, V2]);
    v
}

fn path_single(i: usize) -> Vec<(StatKind, Channel)> {
    vec![
        (Var, cd(i)),
        (Var, ca(i)),
        (Skn, t(i)),
        (Skn, cd(i)),
        (Mom3, t(i)),
        (Mom3, cd(i)),
        (Mode, t(i)),
        (Mode, ca(i)),
    ]
}

fn path_pair(i: usize, j: usize) -> Vec<(StatKind, Channel)> {
    let p = [i, j];
    let mut v = Vec::new();
    push(&mut v, Var, t, &p);
    push(&mut v, Var, cd, &p);
    push(&mut v, Var, ca, &p);
    push(&mut v, Skn, t, &p);
    push(&mut v, Skn, cd, &p);
    push(&mut v, Mom3, t, &p);
    push(&mut v, Mom3, cd, &p);
    push(&mut v, Mom3, ca, &p);
    push(&mut v, Mode, cd, &p);
    push(&mut v, Energy, cd, &p);
    push(&mut v, Energy, ca, &p);
    v
}

fn path_three() -> Vec<(StatKind, Channel)> {
    let mut v = vec![(Var, cd(V2))];
    push(&mut v, Skn, t, &[A, B, C, V0, V1]);
    push(&mut v, Skn, cd, &[A, B, C, V1, V2]);
    push(&mut v, Mom3, t, &[A, B, C, V0, V1]);
    push(&mut v, Mom3, cd, &[A, B, C, V1, V2]);
    push(&mut v, Mode, cd, &[A, B, C, V2]);
    v.push((Energy, cd(V2)));
    v
}

fn by_type(t: FaultType, single: fn(usize) -> Vec<(StatKind, Channel)>, pair: fn(usize, usize) -> Vec<(StatKind, Channel)>, three: fn() -> Vec<(StatKind, Channel)>) -> Vec<(StatKind, Channel)> {
    match t.phases().phases()[..] {
        [i] => single(i),
        [i, j] => pair(i, j),
        _ => three(),
    }
}

/// Letter tag used in spec names: `a`, `ab`, `ABC`.
fn type_tag(t: FaultType) -> String {
    if t == FaultType::Abcg {
        "ABC".into()
    } else {
        t.phases().to_string()
    }
}

/// Input list of the distance network for one fault type.
pub fn distance_spec(t: FaultType) -> FeatureSpec {
    FeatureSpec::new(format!("Ofd-{}", type_tag(t)), by_type(t, distance_single, distance_pair, distance_three))
        .expect("built-in spec is valid")
}

/// Input list of the path network for one fault type and route group (1 or 2).
pub fn path_spec(t: FaultType, group: u8) -> FeatureSpec {
    FeatureSpec::new(
        format!("Ofp-{}-H{group}", type_tag(t)),
        by_type(t, path_single, path_pair, path_three),
    )
    .expect("built-in spec is valid")
}

fn named(name: &str, items: Vec<(StatKind, Channel)>) -> Box<FeatureSpec> {
    Box::new(FeatureSpec::new(name, items).expect("built-in spec is valid"))
}

macro_rules! typed {
    ($f:ident, $t:ident $(, $g:expr)?) => {
        || Box::new($f(FaultType::$t $(, $g)?))
    };
}

pub static FEATURE_SPECS: Registry<FeatureSpec> = Registry::new(
    "feature spec",
    &[
        ("Tfp", || named("Tfp", phase_items())),
        ("Ofd-a", typed!(distance_spec, Ag)),
        ("Ofd-b", typed!(distance_spec, Bg)),
        ("Ofd-c", typed!(distance_spec, Cg)),
        ("Ofd-ab", typed!(distance_spec, Abg)),
        ("Ofd-ac", typed!(distance_spec, Acg)),
        ("Ofd-bc", typed!(distance_spec, Bcg)),
        ("Ofd-ABC", typed!(distance_spec, Abcg)),
        ("Ofp-a-H1", typed!(path_spec, Ag, 1)),
        ("Ofp-b-H1", typed!(path_spec, Bg, 1)),
        ("Ofp-c-H1", typed!(path_spec, Cg, 1)),
        ("Ofp-ab-H1", typed!(path_spec, Abg, 1)),
        ("Ofp-ac-H1", typed!(path_spec, Acg, 1)),
        ("Ofp-bc-H1", typed!(path_spec, Bcg, 1)),
        ("Ofp-ABC-H1", typed!(path_spec, Abcg, 1)),
        ("Ofp-a-H2", typed!(path_spec, Ag, 2)),
        ("Ofp-b-H2", typed!(path_spec, Bg, 2)),
        ("Ofp-c-H2", typed!(path_spec, Cg, 2)),
        ("Ofp-ab-H2", typed!(path_spec, Abg, 2)),
        ("Ofp-ac-H2", typed!(path_spec, Acg, 2)),
        ("Ofp-bc-H2", typed!(path_spec, Bcg, 2)),
        ("Ofp-ABC-H2", typed!(path_spec, Abcg, 2)),
        // single-network baseline: one distance net and one path net for all types
        ("Sfd", || named("Sfd", distance_three())),
        ("Sfp", || named("Sfp", path_three())),
    ],
);

/// Looks up a spec by exact registered name.
pub fn lookup(name: &str) -> Result<FeatureSpec> {
    FEATURE_SPECS.get(name).map(|b| *b)
}
