//! Random edit scripts for the effect-scope law: group and alias edits are
//! local to one document; instance edits reach every document and always
//! agree with a brute-force matcher.

use std::collections::BTreeMap;

use ner_workbench::export::export_document;
use ner_workbench_core::{AliasId, GroupId, InstanceId, Project};
use proptest::prelude::*;

use super::oracle_leftmost_longest;

const POOL: &[(&str, &str)] = &[
    ("行者", "PERSON"),
    ("行", "PERSON"),
    ("者", "LOC"),
    ("悟空", "PERSON"),
    ("芭蕉", "LOC"),
    ("芭蕉扇", "LOC"),
    ("扇", "PERSON"),
    ("空", "LOC"),
];
const ALPHABET: &[char] = &['行', '者', '悟', '空', '芭', '蕉', '扇', '。'];

#[derive(Debug, Clone)]
pub enum Edit {
    CreateGroup(u8, Vec<u8>),
    SetGroup(u8, Vec<u8>),
    DeleteGroup(u8),
    CreateAlias(u8, Vec<u8>, bool),
    SetAlias(u8, Vec<u8>),
    DeleteAlias(u8),
}

fn members() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..10, 0..5)
}

fn edit() -> impl Strategy<Value = Edit> {
    prop_oneof![
        (0u8..4, members()).prop_map(|(n, m)| Edit::CreateGroup(n, m)),
        (0u8..4, members()).prop_map(|(g, m)| Edit::SetGroup(g, m)),
        (0u8..4).prop_map(Edit::DeleteGroup),
        (0u8..4, members(), any::<bool>()).prop_map(|(n, m, c)| Edit::CreateAlias(n, m, c)),
        (0u8..4, members()).prop_map(|(a, m)| Edit::SetAlias(a, m)),
        (0u8..4).prop_map(Edit::DeleteAlias),
    ]
}

fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::sample::select(ALPHABET), 0..60).prop_map(|cs| cs.into_iter().collect())
}

#[derive(Debug, Clone)]
pub struct CollectionCase {
    a: String,
    b: String,
    registered: usize,
    on_b: Vec<Edit>,
    on_a: Vec<Edit>,
}

pub fn collection_case() -> impl Strategy<Value = CollectionCase> {
    (
        text(),
        text(),
        1usize..=POOL.len(),
        proptest::collection::vec(edit(), 0..6),
        proptest::collection::vec(edit(), 1..25),
    )
        .prop_map(|(a, b, registered, on_b, on_a)| CollectionCase { a, b, registered, on_b, on_a })
}

#[derive(Debug, Clone)]
pub struct InstanceCase {
    a: String,
    b: String,
    steps: Vec<(usize, bool)>,
}

pub fn instance_case() -> impl Strategy<Value = InstanceCase> {
    (text(), text(), proptest::collection::vec((0usize..POOL.len(), any::<bool>()), 1..20))
        .prop_map(|(a, b, steps)| InstanceCase { a, b, steps })
}

fn ids(raw: &[u8]) -> Vec<InstanceId> {
    raw.iter().map(|&i| InstanceId(i as u32)).collect()
}

fn apply(p: &mut Project, doc: &str, edit: &Edit) {
    // Failures are expected for random input and leave the project unchanged.
    let _ = match edit {
        Edit::CreateGroup(n, m) => p.create_group(doc, &format!("g{n}"), &ids(m)).map(|_| ()),
        Edit::SetGroup(g, m) => p.set_group_members(doc, GroupId(*g as u32), &ids(m)),
        Edit::DeleteGroup(g) => p.delete_group(doc, GroupId(*g as u32)),
        Edit::CreateAlias(n, m, explicit) => {
            let class = explicit.then_some("PERSON");
            p.create_alias(doc, &format!("a{n}"), &ids(m), class).map(|_| ())
        }
        Edit::SetAlias(a, m) => p.set_alias_members(doc, AliasId(*a as u32), &ids(m)),
        Edit::DeleteAlias(a) => p.delete_alias(doc, AliasId(*a as u32)),
    };
}

fn project(a: &str, b: &str, registered: usize) -> Project {
    let mut p = Project::new("scope", "scope");
    p.add_documents([("a.txt", a), ("b.txt", b)], None).unwrap();
    for (surface, class) in &POOL[..registered] {
        p.register_instance(surface, class).unwrap();
    }
    p
}

/// Frequency column of Entity.csv keyed by instance id.
fn exported_frequencies(p: &Project, doc: &str) -> BTreeMap<String, u64> {
    let bundle = export_document(p, doc).unwrap();
    let mut reader = csv::Reader::from_reader(bundle.entity_csv.as_slice());
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[3].parse().unwrap())
        })
        .collect()
}

fn oracle_frequencies(p: &Project, doc: &str) -> BTreeMap<String, u64> {
    let instances: Vec<_> = p.instances().collect();
    let surfaces: Vec<&str> = instances.iter().map(|i| i.surface.as_str()).collect();
    let mut counts: BTreeMap<String, u64> = instances.iter().map(|i| (i.id.to_string(), 0)).collect();
    for (_, _, idx) in oracle_leftmost_longest(p.document(doc).unwrap().text(), &surfaces) {
        *counts.get_mut(&instances[idx].id.to_string()).unwrap() += 1;
    }
    counts
}

/// Edits on a.txt must not change a single byte of b.txt's bundle.
pub fn check_collection_case(case: &CollectionCase) -> Result<(), TestCaseError> {
    let mut p = project(&case.a, &case.b, case.registered);
    for e in &case.on_b {
        apply(&mut p, "b.txt", e);
    }
    let before = export_document(&p, "b.txt").unwrap();
    let before_zip = before.to_zip();
    for e in &case.on_a {
        apply(&mut p, "a.txt", e);
        prop_assert_eq!(&export_document(&p, "b.txt").unwrap(), &before);
    }
    prop_assert_eq!(export_document(&p, "b.txt").unwrap().to_zip(), before_zip);
    Ok(())
}

/// After every register or delete, both documents' exported frequencies
/// equal the oracle's counts.
pub fn check_instance_case(case: &InstanceCase) -> Result<(), TestCaseError> {
    let mut p = project(&case.a, &case.b, 0);
    for &(pick, register) in &case.steps {
        let (surface, class) = POOL[pick];
        if register {
            p.register_instance(surface, class).unwrap();
        } else if let Some(id) = p.instance_by_surface(surface).map(|i| i.id) {
            p.delete_instance(id).unwrap();
        }
        for doc in ["a.txt", "b.txt"] {
            prop_assert_eq!(exported_frequencies(&p, doc), oracle_frequencies(&p, doc));
        }
    }
    Ok(())
}
