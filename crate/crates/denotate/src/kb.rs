//! In-memory triple knowledge base with a fuzzy surface-form index.
//!
//! The KB is immutable after load. It answers three kinds of queries for the
//! rest of the pipeline: surface lookup (name/alias matching within an edit
//! distance budget), popularity (how many triple slots an entity occupies),
//! and pairwise relation counts (how many triples connect two entities in
//! either direction).

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{normalize, normalized_distance};

/// Stable opaque entity identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(s)
    }
}

impl Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// A named KB entity with optional aliases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub canonical_name: String,
    pub aliases: Vec<String>,
}

impl Entity {
    pub fn new(id: impl Into<EntityId>, canonical_name: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            canonical_name: canonical_name.into(),
            aliases: Vec::new(),
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    /// Canonical name plus aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// A directed triple; both endpoints resolve to entities in the owning KB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: String,
    pub object: EntityId,
}

/// Immutable triple store with surface, popularity, and adjacency indexes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    entities: BTreeMap<EntityId, Entity>,
    triples: Vec<Triple>,
    surface_index: BTreeMap<String, BTreeSet<EntityId>>,
    // Undirected view: a triple (s, r, o) appears in adjacency[s] as (r, o)
    // and in adjacency[o] as (r, s); a self-loop contributes two entries to
    // its entity, so adjacency[e].len() == popularity(e).
    adjacency: HashMap<EntityId, Vec<(String, EntityId)>>,
    popularity: HashMap<EntityId, usize>,
}

impl KnowledgeBase {
    /// Builds a KB from in-memory parts. Triple endpoints missing from
    /// `entities` are auto-created with their id as canonical name.
    pub fn build(entities: Vec<Entity>, triples: Vec<Triple>) -> Result<Self> {
        let mut map: BTreeMap<EntityId, Entity> = BTreeMap::new();
        for e in entities {
            if e.canonical_name.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "entity `{}` has an empty canonical name",
                    e.id
                )));
            }
            if map.insert(e.id.clone(), e.clone()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate entity id `{}`", e.id)));
            }
        }
        for t in &triples {
            for end in [&t.subject, &t.object] {
                map.entry(end.clone())
                    .or_insert_with(|| Entity::new(end.clone(), end.as_str()));
            }
        }

        let mut surface_index: BTreeMap<String, BTreeSet<EntityId>> = BTreeMap::new();
        for e in map.values() {
            for form in e.surface_forms() {
                let norm = normalize(form);
                if !norm.is_empty() {
                    surface_index.entry(norm).or_default().insert(e.id.clone());
                }
            }
        }

        let mut adjacency: HashMap<EntityId, Vec<(String, EntityId)>> = HashMap::new();
        let mut popularity: HashMap<EntityId, usize> =
            map.keys().map(|id| (id.clone(), 0)).collect();
        for t in &triples {
            adjacency
                .entry(t.subject.clone())
                .or_default()
                .push((t.relation.clone(), t.object.clone()));
            adjacency
                .entry(t.object.clone())
                .or_default()
                .push((t.relation.clone(), t.subject.clone()));
            *popularity.get_mut(&t.subject).expect("subject exists") += 1;
            *popularity.get_mut(&t.object).expect("object exists") += 1;
        }

        Ok(KnowledgeBase {
            entities: map,
            triples,
            surface_index,
            adjacency,
            popularity,
        })
    }

    /// Loads a KB from a triples file and a lexicon file.
    ///
    /// Triples: one `subject<TAB>relation<TAB>object` per line; lines starting
    /// with `#` and blank lines are skipped.
    /// Lexicon: one `id<TAB>canonical_name<TAB>alias1|alias2|...` per line;
    /// the alias field may be empty; blank lines are skipped.
    pub fn load(triples_path: &Path, lexicon_path: &Path) -> Result<Self> {
        let lexicon_text =
            fs::read_to_string(lexicon_path).map_err(|e| Error::io(lexicon_path, e))?;
        let mut entities = Vec::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (idx, line) in lexicon_text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    lexicon_path,
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let (id, name, alias_field) = (fields[0], fields[1], fields[2]);
            if id.is_empty() {
                return Err(Error::parse(lexicon_path, lineno, "empty entity id"));
            }
            if name.is_empty() {
                return Err(Error::parse(lexicon_path, lineno, "empty canonical name"));
            }
            if !seen.insert(id.to_owned()) {
                return Err(Error::parse(
                    lexicon_path,
                    lineno,
                    format!("duplicate entity id `{id}`"),
                ));
            }
            let aliases: Vec<String> = alias_field
                .split('|')
                .filter(|a| !a.is_empty())
                .map(str::to_owned)
                .collect();
            entities.push(Entity::new(id, name).with_aliases(aliases));
        }

        let triples_text =
            fs::read_to_string(triples_path).map_err(|e| Error::io(triples_path, e))?;
        let mut triples = Vec::new();
        for (idx, line) in triples_text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    triples_path,
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            if fields.iter().any(|f| f.is_empty()) {
                return Err(Error::parse(triples_path, lineno, "empty field in triple"));
            }
            triples.push(Triple {
                subject: EntityId::new(fields[0]),
                relation: fields[1].to_owned(),
                object: EntityId::new(fields[2]),
            });
        }

        Self::build(entities, triples)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    /// Entities in id order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Number of triple slots occupied by `e` (a self-loop counts twice).
    pub fn popularity(&self, e: &EntityId) -> Result<usize> {
        self.popularity
            .get(e)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(e.to_string()))
    }

    /// Like [`popularity`](Self::popularity) but 0 for unknown entities;
    /// used where ids come from the KB itself.
    pub(crate) fn popularity_or_zero(&self, e: &EntityId) -> usize {
        self.popularity.get(e).copied().unwrap_or(0)
    }

    /// Number of triples connecting `a` and `b` in either direction;
    /// parallel edges count separately.
    pub fn relation_count(&self, a: &EntityId, b: &EntityId) -> Result<usize> {
        if !self.entities.contains_key(a) {
            return Err(Error::UnknownEntity(a.to_string()));
        }
        if !self.entities.contains_key(b) {
            return Err(Error::UnknownEntity(b.to_string()));
        }
        if a == b {
            return Err(Error::InvalidArgument(format!(
                "relation_count requires distinct entities, got `{a}` twice"
            )));
        }
        Ok(self.relation_count_unchecked(a, b))
    }

    pub(crate) fn relation_count_unchecked(&self, a: &EntityId, b: &EntityId) -> usize {
        let (scan, other) = match (self.adjacency.get(a), self.adjacency.get(b)) {
            (Some(la), Some(lb)) => {
                if la.len() <= lb.len() {
                    (la, b)
                } else {
                    (lb, a)
                }
            }
            _ => return 0,
        };
        scan.iter().filter(|(_, n)| n == other).count()
    }

    /// Number of triples with `e` as both subject and object.
    pub fn self_loop_count(&self, e: &EntityId) -> usize {
        self.triples
            .iter()
            .filter(|t| &t.subject == e && &t.object == e)
            .count()
    }

    /// All entities with a name or alias within `max_normalized_distance`
    /// of `surface` (normalized Levenshtein), each reported once at its best
    /// distance, sorted by ascending distance, then descending popularity,
    /// then id.
    pub fn lookup_surface(&self, surface: &str, max_normalized_distance: f64) -> Vec<(EntityId, f64)> {
        let needle = normalize(surface);
        if needle.is_empty() {
            return Vec::new();
        }
        let needle_len = needle.chars().count();

        let mut best: BTreeMap<EntityId, f64> = BTreeMap::new();
        for (form, ids) in &self.surface_index {
            let form_len = form.chars().count();
            let longest = needle_len.max(form_len) as f64;
            // length difference is a lower bound on the edit distance
            if (needle_len.abs_diff(form_len)) as f64 / longest > max_normalized_distance {
                continue;
            }
            let dist = normalized_distance(&needle, form);
            if dist <= max_normalized_distance {
                for id in ids {
                    match best.get(id) {
                        Some(&d) if d <= dist => {}
                        _ => {
                            best.insert(id.clone(), dist);
                        }
                    }
                }
            }
        }

        let mut hits: Vec<(EntityId, f64)> = best.into_iter().collect();
        hits.sort_by(|(ia, da), (ib, db)| {
            da.total_cmp(db)
                .then_with(|| {
                    self.popularity_or_zero(ib)
                        .cmp(&self.popularity_or_zero(ia))
                })
                .then_with(|| ia.cmp(ib))
        });
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    pub(crate) fn triple(s: &str, r: &str, o: &str) -> Triple {
        Triple {
            subject: EntityId::new(s),
            relation: r.to_owned(),
            object: EntityId::new(o),
        }
    }

    fn small_kb() -> KnowledgeBase {
        KnowledgeBase::build(
            vec![
                Entity::new("e1", "London"),
                Entity::new("e2", "London Street"),
                Entity::new("e3", "Scooter Libby").with_aliases(["I. Lewis Libby"]),
                Entity::new("e4", "The Apprentice"),
                Entity::new("e5", "The Apprentice"),
            ],
            vec![
                triple("e3", "wrote", "e4"),
                triple("e1", "contains", "e2"),
                triple("e1", "twinned_with", "e2"),
                triple("e5", "loop", "e5"),
            ],
        )
        .unwrap()
    }

    fn write_file(dir: &std::path::Path, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn load_minimal_files() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write_file(
            dir.path(),
            "lexicon.tsv",
            "e1\tLondon\t\ne2\tParis\tCity of Light|Paname\ne3\tBerlin\t\n",
        );
        let tri = write_file(
            dir.path(),
            "triples.tsv",
            "# comment\ne1\tnear\te2\ne2\tnear\te3\n",
        );
        let kb = KnowledgeBase::load(&tri, &lex).unwrap();
        assert_eq!(kb.entity_count(), 3);
        assert_eq!(kb.triple_count(), 2);
        assert_eq!(kb.entity("e2").unwrap().aliases.len(), 2);
    }

    #[test]
    fn load_empty_triples_gives_zero_popularity() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write_file(dir.path(), "lexicon.tsv", "e1\tLondon\t\ne2\tParis\t\n");
        let tri = write_file(dir.path(), "triples.tsv", "");
        let kb = KnowledgeBase::load(&tri, &lex).unwrap();
        for e in kb.entities() {
            assert_eq!(kb.popularity(&e.id).unwrap(), 0);
        }
    }

    #[test]
    fn load_auto_creates_unknown_triple_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write_file(dir.path(), "lexicon.tsv", "e1\tLondon\t\n");
        let tri = write_file(
            dir.path(),
            "triples.tsv",
            "e1\tnear\tm.x\nm.x\tnear\te1\ne1\tnear\te1\n# trailing comment\n",
        );
        let kb = KnowledgeBase::load(&tri, &lex).unwrap();
        let auto = kb.entity("m.x").unwrap();
        assert_eq!(auto.canonical_name, "m.x");
        assert!(auto.aliases.is_empty());
        // auto-created entities are linkable by their id string
        let hits = kb.lookup_surface("m.x", 0.0);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0.as_str(), "m.x");
    }

    #[test]
    fn load_rejects_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write_file(dir.path(), "lexicon.tsv", "e1\tLondon\t\n");
        let bad = write_file(dir.path(), "triples.tsv", "e1\tnear\n");
        let err = KnowledgeBase::load(&bad, &lex).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("triples.tsv"), "{msg}");
        assert!(msg.contains(":1:"), "{msg}");
        assert!(msg.contains("fields"), "{msg}");
    }

    #[test]
    fn load_rejects_duplicate_lexicon_id() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write_file(dir.path(), "lexicon.tsv", "e1\tLondon\t\ne1\tLondres\t\n");
        let tri = write_file(dir.path(), "triples.tsv", "");
        let err = KnowledgeBase::load(&tri, &lex).unwrap_err();
        assert!(err.to_string().contains("duplicate entity id"), "{err}");
    }

    #[test]
    fn load_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let lex = write_file(
            dir.path(),
            "lexicon.tsv",
            "e1\tLondon\t\ne2\tParis\tPaname\ne3\tBerlin\t\n",
        );
        let tri = write_file(dir.path(), "triples.tsv", "e1\tnear\te2\ne3\tnear\te1\n");
        let a = KnowledgeBase::load(&tri, &lex).unwrap();
        let b = KnowledgeBase::load(&tri, &lex).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn popularity_counts_slots() {
        let kb = small_kb();
        // e3 subject of 1 triple
        assert_eq!(kb.popularity(&EntityId::new("e3")).unwrap(), 1);
        // e1 subject of 2, e2 object of 2
        assert_eq!(kb.popularity(&EntityId::new("e1")).unwrap(), 2);
        assert_eq!(kb.popularity(&EntityId::new("e2")).unwrap(), 2);
        // self-loop contributes 2
        assert_eq!(kb.popularity(&EntityId::new("e5")).unwrap(), 2);
        assert!(kb.popularity(&EntityId::new("nope")).is_err());
    }

    #[test]
    fn popularity_zero_for_isolated_entity() {
        let kb = KnowledgeBase::build(vec![Entity::new("a", "A")], vec![]).unwrap();
        assert_eq!(kb.popularity(&EntityId::new("a")).unwrap(), 0);
    }

    #[test]
    fn popularity_subject_twice_object_once() {
        let kb = KnowledgeBase::build(
            vec![],
            vec![triple("x", "r", "a"), triple("x", "r", "b"), triple("c", "r", "x")],
        )
        .unwrap();
        assert_eq!(kb.popularity(&EntityId::new("x")).unwrap(), 3);
    }

    #[test]
    fn relation_count_both_directions_and_parallel_edges() {
        let kb = KnowledgeBase::build(
            vec![],
            vec![triple("a", "r1", "b"), triple("b", "r2", "a"), triple("a", "r1", "c")],
        )
        .unwrap();
        let (a, b, c) = (EntityId::new("a"), EntityId::new("b"), EntityId::new("c"));
        assert_eq!(kb.relation_count(&a, &b).unwrap(), 2);
        assert_eq!(kb.relation_count(&b, &a).unwrap(), 2);
        assert_eq!(kb.relation_count(&a, &c).unwrap(), 1);
        assert_eq!(kb.relation_count(&b, &c).unwrap(), 0);
        assert!(kb.relation_count(&a, &a).is_err());
        assert!(kb.relation_count(&a, &EntityId::new("zzz")).is_err());
    }

    #[test]
    fn relation_count_distinguishes_same_name_entities() {
        // Two "The Apprentice" entities; only e4 is connected to Scooter Libby.
        let kb = small_kb();
        let libby = EntityId::new("e3");
        assert_eq!(kb.relation_count(&libby, &EntityId::new("e4")).unwrap(), 1);
        assert_eq!(kb.relation_count(&libby, &EntityId::new("e5")).unwrap(), 0);
    }

    #[test]
    fn lookup_surface_exact_and_fuzzy() {
        let kb = small_kb();
        let exact = kb.lookup_surface("London", 0.2);
        assert_eq!(exact[0].0.as_str(), "e1");
        assert_eq!(exact[0].1, 0.0);

        let fuzzy = kb.lookup_surface("Scoter Liby", 0.2);
        assert_eq!(fuzzy.len(), 1);
        assert_eq!(fuzzy[0].0.as_str(), "e3");
        assert!((fuzzy[0].1 - 2.0 / 13.0).abs() < 1e-12);

        assert!(kb.lookup_surface("xyzzyx", 0.2).is_empty());
    }

    #[test]
    fn lookup_surface_via_alias() {
        let kb = small_kb();
        let hits = kb.lookup_surface("I. Lewis Libby", 0.0);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0.as_str(), "e3");
    }

    #[test]
    fn lookup_surface_orders_ties_by_popularity() {
        // Same name, different popularity: e5 has a self-loop (popularity 2).
        let kb = small_kb();
        let hits = kb.lookup_surface("The Apprentice", 0.0);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].0.as_str(), "e5");
        assert_eq!(hits[1].0.as_str(), "e4");
    }

    proptest! {
        // popularity(e) = sum over other entities of relation_count(e, b)
        //               + 2 * self-loops on e
        #[test]
        fn popularity_decomposes_into_relation_counts(
            edges in proptest::collection::vec((0usize..6, 0usize..6), 0..25)
        ) {
            let entities: Vec<Entity> =
                (0..6).map(|i| Entity::new(format!("n{i}"), format!("name {i}"))).collect();
            let triples: Vec<Triple> = edges
                .iter()
                .map(|(s, o)| triple(&format!("n{s}"), "r", &format!("n{o}")))
                .collect();
            let kb = KnowledgeBase::build(entities, triples).unwrap();
            for e in kb.entities() {
                let mut sum = 0;
                for other in kb.entities() {
                    if other.id != e.id {
                        sum += kb.relation_count(&e.id, &other.id).unwrap();
                    }
                }
                sum += 2 * kb.self_loop_count(&e.id);
                prop_assert_eq!(kb.popularity(&e.id).unwrap(), sum);
            }
        }

        #[test]
        fn relation_count_is_symmetric(
            edges in proptest::collection::vec((0usize..5, 0usize..5), 0..20)
        ) {
            let triples: Vec<Triple> = edges
                .iter()
                .map(|(s, o)| triple(&format!("n{s}"), "r", &format!("n{o}")))
                .collect();
            let kb = KnowledgeBase::build(
                (0..5).map(|i| Entity::new(format!("n{i}"), format!("name {i}"))).collect(),
                triples,
            )
            .unwrap();
            for a in kb.entities() {
                for b in kb.entities() {
                    if a.id != b.id {
                        prop_assert_eq!(
                            kb.relation_count(&a.id, &b.id).unwrap(),
                            kb.relation_count(&b.id, &a.id).unwrap()
                        );
                    }
                }
            }
        }

        // every alias round-trips through the surface index at distance 0
        #[test]
        fn alias_roundtrip_through_surface_index(
            names in proptest::collection::vec("[a-z]{2,8}( [a-z]{2,8})?", 1..6)
        ) {
            let entities: Vec<Entity> = names
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    Entity::new(format!("n{i}"), n.clone()).with_aliases([format!("{n} alias")])
                })
                .collect();
            let kb = KnowledgeBase::build(entities, vec![]).unwrap();
            for e in kb.entities() {
                for form in e.surface_forms() {
                    let hits = kb.lookup_surface(form, 0.0);
                    prop_assert!(hits.iter().any(|(id, d)| id == &e.id && *d == 0.0));
                }
            }
        }
    }
}
