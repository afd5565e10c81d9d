//! Entity linking: n-gram candidate generation, overlap resolution, and
//! disambiguation against the knowledge base.
//!
//! Disambiguation picks one entity per candidate. The relation-maximization
//! method chooses the joint assignment with the most KB triples among the
//! chosen entities (and given context entities); the popularity baseline
//! ranks each candidate's matches by popularity independently.

use crate::kb::{EntityId, KnowledgeBase};
use crate::text::Utterance;

/// Half-open token index range within an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// A text span matched to one or more KB entities.
///
/// `matches` is sorted by ascending distance, ties by descending popularity,
/// then id (the order [`KnowledgeBase::lookup_surface`] returns).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityCandidate {
    pub span: Span,
    pub surface: String,
    pub matches: Vec<(EntityId, f64)>,
}

/// An utterance with one chosen entity per non-overlapping span.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedUtterance {
    pub utterance: Utterance,
    pub links: Vec<(Span, EntityId)>,
}

impl LinkedUtterance {
    pub fn unlinked(utterance: Utterance) -> Self {
        LinkedUtterance {
            utterance,
            links: Vec::new(),
        }
    }

    /// Linked entity ids in span order (duplicates preserved).
    pub fn entity_ids(&self) -> Vec<EntityId> {
        self.links.iter().map(|(_, e)| e.clone()).collect()
    }

    pub fn contains_entity(&self, id: &EntityId) -> bool {
        self.links.iter().any(|(_, e)| e == id)
    }
}

/// Linker settings.
#[derive(Debug, Clone)]
pub struct LinkerConfig {
    /// Longest n-gram considered an entity candidate.
    pub max_ngram_order: usize,
    /// Normalized edit-distance budget for surface matching.
    pub max_normalized_distance: f64,
    /// Number of answer-side assignments to return (n-best).
    pub beam_width: usize,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            max_ngram_order: 4,
            max_normalized_distance: 0.2,
            beam_width: 5,
        }
    }
}

/// Disambiguation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    RelationMax,
    Popularity,
}

/// One complete entity assignment with its ranking keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAssignment {
    /// Chosen entity per candidate, in candidate order.
    pub entities: Vec<EntityId>,
    /// Relation-maximization objective (0 for popularity assignments).
    pub relation_score: usize,
    pub popularity_sum: usize,
    pub distance_sum: f64,
}

impl ScoredAssignment {
    fn empty() -> Self {
        ScoredAssignment {
            entities: Vec::new(),
            relation_score: 0,
            popularity_sum: 0,
            distance_sum: 0.0,
        }
    }
}

// Assignment spaces up to this size are searched exhaustively; larger ones
// fall back to a beam over candidates in left-to-right order.
const EXHAUSTIVE_LIMIT: usize = 100_000;
const FALLBACK_BEAM_WIDTH: usize = 100;

/// Finds every n-gram (order 1..=max) whose surface matches at least one KB
/// entity. Candidates may overlap.
pub fn generate_candidates(
    kb: &KnowledgeBase,
    utt: &Utterance,
    cfg: &LinkerConfig,
) -> Vec<EntityCandidate> {
    let tokens = utt.tokens();
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for order in 1..=cfg.max_ngram_order.min(tokens.len() - start) {
            let end = start + order;
            let surface = utt.slice(start, end);
            let matches = kb.lookup_surface(&surface, cfg.max_normalized_distance);
            if !matches.is_empty() {
                out.push(EntityCandidate {
                    span: Span::new(start, end),
                    surface,
                    matches,
                });
            }
        }
    }
    out.sort_by_key(|c| (c.span.start, c.span.end));
    out
}

/// Discards overlapping candidates in favor of longer ones; equal-length
/// conflicts are settled greedily left to right. The result is pairwise
/// non-overlapping, ordered by span start.
pub fn resolve_overlaps(candidates: &[EntityCandidate]) -> Vec<EntityCandidate> {
    let mut order: Vec<&EntityCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        b.span
            .len()
            .cmp(&a.span.len())
            .then_with(|| a.span.start.cmp(&b.span.start))
            .then_with(|| a.span.end.cmp(&b.span.end))
    });
    let mut kept: Vec<EntityCandidate> = Vec::new();
    for cand in order {
        if !kept.iter().any(|k| k.span.overlaps(&cand.span)) {
            kept.push(cand.clone());
        }
    }
    kept.sort_by_key(|c| (c.span.start, c.span.end));
    kept
}

// Pairwise objective contribution. An entity paired with itself (the same
// entity chosen for two candidates, or appearing in the context) scores 0.
fn pair_score(kb: &KnowledgeBase, a: &EntityId, b: &EntityId) -> usize {
    if a == b {
        0
    } else {
        kb.relation_count_unchecked(a, b)
    }
}

fn context_score(kb: &KnowledgeBase, e: &EntityId, context: &[EntityId]) -> usize {
    context.iter().map(|c| pair_score(kb, e, c)).sum()
}

// Total order used to rank assignments:
// objective desc, popularity desc, distance asc, entity ids lexicographic.
fn rank_cmp(a: &ScoredAssignment, b: &ScoredAssignment) -> std::cmp::Ordering {
    b.relation_score
        .cmp(&a.relation_score)
        .then_with(|| b.popularity_sum.cmp(&a.popularity_sum))
        .then_with(|| a.distance_sum.total_cmp(&b.distance_sum))
        .then_with(|| a.entities.cmp(&b.entities))
}

/// Chooses entities for non-overlapping candidates so that the number of KB
/// relations among them (and towards `context`) is maximal. Returns up to
/// `beam_width` complete assignments, best first.
///
/// The search is exhaustive when the assignment space is small and a
/// left-to-right beam otherwise.
pub fn disambiguate_relation_max(
    kb: &KnowledgeBase,
    candidates: &[EntityCandidate],
    context: &[EntityId],
    beam_width: usize,
) -> Vec<ScoredAssignment> {
    if candidates.is_empty() {
        return vec![ScoredAssignment::empty()];
    }
    let space: usize = candidates
        .iter()
        .map(|c| c.matches.len().max(1))
        .fold(1usize, |acc, n| acc.saturating_mul(n));

    let width = if space <= EXHAUSTIVE_LIMIT {
        usize::MAX
    } else {
        FALLBACK_BEAM_WIDTH.max(beam_width)
    };

    let mut partials = vec![ScoredAssignment::empty()];
    for cand in candidates {
        let mut next = Vec::with_capacity(partials.len() * cand.matches.len());
        for partial in &partials {
            for (entity, dist) in &cand.matches {
                let mut gained = context_score(kb, entity, context);
                for chosen in &partial.entities {
                    gained += pair_score(kb, entity, chosen);
                }
                let mut grown = partial.clone();
                grown.entities.push(entity.clone());
                grown.relation_score += gained;
                grown.popularity_sum += kb.popularity_or_zero(entity);
                grown.distance_sum += dist;
                next.push(grown);
            }
        }
        next.sort_by(rank_cmp);
        if next.len() > width {
            next.truncate(width);
        }
        partials = next;
    }
    partials.truncate(beam_width);
    partials
}

/// Popularity-maximization baseline. Each candidate's matches are ranked by
/// descending popularity (ties by ascending distance, then id); the k-th
/// returned assignment gives every candidate its rank-k match (clamped to
/// its match count), so the first n assignments jointly cover each
/// candidate's top-n popular matches. Context is ignored.
pub fn disambiguate_popularity(
    kb: &KnowledgeBase,
    candidates: &[EntityCandidate],
    beam_width: usize,
) -> Vec<ScoredAssignment> {
    if candidates.is_empty() {
        return vec![ScoredAssignment::empty()];
    }
    let ranked: Vec<Vec<(EntityId, f64)>> = candidates
        .iter()
        .map(|c| {
            let mut m = c.matches.clone();
            m.sort_by(|(ia, da), (ib, db)| {
                kb.popularity_or_zero(ib)
                    .cmp(&kb.popularity_or_zero(ia))
                    .then_with(|| da.total_cmp(db))
                    .then_with(|| ia.cmp(ib))
            });
            m
        })
        .collect();

    let deepest = ranked.iter().map(Vec::len).max().unwrap_or(0);
    let mut out: Vec<ScoredAssignment> = Vec::new();
    for k in 0..deepest.min(beam_width) {
        let mut asg = ScoredAssignment::empty();
        for options in &ranked {
            let (entity, dist) = &options[k.min(options.len() - 1)];
            asg.entities.push(entity.clone());
            asg.popularity_sum += kb.popularity_or_zero(entity);
            asg.distance_sum += dist;
        }
        if out.last().map(|prev| prev.entities == asg.entities) != Some(true) {
            out.push(asg);
        }
    }
    out
}

fn to_linked(utt: &Utterance, candidates: &[EntityCandidate], asg: &ScoredAssignment) -> LinkedUtterance {
    LinkedUtterance {
        utterance: utt.clone(),
        links: candidates
            .iter()
            .zip(asg.entities.iter())
            .map(|(c, e)| (c.span, e.clone()))
            .collect(),
    }
}

/// Links a question/answer-hint pair: the question first with empty context,
/// then the answer using the question's linked entities as context
/// (relation-max only; popularity ignores context). Returns the linked
/// question and the answer's ranked hypotheses.
pub fn link_pair(
    kb: &KnowledgeBase,
    question: &Utterance,
    answer: &Utterance,
    cfg: &LinkerConfig,
    method: Method,
) -> (LinkedUtterance, Vec<LinkedUtterance>) {
    let q_cands = resolve_overlaps(&generate_candidates(kb, question, cfg));
    let q_best = match method {
        Method::RelationMax => disambiguate_relation_max(kb, &q_cands, &[], 1),
        Method::Popularity => disambiguate_popularity(kb, &q_cands, 1),
    };
    let linked_q = to_linked(question, &q_cands, &q_best[0]);

    let a_cands = resolve_overlaps(&generate_candidates(kb, answer, cfg));
    let context = linked_q.entity_ids();
    let a_ranked = match method {
        Method::RelationMax => disambiguate_relation_max(kb, &a_cands, &context, cfg.beam_width),
        Method::Popularity => disambiguate_popularity(kb, &a_cands, cfg.beam_width),
    };
    let nbest = a_ranked
        .iter()
        .map(|asg| to_linked(answer, &a_cands, asg))
        .collect();
    (linked_q, nbest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Entity, Triple};
    use proptest::prelude::*;

    fn triple(s: &str, r: &str, o: &str) -> Triple {
        Triple {
            subject: EntityId::new(s),
            relation: r.to_owned(),
            object: EntityId::new(o),
        }
    }

    fn apprentice_kb() -> KnowledgeBase {
        KnowledgeBase::build(
            vec![
                Entity::new("novel", "The Apprentice"),
                Entity::new("tv", "The Apprentice"),
                Entity::new("album", "The Apprentice"),
                Entity::new("libby", "Scooter Libby"),
                Entity::new("trump", "Donald Trump"),
                Entity::new("nbc", "NBC"),
            ],
            vec![
                triple("libby", "wrote", "novel"),
                triple("tv", "network", "nbc"),
                triple("tv", "host", "trump"),
                triple("tv", "host", "trump"),
            ],
        )
        .unwrap()
    }

    fn cand(start: usize, end: usize, matches: &[(&str, f64)]) -> EntityCandidate {
        EntityCandidate {
            span: Span::new(start, end),
            surface: format!("s{start}_{end}"),
            matches: matches
                .iter()
                .map(|(id, d)| (EntityId::new(*id), *d))
                .collect(),
        }
    }

    // Independent objective oracle working directly off the raw triple list.
    fn oracle_pair_count(triples: &[Triple], a: &EntityId, b: &EntityId) -> usize {
        if a == b {
            return 0;
        }
        triples
            .iter()
            .filter(|t| {
                (&t.subject == a && &t.object == b) || (&t.subject == b && &t.object == a)
            })
            .count()
    }

    fn oracle_objective(triples: &[Triple], chosen: &[EntityId], context: &[EntityId]) -> usize {
        let mut total = 0;
        for i in 0..chosen.len() {
            for j in (i + 1)..chosen.len() {
                total += oracle_pair_count(triples, &chosen[i], &chosen[j]);
            }
            for c in context {
                total += oracle_pair_count(triples, &chosen[i], c);
            }
        }
        total
    }

    fn oracle_max_objective(
        triples: &[Triple],
        options: &[Vec<EntityId>],
        context: &[EntityId],
    ) -> usize {
        fn walk(
            triples: &[Triple],
            options: &[Vec<EntityId>],
            context: &[EntityId],
            chosen: &mut Vec<EntityId>,
            best: &mut usize,
        ) {
            if chosen.len() == options.len() {
                *best = (*best).max(oracle_objective(triples, chosen, context));
                return;
            }
            for e in &options[chosen.len()] {
                chosen.push(e.clone());
                walk(triples, options, context, chosen, best);
                chosen.pop();
            }
        }
        let mut best = 0;
        walk(triples, options, context, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn generate_candidates_finds_multiword_entities() {
        let kb = apprentice_kb();
        let utt = Utterance::new("Scooter Libby wrote a novel called The Apprentice.");
        let cands = generate_candidates(&kb, &utt, &LinkerConfig::default());
        let surfaces: Vec<&str> = cands.iter().map(|c| c.surface.as_str()).collect();
        assert!(surfaces.contains(&"scooter libby"));
        assert!(surfaces.contains(&"the apprentice"));
    }

    #[test]
    fn generate_candidates_empty_when_nothing_matches() {
        let kb = apprentice_kb();
        let utt = Utterance::new("completely unrelated words here");
        assert!(generate_candidates(&kb, &utt, &LinkerConfig::default()).is_empty());
    }

    #[test]
    fn generate_candidates_produces_overlaps() {
        let kb = KnowledgeBase::build(
            vec![
                Entity::new("l", "London"),
                Entity::new("ls", "London Street"),
            ],
            vec![],
        )
        .unwrap();
        let utt = Utterance::new("Londn Street");
        let cands = generate_candidates(&kb, &utt, &LinkerConfig::default());
        let spans: Vec<Span> = cands.iter().map(|c| c.span).collect();
        assert!(spans.contains(&Span::new(0, 1)), "spans: {spans:?}");
        assert!(spans.contains(&Span::new(0, 2)), "spans: {spans:?}");
    }

    #[test]
    fn resolve_overlaps_prefers_longer() {
        let cands = vec![cand(2, 3, &[("l", 0.0)]), cand(2, 4, &[("ls", 0.0)])];
        let kept = resolve_overlaps(&cands);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].span, Span::new(2, 4));
    }

    #[test]
    fn resolve_overlaps_keeps_disjoint() {
        let cands = vec![cand(0, 1, &[("a", 0.0)]), cand(3, 5, &[("b", 0.0)])];
        assert_eq!(resolve_overlaps(&cands), cands);
    }

    #[test]
    fn resolve_overlaps_equal_length_chain_is_greedy_leftmost() {
        let cands = vec![
            cand(0, 2, &[("a", 0.0)]),
            cand(1, 3, &[("b", 0.0)]),
            cand(2, 4, &[("c", 0.0)]),
        ];
        let kept = resolve_overlaps(&cands);
        let spans: Vec<Span> = kept.iter().map(|c| c.span).collect();
        assert_eq!(spans, vec![Span::new(0, 2), Span::new(2, 4)]);
    }

    #[test]
    fn relation_max_uses_context_to_pick_connected_entity() {
        let kb = apprentice_kb();
        // "The Apprentice" matches three entities; only the novel connects
        // to Scooter Libby in the context.
        let cands = vec![cand(0, 2, &[("novel", 0.0), ("tv", 0.0), ("album", 0.0)])];
        let ranked =
            disambiguate_relation_max(&kb, &cands, &[EntityId::new("libby")], 3);
        assert_eq!(ranked[0].entities[0].as_str(), "novel");
        assert_eq!(ranked[0].relation_score, 1);
    }

    #[test]
    fn relation_max_single_candidate_single_match() {
        let kb = apprentice_kb();
        let cands = vec![cand(0, 1, &[("nbc", 0.0)])];
        let ranked = disambiguate_relation_max(&kb, &cands, &[], 1);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].entities[0].as_str(), "nbc");
        assert_eq!(ranked[0].relation_score, 0);
    }

    #[test]
    fn relation_max_empty_candidates_yield_empty_assignment() {
        let kb = apprentice_kb();
        let ranked = disambiguate_relation_max(&kb, &[], &[], 5);
        assert_eq!(ranked.len(), 1);
        assert!(ranked[0].entities.is_empty());
        assert_eq!(ranked[0].relation_score, 0);
    }

    #[test]
    fn relation_max_matches_exhaustive_oracle_on_random_instances() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n_entities = rng.random_range(6..=10);
            let ids: Vec<String> = (0..n_entities).map(|i| format!("e{i}")).collect();
            let n_triples = rng.random_range(0..=14);
            let triples: Vec<Triple> = (0..n_triples)
                .map(|_| {
                    let s = ids[rng.random_range(0..n_entities)].clone();
                    let o = ids[rng.random_range(0..n_entities)].clone();
                    triple(&s, "r", &o)
                })
                .collect();
            let entities: Vec<Entity> = ids
                .iter()
                .map(|id| Entity::new(id.clone(), format!("name {id}")))
                .collect();
            let kb = KnowledgeBase::build(entities, triples.clone()).unwrap();

            let n_cands = rng.random_range(1..=4);
            let mut cands = Vec::new();
            let mut options = Vec::new();
            for c in 0..n_cands {
                let n_matches = rng.random_range(1..=4);
                let matched: Vec<(&str, f64)> = (0..n_matches)
                    .map(|_| (ids[rng.random_range(0..n_entities)].as_str(), 0.0))
                    .collect();
                options.push(
                    matched
                        .iter()
                        .map(|(id, _)| EntityId::new(*id))
                        .collect::<Vec<_>>(),
                );
                cands.push(cand(c * 2, c * 2 + 1, &matched));
            }
            let context: Vec<EntityId> = (0..rng.random_range(0..=2))
                .map(|_| EntityId::new(ids[rng.random_range(0..n_entities)].clone()))
                .collect();

            let ranked = disambiguate_relation_max(&kb, &cands, &context, 1);
            let best = oracle_max_objective(&triples, &options, &context);
            assert_eq!(ranked[0].relation_score, best);
            // the reported score is the oracle score of the reported assignment
            assert_eq!(
                oracle_objective(&triples, &ranked[0].entities, &context),
                best
            );
        }
    }

    #[test]
    fn relation_max_beam_path_matches_oracle_on_chain_fixture() {
        // 17 binary candidates => 2^17 assignments, above the exhaustive
        // limit, so this exercises the beam. The good entities form a chain
        // so the optimal prefix dominates at every step.
        let k = 17;
        let mut entities = Vec::new();
        let mut triples = Vec::new();
        for i in 0..k {
            entities.push(Entity::new(format!("good{i}"), format!("gname {i}")));
            entities.push(Entity::new(format!("bad{i}"), format!("bname {i}")));
            if i > 0 {
                triples.push(triple(&format!("good{}", i - 1), "r", &format!("good{i}")));
            }
        }
        let kb = KnowledgeBase::build(entities, triples.clone()).unwrap();
        let cands: Vec<EntityCandidate> = (0..k)
            .map(|i| {
                cand(
                    i * 2,
                    i * 2 + 1,
                    &[(&format!("good{i}"), 0.0), (&format!("bad{i}"), 0.0)],
                )
            })
            .collect();
        let options: Vec<Vec<EntityId>> = cands
            .iter()
            .map(|c| c.matches.iter().map(|(e, _)| e.clone()).collect())
            .collect();
        let ranked = disambiguate_relation_max(&kb, &cands, &[], 1);
        let best = oracle_max_objective(&triples, &options, &[]);
        assert_eq!(best, (k - 1) as usize);
        assert_eq!(ranked[0].relation_score, best);
    }

    #[test]
    fn relation_max_invariant_under_zero_relation_context() {
        let kb = apprentice_kb();
        let cands = vec![
            cand(0, 1, &[("novel", 0.0), ("tv", 0.0)]),
            cand(2, 3, &[("libby", 0.0), ("trump", 0.0)]),
        ];
        let base = disambiguate_relation_max(&kb, &cands, &[], 1);
        // album has no relation to any match
        let padded =
            disambiguate_relation_max(&kb, &cands, &[EntityId::new("album")], 1);
        assert_eq!(base[0].entities, padded[0].entities);
    }

    #[test]
    fn popularity_picks_most_popular_match() {
        // popularity: tv = 3 (nbc + host x2), novel = 1, album = 0
        let kb = apprentice_kb();
        let cands = vec![cand(0, 2, &[("novel", 0.0), ("tv", 0.0), ("album", 0.0)])];
        let ranked = disambiguate_popularity(&kb, &cands, 5);
        assert_eq!(ranked[0].entities[0].as_str(), "tv");
        assert_eq!(ranked[1].entities[0].as_str(), "novel");
        assert_eq!(ranked[2].entities[0].as_str(), "album");
        assert_eq!(ranked.len(), 3);
    }

    #[test]
    fn popularity_breaks_ties_by_distance() {
        let kb = KnowledgeBase::build(
            vec![Entity::new("x", "Xx"), Entity::new("y", "Yy")],
            vec![],
        )
        .unwrap();
        // equal popularity (0), unequal distance
        let cands = vec![cand(0, 1, &[("y", 0.1), ("x", 0.05)])];
        let ranked = disambiguate_popularity(&kb, &cands, 1);
        assert_eq!(ranked[0].entities[0].as_str(), "x");
    }

    #[test]
    fn popularity_nbest_covers_top_n_matches_of_every_candidate() {
        let kb = apprentice_kb();
        let cands = vec![
            cand(0, 1, &[("novel", 0.0), ("tv", 0.0), ("album", 0.0)]),
            cand(2, 3, &[("libby", 0.0), ("trump", 0.0)]),
        ];
        let ranked = disambiguate_popularity(&kb, &cands, 3);
        for (ci, c) in cands.iter().enumerate() {
            let mut by_pop = c.matches.clone();
            by_pop.sort_by(|(ia, _), (ib, _)| {
                kb.popularity_or_zero(ib).cmp(&kb.popularity_or_zero(ia))
            });
            for (e, _) in by_pop.iter().take(3) {
                assert!(
                    ranked.iter().any(|asg| &asg.entities[ci] == e),
                    "match {e} of candidate {ci} not covered"
                );
            }
        }
    }

    fn calcraft_kb() -> KnowledgeBase {
        KnowledgeBase::build(
            vec![
                Entity::new("calcraft", "Sharon Calcraft"),
                Entity::new("australia", "Australia"),
                Entity::new("sydney", "Sydney"),
                Entity::new("nsw", "New South Wales"),
                Entity::new("composer", "Composer"),
                Entity::new("australian", "Australian"),
                Entity::new("y1955", "1955"),
            ],
            vec![
                triple("calcraft", "nationality", "australia"),
                triple("calcraft", "born_in", "sydney"),
                triple("calcraft", "born_year", "y1955"),
                triple("calcraft", "profession", "composer"),
                triple("sydney", "located_in", "nsw"),
                triple("nsw", "located_in", "australia"),
                triple("australian", "demonym_of", "australia"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn link_pair_links_question_then_answer_with_context() {
        let kb = calcraft_kb();
        let q = Utterance::new("What is Sharon Calcraft's nationality?");
        let a = Utterance::new(
            "Australian Composer Sharon Calcraft was born in 1955 in Sydney New South Wales Australia.",
        );
        let (linked_q, nbest) =
            link_pair(&kb, &q, &a, &LinkerConfig::default(), Method::RelationMax);
        assert!(linked_q.contains_entity(&EntityId::new("calcraft")));
        let top = &nbest[0];
        for id in ["australia", "sydney", "nsw"] {
            assert!(top.contains_entity(&EntityId::new(id)), "missing {id}");
        }
    }

    #[test]
    fn link_pair_empty_answer_yields_no_links() {
        let kb = calcraft_kb();
        let q = Utterance::new("What is Sharon Calcraft's nationality?");
        let a = Utterance::new("");
        let (_, nbest) = link_pair(&kb, &q, &a, &LinkerConfig::default(), Method::RelationMax);
        assert_eq!(nbest.len(), 1);
        assert!(nbest[0].links.is_empty());
    }

    #[test]
    fn link_pair_context_flips_choice_under_relation_max_only() {
        // Ambiguous name matches e1 and e2; only e2 relates to the question
        // entity q; e1 is globally more popular.
        let kb = KnowledgeBase::build(
            vec![
                Entity::new("q", "Sharona"),
                Entity::new("e1", "Bigcity"),
                Entity::new("e2", "Bigcity"),
                Entity::new("j1", "Junkone"),
                Entity::new("j2", "Junktwo"),
                Entity::new("j3", "Junkthree"),
            ],
            vec![
                triple("q", "born_in", "e2"),
                triple("e1", "r", "j1"),
                triple("e1", "r", "j2"),
                triple("e1", "r", "j3"),
            ],
        )
        .unwrap();
        let q = Utterance::new("where was Sharona born");
        let a = Utterance::new("she was born in Bigcity");
        let (_, rel) = link_pair(&kb, &q, &a, &LinkerConfig::default(), Method::RelationMax);
        assert!(rel[0].contains_entity(&EntityId::new("e2")));
        let (_, pop) = link_pair(&kb, &q, &a, &LinkerConfig::default(), Method::Popularity);
        assert!(pop[0].contains_entity(&EntityId::new("e1")));
    }

    #[test]
    fn popularity_ignores_question_context() {
        let kb = KnowledgeBase::build(
            vec![
                Entity::new("q", "Sharona"),
                Entity::new("e1", "Bigcity"),
                Entity::new("e2", "Bigcity"),
            ],
            vec![triple("q", "born_in", "e2"), triple("e1", "r", "e1")],
        )
        .unwrap();
        let a = Utterance::new("she was born in Bigcity");
        let with_q = link_pair(
            &kb,
            &Utterance::new("where was Sharona born"),
            &a,
            &LinkerConfig::default(),
            Method::Popularity,
        );
        let without_q = link_pair(
            &kb,
            &Utterance::new(""),
            &a,
            &LinkerConfig::default(),
            Method::Popularity,
        );
        assert_eq!(with_q.1[0].links, without_q.1[0].links);
    }

    #[test]
    fn link_pair_is_deterministic() {
        let kb = calcraft_kb();
        let q = Utterance::new("What is Sharon Calcraft's nationality?");
        let a = Utterance::new("Australian Composer Sharon Calcraft was born in Sydney Australia.");
        let run1 = link_pair(&kb, &q, &a, &LinkerConfig::default(), Method::RelationMax);
        let run2 = link_pair(&kb, &q, &a, &LinkerConfig::default(), Method::RelationMax);
        assert_eq!(run1, run2);
    }

    proptest! {
        #[test]
        fn resolved_candidates_never_overlap_and_dropped_are_dominated(
            spans in proptest::collection::vec((0usize..10, 1usize..4), 0..8)
        ) {
            let cands: Vec<EntityCandidate> = spans
                .iter()
                .map(|(s, len)| cand(*s, s + len, &[("e", 0.0)]))
                .collect();
            let kept = resolve_overlaps(&cands);
            for i in 0..kept.len() {
                for j in (i + 1)..kept.len() {
                    prop_assert!(!kept[i].span.overlaps(&kept[j].span));
                }
            }
            // every dropped candidate overlaps a kept one at least as long
            for c in &cands {
                if !kept.iter().any(|k| k.span == c.span) {
                    prop_assert!(kept
                        .iter()
                        .any(|k| k.span.overlaps(&c.span) && k.span.len() >= c.span.len()));
                }
            }
        }
    }
}
