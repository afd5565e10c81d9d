//! JSON-lines records persisted between pipeline stages, and their
//! conversions to and from the core types.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use denotate::linker::{LinkedUtterance, Span};
use denotate::{EntityId, Utterance};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRecord {
    pub start: usize,
    pub end: usize,
    pub entity: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub raw: String,
    pub links: Vec<LinkRecord>,
}

/// One linked pair: the question's links and the answer's ranked
/// hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkedPairRecord {
    pub id: String,
    pub gold: String,
    pub question: UtteranceRecord,
    pub answer_raw: String,
    pub answer_nbest: Vec<Vec<LinkRecord>>,
}

fn to_links(records: &[LinkRecord], token_count: usize) -> anyhow::Result<Vec<(Span, EntityId)>> {
    let mut links = Vec::with_capacity(records.len());
    for r in records {
        if r.start >= r.end || r.end > token_count {
            bail!(
                "link span [{}, {}) out of range for {} tokens",
                r.start,
                r.end,
                token_count
            );
        }
        links.push((Span::new(r.start, r.end), EntityId::new(r.entity.as_str())));
    }
    Ok(links)
}

fn from_links(links: &[(Span, EntityId)]) -> Vec<LinkRecord> {
    links
        .iter()
        .map(|(span, entity)| LinkRecord {
            start: span.start,
            end: span.end,
            entity: entity.to_string(),
        })
        .collect()
}

impl LinkedPairRecord {
    pub fn new(
        id: &str,
        gold: &EntityId,
        question: &LinkedUtterance,
        answer_nbest: &[LinkedUtterance],
    ) -> Self {
        LinkedPairRecord {
            id: id.to_owned(),
            gold: gold.to_string(),
            question: UtteranceRecord {
                raw: question.utterance.raw().to_owned(),
                links: from_links(&question.links),
            },
            answer_raw: answer_nbest
                .first()
                .map(|lu| lu.utterance.raw().to_owned())
                .unwrap_or_default(),
            answer_nbest: answer_nbest
                .iter()
                .map(|lu| from_links(&lu.links))
                .collect(),
        }
    }

    pub fn question_linked(&self) -> anyhow::Result<LinkedUtterance> {
        let utterance = Utterance::new(self.question.raw.as_str());
        let links = to_links(&self.question.links, utterance.tokens().len())
            .with_context(|| format!("pair {}: bad question links", self.id))?;
        Ok(LinkedUtterance { utterance, links })
    }

    pub fn answer_nbest_linked(&self) -> anyhow::Result<Vec<LinkedUtterance>> {
        let mut out = Vec::with_capacity(self.answer_nbest.len());
        for records in &self.answer_nbest {
            let utterance = Utterance::new(self.answer_raw.as_str());
            let links = to_links(records, utterance.tokens().len())
                .with_context(|| format!("pair {}: bad answer links", self.id))?;
            out.push(LinkedUtterance { utterance, links });
        }
        Ok(out)
    }

    pub fn gold_id(&self) -> EntityId {
        EntityId::new(self.gold.as_str())
    }
}

pub fn write_jsonl(path: &std::path::Path, records: &[LinkedPairRecord]) -> anyhow::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_jsonl(path: &std::path::Path) -> anyhow::Result<Vec<LinkedPairRecord>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LinkedPairRecord = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: bad record", path.display(), idx + 1))?;
        records.push(record);
    }
    Ok(records)
}
