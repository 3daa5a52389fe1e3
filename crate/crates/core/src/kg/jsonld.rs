//! Deterministic JSON-LD serialisation.
//!
//! The document has a fixed `@context` mapping every vocabulary term to an IRI
//! under [`VOCAB_IRI`], and an `@graph` array with one node object per subject
//! in first-seen order. Keys inside a node follow first-seen predicate order;
//! a predicate with several objects becomes an array. Literal datatypes live in
//! the context, so node values are plain strings:
//!
//! ```json
//! { "@id": "Transaction_1", "type": "SellTransaction",
//!   "transactionValue": "11000", "transactionTimestamp": "2020-03-27",
//!   "involvesSecurity": "GRS434003000", "hasParticipant": "00017496858921195E5A" }
//! ```

use serde_json::{json, Map, Value};

use super::{GraphKind, KgError, KnowledgeGraph, Object, ObjectKind, Predicate, Triple};
use crate::data::parse_date;

pub const VOCAB_IRI: &str = "https://finalign.example/vocab#";

fn context() -> Value {
    let mut ctx = Map::new();
    ctx.insert("@vocab".into(), json!(VOCAB_IRI));
    ctx.insert("xsd".into(), json!("http://www.w3.org/2001/XMLSchema#"));
    for p in Predicate::ALL {
        let iri = format!("{VOCAB_IRI}{}", p.as_str());
        let def = match p.range() {
            _ if p == Predicate::Type => json!("@type"),
            ObjectKind::Iri => json!({ "@id": iri, "@type": "@id" }),
            ObjectKind::Str => json!({ "@id": iri }),
            ObjectKind::Decimal => json!({ "@id": iri, "@type": "xsd:decimal" }),
            ObjectKind::Date => json!({ "@id": iri, "@type": "xsd:date" }),
        };
        ctx.insert(p.as_str().into(), def);
    }
    Value::Object(ctx)
}

/// Serialise `kg`. Output is byte-identical for equal graphs.
pub fn to_jsonld(kg: &KnowledgeGraph) -> String {
    let mut nodes: Vec<Map<String, Value>> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for t in &kg.triples {
        let i = *index.entry(t.subject.as_str()).or_insert_with(|| {
            let mut node = Map::new();
            node.insert("@id".into(), Value::String(t.subject.clone()));
            nodes.push(node);
            nodes.len() - 1
        });
        let value = Value::String(t.object.to_string());
        let node = &mut nodes[i];
        match node.get_mut(t.predicate.as_str()) {
            None => {
                node.insert(t.predicate.as_str().into(), value);
            }
            Some(Value::Array(values)) => values.push(value),
            Some(existing) => {
                let first = existing.take();
                *existing = Value::Array(vec![first, value]);
            }
        }
    }
    let mut doc = Map::new();
    doc.insert("@context".into(), context());
    doc.insert(
        "@graph".into(),
        Value::Array(nodes.into_iter().map(Value::Object).collect()),
    );
    serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values always serialise")
}

fn object_for(p: Predicate, raw: &str) -> Result<Object, KgError> {
    Ok(match p.range() {
        ObjectKind::Iri => Object::Iri(raw.to_string()),
        ObjectKind::Str => Object::Str(raw.to_string()),
        ObjectKind::Decimal => Object::Decimal(
            raw.parse()
                .map_err(|_| KgError::Malformed(format!("{p}: bad decimal {raw:?}")))?,
        ),
        ObjectKind::Date => Object::Date(parse_date(raw).map_err(KgError::Malformed)?),
    })
}

/// Parse a document produced by [`to_jsonld`] back into triples.
pub fn from_jsonld(text: &str, kind: GraphKind) -> Result<KnowledgeGraph, KgError> {
    let doc: Value = serde_json::from_str(text)?;
    let graph = doc
        .get("@graph")
        .and_then(Value::as_array)
        .ok_or_else(|| KgError::Malformed("missing @graph array".into()))?;
    let mut kg = KnowledgeGraph::new(kind);
    for node in graph {
        let node = node
            .as_object()
            .ok_or_else(|| KgError::Malformed("@graph entry is not an object".into()))?;
        let subject = node
            .get("@id")
            .and_then(Value::as_str)
            .ok_or_else(|| KgError::Malformed("node without string @id".into()))?;
        for (key, value) in node.iter().filter(|(k, _)| k.as_str() != "@id") {
            let predicate: Predicate = key.parse()?;
            let values: Vec<&Value> = match value {
                Value::Array(vs) => vs.iter().collect(),
                v => vec![v],
            };
            for v in values {
                let raw = v
                    .as_str()
                    .ok_or_else(|| KgError::Malformed(format!("{key}: non-string value")))?;
                kg.triples.push(Triple::new(subject, predicate, object_for(predicate, raw)?)?);
            }
        }
    }
    Ok(kg)
}
