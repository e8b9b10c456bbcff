//! Thin client for a Wikifier-style entity-linking service.
//!
//! The transport is abstracted behind [`Transport`] so that no HTTP stack is
//! pulled in; callers plug in their own client. Responses are cached by a
//! hash of the fragment text.

use std::collections::HashMap;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::annotation::{Candidate, FragmentAnnotation};
use super::DataError;

pub const DEFAULT_ENDPOINT: &str = "http://www.wikifier.org/annotate-article";

pub trait Transport {
    /// POSTs a form-encoded body and returns the response text.
    fn post_form(&self, url: &str, form: &[(&str, &str)]) -> Result<String, String>;
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    #[serde(default)]
    annotations: Vec<WireAnnotation>,
}

#[derive(Debug, Deserialize)]
struct WireAnnotation {
    title: String,
    #[serde(default)]
    url: String,
    #[serde(rename = "pageRank", default)]
    page_rank: f64,
    #[serde(default)]
    cosine: f64,
}

/// Converts a raw service response into an annotation: candidates ranked by
/// PageRank, coverage taken from the cosine similarity.
pub fn parse_response(fragment_id: &str, body: &str) -> Result<FragmentAnnotation, DataError> {
    let wire: WireResponse = serde_json::from_str(body).map_err(|e| DataError::InvalidAnnotation {
        fragment_id: fragment_id.to_string(),
        reason: format!("bad service response: {e}"),
    })?;
    let mut anns = wire.annotations;
    anns.sort_by(|a, b| b.page_rank.total_cmp(&a.page_rank).then_with(|| a.title.cmp(&b.title)));
    let candidates = anns
        .into_iter()
        .enumerate()
        .map(|(i, a)| Candidate {
            kc_id: if a.url.is_empty() { a.title.clone() } else { a.url },
            kc_title: a.title,
            coverage: a.cosine.max(0.0),
            rank: i as u32 + 1,
        })
        .collect();
    Ok(FragmentAnnotation {
        fragment_id: fragment_id.to_string(),
        candidates,
    })
}

pub struct WikifierClient<T: Transport> {
    transport: T,
    endpoint: String,
    user_key: String,
    cache: HashMap<String, String>,
}

impl<T: Transport> WikifierClient<T> {
    pub fn new(transport: T, user_key: impl Into<String>) -> Self {
        Self {
            transport,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            user_key: user_key.into(),
            cache: HashMap::new(),
        }
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }

    pub fn cached_responses(&self) -> usize {
        self.cache.len()
    }

    pub fn annotate(&mut self, fragment_id: &str, text: &str) -> Result<FragmentAnnotation, DataError> {
        let key = hex::encode(Sha256::digest(text.as_bytes()));
        if let Some(body) = self.cache.get(&key) {
            return parse_response(fragment_id, body);
        }
        let form = [
            ("userKey", self.user_key.as_str()),
            ("text", text),
            ("lang", "en"),
            ("pageRankSqThreshold", "0.8"),
            ("applyPageRankSqThreshold", "true"),
            ("nTopDfValuesToIgnore", "200"),
            ("wikiDataClasses", "false"),
            ("support", "false"),
            ("ranges", "false"),
        ];
        let body = self
            .transport
            .post_form(&self.endpoint, &form)
            .map_err(DataError::UnreadableSource)?;
        let ann = parse_response(fragment_id, &body)?;
        self.cache.insert(key, body);
        Ok(ann)
    }
}
