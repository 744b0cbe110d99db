//! The uniform inference interface.
//!
//! Everything that labels names (the built-in model, HTTP services, mocks,
//! and the hybrids in [`crate::ensemble`]) implements [`Inferrer`] and is
//! used through an [`InferrerHandle`], which carries the inferrer's id and
//! splits large requests into batches.

mod external;
mod rate_limit;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::config::ConfigError;
use crate::mle::{GenderLabel, MleModel, Prediction};

pub use external::{
    map_external_label, ConfidenceScale, ExternalAdapter, ExternalAdapterConfig, LabelMapping, RetryPolicy,
    Transport, TransportError, UreqTransport,
};
pub use rate_limit::RateLimiter;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{id}: endpoint unreachable: {message}")]
    Unreachable { id: String, message: String },
    #[error("label `{0}` has no mapping and no default")]
    Mapping(String),
    #[error("{id}: returned {got} predictions for {expected} names")]
    LengthMismatch { id: String, expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<ConfigError> for InferError {
    fn from(e: ConfigError) -> Self {
        InferError::Config(e.to_string())
    }
}

/// Something that labels normalized names.
pub trait Inferrer: Send + Sync {
    /// One prediction per input name, in input order, each with `source`
    /// set to `id` (hybrids may qualify it with the stage that answered).
    fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InferrerKind {
    BuiltinMle,
    ExternalHttp,
    Mock,
    Hybrid,
}

impl fmt::Display for InferrerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferrerKind::BuiltinMle => "builtin-mle",
            InferrerKind::ExternalHttp => "external-http",
            InferrerKind::Mock => "mock",
            InferrerKind::Hybrid => "hybrid",
        })
    }
}

/// An identified inferrer. Cheap to clone.
#[derive(Clone)]
pub struct InferrerHandle {
    id: String,
    kind: InferrerKind,
    batch_limit: usize,
    inner: Arc<dyn Inferrer>,
}

impl fmt::Debug for InferrerHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InferrerHandle")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("batch_limit", &self.batch_limit)
            .finish()
    }
}

impl InferrerHandle {
    /// A `batch_limit` of zero is treated as one.
    pub fn new(id: impl Into<String>, kind: InferrerKind, batch_limit: usize, inner: Arc<dyn Inferrer>) -> Self {
        Self { id: id.into(), kind, batch_limit: batch_limit.max(1), inner }
    }

    pub fn builtin_mle(id: impl Into<String>, model: Arc<MleModel>) -> Self {
        Self::new(id, InferrerKind::BuiltinMle, usize::MAX, model)
    }

    pub fn mock(id: impl Into<String>, mock: Arc<MockInferrer>) -> Self {
        Self::new(id, InferrerKind::Mock, usize::MAX, mock)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> InferrerKind {
        self.kind
    }

    pub fn batch_limit(&self) -> usize {
        self.batch_limit
    }

    /// Labels `names` in chunks of at most `batch_limit`. The output always
    /// has one prediction per input, in order.
    pub fn infer_batch(&self, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        let mut out = Vec::with_capacity(names.len());
        for chunk in names.chunks(self.batch_limit) {
            let preds = self.inner.infer(&self.id, chunk)?;
            if preds.len() != chunk.len() {
                return Err(InferError::LengthMismatch {
                    id: self.id.clone(),
                    expected: chunk.len(),
                    got: preds.len(),
                });
            }
            out.extend(preds);
        }
        Ok(out)
    }

    pub fn infer_one(&self, name: &str) -> Result<Prediction, InferError> {
        let mut preds = self.infer_batch(&[name.to_string()])?;
        Ok(preds.pop().unwrap_or_else(|| Prediction::unknown(&self.id)))
    }
}

impl Inferrer for MleModel {
    fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        Ok(names.iter().map(|n| self.classify_as(n, id)).collect())
    }
}

/// Fixed answers for a set of names; everything else is Unknown.
///
/// Counts how many names it has been asked about, which lets tests assert
/// that a fallback was never consulted.
#[derive(Debug, Default)]
pub struct MockInferrer {
    answers: HashMap<String, (GenderLabel, Option<f64>)>,
    calls: AtomicUsize,
}

impl MockInferrer {
    pub fn new() -> Self {
        Self::default()
    }

    /// `p_female` is ignored for Unknown. A missing probability on another
    /// label defaults to 1.0 (Female), 0.0 (Male) or 0.5 (Ambiguous).
    pub fn with(mut self, name: &str, label: GenderLabel, p_female: Option<f64>) -> Self {
        self.insert(name, label, p_female);
        self
    }

    pub fn insert(&mut self, name: &str, label: GenderLabel, p_female: Option<f64>) {
        let p = match label {
            GenderLabel::Unknown => None,
            GenderLabel::Female => Some(p_female.unwrap_or(1.0)),
            GenderLabel::Male => Some(p_female.unwrap_or(0.0)),
            GenderLabel::Ambiguous => Some(p_female.unwrap_or(0.5)),
        };
        self.answers.insert(name.to_string(), (label, p));
    }

    /// Reads `name<TAB>label[<TAB>p_female]` lines; `#` lines are skipped.
    pub fn read_from<R: Read>(input: R) -> Result<MockInferrer, InferError> {
        let mut mock = MockInferrer::new();
        for (idx, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(InferError::Parse { line: lineno, message: "expected name, label[, p_female]".into() });
            }
            let label: GenderLabel =
                fields[1].parse().map_err(|message| InferError::Parse { line: lineno, message })?;
            let p = match fields.get(2).map(|s| s.trim()) {
                None | Some("") => None,
                Some(s) => Some(s.parse::<f64>().ok().filter(|p| (0.0..=1.0).contains(p)).ok_or_else(|| {
                    InferError::Parse { line: lineno, message: format!("invalid probability `{s}`") }
                })?),
            };
            mock.insert(fields[0], label, p);
        }
        Ok(mock)
    }

    pub fn load(path: &Path) -> Result<MockInferrer, InferError> {
        MockInferrer::read_from(File::open(path)?)
    }

    /// Number of names answered so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl Inferrer for MockInferrer {
    fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        self.calls.fetch_add(names.len(), Ordering::SeqCst);
        Ok(names
            .iter()
            .map(|n| match self.answers.get(n) {
                Some((label, p)) => Prediction::new(*label, *p, id),
                None => Prediction::unknown(id),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FrequencyTable, GenderCounts, NameType};
    use crate::mle::Tau;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mock_contract() {
        let mock = Arc::new(MockInferrer::new().with("anna", GenderLabel::Female, Some(0.99)));
        let h = InferrerHandle::mock("m", mock.clone());
        let preds = h.infer_batch(&names(&["anna", "zzz"])).unwrap();
        assert_eq!(preds[0], Prediction::new(GenderLabel::Female, Some(0.99), "m"));
        assert_eq!(preds[1], Prediction::unknown("m"));
        assert_eq!(mock.calls(), 2);
    }

    #[test]
    fn batches_respect_limit() {
        struct Counting(AtomicUsize);
        impl Inferrer for Counting {
            fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
                assert!(names.len() <= 2);
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok(names.iter().map(|_| Prediction::unknown(id)).collect())
            }
        }
        let inner = Arc::new(Counting(AtomicUsize::new(0)));
        let h = InferrerHandle::new("c", InferrerKind::Mock, 2, inner.clone());
        assert_eq!(h.infer_batch(&names(&["a", "b", "c", "d", "e"])).unwrap().len(), 5);
        assert_eq!(inner.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn short_output_is_an_error() {
        struct Lossy;
        impl Inferrer for Lossy {
            fn infer(&self, _: &str, _: &[String]) -> Result<Vec<Prediction>, InferError> {
                Ok(vec![])
            }
        }
        let h = InferrerHandle::new("l", InferrerKind::Mock, 10, Arc::new(Lossy));
        assert!(matches!(h.infer_batch(&names(&["a"])), Err(InferError::LengthMismatch { .. })));
    }

    #[test]
    fn mock_file_format() {
        let text = "# mock\nanna\tfemale\t0.9\nbob\tM\nsam\tambiguous\nzed\tunknown\n";
        let mock = MockInferrer::read_from(text.as_bytes()).unwrap();
        let preds = mock.infer("x", &names(&["anna", "bob", "sam", "zed"])).unwrap();
        assert_eq!(preds[0].p_female, Some(0.9));
        assert_eq!(preds[1].p_female, Some(0.0));
        assert_eq!(preds[2].p_female, Some(0.5));
        assert_eq!(preds[3].label, GenderLabel::Unknown);
        assert!(matches!(
            MockInferrer::read_from("anna\tfemale\t1.5\n".as_bytes()),
            Err(InferError::Parse { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn builtin_handle_matches_direct_classification(
            entries in proptest::collection::btree_map("[a-z]{2,6}", (0u64..20, 0u64..20), 1..30),
            probes in proptest::collection::vec("[a-z]{2,6}", 1..30),
            tau in 0.5f64..=1.0,
        ) {
            let table = FrequencyTable::from_entries(
                NameType::First,
                "t",
                entries.into_iter().map(|(k, (f, m))| (k, GenderCounts::new(f, m))),
            );
            prop_assume!(!table.is_empty());
            let model = Arc::new(MleModel::train(table, Tau::new(tau).unwrap()).unwrap());
            let handle = InferrerHandle::builtin_mle("mle", model.clone());
            let mut probe_names: Vec<String> = model.table().names().map(String::from).collect();
            probe_names.extend(probes);
            let via_handle = handle.infer_batch(&probe_names).unwrap();
            prop_assert_eq!(via_handle.len(), probe_names.len());
            for (name, p) in probe_names.iter().zip(&via_handle) {
                let direct = model.classify(name);
                prop_assert_eq!(p.label, direct.label);
                prop_assert_eq!(p.p_female.map(f64::to_bits), direct.p_female.map(f64::to_bits));
            }
        }
    }
}
