//! Two-stage and majority-vote hybrids.
//!
//! A [`TwoStage`] hybrid answers from the MLE model when the name's female
//! share lies outside the defer band and hands everything else to a fallback
//! inferrer. A [`MajorityVoter`] combines exactly three inferrers; wrapped as
//! the fallback of a [`TwoStage`] it gives the voting hybrid.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::inferrer::{InferError, Inferrer, InferrerHandle, InferrerKind};
use crate::mle::{threshold_counts, GenderLabel, MleModel, Prediction};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("defer band [{lo}, {hi}] must satisfy 0 <= lo < hi <= 1")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl From<EnsembleError> for InferError {
    fn from(e: EnsembleError) -> Self {
        InferError::Config(e.to_string())
    }
}

/// Closed interval of female shares for which stage 1 defers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeferBand {
    lo: f64,
    hi: f64,
}

impl DeferBand {
    pub fn new(lo: f64, hi: f64) -> Result<DeferBand, EnsembleError> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(EnsembleError::InvalidBand { lo, hi });
        }
        Ok(DeferBand { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

impl Default for DeferBand {
    fn default() -> Self {
        DeferBand { lo: 0.25, hi: 0.75 }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStageConfig {
    pub model: Arc<MleModel>,
    pub fallback: InferrerHandle,
    pub band: DeferBand,
    /// Send names missing from the model to the fallback. When false they
    /// come back Unknown from stage 1.
    pub route_unknown: bool,
}

impl TwoStageConfig {
    pub fn new(model: Arc<MleModel>, fallback: InferrerHandle) -> Self {
        Self { model, fallback, band: DeferBand::default(), route_unknown: true }
    }

    pub fn with_band(mut self, band: DeferBand) -> Self {
        self.band = band;
        self
    }

    pub fn with_route_unknown(mut self, route: bool) -> Self {
        self.route_unknown = route;
        self
    }

    /// Stage-1 answer, or None when the name goes to the fallback.
    fn stage_one(&self, name: &str) -> Option<GenderLabel> {
        match self.model.table().get(name) {
            Some(counts) => {
                let p = counts.female_share()?;
                if self.band.contains(p) {
                    None
                } else {
                    threshold_counts(counts, self.model.tau())
                }
            }
            None if self.route_unknown => None,
            None => Some(GenderLabel::Unknown),
        }
    }
}

/// Labels one name with the two-stage rule. Sources are `two-stage/stage1`
/// or `two-stage/stage2`; [`TwoStage`] uses its own id instead.
pub fn two_stage_infer(config: &TwoStageConfig, name: &str) -> Result<Prediction, InferError> {
    let mut preds = TwoStage::new("two-stage", config.clone()).infer_names("two-stage", &[name.to_string()])?;
    Ok(preds.pop().expect("one prediction per name"))
}

/// Per-stage answer counts, accumulated across calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub stage1: u64,
    pub stage2: u64,
}

#[derive(Debug)]
pub struct TwoStage {
    id: String,
    config: TwoStageConfig,
    stage1: AtomicU64,
    stage2: AtomicU64,
}

impl TwoStage {
    pub fn new(id: impl Into<String>, config: TwoStageConfig) -> Self {
        Self { id: id.into(), config, stage1: AtomicU64::new(0), stage2: AtomicU64::new(0) }
    }

    pub fn config(&self) -> &TwoStageConfig {
        &self.config
    }

    pub fn stage_counts(&self) -> StageCounts {
        StageCounts { stage1: self.stage1.load(Ordering::Relaxed), stage2: self.stage2.load(Ordering::Relaxed) }
    }

    pub fn into_handle(self) -> InferrerHandle {
        let id = self.id.clone();
        let batch = self.config.fallback.batch_limit();
        InferrerHandle::new(id, InferrerKind::Hybrid, batch, Arc::new(self))
    }

    fn infer_names(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        let stage1_src = format!("{id}/stage1");
        let mut out: Vec<Option<Prediction>> = Vec::with_capacity(names.len());
        let mut deferred = Vec::new();
        for name in names {
            match self.config.stage_one(name) {
                Some(label) => {
                    let p = self.config.model.estimate(name);
                    let p = if label == GenderLabel::Unknown { None } else { p };
                    out.push(Some(Prediction::new(label, p, stage1_src.as_str())));
                }
                None => {
                    deferred.push(name.clone());
                    out.push(None);
                }
            }
        }
        self.stage1.fetch_add((names.len() - deferred.len()) as u64, Ordering::Relaxed);
        if deferred.is_empty() {
            return Ok(out.into_iter().flatten().collect());
        }
        self.stage2.fetch_add(deferred.len() as u64, Ordering::Relaxed);
        let stage2_src = format!("{id}/stage2");
        let mut answers = self.config.fallback.infer_batch(&deferred)?.into_iter();
        Ok(out
            .into_iter()
            .map(|slot| {
                slot.unwrap_or_else(|| {
                    answers.next().expect("fallback answered every deferred name").with_source(stage2_src.as_str())
                })
            })
            .collect())
    }
}

impl Inferrer for TwoStage {
    fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        self.infer_names(id, names)
    }
}

/// Combines three predictions. Only Female and Male count as votes; a
/// strict majority of those wins, anything else is Unknown. The winner's
/// `p_female` is the mean over the voters that agreed with it (voters
/// without a probability are skipped).
pub fn majority_vote(predictions: &[Prediction]) -> Result<Prediction, EnsembleError> {
    if predictions.len() != 3 {
        return Err(EnsembleError::InvalidInput(format!(
            "majority vote needs exactly 3 predictions, got {}",
            predictions.len()
        )));
    }
    Ok(vote(predictions, "vote").0)
}

enum VoteOutcome {
    Winner,
    Tie,
    NoVotes,
}

fn vote(predictions: &[Prediction], source: &str) -> (Prediction, VoteOutcome) {
    let count = |l| predictions.iter().filter(|p| p.label == l).count();
    let (f, m) = (count(GenderLabel::Female), count(GenderLabel::Male));
    let winner = match f.cmp(&m) {
        std::cmp::Ordering::Greater => GenderLabel::Female,
        std::cmp::Ordering::Less => GenderLabel::Male,
        std::cmp::Ordering::Equal => {
            let outcome = if f == 0 { VoteOutcome::NoVotes } else { VoteOutcome::Tie };
            return (Prediction::unknown(source), outcome);
        }
    };
    let ps: Vec<f64> = predictions.iter().filter(|p| p.label == winner).filter_map(|p| p.p_female).collect();
    let p = if ps.is_empty() {
        if winner == GenderLabel::Female { 1.0 } else { 0.0 }
    } else {
        ps.iter().sum::<f64>() / ps.len() as f64
    };
    (Prediction::new(winner, Some(p), source), VoteOutcome::Winner)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TiePolicy {
    #[default]
    Unknown,
}

#[derive(Debug, Clone)]
pub struct VotingConfig {
    voters: [InferrerHandle; 3],
    pub tie_policy: TiePolicy,
}

impl VotingConfig {
    pub fn new(voters: Vec<InferrerHandle>) -> Result<VotingConfig, EnsembleError> {
        let voters: [InferrerHandle; 3] = voters.try_into().map_err(|v: Vec<InferrerHandle>| {
            EnsembleError::InvalidInput(format!("voting needs exactly 3 voters, got {}", v.len()))
        })?;
        for i in 0..3 {
            for j in i + 1..3 {
                if voters[i].id() == voters[j].id() {
                    return Err(EnsembleError::InvalidInput(format!("voter `{}` appears twice", voters[i].id())));
                }
            }
        }
        Ok(VotingConfig { voters, tie_policy: TiePolicy::Unknown })
    }

    pub fn voters(&self) -> &[InferrerHandle; 3] {
        &self.voters
    }
}

/// Vote counts by outcome, accumulated across calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VoteStats {
    pub decided: u64,
    pub ties: u64,
    pub no_votes: u64,
}

#[derive(Debug)]
pub struct MajorityVoter {
    config: VotingConfig,
    decided: AtomicU64,
    ties: AtomicU64,
    no_votes: AtomicU64,
}

impl MajorityVoter {
    pub fn new(config: VotingConfig) -> Self {
        Self { config, decided: AtomicU64::new(0), ties: AtomicU64::new(0), no_votes: AtomicU64::new(0) }
    }

    pub fn stats(&self) -> VoteStats {
        VoteStats {
            decided: self.decided.load(Ordering::Relaxed),
            ties: self.ties.load(Ordering::Relaxed),
            no_votes: self.no_votes.load(Ordering::Relaxed),
        }
    }

    pub fn into_handle(self, id: impl Into<String>) -> InferrerHandle {
        let batch = self.config.voters.iter().map(InferrerHandle::batch_limit).min().unwrap_or(1);
        InferrerHandle::new(id, InferrerKind::Hybrid, batch, Arc::new(self))
    }
}

impl Inferrer for MajorityVoter {
    fn infer(&self, id: &str, names: &[String]) -> Result<Vec<Prediction>, InferError> {
        // voters run side by side; each keeps its own rate limit
        let answers: Vec<Result<Vec<Prediction>, InferError>> = thread::scope(|s| {
            let jobs: Vec<_> = self.config.voters.iter().map(|v| s.spawn(move || v.infer_batch(names))).collect();
            jobs.into_iter().map(|j| j.join().expect("voter thread panicked")).collect()
        });
        let answers = answers.into_iter().collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::with_capacity(names.len());
        for ((a, b), c) in answers[0].iter().zip(&answers[1]).zip(&answers[2]) {
            let ballot = [a.clone(), b.clone(), c.clone()];
            let (pred, outcome) = vote(&ballot, id);
            let counter = match outcome {
                VoteOutcome::Winner => &self.decided,
                VoteOutcome::Tie => &self.ties,
                VoteOutcome::NoVotes => &self.no_votes,
            };
            counter.fetch_add(1, Ordering::Relaxed);
            out.push(pred);
        }
        Ok(out)
    }
}

/// Two-stage rule with a three-way majority vote as the fallback.
pub fn voting_two_stage_infer(
    mle: Arc<MleModel>,
    voting: &VotingConfig,
    band: DeferBand,
    name: &str,
) -> Result<Prediction, InferError> {
    let fallback = MajorityVoter::new(voting.clone()).into_handle("vote");
    two_stage_infer(&TwoStageConfig::new(mle, fallback).with_band(band), name)
}

/// What stage 2 of an ensemble refers to, by inferrer id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage2Spec {
    Single(String),
    Vote([String; 3]),
}

/// An ensemble as written in a key-value config:
///
/// ```text
/// id = mlea+voting
/// model = models/mlea.tsv
/// band = 0.25, 0.75
/// route_unknown = true
/// voters = cs, ns, gapi
/// ```
///
/// `fallback = <id>` instead of `voters` gives the plain two-stage hybrid.
/// Relative model paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub id: String,
    pub model: PathBuf,
    pub band: DeferBand,
    pub route_unknown: bool,
    pub stage2: Stage2Spec,
}

impl EnsembleSpec {
    pub fn from_key_values(kv: &KeyValues, base: &Path) -> Result<EnsembleSpec, EnsembleError> {
        let id = kv.require("id")?.to_string();
        let model = base.join(kv.require("model")?);
        let band = match kv.get("band") {
            None => DeferBand::default(),
            Some(raw) => {
                let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
                let parsed: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
                match parsed.as_deref() {
                    Some(&[lo, hi]) => DeferBand::new(lo, hi)?,
                    _ => {
                        return Err(ConfigError::Invalid { key: "band".into(), message: format!("`{raw}` is not `lo, hi`") }
                            .into())
                    }
                }
            }
        };
        let route_unknown = kv.parse_or("route_unknown", true)?;
        let stage2 = match (kv.get("fallback"), kv.get("voters")) {
            (Some(f), None) => Stage2Spec::Single(f.to_string()),
            (None, Some(v)) => {
                let ids: Vec<String> = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                let ids: [String; 3] = ids.try_into().map_err(|ids: Vec<String>| {
                    EnsembleError::InvalidInput(format!("`voters` lists {} ids, need 3", ids.len()))
                })?;
                Stage2Spec::Vote(ids)
            }
            _ => return Err(EnsembleError::InvalidInput("set exactly one of `fallback` and `voters`".into())),
        };
        Ok(EnsembleSpec { id, model, band, route_unknown, stage2 })
    }

    pub fn load(path: &Path) -> Result<EnsembleSpec, EnsembleError> {
        let kv = KeyValues::load(path)?;
        Self::from_key_values(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    /// Ids of the inferrers stage 2 needs.
    pub fn dependencies(&self) -> Vec<&str> {
        match &self.stage2 {
            Stage2Spec::Single(id) => vec![id.as_str()],
            Stage2Spec::Vote(ids) => ids.iter().map(String::as_str).collect(),
        }
    }

    /// Builds the hybrid from a loaded model and resolved stage-2 handles
    /// (in the order of [`EnsembleSpec::dependencies`]).
    pub fn build(&self, model: Arc<MleModel>, stage2: Vec<InferrerHandle>) -> Result<BuiltEnsemble, EnsembleError> {
        let (fallback, voter) = match &self.stage2 {
            Stage2Spec::Single(_) => {
                let h = stage2
                    .into_iter()
                    .next()
                    .ok_or_else(|| EnsembleError::InvalidInput("missing fallback inferrer".into()))?;
                (h, None)
            }
            Stage2Spec::Vote(_) => {
                let voter = Arc::new(MajorityVoter::new(VotingConfig::new(stage2)?));
                let batch = voter.config.voters.iter().map(InferrerHandle::batch_limit).min().unwrap_or(1);
                let h = InferrerHandle::new(format!("{}/vote", self.id), InferrerKind::Hybrid, batch, voter.clone());
                (h, Some(voter))
            }
        };
        let config = TwoStageConfig::new(model, fallback).with_band(self.band).with_route_unknown(self.route_unknown);
        let two_stage = Arc::new(TwoStage::new(self.id.clone(), config));
        let batch = two_stage.config.fallback.batch_limit();
        let handle = InferrerHandle::new(self.id.clone(), InferrerKind::Hybrid, batch, two_stage.clone());
        Ok(BuiltEnsemble { handle, two_stage, voter })
    }
}

/// A built hybrid plus access to its counters.
#[derive(Debug, Clone)]
pub struct BuiltEnsemble {
    pub handle: InferrerHandle,
    pub two_stage: Arc<TwoStage>,
    pub voter: Option<Arc<MajorityVoter>>,
}

impl BuiltEnsemble {
    /// Counter name and value pairs: stage usage, and vote outcomes when
    /// stage 2 votes.
    pub fn counters(&self) -> Vec<(&'static str, u64)> {
        let stages = self.two_stage.stage_counts();
        let mut out = vec![("stage1_answers", stages.stage1), ("stage2_answers", stages.stage2)];
        if let Some(v) = &self.voter {
            let s = v.stats();
            out.extend([("vote_decided", s.decided), ("vote_ties", s.ties), ("vote_no_definite", s.no_votes)]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FrequencyTable, GenderCounts, NameType};
    use crate::inferrer::MockInferrer;
    use crate::mle::Tau;
    use proptest::prelude::*;

    fn model(entries: &[(&str, u64, u64)]) -> Arc<MleModel> {
        let table = FrequencyTable::from_entries(
            NameType::First,
            "fixture",
            entries.iter().map(|(n, f, m)| (n.to_string(), GenderCounts::new(*f, *m))),
        );
        Arc::new(MleModel::train(table, Tau::default()).unwrap())
    }

    fn mock(answers: &[(&str, GenderLabel)]) -> Arc<MockInferrer> {
        let mut m = MockInferrer::new();
        for (name, label) in answers {
            m.insert(name, *label, None);
        }
        Arc::new(m)
    }

    fn pred(label: GenderLabel, p: Option<f64>) -> Prediction {
        Prediction::new(label, p, "t")
    }

    use GenderLabel::{Ambiguous as A, Female as F, Male as M, Unknown as U};

    #[test]
    fn outside_band_answers_from_stage_one() {
        let fallback = mock(&[("anna", M)]);
        let cfg = TwoStageConfig::new(model(&[("anna", 95, 5)]), InferrerHandle::mock("fb", fallback.clone()));
        let p = two_stage_infer(&cfg, "anna").unwrap();
        assert_eq!(p.label, F);
        assert_eq!(p.source, "two-stage/stage1");
        assert_eq!(p.p_female, Some(0.95));
        assert_eq!(fallback.calls(), 0);
    }

    #[test]
    fn inside_band_defers() {
        let fallback = mock(&[("kim", M), ("lo", F), ("hi", F)]);
        let cfg = TwoStageConfig::new(
            model(&[("kim", 60, 40), ("lo", 25, 75), ("hi", 75, 25)]),
            InferrerHandle::mock("fb", fallback.clone()),
        );
        let p = two_stage_infer(&cfg, "kim").unwrap();
        assert_eq!((p.label, p.source.as_str()), (M, "two-stage/stage2"));
        // endpoints are inside the band
        assert_eq!(two_stage_infer(&cfg, "lo").unwrap().label, F);
        assert_eq!(two_stage_infer(&cfg, "hi").unwrap().label, F);
        assert_eq!(fallback.calls(), 3);
    }

    #[test]
    fn unknown_names_route_to_stage_two() {
        let fallback = mock(&[("zed", M)]);
        let cfg = TwoStageConfig::new(model(&[("anna", 9, 1)]), InferrerHandle::mock("fb", fallback.clone()));
        let p = two_stage_infer(&cfg, "zed").unwrap();
        assert_eq!((p.label, p.source.as_str()), (M, "two-stage/stage2"));

        let cfg = cfg.with_route_unknown(false);
        let p = two_stage_infer(&cfg, "zed").unwrap();
        assert_eq!((p.label, p.source.as_str()), (U, "two-stage/stage1"));
        assert_eq!(fallback.calls(), 1);
    }

    #[test]
    fn batch_counts_stages_and_keeps_order() {
        let fallback = mock(&[("kim", F), ("zed", M)]);
        let hybrid = TwoStage::new(
            "h",
            TwoStageConfig::new(model(&[("anna", 99, 1), ("kim", 1, 1), ("tom", 0, 50)]), InferrerHandle::mock("fb", fallback.clone())),
        );
        let names: Vec<String> = ["anna", "kim", "tom", "zed"].iter().map(|s| s.to_string()).collect();
        let preds = Inferrer::infer(&hybrid, "h", &names).unwrap();
        let labels: Vec<_> = preds.iter().map(|p| p.label).collect();
        assert_eq!(labels, vec![F, F, M, M]);
        let sources: Vec<_> = preds.iter().map(|p| p.source.as_str()).collect();
        assert_eq!(sources, vec!["h/stage1", "h/stage2", "h/stage1", "h/stage2"]);
        assert_eq!(hybrid.stage_counts(), StageCounts { stage1: 2, stage2: 2 });
        assert_eq!(fallback.calls(), 2);
    }

    #[test]
    fn vote_examples() {
        let v = majority_vote(&[pred(F, Some(0.9)), pred(F, Some(0.7)), pred(M, Some(0.1))]).unwrap();
        assert_eq!(v.label, F);
        assert!((v.p_female.unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(majority_vote(&[pred(F, Some(1.0)), pred(M, Some(0.0)), pred(U, None)]).unwrap().label, U);
        assert_eq!(majority_vote(&[pred(U, None), pred(U, None), pred(U, None)]).unwrap().label, U);
        // a lone definite vote is a strict majority of definite votes
        assert_eq!(majority_vote(&[pred(M, Some(0.2)), pred(A, Some(0.5)), pred(U, None)]).unwrap().label, M);
        assert!(matches!(majority_vote(&[pred(F, Some(1.0)), pred(F, Some(1.0))]), Err(EnsembleError::InvalidInput(_))));
    }

    #[test]
    fn voters_must_be_three_and_distinct() {
        let m = mock(&[]);
        let h = |id: &str| InferrerHandle::mock(id, m.clone());
        assert!(VotingConfig::new(vec![h("a"), h("b")]).is_err());
        assert!(VotingConfig::new(vec![h("a"), h("b"), h("a")]).is_err());
        assert!(VotingConfig::new(vec![h("a"), h("b"), h("c")]).is_ok());
    }

    fn voting(answers: [(&str, GenderLabel); 3]) -> (VotingConfig, Vec<Arc<MockInferrer>>) {
        let mocks: Vec<_> = answers.iter().map(|(n, l)| mock(&[(n, *l)])).collect();
        let handles = mocks.iter().enumerate().map(|(i, m)| InferrerHandle::mock(format!("v{i}"), m.clone())).collect();
        (VotingConfig::new(handles).unwrap(), mocks)
    }

    #[test]
    fn voting_hybrid_examples() {
        let mle = model(&[("tom", 2, 98), ("kim", 5, 5)]);
        let (cfg, mocks) = voting([("tom", F), ("tom", F), ("tom", F)]);
        let p = voting_two_stage_infer(mle.clone(), &cfg, DeferBand::default(), "tom").unwrap();
        assert_eq!(p.label, M);
        assert!(mocks.iter().all(|m| m.calls() == 0));

        let (cfg, _) = voting([("kim", F), ("kim", F), ("kim", M)]);
        assert_eq!(voting_two_stage_infer(mle.clone(), &cfg, DeferBand::default(), "kim").unwrap().label, F);

        let (cfg, _) = voting([("zed", M), ("zed", M), ("zed", F)]);
        assert_eq!(voting_two_stage_infer(mle, &cfg, DeferBand::default(), "zed").unwrap().label, M);
    }

    #[test]
    fn voter_counts_ties() {
        let (cfg, _) = voting([("kim", F), ("kim", M), ("kim", U)]);
        let voter = MajorityVoter::new(cfg);
        let names = vec!["kim".to_string(), "nobody".to_string()];
        let preds = Inferrer::infer(&voter, "vote", &names).unwrap();
        assert!(preds.iter().all(|p| p.label == U));
        assert_eq!(voter.stats(), VoteStats { decided: 0, ties: 1, no_votes: 1 });
    }

    #[test]
    fn always_unknown_fallback_matches_bare_model() {
        let mle = model(&[("a", 99, 1), ("b", 50, 50), ("c", 20, 80), ("d", 3, 97), ("e", 80, 20)]);
        let cfg = TwoStageConfig::new(mle.clone(), InferrerHandle::mock("fb", mock(&[])));
        for (name, counts) in mle.table().iter() {
            let p = two_stage_infer(&cfg, name).unwrap();
            if DeferBand::default().contains(counts.female_share().unwrap()) {
                assert_eq!(p.label, U);
            } else {
                assert_eq!(p.label, mle.classify(name).label);
            }
        }
    }

    #[test]
    fn spec_from_config() {
        let kv = KeyValues::parse("id = hv\nmodel = m.tsv\nband = 0.2, 0.8\nvoters = a, b, c\n").unwrap();
        let spec = EnsembleSpec::from_key_values(&kv, Path::new("/cfg")).unwrap();
        assert_eq!(spec.model, PathBuf::from("/cfg/m.tsv"));
        assert_eq!(spec.band, DeferBand::new(0.2, 0.8).unwrap());
        assert_eq!(spec.dependencies(), vec!["a", "b", "c"]);

        let both = KeyValues::parse("id = x\nmodel = m\nfallback = a\nvoters = a, b, c\n").unwrap();
        assert!(EnsembleSpec::from_key_values(&both, Path::new(".")).is_err());
        let bad_band = KeyValues::parse("id = x\nmodel = m\nfallback = a\nband = 0.8, 0.2\n").unwrap();
        assert!(matches!(
            EnsembleSpec::from_key_values(&bad_band, Path::new(".")),
            Err(EnsembleError::InvalidBand { .. })
        ));
    }

    fn label_strategy() -> impl Strategy<Value = Prediction> {
        prop_oneof![
            (0.5f64..=1.0).prop_map(|p| pred(F, Some(p))),
            (0.0f64..0.5).prop_map(|p| pred(M, Some(p))),
            Just(pred(A, Some(0.5))),
            Just(pred(U, None)),
        ]
    }

    proptest! {
        #[test]
        fn vote_is_permutation_invariant(a in label_strategy(), b in label_strategy(), c in label_strategy()) {
            let base = majority_vote(&[a.clone(), b.clone(), c.clone()]).unwrap();
            for perm in [[&a, &c, &b], [&b, &a, &c], [&b, &c, &a], [&c, &a, &b], [&c, &b, &a]] {
                let v = majority_vote(&[perm[0].clone(), perm[1].clone(), perm[2].clone()]).unwrap();
                prop_assert_eq!(v.label, base.label);
                match (v.p_female, base.p_female) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }

        #[test]
        fn ambiguous_votes_like_unknown(a in label_strategy(), b in label_strategy()) {
            let with_a = majority_vote(&[a.clone(), b.clone(), pred(A, Some(0.5))]).unwrap();
            let with_u = majority_vote(&[a, b, pred(U, None)]).unwrap();
            prop_assert_eq!(with_a.label, with_u.label);
        }
    }
}
