//! Stage drivers from questionnaire profiles through the final report.
//!
//! Each stage reads its upstream artifact, skips already-present ids unless
//! forced, and rewrites its output sorted by id so that reruns with the same
//! seed are byte-identical.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{
    Backend, CallEvent, ChatProvider, OllamaEmbedder, OllamaProvider, OpenAiProvider,
    ScriptedProvider, SyntheticProvider,
};
use crate::config::PipelineConfig;
use crate::formats::{
    self, read_human_ratings, read_jsonl, write_json, write_jsonl, HumanRating,
};
use crate::judge::{judge_session, RubricScore};
use crate::orchestrator::{run_session, SessionSettings, SessionSpec};
use crate::profiler::{fill_questionnaire, generate_story, Demographics};
use crate::report::render_report;
use mi_core::code::{MiCode, TherapistCode};
use mi_core::dialogue::{AblationFlags, SessionRecord};
use mi_core::embed::Embedder;
use mi_core::lexical::{distinct_2, perplexity, self_bleu, token_entropy, LaplaceTrigram};
use mi_core::profile::{ClientProfile, QuestionnaireInstrument, SituationalStory};
use mi_core::stats::{
    correlation_two_sided_p, kendall_tau_b_with_p, paired_t_test, pearson_r,
    quadratic_weighted_kappa, significance_stars, spearman_rho,
};
use mi_core::strategy::{
    classify_reflection, code_entropy, complex_reflection_ratio, open_question_ratio,
    open_question_ratio_texts, reflection_depth, reflection_question_ratio,
    score_reflection_pair, strategy_adherence, COMPLEX_RATIO_THRESHOLD,
    OPEN_QUESTION_THRESHOLD, RQ_RATIO_THRESHOLD,
};
use mi_core::text::StopList;

/// What a stage did, for CLI reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub generated: usize,
    pub skipped: usize,
    pub path: PathBuf,
}

/// One session's metric row. Metrics a session cannot support (for example
/// reflection depth with zero reflections) serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub session_id: String,
    pub model_name: String,
    pub ablation: String,
    pub token_entropy: Option<f64>,
    pub distinct_2: Option<f64>,
    pub self_bleu: Option<f64>,
    pub perplexity: Option<f64>,
    pub code_entropy: Option<f64>,
    pub strategy_adherence: Option<f64>,
    pub reflection_depth: Option<f64>,
    pub complex_reflection_ratio: Option<f64>,
    pub open_question_ratio: Option<f64>,
    pub reflection_question_ratio: Option<f64>,
    pub complex_ratio_pass: Option<bool>,
    pub open_question_pass: Option<bool>,
    pub rq_ratio_pass: Option<bool>,
}

/// Ablation group key used in metrics records and report columns.
pub fn ablation_label(flags: AblationFlags) -> &'static str {
    match (flags.story_used, flags.mi_code_used) {
        (true, true) => "full",
        (false, true) => "no_story",
        (true, false) => "no_mi",
        (false, false) => "no_both",
    }
}

/// Stable per-item seed: independent of generation order, so resumed and
/// fresh runs derive identical seeds.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Provider construction, shared where stateful (HTTP) and per-item where
/// the reply is a pure function of (seed, prompt).
enum ProviderFactory {
    Scripted { fixtures: Arc<HashMap<String, String>> },
    Shared(Arc<dyn ChatProvider>),
}

impl ProviderFactory {
    fn from_config(config: &PipelineConfig) -> Result<Self> {
        let b = &config.backend;
        match b.kind.as_str() {
            "scripted" => {
                let fixtures = match &b.fixture_path {
                    Some(p) => {
                        let loaded = ScriptedProvider::from_path(p)
                            .with_context(|| format!("loading fixtures from {}", p.display()))?;
                        loaded.into_fixtures()
                    }
                    None => HashMap::new(),
                };
                Ok(ProviderFactory::Scripted { fixtures: Arc::new(fixtures) })
            }
            "openai" => {
                let key = std::env::var(&b.api_key_env).ok();
                let provider = OpenAiProvider::new(
                    b.base_url.clone().expect("validated"),
                    b.model.clone().expect("validated"),
                    key,
                )?;
                Ok(ProviderFactory::Shared(Arc::new(provider)))
            }
            "ollama" => {
                let provider = OllamaProvider::new(
                    b.base_url.clone().expect("validated"),
                    b.model.clone().expect("validated"),
                )?;
                Ok(ProviderFactory::Shared(Arc::new(provider)))
            }
            other => bail!("unknown backend kind {other}"),
        }
    }

    fn for_item(&self, item_seed: u64) -> Arc<dyn ChatProvider> {
        match self {
            ProviderFactory::Scripted { fixtures } => {
                let scripted = ScriptedProvider::new((**fixtures).clone())
                    .with_fallback(Box::new(SyntheticProvider::new(item_seed)));
                Arc::new(scripted)
            }
            ProviderFactory::Shared(p) => Arc::clone(p),
        }
    }
}

/// Index-pulling parallel map preserving input order; the first error wins.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let n = items.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let workers = workers.min(n);
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<R>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

pub struct Pipeline {
    pub config: PipelineConfig,
    instrument: QuestionnaireInstrument,
}

const IDENTITIES: [&str; 4] = ["Adult", "College student", "Working parent", "Shift worker"];

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate().map_err(|e| anyhow!(e))?;
        let instrument = formats::load_instrument(config.instrument_path.as_deref())?;
        Ok(Pipeline { config, instrument })
    }

    pub fn instrument(&self) -> &QuestionnaireInstrument {
        &self.instrument
    }

    fn require<T: serde::de::DeserializeOwned>(&self, name: &str, hint: &str) -> Result<Vec<T>> {
        let path = self.config.path_in_output(name);
        if !path.exists() {
            bail!("{} is missing; {hint}", path.display());
        }
        Ok(read_jsonl(&path)?)
    }

    /// Fill questionnaires for every planned profile id.
    pub fn cmd_profile(&self, force: bool) -> Result<StageOutcome> {
        let path = self.config.path_in_output("profiles.jsonl");
        let mut existing: BTreeMap<String, ClientProfile> = if path.exists() {
            read_jsonl::<ClientProfile>(&path)?
                .into_iter()
                .map(|p| (p.profile_id.clone(), p))
                .collect()
        } else {
            BTreeMap::new()
        };
        let factory = ProviderFactory::from_config(&self.config)?;
        let todo: Vec<(usize, String)> = (0..self.config.corpus.num_profiles)
            .map(|i| (i, format!("profile-{i:04}")))
            .filter(|(_, id)| force || !existing.contains_key(id))
            .collect();
        let skipped = self.config.corpus.num_profiles - todo.len();
        let generated = parallel_map(&todo, self.config.backend.concurrency, |(i, id)| {
            let seed = derive_seed(self.config.seed, &format!("profile:{id}"));
            let backend = Backend::new(factory.for_item(seed), self.config.generation_params());
            let demographics = Demographics {
                identity: IDENTITIES[(seed % IDENTITIES.len() as u64) as usize].to_string(),
                age: 18 + ((derive_seed(seed, "age") % 48) as u8),
            };
            fill_questionnaire(&self.instrument, &demographics, id, &backend)
                .with_context(|| format!("profiling {id} (index {i})"))
        })?;
        let count = generated.len();
        for p in generated {
            existing.insert(p.profile_id.clone(), p);
        }
        let all: Vec<ClientProfile> = existing.into_values().collect();
        write_jsonl(&path, &all)?;
        Ok(StageOutcome { generated: count, skipped, path })
    }

    /// Expand every profile into a situational story.
    pub fn cmd_story(&self, force: bool) -> Result<StageOutcome> {
        let profiles: Vec<ClientProfile> =
            self.require("profiles.jsonl", "run the profile stage first")?;
        let path = self.config.path_in_output("stories.jsonl");
        let mut existing: BTreeMap<String, SituationalStory> = if path.exists() {
            read_jsonl::<SituationalStory>(&path)?
                .into_iter()
                .map(|s| (s.profile_id.clone(), s))
                .collect()
        } else {
            BTreeMap::new()
        };
        let factory = ProviderFactory::from_config(&self.config)?;
        let todo: Vec<&ClientProfile> = profiles
            .iter()
            .filter(|p| force || !existing.contains_key(&p.profile_id))
            .collect();
        let skipped = profiles.len() - todo.len();
        let generated = parallel_map(&todo, self.config.backend.concurrency, |profile| {
            let seed = derive_seed(self.config.seed, &format!("story:{}", profile.profile_id));
            let backend = Backend::new(factory.for_item(seed), self.config.generation_params());
            generate_story(profile, &self.instrument, &backend)
                .with_context(|| format!("story for {}", profile.profile_id))
        })?;
        let count = generated.len();
        for s in generated {
            existing.insert(s.profile_id.clone(), s);
        }
        let all: Vec<SituationalStory> = existing.into_values().collect();
        write_jsonl(&path, &all)?;
        Ok(StageOutcome { generated: count, skipped, path })
    }

    /// Run sessions for every profile x dialogue slot. Also rewrites the
    /// per-call event log, which is always produced alongside sessions.
    pub fn cmd_simulate(&self, force: bool) -> Result<StageOutcome> {
        let mut profiles: Vec<ClientProfile> =
            self.require("profiles.jsonl", "run the profile stage first")?;
        profiles.sort_by(|a, b| a.profile_id.cmp(&b.profile_id));
        if profiles.len() < self.config.corpus.num_profiles {
            bail!(
                "need {} profiles but found {}; run the profile stage first",
                self.config.corpus.num_profiles,
                profiles.len()
            );
        }
        profiles.truncate(self.config.corpus.num_profiles);

        let flags = self.config.ablation.flags();
        let stories: HashMap<String, SituationalStory> = if flags.story_used {
            let list: Vec<SituationalStory> =
                self.require("stories.jsonl", "run the story stage first")?;
            list.into_iter().map(|s| (s.profile_id.clone(), s)).collect()
        } else {
            HashMap::new()
        };

        let sessions_path = self.config.path_in_output("sessions.jsonl");
        let mut existing: BTreeMap<String, SessionRecord> = if sessions_path.exists() {
            read_jsonl::<SessionRecord>(&sessions_path)?
                .into_iter()
                .map(|s| (s.session_id.clone(), s))
                .collect()
        } else {
            BTreeMap::new()
        };
        let events_path = self.config.path_in_output("events.jsonl");
        let mut event_groups: BTreeMap<String, Vec<CallEvent>> = BTreeMap::new();
        if events_path.exists() {
            for e in read_jsonl::<CallEvent>(&events_path)? {
                event_groups.entry(e.session_id.clone()).or_default().push(e);
            }
        }

        struct Plan<'a> {
            session_id: String,
            profile: &'a ClientProfile,
            story: Option<&'a SituationalStory>,
        }
        let mut plans = Vec::new();
        for (p_idx, profile) in profiles.iter().enumerate() {
            let story = stories.get(&profile.profile_id);
            if flags.story_used && story.is_none() {
                bail!("no story for {}; run the story stage first", profile.profile_id);
            }
            for d in 0..self.config.corpus.dialogues_per_profile {
                plans.push(Plan {
                    session_id: format!("session-{p_idx:04}-{d:02}"),
                    profile,
                    story: if flags.story_used { story } else { None },
                });
            }
        }
        let total = plans.len();
        let todo: Vec<Plan> = plans
            .into_iter()
            .filter(|p| force || !existing.contains_key(&p.session_id))
            .collect();
        let skipped = total - todo.len();

        let factory = ProviderFactory::from_config(&self.config)?;
        let settings =
            SessionSettings { params: self.config.session.clone(), ablation: flags };
        let model_name = self.config.model_name();
        let generated: Vec<(SessionRecord, Vec<CallEvent>)> =
            parallel_map(&todo, self.config.backend.concurrency, |plan| {
                let seed =
                    derive_seed(self.config.seed, &format!("session:{}", plan.session_id));
                let backend =
                    Backend::new(factory.for_item(seed), self.config.generation_params());
                let spec = SessionSpec {
                    session_id: plan.session_id.clone(),
                    profile_ref: plan.profile.profile_id.clone(),
                    story_ref: plan.story.map(|s| s.profile_id.clone()),
                    model_name: model_name.clone(),
                    seed,
                };
                let record = run_session(&spec, &settings, plan.profile, plan.story, &backend)
                    .map_err(|e| anyhow!("{e}"))
                    .with_context(|| format!("simulating {}", plan.session_id))?;
                Ok((record, backend.events()))
            })?;

        let count = generated.len();
        for (record, events) in generated {
            event_groups.insert(record.session_id.clone(), events);
            existing.insert(record.session_id.clone(), record);
        }
        let all: Vec<SessionRecord> = existing.into_values().collect();
        write_jsonl(&sessions_path, &all)?;
        // Events follow the sorted session order; groups for sessions that
        // no longer exist are dropped.
        let mut events_out = Vec::new();
        for record in &all {
            if let Some(group) = event_groups.get(&record.session_id) {
                events_out.extend(group.iter().cloned());
            }
        }
        write_jsonl(&events_path, &events_out)?;
        Ok(StageOutcome { generated: count, skipped, path: sessions_path })
    }

    fn embedder(&self) -> Result<Box<dyn Embedder + Sync>> {
        let e = &self.config.embedder;
        match e.kind.as_str() {
            "stub" => Ok(Box::new(formats::load_stub_embedder(e.overrides_path.as_deref())?)),
            "ollama" => Ok(Box::new(OllamaEmbedder::new(
                e.base_url.clone().expect("validated"),
                e.model.clone().expect("validated"),
            )?)),
            other => bail!("unknown embedder kind {other}"),
        }
    }

    /// Fit the perplexity model: on the reference corpus when configured,
    /// otherwise on the evaluated sessions themselves.
    fn fit_scorer(&self, sessions: &[SessionRecord]) -> Result<LaplaceTrigram> {
        match &self.config.reference_corpus {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading reference corpus {}", path.display()))?;
                let lines: Vec<&str> =
                    text.lines().filter(|l| !l.trim().is_empty()).collect();
                LaplaceTrigram::fit(lines.iter().copied())
                    .map_err(|e| anyhow!("fitting reference corpus: {e}"))
            }
            None => {
                let texts: Vec<&str> = sessions
                    .iter()
                    .flat_map(|s| s.utterances.iter().map(|u| u.text.as_str()))
                    .collect();
                LaplaceTrigram::fit(texts.iter().copied())
                    .map_err(|e| anyhow!("fitting fallback corpus: {e}"))
            }
        }
    }

    /// Compute all ten metrics plus threshold flags for every session.
    pub fn cmd_eval(&self, force: bool) -> Result<StageOutcome> {
        let sessions: Vec<SessionRecord> =
            self.require("sessions.jsonl", "run the simulate stage first")?;
        let path = self.config.path_in_output("metrics.jsonl");
        let mut existing: BTreeMap<String, MetricsRecord> = if path.exists() {
            read_jsonl::<MetricsRecord>(&path)?
                .into_iter()
                .map(|m| (m.session_id.clone(), m))
                .collect()
        } else {
            BTreeMap::new()
        };
        let scorer = self.fit_scorer(&sessions)?;
        let embedder = self.embedder()?;
        let stops = formats::load_stop_list(self.config.stop_list.as_deref())?;
        let todo: Vec<&SessionRecord> = sessions
            .iter()
            .filter(|s| force || !existing.contains_key(&s.session_id))
            .collect();
        let skipped = sessions.len() - todo.len();
        let computed = parallel_map(&todo, self.config.backend.concurrency, |session| {
            Ok(evaluate_session(session, &scorer, embedder.as_ref(), &stops))
        })?;
        let count = computed.len();
        for m in computed {
            existing.insert(m.session_id.clone(), m);
        }
        let live: HashSet<&str> = sessions.iter().map(|s| s.session_id.as_str()).collect();
        let all: Vec<MetricsRecord> = existing
            .into_values()
            .filter(|m| live.contains(m.session_id.as_str()))
            .collect();
        write_jsonl(&path, &all)?;
        Ok(StageOutcome { generated: count, skipped, path })
    }

    /// Rubric-score every session with the judge model.
    pub fn cmd_judge(&self, force: bool, include_codes: bool) -> Result<StageOutcome> {
        let sessions: Vec<SessionRecord> =
            self.require("sessions.jsonl", "run the simulate stage first")?;
        let path = self.config.path_in_output("judgments.jsonl");
        let mut existing: BTreeMap<String, RubricScore> = if path.exists() {
            read_jsonl::<RubricScore>(&path)?
                .into_iter()
                .map(|j| (j.session_id.clone(), j))
                .collect()
        } else {
            BTreeMap::new()
        };
        let factory = ProviderFactory::from_config(&self.config)?;
        let todo: Vec<&SessionRecord> = sessions
            .iter()
            .filter(|s| force || !existing.contains_key(&s.session_id))
            .collect();
        let skipped = sessions.len() - todo.len();
        let judged = parallel_map(&todo, self.config.backend.concurrency, |session| {
            let seed = derive_seed(self.config.seed, &format!("judge:{}", session.session_id));
            let backend = Backend::new(factory.for_item(seed), self.config.generation_params());
            judge_session(session, &backend, include_codes)
                .with_context(|| format!("judging {}", session.session_id))
        })?;
        let count = judged.len();
        for j in judged {
            existing.insert(j.session_id.clone(), j);
        }
        let live: HashSet<&str> = sessions.iter().map(|s| s.session_id.as_str()).collect();
        let all: Vec<RubricScore> = existing
            .into_values()
            .filter(|j| live.contains(j.session_id.as_str()))
            .collect();
        write_jsonl(&path, &all)?;
        Ok(StageOutcome { generated: count, skipped, path })
    }

    /// Inter-annotator agreement plus judge-human alignment statistics.
    pub fn cmd_stats(&self, rating_files: &[PathBuf]) -> Result<(PathBuf, PathBuf)> {
        if rating_files.is_empty() {
            bail!("the stats stage needs at least one --ratings CSV");
        }
        let mut ratings: Vec<HumanRating> = Vec::new();
        for file in rating_files {
            ratings.extend(read_human_ratings(file)?);
        }
        let judgments: Vec<RubricScore> =
            self.require("judgments.jsonl", "run the judge stage first")?;

        let agreement = agreement_report(&ratings)?;
        let agreement_path = self.config.path_in_output("agreement.json");
        write_json(&agreement_path, &agreement)?;

        let correlations = correlations_report(&judgments, &ratings)?;
        let correlations_path = self.config.path_in_output("correlations.json");
        write_json(&correlations_path, &correlations)?;
        Ok((agreement_path, correlations_path))
    }

    /// Render the Markdown report over metrics and (if present) judgments.
    pub fn cmd_report(&self) -> Result<PathBuf> {
        let metrics: Vec<MetricsRecord> =
            self.require("metrics.jsonl", "run the eval stage first")?;
        let judgments_path = self.config.path_in_output("judgments.jsonl");
        let judgments: Vec<RubricScore> =
            if judgments_path.exists() { read_jsonl(&judgments_path)? } else { Vec::new() };
        let text = render_report(&metrics, &judgments);
        let path = self.config.path_in_output("report.md");
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// Every stage except stats (which needs external human ratings).
    pub fn run_all(&self, force: bool) -> Result<()> {
        self.cmd_profile(force)?;
        self.cmd_story(force)?;
        self.cmd_simulate(force)?;
        self.cmd_eval(force)?;
        self.cmd_judge(force, false)?;
        self.cmd_report()?;
        Ok(())
    }
}

/// All ten metrics for one session. Question typing prefers explicit
/// open/closed subtypes when every question carries one; otherwise question
/// utterance texts are classified lexically.
pub fn evaluate_session(
    session: &SessionRecord,
    scorer: &LaplaceTrigram,
    embedder: &dyn Embedder,
    stops: &StopList,
) -> MetricsRecord {
    let texts: Vec<&str> = session.utterances.iter().map(|u| u.text.as_str()).collect();
    let categories = session.therapist_categories();

    let reflection_scores: Vec<_> = session
        .reflection_pairs()
        .iter()
        .filter_map(|(client, reflection)| {
            score_reflection_pair(client, reflection, embedder, stops).ok()
        })
        .collect();
    let classes: Vec<_> = reflection_scores.iter().map(|&s| classify_reflection(s)).collect();

    let question_codes: Vec<TherapistCode> = session
        .therapist_codes()
        .into_iter()
        .filter(|c| matches!(c, TherapistCode::Question(_)))
        .collect();
    let open_ratio = if question_codes.is_empty() {
        None
    } else if question_codes.iter().all(|c| matches!(c, TherapistCode::Question(Some(_)))) {
        open_question_ratio(&question_codes).ok()
    } else {
        let question_texts: Vec<&str> = session
            .utterances
            .iter()
            .filter(|u| matches!(u.code, MiCode::Therapist(TherapistCode::Question(_))))
            .map(|u| u.text.as_str())
            .collect();
        open_question_ratio_texts(&question_texts).ok()
    };

    let complex_ratio = complex_reflection_ratio(&classes).ok();
    let rq_ratio = reflection_question_ratio(&categories).ok();
    MetricsRecord {
        session_id: session.session_id.clone(),
        model_name: session.model_name.clone(),
        ablation: ablation_label(session.ablation).to_string(),
        token_entropy: token_entropy(&texts).ok(),
        distinct_2: distinct_2(&texts).ok(),
        self_bleu: self_bleu(&texts).ok(),
        perplexity: perplexity(&texts, scorer).ok(),
        code_entropy: code_entropy(&categories).ok(),
        strategy_adherence: strategy_adherence(&categories).ok(),
        reflection_depth: reflection_depth(&reflection_scores).ok(),
        complex_reflection_ratio: complex_ratio,
        open_question_ratio: open_ratio,
        reflection_question_ratio: rq_ratio,
        complex_ratio_pass: complex_ratio.map(|v| v > COMPLEX_RATIO_THRESHOLD),
        open_question_pass: open_ratio.map(|v| v > OPEN_QUESTION_THRESHOLD),
        rq_ratio_pass: rq_ratio.map(|v| v > RQ_RATIO_THRESHOLD),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEntry {
    pub kappa: f64,
    pub degenerate: bool,
}

/// Inter-annotator agreement between exactly two annotators: pooled over
/// all dimensions, per dimension, and the mean of per-dimension kappas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotators: Vec<String>,
    pub n_sessions: usize,
    pub pooled_kappa: KappaEntry,
    pub per_dimension_kappa: BTreeMap<String, KappaEntry>,
    pub dimension_averaged_kappa: f64,
}

fn agreement_report(ratings: &[HumanRating]) -> Result<AgreementReport> {
    let mut annotators: Vec<String> =
        ratings.iter().map(|r| r.annotator.clone()).collect::<HashSet<_>>().into_iter().collect();
    annotators.sort();
    if annotators.len() != 2 {
        bail!("agreement needs exactly 2 annotators, found {}", annotators.len());
    }
    let by_key: HashMap<(&str, &str), &HumanRating> =
        ratings.iter().map(|r| ((r.session_id.as_str(), r.annotator.as_str()), r)).collect();
    let mut shared: Vec<&str> = ratings
        .iter()
        .map(|r| r.session_id.as_str())
        .filter(|sid| {
            by_key.contains_key(&(sid, annotators[0].as_str()))
                && by_key.contains_key(&(sid, annotators[1].as_str()))
        })
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    shared.sort();
    if shared.len() < 2 {
        bail!("agreement needs at least 2 sessions rated by both annotators");
    }

    let mut pooled_a: Vec<i64> = Vec::new();
    let mut pooled_b: Vec<i64> = Vec::new();
    let mut per_dimension = BTreeMap::new();
    let mut kappa_sum = 0.0;
    for dim in formats::DIMENSIONS {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for sid in &shared {
            a.push(by_key[&(*sid, annotators[0].as_str())].dimension(dim).unwrap() as i64);
            b.push(by_key[&(*sid, annotators[1].as_str())].dimension(dim).unwrap() as i64);
        }
        pooled_a.extend(&a);
        pooled_b.extend(&b);
        let k = quadratic_weighted_kappa(&a, &b, 1, 5).map_err(|e| anyhow!("{dim}: {e}"))?;
        kappa_sum += k.kappa;
        per_dimension
            .insert(dim.to_string(), KappaEntry { kappa: k.kappa, degenerate: k.degenerate });
    }
    let pooled = quadratic_weighted_kappa(&pooled_a, &pooled_b, 1, 5)
        .map_err(|e| anyhow!("pooled: {e}"))?;
    Ok(AgreementReport {
        annotators,
        n_sessions: shared.len(),
        pooled_kappa: KappaEntry { kappa: pooled.kappa, degenerate: pooled.degenerate },
        per_dimension_kappa: per_dimension,
        dimension_averaged_kappa: kappa_sum / formats::DIMENSIONS.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CorrelationEntry {
    pub n: usize,
    pub pearson_r: Option<f64>,
    pub pearson_p: Option<f64>,
    pub pearson_stars: String,
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub spearman_stars: String,
    pub kendall_tau: Option<f64>,
    pub kendall_p: Option<f64>,
    pub kendall_stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PairedTEntry {
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub stars: String,
    pub note: Option<String>,
}

/// Judge-vs-human alignment: per-dimension and overall correlations, plus a
/// paired t-test of judge minus human scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationsReport {
    pub judge_model: String,
    pub n_sessions: usize,
    pub per_dimension: BTreeMap<String, CorrelationEntry>,
    pub overall: CorrelationEntry,
    pub paired_t: BTreeMap<String, PairedTEntry>,
}

fn correlation_entry(judge: &[f64], human: &[f64]) -> CorrelationEntry {
    let n = judge.len();
    let mut entry = CorrelationEntry { n, ..CorrelationEntry::default() };
    if let Ok(r) = pearson_r(judge, human) {
        entry.pearson_r = Some(r);
        if let Ok(p) = correlation_two_sided_p(r, n) {
            entry.pearson_p = Some(p);
            entry.pearson_stars = significance_stars(p).to_string();
        }
    }
    if let Ok(rho) = spearman_rho(judge, human) {
        entry.spearman_rho = Some(rho);
        if let Ok(p) = correlation_two_sided_p(rho, n) {
            entry.spearman_p = Some(p);
            entry.spearman_stars = significance_stars(p).to_string();
        }
    }
    if let Ok((tau, _z, p)) = kendall_tau_b_with_p(judge, human) {
        entry.kendall_tau = Some(tau);
        entry.kendall_p = Some(p);
        entry.kendall_stars = significance_stars(p).to_string();
    }
    entry
}

fn paired_t_entry(judge: &[f64], human: &[f64]) -> PairedTEntry {
    match paired_t_test(judge, human) {
        Ok(t) => PairedTEntry {
            t: Some(t.t),
            df: Some(t.df),
            p: Some(t.p),
            stars: significance_stars(t.p).to_string(),
            note: None,
        },
        Err(e) => PairedTEntry { note: Some(e.to_string()), ..PairedTEntry::default() },
    }
}

fn correlations_report(
    judgments: &[RubricScore],
    ratings: &[HumanRating],
) -> Result<CorrelationsReport> {
    let judged: HashMap<&str, &RubricScore> =
        judgments.iter().map(|j| (j.session_id.as_str(), j)).collect();
    // Human value per (session, dimension) = mean across annotators.
    let mut human_by_session: BTreeMap<&str, Vec<&HumanRating>> = BTreeMap::new();
    for r in ratings {
        if judged.contains_key(r.session_id.as_str()) {
            human_by_session.entry(r.session_id.as_str()).or_default().push(r);
        }
    }
    if human_by_session.len() < 2 {
        bail!(
            "alignment needs at least 2 sessions present in both judgments and ratings, found {}",
            human_by_session.len()
        );
    }

    let mut per_dimension = BTreeMap::new();
    let mut paired_t = BTreeMap::new();
    let mut judge_overall: Vec<f64> = vec![0.0; human_by_session.len()];
    let mut human_overall: Vec<f64> = vec![0.0; human_by_session.len()];
    for dim in formats::DIMENSIONS {
        let mut judge_vals = Vec::new();
        let mut human_vals = Vec::new();
        for (i, (sid, raters)) in human_by_session.iter().enumerate() {
            let j = judged[sid].dimension(dim).unwrap() as f64;
            let h = raters.iter().map(|r| r.dimension(dim).unwrap() as f64).sum::<f64>()
                / raters.len() as f64;
            judge_vals.push(j);
            human_vals.push(h);
            judge_overall[i] += j / 6.0;
            human_overall[i] += h / 6.0;
        }
        per_dimension.insert(dim.to_string(), correlation_entry(&judge_vals, &human_vals));
        paired_t.insert(dim.to_string(), paired_t_entry(&judge_vals, &human_vals));
    }
    let overall = correlation_entry(&judge_overall, &human_overall);
    paired_t.insert("overall".to_string(), paired_t_entry(&judge_overall, &human_overall));
    Ok(CorrelationsReport {
        judge_model: judgments
            .first()
            .map(|j| j.judge_model.clone())
            .unwrap_or_else(|| "unknown".to_string()),
        n_sessions: human_by_session.len(),
        per_dimension,
        overall,
        paired_t,
    })
}
