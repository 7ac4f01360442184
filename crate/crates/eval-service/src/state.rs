use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use chrono::Utc;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use majinlink_core::evaluation::{
    append_label, latest_per_evaluator, pr_curve, read_labels, resolve_labels, CandidateKey, EvalLabel,
    EvaluationError, Label, PlanTask, Resampler,
};
use majinlink_core::jsonl::read_jsonl;

use crate::{ServiceConfig, ServiceError, EXCERPT_PARAGRAPHS};

/// Time source for leases; tests drive a manual clock.
#[derive(Debug)]
pub enum Clock {
    System,
    Manual { base: Instant, offset: Mutex<Duration> },
}

impl Clock {
    pub fn manual() -> Self {
        Clock::Manual {
            base: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        }
    }

    pub fn now(&self) -> Instant {
        match self {
            Clock::System => Instant::now(),
            Clock::Manual { base, offset } => *base + *offset.lock().unwrap_or_else(|e| e.into_inner()),
        }
    }

    /// Moves a manual clock forward; no-op for the system clock.
    pub fn advance(&self, by: Duration) {
        if let Clock::Manual { offset, .. } = self {
            *offset.lock().unwrap_or_else(|e| e.into_inner()) += by;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelingTask {
    pub candidate: CandidateKey,
    pub bin: usize,
    pub title_score: f64,
    pub work_title: String,
    pub author_names: Vec<String>,
    pub excerpt_item_id: Option<String>,
    /// Up to the first 100 paragraphs of one item of the cluster.
    pub excerpt: Vec<String>,
    pub status: &'static str,
    pub lease_seconds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextTask {
    NoPlan,
    Done,
    AllLeased { retry_after: Duration },
    Task(LabelingTask),
}

#[derive(Debug, thiserror::Error)]
pub enum SubmitError {
    #[error("no sampling plan loaded")]
    NoPlan,
    #[error("candidate {0} is not in the plan")]
    UnknownCandidate(CandidateKey),
    #[error(transparent)]
    Store(EvaluationError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinProgress {
    pub bin: usize,
    pub labeled: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub threshold: f64,
    pub precision: Option<f64>,
    pub precision_ci: Option<(f64, f64)>,
    pub recall: Option<f64>,
    pub recall_ci: Option<(f64, f64)>,
    pub retention: f64,
    pub conclusive: usize,
    pub unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stats {
    /// Plan tasks with at least one label.
    pub labeled: usize,
    pub total: usize,
    pub complete: bool,
    /// Distinct (candidate, evaluator) labels.
    pub stored_labels: usize,
    pub bins: Vec<BinProgress>,
    /// Absent until at least one yes/no label exists.
    pub curve: Option<CurveSummary>,
}

struct Inner {
    plan: Option<Vec<PlanTask>>,
    index: HashMap<CandidateKey, usize>,
    bins: Vec<usize>,
    labels: BTreeMap<(CandidateKey, String), EvalLabel>,
    leases: HashMap<usize, (String, Instant)>,
    cursor: usize,
    excerpts: HashMap<usize, (Option<String>, Vec<String>)>,
    rng: ChaCha8Rng,
}

impl Inner {
    fn is_labeled(&self, task: usize, plan: &[PlanTask]) -> bool {
        let key = &plan[task].candidate;
        self.labels
            .range((key.clone(), String::new())..)
            .next()
            .is_some_and(|((k, _), _)| k == key)
    }
}

pub struct ServiceState {
    config: ServiceConfig,
    clock: Clock,
    inner: Mutex<Inner>,
}

impl ServiceState {
    /// Builds the state and replays any labels already in the store.
    pub fn new(config: ServiceConfig, plan: Option<Vec<PlanTask>>, clock: Clock) -> Result<Self, ServiceError> {
        let mut index = HashMap::new();
        let plan = plan.map(|tasks| {
            let mut kept = Vec::with_capacity(tasks.len());
            for t in tasks {
                if index.contains_key(&t.candidate) {
                    log::warn!("duplicate plan task {} ignored", t.candidate);
                    continue;
                }
                index.insert(t.candidate.clone(), kept.len());
                kept.push(t);
            }
            kept
        });
        let bins: Vec<usize> = plan
            .iter()
            .flatten()
            .map(|t| t.bin)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let stored = read_labels(&config.labels_path)?;
        let mut labels = BTreeMap::new();
        for l in latest_per_evaluator(&stored) {
            if !index.contains_key(&l.candidate) {
                log::warn!("stored label for {} is not in the plan", l.candidate);
            }
            labels.insert((l.candidate.clone(), l.evaluator_id.clone()), l.clone());
        }

        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(ServiceState {
            config,
            clock,
            inner: Mutex::new(Inner {
                plan,
                index,
                bins,
                labels,
                leases: HashMap::new(),
                cursor: 0,
                excerpts: HashMap::new(),
                rng,
            }),
        })
    }

    /// Reads the plan from a JSON Lines file of [`PlanTask`]s.
    pub fn from_files(config: ServiceConfig, plan_path: Option<&Path>) -> Result<Self, ServiceError> {
        let plan = plan_path.map(read_jsonl::<PlanTask>).transpose()?;
        ServiceState::new(config, plan, Clock::System)
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Current deduplicated labels, ordered by (candidate, evaluator).
    pub fn labels(&self) -> Vec<EvalLabel> {
        self.lock().labels.values().cloned().collect()
    }

    fn excerpt(&self, inner: &mut Inner, task: usize, item_ids: &[String]) -> (Option<String>, Vec<String>) {
        if let Some(cached) = inner.excerpts.get(&task) {
            return cached.clone();
        }
        let item = item_ids.choose(&mut inner.rng).cloned();
        let paragraphs = match (&self.config.texts_dir, &item) {
            (Some(dir), Some(id)) => match std::fs::read_to_string(dir.join(format!("{id}.txt"))) {
                Ok(text) => text
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .take(EXCERPT_PARAGRAPHS)
                    .map(str::to_string)
                    .collect(),
                Err(e) => {
                    log::warn!("no excerpt for item {id}: {e}");
                    Vec::new()
                }
            },
            _ => Vec::new(),
        };
        let entry = (item, paragraphs);
        inner.excerpts.insert(task, entry.clone());
        entry
    }

    /// Leases an unlabeled task to `evaluator`, cycling through bins. An
    /// evaluator holding a live lease on an unlabeled task gets that task back.
    pub fn next_task(&self, evaluator: &str) -> NextTask {
        let now = self.clock.now();
        let lease = self.config.lease;
        let mut guard = self.lock();
        let inner = &mut *guard;
        let Some(plan) = inner.plan.take() else {
            return NextTask::NoPlan;
        };
        inner.leases.retain(|_, (_, expiry)| *expiry > now);

        let held = inner
            .leases
            .iter()
            .find(|(t, (who, _))| who == evaluator && !inner.is_labeled(**t, &plan))
            .map(|(t, _)| *t);
        let chosen = if let Some(t) = held {
            Some(t)
        } else {
            let unlabeled: Vec<usize> = (0..plan.len()).filter(|t| !inner.is_labeled(*t, &plan)).collect();
            if unlabeled.is_empty() {
                inner.plan = Some(plan);
                return NextTask::Done;
            }
            let mut pick = None;
            let n = inner.bins.len();
            for off in 0..n {
                let bin = inner.bins[(inner.cursor + off) % n];
                let found = unlabeled
                    .iter()
                    .copied()
                    .find(|t| plan[*t].bin == bin && !inner.leases.contains_key(t));
                if let Some(t) = found {
                    inner.cursor = (inner.cursor + off + 1) % n;
                    pick = Some(t);
                    break;
                }
            }
            if pick.is_none() {
                let soonest = inner.leases.values().map(|(_, e)| *e).min().unwrap_or(now);
                inner.plan = Some(plan);
                return NextTask::AllLeased {
                    retry_after: soonest.saturating_duration_since(now),
                };
            }
            pick
        };
        let t = chosen.expect("a task was chosen above");
        inner.leases.insert(t, (evaluator.to_string(), now + lease));
        let (excerpt_item_id, excerpt) = self.excerpt(inner, t, &plan[t].item_ids);
        let task = &plan[t];
        let out = LabelingTask {
            candidate: task.candidate.clone(),
            bin: task.bin,
            title_score: task.title_score,
            work_title: task.work_title.clone(),
            author_names: task.author_names.clone(),
            excerpt_item_id,
            excerpt,
            status: "unlabeled",
            lease_seconds: lease.as_secs(),
        };
        inner.plan = Some(plan);
        NextTask::Task(out)
    }

    /// Persists a label, then updates the in-memory view. A repeat by the
    /// same evaluator replaces the earlier label. Returns the number of
    /// stored (candidate, evaluator) labels.
    pub fn submit(&self, key: CandidateKey, label: Label, evaluator: String) -> Result<usize, SubmitError> {
        let mut inner = self.lock();
        let Some(task) = inner.plan.as_ref().map(|_| inner.index.get(&key).copied()) else {
            return Err(SubmitError::NoPlan);
        };
        let task = task.ok_or_else(|| SubmitError::UnknownCandidate(key.clone()))?;
        let record = EvalLabel {
            candidate: key.clone(),
            label,
            evaluator_id: evaluator.clone(),
            timestamp: Utc::now(),
        };
        append_label(&self.config.labels_path, &record).map_err(SubmitError::Store)?;
        inner.labels.insert((key, evaluator.clone()), record);
        if inner.leases.get(&task).is_some_and(|(who, _)| *who == evaluator) {
            inner.leases.remove(&task);
        }
        Ok(inner.labels.len())
    }

    pub fn stats(&self) -> Stats {
        let (scores, labels, bins) = {
            let inner = self.lock();
            let plan = inner.plan.as_deref().unwrap_or_default();
            let mut bins: BTreeMap<usize, BinProgress> = BTreeMap::new();
            for (t, task) in plan.iter().enumerate() {
                let p = bins.entry(task.bin).or_insert(BinProgress {
                    bin: task.bin,
                    labeled: 0,
                    total: 0,
                });
                p.total += 1;
                if inner.is_labeled(t, plan) {
                    p.labeled += 1;
                }
            }
            let scores: Vec<(CandidateKey, f64)> =
                plan.iter().map(|t| (t.candidate.clone(), t.title_score)).collect();
            let labels: Vec<EvalLabel> = inner
                .labels
                .values()
                .filter(|l| inner.index.contains_key(&l.candidate))
                .cloned()
                .collect();
            (scores, labels, bins.into_values().collect::<Vec<_>>())
        };

        let labeled: usize = bins.iter().map(|b| b.labeled).sum();
        let total = scores.len();
        let threshold = self.config.threshold;
        let resampler = Resampler::Bootstrap {
            resamples: self.config.resamples,
            seed: self.config.seed,
        };
        let curve = pr_curve(&resolve_labels(&labels), &scores, &[threshold], resampler)
            .ok()
            .and_then(|c| c.at(threshold).map(|p| (p, c.labeled, c.unknown)))
            .map(|(p, conclusive, unknown)| CurveSummary {
                threshold,
                precision: p.precision,
                precision_ci: p.precision_ci,
                recall: p.recall,
                recall_ci: p.recall_ci,
                retention: p.retention,
                conclusive,
                unknown,
            });
        Stats {
            labeled,
            total,
            complete: total > 0 && labeled == total,
            stored_labels: labels.len(),
            bins,
            curve,
        }
    }
}
