use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{parse_choice, Choice, DecodeParams, Respondent, RespondentKind, Transcript};
use crate::bank::Bank;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hashing::{hex_digest, u64_of};
use crate::records::{self, AppendLog, Versioned};
use crate::FORMAT_VERSION;

pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";
pub const CAMPAIGN_MANIFEST: &str = "manifest.json";

fn default_order_seed() -> u64 {
    1
}

fn default_budget() -> f64 {
    0.02
}

fn default_chunk() -> usize {
    64
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignPlan {
    #[serde(default = "default_order_seed")]
    pub order_seed: u64,
    /// Concurrent submissions; all cores when absent.
    #[serde(default)]
    pub concurrency: Option<usize>,
    /// Abort once more than this fraction of presentations has failed.
    #[serde(default = "default_budget")]
    pub failure_budget: f64,
    /// Presentations submitted between log flushes.
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    #[serde(default = "default_true")]
    pub use_cache: bool,
}

impl Default for CampaignPlan {
    fn default() -> Self {
        CampaignPlan {
            order_seed: default_order_seed(),
            concurrency: None,
            failure_budget: default_budget(),
            chunk_size: default_chunk(),
            use_cache: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Presentation {
    pub scenario_id: String,
    pub repeat: u8,
}

/// Every presentation a complete campaign needs, in the plan's shuffled
/// order: neutral scenarios twice, reframed scenarios once.
pub fn presentations(bank: &Bank, order_seed: u64) -> Vec<Presentation> {
    let mut keyed: Vec<(u64, Presentation)> = bank
        .scenarios
        .iter()
        .flat_map(|s| {
            let repeats: &[u8] = if s.is_neutral() { &[1, 2] } else { &[1] };
            repeats.iter().map(move |&repeat| Presentation {
                scenario_id: s.id.clone(),
                repeat,
            })
        })
        .map(|p| {
            let k = u64_of(&[&order_seed.to_le_bytes(), p.scenario_id.as_bytes(), &[p.repeat]]);
            (k, p)
        })
        .collect();
    keyed.sort();
    keyed.into_iter().map(|(_, p)| p).collect()
}

pub fn cache_key(scenario_id: &str, respondent: &str, repeat: u8, decode: &DecodeParams) -> String {
    let decode = serde_json::to_vec(decode).expect("decode params serialize");
    hex_digest(&[scenario_id.as_bytes(), respondent.as_bytes(), &[repeat], &decode])
}

/// Keeps the last transcript for each presentation, in order of first
/// appearance.
pub fn dedupe_latest(transcripts: Vec<Transcript>) -> Vec<Transcript> {
    let mut index: HashMap<(String, u8), usize> = HashMap::new();
    let mut out: Vec<Transcript> = Vec::with_capacity(transcripts.len());
    for t in transcripts {
        match index.get(&(t.scenario_id.clone(), t.repeat)) {
            Some(&i) => out[i] = t,
            None => {
                index.insert((t.scenario_id.clone(), t.repeat), out.len());
                out.push(t);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub format_version: u32,
    pub respondent: String,
    pub kind: RespondentKind,
    pub decode: DecodeParams,
    pub respondent_config: serde_json::Value,
    pub order_seed: u64,
    pub bank_digest: String,
    pub presentations: usize,
    pub completed: usize,
    pub transport_errors: usize,
    pub abstains: usize,
    pub complete: bool,
    pub started_unix: u64,
    pub updated_unix: u64,
}

impl Versioned for CampaignManifest {
    fn format_version(&self) -> u32 {
        self.format_version
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignOutcome {
    pub presentations: usize,
    /// Already in the transcript log before this run.
    pub resumed: usize,
    pub cache_hits: usize,
    pub submitted: usize,
    pub transport_errors: usize,
    pub abstains: usize,
    pub complete: bool,
}

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(&key[..2]).join(format!("{key}.json"))
}

fn read_cache(dir: &Path, key: &str) -> Option<Transcript> {
    let path = cache_path(dir, key);
    if !path.exists() {
        return None;
    }
    match records::read_json::<Transcript>(&path) {
        Ok(t) if t.cache_key == key && !t.is_transport_error() => Some(t),
        Ok(_) => None,
        Err(e) => {
            warn!("ignoring unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

enum Source {
    Cache,
    Submitted,
}

fn present(
    bank: &Bank,
    respondent: &dyn Respondent,
    p: &Presentation,
    cache: Option<&Path>,
) -> Result<(Transcript, Source)> {
    let key = cache_key(&p.scenario_id, respondent.id(), p.repeat, respondent.decode());
    if let Some(t) = cache.and_then(|dir| read_cache(dir, &key)) {
        return Ok((t, Source::Cache));
    }
    let scenario = bank
        .scenario(&p.scenario_id)
        .ok_or_else(|| Error::Data(format!("unknown scenario `{}`", p.scenario_id)))?;
    let started = Instant::now();
    let answer = respondent.submit(scenario, super::render_prompt(scenario), p.repeat);
    let wall_ms = match respondent.kind() {
        RespondentKind::Simulated => 0,
        RespondentKind::Remote => started.elapsed().as_millis() as u64,
    };
    let (raw_text, error) = match answer {
        Ok(text) => (text, None),
        Err(Error::Transport(msg)) => (String::new(), Some(msg)),
        Err(e) => return Err(e),
    };
    let parsed = if error.is_some() { Choice::Abstain } else { parse_choice(&raw_text) };
    let t = Transcript {
        scenario_id: p.scenario_id.clone(),
        repeat: p.repeat,
        respondent: respondent.id().to_string(),
        parse_ok: error.is_none() && parsed != Choice::Abstain,
        raw_text,
        parsed,
        error,
        wall_ms,
        cache_key: key.clone(),
    };
    if let (Some(dir), false) = (cache, t.is_transport_error()) {
        let path = cache_path(dir, &key);
        std::fs::create_dir_all(path.parent().expect("cache entry has a parent"))
            .map_err(|e| Error::io(dir, e))?;
        records::write_json(&path, &t)?;
    }
    Ok((t, Source::Submitted))
}

/// Runs every outstanding presentation, appending transcripts to
/// `run_dir/transcripts.jsonl`. Presentations already logged without a
/// transport error are not resubmitted; cached answers are reused.
pub fn run_campaign(
    bank: &Bank,
    respondent: &dyn Respondent,
    respondent_config: serde_json::Value,
    plan: &CampaignPlan,
    run_dir: &Path,
    cache_dir: Option<&Path>,
) -> Result<CampaignOutcome> {
    if !(0.0..=1.0).contains(&plan.failure_budget) {
        return Err(Error::Config(format!("failure budget {} outside [0, 1]", plan.failure_budget)));
    }
    std::fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let manifest_path = run_dir.join(CAMPAIGN_MANIFEST);
    let log_path = run_dir.join(TRANSCRIPTS_FILE);
    let bank_digest = bank.manifest.scenarios_digest.clone();

    let mut started_unix = crate::unix_now();
    if manifest_path.exists() {
        let old: CampaignManifest = records::read_versioned(&manifest_path)?;
        if old.bank_digest != bank_digest || old.respondent != respondent.id() {
            return Err(Error::Config(format!(
                "{} belongs to respondent `{}` on a different bank or respondent",
                run_dir.display(),
                old.respondent
            )));
        }
        started_unix = old.started_unix;
    }

    let all = presentations(bank, plan.order_seed);
    let mut done: HashMap<(String, u8), Transcript> = HashMap::new();
    if log_path.exists() {
        let existing = dedupe_latest(records::read_jsonl::<Transcript>(&log_path)?);
        records::write_jsonl(&log_path, existing.iter())?;
        for t in existing {
            let key = cache_key(&t.scenario_id, respondent.id(), t.repeat, respondent.decode());
            if !t.is_transport_error() && t.cache_key == key {
                done.insert((t.scenario_id.clone(), t.repeat), t);
            }
        }
    }
    let pending: Vec<&Presentation> = all
        .iter()
        .filter(|p| !done.contains_key(&(p.scenario_id.clone(), p.repeat)))
        .collect();
    let mut outcome = CampaignOutcome {
        presentations: all.len(),
        resumed: all.len() - pending.len(),
        cache_hits: 0,
        submitted: 0,
        transport_errors: 0,
        abstains: done.values().filter(|t| t.parsed == Choice::Abstain).count(),
        complete: false,
    };
    info!(
        "{}: {} presentations, {} already logged",
        respondent.id(),
        outcome.presentations,
        outcome.resumed
    );

    let write_manifest = |o: &CampaignOutcome| {
        records::write_json(
            &manifest_path,
            &CampaignManifest {
                format_version: FORMAT_VERSION,
                respondent: respondent.id().to_string(),
                kind: respondent.kind(),
                decode: respondent.decode().clone(),
                respondent_config: respondent_config.clone(),
                order_seed: plan.order_seed,
                bank_digest: bank_digest.clone(),
                presentations: o.presentations,
                completed: o.resumed + o.cache_hits + o.submitted - o.transport_errors,
                transport_errors: o.transport_errors,
                abstains: o.abstains,
                complete: o.complete,
                started_unix,
                updated_unix: crate::unix_now(),
            },
        )
    };
    write_manifest(&outcome)?;

    let exec = Exec::from_threads(plan.concurrency);
    let cache = if plan.use_cache { cache_dir } else { None };
    let budget = (plan.failure_budget * all.len() as f64).floor() as usize;
    let mut log = AppendLog::open(&log_path)?;
    let halted = AtomicBool::new(false);
    for chunk in pending.chunks(plan.chunk_size.max(1)) {
        let results = exec.map(chunk, |p| {
            if halted.load(Ordering::Relaxed) {
                return None;
            }
            let r = present(bank, respondent, p, cache);
            if r.is_err() {
                halted.store(true, Ordering::Relaxed);
            }
            Some(r)
        });
        let mut failure = None;
        for r in results.into_iter().flatten() {
            match r {
                Ok((t, source)) => {
                    match source {
                        Source::Cache => outcome.cache_hits += 1,
                        Source::Submitted => outcome.submitted += 1,
                    }
                    if t.is_transport_error() {
                        outcome.transport_errors += 1;
                    } else if t.parsed == Choice::Abstain {
                        outcome.abstains += 1;
                    }
                    log.append(&t)?;
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        log.flush()?;
        if let Some(e) = failure {
            write_manifest(&outcome)?;
            return Err(e);
        }
        if outcome.transport_errors > budget {
            write_manifest(&outcome)?;
            return Err(Error::BudgetExceeded {
                failed: outcome.transport_errors,
                total: all.len(),
            });
        }
    }
    outcome.complete = outcome.transport_errors == 0;
    write_manifest(&outcome)?;
    Ok(outcome)
}
