//! On-disk audit workspace and the commands that operate on it.
//!
//! ```text
//! <root>/bank/{manifest.json, scenarios.jsonl}
//! <root>/runs/<respondent>/{manifest.json, transcripts.jsonl, profile.json,
//!                           aspa.json, report.txt, report.json}
//! <root>/cache/
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::agents::{generate_fixtures, AgentSpec, HELDOUT_DOMAINS};
use crate::bank::{build_bank, Bank, BankConfig, MANIFEST_FILE};
use crate::cascade::{aspa_report, check_holdout, AspaReport, FixtureSet};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gateway::{
    dedupe_latest, presentations, run_campaign, CampaignManifest, RunConfig, Transcript, CAMPAIGN_MANIFEST,
    TRANSCRIPTS_FILE,
};
use crate::profile::{compute_profile, AnalysisConfig, PrismProfile, RespondentInfo};
use crate::records::{self, read_versioned};
use crate::report::{build_report, render_text, AuditReport};

pub const PROFILE_FILE: &str = "profile.json";
pub const ASPA_FILE: &str = "aspa.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
const LOCK_FILE: &str = ".prism.lock";

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Refused(_)
        | Error::Config(_)
        | Error::Toml { .. }
        | Error::Taxonomy(_)
        | Error::RuleSet(_)
        | Error::Agent(_)
        | Error::HoldoutViolation(_)
        | Error::FormatVersion { .. } => 2,
        Error::Transport(_) | Error::Auth(_) | Error::BudgetExceeded { .. } => 3,
        Error::Incomplete { .. } | Error::BankMissing(_) => 4,
        _ => 1,
    }
}

pub struct Workspace {
    root: PathBuf,
}

/// Held for the duration of a command; a second holder is refused.
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn bank_dir(&self) -> PathBuf {
        self.root.join("bank")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn run_dir(&self, respondent: &str) -> PathBuf {
        self.root.join("runs").join(safe_name(respondent))
    }

    pub fn lock(&self) -> Result<WorkspaceLock> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkspaceLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Refused(format!(
                "workspace {} is in use by another invocation (remove {} if it is stale)",
                self.root.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn load_bank(&self) -> Result<Bank> {
        Bank::load(&self.bank_dir())
    }

    pub fn load_transcripts(&self, respondent: &str) -> Result<Vec<Transcript>> {
        let path = self.run_dir(respondent).join(TRANSCRIPTS_FILE);
        if !path.exists() {
            return Err(Error::Incomplete {
                missing: vec![format!("no campaign for `{respondent}`")],
            });
        }
        Ok(dedupe_latest(records::read_jsonl(&path)?))
    }

    pub fn load_profile(&self, respondent: &str) -> Result<PrismProfile> {
        let path = self.run_dir(respondent).join(PROFILE_FILE);
        if !path.exists() {
            return Err(Error::Incomplete {
                missing: vec![format!("no profile for `{respondent}`; run metrics first")],
            });
        }
        read_versioned(&path)
    }
}

pub fn cmd_bank(ws: &Workspace, config: Option<&Path>, force: bool) -> Result<String> {
    let cfg = match config {
        Some(p) => BankConfig::load(p)?,
        None => BankConfig::default(),
    };
    if ws.bank_dir().join(MANIFEST_FILE).exists() && !force {
        return Err(Error::Refused(format!(
            "{} already holds a bank; pass --force to replace it",
            ws.bank_dir().display()
        )));
    }
    let bank = build_bank(&cfg)?;
    bank.save(&ws.bank_dir())?;
    let mut out = String::new();
    for c in &bank.manifest.counts {
        let _ = writeln!(out, "{}: {} neutral + {} PCS", c.layer.short(), c.neutral, c.pcs);
    }
    let _ = writeln!(
        out,
        "{} scenarios over {} domains written to {}",
        bank.scenarios.len(),
        bank.manifest.domains.len(),
        ws.bank_dir().display()
    );
    Ok(out)
}

pub fn cmd_run(ws: &Workspace, config: &Path, threads: Option<usize>) -> Result<String> {
    let bank = ws.load_bank()?;
    let cfg = RunConfig::load(config)?;
    let respondent = cfg.respondent()?;
    let echo = match (&cfg.remote, &cfg.agent) {
        (Some(r), _) => serde_json::to_value(r),
        (_, Some(a)) => serde_json::to_value(a),
        _ => Ok(serde_json::Value::Null),
    }
    .map_err(|e| Error::json("respondent config", e))?;
    let mut plan = cfg.campaign.clone();
    if threads.is_some() {
        plan.concurrency = threads;
    }
    let cache = ws.cache_dir();
    let o = run_campaign(
        &bank,
        respondent.as_ref(),
        echo,
        &plan,
        &ws.run_dir(respondent.id()),
        Some(&cache),
    )?;
    let answered = o.presentations - o.transport_errors;
    Ok(format!(
        "{}: {} presentations ({} resumed, {} from cache, {} submitted), {} abstains ({:.2}%), {} transport errors\n",
        respondent.id(),
        o.presentations,
        o.resumed,
        o.cache_hits,
        o.submitted,
        o.abstains,
        100.0 * o.abstains as f64 / answered.max(1) as f64,
        o.transport_errors
    ))
}

/// Presentations of the bank without an answered transcript.
pub fn missing_presentations(bank: &Bank, transcripts: &[Transcript], order_seed: u64) -> Vec<String> {
    let have: HashSet<(&str, u8)> = transcripts
        .iter()
        .filter(|t| !t.is_transport_error())
        .map(|t| (t.scenario_id.as_str(), t.repeat))
        .collect();
    presentations(bank, order_seed)
        .into_iter()
        .filter(|p| !have.contains(&(p.scenario_id.as_str(), p.repeat)))
        .map(|p| format!("{}#{}", p.scenario_id, p.repeat))
        .collect()
}

/// Profile from the stored transcripts, without writing anything.
pub fn recompute_profile(
    ws: &Workspace,
    bank: &Bank,
    respondent: &str,
    analysis: &AnalysisConfig,
    exec: Exec,
) -> Result<PrismProfile> {
    let run_dir = ws.run_dir(respondent);
    let manifest_path = run_dir.join(CAMPAIGN_MANIFEST);
    if !manifest_path.exists() {
        return Err(Error::Incomplete {
            missing: vec![format!("no campaign for `{respondent}`")],
        });
    }
    let manifest: CampaignManifest = read_versioned(&manifest_path)?;
    if manifest.bank_digest != bank.manifest.scenarios_digest {
        return Err(Error::Config(format!(
            "campaign for `{respondent}` was run against a different bank"
        )));
    }
    let transcripts = ws.load_transcripts(respondent)?;
    let missing = missing_presentations(bank, &transcripts, manifest.order_seed);
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    let info = RespondentInfo {
        id: manifest.respondent.clone(),
        decode: Some(manifest.decode.clone()),
        config: manifest.respondent_config.clone(),
    };
    compute_profile(bank, &transcripts, &info, analysis, exec)
}

pub fn cmd_metrics(
    ws: &Workspace,
    respondent: &str,
    config: Option<&Path>,
    threads: Option<usize>,
) -> Result<String> {
    let bank = ws.load_bank()?;
    let analysis = match config {
        Some(p) => AnalysisConfig::load(p)?,
        None => AnalysisConfig::default(),
    };
    let profile = recompute_profile(ws, &bank, respondent, &analysis, Exec::from_threads(threads))?;
    let run_dir = ws.run_dir(respondent);
    let path = run_dir.join(PROFILE_FILE);
    let text = profile.to_json()?;
    let unchanged = std::fs::read_to_string(&path).is_ok_and(|old| old == text);
    if !unchanged {
        let stale = run_dir.join(ASPA_FILE);
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        }
        records::write_atomic(&path, text.as_bytes())?;
    }
    let mut out = String::new();
    let r = &profile.reliability;
    let _ = writeln!(out, "{}: TRR {}  SRS {}  PCS {}", profile.respondent, r.trr, r.srs, r.pcs);
    match &profile.diagnosis {
        Some(d) => {
            let _ = writeln!(out, "diagnosis: {}", d.quadrant);
        }
        None => {
            let _ = writeln!(out, "diagnosis: undetermined");
        }
    }
    if let Some(c) = &profile.cci {
        let _ = writeln!(out, "CCI {} (rules {})", c.overall, c.rule_set_version);
    }
    let _ = writeln!(out, "profile written to {}", path.display());
    Ok(out)
}

pub fn cmd_predict(ws: &Workspace, respondent: &str, fixtures: &Path) -> Result<String> {
    let bank = ws.load_bank()?;
    let profile = ws.load_profile(respondent)?;
    let set = FixtureSet::load(fixtures)?;
    if set.fixtures.is_empty() {
        return Err(Error::Config(format!("{} contains no fixtures", fixtures.display())));
    }
    check_holdout(&set, &bank)?;
    let params = profile.l1.as_ref().ok_or_else(|| Error::Incomplete {
        missing: vec!["profile lacks one of the three measured layers".into()],
    })?;
    let report: AspaReport = aspa_report(&profile.respondent, params, &set)?;
    let path = ws.run_dir(respondent).join(ASPA_FILE);
    records::write_json(&path, &report)?;
    Ok(format!(
        "{}: ASPA {:.4} on {} fixtures ({} undetermined), threshold {} {}\n",
        profile.respondent,
        report.aspa,
        report.results.len(),
        report.undetermined,
        report.threshold,
        if report.pass { "pass" } else { "FAIL" }
    ))
}

pub fn cmd_report(ws: &Workspace, respondent: &str) -> Result<String> {
    let bank = ws.load_bank()?;
    let profile = ws.load_profile(respondent)?;
    let aspa_path = ws.run_dir(respondent).join(ASPA_FILE);
    let aspa: Option<AspaReport> = if aspa_path.exists() {
        Some(read_versioned(&aspa_path)?)
    } else {
        None
    };
    let report: AuditReport = build_report(&bank, &profile, aspa.as_ref());
    let text = render_text(&report);
    let dir = ws.run_dir(respondent);
    records::write_atomic(&dir.join(REPORT_TEXT), text.as_bytes())?;
    records::write_json(&dir.join(REPORT_JSON), &report)?;
    Ok(text)
}

/// Writes free-form fixtures labelled by a simulated agent.
pub fn cmd_fixtures(agent: &Path, count: usize, seed: u64, out: &Path) -> Result<String> {
    let spec = match RunConfig::load(agent) {
        Ok(RunConfig { agent: Some(a), .. }) => a,
        Ok(_) => return Err(Error::Config(format!("{} has no [agent] section", agent.display()))),
        Err(_) => AgentSpec::load(agent)?,
    };
    let domains: Vec<String> = HELDOUT_DOMAINS.iter().map(|d| d.to_string()).collect();
    let set = generate_fixtures(&spec, count, seed, &domains, crate::cascade::CompositeWeights::default())?;
    records::write_json(out, &set)?;
    Ok(format!("{} fixtures written to {}\n", set.fixtures.len(), out.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_lock_is_refused_until_released() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        let held = ws.lock().unwrap();
        let e = ws.lock().err().unwrap();
        assert_eq!(exit_code(&e), 2);
        drop(held);
        assert!(ws.lock().is_ok());
    }

    #[test]
    fn run_dirs_are_sanitized() {
        let ws = Workspace::new("/w");
        assert_eq!(ws.run_dir("org/model:7b"), PathBuf::from("/w/runs/org_model_7b"));
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(exit_code(&Error::BudgetExceeded { failed: 3, total: 10 }), 3);
        assert_eq!(exit_code(&Error::Incomplete { missing: vec![] }), 4);
        assert_eq!(exit_code(&Error::Data("x".into())), 1);
    }
}
