use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use prism_core::agents::AgentSpec;
use prism_core::bank::{build_bank, BankConfig};
use prism_core::gateway::{dedupe_latest, run_campaign, CampaignPlan, SimulatedRespondent, TRANSCRIPTS_FILE};
use prism_core::profile::{compute_profile, AnalysisConfig, RespondentInfo};
use prism_core::records::read_jsonl;
use prism_core::Exec;

fn modes() -> [(&'static str, Exec, Option<usize>); 2] {
    [("sequential", Exec::Sequential, Some(1)), ("parallel", Exec::Parallel, None)]
}

fn campaign(c: &mut Criterion) {
    let bank = build_bank(&BankConfig::default()).unwrap();
    let respondent =
        SimulatedRespondent::new(AgentSpec::bradley_terry_reference("bench", 0.8, 1).unwrap()).unwrap();
    let mut group = c.benchmark_group("campaign");
    group.sample_size(10);
    for (name, _, threads) in modes() {
        let plan = CampaignPlan {
            concurrency: threads,
            use_cache: false,
            ..CampaignPlan::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || tempfile::tempdir().unwrap(),
                |dir| run_campaign(&bank, &respondent, serde_json::Value::Null, &plan, dir.path(), None).unwrap(),
                criterion::BatchSize::PerIteration,
            )
        });
    }
    group.finish();
}

fn profile(c: &mut Criterion) {
    let bank = build_bank(&BankConfig::default()).unwrap();
    let respondent =
        SimulatedRespondent::new(AgentSpec::bradley_terry_reference("bench", 0.8, 1).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_campaign(&bank, &respondent, serde_json::Value::Null, &CampaignPlan::default(), dir.path(), None).unwrap();
    let transcripts = dedupe_latest(read_jsonl(&dir.path().join(TRANSCRIPTS_FILE)).unwrap());
    let info = RespondentInfo {
        id: "bench".into(),
        ..RespondentInfo::default()
    };
    let cfg = AnalysisConfig::default();
    let mut group = c.benchmark_group("profile");
    for (name, exec, _) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| compute_profile(&bank, &transcripts, &info, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, campaign, profile);
criterion_main!(benches);
