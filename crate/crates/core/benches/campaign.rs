use std::hint::black_box;

use cobets::campaign::{run_arm_episode, run_sequential, ArmSpec, SelectorKind};
use cobets::domains::lightdark::{LightDark, LightDarkSpec};
use cobets::domains::{make_lightdark_options, Catalog};
use cobets::execution::ExecutionConfig;
use cobets::planner::PlannerConfig;
use criterion::{criterion_group, criterion_main, Criterion};

const EPISODES: usize = 8;

fn arm(options: &cobets::options::OptionSet<LightDark>) -> ArmSpec<LightDark> {
    ArmSpec {
        name: "bench".into(),
        selector: SelectorKind::Planner(PlannerConfig {
            queries: 100,
            exploration: 10.0,
            dual_step: 5.0,
            ..PlannerConfig::default()
        }),
        rollout_options: Some(options.clone()),
        particles: 100,
        execution: ExecutionConfig::default(),
        record_timing: false,
        keep_log: false,
    }
}

fn campaign(c: &mut Criterion) {
    let model = LightDark::new(LightDarkSpec::default()).unwrap();
    let options = make_lightdark_options(&model, &Catalog::Base4).unwrap();
    let arm = arm(&options);
    let episode = |i: usize, seed: u64| {
        run_arm_episode(&model, &options, &arm, i, seed).map_err(|e| e.to_string())
    };

    let mut group = c.benchmark_group("lightdark_campaign");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(run_sequential(EPISODES, 7, episode).unwrap()))
    });
    #[cfg(feature = "parallel")]
    {
        let threads = std::thread::available_parallelism().map_or(2, |n| n.get().max(2));
        group.bench_with_input(
            criterion::BenchmarkId::new("parallel", threads),
            &threads,
            |b, &workers| {
                b.iter(|| {
                    black_box(
                        cobets::campaign::run_parallel(EPISODES, 7, workers, episode).unwrap(),
                    )
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, campaign);
criterion_main!(benches);
