//! Scenario runners. Pipelines are seed-deterministic end to end: the
//! belief model trains once on synthetic labeled draws, the Q-policy trains
//! on freshly generated scenes, and evaluation episodes replay per-seed
//! scenes for every policy.

use super::config::{BenchConfig, SensitivityPolicy};
use super::report::{
    AblationOutcome, AblationRow, CompareOutcome, EpisodeSamples, ReportRow, ReportTable,
    SensitivityOutcome, SensitivityRow,
};
use super::{mean, permutation_test, r_squared, std_dev};
use crate::agents::{binomial, dqn_train, exhaustive_oracle, Agent, QPolicy};
use crate::belief::{
    self, extract_features, fit_belief, fit_ridge, labeled_dataset, pseudo_label,
    BeliefEnsemble, FeatureKind, PseudoLabeledSet, Standardizer,
};
use crate::env::{self, EnvConfig, EpisodeReport, RewardWeights, StepTrace};
use crate::error::{Error, Result};
use crate::indices;
use crate::rng::{derive_seed, seeded_rng};
use crate::synth::{
    sample_labeled, FieldConfig, ForwardModel, Scene, SceneGenerator, WavelengthGrid,
};
use ndarray::Array1;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Policy evaluation order; the deep-Q agent is the reference row.
pub const POLICY_NAMES: [&str; 7] = [
    "random",
    "stratified",
    "greedy_intensity",
    "greedy_risk",
    "greedy_spatial",
    "ucb",
    "dqn",
];

pub const REFERENCE_POLICY: &str = "dqn";
pub const ORACLE_ROW: &str = "oracle";

/// Scene generator and belief ensemble for a configuration. The ensemble is
/// fit once on `belief_samples` labeled draws from the marginal
/// concentration distribution.
pub fn build_pipeline(cfg: &BenchConfig) -> Result<(SceneGenerator, BeliefEnsemble)> {
    cfg.validate()?;
    let grid = Arc::new(WavelengthGrid::standard(cfg.scene.grid_bands));
    let model = ForwardModel::new(grid, cfg.scene.c_half, 1.0)?;
    let generator = SceneGenerator {
        field_cfg: FieldConfig {
            n_stations: cfg.scene.n_stations,
            correlation_length: cfg.scene.correlation_length,
            scale: cfg.scene.scale,
            bloom_threshold: cfg.scene.bloom_threshold,
            layout: cfg.scene.layout,
        },
        model: model.clone(),
        noise_sd: cfg.scene.noise_sd,
        unlabeled_count: 0,
    };
    let (spectra, targets) = sample_labeled(
        &model,
        cfg.belief_samples,
        cfg.scene.noise_sd,
        cfg.scene.scale,
        derive_seed(cfg.seed, "belief_data", 0),
    )?;
    let ensemble = fit_belief(
        &spectra,
        &Array1::from(targets),
        &cfg.belief,
        derive_seed(cfg.seed, "belief_fit", 0),
    )?;
    Ok((generator, ensemble))
}

/// Run one full episode under a policy; returns the report and step traces.
pub fn run_episode(
    scene: &Scene,
    ensemble: &BeliefEnsemble,
    env_cfg: &EnvConfig,
    agent: &mut Agent,
    rng: &mut rand_chacha::ChaCha8Rng,
    trace_seed: u64,
    policy_name: &str,
) -> Result<(EpisodeReport, Vec<StepTrace>)> {
    let mut state = env::reset(scene, ensemble, env_cfg)?;
    agent.begin_episode(&state, scene, rng);
    let mut actions = Vec::with_capacity(env_cfg.budget);
    let mut rewards = Vec::with_capacity(env_cfg.budget);
    let mut traces = Vec::with_capacity(env_cfg.budget);
    while !state.done() {
        let action = agent.select(&state, scene, rng)?;
        let out = env::step(&state, action, scene, &env_cfg.weights)?;
        traces.push(StepTrace {
            seed: trace_seed,
            policy: policy_name.to_string(),
            step: state.step,
            action,
            r_info: out.components.info,
            r_uncert: out.components.uncert,
            r_spatial: out.components.spatial,
            reward: out.reward,
        });
        actions.push(action);
        rewards.push(out.reward);
        state = out.state;
    }
    Ok((env::episode_metrics(&state, scene, actions, rewards), traces))
}

/// Which per-episode metric feeds `p_vs_reference`.
enum PMetric {
    Rmse,
    Detection,
}

fn train_reference_policy(
    cfg: &BenchConfig,
    generator: &SceneGenerator,
    ensemble: &BeliefEnsemble,
    env_cfg: &EnvConfig,
) -> Result<QPolicy> {
    let train_seed = derive_seed(cfg.seed, "dqn_train", 0);
    let gen = |s: u64| generator.scene(s);
    dqn_train(&gen, ensemble, env_cfg, &cfg.dqn, train_seed)
}

fn run_comparison(cfg: &BenchConfig, metric: PMetric) -> Result<CompareOutcome> {
    let (generator, ensemble) = build_pipeline(cfg)?;
    let env_cfg = EnvConfig {
        budget: cfg.scene.budget,
        weights: cfg.weights,
    };
    let policy = train_reference_policy(cfg, &generator, &ensemble, &env_cfg)?;

    let oracle_combinations = binomial(cfg.scene.n_stations, cfg.scene.budget);
    let oracle_feasible = oracle_combinations <= cfg.oracle_cap as u128;

    let mut samples: BTreeMap<String, EpisodeSamples> = POLICY_NAMES
        .iter()
        .map(|&n| (n.to_string(), EpisodeSamples::default()))
        .collect();
    if oracle_feasible {
        samples.insert(ORACLE_ROW.to_string(), EpisodeSamples::default());
    }
    let mut traces = Vec::new();

    for &ep_seed in &cfg.episode_seeds() {
        let scene = generator.scene(derive_seed(cfg.seed, "eval_scene", ep_seed))?;
        for &name in &POLICY_NAMES {
            let mut agent = match name {
                "random" => Agent::Random,
                "stratified" => Agent::Stratified(None),
                "greedy_intensity" => Agent::GreedyIntensity,
                "greedy_risk" => Agent::GreedyRisk,
                "greedy_spatial" => Agent::GreedySpatial,
                "ucb" => Agent::Ucb { beta: cfg.ucb_beta },
                "dqn" => Agent::Dqn(&policy),
                _ => unreachable!(),
            };
            let mut rng = seeded_rng(derive_seed(
                cfg.seed,
                &format!("policy_rng:{name}"),
                ep_seed,
            ));
            let (report, ep_traces) =
                run_episode(&scene, &ensemble, &env_cfg, &mut agent, &mut rng, ep_seed, name)?;
            traces.extend(ep_traces);
            samples.get_mut(name).expect("policy key").push(
                report.reconstruction_rmse,
                report.total_reward(),
                report.bloom_present,
                report.bloom_detected,
            );
        }
        if oracle_feasible {
            let oracle = exhaustive_oracle(&scene, &ensemble, cfg.scene.budget, cfg.oracle_cap as u128)?;
            let threshold = scene.field.bloom_threshold;
            let bloom = scene.field.truth.iter().any(|&t| t >= threshold);
            let detected = bloom
                && oracle
                    .best_subset
                    .iter()
                    .any(|&s| scene.field.truth[s] >= threshold);
            samples
                .get_mut(ORACLE_ROW)
                .expect("oracle key")
                .push(oracle.best_rmse, 0.0, bloom, detected);
        }
    }

    let reference = samples.get(REFERENCE_POLICY).expect("reference").clone();
    let mut rows = Vec::new();
    for &name in POLICY_NAMES.iter() {
        let s = &samples[name];
        let p = if name == REFERENCE_POLICY {
            None
        } else {
            Some(p_value(cfg, name, s, &reference, &metric)?)
        };
        rows.push(ReportRow {
            policy: name.to_string(),
            mean_rmse: Some(mean(&s.rmse)),
            rmse_sd: Some(std_dev(&s.rmse)),
            detection_rate: s.detection_rate(),
            mean_return: Some(mean(&s.returns)),
            episodes: s.rmse.len(),
            p_vs_reference: p,
            note: String::new(),
        });
    }
    if oracle_feasible {
        let s = &samples[ORACLE_ROW];
        rows.push(ReportRow {
            policy: ORACLE_ROW.to_string(),
            mean_rmse: Some(mean(&s.rmse)),
            rmse_sd: Some(std_dev(&s.rmse)),
            detection_rate: s.detection_rate(),
            mean_return: None,
            episodes: s.rmse.len(),
            p_vs_reference: Some(p_value(cfg, ORACLE_ROW, s, &reference, &metric)?),
            note: String::new(),
        });
    } else {
        rows.push(ReportRow {
            policy: ORACLE_ROW.to_string(),
            mean_rmse: None,
            rmse_sd: None,
            detection_rate: None,
            mean_return: None,
            episodes: 0,
            p_vs_reference: None,
            note: format!(
                "infeasible: C({}, {}) = {} exceeds cap {}",
                cfg.scene.n_stations, cfg.scene.budget, oracle_combinations, cfg.oracle_cap
            ),
        });
    }

    Ok(CompareOutcome {
        table: ReportTable { rows },
        samples,
        traces,
    })
}

fn p_value(
    cfg: &BenchConfig,
    name: &str,
    s: &EpisodeSamples,
    reference: &EpisodeSamples,
    metric: &PMetric,
) -> Result<f64> {
    let seed = derive_seed(cfg.seed, &format!("permutation:{name}"), 0);
    match metric {
        PMetric::Rmse => permutation_test(&s.rmse, &reference.rmse, cfg.permutation_resamples, seed),
        PMetric::Detection => {
            let a = s.detection_indicators();
            let b = reference.detection_indicators();
            if a.len() < 2 || b.len() < 2 {
                return Ok(1.0);
            }
            permutation_test(&a, &b, cfg.permutation_resamples, seed)
        }
    }
}

/// Policy comparison on the small benchmark, exhaustive oracle included.
pub fn run_policy_compare(cfg: &BenchConfig) -> Result<CompareOutcome> {
    run_comparison(cfg, PMetric::Rmse)
}

/// Large-candidate-set study; the oracle row records infeasibility and
/// p-values compare detection outcomes.
pub fn run_scalability(cfg: &BenchConfig) -> Result<CompareOutcome> {
    run_comparison(cfg, PMetric::Detection)
}

/// Feature-representation ablation: a train year and a shifted test year
/// (bloom endmember scaled, independent noise), ridge fits per
/// representation, and optionally the teacher-student comparison.
pub fn run_hdlss_ablation(cfg: &BenchConfig) -> Result<AblationOutcome> {
    cfg.validate()?;
    let grid = Arc::new(WavelengthGrid::standard(cfg.scene.grid_bands));
    let train_model = ForwardModel::new(grid.clone(), cfg.scene.c_half, 1.0)?;
    let test_model = ForwardModel::new(grid.clone(), cfg.scene.c_half, cfg.ablation.shift_factor)?;

    let kinds = [
        ("physics", FeatureKind::Physics),
        ("raw", FeatureKind::Raw),
        ("combined", FeatureKind::Combined),
    ];
    let mut per_seed_train: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_seed_test: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut dims: BTreeMap<String, usize> = BTreeMap::new();
    let mut student_tests: Vec<f64> = Vec::new();
    let mut student_trains: Vec<f64> = Vec::new();

    for rep in 0..cfg.episodes {
        let base = derive_seed(cfg.seed, "ablation", rep as u64);
        let (train_spectra, train_y) = sample_labeled(
            &train_model,
            cfg.belief_samples,
            cfg.scene.noise_sd,
            cfg.scene.scale,
            derive_seed(base, "train_year", 0),
        )?;
        let (test_spectra, test_y) = sample_labeled(
            &test_model,
            cfg.ablation.n_test,
            cfg.scene.noise_sd,
            cfg.scene.scale,
            derive_seed(base, "test_year", 0),
        )?;
        let train_y = Array1::from(train_y);
        let test_y = Array1::from(test_y);

        let mut physics_train_z = None;
        for (name, kind) in kinds {
            let x_train = extract_features(kind, &train_spectra)?;
            let x_test = extract_features(kind, &test_spectra)?;
            let scaler = Standardizer::fit(&x_train);
            let z_train = scaler.transform(&x_train)?;
            let z_test = scaler.transform(&x_test)?;
            let model = fit_ridge(&z_train, &train_y, cfg.ablation.ridge_reg)?;
            let pred_train = model.predict(&z_train)?;
            let pred_test = model.predict(&z_test)?;
            let train_r2 = r_squared(pred_train.as_slice().unwrap(), train_y.as_slice().unwrap());
            let test_r2 = r_squared(pred_test.as_slice().unwrap(), test_y.as_slice().unwrap());
            per_seed_train.entry(name.into()).or_default().push(train_r2);
            per_seed_test.entry(name.into()).or_default().push(test_r2);
            dims.insert(name.into(), x_train.ncols());
            if kind == FeatureKind::Physics {
                physics_train_z = Some((z_train, z_test, scaler, model));
            }
        }

        if cfg.ablation.include_ssl {
            let (z_train, z_test, scaler, teacher) =
                physics_train_z.expect("physics runs first");
            let (pool_spectra, _) = sample_labeled(
                &train_model,
                cfg.ablation.pool_size,
                cfg.scene.noise_sd,
                cfg.scene.scale,
                derive_seed(base, "pool", 0),
            )?;
            let pool_x = scaler.transform(&indices::features_matrix(&pool_spectra)?)?;
            let pseudo: PseudoLabeledSet = pseudo_label(&teacher, &pool_x, &train_y)?;
            let labeled = labeled_dataset(&z_train, &train_y, cfg.ablation.student.labeled_weight)?;
            let mut student_cfg = cfg.ablation.student.clone();
            student_cfg.train.seed = derive_seed(base, "student", 0);
            let student = belief::train_student(&labeled, &pseudo, &student_cfg)?;
            let pred_test = student.predict(&z_test)?;
            let pred_train = student.predict(&z_train)?;
            student_tests.push(r_squared(
                pred_test.as_slice().unwrap(),
                test_y.as_slice().unwrap(),
            ));
            student_trains.push(r_squared(
                pred_train.as_slice().unwrap(),
                train_y.as_slice().unwrap(),
            ));
        }
    }

    let physics_test = per_seed_test["physics"].clone();
    let raw_test = per_seed_test["raw"].clone();
    let physics_wins = physics_test
        .iter()
        .zip(&raw_test)
        .filter(|(p, r)| p >= r)
        .count();
    let gap = |name: &str| {
        per_seed_train[name]
            .iter()
            .zip(&per_seed_test[name])
            .map(|(tr, te)| tr - te)
            .collect::<Vec<f64>>()
    };
    let physics_gap_mean = mean(&gap("physics"));
    let raw_gap_mean = mean(&gap("raw"));

    let mut rows: Vec<AblationRow> = kinds
        .iter()
        .map(|(name, _)| AblationRow {
            feature_kind: (*name).to_string(),
            dimension: dims[*name],
            train_r2: mean(&per_seed_train[*name]),
            test_r2: mean(&per_seed_test[*name]),
        })
        .collect();
    if cfg.ablation.include_ssl {
        rows.push(AblationRow {
            feature_kind: "student_ssl".to_string(),
            dimension: dims["physics"],
            train_r2: mean(&student_trains),
            test_r2: mean(&student_tests),
        });
        per_seed_test.insert("student_ssl".into(), student_tests.clone());
        per_seed_train.insert("student_ssl".into(), student_trains.clone());
    }

    Ok(AblationOutcome {
        rows,
        seeds: cfg.episodes,
        physics_wins_over_raw: physics_wins,
        physics_gap_mean,
        raw_gap_mean,
        teacher_test_r2_mean: mean(&physics_test),
        student_test_r2_mean: if student_tests.is_empty() {
            None
        } else {
            Some(mean(&student_tests))
        },
        per_seed_test_r2: per_seed_test,
        per_seed_train_r2: per_seed_train,
    })
}

fn pairwise_spread(actions: &[usize], scene: &Scene) -> f64 {
    if actions.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..actions.len() {
        for j in (i + 1)..actions.len() {
            total += scene.field.distance(actions[i], actions[j]);
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Evaluate the configured policy under each reward-weight triple on shared
/// episode seeds. Identical grid entries produce identical rows.
pub fn sensitivity_scan(
    cfg: &BenchConfig,
    weight_grid: &[RewardWeights],
) -> Result<SensitivityOutcome> {
    cfg.validate()?;
    if weight_grid.is_empty() {
        return Err(Error::Config("weight grid must be non-empty".into()));
    }
    enum ScanPolicy {
        Dqn(QPolicy),
        Ucb(f64),
        GreedyRisk,
    }

    let (generator, ensemble) = build_pipeline(cfg)?;
    let mut rows = Vec::with_capacity(weight_grid.len());
    for weights in weight_grid {
        weights.validate()?;
        let env_cfg = EnvConfig {
            budget: cfg.scene.budget,
            weights: *weights,
        };
        let (scan_policy, policy_name) = match cfg.sensitivity.policy {
            SensitivityPolicy::Dqn => (
                ScanPolicy::Dqn(train_reference_policy(cfg, &generator, &ensemble, &env_cfg)?),
                "dqn",
            ),
            SensitivityPolicy::Ucb => (ScanPolicy::Ucb(cfg.ucb_beta), "ucb"),
            SensitivityPolicy::GreedyRisk => (ScanPolicy::GreedyRisk, "greedy_risk"),
        };
        let mut samples = EpisodeSamples::default();
        let mut spreads = Vec::new();
        for &ep_seed in &cfg.episode_seeds() {
            let scene = generator.scene(derive_seed(cfg.seed, "eval_scene", ep_seed))?;
            let mut agent = match &scan_policy {
                ScanPolicy::Dqn(p) => Agent::Dqn(p),
                ScanPolicy::Ucb(beta) => Agent::Ucb { beta: *beta },
                ScanPolicy::GreedyRisk => Agent::GreedyRisk,
            };
            let mut rng = seeded_rng(derive_seed(
                cfg.seed,
                &format!("policy_rng:{policy_name}"),
                ep_seed,
            ));
            let (report, _) = run_episode(
                &scene,
                &ensemble,
                &env_cfg,
                &mut agent,
                &mut rng,
                ep_seed,
                policy_name,
            )?;
            spreads.push(pairwise_spread(&report.actions, &scene));
            samples.push(
                report.reconstruction_rmse,
                report.total_reward(),
                report.bloom_present,
                report.bloom_detected,
            );
        }
        rows.push(SensitivityRow {
            alpha: weights.alpha,
            beta: weights.beta,
            gamma: weights.gamma,
            mean_rmse: mean(&samples.rmse),
            detection_rate: samples.detection_rate(),
            mean_return: mean(&samples.returns),
            mean_pairwise_spread: mean(&spreads),
        });
    }
    Ok(SensitivityOutcome { rows })
}
