// Scratch harness used while tuning scenario defaults. Not part of the CLI.

use bloomsense::env::RewardWeights;
use bloomsense::harness::{
    run_hdlss_ablation, run_policy_compare, run_scalability, sensitivity_scan, BenchConfig,
};
use std::time::Instant;

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "compare".into());
    let episodes: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);

    match mode.as_str() {
        "compare" => {
            let mut cfg = BenchConfig::policy_compare();
            cfg.episodes = episodes;
            let t = Instant::now();
            let out = run_policy_compare(&cfg).unwrap();
            println!("elapsed: {:.1}s", t.elapsed().as_secs_f64());
            print!("{}", out.table.to_csv().unwrap());
        }
        "scale" => {
            let mut cfg = BenchConfig::scalability();
            cfg.episodes = episodes;
            let t = Instant::now();
            let out = run_scalability(&cfg).unwrap();
            println!("elapsed: {:.1}s", t.elapsed().as_secs_f64());
            print!("{}", out.table.to_csv().unwrap());
        }
        "ablate" => {
            let mut cfg = BenchConfig::ablation();
            cfg.episodes = episodes.min(20);
            let t = Instant::now();
            let out = run_hdlss_ablation(&cfg).unwrap();
            println!("elapsed: {:.1}s", t.elapsed().as_secs_f64());
            print!("{}", out.to_csv().unwrap());
            println!(
                "physics wins over raw: {}/{}  gaps: physics {:.3} raw {:.3}",
                out.physics_wins_over_raw, out.seeds, out.physics_gap_mean, out.raw_gap_mean
            );
        }
        "ssl" => {
            let mut cfg = BenchConfig::ablation_ssl();
            cfg.episodes = episodes.min(10);
            let t = Instant::now();
            let out = run_hdlss_ablation(&cfg).unwrap();
            println!("elapsed: {:.1}s", t.elapsed().as_secs_f64());
            print!("{}", out.to_csv().unwrap());
            println!(
                "teacher {:.4} student {:?}",
                out.teacher_test_r2_mean, out.student_test_r2_mean
            );
        }
        "sensitivity" => {
            let mut cfg = BenchConfig::sensitivity();
            cfg.episodes = episodes;
            let grid = vec![
                RewardWeights { alpha: 1.0, beta: 0.5, gamma: 0.25 },
                RewardWeights { alpha: 1.0, beta: 0.0, gamma: 0.0 },
                RewardWeights { alpha: 0.0, beta: 1.0, gamma: 0.0 },
                RewardWeights { alpha: 0.0, beta: 0.0, gamma: 1.0 },
                RewardWeights { alpha: 0.25, beta: 1.0, gamma: 0.5 },
                RewardWeights { alpha: 0.5, beta: 1.0, gamma: 0.25 },
            ];
            let t = Instant::now();
            let out = sensitivity_scan(&cfg, &grid).unwrap();
            println!("elapsed: {:.1}s", t.elapsed().as_secs_f64());
            print!("{}", out.to_csv().unwrap());
        }
        "probe" => {
            // Sweep scene knobs with heuristics only (untrained DQN) to see
            // how close mu/sigma-driven rules get to the oracle.
            for noise_sd in [0.0, 1e-4, 2e-4, 5e-4] {
                for corr in [0.25, 0.4] {
                    for scale in [0.6, 1.0] {
                        let mut cfg = BenchConfig::policy_compare();
                        cfg.episodes = episodes;
                        cfg.scene.noise_sd = noise_sd;
                        cfg.scene.correlation_length = corr;
                        cfg.scene.scale = scale;
                        cfg.dqn.episodes = 0;
                        let out = run_policy_compare(&cfg).unwrap();
                        let get = |p: &str| {
                            out.table.row(p).unwrap().mean_rmse.unwrap()
                        };
                        let det = |p: &str| {
                            out.table
                                .row(p)
                                .unwrap()
                                .detection_rate
                                .unwrap_or(f64::NAN)
                        };
                        println!(
                            "noise {noise_sd:.0e} corr {corr} scale {scale}: oracle {:.4} | risk {:.4} ({:.2}x) ucb {:.4} ({:.2}x) int {:.4} spat {:.4} rand {:.4} ({:.2}x) | det rand {:.2} risk {:.2}",
                            get("oracle"),
                            get("greedy_risk"), get("greedy_risk") / get("oracle"),
                            get("ucb"), get("ucb") / get("oracle"),
                            get("greedy_intensity"),
                            get("greedy_spatial"),
                            get("random"), get("random") / get("oracle"),
                            det("random"), det("greedy_risk"),
                        );
                    }
                }
            }
        }
        "diag" => {
            use bloomsense::agents::{exhaustive_oracle, subset_rmse};
            use bloomsense::harness::build_pipeline;
            use bloomsense::rng::derive_seed;
            use itertools::Itertools;

            let mut cfg = BenchConfig::policy_compare();
            cfg.episodes = episodes;
            if let Some(noise) = std::env::args().nth(3).and_then(|s| s.parse::<f64>().ok()) {
                cfg.scene.noise_sd = noise;
            }
            let (generator, ensemble) = build_pipeline(&cfg).unwrap();
            let k = cfg.scene.budget;
            let mut sums = [0.0_f64; 6]; // oracle, top_sigma, sigma_shield, mu_shield, planned, top_mu
            let mut sums2 = [0.0_f64; 2];
            for ep in 0..cfg.episodes as u64 {
                let scene = generator
                    .scene(derive_seed(cfg.seed, "eval_scene", ep))
                    .unwrap();
                let (mu, sigma) = ensemble.predict_spectra(&scene.spectra).unwrap();
                let n = scene.n_stations();
                let oracle = exhaustive_oracle(&scene, &ensemble, k, 1_000_000).unwrap();

                let rank_by = |score: &dyn Fn(usize) -> f64| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap());
                    idx.truncate(k);
                    idx
                };
                let top_sigma = rank_by(&|i| sigma[i]);
                let top_mu = rank_by(&|i| mu[i]);

                // Shield rule: first pick by score, rest farthest-point.
                let shield = |first: usize| {
                    let mut picks = vec![first];
                    while picks.len() < k {
                        let next = (0..n)
                            .filter(|i| !picks.contains(i))
                            .max_by(|&a, &b| {
                                let da = picks
                                    .iter()
                                    .map(|&p| scene.field.distance(a, p))
                                    .fold(f64::INFINITY, f64::min);
                                let db = picks
                                    .iter()
                                    .map(|&p| scene.field.distance(b, p))
                                    .fold(f64::INFINITY, f64::min);
                                da.partial_cmp(&db).unwrap()
                            })
                            .unwrap();
                        picks.push(next);
                    }
                    picks
                };
                let sigma_shield = shield(top_sigma[0]);
                let mu_shield = shield(top_mu[0]);

                // Planned: enumerate subsets scoring with sigma as the
                // predicted (positive) residual magnitude.
                let planned = (0..n)
                    .combinations(k)
                    .min_by(|a, b| {
                        let score = |s: &Vec<usize>| {
                            let mut total = 0.0;
                            for i in 0..n {
                                if s.contains(&i) {
                                    continue;
                                }
                                let mut num = 0.0;
                                let mut den = 0.0;
                                for &v in s {
                                    let d = scene.field.distance(i, v);
                                    let w = 1.0 / (d * d);
                                    num += w * sigma[v];
                                    den += w;
                                }
                                total += (sigma[i] - num / den).powi(2);
                            }
                            total
                        };
                        score(a).partial_cmp(&score(b)).unwrap()
                    })
                    .unwrap();

                // Cheating references: rank and plan with true residuals.
                let resid: Vec<f64> = (0..n)
                    .map(|i| scene.field.truth[i] - mu[i])
                    .collect();
                let top_resid = rank_by(&|i| resid[i].abs());
                let resid_planned = (0..n)
                    .combinations(k)
                    .min_by(|a, b| {
                        let score = |s: &Vec<usize>| {
                            let mut total = 0.0;
                            for i in 0..n {
                                if s.contains(&i) {
                                    continue;
                                }
                                let mut num = 0.0;
                                let mut den = 0.0;
                                for &v in s {
                                    let d = scene.field.distance(i, v);
                                    let w = 1.0 / (d * d);
                                    num += w * resid[v];
                                    den += w;
                                }
                                total += (resid[i] - num / den).powi(2);
                            }
                            total
                        };
                        score(a).partial_cmp(&score(b)).unwrap()
                    })
                    .unwrap();

                if ep < 3 {
                    println!("episode {ep}:");
                    println!("  truth: {:?}", scene.field.truth.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
                    println!("  mu:    {:?}", mu.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
                    println!("  sigma: {:?}", sigma.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
                    println!("  oracle subset {:?} rmse {:.4}", oracle.best_subset, oracle.best_rmse);
                    println!("  top_resid {:?} rmse {:.4}", top_resid, subset_rmse(&scene, &mu, &top_resid));
                }

                sums[0] += oracle.best_rmse;
                sums[1] += subset_rmse(&scene, &mu, &top_sigma);
                sums[2] += subset_rmse(&scene, &mu, &sigma_shield);
                sums[3] += subset_rmse(&scene, &mu, &mu_shield);
                sums[4] += subset_rmse(&scene, &mu, &planned);
                sums[5] += subset_rmse(&scene, &mu, &top_mu);
                sums2[0] += subset_rmse(&scene, &mu, &top_resid);
                sums2[1] += subset_rmse(&scene, &mu, &resid_planned);
            }
            let n = cfg.episodes as f64;
            println!(
                "oracle {:.4} | top_sigma {:.4} ({:.2}x) sigma_shield {:.4} ({:.2}x) mu_shield {:.4} ({:.2}x) planned {:.4} ({:.2}x) top_mu {:.4} ({:.2}x)",
                sums[0] / n,
                sums[1] / n, sums[1] / sums[0],
                sums[2] / n, sums[2] / sums[0],
                sums[3] / n, sums[3] / sums[0],
                sums[4] / n, sums[4] / sums[0],
                sums[5] / n, sums[5] / sums[0],
            );
            println!(
                "cheats: top_resid {:.4} ({:.2}x) resid_planned {:.4} ({:.2}x)",
                sums2[0] / n, sums2[0] / sums[0],
                sums2[1] / n, sums2[1] / sums[0],
            );
        }
        "probe2" => {
            use bloomsense::harness::permutation_test;
            let noise: f64 = std::env::args()
                .nth(3)
                .and_then(|s| s.parse().ok())
                .unwrap_or(1e-5);
            for corr in [0.4, 0.8, 1.2, 2.0] {
                let mut cfg = BenchConfig::policy_compare();
                cfg.episodes = episodes;
                cfg.scene.noise_sd = noise;
                cfg.scene.correlation_length = corr;
                cfg.dqn.episodes = 0;
                let out = run_policy_compare(&cfg).unwrap();
                let get = |p: &str| out.table.row(p).unwrap().mean_rmse.unwrap();
                let p_risk_rand = permutation_test(
                    &out.samples["greedy_risk"].rmse,
                    &out.samples["random"].rmse,
                    10_000,
                    1,
                )
                .unwrap();
                let p_sigma_ucb = permutation_test(
                    &out.samples["greedy_risk"].rmse,
                    &out.samples["ucb"].rmse,
                    10_000,
                    2,
                )
                .unwrap();
                println!(
                    "corr {corr}: oracle {:.4} | risk {:.4} ({:.2}x) ucb {:.4} ({:.2}x) spat {:.4} ({:.2}x) rand {:.4} ({:.2}x) | p(risk,rand) {:.4} p(risk,ucb) {:.4} | det rand {:.2}",
                    get("oracle"),
                    get("greedy_risk"), get("greedy_risk") / get("oracle"),
                    get("ucb"), get("ucb") / get("oracle"),
                    get("greedy_spatial"), get("greedy_spatial") / get("oracle"),
                    get("random"), get("random") / get("oracle"),
                    p_risk_rand, p_sigma_ucb,
                    out.table.row("random").unwrap().detection_rate.unwrap_or(f64::NAN),
                );
            }
        }
        "probe3" => {
            use bloomsense::agents::subset_rmse;
            use bloomsense::harness::{build_pipeline, permutation_test};
            use bloomsense::rng::derive_seed;
            use itertools::Itertools;

            let noise: f64 = std::env::args()
                .nth(3)
                .and_then(|s| s.parse().ok())
                .unwrap_or(1e-5);
            let mut cfg = BenchConfig::policy_compare();
            cfg.episodes = episodes;
            cfg.scene.noise_sd = noise;
            cfg.dqn.episodes = 0;
            let (generator, ensemble) = build_pipeline(&cfg).unwrap();
            let n = cfg.scene.n_stations;
            let k = cfg.scene.budget;
            let subsets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
            let mut subset_sums = vec![0.0_f64; subsets.len()];
            let mut subset_sq = vec![0.0_f64; subsets.len()];
            let mut scene_min_sum = 0.0;
            let mut scene_min_rmse: Vec<f64> = Vec::new();
            for ep in 0..cfg.episodes as u64 {
                let scene = generator.scene(derive_seed(cfg.seed, "eval_scene", ep)).unwrap();
                let (mu, _) = ensemble.predict_spectra(&scene.spectra).unwrap();
                let mut scene_min = f64::INFINITY;
                for (si, sub) in subsets.iter().enumerate() {
                    let r = subset_rmse(&scene, &mu, sub);
                    subset_sums[si] += r;
                    subset_sq[si] += r * r;
                    scene_min = scene_min.min(r);
                }
                scene_min_sum += scene_min;
                scene_min_rmse.push(scene_min);
            }
            let eps = cfg.episodes as f64;
            let (best_idx, best_mean) = subset_sums
                .iter()
                .enumerate()
                .map(|(i, s)| (i, s / eps))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let best_sd = (subset_sq[best_idx] / eps - best_mean * best_mean).sqrt();
            println!(
                "noise {noise:.0e}: fixed-best subset {:?} mean {:.4} sd {:.4} | per-scene-min mean {:.4} | ratio fixed/scene {:.3}",
                subsets[best_idx], best_mean, best_sd, scene_min_sum / eps,
                best_mean / (scene_min_sum / eps)
            );
            // Policy means + power of raw vs excess permutation tests.
            let out = run_policy_compare(&cfg).unwrap();
            let get = |p: &str| out.table.row(p).unwrap().mean_rmse.unwrap();
            println!(
                "  risk {:.4} ({:.2}x fixed) ucb {:.4} ({:.2}x) int {:.4} spat {:.4} rand {:.4} ({:.2}x)",
                get("greedy_risk"), get("greedy_risk") / best_mean,
                get("ucb"), get("ucb") / best_mean,
                get("greedy_intensity"), get("greedy_spatial"),
                get("random"), get("random") / best_mean,
            );
            let excess = |name: &str| -> Vec<f64> {
                out.samples[name]
                    .rmse
                    .iter()
                    .zip(&scene_min_rmse)
                    .map(|(r, o)| r - o)
                    .collect()
            };
            let p_raw = permutation_test(&out.samples["greedy_risk"].rmse, &out.samples["random"].rmse, 10_000, 1).unwrap();
            let p_exc = permutation_test(&excess("greedy_risk"), &excess("random"), 10_000, 1).unwrap();
            let p_raw2 = permutation_test(&out.samples["greedy_risk"].rmse, &out.samples["ucb"].rmse, 10_000, 2).unwrap();
            let p_exc2 = permutation_test(&excess("greedy_risk"), &excess("ucb"), 10_000, 2).unwrap();
            println!("  p(risk,rand): raw {p_raw:.4} excess {p_exc:.4} | p(risk,ucb): raw {p_raw2:.4} excess {p_exc2:.4}");
        }
        other => eprintln!("unknown mode {other}"),
    }
}

// Appended probe: fixed-combination oracle semantics and excess-based power.
#[allow(dead_code)]
fn dummy() {}
