#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "singulate/baseline.hpp"
#include "singulate/dataset.hpp"
#include "singulate/encoder.hpp"
#include "singulate/model_io.hpp"
#include "singulate/network.hpp"
#include "singulate/oracle.hpp"
#include "singulate/oracle_json.hpp"
#include "singulate/proposals.hpp"
#include "singulate/scene.hpp"

namespace singulate {

enum class Policy { random, vanilla_network, aggregated_network, baseline, oracle };

inline const char* policy_name(Policy p) {
    switch (p) {
        case Policy::random: return "random";
        case Policy::vanilla_network: return "vanilla_network";
        case Policy::aggregated_network: return "aggregated_network";
        case Policy::baseline: return "baseline";
        case Policy::oracle: return "oracle";
    }
    return "unknown";
}

inline Policy policy_from_name(const std::string& name) {
    for (Policy p : {Policy::random, Policy::vanilla_network, Policy::aggregated_network,
                     Policy::baseline, Policy::oracle})
        if (name == policy_name(p)) return p;
    throw std::invalid_argument("unknown policy: " + name);
}

inline bool is_network_policy(Policy p) {
    return p == Policy::vanilla_network || p == Policy::aggregated_network;
}

inline int default_max_pushes(int n_objects) {
    return int(std::floor(1.3 * n_objects)) + 1;
}

struct TrialConfig {
    int n_objects = 4;
    int max_pushes = 0;  ///< 0 resolves to floor(1.3 n) + 1
    double singulation_threshold = default_singulation_threshold;
    Policy policy = Policy::random;
    double positive_threshold = 0.5;  ///< network acceptance cut
    double split_prob = 0.4;
    int per_segment = 16;
    double push_length = 0.2;
    TableSpec table{1.0, 0.8, {0, 0}};
    LabelCriteria criteria;
    double pusher_radius = 0.015;
    double approach_backoff = 0.02;

    int resolved_max_pushes() const {
        return max_pushes > 0 ? max_pushes : default_max_pushes(n_objects);
    }
};

enum class TrialStatus { success, push_budget_exhausted, no_feasible_positive };

inline const char* trial_status_name(TrialStatus s) {
    switch (s) {
        case TrialStatus::success: return "success";
        case TrialStatus::push_budget_exhausted: return "push_budget_exhausted";
        case TrialStatus::no_feasible_positive: return "no_feasible_positive";
    }
    return "unknown";
}

/// One ranking step; chosen = -1 marks a terminal step with no executed push.
struct PushRecord {
    int push_index = 0;
    Scene before;
    std::vector<PushProposal> candidates;
    std::vector<double> scores;  ///< parallel to candidates
    std::vector<bool> feasible;  ///< parallel to candidates
    int chosen = -1;
    PushOutcome outcome;
    PushLabel label;
    LabeledSample sample;  ///< encoded image + oracle label, valid when chosen >= 0
};

struct TrialRecord {
    TrialConfig config;
    std::uint64_t seed = 0;
    TrialStatus status = TrialStatus::push_budget_exhausted;
    bool success = false;
    int pushes_used = 0;
    Scene final_scene;
    std::vector<PushRecord> steps;
};

/// True iff a pusher disc can sit at the approach point (handle position
/// backed off along the normal) without touching any object. Table edges do
/// not block the pusher.
inline bool feasibility_check(const Scene& scene, const PushHandle& handle,
                              double radius = 0.015, double backoff = 0.02) {
    Vec2 center = handle.position - handle.normal * backoff;
    for (const SceneObject& obj : scene.objects) {
        Polygon world = obj.world_polygon();
        if (convex_contains(world, center)) return false;
        for (std::size_t i = 0, n = world.size(); i < n; ++i)
            if (point_segment_distance(center, world[i], world[(i + 1) % n]) <= radius)
                return false;
    }
    return true;
}

namespace detail {

/// One-step lookahead rank: label first, then how many objects end
/// singulated, then the final clearance. Quantized so the scalar order equals
/// the lexicographic tuple order.
inline double oracle_scalar(const Scene& before, const PushHandle& handle,
                            const std::vector<Segment>& segments, const TrialConfig& config) {
    auto [after, outcome] = apply_push(before, to_push_command(handle));
    PushLabel label = label_push(before, after, outcome, handle, segments, config.criteria);
    int n_singulated = 0;
    for (const SceneObject& o : after.objects)
        n_singulated +=
            (object_min_distance(after, o.id) >= config.singulation_threshold) ? 1 : 0;
    double frac = after.objects.empty() ? 0.0 : double(n_singulated) / double(after.objects.size());
    double clearance = std::min(min_pairwise_distance(after), 0.3);
    return 100.0 * label.label + 10.0 * frac + clearance;
}

inline std::vector<double> score_proposals(const std::vector<PushProposal>& proposals,
                                           const std::vector<bool>& feasible, const Scene& scene,
                                           const ObservationImage& obs,
                                           const std::vector<Segment>& segments,
                                           const TrialConfig& config, const NetworkParams* model,
                                           const TrackState& tracks, Rng& policy_rng) {
    std::vector<double> scores(proposals.size(), 0.0);
    switch (config.policy) {
        case Policy::random:
            for (double& s : scores) s = policy_rng.next_double();
            break;
        case Policy::vanilla_network:
        case Policy::aggregated_network: {
            std::vector<PushImage> batch;
            batch.reserve(proposals.size());
            for (const PushProposal& p : proposals) batch.push_back(encode(obs, p));
            scores = forward(*model, batch);
            break;
        }
        case Policy::baseline: {
            SegmentGraph graph = build_segment_graph(segments);
            for (std::size_t i = 0; i < proposals.size(); ++i)
                scores[i] = baseline_score(graph, tracks, proposals[i].handle).score;
            break;
        }
        case Policy::oracle:
            for (std::size_t i = 0; i < proposals.size(); ++i)
                scores[i] = feasible[i]
                                ? oracle_scalar(scene, proposals[i].handle, segments, config)
                                : 0.0;
            break;
    }
    return scores;
}

}  // namespace detail

/// Closed loop: observe, sample, rank, execute the best feasible proposal,
/// stop on singulation, budget exhaustion, or (for network policies) when no
/// feasible proposal clears the positive threshold.
inline TrialRecord run_trial(const TrialConfig& config, const NetworkParams* model,
                             const Scene& start, std::uint64_t trial_seed) {
    if (is_network_policy(config.policy) && !model)
        throw std::invalid_argument("run_trial: network policy requires a model");

    TrialRecord rec;
    rec.config = config;
    rec.seed = trial_seed;
    Scene scene = start;
    ViewTransform view = fit_view(config.table);
    TrackState tracks;
    Rng policy_rng(derive_seed(trial_seed, 0x7A4D0));

    int budget = config.resolved_max_pushes();
    for (int p = 0; p < budget; ++p) {
        if (is_singulated(scene, config.singulation_threshold)) {
            rec.status = TrialStatus::success;
            break;
        }
        auto segments =
            over_segment(scene, derive_seed(trial_seed, 0xB5E00 + std::uint64_t(p)),
                         config.split_prob);
        ObservationImage obs = render(scene, segments, view);
        auto handles =
            sample_handles(segments, config.table, config.per_segment,
                           derive_seed(trial_seed, 0x44A00 + std::uint64_t(p)),
                           config.push_length);
        ProposalSet set = to_proposals(handles, view);
        if (config.policy == Policy::baseline) tracks = advance_tracks(tracks, segments, config.table);

        PushRecord step;
        step.push_index = p;
        step.before = scene;
        step.candidates = set.proposals;
        step.feasible.resize(set.proposals.size());
        for (std::size_t i = 0; i < set.proposals.size(); ++i)
            step.feasible[i] = feasibility_check(scene, set.proposals[i].handle,
                                                 config.pusher_radius, config.approach_backoff);
        step.scores = detail::score_proposals(set.proposals, step.feasible, scene, obs, segments,
                                              config, model, tracks, policy_rng);

        // rank by score descending, stable on the sampling order
        std::vector<std::size_t> order(set.proposals.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return step.scores[a] > step.scores[b];
        });
        int chosen = -1;
        for (std::size_t i : order) {
            if (!step.feasible[i]) continue;
            if (is_network_policy(config.policy) && step.scores[i] < config.positive_threshold)
                break;  // ranked worse from here on
            chosen = int(i);
            break;
        }
        if (chosen < 0) {
            rec.status = TrialStatus::no_feasible_positive;
            rec.steps.push_back(std::move(step));
            break;
        }

        step.chosen = chosen;
        const PushProposal& pick = step.candidates[std::size_t(chosen)];
        auto [after, outcome] = apply_push(scene, to_push_command(pick.handle));
        step.outcome = outcome;
        step.label = label_push(scene, after, outcome, pick.handle, segments, config.criteria);
        step.sample.image = encode(obs, pick);
        step.sample.label = step.label.label;
        step.sample.push_index = p;
        step.sample.policy = policy_name(config.policy);
        if (config.policy == Policy::baseline) record_push(tracks, pick.handle.segment);

        scene = std::move(after);
        rec.steps.push_back(std::move(step));
        ++rec.pushes_used;
    }
    if (rec.status == TrialStatus::push_budget_exhausted &&
        is_singulated(scene, config.singulation_threshold))
        rec.status = TrialStatus::success;
    rec.success = rec.status == TrialStatus::success;
    rec.final_scene = std::move(scene);
    return rec;
}

/// Scene generation for trial t of a run; independent of the policy so every
/// policy replays identical starting configurations.
inline Scene scene_for_trial(const TrialConfig& config, std::uint64_t trial_seed) {
    return generate_scene(config.n_objects, default_shape_library(), config.table,
                          derive_seed(trial_seed, 0x5CE11E));
}

inline std::uint64_t trial_seed_for(std::uint64_t base_seed, int n_objects, int trial) {
    return derive_seed(derive_seed(base_seed, 0x0B1EC7 + std::uint64_t(n_objects)),
                       std::uint64_t(trial));
}

/// Compact audit line per ranking step.
inline nlohmann::json step_json(const TrialRecord& rec, const PushRecord& step) {
    nlohmann::json moved = nlohmann::json::array();
    for (int id : step.outcome.moved_ids) moved.push_back(id);
    nlohmann::json j = {{"trial_seed", rec.seed},
                        {"policy", policy_name(rec.config.policy)},
                        {"push", step.push_index},
                        {"n_candidates", step.candidates.size()},
                        {"chosen", step.chosen},
                        {"scores", step.scores}};
    if (step.chosen >= 0) {
        j["proposal"] = to_json(step.candidates[std::size_t(step.chosen)]);
        j["score"] = step.scores[std::size_t(step.chosen)];
        j["moved"] = moved;
        j["advance"] = step.outcome.advance;
        j["truncated"] = step.outcome.truncated;
        j["label"] = to_json(step.label);
    }
    return j;
}

struct CollectConfig {
    TrialConfig trial;
    int n_trials = 10;
    std::uint64_t base_seed = 1;
    double validation_fraction = 0.1;  ///< trailing trials flagged for validation
    std::int64_t trial_id_offset = 0;
};

struct CollectSummary {
    int trials = 0;
    int samples = 0;
    int positives = 0;
    int successes = 0;
};

/// Runs trials and appends one labeled sample per executed push; per-sample
/// meta records the trial seed and the oracle breakdown for replay and audit.
inline CollectSummary collect_dataset(const CollectConfig& config, const NetworkParams* model,
                                      const std::string& out_base,
                                      DatasetWriter::Mode mode = DatasetWriter::Mode::create,
                                      std::ostream* trial_log = nullptr) {
    DatasetWriter writer(out_base, mode);
    CollectSummary summary;
    int first_validation =
        config.n_trials - int(std::floor(config.validation_fraction * config.n_trials));
    for (int t = 0; t < config.n_trials; ++t) {
        std::uint64_t trial_seed =
            trial_seed_for(config.base_seed, config.trial.n_objects, t);
        Scene scene = scene_for_trial(config.trial, trial_seed);
        TrialRecord rec = run_trial(config.trial, model, scene, trial_seed);
        for (PushRecord& step : rec.steps) {
            if (trial_log) (*trial_log) << step_json(rec, step).dump() << '\n';
            if (step.chosen < 0) continue;
            step.sample.trial = config.trial_id_offset + t;
            step.sample.validation = t >= first_validation;
            nlohmann::json meta = {{"trial_seed", trial_seed},
                                   {"score", step.scores[std::size_t(step.chosen)]},
                                   {"breakdown", to_json(step.label)}};
            writer.append(step.sample, meta);
            ++summary.samples;
            summary.positives += step.sample.label;
        }
        ++summary.trials;
        summary.successes += rec.success ? 1 : 0;
    }
    return summary;
}

struct IterationPaths {
    std::string round1_data;
    std::string round2_data;
    std::string merged_data;
    std::string f1_model;
    std::string f2_model;
};

struct IterationResult {
    TrainResult f1;
    TrainResult f2;
    CollectSummary round1;
    CollectSummary round2;
};

/// Two training iterations: F1 learns from random interaction, then collects
/// its own round of experience; F2 learns from the merged dataset. Both share
/// the architecture, training seed, and encoder conventions.
inline IterationResult train_iterations(const CollectConfig& round1_config,
                                        const CollectConfig& round2_config,
                                        const TrainConfig& train_config,
                                        std::uint64_t train_seed,
                                        const EncoderConventions& conventions,
                                        const IterationPaths& paths) {
    if (round1_config.trial.policy != Policy::random)
        throw std::invalid_argument("train_iterations: round 1 must use the random policy");
    if (round2_config.trial.policy != Policy::vanilla_network)
        throw std::invalid_argument("train_iterations: round 2 must use the vanilla network");

    IterationResult result;
    result.round1 = collect_dataset(round1_config, nullptr, paths.round1_data);
    Dataset round1 = load_dataset(paths.round1_data);
    result.f1 = train(round1.samples, train_config, train_seed);
    save_model(result.f1.params, conventions, paths.f1_model);

    result.round2 = collect_dataset(round2_config, &result.f1.params, paths.round2_data);
    merge_datasets({paths.round1_data, paths.round2_data}, paths.merged_data);
    Dataset merged = load_dataset(paths.merged_data);
    result.f2 = train(merged.samples, train_config, train_seed);
    save_model(result.f2.params, conventions, paths.f2_model);
    return result;
}

struct EvalPolicy {
    Policy policy = Policy::random;
    const NetworkParams* model = nullptr;
};

struct EvalRow {
    std::string policy;
    int n_objects = 0;
    int trial = 0;
    int pushes_used = 0;
    bool success = false;
};

struct EvalCell {
    std::string policy;
    int n_objects = 0;
    int trials = 0;
    int successes = 0;
    double success_rate = 0.0;
    double mean_pushes = 0.0;  ///< among successful trials
    double std_pushes = 0.0;   ///< population deviation among successful trials
    std::vector<double> curve;  ///< curve[k]: success fraction within k pushes
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<EvalCell> cells;
};

/// Benchmarks every policy on identical scene seeds per object count.
inline EvalReport evaluate(const std::vector<EvalPolicy>& policies,
                           const std::vector<int>& object_counts, int n_trials,
                           std::uint64_t base_seed, const TrialConfig& trial_template) {
    EvalReport report;
    for (const EvalPolicy& entry : policies) {
        for (int n : object_counts) {
            TrialConfig config = trial_template;
            config.policy = entry.policy;
            config.n_objects = n;
            EvalCell cell;
            cell.policy = policy_name(entry.policy);
            cell.n_objects = n;
            cell.trials = n_trials;
            cell.curve.assign(std::size_t(config.resolved_max_pushes()) + 1, 0.0);
            std::vector<int> success_pushes;
            for (int t = 0; t < n_trials; ++t) {
                std::uint64_t trial_seed = trial_seed_for(base_seed, n, t);
                Scene scene = scene_for_trial(config, trial_seed);
                TrialRecord rec = run_trial(config, entry.model, scene, trial_seed);
                report.rows.push_back(
                    {cell.policy, n, t, rec.pushes_used, rec.success});
                if (rec.success) {
                    ++cell.successes;
                    success_pushes.push_back(rec.pushes_used);
                    for (std::size_t k = std::size_t(rec.pushes_used); k < cell.curve.size(); ++k)
                        cell.curve[k] += 1.0;
                }
            }
            if (n_trials > 0) {
                for (double& v : cell.curve) v /= double(n_trials);
                cell.success_rate = double(cell.successes) / double(n_trials);
            }
            if (!success_pushes.empty()) {
                double sum = std::accumulate(success_pushes.begin(), success_pushes.end(), 0.0);
                cell.mean_pushes = sum / double(success_pushes.size());
                double var = 0.0;
                for (int v : success_pushes) {
                    double d = v - cell.mean_pushes;
                    var += d * d;
                }
                cell.std_pushes = std::sqrt(var / double(success_pushes.size()));
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

inline std::string report_csv(const EvalReport& report) {
    std::string csv = "policy,n_objects,trial,pushes_used,success\n";
    for (const EvalRow& r : report.rows)
        csv += r.policy + "," + std::to_string(r.n_objects) + "," + std::to_string(r.trial) +
               "," + std::to_string(r.pushes_used) + "," + (r.success ? "1" : "0") + "\n";
    return csv;
}

inline nlohmann::json report_json(const EvalReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const EvalCell& c : report.cells)
        cells.push_back({{"policy", c.policy},
                         {"n_objects", c.n_objects},
                         {"trials", c.trials},
                         {"successes", c.successes},
                         {"success_rate", c.success_rate},
                         {"mean_pushes", c.mean_pushes},
                         {"std_pushes", c.std_pushes},
                         {"curve", c.curve}});
    return {{"cells", cells}};
}

}  // namespace singulate
