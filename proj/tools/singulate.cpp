#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "singulate/dataset.hpp"
#include "singulate/model_io.hpp"
#include "singulate/observation_io.hpp"
#include "singulate/runner.hpp"
#include "singulate/scene_json.hpp"

namespace {

using namespace singulate;
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- logging

enum class LogLevel { silent = 0, error = 1, warn = 2, info = 3, debug = 4 };

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SINGULATE_LOG");
        std::string v = env ? env : "info";
        if (v == "silent") return LogLevel::silent;
        if (v == "error") return LogLevel::error;
        if (v == "warn") return LogLevel::warn;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

void log_at(LogLevel level, const char* tag, const std::string& msg) {
    if (level <= log_level()) std::cerr << "singulate [" << tag << "] " << msg << "\n";
}
void log_info(const std::string& msg) { log_at(LogLevel::info, "info", msg); }
void log_warn(const std::string& msg) { log_at(LogLevel::warn, "warn", msg); }

// ---------------------------------------------------------------- errors

/// Exit codes: 0 ok, 1 runtime failure, 2 usage, 3 missing input file,
/// 4 schema or format mismatch, 5 checksum or version mismatch.
struct CliError {
    int code;
    std::string kind;
    std::string message;
};

CliError usage_error(std::string msg) { return {2, "usage", std::move(msg)}; }
CliError missing_file(const std::string& path) {
    return {3, "missing_file", "no such file: " + path};
}

void print_error_line(const CliError& e) {
    std::cerr << json{{"error",
                       {{"code", e.code}, {"kind", e.kind}, {"message", e.message}}}}
                     .dump()
              << "\n";
}

// ---------------------------------------------------------------- small utils

/// Shortest decimal form that parses back to the same double.
std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw missing_file(path);
}

void ensure_parent_dir(const std::string& path) {
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw missing_file(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

bool files_equal(const std::string& a, const std::string& b) {
    return read_text(a) == read_text(b);
}

// ---------------------------------------------------------------- config files

/// Flat key=value pairs in declaration order; repeated keys feed vector options.
using IniSection = std::vector<std::pair<std::string, std::string>>;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::map<std::string, IniSection> parse_config_text(const std::string& text,
                                                    const std::string& origin) {
    std::map<std::string, IniSection> out;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        std::string where = origin + " line " + std::to_string(line_no);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) throw usage_error(where + ": empty section name");
            out[section];
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) throw usage_error(where + ": expected key=value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw usage_error(where + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (section.empty()) throw usage_error(where + ": key outside a section");
        out[section].emplace_back(std::move(key), std::move(value));
    }
    return out;
}

void write_config_file(const std::string& path, const std::string& section,
                       const IniSection& kv) {
    std::string text = "[" + section + "]\n";
    for (const auto& [key, value] : kv) {
        bool quote = value.find_first_of(" \t") != std::string::npos;
        text += key + "=" + (quote ? "\"" + value + "\"" : value) + "\n";
    }
    write_text(path, text);
}

// ---------------------------------------------------------------- shared options

const std::vector<std::string> all_policy_names = {"random", "vanilla_network",
                                                   "aggregated_network", "baseline", "oracle"};

/// Trial parameters shared by every subcommand that runs the closed loop.
struct TrialOpts {
    int objects = 4;
    int max_pushes = 0;
    double threshold = default_singulation_threshold;
    double positive_threshold = 0.5;
    double split_prob = 0.4;
    int per_segment = 16;
    double push_length = 0.2;
    double table_width = 1.0;
    double table_height = 0.8;
};

void add_trial_options(CLI::App* cmd, TrialOpts& t, bool with_objects = true) {
    if (with_objects)
        cmd->add_option("--objects", t.objects, "objects per scene")
            ->check(CLI::PositiveNumber);
    cmd->add_option("--max-pushes", t.max_pushes, "push budget, 0 = floor(1.3 n) + 1")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--threshold", t.threshold, "singulation distance in meters")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--positive-threshold", t.positive_threshold, "network acceptance cut")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--split-prob", t.split_prob, "over-segmentation split probability")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--per-segment", t.per_segment, "push proposals per segment")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--push-length", t.push_length, "push length in meters")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--table-width", t.table_width, "table width in meters")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--table-height", t.table_height, "table height in meters")
        ->check(CLI::PositiveNumber);
}

TrialConfig make_trial_config(const TrialOpts& t, Policy policy) {
    TrialConfig c;
    c.n_objects = t.objects;
    c.max_pushes = t.max_pushes;
    c.singulation_threshold = t.threshold;
    c.policy = policy;
    c.positive_threshold = t.positive_threshold;
    c.split_prob = t.split_prob;
    c.per_segment = t.per_segment;
    c.push_length = t.push_length;
    c.table = {t.table_width, t.table_height, {0.0, 0.0}};
    return c;
}

IniSection trial_kv(const TrialOpts& t, bool with_objects = true) {
    IniSection kv;
    if (with_objects) kv.emplace_back("objects", std::to_string(t.objects));
    kv.emplace_back("max-pushes", std::to_string(t.max_pushes));
    kv.emplace_back("threshold", fmt_double(t.threshold));
    kv.emplace_back("positive-threshold", fmt_double(t.positive_threshold));
    kv.emplace_back("split-prob", fmt_double(t.split_prob));
    kv.emplace_back("per-segment", std::to_string(t.per_segment));
    kv.emplace_back("push-length", fmt_double(t.push_length));
    kv.emplace_back("table-width", fmt_double(t.table_width));
    kv.emplace_back("table-height", fmt_double(t.table_height));
    return kv;
}

void append_kv(IniSection& kv, IniSection more) {
    for (auto& p : more) kv.push_back(std::move(p));
}

/// Loads a model and rejects one whose stored encoder conventions disagree
/// with this build; scoring with mismatched conventions would be silent skew.
ModelFile load_model_checked(const std::string& path) {
    require_file(path);
    ModelFile model = load_model(path);
    if (!(model.conventions == EncoderConventions{}))
        throw FormatError("model encoder conventions disagree with this build's encoder");
    return model;
}

std::size_t parameter_count(const NetworkParams& params) {
    std::size_t n = 0;
    for (const LayerParams& l : params.layers) n += l.w.size() + l.b.size();
    return n;
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
    std::string csv = "epoch,train_loss,val_loss,val_accuracy\n";
    for (std::size_t e = 0; e < log.size(); ++e)
        csv += std::to_string(e + 1) + "," + fmt_double(log[e].train_loss) + "," +
               fmt_double(log[e].val_loss) + "," + fmt_double(log[e].val_accuracy) + "\n";
    return csv;
}

// ---------------------------------------------------------------- collect

struct CollectOpts {
    std::string config;
    std::uint64_t seed = 1;
    int jobs = 1;
    TrialOpts trial;
    int trials = 10;
    std::string policy = "random";
    std::string model;
    std::string out;
    double validation_fraction = 0.1;
    std::int64_t trial_offset = 0;
    bool append = false;
};

CLI::App* add_collect_command(CLI::App& app, CollectOpts& o) {
    auto* cmd = app.add_subcommand("collect", "run trials and store labeled push samples");
    cmd->add_option("--config", o.config, "config file, [collect] section");
    cmd->add_option("--seed", o.seed, "base seed for trial derivation");
    cmd->add_option("--jobs", o.jobs, "worker count; execution stays sequential")
        ->check(CLI::PositiveNumber);
    add_trial_options(cmd, o.trial);
    cmd->add_option("--trials", o.trials, "number of trials")->check(CLI::NonNegativeNumber);
    cmd->add_option("--policy", o.policy, "ranking policy")
        ->check(CLI::IsMember(all_policy_names));
    cmd->add_option("--model", o.model, "model file for network policies");
    cmd->add_option("--out", o.out, "output dataset base path")->required();
    cmd->add_option("--validation-fraction", o.validation_fraction,
                    "trailing trial fraction flagged for validation")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--trial-offset", o.trial_offset, "added to stored trial ids");
    cmd->add_flag("--append", o.append, "append to an existing dataset");
    return cmd;
}

IniSection collect_kv(const CollectOpts& o) {
    IniSection kv = {{"seed", std::to_string(o.seed)},
                     {"jobs", std::to_string(o.jobs)},
                     {"trials", std::to_string(o.trials)},
                     {"policy", o.policy},
                     {"model", o.model},
                     {"out", o.out},
                     {"validation-fraction", fmt_double(o.validation_fraction)},
                     {"trial-offset", std::to_string(o.trial_offset)},
                     {"append", o.append ? "true" : "false"}};
    append_kv(kv, trial_kv(o.trial));
    return kv;
}

CollectSummary execute_collect(const CollectOpts& o) {
    Policy policy = policy_from_name(o.policy);
    ModelFile model;
    const NetworkParams* params = nullptr;
    if (is_network_policy(policy)) {
        if (o.model.empty())
            throw usage_error("collect: policy " + o.policy + " requires --model");
        model = load_model_checked(o.model);
        params = &model.params;
    } else if (!o.model.empty()) {
        log_warn("collect: --model is ignored for policy " + o.policy);
    }
    if (o.append) {
        require_file(o.out + ".ndjson");
        require_file(o.out + ".blob");
    }
    ensure_parent_dir(o.out);

    CollectConfig config;
    config.trial = make_trial_config(o.trial, policy);
    config.n_trials = o.trials;
    config.base_seed = o.seed;
    config.validation_fraction = o.validation_fraction;
    config.trial_id_offset = o.trial_offset;

    auto mode = o.append ? DatasetWriter::Mode::append : DatasetWriter::Mode::create;
    std::string steps_path = o.out + ".steps.ndjson";
    std::ofstream steps(steps_path,
                        std::ios::binary | (o.append ? std::ios::app : std::ios::trunc));
    if (!steps) throw std::runtime_error("cannot open for writing: " + steps_path);
    log_info("collect: " + std::to_string(o.trials) + " trials with " +
             std::to_string(o.trial.objects) + " objects, policy " + o.policy);
    CollectSummary summary = collect_dataset(config, params, o.out, mode, &steps);
    steps.flush();
    if (!steps) throw std::runtime_error("write failed: " + steps_path);
    write_config_file(o.out + ".config.ini", "collect", collect_kv(o));
    log_info("collect: " + std::to_string(summary.samples) + " samples, " +
             std::to_string(summary.positives) + " positive, " +
             std::to_string(summary.successes) + "/" + std::to_string(summary.trials) +
             " trials singulated");
    return summary;
}

int cmd_collect(const CollectOpts& o) {
    CollectSummary s = execute_collect(o);
    std::cout << json{{"command", "collect"},
                      {"out", o.out},
                      {"trials", s.trials},
                      {"samples", s.samples},
                      {"positives", s.positives},
                      {"successes", s.successes}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
    std::string config;
    std::uint64_t seed = 7;
    int jobs = 1;
    std::string data;
    std::string out;
    int epochs = 25;
    int batch_size = 64;
    double lr = 1e-3;
    double negatives_per_positive = 3.0;
    double decay = 0.0;
};

CLI::App* add_train_command(CLI::App& app, TrainOpts& o) {
    auto* cmd = app.add_subcommand("train", "fit the push proposal network on a dataset");
    cmd->add_option("--config", o.config, "config file, [train] section");
    cmd->add_option("--seed", o.seed, "training seed");
    cmd->add_option("--jobs", o.jobs, "worker count; execution stays sequential")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--data", o.data, "input dataset base path")->required();
    cmd->add_option("--out", o.out, "output model file")->required();
    cmd->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", o.batch_size, "minibatch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--negatives-per-positive", o.negatives_per_positive,
                    "oversample positives up to this ratio")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--decay", o.decay, "learning rate decay")->check(CLI::NonNegativeNumber);
    return cmd;
}

IniSection train_config_kv(const TrainOpts& o) {
    return {{"seed", std::to_string(o.seed)},
            {"jobs", std::to_string(o.jobs)},
            {"data", o.data},
            {"out", o.out},
            {"epochs", std::to_string(o.epochs)},
            {"batch-size", std::to_string(o.batch_size)},
            {"lr", fmt_double(o.lr)},
            {"negatives-per-positive", fmt_double(o.negatives_per_positive)},
            {"decay", fmt_double(o.decay)}};
}

TrainConfig make_train_config(const TrainOpts& o) {
    TrainConfig config;
    config.epochs = o.epochs;
    config.batch_size = o.batch_size;
    config.learning_rate = o.lr;
    config.negatives_per_positive = o.negatives_per_positive;
    config.decay = o.decay;
    return config;
}

int cmd_train(const TrainOpts& o) {
    require_file(o.data + ".ndjson");
    require_file(o.data + ".blob");
    Dataset dataset = load_dataset(o.data);
    log_info("train: " + std::to_string(dataset.samples.size()) + " samples, " +
             std::to_string(o.epochs) + " epochs");
    TrainResult result = train(dataset.samples, make_train_config(o), o.seed);
    ensure_parent_dir(o.out);
    save_model(result.params, EncoderConventions{}, o.out);
    write_text(o.out + ".log.csv", epoch_log_csv(result.log));
    write_config_file(o.out + ".config.ini", "train", train_config_kv(o));
    const EpochLog& last = result.log.back();
    log_info("train: final train loss " + fmt_double(last.train_loss));
    std::cout << json{{"command", "train"},
                      {"model", o.out},
                      {"samples", dataset.samples.size()},
                      {"parameters", parameter_count(result.params)},
                      {"train_loss", last.train_loss},
                      {"val_loss", last.val_loss},
                      {"val_accuracy", last.val_accuracy}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- aggregate

struct AggregateOpts {
    std::string config;
    int jobs = 1;
    std::string out;
    std::uint64_t seed = 1;
    std::uint64_t round2_seed = 2;
    std::uint64_t train_seed = 7;
    TrialOpts trial;
    int round2_objects = 6;
    int trials = 100;
    int round2_trials = 0;  ///< 0 = same as --trials
    double validation_fraction = 0.1;
    int epochs = 25;
    int batch_size = 64;
    double lr = 1e-3;
    double negatives_per_positive = 3.0;
    double decay = 0.0;
};

CLI::App* add_aggregate_command(CLI::App& app, AggregateOpts& o) {
    auto* cmd = app.add_subcommand(
        "aggregate", "two-round pipeline: random data -> F1, F1 data merged -> F2");
    cmd->add_option("--config", o.config, "config file, [aggregate] section");
    cmd->add_option("--jobs", o.jobs, "worker count; execution stays sequential")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "output directory")->required();
    cmd->add_option("--seed", o.seed, "round 1 collection seed");
    cmd->add_option("--round2-seed", o.round2_seed, "round 2 collection seed");
    cmd->add_option("--train-seed", o.train_seed, "training seed, shared by F1 and F2");
    add_trial_options(cmd, o.trial);
    cmd->add_option("--round2-objects", o.round2_objects, "objects per round 2 scene")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--trials", o.trials, "round 1 trials")->check(CLI::NonNegativeNumber);
    cmd->add_option("--round2-trials", o.round2_trials, "round 2 trials, 0 = same as --trials")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--validation-fraction", o.validation_fraction,
                    "trailing trial fraction flagged for validation")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--epochs", o.epochs, "training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", o.batch_size, "minibatch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--negatives-per-positive", o.negatives_per_positive,
                    "oversample positives up to this ratio")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--decay", o.decay, "learning rate decay")->check(CLI::NonNegativeNumber);
    return cmd;
}

IniSection aggregate_kv(const AggregateOpts& o) {
    IniSection kv = {{"out", o.out},
                     {"jobs", std::to_string(o.jobs)},
                     {"seed", std::to_string(o.seed)},
                     {"round2-seed", std::to_string(o.round2_seed)},
                     {"train-seed", std::to_string(o.train_seed)},
                     {"round2-objects", std::to_string(o.round2_objects)},
                     {"trials", std::to_string(o.trials)},
                     {"round2-trials", std::to_string(o.round2_trials)},
                     {"validation-fraction", fmt_double(o.validation_fraction)},
                     {"epochs", std::to_string(o.epochs)},
                     {"batch-size", std::to_string(o.batch_size)},
                     {"lr", fmt_double(o.lr)},
                     {"negatives-per-positive", fmt_double(o.negatives_per_positive)},
                     {"decay", fmt_double(o.decay)}};
    append_kv(kv, trial_kv(o.trial));
    return kv;
}

int cmd_aggregate(const AggregateOpts& o) {
    fs::create_directories(o.out);
    int round2_trials = o.round2_trials > 0 ? o.round2_trials : o.trials;

    CollectConfig round1;
    round1.trial = make_trial_config(o.trial, Policy::random);
    round1.n_trials = o.trials;
    round1.base_seed = o.seed;
    round1.validation_fraction = o.validation_fraction;

    CollectConfig round2 = round1;
    round2.trial.policy = Policy::vanilla_network;
    round2.trial.n_objects = o.round2_objects;
    round2.n_trials = round2_trials;
    round2.base_seed = o.round2_seed;
    round2.trial_id_offset = o.trials;

    fs::path dir(o.out);
    IterationPaths paths;
    paths.round1_data = (dir / "round1").string();
    paths.round2_data = (dir / "round2").string();
    paths.merged_data = (dir / "merged").string();
    paths.f1_model = (dir / "f1.model").string();
    paths.f2_model = (dir / "f2.model").string();

    TrainConfig train_config;
    train_config.epochs = o.epochs;
    train_config.batch_size = o.batch_size;
    train_config.learning_rate = o.lr;
    train_config.negatives_per_positive = o.negatives_per_positive;
    train_config.decay = o.decay;

    log_info("aggregate: round 1 " + std::to_string(o.trials) + " trials at " +
             std::to_string(o.trial.objects) + " objects, round 2 " +
             std::to_string(round2_trials) + " trials at " +
             std::to_string(o.round2_objects) + " objects");
    IterationResult result = train_iterations(round1, round2, train_config, o.train_seed,
                                              EncoderConventions{}, paths);
    write_text(paths.f1_model + ".log.csv", epoch_log_csv(result.f1.log));
    write_text(paths.f2_model + ".log.csv", epoch_log_csv(result.f2.log));
    write_config_file((dir / "aggregate.config.ini").string(), "aggregate", aggregate_kv(o));
    log_info("aggregate: F1 and F2 written to " + o.out);
    std::cout << json{{"command", "aggregate"},
                      {"out", o.out},
                      {"f1_model", paths.f1_model},
                      {"f2_model", paths.f2_model},
                      {"round1",
                       {{"trials", result.round1.trials},
                        {"samples", result.round1.samples},
                        {"positives", result.round1.positives},
                        {"successes", result.round1.successes}}},
                      {"round2",
                       {{"trials", result.round2.trials},
                        {"samples", result.round2.samples},
                        {"positives", result.round2.positives},
                        {"successes", result.round2.successes}}}}
                     .dump()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
    std::string config;
    int jobs = 1;
    std::uint64_t seed = 1;
    int trials = 100;
    std::vector<std::string> policies{"random"};
    std::vector<std::string> models;
    std::vector<int> objects{4};
    TrialOpts trial;
    std::string out;
};

CLI::App* add_eval_command(CLI::App& app, EvalOpts& o) {
    auto* cmd = app.add_subcommand("eval", "benchmark policies on identical seeded scenes");
    cmd->add_option("--config", o.config, "config file, [eval] section");
    cmd->add_option("--jobs", o.jobs, "worker count; execution stays sequential")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "base seed for trial derivation");
    cmd->add_option("--trials", o.trials, "trials per policy and object count")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--policy", o.policies, "policies to benchmark, repeatable")
        ->check(CLI::IsMember(all_policy_names));
    cmd->add_option("--model", o.models,
                    "model files matched in order to the network policies, repeatable");
    cmd->add_option("--objects", o.objects, "object counts, repeatable")
        ->check(CLI::PositiveNumber);
    add_trial_options(cmd, o.trial, false);
    cmd->add_option("--out", o.out, "report base path, writes <out>.csv and <out>.json")
        ->required();
    return cmd;
}

IniSection eval_kv(const EvalOpts& o) {
    IniSection kv = {{"seed", std::to_string(o.seed)},
                     {"jobs", std::to_string(o.jobs)},
                     {"trials", std::to_string(o.trials)},
                     {"out", o.out}};
    for (const std::string& p : o.policies) kv.emplace_back("policy", p);
    for (const std::string& m : o.models) kv.emplace_back("model", m);
    for (int n : o.objects) kv.emplace_back("objects", std::to_string(n));
    append_kv(kv, trial_kv(o.trial, false));
    return kv;
}

int cmd_eval(const EvalOpts& o) {
    std::size_t network_count = 0;
    for (const std::string& name : o.policies)
        network_count += is_network_policy(policy_from_name(name)) ? 1 : 0;
    if (o.models.size() != network_count)
        throw usage_error("eval: " + std::to_string(network_count) +
                          " network policies need exactly as many --model files, got " +
                          std::to_string(o.models.size()));

    std::deque<ModelFile> storage;
    std::vector<EvalPolicy> policies;
    std::size_t next_model = 0;
    for (const std::string& name : o.policies) {
        EvalPolicy entry{policy_from_name(name), nullptr};
        if (is_network_policy(entry.policy)) {
            storage.push_back(load_model_checked(o.models[next_model++]));
            entry.model = &storage.back().params;
        }
        policies.push_back(entry);
    }

    TrialConfig tmpl = make_trial_config(o.trial, Policy::random);
    log_info("eval: " + std::to_string(o.policies.size()) + " policies x " +
             std::to_string(o.objects.size()) + " object counts x " +
             std::to_string(o.trials) + " trials");
    EvalReport report = evaluate(policies, o.objects, o.trials, o.seed, tmpl);
    ensure_parent_dir(o.out);
    write_text(o.out + ".csv", report_csv(report));
    json j = report_json(report);
    write_text(o.out + ".json", j.dump(2) + "\n");
    write_config_file(o.out + ".config.ini", "eval", eval_kv(o));
    std::cout << j.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------- replay

struct ReplayOpts {
    std::string config;
    std::string data;
    std::string out;  ///< empty = <data>.replay
};

CLI::App* add_replay_command(CLI::App& app, ReplayOpts& o) {
    auto* cmd = app.add_subcommand(
        "replay", "re-derive a collected dataset from its stored config and compare bytes");
    cmd->add_option("--config", o.config, "config file, [replay] section");
    cmd->add_option("--data", o.data, "collected dataset base path")->required();
    cmd->add_option("--out", o.out, "replay output base path, default <data>.replay");
    return cmd;
}

int cmd_replay(const ReplayOpts& o) {
    require_file(o.data + ".ndjson");
    require_file(o.data + ".blob");
    require_file(o.data + ".steps.ndjson");
    std::string config_path = o.data + ".config.ini";
    require_file(config_path);

    auto ini = parse_config_text(read_text(config_path), config_path);
    auto section = ini.find("collect");
    if (section == ini.end())
        throw CliError{4, "schema", "replay: " + config_path + " has no [collect] section"};
    for (const auto& [key, value] : section->second)
        if (key == "append" && value == "true")
            throw CliError{1, "runtime",
                           "replay: appended datasets replay from their constituent runs"};

    std::string out = o.out.empty() ? o.data + ".replay" : o.out;
    std::vector<std::string> args{"collect"};
    for (const auto& [key, value] : section->second) {
        if (key == "config" || key == "out" || key == "append") continue;
        if (value.empty()) continue;  // unset optional string
        args.push_back("--" + key + "=" + value);
    }
    args.push_back("--out=" + out);

    CLI::App shadow{"replay"};
    CollectOpts replayed;
    add_collect_command(shadow, replayed);
    std::reverse(args.begin(), args.end());
    try {
        shadow.parse(args);
    } catch (const CLI::ParseError& e) {
        throw CliError{4, "schema",
                       std::string("replay: stored config is invalid: ") + e.what()};
    }

    log_info("replay: re-collecting " + std::to_string(replayed.trials) +
             " trials with policy " + replayed.policy);
    execute_collect(replayed);

    bool identical = true;
    json files = json::object();
    for (const char* ext : {".ndjson", ".blob", ".steps.ndjson"}) {
        bool same = files_equal(o.data + ext, out + ext);
        files[ext] = same;
        identical = identical && same;
    }
    std::cout << json{{"command", "replay"},
                      {"source", o.data},
                      {"replay", out},
                      {"identical", identical},
                      {"files", files}}
                     .dump()
              << "\n";
    if (!identical) throw CliError{1, "runtime", "replay diverged from the stored dataset"};
    log_info("replay: byte-identical");
    return 0;
}

// ---------------------------------------------------------------- inspect

struct InspectOpts {
    std::string config;
    int jobs = 1;
    std::uint64_t seed = 1;
    int trial = 0;
    TrialOpts trial_opts;
    std::string policy = "baseline";
    std::string model;
    int proposal = -1;  ///< -1 = the proposal the trial loop would execute
    std::string out;
};

CLI::App* add_inspect_command(CLI::App& app, InspectOpts& o) {
    auto* cmd = app.add_subcommand(
        "inspect", "dump the first ranking step of a trial: images and score table");
    cmd->add_option("--config", o.config, "config file, [inspect] section");
    cmd->add_option("--jobs", o.jobs, "worker count; execution stays sequential")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", o.seed, "base seed for trial derivation");
    cmd->add_option("--trial", o.trial, "trial index under the base seed")
        ->check(CLI::NonNegativeNumber);
    add_trial_options(cmd, o.trial_opts);
    cmd->add_option("--policy", o.policy, "scoring policy")
        ->check(CLI::IsMember(all_policy_names));
    cmd->add_option("--model", o.model, "model file for network policies");
    cmd->add_option("--proposal", o.proposal,
                    "proposal index to encode, -1 = the trial loop's pick");
    cmd->add_option("--out", o.out, "output directory")->required();
    return cmd;
}

IniSection inspect_kv(const InspectOpts& o) {
    IniSection kv = {{"seed", std::to_string(o.seed)},
                     {"jobs", std::to_string(o.jobs)},
                     {"trial", std::to_string(o.trial)},
                     {"policy", o.policy},
                     {"model", o.model},
                     {"proposal", std::to_string(o.proposal)},
                     {"out", o.out}};
    append_kv(kv, trial_kv(o.trial_opts));
    return kv;
}

int cmd_inspect(const InspectOpts& o) {
    Policy policy = policy_from_name(o.policy);
    ModelFile model;
    const NetworkParams* params = nullptr;
    if (is_network_policy(policy)) {
        if (o.model.empty())
            throw usage_error("inspect: policy " + o.policy + " requires --model");
        model = load_model_checked(o.model);
        params = &model.params;
    }

    // mirrors the first iteration of run_trial, seed stream for seed stream
    TrialConfig config = make_trial_config(o.trial_opts, policy);
    std::uint64_t trial_seed = trial_seed_for(o.seed, config.n_objects, o.trial);
    Scene scene = scene_for_trial(config, trial_seed);
    ViewTransform view = fit_view(config.table);
    auto segments = over_segment(scene, derive_seed(trial_seed, 0xB5E00), config.split_prob);
    ObservationImage obs = render(scene, segments, view);
    auto handles = sample_handles(segments, config.table, config.per_segment,
                                  derive_seed(trial_seed, 0x44A00), config.push_length);
    ProposalSet set = to_proposals(handles, view);
    TrackState tracks;
    if (policy == Policy::baseline) tracks = advance_tracks(tracks, segments, config.table);
    std::vector<bool> feasible(set.proposals.size());
    for (std::size_t i = 0; i < set.proposals.size(); ++i)
        feasible[i] = feasibility_check(scene, set.proposals[i].handle, config.pusher_radius,
                                        config.approach_backoff);
    Rng policy_rng(derive_seed(trial_seed, 0x7A4D0));
    std::vector<double> scores = detail::score_proposals(set.proposals, feasible, scene, obs,
                                                         segments, config, params, tracks,
                                                         policy_rng);

    std::vector<std::size_t> order(set.proposals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<int> rank(set.proposals.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = int(i);

    int chosen = o.proposal;
    if (chosen >= int(set.proposals.size()))
        throw usage_error("inspect: --proposal out of range, have " +
                          std::to_string(set.proposals.size()) + " proposals");
    if (chosen < 0) {
        for (std::size_t i : order) {
            if (!feasible[i]) continue;
            if (is_network_policy(policy) && scores[i] < config.positive_threshold) break;
            chosen = int(i);
            break;
        }
        if (chosen < 0)
            throw CliError{1, "runtime",
                           "inspect: the trial loop would execute no proposal; pass --proposal"};
    }

    fs::create_directories(o.out);
    fs::path dir(o.out);
    save_pgm(obs.pixels, obs.width(), obs.height(), (dir / "o.pgm").string());
    PushImage res = encode(obs, set.proposals[std::size_t(chosen)]);
    save_pgm(res.pixels, PushImage::size, PushImage::size, (dir / "o_res.pgm").string());
    save_scene(scene, (dir / "scene.json").string());

    std::string csv =
        "index,rank,segment,object,position_x,position_y,normal_x,normal_y,alpha,c_x,c_y,"
        "feasible,score\n";
    for (std::size_t i = 0; i < set.proposals.size(); ++i) {
        const PushProposal& p = set.proposals[i];
        int object = -1;
        for (const Segment& s : segments)
            if (s.id == p.handle.segment) {
                object = s.parent_object;
                break;
            }
        csv += std::to_string(i) + "," + std::to_string(rank[i]) + "," +
               std::to_string(p.handle.segment) + "," + std::to_string(object) + "," +
               fmt_double(p.handle.position.x) + "," + fmt_double(p.handle.position.y) + "," +
               fmt_double(p.handle.normal.x) + "," + fmt_double(p.handle.normal.y) + "," +
               fmt_double(p.alpha) + "," + fmt_double(p.c.x) + "," + fmt_double(p.c.y) + "," +
               (feasible[i] ? "1" : "0") + "," + fmt_double(scores[i]) + "\n";
    }
    write_text((dir / "scores.csv").string(), csv);
    write_config_file((dir / "inspect.config.ini").string(), "inspect", inspect_kv(o));
    if (is_singulated(scene, config.singulation_threshold))
        log_info("inspect: the scene is already singulated");
    log_info("inspect: encoded proposal " + std::to_string(chosen) + " of " +
             std::to_string(set.proposals.size()) + ", " + std::to_string(set.n_excluded) +
             " excluded");
    std::cout << csv;
    return 0;
}

}  // namespace

// ---------------------------------------------------------------- main

int main(int argc, char** argv) {
    CLI::App app{"push-proposal singulation pipeline", "singulate"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "singulate 1.0.0");

    CollectOpts collect_opts;
    TrainOpts train_opts;
    AggregateOpts aggregate_opts;
    EvalOpts eval_opts;
    ReplayOpts replay_opts;
    InspectOpts inspect_opts;
    CLI::App* collect_cmd = add_collect_command(app, collect_opts);
    CLI::App* train_cmd = add_train_command(app, train_opts);
    CLI::App* aggregate_cmd = add_aggregate_command(app, aggregate_opts);
    CLI::App* eval_cmd = add_eval_command(app, eval_opts);
    CLI::App* replay_cmd = add_replay_command(app, replay_opts);
    CLI::App* inspect_cmd = add_inspect_command(app, inspect_opts);

    std::vector<std::string> given_args(argv + 1, argv + argc);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        CliError err = usage_error(e.what());
        print_error_line(err);
        return err.code;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        std::string* config_path = nullptr;
        if (active == collect_cmd) config_path = &collect_opts.config;
        if (active == train_cmd) config_path = &train_opts.config;
        if (active == aggregate_cmd) config_path = &aggregate_opts.config;
        if (active == eval_cmd) config_path = &eval_opts.config;
        if (active == replay_cmd) config_path = &replay_opts.config;
        if (active == inspect_cmd) config_path = &inspect_opts.config;

        // config values fill only options absent from the command line
        if (config_path && !config_path->empty()) {
            require_file(*config_path);
            auto ini = parse_config_text(read_text(*config_path), *config_path);
            auto section = ini.find(active->get_name());
            std::vector<std::string> merged = given_args;
            if (section != ini.end()) {
                for (const auto& [key, value] : section->second) {
                    if (key == "config")
                        throw usage_error("config: nested config key is not allowed");
                    CLI::Option* opt = active->get_option_no_throw("--" + key);
                    if (!opt)
                        throw usage_error("config: unknown key '" + key + "' in [" +
                                          active->get_name() + "]");
                    if (opt->count() > 0) continue;
                    merged.push_back("--" + key + "=" + value);
                }
            }
            app.clear();
            std::reverse(merged.begin(), merged.end());
            try {
                app.parse(merged);
            } catch (const CLI::ParseError& e) {
                throw usage_error(std::string("config: ") + e.what());
            }
            active = app.get_subcommands().front();
        }

        if (active == collect_cmd) return cmd_collect(collect_opts);
        if (active == train_cmd) return cmd_train(train_opts);
        if (active == aggregate_cmd) return cmd_aggregate(aggregate_opts);
        if (active == eval_cmd) return cmd_eval(eval_opts);
        if (active == replay_cmd) return cmd_replay(replay_opts);
        if (active == inspect_cmd) return cmd_inspect(inspect_opts);
        throw CliError{1, "runtime", "no subcommand dispatched"};
    } catch (const CliError& e) {
        print_error_line(e);
        return e.code;
    } catch (const SchemaError& e) {
        CliError err{4, "schema", e.what()};
        print_error_line(err);
        return err.code;
    } catch (const FormatError& e) {
        CliError err{4, "schema", e.what()};
        print_error_line(err);
        return err.code;
    } catch (const ChecksumError& e) {
        CliError err{5, "integrity", e.what()};
        print_error_line(err);
        return err.code;
    } catch (const VersionError& e) {
        CliError err{5, "integrity", e.what()};
        print_error_line(err);
        return err.code;
    } catch (const std::exception& e) {
        CliError err{1, "runtime", e.what()};
        print_error_line(err);
        return err.code;
    }
}
