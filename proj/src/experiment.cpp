#include "uavei/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "uavei/checkpoint.hpp"
#include "uavei/env.hpp"

namespace uavei {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) bad("section '" + section + "' must be a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (item.key() == a) {
                ok = true;
                break;
            }
        if (!ok) bad("unknown key '" + item.key() + "' in section '" + section + "'");
    }
}

Vec2 parse_vec2(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        bad(what + " must be a [x, y] pair of numbers");
    return {j[0].get<double>(), j[1].get<double>()};
}

// Scalar applied to every GD, or an array with one entry per GD.
std::vector<double> parse_per_gd(const json& j, std::size_t k, const std::string& what) {
    if (j.is_number()) return std::vector<double>(k, j.get<double>());
    if (j.is_array()) {
        if (j.size() != k) bad(what + " array must have one entry per ground device");
        std::vector<double> v;
        for (const auto& e : j) {
            if (!e.is_number()) bad(what + " entries must be numbers");
            v.push_back(e.get<double>());
        }
        return v;
    }
    bad(what + " must be a number or an array");
    return {};
}

DifficultySpec parse_difficulty_spec(const json& j) {
    check_keys(j, "task.difficulty", {"kind", "lo", "hi", "alpha", "beta"});
    DifficultySpec d;
    const std::string kind = j.value("kind", "uniform");
    if (kind == "uniform")
        d.kind = DifficultyKind::Uniform;
    else if (kind == "beta")
        d.kind = DifficultyKind::Beta;
    else if (kind == "sortedShard")
        d.kind = DifficultyKind::SortedShard;
    else
        bad("difficulty kind must be uniform|beta|sortedShard, got '" + kind + "'");
    d.lo = j.value("lo", 0.0);
    d.hi = j.value("hi", d.kind == DifficultyKind::Uniform ? 0.5 : 1.0);
    d.alpha = j.value("alpha", 2.0);
    d.beta = j.value("beta", 2.0);
    return d;
}

void parse_sim(const json& j, SimConfig& sim) {
    check_keys(j, "sim",
               {"missionDuration", "slotCount", "syncPeriod", "localSlots", "altitude", "speed",
                "areaBounds", "startPos", "endPos", "refCircleCenter", "refCircleRadius",
                "gdPositions", "offloadCap", "bandwidth", "noisePower", "refGain", "txPower",
                "featDim", "bitsPerDim", "ratioSet", "devWeight", "devThreshold"});
    sim.mission_duration = j.value("missionDuration", sim.mission_duration);
    sim.slot_count = j.value("slotCount", sim.slot_count);
    sim.sync_period = j.value("syncPeriod", sim.sync_period);
    sim.local_slots = j.value("localSlots", sim.local_slots);
    sim.altitude = j.value("altitude", sim.altitude);
    sim.speed = j.value("speed", sim.speed);
    sim.area_bounds = j.value("areaBounds", sim.area_bounds);
    if (j.contains("startPos")) sim.start_pos = parse_vec2(j["startPos"], "startPos");
    if (j.contains("endPos")) sim.end_pos = parse_vec2(j["endPos"], "endPos");
    if (j.contains("refCircleCenter"))
        sim.ref_circle_center = parse_vec2(j["refCircleCenter"], "refCircleCenter");
    sim.ref_circle_radius = j.value("refCircleRadius", sim.ref_circle_radius);

    if (!j.contains("gdPositions")) bad("missing required key 'gdPositions' in section 'sim'");
    if (!j["gdPositions"].is_array() || j["gdPositions"].empty())
        bad("gdPositions must be a non-empty array of [x, y] pairs");
    sim.gd_positions.clear();
    for (const auto& p : j["gdPositions"]) sim.gd_positions.push_back(parse_vec2(p, "gdPositions entry"));
    const std::size_t k = sim.gd_positions.size();

    sim.offload_cap = j.value("offloadCap", sim.offload_cap);
    sim.bandwidth = j.value("bandwidth", sim.bandwidth);
    sim.noise_power = j.value("noisePower", sim.noise_power);
    sim.ref_gain = j.value("refGain", sim.ref_gain);
    sim.tx_power = parse_per_gd(j.contains("txPower") ? j["txPower"] : json(0.01), k, "txPower");
    sim.feat_dim =
        parse_per_gd(j.contains("featDim") ? j["featDim"] : json(18432.0), k, "featDim");
    sim.bits_per_dim =
        parse_per_gd(j.contains("bitsPerDim") ? j["bitsPerDim"] : json(8.0), k, "bitsPerDim");

    sim.ratio_sets.clear();
    json ratio = j.contains("ratioSet") ? j["ratioSet"] : json::array({0.0, 0.2, 0.4, 0.55});
    if (!ratio.is_array() || ratio.empty()) bad("ratioSet must be a non-empty array");
    if (ratio[0].is_array()) {
        if (ratio.size() != k) bad("per-GD ratioSet must have one array per ground device");
        for (const auto& r : ratio) sim.ratio_sets.push_back(r.get<std::vector<double>>());
    } else {
        sim.ratio_sets.assign(k, ratio.get<std::vector<double>>());
    }

    sim.dev_weight = j.value("devWeight", sim.dev_weight);
    sim.dev_threshold = j.value("devThreshold", sim.dev_threshold);
}

void parse_task(const json& j, TaskModelConfig& task, std::size_t k) {
    check_keys(j, "task",
               {"classCount", "difficulty", "upliftGain", "localNoiseStd", "massFloor",
                "massCeil"});
    task.class_count = j.value("classCount", task.class_count);
    task.uplift_gain = j.value("upliftGain", task.uplift_gain);
    task.local_noise_std = j.value("localNoiseStd", task.local_noise_std);
    task.mass_floor = j.value("massFloor", task.mass_floor);
    task.mass_ceil = j.value("massCeil", task.mass_ceil);
    task.difficulty.clear();
    if (j.contains("difficulty")) {
        const json& d = j["difficulty"];
        if (d.is_array()) {
            if (d.size() != k) bad("per-GD difficulty must have one spec per ground device");
            for (const auto& e : d) task.difficulty.push_back(parse_difficulty_spec(e));
        } else {
            task.difficulty.assign(k, parse_difficulty_spec(d));
        }
    } else {
        task.difficulty.assign(k, DifficultySpec{});
    }
}

void parse_train(const json& j, TrainConfig& t) {
    check_keys(j, "train",
               {"actorLr", "criticLr", "actorTau", "criticTau", "gateTemp0", "ratioTemp0",
                "headingNoiseVar0", "decay", "batchSize", "bufferCapacity", "episodes",
                "discount", "hiddenSizes", "criticInput", "jointActionCap", "threads"});
    t.actor_lr = j.value("actorLr", t.actor_lr);
    t.critic_lr = j.value("criticLr", t.critic_lr);
    t.actor_tau = j.value("actorTau", t.actor_tau);
    t.critic_tau = j.value("criticTau", t.critic_tau);
    t.gate_temp0 = j.value("gateTemp0", t.gate_temp0);
    t.ratio_temp0 = j.value("ratioTemp0", t.ratio_temp0);
    t.heading_noise_var0 = j.value("headingNoiseVar0", t.heading_noise_var0);
    t.decay = j.value("decay", t.decay);
    t.batch_size = j.value("batchSize", t.batch_size);
    t.buffer_capacity = j.value("bufferCapacity", t.buffer_capacity);
    t.episodes = j.value("episodes", t.episodes);
    t.discount = j.value("discount", t.discount);
    if (j.contains("hiddenSizes")) t.hidden_sizes = j["hiddenSizes"].get<std::vector<int>>();
    t.critic_input = j.value("criticInput", t.critic_input);
    t.joint_action_cap = j.value("jointActionCap", t.joint_action_cap);
    t.threads = j.value("threads", t.threads);
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        bad(std::string("invalid JSON: ") + e.what());
    }
    check_keys(j, "(root)", {"policy", "seed", "outputDir", "evalEpisodes", "sim", "task", "train"});

    ExperimentConfig cfg;
    cfg.policy = parse_policy(j.value("policy", std::string("hdrl_moe")));
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            bad("seed must be a non-negative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    cfg.output_dir = j.value("outputDir", cfg.output_dir);
    cfg.eval_episodes = j.value("evalEpisodes", cfg.eval_episodes);
    if (cfg.eval_episodes <= 0) bad("evalEpisodes must be positive");

    if (!j.contains("sim")) bad("missing required section 'sim' (must define gdPositions)");
    parse_sim(j["sim"], cfg.sim);
    parse_task(j.contains("task") ? j["task"] : json::object(), cfg.task,
               cfg.sim.gd_positions.size());
    parse_train(j.contains("train") ? j["train"] : json::object(), cfg.train);

    cfg.sim.validate();
    cfg.task.validate(cfg.sim.gd_count());
    cfg.train.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_experiment_config(ss.str());
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param,
                       const std::string& value) {
    auto as_double = [&]() {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) bad("sweep value '" + value + "' is not a number");
        return v;
    };
    if (param == "devWeight") {
        cfg.sim.dev_weight = as_double();
    } else if (param == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (param == "offloadCap") {
        cfg.sim.offload_cap = static_cast<int>(as_double());
    } else if (param == "gdCount") {
        const int k = static_cast<int>(as_double());
        if (k <= 0) bad("gdCount sweep value must be positive");
        if (k > cfg.sim.gd_count())
            bad("gdCount sweep can only shrink the configured gdPositions list");
        cfg.sim.gd_positions.resize(k);
        cfg.sim.tx_power.resize(k);
        cfg.sim.feat_dim.resize(k);
        cfg.sim.bits_per_dim.resize(k);
        cfg.sim.ratio_sets.resize(k);
        cfg.task.difficulty.resize(k);
        cfg.sim.offload_cap = std::min(cfg.sim.offload_cap, k);
    } else if (param == "ratioSet") {
        std::vector<double> set;
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ':')) set.push_back(std::stod(tok));
        if (set.empty()) bad("ratioSet sweep value must be a colon-separated list");
        cfg.sim.ratio_sets.assign(cfg.sim.gd_count(), set);
    } else {
        bad("unknown sweep parameter '" + param +
            "' (expected devWeight|gdCount|offloadCap|seed|ratioSet)");
    }
    cfg.sim.validate();
    cfg.task.validate(cfg.sim.gd_count());
}

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
}

} // namespace

TrainOutput cmd_train(const ExperimentConfig& cfg, bool quiet) {
    ensure_dir(cfg.output_dir);
    TrainOutput out;
    out.metrics_path = cfg.output_dir + "/metrics.csv";
    out.checkpoint_path = cfg.output_dir + "/checkpoint.json";

    Agent agent = make_agent(cfg.policy, cfg.sim, cfg.train, cfg.seed);
    Environment env(cfg.sim, cfg.task);

    const int report_every = std::max(1, cfg.train.episodes / 20);
    const auto t0 = std::chrono::steady_clock::now();
    auto on_episode = [&](const MetricsRow& r) {
        out.rows.push_back(r);
        if (!quiet && (r.episode % report_every == 0 || r.episode + 1 == cfg.train.episodes)) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cout << "[train " << policy_name(cfg.policy) << "] episode " << r.episode
                      << " reward " << r.reward << " accuracy " << r.accuracy << " d_dev "
                      << r.d_dev << " critic_loss " << r.critic_loss << " (" << secs << " s)\n";
        }
    };

    try {
        train(agent, env, cfg.seed, on_episode);
    } catch (const std::exception& e) {
        // Flush what we have: the nets are still the last finite state.
        write_metrics_csv(out.metrics_path, out.rows);
        save_checkpoint(out.checkpoint_path, agent, static_cast<int>(out.rows.size()));
        throw std::runtime_error(std::string("training aborted: ") + e.what() +
                                 " (partial metrics and last-good checkpoint written to " +
                                 cfg.output_dir + ")");
    }

    write_metrics_csv(out.metrics_path, out.rows);
    save_checkpoint(out.checkpoint_path, agent, cfg.train.episodes);
    if (!quiet) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "[train " << policy_name(cfg.policy) << "] done: " << cfg.train.episodes
                  << " episodes in " << secs << " s -> " << out.metrics_path << ", "
                  << out.checkpoint_path << "\n";
    }
    return out;
}

EvalOutput cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path, bool quiet) {
    ensure_dir(cfg.output_dir);
    EvalOutput out;
    out.report_path = cfg.output_dir + "/eval_report.csv";
    out.trajectory_path = cfg.output_dir + "/trajectory.csv";

    Agent agent = make_agent(cfg.policy, cfg.sim, cfg.train, cfg.seed);
    if (!checkpoint_path.empty()) {
        load_checkpoint(checkpoint_path, agent);
    } else if (cfg.policy != PolicyKind::Random) {
        throw std::invalid_argument("eval: --checkpoint is required for learned policies");
    }

    out.report = evaluate(agent, cfg.sim, cfg.task, cfg.seed, cfg.eval_episodes);
    write_eval_report_csv(out.report_path, out.report, cfg.sim.dev_threshold);
    write_trajectory_csv(out.trajectory_path, out.report.first_episode);

    if (!quiet) {
        std::cout << "[eval " << policy_name(cfg.policy) << "] episodes " << out.report.episodes
                  << " accuracy " << out.report.accuracy_mean << " +- " << out.report.accuracy_std
                  << " d_dev " << out.report.d_dev_mean << " +- " << out.report.d_dev_std
                  << " offload_ratio " << out.report.offload_ratio_overall << "\n";
        for (std::size_t g = 0; g < out.report.gd_success_ratio.size(); ++g)
            std::cout << "  gd" << g << ": success_ratio " << out.report.gd_success_ratio[g]
                      << " attempt_share " << out.report.gd_share[g] << "\n";
    }
    return out;
}

SweepOutput cmd_sweep(const ExperimentConfig& base, const std::string& param,
                      const std::vector<std::string>& values, bool quiet) {
    if (values.empty()) throw std::invalid_argument("sweep: need at least one value");
    ensure_dir(base.output_dir);
    SweepOutput out;
    out.table_path = base.output_dir + "/sweep.csv";

    for (const std::string& v : values) {
        ExperimentConfig cfg = base;
        apply_sweep_value(cfg, param, v);
        std::string tag = v;
        for (char& c : tag)
            if (c == '.' || c == ':' || c == '-') c = '_';
        cfg.output_dir = base.output_dir + "/sweep_" + param + "_" + tag;
        const TrainOutput tr = cmd_train(cfg, quiet);
        const EvalOutput ev = cmd_eval(cfg, tr.checkpoint_path, quiet);
        out.rows.push_back({param, v, ev.report});
    }

    std::ofstream f(out.table_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + out.table_path);
    f << "parameter,value,accuracy_mean,accuracy_std,d_dev_mean,d_dev_std,offload_ratio,"
         "reward_mean\n";
    for (const SweepRow& r : out.rows) {
        f << r.param << ',' << r.value << ',' << format_double(r.report.accuracy_mean) << ','
          << format_double(r.report.accuracy_std) << ',' << format_double(r.report.d_dev_mean)
          << ',' << format_double(r.report.d_dev_std) << ','
          << format_double(r.report.offload_ratio_overall) << ','
          << format_double(r.report.reward_mean) << '\n';
    }
    return out;
}

} // namespace uavei
