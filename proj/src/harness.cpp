#include "edbl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "edbl/checkpoint.hpp"

namespace edbl {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* const kMetricsSchema = "# schema: edbl.metrics.v1";

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

DatasetSpec dataset_from_json(const ordered_json& j) {
    DatasetSpec spec;
    const std::string kind = j.value("kind", std::string("synthetic"));
    if (kind == "synthetic") {
        spec.kind = DatasetSpec::Kind::Synthetic;
    } else if (kind == "csv") {
        spec.kind = DatasetSpec::Kind::Csv;
    } else {
        throw std::invalid_argument("config: dataset.kind must be 'synthetic' or 'csv'");
    }
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        spec.synthetic.classes = s.value("classes", spec.synthetic.classes);
        spec.synthetic.dims = s.value("dims", spec.synthetic.dims);
        spec.synthetic.train_per_class = s.value("train_per_class", spec.synthetic.train_per_class);
        spec.synthetic.test_per_class = s.value("test_per_class", spec.synthetic.test_per_class);
        spec.synthetic.separation = s.value("separation", spec.synthetic.separation);
        spec.synthetic.covariance_scale = s.value("covariance_scale", spec.synthetic.covariance_scale);
    }
    spec.train_path = j.value("train_path", spec.train_path);
    spec.test_path = j.value("test_path", spec.test_path);
    return spec;
}

ordered_json dataset_to_json(const DatasetSpec& spec) {
    ordered_json j;
    j["kind"] = spec.kind == DatasetSpec::Kind::Synthetic ? "synthetic" : "csv";
    j["seed"] = spec.seed;
    j["synthetic"] = {{"classes", spec.synthetic.classes},
                      {"dims", spec.synthetic.dims},
                      {"train_per_class", spec.synthetic.train_per_class},
                      {"test_per_class", spec.synthetic.test_per_class},
                      {"separation", spec.synthetic.separation},
                      {"covariance_scale", spec.synthetic.covariance_scale}};
    if (!spec.train_path.empty()) j["train_path"] = spec.train_path;
    if (!spec.test_path.empty()) j["test_path"] = spec.test_path;
    return j;
}

Protocol protocol_from_json(const ordered_json& j) {
    Protocol p;
    const std::string kind = j.value("kind", std::string("base0"));
    if (kind == "base0") {
        p.kind = ProtocolKind::Base0;
    } else if (kind == "base-half") {
        p.kind = ProtocolKind::BaseHalf;
    } else {
        throw std::invalid_argument("config: protocol.kind must be 'base0' or 'base-half'");
    }
    p.phases = j.value("phases", p.phases);
    p.total_budget = j.value("total_budget", p.total_budget);
    p.per_class_budget = j.value("per_class_budget", p.per_class_budget);
    return p;
}

ordered_json protocol_to_json(const Protocol& p) {
    ordered_json j;
    j["kind"] = p.kind == ProtocolKind::Base0 ? "base0" : "base-half";
    j["phases"] = p.phases;
    j["total_budget"] = p.total_budget;
    j["per_class_budget"] = p.per_class_budget;
    return j;
}

TrainConfig train_from_json(const ordered_json& j) {
    TrainConfig t;
    t.epochs_phase1 = j.value("epochs_phase1", t.epochs_phase1);
    t.epochs_phase2 = j.value("epochs_phase2", t.epochs_phase2);
    t.lr_phase1 = j.value("lr_phase1", t.lr_phase1);
    t.lr_phase2 = j.value("lr_phase2", t.lr_phase2);
    t.lr_decay_epochs_phase1 =
        j.value("lr_decay_epochs_phase1", t.lr_decay_epochs_phase1);
    t.lr_decay_epochs_phase2 =
        j.value("lr_decay_epochs_phase2", t.lr_decay_epochs_phase2);
    t.gamma1 = j.value("gamma1", t.gamma1);
    t.gamma2 = j.value("gamma2", t.gamma2);
    t.momentum = j.value("momentum", t.momentum);
    t.weight_decay = j.value("weight_decay", t.weight_decay);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.batches_per_epoch = j.value("batches_per_epoch", t.batches_per_epoch);
    if (j.contains("kd")) {
        t.kd.temperature = j.at("kd").value("temperature", t.kd.temperature);
        t.kd.squared_temperature_compensation =
            j.at("kd").value("squared_temperature_compensation",
                             t.kd.squared_temperature_compensation);
    }
    if (j.contains("balance")) {
        t.balance.alpha = j.at("balance").value("alpha", t.balance.alpha);
        t.balance.gamma = j.at("balance").value("gamma", t.balance.gamma);
        t.balance.epsilon = j.at("balance").value("epsilon", t.balance.epsilon);
    }
    if (j.contains("resample")) {
        t.resample.min_old_per_batch =
            j.at("resample").value("min_old_per_batch", t.resample.min_old_per_batch);
        t.resample.batch_size = j.at("resample").value("batch_size", t.resample.batch_size);
        t.resample.group_size = j.at("resample").value("group_size", t.resample.group_size);
    }
    t.hidden_dims = j.value("hidden_dims", t.hidden_dims);
    return t;
}

ordered_json train_to_json(const TrainConfig& t) {
    ordered_json j;
    j["epochs_phase1"] = t.epochs_phase1;
    j["epochs_phase2"] = t.epochs_phase2;
    j["lr_phase1"] = t.lr_phase1;
    j["lr_phase2"] = t.lr_phase2;
    j["lr_decay_epochs_phase1"] = t.lr_decay_epochs_phase1;
    j["lr_decay_epochs_phase2"] = t.lr_decay_epochs_phase2;
    j["gamma1"] = t.gamma1;
    j["gamma2"] = t.gamma2;
    j["momentum"] = t.momentum;
    j["weight_decay"] = t.weight_decay;
    j["batch_size"] = t.batch_size;
    j["batches_per_epoch"] = t.batches_per_epoch;
    j["kd"] = {{"temperature", t.kd.temperature},
               {"squared_temperature_compensation", t.kd.squared_temperature_compensation}};
    j["balance"] = {{"alpha", t.balance.alpha},
                    {"gamma", t.balance.gamma},
                    {"epsilon", t.balance.epsilon}};
    j["resample"] = {{"min_old_per_batch", t.resample.min_old_per_batch},
                     {"batch_size", t.resample.batch_size},
                     {"group_size", t.resample.group_size}};
    j["hidden_dims"] = t.hidden_dims;
    return j;
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    const ordered_json j = ordered_json::parse(text);
    ExperimentConfig cfg;
    cfg.run_id = j.value("run_id", cfg.run_id);
    if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("protocol")) cfg.protocol = protocol_from_json(j.at("protocol"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    if (j.contains("strategies")) {
        cfg.strategies.clear();
        for (const auto& name : j.at("strategies")) {
            cfg.strategies.push_back(strategy_from_name(name.get<std::string>()));
        }
    }
    if (j.contains("seeds")) {
        cfg.seeds.clear();
        for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.write_checkpoints = j.value("write_checkpoints", cfg.write_checkpoints);
    return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
    ordered_json j;
    j["run_id"] = cfg.run_id;
    j["dataset"] = dataset_to_json(cfg.dataset);
    j["protocol"] = protocol_to_json(cfg.protocol);
    j["train"] = train_to_json(cfg.train);
    std::vector<std::string> names;
    for (Strategy s : cfg.strategies) names.push_back(strategy_name(s));
    j["strategies"] = names;
    j["seeds"] = cfg.seeds;
    j["out_dir"] = cfg.out_dir;
    j["write_checkpoints"] = cfg.write_checkpoints;
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return config_from_json_text(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

namespace {

ExperimentConfig desk_preset() {
    ExperimentConfig cfg;
    cfg.run_id = "desk";
    cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
    cfg.dataset.synthetic = SyntheticSpec{10, 16, 200, 50, 3.0, 1.0};
    cfg.protocol = Protocol{ProtocolKind::Base0, 5, 40, 20};
    cfg.train.hidden_dims = {64, 32};
    cfg.train.epochs_phase1 = 40;
    cfg.train.epochs_phase2 = 20;
    cfg.train.lr_phase1 = 0.1;
    cfg.train.lr_phase2 = 0.01;
    cfg.train.lr_decay_epochs_phase1 = {16, 27, 35};
    cfg.train.lr_decay_epochs_phase2 = {6, 12, 16};
    cfg.train.batch_size = 128;
    cfg.train.batches_per_epoch = 8;
    cfg.train.resample = ResampleConfig{16, 128, 24};
    cfg.train.gamma2 = 2.0;
    cfg.train.balance.gamma = 300.0;
    cfg.train.balance.alpha = 1e-3;
    cfg.train.balance.epsilon = 0.05;
    cfg.strategies = {Strategy::BaselineRkd, Strategy::ReMkd, Strategy::IibKd, Strategy::Edbl};
    cfg.seeds = {1, 2, 3, 4, 5};
    return cfg;
}

// Published hyper-parameter pairs; epochs and decay points are desk-scale
// (same decay fractions as the full schedules).
ExperimentConfig table6_preset(const std::string& name, std::size_t classes, ProtocolKind kind,
                               std::size_t phases, std::size_t total_budget,
                               std::size_t per_class_budget, double gamma, double alpha) {
    ExperimentConfig cfg = desk_preset();
    cfg.run_id = name;
    cfg.dataset.synthetic.classes = classes;
    cfg.protocol.kind = kind;
    cfg.protocol.phases = phases;
    cfg.protocol.total_budget = total_budget;
    cfg.protocol.per_class_budget = per_class_budget;
    cfg.train.balance.gamma = gamma;
    cfg.train.balance.alpha = alpha;
    cfg.train.gamma2 = 1.0;
    cfg.train.batch_size = 128;
    cfg.train.weight_decay = 2e-4;
    cfg.train.momentum = 0.9;
    cfg.train.resample.min_old_per_batch = 32;
    return cfg;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "table6-cifar10-base0-2")
        return table6_preset(name, 10, ProtocolKind::Base0, 2, 200, 20, 10.0, 1e-6);
    if (name == "table6-cifar10-base0-5")
        return table6_preset(name, 10, ProtocolKind::Base0, 5, 200, 20, 100.0, 5e-6);
    if (name == "table6-cifar100-base0-2")
        return table6_preset(name, 20, ProtocolKind::Base0, 2, 2000, 20, 100.0, 5e-6);
    if (name == "table6-cifar100-base0-5")
        return table6_preset(name, 20, ProtocolKind::Base0, 5, 2000, 20, 300.0, 5e-6);
    if (name == "table6-cifar100-base0-10")
        return table6_preset(name, 20, ProtocolKind::Base0, 10, 2000, 20, 100.0, 5e-6);
    if (name == "table6-cifar100-basehalf-5")
        return table6_preset(name, 20, ProtocolKind::BaseHalf, 5, 2000, 20, 300.0, 5e-6);
    if (name == "table6-cifar100-basehalf-10")
        return table6_preset(name, 20, ProtocolKind::BaseHalf, 10, 2000, 20, 100.0, 5e-6);
    if (name == "table6-tiny-basehalf-5")
        return table6_preset(name, 20, ProtocolKind::BaseHalf, 5, 2000, 20, 10.0, 1e-6);
    if (name == "table6-tiny-basehalf-10")
        return table6_preset(name, 20, ProtocolKind::BaseHalf, 10, 2000, 20, 10.0, 5e-6);
    throw std::invalid_argument("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    return {"desk",
            "table6-cifar10-base0-2",
            "table6-cifar10-base0-5",
            "table6-cifar100-base0-2",
            "table6-cifar100-base0-5",
            "table6-cifar100-base0-10",
            "table6-cifar100-basehalf-5",
            "table6-cifar100-basehalf-10",
            "table6-tiny-basehalf-5",
            "table6-tiny-basehalf-10"};
}

Dataset materialize_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    if (spec.kind == DatasetSpec::Kind::Csv) {
        if (spec.train_path.empty() || spec.test_path.empty()) {
            throw std::invalid_argument("config: csv dataset needs train_path and test_path");
        }
        return load_csv_dataset(spec.train_path, spec.test_path);
    }
    Rng rng(mix_seed(spec.seed, seed));
    return generate_synthetic(spec.synthetic, rng);
}

TaskStream materialize_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
    const Dataset dataset = materialize_dataset(cfg.dataset, seed);
    Rng rng(mix_seed(seed, 0x5711CEULL));
    return split_stream(dataset, cfg.protocol, rng);
}

RunResult run_incremental(const TaskStream& stream, const TrainConfig& cfg, Strategy strategy,
                          std::uint64_t train_seed, std::ostream* log) {
    if (stream.tasks.empty()) throw std::invalid_argument("run_incremental: empty stream");

    TrainConfig train_cfg = cfg;
    train_cfg.strategy = strategy;

    Rng rng(train_seed);
    ClassRegistry registry;
    ExemplarStore store = stream.make_store();
    Model model;
    std::optional<FrozenModel> frozen;

    RunResult result{train_seed, strategy, {}, {}, Model(), std::move(store), {}};
    for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
        const Task& task = stream.tasks[t];
        registry.add_classes(task.classes);
        if (t == 0) {
            std::vector<std::size_t> dims;
            dims.push_back(task.train.front().features.cols());
            for (std::size_t d : train_cfg.hidden_dims) dims.push_back(d);
            model = Model(dims, task.classes.size(), rng);
            frozen.reset();
        } else {
            frozen = model.freeze();
            model = model.expand_head(task.classes.size(), rng);
        }
        result.reports.push_back(train_task(model, frozen ? &*frozen : nullptr, task.train,
                                            result.store, registry, train_cfg, rng, log));
        result.metrics.push_back(evaluate_phase(model, result.store, registry, stream, t));
    }
    result.final_model = std::move(model);
    result.registry = registry;
    return result;
}

namespace {

struct MetricRow {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string strategy;
    std::size_t phase = 0;
    std::string mode;
    double accuracy = 0.0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << kMetricsSchema << "\n";
    out << "run_id,seed,strategy,phase,mode,accuracy\n";
    for (const auto& r : rows) {
        out << r.run_id << ',' << r.seed << ',' << r.strategy << ',' << r.phase << ',' << r.mode
            << ',' << fmt6(r.accuracy) << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

void write_perclass_jsonl(const std::string& path, const std::string& run_id, std::uint64_t seed,
                          const std::string& strategy, const std::vector<PhaseMetrics>& metrics) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& m : metrics) {
        for (const char* mode : {"cnn", "nme"}) {
            const auto& per_class = std::string(mode) == "cnn" ? m.per_class_cnn : m.per_class_nme;
            ordered_json j;
            j["run_id"] = run_id;
            j["seed"] = seed;
            j["strategy"] = strategy;
            j["phase"] = m.phase;
            j["mode"] = mode;
            ordered_json pc;
            for (const auto& [cls, acc] : per_class) pc[std::to_string(cls)] = fmt6(acc);
            j["per_class"] = pc;
            out << j.dump() << "\n";
        }
    }
}

struct SummaryKey {
    std::string strategy;
    std::string mode;

    bool operator<(const SummaryKey& o) const {
        return strategy != o.strategy ? strategy < o.strategy : mode < o.mode;
    }
};

void print_summary(const std::vector<MetricRow>& rows, std::ostream& out) {
    std::map<SummaryKey, std::map<std::size_t, std::vector<double>>> by_phase;
    std::map<SummaryKey, std::map<std::uint64_t, std::vector<double>>> by_seed;
    std::size_t max_phase = 0;
    for (const auto& r : rows) {
        by_phase[{r.strategy, r.mode}][r.phase].push_back(r.accuracy);
        by_seed[{r.strategy, r.mode}][r.seed].push_back(r.accuracy);
        max_phase = std::max(max_phase, r.phase);
    }

    out << "strategy      mode ";
    for (std::size_t p = 0; p <= max_phase; ++p) out << "  phase" << p << "       ";
    out << "  avg-inc\n";
    for (const auto& [key, phases] : by_phase) {
        char head[64];
        std::snprintf(head, sizeof(head), "%-13s %-4s ", key.strategy.c_str(), key.mode.c_str());
        out << head;
        for (std::size_t p = 0; p <= max_phase; ++p) {
            auto it = phases.find(p);
            if (it == phases.end()) {
                out << "  --            ";
                continue;
            }
            const auto& vals = it->second;
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            const double stddev = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size())) : 0.0;
            char cell[64];
            std::snprintf(cell, sizeof(cell), "  %.4f+-%.4f", mean, stddev);
            out << cell;
        }
        // mean over seeds of the per-seed phase mean
        const auto& seeds = by_seed[key];
        double avg = 0.0;
        for (const auto& [seed, vals] : seeds) {
            double m = 0.0;
            for (double v : vals) m += v;
            avg += m / static_cast<double>(vals.size());
        }
        avg /= static_cast<double>(seeds.size());
        char cell[32];
        std::snprintf(cell, sizeof(cell), "  %.4f\n", avg);
        out << cell;
    }
}

std::vector<MetricRow> parse_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::vector<MetricRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("run_id,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string field;
        MetricRow r;
        std::getline(ss, r.run_id, ',');
        std::getline(ss, field, ',');
        r.seed = std::stoull(field);
        std::getline(ss, r.strategy, ',');
        std::getline(ss, field, ',');
        r.phase = std::stoul(field);
        std::getline(ss, r.mode, ',');
        std::getline(ss, field, ',');
        r.accuracy = std::stod(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, std::ostream& out) {
    try {
        fs::create_directories(cfg.out_dir);
        {
            // the resolved config makes every output re-derivable
            std::ofstream cf(fs::path(cfg.out_dir) / "config.json");
            cf << config_to_json_text(cfg);
        }
        std::vector<MetricRow> all_rows;

        for (std::uint64_t seed : cfg.seeds) {
            const TaskStream stream = materialize_stream(cfg, seed);
            for (std::size_t si = 0; si < cfg.strategies.size(); ++si) {
                const Strategy strategy = cfg.strategies[si];
                const std::string sname = strategy_name(strategy);
                const std::string run_id = cfg.run_id + "-s" + std::to_string(seed) + "-" + sname;
                const fs::path run_dir = fs::path(cfg.out_dir) / run_id;
                fs::create_directories(run_dir);

                std::ofstream log(run_dir / "train_log.txt");
                const std::uint64_t train_seed = mix_seed(seed, 1000 + si);
                RunResult result = run_incremental(stream, cfg.train, strategy, train_seed, &log);

                std::vector<MetricRow> rows;
                for (const auto& m : result.metrics) {
                    rows.push_back({run_id, seed, sname, m.phase, "cnn", m.accuracy_cnn});
                    rows.push_back({run_id, seed, sname, m.phase, "nme", m.accuracy_nme});
                }
                write_metrics_csv((run_dir / "metrics.csv").string(), rows);
                write_perclass_jsonl((run_dir / "perclass.jsonl").string(), run_id, seed, sname,
                                     result.metrics);
                if (cfg.write_checkpoints) {
                    save_checkpoint((run_dir / "final.ckpt").string(), result.final_model,
                                    &result.store);
                }
                all_rows.insert(all_rows.end(), rows.begin(), rows.end());

                out << run_id << ": final cnn=" << fmt6(result.metrics.back().accuracy_cnn)
                    << " nme=" << fmt6(result.metrics.back().accuracy_nme) << "\n";
            }
        }

        std::ostringstream summary;
        print_summary(all_rows, summary);
        out << "\n" << summary.str();
        std::ofstream sf(fs::path(cfg.out_dir) / "summary.txt");
        sf << summary.str();
        return 0;
    } catch (const std::exception& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    }
}

int report_directory(const std::string& dir, std::ostream& out) {
    try {
        std::vector<MetricRow> rows;
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const auto parsed = parse_metrics_csv(f.string());
            rows.insert(rows.end(), parsed.begin(), parsed.end());
        }
        if (rows.empty()) {
            out << "no metrics.csv files under " << dir << "\n";
            return 1;
        }
        print_summary(rows, out);
        return 0;
    } catch (const std::exception& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace edbl
