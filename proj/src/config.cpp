#include "forgetd/config.hpp"

#include "forgetd/rng.hpp"

#include <fstream>
#include <sstream>

namespace forgetd {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const std::uint64_t x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data.images") cfg.data_images = value;
    else if (key == "data.labels") cfg.data_labels = value;
    else if (key == "data.eval_images") cfg.eval_images = value;
    else if (key == "data.eval_labels") cfg.eval_labels = value;
    else if (key == "data.synthetic") cfg.synthetic = to_bool(key, value);
    else if (key == "data.n") cfg.synth_n = to_u64(key, value);
    else if (key == "data.eval_n") cfg.synth_eval_n = to_u64(key, value);
    else if (key == "data.classes") cfg.synth_classes = static_cast<std::uint32_t>(to_u64(key, value));
    else if (key == "data.h") cfg.synth_h = to_u64(key, value);
    else if (key == "data.w") cfg.synth_w = to_u64(key, value);
    else if (key == "arch") cfg.arch_name = value;
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "train.epochs") cfg.train.epochs = to_u64(key, value);
    else if (key == "train.batch_size") cfg.train.batch_size = to_u64(key, value);
    else if (key == "train.lr") cfg.train.learning_rate = to_double(key, value);
    else if (key == "ledger.mode") {
        if (value == "full") cfg.ledger_mode = LedgerMode::full;
        else if (value == "pruned") cfg.ledger_mode = LedgerMode::pruned;
        else throw ConfigError("unknown ledger.mode '" + value + "'");
    } else if (key == "ledger.strategy") {
        if (value == "random") cfg.prune_strategy = PruneStrategy::random;
        else if (value == "magnitude") cfg.prune_strategy = PruneStrategy::magnitude;
        else if (value == "global") cfg.prune_strategy = PruneStrategy::global;
        else throw ConfigError("unknown ledger.strategy '" + value + "'");
    } else if (key == "ledger.p_first") cfg.prune_first = to_double(key, value);
    else if (key == "ledger.p_last") cfg.prune_last = to_double(key, value);
    else if (key == "ledger.p") cfg.prune_first = cfg.prune_last = to_double(key, value);
    else if (key == "unlearn.algorithm") cfg.unlearn.algorithm = parse_algorithm(value);
    else if (key == "unlearn.lr") cfg.unlearn.learning_rate = to_double(key, value);
    else if (key == "unlearn.max_epochs") cfg.unlearn.max_epochs = to_u64(key, value);
    else if (key == "unlearn.tau") cfg.unlearn.target_accuracy_stop = to_double(key, value);
    else if (key == "unlearn.batch_size") cfg.unlearn.batch_size = to_u64(key, value);
    else if (key == "unlearn.staged") cfg.unlearn.staged = to_bool(key, value);
    else if (key == "unlearn.redraw_flips") cfg.unlearn.redraw_flips = to_bool(key, value);
    else if (key == "select.q_first") { cfg.select_first = to_double(key, value); cfg.select_defaults = false; }
    else if (key == "select.q_last") { cfg.select_last = to_double(key, value); cfg.select_defaults = false; }
    else if (key == "select.stride") cfg.select_stride = to_u64(key, value);
    else if (key == "target.class") cfg.target_class = static_cast<std::uint32_t>(to_u64(key, value));
    else if (key == "target.ids") {
        cfg.target_ids.clear();
        for (const std::string& part : split_commas(value))
            cfg.target_ids.push_back(to_u64(key, part));
    } else if (key == "sweep.fractions") {
        cfg.sweep_fractions.clear();
        for (const std::string& part : split_commas(value))
            cfg.sweep_fractions.push_back(to_double(key, part));
    } else if (key == "out") cfg.out_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

void validate(const RunConfig& cfg) {
    if (!cfg.synthetic && (cfg.data_images.empty() || cfg.data_labels.empty()))
        throw ConfigError(
            "dataset source required: set data.synthetic=true or data.images and data.labels");
    if (cfg.train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (cfg.train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (!(cfg.train.learning_rate > 0)) throw ConfigError("train.lr must be > 0");
    if (!(cfg.unlearn.learning_rate > 0)) throw ConfigError("unlearn.lr must be > 0");
    if (cfg.unlearn.max_epochs < 1) throw ConfigError("unlearn.max_epochs must be >= 1");
    if (cfg.unlearn.target_accuracy_stop < 0 || cfg.unlearn.target_accuracy_stop >= 1)
        throw ConfigError("unlearn.tau must be in [0,1)");
    for (double p : {cfg.prune_first, cfg.prune_last})
        if (p < 0 || p > 1) throw ConfigError("ledger prune fractions must be in [0,1]");
    for (double q : {cfg.select_first, cfg.select_last})
        if (!(q > 0 && q <= 1)) throw ConfigError("selection fractions must be in (0,1]");
    if (cfg.synthetic && cfg.synth_n < cfg.synth_classes)
        throw ConfigError("data.n must be >= data.classes");
}

}  // namespace

std::uint64_t RunConfig::train_seed() const { return mix_seed(seed, 101); }
std::uint64_t RunConfig::data_seed() const { return mix_seed(seed, 102); }
std::uint64_t RunConfig::prune_seed() const { return mix_seed(seed, 103); }
std::uint64_t RunConfig::unlearn_seed() const { return mix_seed(seed, 104); }
std::uint64_t RunConfig::sweep_seed() const { return mix_seed(seed, 105); }

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: '" +
                              t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key on config line " + std::to_string(lineno));
        apply_key(cfg, key, value);
        cfg.raw[key] = value;
    }
    cfg.train.seed = cfg.train_seed();
    cfg.unlearn.seed = cfg.unlearn_seed();
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

Architecture make_architecture(const std::string& name, std::size_t channels, std::size_t h,
                               std::size_t w, std::uint32_t classes) {
    if (name == "mlp") return make_mlp(channels, h, w, classes);
    if (name == "convnet") return make_convnet(channels, h, w, classes);
    throw ConfigError("unknown architecture '" + name + "'");
}

PrunePlan make_prune_plan(const RunConfig& cfg, const Architecture& arch) {
    PrunePlan plan;
    plan.strategy = cfg.prune_strategy;
    plan.seed = cfg.prune_seed();
    const std::size_t n = arch.param_layer_indices().size();
    if (plan.strategy == PruneStrategy::global)
        plan.fractions = {cfg.prune_first};
    else
        plan.fractions = prune_schedule(n, cfg.prune_first, cfg.prune_last);
    return plan;
}

SelectionPlan make_selection_plan(const RunConfig& cfg, const Architecture& arch) {
    SelectionPlan plan;
    plan.stride = cfg.select_stride;
    const std::size_t n = arch.param_layer_indices().size();
    double first = cfg.select_first, last = cfg.select_last;
    if (cfg.select_defaults) {
        if (cfg.unlearn.algorithm == UnlearnAlgorithm::optimization_partial) {
            first = 0.1;
            last = 0.9;
        } else {
            first = 0.9;
            last = 0.1;
        }
    }
    plan.fractions = selection_schedule(n, first, last);
    return plan;
}

UnlearnAlgorithm parse_algorithm(const std::string& name) {
    if (name == "amnesiac") return UnlearnAlgorithm::amnesiac;
    if (name == "partial_amnesiac") return UnlearnAlgorithm::partial_amnesiac;
    if (name == "label_flip") return UnlearnAlgorithm::label_flip;
    if (name == "label_flip_partial") return UnlearnAlgorithm::label_flip_partial;
    if (name == "optimization") return UnlearnAlgorithm::optimization;
    if (name == "optimization_partial") return UnlearnAlgorithm::optimization_partial;
    throw ConfigError("unknown unlearn.algorithm '" + name + "'");
}

std::string algorithm_name(UnlearnAlgorithm a) {
    switch (a) {
        case UnlearnAlgorithm::amnesiac: return "amnesiac";
        case UnlearnAlgorithm::partial_amnesiac: return "partial_amnesiac";
        case UnlearnAlgorithm::label_flip: return "label_flip";
        case UnlearnAlgorithm::label_flip_partial: return "label_flip_partial";
        case UnlearnAlgorithm::optimization: return "optimization";
        case UnlearnAlgorithm::optimization_partial: return "optimization_partial";
    }
    return "unknown";
}

}  // namespace forgetd
