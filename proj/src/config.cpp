#include "zonocert/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zonocert/checkpoint.hpp"

namespace zonocert::harness {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': bad integer '" + v + "'");
    }
}

double parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': bad real '" + v + "'");
    }
}

} // namespace

KeyValueFile KeyValueFile::parse_text(const std::string& text) {
    KeyValueFile kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (kv.values_.count(key)) throw ConfigError("duplicate key '" + key + "'");
        kv.values_[key] = value;
        kv.consumed_[key] = false;
    }
    return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) != 0; }

std::string KeyValueFile::get_string(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    consumed_[key] = true;
    return it->second;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    return it->second;
}

long long KeyValueFile::get_int(const std::string& key, long long fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    return parse_int(key, it->second);
}

long long KeyValueFile::require_int(const std::string& key) {
    return parse_int(key, get_string(key));
}

double KeyValueFile::get_real(const std::string& key, double fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    return parse_real(key, it->second);
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    consumed_[key] = true;
    try {
        std::size_t used = 0;
        const std::uint64_t r = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': bad unsigned integer '" + it->second + "'");
    }
}

void KeyValueFile::reject_unknown() const {
    std::string bad;
    for (const auto& [key, used] : consumed_) {
        if (!used) bad += (bad.empty() ? "" : ", ") + key;
    }
    if (!bad.empty()) throw ConfigError("unknown keys: " + bad);
}

std::vector<int> parse_input_shape(const std::string& text) {
    std::vector<int> shape;
    for (const std::string& part : split(text, 'x')) {
        shape.push_back(static_cast<int>(parse_int("network.input", trim(part))));
    }
    return shape;
}

std::vector<nn::Layer> parse_arch(const std::string& arch, const std::vector<int>& input_shape,
                                  std::uint64_t /*init_seed*/) {
    std::vector<nn::Layer> layers;
    const std::vector<std::string> items = split(arch, ',');
    std::vector<int> cur = input_shape;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string item = trim(items[i]);
        const std::vector<std::string> f = split(item, ':');
        if (f.empty()) throw ConfigError("empty arch item");
        if (f[0] == "conv") {
            if (f.size() != 4) throw ConfigError("conv item needs conv:out:kernel:stride");
            if (cur.size() != 3) throw ConfigError("conv layer needs a (c,h,w) input");
            const int oc = static_cast<int>(parse_int("arch", f[1]));
            const int k = static_cast<int>(parse_int("arch", f[2]));
            const int s = static_cast<int>(parse_int("arch", f[3]));
            nn::Tensor kernel({oc, cur[0], k, k});
            nn::Tensor bias({oc});
            layers.push_back(nn::Layer::conv(std::move(kernel), s, std::move(bias)));
        } else if (f[0] == "dense") {
            if (f.size() != 2) throw ConfigError("dense item needs dense:units");
            const int units = static_cast<int>(parse_int("arch", f[1]));
            const int in_features = static_cast<int>(nn::shape_product(cur));
            nn::Tensor w({units, in_features});
            nn::Tensor b({units});
            layers.push_back(nn::Layer::dense(std::move(w), std::move(b)));
        } else {
            throw ConfigError("unknown arch item '" + item + "'");
        }
        cur = nn::layer_output_shape(layers.back(), cur);
        if (i + 1 < items.size()) {
            layers.push_back(nn::Layer::relu());
        }
    }
    return layers;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    KeyValueFile kv = KeyValueFile::parse_text(text);
    ExperimentConfig cfg;
    cfg.seed = kv.get_u64("seed", 1);
    cfg.output_dir = kv.get_string("output_dir", "");

    cfg.dataset.kind = kv.get_string("dataset.kind");
    if (cfg.dataset.kind == "mnist") {
        cfg.dataset.train_images = kv.get_string("dataset.train_images");
        cfg.dataset.train_labels = kv.get_string("dataset.train_labels");
        cfg.dataset.test_images = kv.get_string("dataset.test_images");
        cfg.dataset.test_labels = kv.get_string("dataset.test_labels");
        cfg.dataset.train_limit = static_cast<int>(kv.get_int("dataset.train_limit", 0));
        cfg.dataset.test_limit = static_cast<int>(kv.get_int("dataset.test_limit", 0));
    } else if (cfg.dataset.kind == "synth") {
        cfg.dataset.classes = static_cast<int>(kv.get_int("dataset.classes", 3));
        cfg.dataset.train_per_class = static_cast<int>(kv.get_int("dataset.train_per_class", 100));
        cfg.dataset.test_per_class = static_cast<int>(kv.get_int("dataset.test_per_class", 50));
        cfg.dataset.dim = static_cast<int>(kv.get_int("dataset.dim", 8));
        cfg.dataset.margin = kv.get_real("dataset.margin", 0.5);
    } else {
        throw ConfigError("dataset.kind must be mnist or synth");
    }

    cfg.input_shape = parse_input_shape(kv.get_string("network.input"));
    cfg.arch = kv.get_string("network.arch");

    const std::string loss = kv.get_string("train.loss", "maar");
    if (loss == "maar") {
        cfg.loss_variant = train::LossVariant::Maar;
    } else if (loss == "colt") {
        cfg.loss_variant = train::LossVariant::Colt;
    } else if (loss == "mat") {
        cfg.loss_variant = train::LossVariant::Mat;
    } else {
        throw ConfigError("train.loss must be maar, colt or mat");
    }
    cfg.train_epsilon = kv.get_real("train.epsilon", 0.05);
    cfg.lambda = kv.get_real("train.lambda", 6.0);
    const std::string stages = kv.get_string("train.stages", "0:10,1:10");
    for (const std::string& item : split(stages, ',')) {
        const auto f = split(trim(item), ':');
        if (f.size() != 2) throw ConfigError("train.stages items need block:epochs");
        cfg.stage_plan.emplace_back(static_cast<int>(parse_int("train.stages", f[0])),
                                    static_cast<int>(parse_int("train.stages", f[1])));
    }
    cfg.batch_size = static_cast<int>(kv.get_int("train.batch_size", 100));
    cfg.optimizer = kv.get_string("train.optimizer", "adam");
    if (cfg.optimizer != "adam" && cfg.optimizer != "sgd") {
        throw ConfigError("train.optimizer must be adam or sgd");
    }
    cfg.lr = kv.get_real("train.lr", cfg.optimizer == "adam" ? 1e-4 : 0.03);
    cfg.momentum = kv.get_real("train.momentum", 0.9);
    cfg.adam_beta1 = kv.get_real("train.adam_beta1", 0.9);
    cfg.adam_beta2 = kv.get_real("train.adam_beta2", 0.999);
    cfg.adam_eps = kv.get_real("train.adam_eps", 1e-8);
    const std::string decay = kv.get_string("train.lr_decay", "none");
    if (decay != "none" && !decay.empty()) {
        const auto f = split(decay, ':');
        if (f.size() != 3) throw ConfigError("train.lr_decay needs start:factor:period");
        cfg.lr_schedule.start_epoch = static_cast<int>(parse_int("train.lr_decay", f[0]));
        cfg.lr_schedule.factor = parse_real("train.lr_decay", f[1]);
        cfg.lr_schedule.period = static_cast<int>(parse_int("train.lr_decay", f[2]));
        if (cfg.lr_schedule.period < 1) throw ConfigError("train.lr_decay period must be >= 1");
    }
    cfg.train_attack.steps = static_cast<int>(kv.get_int("train.attack_steps", 8));
    cfg.train_attack.step_size = kv.get_real("train.attack_step_size", 0.25);
    cfg.train_attack.restarts = static_cast<int>(kv.get_int("train.attack_restarts", 1));
    cfg.cauchy_k = static_cast<int>(kv.get_int("train.cauchy_k", 0));

    cfg.certify_epsilon = kv.get_real("certify.epsilon", cfg.train_epsilon);
    cfg.certify_attack.steps = static_cast<int>(kv.get_int("certify.attack_steps", 40));
    cfg.certify_attack.step_size = kv.get_real("certify.attack_step_size", 0.01);
    cfg.certify_attack.restarts = static_cast<int>(kv.get_int("certify.attack_restarts", 1));
    cfg.bab_budget = static_cast<int>(kv.get_int("certify.bab_budget", 50));
    cfg.latent_block = static_cast<int>(kv.get_int("certify.latent_block", 1));
    cfg.latent_attack.steps = static_cast<int>(kv.get_int("certify.latent_steps", 150));
    cfg.latent_attack.step_size = kv.get_real("certify.latent_step_size", 0.01);
    cfg.latent_attack.restarts = static_cast<int>(kv.get_int("certify.latent_restarts", 1));

    kv.reject_unknown();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
}

std::string ExperimentConfig::canonical() const {
    std::vector<std::string> lines;
    auto add = [&lines](const std::string& k, const std::string& v) {
        lines.push_back(k + " = " + v);
    };
    auto real = [](double v) { return nn::format_double(v); };
    add("seed", std::to_string(seed));
    add("dataset.kind", dataset.kind);
    if (dataset.kind == "mnist") {
        add("dataset.train_images", dataset.train_images);
        add("dataset.train_labels", dataset.train_labels);
        add("dataset.test_images", dataset.test_images);
        add("dataset.test_labels", dataset.test_labels);
        add("dataset.train_limit", std::to_string(dataset.train_limit));
        add("dataset.test_limit", std::to_string(dataset.test_limit));
    } else {
        add("dataset.classes", std::to_string(dataset.classes));
        add("dataset.train_per_class", std::to_string(dataset.train_per_class));
        add("dataset.test_per_class", std::to_string(dataset.test_per_class));
        add("dataset.dim", std::to_string(dataset.dim));
        add("dataset.margin", real(dataset.margin));
    }
    {
        std::string s;
        for (std::size_t i = 0; i < input_shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(input_shape[i]);
        }
        add("network.input", s);
    }
    add("network.arch", arch);
    add("train.loss", train::loss_variant_name(loss_variant));
    add("train.epsilon", real(train_epsilon));
    add("train.lambda", real(lambda));
    {
        std::string s;
        for (std::size_t i = 0; i < stage_plan.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(stage_plan[i].first) + ":" + std::to_string(stage_plan[i].second);
        }
        add("train.stages", s);
    }
    add("train.batch_size", std::to_string(batch_size));
    add("train.optimizer", optimizer);
    add("train.lr", real(lr));
    add("train.momentum", real(momentum));
    add("train.adam_beta1", real(adam_beta1));
    add("train.adam_beta2", real(adam_beta2));
    add("train.adam_eps", real(adam_eps));
    if (lr_schedule.start_epoch >= 0) {
        add("train.lr_decay", std::to_string(lr_schedule.start_epoch) + ":" +
                                  real(lr_schedule.factor) + ":" +
                                  std::to_string(lr_schedule.period));
    } else {
        add("train.lr_decay", "none");
    }
    add("train.attack_steps", std::to_string(train_attack.steps));
    add("train.attack_step_size", real(train_attack.step_size));
    add("train.attack_restarts", std::to_string(train_attack.restarts));
    add("train.cauchy_k", std::to_string(cauchy_k));
    add("certify.epsilon", real(certify_epsilon));
    add("certify.attack_steps", std::to_string(certify_attack.steps));
    add("certify.attack_step_size", real(certify_attack.step_size));
    add("certify.attack_restarts", std::to_string(certify_attack.restarts));
    add("certify.bab_budget", std::to_string(bab_budget));
    add("certify.latent_block", std::to_string(latent_block));
    add("certify.latent_steps", std::to_string(latent_attack.steps));
    add("certify.latent_step_size", real(latent_attack.step_size));
    add("certify.latent_restarts", std::to_string(latent_attack.restarts));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

void ExperimentConfig::check_referenced_files() const {
    if (dataset.kind != "mnist") return;
    for (const std::string& p :
         {dataset.train_images, dataset.train_labels, dataset.test_images, dataset.test_labels}) {
        if (!std::filesystem::exists(p)) throw ConfigError("referenced file does not exist: " + p);
    }
}

nn::LayeredNetwork ExperimentConfig::build_network() const {
    nn::LayeredNetwork net(input_shape, parse_arch(arch, input_shape, seed));
    nn::init_he_uniform(net, seed);
    return net;
}

data::DatasetSplit ExperimentConfig::load_split(const std::string& which) const {
    const bool is_train = which == "train";
    if (!is_train && which != "test") throw ConfigError("split must be train or test");
    if (dataset.kind == "mnist") {
        return data::load_mnist_idx(is_train ? dataset.train_images : dataset.test_images,
                                    is_train ? dataset.train_labels : dataset.test_labels,
                                    is_train ? dataset.train_limit : dataset.test_limit, which);
    }
    return data::synth_blobs(dataset.classes,
                             is_train ? dataset.train_per_class : dataset.test_per_class,
                             dataset.dim, dataset.margin,
                             derive_seed(seed, {is_train ? 0x17a1ULL : 0x7e57ULL}), which);
}

train::TrainingConfig ExperimentConfig::training_config() const {
    train::TrainingConfig t;
    t.epsilon = train_epsilon;
    t.lambda = lambda;
    t.attack = train_attack;
    t.optimizer = optimizer == "adam"
                      ? nn::OptimizerState::adam(lr, adam_beta1, adam_beta2, adam_eps, lr_schedule)
                      : nn::OptimizerState::sgd_momentum(lr, momentum, lr_schedule);
    t.stage_plan = stage_plan;
    t.loss_variant = loss_variant;
    t.batch_size = batch_size;
    t.seed = seed;
    t.cauchy_k = cauchy_k;
    t.threads = 0; // resolve from environment
    return t;
}

cert::MetricsConfig ExperimentConfig::metrics_config() const {
    cert::MetricsConfig m;
    m.certify.epsilon = certify_epsilon;
    m.certify.pgd = certify_attack;
    m.certify.bab_budget = bab_budget;
    m.certify.seed = seed;
    m.ve_attack = certify_attack;
    m.latent_block = latent_block;
    m.latent_attack = latent_attack;
    m.threads = 0;
    return m;
}

} // namespace zonocert::harness
