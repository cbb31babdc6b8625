#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zonocert/certify.hpp"
#include "zonocert/dataset.hpp"
#include "zonocert/training.hpp"

namespace zonocert::harness {

// Flat key=value file with '#' comments. Every key must be consumed by the
// typed getters; leftovers are a configuration error (no silent drift).
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    long long get_int(const std::string& key, long long fallback);
    long long require_int(const std::string& key);
    double get_real(const std::string& key, double fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);

    // Throws listing any keys never asked for.
    void reject_unknown() const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> consumed_;
};

struct DatasetSpec {
    std::string kind; // mnist | synth
    std::string train_images, train_labels, test_images, test_labels;
    int train_limit = 0, test_limit = 0;
    int classes = 3, train_per_class = 100, test_per_class = 50, dim = 8;
    double margin = 0.5;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir;
    DatasetSpec dataset;
    std::vector<int> input_shape;
    std::string arch; // e.g. conv:8:5:2,conv:8:4:2,dense:32,dense:10

    train::LossVariant loss_variant = train::LossVariant::Maar;
    double train_epsilon = 0.05;
    double lambda = 6.0;
    std::vector<std::pair<int, int>> stage_plan;
    int batch_size = 100;
    std::string optimizer = "adam"; // adam | sgd
    double lr = 1e-4;
    double momentum = 0.9;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    nn::LrSchedule lr_schedule;
    attack::AttackConfig train_attack{0.25, 8, 1};
    int cauchy_k = 0;

    double certify_epsilon = 0.05;
    attack::AttackConfig certify_attack{0.01, 40, 1};
    int bab_budget = 50;
    int latent_block = 1;
    attack::AttackConfig latent_attack{0.01, 150, 1};

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_text(const std::string& text);

    // Sorted key=value form; excludes output_dir so the hash identifies the
    // experiment, not where its files land.
    std::string canonical() const;
    std::uint64_t hash() const;

    void check_referenced_files() const;

    nn::LayeredNetwork build_network() const;
    data::DatasetSplit load_split(const std::string& which) const; // train | test
    train::TrainingConfig training_config() const;
    cert::MetricsConfig metrics_config() const;
};

std::vector<int> parse_input_shape(const std::string& text);
std::vector<nn::Layer> parse_arch(const std::string& arch, const std::vector<int>& input_shape,
                                  std::uint64_t init_seed);
std::uint64_t fnv1a64(const std::string& text);

} // namespace zonocert::harness
