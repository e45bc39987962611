#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edbl/matrix.hpp"
#include "edbl/rng.hpp"

namespace edbl {

// One labeled training point. task_id records which task introduced the
// sample's class; it is stamped when a task stream is built.
struct Sample {
    Matrix features;  // 1 x d
    int class_id = 0;
    std::size_t task_id = 0;
};

struct Dataset {
    std::size_t feature_dim = 0;
    std::vector<Sample> train;
    std::vector<Sample> test;

    std::vector<int> class_ids() const;  // distinct, ascending
};

// Maps class ids to head-row indices in introduction order. The head grows
// in this order, so logit column k always belongs to the k-th class seen.
class ClassRegistry {
public:
    void add_classes(const std::vector<int>& ids);
    std::size_t index_of(int class_id) const;
    int class_at(std::size_t index) const { return ids_.at(index); }
    bool contains(int class_id) const { return index_.count(class_id) != 0; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<int>& ids() const { return ids_; }

private:
    std::vector<int> ids_;
    std::map<int, std::size_t> index_;
};

// Gaussian clusters with class means placed uniformly on a sphere of radius
// `separation`. A desk-scale stand-in for image benchmarks.
struct SyntheticSpec {
    std::size_t classes = 10;
    std::size_t dims = 16;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 50;
    double separation = 3.0;
    double covariance_scale = 1.0;
};

Dataset generate_synthetic(const SyntheticSpec& spec, Rng& rng);

// Parses one CSV file: header row, first column an integer class id, the
// remaining columns real features. Errors cite the 1-based line number.
struct CsvRows {
    std::size_t feature_dim = 0;
    std::vector<Sample> samples;
    std::vector<std::size_t> line_numbers;  // parallel to samples
};
CsvRows load_csv(const std::string& path);

// Loads a train/test CSV pair. Features are z-scored with statistics
// computed on the train split only; a test class id absent from the train
// split is a parse error.
Dataset load_csv_dataset(const std::string& train_path, const std::string& test_path);

// Writes samples in the load_csv format.
void write_csv(const std::string& path, const std::vector<Sample>& samples, std::size_t feature_dim);

std::map<int, std::size_t> count_by_class(const std::vector<Sample>& samples);

}  // namespace edbl
