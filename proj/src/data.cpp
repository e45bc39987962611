#include "edbl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace edbl {

std::vector<int> Dataset::class_ids() const {
    std::set<int> ids;
    for (const auto& s : train) ids.insert(s.class_id);
    for (const auto& s : test) ids.insert(s.class_id);
    return std::vector<int>(ids.begin(), ids.end());
}

void ClassRegistry::add_classes(const std::vector<int>& ids) {
    for (int id : ids) {
        if (index_.count(id)) throw std::invalid_argument("ClassRegistry: class already registered");
        index_[id] = ids_.size();
        ids_.push_back(id);
    }
}

std::size_t ClassRegistry::index_of(int class_id) const {
    auto it = index_.find(class_id);
    if (it == index_.end()) throw std::invalid_argument("ClassRegistry: unknown class id");
    return it->second;
}

Dataset generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
    if (spec.classes < 2 || spec.dims < 2) {
        throw std::invalid_argument("generate_synthetic: need at least 2 classes and 2 dims");
    }
    if (spec.separation < 0.0) throw std::invalid_argument("generate_synthetic: negative separation");

    // Class means: random directions scaled to the separation radius.
    std::vector<Matrix> means;
    means.reserve(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        Matrix dir = gaussian_matrix(1, spec.dims, 1.0, rng);
        const double norm = l2_norm(dir);
        if (norm > 0.0) dir.scale(spec.separation / norm);
        means.push_back(dir);
    }

    Dataset ds;
    ds.feature_dim = spec.dims;
    auto emit = [&](std::vector<Sample>& out, std::size_t per_class) {
        for (std::size_t c = 0; c < spec.classes; ++c) {
            for (std::size_t i = 0; i < per_class; ++i) {
                Sample s;
                s.features = gaussian_matrix(1, spec.dims, spec.covariance_scale, rng);
                s.features.add_scaled(means[c], 1.0);
                s.class_id = static_cast<int>(c);
                out.push_back(std::move(s));
            }
        }
    };
    emit(ds.train, spec.train_per_class);
    emit(ds.test, spec.test_per_class);
    return ds;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& raw, const std::string& path, std::size_t line) {
    const std::string s = trimmed(raw);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        parse_fail(path, line, "cannot parse '" + raw + "' as a number");
    }
    return value;
}

int parse_class_id(const std::string& raw, const std::string& path, std::size_t line) {
    const std::string s = trimmed(raw);
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        parse_fail(path, line, "cannot parse '" + raw + "' as an integer class id");
    }
    return value;
}

}  // namespace

CsvRows load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open file");

    CsvRows rows;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file, expected a header row");
    ++line_no;
    const std::size_t columns = split_fields(line).size();
    if (columns < 2) parse_fail(path, line_no, "header needs a class column and at least one feature");
    rows.feature_dim = columns - 1;

    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != columns) {
            parse_fail(path, line_no,
                       "expected " + std::to_string(columns) + " columns, got " + std::to_string(fields.size()));
        }
        Sample s;
        s.class_id = parse_class_id(fields[0], path, line_no);
        s.features = Matrix(1, rows.feature_dim);
        for (std::size_t c = 1; c < columns; ++c) {
            s.features(0, c - 1) = parse_double(fields[c], path, line_no);
        }
        rows.samples.push_back(std::move(s));
        rows.line_numbers.push_back(line_no);
    }
    if (rows.samples.empty()) throw std::runtime_error(path + ": no data rows");
    return rows;
}

Dataset load_csv_dataset(const std::string& train_path, const std::string& test_path) {
    CsvRows train = load_csv(train_path);
    CsvRows test = load_csv(test_path);
    if (train.feature_dim != test.feature_dim) {
        throw std::runtime_error(test_path + ": feature count differs from train file");
    }

    std::set<int> train_classes;
    for (const auto& s : train.samples) train_classes.insert(s.class_id);
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        if (!train_classes.count(test.samples[i].class_id)) {
            parse_fail(test_path, test.line_numbers[i],
                       "class id " + std::to_string(test.samples[i].class_id) + " never appears in the train split");
        }
    }

    // z-score with train statistics only
    const std::size_t d = train.feature_dim;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (const auto& s : train.samples) {
        for (std::size_t c = 0; c < d; ++c) mean[c] += s.features(0, c);
    }
    for (std::size_t c = 0; c < d; ++c) mean[c] /= static_cast<double>(train.samples.size());
    for (const auto& s : train.samples) {
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = s.features(0, c) - mean[c];
            var[c] += diff * diff;
        }
    }
    std::vector<double> stddev(d);
    for (std::size_t c = 0; c < d; ++c) {
        stddev[c] = std::max(std::sqrt(var[c] / static_cast<double>(train.samples.size())), 1e-8);
    }
    auto standardize = [&](std::vector<Sample>& samples) {
        for (auto& s : samples) {
            for (std::size_t c = 0; c < d; ++c) {
                s.features(0, c) = (s.features(0, c) - mean[c]) / stddev[c];
            }
        }
    };
    standardize(train.samples);
    standardize(test.samples);

    Dataset ds;
    ds.feature_dim = d;
    ds.train = std::move(train.samples);
    ds.test = std::move(test.samples);
    return ds;
}

void write_csv(const std::string& path, const std::vector<Sample>& samples, std::size_t feature_dim) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "class";
    for (std::size_t c = 0; c < feature_dim; ++c) out << ",f" << c;
    out << "\n";
    char buf[64];
    for (const auto& s : samples) {
        out << s.class_id;
        for (std::size_t c = 0; c < feature_dim; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", s.features(0, c));
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::map<int, std::size_t> count_by_class(const std::vector<Sample>& samples) {
    std::map<int, std::size_t> counts;
    for (const auto& s : samples) ++counts[s.class_id];
    return counts;
}

}  // namespace edbl
