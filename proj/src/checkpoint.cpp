#include "edbl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace edbl {

namespace {

constexpr char kMagic[4] = {'E', 'D', 'B', 'L'};
constexpr std::uint32_t kVersion = 1;

// Explicit little-endian packing keeps the format stable across hosts.
template <typename T>
void put_uint(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
    }
}

void put_i64(std::string& out, std::int64_t value) {
    put_uint<std::uint64_t>(out, static_cast<std::uint64_t>(value));
}

void put_f64(std::string& out, double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    put_uint<std::uint64_t>(out, bits);
}

void put_tensor(std::string& out, const Matrix& m) {
    put_uint<std::uint64_t>(out, m.rows());
    put_uint<std::uint64_t>(out, m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    template <typename T>
    T take_uint() {
        need(sizeof(T));
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::int64_t take_i64() { return static_cast<std::int64_t>(take_uint<std::uint64_t>()); }

    double take_f64() {
        const std::uint64_t bits = take_uint<std::uint64_t>();
        double value;
        std::memcpy(&value, &bits, sizeof(value));
        return value;
    }

    std::string take_bytes(std::size_t n) {
        need(n);
        std::string out = buf_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    Matrix take_tensor() {
        const auto rows = take_uint<std::uint64_t>();
        const auto cols = take_uint<std::uint64_t>();
        Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = take_f64();
        return m;
    }

    bool done() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw std::runtime_error(path_ + ": truncated checkpoint");
    }

    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string encode_model(const Model& model) {
    std::string out;
    put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden().size()));
    put_uint<std::uint64_t>(out, model.old_class_count());
    for (const auto& layer : model.hidden()) {
        put_tensor(out, layer.weights);
        put_tensor(out, layer.bias);
    }
    put_tensor(out, model.head().weights);
    return out;
}

Model decode_model(Reader& r) {
    const auto hidden_count = r.take_uint<std::uint32_t>();
    const auto old_classes = r.take_uint<std::uint64_t>();
    std::vector<HiddenLayer> hidden;
    for (std::uint32_t l = 0; l < hidden_count; ++l) {
        HiddenLayer layer;
        layer.weights = r.take_tensor();
        layer.bias = r.take_tensor();
        hidden.push_back(std::move(layer));
    }
    HeadLayer head;
    head.weights = r.take_tensor();
    head.old_class_count = static_cast<std::size_t>(old_classes);
    return Model(std::move(hidden), std::move(head));
}

std::string encode_store(const ExemplarStore& store) {
    std::string out;
    out.push_back(store.policy() == BudgetPolicy::FixedTotal ? '\0' : '\1');
    put_uint<std::uint64_t>(out, store.budget());
    put_uint<std::uint64_t>(out, store.current_cap());
    const auto ids = store.class_ids();
    put_uint<std::uint64_t>(out, ids.size());
    for (int id : ids) {
        const auto& samples = store.exemplars(id);
        put_i64(out, id);
        put_uint<std::uint64_t>(out, samples.size());
        for (const auto& s : samples) {
            put_i64(out, s.class_id);
            put_uint<std::uint64_t>(out, s.task_id);
            put_tensor(out, s.features);
        }
    }
    return out;
}

ExemplarStore decode_store(Reader& r, const std::string& path) {
    const char policy = r.take_bytes(1)[0];
    const auto budget = r.take_uint<std::uint64_t>();
    const auto cap = r.take_uint<std::uint64_t>();
    ExemplarStore store = ExemplarStore::restore(
        policy == '\0' ? BudgetPolicy::FixedTotal : BudgetPolicy::PerClass,
        static_cast<std::size_t>(budget), static_cast<std::size_t>(cap));
    const auto class_count = r.take_uint<std::uint64_t>();
    (void)path;
    for (std::uint64_t c = 0; c < class_count; ++c) {
        const int id = static_cast<int>(r.take_i64());
        const auto n = r.take_uint<std::uint64_t>();
        std::vector<Sample> samples;
        for (std::uint64_t i = 0; i < n; ++i) {
            Sample s;
            s.class_id = static_cast<int>(r.take_i64());
            s.task_id = static_cast<std::size_t>(r.take_uint<std::uint64_t>());
            s.features = r.take_tensor();
            samples.push_back(std::move(s));
        }
        store.add_class(id, std::move(samples));
    }
    return store;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const ExemplarStore* store) {
    std::string body;
    const std::uint32_t sections = store ? 2 : 1;

    std::string header;
    header.append(kMagic, 4);
    put_uint<std::uint32_t>(header, kVersion);
    put_uint<std::uint32_t>(header, sections);

    auto append_section = [&](const std::string& name, const std::string& payload) {
        put_uint<std::uint32_t>(body, static_cast<std::uint32_t>(name.size()));
        body.append(name);
        put_uint<std::uint64_t>(body, payload.size());
        body.append(payload);
    };
    append_section("model", encode_model(model));
    if (store) append_section("exemplars", encode_store(*store));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r(buf, path);
    if (r.take_bytes(4) != std::string(kMagic, 4)) throw std::runtime_error(path + ": bad magic");
    const auto version = r.take_uint<std::uint32_t>();
    if (version != kVersion) throw std::runtime_error(path + ": unsupported version");
    const auto sections = r.take_uint<std::uint32_t>();

    std::optional<Model> model;
    std::optional<ExemplarStore> store;
    for (std::uint32_t s = 0; s < sections; ++s) {
        const auto name_len = r.take_uint<std::uint32_t>();
        const std::string name = r.take_bytes(name_len);
        const auto payload_len = r.take_uint<std::uint64_t>();
        if (name == "model") {
            model = decode_model(r);
        } else if (name == "exemplars") {
            store = decode_store(r, path);
        } else {
            r.take_bytes(static_cast<std::size_t>(payload_len));
        }
    }
    if (!model) throw std::runtime_error(path + ": checkpoint holds no model");

    Checkpoint ck{std::move(*model), std::move(store)};
    return ck;
}

}  // namespace edbl
