#include "lprobe/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace lprobe {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& bytes, std::string source)
        : bytes_(bytes), source_(std::move(source)) {}

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw LengthError(source_ + ": truncated " + what + " (need " + std::to_string(n) +
                              " bytes, have " + std::to_string(remaining()) + ")");
        }
    }

    std::uint16_t u16() {
        require(2, "header field");
        std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32() {
        require(4, "header field");
        return raw_u32();
    }

    std::uint32_t raw_u32() noexcept {
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        }
        pos_ += 4;
        return v;
    }

    std::string bytes(std::size_t n, const char* what) {
        require(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    const std::vector<unsigned char>& bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError(std::string(what) + " does not fit in u32");
    }
    return static_cast<std::uint32_t>(v);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::string trim_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') {
        s.pop_back();
    }
    return s;
}

}  // namespace

const char* to_string(SplitTag tag) noexcept {
    switch (tag) {
        case SplitTag::train: return "train";
        case SplitTag::test: return "test";
        case SplitTag::unsplit: return "unsplit";
    }
    return "unsplit";
}

std::vector<std::size_t> EmbeddingDataset::class_counts() const {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (auto label : labels) {
        if (label < counts.size()) {
            ++counts[label];
        }
    }
    return counts;
}

void EmbeddingDataset::check_invariants() const {
    if (labels.size() != data.rows()) {
        throw ConsistencyError("label count " + std::to_string(labels.size()) +
                               " does not match row count " + std::to_string(data.rows()));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes.size()) {
            throw ConsistencyError("row " + std::to_string(i) + " has label " +
                                   std::to_string(labels[i]) + " but only " +
                                   std::to_string(classes.size()) + " classes");
        }
    }
}

EmbeddingDataset load_binary(const std::filesystem::path& path, SplitTag split) {
    const auto bytes = read_file(path);
    ByteReader in(bytes, path.string());

    if (in.remaining() < 4 || in.bytes(4, "magic") != "EMB1") {
        throw FormatError(path.string() + ": missing EMB1 magic");
    }
    const auto version = in.u32();
    if (version != kEmb1Version) {
        throw FormatError(path.string() + ": unsupported EMB1 version " + std::to_string(version));
    }
    const std::size_t n_rows = in.u32();
    const std::size_t n_cols = in.u32();
    const std::size_t n_classes = in.u32();

    EmbeddingDataset ds;
    ds.split = split;
    ds.classes.reserve(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto len = in.u16();
        ds.classes.push_back(in.bytes(len, "class table"));
    }

    // Header fields are u32, so the product fits in 128 bits.
    const auto payload = static_cast<unsigned __int128>(n_rows) * (n_cols + 1) * 4;
    if (static_cast<unsigned __int128>(in.remaining()) != payload) {
        throw LengthError(path.string() + ": header declares " + std::to_string(n_rows) + " x " +
                          std::to_string(n_cols) + " but payload holds " + std::to_string(in.remaining()) + " bytes");
    }

    ds.labels.resize(n_rows);
    for (auto& label : ds.labels) {
        label = in.raw_u32();
    }
    ds.data = Matrix(n_rows, n_cols);
    for (auto& v : ds.data.values()) {
        v = static_cast<double>(std::bit_cast<float>(in.raw_u32()));
    }
    ds.check_invariants();
    return ds;
}

void save_binary(const EmbeddingDataset& ds, const std::filesystem::path& path) {
    ds.check_invariants();

    std::string out = "EMB1";
    put_u32(out, kEmb1Version);
    put_u32(out, checked_u32(ds.rows(), "row count"));
    put_u32(out, checked_u32(ds.dim(), "column count"));
    put_u32(out, checked_u32(ds.num_classes(), "class count"));
    for (const auto& name : ds.classes) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw FormatError("class name longer than 65535 bytes");
        }
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
    }
    for (auto label : ds.labels) {
        put_u32(out, label);
    }
    for (double v : ds.data.values()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot write " + path.string());
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw IoError("write failed for " + path.string());
    }
}

EmbeddingDataset load_csv(const std::filesystem::path& path, SplitTag split) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ": missing header row");
    }
    const auto header = split_csv_line(trim_cr(line));
    if (header.empty() || header[0] != "label") {
        throw ParseError(path.string() + ": header must start with 'label'");
    }
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j + 1] != "f" + std::to_string(j)) {
            throw ParseError(path.string() + ": header column " + std::to_string(j + 1) +
                             " should be f" + std::to_string(j));
        }
    }

    EmbeddingDataset ds;
    ds.split = split;
    std::unordered_map<std::string, std::uint32_t> index;
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        line = trim_cr(line);
        if (line.empty()) {
            continue;
        }
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() != d + 1) {
            throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                             std::to_string(fields.size() - 1) + " features, expected " +
                             std::to_string(d));
        }
        auto [it, inserted] =
            index.try_emplace(fields[0], static_cast<std::uint32_t>(ds.classes.size()));
        if (inserted) {
            ds.classes.push_back(fields[0]);
        }
        ds.labels.push_back(it->second);
        for (std::size_t j = 1; j <= d; ++j) {
            const auto& f = fields[j];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
                throw ParseError(path.string() + ": row " + std::to_string(row) + " column " +
                                 std::to_string(j) + " is not a number: '" + f + "'");
            }
            values.push_back(v);
        }
    }
    ds.data = Matrix(ds.labels.size(), d, std::move(values));
    return ds;
}

void save_csv(const EmbeddingDataset& ds, const std::filesystem::path& path) {
    ds.check_invariants();
    for (const auto& name : ds.classes) {
        if (name.find_first_of(",\n\r") != std::string::npos) {
            throw FormatError("class name '" + name + "' cannot be written to CSV");
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "label";
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        out << ",f" << j;
    }
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        out << ds.classes[ds.labels[i]];
        for (double v : ds.data.row(i)) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

EmbeddingDataset with_catalog(const EmbeddingDataset& ds, const std::vector<std::string>& catalog) {
    if (ds.classes == catalog) {
        return ds;
    }
    std::unordered_map<std::string, std::uint32_t> target;
    for (std::size_t c = 0; c < catalog.size(); ++c) {
        target.emplace(catalog[c], static_cast<std::uint32_t>(c));
    }
    std::string mismatch;
    std::vector<std::uint32_t> remap(ds.classes.size());
    for (std::size_t c = 0; c < ds.classes.size(); ++c) {
        auto it = target.find(ds.classes[c]);
        if (it == target.end()) {
            mismatch += " +" + ds.classes[c];
        } else {
            remap[c] = it->second;
        }
    }
    for (const auto& name : catalog) {
        if (std::find(ds.classes.begin(), ds.classes.end(), name) == ds.classes.end()) {
            mismatch += " -" + name;
        }
    }
    if (!mismatch.empty()) {
        throw ConsistencyError("class catalogs differ:" + mismatch);
    }
    EmbeddingDataset out = ds;
    out.classes = catalog;
    for (auto& label : out.labels) {
        label = remap[label];
    }
    return out;
}

EmbeddingDataset normalize_rows(const EmbeddingDataset& ds) {
    EmbeddingDataset out = ds;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.data.row(i);
        double sq = 0.0;
        for (double v : row) {
            sq += v * v;
        }
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0) || !std::isfinite(norm)) {
            throw DegenerateInputError("row " + std::to_string(i) +
                                       " has zero or non-finite norm and cannot be normalized");
        }
        for (double& v : row) {
            v /= norm;
        }
    }
    return out;
}

RowNormReport row_norm_deviation(const EmbeddingDataset& ds) {
    RowNormReport report;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        double sq = 0.0;
        for (double v : ds.data.row(i)) {
            sq += v * v;
        }
        const double dev = std::abs(std::sqrt(sq) - 1.0);
        if (dev > report.worst_deviation || !std::isfinite(dev)) {
            report.worst_deviation = std::isfinite(dev) ? dev : std::numeric_limits<double>::infinity();
            report.worst_row = i;
        }
    }
    return report;
}

// --- manifest ---------------------------------------------------------------

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        Manifest m;
        m.dataset_name = j.at("dataset_name").get<std::string>();
        m.backbone_id = j.at("backbone_id").get<std::string>();
        m.pooling_descriptor = j.at("pooling_descriptor").get<std::string>();
        m.dim = j.at("dim").get<std::size_t>();
        for (const auto& [name, split] : j.at("splits").items()) {
            m.splits[name] = ManifestSplit{split.at("file").get<std::string>(),
                                           split.at("rows").get<std::size_t>(),
                                           split.at("checksum").get<std::string>()};
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["dataset_name"] = m.dataset_name;
    j["backbone_id"] = m.backbone_id;
    j["pooling_descriptor"] = m.pooling_descriptor;
    j["dim"] = m.dim;
    j["splits"] = nlohmann::ordered_json::object();
    for (const auto& [name, split] : m.splits) {
        j["splits"][name] = {{"file", split.file}, {"rows", split.rows}, {"checksum", split.checksum}};
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

std::string file_checksum(const std::filesystem::path& path) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : read_file(path)) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream s;
    s << std::hex;
    s.width(16);
    s.fill('0');
    s << h;
    return s.str();
}

std::vector<std::string> verify_manifest(const Manifest& m, const std::filesystem::path& dir) {
    std::vector<std::string> problems;
    for (const auto& [name, split] : m.splits) {
        const auto file = dir / split.file;
        if (!std::filesystem::exists(file)) {
            problems.push_back(name + ": missing file " + split.file);
            continue;
        }
        const auto sum = file_checksum(file);
        if (sum != split.checksum) {
            problems.push_back(name + ": checksum " + sum + " != manifest " + split.checksum);
        }
        try {
            const auto ds = load_binary(file);
            if (ds.dim() != m.dim) {
                problems.push_back(name + ": dim " + std::to_string(ds.dim()) + " != manifest " +
                                   std::to_string(m.dim));
            }
            if (ds.rows() != split.rows) {
                problems.push_back(name + ": rows " + std::to_string(ds.rows()) +
                                   " != manifest " + std::to_string(split.rows));
            }
        } catch (const Error& e) {
            problems.push_back(name + ": " + e.what());
        }
    }
    return problems;
}

}  // namespace lprobe
