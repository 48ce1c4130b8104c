#include "gmmtvc/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gmmtvc {

bool LongitudinalDataset::has_labels() const {
    if (rows.empty()) return false;
    for (const auto& r : rows)
        if (r.label < 0) return false;
    return true;
}

std::vector<int> LongitudinalDataset::labels() const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.label);
    return out;
}

void validate(const LongitudinalDataset& data) {
    if (data.empty()) throw DataError("dataset is empty");
    const auto J = data.rows.front().times.size();
    const auto G = data.rows.front().xg.size();
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const auto& r = data.rows[i];
        const std::string where = "row " + std::to_string(i + 1) + " (id " + r.id + "): ";
        if (r.times.size() != J || r.y.size() != J || r.x.size() != J)
            throw DataError(where + "inconsistent number of waves");
        if (r.xg.size() != G) throw DataError(where + "inconsistent number of gating covariates");
        if (auto msg = Occasions::validate(r.times); !msg.empty()) throw DataError(where + msg);
        if (!std::isfinite(r.xe)) throw DataError(where + "xe must be observed");
        if (!r.xg.allFinite()) throw DataError(where + "xg must be observed");
    }
}

std::string format_double(double v) {
    if (is_missing(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r' && ch != '"') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    }
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column, bool allow_missing) {
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == ".") {
        if (allow_missing) return kMissing;
        throw DataError("row " + std::to_string(row) + ": column " + column + " must not be missing");
    }
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw DataError("row " + std::to_string(row) + ": column " + column + ": non-numeric cell '" +
                        cell + "'");
    return v;
}

int parse_label(const std::string& cell, std::size_t row) {
    if (cell.empty()) return -1;
    const double v = parse_cell(cell, row, "label", false);
    if (v != std::floor(v) || v < 1) throw DataError("row " + std::to_string(row) + ": label must be a positive integer");
    return static_cast<int>(v) - 1;
}

}  // namespace

LongitudinalDataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input: missing header");
    const auto header = split_csv(line);
    // Header: id, t_1..t_J, y_1..y_J, x_1..x_J, xe, xg1.., [label]
    if (header.empty() || header[0] != "id") throw DataError("malformed header: first column must be 'id'");
    int J = 0;
    while (1 + J < static_cast<int>(header.size()) && header[1 + J] == "t_" + std::to_string(J + 1)) ++J;
    if (J < 3) throw DataError("malformed header: expected t_1..t_J with J >= 3");
    std::size_t c = 1 + J;
    auto expect_block = [&](const char* prefix) {
        for (int j = 0; j < J; ++j, ++c) {
            const std::string want = std::string(prefix) + std::to_string(j + 1);
            if (c >= header.size() || header[c] != want)
                throw DataError("malformed header: expected column '" + want + "'");
        }
    };
    expect_block("y_");
    expect_block("x_");
    if (c >= header.size() || header[c] != "xe") throw DataError("malformed header: expected column 'xe'");
    ++c;
    int G = 0;
    while (c < header.size() && header[c] == "xg" + std::to_string(G + 1)) ++G, ++c;
    bool has_label = false;
    if (c < header.size() && header[c] == "label") has_label = true, ++c;
    if (c != header.size()) throw DataError("malformed header: unexpected column '" + header[c] + "'");

    LongitudinalDataset data;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                            " cells, found " + std::to_string(cells.size()));
        Individual ind;
        ind.id = cells[0];
        ind.times.resize(J);
        ind.y.resize(J);
        ind.x.resize(J);
        for (int j = 0; j < J; ++j) {
            ind.times[j] = parse_cell(cells[1 + j], row, header[1 + j], false);
            ind.y[j] = parse_cell(cells[1 + J + j], row, header[1 + J + j], true);
            ind.x[j] = parse_cell(cells[1 + 2 * J + j], row, header[1 + 2 * J + j], true);
        }
        std::size_t k = 1 + 3 * J;
        ind.xe = parse_cell(cells[k], row, "xe", false);
        ++k;
        ind.xg.resize(G);
        for (int g = 0; g < G; ++g, ++k) ind.xg[g] = parse_cell(cells[k], row, header[k], false);
        if (has_label) ind.label = parse_label(cells[k], row);
        if (auto msg = Occasions::validate(ind.times); !msg.empty())
            throw DataError("row " + std::to_string(row) + " (id " + ind.id + "): " + msg);
        data.rows.push_back(std::move(ind));
    }
    validate(data);
    return data;
}

LongitudinalDataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_dataset(in);
}

LongitudinalDataset read_long_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input: missing header");
    const auto header = split_csv(line);
    if (header.size() < 5 || header[0] != "id" || header[1] != "t" || header[2] != "y" || header[3] != "x" ||
        header[4] != "xe")
        throw DataError("malformed long header: expected id,t,y,x,xe,xg1..[,label]");
    std::size_t c = 5;
    int G = 0;
    while (c < header.size() && header[c] == "xg" + std::to_string(G + 1)) ++G, ++c;
    const bool has_label = c < header.size() && header[c] == "label";
    if (has_label) ++c;
    if (c != header.size()) throw DataError("malformed long header: unexpected column '" + header[c] + "'");

    LongitudinalDataset data;
    std::vector<double> t, y, x;
    Individual cur;
    auto flush = [&]() {
        if (cur.id.empty() && t.empty()) return;
        cur.times = Eigen::Map<Vec>(t.data(), static_cast<Eigen::Index>(t.size()));
        cur.y = Eigen::Map<Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
        cur.x = Eigen::Map<Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
        data.rows.push_back(cur);
        t.clear(), y.clear(), x.clear();
    };
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": wrong number of cells");
        if (cells[0] != cur.id || t.empty()) {
            if (!t.empty()) flush();
            cur = Individual{};
            cur.id = cells[0];
            cur.xe = parse_cell(cells[4], row, "xe", false);
            cur.xg.resize(G);
            for (int g = 0; g < G; ++g) cur.xg[g] = parse_cell(cells[5 + g], row, header[5 + g], false);
            if (has_label) cur.label = parse_label(cells[5 + G], row);
        }
        t.push_back(parse_cell(cells[1], row, "t", false));
        y.push_back(parse_cell(cells[2], row, "y", true));
        x.push_back(parse_cell(cells[3], row, "x", true));
    }
    flush();
    validate(data);
    return data;
}

LongitudinalDataset read_long_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return read_long_dataset(in);
}

void write_dataset(std::ostream& out, const LongitudinalDataset& data) {
    const int J = data.waves();
    const int G = data.gating_tics();
    const bool labels = data.has_labels();
    out << "id";
    for (const char* p : {"t_", "y_", "x_"})
        for (int j = 0; j < J; ++j) out << ',' << p << j + 1;
    out << ",xe";
    for (int g = 0; g < G; ++g) out << ",xg" << g + 1;
    if (labels) out << ",label";
    out << '\n';
    for (const auto& r : data.rows) {
        out << r.id;
        for (int j = 0; j < J; ++j) out << ',' << format_double(r.times[j]);
        for (int j = 0; j < J; ++j) out << ',' << format_double(r.y[j]);
        for (int j = 0; j < J; ++j) out << ',' << format_double(r.x[j]);
        out << ',' << format_double(r.xe);
        for (int g = 0; g < G; ++g) out << ',' << format_double(r.xg[g]);
        if (labels) out << ',' << r.label + 1;
        out << '\n';
    }
}

void write_dataset(const std::string& path, const LongitudinalDataset& data) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_dataset(out, data);
}

LongitudinalDataset standardize_tvc(const LongitudinalDataset& data, TvcScale* scale) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto& r : data.rows) {
        if (is_missing(r.x[0])) continue;
        sum += r.x[0];
        ++n;
    }
    if (n < 2) throw DataError("standardize_tvc: fewer than two observed baseline TVC values");
    const double mean = sum / static_cast<double>(n);
    for (const auto& r : data.rows)
        if (!is_missing(r.x[0])) sumsq += (r.x[0] - mean) * (r.x[0] - mean);
    const double sd = std::sqrt(sumsq / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw DataError("standardize_tvc: baseline TVC has zero standard deviation");
    LongitudinalDataset out = data;
    for (auto& r : out.rows) r.x = (r.x.array() - mean) / sd;  // NaN stays NaN
    if (scale) *scale = {mean, sd};
    return out;
}

}  // namespace gmmtvc
