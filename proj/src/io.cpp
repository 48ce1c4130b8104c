#include "gmmtvc/io.hpp"

#include "gmmtvc/report.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace gmmtvc {

using nlohmann::json;

namespace {

json spec_json(const ModelSpec& s) {
    return json{{"classes", s.classes},
                {"form", to_string(s.layout.form)},
                {"decomposition", to_string(s.layout.decomposition)},
                {"has_tic", s.layout.has_tic},
                {"has_tvc", s.layout.has_tvc},
                {"gating_tics", s.gating_tics}};
}

ModelSpec spec_of(const json& j) {
    ModelSpec s;
    s.classes = j.at("classes").get<int>();
    s.layout.form = form_kind_from_string(j.at("form").get<std::string>());
    s.layout.decomposition = decomposition_from_string(j.at("decomposition").get<std::string>());
    s.layout.has_tic = j.at("has_tic").get<bool>();
    s.layout.has_tvc = j.at("has_tvc").get<bool>();
    s.gating_tics = j.at("gating_tics").get<int>();
    s.validate();
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(2); }

ModelSpec spec_from_json(const std::string& text) {
    try {
        return spec_of(json::parse(text));
    } catch (const json::exception& e) {
        throw ModelError(std::string("model spec: ") + e.what());
    }
}

std::string fit_to_json(const FitResult& r, const std::string& posterior_file, double tmin, double tmax) {
    json j;
    j["spec"] = spec_json(r.spec);
    j["waves"] = r.waves;
    j["n"] = r.n;
    j["status"] = r.converged() ? "converged" : "failed";
    j["attempts_used"] = r.attempts_used;
    j["message"] = r.message;
    j["time_range"] = {tmin, tmax};
    if (r.converged()) {
        j["loglik"] = r.loglik;
        j["neg2ll"] = -2.0 * r.loglik;
        j["aic"] = r.aic;
        j["bic"] = r.bic;
    }
    j["n_free_parameters"] = r.n_free_parameters;
    if (r.converged()) {
        j["packed"] = std::vector<double>(r.packed.data(), r.packed.data() + r.packed.size());
        json est = json::array();
        for (std::size_t i = 0; i < r.names.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            est.push_back({{"name", r.names[i]},
                           {"estimate", r.values[k]},
                           {"se", r.standard_errors[k]},
                           {"lower", r.lower(static_cast<int>(i))},
                           {"upper", r.upper(static_cast<int>(i))}});
        }
        j["estimates"] = est;
    }
    j["posterior_file"] = posterior_file;
    return j.dump(2) + "\n";
}

StoredFit fit_from_json(const std::string& text) {
    StoredFit out;
    try {
        const json j = json::parse(text);
        FitResult& r = out.fit;
        r.spec = spec_of(j.at("spec"));
        r.waves = j.at("waves").get<int>();
        r.n = j.at("n").get<int>();
        r.status = j.at("status").get<std::string>() == "converged" ? FitStatus::Converged : FitStatus::Failed;
        r.attempts_used = j.value("attempts_used", 0);
        r.message = j.value("message", std::string());
        r.n_free_parameters = j.at("n_free_parameters").get<int>();
        out.posterior_file = j.value("posterior_file", std::string());
        if (j.contains("time_range")) {
            out.time_min = j.at("time_range").at(0).get<double>();
            out.time_max = j.at("time_range").at(1).get<double>();
        }
        if (r.converged()) {
            r.loglik = j.at("loglik").get<double>();
            r.aic = j.at("aic").get<double>();
            r.bic = j.at("bic").get<double>();
            const auto packed = j.at("packed").get<std::vector<double>>();
            r.packed = Eigen::Map<const Vec>(packed.data(), static_cast<Eigen::Index>(packed.size()));
            const ParameterMap map(r.spec, r.waves);
            r.estimates = unpack_parameters(r.packed, map);
            r.names = report_names(r.spec, r.waves);
            r.values = report_values(r.estimates, r.spec, r.waves);
            r.standard_errors = Vec::Constant(r.values.size(), std::numeric_limits<double>::quiet_NaN());
            for (const auto& e : j.at("estimates")) {
                const int idx = r.index_of(e.at("name").get<std::string>());
                if (idx >= 0 && e.at("se").is_number()) r.standard_errors[idx] = e.at("se").get<double>();
            }
        }
    } catch (const json::exception& e) {
        throw ModelError(std::string("results file: ") + e.what());
    }
    return out;
}

std::string posterior_to_csv(const PosteriorMatrix& post, const LongitudinalDataset& data) {
    if (static_cast<std::size_t>(post.rows()) != data.size()) throw ModelError("posterior rows do not match the dataset");
    std::ostringstream o;
    o << "id";
    for (Eigen::Index k = 0; k < post.cols(); ++k) o << ",p" << k + 1;
    o << ",modal\n";
    const auto modal = modal_labels(post);
    for (Eigen::Index i = 0; i < post.rows(); ++i) {
        o << data.rows[static_cast<std::size_t>(i)].id;
        for (Eigen::Index k = 0; k < post.cols(); ++k) o << ',' << format_double(post(i, k));
        o << ',' << modal[static_cast<std::size_t>(i)] + 1 << '\n';
    }
    return o.str();
}

PosteriorMatrix posterior_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty posterior file");
    const auto header = split_csv_line(line);
    int K = 0;
    for (const auto& h : header)
        if (h.size() > 1 && h[0] == 'p') ++K;
    if (K < 1) throw DataError("posterior file has no probability columns");
    std::vector<std::vector<double>> rows;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) < K + 1) throw DataError("posterior file row " + std::to_string(row) + ": too few cells");
        std::vector<double> v;
        try {
            for (int k = 0; k < K; ++k) v.push_back(std::stod(cells[static_cast<std::size_t>(k + 1)]));
        } catch (const std::logic_error&) {
            throw DataError("posterior file row " + std::to_string(row) + ": malformed number");
        }
        rows.push_back(v);
    }
    PosteriorMatrix p(static_cast<Eigen::Index>(rows.size()), K);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int k = 0; k < K; ++k) p(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
    return p;
}

std::vector<TrajectoryPoint> emit_trajectories(const FitResult& fit, const Vec& grid) {
    if (!fit.converged()) throw ModelError("cannot emit trajectories from a failed fit");
    std::vector<TrajectoryPoint> out;
    const auto& L = fit.spec.layout;
    const int C = L.growth_factors();
    Mat row(1, C);
    Vec t1(1);
    for (int k = 0; k < fit.spec.classes; ++k) {
        const ClassParameters& p = fit.estimates.classes[static_cast<std::size_t>(k)];
        const Vec mean = conditional_growth_moments(p, L).mean;
        for (Eigen::Index g = 0; g < grid.size(); ++g) {
            t1[0] = grid[g];
            detail::fill_outcome_loadings(p.form, t1, row);
            out.push_back({k + 1, grid[g], (row * mean)(0, 0)});
        }
    }
    return out;
}

std::string trajectories_to_csv(const std::vector<TrajectoryPoint>& pts) {
    std::ostringstream o;
    o << "class,t,value\n";
    for (const auto& p : pts) o << p.cls << ',' << format_double(p.t) << ',' << format_double(p.value) << '\n';
    return o.str();
}

std::string enumeration_to_csv(const EnumerationResult& e) {
    std::ostringstream o;
    o << "classes,converged,n_free_parameters,neg2ll,aic,bic,residual_variances,mixing_proportions,selected\n";
    for (const auto& r : e.rows) {
        o << r.classes << ',' << (r.converged ? 1 : 0) << ',' << r.n_free_parameters << ',' << format_double(r.neg2ll)
          << ',' << format_double(r.aic) << ',' << format_double(r.bic) << ',';
        for (std::size_t k = 0; k < r.residual_variances.size(); ++k)
            o << (k ? ";" : "") << format_double(r.residual_variances[k]);
        o << ',';
        for (std::size_t k = 0; k < r.mixing_proportions.size(); ++k)
            o << (k ? ";" : "") << format_double(r.mixing_proportions[k]);
        o << ',' << (r.classes == e.selected ? 1 : 0) << '\n';
    }
    return o.str();
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream o;
    o << in.rdbuf();
    return o.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << contents;
    if (!out) throw DataError("write failed for " + path);
}

}  // namespace gmmtvc
