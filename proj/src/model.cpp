#include "hawkesmix/model.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hawkesmix/common.hpp"

namespace hawkesmix {

using nlohmann::json;

HawkesParams MixtureModel::point_params(int k) const {
    HawkesParams p;
    p.num_types = num_types;
    p.num_basis = num_basis;
    p.mu.resize(num_types);
    for (int c = 0; c < num_types; ++c) p.mu[c] = kSqrtHalfPi * beta(k, c);
    const std::size_t block = static_cast<std::size_t>(num_types) * num_types * num_basis;
    p.coeffs.assign(exp_sigma.begin() + static_cast<std::ptrdiff_t>(k * block),
                    exp_sigma.begin() + static_cast<std::ptrdiff_t>((k + 1) * block));
    return p;
}

void MixtureModel::validate() const {
    if (num_clusters < 1 || num_types < 1 || num_basis < 1)
        throw invalid_input("MixtureModel: empty dimension");
    const std::size_t k = num_clusters, c = num_types, d = num_basis;
    if (alpha.size() != k || rayleigh_b.size() != k * c || exp_sigma.size() != k * c * c * d)
        throw invalid_input("MixtureModel: field size mismatch");
    if (basis.count != num_basis || basis.centers.size() != d)
        throw invalid_input("MixtureModel: basis/model dimension mismatch");
    for (double v : alpha)
        if (!(v > 0.0) || !std::isfinite(v)) throw invalid_input("MixtureModel: alpha must be > 0");
    for (double v : rayleigh_b)
        if (!(v > 0.0) || !std::isfinite(v)) throw invalid_input("MixtureModel: B must be > 0");
    for (double v : exp_sigma)
        if (!(v > 0.0) || !std::isfinite(v)) throw invalid_input("MixtureModel: Sigma must be > 0");
}

HawkesParams PointParams::cluster(int k) const {
    HawkesParams p;
    p.num_types = num_types;
    p.num_basis = num_basis;
    p.mu.assign(mu.begin() + static_cast<std::ptrdiff_t>(k) * num_types,
                mu.begin() + static_cast<std::ptrdiff_t>(k + 1) * num_types);
    const std::size_t block = static_cast<std::size_t>(num_types) * num_types * num_basis;
    p.coeffs.assign(coeffs.begin() + static_cast<std::ptrdiff_t>(k * block),
                    coeffs.begin() + static_cast<std::ptrdiff_t>((k + 1) * block));
    return p;
}

void Responsibilities::recount() {
    counts.assign(num_clusters, 0.0);
    for (std::size_t n = 0; n < num_sequences; ++n)
        for (int k = 0; k < num_clusters; ++k) counts[k] += at(n, k);
}

void save_model(const MixtureModel& model, const std::filesystem::path& file) {
    model.validate();
    const int k_count = model.num_clusters, c_count = model.num_types, d_count = model.num_basis;
    json b = json::array();
    for (int c = 0; c < c_count; ++c) {
        json row = json::array();
        for (int k = 0; k < k_count; ++k) row.push_back(model.beta(k, c));
        b.push_back(std::move(row));
    }
    json sigma = json::array();
    for (int c = 0; c < c_count; ++c) {
        json l1 = json::array();
        for (int cp = 0; cp < c_count; ++cp) {
            json l2 = json::array();
            for (int d = 0; d < d_count; ++d) {
                json l3 = json::array();
                for (int k = 0; k < k_count; ++k) l3.push_back(model.sigma(k, c, cp, d));
                l2.push_back(std::move(l3));
            }
            l1.push_back(std::move(l2));
        }
        sigma.push_back(std::move(l1));
    }
    json doc = {{"K", k_count},
                {"alpha", model.alpha},
                {"B", std::move(b)},
                {"Sigma", std::move(sigma)},
                {"basis",
                 {{"omega0", model.basis.omega0},
                  {"D", model.basis.count},
                  {"centers", model.basis.centers},
                  {"bandwidth", model.basis.bandwidth},
                  {"t_max", model.basis.t_max}}}};
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write model file: " + file.string());
    out << doc.dump(2) << '\n';
}

MixtureModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open model file: " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw invalid_input(file.string() + ": JSON parse error: " + e.what());
    }
    auto need = [&](const char* key) -> const json& {
        if (!doc.contains(key)) throw invalid_input(file.string() + ": missing field '" + key + "'");
        return doc[key];
    };
    MixtureModel model;
    model.num_clusters = need("K").get<int>();
    model.alpha = need("alpha").get<std::vector<double>>();

    const auto& basis = need("basis");
    model.basis.omega0 = basis.at("omega0").get<double>();
    model.basis.count = basis.at("D").get<int>();
    model.basis.centers = basis.at("centers").get<std::vector<double>>();
    model.basis.bandwidth = basis.at("bandwidth").get<double>();
    if (basis.contains("t_max"))
        model.basis.t_max = basis["t_max"].get<double>();
    else if (model.basis.centers.size() > 1)
        model.basis.t_max = model.basis.centers[1] * model.basis.count;
    model.num_basis = model.basis.count;

    const auto& b = need("B");
    const int c_count = static_cast<int>(b.size());
    model.num_types = c_count;
    const int k_count = model.num_clusters;
    model.rayleigh_b.assign(static_cast<std::size_t>(k_count) * c_count, 0.0);
    for (int c = 0; c < c_count; ++c)
        for (int k = 0; k < k_count; ++k) model.beta(k, c) = b.at(c).at(k).get<double>();

    const auto& sigma = need("Sigma");
    const int d_count = model.num_basis;
    model.exp_sigma.assign(static_cast<std::size_t>(k_count) * c_count * c_count * d_count, 0.0);
    for (int c = 0; c < c_count; ++c)
        for (int cp = 0; cp < c_count; ++cp)
            for (int d = 0; d < d_count; ++d)
                for (int k = 0; k < k_count; ++k)
                    model.sigma(k, c, cp, d) = sigma.at(c).at(cp).at(d).at(k).get<double>();
    model.validate();
    return model;
}

Strategy::Kind parse_strategy(const std::string& name) {
    if (name == "constant") return Strategy::Kind::Constant;
    if (name == "increasing") return Strategy::Kind::Increasing;
    if (name == "decreasing") return Strategy::Kind::Decreasing;
    if (name == "open_loop") return Strategy::Kind::OpenLoop;
    throw invalid_input("unknown strategy '" + name +
                        "' (expected constant|increasing|decreasing|open_loop)");
}

std::string strategy_name(Strategy::Kind kind) {
    switch (kind) {
        case Strategy::Kind::Constant: return "constant";
        case Strategy::Kind::Increasing: return "increasing";
        case Strategy::Kind::Decreasing: return "decreasing";
        case Strategy::Kind::OpenLoop: return "open_loop";
    }
    return "open_loop";
}

namespace {
json config_json(const FitConfig& config) {
    return {{"k_init", config.k_init},
            {"outer_iters", config.outer_iters},
            {"inner_budget", config.inner_budget},
            {"strategy", strategy_name(config.strategy.kind)},
            {"ramp_low", config.strategy.low},
            {"ramp_high", config.strategy.high},
            {"n_min", config.n_min},
            {"mcmc", config.mcmc},
            {"seed", config.seed},
            {"nll_tol", config.nll_tol},
            {"basis_eps_rel", config.basis_eps_rel},
            {"alpha0", config.alpha0}};
}
}  // namespace

std::string config_json_string(const FitConfig& config) { return config_json(config).dump(); }

void save_report(const FitReport& report, const std::filesystem::path& file) {
    json trace = json::array();
    for (const auto& row : report.trace)
        trace.push_back({{"iter", row.outer},
                         {"inner_used", row.inner_used},
                         {"nll", row.nll},
                         {"K", row.num_clusters}});
    json doc = {{"config", config_json(report.config)},
                {"trace", std::move(trace)},
                {"final_K", report.model.num_clusters},
                {"labels", report.labels}};
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write report file: " + file.string());
    out << doc.dump(2) << '\n';
}

void save_trace_csv(const FitReport& report, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw invalid_input("cannot write trace file: " + file.string());
    out << "outer_iter,cum_inner,nll,K\n";
    char buf[64];
    int cum = 0;
    for (const auto& row : report.trace) {
        cum += row.inner_used;
        std::snprintf(buf, sizeof(buf), "%.17g", row.nll);
        out << row.outer << ',' << cum << ',' << buf << ',' << row.num_clusters << '\n';
    }
}

std::vector<int> report_labels(const std::filesystem::path& file) { return load_labels(file); }

int report_final_k(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw invalid_input("cannot open report file: " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw invalid_input(file.string() + ": JSON parse error: " + e.what());
    }
    if (!doc.contains("final_K")) throw invalid_input(file.string() + ": missing field 'final_K'");
    return doc["final_K"].get<int>();
}

}  // namespace hawkesmix
